use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::run::MetricsRecord;

#[derive(Debug, Error, PartialEq)]
pub enum SummaryError {
    #[error("no metrics records")]
    Empty,
    #[error("records mix scenarios `{0}` and `{1}`")]
    MixedScenarios(String, String),
}

/// Normal-approximation band of three standard errors (99.7%).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn of(xs: &[f64]) -> Band {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let half = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            3.0 * (var / n).sqrt()
        } else {
            0.0
        };
        Band {
            mean,
            lo: mean - half,
            hi: mean + half,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRow {
    pub iter: usize,
    pub connections: Band,
    pub dispersion: Band,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: String,
    pub runs: usize,
    pub feasible_runs: usize,
    /// Iterations recorded by every run of the arm.
    pub aligned: Vec<AlignedRow>,
    /// `(wall_s, fraction of runs solved by then)` at each first-solution time.
    pub success: Vec<(f64, f64)>,
    pub median_first_solution_s: Option<f64>,
    pub median_best_cost_s: Option<f64>,
}

impl ArmSummary {
    pub fn at(&self, iter: usize) -> Option<&AlignedRow> {
        self.aligned.iter().find(|r| r.iter == iter)
    }

    /// Fraction of runs solved by wall time `t`.
    pub fn success_at(&self, t: f64) -> f64 {
        self.success
            .iter()
            .take_while(|(s, _)| *s <= t)
            .last()
            .map_or(0.0, |(_, f)| *f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub arms: Vec<ArmSummary>,
}

impl Summary {
    pub fn arm(&self, name: &str) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.arm == name)
    }
}

/// Median where absent values rank above everything; `None` when the
/// median itself is absent.
pub fn median_of(values: &[Option<f64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    m.is_finite().then_some(m)
}

/// Median of observed values, ignoring absent ones.
pub fn median(values: &[f64]) -> Option<f64> {
    median_of(&values.iter().map(|&x| Some(x)).collect::<Vec<_>>())
}

pub fn summarize(records: &[MetricsRecord]) -> Result<Summary, SummaryError> {
    let first = records.first().ok_or(SummaryError::Empty)?;
    if let Some(other) = records.iter().find(|r| r.scenario != first.scenario) {
        return Err(SummaryError::MixedScenarios(
            first.scenario.clone(),
            other.scenario.clone(),
        ));
    }
    // arm -> seed -> rows, keeping first-seen arm order.
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, BTreeMap<u64, Vec<&MetricsRecord>>> = BTreeMap::new();
    for r in records {
        if !groups.contains_key(r.arm.as_str()) {
            order.push(&r.arm);
        }
        groups
            .entry(&r.arm)
            .or_default()
            .entry(r.seed)
            .or_default()
            .push(r);
    }
    let arms = order
        .into_iter()
        .map(|arm| {
            let runs = &groups[arm];
            let mut common: Option<BTreeSet<usize>> = None;
            for rows in runs.values() {
                let iters: BTreeSet<usize> = rows.iter().map(|r| r.iter).collect();
                common = Some(match common {
                    None => iters,
                    Some(c) => c.intersection(&iters).copied().collect(),
                });
            }
            let aligned = common
                .unwrap_or_default()
                .into_iter()
                .map(|iter| {
                    let at: Vec<&MetricsRecord> = runs
                        .values()
                        .filter_map(|rows| rows.iter().find(|r| r.iter == iter).copied())
                        .collect();
                    AlignedRow {
                        iter,
                        connections: Band::of(
                            &at.iter().map(|r| r.connections as f64).collect::<Vec<_>>(),
                        ),
                        dispersion: Band::of(&at.iter().map(|r| r.dispersion).collect::<Vec<_>>()),
                    }
                })
                .collect();
            let last: Vec<&MetricsRecord> = runs
                .values()
                .map(|rows| *rows.iter().max_by_key(|r| r.iter).expect("non-empty group"))
                .collect();
            let firsts: Vec<Option<f64>> = last.iter().map(|r| r.first_solution_s).collect();
            let mut solved: Vec<f64> = firsts.iter().flatten().copied().collect();
            solved.sort_by(f64::total_cmp);
            let n = runs.len() as f64;
            let success = solved
                .iter()
                .enumerate()
                .map(|(i, &t)| (t, (i + 1) as f64 / n))
                .collect();
            ArmSummary {
                arm: arm.to_string(),
                runs: runs.len(),
                feasible_runs: solved.len(),
                aligned,
                success,
                median_first_solution_s: median_of(&firsts),
                median_best_cost_s: median_of(
                    &last.iter().map(|r| r.best_cost_s).collect::<Vec<_>>(),
                ),
            }
        })
        .collect();
    Ok(Summary {
        scenario: first.scenario.clone(),
        arms,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.scenario)?;
        writeln!(
            f,
            "connections count new-vertex insertions; bands are mean +/- 3 standard errors"
        )?;
        writeln!(
            f,
            "{:<26} {:>5} {:>8} {:>16} {:>16}",
            "arm", "runs", "solved", "median_first_s", "median_cost_s"
        )?;
        for a in &self.arms {
            writeln!(
                f,
                "{:<26} {:>5} {:>8} {:>16} {:>16}",
                a.arm,
                a.runs,
                a.feasible_runs,
                opt(a.median_first_solution_s),
                opt(a.median_best_cost_s)
            )?;
        }
        for a in &self.arms {
            writeln!(f)?;
            writeln!(f, "[{}]", a.arm)?;
            writeln!(
                f,
                "{:>8} {:>28} {:>28}",
                "iter", "connections", "dispersion"
            )?;
            for r in &a.aligned {
                writeln!(
                    f,
                    "{:>8} {:>10.1} [{:>7.1},{:>7.1}] {:>10.4} [{:>7.4},{:>7.4}]",
                    r.iter,
                    r.connections.mean,
                    r.connections.lo,
                    r.connections.hi,
                    r.dispersion.mean,
                    r.dispersion.lo,
                    r.dispersion.hi
                )?;
            }
            if !a.success.is_empty() {
                writeln!(f, "success over wall time:")?;
                for (t, frac) in &a.success {
                    writeln!(f, "  {t:.4} s  {:.0}%", 100.0 * frac)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(arm: &str, seed: u64, iter: usize, conn: usize, first: Option<f64>) -> MetricsRecord {
        MetricsRecord {
            scenario: "s".into(),
            arm: arm.into(),
            seed,
            iter,
            wall_s: iter as f64 * 1e-3,
            connections: conn,
            dispersion: 1.0 / (1.0 + conn as f64),
            first_solution_s: first,
            best_cost_s: first.map(|t| 10.0 - t),
        }
    }

    #[test]
    fn single_group_means_are_raw_values() {
        let rows = vec![rec("a", 0, 0, 0, None), rec("a", 0, 100, 40, Some(0.5))];
        let s = summarize(&rows).unwrap();
        let a = s.arm("a").unwrap();
        let r = a.at(100).unwrap();
        assert_eq!(
            r.connections,
            Band {
                mean: 40.0,
                lo: 40.0,
                hi: 40.0
            }
        );
        assert_eq!(r.dispersion.mean, 1.0 / 41.0);
        assert_eq!(a.median_first_solution_s, Some(0.5));
        assert_eq!(a.median_best_cost_s, Some(9.5));
    }

    #[test]
    fn success_curve_is_cumulative() {
        let mut rows = Vec::new();
        for (seed, first) in [(0, Some(0.3)), (1, None), (2, Some(0.1)), (3, Some(0.2))] {
            rows.push(rec("a", seed, 0, 0, None));
            rows.push(rec("a", seed, 100, 10 + seed as usize, first));
        }
        let s = summarize(&rows).unwrap();
        let a = s.arm("a").unwrap();
        assert_eq!(a.success, vec![(0.1, 0.25), (0.2, 0.5), (0.3, 0.75)]);
        assert!(a
            .success
            .windows(2)
            .all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        assert_eq!(a.success_at(0.0), 0.0);
        assert_eq!(a.success_at(0.25), 0.5);
        assert_eq!(a.feasible_runs, 3);
        // Unsolved runs rank last: sorted {0.1, 0.2, 0.3, inf}.
        assert_eq!(a.median_first_solution_s, Some(0.25));
    }

    #[test]
    fn aligned_iterations_are_shared_ones() {
        let rows = vec![
            rec("a", 0, 0, 0, None),
            rec("a", 0, 100, 5, None),
            rec("a", 0, 137, 6, None),
            rec("a", 1, 0, 0, None),
            rec("a", 1, 100, 7, None),
        ];
        let s = summarize(&rows).unwrap();
        let it: Vec<usize> = s.arms[0].aligned.iter().map(|r| r.iter).collect();
        assert_eq!(it, vec![0, 100]);
        assert_eq!(s.arms[0].at(100).unwrap().connections.mean, 6.0);
        assert_eq!(s.arms[0].median_first_solution_s, None);
    }

    #[test]
    fn errors() {
        assert_eq!(summarize(&[]), Err(SummaryError::Empty));
        let mut b = rec("a", 0, 0, 0, None);
        b.scenario = "t".into();
        assert!(matches!(
            summarize(&[rec("a", 0, 0, 0, None), b]),
            Err(SummaryError::MixedScenarios(..))
        ));
    }

    #[test]
    fn band_and_median() {
        let b = Band::of(&[1.0, 2.0, 3.0]);
        assert_eq!(b.mean, 2.0);
        assert!((b.hi - b.mean - 3.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median_of(&[Some(1.0), None, None]), None);
        assert_eq!(median_of(&[]), None);
    }
}
