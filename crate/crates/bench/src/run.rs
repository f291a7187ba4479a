use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use flowplan::planner::{extract_segments, PlanResult, Planner, Segment};
use flowplan::propagate::{Trajectory, Workspace};
use flowplan::sampling::HaltonSampler;
use flowplan::FlowField;
use serde::{Deserialize, Serialize};

use crate::scenario::{Arm, Scenario};

/// One CSV row; wall-clock columns are `wall_s` and `first_solution_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario: String,
    pub arm: String,
    pub seed: u64,
    pub iter: usize,
    pub wall_s: f64,
    pub connections: usize,
    pub dispersion: f64,
    pub first_solution_s: Option<f64>,
    pub best_cost_s: Option<f64>,
}

/// What is kept of one arm-seed run once its tree is dropped.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub arm: Arm,
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub iterations: usize,
    pub first_solution_iter: Option<usize>,
    pub best_cost: Option<f64>,
    pub segments: Option<Vec<Segment>>,
    pub path: Option<Trajectory>,
}

impl RunOutcome {
    pub fn feasible(&self) -> bool {
        self.best_cost.is_some()
    }

    pub fn first_solution_s(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.first_solution_s)
    }

    pub fn at(&self, iter: usize) -> Option<&MetricsRecord> {
        self.records.iter().find(|r| r.iter == iter)
    }
}

pub fn records(scenario: &str, arm: Arm, seed: u64, r: &PlanResult) -> Vec<MetricsRecord> {
    r.metrics
        .iter()
        .map(|m| MetricsRecord {
            scenario: scenario.to_string(),
            arm: arm.to_string(),
            seed,
            iter: m.iteration,
            wall_s: m.wall_s,
            connections: m.connections,
            dispersion: m.dispersion,
            first_solution_s: r
                .first_solution
                .filter(|f| f.iteration <= m.iteration)
                .map(|f| f.wall_s),
            best_cost_s: m.best_cost,
        })
        .collect()
}

/// Plans one arm with the sampler drawn from `seed`.
pub fn plan_once(
    sc: &Scenario,
    field: &FlowField,
    ws: &Workspace,
    arm: Arm,
    seed: u64,
) -> Result<PlanResult> {
    let planner = Planner::new(field, ws, sc.planner_config(arm))?;
    let mut sampler = HaltonSampler::seeded(seed, ws.bounds);
    Ok(planner.plan(sc.start(), sc.goal(), &mut sampler)?)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Artifact directory; nothing is written when absent.
    pub out: Option<PathBuf>,
    pub workers: usize,
    /// Progress lines on stderr.
    pub verbose: bool,
}

fn run_one(
    sc: &Scenario,
    field: &FlowField,
    ws: &Workspace,
    arm: Arm,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let result = plan_once(sc, field, ws, arm, seed)?;
    let outcome = RunOutcome {
        arm,
        seed,
        records: records(&sc.name, arm, seed, &result),
        iterations: result.iterations,
        first_solution_iter: result.first_solution.map(|f| f.iteration),
        best_cost: result.best_cost,
        segments: extract_segments(&result.tree).ok(),
        path: result.path_trajectory(),
    };
    if let Some(dir) = &opts.out {
        write_run(dir, sc, &outcome, &result)?;
    }
    if opts.verbose {
        let status = match outcome.best_cost {
            Some(c) => format!("best cost {c:.4} s"),
            None => "infeasible".to_string(),
        };
        eprintln!(
            "{} {arm} seed {seed}: {} iterations, {} connections, {status}",
            sc.name, outcome.iterations, result.connections
        );
    }
    Ok(outcome)
}

fn run_stem(arm: Arm, seed: u64) -> String {
    format!("{}-seed{seed}", arm.slug())
}

fn write_csv(path: &Path, rows: &[MetricsRecord]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_run(dir: &Path, sc: &Scenario, o: &RunOutcome, result: &PlanResult) -> Result<()> {
    let stem = run_stem(o.arm, o.seed);
    write_csv(&dir.join("runs").join(format!("{stem}.csv")), &o.records)?;
    let paths = dir.join("paths");
    match &o.path {
        Some(t) => {
            let mut f = BufWriter::new(File::create(paths.join(format!("{stem}.txt")))?);
            t.write_to(&mut f)?;
            f.flush()?;
        }
        None => fs::write(paths.join(format!("{stem}.infeasible")), "infeasible\n")?,
    }
    let echo = format!("{}arm = \"{}\"\nseed = {}\n", sc.to_toml(), o.arm, o.seed);
    let mut f = BufWriter::new(File::create(
        dir.join("reports").join(format!("{stem}.txt")),
    )?);
    result.write_report(&echo, &mut f)?;
    f.flush()?;
    Ok(())
}

/// Runs every arm-seed pair and, with an output directory, writes per-run
/// CSV, path and report files plus the merged `metrics.csv`.
///
/// The flow is built and validated before any run starts.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<Vec<RunOutcome>> {
    sc.validate()?;
    let field = sc.field()?;
    let ws = sc.workspace();
    if let Some(dir) = &opts.out {
        for sub in ["runs", "paths", "reports"] {
            fs::create_dir_all(dir.join(sub))
                .with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(dir.join("scenario.toml"), sc.to_toml())?;
    }
    let jobs: Vec<(Arm, u64)> = sc
        .planner
        .arms
        .iter()
        .flat_map(|&a| sc.run.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let slots: Mutex<Vec<Option<Result<RunOutcome>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = opts.workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(arm, seed)) = jobs.get(i) else {
                    break;
                };
                let out = run_one(sc, &field, &ws, arm, seed, opts);
                slots.lock().expect("no poisoned workers")[i] = Some(out);
            });
        }
    });
    let outcomes = slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|o| o.expect("every job ran"))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &opts.out {
        let all: Vec<MetricsRecord> = outcomes
            .iter()
            .flat_map(|o| o.records.iter().cloned())
            .collect();
        write_csv(&dir.join("metrics.csv"), &all)?;
    }
    Ok(outcomes)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = r.deserialize().collect::<Result<Vec<MetricsRecord>, _>>()?;
    Ok(rows)
}
