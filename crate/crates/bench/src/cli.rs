use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::{read_metrics, run_scenario, summarize, Arm, RunOptions, Scenario};
use flowplan::flowfield::save_grid;
use flowplan::GridField;

#[derive(Parser)]
#[command(
    name = "flowplan-bench",
    about = "Run and summarize flow-planning experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run every arm and seed of a scenario file (or built-in name).
    Run {
        scenario: String,
        /// Comma-separated arms, e.g. `l2-lsb,euclidean/analytic-step`.
        #[arg(long, value_delimiter = ',')]
        arms: Option<Vec<Arm>>,
        /// Seed list `1,2,5` or half-open range `0..20`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        budget_s: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Print per-arm statistics for a results directory.
    Summarize { dir: PathBuf },
    /// Sample a built-in scenario's flow onto a square grid file.
    GenGrid {
        name: String,
        resolution: usize,
        out: PathBuf,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range {s}");
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed `{x}`"))
        })
        .collect()
}

/// Executes a parsed command line and returns the text for stdout.
pub fn execute(cli: Cli) -> Result<String> {
    let mut stdout = String::new();
    match cli.command {
        Command::Run {
            scenario,
            arms,
            seeds,
            budget_s,
            max_iterations,
            out,
            workers,
        } => {
            let mut sc = Scenario::resolve(&scenario)?;
            if let Some(arms) = arms {
                sc.planner.arms = arms;
            }
            if let Some(s) = seeds {
                sc.run.seeds = parse_seeds(&s)?;
            }
            if let Some(b) = budget_s {
                sc.run.budget_s = b;
            }
            if let Some(n) = max_iterations {
                sc.run.max_iterations = n;
            }
            sc.validate()?;
            let opts = RunOptions {
                out: Some(out.clone()),
                workers,
                verbose: true,
            };
            let outcomes = run_scenario(&sc, &opts)?;
            let solved = outcomes.iter().filter(|o| o.feasible()).count();
            stdout = format!(
                "{} runs, {solved} feasible; metrics in {}\n",
                outcomes.len(),
                out.join("metrics.csv").display()
            );
        }
        Command::Summarize { dir } => {
            let rows = read_metrics(&dir.join("metrics.csv"))?;
            stdout = summarize(&rows)?.to_string();
        }
        Command::GenGrid {
            name,
            resolution,
            out,
        } => {
            if resolution < 2 {
                bail!("resolution must be at least 2");
            }
            let field = Scenario::builtin(&name)?.field()?;
            let grid = GridField::sample(&field, resolution, resolution)?;
            let mut w = BufWriter::new(
                File::create(&out).with_context(|| format!("creating {}", out.display()))?,
            );
            save_grid(&grid, &mut w)?;
            w.flush()?;
        }
    }
    Ok(stdout)
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::io::BufReader;
    use std::path::Path;

    use flowplan::flowfield::load_grid;
    use flowplan::{FlowField, Vec2};

    use super::*;

    fn bench(args: &[&str]) -> Result<String> {
        let cli =
            Cli::try_parse_from(std::iter::once("flowplan-bench").chain(args.iter().copied()))?;
        execute(cli)
    }

    fn run_quad(out: &Path, extra: &[&str]) -> Result<String> {
        let mut args = vec![
            "run",
            "quad-vortex",
            "--arms",
            "euclidean,l2-lsb",
            "--seeds",
            "0..3",
            "--max-iterations",
            "300",
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        bench(&args)
    }

    /// Metrics file with the wall-clock columns blanked.
    fn timeless(path: &Path) -> String {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| {
                let mut cols: Vec<&str> = l.split(',').collect();
                cols[4] = "";
                cols[7] = "";
                cols.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn run_writes_one_group_per_arm_and_seed() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_quad(dir.path(), &[]);
        assert!(out.is_ok(), "{:?}", out.err());
        let metrics = dir.path().join("metrics.csv");
        let text = fs::read_to_string(&metrics).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "scenario,arm,seed,iter,wall_s,connections,dispersion,first_solution_s,best_cost_s"
        );
        let rows = read_metrics(&metrics).unwrap();
        for arm in ["euclidean", "l2-lsb"] {
            for seed in 0..3 {
                let stem = format!("{arm}-seed{seed}");
                assert!(rows
                    .iter()
                    .any(|r| r.arm == arm && r.seed == seed && r.iter == 300));
                let path = dir.path().join("paths").join(format!("{stem}.txt"));
                let marker = dir.path().join("paths").join(format!("{stem}.infeasible"));
                assert!(path.exists() != marker.exists(), "{stem}");
                assert!(dir.path().join("runs").join(format!("{stem}.csv")).exists());
                let report =
                    fs::read_to_string(dir.path().join("reports").join(format!("{stem}.txt")))
                        .unwrap();
                assert!(report.contains("iter wall_s connections dispersion best_cost"));
            }
        }
        for arm_seed in rows.chunk_by(|a, b| a.arm == b.arm && a.seed == b.seed) {
            assert!(arm_seed.windows(2).all(|w| w[0].wall_s <= w[1].wall_s));
            let best: Vec<f64> = arm_seed.iter().filter_map(|r| r.best_cost_s).collect();
            assert!(best.windows(2).all(|w| w[1] <= w[0]));
        }
        let echo = Scenario::load(&dir.path().join("scenario.toml")).unwrap();
        assert_eq!(echo.run.seeds, vec![0, 1, 2]);

        let s = bench(&["summarize", dir.path().to_str().unwrap()]).unwrap();
        assert!(
            s.contains("scenario quad-vortex")
                && s.contains("[l2-lsb]")
                && s.contains("[euclidean]")
        );
    }

    #[test]
    fn reruns_match_except_wall_clock() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert!(run_quad(a.path(), &[]).is_ok());
        assert!(run_quad(b.path(), &["--workers", "2"]).is_ok());
        assert_eq!(
            timeless(&a.path().join("metrics.csv")),
            timeless(&b.path().join("metrics.csv"))
        );
    }

    #[test]
    fn zero_iterations_records_only_the_start() {
        let mut sc = Scenario::builtin("quad-vortex").unwrap();
        sc.run.max_iterations = 0;
        sc.run.seeds = vec![0, 1];
        let runs = run_scenario(&sc, &RunOptions::default()).unwrap();
        assert_eq!(runs.len(), 8);
        for r in runs {
            assert_eq!(r.records.len(), 1);
            assert_eq!(r.records[0].iter, 0);
            assert_eq!(r.records[0].connections, 0);
            assert!(!r.feasible());
        }
    }

    #[test]
    fn configuration_errors_exit_nonzero() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert!(!bench(&["run", "no-such-scenario.toml", "--out", out]).is_ok());
        assert!(!bench(&["run", "quad-vortex", "--arms", "manhattan", "--out", out]).is_ok());
        assert!(!bench(&["run", "quad-vortex", "--budget-s", "0", "--out", out]).is_ok());
        assert!(!bench(&["summarize", out]).is_ok());

        let bad = dir.path().join("bad.toml");
        let text = Scenario::builtin("still-water").unwrap().to_toml().replace(
            "kind = \"still\"",
            "kind = \"grid\"\npath = \"missing.txt\"",
        );
        fs::write(&bad, text).unwrap();
        let res = bench(&["run", bad.to_str().unwrap(), "--out", out]);
        assert!(format!("{:#}", res.unwrap_err()).contains("missing.txt"));
        assert!(!dir.path().join("metrics.csv").exists());
    }

    #[test]
    fn generated_grid_drives_a_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let grid = dir.path().join("quad.grid");
        let out = bench(&["gen-grid", "quad-vortex", "101", grid.to_str().unwrap()]);
        assert!(out.is_ok(), "{:?}", out.err());
        assert!(!bench(&["gen-grid", "gyre", "101", grid.to_str().unwrap()]).is_ok());

        let g = load_grid(BufReader::new(fs::File::open(&grid).unwrap())).unwrap();
        assert_eq!(g.dims(), (101, 101));
        let analytic = FlowField::quad_vortex(4.0, 1.0, Vec2::ZERO);
        let p = Vec2::new(0.37, 1.21);
        let d = FlowField::grid(g).velocity(p).unwrap() - analytic.velocity(p).unwrap();
        assert!(d.norm() < 1e-4);

        let text = Scenario::builtin("quad-vortex").unwrap().to_toml();
        let text = text.replacen(
            "kind = \"quad-vortex\"\namplitude = 4.0\ncell = 1.0\norigin = [0.0, 0.0]",
            "kind = \"grid\"\npath = \"quad.grid\"",
            1,
        );
        assert!(text.contains("quad.grid"));
        let file = dir.path().join("grid-scenario.toml");
        fs::write(&file, text).unwrap();
        let mut sc = Scenario::load(&file).unwrap();
        sc.run.seeds = vec![0];
        sc.run.max_iterations = 200;
        sc.planner.arms.truncate(1);
        let runs = run_scenario(&sc, &RunOptions::default()).unwrap();
        assert_eq!(runs[0].iterations, 200);
    }
}
