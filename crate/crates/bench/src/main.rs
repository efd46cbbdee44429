use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use doma_bench::plan::{ExperimentPlan, Mode, Preset, SolverSettings};
use doma_bench::plot::render_plots;
use doma_bench::run::{run_and_write, scalarization, solve_mode, utopia_options};
use doma_core::allocation::AssignmentStrategy;
use doma_core::network::{generate_scenario, Scenario};
use doma_core::oracle::{exhaustive_best, GridSpec, OracleObjective};
use doma_core::scalarization::utopia_points;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "doma-bench",
    version,
    about = "Drops, solves and plots for overlapped-subband uplink allocation"
)]
struct Cli {
    /// Directory for every file written. Also read from DOMA_OUTPUT_DIR.
    #[arg(long, global = true, env = "DOMA_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random drop and save it as JSON.
    Generate {
        #[command(flatten)]
        drop: DropArgs,
        /// File name inside the output directory.
        #[arg(long)]
        name: Option<String>,
    },
    /// Solve one scalarized problem and print the result as JSON.
    Solve {
        #[command(flatten)]
        drop: DropArgs,
        #[arg(long, default_value = "POD")]
        mode: Mode,
        #[arg(long, default_value_t = 0.5)]
        omega: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run an experiment plan, write its CSV and render the figures.
    Sweep {
        /// TOML plan.
        config: PathBuf,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the first seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Render the figures of an existing CSV.
    Plot { csv: PathBuf },
    /// Exhaustive grid search of one instance (small drops only).
    Oracle {
        #[command(flatten)]
        drop: DropArgs,
        #[arg(long, default_value = "POD")]
        mode: Mode,
        #[arg(long, default_value_t = 0.5)]
        omega: f64,
        /// Grid points per power axis.
        #[arg(long, default_value_t = 21)]
        grid_points: usize,
        /// Grid points per overlap axis.
        #[arg(long, default_value_t = 11)]
        overlap_points: usize,
    },
}

#[derive(Args)]
struct DropArgs {
    /// Load the drop from JSON instead of generating it.
    #[arg(long, conflicts_with_all = ["preset", "seed", "ues_per_ap"])]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "tiny")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ues_per_ap: Option<usize>,
    /// Cluster capacity for every AP and subband.
    #[arg(long)]
    capacity: Option<usize>,
}

impl DropArgs {
    fn scenario(&self) -> Result<Scenario> {
        let scn = match &self.scenario {
            Some(path) => {
                Scenario::load(path).with_context(|| format!("loading {}", path.display()))?
            }
            None => {
                let mut cfg = self.preset.config().with_seed(self.seed);
                if let Some(u) = self.ues_per_ap {
                    cfg = cfg.with_ues_per_ap(u);
                }
                if let Some(l) = self.capacity {
                    cfg = cfg.with_capacity(l);
                }
                return Ok(generate_scenario(&cfg)?);
            }
        };
        Ok(match self.capacity {
            Some(l) => scn.with_capacity(l)?,
            None => scn,
        })
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Penalty weight alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Upper bound Lambda on lambda.
    #[arg(long)]
    lambda_bound: Option<f64>,
    #[arg(long)]
    tol_gap: Option<f64>,
    #[arg(long)]
    tol_bisect: Option<f64>,
    /// Iteration cap of each pinned solve.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    relaxed_max_iter: Option<usize>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<AssignmentStrategy>,
}

fn parse_strategy(s: &str) -> Result<AssignmentStrategy, String> {
    match s {
        "auto" => Ok(AssignmentStrategy::Auto),
        "relaxed" => Ok(AssignmentStrategy::Relaxed),
        "enumerate" => Ok(AssignmentStrategy::Enumerate),
        _ => Err(format!(
            "unknown strategy {s:?}; expected auto, relaxed or enumerate"
        )),
    }
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        let mut s = SolverSettings::default();
        if let Some(v) = self.alpha {
            s.penalty = v;
        }
        s.lambda_bound = self.lambda_bound.or(s.lambda_bound);
        if let Some(v) = self.tol_gap {
            s.tol_gap = v;
        }
        if let Some(v) = self.tol_bisect {
            s.tol_bisect = v;
        }
        if let Some(v) = self.max_iter {
            s.max_iter = v;
        }
        if let Some(v) = self.relaxed_max_iter {
            s.relaxed_max_iter = v;
        }
        if let Some(v) = self.strategy {
            s.strategy = v;
        }
        s
    }
}

/// Prints a JSON report; a closed pipe (e.g. `| head`) is not an error.
fn print_json(report: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn out_dir(cli: &Option<PathBuf>) -> PathBuf {
    cli.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn mode_scenario(scn: &Scenario, mode: Mode) -> Result<Scenario> {
    Ok(match mode.capacity_override() {
        Some(l) => scn.with_capacity(l)?,
        None => scn.clone(),
    })
}

fn sweep(
    plan_path: &Path,
    output_dir: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    plots: bool,
) -> Result<()> {
    let mut plan = ExperimentPlan::load(plan_path)
        .with_context(|| format!("loading {}", plan_path.display()))?;
    if let Some(dir) = output_dir {
        plan.output_dir = dir;
    }
    if let Some(t) = trials {
        plan.trials = t;
    }
    if let Some(s) = seed {
        plan.base_seed = s;
    }
    let csv = run_and_write(&plan)?;
    println!("{}", csv.display());
    if plots {
        match render_plots(&csv, &plan.output_dir) {
            Ok(paths) => paths.iter().for_each(|p| println!("{}", p.display())),
            Err(e) => log::warn!("no plots: {e}"),
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { drop, name } => {
            let scn = drop.scenario()?;
            let path = out_dir(&cli.output_dir)
                .join(name.unwrap_or_else(|| format!("drop-{}.json", drop.seed)));
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            scn.save(&path)?;
            println!("{}", path.display());
        }
        Command::Solve {
            drop,
            mode,
            omega,
            solver,
        } => {
            let settings = solver.settings();
            let base = drop.scenario()?;
            let utopia = utopia_points(&base, &utopia_options(&settings))?;
            let scn = mode_scenario(&base, mode)?;
            let config = scalarization(&settings, omega, utopia, &scn)?;
            let start = Instant::now();
            let outcome = solve_mode(&scn, mode, &config, &settings, &[])?;
            let report = json!({
                "mode": mode.label(),
                "omega": omega,
                "status": outcome.status.as_str(),
                "lambda": outcome.objective,
                "iterations": outcome.iterations,
                "work": outcome.work,
                "utopia": utopia,
                "allocation": outcome.allocation,
                "wall_time_s": start.elapsed().as_secs_f64(),
            });
            print_json(&report)?;
        }
        Command::Sweep {
            config,
            trials,
            seed,
            no_plots,
        } => sweep(&config, cli.output_dir, trials, seed, !no_plots)?,
        Command::Plot { csv } => {
            for p in render_plots(&csv, &out_dir(&cli.output_dir))? {
                println!("{}", p.display());
            }
        }
        Command::Oracle {
            drop,
            mode,
            omega,
            grid_points,
            overlap_points,
        } => {
            let base = drop.scenario()?;
            let utopia = utopia_points(&base, &utopia_options(&SolverSettings::default()))?;
            let scn = mode_scenario(&base, mode)?;
            let config = scalarization(&SolverSettings::default(), omega, utopia, &scn)?;
            let grid =
                GridSpec::new(grid_points, mode.overlap_mode()).with_overlap_points(overlap_points);
            let size = grid.size(&scn);
            if size > doma_core::oracle::DEFAULT_GRID_CAP as u128 {
                bail!("grid of {size} points is beyond the oracle's cap; use a smaller drop or fewer grid points");
            }
            let best = exhaustive_best(&scn, &grid, &OracleObjective::Tchebycheff(config))?;
            let report = match best {
                Some(b) => json!({
                    "mode": mode.label(),
                    "omega": omega,
                    "lambda": b.value,
                    "evaluated": b.evaluated,
                    "assignment": b.assignment,
                    "powers": b.powers,
                    "overlap": b.overlap,
                    "metrics": b.metrics,
                }),
                None => json!({ "mode": mode.label(), "omega": omega, "lambda": null }),
            };
            print_json(&report)?;
        }
    }
    Ok(())
}
