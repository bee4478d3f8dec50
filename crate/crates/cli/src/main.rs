use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use glx_cli::config::RunConfig;
use glx_cli::ode::{cmd_solve_ode, OdeRequest, SourceSpec};
use glx_cli::pipeline::{cmd_simulate, load, prepare};
use glx_cli::sweep::{cmd_sweep, Axis};
use glx_cli::verify::{cmd_verify, Recipe};
use glx_cli::{with_workers, CliError, CliResult};
use glx_core::gn::estimate_cgn;
use glx_core::Grid;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "glx", version, about = "Extinction experiments for damped complex diffusion")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "GLX_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[output] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write its artifacts.
    Simulate(RunArgs),
    /// Run a config once per value of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// theta, m, a-modulus, mu, dt, h or L.
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Run a built-in verification recipe, or `all`.
    Verify {
        recipe: String,
        /// Also write the artifacts of every recipe simulation here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the interpolation constant on a grid.
    EstimateGn {
        #[arg(long)]
        m: f64,
        /// Take dimension and grid from this config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 10.0)]
        half_width: f64,
        #[arg(long, default_value_t = 255)]
        points: usize,
        #[arg(long, default_value_t = 256)]
        family_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve z' + alpha z^delta = g and print CSV.
    SolveOde {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        /// Initial value; defaults to the closed-form start for `extinction:T0`.
        #[arg(long)]
        z0: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt_out: f64,
        /// zero, constant:C, extinction:T0 or piecewise:K1,K2:V0,V1,V2.
        #[arg(long, default_value = "zero")]
        source: SourceSpec,
        /// Second source for the stability columns.
        #[arg(long, requires = "z0_2")]
        compare: Option<SourceSpec>,
        #[arg(long)]
        z0_2: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a config and print its derived constants.
    CheckAdmissible {
        #[arg(long)]
        config: PathBuf,
    },
}

fn print_json(value: &impl Serialize, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::runtime),
        None => writeln!(io::stdout().lock(), "{text}").map_err(CliError::runtime),
    }
}

#[derive(Serialize)]
struct Admissibility<'a> {
    admissible: bool,
    params: &'a glx_core::PhysicalParams,
    constants: &'a Option<glx_core::DerivedConstants>,
    profile_check: &'a glx_core::forcing::ProfileCheck,
    initial_mass: f64,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => {
            let report = cmd_simulate(&args.config, args.out.as_deref(), args.seed)?;
            match &report.extinction {
                Some(e) => eprintln!(
                    "T* observed {:?}, bound {:.6}, satisfied {}",
                    e.t_star_observed, e.t_star_bound, e.bound_satisfied
                ),
                None => eprintln!("final mass {:.6e} at t = {}", report.final_mass, report.final_time),
            }
            Ok(())
        }
        Command::Sweep { run, axis, values } => {
            let values: Vec<f64> = values
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().with_context(|| format!("bad sweep value `{s}`")))
                .collect::<anyhow::Result<_>>()
                .map_err(CliError::validation)?;
            let rows = cmd_sweep(&run.config, axis, &values, run.out.as_deref(), cli.workers, run.seed)?;
            eprintln!("{} runs completed", rows.len());
            Ok(())
        }
        Command::Verify { recipe, out } => {
            let recipes = if recipe == "all" {
                Recipe::ALL.to_vec()
            } else {
                vec![recipe.parse::<Recipe>().map_err(CliError::validation)?]
            };
            let stdout = io::stdout();
            let mut failure = None;
            for r in recipes {
                let mut lock = stdout.lock();
                if let Err(e) = cmd_verify(r, out.as_deref(), &mut lock) {
                    eprintln!("{e}");
                    failure = Some(failure.map_or(e.kind, |k: glx_cli::FailureKind| {
                        if k.exit_code() >= e.exit_code() {
                            k
                        } else {
                            e.kind
                        }
                    }));
                }
            }
            match failure {
                Some(kind) => Err(CliError {
                    kind,
                    error: anyhow::anyhow!("verification failed"),
                }),
                None => Ok(()),
            }
        }
        Command::EstimateGn {
            m,
            config,
            dim,
            half_width,
            points,
            family_size,
            seed,
            out,
        } => {
            let grid = match config {
                Some(path) => RunConfig::load(&path).and_then(|c| c.grid()).map_err(CliError::validation)?,
                None => Grid::new(dim, half_width, points).map_err(CliError::validation)?,
            };
            let est = estimate_cgn(m, &grid, family_size, seed).map_err(CliError::validation)?;
            print_json(&est, out.as_deref())
        }
        Command::SolveOde {
            alpha,
            delta,
            z0,
            t0,
            t_end,
            dt_out,
            source,
            compare,
            z0_2,
            out,
        } => {
            let req = OdeRequest {
                alpha,
                delta,
                z0,
                t0,
                t_end,
                dt_out,
                source,
                compare: compare.zip(z0_2),
            };
            match out {
                Some(path) => {
                    let file = File::create(&path)
                        .with_context(|| format!("cannot create {}", path.display()))
                        .map_err(CliError::runtime)?;
                    let mut w = BufWriter::new(file);
                    cmd_solve_ode(&req, &mut w)?;
                    w.flush().map_err(CliError::runtime)
                }
                None => cmd_solve_ode(&req, &mut io::stdout().lock()),
            }
        }
        Command::CheckAdmissible { config } => {
            let (cfg, base) = load(&config)?;
            let prepared = prepare(&cfg, &base)?;
            print_json(
                &Admissibility {
                    admissible: true,
                    params: &prepared.params,
                    constants: &prepared.constants,
                    profile_check: &prepared.profile_check,
                    initial_mass: prepared.u0.mass_l2(),
                },
                None,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let workers = cli.workers;
    let result = with_workers(workers, || run(cli)).and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
