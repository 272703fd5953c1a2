use std::path::PathBuf;
use std::process::ExitCode;

use abphase_cli::commands::{self, AnalyticQuery, LegShape, SweepParameter};
use abphase_cli::ScenarioConfig;
use abphase_core::constants::DEFAULT_SPEED_OF_LIGHT;
use abphase_core::{Constants, RedshiftMode};
use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Two-arm wavepacket interferometry: electric Aharonov-Bohm phase and its
/// weak-field gravitational analog.
#[derive(Parser)]
#[command(name = "abphase", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a closed-form phase.
    Analytic(AnalyticArgs),
    /// Run one scenario and write report.json, history.csv and fringes.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit non-zero when |numeric - analytic| exceeds --tol.
        #[arg(long = "assert")]
        check: bool,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Repeat at half the step and report both residuals.
        #[arg(long)]
        convergence: bool,
    },
    /// Run a scenario once per value of one parameter and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParameter,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Run a gravitational scenario on the semi-covariant and proper-time routes.
    CompareRoutes {
        #[arg(long)]
        config: PathBuf,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(long, global = true, default_value_t = 1.0)]
    hbar: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_SPEED_OF_LIGHT)]
    c: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    m: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    e: f64,
    #[command(subcommand)]
    formula: Formula,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    WeakField,
}

impl From<Mode> for RedshiftMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => RedshiftMode::Exact,
            Mode::WeakField => RedshiftMode::WeakField,
        }
    }
}

#[derive(Subcommand)]
enum Formula {
    /// (m M / hbar)(1/R2 - 1/R1) dwell
    Newtonian {
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long = "R2")]
        r2: f64,
        #[arg(long = "M")]
        mass: f64,
        #[arg(long)]
        dwell: f64,
    },
    /// (e/hbar)(V1 - V2) dwell
    Elevator {
        #[arg(long = "V1", allow_negative_numbers = true)]
        v1: f64,
        #[arg(long = "V2", allow_negative_numbers = true)]
        v2: f64,
        #[arg(long)]
        dwell: f64,
    },
    /// Exact and weak-field red-shift factors at radius R.
    Redshift {
        #[arg(long = "M")]
        mass: f64,
        #[arg(long = "R")]
        radius: f64,
    },
    /// Electric loop phase of the arm programs in a scenario file.
    Electric {
        #[arg(long)]
        config: PathBuf,
    },
    /// Loop integral over elevator paths with shaped ascent and descent legs.
    Loop {
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long = "R2")]
        r2: f64,
        #[arg(long = "M")]
        mass: f64,
        #[arg(long)]
        dwell: f64,
        #[arg(long, default_value_t = 1.0)]
        leg: f64,
        #[arg(long, value_enum, default_value = "linear")]
        shape: LegShape,
    },
    /// Phase from free evolution in each arm's proper time.
    ProperTime {
        #[arg(long = "R1")]
        r1: f64,
        #[arg(long = "R2")]
        r2: f64,
        #[arg(long = "M")]
        mass: f64,
        #[arg(long)]
        dwell: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, value_enum, default_value = "weak-field")]
        mode: Mode,
    },
}

fn analytic(args: AnalyticArgs) -> Result<()> {
    let constants = Constants::new(args.hbar, args.c, args.m, args.e)?;
    let query = match args.formula {
        Formula::Newtonian {
            r1,
            r2,
            mass,
            dwell,
        } => AnalyticQuery::Newtonian {
            r1,
            r2,
            mass,
            dwell,
        },
        Formula::Elevator { v1, v2, dwell } => AnalyticQuery::Elevator { v1, v2, dwell },
        Formula::Redshift { mass, radius } => AnalyticQuery::Redshift { mass, radius },
        Formula::Electric { config } => AnalyticQuery::Electric {
            config: Box::new(ScenarioConfig::load(&config)?),
        },
        Formula::Loop {
            r1,
            r2,
            mass,
            dwell,
            leg,
            shape,
        } => AnalyticQuery::Loop {
            r1,
            r2,
            mass,
            dwell,
            leg,
            shape,
        },
        Formula::ProperTime {
            r1,
            r2,
            mass,
            dwell,
            p,
            mode,
        } => AnalyticQuery::ProperTime {
            r1,
            r2,
            mass,
            dwell,
            momentum: p,
            mode: mode.into(),
        },
    };
    for (name, value) in commands::analytic(&query, &constants)? {
        println!("{name} = {value:e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analytic(args) => analytic(args)?,
        Command::Simulate {
            config,
            out,
            check,
            tol,
            convergence,
        } => {
            let report = commands::simulate(&ScenarioConfig::load(&config)?, &out, convergence)?;
            let c = &report.comparison;
            println!("numeric_phase = {:e}", c.numeric_phase);
            println!("analytic_phase = {:e}", c.analytic_phase);
            println!("residual = {:e}", c.residual);
            println!("momentum_drift = {:e}", c.momentum_drift);
            println!("norm_drift = {:e}", c.norm_drift);
            println!("fringe_shift = {:e}", report.fringe_shift);
            if let Some(k) = report.convergence {
                println!("half_step_residual = {:e}", k.half_residual);
                println!("convergence_ratio = {:e}", k.ratio);
            }
            let within = c.residual.abs() <= tol;
            if check && !within {
                eprintln!("residual {:e} exceeds tolerance {tol:e}", c.residual);
                return Ok(ExitCode::from(3));
            }
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
            workers,
        } => {
            let rows = commands::sweep(
                &ScenarioConfig::load(&config)?,
                param,
                &values,
                workers,
                &out,
            )?;
            println!(
                "{} runs written to {}",
                rows.len(),
                out.join("sweep.csv").display()
            );
        }
        Command::CompareRoutes { config } => {
            let r = commands::compare_routes(&ScenarioConfig::load(&config)?)?;
            println!("semi-covariant = {:e}", r.semi_covariant);
            println!("proper-time = {:e}", r.proper_time);
            println!("difference = {:e}", r.difference);
            println!("kinetic-correction = {:e}", r.kinetic_correction);
        }
    }
    Ok(ExitCode::SUCCESS)
}
