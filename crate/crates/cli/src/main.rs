use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sisac::experiments::{self, Scale, SweepSpec};
use sisac::scenario::{build_scenario, Proximity, Scenario, ScenarioFile};
use sisac::sdp::SolveStatus;
use sisac::sigmodel;
use sisac::DesignSolution;

#[derive(Parser)]
#[command(name = "sisac", version, about = "Secure ISAC waveform design for cell-free MIMO")]
struct Cli {
    /// Scenario seed (target gains and UE draws).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    scale: Option<ScaleArg>,
    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProximityArg {
    Distant,
    Close,
}

#[derive(Subcommand)]
enum Command {
    /// Run the property suite.
    Validate {
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve one instance and print the solution dossier.
    Solve {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Write the dossier here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also export the conic program in SDPA sparse format.
        #[arg(long)]
        sdpa: Option<PathBuf>,
    },
    /// Run a sweep described by a TOML file.
    Sweep {
        spec: PathBuf,
        /// Output directory (overrides the spec).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one instance and write the AN beampatterns on an angle grid.
    Beampattern {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Grid step in degrees.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Use `a^H R a` instead of `||a^H R||^2`.
        #[arg(long)]
        quadratic: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Scenario file; the reference layout when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Common SINR floor (linear).
    #[arg(long)]
    gamma: Option<f64>,
    /// Eve SNR ceiling in dB.
    #[arg(long, allow_hyphen_values = true)]
    psi_db: Option<f64>,
    #[arg(long, value_enum, default_value = "distant")]
    proximity: ProximityArg,
    /// UE-placement trial index.
    #[arg(long, default_value_t = 0)]
    trial: u64,
}

enum Outcome {
    Ok,
    ValidationFailed,
    Infeasible,
    SolverFailed,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(match o {
            Outcome::Ok => 0,
            Outcome::ValidationFailed => 1,
            Outcome::Infeasible => 2,
            Outcome::SolverFailed => 3,
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(o) => o.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn scenario(cli: &Cli, args: &InstanceArgs) -> Result<Scenario> {
    let mut file = match &args.config {
        Some(p) => ScenarioFile::load(p)?,
        None => ScenarioFile::paper_layout(1),
    };
    if let Some(seed) = cli.seed {
        file.seed = seed;
    }
    if let Some(scale) = cli.scale {
        Scale::from(scale).apply(&mut file);
    }
    if let Some(g) = args.gamma {
        file.set_gamma(g);
    }
    if let Some(p) = args.psi_db {
        file.set_psi_db(p);
    }
    let prox = match args.proximity {
        ProximityArg::Distant => Proximity::Distant,
        ProximityArg::Close => Proximity::Close,
    };
    Ok(build_scenario(file.resolve(args.trial, prox)?)?)
}

fn status_outcome(sol: &DesignSolution) -> Outcome {
    match sol.report.status {
        SolveStatus::Optimal => Outcome::Ok,
        SolveStatus::Infeasible => {
            let family = sol.report.diagnosis.map_or("unknown", |d| d.as_str());
            eprintln!("infeasible: first failing constraint family is {family}");
            Outcome::Infeasible
        }
        SolveStatus::NumericalFailure => {
            eprintln!("solver failure: {}", sol.report.message);
            Outcome::SolverFailed
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Validate { csv } => {
            let report = experiments::run_validation(cli.seed.unwrap_or(1))?;
            for c in &report.checks {
                println!(
                    "{:<20} {}  measured {:.3e}  threshold {:.3e}  {}",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.measured,
                    c.threshold,
                    c.detail
                );
            }
            if let Some(p) = csv {
                report.write_csv(File::create(p)?)?;
            }
            Ok(if report.passed() { Outcome::Ok } else { Outcome::ValidationFailed })
        }
        Command::Solve { instance, out, sdpa } => {
            let scn = scenario(&cli, instance)?;
            if let Some(p) = sdpa {
                let problem = sisac::sdp::build_problem_for(&scn);
                problem.write_sdpa(&mut BufWriter::new(File::create(p)?))?;
            }
            let sol = experiments::solve_and_analyze(&scn)?;
            let mut w = output(out)?;
            sol.write_report(&scn, &mut w)?;
            w.flush()?;
            Ok(status_outcome(&sol))
        }
        Command::Sweep { spec, out } => {
            let mut spec = SweepSpec::load(spec)?;
            if let Some(seed) = cli.seed {
                spec.seed = Some(seed);
            }
            if let Some(scale) = cli.scale {
                spec.scale = Some(scale.into());
            }
            if out.is_some() {
                spec.output_dir.clone_from(out);
            }
            let res = experiments::run_sweep(&spec, cli.workers)?;
            match &spec.output_dir {
                Some(dir) => {
                    res.write_outputs(dir)?;
                    eprintln!("wrote {} rows to {}", res.rows.len(), dir.display());
                }
                None => res.write_summary_csv(io::stdout().lock())?,
            }
            Ok(Outcome::Ok)
        }
        Command::Beampattern {
            instance,
            step,
            quadratic,
            out,
        } => {
            anyhow::ensure!(*step > 0.0 && *step <= 10.0, "step must lie in (0, 10] degrees");
            let scn = scenario(&cli, instance)?;
            let sol = experiments::solve_and_analyze(&scn)?;
            let outcome = status_outcome(&sol);
            if !matches!(outcome, Outcome::Ok) {
                return Ok(outcome);
            }
            let grid = sigmodel::angle_grid_deg(*step);
            let patterns = sol
                .vars
                .r
                .iter()
                .map(|r| {
                    if *quadratic {
                        sigmodel::an_beampattern_quadratic(r, &grid)
                    } else {
                        sigmodel::an_beampattern(r, &grid)
                    }
                })
                .collect::<sisac::Result<Vec<_>>>()?;
            let mut w = output(out)?;
            writeln!(w, "ap,theta_deg,gain_db,power")?;
            for (m, bp) in patterns.iter().enumerate() {
                for i in 0..grid.len() {
                    writeln!(
                        w,
                        "{},{:.4},{:.6},{:.10e}",
                        m + 1,
                        grid[i].to_degrees(),
                        bp.gain_db[i],
                        bp.power[i]
                    )?;
                }
            }
            w.flush()?;
            Ok(Outcome::Ok)
        }
    }
}
