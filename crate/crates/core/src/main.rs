use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use agepop::analysis::{find_equilibria, net_reproduction_rate, solve_malthusian};
use agepop::bounds::{allee_threshold, compute_bound};
use agepop::experiments::{run_scenario, sweep, Scenario};
use agepop::io::load_model;
use agepop::model::{validate, CheckStatus, ModelSpec, ProbeGrid};
use agepop::solver::{GridSpec, Simulator, SolverOptions};
use agepop::stability::{analyze_stability, Classification};
use agepop::{export, Error};

#[derive(Parser)]
#[command(name = "agepop", version, about = "Density-dependent age-structured population models")]
struct Cli {
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Time and age step.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Simulation horizon.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model against the standing hypotheses.
    Validate { model: PathBuf },
    /// Run a scenario file.
    Simulate { scenario: PathBuf },
    /// Net reproduction number.
    R0 { model: PathBuf },
    /// Real root of the Lotka equation.
    Malthusian { model: PathBuf },
    /// Equilibria with weighted size up to `--pmax`.
    Equilibria {
        model: PathBuf,
        #[arg(long)]
        pmax: f64,
    },
    /// Characteristic roots at an equilibrium.
    Stability {
        model: PathBuf,
        /// Index into the equilibrium list (0 is the trivial one).
        #[arg(long, default_value_t = 0)]
        equilibrium: usize,
        /// Scan range for the equilibrium list; defaults to ten times the bound.
        #[arg(long)]
        pmax: Option<f64>,
        /// Exit with status 4 when the classification is inconclusive.
        #[arg(long)]
        require_certain: bool,
    },
    /// A-priori bound on the newborn function.
    Bound { model: PathBuf },
    /// Sub-reproduction box and extinction threshold.
    Allee {
        model: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        cap: f64,
    },
    /// Run a scenario once per sweep value.
    Sweep { scenario: PathBuf },
}

fn load(path: &Path) -> Result<ModelSpec> {
    load_model(path).with_context(|| format!("loading {}", path.display()))
}

fn grid_for(cli: &Cli, spec: &ModelSpec) -> GridSpec {
    let h = cli.h.unwrap_or(spec.a_dagger / 1000.0);
    GridSpec::new(h, cli.horizon.unwrap_or(20.0 * spec.a_dagger))
}

fn initial_rho(cli: &Cli, spec: &ModelSpec) -> Result<f64> {
    let sim = Simulator::new(spec, grid_for(cli, spec), SolverOptions::default())?;
    Ok(sim.initial_state().rho)
}

fn scenario(cli: &Cli, path: &Path) -> Result<Scenario> {
    let mut sc = Scenario::load(path)?;
    if let Some(out) = &cli.out {
        sc.out = Some(out.clone());
    }
    if let Some(h) = cli.h {
        sc.grid.h = h;
    }
    if let Some(t) = cli.horizon {
        sc.grid.horizon = t;
    }
    if let Some(tol) = cli.tol {
        sc.tol = tol;
    }
    Ok(sc)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let tol = cli.tol.unwrap_or(1e-10);
    match &cli.command {
        Command::Validate { model } => {
            let spec = load(model)?;
            let report = validate(&spec, &ProbeGrid::default())?;
            for c in &report.checks {
                let status = match c.status {
                    CheckStatus::Pass => "pass",
                    CheckStatus::Fail => "FAIL",
                    CheckStatus::NotChecked => "not checked",
                };
                match c.witness {
                    Some((a, x)) if c.status == CheckStatus::Fail => {
                        println!("{:<22} {status}  at a = {a}, x = {x}: {}", c.name, c.detail)
                    }
                    _ => println!("{:<22} {status}  {}", c.name, c.detail),
                }
            }
            if let Some(out) = &cli.out {
                export::write_json(&report, &out.join("validation.json"))?;
            }
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Simulate { scenario: path } => {
            let sc = scenario(cli, path)?;
            let rec = run_scenario(&sc)?;
            println!("R0             {}", rec.r0);
            if let Some(l) = rec.lambda {
                println!("lambda         {l}");
            }
            if let Some(b) = &rec.bound {
                println!("bound          {}", b.bound);
            }
            println!("classification {}", rec.classification);
            for d in &rec.diagnostics {
                println!("note: {d}");
            }
            println!("artifacts in   {}", sc.out_dir().display());
        }
        Command::R0 { model } => println!("{}", net_reproduction_rate(&load(model)?)),
        Command::Malthusian { model } => println!("{}", solve_malthusian(&load(model)?, tol)?),
        Command::Equilibria { model, pmax } => {
            let eqs = find_equilibria(&load(model)?, *pmax, tol)?;
            println!("P_star,Q_star,rho_star,residual");
            for e in &eqs {
                println!("{},{},{},{}", e.p_star, e.q_star, e.rho_star, e.residual);
            }
            if let Some(out) = &cli.out {
                export::write_equilibria(&eqs, &out.join("equilibria.csv"))?;
            }
        }
        Command::Stability {
            model,
            equilibrium,
            pmax,
            require_certain,
        } => {
            let spec = load(model)?;
            let pmax = match pmax {
                Some(p) => *p,
                None => 10.0 * compute_bound(&spec, initial_rho(cli, &spec)?)
                    .context("no --pmax given and no bound available")?
                    .bound,
            };
            let eqs = find_equilibria(&spec, pmax, tol)?;
            let eq = eqs
                .get(*equilibrium)
                .with_context(|| format!("only {} equilibria found", eqs.len()))?;
            let report = analyze_stability(&spec, eq, tol)?;
            println!("re,im,residual,multiplicity");
            for r in &report.roots {
                println!("{},{},{},{}", r.re, r.im, r.residual, r.multiplicity);
            }
            println!("{}", export::classification_line(&report));
            if let Some(out) = &cli.out {
                export::write_stability(&report, &out.join("stability.csv"))?;
            }
            if *require_certain && report.classification == Classification::Inconclusive {
                return Ok(ExitCode::from(4));
            }
        }
        Command::Bound { model } => {
            let spec = load(model)?;
            let cert = compute_bound(&spec, initial_rho(cli, &spec)?)?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            if let Some(out) = &cli.out {
                export::write_json(&cert, &out.join("bound.json"))?;
            }
        }
        Command::Allee { model, cap } => {
            let thr = allee_threshold(&load(model)?, *cap)?;
            println!("{}", serde_json::to_string_pretty(&thr)?);
            if let Some(out) = &cli.out {
                export::write_json(&thr, &out.join("allee.json"))?;
            }
        }
        Command::Sweep { scenario: path } => {
            let sc = scenario(cli, path)?;
            let records = sweep(&sc)?;
            println!("value,R0,lambda,classification,rho_final");
            for r in &records {
                let class = r.error.as_deref().map(|e| format!("error ({e})")).unwrap_or(r.classification.to_string());
                println!(
                    "{},{},{},{},{}",
                    r.sweep_value.unwrap_or(f64::NAN),
                    r.r0,
                    r.lambda.map(|l| l.to_string()).unwrap_or_default(),
                    class,
                    r.rho_final.map(|v| v.to_string()).unwrap_or_default()
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<Error>().map(Error::exit_code).unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
