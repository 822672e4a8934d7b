use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use bomuse_cli::experiment::{curves_csv, paired_wins, regret_curves, run_plan, summarize, tidy_csv, Plan};
use bomuse_cli::report::verify_theory;
use bomuse_core::{Mode, Session};
use bomuse_service::{Defaults, Store};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bomuse", version, about = "Human-AI teaming Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare arms over seeds on a built-in benchmark.
    Run {
        #[arg(long, default_value = "matyas")]
        benchmark: String,
        /// Comma-separated: bo_muse, generic_bo, human_only, human_plus_pure_exploration.
        #[arg(long, value_delimiter = ',', default_value = "bo_muse,generic_bo,human_only,human_plus_pure_exploration")]
        modes: Vec<String>,
        /// Comma-separated seeds; defaults to 0..repeats.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Runs per mode; must equal the number of seeds when both are given.
        #[arg(long)]
        repeats: Option<usize>,
        /// BO-Muse batches; each arm spends twice this many evaluations.
        #[arg(long, default_value_t = 10)]
        batches: usize,
        #[arg(long, default_value_t = 3)]
        init: usize,
        /// Observation noise std in objective units (default 1% of range).
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Directory for runs.csv and curves.csv.
        #[arg(long, default_value = "bomuse-out")]
        out: PathBuf,
    },
    /// One machine-only session, written as CSV (stdout without --out).
    Session {
        #[arg(long, default_value = "matyas")]
        benchmark: String,
        #[arg(long, default_value = "bo_muse")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        batches: usize,
        #[arg(long, default_value_t = 3)]
        init: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized audits of the power-mean and variance inequalities.
    VerifyTheory {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        bracket_instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Audit a deliberately wrong mean (negative control).
        #[arg(long)]
        faulty_mean: bool,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, env = "BOMUSE_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, env = "BOMUSE_DATA_DIR", default_value = "bomuse-sessions")]
        data_dir: PathBuf,
        /// Defaults for sessions created from a benchmark name.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
}

fn parse_modes(names: &[String]) -> Result<Vec<Mode>> {
    names.iter().map(|n| Mode::parse(n.trim()).map_err(Into::into)).collect()
}

fn resolve_seeds(seeds: Option<Vec<u64>>, repeats: Option<usize>) -> Result<Vec<u64>> {
    let seeds = match (seeds, repeats) {
        (Some(s), Some(r)) if s.len() != r => bail!("--repeats {r} does not match {} seeds", s.len()),
        (Some(s), _) => s,
        (None, r) => (0..r.unwrap_or(10) as u64).collect(),
    };
    if seeds.is_empty() {
        bail!("need at least one seed");
    }
    Ok(seeds)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { benchmark, modes, seeds, repeats, batches, init, sigma, zeta, delta, out } => {
            let modes = parse_modes(&modes)?;
            let seeds = resolve_seeds(seeds, repeats)?;
            if batches == 0 {
                bail!("--batches must be positive");
            }
            let mut plan = Plan::new(&benchmark, modes.clone(), seeds.clone(), batches, init);
            plan.sigma = sigma;
            plan.zeta = zeta;
            plan.delta = delta;
            let results = run_plan(&plan)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            fs::write(out.join("runs.csv"), tidy_csv(&results))?;
            fs::write(out.join("curves.csv"), curves_csv(&regret_curves(&results)))?;
            println!("{benchmark}: {init} initial + {} evaluations, {} seeds", 2 * batches, seeds.len());
            println!("{:<30} {:>14} {:>14}", "mode", "median r_T", "mean r_T");
            for s in summarize(&results, &modes) {
                println!("{:<30} {:>14.6e} {:>14.6e}", s.mode.as_str(), s.median_final_regret, s.mean_final_regret);
            }
            if modes.contains(&Mode::BoMuse) {
                for other in modes.iter().filter(|m| **m != Mode::BoMuse) {
                    let (w, n) = paired_wins(&results, Mode::BoMuse, *other);
                    println!("bo_muse <= {:<28} on {w}/{n} seeds", other.as_str());
                }
            }
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Session { benchmark, mode, seed, batches, init, out } => {
            let plan = Plan::new(&benchmark, vec![], vec![], batches, init);
            let mut session = Session::new(plan.config(Mode::parse(&mode)?, seed)?)?;
            while !session.is_finished() {
                session.run_batch(None)?;
            }
            let csv = session.export_csv(true);
            match out {
                Some(path) => fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyTheory { trials, bracket_instances, seed, faulty_mean } => {
            let report = verify_theory(trials, bracket_instances, seed, faulty_mean)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Serve { bind, data_dir, sigma, zeta, delta } => {
            let defaults = Defaults { delta, zeta, sigma };
            let store = Store::open(&data_dir)?;
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
                tracing::info!(addr = %listener.local_addr()?, dir = %data_dir.display(), "serving");
                bomuse_service::serve_with(listener, Arc::new(store), defaults, shutdown_signal()).await?;
                tracing::info!("stopped");
                Ok::<_, anyhow::Error>(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
