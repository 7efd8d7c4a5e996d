use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weightsim::harness::{self, HarnessError, RunConfig};
use weightsim::service::{self, ServiceConfig};

#[derive(Parser)]
#[command(name = "weightsim", version, about = "Pseudo-haptic weight simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a recorded trace through the full pipeline.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run synthetic participants under both C/D conditions.
    Cohort {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit a power-law calibration to measured points.
    Calibrate {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve live sessions on ws://<bind>:<port>/session.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn output_path(cli: Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    cli.or_else(|| cfg.output.as_ref().map(|p| cfg.resolve(p)))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Replay { trace, config, out } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = harness::replay(&cfg, Some(&trace))?;
            for rejected in &outcome.rejected_actions {
                tracing::warn!("rejected action {rejected}");
            }
            match output_path(out, &cfg) {
                Some(path) => harness::write_json(&path, &outcome.report)?,
                None => println!("{}", serde_json::to_string_pretty(&outcome.report).unwrap_or_default()),
            }
        }
        Command::Cohort { config, n, seed, out, csv } => {
            let cfg = RunConfig::load(&config)?;
            let report = harness::simulate_cohort(&cfg, n, seed)?;
            match output_path(out, &cfg) {
                Some(path) => harness::write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default()),
            }
            if let Some(path) = csv {
                let file = File::create(&path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
                harness::write_cohort_csv(&report, BufWriter::new(file))?;
            }
            for s in &report.per_condition {
                println!(
                    "{:?} {:?}: agents={} total_attempts={} mean={:.3} sd={:.3}",
                    s.game, s.condition, s.agents, s.total_attempts, s.mean_attempts, s.sd_attempts
                );
            }
        }
        Command::Calibrate { points, out } => {
            let (model, residuals) = harness::calibrate(&points)?;
            harness::write_json(&out, &model)?;
            println!("a = {:.9} b = {:.9}", model.a, model.b);
            for ((adc, force), r) in model.points.iter().zip(&residuals) {
                println!("adc {adc:>4}  measured {force:>10.6} N  residual {r:+.3e} N");
            }
            let max = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            println!("max |residual| = {max:.3e} N");
        }
        Command::Serve { port, bind, config } => {
            let mut service_cfg = ServiceConfig::default();
            if let Some(path) = config {
                let cfg = RunConfig::load(&path)?;
                service_cfg.dynamics = cfg.effective_dynamics();
                service_cfg.geometry = cfg.geometry.clone();
                service_cfg.settings = cfg.service.clone();
                if cfg.calibration.is_some() {
                    service_cfg.calibration = cfg.glove_calibration()?;
                } else {
                    tracing::warn!("no calibration configured; using reference curves");
                }
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|source| HarnessError::Io { path: PathBuf::from("<runtime>"), source })?;
            let addr = SocketAddr::new(bind, port);
            runtime
                .block_on(service::serve_addr(addr, service_cfg))
                .map_err(|source| HarnessError::Io { path: PathBuf::from(addr.to_string()), source })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env().add_directive(tracing::Level::INFO.into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
