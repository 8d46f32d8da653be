use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use aehnn::harness::audit::AuditWindow;
use aehnn::harness::config::{RunConfig, SweepConfig};
use aehnn::harness::export::{self, load_records, records_path, write_run, CONFIG_FILE};
use aehnn::harness::pipeline::{pretrain_autoencoder, run_once};
use aehnn::harness::{ablation_sweep, rank_consistency_audit};
use aehnn::{Error, Result};

#[derive(Parser)]
#[command(name = "aehnn", version, about = "Surrogate-assisted negatively correlated search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seeds with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (or checkpoint file for `pretrain-ae`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the autoencoder and write its checkpoint.
    PretrainAe(Common),
    /// Run the search once per configured seed.
    Run(Common),
    /// Run an ablation sweep and write the comparison table.
    Sweep(Common),
    /// Compute the rank-consistency report of an audited run.
    AuditReport {
        /// Run directory or records file.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-export curves, latents and rank consistency from a record stream.
    Export {
        /// Run directory or records file.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_seed(mut cfg: RunConfig, seed: Option<u64>) -> Result<RunConfig> {
    if let Some(s) = seed {
        cfg.seeds = vec![s];
        cfg.validate()?;
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

/// The audit window stored next to a record stream, if any.
fn stored_window(run: &Path) -> AuditWindow {
    let dir = if run.is_dir() { run } else { run.parent().unwrap_or(Path::new(".")) };
    std::fs::read_to_string(dir.join(CONFIG_FILE))
        .ok()
        .and_then(|t| toml::from_str::<RunConfig>(&t).ok())
        .map(|c| c.audit.window)
        .unwrap_or_default()
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::PretrainAe(c) => {
            let cfg = with_seed(RunConfig::load(&c.config)?, c.seed)?;
            let seed = cfg.seeds[0];
            let target = match c.out {
                Some(p) if p.extension().is_some_and(|e| e == "json") => p,
                other => out_dir(other, &cfg).join("autoencoder.json"),
            };
            if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let pre = pretrain_autoencoder(&cfg, &cfg.build_problem()?, seed)?;
            pre.autoencoder.save(&target)?;
            print(json!({
                "command": "pretrain-ae",
                "seed": seed,
                "checkpoint": target,
                "epochs": pre.losses.len(),
                "final_loss": pre.losses.last(),
                "reconstruction_mse": pre.reconstruction_mse,
            }));
        }
        Command::Run(c) => {
            let cfg = with_seed(RunConfig::load(&c.config)?, c.seed)?;
            let out = out_dir(c.out, &cfg);
            for &seed in &cfg.seeds {
                let outcome = run_once(&cfg, seed)?;
                let dir = out.join(format!("seed-{seed}"));
                write_run(&dir, &cfg, seed, &outcome)?;
                print(json!({
                    "command": "run",
                    "seed": seed,
                    "dir": dir,
                    "generations": outcome.records.len(),
                    "real_evaluations": outcome.real_evaluations,
                    "best_fitness": outcome.best_fitness,
                }));
            }
        }
        Command::Sweep(c) => {
            let mut cfg = SweepConfig::load(&c.config)?;
            cfg.base = with_seed(cfg.base, c.seed)?;
            let out = out_dir(c.out, &cfg.base);
            let table = ablation_sweep(&cfg, Some(&out))?;
            for cell in &table.cells {
                print(json!({
                    "command": "sweep",
                    "cell": cell.name,
                    "mean_best": cell.summary.mean,
                    "std_best": cell.summary.std,
                    "repetitions": cell.summary.count,
                }));
            }
        }
        Command::AuditReport { run, from, to, out } => {
            let records = load_records(&records_path(&run))?;
            let stored = stored_window(&run);
            let window = AuditWindow {
                from: from.unwrap_or(stored.from),
                to: to.unwrap_or(stored.to),
            };
            let report = rank_consistency_audit(&records, window)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let csv = dir.join(export::RANK_FILE);
                std::fs::write(&csv, export::rank_csv(Some(&report))).map_err(|e| Error::io(&csv, e))?;
                let js = dir.join(export::RANK_REPORT_FILE);
                std::fs::write(&js, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&js, e))?;
            }
            print(json!({
                "command": "audit-report",
                "window": report.window,
                "rho": report.rho,
                "tau": report.tau,
                "undefined": report.undefined,
            }));
        }
        Command::Export { run, out } => {
            let path = records_path(&run);
            let records = load_records(&path)?;
            let dir = out.unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
            export::export_results(&records, stored_window(&run), &dir)?;
            print(json!({ "command": "export", "dir": dir, "generations": records.len() }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let fields = match &e {
                Error::Config(f) => serde_json::to_value(f).unwrap_or_default(),
                _ => serde_json::Value::Null,
            };
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string(), "fields": fields }));
            ExitCode::FAILURE
        }
    }
}
