//! Run artifacts on disk: the JSON-lines record stream, summaries and CSV exports.
//!
//! Everything written here except `timings.csv` is a pure function of the configuration
//! and seed, so repeated runs and re-exports are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::audit::{rank_consistency_audit, AuditWindow, RankConsistencyReport};
use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::ncs::{GenerationRecord, GenerationTiming, RunOutcome};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const LATENTS_FILE: &str = "latents.csv";
pub const RANK_FILE: &str = "rank_consistency.csv";
pub const RANK_REPORT_FILE: &str = "rank_consistency.json";
pub const MODEL_FILE: &str = "classifier.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub problem: String,
    pub dim: usize,
    pub embedding: Option<String>,
    pub surrogate: String,
    pub generations: usize,
    pub real_evaluations: u64,
    pub audit_evaluations: u64,
    pub initial_best_fitness: f64,
    pub best_fitness: f64,
    pub best_id: u64,
    pub best: Vec<f64>,
}

impl RunSummary {
    pub fn new(cfg: &RunConfig, seed: u64, outcome: &RunOutcome) -> Self {
        Self {
            seed,
            problem: cfg.problem.name.clone(),
            dim: outcome.best.len(),
            embedding: cfg.uses_embedding().then(|| cfg.embedding.kind.as_str().to_string()),
            surrogate: cfg.surrogate.kind.as_str().to_string(),
            generations: outcome.records.len(),
            real_evaluations: outcome.real_evaluations,
            audit_evaluations: outcome.audit_evaluations,
            initial_best_fitness: outcome
                .initial_fitness
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            best_fitness: outcome.best_fitness,
            best_id: outcome.best_id,
            best: outcome.best.clone(),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn records_to_jsonl(records: &[GenerationRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<GenerationRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Locates the record stream of a run given either the run directory or the file.
pub fn records_path(run: &Path) -> PathBuf {
    if run.is_dir() {
        run.join(RECORDS_FILE)
    } else {
        run.to_path_buf()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn curves_csv(records: &[GenerationRecord]) -> String {
    let mut out = String::from("generation,real_evaluations_used,best_so_far_fitness,generation_best_fitness,accepted\n");
    for r in records {
        let gen_best = r
            .subpopulations
            .iter()
            .map(|s| s.fitness)
            .fold(f64::NEG_INFINITY, f64::max);
        let accepted = r.subpopulations.iter().filter(|s| s.accepted).count();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.generation, r.real_evaluations_used, r.best_so_far.fitness, gen_best, accepted
        )
        .unwrap();
    }
    out
}

pub fn latents_csv(records: &[GenerationRecord]) -> String {
    let m = records
        .iter()
        .flat_map(|r| &r.subpopulations)
        .find_map(|s| s.latent.as_ref().map(Vec::len))
        .unwrap_or(0);
    let mut out = String::from("generation,subpopulation,evaluation_id,fitness,score,accepted");
    for k in 0..m {
        write!(out, ",z{k}").unwrap();
    }
    out.push('\n');
    for r in records {
        for s in &r.subpopulations {
            let Some(z) = &s.latent else { continue };
            write!(
                out,
                "{},{},{},{},{},{}",
                r.generation,
                s.index,
                s.evaluation_id,
                s.fitness,
                s.scores.get(s.selected).copied().unwrap_or(f64::NAN),
                u8::from(s.accepted)
            )
            .unwrap();
            for v in z {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn rank_csv(report: Option<&RankConsistencyReport>) -> String {
    let mut out = String::from("generation,samples,rho,tau,included\n");
    for g in report.map(|r| r.generations.as_slice()).unwrap_or_default() {
        writeln!(
            out,
            "{},{},{},{},{}",
            g.generation,
            g.samples,
            opt(g.rho),
            opt(g.tau),
            u8::from(g.included)
        )
        .unwrap();
    }
    out
}

pub fn timings_csv(timings: &[GenerationTiming]) -> String {
    let mut out = String::from("generation,inner_loop_ms,training_ms,total_ms\n");
    for t in timings {
        writeln!(out, "{},{},{},{}", t.generation, t.inner_loop_ms, t.training_ms, t.total_ms).unwrap();
    }
    out
}

/// Audit report of a record stream, or `None` when the run was not audited.
pub fn audit_report(records: &[GenerationRecord], window: AuditWindow) -> Result<Option<RankConsistencyReport>> {
    match rank_consistency_audit(records, window) {
        Ok(r) => Ok(Some(r)),
        Err(Error::MissingAudit(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Writes the curve, latent and rank-consistency files. An empty stream yields
/// header-only files.
pub fn export_results(records: &[GenerationRecord], window: AuditWindow, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let report = audit_report(records, window)?;
    write_file(&out.join(CURVES_FILE), &curves_csv(records))?;
    write_file(&out.join(LATENTS_FILE), &latents_csv(records))?;
    write_file(&out.join(RANK_FILE), &rank_csv(report.as_ref()))?;
    if let Some(r) = &report {
        write_file(&out.join(RANK_REPORT_FILE), &(serde_json::to_string_pretty(r)? + "\n"))?;
    }
    Ok(())
}

/// Persists one finished repetition into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, seed: u64, outcome: &RunOutcome) -> Result<()> {
    ensure_dir(dir)?;
    let mut resolved = cfg.clone();
    resolved.seeds = vec![seed];
    resolved.out = None;
    write_file(&dir.join(CONFIG_FILE), &resolved.to_toml())?;
    write_file(&dir.join(RECORDS_FILE), &records_to_jsonl(&outcome.records)?)?;
    let summary = RunSummary::new(cfg, seed, outcome);
    write_file(&dir.join(SUMMARY_FILE), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    write_file(&dir.join(TIMINGS_FILE), &timings_csv(&outcome.timings))?;
    if let Some(model) = &outcome.final_model {
        model.save(&dir.join(MODEL_FILE))?;
    }
    export_results(&outcome.records, cfg.audit.window, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stream_gives_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        export_results(&[], AuditWindow::default(), dir.path()).unwrap();
        for f in [CURVES_FILE, LATENTS_FILE, RANK_FILE] {
            let text = fs::read_to_string(dir.path().join(f)).unwrap();
            assert_eq!(text.lines().count(), 1, "{f}");
        }
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = export_results(&[], AuditWindow::default(), &blocker.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
