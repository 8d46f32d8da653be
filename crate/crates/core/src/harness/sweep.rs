//! Ablation sweeps over embedding, surrogate and curvature with matched seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::audit::Summary;
use super::config::{CellSpec, EmbeddingKind, SweepConfig};
use super::export::write_run;
use super::pipeline::{build_embedding_of_kind, execute};
use crate::embedding::Embedding;
use crate::error::{Error, Result};

pub const SWEEP_TABLE_FILE: &str = "sweep.csv";
pub const SWEEP_JSON_FILE: &str = "sweep.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub name: String,
    pub cell: CellSpec,
    /// Final best fitness per seed, in seed order.
    pub final_best: Vec<f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub problem: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellResult>,
}

impl SweepTable {
    pub fn cell(&self, name: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,embedding,surrogate,curvature,repetitions,mean_best,std_best,min_best,max_best\n");
        for c in &self.cells {
            let min = c.final_best.iter().copied().fold(f64::INFINITY, f64::min);
            let max = c.final_best.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let uses_embedding = c.cell.surrogate.needs_embedding();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.name,
                if uses_embedding { c.cell.embedding.as_str() } else { "" },
                c.cell.surrogate.as_str(),
                c.cell.curvature.map(|v| v.to_string()).unwrap_or_default(),
                c.summary.count,
                c.summary.mean,
                c.summary.std,
                min,
                max
            )
            .unwrap();
        }
        out
    }
}

/// Runs every cell for every seed. Cells that share a seed and embedding kind share
/// the pretrained embedding. With `out`, each repetition is written to
/// `out/<cell>/seed-<seed>/` and the table to `out/sweep.csv`.
pub fn ablation_sweep(cfg: &SweepConfig, out: Option<&Path>) -> Result<SweepTable> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let seeds = cfg.base.seeds.clone();
    let problem = cfg.base.build_problem()?;

    let mut needed: Vec<(EmbeddingKind, u64)> = cells
        .iter()
        .filter(|c| c.surrogate.needs_embedding())
        .flat_map(|c| seeds.iter().map(move |&s| (c.embedding, s)))
        .collect();
    needed.sort();
    needed.dedup();
    let embeddings: BTreeMap<(EmbeddingKind, u64), Embedding> = needed
        .par_iter()
        .map(|&(kind, seed)| Ok(((kind, seed), build_embedding_of_kind(&cfg.base, kind, &problem, seed)?)))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let finals: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cell = &cells[c];
            let run_cfg = cfg.cell_config(cell);
            let embedding = cell
                .surrogate
                .needs_embedding()
                .then(|| embeddings[&(cell.embedding, seed)].clone());
            let outcome = execute(&run_cfg, seed, embedding)?;
            if let Some(dir) = out {
                write_run(&dir.join(cell.name()).join(format!("seed-{seed}")), &run_cfg, seed, &outcome)?;
            }
            Ok(outcome.best_fitness)
        })
        .collect::<Result<_>>()?;

    let results = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let final_best: Vec<f64> = finals[c * seeds.len()..(c + 1) * seeds.len()].to_vec();
            let summary = Summary::of(&final_best).ok_or(Error::InvalidArgument("sweep without seeds".into()))?;
            Ok(CellResult {
                name: cell.name(),
                cell: cell.clone(),
                final_best,
                summary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = SweepTable {
        problem: cfg.base.problem.name.clone(),
        seeds,
        cells: results,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(SWEEP_TABLE_FILE);
        std::fs::write(&csv, table.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join(SWEEP_JSON_FILE);
        std::fs::write(&json, serde_json::to_string_pretty(&table)? + "\n").map_err(|e| Error::io(&json, e))?;
    }
    Ok(table)
}
