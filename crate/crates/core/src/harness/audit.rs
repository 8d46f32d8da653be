//! Rank consistency between surrogate scores and true fitness on audited candidates.

use serde::{Deserialize, Serialize};

use super::rank::{kendall_tau, spearman_rho};
use crate::error::{Error, Result};
use crate::ncs::GenerationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditWindow {
    /// First generation included in the aggregate.
    pub from: u64,
    /// Last generation included in the aggregate.
    pub to: u64,
}

impl Default for AuditWindow {
    fn default() -> Self {
        Self { from: 10, to: 50 }
    }
}

impl AuditWindow {
    pub fn contains(&self, generation: u64) -> bool {
        (self.from..=self.to).contains(&generation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRank {
    pub generation: u64,
    pub samples: usize,
    /// `None` when either ranking is constant.
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub included: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankConsistencyReport {
    pub window: AuditWindow,
    pub generations: Vec<GenerationRank>,
    pub rho: Option<Summary>,
    pub tau: Option<Summary>,
    /// Generations in the window whose correlation was undefined.
    pub undefined: usize,
}

/// Correlates scores with true fitness over all audited candidates of each generation.
pub fn rank_consistency_audit(
    records: &[GenerationRecord],
    window: AuditWindow,
) -> Result<RankConsistencyReport> {
    if records
        .iter()
        .all(|r| r.subpopulations.iter().all(|s| s.audit.is_empty()))
        && !records.is_empty()
    {
        return Err(Error::MissingAudit("run has no audited candidates".into()));
    }
    let mut generations = Vec::with_capacity(records.len());
    let (mut rhos, mut taus, mut undefined) = (Vec::new(), Vec::new(), 0);
    for rec in records {
        let (scores, fitness): (Vec<f64>, Vec<f64>) = rec
            .subpopulations
            .iter()
            .flat_map(|s| s.audit.iter().map(|a| (a.score, a.fitness)))
            .unzip();
        let defined = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedCorrelation(_)) => Ok(None),
            Err(e) => Err(e),
        };
        let rho = defined(spearman_rho(&scores, &fitness))?;
        let tau = defined(kendall_tau(&scores, &fitness))?;
        let in_window = window.contains(rec.generation);
        let included = in_window && rho.is_some() && tau.is_some();
        if included {
            rhos.extend(rho);
            taus.extend(tau);
        } else if in_window {
            undefined += 1;
        }
        generations.push(GenerationRank {
            generation: rec.generation,
            samples: scores.len(),
            rho,
            tau,
            included,
        });
    }
    Ok(RankConsistencyReport {
        window,
        generations,
        rho: Summary::of(&rhos),
        tau: Summary::of(&taus),
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncs::{AuditEntry, BestSoFar, SubpopulationRecord};

    fn record(generation: u64, audit: Vec<(f64, f64)>) -> GenerationRecord {
        GenerationRecord {
            generation,
            real_evaluations_used: 0,
            evaluations_this_generation: 1,
            subpopulations: vec![SubpopulationRecord {
                index: 0,
                selected: 0,
                scores: vec![],
                evaluation_id: 0,
                fitness: 0.0,
                parent_fitness: 0.0,
                parent_diversity: 0.0,
                child_diversity: 0.0,
                accepted: false,
                sigma: 1.0,
                sigma_adapted: false,
                latent: None,
                audit: audit
                    .into_iter()
                    .enumerate()
                    .map(|(candidate, (score, fitness))| AuditEntry {
                        candidate,
                        score,
                        fitness,
                    })
                    .collect(),
            }],
            best_so_far: BestSoFar { id: 0, fitness: 0.0 },
            surrogate: None,
        }
    }

    #[test]
    fn constant_scores_are_flagged_and_excluded() {
        let recs = vec![
            record(0, vec![(0.5, 1.0), (0.5, 2.0), (0.5, 3.0)]),
            record(1, vec![(0.1, 1.0), (0.2, 2.0), (0.3, 3.0)]),
        ];
        let rep = rank_consistency_audit(&recs, AuditWindow { from: 0, to: 1 }).unwrap();
        assert_eq!(rep.generations[0].rho, None);
        assert!(!rep.generations[0].included);
        assert_eq!(rep.undefined, 1);
        assert_eq!(rep.rho.unwrap().mean, 1.0);
        assert_eq!(rep.rho.unwrap().count, 1);
    }

    #[test]
    fn missing_audit_is_an_error() {
        let recs = vec![record(0, vec![])];
        assert!(matches!(
            rank_consistency_audit(&recs, AuditWindow::default()),
            Err(Error::MissingAudit(_))
        ));
    }

    #[test]
    fn window_bounds_are_inclusive() {
        let w = AuditWindow { from: 10, to: 50 };
        assert!(w.contains(10) && w.contains(50));
        assert!(!w.contains(9) && !w.contains(51));
    }
}
