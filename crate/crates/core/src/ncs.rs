//! Negatively Correlated Search with surrogate pre-selection.
//!
//! Each of `N` subpopulations owns an isotropic Gaussian search distribution. Per
//! generation every subpopulation samples `M` candidates, encodes them, lets the
//! surrogate pick one, evaluates only that one, and replaces its parent when
//! `f' + phi d' > f + phi d`, where `d` is the Bhattacharyya distance to the nearest peer
//! distribution. Step sizes follow the 1/5 success rule over fixed windows.
//!
//! Subpopulation inner loops run concurrently against a snapshot of the generation-start
//! state; the coordinator merges outcomes in index order, so results do not depend on
//! scheduling.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{check_dim, Error, FieldError, Result};
use crate::problems::{Bounds, FitnessProblem};
use crate::seed::{self, tag};
use crate::surrogate::{
    label_samples, preselect_from_probabilities, LabelScope, select_best, train_incremental, HnnModel, TrainMetrics,
    TrainingBuffer,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneFifthRule {
    /// Trials per adaptation window.
    pub epoch_len: usize,
    /// Shrink factor `r` in `(0, 1)`; growth divides by it.
    pub factor: f64,
}

impl Default for OneFifthRule {
    fn default() -> Self {
        Self {
            epoch_len: 10,
            factor: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDistribution {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub success_count: usize,
    pub trial_count: usize,
}

impl SearchDistribution {
    pub fn new(mean: Vec<f64>, sigma: f64) -> Self {
        Self {
            mean,
            sigma,
            success_count: 0,
            trial_count: 0,
        }
    }

    pub fn record_trial(&mut self, success: bool) {
        self.trial_count += 1;
        if success {
            self.success_count += 1;
        }
    }

    /// Applies the 1/5 rule once the window is full and resets the counters. Returns
    /// whether the window closed.
    pub fn one_fifth_update(&mut self, rule: &OneFifthRule) -> bool {
        if self.trial_count < rule.epoch_len {
            return false;
        }
        // Compare success / trials against 1/5 without rounding.
        let lhs = 5 * self.success_count;
        if lhs > self.trial_count {
            self.sigma /= rule.factor;
        } else if lhs < self.trial_count {
            self.sigma *= rule.factor;
        }
        self.success_count = 0;
        self.trial_count = 0;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subpopulation {
    pub distribution: SearchDistribution,
    /// Cached fitness of the distribution mean.
    pub fitness: f64,
    /// Evaluation id of the current mean.
    pub id: u64,
}

/// Draws `n_subpops` means uniformly in `bounds` and evaluates each once.
pub fn initialize_population(
    n_subpops: usize,
    bounds: Bounds,
    sigma_init: f64,
    problem: &FitnessProblem,
    seed: u64,
) -> Result<Vec<Subpopulation>> {
    if n_subpops < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 subpopulations, got {n_subpops}"
        )));
    }
    Bounds::new(bounds.lower, bounds.upper)?;
    if !(sigma_init > 0.0 && sigma_init.is_finite()) {
        return Err(Error::InvalidArgument("initial sigma must be positive".into()));
    }
    initial_means(n_subpops, problem.dim(), bounds, seed)
        .into_iter()
        .enumerate()
        .map(|(i, mean)| {
            let fitness = problem.evaluate(&mean).map_err(|e| Error::Evaluation {
                subpopulation: i,
                source: Box::new(e),
            })?;
            Ok(Subpopulation {
                distribution: SearchDistribution::new(mean, sigma_init),
                fitness,
                id: i as u64,
            })
        })
        .collect()
}

/// The means [`initialize_population`] draws for `seed`, without evaluating them.
pub fn initial_means(n_subpops: usize, dim: usize, bounds: Bounds, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::stream(seed, &[tag::INIT]);
    (0..n_subpops)
        .map(|_| {
            (0..dim)
                .map(|_| bounds.lower + bounds.width() * rng.random::<f64>())
                .collect()
        })
        .collect()
}

/// `M` i.i.d. draws `mean + sigma * xi` with `xi ~ N(0, I)`.
pub fn sample_candidates<R: Rng + ?Sized>(
    dist: &SearchDistribution,
    m: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one candidate".into()));
    }
    Ok((0..m)
        .map(|_| {
            dist.mean
                .iter()
                .map(|mu| {
                    let xi: f64 = StandardNormal.sample(rng);
                    mu + dist.sigma * xi
                })
                .collect()
        })
        .collect())
}

/// Sampled originals and their latent codes. Latent `j` encodes original `index_map[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    pub originals: Vec<Vec<f64>>,
    pub latents: Vec<Vec<f64>>,
    pub index_map: Vec<usize>,
}

impl CandidateBatch {
    pub fn new(originals: Vec<Vec<f64>>) -> Self {
        Self {
            originals,
            latents: Vec::new(),
            index_map: Vec::new(),
        }
    }

    pub fn encode(originals: Vec<Vec<f64>>, embedding: &Embedding) -> Result<Self> {
        let latents = originals
            .iter()
            .map(|x| embedding.encode(x))
            .collect::<Result<Vec<_>>>()?;
        let index_map = (0..originals.len()).collect();
        Ok(Self {
            originals,
            latents,
            index_map,
        })
    }

    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }

    /// The original vector behind a latent index. Never reconstructed.
    pub fn retrieve(&self, latent_index: usize) -> &[f64] {
        let original = if self.index_map.is_empty() {
            latent_index
        } else {
            self.index_map[latent_index]
        };
        &self.originals[original]
    }
}

/// Bhattacharyya distance between `N(mu_a, sigma_a^2 I)` and `N(mu_b, sigma_b^2 I)`.
pub fn bhattacharyya(mean_a: &[f64], sigma_a: f64, mean_b: &[f64], sigma_b: f64) -> f64 {
    let avg_var = 0.5 * (sigma_a * sigma_a + sigma_b * sigma_b);
    let sq_dist: f64 = mean_a.iter().zip(mean_b).map(|(a, b)| (a - b) * (a - b)).sum();
    let log_term = 0.5 * (avg_var / (sigma_a * sigma_b)).ln();
    sq_dist / (8.0 * avg_var) + mean_a.len() as f64 * log_term
}

/// Distance from `N(mean, sigma^2 I)` to the nearest of `peers`.
pub fn diversity_against<'a>(
    mean: &[f64],
    sigma: f64,
    peers: impl IntoIterator<Item = &'a SearchDistribution>,
) -> Result<f64> {
    let mut best: Option<f64> = None;
    for p in peers {
        check_dim("diversity peer", mean.len(), p.mean.len())?;
        let d = bhattacharyya(mean, sigma, &p.mean, p.sigma);
        best = Some(best.map_or(d, |b: f64| b.min(d)));
    }
    best.ok_or_else(|| Error::InvalidArgument("diversity needs at least one peer".into()))
}

/// Diversity of distribution `index` with respect to all others in `all`.
pub fn diversity(index: usize, all: &[SearchDistribution]) -> Result<f64> {
    if all.len() < 2 {
        return Err(Error::InvalidArgument(
            "diversity needs at least two distributions".into(),
        ));
    }
    let me = &all[index];
    diversity_against(
        &me.mean,
        me.sigma,
        all.iter().enumerate().filter(|(j, _)| *j != index).map(|(_, d)| d),
    )
}

/// Strict NCS acceptance: `child_fitness + phi child_div > parent_fitness + phi parent_div`.
pub fn acceptance_test(
    parent_fitness: f64,
    parent_div: f64,
    child_fitness: f64,
    child_div: f64,
    phi: f64,
) -> bool {
    child_fitness + phi * child_div > parent_fitness + phi * parent_div
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// Poincare-ball classifier with the configured curvature.
    Hnn,
    /// The same classifier with `c = 0`.
    Euclidean,
    /// Constant scores; candidate 0 is always chosen.
    None,
    /// Control: scores are a monotone transform of the true fitness.
    Oracle,
    /// Control: i.i.d. uniform scores.
    Random,
}

impl SurrogateKind {
    /// Whether candidates must be encoded for this surrogate.
    pub fn needs_embedding(self) -> bool {
        matches!(self, SurrogateKind::Hnn | SurrogateKind::Euclidean)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SurrogateKind::Hnn => "hnn",
            SurrogateKind::Euclidean => "euclidean",
            SurrogateKind::None => "none",
            SurrogateKind::Oracle => "oracle",
            SurrogateKind::Random => "random",
        }
    }
}

pub enum Surrogate {
    Model {
        model: HnnModel,
        buffer: TrainingBuffer,
        epochs_per_generation: usize,
        label_scope: LabelScope,
    },
    Constant,
    /// Scores candidates with true fitness on a detached, uncounted copy of the problem.
    Oracle(FitnessProblem),
    Random,
}

impl Surrogate {
    pub fn model(
        model: HnnModel,
        buffer_capacity: usize,
        epochs_per_generation: usize,
        label_scope: LabelScope,
    ) -> Self {
        Surrogate::Model {
            model,
            buffer: TrainingBuffer::new(buffer_capacity),
            epochs_per_generation,
            label_scope,
        }
    }

    pub fn hnn(&self) -> Option<&HnnModel> {
        match self {
            Surrogate::Model { model, .. } => Some(model),
            _ => None,
        }
    }

    fn needs_latents(&self) -> bool {
        matches!(self, Surrogate::Model { .. })
    }

    fn score(&self, batch: &CandidateBatch, rng_seed: u64) -> Result<Vec<f64>> {
        match self {
            Surrogate::Model { model, .. } => batch
                .latents
                .iter()
                .map(|z| model.promising_probability(z))
                .collect(),
            Surrogate::Constant => Ok(vec![0.5; batch.len()]),
            Surrogate::Oracle(problem) => batch
                .originals
                .iter()
                .map(|x| problem.evaluate(x).map(oracle_probability))
                .collect(),
            Surrogate::Random => {
                let mut rng = seed::stream(rng_seed, &[]);
                Ok((0..batch.len()).map(|_| rng.random::<f64>()).collect())
            }
        }
    }
}

/// Strictly increasing map of fitness into `(0, 1)`.
pub fn oracle_probability(fitness: f64) -> f64 {
    0.5 + fitness.atan() / std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub subpopulations: usize,
    pub candidates: usize,
    pub phi: f64,
    pub sigma_init: f64,
    /// Initialization bounds; defaults to the problem's bounds.
    pub bounds: Option<Bounds>,
    /// Real evaluations available after initialization.
    pub budget: u64,
    pub one_fifth: OneFifthRule,
    /// Min-max normalize fitness and diversity per generation before combining.
    pub normalize_combined: bool,
    /// Candidates per subpopulation that also receive a true evaluation for auditing.
    pub audit_k: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            subpopulations: 5,
            candidates: 10,
            phi: 1.0,
            sigma_init: 0.5,
            bounds: None,
            budget: 3000,
            one_fifth: OneFifthRule::default(),
            normalize_combined: false,
            audit_k: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.subpopulations < 2 {
            errs.push(FieldError::new("search.subpopulations", "must be >= 2"));
        }
        if self.candidates == 0 {
            errs.push(FieldError::new("search.candidates", "must be >= 1"));
        }
        if !self.phi.is_finite() {
            errs.push(FieldError::new("search.phi", "must be finite"));
        }
        if !(self.sigma_init > 0.0 && self.sigma_init.is_finite()) {
            errs.push(FieldError::new("search.sigma_init", "must be positive"));
        }
        if let Some(b) = self.bounds {
            if Bounds::new(b.lower, b.upper).is_err() {
                errs.push(FieldError::new("search.bounds", "lower must not exceed upper"));
            }
        }
        if self.budget == 0 {
            errs.push(FieldError::new("search.budget", "must be >= 1"));
        } else if self.budget < self.subpopulations as u64 {
            errs.push(FieldError::new(
                "search.budget",
                "must cover at least one generation (>= subpopulations)",
            ));
        }
        if self.one_fifth.epoch_len == 0 {
            errs.push(FieldError::new("search.one_fifth.epoch_len", "must be >= 1"));
        }
        if !(self.one_fifth.factor > 0.0 && self.one_fifth.factor < 1.0) {
            errs.push(FieldError::new("search.one_fifth.factor", "must lie in (0, 1)"));
        }
        if self.audit_k == Some(0) {
            errs.push(FieldError::new("search.audit_k", "must be >= 1 when set"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn generations(&self) -> u64 {
        self.budget / self.subpopulations as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub candidate: usize,
    pub score: f64,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubpopulationRecord {
    pub index: usize,
    pub selected: usize,
    /// Promising probability of every candidate, by candidate index.
    pub scores: Vec<f64>,
    pub evaluation_id: u64,
    pub fitness: f64,
    pub parent_fitness: f64,
    pub parent_diversity: f64,
    pub child_diversity: f64,
    pub accepted: bool,
    pub sigma: f64,
    pub sigma_adapted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audit: Vec<AuditEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestSoFar {
    pub id: u64,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    /// Cumulative real evaluations, initialization included.
    pub real_evaluations_used: u64,
    pub evaluations_this_generation: u64,
    pub subpopulations: Vec<SubpopulationRecord>,
    pub best_so_far: BestSoFar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<TrainMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationTiming {
    pub generation: u64,
    pub inner_loop_ms: f64,
    pub training_ms: f64,
    pub total_ms: f64,
}

struct SubpopOutcome {
    batch: CandidateBatch,
    selected: usize,
    scores: Vec<f64>,
    fitness: f64,
    parent_diversity: f64,
    child_diversity: f64,
    audit: Vec<AuditEntry>,
}

pub struct Search {
    config: SearchConfig,
    seed: u64,
    problem: FitnessProblem,
    audit_problem: FitnessProblem,
    embedding: Option<Embedding>,
    surrogate: Surrogate,
    population: Vec<Subpopulation>,
    generation: u64,
    next_id: u64,
    best: (u64, f64, Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub best_id: u64,
    pub records: Vec<GenerationRecord>,
    pub timings: Vec<GenerationTiming>,
    pub real_evaluations: u64,
    pub audit_evaluations: u64,
    pub initial_fitness: Vec<f64>,
    pub final_model: Option<HnnModel>,
}

impl Search {
    /// Validates the setup and evaluates the initial population.
    ///
    /// The problem's counter is replaced by a fresh one guarded at
    /// `subpopulations + budget` evaluations.
    pub fn new(
        config: SearchConfig,
        problem: &FitnessProblem,
        embedding: Option<Embedding>,
        surrogate: Surrogate,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(e) = &embedding {
            check_dim("embedding input", problem.dim(), e.input_dim())?;
            if let Surrogate::Model { model, .. } = &surrogate {
                check_dim("surrogate latent", e.latent_dim(), model.latent_dim())?;
            }
        } else if surrogate.needs_latents() {
            return Err(Error::Config(vec![FieldError::new(
                "embedding",
                "a model surrogate needs an embedding",
            )]));
        }
        let n = config.subpopulations as u64;
        let run_problem = problem.detached().with_budget(n + config.budget)?;
        let audit_problem = problem.detached();
        let bounds = config.bounds.unwrap_or_else(|| problem.bounds());
        let population = initialize_population(
            config.subpopulations,
            bounds,
            config.sigma_init,
            &run_problem,
            seed,
        )?;
        let best_idx = select_best(&population.iter().map(|s| s.fitness).collect::<Vec<_>>())?;
        let best = (
            population[best_idx].id,
            population[best_idx].fitness,
            population[best_idx].distribution.mean.clone(),
        );
        let surrogate = match surrogate {
            Surrogate::Oracle(_) => Surrogate::Oracle(audit_problem.clone()),
            other => other,
        };
        Ok(Self {
            config,
            seed,
            problem: run_problem,
            audit_problem,
            embedding,
            surrogate,
            population,
            generation: 0,
            next_id: n,
            best,
        })
    }

    pub fn population(&self) -> &[Subpopulation] {
        &self.population
    }

    pub fn real_evaluations(&self) -> u64 {
        self.problem.eval_count()
    }

    pub fn audit_evaluations(&self) -> u64 {
        self.audit_problem.eval_count()
    }

    pub fn best_fitness(&self) -> f64 {
        self.best.1
    }

    pub fn surrogate(&self) -> &Surrogate {
        &self.surrogate
    }

    fn inner_loop(&self, i: usize, snapshot: &[SearchDistribution]) -> Result<SubpopOutcome> {
        let dist = &snapshot[i];
        let mut rng = seed::stream(self.seed, &[tag::SAMPLE, self.generation, i as u64]);
        let originals = sample_candidates(dist, self.config.candidates, &mut rng)?;
        let batch = match &self.embedding {
            Some(e) => CandidateBatch::encode(originals, e)?,
            None => CandidateBatch::new(originals),
        };
        let score_seed = seed::derive_seed(self.seed, &[tag::RANDOM_SCORES, self.generation, i as u64]);
        let scores = self.surrogate.score(&batch, score_seed)?;
        let pre = preselect_from_probabilities(scores)?;
        let child = batch.retrieve(pre.selected);
        let fitness = self.problem.evaluate(child).map_err(|e| Error::Evaluation {
            subpopulation: i,
            source: Box::new(e),
        })?;
        let peers = || snapshot.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, d)| d);
        let parent_diversity = diversity_against(&dist.mean, dist.sigma, peers())?;
        let child_diversity = diversity_against(child, dist.sigma, peers())?;
        let scores: Vec<f64> = pre.scores.iter().map(|s| s.promising_probability).collect();
        let audit = match self.config.audit_k {
            Some(k) => (0..k.min(batch.len()))
                .map(|j| {
                    Ok(AuditEntry {
                        candidate: j,
                        score: scores[j],
                        fitness: self.audit_problem.evaluate(&batch.originals[j])?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        Ok(SubpopOutcome {
            batch,
            selected: pre.selected,
            scores,
            fitness,
            parent_diversity,
            child_diversity,
            audit,
        })
    }

    pub fn run_generation(&mut self) -> Result<(GenerationRecord, GenerationTiming)> {
        let started = Instant::now();
        let snapshot: Vec<SearchDistribution> =
            self.population.iter().map(|s| s.distribution.clone()).collect();
        let outcomes: Vec<Result<SubpopOutcome>> = (0..self.population.len())
            .into_par_iter()
            .map(|i| self.inner_loop(i, &snapshot))
            .collect();
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        let inner_done = Instant::now();

        let phi = self.config.phi;
        let combined = self.combined_scores(&outcomes);
        let mut records = Vec::with_capacity(outcomes.len());
        let mut children_latents = Vec::with_capacity(outcomes.len());
        let mut children_fitness = Vec::with_capacity(outcomes.len());
        for (i, out) in outcomes.iter().enumerate() {
            let id = self.next_id;
            self.next_id += 1;
            let sub = &mut self.population[i];
            let parent_fitness = sub.fitness;
            let ((pf, pd), (cf, cd)) = combined[i];
            let accepted = acceptance_test(pf, pd, cf, cd, phi);
            let child = out.batch.retrieve(out.selected);
            if out.fitness > self.best.1 {
                self.best = (id, out.fitness, child.to_vec());
            }
            if accepted {
                sub.distribution.mean = child.to_vec();
                sub.fitness = out.fitness;
                sub.id = id;
            }
            sub.distribution.record_trial(accepted);
            let latent = out.batch.latents.get(out.selected).cloned();
            if let Some(z) = &latent {
                children_latents.push(z.clone());
                children_fitness.push(out.fitness);
            }
            records.push(SubpopulationRecord {
                index: i,
                selected: out.selected,
                scores: out.scores.clone(),
                evaluation_id: id,
                fitness: out.fitness,
                parent_fitness,
                parent_diversity: out.parent_diversity,
                child_diversity: out.child_diversity,
                accepted,
                sigma: sub.distribution.sigma,
                sigma_adapted: false,
                latent,
                audit: out.audit.clone(),
            });
        }

        let mut metrics = None;
        if let Surrogate::Model {
            model,
            buffer,
            epochs_per_generation,
            label_scope,
        } = &mut self.surrogate
        {
            buffer.extend_grouped(label_samples(children_latents, &children_fitness)?.into_iter().enumerate());
            match label_scope {
                LabelScope::Generation => {}
                LabelScope::Buffer => buffer.relabel()?,
                LabelScope::Subpopulation => buffer.relabel_by_group()?,
            }
            let train_seed = seed::derive_seed(self.seed, &[tag::HNN_TRAIN, self.generation]);
            metrics = Some(train_incremental(
                model,
                buffer.as_slice(),
                *epochs_per_generation,
                train_seed,
            )?);
        }
        let trained = Instant::now();

        for (sub, rec) in self.population.iter_mut().zip(&mut records) {
            rec.sigma_adapted = sub.distribution.one_fifth_update(&self.config.one_fifth);
            rec.sigma = sub.distribution.sigma;
        }

        let record = GenerationRecord {
            generation: self.generation,
            real_evaluations_used: self.problem.eval_count(),
            evaluations_this_generation: outcomes.len() as u64,
            subpopulations: records,
            best_so_far: BestSoFar {
                id: self.best.0,
                fitness: self.best.1,
            },
            surrogate: metrics,
        };
        let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
        let timing = GenerationTiming {
            generation: self.generation,
            inner_loop_ms: ms(started, inner_done),
            training_ms: ms(inner_done, trained),
            total_ms: ms(started, Instant::now()),
        };
        self.generation += 1;
        Ok((record, timing))
    }

    /// Per-subpopulation `((parent f, parent d), (child f, child d))`, optionally min-max
    /// normalized over the generation.
    fn combined_scores(&self, outcomes: &[SubpopOutcome]) -> Vec<((f64, f64), (f64, f64))> {
        let raw: Vec<_> = outcomes
            .iter()
            .zip(&self.population)
            .map(|(o, s)| ((s.fitness, o.parent_diversity), (o.fitness, o.child_diversity)))
            .collect();
        if !self.config.normalize_combined {
            return raw;
        }
        let range = |vals: Vec<f64>| {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            move |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }
        };
        let nf = range(raw.iter().flat_map(|((pf, _), (cf, _))| [*pf, *cf]).collect());
        let nd = range(raw.iter().flat_map(|((_, pd), (_, cd))| [*pd, *cd]).collect());
        raw.into_iter()
            .map(|((pf, pd), (cf, cd))| ((nf(pf), nd(pd)), (nf(cf), nd(cd))))
            .collect()
    }

    /// Runs generations until the search budget cannot cover another one.
    pub fn run(mut self) -> Result<RunOutcome> {
        let initial_fitness = self.population.iter().map(|s| s.fitness).collect();
        let generations = self.config.generations();
        let mut records = Vec::with_capacity(generations as usize);
        let mut timings = Vec::with_capacity(generations as usize);
        for _ in 0..generations {
            let (rec, timing) = self.run_generation()?;
            records.push(rec);
            timings.push(timing);
        }
        let real_evaluations = self.problem.eval_count();
        let audit_evaluations = self.audit_problem.eval_count();
        let final_model = self.surrogate.hnn().cloned();
        let (best_id, best_fitness, best) = self.best;
        Ok(RunOutcome {
            best,
            best_fitness,
            best_id,
            records,
            timings,
            real_evaluations,
            audit_evaluations,
            initial_fitness,
            final_model,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::problems::Sphere;

    fn sphere(dim: usize) -> FitnessProblem {
        FitnessProblem::new(Arc::new(Sphere::new(vec![0.0; dim])))
    }

    #[test]
    fn one_fifth_rule_cases() {
        let rule = OneFifthRule::default();
        let run = |succ: usize| {
            let mut d = SearchDistribution::new(vec![0.0], 1.0);
            for t in 0..10 {
                d.record_trial(t < succ);
            }
            assert!(d.one_fifth_update(&rule));
            assert_eq!((d.success_count, d.trial_count), (0, 0));
            d.sigma
        };
        assert_eq!(run(5), 1.0 / 0.99);
        assert_eq!(run(1), 0.99);
        assert_eq!(run(2), 1.0);
    }

    #[test]
    fn one_fifth_waits_for_full_window() {
        let mut d = SearchDistribution::new(vec![0.0], 1.0);
        d.record_trial(true);
        assert!(!d.one_fifth_update(&OneFifthRule::default()));
        assert_eq!(d.trial_count, 1);
    }

    #[test]
    fn acceptance_cases() {
        assert!(acceptance_test(5.0, 100.0, 6.0, 0.0, 0.0));
        assert!(!acceptance_test(5.0, 1.0, 5.0, 1.0, 1.0));
        assert!(acceptance_test(5.0, 1.0, 4.0, 3.0, 1.0));
    }

    #[test]
    fn diversity_cases() {
        let a = SearchDistribution::new(vec![1.0, 2.0], 0.5);
        assert_eq!(diversity(0, &[a.clone(), a.clone()]).unwrap(), 0.0);
        let b = SearchDistribution::new(vec![3.0, -1.0], 0.5);
        let expected = (4.0 + 9.0) / (8.0 * 0.25);
        assert!((diversity(0, &[a.clone(), b]).unwrap() - expected).abs() < 1e-12);
        // mpmath closed form, mu 0 vs 2, sigma 1 vs 3.
        let d = bhattacharyya(&[0.0], 1.0, &[2.0], 3.0);
        assert!((d - 0.355_412_811_882_995_34).abs() < 1e-14);
        assert!(diversity(0, &[a]).is_err());
    }

    #[test]
    fn diversity_is_min_over_peers() {
        let dists = vec![
            SearchDistribution::new(vec![0.0], 1.0),
            SearchDistribution::new(vec![10.0], 1.0),
            SearchDistribution::new(vec![1.0], 1.0),
        ];
        assert!((diversity(0, &dists).unwrap() - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn initialize_cases() {
        let p = sphere(3);
        let bounds = Bounds::new(-1.0, 1.0).unwrap();
        let a = initialize_population(2, bounds, 0.3, &p, 7).unwrap();
        let b = initialize_population(2, bounds, 0.3, &p, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(p.eval_count(), 4);
        let zero = initialize_population(3, Bounds::new(0.0, 0.0).unwrap(), 0.3, &p, 1).unwrap();
        assert!(zero.iter().all(|s| s.distribution.mean == vec![0.0; 3]));
        assert!(initialize_population(1, bounds, 0.3, &p, 7).is_err());
        assert!(initialize_population(2, Bounds { lower: 1.0, upper: 0.0 }, 0.3, &p, 7).is_err());
    }

    #[test]
    fn sampling_cases() {
        let dist = SearchDistribution::new(vec![1.0, -1.0], 0.0);
        let mut rng = seed::stream(1, &[]);
        let c = sample_candidates(&dist, 4, &mut rng).unwrap();
        assert!(c.iter().all(|x| x == &dist.mean));
        assert!(sample_candidates(&dist, 0, &mut rng).is_err());
        let moving = SearchDistribution::new(vec![0.0; 5], 1.0);
        let a = sample_candidates(&moving, 3, &mut seed::stream(4, &[])).unwrap();
        let b = sample_candidates(&moving, 3, &mut seed::stream(4, &[])).unwrap();
        assert_eq!(a, b);
        assert_eq!(sample_candidates(&moving, 1, &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn config_validation_names_fields() {
        let cfg = SearchConfig {
            subpopulations: 1,
            budget: 0,
            ..SearchConfig::default()
        };
        let Err(Error::Config(errs)) = cfg.validate() else {
            panic!("expected config error")
        };
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert!(fields.contains(&"search.subpopulations"));
        assert!(fields.contains(&"search.budget"));
    }

    #[test]
    fn constant_surrogate_run_accounts_budget() {
        let cfg = SearchConfig {
            subpopulations: 3,
            candidates: 4,
            budget: 3,
            ..SearchConfig::default()
        };
        let out = Search::new(cfg, &sphere(4), None, Surrogate::Constant, 1)
            .unwrap()
            .run()
            .unwrap();
        assert_eq!(out.real_evaluations, 6);
        assert_eq!(out.records.len(), 1);
        assert!(out.records[0].subpopulations.iter().all(|s| s.selected == 0));
    }
}
