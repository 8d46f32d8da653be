//! Versioned TOML configuration for runs and sweeps.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::audit::AuditWindow;
use crate::embedding::AutoencoderConfig;
use crate::error::{Error, FieldError, Result};
use crate::ncs::{SearchConfig, SurrogateKind};
use crate::net::{Activation, AdamConfig};
use crate::problems::{build_problem, Bounds, FitnessProblem, ProblemSpec, PROBLEM_NAMES};
use crate::surrogate::HnnConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Ae,
    RandomProjection,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Ae => "ae",
            EmbeddingKind::RandomProjection => "random_projection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Gaussian blobs around random anchors in the search bounds.
    Mixture,
    /// Draws around the optimizer's own initial means.
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub sampler: SamplerKind,
    pub samples: usize,
    pub anchors: usize,
    pub spread: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerKind::Mixture,
            samples: 2000,
            anchors: 8,
            spread: 1.0,
            epochs: 20,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub adam: AdamConfig,
    /// Pretrained autoencoder to load instead of pretraining.
    pub checkpoint: Option<PathBuf>,
    pub pretrain: PretrainConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let ae = AutoencoderConfig::default();
        Self {
            kind: EmbeddingKind::Ae,
            latent_dim: ae.latent_dim,
            hidden: ae.hidden,
            hidden_activation: ae.hidden_activation,
            adam: ae.adam,
            checkpoint: None,
            pretrain: PretrainConfig::default(),
        }
    }
}

impl EmbeddingConfig {
    pub fn autoencoder(&self) -> AutoencoderConfig {
        AutoencoderConfig {
            latent_dim: self.latent_dim,
            hidden: self.hidden.clone(),
            hidden_activation: self.hidden_activation,
            adam: self.adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    pub hnn: HnnConfig,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            kind: SurrogateKind::Hnn,
            hnn: HnnConfig::default(),
        }
    }
}

impl SurrogateConfig {
    /// Classifier settings with the curvature the kind implies.
    pub fn effective_hnn(&self) -> HnnConfig {
        let mut cfg = self.hnn.clone();
        if self.kind == SurrogateKind::Euclidean {
            cfg.curvature = 0.0;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub enabled: bool,
    /// Audited candidates per subpopulation; defaults to `min(M, 8)`.
    pub k: Option<usize>,
    pub window: AuditWindow,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            k: None,
            window: AuditWindow::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// One repetition per seed.
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub problem: ProblemSpec,
    pub search: SearchConfig,
    pub embedding: EmbeddingConfig,
    pub surrogate: SurrogateConfig,
    pub audit: AuditConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seeds: vec![0],
            out: None,
            problem: ProblemSpec {
                name: "sphere".into(),
                dim: Some(200),
                seed: 0,
                latency_ms: 0,
                task: None,
            },
            search: SearchConfig::default(),
            embedding: EmbeddingConfig::default(),
            surrogate: SurrogateConfig::default(),
            audit: AuditConfig::default(),
        }
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        Error::Config(vec![FieldError::new(
            "document",
            e.message().to_string() + &e.span().map(|s| format!(" (bytes {s:?})")).unwrap_or_default(),
        )])
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = parse_toml(&read(path)?)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Makes relative paths relative to the directory holding the config file.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(c) = &mut self.embedding.checkpoint {
            if c.is_relative() {
                *c = base.join(&*c);
            }
        }
    }

    pub fn audit_k(&self) -> Option<usize> {
        self.audit
            .enabled
            .then(|| self.audit.k.unwrap_or(self.search.candidates.min(8)))
    }

    /// Search settings with audit mode folded in.
    pub fn search_config(&self) -> SearchConfig {
        let mut s = self.search.clone();
        s.audit_k = self.audit_k().or(s.audit_k);
        s
    }

    pub fn build_problem(&self) -> Result<FitnessProblem> {
        build_problem(&self.problem)
    }

    pub fn uses_embedding(&self) -> bool {
        self.surrogate.kind.needs_embedding()
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = self.field_errors();
        if let Err(Error::Config(more)) = self.search_config().validate() {
            errs.extend(more);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn field_errors(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        if self.version != CONFIG_VERSION {
            errs.push(FieldError::new(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        if self.seeds.is_empty() {
            errs.push(FieldError::new("seeds", "need at least one seed"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            errs.push(FieldError::new("seeds", "repetition seeds must be distinct"));
        }
        if !PROBLEM_NAMES.contains(&self.problem.name.as_str()) {
            errs.push(FieldError::new(
                "problem.name",
                format!("unknown problem, expected one of {PROBLEM_NAMES:?}"),
            ));
        } else if let Err(e) = self.build_problem() {
            errs.push(FieldError::new("problem", e.to_string()));
        }
        let e = &self.embedding;
        if e.latent_dim == 0 {
            errs.push(FieldError::new("embedding.latent_dim", "must be >= 1"));
        }
        if let Ok(p) = self.build_problem() {
            if e.latent_dim >= p.dim() && self.uses_embedding() {
                errs.push(FieldError::new(
                    "embedding.latent_dim",
                    format!("must be smaller than the problem dimension {}", p.dim()),
                ));
            }
        }
        if e.hidden.contains(&0) {
            errs.push(FieldError::new("embedding.hidden", "widths must be >= 1"));
        }
        if let Some(path) = &e.checkpoint {
            if e.kind != EmbeddingKind::Ae {
                errs.push(FieldError::new(
                    "embedding.checkpoint",
                    "only an autoencoder embedding loads a checkpoint",
                ));
            } else if !path.is_file() {
                errs.push(FieldError::new(
                    "embedding.checkpoint",
                    format!("{} does not exist", path.display()),
                ));
            }
        }
        let p = &e.pretrain;
        if p.samples == 0 {
            errs.push(FieldError::new("embedding.pretrain.samples", "must be >= 1"));
        }
        if p.anchors == 0 {
            errs.push(FieldError::new("embedding.pretrain.anchors", "must be >= 1"));
        }
        if !(p.spread >= 0.0 && p.spread.is_finite()) {
            errs.push(FieldError::new("embedding.pretrain.spread", "must be >= 0"));
        }
        if p.batch_size == 0 {
            errs.push(FieldError::new("embedding.pretrain.batch_size", "must be >= 1"));
        }
        let h = &self.surrogate.hnn;
        if !(h.curvature >= 0.0 && h.curvature.is_finite()) {
            errs.push(FieldError::new("surrogate.hnn.curvature", "must be >= 0"));
        }
        if self.surrogate.kind == SurrogateKind::Hnn && h.curvature == 0.0 {
            errs.push(FieldError::new(
                "surrogate.hnn.curvature",
                "an hnn surrogate needs c > 0; use kind = \"euclidean\" for c = 0",
            ));
        }
        if h.hidden.contains(&0) {
            errs.push(FieldError::new("surrogate.hnn.hidden", "widths must be >= 1"));
        }
        if !(h.learning_rate > 0.0 && h.learning_rate.is_finite()) {
            errs.push(FieldError::new("surrogate.hnn.learning_rate", "must be positive"));
        }
        if h.batch_size == 0 {
            errs.push(FieldError::new("surrogate.hnn.batch_size", "must be >= 1"));
        }
        if h.buffer_generations == 0 {
            errs.push(FieldError::new("surrogate.hnn.buffer_generations", "must be >= 1"));
        }
        if self.audit.k == Some(0) {
            errs.push(FieldError::new("audit.k", "must be >= 1"));
        }
        if self.audit.window.from > self.audit.window.to {
            errs.push(FieldError::new("audit.window", "from must not exceed to"));
        }
        errs
    }

    pub fn search_bounds(&self, problem: &FitnessProblem) -> Bounds {
        self.search.bounds.unwrap_or_else(|| problem.bounds())
    }
}

/// One sweep cell. Fields left unset take the base configuration's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub embedding: EmbeddingKind,
    pub surrogate: SurrogateKind,
    #[serde(default)]
    pub curvature: Option<f64>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

impl CellSpec {
    /// Directory-safe label such as `ae-hnn-c1`.
    pub fn name(&self) -> String {
        match (self.surrogate, self.curvature) {
            (SurrogateKind::None | SurrogateKind::Oracle | SurrogateKind::Random, _) => {
                self.surrogate.as_str().to_string()
            }
            (SurrogateKind::Hnn, Some(c)) => {
                format!("{}-hnn-c{}", self.embedding.as_str(), c)
            }
            (kind, _) => format!("{}-{}", self.embedding.as_str(), kind.as_str()),
        }
    }

    /// Drops settings the surrogate ignores so equivalent cells compare equal.
    fn canonical(mut self, base_curvature: f64) -> Self {
        match self.surrogate {
            SurrogateKind::Hnn => {
                self.curvature = Some(self.curvature.unwrap_or(base_curvature));
            }
            SurrogateKind::Euclidean => self.curvature = None,
            _ => {
                self.curvature = None;
                self.embedding = EmbeddingKind::Ae;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub embedding: Vec<EmbeddingKind>,
    pub surrogate: Vec<SurrogateKind>,
    pub curvature: Vec<f64>,
    /// Explicit cells, used instead of the axis product when non-empty.
    pub cells: Vec<CellSpec>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            embedding: vec![EmbeddingKind::Ae, EmbeddingKind::RandomProjection],
            surrogate: vec![SurrogateKind::Hnn, SurrogateKind::Euclidean, SurrogateKind::None],
            curvature: Vec::new(),
            cells: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub base: RunConfig,
    #[serde(default)]
    pub sweep: SweepAxes,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = parse_toml(&read(path)?)?;
        cfg.base.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical, de-duplicated cells in declaration order.
    pub fn cells(&self) -> Result<Vec<CellSpec>> {
        let base_c = self.base.surrogate.hnn.curvature;
        let raw: Vec<CellSpec> = if self.sweep.cells.is_empty() {
            let curvatures: Vec<Option<f64>> = if self.sweep.curvature.is_empty() {
                vec![None]
            } else {
                self.sweep.curvature.iter().copied().map(Some).collect()
            };
            let mut out = Vec::new();
            for &embedding in &self.sweep.embedding {
                for &surrogate in &self.sweep.surrogate {
                    for &curvature in &curvatures {
                        out.push(CellSpec {
                            embedding,
                            surrogate,
                            curvature,
                            seeds: None,
                        });
                    }
                }
            }
            out
        } else {
            self.sweep.cells.clone()
        };
        let mut errs = Vec::new();
        let mut cells: Vec<CellSpec> = Vec::new();
        for (i, cell) in raw.into_iter().enumerate() {
            if let Some(seeds) = &cell.seeds {
                if seeds != &self.base.seeds {
                    errs.push(FieldError::new(
                        format!("sweep.cells[{i}].seeds"),
                        "seeds must match across cells",
                    ));
                }
            }
            if let Some(c) = cell.curvature {
                if !(c > 0.0 && c.is_finite()) {
                    errs.push(FieldError::new(
                        format!("sweep.cells[{i}].curvature"),
                        "must be positive; use the euclidean surrogate for c = 0",
                    ));
                }
            }
            let cell = CellSpec {
                seeds: None,
                ..cell.canonical(base_c)
            };
            if !cells.contains(&cell) {
                cells.push(cell);
            }
        }
        if cells.is_empty() {
            errs.push(FieldError::new("sweep", "no cells"));
        }
        if errs.is_empty() {
            Ok(cells)
        } else {
            Err(Error::Config(errs))
        }
    }

    /// The run configuration of one cell.
    pub fn cell_config(&self, cell: &CellSpec) -> RunConfig {
        let mut cfg = self.base.clone();
        cfg.embedding.kind = cell.embedding;
        cfg.surrogate.kind = cell.surrogate;
        if let Some(c) = cell.curvature {
            cfg.surrogate.hnn.curvature = c;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = match self.base.validate() {
            Ok(()) => Vec::new(),
            Err(Error::Config(e)) => e,
            Err(e) => return Err(e),
        };
        match self.cells() {
            Ok(cells) => {
                for cell in cells {
                    if let Err(Error::Config(e)) = self.cell_config(&cell).validate() {
                        for fe in e {
                            let fe = FieldError::new(format!("sweep[{}].{}", cell.name(), fe.field), fe.message);
                            if !errs.contains(&fe) {
                                errs.push(fe);
                            }
                        }
                    }
                }
            }
            Err(Error::Config(e)) => errs.extend(e),
            Err(e) => return Err(e),
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
