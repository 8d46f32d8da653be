//! Configuration, run orchestration, audits, sweeps and exports behind the CLI.

pub mod audit;
pub mod config;
pub mod export;
pub mod pipeline;
pub mod rank;
pub mod sweep;

pub use audit::{rank_consistency_audit, AuditWindow, RankConsistencyReport};
pub use config::{RunConfig, SweepConfig};
pub use pipeline::{execute, run_once};
pub use rank::{kendall_tau, spearman_rho};
pub use sweep::{ablation_sweep, SweepTable};
