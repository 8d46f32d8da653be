//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails or overruns its time limit.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use aehnn::harness::config::SweepConfig;
use aehnn::harness::export::{load_records, write_run, RECORDS_FILE, TIMINGS_FILE};
use aehnn::harness::{ablation_sweep, rank_consistency_audit, run_once, AuditWindow, RunConfig};
use aehnn::hyperbolic::{exp_map, exp_map_zero, log_map, log_map_zero, mobius_add, BallPoint, Curvature, TangentVector};
use aehnn::ncs::SurrogateKind;
use aehnn::net::Activation;
use aehnn::seed;
use aehnn::surrogate::{train_incremental, HnnConfig, HnnModel, PROMISING};
use common::{dist, norm, random_vector, FD_TOL};

type Outcome = Result<String, String>;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hyperbolic_round_trips() -> Outcome {
    const PER_CONFIG: usize = 1000;
    let (mut origin_worst, mut based_worst) = (0.0f64, 0.0f64);
    for m in [2, 16, 64] {
        for c in [0.5, 1.0, 2.0] {
            let curv = Curvature::new(c).unwrap();
            let mut rng = seed::stream(101, &[m as u64, (c * 10.0) as u64]);
            for _ in 0..PER_CONFIG {
                let v = random_vector(&mut rng, m, 5.0);
                let back = log_map_zero(&exp_map_zero(&TangentVector(v.clone()), curv));
                origin_worst = origin_worst.max(dist(back.coords(), &v) / norm(&v).max(1.0));

                let x = random_vector(&mut rng, m, 0.5 / c.sqrt());
                let v = random_vector(&mut rng, m, 2.0);
                let base = BallPoint::new(x, curv).unwrap();
                let back = log_map(&base, &exp_map(&base, &TangentVector(v.clone())));
                based_worst = based_worst.max(dist(back.coords(), &v) / norm(&v).max(1.0));
            }
        }
    }
    check(
        origin_worst < 1e-6 && based_worst < 1e-6,
        format!("worst relative error origin {origin_worst:.2e}, base point {based_worst:.2e} (limit 1e-6)"),
    )
}

fn euclidean_degeneration() -> Outcome {
    let c = Curvature::new(1e-8).unwrap();
    let mut rng = seed::stream(102, &[]);
    let mut add_worst = 0.0f64;
    for _ in 0..1000 {
        let (x, y) = (random_vector(&mut rng, 16, 0.5), random_vector(&mut rng, 16, 0.5));
        let sum = mobius_add(&BallPoint::new(x.clone(), c).unwrap(), &BallPoint::new(y.clone(), c).unwrap());
        let plain: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        add_worst = add_worst.max(dist(sum.coords(), &plain));
    }
    let model = HnnModel::new(16, &HnnConfig { curvature: 1e-8, ..HnnConfig::default() }, 7).unwrap();
    let mut forward_worst = 0.0f64;
    for _ in 0..1000 {
        let z = random_vector(&mut rng, 16, 3.0);
        let logits = model.core().predict(&z).unwrap();
        let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - peak).exp()).collect();
        let oracle = exps[PROMISING] / exps.iter().sum::<f64>();
        forward_worst = forward_worst.max((model.promising_probability(&z).unwrap() - oracle).abs());
    }
    check(
        add_worst < 1e-5 && forward_worst < 1e-5,
        format!("mobius_add deviation {add_worst:.2e}, forward deviation {forward_worst:.2e} (limit 1e-5)"),
    )
}

fn gradient_correctness() -> Outcome {
    let mut worst = Vec::new();
    for (i, act) in [Activation::Tanh, Activation::Relu, Activation::Identity].into_iter().enumerate() {
        worst.push((format!("mlp-{act:?}").to_lowercase(), common::dense_net_worst(act, 200 + i as u64)));
    }
    worst.push(("mlp-input".into(), common::dense_net_input_worst(210)));
    let (enc, dec) = common::autoencoder_worst(211);
    worst.push(("encoder".into(), enc));
    worst.push(("decoder".into(), dec));
    for c in [0.0, 1.0] {
        worst.push((format!("classifier-c{c}"), common::classifier_worst(c, 212)));
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let detail = worst.iter().map(|(n, w)| format!("{n} {w:.1e}")).collect::<Vec<_>>().join(", ");
    check(max < FD_TOL, format!("{detail} (limit 1e-4)"))
}

fn subspace_recovery() -> Outcome {
    let steps = common::SUBSPACE_SAMPLES.div_ceil(common::SUBSPACE_BATCH) * common::SUBSPACE_EPOCHS;
    let (ae, data, _) = common::subspace_autoencoder();
    let ratio = ae.reconstruction_mse(&data).unwrap() / common::mean_coordinate_variance(&data.samples);
    check(
        ratio < 0.01 && steps <= 2000,
        format!("MSE / variance {ratio:.2e} after {steps} steps (limit 1e-2, 2000 steps)"),
    )
}

fn surrogate_classification() -> Outcome {
    let data = common::clusters(100, 31);
    let mut accs = Vec::new();
    for c in [1.0, 0.0] {
        let mut model = HnnModel::new(common::CLUSTER_DIM, &HnnConfig { curvature: c, ..HnnConfig::default() }, 9).unwrap();
        accs.push(train_incremental(&mut model, &data, 500, 7).unwrap().test_accuracy.unwrap());
    }
    check(
        accs.iter().all(|&a| a >= 0.95),
        format!("test accuracy c=1 {:.3}, c=0 {:.3} after 500 epochs (limit 0.95)", accs[0], accs[1]),
    )
}

fn sphere_config() -> RunConfig {
    RunConfig::load(&configs_dir().join("sphere.toml")).unwrap()
}

fn evaluation_frugality() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut per_generation = Vec::new();
    for m in [10, 30] {
        let mut cfg = sphere_config();
        cfg.search.candidates = m;
        cfg.search.budget = 250;
        cfg.audit.enabled = false;
        let dir = tmp.path().join(format!("m{m}"));
        write_run(&dir, &cfg, 1, &run_once(&cfg, 1).unwrap()).unwrap();
        let records = load_records(&dir.join(RECORDS_FILE)).unwrap();
        let n = cfg.search.subpopulations as u64;
        let exact = records.iter().enumerate().all(|(g, r)| {
            r.evaluations_this_generation == n && r.real_evaluations_used == n * (g as u64 + 2)
        });
        if !exact || records.len() != 50 {
            return Err(format!("M = {m}: record stream does not show {n} evaluations per generation"));
        }
        per_generation.push(records[0].evaluations_this_generation);
    }
    check(
        per_generation.iter().all(|&e| e == 5),
        "N = 5 real evaluations in each of 50 generations for M = 10 and M = 30".into(),
    )
}

fn end_to_end_benefit() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (file, compare_baseline) in [("sweep_sphere.toml", true), ("sweep_rastrigin.toml", false)] {
        let cfg = SweepConfig::load(&configs_dir().join(file)).unwrap();
        let table = ablation_sweep(&cfg, None).unwrap();
        let full = table
            .cells
            .iter()
            .find(|c| c.cell.surrogate == SurrogateKind::Hnn && c.cell.embedding.as_str() == "ae")
            .expect("sweep has an AE + HNN cell");
        let none = table.cell("none").expect("sweep has a baseline cell");
        let worst = table.cells.iter().map(|c| c.summary.mean).fold(f64::INFINITY, f64::min);
        let not_worst = table.cells.iter().any(|c| c.summary.mean < full.summary.mean);
        let beats = !compare_baseline || full.summary.mean >= none.summary.mean;
        ok &= not_worst && beats;
        lines.push(format!(
            "{}: {} {:.1}, none {:.1}, worst cell {:.1}",
            table.problem, full.name, full.summary.mean, none.summary.mean, worst
        ));
    }
    check(ok, lines.join("; "))
}

fn rank_consistency() -> Outcome {
    let cfg = sphere_config();
    let seed = cfg.seeds[0];
    let window = AuditWindow { from: 10, to: 50 };
    let report = rank_consistency_audit(&run_once(&cfg, seed).unwrap().records, window).unwrap();
    let rho = report.rho.map(|s| s.mean).unwrap_or(f64::NAN);
    let mut oracle_cfg = cfg.clone();
    oracle_cfg.surrogate.kind = SurrogateKind::Oracle;
    let oracle = rank_consistency_audit(&run_once(&oracle_cfg, seed).unwrap().records, window).unwrap();
    let oracle_rho = oracle.rho.map(|s| s.mean).unwrap_or(f64::NAN);
    check(
        rho > 0.3 && oracle_rho == 1.0,
        format!("mean rho {rho:.3} over generations 10-50 (limit > 0.3), oracle rho {oracle_rho}"),
    )
}

fn determinism() -> Outcome {
    let cfg = sphere_config();
    let tmp = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    for name in ["first", "second"] {
        let dir = tmp.path().join(name);
        write_run(&dir, &cfg, cfg.seeds[0], &run_once(&cfg, cfg.seeds[0]).unwrap()).unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != TIMINGS_FILE)
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        snapshots.push(files);
    }
    let names: Vec<&str> = snapshots[0].iter().map(|f| f.0.as_str()).collect();
    check(
        snapshots[0] == snapshots[1],
        format!("{} files byte-identical across two runs: {}", names.len(), names.join(", ")),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("hyperbolic round-trips", Duration::from_secs(5), hyperbolic_round_trips),
        ("euclidean degeneration", Duration::from_secs(5), euclidean_degeneration),
        ("gradient correctness", Duration::from_secs(30), gradient_correctness),
        ("autoencoder subspace recovery", Duration::from_secs(120), subspace_recovery),
        ("surrogate classification", Duration::from_secs(60), surrogate_classification),
        ("evaluation frugality", Duration::from_secs(60), evaluation_frugality),
        ("end-to-end benefit", Duration::from_secs(900), end_to_end_benefit),
        ("rank consistency", Duration::from_secs(600), rank_consistency),
        ("determinism", Duration::from_secs(120), determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(d) if elapsed <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; exceeded time limit")),
            Err(d) => (false, d),
        };
        failures += usize::from(!pass);
        println!(
            "{} [{id}] {name}: {detail} ({:.1} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
