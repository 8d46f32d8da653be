//! Expensive-fitness stand-ins: shifted sphere, shifted Rastrigin and a point-mass
//! control task whose policy is a flat MLP weight vector.
//!
//! Every problem is maximized. [`FitnessProblem`] wraps an [`Objective`] with an
//! atomic evaluation counter and optional budget guards.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::net::{activations_for, Activation, DenseNet};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::InvalidArgument(format!(
                "invalid bounds [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// A deterministic fitness function to be maximized.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn bounds(&self) -> Bounds;
    fn evaluate(&self, x: &[f64]) -> f64;
}

fn random_shift(dim: usize, half_width: f64, seed: u64) -> Vec<f64> {
    let mut rng = seed::stream(seed, &[seed::tag::PROBLEM]);
    (0..dim).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

/// `-sum (x - s)^2` for a hidden shift `s`.
#[derive(Debug, Clone)]
pub struct Sphere {
    shift: Vec<f64>,
    bounds: Bounds,
}

impl Sphere {
    pub fn new(shift: Vec<f64>) -> Self {
        Self {
            shift,
            bounds: Bounds {
                lower: -5.0,
                upper: 5.0,
            },
        }
    }

    pub fn shifted(dim: usize, seed: u64) -> Self {
        Self::new(random_shift(dim, 2.0, seed))
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }
}

impl Objective for Sphere {
    fn name(&self) -> &str {
        "sphere"
    }

    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn bounds(&self) -> Bounds {
        self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        -x.iter()
            .zip(&self.shift)
            .map(|(a, s)| (a - s) * (a - s))
            .sum::<f64>()
    }
}

/// `-(10 n + sum [(x - s)^2 - 10 cos(2 pi (x - s))])` for a hidden shift `s`.
#[derive(Debug, Clone)]
pub struct Rastrigin {
    shift: Vec<f64>,
}

impl Rastrigin {
    pub fn new(shift: Vec<f64>) -> Self {
        Self { shift }
    }

    pub fn shifted(dim: usize, seed: u64) -> Self {
        Self::new(random_shift(dim, 2.0, seed))
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }
}

impl Objective for Rastrigin {
    fn name(&self) -> &str {
        "rastrigin"
    }

    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            lower: -5.12,
            upper: 5.12,
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let n = self.shift.len() as f64;
        let sum: f64 = x
            .iter()
            .zip(&self.shift)
            .map(|(a, s)| {
                let d = a - s;
                d * d - 10.0 * (2.0 * PI * d).cos()
            })
            .sum();
        -(10.0 * n + sum)
    }
}

/// A 2-D point mass driven by a tanh MLP policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlTask {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub horizon: usize,
    pub dt: f64,
    pub max_acceleration: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

impl Default for ControlTask {
    fn default() -> Self {
        Self {
            state_dim: 4,
            action_dim: 2,
            hidden: vec![16],
            horizon: 200,
            dt: 0.05,
            max_acceleration: 1.0,
            start: [1.0, 0.0],
            goal: [0.0, 0.0],
        }
    }
}

impl ControlTask {
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.state_dim];
        dims.extend(&self.hidden);
        dims.push(self.action_dim);
        dims
    }

    /// Flattened parameter count of the policy network.
    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim != 4 || self.action_dim != 2 {
            return Err(Error::InvalidArgument(
                "the point-mass task observes 4 state values and emits 2 accelerations".into(),
            ));
        }
        if self.horizon == 0 || !(self.dt > 0.0) || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument(
                "horizon, dt and hidden widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Runs one deterministic episode and returns `-sum_t |p_t - goal|^2`.
///
/// Observation is `(p - goal, v)`, the action is `max_acceleration * policy(obs)`, and the
/// state advances with explicit Euler: `p += v dt`, then `v += a dt`.
pub fn pointmass_episode(policy_params: &[f64], task: &ControlTask) -> Result<f64> {
    check_dim("point-mass policy parameters", task.param_count(), policy_params.len())?;
    let dims = task.layer_dims();
    let mut policy = DenseNet::zeros(
        dims.clone(),
        activations_for(&dims, Activation::Tanh, Activation::Tanh),
    )?;
    policy.params_mut().copy_from_slice(policy_params);

    let [gx, gy] = task.goal;
    let (mut px, mut py) = (task.start[0], task.start[1]);
    let (mut vx, mut vy) = (0.0, 0.0);
    let mut total = 0.0;
    for _ in 0..task.horizon {
        let action = policy.predict(&[px - gx, py - gy, vx, vy])?;
        let (ax, ay) = (
            task.max_acceleration * action[0],
            task.max_acceleration * action[1],
        );
        px += vx * task.dt;
        py += vy * task.dt;
        vx += ax * task.dt;
        vy += ay * task.dt;
        total += (px - gx).powi(2) + (py - gy).powi(2);
    }
    Ok(-total)
}

#[derive(Debug, Clone)]
pub struct PointMass {
    task: ControlTask,
}

impl PointMass {
    pub fn new(task: ControlTask) -> Result<Self> {
        task.validate()?;
        Ok(Self { task })
    }

    pub fn task(&self) -> &ControlTask {
        &self.task
    }
}

impl Objective for PointMass {
    fn name(&self) -> &str {
        "pointmass"
    }

    fn dim(&self) -> usize {
        self.task.param_count()
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            lower: -1.0,
            upper: 1.0,
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        pointmass_episode(x, &self.task).expect("dimension checked by FitnessProblem")
    }
}

/// An objective plus a shared evaluation counter and zero or more budget guards.
///
/// Clones share the counter. Each guard added by [`FitnessProblem::with_budget`] refuses
/// calls once the shared counter has reached its budget, so the tightest guard binds.
#[derive(Clone)]
pub struct FitnessProblem {
    objective: Arc<dyn Objective>,
    counter: Arc<AtomicU64>,
    budgets: Vec<u64>,
    latency: Option<Duration>,
}

impl std::fmt::Debug for FitnessProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FitnessProblem")
            .field("name", &self.objective.name())
            .field("dim", &self.objective.dim())
            .field("evaluations", &self.eval_count())
            .field("budgets", &self.budgets)
            .finish()
    }
}

impl FitnessProblem {
    pub fn new(objective: Arc<dyn Objective>) -> Self {
        Self {
            objective,
            counter: Arc::new(AtomicU64::new(0)),
            budgets: Vec::new(),
            latency: None,
        }
    }

    /// Adds an artificial sleep to every evaluation.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = (!latency.is_zero()).then_some(latency);
        self
    }

    pub fn with_budget(&self, budget: u64) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidArgument("budget must be at least 1".into()));
        }
        let mut guarded = self.clone();
        guarded.budgets.push(budget);
        Ok(guarded)
    }

    /// Same objective with an independent counter and no budget guards.
    pub fn detached(&self) -> Self {
        Self {
            objective: Arc::clone(&self.objective),
            counter: Arc::new(AtomicU64::new(0)),
            budgets: Vec::new(),
            latency: self.latency,
        }
    }

    pub fn name(&self) -> &str {
        self.objective.name()
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn bounds(&self) -> Bounds {
        self.objective.bounds()
    }

    pub fn eval_count(&self) -> u64 {
        self.counter.load(Ordering::SeqCst)
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim("fitness input", self.objective.dim(), x.len())?;
        let limit = self.budgets.iter().copied().min();
        if let Some(limit) = limit {
            self.counter
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| {
                    (n < limit).then_some(n + 1)
                })
                .map_err(|_| Error::BudgetExhausted { budget: limit })?;
        } else {
            self.counter.fetch_add(1, Ordering::SeqCst);
        }
        if let Some(latency) = self.latency {
            std::thread::sleep(latency);
        }
        Ok(self.objective.evaluate(x))
    }
}

/// Named problem selection as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    /// Ignored for `pointmass`, whose dimension is the policy parameter count.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Seed of the hidden shift.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub latency_ms: u64,
    #[serde(default)]
    pub task: Option<ControlTask>,
}

pub const PROBLEM_NAMES: [&str; 3] = ["sphere", "rastrigin", "pointmass"];

pub fn build_problem(spec: &ProblemSpec) -> Result<FitnessProblem> {
    let dim_or = |name: &str| {
        spec.dim
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("problem `{name}` needs dim >= 1")))
    };
    let objective: Arc<dyn Objective> = match spec.name.as_str() {
        "sphere" => Arc::new(Sphere::shifted(dim_or("sphere")?, spec.seed)),
        "rastrigin" => Arc::new(Rastrigin::shifted(dim_or("rastrigin")?, spec.seed)),
        "pointmass" => {
            let task = spec.task.clone().unwrap_or_default();
            if let Some(d) = spec.dim {
                check_dim("pointmass dim", task.param_count(), d)?;
            }
            Arc::new(PointMass::new(task)?)
        }
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(FitnessProblem::new(objective).with_latency(Duration::from_millis(spec.latency_ms)))
}
