//! Approximate online projected gradient descent over the interception policy.
//!
//! Each iteration plays one ball with the current policy, observes the noisy
//! landing point and steps along `-J^T (r - r_target)`, where `J` comes from a
//! landing model evaluated at the current policy. The iterate is clamped back
//! into the joint-limit box after every step.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{InterceptionPolicy, Sample};
use crate::error::{Error, Result};
use crate::metrics::MetricsState;
use crate::sim_env::{intercept, EnvConfig};

/// Box of admissible policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeasibleSet {
    pub theta1_bounds: [f64; 2],
    pub theta4_bounds: [f64; 2],
}

impl Default for FeasibleSet {
    fn default() -> Self {
        Self {
            theta1_bounds: [-FRAC_PI_2, FRAC_PI_2],
            theta4_bounds: [-FRAC_PI_4, FRAC_PI_4],
        }
    }
}

impl FeasibleSet {
    pub fn new(theta1_bounds: [f64; 2], theta4_bounds: [f64; 2]) -> Result<Self> {
        let k = Self {
            theta1_bounds,
            theta4_bounds,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("theta1_bounds", self.theta1_bounds), ("theta4_bounds", self.theta4_bounds)] {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(Error::InvalidConfig(format!("{name} must be finite with lower < upper")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, phi: &InterceptionPolicy) -> bool {
        (self.theta1_bounds[0]..=self.theta1_bounds[1]).contains(&phi.theta1)
            && (self.theta4_bounds[0]..=self.theta4_bounds[1]).contains(&phi.theta4)
    }

    pub fn lower(&self) -> Vector2<f64> {
        Vector2::new(self.theta1_bounds[0], self.theta4_bounds[0])
    }

    pub fn upper(&self) -> Vector2<f64> {
        Vector2::new(self.theta1_bounds[1], self.theta4_bounds[1])
    }

    pub fn center(&self) -> Vector2<f64> {
        (self.lower() + self.upper()) * 0.5
    }

    pub fn half_widths(&self) -> Vector2<f64> {
        (self.upper() - self.lower()) * 0.5
    }

    /// Shrinks the box by `margin` on every side.
    pub fn shrunk(&self, margin: f64) -> Result<Self> {
        Self::new(
            [self.theta1_bounds[0] + margin, self.theta1_bounds[1] - margin],
            [self.theta4_bounds[0] + margin, self.theta4_bounds[1] - margin],
        )
    }

    /// Euclidean projection, i.e. componentwise clamping.
    pub fn project(&self, phi: &InterceptionPolicy) -> InterceptionPolicy {
        InterceptionPolicy::new(
            phi.theta1.clamp(self.theta1_bounds[0], self.theta1_bounds[1]),
            phi.theta4.clamp(self.theta4_bounds[0], self.theta4_bounds[1]),
        )
    }
}

/// `alpha_i = alpha1 / sqrt(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub alpha1: f64,
}

impl StepSchedule {
    pub fn new(alpha1: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha1.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha1 must be a positive number, got {alpha1}")));
        }
        Ok(Self { alpha1 })
    }

    /// Step length of iteration `i`, counted from 1.
    pub fn step_length(&self, i: usize) -> f64 {
        assert!(i >= 1, "iterations are counted from 1");
        self.alpha1 / (i as f64).sqrt()
    }
}

/// `Pi_K(phi - alpha J^T (r_landing - r_target))`.
pub fn gd_update(
    phi: &InterceptionPolicy,
    r_landing: &Vector2<f64>,
    r_target: &Vector2<f64>,
    jac: &Matrix2<f64>,
    alpha: f64,
    k: &FeasibleSet,
) -> InterceptionPolicy {
    let step = jac.transpose() * (r_landing - r_target) * alpha;
    k.project(&InterceptionPolicy::from_vector(&(phi.to_vector() - step)))
}

/// Anything that predicts a landing point and its policy Jacobian.
///
/// `incoming` is the trajectory the environment just played; models that
/// ignore the ball state are free to disregard it.
pub trait LandingModel: Sync {
    fn name(&self) -> &'static str;
    fn predict(&self, phi: &InterceptionPolicy, incoming: &[Sample]) -> Result<Vector2<f64>>;
    fn jacobian(&self, phi: &InterceptionPolicy, incoming: &[Sample]) -> Result<Matrix2<f64>>;
}

/// One played ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Policy the ball was played with.
    pub phi: InterceptionPolicy,
    pub landing: Vector2<f64>,
    pub alpha: f64,
    pub loss: f64,
    pub eps: f64,
    pub sigma: f64,
    pub r_bar: Vector2<f64>,
}

impl IterationRecord {
    /// Distance of this single landing from the target.
    pub fn distance(&self, target: &Vector2<f64>) -> f64 {
        (self.landing - target).norm()
    }
}

/// A missed interception that was retried.
#[derive(Debug, Clone, PartialEq)]
pub struct MissRecord {
    /// Iteration during which the miss happened.
    pub iter: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
    pub misses: Vec<MissRecord>,
    pub target: Vector2<f64>,
    pub seed: u64,
    pub predictor: String,
}

impl RunLog {
    pub const HEADER: [&'static str; 11] = ["iter", "theta1", "theta4", "land_x", "land_y", "alpha", "loss", "eps", "sigma", "rbar_x", "rbar_y"];

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a run log holds at least one iteration")
    }

    /// First iteration whose own landing lies within `threshold` of the target.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.distance(&self.target) < threshold).map(|r| r.iter)
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        use crate::artifact::fmt_num;
        self.records
            .iter()
            .map(|r| {
                let mut row = vec![r.iter.to_string()];
                row.extend(
                    [r.phi.theta1, r.phi.theta4, r.landing.x, r.landing.y, r.alpha, r.loss, r.eps, r.sigma, r.r_bar.x, r.r_bar.y]
                        .into_iter()
                        .map(fmt_num),
                );
                row
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub target: Vector2<f64>,
    pub phi1: InterceptionPolicy,
    pub n_iters: usize,
    pub schedule: StepSchedule,
    pub k: FeasibleSet,
    pub max_consecutive_misses: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.k.validate()?;
        if self.n_iters < 1 {
            return Err(Error::InvalidConfig("n_iters must be >= 1".into()));
        }
        if !self.k.contains(&self.phi1) {
            return Err(Error::InvalidConfig(format!(
                "phi1 ({}, {}) lies outside the feasible set",
                self.phi1.theta1, self.phi1.theta4
            )));
        }
        if self.max_consecutive_misses < 1 {
            return Err(Error::InvalidConfig("max_consecutive_misses must be >= 1".into()));
        }
        StepSchedule::new(self.schedule.alpha1).map(|_| ())
    }
}

/// Seeds a run's generator; `stream` separates runs sharing one master seed.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs the online loop on a fresh generator seeded with `seed`.
pub fn run_online(env: &EnvConfig, model: &dyn LandingModel, cfg: &RunConfig, seed: u64) -> Result<RunLog> {
    let mut rng = run_rng(seed, 0);
    run_online_with_rng(env, model, cfg, seed, &mut rng)
}

pub fn run_online_with_rng<R: Rng + ?Sized>(
    env: &EnvConfig,
    model: &dyn LandingModel,
    cfg: &RunConfig,
    seed: u64,
    rng: &mut R,
) -> Result<RunLog> {
    cfg.validate()?;
    let mut phi = cfg.phi1;
    let mut metrics = MetricsState::new();
    let mut records = Vec::with_capacity(cfg.n_iters);
    let mut misses = Vec::new();
    let mut consecutive = 0;
    let mut i = 1;
    while i <= cfg.n_iters {
        let (landing, diag) = match intercept(&phi, env, rng) {
            Ok(hit) => hit,
            Err(e) if e.is_miss() => {
                consecutive += 1;
                misses.push(MissRecord {
                    iter: i,
                    reason: e.to_string(),
                });
                if consecutive >= cfg.max_consecutive_misses {
                    return Err(Error::AbortedRun(consecutive));
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        consecutive = 0;
        let alpha = cfg.schedule.step_length(i);
        let err = landing - cfg.target;
        metrics.push(landing);
        let m = metrics.current(&cfg.target).expect("one point was just pushed");
        records.push(IterationRecord {
            iter: i,
            phi,
            landing,
            alpha,
            loss: 0.5 * err.norm_squared(),
            eps: m.eps,
            sigma: m.sigma,
            r_bar: m.r_bar,
        });
        let jac = model.jacobian(&phi, &diag.incoming)?;
        phi = gd_update(&phi, &landing, &cfg.target, &jac, alpha, &cfg.k);
        i += 1;
    }
    Ok(RunLog {
        records,
        misses,
        target: cfg.target,
        seed,
        predictor: model.name().to_string(),
    })
}
