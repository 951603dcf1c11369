//! Simulated interception environment standing in for the physical robot.
//!
//! The ground truth reuses the predictor's physics code with its own
//! parameters (drag, restitution, finer step), so the predictors always see a
//! slightly wrong model. Observed landings get additive Gaussian noise.

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arm::{interception_event, racket_rotation, racket_velocity, ArmGeometry, InterceptionEvent, InterceptionPolicy, Sample, Trajectory};
use crate::ballistics::{free_flight_step, propagate_to_landing, BallState, FlightParams};
use crate::error::{Error, Result};
use crate::impact::{racket_impact, ImpactParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LauncherConfig {
    pub nominal_state: BallState,
    /// Launch position jitter std [m].
    pub position_jitter: Vector3<f64>,
    /// Launch velocity jitter std [m/s].
    pub velocity_jitter: Vector3<f64>,
    /// Integration and sampling step of the incoming flight [s].
    pub sample_dt: f64,
    /// Vertical restitution of the incoming bounce on the table.
    pub bounce_restitution: f64,
    /// Fraction of horizontal velocity kept through the bounce.
    pub bounce_friction: f64,
    /// Stop sampling once the ball is this far behind the base along -y [m].
    pub pass_distance: f64,
    /// Give up after this much flight time [s].
    pub max_time: f64,
}

impl Default for LauncherConfig {
    fn default() -> Self {
        Self {
            nominal_state: BallState::new(Vector3::new(0.4, 4.2, 1.1), Vector3::new(0.0, -4.0, 5.0)),
            position_jitter: Vector3::new(0.0025, 0.0025, 0.0025),
            velocity_jitter: Vector3::new(0.01, 0.01, 0.01),
            sample_dt: 0.002,
            bounce_restitution: 0.9,
            bounce_friction: 0.9,
            pass_distance: 1.0,
            max_time: 3.0,
        }
    }
}

impl LauncherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_dt > 0.0) {
            return Err(Error::InvalidConfig("launcher.sample_dt must be > 0".into()));
        }
        if self.position_jitter.iter().chain(self.velocity_jitter.iter()).any(|&s| !(s >= 0.0)) {
            return Err(Error::InvalidConfig("launcher jitter must be >= 0".into()));
        }
        Ok(())
    }
}

/// Rectangle of the table top in the table plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table {
    pub center: Vector2<f64>,
    /// Full extents along x and y [m].
    pub size: Vector2<f64>,
}

impl Default for Table {
    fn default() -> Self {
        Self {
            center: Vector2::new(0.0, 2.0),
            size: Vector2::new(1.525, 2.74),
        }
    }
}

impl Table {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center.x).abs() <= 0.5 * self.size.x && (y - self.center.y).abs() <= 0.5 * self.size.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub truth_flight: FlightParams,
    pub truth_impact: ImpactParams,
    pub geom: ArmGeometry,
    /// Std of the additive landing noise along x and y [m].
    pub landing_noise_std: Vector2<f64>,
    pub launcher: LauncherConfig,
    pub table: Table,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            truth_flight: FlightParams {
                k_drag: 0.12,
                dt: crate::TRUTH_DT,
                ..FlightParams::default()
            },
            truth_impact: ImpactParams {
                restitution: Vector3::new(0.72, -0.78, 0.72),
            },
            geom: ArmGeometry::default(),
            landing_noise_std: Vector2::new(0.10, 0.23),
            launcher: LauncherConfig::default(),
            table: Table::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.truth_flight.validate()?;
        self.geom.validate()?;
        self.launcher.validate()?;
        if self.landing_noise_std.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::InvalidConfig("landing_noise_std must be >= 0".into()));
        }
        Ok(())
    }

    /// The same scenario without launch jitter or landing noise.
    pub fn noiseless(&self) -> Self {
        let mut cfg = self.clone();
        cfg.landing_noise_std = Vector2::zeros();
        cfg.launcher.position_jitter = Vector3::zeros();
        cfg.launcher.velocity_jitter = Vector3::zeros();
        cfg
    }
}

fn jitter<R: Rng + ?Sized>(std: &Vector3<f64>, rng: &mut R) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        if std[i] > 0.0 {
            Normal::new(0.0, std[i]).expect("finite std").sample(rng)
        } else {
            0.0
        }
    })
}

/// Samples one incoming ball from the launcher.
///
/// The ball bounces once on the table on its way to the robot; sampling
/// stops at a second table contact, below the floor, or once the ball has
/// passed the base.
///
/// Six normal draws are consumed per launch (zero-std components included), so
/// the random stream stays aligned regardless of which jitters are enabled.
pub fn launch<R: Rng + ?Sized>(cfg: &LauncherConfig, truth: &FlightParams, table: &Table, geom: &ArmGeometry, rng: &mut R) -> Trajectory {
    let dp = jitter(&cfg.position_jitter, rng);
    let dv = jitter(&cfg.velocity_jitter, rng);
    let mut state = BallState::new(cfg.nominal_state.p + dp, cfg.nominal_state.v + dv);
    let mut samples = vec![Sample { t: 0.0, state }];
    let mut t = 0.0;
    let end_y = geom.base.y - cfg.pass_distance;
    let mut bounced = false;
    while t < cfg.max_time {
        state = free_flight_step(&state, truth, Some(cfg.sample_dt));
        t += cfg.sample_dt;
        let hit_table = state.p.z <= truth.z_table && state.v.z < 0.0 && table.contains(state.p.x, state.p.y);
        if hit_table && !bounced {
            bounced = true;
            state.p.z = 2.0 * truth.z_table - state.p.z;
            state.v.x *= cfg.bounce_friction;
            state.v.y *= cfg.bounce_friction;
            state.v.z *= -cfg.bounce_restitution;
            samples.push(Sample { t, state });
            continue;
        }
        samples.push(Sample { t, state });
        if hit_table || state.p.y < end_y || state.p.z < 0.0 {
            break;
        }
    }
    samples
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub noiseless_landing: Vector2<f64>,
    pub event: InterceptionEvent,
    pub incoming: Trajectory,
    pub flight_time: f64,
}

/// Deterministic part of an interception for a given incoming ball.
pub fn truth_landing(phi: &InterceptionPolicy, incoming: &[Sample], cfg: &EnvConfig) -> Result<(Vector2<f64>, InterceptionEvent, f64)> {
    let event = interception_event(incoming, &cfg.geom, phi.theta1)?;
    let xi_plus = racket_impact(
        &event.xi_minus,
        &racket_rotation(phi),
        &racket_velocity(&event, &cfg.geom),
        &cfg.truth_impact,
    );
    let record = propagate_to_landing(&xi_plus, &cfg.truth_flight)?;
    let t = record.flight_time(cfg.truth_flight.dt);
    Ok((record.landing_point, event, t))
}

/// One launch, one return: the observed (noisy) landing point.
///
/// On a miss the launch and its noise draws are still consumed.
pub fn intercept<R: Rng + ?Sized>(phi: &InterceptionPolicy, cfg: &EnvConfig, rng: &mut R) -> Result<(Vector2<f64>, Diagnostics)> {
    let incoming = launch(&cfg.launcher, &cfg.truth_flight, &cfg.table, &cfg.geom, rng);
    let noise = Vector2::new(
        rng.sample::<f64, _>(rand_distr::StandardNormal) * cfg.landing_noise_std.x,
        rng.sample::<f64, _>(rand_distr::StandardNormal) * cfg.landing_noise_std.y,
    );
    let (landing, event, flight_time) = truth_landing(phi, &incoming, cfg)?;
    Ok((
        landing + noise,
        Diagnostics {
            noiseless_landing: landing,
            event,
            incoming,
            flight_time,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub mean: Vector2<f64>,
    /// `sqrt(mean |r - mean|^2)` over the successful trials.
    pub std: f64,
    pub trials: usize,
    pub misses: usize,
}

/// Landing scatter of a fixed policy.
pub fn estimate_variance<R: Rng + ?Sized>(phi: &InterceptionPolicy, n_trials: usize, cfg: &EnvConfig, rng: &mut R) -> Result<VarianceEstimate> {
    if n_trials < 2 {
        return Err(Error::InvalidConfig("estimate_variance needs at least 2 trials".into()));
    }
    let mut points = Vec::with_capacity(n_trials);
    let mut misses = 0;
    for _ in 0..n_trials {
        match intercept(phi, cfg, rng) {
            Ok((r, _)) => points.push(r),
            Err(e) if e.is_miss() => misses += 1,
            Err(e) => return Err(e),
        }
    }
    let rate = misses as f64 / n_trials as f64;
    if rate >= 0.1 || points.is_empty() {
        return Err(Error::InfeasibleRegion { rate });
    }
    let m = crate::metrics::running_metrics(&points, &Vector2::zeros());
    Ok(VarianceEstimate {
        mean: m.r_bar,
        std: m.sigma,
        trials: n_trials,
        misses,
    })
}
