//! Free flight of the ball under gravity and quadratic drag.
//!
//! The flight is integrated with explicit Euler steps of length `dt`. Before
//! every step the drag-free time to reach the table plane is predicted; once
//! it drops to `dt` or below, a single shortened step of exactly that length
//! finishes the flight. All Jacobians here are exact derivatives of the
//! discrete scheme, not of the continuous dynamics.

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravity magnitude used by the drag-free remaining-time prediction [m/s²].
pub const G_HAT: f64 = 9.8;

/// Default tolerance on `|landing.p_z - z_table|` [m].
pub const LANDING_RESIDUAL_TOL: f64 = 1e-9;

/// Discriminants at or below this value make the remaining-time gradient singular.
pub const DISCRIMINANT_FLOOR: f64 = 1e-12;

/// Position and velocity of the ball in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    /// Position [m].
    pub p: Vector3<f64>,
    /// Velocity [m/s].
    pub v: Vector3<f64>,
}

impl BallState {
    pub fn new(p: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { p, v }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z)
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self {
            p: Vector3::new(x[0], x[1], x[2]),
            v: Vector3::new(x[3], x[4], x[5]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }

    /// Linear interpolation `self + s * (other - self)`.
    pub fn lerp(&self, other: &BallState, s: f64) -> BallState {
        BallState {
            p: self.p + (other.p - self.p) * s,
            v: self.v + (other.v - self.v) * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightParams {
    /// Quadratic drag coefficient [1/m].
    pub k_drag: f64,
    /// Gravitational acceleration [m/s²].
    pub gravity: Vector3<f64>,
    /// Integration step [s].
    pub dt: f64,
    /// Height of the table plane [m].
    pub z_table: f64,
    pub max_steps: usize,
    /// Move the shortened last step exactly onto the table plane.
    pub snap_to_table: bool,
    pub residual_tol: f64,
    pub discriminant_floor: f64,
}

impl Default for FlightParams {
    fn default() -> Self {
        Self {
            k_drag: 0.106,
            gravity: Vector3::new(0.0, 0.0, -9.8),
            dt: 0.01,
            z_table: 0.76,
            max_steps: 20_000,
            snap_to_table: true,
            residual_tol: LANDING_RESIDUAL_TOL,
            discriminant_floor: DISCRIMINANT_FLOOR,
        }
    }
}

impl FlightParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.k_drag >= 0.0) {
            return bad("k_drag must be >= 0");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be > 0");
        }
        if !(self.gravity.z < 0.0) {
            return bad("gravity z component must be < 0");
        }
        if self.max_steps < 1 {
            return bad("max_steps must be >= 1");
        }
        if !self.z_table.is_finite() {
            return bad("z_table must be finite");
        }
        Ok(())
    }
}

/// Result of propagating a post-impact state to the table plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingRecord {
    /// `states[k]` is the state after `k` full steps; `states[0]` is the start.
    pub states: Vec<BallState>,
    pub k_max: usize,
    /// Length of the shortened final step [s].
    pub t_last: f64,
    /// State after the final step, before any snapping onto the table plane.
    pub raw_landing: BallState,
    pub landing_state: BallState,
    pub landing_point: Vector2<f64>,
}

impl LandingRecord {
    pub fn flight_time(&self, dt: f64) -> f64 {
        self.k_max as f64 * dt + self.t_last
    }

    /// Height of the unsnapped final state above the table plane.
    pub fn raw_residual(&self, z_table: f64) -> f64 {
        self.raw_landing.p.z - z_table
    }
}

fn step_with(xi: &BallState, params: &FlightParams, dt: f64) -> BallState {
    let speed = xi.v.norm();
    let acc = -params.k_drag * speed * xi.v + params.gravity;
    BallState {
        p: xi.p + dt * xi.v,
        v: xi.v + dt * acc,
    }
}

/// One explicit Euler step of the drag model, with step `dt_override` if given.
pub fn free_flight_step(xi: &BallState, params: &FlightParams, dt_override: Option<f64>) -> BallState {
    step_with(xi, params, dt_override.unwrap_or(params.dt))
}

/// Jacobians of [`free_flight_step`] with respect to the state and to the step length.
pub fn free_flight_step_jacobians(
    xi: &BallState,
    params: &FlightParams,
    dt_override: Option<f64>,
) -> (Matrix6<f64>, Vector6<f64>) {
    let dt = dt_override.unwrap_or(params.dt);
    let speed = xi.v.norm();
    // d(|v| v)/dv = |v| I + v v^T / |v|, which vanishes at v = 0.
    let drag_jac = if speed > 0.0 {
        Matrix3::identity() * speed + xi.v * xi.v.transpose() / speed
    } else {
        Matrix3::zeros()
    };

    let mut j = Matrix6::identity();
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Matrix3::identity() * dt));
    j.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Matrix3::identity() - drag_jac * (dt * params.k_drag)));

    let acc = -params.k_drag * speed * xi.v + params.gravity;
    let j_dt = Vector6::new(xi.v.x, xi.v.y, xi.v.z, acc.x, acc.y, acc.z);
    (j, j_dt)
}

fn discriminant(xi: &BallState, z_table: f64) -> f64 {
    let a = xi.v.z / G_HAT;
    a * a + 2.0 * (xi.p.z - z_table) / G_HAT
}

/// Drag-free prediction of the time until the ball reaches `z_table`.
pub fn remaining_time(xi: &BallState, z_table: f64) -> Result<f64> {
    let disc = discriminant(xi, z_table);
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant(disc));
    }
    Ok((xi.v.z / G_HAT + disc.sqrt()).max(0.0))
}

/// Gradient of [`remaining_time`] with respect to the state `(p, v)`.
pub fn remaining_time_gradient(xi: &BallState, z_table: f64) -> Result<Vector6<f64>> {
    remaining_time_gradient_with_floor(xi, z_table, DISCRIMINANT_FLOOR)
}

pub fn remaining_time_gradient_with_floor(xi: &BallState, z_table: f64, floor: f64) -> Result<Vector6<f64>> {
    let disc = discriminant(xi, z_table);
    if disc <= floor {
        return Err(Error::SingularGradient(disc));
    }
    let s = disc.sqrt();
    let mut g = Vector6::zeros();
    g[2] = 1.0 / (G_HAT * s);
    g[5] = 1.0 / G_HAT + xi.v.z / (G_HAT * G_HAT * s);
    Ok(g)
}

/// Fraction along the segment `from -> to` at which the height equals `z_table`.
fn snap_fraction(from: &BallState, to: &BallState, z_table: f64) -> Option<f64> {
    let dz = from.p.z - to.p.z;
    if dz.abs() <= f64::EPSILON * from.p.z.abs().max(1.0) {
        None
    } else {
        Some((from.p.z - z_table) / dz)
    }
}

/// Integrates from the post-impact state down to the table plane.
pub fn propagate_to_landing(xi_plus: &BallState, params: &FlightParams) -> Result<LandingRecord> {
    if xi_plus.p.z < params.z_table {
        return Err(Error::BelowTable {
            z: xi_plus.p.z,
            table: params.z_table,
        });
    }
    let mut states = vec![*xi_plus];
    let t_last = loop {
        let current = states.last().expect("non-empty");
        let t_r = remaining_time(current, params.z_table)?;
        if t_r <= params.dt {
            break t_r;
        }
        if states.len() > params.max_steps {
            return Err(Error::MaxStepsExceeded(params.max_steps));
        }
        let next = step_with(current, params, params.dt);
        states.push(next);
    };
    let k_max = states.len() - 1;
    let last = states[k_max];
    let raw = step_with(&last, params, t_last);

    let landing_state = if params.snap_to_table {
        match snap_fraction(&last, &raw, params.z_table) {
            Some(s) => {
                let mut snapped = last.lerp(&raw, s);
                snapped.p.z = params.z_table;
                snapped
            }
            None => BallState {
                p: Vector3::new(raw.p.x, raw.p.y, params.z_table),
                v: raw.v,
            },
        }
    } else {
        raw
    };

    Ok(LandingRecord {
        landing_point: Vector2::new(landing_state.p.x, landing_state.p.y),
        states,
        k_max,
        t_last,
        raw_landing: raw,
        landing_state,
    })
}

/// Jacobian of the final shortened step, `A + b c^T`, where the step length
/// itself depends on the state through the remaining-time prediction.
pub fn final_step_jacobian(last: &BallState, t_last: f64, params: &FlightParams) -> Result<Matrix6<f64>> {
    let (a, b) = free_flight_step_jacobians(last, params, Some(t_last));
    let c = remaining_time_gradient_with_floor(last, params.z_table, params.discriminant_floor)?;
    Ok(a + b * c.transpose())
}

/// Jacobian of the reported landing state with respect to the post-impact state.
///
/// Product of the per-step Jacobians over the stored states, followed by the
/// final shortened step. With `snap_to_table` on, the derivative of the
/// linear snap onto the table plane is folded in as well so that the result
/// is the exact derivative of `landing_state`.
pub fn landing_state_jacobian(record: &LandingRecord, params: &FlightParams) -> Result<Matrix6<f64>> {
    let mut chain = Matrix6::identity();
    for xi in &record.states[..record.k_max] {
        let (j, _) = free_flight_step_jacobians(xi, params, None);
        chain = j * chain;
    }
    let last = &record.states[record.k_max];
    let f = final_step_jacobian(last, record.t_last, params)?;
    let head = if params.snap_to_table {
        snap_jacobian(last, &record.raw_landing, &f, params.z_table)
    } else {
        f
    };
    Ok(head * chain)
}

/// Derivative of `last + s (raw - last)` with respect to `last`, where
/// `raw = q(last, T_r(last))` has Jacobian `f` and `s` puts the height on `z_table`.
fn snap_jacobian(last: &BallState, raw: &BallState, f: &Matrix6<f64>, z_table: f64) -> Matrix6<f64> {
    let Some(s) = snap_fraction(last, raw, z_table) else {
        return *f;
    };
    let dz = last.p.z - raw.p.z;
    let mut e_z = Vector6::zeros();
    e_z[2] = 1.0;
    // d(dz)/d(last) = e_z - row_z(f)
    let d_dz = e_z - f.row(2).transpose();
    let ds = (e_z * dz - d_dz * (last.p.z - z_table)) / (dz * dz);
    let delta = raw.to_vector() - last.to_vector();
    let mut j = Matrix6::identity() * (1.0 - s) + f * s + delta * ds.transpose();
    // The snapped height is pinned to the table plane.
    j.row_mut(2).fill(0.0);
    j
}
