//! Four-DoF arm used to realize an interception policy.
//!
//! Joint 1 yaws the whole arm about the vertical axis through `base`. Joints
//! 2 and 3 form a planar shoulder/elbow chain in the vertical plane selected by
//! joint 1, and joint 4 rolls the racket about the arm's radial direction.
//! The yaw angle picks the point on the incoming trajectory where the ball is
//! met, which in turn fixes the interception time and the two planar angles.

use nalgebra::{Matrix3, Matrix3x2, Vector3};
use serde::{Deserialize, Serialize};

use crate::ballistics::BallState;
use crate::error::{Error, Result};

/// The two decision variables: base yaw and racket roll at interception [rad].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterceptionPolicy {
    pub theta1: f64,
    pub theta4: f64,
}

impl InterceptionPolicy {
    pub const fn new(theta1: f64, theta4: f64) -> Self {
        Self { theta1, theta4 }
    }

    pub fn to_vector(&self) -> nalgebra::Vector2<f64> {
        nalgebra::Vector2::new(self.theta1, self.theta4)
    }

    pub fn from_vector(v: &nalgebra::Vector2<f64>) -> Self {
        Self::new(v.x, v.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmGeometry {
    /// Yaw pivot / shoulder position [m].
    pub base: Vector3<f64>,
    /// Upper-arm length [m].
    pub l1: f64,
    /// Forearm length including the racket offset [m].
    pub l2: f64,
    /// Racket normal in the rest configuration.
    pub rest_normal: Vector3<f64>,
    /// Base yaw rate at interception [rad/s].
    pub theta1_dot: f64,
    /// Margin kept away from the reach limits [m].
    pub reach_margin: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            base: Vector3::new(0.0, 0.0, 0.8),
            l1: 0.5,
            l2: 0.45,
            rest_normal: Vector3::y(),
            theta1_dot: 6.0,
            reach_margin: 0.01,
        }
    }
}

impl ArmGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.l1 > 0.0 && self.l2 > 0.0) {
            return Err(Error::InvalidConfig("link lengths must be > 0".into()));
        }
        if (self.rest_normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("rest_normal must be a unit vector".into()));
        }
        if self.rest_normal.z.abs() > 1e-9 {
            return Err(Error::InvalidConfig("rest_normal must be horizontal".into()));
        }
        Ok(())
    }

    /// Horizontal direction of zero yaw: the arm's radial axis in the rest pose.
    pub fn zero_azimuth(&self) -> Vector3<f64> {
        self.rest_normal.cross(&Vector3::z())
    }

    /// Horizontal unit vector of the arm's radial axis at yaw `theta1`.
    pub fn radial(&self, theta1: f64) -> Vector3<f64> {
        rot_z(theta1) * self.zero_azimuth()
    }

    /// Azimuth of `point` seen from the base, counterclockwise about +z.
    pub fn azimuth(&self, point: &Vector3<f64>) -> f64 {
        let d = point - self.base;
        let e0 = self.zero_azimuth();
        let e1 = Vector3::z().cross(&e0);
        d.dot(&e1).atan2(d.dot(&e0))
    }

    pub fn reach_limits(&self) -> (f64, f64) {
        (
            (self.l1 - self.l2).abs() + self.reach_margin,
            self.l1 + self.l2 - self.reach_margin,
        )
    }

    /// Racket center for the given joint angles.
    pub fn forward_kinematics(&self, theta1: f64, theta2: f64, theta3: f64) -> Vector3<f64> {
        let rho = self.l1 * theta2.cos() + self.l2 * (theta2 + theta3).cos();
        let h = self.l1 * theta2.sin() + self.l2 * (theta2 + theta3).sin();
        self.base + self.radial(theta1) * rho + Vector3::z() * h
    }
}

/// One sample of an incoming ball trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: BallState,
}

/// Time-ordered samples of the incoming ball.
pub type Trajectory = Vec<Sample>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptionEvent {
    pub t_ic: f64,
    /// Ball state right before impact.
    pub xi_minus: BallState,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub racket_pos: Vector3<f64>,
}

/// Planar two-link inverse kinematics, elbow-up.
///
/// `rho` is the horizontal distance along the radial axis and `h` the height
/// above the shoulder. Returns `(theta2, theta3)` with `theta3 <= 0`.
pub fn planar_ik(geom: &ArmGeometry, rho: f64, h: f64) -> Result<(f64, f64)> {
    let dist = rho.hypot(h);
    let (min, max) = geom.reach_limits();
    if dist < min || dist > max {
        return Err(Error::OutOfReach { distance: dist, min, max });
    }
    let (l1, l2) = (geom.l1, geom.l2);
    let cos3 = ((dist * dist - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    // Rounding leaves cos3 a few ulps below 1 at full extension.
    let theta3 = if dist >= (l1 + l2) * (1.0 - 1e-14) { 0.0 } else { -cos3.acos() };
    let theta2 = h.atan2(rho) - (l2 * theta3.sin()).atan2(l1 + l2 * theta3.cos());
    Ok((theta2, theta3))
}

/// Finds where the ball crosses the arm's radial axis at yaw `theta1`.
///
/// The crossing is located on the first pair of bracketing samples and the
/// ball state is linearly interpolated between them, so the racket center
/// lies exactly on the yaw ray.
pub fn interception_event(incoming: &[Sample], geom: &ArmGeometry, theta1: f64) -> Result<InterceptionEvent> {
    let u = geom.radial(theta1);
    let side = |p: &Vector3<f64>| {
        let d = p - geom.base;
        u.x * d.y - u.y * d.x
    };
    for pair in incoming.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ca, cb) = (side(&a.state.p), side(&b.state.p));
        if ca == 0.0 && cb == 0.0 {
            continue;
        }
        if ca.signum() == cb.signum() && ca != 0.0 && cb != 0.0 {
            continue;
        }
        let lambda = ca / (ca - cb);
        let xi = a.state.lerp(&b.state, lambda);
        let d = xi.p - geom.base;
        if d.dot(&u) <= 0.0 {
            // crossing of the opposite ray
            continue;
        }
        let rho = d.x * u.x + d.y * u.y;
        let (theta2, theta3) = planar_ik(geom, rho, d.z)?;
        return Ok(InterceptionEvent {
            t_ic: a.t + lambda * (b.t - a.t),
            xi_minus: xi,
            theta1,
            theta2,
            theta3,
            racket_pos: xi.p,
        });
    }
    Err(Error::NoCrossing(theta1))
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_z_deriv(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

fn rot_x_deriv(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

/// Racket orientation relative to rest: yaw about z, then roll about the radial axis.
pub fn racket_rotation(phi: &InterceptionPolicy) -> Matrix3<f64> {
    rot_z(phi.theta1) * rot_x(phi.theta4)
}

pub fn racket_rotation_jacobian(phi: &InterceptionPolicy) -> (Matrix3<f64>, Matrix3<f64>) {
    (
        rot_z_deriv(phi.theta1) * rot_x(phi.theta4),
        rot_z(phi.theta1) * rot_x_deriv(phi.theta4),
    )
}

/// Racket velocity at impact: only the base yaw is moving.
pub fn racket_velocity(event: &InterceptionEvent, geom: &ArmGeometry) -> Vector3<f64> {
    Vector3::z().cross(&(event.racket_pos - geom.base)) * geom.theta1_dot
}

/// `d v_R / d phi` with the interception event held fixed, which is identically zero.
pub fn racket_velocity_jacobian(_event: &InterceptionEvent, _geom: &ArmGeometry) -> Matrix3x2<f64> {
    Matrix3x2::zeros()
}

/// `d v_R / d phi` including the motion of the interception point with `theta1`.
///
/// Central differences through [`interception_event`] with step `h`.
pub fn racket_velocity_jacobian_coupled(
    incoming: &[Sample],
    geom: &ArmGeometry,
    phi: &InterceptionPolicy,
    h: f64,
) -> Result<Matrix3x2<f64>> {
    let plus = interception_event(incoming, geom, phi.theta1 + h)?;
    let minus = interception_event(incoming, geom, phi.theta1 - h)?;
    let col = (racket_velocity(&plus, geom) - racket_velocity(&minus, geom)) / (2.0 * h);
    let mut j = Matrix3x2::zeros();
    j.set_column(0, &col);
    Ok(j)
}
