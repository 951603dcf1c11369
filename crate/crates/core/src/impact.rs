//! Linear racket-ball impact and its derivative with respect to the policy.

use nalgebra::{Matrix3, Matrix3x2, Matrix6x2, Vector3};
use serde::{Deserialize, Serialize};

use crate::arm::{racket_rotation, racket_rotation_jacobian, InterceptionPolicy};
use crate::ballistics::BallState;

/// Diagonal restitution matrix expressed in the racket's rest frame.
///
/// The negative entry acts along the racket normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactParams {
    pub restitution: Vector3<f64>,
}

impl Default for ImpactParams {
    fn default() -> Self {
        Self {
            restitution: Vector3::new(0.75, -0.75, 0.75),
        }
    }
}

impl ImpactParams {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.restitution)
    }
}

/// `p+ = p-`, `v+ = G M G^T (v- - v_R) + v_R`.
pub fn racket_impact(
    xi_minus: &BallState,
    gamma: &Matrix3<f64>,
    v_racket: &Vector3<f64>,
    params: &ImpactParams,
) -> BallState {
    let m = gamma * params.matrix() * gamma.transpose();
    BallState {
        p: xi_minus.p,
        v: m * (xi_minus.v - v_racket) + v_racket,
    }
}

/// `d xi+ / d phi` for a fixed pre-impact state.
///
/// `v_racket_jac` is `d v_R / d phi`; pass zeros for the frozen-event convention.
/// Position rows are zero since the impact does not move the ball.
pub fn impact_state_jacobian(
    xi_minus: &BallState,
    phi: &InterceptionPolicy,
    v_racket: &Vector3<f64>,
    v_racket_jac: &Matrix3x2<f64>,
    params: &ImpactParams,
) -> Matrix6x2<f64> {
    let gamma = racket_rotation(phi);
    let m = params.matrix();
    let conj = gamma * m * gamma.transpose();
    let (d1, d4) = racket_rotation_jacobian(phi);
    let rel = xi_minus.v - v_racket;

    let mut out = Matrix6x2::zeros();
    for (col, dg) in [d1, d4].iter().enumerate() {
        let d_conj = dg * m * gamma.transpose() + gamma * m * dg.transpose();
        let dvr = v_racket_jac.column(col);
        let dv = d_conj * rel - conj * dvr + dvr;
        out.fixed_view_mut::<3, 1>(3, col).copy_from(&dv);
    }
    out
}
