//! First-principles landing predictor `g(phi)` and its policy Jacobian.
//!
//! interception event -> racket impact -> drag flight to the table plane.
//! The gradient is the chain
//! `d xi_landing / d phi = (d xi_landing / d xi+) (d xi+ / d phi)`
//! restricted to the horizontal landing coordinates.

use nalgebra::{Matrix2, Matrix6x2, Vector2};
use serde::{Deserialize, Serialize};

use crate::arm::{
    interception_event, racket_rotation, racket_velocity, racket_velocity_jacobian, ArmGeometry,
    InterceptionEvent, InterceptionPolicy, Sample,
};
use crate::ballistics::{landing_state_jacobian, propagate_to_landing, BallState, FlightParams, LandingRecord};
use crate::error::Result;
use crate::impact::{impact_state_jacobian, racket_impact, ImpactParams};

/// Step used for the finite-difference geometry coupling term [rad].
pub const COUPLING_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreyboxParams {
    pub flight: FlightParams,
    pub impact: ImpactParams,
    pub geom: ArmGeometry,
    /// Also differentiate the interception point with respect to `theta1`.
    pub couple_geometry: bool,
}

impl Default for GreyboxParams {
    fn default() -> Self {
        Self {
            flight: FlightParams {
                dt: crate::PREDICTOR_DT,
                ..FlightParams::default()
            },
            impact: ImpactParams::default(),
            geom: ArmGeometry::default(),
            couple_geometry: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GreyboxPrediction {
    pub landing: Vector2<f64>,
    /// `d landing / d phi`, columns ordered `(theta1, theta4)`.
    pub jacobian: Matrix2<f64>,
    pub event: InterceptionEvent,
    pub record: LandingRecord,
}

/// Post-impact state for a policy with the interception event already fixed.
pub fn post_impact_state(
    phi: &InterceptionPolicy,
    event: &InterceptionEvent,
    geom: &ArmGeometry,
    impact: &ImpactParams,
) -> BallState {
    racket_impact(&event.xi_minus, &racket_rotation(phi), &racket_velocity(event, geom), impact)
}

/// Landing record for `phi` with the interception event frozen.
pub fn landing_with_event(
    phi: &InterceptionPolicy,
    event: &InterceptionEvent,
    params: &GreyboxParams,
) -> Result<LandingRecord> {
    let xi_plus = post_impact_state(phi, event, &params.geom, &params.impact);
    propagate_to_landing(&xi_plus, &params.flight)
}

/// Predicted landing point with the interception event frozen.
///
/// Only the racket orientation follows `phi`; this is the map whose exact
/// derivative [`predict_landing_with_gradient`] returns in frozen mode.
pub fn predict_landing_frozen(
    phi: &InterceptionPolicy,
    event: &InterceptionEvent,
    params: &GreyboxParams,
) -> Result<Vector2<f64>> {
    Ok(landing_with_event(phi, event, params)?.landing_point)
}

pub fn predict_landing(phi: &InterceptionPolicy, incoming: &[Sample], params: &GreyboxParams) -> Result<Vector2<f64>> {
    let event = interception_event(incoming, &params.geom, phi.theta1)?;
    predict_landing_frozen(phi, &event, params)
}

/// `d xi+ / d phi` for the event at `phi`, with the optional geometry coupling.
pub fn post_impact_jacobian(
    phi: &InterceptionPolicy,
    event: &InterceptionEvent,
    incoming: &[Sample],
    params: &GreyboxParams,
) -> Result<Matrix6x2<f64>> {
    let v_racket = racket_velocity(event, &params.geom);
    let frozen = impact_state_jacobian(
        &event.xi_minus,
        phi,
        &v_racket,
        &racket_velocity_jacobian(event, &params.geom),
        &params.impact,
    );
    if !params.couple_geometry {
        return Ok(frozen);
    }
    // Extra theta1 column from moving the interception point along the path,
    // with the racket orientation held at phi.
    let h = COUPLING_FD_STEP;
    let shifted = |d: f64| -> Result<BallState> {
        let ev = interception_event(incoming, &params.geom, phi.theta1 + d)?;
        Ok(post_impact_state(phi, &ev, &params.geom, &params.impact))
    };
    let plus = shifted(h)?.to_vector();
    let minus = shifted(-h)?.to_vector();
    let mut coupled = frozen;
    let extra = (plus - minus) / (2.0 * h);
    coupled.set_column(0, &(frozen.column(0) + extra));
    Ok(coupled)
}

pub fn predict_landing_with_gradient(
    phi: &InterceptionPolicy,
    incoming: &[Sample],
    params: &GreyboxParams,
) -> Result<GreyboxPrediction> {
    let event = interception_event(incoming, &params.geom, phi.theta1)?;
    let record = landing_with_event(phi, &event, params)?;
    let flight_jac = landing_state_jacobian(&record, &params.flight)?;
    let impact_jac = post_impact_jacobian(phi, &event, incoming, params)?;
    let full = flight_jac * impact_jac;
    Ok(GreyboxPrediction {
        landing: record.landing_point,
        jacobian: full.fixed_view::<2, 2>(0, 0).into_owned(),
        event,
        record,
    })
}

impl crate::optimizer::LandingModel for GreyboxParams {
    fn name(&self) -> &'static str {
        "greybox"
    }

    fn predict(&self, phi: &InterceptionPolicy, incoming: &[Sample]) -> Result<Vector2<f64>> {
        predict_landing(phi, incoming, self)
    }

    fn jacobian(&self, phi: &InterceptionPolicy, incoming: &[Sample]) -> Result<Matrix2<f64>> {
        Ok(predict_landing_with_gradient(phi, incoming, self)?.jacobian)
    }
}
