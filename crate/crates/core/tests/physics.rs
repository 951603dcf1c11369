//! Flight, impact, kinematics and grey-box checks against independent oracles.

use approx::assert_relative_eq;
use nalgebra::{Matrix2, Matrix3, Matrix6, Vector3};
use proptest::prelude::*;

use landing_core::arm::*;
use landing_core::ballistics::*;
use landing_core::greybox::*;
use landing_core::harness::nominal_incoming;
use landing_core::impact::*;
use landing_core::*;

fn state(p: [f64; 3], v: [f64; 3]) -> BallState {
    BallState::new(Vector3::from(p), Vector3::from(v))
}

fn arb_post_impact() -> impl Strategy<Value = BallState> {
    (-0.5..0.5f64, 0.0..0.8f64, 1.0..1.6f64, -1.5..1.5f64, 3.0..6.0f64, 0.5..3.5f64)
        .prop_map(|(x, y, z, vx, vy, vz)| state([x, y, z], [vx, vy, vz]))
}

fn fd_landing_jacobian(xi: &BallState, params: &FlightParams, h: f64) -> (Matrix6<f64>, bool) {
    let base = propagate_to_landing(xi, params).unwrap();
    let mut j = Matrix6::zeros();
    let mut same_kmax = true;
    for c in 0..6 {
        let mut plus = xi.to_vector();
        plus[c] += h;
        let mut minus = xi.to_vector();
        minus[c] -= h;
        let rp = propagate_to_landing(&BallState::from_vector(&plus), params).unwrap();
        let rm = propagate_to_landing(&BallState::from_vector(&minus), params).unwrap();
        same_kmax &= rp.k_max == base.k_max && rm.k_max == base.k_max;
        j.set_column(c, &((rp.landing_state.to_vector() - rm.landing_state.to_vector()) / (2.0 * h)));
    }
    (j, same_kmax)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn landing_jacobian_matches_central_differences(xi in arb_post_impact()) {
        let params = FlightParams { dt: 0.01, ..FlightParams::default() };
        let rec = propagate_to_landing(&xi, &params).unwrap();
        let analytic = landing_state_jacobian(&rec, &params).unwrap();
        let (numeric, same) = fd_landing_jacobian(&xi, &params, 1e-6);
        prop_assume!(same);
        let err = (analytic - numeric).norm() / numeric.norm();
        prop_assert!(err < 1e-6, "relative error {err:e}");
    }

    #[test]
    fn unsnapped_landing_jacobian_matches_central_differences(xi in arb_post_impact()) {
        let params = FlightParams { dt: 0.01, snap_to_table: false, ..FlightParams::default() };
        let rec = propagate_to_landing(&xi, &params).unwrap();
        let analytic = landing_state_jacobian(&rec, &params).unwrap();
        let (numeric, same) = fd_landing_jacobian(&xi, &params, 1e-6);
        prop_assume!(same);
        let err = (analytic - numeric).norm() / numeric.norm();
        prop_assert!(err < 1e-6, "relative error {err:e}");
    }

    #[test]
    fn snapped_landing_lies_on_table(xi in arb_post_impact()) {
        let params = FlightParams::default();
        let rec = propagate_to_landing(&xi, &params).unwrap();
        prop_assert_eq!(rec.landing_state.p.z, params.z_table);
        prop_assert!(rec.raw_residual(params.z_table).abs() < 1e-3);
    }

    #[test]
    fn racket_rotation_is_proper_orthonormal(t1 in -3.2..3.2f64, t4 in -3.2..3.2f64) {
        let r = racket_rotation(&InterceptionPolicy::new(t1, t4));
        prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn racket_rotation_jacobian_matches_central_differences(t1 in -1.6..1.6f64, t4 in -0.8..0.8f64) {
        let phi = InterceptionPolicy::new(t1, t4);
        let (d1, d4) = racket_rotation_jacobian(&phi);
        let h = 1e-6;
        let n1 = (racket_rotation(&InterceptionPolicy::new(t1 + h, t4)) - racket_rotation(&InterceptionPolicy::new(t1 - h, t4))) / (2.0 * h);
        let n4 = (racket_rotation(&InterceptionPolicy::new(t1, t4 + h)) - racket_rotation(&InterceptionPolicy::new(t1, t4 - h))) / (2.0 * h);
        prop_assert!((d1 - n1).norm() < 1e-9);
        prop_assert!((d4 - n4).norm() < 1e-9);
    }

    #[test]
    fn impact_jacobian_matches_central_differences(
        t1 in -1.0..1.0f64, t4 in -0.7..0.7f64,
        vx in -2.0..2.0f64, vy in -7.0..-2.0f64, vz in -3.0..3.0f64,
        ry in 0.0..5.0f64,
    ) {
        let phi = InterceptionPolicy::new(t1, t4);
        let xi = state([0.3, 0.4, 1.3], [vx, vy, vz]);
        let vr = Vector3::new(-0.5, ry, 0.0);
        let params = ImpactParams::default();
        let j = impact_state_jacobian(&xi, &phi, &vr, &nalgebra::Matrix3x2::zeros(), &params);
        let h = 1e-6;
        for c in 0..2 {
            let mut p = phi.to_vector();
            p[c] += h;
            let mut q = phi.to_vector();
            q[c] -= h;
            let hit = |v: nalgebra::Vector2<f64>| racket_impact(&xi, &racket_rotation(&InterceptionPolicy::from_vector(&v)), &vr, &params).to_vector();
            let col = (hit(p) - hit(q)) / (2.0 * h);
            prop_assert!((j.column(c) - col).norm() < 1e-7 * (1.0 + col.norm()));
        }
    }

    #[test]
    fn elastic_mirror_impact_preserves_relative_speed(
        t1 in -1.0..1.0f64, t4 in -0.7..0.7f64,
        vx in -3.0..3.0f64, vy in -7.0..3.0f64, vz in -3.0..3.0f64,
    ) {
        let params = ImpactParams { restitution: Vector3::new(1.0, -1.0, 1.0) };
        let xi = state([0.0, 0.4, 1.2], [vx, vy, vz]);
        let vr = Vector3::new(0.3, 2.0, 0.0);
        let out = racket_impact(&xi, &racket_rotation(&InterceptionPolicy::new(t1, t4)), &vr, &params);
        prop_assert!(((out.v - vr).norm() - (xi.v - vr).norm()).abs() < 1e-12);
    }

    #[test]
    fn inverse_kinematics_reaches_the_point(rho in 0.1..0.9f64, h in -0.6..0.8f64, t1 in -1.5..1.5f64) {
        let geom = ArmGeometry::default();
        let (min, max) = geom.reach_limits();
        let d = rho.hypot(h);
        prop_assume!(d > min && d < max);
        let (t2, t3) = planar_ik(&geom, rho, h).unwrap();
        prop_assert!(t3 <= 0.0);
        let target = geom.base + geom.radial(t1) * rho + Vector3::z() * h;
        prop_assert!((geom.forward_kinematics(t1, t2, t3) - target).norm() < 1e-12);
    }

    #[test]
    fn frozen_greybox_jacobian_matches_central_differences(t1 in -0.3..0.6f64, t4 in -0.2..0.35f64) {
        let params = GreyboxParams::default();
        let incoming = nominal_incoming(&EnvConfig::default());
        let phi = InterceptionPolicy::new(t1, t4);
        let pred = predict_landing_with_gradient(&phi, &incoming, &params).unwrap();
        let h = 1e-5;
        let mut numeric = Matrix2::zeros();
        let mut same = true;
        for c in 0..2 {
            let probe = |s: f64| {
                let mut v = phi.to_vector();
                v[c] += s * h;
                landing_with_event(&InterceptionPolicy::from_vector(&v), &pred.event, &params).unwrap()
            };
            let (p, m) = (probe(1.0), probe(-1.0));
            same &= p.k_max == pred.record.k_max && m.k_max == pred.record.k_max;
            numeric.set_column(c, &((p.landing_point - m.landing_point) / (2.0 * h)));
        }
        prop_assume!(same);
        let err = (pred.jacobian - numeric).norm() / numeric.norm();
        prop_assert!(err < 1e-6, "relative error {err:e}");
    }
}

#[test]
fn drag_free_flight_matches_discrete_closed_form() {
    let params = FlightParams {
        k_drag: 0.0,
        dt: 0.01,
        snap_to_table: false,
        ..FlightParams::default()
    };
    let xi = state([0.1, 0.3, 1.2], [0.4, 4.5, 2.0]);
    let rec = propagate_to_landing(&xi, &params).unwrap();
    let g = params.gravity;
    let dt = params.dt;
    for (k, s) in rec.states.iter().enumerate() {
        let kf = k as f64;
        let p = xi.p + xi.v * (kf * dt) + g * (dt * dt * kf * (kf - 1.0) / 2.0);
        let v = xi.v + g * (kf * dt);
        assert_relative_eq!(s.p, p, epsilon = 1e-9);
        assert_relative_eq!(s.v, v, epsilon = 1e-9);
    }
    let last = rec.states[rec.k_max];
    let dz = last.p.z - params.z_table;
    let t_last = (last.v.z + (last.v.z * last.v.z + 2.0 * 9.8 * dz).sqrt()) / 9.8;
    assert_relative_eq!(rec.t_last, t_last, epsilon = 1e-12);
    assert!(rec.t_last <= dt);
    let landing = last.p + last.v * t_last;
    assert_relative_eq!(rec.landing_point.x, landing.x, epsilon = 1e-9);
    assert_relative_eq!(rec.landing_point.y, landing.y, epsilon = 1e-9);
}

#[test]
fn landing_converges_under_step_refinement() {
    let xi = state([0.0, 0.4, 1.4], [-0.3, 5.0, 2.0]);
    let at = |dt: f64| propagate_to_landing(&xi, &FlightParams { dt, max_steps: 1_000_000, ..FlightParams::default() }).unwrap().landing_point;
    let reference = at(1e-5);
    let e1 = (at(2e-3) - reference).norm();
    let e2 = (at(1e-3) - reference).norm();
    assert!(e2 < e1);
    assert!(e2 < 5e-3, "{e2}");
}

#[test]
fn coupled_greybox_jacobian_matches_full_map() {
    let params = GreyboxParams {
        couple_geometry: true,
        ..GreyboxParams::default()
    };
    let incoming = nominal_incoming(&EnvConfig::default());
    let h = 1e-5;
    for phi in [
        InterceptionPolicy::new(0.15, 0.1),
        InterceptionPolicy::new(0.0, 0.2),
        InterceptionPolicy::new(0.3, -0.05),
        InterceptionPolicy::new(-0.2, 0.25),
    ] {
        let pred = predict_landing_with_gradient(&phi, &incoming, &params).unwrap();
        let mut numeric = Matrix2::zeros();
        for c in 0..2 {
            let mut p = phi.to_vector();
            p[c] += h;
            let mut q = phi.to_vector();
            q[c] -= h;
            let col = (predict_landing(&InterceptionPolicy::from_vector(&p), &incoming, &params).unwrap()
                - predict_landing(&InterceptionPolicy::from_vector(&q), &incoming, &params).unwrap())
                / (2.0 * h);
            numeric.set_column(c, &col);
        }
        let err = (pred.jacobian - numeric).norm() / numeric.norm();
        assert!(err < 1e-4, "phi {phi:?}: relative error {err:e}");
    }
}

#[test]
fn frozen_and_coupled_agree_on_theta4() {
    let incoming = nominal_incoming(&EnvConfig::default());
    let phi = InterceptionPolicy::new(0.15, 0.1);
    let frozen = predict_landing_with_gradient(&phi, &incoming, &GreyboxParams::default()).unwrap();
    let coupled = predict_landing_with_gradient(
        &phi,
        &incoming,
        &GreyboxParams {
            couple_geometry: true,
            ..GreyboxParams::default()
        },
    )
    .unwrap();
    assert_eq!(frozen.landing, coupled.landing);
    assert_relative_eq!(frozen.jacobian.column(1).into_owned(), coupled.jacobian.column(1).into_owned(), epsilon = 1e-15);
}

#[test]
fn remaining_time_gradient_matches_central_differences() {
    let xi = state([0.0, 0.5, 1.3], [0.2, 4.0, 1.7]);
    let g = remaining_time_gradient(&xi, 0.76).unwrap();
    let h = 1e-7;
    for c in 0..6 {
        let mut p = xi.to_vector();
        p[c] += h;
        let mut q = xi.to_vector();
        q[c] -= h;
        let n = (remaining_time(&BallState::from_vector(&p), 0.76).unwrap() - remaining_time(&BallState::from_vector(&q), 0.76).unwrap()) / (2.0 * h);
        assert!((g[c] - n).abs() < 1e-7, "component {c}: {} vs {n}", g[c]);
    }
}
