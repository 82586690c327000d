//! Property tests for the geometric and barrier invariants.

use nalgebra::{dmatrix, dvector, DVector};
use proptest::prelude::*;
use soft_dikin::barrier::{log_barrier_hessian, BarrierAt, SoftThresholdParams};
use soft_dikin::geometry::{box_polytope, l1_ball, simplex, Polytope};
use soft_dikin::targets::TargetSpec;
use soft_dikin::walk::{acceptance_log_ratio, AcceptanceVariant};

fn skewed() -> Polytope {
    Polytope::validate(
        dmatrix![
            1.0, 0.3;
            -1.0, 0.2;
            0.1, 1.0;
            0.0, -1.0;
            0.7, 0.7
        ],
        dvector![1.0, 1.0, 1.0, 1.0, 1.2],
        None,
    )
    .unwrap()
}

fn body(index: usize) -> Polytope {
    match index {
        0 => box_polytope(2, 1.0),
        1 => l1_ball(2, 1.0).unwrap(),
        2 => simplex(2),
        _ => skewed(),
    }
}

/// Interior point from a chord through the witness: direction `angle`,
/// position `frac` in (0, 1) along the chord.
fn interior_point(p: &Polytope, angle: f64, frac: f64) -> Option<DVector<f64>> {
    let dir = dvector![angle.cos(), angle.sin()];
    let probe = p.witness() + &dir * 1e-9;
    if !p.contains_interior(&probe) {
        return None;
    }
    let (a, b) = p.chord_endpoints(p.witness(), &probe).ok()?;
    let point = &a + (&b - &a) * frac;
    p.contains_interior(&point).then_some(point)
}

proptest! {
    #[test]
    fn chord_endpoints_touch_boundary_and_stay_collinear(
        which in 0usize..4,
        a1 in 0.0f64..std::f64::consts::TAU,
        f1 in 0.01f64..0.99,
        a2 in 0.0f64..std::f64::consts::TAU,
        f2 in 0.01f64..0.99,
    ) {
        let p = body(which);
        let u = interior_point(&p, a1, f1);
        let v = interior_point(&p, a2, f2);
        prop_assume!(u.is_some() && v.is_some());
        let (u, v) = (u.unwrap(), v.unwrap());
        prop_assume!((&u - &v).norm() > 1e-9);

        let (pe, qe) = p.chord_endpoints(&u, &v).unwrap();
        for end in [&pe, &qe] {
            let active = (0..p.num_constraints()).any(|j| {
                let slack = p.offsets()[j] - p.matrix().row(j).transpose().dot(end);
                slack.abs() <= 1e-9 * (1.0 + p.offsets()[j].abs())
            });
            prop_assert!(active, "endpoint {end:?} has no active constraint");
        }
        // collinearity (2-d cross products)
        let chord = &qe - &pe;
        for x in [&u, &v] {
            let rel = x - &pe;
            let cross = chord[0] * rel[1] - chord[1] * rel[0];
            prop_assert!(cross.abs() <= 1e-9 * chord.norm() * rel.norm() + 1e-12);
        }
        // ordering p, u, v, q along the chord
        let t_u = (&u - &pe).dot(&chord) / chord.norm_squared();
        let t_v = (&v - &pe).dot(&chord) / chord.norm_squared();
        let lo = t_u.min(t_v);
        let hi = t_u.max(t_v);
        prop_assert!((0.0..=1.0).contains(&lo) && hi <= 1.0 + 1e-12);
    }

    #[test]
    fn cross_ratio_is_symmetric(
        which in 0usize..4,
        a1 in 0.0f64..std::f64::consts::TAU,
        f1 in 0.01f64..0.99,
        a2 in 0.0f64..std::f64::consts::TAU,
        f2 in 0.01f64..0.99,
    ) {
        let p = body(which);
        let u = interior_point(&p, a1, f1);
        let v = interior_point(&p, a2, f2);
        prop_assume!(u.is_some() && v.is_some());
        let (u, v) = (u.unwrap(), v.unwrap());
        prop_assume!((&u - &v).norm() > 1e-9);
        let fwd = p.cross_ratio(&u, &v).unwrap();
        let rev = p.cross_ratio(&v, &u).unwrap();
        prop_assert!((fwd - rev).abs() <= 1e-9 * fwd.max(rev));
    }

    #[test]
    fn hessian_is_psd(
        which in 0usize..4,
        a in 0.0f64..std::f64::consts::TAU,
        f in 0.01f64..0.99,
        vx in -1.0f64..1.0,
        vy in -1.0f64..1.0,
    ) {
        let p = body(which);
        let theta = interior_point(&p, a, f);
        prop_assume!(theta.is_some());
        let h = log_barrier_hessian(&p, &theta.unwrap()).unwrap();
        let v = dvector![vx, vy];
        prop_assert!((&h * &v).dot(&v) >= -1e-10 * v.norm_squared());
    }

    #[test]
    fn dikin_ellipsoid_stays_in_closure(
        which in 0usize..4,
        a in 0.0f64..std::f64::consts::TAU,
        f in 0.01f64..0.99,
        dir in 0.0f64..std::f64::consts::TAU,
    ) {
        let p = body(which);
        let theta = interior_point(&p, a, f);
        prop_assume!(theta.is_some());
        let theta = theta.unwrap();
        let h = log_barrier_hessian(&p, &theta).unwrap();
        let w = dvector![dir.cos(), dir.sin()];
        let h_norm = ((&h * &w).dot(&w)).sqrt();
        prop_assume!(h_norm > 1e-12);
        let v = &w / h_norm; // unit step in the H-metric
        for probe in [&theta + &v, &theta - &v] {
            let min_slack = p.slacks(&probe).min();
            prop_assert!(min_slack >= -1e-9, "escaped closure by {min_slack:e}");
        }
    }

    #[test]
    fn vanilla_reduction_phi_equals_h(
        which in 0usize..4,
        a in 0.0f64..std::f64::consts::TAU,
        f in 0.01f64..0.99,
    ) {
        let p = body(which);
        let theta = interior_point(&p, a, f);
        prop_assume!(theta.is_some());
        let theta = theta.unwrap();
        let params = SoftThresholdParams::vanilla(1.0).unwrap();
        let at = BarrierAt::new(&p, theta.clone(), &params).unwrap();
        prop_assert_eq!(at.phi(), at.hessian());
    }

    #[test]
    fn detailed_balance_identity_exact_mh(
        which in 0usize..4,
        a1 in 0.0f64..std::f64::consts::TAU,
        f1 in 0.01f64..0.99,
        a2 in 0.0f64..std::f64::consts::TAU,
        f2 in 0.01f64..0.99,
    ) {
        let p = body(which);
        let target = TargetSpec::quadratic(1.5, dvector![0.1, 0.05], 10.0).unwrap();
        let params = SoftThresholdParams::new(0.25, 2.0).unwrap();
        let u = interior_point(&p, a1, f1);
        let v = interior_point(&p, a2, f2);
        prop_assume!(u.is_some() && v.is_some());
        let (u, v) = (u.unwrap(), v.unwrap());
        let at_u = BarrierAt::new(&p, u.clone(), &params).unwrap();
        let at_v = BarrierAt::new(&p, v.clone(), &params).unwrap();
        let (f_u, f_v) = (target.f(&u), target.f(&v));
        let fwd = acceptance_log_ratio(&at_u, f_u, &at_v, f_v, AcceptanceVariant::ExactMh);
        let rev = acceptance_log_ratio(&at_v, f_v, &at_u, f_u, AcceptanceVariant::ExactMh);
        let lhs = -f_u + at_u.proposal_log_density(&v) + fwd.min(0.0);
        let rhs = -f_v + at_v.proposal_log_density(&u) + rev.min(0.0);
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
    }

    #[test]
    fn cross_ratio_lower_bound_proved_constant(
        which in 0usize..4,
        a1 in 0.0f64..std::f64::consts::TAU,
        f1 in 0.01f64..0.99,
        a2 in 0.0f64..std::f64::consts::TAU,
        f2 in 0.01f64..0.99,
    ) {
        let p = body(which);
        // any valid covering radius works; 10 covers all four test bodies
        let r_bound = 10.0;
        let params = SoftThresholdParams::new(0.05, 3.0).unwrap();
        let u = interior_point(&p, a1, f1);
        let v = interior_point(&p, a2, f2);
        prop_assume!(u.is_some() && v.is_some());
        let (u, v) = (u.unwrap(), v.unwrap());
        let sigma = p.cross_ratio(&u, &v).unwrap();
        let at_u = BarrierAt::new(&p, u.clone(), &params).unwrap();
        let local = at_u.local_norm(&(&u - &v));
        let denom = 2.0 * p.num_constraints() as f64 / params.alpha()
            + 2.0 * params.eta_inv() * r_bound * r_bound;
        prop_assert!(sigma * sigma >= local * local / denom - 1e-9);
    }
}
