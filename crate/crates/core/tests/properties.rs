//! Property tests for the structural invariants: round trips, linearity,
//! antisymmetry, covariance. Complements the example-based unit tests.

use proptest::prelude::*;

use toda_curves::bracket::{
    bracket_table_canonical, canonical_bracket, fm_map, Label, PhaseGradient,
};
use toda_curves::curve::{compute_invariants, lax_matrices, reconstruct_curve, CurveState};
use toda_curves::flow::{curve_velocity, g_dot, u_dot, FlowCoefficients};

/// Coordinates in [-1, 1] that keep every guard comfortably clear, so the
/// properties test algebra rather than conditioning.
fn curve_strategy(n: usize) -> impl Strategy<Value = CurveState> {
    (
        prop::collection::vec(-1.0f64..1.0, n),
        prop::collection::vec(-1.0f64..1.0, n),
    )
        .prop_map(|(x, y)| CurveState::new(x, y).unwrap())
        .prop_filter("curve too close to degenerate", |c| {
            let inv = compute_invariants(c);
            inv.g.iter().all(|g| g.abs() > 0.05)
                && inv.u.iter().all(|u| u.abs() > 0.05)
                && (0..c.n()).all(|k| (inv.g_at(k as isize - 1) + inv.g[k]).abs() > 0.05)
        })
}

fn flow_strategy(n: usize) -> impl Strategy<Value = FlowCoefficients> {
    (
        prop::collection::vec(-1.0f64..1.0, n),
        prop::collection::vec(-1.0f64..1.0, n),
    )
        .prop_map(|(alpha, beta)| FlowCoefficients::new(alpha, beta).unwrap())
}

fn gradient_strategy(n: usize) -> impl Strategy<Value = PhaseGradient> {
    (
        prop::collection::vec(-1.0f64..1.0, n),
        prop::collection::vec(-1.0f64..1.0, n),
    )
        .prop_map(|(dx, dy)| PhaseGradient { dx, dy })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_round_trips(c in curve_strategy(8)) {
        let inv = compute_invariants(&c);
        let pts = reconstruct_curve(&inv, c.point(0), c.point(1), 8).unwrap();
        for (k, p) in pts.iter().enumerate() {
            prop_assert!((p - c.point(k as isize)).amax() < 1e-10);
        }
    }

    #[test]
    fn frames_propagate_and_monodromy_closes(c in curve_strategy(7)) {
        let inv = compute_invariants(&c);
        let lax = lax_matrices(&inv).unwrap();
        for k in 0..7isize {
            let residual = lax.l[k as usize] * toda_curves::curve::frame(&c, k)
                - toda_curves::curve::frame(&c, k + 1);
            prop_assert!(residual.amax() < 1e-12);
        }
        let t = toda_curves::curve::monodromy(&lax);
        prop_assert!((t - nalgebra::Matrix2::identity()).amax() < 1e-9);
    }

    #[test]
    fn shifting_the_curve_shifts_the_invariants(c in curve_strategy(9)) {
        let inv = compute_invariants(&c);
        let inv_s = compute_invariants(&c.shifted());
        for k in 0..9 {
            prop_assert_eq!(inv_s.g[k], inv.g[(k + 1) % 9]);
            prop_assert_eq!(inv_s.u[k], inv.u[(k + 1) % 9]);
        }
    }

    #[test]
    fn flow_maps_are_linear(
        c in curve_strategy(6),
        f1 in flow_strategy(6),
        f2 in flow_strategy(6),
        s in -2.0f64..2.0,
    ) {
        let inv = compute_invariants(&c);
        let combined = FlowCoefficients::new(
            (0..6).map(|k| f1.alpha[k] + s * f2.alpha[k]).collect(),
            (0..6).map(|k| f1.beta[k] + s * f2.beta[k]).collect(),
        ).unwrap();

        let (v1, v2, vc) = (
            curve_velocity(&c, &f1).unwrap(),
            curve_velocity(&c, &f2).unwrap(),
            curve_velocity(&c, &combined).unwrap(),
        );
        for k in 0..6 {
            prop_assert!((vc[k] - (v1[k] + s * v2[k])).amax() < 1e-12);
        }

        let (g1, g2, gc) = (g_dot(&inv, &f1), g_dot(&inv, &f2), g_dot(&inv, &combined));
        let (u1, u2, uc) = (
            u_dot(&inv, &f1).unwrap(),
            u_dot(&inv, &f2).unwrap(),
            u_dot(&inv, &combined).unwrap(),
        );
        for k in 0..6 {
            prop_assert!((gc[k] - (g1[k] + s * g2[k])).abs() < 1e-12);
            prop_assert!((uc[k] - (u1[k] + s * u2[k])).abs() < 1e-10);
        }
    }

    #[test]
    fn canonical_bracket_is_antisymmetric_and_bilinear(
        f in gradient_strategy(5),
        g in gradient_strategy(5),
        h in gradient_strategy(5),
        s in -3.0f64..3.0,
    ) {
        prop_assert_eq!(canonical_bracket(&f, &g), -canonical_bracket(&g, &f));
        prop_assert_eq!(canonical_bracket(&f, &f), 0.0);

        let mut g_plus_sh = g.clone();
        g_plus_sh.add_scaled(&h, s);
        let lhs = canonical_bracket(&f, &g_plus_sh);
        let rhs = canonical_bracket(&f, &g) + s * canonical_bracket(&f, &h);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn fm_map_satisfies_its_defining_identities(
        c in curve_strategy(6),
        lambda in -2.0f64..2.0,
    ) {
        let inv = compute_invariants(&c);
        let s = fm_map(&c, lambda).unwrap();
        for k in 0..6isize {
            prop_assert!(s.a_at(k) > 0.0);
            let g = inv.g_at(k);
            prop_assert!((s.a_at(k) * g * g - 1.0).abs() < 1e-12);
            let lhs = (s.b_at(k) + lambda) * inv.g_at(k - 1) * g;
            prop_assert!((lhs - inv.u_at(k)).abs() < 1e-12 * inv.u_at(k).abs().max(1.0));
        }
    }

    #[test]
    fn canonical_table_antisymmetry_is_exact(c in curve_strategy(5)) {
        let t = bracket_table_canonical(&c, 0.0).unwrap();
        for p in Label::all(5) {
            for q in Label::all(5) {
                prop_assert_eq!(t.get(p, q), -t.get(q, p));
            }
        }
    }
}
