//! Property tests for the parser, jets and the geometric invariants.

mod common;

use clab_core::congruence::quadratic_roots;
use clab_core::expr::{BinOp, Expr, Func, Var};
use clab_core::frame::TransversalChoice;
use clab_core::invariants::{independence_check, PointGeometry};
use clab_core::jet::Jet;
use clab_core::loci::focal_at;
use clab_core::parse;
use clab_core::surface::{Domain, SurfacePatch};
use common::*;
use proptest::prelude::*;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients `a[i][j]` of `u^i v^j`, `i + j ≤ 5`.
fn poly_coeffs() -> impl Strategy<Value = Vec<((usize, usize), f64)>> {
    let monomials: Vec<(usize, usize)> = (0..=5).flat_map(|d| (0..=d).map(move |j| (d - j, j))).collect();
    proptest::collection::vec(-3.0f64..3.0, monomials.len())
        .prop_map(move |cs| monomials.iter().copied().zip(cs).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Taylor coefficients of a parsed polynomial equal the binomial
    /// re-expansion about the base point.
    #[test]
    fn polynomial_jets_are_exact(coeffs in poly_coeffs(), u0 in -1.5f64..1.5, v0 in -1.5f64..1.5) {
        let src = coeffs
            .iter()
            .map(|((i, j), a)| format!("({a:e})*u^{i}*v^{j}"))
            .collect::<Vec<_>>()
            .join(" + ");
        let jet = parse(&src).unwrap().eval_jet((u0, v0), 6).unwrap();
        let scale = coeffs.iter().map(|(_, a)| a.abs()).sum::<f64>() * 4f64.powi(5);
        for k in 0..=6usize {
            for l in 0..=(6 - k) {
                let exact: f64 = coeffs
                    .iter()
                    .filter(|((i, j), _)| *i >= k && *j >= l)
                    .map(|((i, j), a)| a * binomial(*i, k) * binomial(*j, l) * u0.powi((i - k) as i32) * v0.powi((j - l) as i32))
                    .sum();
                prop_assert!((jet.coeff(k, l) - exact).abs() < 1e-12 * scale, "({k},{l})");
            }
        }
    }
}

fn jet_strategy(order: usize) -> impl Strategy<Value = Jet> {
    let n = (order + 1) * (order + 2) / 2;
    proptest::collection::vec(-2.0f64..2.0, n).prop_map(move |c| Jet::from_coeffs(order, c))
}

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs()))
}

proptest! {
    #[test]
    fn jet_products_commute_and_associate(a in jet_strategy(5), b in jet_strategy(5), c in jet_strategy(5)) {
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-13));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
        prop_assert!(close(&(&(&a + &b) + &c), &(&a + &(&b + &c)), 1e-14));
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-12));
    }

    #[test]
    fn truncation_commutes_with_products(a in jet_strategy(6), b in jet_strategy(4)) {
        // mixed orders truncate to the smaller
        let p = &a * &b;
        prop_assert_eq!(p.order(), 4);
        prop_assert!(close(&p, &(&a.truncate(4) * &b), 1e-14));
    }
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Num(n as f64 / 8.0)),
        Just(Expr::Var(Var::U)),
        Just(Expr::Var(Var::V)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (inner.clone(), inner.clone(), prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)])
                .prop_map(|(l, r, op)| Expr::bin(op, l, r)),
            (inner.clone(), 0u32..5).prop_map(|(b, n)| Expr::pow(b, n)),
            (inner, prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Sqrt), Just(Func::Log)])
                .prop_map(|(e, f)| Expr::Call(f, Box::new(e))),
        ]
    })
}

proptest! {
    #[test]
    fn printing_round_trips(e in expr_strategy()) {
        let printed = e.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(&back, &e, "{}", printed);
        prop_assert_eq!(back.to_string(), printed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metric_ignores_sign_of_xi(u in -0.9f64..0.9, v in -0.9f64..0.9) {
        let p = bump();
        let q = SurfacePatch::from_sources(BUMP_X, ["-0.3*u", "-0.2*v", "0", "-1"], Domain::square(1.0)).unwrap();
        let (a, b) = (p.metric_g((u, v)).unwrap(), q.metric_g((u, v)).unwrap());
        prop_assert!(a.flipped != b.flipped);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((a.g[i][j] - b.g[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_plane_ignores_transversal_choice(u in -0.9f64..0.9, v in -0.9f64..0.9, shear in -0.5f64..0.5) {
        let patch = perturbed();
        let [a, b] = PointGeometry::at(&patch, (u, v)).unwrap().frame.sigma_basis();
        let other = TransversalChoice::Constant(
            std::array::from_fn(|i| a[i] + shear * b[i]),
            std::array::from_fn(|i| b[i] - 0.7 * shear * a[i]),
        );
        let angle = independence_check(&patch, (u, v), &TransversalChoice::Default, &other).unwrap();
        prop_assert!(angle < 1e-7, "{angle}");
    }

    #[test]
    fn s0_frame_conditions_hold(u in -1.0f64..1.0, v in -1.0f64..1.0) {
        let g = PointGeometry::at(&s0(), (u, v)).unwrap();
        prop_assert!(g.frame.residuals.max_abs() < 1e-9);
    }

    #[test]
    fn focal_samples_satisfy_eigen_relation(u in -0.9f64..0.9, v in -0.9f64..0.9, s in 0.0f64..std::f64::consts::PI) {
        let g = PointGeometry::at(&bump(), (u, v)).unwrap();
        let x = g.x().value();
        let n = g.normal_vector((s.cos(), s.sin()));
        for f in focal_at(&g, &[s]).unwrap() {
            prop_assert!(f.t != 0.0);
            // p − x(u) = t ν
            for i in 0..4 {
                prop_assert!((f.p[i] - x[i] - f.t * n[i]).abs() < 1e-12 * (1.0 + f.t.abs()));
            }
            let m = g.shape_operator((s.cos(), s.sin())).unwrap().matrix;
            let det = (f.t * m[0][0] - 1.0) * (f.t * m[1][1] - 1.0) - f.t * f.t * m[0][1] * m[1][0];
            prop_assert!(det.abs() < 1e-7 * (1.0 + f.t * f.t));
        }
    }

    #[test]
    fn conic_equals_jacobian_determinant(u in -0.9f64..0.9, v in -0.9f64..0.9, t in -3.0f64..3.0, l in -3.0f64..3.0) {
        let cong = clab_core::congruence::PlaneCongruence::affine(perturbed());
        let c = cong.singular_conic((u, v)).unwrap().eval(t, l);
        let d = cong.jacobian_f((u, v), t, l).unwrap().det;
        prop_assert!((c - d).abs() < 1e-9 * (1.0 + d.abs()));
    }
}

proptest! {
    #[test]
    fn quadratic_roots_are_roots(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
        for x in quadratic_roots(a, b, c) {
            let scale = a.abs() * x * x + b.abs() * x.abs() + c.abs();
            prop_assert!((a * x * x + b * x + c).abs() <= 1e-9 * scale.max(1e-12));
        }
    }
}
