//! Closed forms against the finite-difference and brute-force oracles.

mod common;

use clab_core::congruence::PlaneCongruence;
use clab_core::distance::{classify_critical, distance, hessian_closed_form, ClassifyOptions, SingularityLabel};
use clab_core::invariants::PointGeometry;
use clab_core::loci::{focal_at, ridge_trace, semiumbilic_scan};
use clab_core::oracle::{
    conormal_value, delta_value, det_pivoted, fd_jet, fd_reduced_coefficients, grid_critical_search, DEFAULT_STEP,
};
use clab_core::surface::SurfacePatch;
use common::*;
use rand::Rng;

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-12)
}

/// `G_ij = det(x_u, x_v, x_ij, ξ)` from finite-difference derivatives of `x`.
fn fd_metric(patch: &SurfacePatch, at: (f64, f64)) -> [[f64; 2]; 2] {
    let jets: Vec<_> = (0..4)
        .map(|c| fd_jet(|u| Ok(patch.point(u)?[c]), at, 2, DEFAULT_STEP, None).unwrap())
        .collect();
    let xi: Vec<f64> = patch.xi.iter().map(|e| e.eval(at).unwrap()).collect();
    let d = |i: usize, j: usize| -> [f64; 4] { std::array::from_fn(|c| jets[c].partial(i, j)) };
    let g = |second: [f64; 4]| {
        let cols = [d(1, 0), d(0, 1), second, [xi[0], xi[1], xi[2], xi[3]]];
        det_pivoted::<4>(std::array::from_fn(|r| std::array::from_fn(|c| cols[c][r])))
    };
    [[g(d(2, 0)), g(d(1, 1))], [g(d(1, 1)), g(d(0, 2))]]
}

#[test]
fn metric_matches_numeric_determinants() {
    for patch in [s0(), s1(), bump(), perturbed()] {
        let mut r = rng(11);
        for _ in 0..20 {
            let at = uniform_point(&mut r, &patch.domain.inset(0.01));
            let m = patch.metric_g(at).unwrap();
            let mut fd = fd_metric(&patch, at);
            if m.flipped {
                fd = fd.map(|row| row.map(|x| -x));
            }
            let scale = m.big_g.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
            for i in 0..2 {
                for j in 0..2 {
                    assert!(rel_err(m.big_g[i][j], fd[i][j], scale) < 1e-6, "{at:?}");
                    assert!((m.g[i][j] * m.det_g - m.big_g[i][j]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn metric_examples() {
    let m = s0().metric_g((0.0, 0.0)).unwrap();
    assert_eq!(m.big_g, [[1.0, 0.0], [0.0, 1.0]]);
    let m = s1().metric_g((0.0, 0.0)).unwrap();
    assert!((m.big_g[0][0] - 2.0).abs() < 1e-14 && (m.big_g[1][1] - 2.0).abs() < 1e-14);
    assert!((m.g[0][0] - 0.5).abs() < 1e-14 && (m.g[1][1] - 0.5).abs() < 1e-14);
    assert!(fd_metric(&s1(), (0.0, 0.0))[0][1].abs() < 1e-8);
}

#[test]
fn distance_jet_matches_finite_differences() {
    let patch = bump();
    let mut r = rng(12);
    for _ in 0..10 {
        let at = uniform_point(&mut r, &patch.domain.inset(0.05));
        let g = PointGeometry::at(&patch, at).unwrap();
        let p = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(0.0..2.0), r.gen_range(-1.0..1.0)];
        let ev = distance(&g, p, 3).unwrap();
        let fd = fd_jet(|u| delta_value(&patch, p, u), at, 3, 1e-2, None).unwrap();
        for (i, j) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)] {
            let exact = ev.jet.partial(i, j);
            assert!(rel_err(exact, fd.partial(i, j), 1.0 + exact.abs()) < 1e-4, "{i}{j}: {exact} vs {}", fd.partial(i, j));
        }
    }
}

#[test]
fn hessian_closed_form_matches_finite_differences() {
    for patch in [s0(), s1(), bump()] {
        let mut r = rng(13);
        for _ in 0..15 {
            let at = uniform_point(&mut r, &patch.domain.inset(0.05));
            let g = PointGeometry::at(&patch, at).unwrap();
            let s: f64 = r.gen_range(0.0..std::f64::consts::PI);
            let lambda = r.gen_range(-2.0..2.0);
            let nu = (s.cos(), s.sin());
            let n = g.normal_vector(nu);
            let x = g.x().value();
            let p = std::array::from_fn(|i| x[i] + lambda * n[i]);
            let closed = hessian_closed_form(&g, lambda, nu).unwrap().coordinates;
            let fd = fd_jet(|u| delta_value(&patch, p, u), at, 2, DEFAULT_STEP, None).unwrap().hessian();
            let scale = closed.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
            for i in 0..2 {
                for j in 0..2 {
                    assert!(rel_err(closed[i][j], fd[i][j], scale) < 1e-5);
                }
            }
        }
    }
}

#[test]
fn conormal_derivative_matches_finite_differences() {
    let patch = perturbed();
    let mut r = rng(14);
    for _ in 0..10 {
        let at = uniform_point(&mut r, &patch.domain.inset(0.05));
        let g = PointGeometry::at(&patch, at).unwrap();
        let dw = g.conormal_derivative();
        for c in 0..4 {
            let fd = fd_jet(|u| Ok(conormal_value(&patch, u)?[c]), at, 1, DEFAULT_STEP, None).unwrap();
            assert!((dw[0][c] - fd.partial(1, 0)).abs() < 1e-7);
            assert!((dw[1][c] - fd.partial(0, 1)).abs() < 1e-7);
        }
    }
}

#[test]
fn critical_search_recovers_base_point() {
    let patch = bump();
    for at in [(0.1, -0.2), (-0.45, 0.3)] {
        let g = PointGeometry::at(&patch, at).unwrap();
        let x = g.x().value();
        let [_, e2] = g.xibar_values();
        let p = std::array::from_fn(|i| x[i] + e2[i]);
        let found = grid_critical_search(&patch, p, 21).unwrap();
        assert!(found.iter().any(|u| (u.0 - at.0).hypot(u.1 - at.1) < 1e-8), "{found:?}");
    }
    // far above the patch along e₁: no normal plane passes through
    assert!(grid_critical_search(&patch, [40.0, 0.0, 0.0, 0.0], 11).unwrap().is_empty());
}

/// Numeric Jacobian of F by central differences, determinant by pivoted
/// elimination.
fn fd_det(cong: &PlaneCongruence, u: (f64, f64), t: f64, l: f64) -> f64 {
    let h = 1e-5;
    let f = |du: f64, dv: f64, dt: f64, dl: f64| cong.evaluate_f((u.0 + du, u.1 + dv), t + dt, l + dl).unwrap();
    let col = |k: usize| -> [f64; 4] {
        let mut e = [0.0; 4];
        e[k] = h;
        let a = f(e[0], e[1], e[2], e[3]);
        let b = f(-e[0], -e[1], -e[2], -e[3]);
        std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * h))
    };
    let cols = [col(0), col(1), col(2), col(3)];
    det_pivoted::<4>(std::array::from_fn(|r| std::array::from_fn(|c| cols[c][r])))
}

#[test]
fn singular_conic_matches_numeric_jacobian() {
    assert!((fd_det(&constant_directors(), (0.3, 0.1), 0.5, 0.7) - 1.0).abs() < 1e-8);
    assert!((fd_det(&one_plus_l(), (0.2, -0.4), 1.0, 3.0) - 4.0).abs() < 1e-8);
    let c = one_plus_l().singular_conic((0.2, -0.4)).unwrap();
    assert_eq!(c.as_array().map(|x| (x * 1e12).round() / 1e12), [0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);

    let cong = PlaneCongruence::affine(perturbed());
    let mut r = rng(15);
    for _ in 0..20 {
        let u = uniform_point(&mut r, &cong.patch.domain.inset(0.05));
        let (t, l) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let conic = cong.singular_conic(u).unwrap().eval(t, l);
        let fd = fd_det(&cong, u, t, l);
        assert!((conic - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{conic} vs {fd}");
    }
}

#[test]
fn focal_points_are_congruence_singularities() {
    let patch = bump();
    let cong = PlaneCongruence::affine(patch.clone());
    let angles: Vec<f64> = (0..6).map(|k| k as f64 * std::f64::consts::PI / 6.0).collect();
    let mut checked = 0;
    for at in patch.domain.inset(0.1).grid(4) {
        let g = PointGeometry::at(&patch, at).unwrap();
        for f in focal_at(&g, &angles).unwrap() {
            if f.t.abs() > 20.0 {
                continue;
            }
            let (t, l) = (f.t * f.s.cos(), f.t * f.s.sin());
            let jac = cong.jacobian_f(at, t, l).unwrap();
            assert!(jac.det.abs() < 1e-6 * (1.0 + f.t * f.t), "{f:?} det {}", jac.det);
            assert!(jac.corank >= 1);
            let h = hessian_closed_form(&g, f.t, (f.s.cos(), f.s.sin())).unwrap();
            assert!(h.degenerate);
            checked += 1;
        }
    }
    assert!(checked > 20);
}

#[test]
fn exact_reduction_matches_finite_difference_reduction() {
    let patch = bump();
    let opts = ClassifyOptions::default();
    let mut r = rng(16);
    let mut checked = 0;
    while checked < 5 {
        let at = uniform_point(&mut r, &patch.domain.inset(0.2));
        let g = PointGeometry::at(&patch, at).unwrap();
        let s = r.gen_range(0.0..std::f64::consts::PI);
        let Some(f) = focal_at(&g, &[s]).unwrap().into_iter().find(|f| f.t.abs() < 5.0) else { continue };
        let c = classify_critical(&g, f.p, &opts).unwrap();
        assert_eq!(c.corank, 1);
        let k = c.kernel.unwrap();
        let fd = fd_reduced_coefficients(&patch, f.p, at, k, 2e-2).unwrap();
        let (c3, c4) = (c.coeffs[0].unwrap(), c.coeffs[1].unwrap());
        assert!((c3 - fd[0]).abs() < 1e-4 * (1.0 + c3.abs()), "c3 {c3} vs {}", fd[0]);
        assert!((c4 - fd[1]).abs() < 1e-3 * (1.0 + c4.abs()), "c4 {c4} vs {}", fd[1]);
        checked += 1;
    }
}

#[test]
fn semiumbilic_witnesses_have_corank_two_hessians() {
    let r = semiumbilic_scan(&perturbed(), 15, 1e-6).unwrap();
    assert!(!r.points.is_empty());
    assert!(r.symmetric_difference().is_empty());
    for p in &r.points {
        assert_eq!(p.hessian_corank, 2, "{p:?}");
        assert!(p.lambda.abs() > 1e-6);
    }
}

#[test]
fn ridge_points_classify_as_a4() {
    let patch = bump();
    let opts = ClassifyOptions::default();
    let trace = ridge_trace(&patch, 7, 16, &opts).unwrap();
    assert!(trace.count() > 0);
    for p in trace.points().filter(|p| p.order == 4) {
        let g = PointGeometry::at(&patch, p.u).unwrap();
        let n = g.normal_vector((p.s.cos(), p.s.sin()));
        let x = g.x().value();
        let q = std::array::from_fn(|i| x[i] + p.t * n[i]);
        let c = classify_critical(&g, q, &opts).unwrap();
        assert_eq!(c.label, SingularityLabel::A4, "{p:?}");
    }
}
