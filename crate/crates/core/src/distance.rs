//! The affine distance family `Δ(p, u) = W(u)·(x(u) − p)`: criticality,
//! Hessians, the Morse-family test and classification of critical points.

use std::fmt;

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::{Mat2, PointGeometry};
use crate::jet::{slot, Jet};

/// Δ at one parameter point for a fixed `p`.
#[derive(Clone, Debug)]
pub struct DistanceEval {
    pub p: [f64; 4],
    pub u: (f64, f64),
    /// `W·(x − p)`.
    pub delta: f64,
    /// The `ξ̄₂`-coefficient of `x − p` in `[X₁ X₂ ξ̄₁ ξ̄₂]`.
    pub delta_decomposition: f64,
    /// `∂Δ/∂u`, `∂Δ/∂v`.
    pub grad: [f64; 2],
    /// Coordinate Hessian.
    pub hess: Mat2,
    pub jet: Jet,
    /// Part of `x − p` in `T ⊕ span{ξ̄₁}`.
    pub z: [f64; 4],
}

impl DistanceEval {
    pub fn grad_norm(&self) -> f64 {
        self.grad[0].hypot(self.grad[1])
    }
}

/// Evaluates Δ and its jet of order `order` (at most the jet order of `W`).
pub fn distance(geom: &PointGeometry, p: [f64; 4], order: usize) -> Result<DistanceEval> {
    let w = &geom.normal.w;
    let available = w.order();
    if order > available {
        return Err(Error::InsufficientOrder {
            needed: order,
            available,
        });
    }
    let x = geom.x();
    let diff = crate::jet::JetVec4(std::array::from_fn(|i| {
        x.0[i].truncate(available).add_scalar(-p[i])
    }));
    let full = w.dot(&diff);
    let jet = full.truncate(order);
    let delta = full.value();
    let grad = if available >= 1 {
        [full.partial(1, 0), full.partial(0, 1)]
    } else {
        [f64::NAN; 2]
    };
    let hess = if available >= 2 {
        [
            [full.partial(2, 0), full.partial(1, 1)],
            [full.partial(1, 1), full.partial(0, 2)],
        ]
    } else {
        [[f64::NAN; 2]; 2]
    };
    let xv = x.value();
    let d: [f64; 4] = std::array::from_fn(|i| xv[i] - p[i]);
    let [t1, t2] = geom.tangent();
    let [e1, e2] = geom.xibar_values();
    let m = Matrix4::from_fn(|r, c| [t1, t2, e1, e2][c][r]);
    let coef = m
        .lu()
        .solve(&Vector4::from_row_slice(&d))
        .ok_or(Error::SingularBasis)?;
    let z = std::array::from_fn(|i| d[i] - coef[3] * e2[i]);
    Ok(DistanceEval {
        p,
        u: geom.at,
        delta,
        delta_decomposition: coef[3],
        grad,
        hess,
        jet,
        z,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Criticality {
    /// Gradient criterion `|grad| < tol`.
    pub critical: bool,
    pub grad_norm: f64,
    /// Euclidean distance from `x(u) − p` to the affine normal plane.
    pub membership_residual: f64,
    /// Both criteria give the same answer.
    pub agree: bool,
}

/// Tests criticality of `Δ_p` at the geometry's point by the gradient and by
/// membership of `x(u) − p` in the affine normal plane.
pub fn is_critical(geom: &PointGeometry, p: [f64; 4], tol: f64) -> Result<Criticality> {
    let ev = distance(geom, p, 1)?;
    let g = ev.grad_norm();
    let xv = geom.x().value();
    let d: [f64; 4] = std::array::from_fn(|i| xv[i] - p[i]);
    let res = distance_to_plane(d, geom.xibar_values());
    let by_grad = g < tol;
    let by_plane = res < tol;
    let near = |x: f64| x > tol / 10.0 && x < tol * 10.0;
    if by_grad != by_plane && (near(g) || near(res)) {
        return Err(Error::ToleranceAmbiguity {
            grad: g,
            residual: res,
        });
    }
    Ok(Criticality {
        critical: by_grad,
        grad_norm: g,
        membership_residual: res,
        agree: by_grad == by_plane,
    })
}

/// Euclidean distance from `d` to `span{a, b}`.
pub fn distance_to_plane(d: [f64; 4], plane: [[f64; 4]; 2]) -> f64 {
    let m = SMatrix::<f64, 4, 2>::from_fn(|r, c| plane[c][r]);
    let q = m.qr().q();
    let dv = Vector4::from_row_slice(&d);
    (dv - q * (q.transpose() * dv)).norm()
}

/// Closed-form Hessian `h̄²(X, (−Id + λS_ν)Y)` in the frame `{X₁, X₂}` for
/// `p = x(u) + λν`, with its degeneracy flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedHessian {
    pub frame: Mat2,
    /// The same form in the coordinates `(u, v)`.
    pub coordinates: Mat2,
    pub det_factor: f64,
    pub degenerate: bool,
}

pub const DEGENERACY_TOL: f64 = 1e-9;

pub fn hessian_closed_form(geom: &PointGeometry, lambda: f64, nu: (f64, f64)) -> Result<ClosedHessian> {
    let s = geom.shape_operator(nu)?.matrix;
    let h2 = geom.normal.hbar[1];
    let f = [
        [-1.0 + lambda * s[0][0], lambda * s[0][1]],
        [lambda * s[1][0], -1.0 + lambda * s[1][1]],
    ];
    let frame = mat_mul(h2, f);
    let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
    // X_k = α_k ∂u + β_k ∂v; the coordinate form is A⁻ᵀ H A⁻¹.
    let a = frame_matrix(geom);
    let ai = inverse(a).ok_or(Error::SingularBasis)?;
    let coordinates = mat_mul(transpose(ai), mat_mul(frame, ai));
    Ok(ClosedHessian {
        frame,
        coordinates,
        det_factor: det,
        degenerate: det.abs() < DEGENERACY_TOL,
    })
}

/// Columns are the coordinate components of `X₁`, `X₂`.
pub fn frame_matrix(geom: &PointGeometry) -> Mat2 {
    let [f1, f2] = &geom.frame.tangent.fields;
    [
        [f1.alpha.value(), f2.alpha.value()],
        [f1.beta.value(), f2.beta.value()],
    ]
}

/// Smallest singular value of the `2 × 6` Jacobian of `(∂Δ/∂u₁, ∂Δ/∂u₂)`
/// with respect to `(u, p)`.
pub fn morse_family_rank(geom: &PointGeometry, p: [f64; 4]) -> Result<f64> {
    let ev = distance(geom, p, 2)?;
    let dw = geom.conormal_derivative();
    let m = SMatrix::<f64, 2, 6>::from_fn(|r, c| {
        if c < 2 {
            ev.hess[r][c]
        } else {
            -dw[r][c - 2]
        }
    });
    let sv = m.singular_values();
    Ok(sv.min())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SingularityLabel {
    Regular,
    A1,
    A2,
    A3,
    A4,
    A5,
    D4Minus,
    D4Plus,
    D5,
    Unresolved,
}

impl SingularityLabel {
    /// `k` for `A_k`.
    pub fn a_index(self) -> Option<usize> {
        Some(match self {
            SingularityLabel::A1 => 1,
            SingularityLabel::A2 => 2,
            SingularityLabel::A3 => 3,
            SingularityLabel::A4 => 4,
            SingularityLabel::A5 => 5,
            _ => return None,
        })
    }

    fn from_a_index(k: usize) -> Self {
        match k {
            1 => SingularityLabel::A1,
            2 => SingularityLabel::A2,
            3 => SingularityLabel::A3,
            4 => SingularityLabel::A4,
            5 => SingularityLabel::A5,
            _ => SingularityLabel::Unresolved,
        }
    }
}

impl fmt::Display for SingularityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SingularityLabel::Regular => "Regular",
            SingularityLabel::A1 => "A1",
            SingularityLabel::A2 => "A2",
            SingularityLabel::A3 => "A3",
            SingularityLabel::A4 => "A4",
            SingularityLabel::A5 => "A5",
            SingularityLabel::D4Minus => "D4-",
            SingularityLabel::D4Plus => "D4+",
            SingularityLabel::D5 => "D5",
            SingularityLabel::Unresolved => "Unresolved",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyOptions {
    /// Relative coefficient significance threshold.
    pub coeff_tol: f64,
    /// Relative singular-value threshold for the Hessian corank.
    pub corank_tol: f64,
    /// Gradient bound, relative to the corank scale, for criticality.
    pub critical_tol: f64,
    /// Orientation hint for the kernel direction (coordinates).
    pub kernel_hint: Option<[f64; 2]>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            coeff_tol: 1e-6,
            corank_tol: 1e-8,
            critical_tol: 1e-7,
            kernel_hint: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub label: SingularityLabel,
    pub corank: usize,
    /// Reduced coefficients `c₃ … c₆` (corank 1), `None` when beyond the
    /// available jet order.
    pub coeffs: [Option<f64>; 4],
    /// Unit kernel direction in coordinates (corank 1).
    pub kernel: Option<[f64; 2]>,
    /// Number of distinct real linear factors of the cubic (corank 2).
    pub cubic_roots: Option<usize>,
    pub cubic_discriminant: Option<f64>,
    pub hessian_eigenvalues: [f64; 2],
}

/// Classifies the critical point of `Δ_p` at the geometry's point.
pub fn classify_critical(
    geom: &PointGeometry,
    p: [f64; 4],
    opts: &ClassifyOptions,
) -> Result<Classification> {
    let order = geom.normal.w.order();
    let ev = distance(geom, p, order)?;
    let dw = geom.conormal_derivative();
    let dw_norm = dw.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let h = Matrix2::new(ev.hess[0][0], ev.hess[0][1], ev.hess[1][0], ev.hess[1][1]);
    let scale = 1.0 + h.norm() + dw_norm;
    let d: f64 = (0..4).map(|i| (geom.x().value()[i] - p[i]).powi(2)).sum::<f64>().sqrt();
    if ev.grad_norm() > opts.critical_tol * scale * (1.0 + d) {
        return Err(Error::NotCritical {
            grad: ev.grad_norm(),
        });
    }
    classify_jet(&ev.jet, scale, opts)
}

/// Classification from the jet of Δ at a critical point.
pub fn classify_jet(jet: &Jet, scale: f64, opts: &ClassifyOptions) -> Result<Classification> {
    if jet.order() < 3 {
        return Err(Error::InsufficientOrder {
            needed: 3,
            available: jet.order(),
        });
    }
    let hm = Matrix2::new(
        2.0 * jet.coeff(2, 0),
        jet.coeff(1, 1),
        jet.coeff(1, 1),
        2.0 * jet.coeff(0, 2),
    );
    let eig = SymmetricEigen::new(hm);
    let (ismall, ibig) = if eig.eigenvalues[0].abs() <= eig.eigenvalues[1].abs() {
        (0, 1)
    } else {
        (1, 0)
    };
    let evals = [eig.eigenvalues[ismall], eig.eigenvalues[ibig]];
    let thresh = opts.corank_tol * scale;
    let corank = evals.iter().filter(|e| e.abs() < thresh).count();
    let mut out = Classification {
        label: SingularityLabel::Unresolved,
        corank,
        coeffs: [None; 4],
        kernel: None,
        cubic_roots: None,
        cubic_discriminant: None,
        hessian_eigenvalues: evals,
    };
    match corank {
        0 => out.label = SingularityLabel::A1,
        1 => {
            let mut k = [eig.eigenvectors[(0, ismall)], eig.eigenvectors[(1, ismall)]];
            if let Some(hint) = opts.kernel_hint {
                if k[0] * hint[0] + k[1] * hint[1] < 0.0 {
                    k = [-k[0], -k[1]];
                }
            }
            let r = [-k[1], k[0]];
            let c = reduced_coefficients(jet, k, r);
            out.coeffs = std::array::from_fn(|i| c.get(3 + i).copied());
            out.kernel = Some(k);
            out.label = a_label(&out.coeffs, opts.coeff_tol);
        }
        _ => {
            let (label, roots, disc) = classify_cubic(jet, opts.coeff_tol);
            out.label = label;
            out.cubic_roots = roots;
            out.cubic_discriminant = Some(disc);
        }
    }
    Ok(out)
}

/// Label `A_k` from reduced coefficients `c₃ … c₆`.
pub fn a_label(coeffs: &[Option<f64>; 4], tol: f64) -> SingularityLabel {
    let m = coeffs.iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
    for (i, c) in coeffs.iter().enumerate() {
        match c {
            Some(c) if c.abs() > tol * m => return SingularityLabel::from_a_index(i + 2),
            Some(_) => {}
            None => return SingularityLabel::Unresolved,
        }
    }
    SingularityLabel::Unresolved
}

/// Coefficients `c_j` of `g(s) = Δ(s k + r(s) r̂)` where `r(s)` solves
/// `∂_r Δ = 0` with `r(0) = 0`, computed in truncated power series.
pub fn reduced_coefficients(jet: &Jet, k: [f64; 2], rdir: [f64; 2]) -> Vec<f64> {
    let n = jet.order();
    let e = jet.linear_substitute(k, rdir);
    let er = e.d_v();
    let err = er.coeff(0, 1);
    // r(s) by fixed-point Newton iteration with frozen derivative; each pass
    // fixes one more order.
    let mut r = vec![0.0; n + 1];
    if err != 0.0 {
        for _ in 0..=n {
            let f = compose(&er, &r, n);
            for j in 1..=n {
                r[j] -= f[j] / err;
            }
        }
    }
    compose(&e, &r, n)
}

/// `f(s, r(s))` as a power series in `s` truncated at degree `n`.
fn compose(f: &Jet, r: &[f64], n: usize) -> Vec<f64> {
    let order = f.order();
    let mut rpow = vec![vec![0.0; n + 1]];
    rpow[0][0] = 1.0;
    for j in 1..=order {
        let next = series_mul(&rpow[j - 1], r, n);
        rpow.push(next);
    }
    let mut out = vec![0.0; n + 1];
    for i in 0..=order {
        for j in 0..=(order - i) {
            let c = f.coeffs()[slot(i, j)];
            if c == 0.0 {
                continue;
            }
            for (m, x) in rpow[j].iter().enumerate() {
                if i + m > n {
                    break;
                }
                out[i + m] += c * x;
            }
        }
    }
    out
}

fn series_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (i, x) in a.iter().enumerate().take(n + 1) {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(n + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Corank-2 classification from the cubic (and quartic) part of the jet.
/// Returns the label, the number of distinct real roots and the
/// discriminant.
pub fn classify_cubic(jet: &Jet, tol: f64) -> (SingularityLabel, Option<usize>, f64) {
    let (a, b, c, d) = (jet.coeff(3, 0), jet.coeff(2, 1), jet.coeff(1, 2), jet.coeff(0, 3));
    let disc = b * b * c * c - 4.0 * a * c * c * c - 4.0 * b * b * b * d - 27.0 * a * a * d * d
        + 18.0 * a * b * c * d;
    let norm = (a * a + b * b + c * c + d * d).sqrt();
    if norm == 0.0 {
        return (SingularityLabel::Unresolved, None, disc);
    }
    if disc.abs() > tol * norm.powi(4) {
        return if disc > 0.0 {
            (SingularityLabel::D4Minus, Some(3), disc)
        } else {
            (SingularityLabel::D4Plus, Some(1), disc)
        };
    }
    // Repeated root. The Hessian covariant vanishes for a cube.
    let h = [b * b - 3.0 * a * c, b * c - 9.0 * a * d, c * c - 3.0 * b * d];
    let hn = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    if hn <= tol * norm * norm {
        return (SingularityLabel::Unresolved, Some(1), disc);
    }
    // The double root direction annihilates the gradient of the cubic.
    let dir = double_root_direction(a, b, c, d);
    if jet.order() < 4 {
        return (SingularityLabel::Unresolved, Some(2), disc);
    }
    let q: f64 = (0..=4)
        .map(|j| jet.coeff(4 - j, j) * dir[0].powi((4 - j) as i32) * dir[1].powi(j as i32))
        .sum();
    let qn = (0..=4).map(|j| jet.coeff(4 - j, j).abs()).fold(norm, f64::max);
    if q.abs() > tol * qn {
        (SingularityLabel::D5, Some(2), disc)
    } else {
        (SingularityLabel::Unresolved, Some(2), disc)
    }
}

/// Unit direction `(x, y)` with `∇f(x, y) = 0` for
/// `f = a x³ + b x²y + c xy² + d y³`, found by minimizing `|∇f|` on the
/// unit circle.
fn double_root_direction(a: f64, b: f64, c: f64, d: f64) -> [f64; 2] {
    let grad2 = |t: f64| {
        let (x, y) = (t.cos(), t.sin());
        let fx = 3.0 * a * x * x + 2.0 * b * x * y + c * y * y;
        let fy = b * x * x + 2.0 * c * x * y + 3.0 * d * y * y;
        fx * fx + fy * fy
    };
    let n = 720;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..n {
        let t = std::f64::consts::PI * i as f64 / n as f64;
        let g = grad2(t);
        if g < best.1 {
            best = (t, g);
        }
    }
    // golden-section polish
    let step = std::f64::consts::PI / n as f64;
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if grad2(m1) < grad2(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t = 0.5 * (lo + hi);
    [t.cos(), t.sin()]
}

pub(crate) fn mat_mul(a: Mat2, b: Mat2) -> Mat2 {
    std::array::from_fn(|r| std::array::from_fn(|c| a[r][0] * b[0][c] + a[r][1] * b[1][c]))
}

pub(crate) fn transpose(a: Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub(crate) fn inverse(a: Mat2) -> Option<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ])
}
