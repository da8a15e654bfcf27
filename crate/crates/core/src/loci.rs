//! Focal set, semiumbilic points and ridges of the affine distance family.

use rayon::prelude::*;
use serde::Serialize;

use crate::distance::{
    a_label, classify_critical, frame_matrix, reduced_coefficients, ClassifyOptions,
    SingularityLabel,
};
use crate::error::Result;
use crate::invariants::{Mat2, PointGeometry, Spectrum};
use crate::jet::{Jet, JetVec4};
use crate::surface::{linspace, SurfacePatch};

/// Eigenvalues below this magnitude give no focal point.
pub const MIN_CURVATURE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FocalSample {
    pub u: (f64, f64),
    /// Angle of `ν = cos s ξ̄₁ + sin s ξ̄₂`, in `[0, π)`.
    pub s: f64,
    pub t: f64,
    pub multiplicity: usize,
    /// `x(u) + t ν`.
    pub p: [f64; 4],
}

fn angle_grid(n_s: usize) -> Vec<f64> {
    (0..n_s)
        .map(|k| std::f64::consts::PI * k as f64 / n_s as f64)
        .collect()
}

fn geometry_grid(patch: &SurfacePatch, n_u: usize) -> Result<Vec<PointGeometry>> {
    patch
        .domain
        .grid(n_u)
        .into_par_iter()
        .map(|at| PointGeometry::at(patch, at))
        .collect()
}

/// Focal points `x(u) + t ν(s)` with `1/t` a real nonzero eigenvalue of
/// `S_ν`, over an `n_u × n_u` parameter grid and `n_s` angles.
pub fn focal_set(patch: &SurfacePatch, n_u: usize, n_s: usize) -> Result<Vec<FocalSample>> {
    let geoms = geometry_grid(patch, n_u)?;
    let angles = angle_grid(n_s);
    let mut out: Vec<FocalSample> = geoms
        .par_iter()
        .map(|g| focal_at(g, &angles))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    out.sort_by(|a, b| {
        a.u.0
            .total_cmp(&b.u.0)
            .then(a.u.1.total_cmp(&b.u.1))
            .then(a.s.total_cmp(&b.s))
            .then(a.t.total_cmp(&b.t))
    });
    Ok(out)
}

pub fn focal_at(g: &PointGeometry, angles: &[f64]) -> Result<Vec<FocalSample>> {
    let mut out = Vec::new();
    let x = g.x().value();
    for &s in angles {
        let nu = (s.cos(), s.sin());
        let op = g.shape_operator(nu)?;
        let n = g.normal_vector(nu);
        for (mu, mult) in op.real_eigenvalues() {
            if mu.abs() < MIN_CURVATURE {
                continue;
            }
            let t = 1.0 / mu;
            out.push(FocalSample {
                u: g.at,
                s,
                t,
                multiplicity: mult,
                p: std::array::from_fn(|i| x[i] + t * n[i]),
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Semiumbilic points

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SemiumbilicPoint {
    pub u: (f64, f64),
    /// `S_ν = λ Id` for `ν = a ξ̄₁ + b ξ̄₂`, `a² + b² = 1`.
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    /// Third singular value of the linear system relative to its norm.
    pub sigma3: f64,
    /// Corank of the Hessian of `Δ_p` at `p = x(u) + (1/λ) ν`.
    pub hessian_corank: usize,
}

/// A grid edge between two parameter points, by grid indices.
pub type GridEdge = ((usize, usize), (usize, usize));

#[derive(Clone, Debug, Default)]
pub struct SemiumbilicReport {
    /// Points found by the shape-operator system.
    pub points: Vec<SemiumbilicPoint>,
    /// Grid edges where the shape-operator system becomes singular.
    pub linear_edges: Vec<GridEdge>,
    /// Grid edges where some `Δ_p` acquires a rank-0 Hessian.
    pub hessian_edges: Vec<GridEdge>,
}

impl SemiumbilicReport {
    /// Edges found by exactly one of the two detectors.
    pub fn symmetric_difference(&self) -> Vec<GridEdge> {
        let mut out: Vec<GridEdge> = self
            .linear_edges
            .iter()
            .filter(|e| !self.hessian_edges.contains(e))
            .chain(self.hessian_edges.iter().filter(|e| !self.linear_edges.contains(e)))
            .copied()
            .collect();
        out.sort();
        out
    }
}

fn sym3(m: Mat2) -> [f64; 3] {
    [m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]]
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Signed indicator vanishing where `Id ∈ span{S̄₁, S̄₂}`, with its scale.
pub fn linear_indicator(g: &PointGeometry) -> (f64, f64) {
    let [s1, s2] = g.normal.sbar;
    let (a, b, c) = (sym3(s1), sym3(s2), [1.0, 0.0, 1.0]);
    (det3(a, b, c), norm3(a) * norm3(b) * norm3(c))
}

/// Coordinate Hessians `H₀ = Hess W·(x − x₀)` and `K_i = Hess W·ξ̄_i(u₀)`,
/// so that `Hess Δ_p = H₀ − λ(a K₁ + b K₂)` for `p = x₀ + λ(a ξ̄₁ + b ξ̄₂)`.
pub fn hessian_pencil(g: &PointGeometry) -> [Mat2; 3] {
    let w = &g.normal.w;
    let ord = w.order();
    let x = g.x();
    let x0 = x.value();
    let diff = JetVec4(std::array::from_fn(|i| x.0[i].truncate(ord).add_scalar(-x0[i])));
    let hess = |j: &Jet| [[j.partial(2, 0), j.partial(1, 1)], [j.partial(1, 1), j.partial(0, 2)]];
    let [e1, e2] = g.xibar_values();
    [
        hess(&w.dot(&diff)),
        hess(&w.dot_const(e1)),
        hess(&w.dot_const(e2)),
    ]
}

/// Signed indicator vanishing where `H₀, K₁, K₂` are linearly dependent.
pub fn hessian_indicator(g: &PointGeometry) -> (f64, f64) {
    let [h0, k1, k2] = hessian_pencil(g).map(sym3);
    (det3(h0, k1, k2), norm3(h0) * norm3(k1) * norm3(k2))
}

/// Kernel of `[vec S̄₁, vec S̄₂, −vec Id]` (entries 11, 22, 12, 21): the
/// normalized `(a, b, λ)` and the relative third singular value.
pub fn semiumbilic_witness(g: &PointGeometry) -> ((f64, f64, f64), f64) {
    let [s1, s2] = g.normal.sbar;
    let v = |m: Mat2| [m[0][0], m[1][1], m[0][1], m[1][0]];
    let (a, b, c) = (v(s1), v(s2), [-1.0, -1.0, 0.0, 0.0]);
    let m = nalgebra::Matrix4x3::from_fn(|r, k| [a, b, c][k][r]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    let mut kvec = [vt[(imin, 0)], vt[(imin, 1)], vt[(imin, 2)]];
    let ab = kvec[0].hypot(kvec[1]);
    if ab > 0.0 {
        // normalize (a, b) to the unit circle with b ≥ 0
        let sgn = if kvec[1] < 0.0 || (kvec[1] == 0.0 && kvec[0] < 0.0) { -1.0 } else { 1.0 };
        kvec = kvec.map(|x| sgn * x / ab);
    }
    (
        (kvec[0], kvec[1], kvec[2]),
        smin / m.norm().max(f64::MIN_POSITIVE),
    )
}

/// Scans for semiumbilic points with two independent detectors: the
/// shape-operator system `a S̄₁ + b S̄₂ = λ Id` and linear dependence of the
/// Hessian pencil of `Δ`. Sign changes of either indicator along grid edges
/// are bisected; a crossing is kept when the refined point has a witness
/// with `(a, b) ≠ 0` and `λ ≠ 0` within `tol`.
pub fn semiumbilic_scan(patch: &SurfacePatch, n: usize, tol: f64) -> Result<SemiumbilicReport> {
    let pts = patch.domain.grid(n);
    let data: Vec<((f64, f64), (f64, f64))> = pts
        .par_iter()
        .map(|&at| {
            let g = PointGeometry::at(patch, at)?;
            Ok((linear_indicator(&g), hessian_indicator(&g)))
        })
        .collect::<Result<_>>()?;
    let idx = |i: usize, j: usize| j * n + i;
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if i + 1 < n {
                edges.push(((i, j), (i + 1, j)));
            }
            if j + 1 < n {
                edges.push(((i, j), (i, j + 1)));
            }
        }
    }
    let crosses = |a: (f64, f64), b: (f64, f64)| {
        a.0.abs() > 1e-12 * a.1 && b.0.abs() > 1e-12 * b.1 && a.0.signum() != b.0.signum()
    };
    let results: Vec<(GridEdge, Option<SemiumbilicPoint>, bool)> = edges
        .par_iter()
        .filter_map(|&e| {
            let (da, db) = (data[idx(e.0 .0, e.0 .1)], data[idx(e.1 .0, e.1 .1)]);
            let lin = crosses(da.0, db.0);
            let hes = crosses(da.1, db.1);
            if !lin && !hes {
                return None;
            }
            let (ua, ub) = (pts[idx(e.0 .0, e.0 .1)], pts[idx(e.1 .0, e.1 .1)]);
            let lin_pt = if lin {
                refine_edge(patch, ua, ub, |g| linear_indicator(g).0)
                    .ok()
                    .and_then(|u| accept_linear(patch, u, tol).ok().flatten())
            } else {
                None
            };
            let hes_ok = hes
                && refine_edge(patch, ua, ub, |g| hessian_indicator(g).0)
                    .ok()
                    .map(|u| accept_hessian(patch, u, tol).unwrap_or(false))
                    .unwrap_or(false);
            Some((e, lin_pt, hes_ok))
        })
        .collect();
    let mut report = SemiumbilicReport::default();
    for (e, lin_pt, hes_ok) in results {
        if let Some(p) = lin_pt {
            report.points.push(p);
            report.linear_edges.push(e);
        }
        if hes_ok {
            report.hessian_edges.push(e);
        }
    }
    report
        .points
        .sort_by(|a, b| a.u.0.total_cmp(&b.u.0).then(a.u.1.total_cmp(&b.u.1)));
    report.linear_edges.sort();
    report.hessian_edges.sort();
    Ok(report)
}

/// Bisects a sign change of `f` on the segment `[a, b]`.
fn refine_edge<F>(patch: &SurfacePatch, a: (f64, f64), b: (f64, f64), f: F) -> Result<(f64, f64)>
where
    F: Fn(&PointGeometry) -> f64,
{
    let at = |s: f64| (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
    let eval = |s: f64| -> Result<f64> { Ok(f(&PointGeometry::compute(patch, &Default::default(), at(s), 6)?)) };
    let (mut lo, mut hi) = (0.0, 1.0);
    let flo = eval(lo)?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)?;
        if fm == 0.0 {
            return Ok(at(mid));
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

fn accept_linear(patch: &SurfacePatch, u: (f64, f64), tol: f64) -> Result<Option<SemiumbilicPoint>> {
    let g = PointGeometry::at(patch, u)?;
    let ((a, b, lambda), sigma3) = semiumbilic_witness(&g);
    let [s1, s2] = g.normal.sbar;
    let scale = 1.0 + [s1, s2].iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if sigma3 >= tol || a.hypot(b) <= tol || lambda.abs() <= tol * scale {
        return Ok(None);
    }
    let n = g.normal_vector((a, b));
    let x = g.x().value();
    let p = std::array::from_fn(|i| x[i] + n[i] / lambda);
    let opts = ClassifyOptions {
        corank_tol: 1e-6,
        ..Default::default()
    };
    let corank = classify_critical(&g, p, &opts).map(|c| c.corank).unwrap_or(0);
    Ok(Some(SemiumbilicPoint {
        u,
        a,
        b,
        lambda,
        sigma3,
        hessian_corank: corank,
    }))
}

/// Some `Δ_p` with `p` on the affine normal plane has vanishing Hessian:
/// `H₀ = λ(a K₁ + b K₂)` with `λ ≠ 0`.
fn accept_hessian(patch: &SurfacePatch, u: (f64, f64), tol: f64) -> Result<bool> {
    let g = PointGeometry::at(patch, u)?;
    let [h0, k1, k2] = hessian_pencil(&g).map(sym3);
    let m = nalgebra::Matrix3::from_fn(|r, c| [h0, k1, k2][c][r]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    let kv = [vt[(imin, 0)], vt[(imin, 1)], vt[(imin, 2)]];
    // kv₀ H₀ + kv₁ K₁ + kv₂ K₂ = 0 needs kv₀ ≠ 0 and (kv₁, kv₂) ≠ 0
    Ok(smin < tol * m.norm() && kv[0].abs() > tol && kv[1].hypot(kv[2]) > tol)
}

// ---------------------------------------------------------------------------
// Ridges

/// Reduced coefficients of `μ Δ_p` for `p = x₀ + ν/μ`, with the kernel
/// oriented along `hint`; smooth through `μ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchCoefficients {
    pub mu: f64,
    pub kernel: [f64; 2],
    /// `μ c₂ … μ c₆`.
    pub scaled: [f64; 5],
}

/// Eigenpair `branch` (0 = smaller eigenvalue) of `S_ν(s)` and the reduced
/// coefficients of the corresponding distance function.
pub fn branch_coefficients(
    g: &PointGeometry,
    s: f64,
    branch: usize,
    hint: Option<[f64; 2]>,
) -> Result<Option<BranchCoefficients>> {
    let nu = (s.cos(), s.sin());
    let op = g.shape_operator(nu)?;
    let (mu, v) = match op.spectrum {
        Spectrum::Real { values, vectors, .. } => (values[branch], vectors[branch]),
        Spectrum::Complex { .. } => return Ok(None),
    };
    let a = frame_matrix(g);
    let mut k = [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
    let kn = k[0].hypot(k[1]);
    k = [k[0] / kn, k[1] / kn];
    if let Some(h) = hint {
        if k[0] * h[0] + k[1] * h[1] < 0.0 {
            k = [-k[0], -k[1]];
        }
    }
    // μ Δ_p = μ W·(x − x₀) − W·ν
    let w = &g.normal.w;
    let ord = w.order();
    let x = g.x();
    let x0 = x.value();
    let diff = JetVec4(std::array::from_fn(|i| x.0[i].truncate(ord).add_scalar(-x0[i])));
    let n = g.normal_vector(nu);
    let jet = &w.dot(&diff).scale(mu) - &w.dot_const(n);
    let c = reduced_coefficients(&jet, k, [-k[1], k[0]]);
    let get = |j: usize| c.get(j).copied().unwrap_or(f64::NAN);
    Ok(Some(BranchCoefficients {
        mu,
        kernel: k,
        scaled: [get(2), get(3), get(4), get(5), get(6)],
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RidgePoint {
    pub u: (f64, f64),
    pub s: f64,
    pub t: f64,
    pub branch: usize,
    /// 4, or 5 when flagged as an order-5 candidate.
    pub order: usize,
    /// `c₃ … c₆` of `Δ_p` at `p = x(u) + t ν(s)`, along `kernel`.
    pub coeffs: [f64; 4],
    /// Kernel direction of the Hessian in parameter coordinates.
    #[serde(skip)]
    pub kernel: [f64; 2],
}

/// A cusp sample: `c₃ = 0` at a parameter grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CuspSample {
    pub u: (f64, f64),
    pub s: f64,
    pub t: f64,
    pub branch: usize,
    pub coeffs: [f64; 4],
}

#[derive(Clone, Debug, Default)]
pub struct RidgeTrace {
    pub chains: Vec<Vec<RidgePoint>>,
    /// Points flagged as order-5 candidates.
    pub order5: Vec<RidgePoint>,
    pub cusps: Vec<CuspSample>,
    pub u_step: f64,
    pub s_step: f64,
}

impl RidgeTrace {
    pub fn points(&self) -> impl Iterator<Item = &RidgePoint> {
        self.chains.iter().flatten()
    }

    pub fn count(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }
}

fn unscaled(b: &BranchCoefficients) -> [f64; 4] {
    std::array::from_fn(|i| b.scaled[i + 1] / b.mu)
}

/// Roots of `μ c₃` in `s ∈ [0, π]` for one branch at a grid point, by
/// sign changes on the `s` grid refined with bisection.
fn cusp_roots(g: &PointGeometry, angles: &[f64], branch: usize) -> Result<Vec<(f64, [f64; 2])>> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, BranchCoefficients)> = None;
    for &s in angles {
        let hint = prev.map(|p| p.1.kernel);
        let cur = match branch_coefficients(g, s, branch, hint)? {
            Some(c) if c.mu.abs() >= MIN_CURVATURE => c,
            _ => {
                prev = None;
                continue;
            }
        };
        if let Some((sp, bp)) = prev {
            if bp.scaled[1].signum() != cur.scaled[1].signum() {
                if let Some(root) = bisect_s(g, branch, sp, s, bp)? {
                    out.push(root);
                }
            }
        }
        prev = Some((s, cur));
    }
    Ok(out)
}

fn bisect_s(
    g: &PointGeometry,
    branch: usize,
    mut lo: f64,
    mut hi: f64,
    at_lo: BranchCoefficients,
) -> Result<Option<(f64, [f64; 2])>> {
    let sign_lo = at_lo.scaled[1].signum();
    let mut hint = at_lo.kernel;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let Some(c) = branch_coefficients(g, mid, branch, Some(hint))? else {
            return Ok(None);
        };
        if c.mu.abs() < MIN_CURVATURE {
            return Ok(None);
        }
        hint = c.kernel;
        if c.scaled[1].signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(Some((0.5 * (lo + hi), hint)))
}

/// Traces ridges of order 4 on an `n_u × n_u` grid with `n_s` angles.
///
/// At every grid point and eigen-branch the cusp angles `c₃ = 0` are located.
/// Cusps of the same branch at the two ends of a grid edge are matched, and a
/// sign change of `c₄` between them is bisected along the edge, following the
/// cusp angle. The resulting points are chained into polylines; points where
/// `c₅` changes sign along a chain, or falls below threshold, are flagged as
/// order-5 candidates.
pub fn ridge_trace(patch: &SurfacePatch, n_u: usize, n_s: usize, opts: &ClassifyOptions) -> Result<RidgeTrace> {
    let pts = patch.domain.grid(n_u);
    let mut angles = angle_grid(n_s);
    angles.push(std::f64::consts::PI);
    let u_step = (patch.domain.u[1] - patch.domain.u[0]) / (n_u.max(2) - 1) as f64;
    let s_step = std::f64::consts::PI / n_s as f64;

    // cusp angles at every grid point and branch
    let cusps: Vec<Vec<(usize, f64, [f64; 2])>> = pts
        .par_iter()
        .map(|&at| {
            let g = PointGeometry::at(patch, at)?;
            let mut v = Vec::new();
            for b in 0..2 {
                for (s, k) in cusp_roots(&g, &angles, b)? {
                    v.push((b, s, k));
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;

    let mut cusp_samples = Vec::new();
    for (i, list) in cusps.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        let g = PointGeometry::at(patch, pts[i])?;
        for &(b, s, k) in list {
            if let Some(c) = branch_coefficients(&g, s, b, Some(k))? {
                cusp_samples.push(CuspSample {
                    u: pts[i],
                    s,
                    t: 1.0 / c.mu,
                    branch: b,
                    coeffs: unscaled(&c),
                });
            }
        }
    }

    let idx = |i: usize, j: usize| j * n_u + i;
    let mut edges = Vec::new();
    for j in 0..n_u {
        for i in 0..n_u {
            if i + 1 < n_u {
                edges.push((idx(i, j), idx(i + 1, j)));
            }
            if j + 1 < n_u {
                edges.push((idx(i, j), idx(i, j + 1)));
            }
        }
    }
    let ridge: Vec<RidgePoint> = edges
        .par_iter()
        .map(|&(a, b)| -> Result<Vec<RidgePoint>> {
            let mut found = Vec::new();
            for &(br, sa, ka) in &cusps[a] {
                // nearest cusp of the same branch at the other end
                let m = cusps[b]
                    .iter()
                    .filter(|c| c.0 == br && (c.1 - sa).abs() <= 2.0 * s_step)
                    .min_by(|x, y| (x.1 - sa).abs().total_cmp(&(y.1 - sa).abs()));
                let Some(&(_, sb, _)) = m else { continue };
                if let Some(p) = refine_ridge(patch, pts[a], pts[b], br, sa, sb, ka, s_step, opts)? {
                    found.push(p);
                }
            }
            Ok(found)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut chains = chain_points(ridge, 2.0 * u_step, 2.0 * s_step);
    let mut order5 = Vec::new();
    for chain in &mut chains {
        flag_order5(chain, opts.coeff_tol);
        order5.extend(chain.iter().filter(|p| p.order == 5).copied());
    }
    Ok(RidgeTrace {
        chains,
        order5,
        cusps: cusp_samples,
        u_step,
        s_step,
    })
}

/// Cusp angle near `s_guess` at `u` by bracketing `μ c₃` within `width`.
fn cusp_near(
    g: &PointGeometry,
    branch: usize,
    s_guess: f64,
    width: f64,
    hint: [f64; 2],
) -> Result<Option<(f64, BranchCoefficients)>> {
    let steps = 8;
    let mut prev: Option<(f64, BranchCoefficients)> = None;
    let lo = (s_guess - width).max(0.0);
    let hi = (s_guess + width).min(std::f64::consts::PI);
    let mut best: Option<(f64, BranchCoefficients)> = None;
    let mut h = hint;
    for s in linspace([lo, hi], steps + 1) {
        let Some(c) = branch_coefficients(g, s, branch, Some(h))? else {
            prev = None;
            continue;
        };
        if c.mu.abs() < MIN_CURVATURE {
            prev = None;
            continue;
        }
        h = c.kernel;
        if let Some((sp, cp)) = prev {
            if cp.scaled[1].signum() != c.scaled[1].signum() {
                if let Some((root, k)) = bisect_s(g, branch, sp, s, cp)? {
                    let better = best.is_none_or(|b| (root - s_guess).abs() < (b.0 - s_guess).abs());
                    if better {
                        if let Some(rc) = branch_coefficients(g, root, branch, Some(k))? {
                            best = Some((root, rc));
                        }
                    }
                }
            }
        }
        prev = Some((s, c));
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn refine_ridge(
    patch: &SurfacePatch,
    ua: (f64, f64),
    ub: (f64, f64),
    branch: usize,
    sa: f64,
    sb: f64,
    hint: [f64; 2],
    s_step: f64,
    opts: &ClassifyOptions,
) -> Result<Option<RidgePoint>> {
    let at = |x: f64| (ua.0 + x * (ub.0 - ua.0), ua.1 + x * (ub.1 - ua.1));
    let width = (sa - sb).abs() + s_step;
    let eval = |x: f64, guess: f64, h: [f64; 2]| -> Result<Option<(PointGeometry, f64, BranchCoefficients)>> {
        let g = PointGeometry::at(patch, at(x))?;
        Ok(cusp_near(&g, branch, guess, width, h)?.map(|(s, c)| (g, s, c)))
    };
    let Some((_, s0, c0)) = eval(0.0, sa, hint)? else { return Ok(None) };
    let Some((_, _, c1)) = eval(1.0, sb, c0.kernel)? else { return Ok(None) };
    // c₄ is even in the kernel orientation; compare μ c₄ / μ = c₄
    let f0 = c0.scaled[2] / c0.mu;
    let f1 = c1.scaled[2] / c1.mu;
    if f0.signum() == f1.signum() {
        return Ok(None);
    }
    let (mut lo, mut hi, mut s_lo, mut k_lo) = (0.0, 1.0, s0, c0.kernel);
    let sign_lo = f0.signum();
    let mut last: Option<(PointGeometry, f64, BranchCoefficients)> = None;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        let Some((g, s, c)) = eval(mid, s_lo, k_lo)? else { return Ok(None) };
        let f = c.scaled[2] / c.mu;
        if f.signum() == sign_lo {
            lo = mid;
            s_lo = s;
            k_lo = c.kernel;
        } else {
            hi = mid;
        }
        last = Some((g, s, c));
        if hi - lo < 1e-13 {
            break;
        }
    }
    let Some((g, s, c)) = last else { return Ok(None) };
    let coeffs = unscaled(&c);
    // drop pole crossings: c₄ must actually be small relative to the others
    let label = a_label(&coeffs.map(Some), opts.coeff_tol.max(1e-5));
    if !matches!(label, SingularityLabel::A4 | SingularityLabel::A5 | SingularityLabel::Unresolved) {
        return Ok(None);
    }
    Ok(Some(RidgePoint {
        u: g.at,
        s,
        t: 1.0 / c.mu,
        branch,
        order: 4,
        coeffs,
        kernel: c.kernel,
    }))
}

/// Greedy nearest-neighbour chaining within `du` in the parameter plane and
/// `ds` in angle.
fn chain_points(mut pts: Vec<RidgePoint>, du: f64, ds: f64) -> Vec<Vec<RidgePoint>> {
    pts.sort_by(|a, b| {
        a.u.0
            .total_cmp(&b.u.0)
            .then(a.u.1.total_cmp(&b.u.1))
            .then(a.s.total_cmp(&b.s))
    });
    let close = |a: &RidgePoint, b: &RidgePoint| {
        a.branch == b.branch && (a.u.0 - b.u.0).hypot(a.u.1 - b.u.1) <= du && (a.s - b.s).abs() <= ds
    };
    let dist = |a: &RidgePoint, b: &RidgePoint| (a.u.0 - b.u.0).hypot(a.u.1 - b.u.1);
    let mut used = vec![false; pts.len()];
    let mut chains = Vec::new();
    for start in 0..pts.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut chain = std::collections::VecDeque::from([start]);
        // walk one way until stuck, then the other
        for front in [false, true] {
            loop {
                let end = if front { chain[0] } else { chain[chain.len() - 1] };
                let next = (0..pts.len())
                    .filter(|&k| !used[k] && close(&pts[end], &pts[k]))
                    .min_by(|&x, &y| dist(&pts[end], &pts[x]).total_cmp(&dist(&pts[end], &pts[y])));
                let Some(k) = next else { break };
                used[k] = true;
                if front {
                    chain.push_front(k);
                } else {
                    chain.push_back(k);
                }
            }
        }
        chains.push(chain.into_iter().map(|k| pts[k]).collect());
    }
    chains
}

/// Marks order-5 candidates: sign changes of `c₅` between consecutive chain
/// points (the point with smaller `|c₅|` is flagged) and points with `c₅`
/// below threshold.
fn flag_order5(chain: &mut [RidgePoint], tol: f64) {
    // odd coefficients flip with the kernel; orient it continuously
    for k in 1..chain.len() {
        let (a, b) = (chain[k - 1].kernel, chain[k].kernel);
        if a[0] * b[0] + a[1] * b[1] < 0.0 {
            let p = &mut chain[k];
            p.kernel = [-b[0], -b[1]];
            p.coeffs[0] = -p.coeffs[0];
            p.coeffs[2] = -p.coeffs[2];
        }
    }
    let scale = |p: &RidgePoint| p.coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let mut flags = vec![false; chain.len()];
    for (k, p) in chain.iter().enumerate() {
        if p.coeffs[2].abs() <= tol * scale(p) {
            flags[k] = true;
        }
    }
    for k in 1..chain.len() {
        let (a, b) = (chain[k - 1].coeffs[2], chain[k].coeffs[2]);
        if a.signum() != b.signum() {
            let pick = if a.abs() <= b.abs() { k - 1 } else { k };
            flags[pick] = true;
        }
    }
    for (p, f) in chain.iter_mut().zip(flags) {
        if f {
            p.order = 5;
        }
    }
}

/// No two flagged points are adjacent on any chain.
pub fn order5_isolated(trace: &RidgeTrace) -> bool {
    trace
        .chains
        .iter()
        .all(|c| c.windows(2).all(|w| !(w[0].order == 5 && w[1].order == 5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Domain;

    fn s0() -> SurfacePatch {
        SurfacePatch::from_sources(
            ["u", "v", "(u^2+v^2)/2", "u*v"],
            ["0", "0", "0", "1"],
            Domain::square(1.0),
        )
        .unwrap()
    }

    #[test]
    fn flat_shape_operators_give_no_focal_points() {
        assert!(focal_set(&s0(), 5, 8).unwrap().is_empty());
    }

    #[test]
    fn multiple_of_identity_is_a_witness() {
        let mut g = PointGeometry::at(&s0(), (0.0, 0.0)).unwrap();
        g.normal.sbar = [[[1.0, 0.0], [0.0, -1.0]], [[0.7, 0.0], [0.0, 0.7]]];
        let ((a, b, l), s3) = semiumbilic_witness(&g);
        assert!(s3 < 1e-12);
        assert!(a.abs() < 1e-12 && (b - 1.0).abs() < 1e-12 && (l - 0.7).abs() < 1e-12);
    }

    #[test]
    fn s0_has_no_semiumbilics() {
        let r = semiumbilic_scan(&s0(), 7, 1e-6).unwrap();
        assert!(r.points.is_empty());
        assert!(r.symmetric_difference().is_empty());
    }
}
