//! Independent numerical checks: finite-difference jets with Richardson
//! extrapolation, brute-force critical point search, pivoted determinants
//! and a sampling-based reduction of corank-1 critical points.

use crate::distance::distance;
use crate::error::{Error, Result};
use crate::frame::TransversalChoice;
use crate::invariants::PointGeometry;
use crate::surface::{Domain, SurfacePatch};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Finite-difference partial derivatives `∂^{i+j} f / ∂u^i ∂v^j`.
#[derive(Clone, Debug)]
pub struct FdJet {
    pub order: usize,
    values: Vec<Vec<f64>>,
    errors: Vec<Vec<f64>>,
}

impl FdJet {
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Difference between the extrapolated value and the finer raw estimate.
    pub fn error(&self, i: usize, j: usize) -> f64 {
        self.errors[i][j]
    }

    pub fn hessian(&self) -> [[f64; 2]; 2] {
        [
            [self.partial(2, 0), self.partial(1, 1)],
            [self.partial(1, 1), self.partial(0, 2)],
        ]
    }
}

/// Central stencil `(offset, weight)` for the `n`-th derivative with
/// second-order accuracy; weights are divided by `h^n` by the caller.
fn stencil(n: usize) -> &'static [(i32, f64)] {
    match n {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => unreachable!("stencils exist up to order 4"),
    }
}

/// Central differences of order ≤ 4 at step `h` and `h/2`, combined as
/// `(4 D(h/2) − D(h)) / 3`. Fails if a stencil point leaves `domain`.
pub fn fd_jet<F>(f: F, at: (f64, f64), order: usize, step: f64, domain: Option<&Domain>) -> Result<FdJet>
where
    F: Fn((f64, f64)) -> Result<f64>,
{
    assert!(order <= 4, "finite-difference jets are limited to order 4");
    let reach = if order >= 3 { 2.0 } else { 1.0 };
    if let Some(d) = domain {
        for (su, sv) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
            if !d.contains((at.0 + su * reach * step, at.1 + sv * reach * step)) {
                return Err(Error::StencilOutOfDomain);
            }
        }
    }
    let mut cache = std::collections::HashMap::new();
    let mut eval = |h: f64, a: i32, b: i32| -> Result<f64> {
        let key = ((h / step * 2.0).round() as i32, a, b);
        if let Some(v) = cache.get(&key) {
            return Ok(*v);
        }
        let v = f((at.0 + a as f64 * h, at.1 + b as f64 * h))?;
        cache.insert(key, v);
        Ok(v)
    };
    let mut raw = |h: f64, i: usize, j: usize| -> Result<f64> {
        let mut acc = 0.0;
        for &(a, wa) in stencil(i) {
            for &(b, wb) in stencil(j) {
                acc += wa * wb * eval(h, a, b)?;
            }
        }
        Ok(acc / h.powi((i + j) as i32))
    };
    let mut values = vec![vec![0.0; order + 1]; order + 1];
    let mut errors = vec![vec![0.0; order + 1]; order + 1];
    for d in 0..=order {
        for j in 0..=d {
            let i = d - j;
            let coarse = raw(step, i, j)?;
            let fine = raw(step / 2.0, i, j)?;
            let r = (4.0 * fine - coarse) / 3.0;
            values[i][j] = r;
            errors[i][j] = (r - fine).abs();
        }
    }
    Ok(FdJet {
        order,
        values,
        errors,
    })
}

/// Δ_p(u) by direct evaluation of the frame at `u`.
pub fn delta_value(patch: &SurfacePatch, p: [f64; 4], at: (f64, f64)) -> Result<f64> {
    let g = PointGeometry::compute(patch, &TransversalChoice::Default, at, 5)?;
    Ok(distance(&g, p, 0)?.delta)
}

/// Conormal `W(u)` by direct evaluation.
pub fn conormal_value(patch: &SurfacePatch, at: (f64, f64)) -> Result<[f64; 4]> {
    let g = PointGeometry::compute(patch, &TransversalChoice::Default, at, 5)?;
    Ok(g.normal.w.value())
}

/// Critical points of `Δ_p` found by scanning `|grad|` on an `n × n` grid for
/// local minima and polishing them with Newton's method.
pub fn grid_critical_search(patch: &SurfacePatch, p: [f64; 4], n: usize) -> Result<Vec<(f64, f64)>> {
    let dom = patch.domain;
    let n = n.max(3);
    let pts = dom.grid(n);
    let grad = |at: (f64, f64)| -> Result<f64> {
        let g = PointGeometry::compute(patch, &TransversalChoice::Default, at, 5)?;
        Ok(distance(&g, p, 1)?.grad_norm())
    };
    let vals: Vec<f64> = pts.iter().map(|&a| grad(a)).collect::<Result<_>>()?;
    let idx = |i: usize, j: usize| j * n + i;
    let mut found: Vec<(f64, f64)> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let v = vals[idx(i, j)];
            let mut is_min = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                        continue;
                    }
                    if vals[idx(ii as usize, jj as usize)] < v {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            if let Some(u) = newton_polish(patch, p, pts[idx(i, j)])? {
                if !found.iter().any(|q| (q.0 - u.0).hypot(q.1 - u.1) < 1e-8) {
                    found.push(u);
                }
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(found)
}

fn newton_polish(patch: &SurfacePatch, p: [f64; 4], start: (f64, f64)) -> Result<Option<(f64, f64)>> {
    let mut u = start;
    for _ in 0..40 {
        let g = PointGeometry::compute(patch, &TransversalChoice::Default, u, 6)?;
        let ev = distance(&g, p, 2)?;
        if ev.grad_norm() < 1e-12 {
            return Ok(Some(u));
        }
        let h = ev.hess;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-300 {
            return Ok(None);
        }
        let du = (h[1][1] * ev.grad[0] - h[0][1] * ev.grad[1]) / det;
        let dv = (h[0][0] * ev.grad[1] - h[1][0] * ev.grad[0]) / det;
        let next = (u.0 - du, u.1 - dv);
        if !patch.domain.contains(next) {
            return Ok(None);
        }
        u = next;
    }
    let g = PointGeometry::compute(patch, &TransversalChoice::Default, u, 5)?;
    Ok((distance(&g, p, 1)?.grad_norm() < 1e-9).then_some(u))
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det_pivoted<const N: usize>(mut m: [[f64; N]; N]) -> f64 {
    let mut det = 1.0;
    for c in 0..N {
        let piv = (c..N)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            m.swap(piv, c);
            det = -det;
        }
        det *= m[c][c];
        for r in (c + 1)..N {
            let f = m[r][c] / m[c][c];
            for k in c..N {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// Reduced coefficients `c₃, c₄` of `Δ_p` along the kernel graph at a
/// corank-1 critical point, from dense point samples of Δ only.
///
/// For each `s`, the regular coordinate `r(s)` solving `∂_r Δ = 0` is found
/// by a secant iteration on a central-difference derivative; `g(s) = Δ(s, r(s))`
/// is then differentiated with five-point stencils at `h` and `h/2` and
/// Richardson-extrapolated.
pub fn fd_reduced_coefficients(
    patch: &SurfacePatch,
    p: [f64; 4],
    at: (f64, f64),
    kernel: [f64; 2],
    h: f64,
) -> Result<[f64; 2]> {
    let r_dir = [-kernel[1], kernel[0]];
    let delta = |s: f64, r: f64| {
        delta_value(
            patch,
            p,
            (
                at.0 + s * kernel[0] + r * r_dir[0],
                at.1 + s * kernel[1] + r * r_dir[1],
            ),
        )
    };
    let eps = 1e-4;
    let dr = |s: f64, r: f64| -> Result<f64> { Ok((delta(s, r + eps)? - delta(s, r - eps)?) / (2.0 * eps)) };
    let g = |s: f64| -> Result<f64> {
        // secant on ∂_r Δ(s, ·) = 0 starting near r = 0
        let (mut r0, mut r1) = (0.0, 1e-3 * s.abs().max(1e-6));
        let (mut f0, mut f1) = (dr(s, r0)?, dr(s, r1)?);
        for _ in 0..30 {
            if f1 == f0 {
                break;
            }
            let r2 = r1 - f1 * (r1 - r0) / (f1 - f0);
            r0 = r1;
            f0 = f1;
            r1 = r2;
            f1 = dr(s, r1)?;
            if (r1 - r0).abs() < 1e-15 {
                break;
            }
        }
        delta(s, r1)
    };
    let deriv = |h: f64| -> Result<[f64; 2]> {
        let gm2 = g(-2.0 * h)?;
        let gm1 = g(-h)?;
        let g0 = g(0.0)?;
        let g1 = g(h)?;
        let g2 = g(2.0 * h)?;
        let d3 = (g2 - 2.0 * g1 + 2.0 * gm1 - gm2) / (2.0 * h.powi(3));
        let d4 = (g2 - 4.0 * g1 + 6.0 * g0 - 4.0 * gm1 + gm2) / h.powi(4);
        Ok([d3, d4])
    };
    let a = deriv(h)?;
    let b = deriv(h / 2.0)?;
    Ok([
        (4.0 * b[0] - a[0]) / 3.0 / 6.0,
        (4.0 * b[1] - a[1]) / 3.0 / 24.0,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_product() {
        let j = fd_jet(|(u, v)| Ok(u * v), (1.0, 2.0), 2, DEFAULT_STEP, None).unwrap();
        assert!((j.partial(1, 0) - 2.0).abs() < 1e-9);
        assert!((j.partial(0, 1) - 1.0).abs() < 1e-9);
        assert!((j.partial(1, 1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fd_sine_third_derivative() {
        let j = fd_jet(|(u, _)| Ok(u.sin()), (0.0, 0.0), 3, 1e-2, None).unwrap();
        assert!((j.partial(3, 0) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn stencil_leaving_domain() {
        let d = Domain::square(1.0);
        assert!(matches!(
            fd_jet(|(u, _)| Ok(u), (1.0, 0.0), 1, 1e-3, Some(&d)),
            Err(Error::StencilOutOfDomain)
        ));
    }

    #[test]
    fn pivoted_determinant() {
        let m = [[0.0, 2.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 3.0]];
        assert_eq!(det_pivoted(m), -6.0);
        let id = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(det_pivoted(id), 1.0);
    }
}
