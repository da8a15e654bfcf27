//! Two-parameter plane congruences `F(u, t, l) = x(u) + t ξ(u) + l δ(u)`,
//! their singular locus and, for the affine normal congruence, the
//! classification of singular points.

use std::fmt;

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use serde::Serialize;

use crate::distance::{classify_critical, Classification, ClassifyOptions, SingularityLabel};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::frame::TransversalChoice;
use crate::invariants::PointGeometry;
use crate::surface::{eval_four, Domain, SurfacePatch};

/// Relative tolerance for matching `1/l` against an eigenvalue of `S_ν`.
pub const EIGEN_MATCH_TOL: f64 = 1e-7;

/// Rank threshold for `JF`, relative to its largest singular value.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum Directors {
    Explicit { xi: [Expr; 4], delta: [Expr; 4] },
    /// `ξ̄₁`, `ξ̄₂` of the affine normal plane.
    AffineNormal,
}

#[derive(Clone, Debug)]
pub struct PlaneCongruence {
    pub patch: SurfacePatch,
    pub directors: Directors,
    /// Optional `(t, l)` window; `u` ranges over the patch domain.
    pub window: Option<Domain>,
}

/// Values of `x`, the directors and their first and second derivatives at
/// one parameter point. Index 0 is the value, 1 and 2 are `∂_u`, `∂_v`, and
/// 3, 4, 5 are `∂_uu`, `∂_uv`, `∂_vv`.
#[derive(Clone, Debug)]
pub struct CongruencePoint {
    pub u: (f64, f64),
    pub x: [[f64; 4]; 6],
    pub xi: [[f64; 4]; 6],
    pub delta: [[f64; 4]; 6],
    pub geometry: Option<Box<PointGeometry>>,
}

fn derivs(j: &crate::jet::JetVec4) -> [[f64; 4]; 6] {
    let p = |a: usize, b: usize| std::array::from_fn(|i| j.0[i].partial(a, b));
    [p(0, 0), p(1, 0), p(0, 1), p(2, 0), p(1, 1), p(0, 2)]
}

impl PlaneCongruence {
    pub fn explicit(patch: SurfacePatch, xi: [Expr; 4], delta: [Expr; 4]) -> Self {
        PlaneCongruence {
            patch,
            directors: Directors::Explicit { xi, delta },
            window: None,
        }
    }

    pub fn affine(patch: SurfacePatch) -> Self {
        PlaneCongruence {
            patch,
            directors: Directors::AffineNormal,
            window: None,
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.directors, Directors::AffineNormal)
    }

    pub fn at(&self, u: (f64, f64)) -> Result<CongruencePoint> {
        self.patch.check_point(u)?;
        match &self.directors {
            Directors::Explicit { xi, delta } => {
                let x = eval_four(&self.patch.x, u, 2)?;
                let a = eval_four(xi, u, 2)?;
                let b = eval_four(delta, u, 2)?;
                Ok(CongruencePoint {
                    u,
                    x: derivs(&x),
                    xi: derivs(&a),
                    delta: derivs(&b),
                    geometry: None,
                })
            }
            Directors::AffineNormal => {
                let order = self.patch.jet_order.max(6);
                let g = PointGeometry::compute(&self.patch, &TransversalChoice::Default, u, order)?;
                Ok(CongruencePoint {
                    u,
                    x: derivs(g.x()),
                    xi: derivs(&g.normal.xibar[0]),
                    delta: derivs(&g.normal.xibar[1]),
                    geometry: Some(Box::new(g)),
                })
            }
        }
    }

    fn check_window(&self, t: f64, l: f64) -> Result<()> {
        match &self.window {
            Some(w) if !w.contains((t, l)) => Err(Error::OutOfDomain { u: t, v: l }),
            _ => Ok(()),
        }
    }

    pub fn evaluate_f(&self, u: (f64, f64), t: f64, l: f64) -> Result<[f64; 4]> {
        self.check_window(t, l)?;
        Ok(self.at(u)?.f(t, l))
    }

    pub fn jacobian_f(&self, u: (f64, f64), t: f64, l: f64) -> Result<JacobianReport> {
        self.check_window(t, l)?;
        Ok(self.at(u)?.jacobian(t, l))
    }

    pub fn singular_conic(&self, u: (f64, f64)) -> Result<SingularConic> {
        Ok(self.at(u)?.conic())
    }

    /// Samples of `{det JF = 0}`: for each grid point `u` and each sample of
    /// `t` (resp. `l`) in `[-range, range]`, the real roots in `l` (resp. `t`).
    pub fn solve_singular_locus(&self, n_u: usize, n_tl: usize, range: f64) -> Result<Vec<LocusSample>> {
        let (tr, lr) = match &self.window {
            Some(w) => (w.u, w.v),
            None => ([-range, range], [-range, range]),
        };
        let mut out = Vec::new();
        for u in self.patch.domain.grid(n_u) {
            let cp = self.at(u)?;
            let c = cp.conic();
            let mut local: Vec<(f64, f64)> = Vec::new();
            for t in crate::surface::linspace(tr, n_tl) {
                // c_ll l² + (c_tl t + c_l) l + (c_tt t² + c_t t + c_0)
                for l in quadratic_roots(c.c_ll, c.c_tl * t + c.c_l, c.c_tt * t * t + c.c_t * t + c.c_0) {
                    if l >= lr[0] && l <= lr[1] {
                        local.push((t, l));
                    }
                }
            }
            for l in crate::surface::linspace(lr, n_tl) {
                for t in quadratic_roots(c.c_tt, c.c_tl * l + c.c_t, c.c_ll * l * l + c.c_l * l + c.c_0) {
                    if t >= tr[0] && t <= tr[1] {
                        local.push((t, l));
                    }
                }
            }
            local.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            local.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-8);
            for (t, l) in local {
                let corank = cp.jacobian(t, l).corank;
                out.push(LocusSample { u, t, l, corank });
            }
        }
        out.sort_by(|a, b| {
            a.u.0
                .total_cmp(&b.u.0)
                .then(a.u.1.total_cmp(&b.u.1))
                .then(a.t.total_cmp(&b.t))
                .then(a.l.total_cmp(&b.l))
        });
        Ok(out)
    }
}

/// Real roots of `a x² + b x + c`, degrading to the linear case.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return vec![];
    }
    if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let q = if q == 0.0 { -0.5 * b } else { q };
    if q == 0.0 {
        return vec![0.0];
    }
    let mut r = vec![q / a, c / q];
    r.sort_by(f64::total_cmp);
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocusSample {
    pub u: (f64, f64),
    pub t: f64,
    pub l: f64,
    pub corank: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianReport {
    /// `columns[k]` is the `k`-th column.
    pub columns: [[f64; 4]; 4],
    pub det: f64,
    pub singular_values: [f64; 4],
    pub rank: usize,
    pub corank: usize,
}

impl JacobianReport {
    pub fn rows(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.columns[c][r]))
    }
}

/// Coefficients of `det JF` as a quadratic polynomial in `(t, l)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularConic {
    pub c_tt: f64,
    pub c_ll: f64,
    pub c_tl: f64,
    pub c_t: f64,
    pub c_l: f64,
    pub c_0: f64,
}

impl SingularConic {
    pub fn eval(&self, t: f64, l: f64) -> f64 {
        self.c_tt * t * t + self.c_ll * l * l + self.c_tl * t * l + self.c_t * t + self.c_l * l + self.c_0
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.c_tt, self.c_ll, self.c_tl, self.c_t, self.c_l, self.c_0]
    }
}

fn det4(a: [f64; 4], b: [f64; 4], c: [f64; 4], d: [f64; 4]) -> f64 {
    Matrix4::from_fn(|r, k| [a, b, c, d][k][r]).determinant()
}

impl CongruencePoint {
    pub fn f(&self, t: f64, l: f64) -> [f64; 4] {
        std::array::from_fn(|i| self.x[0][i] + t * self.xi[0][i] + l * self.delta[0][i])
    }

    /// Column `k` of `JF`, in the order `(∂_u, ∂_v, ∂_t, ∂_l)`.
    pub fn jacobian(&self, t: f64, l: f64) -> JacobianReport {
        let col = |d: usize| -> [f64; 4] {
            std::array::from_fn(|i| self.x[d][i] + t * self.xi[d][i] + l * self.delta[d][i])
        };
        let columns = [col(1), col(2), self.xi[0], self.delta[0]];
        let m = Matrix4::from_fn(|r, c| columns[c][r]);
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let thresh = RANK_TOL * sv[0];
        let rank = sv.iter().filter(|s| **s > thresh).count();
        JacobianReport {
            columns,
            det: m.determinant(),
            singular_values: [sv[0], sv[1], sv[2], sv[3]],
            rank,
            corank: 4 - rank,
        }
    }

    pub fn conic(&self) -> SingularConic {
        let (xu, xv) = (self.x[1], self.x[2]);
        let (au, av, a) = (self.xi[1], self.xi[2], self.xi[0]);
        let (bu, bv, b) = (self.delta[1], self.delta[2], self.delta[0]);
        SingularConic {
            c_tt: det4(au, av, a, b),
            c_ll: det4(bu, bv, a, b),
            c_tl: det4(au, bv, a, b) + det4(bu, av, a, b),
            c_t: det4(au, xv, a, b) + det4(xu, av, a, b),
            c_l: det4(bu, xv, a, b) + det4(xu, bv, a, b),
            c_0: det4(xu, xv, a, b),
        }
    }

    /// Second-order type of a corank-2 point: the pencil of quadratic forms
    /// obtained by projecting `D²F` restricted to the kernel onto the
    /// cokernel. `W1` when the pencil contains a definite form
    /// (`(x² + y², xy)`), `W2` when it does not (`(x² − y², xy)`).
    pub fn corank2_type(&self, t: f64, l: f64) -> Option<PencilType> {
        let j = self.jacobian(t, l);
        if j.corank != 2 {
            return None;
        }
        let m = Matrix4::from_fn(|r, c| j.columns[c][r]);
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u?, svd.v_t?);
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let ker: [[f64; 4]; 2] = [2, 3].map(|k| std::array::from_fn(|i| vt[(order[k], i)]));
        let coker: [[f64; 4]; 2] = [2, 3].map(|k| std::array::from_fn(|i| u[(i, order[k])]));
        // D²F(a, b) for a, b in (u1, u2, t, l)
        let second = |a: [f64; 4], b: [f64; 4]| -> [f64; 4] {
            std::array::from_fn(|i| {
                let fuu = self.x[3][i] + t * self.xi[3][i] + l * self.delta[3][i];
                let fuv = self.x[4][i] + t * self.xi[4][i] + l * self.delta[4][i];
                let fvv = self.x[5][i] + t * self.xi[5][i] + l * self.delta[5][i];
                fuu * a[0] * b[0]
                    + fuv * (a[0] * b[1] + a[1] * b[0])
                    + fvv * a[1] * b[1]
                    + self.xi[1][i] * (a[0] * b[2] + a[2] * b[0])
                    + self.xi[2][i] * (a[1] * b[2] + a[2] * b[1])
                    + self.delta[1][i] * (a[0] * b[3] + a[3] * b[0])
                    + self.delta[2][i] * (a[1] * b[3] + a[3] * b[1])
            })
        };
        let forms: [[[f64; 2]; 2]; 2] = std::array::from_fn(|q| {
            std::array::from_fn(|r| {
                std::array::from_fn(|c| {
                    let v = second(ker[r], ker[c]);
                    (0..4).map(|i| coker[q][i] * v[i]).sum()
                })
            })
        });
        let [a, b] = forms;
        let det = |m: [[f64; 2]; 2]| m[0][0] * m[1][1] - m[0][1] * m[1][0];
        // det(s A + r B) = s² det A + s r (mixed) + r² det B
        let mixed = a[0][0] * b[1][1] + b[0][0] * a[1][1] - 2.0 * a[0][1] * b[0][1];
        let q = Matrix2::new(det(a), 0.5 * mixed, 0.5 * mixed, det(b));
        let e = SymmetricEigen::new(q).eigenvalues;
        let scale = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return Some(PencilType::Degenerate);
        }
        Some(if e.iter().any(|x| *x > 1e-9 * scale) {
            PencilType::W1
        } else if e.iter().all(|x| *x < -1e-9 * scale) {
            PencilType::W2
        } else {
            PencilType::Degenerate
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PencilType {
    W1,
    W2,
    Degenerate,
}

/// Result of matching a singular point against the eigenvalues of `S_ν`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorankCharacterization {
    /// `ν = a ξ̄₁ + b ξ̄₂`, normalized as `(t/l, 1)` or `(1, l/t)`;
    /// `None` at `(t, l) = (0, 0)`.
    pub nu: Option<(f64, f64)>,
    /// `1/l` (or `1/t` on the `t`-branch).
    pub focal_value: f64,
    pub is_eigenvalue: bool,
    pub multiplicity: usize,
    pub corank_df: usize,
    /// The other branch's result when both `t` and `l` are nonzero and the
    /// two disagree.
    pub alternate: Option<(usize, bool)>,
}

/// Eigenvalue characterization of a point of the affine normal congruence.
pub fn corank_characterization(cp: &CongruencePoint, t: f64, l: f64) -> Result<CorankCharacterization> {
    let geom = cp
        .geometry
        .as_deref()
        .ok_or_else(|| Error::Document("eigenvalue characterization needs affine directors".into()))?;
    let corank_df = cp.jacobian(t, l).corank;
    if t == 0.0 && l == 0.0 {
        if corank_df > 0 {
            return Err(Error::OriginPlanePoint);
        }
        return Ok(CorankCharacterization {
            nu: None,
            focal_value: f64::INFINITY,
            is_eigenvalue: false,
            multiplicity: 0,
            corank_df,
            alternate: None,
        });
    }
    let branch = |use_l: bool| -> Result<((f64, f64), f64, usize)> {
        let (nu, focal) = if use_l { ((t / l, 1.0), 1.0 / l) } else { ((1.0, l / t), 1.0 / t) };
        let s = geom.shape_operator(nu)?;
        let mult = s
            .real_eigenvalues()
            .iter()
            .map(|&(mu, m)| {
                let close = (mu - focal).abs() <= EIGEN_MATCH_TOL * mu.abs().max(focal.abs());
                if close {
                    m
                } else {
                    0
                }
            })
            .sum();
        Ok((nu, focal, mult))
    };
    let use_l = l.abs() >= t.abs();
    let (nu, focal, multiplicity) = branch(use_l)?;
    let alternate = if t != 0.0 && l != 0.0 {
        let (_, _, m2) = branch(!use_l)?;
        (m2 != multiplicity).then_some((m2, m2 > 0))
    } else {
        None
    };
    Ok(CorankCharacterization {
        nu: Some(nu),
        focal_value: focal,
        is_eigenvalue: multiplicity > 0,
        multiplicity,
        corank_df,
        alternate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CongruenceLabel {
    Immersive,
    Fold,
    Cusp,
    Swallowtail,
    Butterfly,
    EllipticUmbilic,
    HyperbolicUmbilic,
    ParabolicUmbilic,
    Unresolved,
}

impl From<SingularityLabel> for CongruenceLabel {
    fn from(l: SingularityLabel) -> Self {
        match l {
            SingularityLabel::A1 => CongruenceLabel::Immersive,
            SingularityLabel::A2 => CongruenceLabel::Fold,
            SingularityLabel::A3 => CongruenceLabel::Cusp,
            SingularityLabel::A4 => CongruenceLabel::Swallowtail,
            SingularityLabel::A5 => CongruenceLabel::Butterfly,
            SingularityLabel::D4Minus => CongruenceLabel::EllipticUmbilic,
            SingularityLabel::D4Plus => CongruenceLabel::HyperbolicUmbilic,
            SingularityLabel::D5 => CongruenceLabel::ParabolicUmbilic,
            SingularityLabel::Regular | SingularityLabel::Unresolved => CongruenceLabel::Unresolved,
        }
    }
}

impl fmt::Display for CongruenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Classifies `F(u, t, l)` through the critical point of `Δ_p` at `u` with
/// `p = F(u, t, l)`.
pub fn classify_congruence_point(
    cp: &CongruencePoint,
    t: f64,
    l: f64,
    opts: &ClassifyOptions,
) -> Result<(CongruenceLabel, Classification)> {
    let geom = cp
        .geometry
        .as_deref()
        .ok_or_else(|| Error::Document("map labels need affine directors".into()))?;
    let p = cp.f(t, l);
    let c = classify_critical(geom, p, opts)?;
    Ok((c.label.into(), c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn exprs(s: [&str; 4]) -> [Expr; 4] {
        s.map(|e| parse(e).unwrap())
    }

    fn plane() -> SurfacePatch {
        SurfacePatch::from_sources(["u", "v", "0", "0"], ["0", "0", "1", "0"], Domain::square(1.0)).unwrap()
    }

    #[test]
    fn constant_directors() {
        let c = PlaneCongruence::explicit(plane(), exprs(["0", "0", "1", "0"]), exprs(["0", "0", "0", "1"]));
        assert_eq!(c.evaluate_f((0.0, 0.0), 2.0, 3.0).unwrap(), [0.0, 0.0, 2.0, 3.0]);
        assert_eq!(c.evaluate_f((0.5, 0.25), 0.0, 0.0).unwrap(), [0.5, 0.25, 0.0, 0.0]);
        let j = c.jacobian_f((0.3, 0.1), 5.0, -2.0).unwrap();
        assert!((j.det - 1.0).abs() < 1e-14);
        assert_eq!(j.corank, 0);
        let k = c.singular_conic((0.3, 0.1)).unwrap();
        assert_eq!(k.as_array(), [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(c.solve_singular_locus(5, 11, 3.0).unwrap().is_empty());
    }

    #[test]
    fn one_plus_l_example() {
        let c = PlaneCongruence::explicit(plane(), exprs(["0", "0", "1", "0"]), exprs(["u", "0", "0", "1"]));
        let k = c.singular_conic((0.2, -0.4)).unwrap();
        assert_eq!(k.as_array(), [0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let j = c.jacobian_f((0.2, -0.4), 0.7, -1.0).unwrap();
        assert_eq!(j.corank, 1);
        let j = c.jacobian_f((0.2, -0.4), 0.7, 3.0).unwrap();
        assert!((j.det - 4.0).abs() < 1e-12);
        let locus = c.solve_singular_locus(3, 5, 2.0).unwrap();
        assert!(!locus.is_empty());
        assert!(locus.iter().all(|s| (s.l + 1.0).abs() < 1e-12 && s.corank == 1));
    }

    #[test]
    fn quadratic_roots_cases() {
        assert_eq!(quadratic_roots(1.0, -3.0, 2.0), vec![1.0, 2.0]);
        assert_eq!(quadratic_roots(0.0, 2.0, 2.0), vec![-1.0]);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
    }

    #[test]
    fn origin_of_the_plane_is_immersive() {
        let s0 = SurfacePatch::from_sources(
            ["u", "v", "(u^2+v^2)/2", "u*v"],
            ["0", "0", "0", "1"],
            Domain::square(1.0),
        )
        .unwrap();
        let c = PlaneCongruence::affine(s0);
        let cp = c.at((0.0, 0.0)).unwrap();
        let r = corank_characterization(&cp, 0.0, 0.0).unwrap();
        assert_eq!(r.corank_df, 0);
        let (label, _) = classify_congruence_point(&cp, 0.0, 0.0, &ClassifyOptions::default()).unwrap();
        assert_eq!(label, CongruenceLabel::Immersive);
        let f = c.evaluate_f((0.0, 0.0), 0.0, 1.5).unwrap();
        for (a, b) in f.iter().zip([0.0, 0.0, 1.5, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
