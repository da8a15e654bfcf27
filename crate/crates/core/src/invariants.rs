//! Fundamental data of the adapted frame, the affine normal plane
//! `A = span{ξ̄₁, ξ̄₂}`, its shape operators and the conormal field `W`.

use nalgebra::{Matrix2, Matrix4x2, SymmetricEigen};

use crate::error::{Error, Result};
use crate::frame::{adapted_frame, AdaptedFrame, TransversalChoice, PIVOT_FLOOR};
use crate::jet::{solve4, Jet, JetVec4};
use crate::surface::SurfacePatch;

pub type Mat2 = [[f64; 2]; 2];

/// Coefficients of the structure equations in the frame `{X₁, X₂, ξ₁, ξ₂}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FundamentalData {
    /// `h¹(X_k, X_j)` as `h1[k][j]`.
    pub h1: Mat2,
    pub h2: Mat2,
    /// `τ_i^j(X_k)` as `tau[i][j][k]`.
    pub tau: [[[f64; 2]; 2]; 2],
    /// Matrices of `S₁`, `S₂` in `{X₁, X₂}`: `S_i X_k = Σ_m s[i][m][k] X_m`.
    pub s: [Mat2; 2],
    /// `∇_{X_k} X_j = Σ_m gamma[k][j][m] X_m`.
    pub gamma: [[[f64; 2]; 2]; 2],
    /// Largest mismatch when `D_{X_k}Y` is rebuilt from the coefficients.
    pub residual: f64,
}

/// All jet-valued data at one point: frame, structure coefficients, affine
/// normal plane and conormal.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub at: (f64, f64),
    pub frame: AdaptedFrame,
    pub fundamental: FundamentalData,
    /// `τ_i^2(X_k)` as jets, `tau2[i][k]`.
    pub tau2: [[Jet; 2]; 2],
    pub normal: AffineNormalData,
}

#[derive(Clone, Debug)]
pub struct AffineNormalData {
    pub xibar: [JetVec4; 2],
    /// Conormal: `W·x_u = W·x_v = W·ξ̄₁ = 0`, `W·ξ̄₂ = 1`.
    pub w: JetVec4,
    /// Shape operators of `ξ̄₁`, `ξ̄₂` in `{X₁, X₂}`.
    pub sbar: [Mat2; 2],
    /// `h̄¹`, `h̄²`: transversal components of `D_{X_k}X_j` in `{ξ̄₁, ξ̄₂}`.
    pub hbar: [Mat2; 2],
}

impl PointGeometry {
    /// Builds everything at `at` from jets of order `order` (at least 5).
    pub fn compute(
        patch: &SurfacePatch,
        sigma: &TransversalChoice,
        at: (f64, f64),
        order: usize,
    ) -> Result<PointGeometry> {
        if order < 5 {
            return Err(Error::InsufficientOrder {
                needed: 5,
                available: order,
            });
        }
        let frame = adapted_frame(patch, sigma, at, order)?;
        let (fundamental, tau2) = decompose(&frame)?;
        let normal = affine_normal(&frame, &tau2)?;
        Ok(PointGeometry {
            at,
            frame,
            fundamental,
            tau2,
            normal,
        })
    }

    /// Default transversal bundle and the patch's jet order.
    pub fn at(patch: &SurfacePatch, at: (f64, f64)) -> Result<PointGeometry> {
        PointGeometry::compute(patch, &TransversalChoice::Default, at, patch.jet_order)
    }

    pub fn x(&self) -> &JetVec4 {
        &self.frame.tangent.x
    }

    pub fn tangent(&self) -> [[f64; 4]; 2] {
        [self.frame.tangent.x1().value(), self.frame.tangent.x2().value()]
    }

    pub fn xibar_values(&self) -> [[f64; 4]; 2] {
        [self.normal.xibar[0].value(), self.normal.xibar[1].value()]
    }

    /// `ν = a ξ̄₁ + b ξ̄₂` at the base point.
    pub fn normal_vector(&self, nu: (f64, f64)) -> [f64; 4] {
        let [e1, e2] = self.xibar_values();
        std::array::from_fn(|i| nu.0 * e1[i] + nu.1 * e2[i])
    }

    pub fn shape_operator(&self, nu: (f64, f64)) -> Result<ShapeOperator> {
        if nu.0 == 0.0 && nu.1 == 0.0 {
            return Err(Error::ZeroNormalVector);
        }
        let [s1, s2] = self.normal.sbar;
        let m = std::array::from_fn(|r| std::array::from_fn(|c| nu.0 * s1[r][c] + nu.1 * s2[r][c]));
        Ok(ShapeOperator::new(m))
    }

    /// `2 × 4` matrix of `∂W/∂u`, `∂W/∂v` at the base point.
    pub fn conormal_derivative(&self) -> [[f64; 4]; 2] {
        [self.normal.w.d_u().value(), self.normal.w.d_v().value()]
    }
}

/// Expands `D_{X_k}Y` for `Y ∈ {X₁, X₂, ξ₁, ξ₂}` in the frame.
pub fn decompose(frame: &AdaptedFrame) -> Result<(FundamentalData, [[Jet; 2]; 2])> {
    let basis = frame.basis();
    let fields = &frame.tangent.fields;
    let mut fd = FundamentalData {
        h1: [[0.0; 2]; 2],
        h2: [[0.0; 2]; 2],
        tau: [[[0.0; 2]; 2]; 2],
        s: [[[0.0; 2]; 2]; 2],
        gamma: [[[0.0; 2]; 2]; 2],
        residual: 0.0,
    };
    let zero = Jet::zero(0);
    let mut tau2: [[Jet; 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| zero.clone()));
    let check = |d: &JetVec4, c: &[Jet; 4]| {
        let dv = d.value();
        let cols: [[f64; 4]; 4] = std::array::from_fn(|k| basis[k].value());
        let scale = dv.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        (0..4)
            .map(|r| (dv[r] - (0..4).map(|k| c[k].value() * cols[k][r]).sum::<f64>()).abs())
            .fold(0.0, f64::max)
            / scale
    };
    let mut residual: f64 = 0.0;
    for (k, f) in fields.iter().enumerate() {
        for j in 0..2 {
            let d = f.derive(basis[j]);
            let c = solve4(&basis, &d, PIVOT_FLOOR)?;
            residual = residual.max(check(&d, &c));
            fd.gamma[k][j] = [c[0].value(), c[1].value()];
            fd.h1[k][j] = c[2].value();
            fd.h2[k][j] = c[3].value();
        }
        for i in 0..2 {
            let d = f.derive(basis[2 + i]);
            let c = solve4(&basis, &d, PIVOT_FLOOR)?;
            residual = residual.max(check(&d, &c));
            fd.s[i][0][k] = -c[0].value();
            fd.s[i][1][k] = -c[1].value();
            fd.tau[i][0][k] = c[2].value();
            fd.tau[i][1][k] = c[3].value();
            tau2[i][k] = c[3].clone();
        }
    }
    fd.residual = residual;
    Ok((fd, tau2))
}

/// `ξ̄_i = ξ_i − τ_i²(X₁)X₁ − τ_i²(X₂)X₂`, its shape operators and `W`.
pub fn affine_normal(frame: &AdaptedFrame, tau2: &[[Jet; 2]; 2]) -> Result<AffineNormalData> {
    let x1 = frame.tangent.x1();
    let x2 = frame.tangent.x2();
    let xis = [&frame.xi1, &frame.xi2];
    let xibar: [JetVec4; 2] = std::array::from_fn(|i| {
        let t = &x1.mul_scalar(&tau2[i][0]) + &x2.mul_scalar(&tau2[i][1]);
        let ord = t.order();
        &xis[i].truncate(ord) - &t
    });
    let basis = [x1, x2, &xibar[0], &xibar[1]];
    let mut sbar = [[[0.0; 2]; 2]; 2];
    let mut hbar = [[[0.0; 2]; 2]; 2];
    for (k, f) in frame.tangent.fields.iter().enumerate() {
        for i in 0..2 {
            let c = solve4(&basis, &f.derive(&xibar[i]), PIVOT_FLOOR)?;
            sbar[i][0][k] = -c[0].value();
            sbar[i][1][k] = -c[1].value();
        }
        for j in 0..2 {
            let c = solve4(&basis, &f.derive(basis[j]), PIVOT_FLOOR)?;
            hbar[0][k][j] = c[2].value();
            hbar[1][k][j] = c[3].value();
        }
    }
    let w = conormal(&frame.tangent.xu, &frame.tangent.xv, &xibar)?;
    Ok(AffineNormalData {
        xibar,
        w,
        sbar,
        hbar,
    })
}

/// Solves `Mᵀ W = e₄` for `M = [x_u x_v ξ̄₁ ξ̄₂]`.
fn conormal(xu: &JetVec4, xv: &JetVec4, xibar: &[JetVec4; 2]) -> Result<JetVec4> {
    let ord = xibar[0].order().min(xibar[1].order());
    let cols = [xu, xv, &xibar[0], &xibar[1]];
    let rows: [JetVec4; 4] =
        std::array::from_fn(|r| JetVec4(std::array::from_fn(|k| cols[k].0[r].truncate(ord))));
    let rhs = JetVec4::constant([0.0, 0.0, 0.0, 1.0], ord);
    let w = solve4(&[&rows[0], &rows[1], &rows[2], &rows[3]], &rhs, PIVOT_FLOOR)?;
    Ok(JetVec4(w))
}

/// Real or complex spectrum of a 2×2 shape operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Spectrum {
    /// Eigenvalues in increasing order with unit eigenvectors (in the
    /// `{X₁, X₂}` coordinates); `double` when they coincide to tolerance.
    Real {
        values: [f64; 2],
        vectors: [[f64; 2]; 2],
        double: bool,
    },
    Complex { re: f64, im: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeOperator {
    pub matrix: Mat2,
    pub spectrum: Spectrum,
}

/// Relative tolerance for equal eigenvalues.
pub const MULTIPLICITY_TOL: f64 = 1e-8;

impl ShapeOperator {
    pub fn new(m: Mat2) -> Self {
        ShapeOperator {
            matrix: m,
            spectrum: spectrum(m),
        }
    }

    /// Real nonzero eigenvalues with their multiplicities.
    pub fn real_eigenvalues(&self) -> Vec<(f64, usize)> {
        match self.spectrum {
            Spectrum::Complex { .. } => vec![],
            Spectrum::Real { values, double, .. } => {
                if double {
                    vec![(0.5 * (values[0] + values[1]), 2)]
                } else {
                    vec![(values[0], 1), (values[1], 1)]
                }
            }
        }
    }
}

pub fn spectrum(m: Mat2) -> Spectrum {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    let scale = 1.0 + 2.0 * half.abs();
    if disc < 0.0 && disc.abs().sqrt() > MULTIPLICITY_TOL * scale {
        return Spectrum::Complex {
            re: half,
            im: (-disc).sqrt(),
        };
    }
    let r = disc.max(0.0).sqrt();
    // stable roots
    let (l1, l2) = if half >= 0.0 {
        let big = half + r;
        (if big != 0.0 { det / big } else { 0.0 }, big)
    } else {
        let big = half - r;
        (big, if big != 0.0 { det / big } else { 0.0 })
    };
    let values = if l1 <= l2 { [l1, l2] } else { [l2, l1] };
    let double = (values[1] - values[0]).abs() < MULTIPLICITY_TOL * (1.0 + values[0].abs() + values[1].abs());
    let vectors = if (m[0][1] - m[1][0]).abs() <= 1e-12 * (1.0 + m[0][1].abs()) {
        let e = SymmetricEigen::new(Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]));
        let mut pairs: Vec<(f64, [f64; 2])> = (0..2)
            .map(|k| (e.eigenvalues[k], [e.eigenvectors[(0, k)], e.eigenvectors[(1, k)]]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        [pairs[0].1, pairs[1].1]
    } else {
        [eigvec(m, values[0]), eigvec(m, values[1])]
    };
    Spectrum::Real {
        values,
        vectors,
        double,
    }
}

fn eigvec(m: Mat2, l: f64) -> [f64; 2] {
    // rows of (M − λI); take the null vector of the larger row
    let r1 = [m[0][0] - l, m[0][1]];
    let r2 = [m[1][0], m[1][1] - l];
    let r = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) { r1 } else { r2 };
    let v = [-r[1], r[0]];
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        [1.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

/// Largest principal angle between the affine normal planes computed with
/// two transversal bundles.
pub fn independence_check(
    patch: &SurfacePatch,
    at: (f64, f64),
    sigma_a: &TransversalChoice,
    sigma_b: &TransversalChoice,
) -> Result<f64> {
    let a = PointGeometry::compute(patch, sigma_a, at, 5)?;
    let b = PointGeometry::compute(patch, sigma_b, at, 5)?;
    Ok(plane_angle(a.xibar_values(), b.xibar_values()))
}

/// Largest principal angle between `span{a₀, a₁}` and `span{b₀, b₁}`.
pub fn plane_angle(a: [[f64; 4]; 2], b: [[f64; 4]; 2]) -> f64 {
    let qa = orthonormal(a);
    let qb = orthonormal(b);
    let resid = qb - qa * (qa.transpose() * qb);
    let s = resid.singular_values().max();
    s.clamp(0.0, 1.0).asin()
}

fn orthonormal(a: [[f64; 4]; 2]) -> Matrix4x2<f64> {
    let m = Matrix4x2::from_fn(|r, c| a[c][r]);
    m.qr().q()
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
    fn structure_at_origin() {
        let g = PointGeometry::compute(&s0(), &TransversalChoice::Default, (0.0, 0.0), 6).unwrap();
        let f = g.fundamental;
        for (a, b) in [(f.h2, [[1.0, 0.0], [0.0, 1.0]]), (f.h1, [[0.0, -1.0], [-1.0, 0.0]])] {
            for r in 0..2 {
                for c in 0..2 {
                    assert!((a[r][c] - b[r][c]).abs() < 1e-12, "{a:?}");
                }
            }
        }
        assert!(f.residual < 1e-12);
        let w = g.normal.w.value();
        for (x, y) in w.iter().zip([0.0, 0.0, 1.0, 0.0]) {
            assert!((x - y).abs() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn conormal_duality() {
        let g = PointGeometry::compute(&s0(), &TransversalChoice::Default, (0.4, -0.3), 6).unwrap();
        let w = g.normal.w.value();
        let d = |v: [f64; 4]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        assert!(d(g.frame.tangent.xu.value()).abs() < 1e-12);
        assert!(d(g.frame.tangent.xv.value()).abs() < 1e-12);
        assert!(d(g.normal.xibar[0].value()).abs() < 1e-12);
        assert!((d(g.normal.xibar[1].value()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_normal_rejected_and_linearity() {
        let g = PointGeometry::compute(&s0(), &TransversalChoice::Default, (0.2, 0.1), 6).unwrap();
        assert!(matches!(g.shape_operator((0.0, 0.0)), Err(Error::ZeroNormalVector)));
        let a = g.shape_operator((0.3, 0.7)).unwrap().matrix;
        let b = g.shape_operator((0.6, 1.4)).unwrap().matrix;
        for r in 0..2 {
            for c in 0..2 {
                assert!((b[r][c] - 2.0 * a[r][c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spectrum_cases() {
        match spectrum([[2.0, 0.0], [0.0, 2.0]]) {
            Spectrum::Real { values, double, .. } => {
                assert_eq!(values, [2.0, 2.0]);
                assert!(double);
            }
            s => panic!("{s:?}"),
        }
        assert!(matches!(spectrum([[0.0, -1.0], [1.0, 0.0]]), Spectrum::Complex { .. }));
        match spectrum([[1.0, 2.0], [2.0, -2.0]]) {
            Spectrum::Real { values, vectors, double } => {
                assert!(!double);
                assert!((values[0] + 3.0).abs() < 1e-14 && (values[1] - 2.0).abs() < 1e-14);
                let v = vectors[1];
                assert!((v[0] - 2.0 * v[1]).abs() < 1e-12);
            }
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn same_sigma_zero_angle() {
        let s = TransversalChoice::Default;
        assert!(independence_check(&s0(), (0.1, 0.2), &s, &s).unwrap() < 1e-14);
    }
}
