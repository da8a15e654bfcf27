//! The adapted frame: a `g`-orthonormal tangent frame `{X₁, X₂}` and the
//! unique transversal frame `{ξ₁, ξ₂}` of a transversal plane bundle `σ`
//! with `det(X₁, X₂, ξ₁, ξ₂) = 1`, `h¹(X₁,X₁) = 0`, `h²(X₁,X₂) = 0`,
//! `h²(X₁,X₁) = h²(X₂,X₂) = 1` and `ξ₁ + ξ` tangent.

use crate::error::{Error, Result};
use crate::jet::{solve4, Jet, JetVec4};
use crate::surface::{metric_jets, MetricJets, SurfacePatch};

/// Pivot floor for the 4×4 decompositions, relative to the largest entry.
pub const PIVOT_FLOOR: f64 = 1e-13;

/// Smallest normalized `|det(X₁, X₂, n₁, n₂)|` for a transversal bundle.
pub const TRANSVERSAL_FLOOR: f64 = 1e-10;

/// Tolerance on `|b′₁₂|` and `|b′₂₂ − b′₁₁|` relative to `|b′₁₁|`.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Choice of the auxiliary transversal plane bundle `σ`.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum TransversalChoice {
    /// Euclidean orthogonal complement of the tangent plane.
    #[default]
    Default,
    /// A constant plane spanned by two vectors.
    Constant([f64; 4], [f64; 4]),
}

/// A tangent field `α ∂_u + β ∂_v` together with its vector in R⁴.
#[derive(Clone, Debug)]
pub struct TangentField {
    pub alpha: Jet,
    pub beta: Jet,
    pub vector: JetVec4,
}

impl TangentField {
    /// Directional derivative `D_X Y`.
    pub fn derive(&self, y: &JetVec4) -> JetVec4 {
        y.directional(&self.alpha, &self.beta)
    }

    pub fn derive_scalar(&self, f: &Jet) -> Jet {
        &f.d_u().mul_jet(&self.alpha) + &f.d_v().mul_jet(&self.beta)
    }
}

/// Jets of the surface and the `g`-orthonormal tangent frame.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub x: JetVec4,
    pub xu: JetVec4,
    pub xv: JetVec4,
    pub metric: MetricJets,
    pub fields: [TangentField; 2],
}

impl TangentFrame {
    pub fn x1(&self) -> &JetVec4 {
        &self.fields[0].vector
    }

    pub fn x2(&self) -> &JetVec4 {
        &self.fields[1].vector
    }
}

/// `X₁ = x_u / √g₁₁` and its Gram-Schmidt completion.
pub fn tangent_frame(patch: &SurfacePatch, at: (f64, f64), order: usize) -> Result<TangentFrame> {
    let (x, xi) = patch.evaluate(at, order)?;
    let metric = metric_jets(&x, &xi, at, patch.normalization)?;
    let xu = x.d_u();
    let xv = x.d_v();
    let [[g11, g12], [_, g22]] = &metric.g;
    let a1 = g11.sqrt()?.recip()?;
    let ratio = g12.div_jet(g11)?;
    let schur = g22 - &ratio.mul_jet(g12);
    let b2 = schur.sqrt()?.recip()?;
    let a2 = ratio.mul_jet(&b2).scale(-1.0);
    let zero = Jet::zero(a1.order());
    let f1 = TangentField {
        vector: xu.mul_scalar(&a1),
        alpha: a1,
        beta: zero,
    };
    let f2 = TangentField {
        vector: &xu.mul_scalar(&a2) + &xv.mul_scalar(&b2),
        alpha: a2,
        beta: b2,
    };
    Ok(TangentFrame {
        x,
        xu,
        xv,
        metric,
        fields: [f1, f2],
    })
}

/// An orthonormal basis of the Euclidean orthogonal complement of
/// `span{x_u, x_v}`, as smooth jet fields.
pub fn default_transversal(xu: &JetVec4, xv: &JetVec4) -> Result<[JetVec4; 2]> {
    let order = xu.order().min(xv.order());
    // Coordinate axes completing the tangent plane best at the base point.
    let (u0, v0) = (xu.value(), xv.value());
    let mut best = (0, 1, -1.0);
    for a in 0..4 {
        for b in (a + 1)..4 {
            let mut ea = [0.0; 4];
            let mut eb = [0.0; 4];
            ea[a] = 1.0;
            eb[b] = 1.0;
            let d = det4_values([u0, v0, ea, eb]).abs();
            if d > best.2 {
                best = (a, b, d);
            }
        }
    }
    if best.2 <= 0.0 {
        return Err(Error::NotTransversal { det: 0.0 });
    }
    let gram = [
        [xu.dot(xu), xu.dot(xv)],
        [xu.dot(xv), xv.dot(xv)],
    ];
    let det = &gram[0][0].mul_jet(&gram[1][1]) - &gram[0][1].mul_jet(&gram[0][1]);
    let inv_det = det.recip()?;
    let project = |axis: usize| -> JetVec4 {
        let mut e = [0.0; 4];
        e[axis] = 1.0;
        let e = JetVec4::constant(e, order);
        let pu = xu.0[axis].clone();
        let pv = xv.0[axis].clone();
        // coefficients of the tangent projection: Gram⁻¹ [x_u·e, x_v·e]
        let cu = (&gram[1][1].mul_jet(&pu) - &gram[0][1].mul_jet(&pv)).mul_jet(&inv_det);
        let cv = (&gram[0][0].mul_jet(&pv) - &gram[0][1].mul_jet(&pu)).mul_jet(&inv_det);
        &e - &(&xu.mul_scalar(&cu) + &xv.mul_scalar(&cv))
    };
    let n1 = project(best.0);
    let n1 = n1.mul_scalar(&n1.dot(&n1).sqrt()?.recip()?);
    let m2 = project(best.1);
    let m2 = &m2 - &n1.mul_scalar(&n1.dot(&m2));
    let n2 = m2.mul_scalar(&m2.dot(&m2).sqrt()?.recip()?);
    Ok([n1, n2])
}

pub(crate) fn det4_values(cols: [[f64; 4]; 4]) -> f64 {
    nalgebra::Matrix4::from_fn(|r, c| cols[c][r]).determinant()
}

/// The constructed frame at a point with its condition residuals.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    pub tangent: TangentFrame,
    pub xi1: JetVec4,
    pub xi2: JetVec4,
    /// The metric field after any sign flip.
    pub xi: JetVec4,
    pub sigma: [JetVec4; 2],
    pub residuals: FrameResiduals,
}

impl AdaptedFrame {
    pub fn sigma_basis(&self) -> [[f64; 4]; 2] {
        [self.sigma[0].value(), self.sigma[1].value()]
    }

    /// `[X₁, X₂, ξ₁, ξ₂]` as column references.
    pub fn basis(&self) -> [&JetVec4; 4] {
        [self.tangent.x1(), self.tangent.x2(), &self.xi1, &self.xi2]
    }
}

/// Violations of the five frame conditions at the base point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameResiduals {
    /// `det(X₁, X₂, ξ₁, ξ₂) − 1`.
    pub det: f64,
    /// `h¹(X₁, X₁)`.
    pub h1_11: f64,
    /// `h²(X₁, X₂)`.
    pub h2_12: f64,
    /// `max |h²(Xᵢ, Xᵢ) − 1|`.
    pub h2_diag: f64,
    /// Size of the `σ`-component of `ξ₁ + ξ`.
    pub sigma_part: f64,
}

impl FrameResiduals {
    pub fn as_array(&self) -> [f64; 5] {
        [self.det, self.h1_11, self.h2_12, self.h2_diag, self.sigma_part]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Builds the adapted frame for the transversal bundle `sigma`.
pub fn adapted_frame(
    patch: &SurfacePatch,
    sigma: &TransversalChoice,
    at: (f64, f64),
    order: usize,
) -> Result<AdaptedFrame> {
    let tangent = tangent_frame(patch, at, order)?;
    let ord = tangent.x1().order();
    let sigma = match sigma {
        TransversalChoice::Default => default_transversal(&tangent.xu, &tangent.xv)?,
        TransversalChoice::Constant(a, b) => {
            [JetVec4::constant(*a, ord), JetVec4::constant(*b, ord)]
        }
    };
    let (x1, x2) = (tangent.x1(), tangent.x2());
    let cols = [x1.value(), x2.value(), sigma[0].value(), sigma[1].value()];
    let norms: f64 = cols.iter().map(norm).product();
    let tdet = det4_values(cols).abs() / norms.max(f64::MIN_POSITIVE);
    if tdet <= TRANSVERSAL_FLOOR || !tdet.is_finite() {
        return Err(Error::NotTransversal { det: tdet });
    }

    // ξ₁: the σ-component of −ξ.
    let xi = tangent.metric.xi.truncate(ord);
    let minus_xi = xi.scale(-1.0);
    let c = solve4(&[x1, x2, &sigma[0], &sigma[1]], &minus_xi, PIVOT_FLOOR)?;
    let xi1 = &sigma[0].mul_scalar(&c[2]) + &sigma[1].mul_scalar(&c[3]);

    // ξ₂′: the σ basis vector least aligned with ξ₁.
    let xi1v = xi1.value();
    let cosine = |n: &JetVec4| {
        let nv = n.value();
        dot(&nv, &xi1v).abs() / (norm(&nv) * norm(&xi1v)).max(f64::MIN_POSITIVE)
    };
    let xi2p = if cosine(&sigma[0]) <= cosine(&sigma[1]) {
        sigma[0].clone()
    } else {
        sigma[1].clone()
    };

    let [f1, f2] = &tangent.fields;
    let d11 = f1.derive(x1);
    let d12 = f1.derive(x2);
    let d22 = f2.derive(x2);
    let basis_p = [x1, x2, &xi1, &xi2p];
    let e11 = solve4(&basis_p, &d11, PIVOT_FLOOR)?;
    let e12 = solve4(&basis_p, &d12, PIVOT_FLOOR)?;
    let e22 = solve4(&basis_p, &d22, PIVOT_FLOOR)?;
    let alpha = e11[2].clone();
    let beta = e11[3].clone();
    let b11 = beta.value();
    if b11.abs() < 1e-10 {
        return Err(Error::DegenerateNormalization(format!(
            "scale factor {b11:e} at ({}, {})",
            at.0, at.1
        )));
    }
    let b12 = e12[3].value();
    let b22 = e22[3].value();
    if b12.abs() > NORMALIZATION_TOL * b11.abs() || (b22 - b11).abs() > NORMALIZATION_TOL * b11.abs()
    {
        return Err(Error::DegenerateNormalization(format!(
            "b'12 = {b12:e}, b'22 - b'11 = {:e} at ({}, {})",
            b22 - b11,
            at.0,
            at.1
        )));
    }
    let ord2 = alpha.order();
    let xi1 = xi1.truncate(ord2);
    let xi2 = &xi1.mul_scalar(&alpha) + &xi2p.truncate(ord2).mul_scalar(&beta);

    // Residuals, computed in the final basis.
    let basis = [x1, x2, &xi1, &xi2];
    let h11 = solve4(&basis, &d11, PIVOT_FLOOR)?;
    let h12 = solve4(&basis, &d12, PIVOT_FLOOR)?;
    let h22 = solve4(&basis, &d22, PIVOT_FLOOR)?;
    let det = det4_values([x1.value(), x2.value(), xi1.value(), xi2.value()]) - 1.0;
    let sum = &xi1 + &xi.truncate(ord2);
    let s = solve4(&[x1, x2, &sigma[0], &sigma[1]], &sum, PIVOT_FLOOR)?;
    let residuals = FrameResiduals {
        det,
        h1_11: h11[2].value(),
        h2_12: h12[3].value(),
        h2_diag: (h11[3].value() - 1.0).abs().max((h22[3].value() - 1.0).abs()),
        sigma_part: s[2].value().hypot(s[3].value()),
    };
    Ok(AdaptedFrame {
        tangent,
        xi1,
        xi2,
        xi,
        sigma,
        residuals,
    })
}

pub(crate) fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64; 4]) -> f64 {
    dot(a, a).sqrt()
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

    fn s1() -> SurfacePatch {
        SurfacePatch::from_sources(
            ["u", "v", "u^2", "v^2"],
            ["0", "0", "-1", "1"],
            Domain::square(1.0),
        )
        .unwrap()
    }

    fn close(a: [f64; 4], b: [f64; 4], tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn tangent_frame_examples() {
        let t = tangent_frame(&s0(), (0.0, 0.0), 3).unwrap();
        assert!(close(t.x1().value(), [1.0, 0.0, 0.0, 0.0], 1e-15));
        assert!(close(t.x2().value(), [0.0, 1.0, 0.0, 0.0], 1e-15));
        let t = tangent_frame(&s1(), (0.0, 0.0), 3).unwrap();
        let r2 = 2f64.sqrt();
        assert!(close(t.x1().value(), [r2, 0.0, 0.0, 0.0], 1e-15));
        assert!(close(t.x2().value(), [0.0, r2, 0.0, 0.0], 1e-15));
    }

    #[test]
    fn tangent_frame_is_orthonormal() {
        let p = s1();
        let t = tangent_frame(&p, (0.4, -0.7), 3).unwrap();
        let g = t.metric.values().g;
        let coords = |f: &TangentField| [f.alpha.value(), f.beta.value()];
        let ip = |a: [f64; 2], b: [f64; 2]| {
            a[0] * (g[0][0] * b[0] + g[0][1] * b[1]) + a[1] * (g[1][0] * b[0] + g[1][1] * b[1])
        };
        let (c1, c2) = (coords(&t.fields[0]), coords(&t.fields[1]));
        assert!((ip(c1, c1) - 1.0).abs() < 1e-12);
        assert!(ip(c1, c2).abs() < 1e-12);
        assert!((ip(c2, c2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_transversal_at_origin() {
        for p in [s0(), s1()] {
            let f = adapted_frame(&p, &TransversalChoice::Default, (0.0, 0.0), 4).unwrap();
            let [n1, n2] = f.sigma_basis();
            assert!(close(n1, [0.0, 0.0, 1.0, 0.0], 1e-15));
            assert!(close(n2, [0.0, 0.0, 0.0, 1.0], 1e-15));
        }
    }

    #[test]
    fn default_transversal_is_normal() {
        let f = adapted_frame(&s0(), &TransversalChoice::Default, (0.3, 0.8), 4).unwrap();
        let [n1, n2] = f.sigma_basis();
        for t in [f.tangent.xu.value(), f.tangent.xv.value()] {
            assert!(dot(&n1, &t).abs() < 1e-14);
            assert!(dot(&n2, &t).abs() < 1e-14);
        }
    }

    #[test]
    fn adapted_frame_at_origin() {
        let f = adapted_frame(&s0(), &TransversalChoice::Default, (0.0, 0.0), 4).unwrap();
        assert!(close(f.xi1.value(), [0.0, 0.0, 0.0, -1.0], 1e-14));
        assert!(close(f.xi2.value(), [0.0, 0.0, 1.0, 0.0], 1e-14));
        assert!(f.residuals.max_abs() < 1e-12);
    }

    #[test]
    fn tangent_sigma_is_not_transversal() {
        let sigma = TransversalChoice::Constant([1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            adapted_frame(&s0(), &sigma, (0.0, 0.0), 4),
            Err(Error::NotTransversal { .. })
        ));
    }

    #[test]
    fn frame_does_not_depend_on_sigma_basis() {
        let p = s0();
        let at = (0.35, -0.6);
        let a = TransversalChoice::Constant([0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]);
        let b = TransversalChoice::Constant([0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 2.0, -1.0]);
        let fa = adapted_frame(&p, &a, at, 4).unwrap();
        let fb = adapted_frame(&p, &b, at, 4).unwrap();
        assert!(close(fa.xi1.value(), fb.xi1.value(), 1e-12));
        assert!(close(fa.xi2.value(), fb.xi2.value(), 1e-12));
    }
}
