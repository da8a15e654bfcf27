//! Surface patches `x: U → R⁴` with a metric field `ξ`, and the bilinear form
//! `G(Y₁, Y₂) = det(x_u, x_v, D_{Y₂}Y₁, ξ)` with its normalized metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::jet::{det4, Jet, JetVec4};

pub const DEFAULT_JET_ORDER: usize = 10;

/// Smallest `|det G|` accepted as nondegenerate.
pub const DET_G_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub u: [f64; 2],
    pub v: [f64; 2],
}

impl Domain {
    pub fn new(u: [f64; 2], v: [f64; 2]) -> Self {
        Domain { u, v }
    }

    pub fn square(half: f64) -> Self {
        Domain::new([-half, half], [-half, half])
    }

    pub fn contains(&self, at: (f64, f64)) -> bool {
        let slack = 1e-12 * (1.0 + self.u[1].abs().max(self.v[1].abs()));
        at.0 >= self.u[0] - slack
            && at.0 <= self.u[1] + slack
            && at.1 >= self.v[0] - slack
            && at.1 <= self.v[1] + slack
    }

    /// `n × n` grid of points including the corners, row-major in `v`.
    pub fn grid(&self, n: usize) -> Vec<(f64, f64)> {
        self.grid2(n, n)
    }

    pub fn grid2(&self, nu: usize, nv: usize) -> Vec<(f64, f64)> {
        let us = linspace(self.u, nu);
        let vs = linspace(self.v, nv);
        vs.iter()
            .flat_map(|&v| us.iter().map(move |&u| (u, v)))
            .collect()
    }

    /// Shrinks the rectangle by `margin` on every side.
    pub fn inset(&self, margin: f64) -> Domain {
        Domain::new(
            [self.u[0] + margin, self.u[1] - margin],
            [self.v[0] + margin, self.v[1] - margin],
        )
    }
}

pub fn linspace(range: [f64; 2], n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (range[0] + range[1])],
        _ => (0..n)
            .map(|k| range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// How the metric is obtained from the form `G`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricNormalization {
    /// `g = G / det G`.
    #[default]
    Verbatim,
    /// `g = G / (det G)^{1/4}`; makes `det(X₁, X₂, ξ₁, ξ₂) = 1` hold for
    /// every metric field. Provided for comparison only.
    FourthRoot,
}

#[derive(Clone, Debug)]
pub struct SurfacePatch {
    pub x: [Expr; 4],
    pub xi: [Expr; 4],
    pub domain: Domain,
    pub jet_order: usize,
    pub normalization: MetricNormalization,
}

impl SurfacePatch {
    pub fn new(x: [Expr; 4], xi: [Expr; 4], domain: Domain) -> Self {
        SurfacePatch {
            x,
            xi,
            domain,
            jet_order: DEFAULT_JET_ORDER,
            normalization: MetricNormalization::Verbatim,
        }
    }

    /// Builds a patch from expression sources.
    pub fn from_sources(x: [&str; 4], xi: [&str; 4], domain: Domain) -> Result<Self> {
        Ok(SurfacePatch::new(parse_four(x)?, parse_four(xi)?, domain))
    }

    pub fn with_jet_order(mut self, order: usize) -> Self {
        self.jet_order = order;
        self
    }

    pub fn with_normalization(mut self, n: MetricNormalization) -> Self {
        self.normalization = n;
        self
    }

    pub fn check_point(&self, at: (f64, f64)) -> Result<()> {
        if self.domain.contains(at) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { u: at.0, v: at.1 })
        }
    }

    /// Jets of `x` and `ξ` about `at`.
    pub fn evaluate(&self, at: (f64, f64), order: usize) -> Result<(JetVec4, JetVec4)> {
        self.check_point(at)?;
        if order > self.jet_order {
            return Err(Error::InsufficientOrder {
                needed: order,
                available: self.jet_order,
            });
        }
        Ok((eval_four(&self.x, at, order)?, eval_four(&self.xi, at, order)?))
    }

    /// Value of `x` at a point (no domain check).
    pub fn point(&self, at: (f64, f64)) -> Result<[f64; 4]> {
        Ok(eval_four(&self.x, at, 0)?.value())
    }

    pub fn metric_g(&self, at: (f64, f64)) -> Result<MetricData> {
        let (x, xi) = self.evaluate(at, 2)?;
        let m = metric_jets(&x, &xi, at, self.normalization)?;
        Ok(m.values())
    }

    /// Evaluates the metric on an `n × n` grid and reports the first failure.
    pub fn check_convexity(&self, grid: (usize, usize)) -> ConvexityReport {
        let nu = grid.0.max(2);
        let nv = grid.1.max(2);
        for at in self.domain.grid2(nu, nv) {
            match self.metric_g(at) {
                Ok(m) if m.det_g > 0.0 => {}
                Ok(m) => {
                    return ConvexityReport::fail(at, format!("det G = {}", m.det_g));
                }
                Err(e) => return ConvexityReport::fail(at, e.to_string()),
            }
        }
        ConvexityReport {
            pass: true,
            witness: None,
            reason: None,
            points: nu * nv,
        }
    }
}

fn parse_four(src: [&str; 4]) -> Result<[Expr; 4]> {
    let [a, b, c, d] = src;
    Ok([parse(a)?, parse(b)?, parse(c)?, parse(d)?])
}

pub(crate) fn eval_four(e: &[Expr; 4], at: (f64, f64), order: usize) -> Result<JetVec4> {
    Ok(JetVec4([
        e[0].eval_jet(at, order)?,
        e[1].eval_jet(at, order)?,
        e[2].eval_jet(at, order)?,
        e[3].eval_jet(at, order)?,
    ]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityReport {
    pub pass: bool,
    pub witness: Option<(f64, f64)>,
    pub reason: Option<String>,
    pub points: usize,
}

impl ConvexityReport {
    fn fail(at: (f64, f64), reason: String) -> Self {
        ConvexityReport {
            pass: false,
            witness: Some(at),
            reason: Some(reason),
            points: 0,
        }
    }
}

/// `G`, the metric `g` and `det G` at a point, in the coordinate frame
/// `{x_u, x_v}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricData {
    pub big_g: [[f64; 2]; 2],
    pub g: [[f64; 2]; 2],
    pub det_g: f64,
    /// `ξ` was replaced by `−ξ` to make `G` positive definite.
    pub flipped: bool,
}

/// Jet-valued metric quantities.
#[derive(Clone, Debug)]
pub struct MetricJets {
    pub big_g: [[Jet; 2]; 2],
    pub g: [[Jet; 2]; 2],
    pub det_g: Jet,
    /// The metric field after the sign flip, if any.
    pub xi: JetVec4,
    pub flipped: bool,
}

impl MetricJets {
    pub fn values(&self) -> MetricData {
        let v = |m: &[[Jet; 2]; 2]| {
            [
                [m[0][0].value(), m[0][1].value()],
                [m[1][0].value(), m[1][1].value()],
            ]
        };
        MetricData {
            big_g: v(&self.big_g),
            g: v(&self.g),
            det_g: self.det_g.value(),
            flipped: self.flipped,
        }
    }
}

/// Computes `G_ij = det(x_u, x_v, x_ij, ξ)` and the metric, flipping `ξ` if
/// `G` comes out negative definite.
pub fn metric_jets(
    x: &JetVec4,
    xi: &JetVec4,
    at: (f64, f64),
    normalization: MetricNormalization,
) -> Result<MetricJets> {
    let xu = x.d_u();
    let xv = x.d_v();
    let xuu = xu.d_u();
    let xuv = xu.d_v();
    let xvv = xv.d_v();
    let mut g11 = det4([&xu, &xv, &xuu, xi]);
    let mut g12 = det4([&xu, &xv, &xuv, xi]);
    let mut g22 = det4([&xu, &xv, &xvv, xi]);
    let det = &g11.mul_jet(&g22) - &g12.mul_jet(&g12);
    let d0 = det.value();
    if d0.abs() < DET_G_FLOOR || d0 < 0.0 || !d0.is_finite() {
        return Err(Error::NotPositiveDefinite {
            u: at.0,
            v: at.1,
            det: d0,
        });
    }
    let flipped = g11.value() < 0.0;
    let xi = if flipped {
        g11 = g11.scale(-1.0);
        g12 = g12.scale(-1.0);
        g22 = g22.scale(-1.0);
        xi.scale(-1.0)
    } else {
        xi.clone()
    };
    let factor = match normalization {
        MetricNormalization::Verbatim => det.recip()?,
        MetricNormalization::FourthRoot => det.sqrt()?.sqrt()?.recip()?,
    };
    let g = [
        [g11.mul_jet(&factor), g12.mul_jet(&factor)],
        [g12.mul_jet(&factor), g22.mul_jet(&factor)],
    ];
    Ok(MetricJets {
        big_g: [[g11, g12.clone()], [g12, g22]],
        g,
        det_g: det,
        xi,
        flipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

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

    #[test]
    fn second_derivatives_at_origin() {
        let (x, _) = s0().evaluate((0.0, 0.0), 2).unwrap();
        let xu = x.d_u();
        let xv = x.d_v();
        assert_eq!(xu.value(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(xv.value(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(xu.d_u().value(), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(xu.d_v().value(), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(xv.d_v().value(), [0.0, 0.0, 1.0, 0.0]);

        let (x, _) = s1().evaluate((0.0, 0.0), 2).unwrap();
        assert_eq!(x.d_u().d_u().value(), [0.0, 0.0, 2.0, 0.0]);
        assert_eq!(x.d_v().d_v().value(), [0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn out_of_domain() {
        assert!(matches!(
            s0().evaluate((2.0, 0.0), 2),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn metric_examples() {
        let m = s0().metric_g((0.0, 0.0)).unwrap();
        assert_eq!(m.big_g, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(m.g, [[1.0, 0.0], [0.0, 1.0]]);
        let m = s1().metric_g((0.0, 0.0)).unwrap();
        assert_eq!(m.big_g, [[2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(m.g, [[0.5, 0.0], [0.0, 0.5]]);
        assert!(!m.flipped);
    }

    #[test]
    fn tangent_metric_field_is_rejected() {
        let mut p = s0();
        p.xi = parse_four(["0", "0", "1", "0"]).unwrap();
        assert!(matches!(
            p.metric_g((0.0, 0.0)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn opposite_metric_field_is_flipped() {
        let mut p = s1();
        let a = p.metric_g((0.3, -0.2)).unwrap();
        p.xi = parse_four(["0", "0", "1", "-1"]).unwrap();
        let b = p.metric_g((0.3, -0.2)).unwrap();
        assert!(b.flipped);
        assert_eq!(a.g, b.g);
    }

    #[test]
    fn convexity_reports() {
        assert!(s0().check_convexity((21, 21)).pass);
        assert!(s1().check_convexity((21, 21)).pass);
        let saddle = SurfacePatch::from_sources(
            ["u", "v", "u^2-v^2", "u*v"],
            ["0", "0", "0.3", "0.7"],
            Domain::square(1.0),
        )
        .unwrap();
        let r = saddle.check_convexity((5, 5));
        assert!(!r.pass);
        assert_eq!(r.witness, Some((-1.0, -1.0)));
    }
}
