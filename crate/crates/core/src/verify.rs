//! Cross-checks of the closed forms against the finite-difference and
//! brute-force oracles on one patch.

use rayon::prelude::*;
use serde::Serialize;

use crate::distance::{hessian_closed_form, is_critical, morse_family_rank};
use crate::error::Result;
use crate::frame::TransversalChoice;
use crate::invariants::{independence_check, PointGeometry};
use crate::loci::semiumbilic_scan;
use crate::oracle::{conormal_value, delta_value, fd_jet, DEFAULT_STEP};
use crate::surface::SurfacePatch;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub limit: f64,
    pub samples: usize,
}

fn check(name: &'static str, values: &[f64], limit: f64, below: bool) -> CheckResult {
    let worst = if below {
        values.iter().copied().fold(0.0, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let pass = !values.is_empty() && values.iter().all(|v| if below { *v < limit } else { *v > limit });
    CheckResult {
        name,
        pass,
        worst,
        limit,
        samples: values.len(),
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

/// Per-point measurements on the inset grid.
struct PointChecks {
    frame: f64,
    grad_normal: f64,
    grad_offset: f64,
    agree: bool,
    hessian: f64,
    morse: f64,
    conormal: f64,
    dw_sigma_min: f64,
}

fn point_checks(patch: &SurfacePatch, at: (f64, f64), k: usize) -> Result<PointChecks> {
    let g = PointGeometry::at(patch, at)?;
    let x = g.x().value();
    // deterministic spread of normal directions and offsets
    let s = (k as f64 * 0.618_033_988_749_895).fract() * std::f64::consts::PI;
    let lambda = 0.2 + 0.6 * (k as f64 * 0.414_213_562_373_095).fract();
    let nu = (s.cos(), s.sin());
    let n = g.normal_vector(nu);
    let p: [f64; 4] = std::array::from_fn(|i| x[i] + lambda * n[i]);
    let crit = is_critical(&g, p, 1e-8)?;
    let [t1, _] = g.tangent();
    let q: [f64; 4] = std::array::from_fn(|i| p[i] + 0.5 * t1[i]);
    let off = is_critical(&g, q, 1e-8)?;

    let closed = hessian_closed_form(&g, lambda, nu)?.coordinates;
    let fd = fd_jet(|u| delta_value(patch, p, u), at, 2, DEFAULT_STEP, Some(&patch.domain))?.hessian();
    let hscale = closed.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let hessian = (0..4)
        .map(|i| rel(closed[i / 2][i % 2], fd[i / 2][i % 2], hscale))
        .fold(0.0, f64::max);

    // FD derivative of W along X_j, applied to X_k, against −h̄²(X_j, X_k)
    let mut dw = [[0.0; 4]; 2];
    for c in 0..4 {
        let j = fd_jet(|u| Ok(conormal_value(patch, u)?[c]), at, 1, DEFAULT_STEP, Some(&patch.domain))?;
        dw[0][c] = j.partial(1, 0);
        dw[1][c] = j.partial(0, 1);
    }
    let fields = &g.frame.tangent.fields;
    let tangent = g.tangent();
    let h2 = g.normal.hbar[1];
    let h2scale = h2.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut conormal = 0.0f64;
    for jj in 0..2 {
        let (a, b) = (fields[jj].alpha.value(), fields[jj].beta.value());
        let dxw: [f64; 4] = std::array::from_fn(|c| a * dw[0][c] + b * dw[1][c]);
        for kk in 0..2 {
            let lhs: f64 = (0..4).map(|c| dxw[c] * tangent[kk][c]).sum();
            conormal = conormal.max(rel(lhs, -h2[jj][kk], h2scale));
        }
    }
    let dw_exact = g.conormal_derivative();
    let m = nalgebra::SMatrix::<f64, 2, 4>::from_fn(|r, c| dw_exact[r][c]);
    Ok(PointChecks {
        frame: g.frame.residuals.max_abs(),
        grad_normal: crit.grad_norm,
        grad_offset: off.grad_norm,
        agree: crit.agree && off.agree,
        hessian,
        morse: morse_family_rank(&g, p)?,
        conormal,
        dw_sigma_min: m.singular_values().min(),
    })
}

/// Runs every cross-check on an `n × n` grid inset from the domain edge.
pub fn verify_patch(patch: &SurfacePatch, n: usize) -> Result<Vec<CheckResult>> {
    let d = patch.domain;
    let margin = 0.02 * (d.u[1] - d.u[0]).min(d.v[1] - d.v[0]);
    let pts = d.inset(margin).grid(n);
    let rows: Vec<PointChecks> = pts
        .par_iter()
        .enumerate()
        .map(|(k, &at)| point_checks(patch, at, k))
        .collect::<Result<_>>()?;
    let col = |f: fn(&PointChecks) -> f64| rows.iter().map(f).collect::<Vec<_>>();

    let center = ((d.u[0] + d.u[1]) / 2.0, (d.v[0] + d.v[1]) / 2.0);
    let [a, b] = PointGeometry::at(patch, center)?.frame.sigma_basis();
    let sheared = TransversalChoice::Constant(
        std::array::from_fn(|i| a[i] + 0.3 * b[i]),
        std::array::from_fn(|i| b[i] - 0.2 * a[i]),
    );
    let angles: Vec<f64> = pts
        .par_iter()
        .filter_map(|&at| independence_check(patch, at, &TransversalChoice::Default, &sheared).ok())
        .collect();
    let semi = semiumbilic_scan(patch, n, 1e-6)?;

    let disagreements = rows.iter().filter(|r| !r.agree).count() as f64;
    Ok(vec![
        check("frame-residuals", &col(|r| r.frame), 1e-9, true),
        check("critical-on-normal-plane", &col(|r| r.grad_normal), 1e-8, true),
        check("noncritical-off-plane", &col(|r| r.grad_offset), 1e-2, false),
        check("criticality-agreement", &[disagreements], 0.5, true),
        check("hessian-closed-vs-fd", &col(|r| r.hessian), 1e-5, true),
        check("morse-family-rank", &col(|r| r.morse), 1e-8, false),
        check("conormal-identity", &col(|r| r.conormal), 1e-5, true),
        check("conormal-rank", &col(|r| r.dw_sigma_min), 1e-8, false),
        check("normal-plane-independence", &angles, 1e-7, true),
        check(
            "semiumbilic-detectors",
            &[semi.symmetric_difference().len() as f64],
            0.5,
            true,
        ),
    ])
}
