#![allow(dead_code)]

use clab_core::congruence::PlaneCongruence;
use clab_core::parse;
use clab_core::surface::{Domain, SurfacePatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BUMP_X: [&str; 4] = ["u", "v", "(u^2+v^2)/2+0.1*u^4", "u*v+0.05*v^3"];

pub fn s0() -> SurfacePatch {
    SurfacePatch::from_sources(["u", "v", "(u^2+v^2)/2", "u*v"], ["0", "0", "0", "1"], Domain::square(1.0)).unwrap()
}

pub fn s1() -> SurfacePatch {
    SurfacePatch::from_sources(["u", "v", "u^2", "v^2"], ["0", "0", "-1", "1"], Domain::square(1.0)).unwrap()
}

/// Quartic/cubic perturbation of S0 with a metric field tilted in (u, v),
/// so that cusps and ridges of the distance family are generic.
pub fn bump() -> SurfacePatch {
    SurfacePatch::from_sources(BUMP_X, ["0.3*u", "0.2*v", "0", "1"], Domain::square(1.0)).unwrap()
}

/// Same immersion with a metric field tilted in u only; carries a curve of
/// semiumbilic points.
pub fn perturbed() -> SurfacePatch {
    SurfacePatch::from_sources(BUMP_X, ["0", "0", "0.3*u", "1"], Domain::square(1.0)).unwrap()
}

pub fn four(src: [&str; 4]) -> [clab_core::Expr; 4] {
    src.map(|s| parse(s).unwrap())
}

pub fn constant_directors() -> PlaneCongruence {
    let x = SurfacePatch::from_sources(["u", "v", "0", "0"], ["0", "0", "1", "0"], Domain::square(1.0)).unwrap();
    PlaneCongruence::explicit(x, four(["0", "0", "1", "0"]), four(["0", "0", "0", "1"]))
}

pub fn one_plus_l() -> PlaneCongruence {
    let x = SurfacePatch::from_sources(["u", "v", "0", "0"], ["0", "0", "1", "0"], Domain::square(1.0)).unwrap();
    PlaneCongruence::explicit(x, four(["0", "0", "1", "0"]), four(["u", "0", "0", "1"]))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_point(r: &mut ChaCha8Rng, d: &Domain) -> (f64, f64) {
    (r.gen_range(d.u[0]..d.u[1]), r.gen_range(d.v[0]..d.v[1]))
}
