//! Shared fixtures for the integration suites: reference root tuples,
//! deterministic random draws, finite-difference oracles and small
//! expression-field builders.

#![allow(dead_code)]

use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsep_core::{Domain, ExprField, ScalarField, Scope};

/// The reference elliptic configuration used throughout.
pub const ROOTS: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];

/// Three disjoint unit-gap intervals for ad-hoc family constructions.
pub const INTERVALS: [(f64, f64); 3] = [(0.1, 0.9), (1.1, 1.9), (2.1, 2.9)];

pub fn interval_domain() -> Domain {
    Domain::new(vec![0.1, 1.1, 2.1], vec![0.9, 1.9, 2.9], 0.05).expect("static domain")
}

/// Parse an expression over coordinates `q1,q2,q3` into a shareable field.
pub fn field(src: &str) -> Arc<dyn ScalarField> {
    let scope = Scope::new(vec!["q1", "q2", "q3"], Vec::<&str>::new()).expect("static scope");
    Arc::new(ExprField::parse(src, &scope, vec![]).expect("expression parses"))
}

/// Relative deviation with an absolute floor of one.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Uniform draw in [lo, hi).
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Five strictly ordered roots with bounded spread and a minimum gap, the
/// regime in which the elliptic constructions stay well-conditioned.
pub fn random_root_tuple(rng: &mut ChaCha8Rng) -> [f64; 5] {
    let start = uniform(rng, -2.0, 1.0);
    let mut out = [0.0; 5];
    let mut acc = start;
    for slot in &mut out {
        *slot = acc;
        acc += uniform(rng, 0.8, 1.4);
    }
    out
}

/// A box inset from each side by `frac` of the side length; interior
/// sampling keeps curvature scales (which blow up at the chart walls)
/// representative of where solutions actually live.
pub fn inset_box(domain: &Domain, frac: f64) -> Domain {
    let n = domain.lo.len();
    Domain::new(
        (0..n).map(|i| domain.lo[i] + frac * (domain.hi[i] - domain.lo[i])).collect(),
        (0..n).map(|i| domain.hi[i] - frac * (domain.hi[i] - domain.lo[i])).collect(),
        domain.min_separation,
    )
    .expect("inset box is a valid domain")
}

/// Central-difference gradient of a scalar function.
pub fn fd_grad(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian (full symmetric matrix, row-major).
pub fn fd_hess(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            let mut mp = p.to_vec();
            let mut mm = p.to_vec();
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            out[i * n + j] = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
        }
    }
    out
}
