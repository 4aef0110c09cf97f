//! Orbit iteration, entropy estimation and factor-map checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::map::PiecewiseMap;
use crate::rational::{to_f64, Q};

/// Anything that maps `[-1, 1]` to itself in double precision.
pub trait Map1d: Sync {
    fn apply(&self, x: f64) -> f64;
}

impl Map1d for PiecewiseMap {
    fn apply(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

impl<F: Fn(f64) -> f64 + Sync> Map1d for F {
    fn apply(&self, x: f64) -> f64 {
        self(x)
    }
}

/// An orbit kept exact while every visited piece is rational.
#[derive(Clone, Debug, PartialEq)]
pub enum OrbitTrace {
    Exact(Vec<Q>),
    Float(Vec<f64>),
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        match self {
            OrbitTrace::Exact(v) => v.len(),
            OrbitTrace::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            OrbitTrace::Exact(v) => v.iter().map(to_f64).collect(),
            OrbitTrace::Float(v) => v.clone(),
        }
    }
}

/// `n + 1` points `x0, F x0, …, Fⁿ x0`.
pub fn iterate(f: &PiecewiseMap, x0: &Q, n: usize) -> OrbitTrace {
    let mut exact = vec![x0.clone()];
    for _ in 0..n {
        match f.eval_exact(exact.last().expect("orbit is never empty")) {
            Some(y) => exact.push(y),
            None => {
                let mut fl: Vec<f64> = exact.iter().map(to_f64).collect();
                while fl.len() < n + 1 {
                    let y = f.eval(*fl.last().expect("orbit is never empty"));
                    fl.push(y);
                }
                return OrbitTrace::Float(fl);
            }
        }
    }
    OrbitTrace::Exact(exact)
}

pub fn iterate_f64(f: &dyn Map1d, x0: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(x0);
    for _ in 0..n {
        let y = f.apply(*out.last().expect("orbit is never empty"));
        out.push(y);
    }
    out
}

/// `samples` uniform points of `[-1, 1]` from a seeded ChaCha8 stream.
pub fn sample_points(samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyRow {
    pub eps: f64,
    pub n: usize,
    /// Estimated cardinality of an `(n, ε)`-separated set.
    pub separated: f64,
    /// `(1/n)·log(separated(n) / separated(0))`.
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyTable {
    pub samples: usize,
    pub seed: u64,
    pub horizon: usize,
    pub rows: Vec<EntropyRow>,
}

/// Running maximum over `i ≤ n` of `|(Fⁱ)'(x)|` along the orbit of `x`.
fn stretch_profile(f: &PiecewiseMap, x: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let (mut y, mut d, mut best) = (x, 1.0f64, 1.0f64);
    out.push(best);
    for _ in 0..n {
        let (v, dv) = f.eval_d(y);
        y = v;
        d *= dv;
        best = best.max(d.abs());
        out.push(best);
    }
    out
}

/// Separated-set counts for every horizon `0..=n` and every `ε`.
///
/// Along the curve `x ↦ (x, Fx, …, Fⁿx)` in the sup metric, points spaced
/// `ε` apart are `(n, ε)`-separated, and the curve's length is
/// `∫ maxᵢ |(Fⁱ)'(x)| dx`. The integral is a Monte-Carlo mean over the
/// sampled orbits, giving the count `1 + length/ε`. Rates divide by the
/// `n = 0` count so the `log(2/ε)` offset does not swamp short horizons.
pub fn entropy_table(f: &PiecewiseMap, eps_list: &[f64], n: usize, samples: usize, seed: u64) -> EntropyTable {
    let xs = sample_points(samples.max(1), seed);
    let profiles: Vec<Vec<f64>> = xs.par_iter().map(|&x| stretch_profile(f, x, n)).collect();
    let mut mean = vec![0.0f64; n + 1];
    for p in &profiles {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= xs.len() as f64;
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let count = |k: usize| 1.0 + 2.0 * mean[k] / eps;
        for k in 1..=n {
            rows.push(EntropyRow { eps, n: k, separated: count(k), rate: (count(k) / count(0)).ln() / k as f64 });
        }
    }
    EntropyTable { samples: xs.len(), seed, horizon: n, rows }
}

/// Entropy estimate at scale `eps` and horizon `n`.
pub fn estimate_entropy(f: &PiecewiseMap, eps: f64, n: usize, samples: usize, seed: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let t = entropy_table(f, &[eps], n, samples, seed);
    t.rows.last().map(|r| r.rate).unwrap_or(0.0)
}

/// Twelve significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.11e}")
}

impl EntropyTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,n,separated,rate\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", fmt_f(r.eps), r.n, fmt_f(r.separated), fmt_f(r.rate)));
        }
        s
    }
}

/// One row per start point: `x0, x1, …, xn`.
pub fn orbits_csv(f: &dyn Map1d, starts: &[f64], n: usize) -> String {
    let mut s = String::from("x0");
    for i in 1..=n {
        s.push_str(&format!(",x{i}"));
    }
    s.push('\n');
    for &x in starts {
        let row: Vec<String> = iterate_f64(f, x, n).into_iter().map(fmt_f).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `sup |π(F x) − f(π x)|` over seeded uniform samples.
pub fn check_semiconjugacy(big: &dyn Map1d, small: &dyn Map1d, pi: &dyn Map1d, samples: usize, seed: u64) -> f64 {
    let xs = sample_points(samples, seed);
    let errs: Vec<f64> = xs.par_iter().map(|&x| (pi.apply(big.apply(x)) - small.apply(pi.apply(x))).abs()).collect();
    errs.into_iter().fold(0.0, f64::max)
}
