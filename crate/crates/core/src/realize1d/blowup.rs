//! Collapsing intervals to points: the maps `R` and `S` and their
//! iterated composition.

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::map::{compose_segs, eval_segs, PiecewiseMap, Seg};
use crate::error::{AccumError, Result};
use crate::rational::{serde_q, Q};

/// `R_{ε,n,p}` collapses `[p - ε/n, p + ε/n]` to `p` and stretches the rest
/// of `[p - ε, p + ε]` by `n/(n-1)`; `S_{ε,n,p}` is its inverse off `p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Blowup {
    #[serde(with = "serde_q")]
    pub eps: Q,
    pub n: u64,
    #[serde(with = "serde_q")]
    pub p: Q,
}

pub fn blowup_maps(eps: Q, n: u64, p: Q) -> Result<Blowup> {
    if !eps.is_positive() {
        return Err(AccumError::InvalidArgument("blow-up radius must be positive".into()));
    }
    if n < 2 {
        return Err(AccumError::InvalidArgument("blow-up ratio n must be at least 2".into()));
    }
    Ok(Blowup { eps, n, p })
}

impl Blowup {
    fn nq(&self) -> Q {
        Q::from_integer(self.n.into())
    }

    fn inner(&self) -> Q {
        &self.eps / self.nq()
    }

    /// Collapse map `R`, defined on the whole line.
    pub fn r(&self, x: &Q) -> Q {
        let d = x - &self.p;
        let ad = d.abs();
        if ad <= self.inner() {
            self.p.clone()
        } else if ad <= self.eps {
            let s = if d.is_negative() { -Q::one() } else { Q::one() };
            let k = self.nq() / (self.nq() - Q::one());
            &self.p + s * k * (ad - self.inner())
        } else {
            x.clone()
        }
    }

    /// Expansion map `S`, with `S(p) = p`.
    pub fn s(&self, x: &Q) -> Q {
        let d = x - &self.p;
        let ad = d.abs();
        if d.is_zero() || ad > self.eps {
            x.clone()
        } else {
            let s = if d.is_negative() { -Q::one() } else { Q::one() };
            let k = (self.nq() - Q::one()) / self.nq();
            &self.p + s * (k * ad + self.inner())
        }
    }

    /// `R` on `[-1, 1]` as affine segments.
    pub fn r_segs(&self) -> Vec<Seg> {
        let (p, e, i) = (&self.p, &self.eps, self.inner());
        let k = self.nq() / (self.nq() - Q::one());
        clip(vec![
            Seg::identity(-Q::one() - e - Q::one(), p - e),
            Seg::new(p - e, p - &i, k.clone(), p - &k * (p - &i)),
            Seg::new(p - &i, p + &i, Q::zero(), p.clone()),
            Seg::new(p + &i, p + e, k.clone(), p - &k * (p + &i)),
            Seg::identity(p + e, Q::one() + e + Q::one()),
        ])
    }

    /// `S` on `[-1, 1]` as affine segments; the jump at `p` splits two
    /// segments that share the endpoint `p`.
    pub fn s_segs(&self) -> Vec<Seg> {
        let (p, e, i) = (&self.p, &self.eps, self.inner());
        let k = (self.nq() - Q::one()) / self.nq();
        clip(vec![
            Seg::identity(-Q::one() - e - Q::one(), p - e),
            Seg::new(p - e, p.clone(), k.clone(), p - &k * p - &i),
            Seg::new(p.clone(), p + e, k.clone(), p - &k * p + &i),
            Seg::identity(p + e, Q::one() + e + Q::one()),
        ])
    }
}

fn clip(segs: Vec<Seg>) -> Vec<Seg> {
    let (lo, hi) = (-Q::one(), Q::one());
    segs.into_iter()
        .filter_map(|s| {
            let l = if s.lo > lo { s.lo.clone() } else { lo.clone() };
            let h = if s.hi < hi { s.hi.clone() } else { hi.clone() };
            (l < h).then(|| Seg::new(l, h, s.a, s.b))
        })
        .collect()
}

/// The truncated blow-up factor `g_K = R_1 ∘ … ∘ R_K` together with its
/// inverse `f_K = S_K ∘ … ∘ S_1` off the blown points.
#[derive(Clone, Debug, Serialize)]
pub struct BlowupComposition {
    #[serde(with = "crate::rational::serde_q_vec")]
    pub points: Vec<Q>,
    #[serde(with = "crate::rational::serde_q_vec")]
    pub deltas: Vec<Q>,
    pub ns: Vec<u64>,
    /// `p_k`, the centre of the interval that collapses onto `q_k`.
    #[serde(with = "crate::rational::serde_q_vec")]
    pub centers: Vec<Q>,
    /// `ε_k = δ_k / n_k`.
    #[serde(with = "crate::rational::serde_q_vec")]
    pub radii: Vec<Q>,
    #[serde(skip)]
    g_prefix: Vec<Vec<Seg>>,
    #[serde(skip)]
    f_segs: Vec<Seg>,
}

fn dist_to_interval(x: &Q, lo: &Q, hi: &Q) -> Q {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        Q::zero()
    }
}

/// Blows up the ordered points one at a time, checking the distance
/// condition `δ_{k+1} < dist(f_k(q_{k+1}), ∂D ∪ g_k⁻¹{q_1..q_k})` at each step.
pub fn blowup_compose(points: &[Q], deltas: &[Q], ns: &[u64]) -> Result<BlowupComposition> {
    if points.len() != deltas.len() || points.len() != ns.len() {
        return Err(AccumError::InvalidArgument("points, deltas and ratios must have equal length".into()));
    }
    let one = Q::one();
    let mut maps: Vec<Blowup> = Vec::new();
    let mut centers: Vec<Q> = Vec::new();
    let mut radii: Vec<Q> = Vec::new();
    let mut g_prefix = vec![vec![Seg::identity(-one.clone(), one.clone())]];
    let mut f_segs = vec![Seg::identity(-one.clone(), one.clone())];
    for (k, ((q, d), &n)) in points.iter().zip(deltas).zip(ns).enumerate() {
        if q.abs() >= one {
            return Err(AccumError::InvalidArgument(format!("point {k} is not interior")));
        }
        if points[..k].contains(q) {
            return Err(AccumError::InvalidArgument(format!("point {k} repeats an earlier point")));
        }
        let p = maps.iter().fold(q.clone(), |x, m| m.s(&x));
        let mut room = &one - p.abs();
        for (c, r) in centers.iter().zip(&radii) {
            let dd = dist_to_interval(&p, &(c - r), &(c + r));
            if dd < room {
                room = dd;
            }
        }
        if d >= &room {
            return Err(AccumError::DistanceCondition {
                index: k,
                detail: format!("delta {d} is not below the available distance {room}"),
            });
        }
        let b = blowup_maps(d.clone(), n, p.clone())?;
        let g_next = compose_segs(g_prefix.last().expect("prefix is never empty"), &b.r_segs())?;
        f_segs = compose_segs(&b.s_segs(), &f_segs)?;
        g_prefix.push(g_next);
        radii.push(d / Q::from_integer(n.into()));
        centers.push(p);
        maps.push(b);
    }
    Ok(BlowupComposition {
        points: points.to_vec(),
        deltas: deltas.to_vec(),
        ns: ns.to_vec(),
        centers,
        radii,
        g_prefix,
        f_segs,
    })
}

/// `n_k = k + 2` and `δ_k = ε₀·2^{-k}` (1-based `k`), with `ε₀` a quarter of
/// the smallest gap among the points and the boundary.
pub fn default_schedule(points: &[Q]) -> Result<(Vec<Q>, Vec<u64>)> {
    let mut sorted: Vec<Q> = points.to_vec();
    sorted.push(-Q::one());
    sorted.push(Q::one());
    sorted.sort();
    let gap = sorted
        .windows(2)
        .map(|w| &w[1] - &w[0])
        .min()
        .ok_or_else(|| AccumError::InvalidArgument("no points".into()))?;
    if !gap.is_positive() {
        return Err(AccumError::InvalidArgument("blow-up points must be distinct and interior".into()));
    }
    let eps0 = gap / Q::from_integer(4.into());
    let mut deltas = Vec::new();
    let mut d = eps0;
    for _ in points {
        d /= Q::from_integer(2.into());
        deltas.push(d.clone());
    }
    let ns = (1..=points.len() as u64).map(|k| k + 2).collect();
    Ok((deltas, ns))
}

impl BlowupComposition {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `g_k(x)` for `0 ≤ k ≤ K` (`g_0` is the identity).
    pub fn g(&self, k: usize, x: &Q) -> Q {
        eval_segs(&self.g_prefix[k], x).unwrap_or_else(|| x.clone())
    }

    pub fn g_segs(&self, k: usize) -> &[Seg] {
        &self.g_prefix[k]
    }

    /// `π = g_K`.
    pub fn pi_segs(&self) -> &[Seg] {
        self.g_prefix.last().expect("prefix is never empty")
    }

    /// `f_K`, the inverse of `π` off the blown points.
    pub fn inverse_segs(&self) -> &[Seg] {
        &self.f_segs
    }

    pub fn pi(&self) -> PiecewiseMap {
        PiecewiseMap::from_segs(self.pi_segs()).expect("factor map tiles [-1, 1]")
    }

    pub fn inverse(&self, x: &Q) -> Q {
        eval_segs(&self.f_segs, x).unwrap_or_else(|| x.clone())
    }

    /// Closed intervals `[p_k - ε_k, p_k + ε_k]`.
    pub fn blown_intervals(&self) -> Vec<(Q, Q)> {
        self.centers.iter().zip(&self.radii).map(|(c, r)| (c - r, c + r)).collect()
    }

    /// Largest slope of `π`.
    pub fn lipschitz(&self) -> Q {
        self.pi_segs().iter().map(|s| s.a.abs()).max().unwrap_or_else(Q::one)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn single_point_collapse() {
        let b = blowup_compose(&[Q::zero()], &[q(1, 2)], &[2]).unwrap();
        assert_eq!(b.blown_intervals(), vec![(q(-1, 4), q(1, 4))]);
        for x in [q(-1, 4), q(0, 1), q(1, 5), q(1, 4)] {
            assert_eq!(b.g(1, &x), Q::zero());
        }
        assert_ne!(b.g(1, &q(3, 10)), Q::zero());
    }

    #[test]
    fn r_and_s_are_inverse_off_p() {
        let b = blowup_maps(q(1, 3), 3, q(1, 10)).unwrap();
        for k in -20..=20 {
            let x = q(k, 20);
            if x != b.p {
                assert_eq!(b.r(&b.s(&x)), x);
            }
        }
    }

    #[test]
    fn distance_condition_reports_index() {
        let err = blowup_compose(&[Q::zero(), q(1, 10)], &[q(1, 2), q(1, 2)], &[2, 2]).unwrap_err();
        assert!(matches!(err, AccumError::DistanceCondition { index: 1, .. }));
    }
}
