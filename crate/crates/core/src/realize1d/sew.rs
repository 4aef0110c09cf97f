//! Truncated blow-and-sew on the interval.
//!
//! The base model's innermost atom becomes a tent map `f`. For each of the
//! first `M` children a periodic orbit of `f` is chosen whose length and
//! return count approximate the child's scale. Its points, and optionally
//! their preimages up to a fixed depth, are blown up into intervals. `F`
//! then acts as `π⁻¹ ∘ f ∘ π` off the intervals, as a radial push on the
//! outer half of each interval, and as a tower over the child's own
//! realization on the inner half.
//!
//! A finite set of blown points is never backward invariant, so `F` would
//! jump at the unblown preimages of blown points. Each jump is replaced by
//! an affine bridge of width `2η`, which keeps `F` continuous and costs at
//! most `2·Lip(f)·Lip(π)·η` in the factor relation. That bound is stored
//! with the realization.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::blowup::{blowup_compose, default_schedule, BlowupComposition};
use super::map::{compose_segs, find_seg, slope_sign, Formula, Piece, PiecewiseMap, Seg};
use super::orbits::{search_orbits, OrbitQuery, PeriodicOrbit};
use crate::entmodel::{EntropyModel, Family, Node};
use crate::error::{AccumError, Result};
use crate::rational::{serde_q, to_f64, Q};
use crate::seqalg::ScalarSeq;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealizePlan {
    /// Number of children sewn in (`M`).
    pub orbits: usize,
    /// Sewing levels realized (`D`); deeper levels use their base atom.
    pub depth: usize,
    pub seed: u64,
    /// Longest orbit considered when matching a scale.
    pub max_period: usize,
    /// Preimage levels of the chosen orbits that are blown up as well.
    pub preimage_depth: usize,
}

impl Default for RealizePlan {
    fn default() -> Self {
        RealizePlan { orbits: 3, depth: 1, seed: 0, max_period: 64, preimage_depth: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleMatch {
    pub copy: u64,
    #[serde(with = "serde_q")]
    pub requested: Q,
    pub period: usize,
    pub xi: u32,
    #[serde(with = "serde_q")]
    pub achieved: Q,
    /// Entropy of the child's realization.
    pub child_entropy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlownPoint {
    #[serde(with = "serde_q")]
    pub q: Q,
    #[serde(with = "serde_q")]
    pub center: Q,
    #[serde(with = "serde_q")]
    pub radius: Q,
    /// Index of the blown point `f(q)`.
    pub image: usize,
    /// Sign of `f'(q)`.
    pub sigma: i8,
    /// `(tower, position)` for orbit points.
    pub orbit: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tower {
    /// Blown-point indices in dynamical order.
    pub points: Vec<usize>,
    /// Reflection parity of the chart on each level.
    pub rho: Vec<bool>,
    pub xi: u32,
    pub child: PiecewiseMap,
    pub child_entropy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Bridge {
    #[serde(with = "serde_q")]
    pub lo: Q,
    #[serde(with = "serde_q")]
    pub hi: Q,
    /// Blown point whose interval the bridge crosses.
    pub target: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Realization {
    pub map: PiecewiseMap,
    pub base: PiecewiseMap,
    pub pi: PiecewiseMap,
    pub blowup: Option<BlowupComposition>,
    pub points: Vec<BlownPoint>,
    pub towers: Vec<Tower>,
    pub bridges: Vec<Bridge>,
    pub scales: Vec<ScaleMatch>,
    /// Branch count of the base tent (1 means the identity).
    pub base_tent: u64,
    pub base_entropy: f64,
    /// True when a composite base was replaced by its innermost atom.
    pub base_collapsed: bool,
    /// Certified bound on `|π F − f π|`.
    #[serde(with = "serde_q")]
    pub semiconjugacy_bound: Q,
}

/// Odd branch count `N` (1 for the identity) with `log N` closest to `h`.
pub fn atom_tent(h: &Q) -> Result<u64> {
    let hf = to_f64(h);
    if !(0.0..=16.0).contains(&hf) {
        return Err(AccumError::Realization(format!("atom entropy {hf} is outside the tent range [0, 16]")));
    }
    let t = hf.exp();
    let mut lo = t.floor() as u64;
    if lo % 2 == 0 {
        lo = lo.saturating_sub(1);
    }
    let lo = lo.max(1);
    let hi = lo + 2;
    let err = |n: u64| ((n as f64).ln() - hf).abs();
    Ok(if err(lo) <= err(hi) { lo } else { hi })
}

fn tent_or_identity(n: u64) -> Result<PiecewiseMap> {
    if n == 1 {
        Ok(PiecewiseMap::identity())
    } else {
        PiecewiseMap::tent(n)
    }
}

fn atom_entropy(m: &EntropyModel) -> Q {
    match m.base_chain().last().map(|x| x.node().clone()) {
        Some(Node::Atom { h_top, .. }) => h_top,
        _ => unreachable!("base chains end in an atom"),
    }
}

/// `(|θ|, ξ)` pairs with `ξ = round(s·|θ|)` and `1 ≤ ξ ≤ |θ|`, best match first.
pub fn scale_candidates(s: &Q, max_period: usize) -> Vec<(usize, u32)> {
    let half = Q::new(1.into(), 2.into());
    let mut v: Vec<(Q, usize, u32)> = Vec::new();
    for p in 1..=max_period {
        let pq = Q::from_integer(p.into());
        let xi = (s * &pq + &half).floor().to_integer();
        let Ok(xi) = u32::try_from(xi) else { continue };
        if xi == 0 || xi as usize > p {
            continue;
        }
        let err = (Q::from_integer(xi.into()) / &pq - s).abs();
        v.push((err, p, xi));
    }
    v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    v.into_iter().map(|(_, p, x)| (p, x)).collect()
}

pub fn realize(model: &EntropyModel, plan: &RealizePlan) -> Result<Realization> {
    match model.node() {
        Node::Atom { h_top, .. } => plain(h_top, false),
        Node::Blow { .. } if plan.depth == 0 => plain(&atom_entropy(model), true),
        Node::Blow { base, children, scale, .. } => sew(base, children, scale, plan),
    }
}

fn plain(h: &Q, collapsed: bool) -> Result<Realization> {
    let n = atom_tent(h)?;
    let map = tent_or_identity(n)?;
    Ok(Realization {
        map: map.clone(),
        base: map,
        pi: PiecewiseMap::identity(),
        blowup: None,
        points: Vec::new(),
        towers: Vec::new(),
        bridges: Vec::new(),
        scales: Vec::new(),
        base_tent: n,
        base_entropy: (n as f64).ln(),
        base_collapsed: collapsed,
        semiconjugacy_bound: Q::zero(),
    })
}

struct Chosen {
    orbit: PeriodicOrbit,
    xi: u32,
    child: Realization,
}

fn choose_orbits(f: &PiecewiseMap, children: &Family, scale: &ScalarSeq, plan: &RealizePlan) -> Result<(Vec<Chosen>, Vec<ScaleMatch>)> {
    let child_plan = RealizePlan { depth: plan.depth - 1, ..plan.clone() };
    let mut taken: Vec<Q> = Vec::new();
    let mut chosen = Vec::new();
    let mut scales = Vec::new();
    for m in 1..=plan.orbits as u64 {
        let s = scale.eval(m);
        let mut hit = None;
        'search: for (period, xi) in scale_candidates(&s, plan.max_period).into_iter().take(8) {
            let mut sep = Q::new(1.into(), 64.into());
            for attempt in 0..6u64 {
                let mut query = OrbitQuery::new(period, 1);
                query.seed = Some(plan.seed.wrapping_mul(0x9E37_79B9).wrapping_add(m * 1000 + period as u64 * 10 + attempt));
                query.ready_only = true;
                query.avoid = taken.clone();
                query.min_separation = sep.clone();
                query.max_leaves = 20_000;
                if let Ok(mut v) = search_orbits(f, &query) {
                    hit = Some((v.remove(0), xi));
                    break 'search;
                }
                sep /= Q::from_integer(4.into());
            }
        }
        let (orbit, xi) = hit.ok_or_else(|| AccumError::OrbitSearch(format!("no ready orbit matches the scale of copy {m}")))?;
        taken.extend(orbit.points.iter().cloned());
        let child = realize(&children.member(m)?, &child_plan)?;
        let child_entropy = child.predicted_entropy();
        let period = orbit.period();
        scales.push(ScaleMatch {
            copy: m,
            requested: s,
            period,
            xi,
            achieved: Q::new(xi.into(), period.into()),
            child_entropy,
        });
        chosen.push(Chosen { orbit, xi, child });
    }
    Ok((chosen, scales))
}

fn sew(base: &EntropyModel, children: &Family, scale: &ScalarSeq, plan: &RealizePlan) -> Result<Realization> {
    let base_collapsed = !base.is_atom();
    let n0 = atom_tent(&atom_entropy(base))?;
    if n0 < 3 {
        return Err(AccumError::Realization("base atom is realized by the identity, which has no isolated periodic orbits".into()));
    }
    let f = PiecewiseMap::tent(n0)?;
    let laps = f.segs()?;
    let (chosen, scales) = choose_orbits(&f, children, scale, plan)?;

    // Blown points: orbit points first, then preimage levels.
    let mut points: Vec<(Q, Option<(usize, usize)>)> = Vec::new();
    for (t, c) in chosen.iter().enumerate() {
        for (i, x) in c.orbit.points.iter().enumerate() {
            points.push((x.clone(), Some((t, i))));
        }
    }
    let mut index: HashMap<Q, usize> = points.iter().enumerate().map(|(i, (x, _))| (x.clone(), i)).collect();
    let mut frontier: Vec<usize> = (0..points.len()).collect();
    for _ in 0..plan.preimage_depth {
        let mut next = Vec::new();
        for &i in &frontier {
            let y = points[i].0.clone();
            for lap in &laps {
                let x = (&y - &lap.b) / &lap.a;
                if !lap.contains(&x) || x.abs() >= Q::one() || index.contains_key(&x) {
                    continue;
                }
                index.insert(x.clone(), points.len());
                next.push(points.len());
                points.push((x, None));
            }
        }
        frontier = next;
    }
    let qs: Vec<Q> = points.iter().map(|p| p.0.clone()).collect();
    let (deltas, ns) = default_schedule(&qs)?;
    let blow = blowup_compose(&qs, &deltas, &ns)?;

    let mut blown = Vec::with_capacity(qs.len());
    for (k, (q, orbit)) in points.iter().enumerate() {
        let lap = find_seg(&laps, q).ok_or_else(|| AccumError::Realization("blown point outside every lap".into()))?;
        if &lap.lo == q || &lap.hi == q {
            return Err(AccumError::Realization(format!("blown point {q} sits on a turning point")));
        }
        let image = *index
            .get(&lap.eval(q))
            .ok_or_else(|| AccumError::Realization(format!("image of blown point {k} is not blown")))?;
        blown.push(BlownPoint {
            q: q.clone(),
            center: blow.centers[k].clone(),
            radius: blow.radii[k].clone(),
            image,
            sigma: slope_sign(&lap.a),
            orbit: *orbit,
        });
    }

    // Outside the blown intervals: π⁻¹ ∘ f ∘ π, with bridges over the jumps.
    let gaps: Vec<Seg> = blow.pi_segs().iter().filter(|s| !s.a.is_zero()).cloned().collect();
    let outside = compose_segs(blow.inverse_segs(), &compose_segs(&laps, &gaps)?)?;
    let (outside, bridges, eta) = bridge_jumps(outside, &blown)?;
    let bound = Q::from_integer(2.into()) * Q::from_integer(n0.into()) * blow.lipschitz() * eta;

    let mut towers: Vec<Tower> = Vec::new();
    for c in &chosen {
        let pts: Vec<usize> = c.orbit.points.iter().map(|x| index[x]).collect();
        let mut rho = vec![false];
        for &k in &pts[..pts.len() - 1] {
            let last = *rho.last().expect("rho starts non-empty");
            rho.push(last ^ (blown[k].sigma < 0));
        }
        towers.push(Tower {
            points: pts,
            rho,
            xi: c.xi,
            child: c.child.map.clone(),
            child_entropy: c.child.predicted_entropy(),
        });
    }

    let two = Q::from_integer(2.into());
    let mut pieces: Vec<Piece> = outside
        .iter()
        .map(|s| Piece { lo: s.lo.clone(), hi: s.hi.clone(), formula: Formula::Affine { a: s.a.clone(), b: s.b.clone() } })
        .collect();
    for p in &blown {
        let img = &blown[p.image];
        let (c, r, cj, rj) = (&p.center, &p.radius, &img.center, &img.radius);
        let push = Formula::RadialPush {
            sigma: p.sigma,
            src_center: c.clone(),
            src_radius: r.clone(),
            dst_center: cj.clone(),
            dst_radius: rj.clone(),
        };
        let half = r / &two;
        let last_of_tower = p.orbit.and_then(|(t, i)| (i + 1 == towers[t].points.len()).then_some(t));
        let inner = match last_of_tower {
            Some(t) => {
                let tw = &towers[t];
                let rho = tw.rho[tw.rho.len() - 1];
                if rho ^ (p.sigma < 0) {
                    return Err(AccumError::Realization(format!("tower {t} reverses orientation over one period")));
                }
                Formula::Sewn {
                    src_center: c.clone(),
                    src_half: half.clone(),
                    dst_center: cj.clone(),
                    dst_half: rj / &two,
                    reflect_in: rho,
                    reflect_out: false,
                    power: tw.xi,
                    child: Box::new(tw.child.clone()),
                }
            }
            None => {
                let a = Q::from_integer(p.sigma.into()) * rj / r;
                let b = cj - &a * c;
                Formula::Affine { a, b }
            }
        };
        pieces.push(Piece { lo: c - r, hi: c - &half, formula: push.clone() });
        pieces.push(Piece { lo: c - &half, hi: c + &half, formula: inner });
        pieces.push(Piece { lo: c + &half, hi: c + r, formula: push });
    }
    pieces.sort_by(|a, b| a.lo.cmp(&b.lo));
    let map = PiecewiseMap::new(pieces)?;

    Ok(Realization {
        map,
        base: f,
        pi: blow.pi(),
        blowup: Some(blow),
        points: blown,
        towers,
        bridges,
        scales,
        base_tent: n0,
        base_entropy: (n0 as f64).ln(),
        base_collapsed,
        semiconjugacy_bound: bound,
    })
}

/// Replaces each jump of the outside formula by an affine bridge.
fn bridge_jumps(segs: Vec<Seg>, blown: &[BlownPoint]) -> Result<(Vec<Seg>, Vec<Bridge>, Q)> {
    let eta0 = Q::new(1.into(), (1u64 << 40).into());
    let four = Q::from_integer(4.into());
    let mut out: Vec<Seg> = Vec::with_capacity(segs.len());
    let mut bridges = Vec::new();
    let mut eta_max = Q::zero();
    for mut s in segs {
        if let Some(last) = out.last_mut() {
            let x = s.lo.clone();
            if last.hi == x && last.eval(&x) != s.eval(&x) {
                let mut eta = eta0.clone();
                for len in [(&last.hi - &last.lo) / &four, (&s.hi - &s.lo) / &four] {
                    if len < eta {
                        eta = len;
                    }
                }
                let (l, h) = (&x - &eta, &x + &eta);
                let (vl, vh) = (last.eval(&l), s.eval(&h));
                let a = (&vh - &vl) / (&h - &l);
                let b = &vl - &a * &l;
                let (lo_v, hi_v) = if vl <= vh { (&vl, &vh) } else { (&vh, &vl) };
                let target = blown
                    .iter()
                    .position(|p| lo_v < &p.center && &p.center < hi_v)
                    .ok_or_else(|| AccumError::Realization(format!("jump at {x} crosses no blown interval")))?;
                last.hi = l.clone();
                s.lo = h.clone();
                out.push(Seg::new(l.clone(), h.clone(), a, b));
                bridges.push(Bridge { lo: l, hi: h, target });
                if eta > eta_max {
                    eta_max = eta;
                }
            }
        }
        out.push(s);
    }
    Ok((out, bridges, eta_max))
}

impl Realization {
    /// `max(h(f), max_m (ξ_m/|θ_m|)·h(χ_m))` over the sewn copies.
    pub fn predicted_entropy(&self) -> f64 {
        self.towers
            .iter()
            .map(|t| t.xi as f64 / t.points.len() as f64 * t.child_entropy)
            .fold(self.base_entropy, f64::max)
    }

    /// `K_0` as closed gaps between blown intervals, then each `K_m` as its
    /// closed inner half-intervals.
    pub fn blocks(&self) -> Vec<Vec<(Q, Q)>> {
        let mut iv: Vec<(Q, Q)> = self.points.iter().map(|p| (&p.center - &p.radius, &p.center + &p.radius)).collect();
        iv.sort();
        let mut k0 = Vec::new();
        let mut cur = -Q::one();
        for (lo, hi) in iv {
            k0.push((cur.clone(), lo));
            cur = hi;
        }
        k0.push((cur, Q::one()));
        let mut out = vec![k0];
        let two = Q::from_integer(2.into());
        for t in &self.towers {
            out.push(
                t.points
                    .iter()
                    .map(|&k| {
                        let p = &self.points[k];
                        (&p.center - &p.radius / &two, &p.center + &p.radius / &two)
                    })
                    .collect(),
            );
        }
        out
    }

    /// Chart `φ_m⁻¹(y, i)` of tower `m`.
    pub fn chart(&self, m: usize, level: usize, y: f64) -> f64 {
        let t = &self.towers[m];
        let p = &self.points[t.points[level]];
        let y = if t.rho[level] { -y } else { y };
        to_f64(&p.center) + to_f64(&p.radius) / 2.0 * y
    }

    /// `sup |F(φ⁻¹(y, i)) − φ⁻¹(S(y, i))|` over seeded samples, `S` the
    /// `(|θ_m|, ξ_m)` tower over the child map.
    pub fn tower_conjugacy_error(&self, m: usize, samples: usize, seed: u64) -> f64 {
        let t = &self.towers[m];
        let n = t.points.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for s in 0..samples {
            let i = s % n;
            let y: f64 = rng.random_range(-1.0..=1.0);
            let lhs = self.map.eval(self.chart(m, i, y));
            let rhs = if i + 1 < n {
                self.chart(m, i + 1, y)
            } else {
                let mut z = y;
                for _ in 0..t.xi {
                    z = t.child.eval(z);
                }
                self.chart(m, 0, z)
            };
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }

    /// Blown point whose outer half contains `x`, with the radial coordinate.
    pub fn annulus_of(&self, x: f64) -> Option<(usize, f64)> {
        self.points.iter().enumerate().find_map(|(k, p)| {
            let t = (x - to_f64(&p.center)).abs() / to_f64(&p.radius);
            (0.5..=1.0).contains(&t).then_some((k, t))
        })
    }

    /// Number of sampled annulus points that come back to their starting
    /// radial band `(ρ(t₀), t₀]` within `horizon` steps, where `ρ` is one
    /// radial push step.
    pub fn wandering_failures(&self, samples: usize, horizon: usize, seed: u64) -> usize {
        if self.points.is_empty() {
            return 0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut failures = 0;
        for _ in 0..samples {
            let k = rng.random_range(0..self.points.len());
            let t0: f64 = rng.random_range(0.501..0.999);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let p = &self.points[k];
            let mut x = to_f64(&p.center) + side * t0 * to_f64(&p.radius);
            let band_lo = t0 + 0.1 * (2.0 * std::f64::consts::PI * t0).sin();
            for _ in 0..horizon {
                x = self.map.eval(x);
                if let Some((j, t)) = self.annulus_of(x) {
                    if j == k && t > band_lo + 1e-12 {
                        failures += 1;
                        break;
                    }
                }
            }
        }
        failures
    }

    fn in_open_blown(&self, x: &Q) -> bool {
        self.points.iter().any(|p| (x - &p.center).abs() < p.radius)
    }

    fn in_bridge(&self, x: &Q) -> bool {
        self.bridges.iter().any(|b| &b.lo < x && x < &b.hi)
    }

    /// Sampled violations of `F(K_i) ⊆ K_i`. Points of `K_0` on a bridge are
    /// not sampled because bridges cross blown intervals by design.
    pub fn block_invariance_failures(&self, samples: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut failures = 0;
        let mut drawn = 0;
        while drawn < samples {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let xq = Q::from_float(x).expect("finite sample");
            if self.in_open_blown(&xq) || self.in_bridge(&xq) {
                continue;
            }
            drawn += 1;
            match self.map.eval_exact(&xq) {
                Some(y) if !self.in_open_blown(&y) => {}
                _ => failures += 1,
            }
        }
        for (m, t) in self.towers.iter().enumerate() {
            for i in 0..samples.min(1000) {
                let level = i % t.points.len();
                let y: f64 = rng.random_range(-1.0..=1.0);
                let fx = self.map.eval(self.chart(m, level, y));
                let next = t.points[(level + 1) % t.points.len()];
                let p = &self.points[next];
                if (fx - to_f64(&p.center)).abs() > to_f64(&p.radius) / 2.0 * (1.0 + 1e-12) {
                    failures += 1;
                }
            }
        }
        failures
    }

    /// Exact check that every blown-interval endpoint maps to an endpoint
    /// of the image interval.
    pub fn boundary_invariant(&self) -> bool {
        self.points.iter().all(|p| {
            let img = &self.points[p.image];
            let ends = [&img.center - &img.radius, &img.center + &img.radius];
            [&p.center - &p.radius, &p.center + &p.radius]
                .iter()
                .all(|x| self.map.eval_exact(x).is_some_and(|y| ends.contains(&y)))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("realization serializes")
    }
}
