//! Exact periodic orbits of piecewise-affine maps via itinerary solves.

use std::collections::HashSet;

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::map::{PiecewiseMap, Seg};
use crate::error::{AccumError, Result};
use crate::rational::{serde_q, serde_q_vec, Q};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    /// Orbit in dynamical order, starting at its smallest point.
    #[serde(with = "serde_q_vec")]
    pub points: Vec<Q>,
    /// Lap index visited by each point.
    pub itinerary: Vec<usize>,
    /// Derivative of the period-fold iterate along the orbit.
    #[serde(with = "serde_q")]
    pub multiplier: Q,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub fn orientation_preserving(&self) -> bool {
        self.multiplier.is_positive()
    }

    pub fn is_interior(&self) -> bool {
        self.points.iter().all(|x| x.abs() < Q::one())
    }
}

/// Search controls. `ready_only` keeps orbits that are interior, avoid lap
/// endpoints, preserve orientation over one period and keep `min_separation`
/// from each other, from `avoid` and from the boundary.
#[derive(Clone, Debug)]
pub struct OrbitQuery {
    pub period: usize,
    pub count: usize,
    pub seed: Option<u64>,
    pub ready_only: bool,
    pub avoid: Vec<Q>,
    pub min_separation: Q,
    pub max_leaves: usize,
}

impl OrbitQuery {
    pub fn new(period: usize, count: usize) -> OrbitQuery {
        OrbitQuery {
            period,
            count,
            seed: None,
            ready_only: false,
            avoid: Vec::new(),
            min_separation: Q::zero(),
            max_leaves: 200_000,
        }
    }
}

/// First `count` orbits of least period `period`, in lexicographic
/// itinerary order over the affine laps of `f`.
pub fn find_periodic_orbits(f: &PiecewiseMap, period: usize, count: usize) -> Result<Vec<PeriodicOrbit>> {
    search_orbits(f, &OrbitQuery::new(period, count))
}

struct Frame {
    lo: Q,
    hi: Q,
    a: Q,
    b: Q,
    itinerary: Vec<usize>,
}

pub fn search_orbits(f: &PiecewiseMap, query: &OrbitQuery) -> Result<Vec<PeriodicOrbit>> {
    if query.period == 0 || query.count == 0 {
        return Err(AccumError::InvalidArgument("period and count must be positive".into()));
    }
    let laps = f.affine_laps();
    if laps.is_empty() {
        return Err(AccumError::OrbitSearch("map has no affine laps".into()));
    }
    let ends: HashSet<Q> = laps.iter().flat_map(|s| [s.lo.clone(), s.hi.clone()]).collect();
    let mut rng = query.seed.map(ChaCha8Rng::seed_from_u64);
    let mut order: Vec<usize> = (0..laps.len()).collect();
    let mut found: Vec<PeriodicOrbit> = Vec::new();
    let mut seen: HashSet<Q> = HashSet::new();
    let mut taken: Vec<Q> = query.avoid.clone();
    let mut leaves = 0usize;

    let mut stack: Vec<Frame> = Vec::new();
    push_children(&mut stack, &laps, None, &mut order, rng.as_mut());
    while let Some(fr) = stack.pop() {
        if fr.itinerary.len() < query.period {
            push_children(&mut stack, &laps, Some(&fr), &mut order, rng.as_mut());
            continue;
        }
        leaves += 1;
        if leaves > query.max_leaves {
            break;
        }
        if fr.a.is_one() {
            continue;
        }
        let x = &fr.b / (Q::one() - &fr.a);
        if x < fr.lo || x > fr.hi {
            continue;
        }
        let Some(orbit) = trace(&laps, &x, &fr.itinerary) else { continue };
        if seen.contains(&orbit.points[0]) {
            continue;
        }
        seen.insert(orbit.points[0].clone());
        if query.ready_only && !ready(&orbit, &ends, &taken, &query.min_separation) {
            continue;
        }
        taken.extend(orbit.points.iter().cloned());
        found.push(orbit);
        if found.len() == query.count {
            break;
        }
    }
    if found.is_empty() {
        return Err(AccumError::OrbitSearch(format!("no orbit of least period {} found", query.period)));
    }
    Ok(found)
}

fn push_children(stack: &mut Vec<Frame>, laps: &[Seg], parent: Option<&Frame>, order: &mut [usize], rng: Option<&mut ChaCha8Rng>) {
    if let Some(r) = rng {
        order.shuffle(r);
    } else {
        order.sort_unstable();
    }
    // Pushed in reverse so the first entry of `order` is explored first.
    for &t in order.iter().rev() {
        let lap = &laps[t];
        let frame = match parent {
            None => Some(Frame {
                lo: lap.lo.clone(),
                hi: lap.hi.clone(),
                a: lap.a.clone(),
                b: lap.b.clone(),
                itinerary: vec![t],
            }),
            Some(p) => restrict(p, lap).map(|(lo, hi)| Frame {
                lo,
                hi,
                a: &lap.a * &p.a,
                b: &lap.a * &p.b + &lap.b,
                itinerary: {
                    let mut v = p.itinerary.clone();
                    v.push(t);
                    v
                },
            }),
        };
        if let Some(fr) = frame {
            stack.push(fr);
        }
    }
}

/// Points of `[p.lo, p.hi]` whose current image falls in `lap`.
fn restrict(p: &Frame, lap: &Seg) -> Option<(Q, Q)> {
    if p.a.is_zero() {
        return lap.contains(&p.b).then(|| (p.lo.clone(), p.hi.clone()));
    }
    let u = (&lap.lo - &p.b) / &p.a;
    let v = (&lap.hi - &p.b) / &p.a;
    let (u, v) = if u <= v { (u, v) } else { (v, u) };
    let lo = if u > p.lo { u } else { p.lo.clone() };
    let hi = if v < p.hi { v } else { p.hi.clone() };
    (lo <= hi).then_some((lo, hi))
}

fn trace(laps: &[Seg], x: &Q, itinerary: &[usize]) -> Option<PeriodicOrbit> {
    let mut pts = Vec::with_capacity(itinerary.len());
    let mut cur = x.clone();
    let mut mult = Q::one();
    for &t in itinerary {
        let lap = &laps[t];
        if !lap.contains(&cur) {
            return None;
        }
        pts.push(cur.clone());
        mult *= &lap.a;
        cur = lap.eval(&cur);
    }
    if &cur != x {
        return None;
    }
    let distinct: HashSet<&Q> = pts.iter().collect();
    if distinct.len() != pts.len() {
        return None;
    }
    let start = pts.iter().enumerate().min_by(|a, b| a.1.cmp(b.1)).map(|(i, _)| i)?;
    pts.rotate_left(start);
    let mut itin = itinerary.to_vec();
    itin.rotate_left(start);
    Some(PeriodicOrbit { points: pts, itinerary: itin, multiplier: mult })
}

fn ready(o: &PeriodicOrbit, ends: &HashSet<Q>, taken: &[Q], sep: &Q) -> bool {
    if !o.orientation_preserving() || !o.is_interior() {
        return false;
    }
    if o.points.iter().any(|x| ends.contains(x)) {
        return false;
    }
    let one = Q::one();
    let far = |x: &Q, y: &Q| &(x - y).abs() >= sep;
    o.points.iter().enumerate().all(|(i, x)| {
        far(x, &one)
            && far(x, &-one.clone())
            && taken.iter().all(|y| far(x, y))
            && o.points[i + 1..].iter().all(|y| far(x, y))
    })
}
