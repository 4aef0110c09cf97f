//! Model-level properties of the transfinite sequence, checked at every
//! sampled point and on the norm. Each check returns the number of
//! comparisons made, or a description of the first violation.

use accum_core::constructors::{power_model, tower_model};
use accum_core::entmodel::{make_blow_and_sew, sample_points, ModelPoint, Node, Step, SyncRule};
use accum_core::ordinal::ord_add;
use accum_core::transfinite::Calculus;
use accum_core::{EntropyModel, Ordinal, Q};

pub type Outcome = Result<usize, String>;

fn ord(s: &str) -> Ordinal {
    s.parse().expect("fixed ordinal literals parse")
}

/// Stages at which every property is checked.
pub fn ladder() -> Vec<Ordinal> {
    ["0", "1", "2", "3", "w", "w + 1", "w*2", "w*2 + 1", "w^2", "w^2 + 2", "w^2 + w", "w^3"]
        .iter()
        .map(|s| ord(s))
        .collect()
}

pub fn points(m: &EntropyModel) -> Vec<ModelPoint> {
    sample_points(m, 2, 2).expect("sample points of a valid model")
}

fn err<T: std::fmt::Display>(e: T) -> String {
    e.to_string()
}

/// `u_γ` at every point, followed by `‖u_γ‖`.
pub fn profile(calc: &mut Calculus, m: &EntropyModel, g: &Ordinal, pts: &[ModelPoint]) -> Result<Vec<Q>, String> {
    let mut v = Vec::with_capacity(pts.len() + 1);
    for p in pts {
        v.push(calc.point_value(m, g, p).map_err(err)?);
    }
    v.push(calc.norm(m, g).map_err(err)?);
    Ok(v)
}

pub fn monotone_in_gamma(m: &EntropyModel) -> Outcome {
    let pts = points(m);
    let mut calc = Calculus::new();
    let mut n = 0;
    let ladder = ladder();
    let mut prev = profile(&mut calc, m, &ladder[0], &pts)?;
    for g in &ladder[1..] {
        let cur = profile(&mut calc, m, g, &pts)?;
        for (i, (lo, hi)) in prev.iter().zip(&cur).enumerate() {
            if lo > hi {
                return Err(format!("u decreases up to stage {g} at slot {i}"));
            }
            n += 1;
        }
        prev = cur;
    }
    Ok(n)
}

pub fn subadditive(m: &EntropyModel) -> Outcome {
    let pts = points(m);
    let mut calc = Calculus::new();
    let small: Vec<Ordinal> = ["1", "2", "w", "w + 1", "w*2", "w^2"].iter().map(|s| ord(s)).collect();
    let mut n = 0;
    for a in &small {
        for b in &small {
            let sum = profile(&mut calc, m, &ord_add(a, b), &pts)?;
            let ua = profile(&mut calc, m, a, &pts)?;
            let ub = profile(&mut calc, m, b, &pts)?;
            for i in 0..sum.len() {
                if sum[i] > &ua[i] + &ub[i] {
                    return Err(format!("u_({a} + {b}) exceeds u_{a} + u_{b} at slot {i}"));
                }
                n += 1;
            }
        }
    }
    Ok(n)
}

type Lift = Box<dyn Fn(&ModelPoint) -> ModelPoint>;

/// The model with the child family of the composite `depth` base steps
/// down removed, and the map sending surviving points into the original.
pub fn delete_family(m: &EntropyModel, depth: usize) -> Option<(EntropyModel, Lift)> {
    let Node::Blow { base, children, scale, sync } = m.node() else { return None };
    if depth == 0 {
        return Some((base.clone(), Box::new(|p: &ModelPoint| p.prepend(Step::Base))));
    }
    let (inner, lift) = delete_family(base, depth - 1)?;
    let rebuilt = make_blow_and_sew(inner, children.clone(), scale.clone(), *sync).ok()?;
    let map = move |p: &ModelPoint| match p.split_first() {
        Some((Step::Base, rest)) => lift(&rest).prepend(Step::Base),
        _ => p.clone(),
    };
    Some((rebuilt, Box::new(map)))
}

pub fn restriction_monotone(m: &EntropyModel) -> Outcome {
    let mut calc = Calculus::new();
    let mut n = 0;
    for depth in 0..2 {
        let Some((reduced, lift)) = delete_family(m, depth) else { continue };
        for g in ladder() {
            for p in points(&reduced) {
                let small = calc.point_value(&reduced, &g, &p).map_err(err)?;
                let big = calc.point_value(m, &g, &lift(&p)).map_err(err)?;
                if small > big {
                    return Err(format!("deleting family {depth} raised u_{g} at {p}"));
                }
                n += 1;
            }
        }
    }
    Ok(n)
}

/// On copy `j` the sequence is `s_j` times the child's.
pub fn copy_locality(m: &EntropyModel) -> Outcome {
    let mut calc = Calculus::new();
    let mut n = 0;
    for p in points(m) {
        let Some((Step::Copy(j), rest)) = p.split_first() else { continue };
        let (s, child) = m.resolve(&ModelPoint::new(vec![Step::Copy(j)])).map_err(err)?;
        for g in ladder() {
            let whole = calc.point_value(m, &g, &p).map_err(err)?;
            let part = calc.point_value(&child, &g, &rest).map_err(err)?;
            if whole != &s * &part {
                return Err(format!("u_{g} at {p} is not the scaled child value"));
            }
            n += 1;
        }
    }
    Ok(n)
}

/// `(n, p)` towers scale by `p/n`, composing multiplicatively; `p`-th powers scale by `p`.
pub fn tower_scaling(m: &EntropyModel, n: u64, p: u64) -> Outcome {
    let pts = points(m);
    let r = Q::new(p.into(), n.into());
    let t = tower_model(m, n, p).map_err(err)?;
    let t2 = tower_model(&t, 3, 2).map_err(err)?;
    let pw = power_model(m, p).map_err(err)?;
    let mut calc = Calculus::new();
    if calc.alpha0(&t).map_err(err)? != calc.alpha0(m).map_err(err)? {
        return Err("tower changed the order of accumulation".into());
    }
    let two_thirds = Q::new(2.into(), 3.into());
    let pq = Q::from_integer(p.into());
    let mut count = 0;
    for g in ladder() {
        let base = profile(&mut calc, m, &g, &pts)?;
        let scaled = profile(&mut calc, &t, &g, &pts)?;
        let twice = profile(&mut calc, &t2, &g, &pts)?;
        let pow = profile(&mut calc, &pw, &g, &pts)?;
        for i in 0..base.len() {
            if scaled[i] != &base[i] * &r || twice[i] != &base[i] * &r * &two_thirds || pow[i] != &base[i] * &pq {
                return Err(format!("scaling fails for u_{g} at slot {i} with n = {n}, p = {p}"));
            }
            count += 3;
        }
    }
    Ok(count)
}

pub fn sync_independent(m: &EntropyModel) -> Outcome {
    let pts = points(m);
    let mut calc = Calculus::new();
    let a0 = calc.alpha0(m).map_err(err)?;
    let mut n = 0;
    for rule in [SyncRule::Default, SyncRule::Factor(2), SyncRule::Factor(5)] {
        let other = m.with_sync(rule);
        if calc.alpha0(&other).map_err(err)? != a0 {
            return Err(format!("order of accumulation changes under {rule:?}"));
        }
        for g in ladder() {
            if profile(&mut calc, &other, &g, &pts)? != profile(&mut calc, m, &g, &pts)? {
                return Err(format!("u_{g} changes under {rule:?}"));
            }
            n += pts.len() + 1;
        }
    }
    Ok(n)
}
