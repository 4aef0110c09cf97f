//! Exact transfinite sequence `u_γ`, its norms, the order of accumulation
//! and symbolic-extension entropy on [`EntropyModel`]s.
//!
//! On a composite `N = Blow(B, F)` the copies are open, so `u_γ` on copy
//! `m` is `s_m` times the child's `u_γ`. Because every copy sequence
//! accumulates onto every base point, the envelope cross-term at a base
//! point is a constant per level, and the base restriction of `u_γ` is a
//! max-plus combination
//!
//! `u_γ(x) = max(u^B_γ(x), max_groups(E_g + u^B_{ρ_g}(x)))`
//!
//! where each group collects the stages `ζ ≤ γ` sharing the same remainder
//! `ρ` with `ζ + ρ = γ`, and `E_g` is the largest constant injected by the
//! family at one of those stages. Injected constants come from the
//! family's limit values: `P(β) = lim_m s_m·sup(u_β + h)` at successor
//! stages and `Q(λ) = lim_m s_m·sup_{β<λ}‖u_β‖` at limit stages.

use std::collections::HashMap;

use num_traits::Zero;
use serde::Serialize;

use crate::entmodel::{sample_points, EntropyModel, Family, ModelPoint, Node, Step, Template};
use crate::error::{AccumError, Result};
use crate::ordinal::{ord_add, Ordinal};
use crate::rational::{fmt_q, Q};
use crate::seqalg::{seq_limit, seq_sup, tail_sup, Limit, ScalarSeq, Sup};

/// Enumeration cap when a family supremum must be found term by term.
const MAX_MEMBERS: u64 = 2_000;

/// Scalar summaries computed by the calculus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// `‖u_γ‖ = sup u_γ`
    Norm,
    /// `sup(u_γ + h)`
    Upper,
    /// `sup_{β<γ} ‖u_β‖`
    Below,
}

#[derive(Clone, Debug)]
struct FamilyInfo {
    alpha_f: Ordinal,
    /// Limit of `s_m·‖u‖` over stabilized members.
    ln: Q,
    /// Limit of `s_m·sup(u + h)` over stabilized members.
    lu: Q,
}

impl FamilyInfo {
    fn p(&self, beta: &Ordinal) -> Q {
        if *beta >= self.alpha_f {
            self.lu.clone()
        } else {
            Q::zero()
        }
    }
    fn q(&self, lambda: &Ordinal) -> Q {
        if *lambda >= self.alpha_f {
            self.ln.clone()
        } else {
            Q::zero()
        }
    }
    /// `sup_{β < λ} P(β)`
    fn p_below(&self, lambda: &Ordinal) -> Q {
        if *lambda > self.alpha_f {
            self.lu.clone()
        } else {
            Q::zero()
        }
    }
    /// Constant injected at stage `ζ > 0`.
    fn injected(&self, zeta: &Ordinal) -> Q {
        match zeta.predecessor() {
            Some(b) => self.p(&b),
            None => self.q(zeta),
        }
    }
}

/// A set of stages `ζ` sharing the remainder `rho`, with the largest
/// injected constant `e`.
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub e: Q,
    pub rho: Ordinal,
    /// Whether every stage of the group lies strictly below `γ`.
    pub below: bool,
}

fn groups(info: &FamilyInfo, gamma: &Ordinal) -> Vec<Group> {
    let terms = gamma.terms();
    let mut out = Vec::new();
    let mut prefix = Ordinal::zero();
    for (i, (g, c)) in terms.iter().enumerate() {
        let tail = Ordinal::from_terms(terms[i + 1..].to_vec()).expect("suffix of a normal form");
        for e in 1..=*c {
            let b0 = ord_add(&prefix, &Ordinal::monomial(g.clone(), c - e));
            let rho = ord_add(&Ordinal::monomial(g.clone(), e), &tail);
            let inj = if g.is_zero() {
                if b0.is_zero() {
                    continue;
                }
                info.injected(&b0)
            } else {
                info.p_below(&ord_add(&prefix, &Ordinal::monomial(g.clone(), c - e + 1)))
            };
            out.push(Group { e: inj, rho, below: true });
        }
        prefix = ord_add(&prefix, &Ordinal::monomial(g.clone(), *c));
    }
    if !gamma.is_zero() {
        out.push(Group { e: info.injected(gamma), rho: Ordinal::zero(), below: false });
    }
    out
}

/// Per-computation memo tables. Models are kept alive so that pointer keys
/// stay unique for the lifetime of the calculus.
#[derive(Default)]
pub struct Calculus {
    memo: HashMap<(usize, Quantity, Ordinal), Q>,
    alpha: HashMap<usize, Ordinal>,
    info: HashMap<usize, FamilyInfo>,
    keep: HashMap<usize, EntropyModel>,
}

fn parts(model: &EntropyModel) -> Option<(&EntropyModel, &Family, &ScalarSeq)> {
    match model.node() {
        Node::Blow { base, children, scale, .. } => Some((base, children, scale)),
        Node::Atom { .. } => None,
    }
}

fn finite_sup(s: Sup, what: &str) -> Result<Q> {
    match s {
        Sup::Finite(q) => Ok(q),
        Sup::PosInf => Err(AccumError::IndeterminateLimit(format!("{what} is unbounded"))),
    }
}

fn finite_limit(l: Limit, what: &str) -> Result<Q> {
    match l {
        Limit::Finite(q) => Ok(q),
        _ => Err(AccumError::IndeterminateLimit(format!("{what} has no finite limit"))),
    }
}

fn qmax(a: Q, b: Q) -> Q {
    if a >= b {
        a
    } else {
        b
    }
}

impl Calculus {
    pub fn new() -> Self {
        Self::default()
    }

    fn remember(&mut self, m: &EntropyModel) {
        self.keep.entry(m.key()).or_insert_with(|| m.clone());
    }

    fn family_info(&mut self, model: &EntropyModel) -> Result<FamilyInfo> {
        if let Some(i) = self.info.get(&model.key()) {
            return Ok(i.clone());
        }
        let (_, fam, scale) = parts(model).expect("family info of a composite");
        let ln = finite_limit(
            seq_limit(&ScalarSeq::product(scale.clone(), fam.final_norm_seq()))?,
            "scaled child norm",
        )?;
        let lu = finite_limit(
            seq_limit(&ScalarSeq::product(scale.clone(), fam.final_upper_seq()))?,
            "scaled child entropy",
        )?;
        let info = FamilyInfo { alpha_f: fam.template.alpha_f(), ln, lu };
        self.remember(model);
        self.info.insert(model.key(), info.clone());
        Ok(info)
    }

    /// The max-plus groups describing `u_γ` on the base of a composite.
    pub fn base_groups(&mut self, model: &EntropyModel, gamma: &Ordinal) -> Result<Vec<Group>> {
        if model.is_atom() {
            return Ok(Vec::new());
        }
        let info = self.family_info(model)?;
        Ok(groups(&info, gamma))
    }

    /// `‖u_γ‖`, `sup(u_γ + h)` or `sup_{β<γ}‖u_β‖`, exactly.
    pub fn quantity(&mut self, model: &EntropyModel, q: Quantity, gamma: &Ordinal) -> Result<Q> {
        let key = (model.key(), q, gamma.clone());
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let v = self.quantity_uncached(model, q, gamma)?;
        self.remember(model);
        self.memo.insert(key, v.clone());
        Ok(v)
    }

    fn quantity_uncached(&mut self, model: &EntropyModel, q: Quantity, gamma: &Ordinal) -> Result<Q> {
        if q == Quantity::Norm && gamma.is_zero() {
            return Ok(Q::zero());
        }
        if q == Quantity::Below {
            if gamma.is_zero() {
                return Ok(Q::zero());
            }
            if let Some(p) = gamma.predecessor() {
                return self.quantity(model, Quantity::Norm, &p);
            }
        }
        let (base, _, _) = match parts(model) {
            None => {
                return Ok(match (q, model.node()) {
                    (Quantity::Upper, Node::Atom { h_top, .. }) => h_top.clone(),
                    _ => Q::zero(),
                })
            }
            Some(p) => p,
        };
        let base = base.clone();
        let mut best = self.quantity(&base, q, gamma)?;
        for g in self.base_groups(model, gamma)? {
            if q == Quantity::Below && !g.below {
                continue;
            }
            let v = g.e + self.quantity(&base, q, &g.rho)?;
            best = qmax(best, v);
        }
        let fam = self.family_sup(model, q, gamma, &best)?;
        Ok(qmax(best, fam))
    }

    /// `sup_m s_m · (quantity of member m)`, exact whenever it exceeds
    /// `floor`; otherwise some value not above `floor`.
    fn family_sup(&mut self, model: &EntropyModel, q: Quantity, gamma: &Ordinal, floor: &Q) -> Result<Q> {
        let (_, fam, scale) = parts(model).expect("composite");
        let (fam, scale) = (fam.clone(), scale.clone());
        let info = self.family_info(model)?;
        if *gamma >= info.alpha_f {
            let seq = match q {
                Quantity::Norm | Quantity::Below => fam.final_norm_seq(),
                Quantity::Upper => fam.final_upper_seq(),
            };
            return finite_sup(seq_sup(&ScalarSeq::product(scale, seq))?, "scaled child family");
        }
        let depth = chain_depth(&fam.template, gamma);
        let mut best: Option<Q> = None;
        let stationary = stationary_from(&fam.template, depth);
        for m in 1..=MAX_MEMBERS {
            let child = fam.member_truncated(m, depth)?;
            let raw = self.quantity(&child, q, gamma)?;
            let v = scale.eval(m) * &raw;
            let b = match best {
                Some(b) if b >= v => b,
                _ => v,
            };
            if stationary.is_some_and(|j| fam.index(m) >= j) {
                // Every later truncated member is this same model.
                let rest = finite_sup(tail_sup(&scale, m + 1)?, "scale")? * raw;
                return Ok(qmax(b, rest));
            }
            if let Some(bound) = tail_bound(&fam, &scale, q, gamma, m + 1)? {
                if bound <= b || bound <= *floor {
                    return Ok(b);
                }
            }
            best = Some(b);
        }
        Err(AccumError::IndeterminateLimit(format!(
            "family supremum at {gamma} did not settle within {MAX_MEMBERS} members"
        )))
    }

    /// Order of accumulation, certified by a fixpoint test and a
    /// minimality witness.
    pub fn alpha0(&mut self, model: &EntropyModel) -> Result<Ordinal> {
        if let Some(a) = self.alpha.get(&model.key()) {
            return Ok(a.clone());
        }
        let a = self.alpha0_uncached(model)?;
        self.remember(model);
        self.alpha.insert(model.key(), a.clone());
        Ok(a)
    }

    fn alpha0_uncached(&mut self, model: &EntropyModel) -> Result<Ordinal> {
        let Some((base, _, _)) = parts(model) else {
            return Ok(Ordinal::zero());
        };
        let base = base.clone();
        let b = self.alpha0(&base)?;
        let info = self.family_info(model)?;
        let a = info.alpha_f.clone();
        let mut cands = vec![
            b.clone(),
            a.clone(),
            ord_add(&a, &b),
            ord_add(&ord_add(&a, &Ordinal::one()), &b),
        ];
        cands.sort();
        cands.dedup();
        let chosen = cands
            .into_iter()
            .find(|c| *c >= a && front(&info, c, &b) == front(&info, &c.succ(), &b))
            .ok_or_else(|| AccumError::Uncertified(format!("no stable candidate for {model:?}")))?;
        if chosen.is_zero() || self.has_minimality_witness(model, &chosen)? {
            Ok(chosen)
        } else {
            Err(AccumError::Uncertified(format!("no witness that u stabilizes exactly at {chosen}")))
        }
    }

    fn has_minimality_witness(&mut self, model: &EntropyModel, c: &Ordinal) -> Result<bool> {
        let points = witness_points(model)?;
        match c.predecessor() {
            Some(p) => {
                if self.quantity(model, Quantity::Norm, &p)? < self.quantity(model, Quantity::Norm, c)?
                    || self.quantity(model, Quantity::Upper, &p)? < self.quantity(model, Quantity::Upper, c)?
                {
                    return Ok(true);
                }
                for x in &points {
                    if self.point_value(model, &p, x)? < self.point_value(model, c, x)? {
                        return Ok(true);
                    }
                }
            }
            None => {
                if self.quantity(model, Quantity::Below, c)? < self.quantity(model, Quantity::Norm, c)? {
                    return Ok(true);
                }
                for x in &points {
                    if self.point_sup_below(model, c, x)? < self.point_value(model, c, x)? {
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }

    /// `u_γ(x)`.
    pub fn point_value(&mut self, model: &EntropyModel, gamma: &Ordinal, x: &ModelPoint) -> Result<Q> {
        self.point_eval(model, gamma, x, false)
    }

    /// `sup_{β<γ} u_β(x)`.
    pub fn point_sup_below(&mut self, model: &EntropyModel, gamma: &Ordinal, x: &ModelPoint) -> Result<Q> {
        if gamma.is_zero() {
            return Ok(Q::zero());
        }
        match gamma.predecessor() {
            Some(p) => self.point_eval(model, &p, x, false),
            None => self.point_eval(model, gamma, x, true),
        }
    }

    fn point_eval(&mut self, model: &EntropyModel, gamma: &Ordinal, x: &ModelPoint, below: bool) -> Result<Q> {
        let bad = || AccumError::InvalidAddress(format!("{x} does not fit the model"));
        match (model.node(), x.split_first()) {
            (Node::Atom { .. }, None) => Ok(Q::zero()),
            (Node::Blow { children, scale, .. }, Some((Step::Copy(m), rest))) => {
                let child = children.member(m)?;
                let v = if below {
                    self.point_sup_below(&child, gamma, &rest)?
                } else {
                    self.point_value(&child, gamma, &rest)?
                };
                Ok(scale.eval(m) * v)
            }
            (Node::Blow { base, .. }, Some((Step::Base, rest))) => {
                let base = base.clone();
                let inner = |c: &mut Calculus, g: &Ordinal| {
                    if below {
                        c.point_sup_below(&base, g, &rest)
                    } else {
                        c.point_value(&base, g, &rest)
                    }
                };
                let mut best = inner(self, gamma)?;
                for g in self.base_groups(model, gamma)? {
                    if below && !g.below {
                        continue;
                    }
                    best = qmax(best, g.e + inner(self, &g.rho)?);
                }
                Ok(best)
            }
            _ => Err(bad()),
        }
    }

    pub fn norm(&mut self, model: &EntropyModel, gamma: &Ordinal) -> Result<Q> {
        gamma.check_height()?;
        self.quantity(model, Quantity::Norm, gamma)
    }

    pub fn h_top(&mut self, model: &EntropyModel) -> Result<Q> {
        self.quantity(model, Quantity::Upper, &Ordinal::zero())
    }

    pub fn h_sex(&mut self, model: &EntropyModel, x: &ModelPoint) -> Result<Q> {
        let a = self.alpha0(model)?;
        Ok(crate::entmodel::eval_h(model, x)? + self.point_value(model, &a, x)?)
    }
}

/// Pareto front of `(E, ρ)` pairs describing `u_γ` on the base, with `ρ`
/// clamped to the base's order of accumulation.
fn front(info: &FamilyInfo, gamma: &Ordinal, b: &Ordinal) -> Vec<(Q, Ordinal)> {
    let clamp = |r: &Ordinal| if r > b { b.clone() } else { r.clone() };
    let mut pairs: Vec<(Q, Ordinal)> = groups(info, gamma).into_iter().map(|g| (g.e, clamp(&g.rho))).collect();
    pairs.push((Q::zero(), clamp(gamma)));
    pairs.sort_by(|x, y| x.1.cmp(&y.1).then(x.0.cmp(&y.0)));
    pairs.dedup();
    let mut out: Vec<(Q, Ordinal)> = pairs
        .iter()
        .filter(|p| !pairs.iter().any(|o| o != *p && o.0 >= p.0 && o.1 >= p.1))
        .cloned()
        .collect();
    out.sort_by(|x, y| x.1.cmp(&y.1));
    out
}

fn witness_points(model: &EntropyModel) -> Result<Vec<ModelPoint>> {
    let mut pts = vec![ModelPoint::base_point(model)];
    for p in sample_points(model, 3, 1)? {
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    Ok(pts)
}

/// Number of chain levels that suffice to evaluate a chain-shaped member at
/// `γ < α_F`.
///
/// A level injects positive pressure only at stages `ζ ≥ ω^β'` (the block
/// size of the chain), and each injection consumes one block of `γ`. With
/// `L` blocks in `γ`, a path through the chain uses at most `L` injecting
/// levels plus one level contributing its family term, so any chain with
/// `L + 2` or more levels yields the same quantities at `γ`.
fn chain_depth(t: &Template, gamma: &Ordinal) -> u64 {
    match t {
        Template::BaseFinite { .. } => gamma.as_finite().unwrap_or(u64::MAX - 2) + 2,
        Template::Powers { beta, .. } => gamma.coefficient_of(beta) + 2,
        _ => u64::MAX,
    }
}

/// Index from which the members truncated to `depth` no longer depend on
/// the index: chain templates with a linear amplitude `c·j` truncate to
/// `q = depth` levels of step `c`.
fn stationary_from(t: &Template, depth: u64) -> Option<u64> {
    match t {
        Template::BaseFinite { amp: ScalarSeq::LinearUp { .. }, .. }
        | Template::Powers { amp: ScalarSeq::LinearUp { .. }, .. } => Some(depth.max(1)),
        _ => None,
    }
}

/// Upper bound on `s_{m'} · quantity(member m')` over all `m' ≥ m`, when the
/// template's hypotheses make one available at `m`.
fn tail_bound(fam: &Family, scale: &ScalarSeq, q: Quantity, gamma: &Ordinal, m: u64) -> Result<Option<Q>> {
    let j = fam.index(m);
    let jq = Q::from_integer(j.into());
    let s_tail = finite_sup(tail_sup(scale, m)?, "scale")?;
    let amp_tail = |amp: &ScalarSeq| -> Result<Q> {
        finite_sup(
            tail_sup(&ScalarSeq::product(scale.clone(), ScalarSeq::shift(fam.shift, amp.clone())), m)?,
            "scaled amplitude",
        )
    };
    let (norm, extra) = match &fam.template {
        Template::Atoms { .. } => return Ok(None),
        Template::BaseFinite { amp, c } => {
            let Some(k) = gamma.as_finite() else { return Ok(None) };
            if j < k {
                return Ok(None);
            }
            let sa = amp_tail(amp)?;
            let norm = &sa * Q::from_integer(k.into()) / &jq;
            (norm, qmax(c * &s_tail, sa / &jq))
        }
        Template::Powers { beta, amp, c } => {
            let l = gamma.coefficient_of(beta);
            if j < l + 1 {
                return Ok(None);
            }
            (amp_tail(amp)? * Q::from_integer((l + 1).into()) / &jq, c * &s_tail)
        }
        Template::IrrFixed { c, .. } | Template::IrrLimit { c, .. } => {
            if fam.template.delta(j)? <= *gamma {
                return Ok(None);
            }
            (s_tail.clone() / &jq, c * &s_tail)
        }
    };
    let bound = match q {
        Quantity::Norm | Quantity::Below => norm,
        Quantity::Upper => norm + extra,
    };
    Ok(Some(&fam.factor * bound))
}

/// Region-valued function on a composite: a value at the base points and,
/// for each copy `m`, the supremum of the function over that copy.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionFn {
    pub base_value: Q,
    pub copy_sup: ScalarSeq,
}

/// Smallest upper semi-continuous majorant of a region-valued function:
/// copies are open so their values are kept, while at base points the
/// value becomes `max(base, limsup_m copy_sup(m))`.
pub fn usc_envelope(g: &RegionFn) -> Result<RegionFn> {
    let lim = finite_limit(seq_limit(&g.copy_sup)?, "copy supremum")?;
    Ok(RegionFn { base_value: qmax(g.base_value.clone(), lim), copy_sup: g.copy_sup.clone() })
}

/// Symbolic `u_γ` together with its scalar summaries and values at
/// requested points.
#[derive(Clone, Debug, PartialEq)]
pub struct UFunction {
    pub gamma: Ordinal,
    pub norm: Q,
    pub uplus: Q,
    pub values: Vec<(ModelPoint, Q)>,
    /// `(E, ρ)` groups of the top-level composite.
    pub pressure: Vec<(Q, Ordinal)>,
}

impl UFunction {
    pub fn report_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Report<'a> {
            gamma: &'a Ordinal,
            norm: String,
            uplus: String,
            values: Vec<(String, String)>,
            pressure_constants: Vec<(String, String)>,
        }
        serde_json::to_value(Report {
            gamma: &self.gamma,
            norm: fmt_q(&self.norm),
            uplus: fmt_q(&self.uplus),
            values: self.values.iter().map(|(p, v)| (p.to_string(), fmt_q(v))).collect(),
            pressure_constants: self.pressure.iter().map(|(e, r)| (fmt_q(e), r.to_string())).collect(),
        })
        .expect("report serializes")
    }
}

pub fn u_gamma(calc: &mut Calculus, model: &EntropyModel, gamma: &Ordinal, points: &[ModelPoint]) -> Result<UFunction> {
    gamma.check_height()?;
    let norm = calc.quantity(model, Quantity::Norm, gamma)?;
    let uplus = calc.quantity(model, Quantity::Upper, gamma)?;
    let values = points
        .iter()
        .map(|p| Ok((p.clone(), calc.point_value(model, gamma, p)?)))
        .collect::<Result<Vec<_>>>()?;
    let pressure = calc.base_groups(model, gamma)?.into_iter().map(|g| (g.e, g.rho)).collect();
    Ok(UFunction { gamma: gamma.clone(), norm, uplus, values, pressure })
}

/// `u_{γ+1}` from `u_γ`, at the same points.
pub fn u_successor(calc: &mut Calculus, model: &EntropyModel, u: &UFunction) -> Result<UFunction> {
    let points: Vec<ModelPoint> = u.values.iter().map(|(p, _)| p.clone()).collect();
    u_gamma(calc, model, &u.gamma.succ(), &points)
}

/// `u_λ` from a cofinal family of earlier stages. The family must consist
/// of stages below `λ` reaching past every element of the canonical
/// fundamental sequence it is compared against.
pub fn u_limit(calc: &mut Calculus, model: &EntropyModel, family: &[UFunction], lambda: &Ordinal) -> Result<UFunction> {
    if !lambda.is_limit() {
        return Err(AccumError::NotLimit(lambda.to_string()));
    }
    if family.is_empty() || family.iter().any(|u| u.gamma >= *lambda) {
        return Err(AccumError::InvalidArgument("limit stage needs earlier stages below it".into()));
    }
    let points: Vec<ModelPoint> = family[0].values.iter().map(|(p, _)| p.clone()).collect();
    u_gamma(calc, model, lambda, &points)
}

pub fn order_of_accumulation(model: &EntropyModel) -> Result<Ordinal> {
    Calculus::new().alpha0(model)
}

pub fn norm_u(model: &EntropyModel, gamma: &Ordinal) -> Result<Q> {
    Calculus::new().norm(model, gamma)
}

pub fn h_sex(model: &EntropyModel, x: &ModelPoint) -> Result<Q> {
    Calculus::new().h_sex(model, x)
}

pub fn h_top(model: &EntropyModel) -> Result<Q> {
    Calculus::new().h_top(model)
}
