//! Finitely presented models of the limit-measure space together with a
//! candidate sequence on it.
//!
//! A model is either an atom (a single limit point whose candidate
//! sequence converges uniformly) or a blow-and-sew composite: a base model
//! plus a parametric family of child copies `D_m`, each scaled by `s_m`,
//! accumulating onto every base point.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{AccumError, Result};
use crate::ordinal::{Ordinal, fundamental_sequence};
use crate::rational::{serde_q, Q};
use crate::seqalg::{seq_direction, seq_limit, seq_nonnegative, seq_sup, Direction, Limit, ScalarSeq, Sup};

/// Synchronization thresholds `k ↦ I(k)`: copy `m` uses the child index
/// `k` while `m < I(k)` and index 0 afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SyncRule {
    /// `I(k) = k`
    #[default]
    Default,
    /// `I(k) = n·k`
    Factor(u64),
}

impl SyncRule {
    pub fn threshold(&self, k: u64) -> u64 {
        match self {
            SyncRule::Default => k,
            SyncRule::Factor(n) => n.saturating_mul(k),
        }
    }
}

/// Shape templates for child families. Member `j` of each template is a
/// model built by the matching constructor with `amp(j)` as its norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Template {
    /// Member `j` is `Atom(h(j))`.
    Atoms { h: ScalarSeq },
    /// Member `j` is `base_finite(j, amp(j), c)`.
    BaseFinite {
        amp: ScalarSeq,
        #[serde(with = "serde_q")]
        c: Q,
    },
    /// Member `j` is `powers(ω^beta, j, amp(j), c)`.
    Powers {
        beta: Ordinal,
        amp: ScalarSeq,
        #[serde(with = "serde_q")]
        c: Q,
    },
    /// Member `j` is `irreducible(beta, amp(j), ω^beta[j], ε_j, c)`.
    IrrFixed {
        beta: Ordinal,
        amp: ScalarSeq,
        #[serde(with = "serde_q")]
        c: Q,
    },
    /// Member `j` is `irreducible(beta[j], amp(j), ω^{beta[j-1]}, ε_j, c)`.
    IrrLimit {
        beta: Ordinal,
        amp: ScalarSeq,
        #[serde(with = "serde_q")]
        c: Q,
    },
}

impl Template {
    pub fn amp(&self) -> Option<&ScalarSeq> {
        match self {
            Template::Atoms { .. } => None,
            Template::BaseFinite { amp, .. }
            | Template::Powers { amp, .. }
            | Template::IrrFixed { amp, .. }
            | Template::IrrLimit { amp, .. } => Some(amp),
        }
    }

    pub fn cap(&self) -> Q {
        match self {
            Template::Atoms { .. } => Q::zero(),
            Template::BaseFinite { c, .. }
            | Template::Powers { c, .. }
            | Template::IrrFixed { c, .. }
            | Template::IrrLimit { c, .. } => c.clone(),
        }
    }

    /// Supremum of the members' orders of accumulation.
    pub fn alpha_f(&self) -> Ordinal {
        match self {
            Template::Atoms { .. } => Ordinal::zero(),
            Template::BaseFinite { .. } => Ordinal::omega(),
            Template::Powers { beta, .. } => Ordinal::omega_pow(beta.succ()),
            Template::IrrFixed { beta, .. } | Template::IrrLimit { beta, .. } => {
                Ordinal::omega_pow(beta.clone())
            }
        }
    }

    /// `ε_j = min(amp(j)/2, 1/j)`.
    pub fn epsilon(amp_j: &Q, j: u64) -> Q {
        let half = amp_j / Q::from_integer(2.into());
        let inv = Q::new(1.into(), j.max(1).into());
        if half < inv {
            half
        } else {
            inv
        }
    }

    /// The small-norm index `δ_j` handed to member `j` of an irreducible
    /// template.
    pub fn delta(&self, j: u64) -> Result<Ordinal> {
        match self {
            Template::IrrFixed { beta, .. } => fundamental_sequence(&Ordinal::omega_pow(beta.clone()), j),
            Template::IrrLimit { beta, .. } => {
                if j >= 2 {
                    Ok(Ordinal::omega_pow(fundamental_sequence(beta, j - 1)?))
                } else {
                    Ok(Ordinal::zero())
                }
            }
            _ => Err(AccumError::InvalidArgument("template carries no δ schedule".into())),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AccumError::InvalidModel(m.to_string()));
        match self {
            Template::Atoms { h } => {
                if !seq_nonnegative(h, false)? {
                    return bad("atom family entropies must be nonnegative");
                }
            }
            Template::BaseFinite { amp, c }
            | Template::Powers { amp, c, .. }
            | Template::IrrFixed { amp, c, .. }
            | Template::IrrLimit { amp, c, .. } => {
                if !seq_nonnegative(amp, true)? {
                    return bad("template amplitudes must be positive");
                }
                if c.is_negative() {
                    return bad("template cap must be nonnegative");
                }
            }
        }
        match self {
            Template::IrrFixed { beta, .. } if beta.is_zero() => bad("irreducible template needs beta >= 1"),
            Template::IrrLimit { beta, .. } if !beta.is_limit() => bad("limit template needs a limit beta"),
            _ => Ok(()),
        }
    }
}

/// A child family `m ↦ factor · template_member(m + shift)`.
#[derive(Clone)]
pub struct Family {
    pub template: Template,
    pub shift: u64,
    pub factor: Q,
    cache: Arc<Mutex<HashMap<(u64, u64), EntropyModel>>>,
}

impl PartialEq for Family {
    fn eq(&self, o: &Family) -> bool {
        self.template == o.template && self.shift == o.shift && self.factor == o.factor
    }
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Family")
            .field("template", &self.template)
            .field("shift", &self.shift)
            .field("factor", &self.factor)
            .finish()
    }
}

impl Family {
    pub fn new(template: Template, shift: u64, factor: Q) -> Result<Family> {
        template.validate()?;
        if !factor.is_positive() {
            return Err(AccumError::InvalidModel("family factor must be positive".into()));
        }
        Ok(Family { template, shift, factor, cache: Arc::new(Mutex::new(HashMap::new())) })
    }

    pub fn index(&self, m: u64) -> u64 {
        m + self.shift
    }

    /// Child model of copy `m ≥ 1`.
    pub fn member(&self, m: u64) -> Result<EntropyModel> {
        self.member_truncated(m, u64::MAX)
    }

    /// Child model of copy `m` with its chain of identical levels cut to
    /// at most `depth` (only `BaseFinite` and `Powers` members are chains).
    pub fn member_truncated(&self, m: u64, depth: u64) -> Result<EntropyModel> {
        if m == 0 {
            return Err(AccumError::InvalidAddress("copy indices start at 1".into()));
        }
        let key = (m, depth);
        if let Some(x) = self.cache.lock().expect("member cache poisoned").get(&key) {
            return Ok(x.clone());
        }
        let raw = crate::constructors::instantiate_truncated(&self.template, self.index(m), depth)?;
        let model = if self.factor.is_one() { raw } else { scale_model(&raw, &self.factor) };
        self.cache.lock().expect("member cache poisoned").insert(key, model.clone());
        Ok(model)
    }

    fn scaled(&self, r: &Q) -> Family {
        Family {
            template: self.template.clone(),
            shift: self.shift,
            factor: &self.factor * r,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// `m ↦ factor·amp(m + shift)`, the final norm of member `m` (zero for
    /// atom families).
    pub fn final_norm_seq(&self) -> ScalarSeq {
        match self.template.amp() {
            Some(a) => ScalarSeq::scale(self.factor.clone(), ScalarSeq::shift(self.shift, a.clone())),
            None => ScalarSeq::constant(Q::zero()),
        }
    }

    /// `m ↦ sup(u + h)` of member `m` once it has stabilized.
    pub fn final_upper_seq(&self) -> ScalarSeq {
        match &self.template {
            Template::Atoms { h } => ScalarSeq::scale(self.factor.clone(), ScalarSeq::shift(self.shift, h.clone())),
            t => ScalarSeq::sum(self.final_norm_seq(), ScalarSeq::constant(&self.factor * t.cap())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Atom { h_top: Q, mme: bool },
    Blow { base: EntropyModel, children: Family, scale: ScalarSeq, sync: SyncRule },
}

/// Immutable, cheaply clonable model handle.
#[derive(Clone, PartialEq)]
pub struct EntropyModel(Arc<Node>);

impl fmt::Debug for EntropyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn make_atom(h_top: Q) -> Result<EntropyModel> {
    if h_top.is_negative() {
        return Err(AccumError::InvalidModel("atom entropy must be nonnegative".into()));
    }
    Ok(EntropyModel(Arc::new(Node::Atom { h_top, mme: true })))
}

pub fn make_blow_and_sew(
    base: EntropyModel,
    children: Family,
    scale: ScalarSeq,
    sync: SyncRule,
) -> Result<EntropyModel> {
    check_scale(&scale)?;
    if let SyncRule::Factor(0) = sync {
        return Err(AccumError::InvalidModel("sync factor must be positive".into()));
    }
    if !matches!(children.template, Template::Atoms { .. })
        && seq_limit(&scale)? != Limit::Finite(Q::zero())
    {
        return Err(AccumError::InvalidModel("families of composite children need a vanishing scale".into()));
    }
    let upper = ScalarSeq::product(scale.clone(), children.final_upper_seq());
    if let Limit::PosInf | Limit::NegInf = seq_limit(&upper)? {
        return Err(AccumError::InvalidModel("scaled child entropy is unbounded".into()));
    }
    seq_limit(&ScalarSeq::product(scale.clone(), children.final_norm_seq()))?;
    Ok(EntropyModel(Arc::new(Node::Blow { base, children, scale, sync })))
}

fn check_scale(scale: &ScalarSeq) -> Result<()> {
    let bad = |m: &str| Err(AccumError::InvalidModel(m.to_string()));
    if seq_direction(scale)?.0 == Direction::NotMonotone {
        return bad("scale must be a rational rule");
    }
    if !seq_nonnegative(scale, true)? {
        return bad("scale values must be positive");
    }
    match seq_sup(scale)? {
        Sup::Finite(s) if s <= Q::one() => Ok(()),
        _ => bad("scale values must not exceed 1"),
    }
}

/// Multiplies every entropy value of the model by `r > 0`.
pub fn scale_model(m: &EntropyModel, r: &Q) -> EntropyModel {
    match m.node() {
        Node::Atom { h_top, mme } => EntropyModel(Arc::new(Node::Atom { h_top: h_top * r, mme: *mme })),
        Node::Blow { base, children, scale, sync } => EntropyModel(Arc::new(Node::Blow {
            base: scale_model(base, r),
            children: children.scaled(r),
            scale: scale.clone(),
            sync: *sync,
        })),
    }
}

impl EntropyModel {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn is_atom(&self) -> bool {
        matches!(self.node(), Node::Atom { .. })
    }

    /// Identity key used by memo tables.
    pub fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Same model with every synchronization rule replaced by `sync`.
    pub fn with_sync(&self, sync: SyncRule) -> EntropyModel {
        match self.node() {
            Node::Atom { .. } => self.clone(),
            Node::Blow { base, children, scale, .. } => EntropyModel(Arc::new(Node::Blow {
                base: base.with_sync(sync),
                children: children.clone(),
                scale: scale.clone(),
                sync,
            })),
        }
    }

    /// Chain of base models from the top down to the innermost atom.
    pub fn base_chain(&self) -> Vec<EntropyModel> {
        let mut out = vec![self.clone()];
        let mut cur = self.clone();
        while let Node::Blow { base, .. } = cur.node() {
            out.push(base.clone());
            cur = base.clone();
        }
        out
    }

    /// The model whose points a `Copy(m)` step enters, together with its scale.
    fn copy_step(&self, m: u64) -> Result<(Q, EntropyModel)> {
        match self.node() {
            Node::Blow { children, scale, .. } => Ok((scale.eval(m), children.member(m)?)),
            Node::Atom { .. } => Err(AccumError::InvalidAddress("copy step below an atom".into())),
        }
    }

    /// Sub-model at the end of an address prefix together with the product
    /// of scales along it.
    pub fn resolve(&self, p: &ModelPoint) -> Result<(Q, EntropyModel)> {
        let mut factor = Q::one();
        let mut cur = self.clone();
        for step in &p.path {
            cur = match (step, cur.node()) {
                (Step::Base, Node::Blow { base, .. }) => base.clone(),
                (Step::Copy(m), _) => {
                    let (s, child) = cur.copy_step(*m)?;
                    factor *= s;
                    child
                }
                (Step::Base, Node::Atom { .. }) => {
                    return Err(AccumError::InvalidAddress(format!("{p}: base step below an atom")))
                }
            };
        }
        Ok((factor, cur))
    }
}

/// One step of a point address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Base,
    Copy(u64),
}

/// A point of the model space, addressed by the path from the top model to
/// an atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModelPoint {
    pub path: Vec<Step>,
}

impl ModelPoint {
    pub fn new(path: Vec<Step>) -> Self {
        ModelPoint { path }
    }

    /// The point reached by following base steps only.
    pub fn base_point(model: &EntropyModel) -> ModelPoint {
        ModelPoint { path: vec![Step::Base; model.base_chain().len() - 1] }
    }

    pub fn prepend(&self, s: Step) -> ModelPoint {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.push(s);
        path.extend_from_slice(&self.path);
        ModelPoint { path }
    }

    pub fn split_first(&self) -> Option<(Step, ModelPoint)> {
        self.path.split_first().map(|(s, rest)| (*s, ModelPoint { path: rest.to_vec() }))
    }
}

impl fmt::Display for ModelPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            return write!(f, "*");
        }
        let parts: Vec<String> = self
            .path
            .iter()
            .map(|s| match s {
                Step::Base => "B".to_string(),
                Step::Copy(m) => format!("C{m}"),
            })
            .collect();
        write!(f, "{}", parts.join("."))
    }
}

impl FromStr for ModelPoint {
    type Err = AccumError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "*" || s.is_empty() {
            return Ok(ModelPoint::default());
        }
        let path = s
            .split('.')
            .map(|p| match p {
                "B" => Ok(Step::Base),
                _ => p
                    .strip_prefix('C')
                    .and_then(|n| n.parse::<u64>().ok())
                    .filter(|m| *m >= 1)
                    .map(Step::Copy)
                    .ok_or_else(|| AccumError::InvalidAddress(format!("bad step {p:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelPoint { path })
    }
}

/// Entropy `h` at a point: scales along the path times the terminal atom's
/// entropy.
pub fn eval_h(model: &EntropyModel, p: &ModelPoint) -> Result<Q> {
    let (factor, end) = model.resolve(p)?;
    match end.node() {
        Node::Atom { h_top, .. } => Ok(factor * h_top),
        Node::Blow { .. } => Err(AccumError::InvalidAddress(format!("{p} does not end at an atom"))),
    }
}

/// `h_k` at a point, using the synchronized child index on copies.
pub fn eval_h_k(model: &EntropyModel, p: &ModelPoint, k: u64) -> Result<Q> {
    match (model.node(), p.split_first()) {
        (Node::Atom { h_top, .. }, None) => Ok(if k >= 1 { h_top.clone() } else { Q::zero() }),
        (Node::Blow { base, .. }, Some((Step::Base, rest))) => eval_h_k(base, &rest, k),
        (Node::Blow { children, scale, sync, .. }, Some((Step::Copy(m), rest))) => {
            let child = children.member(m)?;
            if m < sync.threshold(k) {
                Ok(scale.eval(m) * eval_h_k(&child, &rest, k)?)
            } else {
                // Still validates the remainder of the address.
                eval_h(&child, &rest)?;
                Ok(Q::zero())
            }
        }
        _ => Err(AccumError::InvalidAddress(format!("{p} does not fit the model"))),
    }
}

/// `τ_k = h − h_k`.
pub fn eval_tail(model: &EntropyModel, p: &ModelPoint, k: u64) -> Result<Q> {
    Ok(eval_h(model, p)? - eval_h_k(model, p, k)?)
}

/// Every point whose copy indices are at most `max_copy` and which passes
/// through at most `depth` copy steps.
pub fn sample_points(model: &EntropyModel, max_copy: u64, depth: usize) -> Result<Vec<ModelPoint>> {
    let mut out = Vec::new();
    collect_points(model, max_copy, depth, &mut Vec::new(), &mut out)?;
    Ok(out)
}

fn collect_points(
    model: &EntropyModel,
    max_copy: u64,
    depth: usize,
    prefix: &mut Vec<Step>,
    out: &mut Vec<ModelPoint>,
) -> Result<()> {
    match model.node() {
        Node::Atom { .. } => out.push(ModelPoint { path: prefix.clone() }),
        Node::Blow { base, children, .. } => {
            prefix.push(Step::Base);
            collect_points(base, max_copy, depth, prefix, out)?;
            prefix.pop();
            if depth > 0 {
                for m in 1..=max_copy {
                    prefix.push(Step::Copy(m));
                    collect_points(&children.member(m)?, max_copy, depth - 1, prefix, out)?;
                    prefix.pop();
                }
            }
        }
    }
    Ok(())
}

// JSON form: {"atom":{"h_top":"3/2"}} or {"blow":{"base":…,"children":…,"scale":…,"sync":"default"}}.

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelRepr {
    Atom {
        #[serde(with = "serde_q")]
        h_top: Q,
        #[serde(default = "yes")]
        mme: bool,
    },
    Blow { base: EntropyModel, children: FamilyRepr, scale: ScalarSeq, #[serde(default)] sync: SyncRule },
}

fn yes() -> bool {
    true
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    template: Template,
    #[serde(default)]
    shift: u64,
    #[serde(with = "serde_q", default = "Q::one")]
    factor: Q,
}

impl Serialize for EntropyModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self.node() {
            Node::Atom { h_top, mme } => ModelRepr::Atom { h_top: h_top.clone(), mme: *mme },
            Node::Blow { base, children, scale, sync } => ModelRepr::Blow {
                base: base.clone(),
                children: FamilyRepr {
                    template: children.template.clone(),
                    shift: children.shift,
                    factor: children.factor.clone(),
                },
                scale: scale.clone(),
                sync: *sync,
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for EntropyModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        match ModelRepr::deserialize(d)? {
            ModelRepr::Atom { h_top, mme } => {
                make_atom(h_top.clone()).map_err(D::Error::custom)?;
                Ok(EntropyModel(Arc::new(Node::Atom { h_top, mme })))
            }
            ModelRepr::Blow { base, children, scale, sync } => {
                let fam = Family::new(children.template, children.shift, children.factor).map_err(D::Error::custom)?;
                make_blow_and_sew(base, fam, scale, sync).map_err(D::Error::custom)
            }
        }
    }
}

impl EntropyModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("models always serialize")
    }

    pub fn from_json(s: &str) -> Result<EntropyModel> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn atoms_family(h: ScalarSeq) -> Family {
        Family::new(Template::Atoms { h }, 0, qi(1)).unwrap()
    }

    fn simple() -> EntropyModel {
        make_blow_and_sew(
            make_atom(qi(1)).unwrap(),
            atoms_family(ScalarSeq::constant(qi(2))),
            ScalarSeq::inv_succ(),
            SyncRule::Default,
        )
        .unwrap()
    }

    #[test]
    fn atom_candidate() {
        let a = make_atom(q(3, 2)).unwrap();
        let p = ModelPoint::default();
        assert_eq!(eval_h_k(&a, &p, 0).unwrap(), qi(0));
        assert_eq!(eval_h_k(&a, &p, 1).unwrap(), q(3, 2));
        assert_eq!(eval_tail(&a, &p, 0).unwrap(), q(3, 2));
        assert!(make_atom(qi(-1)).is_err());
    }

    #[test]
    fn copies_follow_sync() {
        let m = simple();
        // Copy 3 has scale 1/4 and child entropy 2.
        let p: ModelPoint = "C3".parse().unwrap();
        assert_eq!(eval_h(&m, &p).unwrap(), q(1, 2));
        assert_eq!(eval_h_k(&m, &p, 3).unwrap(), qi(0));
        assert_eq!(eval_tail(&m, &p, 3).unwrap(), q(1, 2));
        assert_eq!(eval_h_k(&m, &p, 4).unwrap(), q(1, 2));
        assert_eq!(eval_h(&m, &"B".parse().unwrap()).unwrap(), qi(1));
        assert!(eval_h(&m, &"B.B".parse().unwrap()).is_err());
    }

    #[test]
    fn rejects_bad_scale() {
        let r = make_blow_and_sew(
            make_atom(qi(1)).unwrap(),
            atoms_family(ScalarSeq::constant(qi(1))),
            ScalarSeq::constant(qi(2)),
            SyncRule::Default,
        );
        assert!(matches!(r, Err(AccumError::InvalidModel(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = simple();
        let j = m.to_json();
        assert!(j.starts_with(r#"{"blow":{"base":{"atom":{"h_top":"1""#));
        assert!(j.contains(r#""sync":"default""#));
        assert_eq!(EntropyModel::from_json(&j).unwrap(), m);
        let a = EntropyModel::from_json(r#"{"atom":{"h_top":"3/2"}}"#).unwrap();
        assert_eq!(a, make_atom(q(3, 2)).unwrap());
    }

    #[test]
    fn addresses_parse() {
        let p: ModelPoint = "B.C12.B".parse().unwrap();
        assert_eq!(p.to_string(), "B.C12.B");
        assert!("C0".parse::<ModelPoint>().is_err());
        assert_eq!(sample_points(&simple(), 3, 1).unwrap().len(), 4);
    }
}
