//! Closed-form rational sequences `m ↦ value` (for `m ≥ 1`) with exactly
//! computable limits and suprema.
//!
//! Every rule except `LogRatio` is a rational function of `m`. The algebra
//! handles those through a polynomial quotient: the limit follows from
//! degrees, and the eventual direction follows from the sign of the
//! derivative numerator beyond a bound on its positive roots. `LogRatio` is handled
//! by its dyadic block structure.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{AccumError, Result};
use crate::rational::{fmt_q, serde_q, Q};

/// Upper bound on how many initial terms are evaluated when certifying a
/// supremum.
const MAX_SCAN: u64 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ScalarSeq {
    Const {
        #[serde(with = "serde_q")]
        c: Q,
    },
    /// `c·m`
    LinearUp {
        #[serde(with = "serde_q")]
        c: Q,
    },
    /// `c/m`
    Harmonic {
        #[serde(with = "serde_q")]
        c: Q,
    },
    /// `c·(1 − 1/(m+1))`
    ApproachUp {
        #[serde(with = "serde_q")]
        c: Q,
    },
    /// `c·⌊log₂(m+1)⌋/m`
    LogRatio {
        #[serde(with = "serde_q")]
        c: Q,
    },
    Product {
        left: Box<ScalarSeq>,
        right: Box<ScalarSeq>,
    },
    Scale {
        #[serde(with = "serde_q")]
        q: Q,
        seq: Box<ScalarSeq>,
    },
    /// Extension rule: pointwise sum.
    Sum {
        left: Box<ScalarSeq>,
        right: Box<ScalarSeq>,
    },
    /// Extension rule: index shift `m ↦ seq(m + k)`.
    Shift { k: u64, seq: Box<ScalarSeq> },
}

/// Exact limit of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum Limit {
    Finite(Q),
    PosInf,
    NegInf,
}

impl Limit {
    pub fn finite(&self) -> Option<&Q> {
        match self {
            Limit::Finite(q) => Some(q),
            _ => None,
        }
    }
}

impl std::fmt::Display for Limit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Limit::Finite(q) => write!(f, "{}", fmt_q(q)),
            Limit::PosInf => write!(f, "+inf"),
            Limit::NegInf => write!(f, "-inf"),
        }
    }
}

/// Supremum over `m ≥ 1`, either a rational or `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub enum Sup {
    Finite(Q),
    PosInf,
}

impl Sup {
    pub fn finite(&self) -> Option<&Q> {
        match self {
            Sup::Finite(q) => Some(q),
            Sup::PosInf => None,
        }
    }
}

/// Eventual direction of a sequence beyond `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    Constant,
    /// Not eventually monotone (the `LogRatio` family, which jumps up at
    /// every `m = 2^k − 1`).
    NotMonotone,
}

impl ScalarSeq {
    pub fn constant(c: Q) -> Self {
        ScalarSeq::Const { c }
    }
    pub fn linear_up(c: Q) -> Self {
        ScalarSeq::LinearUp { c }
    }
    pub fn harmonic(c: Q) -> Self {
        ScalarSeq::Harmonic { c }
    }
    pub fn approach_up(c: Q) -> Self {
        ScalarSeq::ApproachUp { c }
    }
    pub fn log_ratio(c: Q) -> Self {
        ScalarSeq::LogRatio { c }
    }
    pub fn product(a: ScalarSeq, b: ScalarSeq) -> Self {
        ScalarSeq::Product { left: Box::new(a), right: Box::new(b) }
    }
    pub fn scale(q: Q, s: ScalarSeq) -> Self {
        ScalarSeq::Scale { q, seq: Box::new(s) }
    }
    pub fn sum(a: ScalarSeq, b: ScalarSeq) -> Self {
        ScalarSeq::Sum { left: Box::new(a), right: Box::new(b) }
    }
    pub fn shift(k: u64, s: ScalarSeq) -> Self {
        if k == 0 {
            s
        } else {
            ScalarSeq::Shift { k, seq: Box::new(s) }
        }
    }
    /// `1/(m+1)`, the canonical scale sequence.
    pub fn inv_succ() -> Self {
        Self::product(Self::harmonic(Q::one()), Self::approach_up(Q::one()))
    }

    pub fn eval(&self, m: u64) -> Q {
        seq_eval(self, m)
    }

    /// Rational-function form, when the rule tree contains no `LogRatio`.
    fn ratfn(&self) -> Option<RatFn> {
        use ScalarSeq::*;
        Some(match self {
            Const { c } => RatFn::new(vec![c.clone()], vec![Q::one()]),
            LinearUp { c } => RatFn::new(vec![Q::zero(), c.clone()], vec![Q::one()]),
            Harmonic { c } => RatFn::new(vec![c.clone()], vec![Q::zero(), Q::one()]),
            ApproachUp { c } => RatFn::new(vec![Q::zero(), c.clone()], vec![Q::one(), Q::one()]),
            LogRatio { .. } => return None,
            Product { left, right } => left.ratfn()?.mul(&right.ratfn()?),
            Scale { q, seq } => seq.ratfn()?.scale(q),
            Sum { left, right } => left.ratfn()?.add(&right.ratfn()?),
            Shift { k, seq } => seq.ratfn()?.shift(*k),
        })
    }
}

/// Exact value at `m ≥ 1` (an index of 0 is treated as 1).
pub fn seq_eval(s: &ScalarSeq, m: u64) -> Q {
    use ScalarSeq::*;
    let m = m.max(1);
    let mq = Q::from_integer(BigInt::from(m));
    match s {
        Const { c } => c.clone(),
        LinearUp { c } => c * &mq,
        Harmonic { c } => c / &mq,
        ApproachUp { c } => c * (Q::one() - Q::one() / (&mq + Q::one())),
        LogRatio { c } => {
            let lg = 63 - (m + 1).leading_zeros() as u64;
            c * Q::from_integer(BigInt::from(lg)) / &mq
        }
        Product { left, right } => seq_eval(left, m) * seq_eval(right, m),
        Scale { q, seq } => q * seq_eval(seq, m),
        Sum { left, right } => seq_eval(left, m) + seq_eval(right, m),
        Shift { k, seq } => seq_eval(seq, m + k),
    }
}

/// Exact limit as `m → ∞`.
pub fn seq_limit(s: &ScalarSeq) -> Result<Limit> {
    if let Some(r) = s.ratfn() {
        return Ok(r.limit());
    }
    use ScalarSeq::*;
    match s {
        LogRatio { .. } => Ok(Limit::Finite(Q::zero())),
        Shift { seq, .. } => seq_limit(seq),
        Scale { q, seq } => Ok(scale_limit(q, seq_limit(seq)?)),
        Sum { left, right } => {
            let (a, b) = (seq_limit(left)?, seq_limit(right)?);
            match (a, b) {
                (Limit::Finite(x), Limit::Finite(y)) => Ok(Limit::Finite(x + y)),
                (Limit::PosInf, Limit::NegInf) | (Limit::NegInf, Limit::PosInf) => Err(
                    AccumError::IndeterminateLimit(format!("infinite difference in {s:?}")),
                ),
                (Limit::PosInf, _) | (_, Limit::PosInf) => Ok(Limit::PosInf),
                _ => Ok(Limit::NegInf),
            }
        }
        Product { left, right } => product_limit(left, right),
        _ => unreachable!("rational rules handled above"),
    }
}

fn scale_limit(q: &Q, l: Limit) -> Limit {
    match l {
        Limit::Finite(x) => Limit::Finite(q * x),
        _ if q.is_zero() => Limit::Finite(Q::zero()),
        Limit::PosInf if q.is_positive() => Limit::PosInf,
        Limit::PosInf => Limit::NegInf,
        Limit::NegInf if q.is_positive() => Limit::NegInf,
        Limit::NegInf => Limit::PosInf,
    }
}

/// Growth of a rational function paired with a bare `LogRatio` factor is
/// the only supported `∞·0` pattern: `m^d · log(m)/m` tends to `±∞` when
/// `d ≥ 1`.
fn product_limit(left: &ScalarSeq, right: &ScalarSeq) -> Result<Limit> {
    let (a, b) = (seq_limit(left)?, seq_limit(right)?);
    let sign_of = |l: &Limit| match l {
        Limit::PosInf => 1,
        Limit::NegInf => -1,
        Limit::Finite(x) if x.is_positive() => 1,
        Limit::Finite(x) if x.is_negative() => -1,
        _ => 0,
    };
    match (&a, &b) {
        (Limit::Finite(x), Limit::Finite(y)) => Ok(Limit::Finite(x * y)),
        (Limit::Finite(x), inf) | (inf, Limit::Finite(x)) if !x.is_zero() => {
            Ok(scale_limit(x, inf.clone()))
        }
        (Limit::Finite(_), _) | (_, Limit::Finite(_)) => {
            let (rat, other) = if left.ratfn().is_some() { (left, right) } else { (right, left) };
            match (rat.ratfn(), other) {
                (Some(r), ScalarSeq::LogRatio { c }) if r.limit() != Limit::Finite(Q::zero()) => {
                    if c.is_zero() {
                        return Ok(Limit::Finite(Q::zero()));
                    }
                    let s = sign_of(&r.limit()) * if c.is_positive() { 1 } else { -1 };
                    Ok(if s > 0 { Limit::PosInf } else { Limit::NegInf })
                }
                _ => Err(AccumError::IndeterminateLimit(format!(
                    "0·inf product outside supported patterns: {left:?} x {right:?}"
                ))),
            }
        }
        _ => Ok(if sign_of(&a) * sign_of(&b) > 0 { Limit::PosInf } else { Limit::NegInf }),
    }
}

/// Eventual direction and the index from which it holds.
pub fn seq_direction(s: &ScalarSeq) -> Result<(Direction, u64)> {
    match s.ratfn() {
        Some(r) => r.direction(),
        None => Ok((Direction::NotMonotone, 1)),
    }
}

/// Exact supremum over `m ≥ 1`.
pub fn seq_sup(s: &ScalarSeq) -> Result<Sup> {
    tail_sup(s, 1)
}

/// Exact supremum over `m ≥ n`.
pub fn tail_sup(s: &ScalarSeq, n: u64) -> Result<Sup> {
    let n = n.max(1);
    if let Some(r) = s.ratfn() {
        return r.tail_sup(n);
    }
    use ScalarSeq::*;
    match s {
        LogRatio { c } => Ok(Sup::Finite(log_ratio_tail_sup(c, n))),
        Shift { k, seq } => tail_sup(seq, n + k),
        Scale { q, seq } if !q.is_negative() => Ok(match tail_sup(seq, n)? {
            Sup::Finite(x) => Sup::Finite(q * x),
            Sup::PosInf if q.is_zero() => Sup::Finite(Q::zero()),
            Sup::PosInf => Sup::PosInf,
        }),
        Product { left, right } => product_tail_sup(s, left, right, n),
        _ => Err(AccumError::IndeterminateLimit(format!("supremum not certifiable for {s:?}"))),
    }
}

fn log_ratio_tail_sup(c: &Q, n: u64) -> Q {
    if !c.is_positive() {
        return Q::zero();
    }
    // Values decrease inside each dyadic block [2^k − 1, 2^{k+1} − 2] and
    // the block-start values k/(2^k − 1) decrease in k, so the tail
    // supremum is attained at n or at the next block start.
    let lg = 63 - (n + 1).leading_zeros() as u64;
    let next_start = (1u64 << (lg + 1)) - 1;
    let a = seq_eval(&ScalarSeq::log_ratio(c.clone()), n);
    let b = seq_eval(&ScalarSeq::log_ratio(c.clone()), next_start);
    if a >= b {
        a
    } else {
        b
    }
}

/// Tail supremum of `R · X` with `R` a rational function that is
/// eventually nonnegative and bounded and `X` a structurally nonnegative
/// factor. Terms are scanned until the envelope
/// `sup_{m' > m} R · sup_{m' > m} X` drops to the running maximum.
fn product_tail_sup(s: &ScalarSeq, left: &ScalarSeq, right: &ScalarSeq, n: u64) -> Result<Sup> {
    let uncertified = || AccumError::IndeterminateLimit(format!("supremum not certifiable for {s:?}"));
    if seq_limit(s)? == Limit::PosInf {
        return Ok(Sup::PosInf);
    }
    let (rat, other) = match (left.ratfn(), right.ratfn()) {
        (Some(r), None) => (r, right),
        (None, Some(r)) => (r, left),
        _ => return Err(uncertified()),
    };
    if !structurally_nonneg(other) {
        return Err(uncertified());
    }
    let (_, thr) = rat.direction()?;
    let start = n.max(thr);
    let lim_ok = matches!(rat.limit(), Limit::Finite(ref l) if !l.is_negative());
    if !lim_ok || rat.eval(start).is_negative() {
        return Err(uncertified());
    }
    let mut best: Option<Q> = None;
    let mut m = n;
    loop {
        let v = seq_eval(s, m);
        best = Some(match best {
            Some(b) if b >= v => b,
            _ => v,
        });
        if m >= start {
            let r_tail = match rat.tail_sup(m + 1)? {
                Sup::Finite(x) => x,
                Sup::PosInf => return Err(uncertified()),
            };
            let x_tail = match tail_sup(other, m + 1)? {
                Sup::Finite(x) => x,
                Sup::PosInf => return Err(uncertified()),
            };
            let b = best.clone().expect("at least one value");
            if r_tail * x_tail <= b {
                return Ok(Sup::Finite(b));
            }
        }
        m += 1;
        if m - n > MAX_SCAN {
            return Err(AccumError::IndeterminateLimit(format!("supremum scan exhausted for {s:?}")));
        }
    }
}

fn structurally_nonneg(s: &ScalarSeq) -> bool {
    use ScalarSeq::*;
    match s {
        Const { c } | LinearUp { c } | Harmonic { c } | ApproachUp { c } | LogRatio { c } => {
            !c.is_negative()
        }
        Product { left, right } | Sum { left, right } => {
            structurally_nonneg(left) && structurally_nonneg(right)
        }
        Scale { q, seq } => !q.is_negative() && structurally_nonneg(seq),
        Shift { seq, .. } => structurally_nonneg(seq),
    }
}

/// True when every term `m ≥ 1` is `≥ 0` (or `> 0` when `strict`).
pub fn seq_nonnegative(s: &ScalarSeq, strict: bool) -> Result<bool> {
    let ok = |v: &Q| if strict { v.is_positive() } else { !v.is_negative() };
    match s.ratfn() {
        Some(r) => {
            let (dir, thr) = r.direction()?;
            for m in 1..=thr {
                let x = Q::from_integer(BigInt::from(m));
                if r.den.eval(&x).is_zero() || !ok(&r.eval(m)) {
                    return Ok(false);
                }
            }
            // Beyond the threshold the sequence is strictly monotone or
            // constant, so it stays on the side of its value at `thr` or of
            // its limit.
            Ok(match (dir, r.limit()) {
                (Direction::Decreasing, Limit::Finite(l)) => !l.is_negative(),
                (Direction::Decreasing, _) => false,
                _ => true,
            })
        }
        None if strict => Ok(structurally_pos(s)),
        None => Ok(structurally_nonneg(s)),
    }
}

fn structurally_pos(s: &ScalarSeq) -> bool {
    use ScalarSeq::*;
    match s {
        Const { c } | LinearUp { c } | Harmonic { c } | ApproachUp { c } | LogRatio { c } => {
            c.is_positive()
        }
        Product { left, right } => structurally_pos(left) && structurally_pos(right),
        Sum { left, right } => {
            (structurally_pos(left) && structurally_nonneg(right))
                || (structurally_nonneg(left) && structurally_pos(right))
        }
        Scale { q, seq } => q.is_positive() && structurally_pos(seq),
        Shift { seq, .. } => structurally_pos(seq),
    }
}

/// Polynomial with rational coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
struct Poly(Vec<Q>);

impl Poly {
    fn trimmed(mut v: Vec<Q>) -> Poly {
        while v.last().is_some_and(|c| c.is_zero()) {
            v.pop();
        }
        Poly(v)
    }
    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
    fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
    fn lead(&self) -> Q {
        self.0.last().cloned().unwrap_or_else(Q::zero)
    }
    fn eval(&self, x: &Q) -> Q {
        let mut acc = Q::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
    fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly(Vec::new());
        }
        let mut v = vec![Q::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::trimmed(v)
    }
    fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        let v = (0..n)
            .map(|i| {
                self.0.get(i).cloned().unwrap_or_else(Q::zero)
                    + o.0.get(i).cloned().unwrap_or_else(Q::zero)
            })
            .collect();
        Poly::trimmed(v)
    }
    fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }
    fn derivative(&self) -> Poly {
        let v = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * Q::from_integer(BigInt::from(i as u64)))
            .collect();
        Poly::trimmed(v)
    }
    /// `p(x + k)` by Horner composition.
    fn shift(&self, k: u64) -> Poly {
        let lin = Poly(vec![Q::from_integer(BigInt::from(k)), Q::one()]);
        let mut acc = Poly(Vec::new());
        for c in self.0.iter().rev() {
            acc = acc.mul(&lin).add(&Poly::trimmed(vec![c.clone()]));
        }
        acc
    }
    /// Every positive real root lies below this integer (Kioustelidis:
    /// twice the largest `(|a_i|/|a_n|)^(1/(n-i))` over coefficients whose
    /// sign differs from the leading one; zero when there are none).
    fn positive_root_bound(&self) -> u64 {
        if self.degree() == 0 {
            return 0;
        }
        let n = self.degree();
        let lead = self.lead();
        let mut t: BigInt = BigInt::zero();
        for (i, c) in self.0[..n].iter().enumerate() {
            if c.is_zero() || c.is_positive() == lead.is_positive() {
                continue;
            }
            let r = (c / &lead).abs();
            // ceil(r^(1/k)) <= floor(ceil(r)^(1/k)) + 1
            let k = (n - i) as u32;
            let root: BigInt = r.ceil().to_integer().nth_root(k) + 1;
            if root > t {
                t = root;
            }
        }
        (t * BigInt::from(2u8)).to_u64().unwrap_or(u64::MAX)
    }
}

/// Quotient of polynomials in `m`.
#[derive(Clone, Debug, PartialEq)]
struct RatFn {
    num: Poly,
    den: Poly,
}

impl RatFn {
    fn new(num: Vec<Q>, den: Vec<Q>) -> RatFn {
        RatFn { num: Poly::trimmed(num), den: Poly::trimmed(den) }
    }
    fn mul(&self, o: &RatFn) -> RatFn {
        RatFn { num: self.num.mul(&o.num), den: self.den.mul(&o.den) }
    }
    fn add(&self, o: &RatFn) -> RatFn {
        RatFn { num: self.num.mul(&o.den).add(&o.num.mul(&self.den)), den: self.den.mul(&o.den) }
    }
    fn scale(&self, q: &Q) -> RatFn {
        RatFn { num: self.num.mul(&Poly::trimmed(vec![q.clone()])), den: self.den.clone() }
    }
    fn shift(&self, k: u64) -> RatFn {
        RatFn { num: self.num.shift(k), den: self.den.shift(k) }
    }
    fn eval(&self, m: u64) -> Q {
        let x = Q::from_integer(BigInt::from(m));
        self.num.eval(&x) / self.den.eval(&x)
    }
    fn limit(&self) -> Limit {
        if self.num.is_zero() {
            return Limit::Finite(Q::zero());
        }
        let (dn, dd) = (self.num.degree(), self.den.degree());
        match dn.cmp(&dd) {
            Ordering::Less => Limit::Finite(Q::zero()),
            Ordering::Equal => Limit::Finite(self.num.lead() / self.den.lead()),
            Ordering::Greater => {
                if (self.num.lead() / self.den.lead()).is_positive() {
                    Limit::PosInf
                } else {
                    Limit::NegInf
                }
            }
        }
    }
    /// Sign of `f'` is the sign of `num'·den − num·den'` wherever the
    /// denominator does not vanish; beyond the root bounds of both
    /// polynomials that sign is the sign of the leading coefficient.
    fn direction(&self) -> Result<(Direction, u64)> {
        let d = self.num.derivative().mul(&self.den).add(&self.num.mul(&self.den.derivative()).neg());
        let thr = d.positive_root_bound().max(self.den.positive_root_bound()).max(1);
        if thr > MAX_SCAN {
            return Err(AccumError::IndeterminateLimit("monotonicity threshold too large".into()));
        }
        let dir = if d.is_zero() {
            Direction::Constant
        } else if d.lead().is_positive() {
            Direction::Increasing
        } else {
            Direction::Decreasing
        };
        // Recheck the denominator sign cannot flip: beyond its root bound
        // it has no roots, and up to it every term is evaluated directly.
        Ok((dir, thr))
    }
    fn tail_sup(&self, n: u64) -> Result<Sup> {
        let lim = self.limit();
        if lim == Limit::PosInf {
            return Ok(Sup::PosInf);
        }
        let (dir, thr) = self.direction()?;
        let hi = thr.max(n);
        let mut best: Option<Q> = None;
        for m in n..=hi {
            if self.den.eval(&Q::from_integer(BigInt::from(m))).is_zero() {
                return Err(AccumError::IndeterminateLimit(format!("pole at m = {m}")));
            }
            let v = self.eval(m);
            best = Some(match best {
                Some(b) if b >= v => b,
                _ => v,
            });
        }
        let mut b = best.expect("nonempty range");
        if dir == Direction::Increasing {
            if let Limit::Finite(l) = lim {
                if l > b {
                    b = l;
                }
            }
        }
        Ok(Sup::Finite(b))
    }
}
