//! Countable ordinals below epsilon-zero in Cantor normal form.
//!
//! An [`Ordinal`] is a list of `(exponent, coefficient)` pairs with strictly
//! decreasing exponents and positive coefficients, so structural equality
//! coincides with ordinal equality. The text form is `w^{E}*c + ...`, for
//! instance `w^2*3 + w*1 + 4` or `w^{w^1}`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AccumError, Result};

/// Environment variable overriding the default tower-height limit.
pub const HEIGHT_ENV: &str = "ACCUM_ORDINAL_MAX_HEIGHT";

/// Tower-height limit used when the environment does not override it.
pub const DEFAULT_MAX_HEIGHT: usize = 4;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Ordinal {
    terms: Vec<(Ordinal, u64)>,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::finite(1)
    }

    pub fn finite(n: u64) -> Self {
        if n == 0 {
            Self::zero()
        } else {
            Ordinal { terms: vec![(Self::zero(), n)] }
        }
    }

    pub fn omega() -> Self {
        Self::omega_pow(Self::one())
    }

    /// `ω^e`.
    pub fn omega_pow(e: Ordinal) -> Self {
        Ordinal { terms: vec![(e, 1)] }
    }

    /// `ω^e · c`; zero when `c = 0`.
    pub fn monomial(e: Ordinal, c: u64) -> Self {
        if c == 0 {
            Self::zero()
        } else {
            Ordinal { terms: vec![(e, c)] }
        }
    }

    /// Builds an ordinal from terms, checking the normal-form invariants.
    pub fn from_terms(terms: Vec<(Ordinal, u64)>) -> Result<Self> {
        for (i, (e, c)) in terms.iter().enumerate() {
            if *c == 0 {
                return Err(AccumError::InvalidOrdinal("zero coefficient in normal form".into()));
            }
            if i > 0 && terms[i - 1].0.cmp(e) != Ordering::Greater {
                return Err(AccumError::InvalidOrdinal("exponents must strictly decrease".into()));
            }
        }
        Ok(Ordinal { terms })
    }

    pub fn terms(&self) -> &[(Ordinal, u64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|(e, _)| e.is_zero())
    }

    pub fn as_finite(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [(e, c)] if e.is_zero() => Some(*c),
            _ => None,
        }
    }

    pub fn is_successor(&self) -> bool {
        matches!(self.terms.last(), Some((e, _)) if e.is_zero())
    }

    pub fn is_limit(&self) -> bool {
        matches!(self.terms.last(), Some((e, _)) if !e.is_zero())
    }

    /// The immediate predecessor of a successor ordinal.
    pub fn predecessor(&self) -> Option<Ordinal> {
        if !self.is_successor() {
            return None;
        }
        let mut terms = self.terms.clone();
        let last = terms.last_mut().expect("successor has a last term");
        if last.1 == 1 {
            terms.pop();
        } else {
            last.1 -= 1;
        }
        Some(Ordinal { terms })
    }

    pub fn succ(&self) -> Ordinal {
        ord_add(self, &Ordinal::one())
    }

    pub fn leading_exponent(&self) -> Option<&Ordinal> {
        self.terms.first().map(|(e, _)| e)
    }

    /// Number of nested exponent levels; `0` has height 0, `1` height 1,
    /// `ω` height 2 and `ω^ω` height 3.
    pub fn height(&self) -> usize {
        self.terms.iter().map(|(e, _)| 1 + e.height()).max().unwrap_or(0)
    }

    /// Rejects ordinals above the configured tower-height limit.
    pub fn check_height(&self) -> Result<()> {
        let limit = max_height();
        let h = self.height();
        if h > limit {
            Err(AccumError::HeightExceeded { height: h, limit })
        } else {
            Ok(())
        }
    }

    /// Coefficient of `ω^e` in the normal form (zero when absent).
    pub fn coefficient_of(&self, e: &Ordinal) -> u64 {
        self.terms.iter().find(|(x, _)| x == e).map(|(_, c)| *c).unwrap_or(0)
    }
}

/// Tower-height limit, read from [`HEIGHT_ENV`] when set to a positive integer.
pub fn max_height() -> usize {
    std::env::var(HEIGHT_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_MAX_HEIGHT)
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        ord_compare(self, other)
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic comparison of normal forms.
pub fn ord_compare(a: &Ordinal, b: &Ordinal) -> Ordering {
    for ((ea, ca), (eb, cb)) in a.terms.iter().zip(b.terms.iter()) {
        match ord_compare(ea, eb) {
            Ordering::Equal => {}
            o => return o,
        }
        match ca.cmp(cb) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.terms.len().cmp(&b.terms.len())
}

/// Ordinal sum: terms of `a` below the leading exponent of `b` are absorbed.
pub fn ord_add(a: &Ordinal, b: &Ordinal) -> Ordinal {
    let Some((lead, lead_c)) = b.terms.first() else {
        return a.clone();
    };
    let mut terms: Vec<(Ordinal, u64)> = Vec::with_capacity(a.terms.len() + b.terms.len());
    let mut merged = *lead_c;
    for (e, c) in &a.terms {
        match ord_compare(e, lead) {
            Ordering::Greater => terms.push((e.clone(), *c)),
            Ordering::Equal => merged += c,
            Ordering::Less => break,
        }
    }
    terms.push((lead.clone(), merged));
    terms.extend(b.terms[1..].iter().cloned());
    Ordinal { terms }
}

/// `a · p` for a positive integer `p`.
pub fn ord_nat_mul(a: &Ordinal, p: u64) -> Result<Ordinal> {
    if p == 0 {
        return Err(AccumError::InvalidArgument("natural multiplier must be positive".into()));
    }
    if a.is_zero() {
        return Ok(Ordinal::zero());
    }
    let mut terms = a.terms.clone();
    terms[0].1 = terms[0]
        .1
        .checked_mul(p)
        .ok_or_else(|| AccumError::InvalidArgument("coefficient overflow".into()))?;
    Ok(Ordinal { terms })
}

/// True for additively indecomposable ordinals `ω^β` (including `1 = ω^0`).
pub fn is_irreducible(a: &Ordinal) -> bool {
    matches!(a.terms.as_slice(), [(_, 1)])
}

/// The unique `ρ` with `ζ + ρ = γ`, defined for `ζ ≤ γ`.
pub fn left_sub(zeta: &Ordinal, gamma: &Ordinal) -> Result<Ordinal> {
    if ord_compare(zeta, gamma) == Ordering::Greater {
        return Err(AccumError::InvalidArgument(format!(
            "left subtraction needs {zeta} <= {gamma}"
        )));
    }
    for (i, (ez, cz)) in zeta.terms.iter().enumerate() {
        let (eg, cg) = &gamma.terms[i];
        if ez == eg && cz == cg {
            continue;
        }
        let mut terms = Vec::new();
        if ez == eg {
            terms.push((eg.clone(), cg - cz));
        } else {
            terms.push((eg.clone(), *cg));
        }
        terms.extend(gamma.terms[i + 1..].iter().cloned());
        return Ok(Ordinal { terms });
    }
    Ok(Ordinal { terms: gamma.terms[zeta.terms.len()..].to_vec() })
}

/// Canonical fundamental sequence of a limit ordinal at index `m ≥ 1`:
/// `ω^{β+1}[m] = ω^β·m`, `ω^λ[m] = ω^{λ[m]}`, and the prefix of the
/// normal form is kept unchanged.
pub fn fundamental_sequence(a: &Ordinal, m: u64) -> Result<Ordinal> {
    if m == 0 {
        return Err(AccumError::InvalidArgument("fundamental sequence index starts at 1".into()));
    }
    if !a.is_limit() {
        return Err(AccumError::NotLimit(a.to_string()));
    }
    let mut prefix = a.terms.clone();
    let (g, c) = prefix.pop().expect("limit has a last term");
    if c > 1 {
        prefix.push((g.clone(), c - 1));
    }
    let head = Ordinal { terms: prefix };
    let tail = match g.predecessor() {
        Some(gp) => Ordinal::monomial(gp, m),
        None => Ordinal::omega_pow(fundamental_sequence(&g, m)?),
    };
    Ok(ord_add(&head, &tail))
}

fn write_exponent(f: &mut fmt::Formatter<'_>, e: &Ordinal) -> fmt::Result {
    match e.as_finite() {
        Some(n) => write!(f, "w^{n}"),
        None => write!(f, "w^{{{e}}}"),
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if e.is_zero() {
                write!(f, "{c}")?;
            } else {
                write_exponent(f, e)?;
                if *c != 1 {
                    write!(f, "*{c}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ordinal({self})")
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> AccumError {
        AccumError::OrdinalParse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, ch: u8) -> bool {
        if self.peek() == Some(ch) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> std::result::Result<u64, AccumError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a natural number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii digits")
            .parse::<u64>()
            .map_err(|_| AccumError::OrdinalParse { pos: start, msg: "number too large".into() })
    }

    fn sum(&mut self) -> std::result::Result<Ordinal, AccumError> {
        let mut acc = self.term()?;
        while self.eat(b'+') {
            let t = self.term()?;
            acc = ord_add(&acc, &t);
        }
        Ok(acc)
    }

    fn term(&mut self) -> std::result::Result<Ordinal, AccumError> {
        match self.peek() {
            Some(b'w') => {
                self.pos += 1;
                let exp = if self.eat(b'^') {
                    if self.eat(b'{') {
                        let e = self.sum()?;
                        if !self.eat(b'}') {
                            return Err(self.err("expected '}'"));
                        }
                        e
                    } else if self.peek() == Some(b'w') {
                        self.term_power_only()?
                    } else {
                        Ordinal::finite(self.number()?)
                    }
                } else {
                    Ordinal::one()
                };
                let coef = if self.eat(b'*') { self.number()? } else { 1 };
                if coef == 0 {
                    return Ok(Ordinal::zero());
                }
                Ok(Ordinal::monomial(exp, coef))
            }
            Some(c) if c.is_ascii_digit() => Ok(Ordinal::finite(self.number()?)),
            Some(_) => Err(self.err("expected 'w' or a natural number")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    /// `w^w^...` without braces binds only the bare power.
    fn term_power_only(&mut self) -> std::result::Result<Ordinal, AccumError> {
        if !self.eat(b'w') {
            return Err(self.err("expected 'w'"));
        }
        let exp = if self.eat(b'^') {
            if self.eat(b'{') {
                let e = self.sum()?;
                if !self.eat(b'}') {
                    return Err(self.err("expected '}'"));
                }
                e
            } else if self.peek() == Some(b'w') {
                self.term_power_only()?
            } else {
                Ordinal::finite(self.number()?)
            }
        } else {
            Ordinal::one()
        };
        Ok(Ordinal::omega_pow(exp))
    }
}

impl FromStr for Ordinal {
    type Err = AccumError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut p = Parser { src: s.as_bytes(), pos: 0 };
        let o = p.sum()?;
        if p.peek().is_some() {
            return Err(p.err("trailing input"));
        }
        Ok(o)
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(s: &str) -> Ordinal {
        s.parse().unwrap()
    }

    #[test]
    fn compare_examples() {
        assert_eq!(ord_compare(&o("w"), &o("3")), Ordering::Greater);
        assert_eq!(ord_compare(&o("w^2 + 1"), &o("w^2+1")), Ordering::Equal);
        assert_eq!(ord_compare(&o("w*2"), &o("w^2")), Ordering::Less);
    }

    #[test]
    fn add_examples() {
        assert_eq!(ord_add(&o("w"), &o("1")), o("w + 1"));
        assert_eq!(ord_add(&o("1"), &o("w")), o("w"));
        assert_eq!(ord_add(&o("w + 1"), &o("w")), o("w*2"));
    }

    #[test]
    fn nat_mul_examples() {
        assert_eq!(ord_nat_mul(&o("w"), 3).unwrap(), o("w*3"));
        assert_eq!(ord_nat_mul(&o("w^2 + w"), 2).unwrap(), o("w^2*2 + w"));
        assert_eq!(ord_nat_mul(&o("5"), 4).unwrap(), o("20"));
        assert!(ord_nat_mul(&o("w"), 0).is_err());
    }

    #[test]
    fn irreducible_examples() {
        assert!(is_irreducible(&o("w^2")));
        assert!(!is_irreducible(&o("w^2 + w")));
        assert!(is_irreducible(&o("1")));
        assert!(!is_irreducible(&o("0")));
    }

    #[test]
    fn fundamental_examples() {
        assert_eq!(fundamental_sequence(&o("w"), 5).unwrap(), o("5"));
        assert_eq!(fundamental_sequence(&o("w^2"), 3).unwrap(), o("w*3"));
        assert_eq!(fundamental_sequence(&o("w^w"), 2).unwrap(), o("w^2"));
        assert_eq!(fundamental_sequence(&o("w^2 + w*2"), 4).unwrap(), o("w^2 + w + 4"));
        assert!(fundamental_sequence(&o("w + 1"), 1).is_err());
        assert!(fundamental_sequence(&o("0"), 1).is_err());
    }

    #[test]
    fn text_forms() {
        assert_eq!(o("w^2*3 + w*1 + 4").to_string(), "w^2*3 + w^1 + 4");
        assert_eq!(o("w^{w^1}").to_string(), "w^{w^1}");
        assert_eq!(o("w^w"), o("w^{w^1}"));
        assert_eq!(o("0"), Ordinal::zero());
        let err = "w^2 + x".parse::<Ordinal>().unwrap_err();
        assert!(matches!(err, AccumError::OrdinalParse { pos: 6, .. }));
    }

    #[test]
    fn left_sub_examples() {
        assert_eq!(left_sub(&o("1"), &o("w")).unwrap(), o("w"));
        assert_eq!(left_sub(&o("w"), &o("w*2 + 3")).unwrap(), o("w + 3"));
        assert_eq!(left_sub(&o("w^2 + 5"), &o("w^2 + w")).unwrap(), o("w"));
        assert_eq!(left_sub(&o("w + 3"), &o("w + 3")).unwrap(), o("0"));
        assert!(left_sub(&o("w"), &o("5")).is_err());
    }

    #[test]
    fn heights() {
        assert_eq!(o("0").height(), 0);
        assert_eq!(o("7").height(), 1);
        assert_eq!(o("w*2 + 1").height(), 2);
        assert_eq!(o("w^w").height(), 3);
        assert_eq!(o("w^{w^w}").height(), 4);
        assert!(o("w^{w^{w^w}}").check_height().is_err());
    }
}
