//! Model-level building operations (towers, powers, principal extensions,
//! blow-and-sew) and the transfinite induction producing certified models
//! with a prescribed order of accumulation `α` and norm `‖u_α‖ = a`.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::entmodel::{make_atom, make_blow_and_sew, scale_model, EntropyModel, Family, SyncRule, Template};
use crate::error::{AccumError, Result};
use crate::ordinal::{fundamental_sequence, ord_add, ord_nat_mul, Ordinal};
use crate::rational::{fmt_q, serde_q, serde_q_pairs, Q};
use crate::seqalg::{seq_limit, Limit, ScalarSeq};
use crate::transfinite::Calculus;

/// Which alternative of the child-entropy hypothesis a composite satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Atom carrying its measure of maximal entropy.
    AtomMme,
    /// `s_m · h_top(child m) → 0`.
    ChildEntropyVanishes,
    /// `s_m · h_top(child m)` converges to a positive limit.
    ChildEntropyConverges,
}

/// A limit claim `lim seq = limit` recorded by a constructor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub label: String,
    pub seq: ScalarSeq,
    #[serde(with = "serde_q")]
    pub limit: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub expected_alpha0: Ordinal,
    #[serde(with = "serde_q")]
    pub expected_norm_at_alpha0: Q,
    /// Exact claims `‖u_γ‖ = v`, nondecreasing in `γ`.
    #[serde(with = "serde_q_pairs")]
    pub norm_ladder: Vec<(Ordinal, Q)>,
    /// Claims `‖u_γ‖ ≤ v`.
    #[serde(with = "serde_q_pairs", default)]
    pub norm_bounds: Vec<(Ordinal, Q)>,
    #[serde(with = "serde_q")]
    pub h_top: Q,
    pub regime: Regime,
    pub totally_ergodic: bool,
    /// Index shifts `m0` applied to child families, outermost first.
    #[serde(default)]
    pub shifts: Vec<u64>,
    #[serde(default)]
    pub decay_checks: Vec<DecayCheck>,
}

impl Certificate {
    fn scaled(&self, r: &Q) -> Certificate {
        let sc = |v: &[(Ordinal, Q)]| v.iter().map(|(g, x)| (g.clone(), x * r)).collect();
        Certificate {
            expected_norm_at_alpha0: &self.expected_norm_at_alpha0 * r,
            norm_ladder: sc(&self.norm_ladder),
            norm_bounds: sc(&self.norm_bounds),
            h_top: &self.h_top * r,
            ..self.clone()
        }
    }
}

/// Canonical entropy cap used when none is given.
pub fn default_cap() -> Q {
    Q::one()
}

fn qn(n: u64) -> Q {
    Q::from_integer(n.into())
}

fn qmax(a: Q, b: Q) -> Q {
    if a >= b {
        a
    } else {
        b
    }
}

fn arg(msg: impl Into<String>) -> AccumError {
    AccumError::InvalidArgument(msg.into())
}

/// `m ↦ 1/(m + m0 + 1)`.
fn shifted_scale(m0: u64) -> ScalarSeq {
    ScalarSeq::shift(m0, ScalarSeq::inv_succ())
}

fn sew(base: EntropyModel, template: Template, m0: u64) -> Result<EntropyModel> {
    make_blow_and_sew(base, Family::new(template, m0, Q::one())?, shifted_scale(m0), SyncRule::Default)
}

/// Member `j ≥ 1` of a child-family template.
pub fn instantiate(t: &Template, j: u64) -> Result<EntropyModel> {
    instantiate_truncated(t, j, u64::MAX)
}

/// Member `j` with its chain of identical levels cut to `depth`.
///
/// `base_finite(j, A)` and `powers(β, j, A)` stack `j` levels that all
/// carry the same step `A/j`. Keeping the step and the innermost model
/// while dropping outer levels yields `base_finite(q, A·q/j)` or
/// `powers(β, q, A·q/j)` with `q = min(j, depth)`, which is the innermost
/// `q`-level part of the full member.
pub fn instantiate_truncated(t: &Template, j: u64, depth: u64) -> Result<EntropyModel> {
    let cut = |amp: &ScalarSeq| {
        let q = j.min(depth.max(1));
        (q, amp.eval(j) * qn(q) / qn(j))
    };
    Ok(match t {
        Template::Atoms { h } => make_atom(h.eval(j))?,
        Template::BaseFinite { amp, c } => {
            let (q, a) = cut(amp);
            base_finite(q, &a, c)?.0
        }
        Template::Powers { beta, amp, c } => {
            let (q, a) = cut(amp);
            powers_model(beta, q, &a, c)?.0
        }
        Template::IrrFixed { beta, amp, c } => {
            let a = amp.eval(j);
            let eps = Template::epsilon(&a, j);
            irreducible_model(beta, &a, &t.delta(j)?, &eps, c)?.0
        }
        Template::IrrLimit { beta, amp, c } => {
            let a = amp.eval(j);
            let eps = Template::epsilon(&a, j);
            irreducible_model(&fundamental_sequence(beta, j)?, &a, &t.delta(j)?, &eps, c)?.0
        }
    })
}

/// A single atom: `α₀ = 0`, `u ≡ 0`.
pub fn s_zero(h: &Q) -> Result<(EntropyModel, Certificate)> {
    let m = make_atom(h.clone())?;
    Ok((
        m,
        Certificate {
            expected_alpha0: Ordinal::zero(),
            expected_norm_at_alpha0: Q::zero(),
            norm_ladder: Vec::new(),
            norm_bounds: Vec::new(),
            h_top: h.clone(),
            regime: Regime::AtomMme,
            totally_ergodic: true,
            shifts: Vec::new(),
            decay_checks: Vec::new(),
        },
    ))
}

/// `p` nested layers of atom families, each adding `a/p` of pressure:
/// `α₀ = p` and `‖u_k‖ = a·k/p`.
pub fn base_finite(p: u64, a: &Q, c: &Q) -> Result<(EntropyModel, Certificate)> {
    if p == 0 {
        return Err(arg("base_finite needs p >= 1"));
    }
    if !a.is_positive() || c.is_negative() {
        return Err(arg("base_finite needs a > 0 and c >= 0"));
    }
    let step = a / qn(p);
    let base = if p == 1 { make_atom(c.clone())? } else { base_finite(p - 1, &(a - &step), c)?.0 };
    let model = sew(base, Template::Atoms { h: ScalarSeq::linear_up(step.clone()) }, 0)?;
    let cert = Certificate {
        expected_alpha0: Ordinal::finite(p),
        expected_norm_at_alpha0: a.clone(),
        norm_ladder: (1..=p).map(|k| (Ordinal::finite(k), &step * qn(k))).collect(),
        norm_bounds: Vec::new(),
        h_top: qmax(c.clone(), step),
        regime: Regime::ChildEntropyConverges,
        totally_ergodic: true,
        shifts: vec![0],
        decay_checks: Vec::new(),
    };
    Ok((model, cert))
}

/// `α₀ = ω^beta`, `‖u_α‖ = a`, `‖u_delta‖ ≤ epsilon`, `h_top = c`.
pub fn irreducible_model(beta: &Ordinal, a: &Q, delta: &Ordinal, epsilon: &Q, c: &Q) -> Result<(EntropyModel, Certificate)> {
    if beta.is_zero() {
        return Err(arg("irreducible_model needs beta >= 1"));
    }
    let alpha = Ordinal::omega_pow(beta.clone());
    alpha.check_height()?;
    if delta >= &alpha {
        return Err(arg(format!("delta {delta} must be below {alpha}")));
    }
    if !epsilon.is_positive() || epsilon >= a {
        return Err(arg("need 0 < epsilon < a"));
    }
    if !c.is_positive() {
        return Err(arg("irreducible_model needs a positive cap c"));
    }
    let amp = ScalarSeq::linear_up(a.clone());
    let mut decay = Vec::new();
    let (template, m0) = if *beta == Ordinal::one() {
        // Members base_finite(j, a·j, c): ‖u_k‖ = a·k for j ≥ k, h_top ≤ max(c, a).
        let k = delta.as_finite().expect("delta below ω is finite");
        let cap_ok = |m0: u64| qmax(c.clone(), a.clone()) / qn(m0 + 2) <= *c;
        let eps_ok = |m0: u64| k == 0 || (m0 + 1 >= k && a * qn(k) / qn(m0 + 1) <= *epsilon);
        let m0 = search(|m0| cap_ok(m0) && eps_ok(m0))?;
        (Template::BaseFinite { amp, c: c.clone() }, m0)
    } else if let Some(bp) = beta.predecessor() {
        // Members powers(ω^bp, j, a·j, c): ‖u_δ‖ ≤ a·(L+1) once j ≥ L+1.
        let l = delta.coefficient_of(&bp);
        let m0 = search(|m0| m0 >= l && a * qn(l + 1) / qn(m0 + 1) <= *epsilon)?;
        decay.push(DecayCheck { label: "log-ratio decay".into(), seq: ScalarSeq::log_ratio(a.clone()), limit: Q::zero() });
        (Template::Powers { beta: bp, amp, c: c.clone() }, m0)
    } else {
        // Members irreducible(beta[j], a·j, δ_j, ε_j, c) with ‖u_δ‖ ≤ ε_j ≤ 1/j once δ_j > δ.
        let t = Template::IrrLimit { beta: beta.clone(), amp, c: c.clone() };
        let m0 = search(|m0| {
            let j = m0 + 1;
            Q::one() / qn(j) <= *epsilon && t.delta(j).map(|d| d > *delta).unwrap_or(false)
        })?;
        (t, m0)
    };
    decay.push(DecayCheck {
        label: "scaled cap vanishes".into(),
        seq: ScalarSeq::product(shifted_scale(m0), ScalarSeq::constant(c.clone())),
        limit: Q::zero(),
    });
    let model = sew(make_atom(c.clone())?, template, m0)?;
    let cert = Certificate {
        expected_alpha0: alpha.clone(),
        expected_norm_at_alpha0: a.clone(),
        norm_ladder: vec![(alpha, a.clone())],
        norm_bounds: vec![(delta.clone(), epsilon.clone())],
        h_top: c.clone(),
        regime: Regime::ChildEntropyVanishes,
        totally_ergodic: true,
        shifts: vec![m0],
        decay_checks: decay,
    };
    Ok((model, cert))
}

/// Least `m` with `ok(m)`, for predicates that stay true once true.
fn search(ok: impl Fn(u64) -> bool) -> Result<u64> {
    const LIMIT: u64 = 1 << 40;
    if ok(0) {
        return Ok(0);
    }
    let mut hi = 1;
    while !ok(hi) {
        hi *= 2;
        if hi > LIMIT {
            return Err(arg("no admissible index shift"));
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `α₀ = ω^beta·p` with `‖u_{ω^beta·ℓ}‖ = ℓ·a/p`.
pub fn powers_model(beta: &Ordinal, p: u64, a: &Q, c: &Q) -> Result<(EntropyModel, Certificate)> {
    if p == 0 {
        return Err(arg("powers_model needs p >= 1"));
    }
    if !a.is_positive() {
        return Err(arg("powers_model needs a > 0"));
    }
    if p == 1 {
        return irreducible_model(beta, a, &Ordinal::zero(), &(a / qn(2)), c);
    }
    let alpha = Ordinal::omega_pow(beta.clone());
    let step = a / qn(p);
    let (base, base_cert) = powers_model(beta, p - 1, &(a - &step), c)?;
    let template = Template::IrrFixed { beta: beta.clone(), amp: ScalarSeq::linear_up(step.clone()), c: c.clone() };
    let model = sew(base, template, 0)?;
    let mut shifts = vec![0];
    shifts.extend(base_cert.shifts);
    let cert = Certificate {
        expected_alpha0: ord_nat_mul(&alpha, p)?,
        expected_norm_at_alpha0: a.clone(),
        norm_ladder: (1..=p).map(|l| Ok((ord_nat_mul(&alpha, l)?, &step * qn(l)))).collect::<Result<_>>()?,
        norm_bounds: Vec::new(),
        h_top: c.clone(),
        regime: Regime::ChildEntropyVanishes,
        totally_ergodic: true,
        shifts,
        decay_checks: Vec::new(),
    };
    Ok((model, cert))
}

/// Certified model for any `α > 0`, peeling the leading normal-form term:
/// `general(ω^β₁ + rest, a)` sews an `ω^β₁` family carrying `a/2` onto
/// `general(rest, a/2)`.
pub fn general_model(alpha: &Ordinal, a: &Q, c: &Q) -> Result<(EntropyModel, Certificate)> {
    alpha.check_height()?;
    if alpha.is_zero() {
        return if a.is_zero() { s_zero(c) } else { Err(AccumError::EmptyClass) };
    }
    if !a.is_positive() {
        return Err(arg("general_model needs a > 0"));
    }
    if let Some(p) = alpha.as_finite() {
        return base_finite(p, a, c);
    }
    let (b1, _) = alpha.terms()[0].clone();
    let lead = Ordinal::omega_pow(b1.clone());
    let rest = crate::ordinal::left_sub(&lead, alpha)?;
    if rest.is_zero() {
        return irreducible_model(&b1, a, &Ordinal::zero(), &(a / qn(2)), c);
    }
    let half = a / qn(2);
    let (base, base_cert) = general_model(&rest, &half, c)?;
    let template = Template::IrrFixed { beta: b1, amp: ScalarSeq::linear_up(half.clone()), c: c.clone() };
    let model = sew(base, template, 0)?;
    let mut ladder = vec![(lead.clone(), half.clone())];
    for (g, v) in &base_cert.norm_ladder {
        ladder.push((ord_add(&lead, g), &half + v));
    }
    let mut shifts = vec![0];
    shifts.extend(base_cert.shifts.iter().copied());
    let cert = Certificate {
        expected_alpha0: alpha.clone(),
        expected_norm_at_alpha0: a.clone(),
        norm_ladder: ladder,
        norm_bounds: Vec::new(),
        h_top: qmax(base_cert.h_top.clone(), c / qn(2)),
        regime: Regime::ChildEntropyVanishes,
        totally_ergodic: true,
        shifts,
        decay_checks: Vec::new(),
    };
    Ok((model, cert))
}

/// `(n, p)` tower: every entropy value scales by `p/n`.
pub fn tower_model(m: &EntropyModel, n: u64, p: u64) -> Result<EntropyModel> {
    if p == 0 || n == 0 || p > n {
        return Err(arg("tower needs 1 <= p <= n"));
    }
    Ok(scale_model(m, &Q::new(p.into(), n.into())))
}

/// `p`-th power: every entropy value scales by `p`.
pub fn power_model(m: &EntropyModel, p: u64) -> Result<EntropyModel> {
    if p == 0 {
        return Err(arg("power needs p >= 1"));
    }
    Ok(scale_model(m, &qn(p)))
}

/// Principal extensions leave every entropy quantity unchanged.
pub fn principal_extension_model(m: &EntropyModel) -> EntropyModel {
    m.clone()
}

pub fn tower_certificate(c: &Certificate, n: u64, p: u64) -> Certificate {
    c.scaled(&Q::new(p.into(), n.into()))
}

pub fn power_certificate(c: &Certificate, p: u64) -> Certificate {
    c.scaled(&qn(p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimResult {
    pub claim: String,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub claims: Vec<ClaimResult>,
    pub all_pass: bool,
}

/// Checks every claim of a certificate against the exact calculus.
pub fn verify_certificate(model: &EntropyModel, cert: &Certificate) -> VerificationReport {
    let mut calc = Calculus::new();
    let mut claims = Vec::new();
    let mut push = |claim: String, expected: String, computed: Result<String>, pass: &dyn Fn(&str) -> bool| {
        let (computed, ok) = match computed {
            Ok(v) => {
                let ok = pass(&v);
                (v, ok)
            }
            Err(e) => (format!("error: {e}"), false),
        };
        claims.push(ClaimResult { claim, expected, computed, pass: ok });
    };

    let exp_alpha = cert.expected_alpha0.to_string();
    push("alpha0".into(), exp_alpha.clone(), calc.alpha0(model).map(|a| a.to_string()), &|v| v == exp_alpha);

    let claims_eq: Vec<(Ordinal, Q)> = std::iter::once((cert.expected_alpha0.clone(), cert.expected_norm_at_alpha0.clone()))
        .chain(cert.norm_ladder.iter().cloned())
        .collect();
    for (g, v) in claims_eq {
        let got = calc.norm(model, &g);
        let pass = matches!(&got, Ok(x) if *x == v);
        push(format!("norm u_{g} = {}", fmt_q(&v)), fmt_q(&v), got.map(|x| fmt_q(&x)), &|_| pass);
    }
    for (g, v) in &cert.norm_bounds {
        let got = calc.norm(model, g);
        let pass = matches!(&got, Ok(x) if x <= v);
        push(format!("norm u_{g} <= {}", fmt_q(v)), format!("<= {}", fmt_q(v)), got.map(|x| fmt_q(&x)), &|_| pass);
    }
    let mono = cert.norm_ladder.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
    push("ladder nondecreasing".into(), "true".into(), Ok(mono.to_string()), &|v| v == "true");

    let got = calc.h_top(model);
    let pass = matches!(&got, Ok(x) if *x == cert.h_top);
    push("h_top".into(), fmt_q(&cert.h_top), got.map(|x| fmt_q(&x)), &|_| pass);

    for d in &cert.decay_checks {
        let got = seq_limit(&d.seq);
        let pass = matches!(&got, Ok(Limit::Finite(x)) if *x == d.limit);
        push(format!("limit of {}", d.label), fmt_q(&d.limit), got.map(|l| l.to_string()), &|_| pass);
    }
    let all_pass = claims.iter().all(|c| c.pass);
    VerificationReport { claims, all_pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn base_finite_ladder() {
        let (m, c) = base_finite(3, &qi(1), &qi(1)).unwrap();
        let r = verify_certificate(&m, &c);
        assert!(r.all_pass, "{r:#?}");
        assert_eq!(c.norm_ladder[1].1, q(2, 3));
    }

    #[test]
    fn irreducible_omega() {
        let (m, c) = irreducible_model(&Ordinal::one(), &qi(1), &Ordinal::finite(5), &q(1, 8), &qi(1)).unwrap();
        let r = verify_certificate(&m, &c);
        assert!(r.all_pass, "{r:#?}");
    }

    #[test]
    fn tampered_certificate_fails() {
        let (m, mut c) = base_finite(2, &qi(1), &qi(1)).unwrap();
        c.norm_ladder[0].1 += q(1, 2);
        let r = verify_certificate(&m, &c);
        assert!(!r.all_pass);
        let bad = r.claims.iter().find(|x| !x.pass).unwrap();
        assert_eq!(bad.computed, "1/2");
    }

    #[test]
    fn empty_class() {
        assert_eq!(general_model(&Ordinal::zero(), &qi(1), &qi(1)).unwrap_err(), AccumError::EmptyClass);
    }
}
