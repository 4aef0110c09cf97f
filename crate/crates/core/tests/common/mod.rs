//! Shared support for the integration tests: a brute-force truncation
//! oracle for finite stages of `u_γ`, exact rational fitting used to read off
//! limits, and seeded generators of composite models.
#![allow(dead_code)]

pub mod props;

use std::collections::HashMap;

use accum_core::entmodel::{eval_tail, make_atom, make_blow_and_sew, Family, ModelPoint, Node, Step, SyncRule, Template};
use accum_core::rational::{q, qi};
use accum_core::seqalg::ScalarSeq;
use accum_core::{EntropyModel, Q};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Polynomials and rational fits

/// Coefficients from the constant term upward.
type Poly = Vec<Q>;

fn trim(mut p: Poly) -> Poly {
    while p.len() > 1 && p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn peval(p: &[Q], x: &Q) -> Q {
    p.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
}

fn pmul(a: &[Q], b: &[Q]) -> Poly {
    let mut out = vec![Q::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn psub(a: &[Q], b: &[Q]) -> Poly {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).cloned().unwrap_or_else(Q::zero) - b.get(i).cloned().unwrap_or_else(Q::zero))
        .collect()
}

fn pderiv(p: &[Q]) -> Poly {
    if p.len() <= 1 {
        return vec![Q::zero()];
    }
    p.iter().enumerate().skip(1).map(|(i, c)| c * Q::from_integer((i as i64).into())).collect()
}

/// `p(x0 + t)` as a polynomial in `t`.
fn pshift(p: &[Q], x0: &Q) -> Poly {
    let mut out: Poly = vec![Q::zero()];
    for c in p.iter().rev() {
        out = pmul(&out, &[x0.clone(), Q::one()]);
        out[0] += c;
    }
    trim(out)
}

/// Every coefficient has the same sign (zeros allowed); returns that sign.
fn uniform_sign(p: &[Q]) -> Option<i8> {
    let pos = p.iter().any(|c| c.is_positive());
    let neg = p.iter().any(|c| c.is_negative());
    match (pos, neg) {
        (true, true) => None,
        (true, false) => Some(1),
        (false, true) => Some(-1),
        (false, false) => Some(0),
    }
}

/// A rational function `num/den` fitted exactly through sampled values.
#[derive(Clone, Debug)]
pub struct RatFit {
    pub num: Poly,
    pub den: Poly,
}

impl RatFit {
    pub fn eval(&self, x: &Q) -> Q {
        peval(&self.num, x) / peval(&self.den, x)
    }

    /// Limit at infinity, `None` when it diverges.
    pub fn limit(&self) -> Option<Q> {
        let (dn, dd) = (self.num.len(), self.den.len());
        let lead_zero = self.num.len() == 1 && self.num[0].is_zero();
        if lead_zero || dn < dd {
            Some(Q::zero())
        } else if dn == dd {
            Some(self.num[dn - 1].clone() / self.den[dd - 1].clone())
        } else {
            None
        }
    }

    /// `Some(+1)` if nondecreasing on `[x0, ∞)`, `Some(-1)` if
    /// nonincreasing, with no pole there; `None` when that cannot be shown
    /// from coefficient signs.
    pub fn monotone_from(&self, x0: &Q) -> Option<i8> {
        let den = pshift(&self.den, x0);
        match uniform_sign(&den) {
            Some(s) if s != 0 && !den[0].is_zero() => {}
            _ => return None,
        }
        let n = psub(&pmul(&pderiv(&self.num), &self.den), &pmul(&self.num, &pderiv(&self.den)));
        match uniform_sign(&pshift(&trim(n), x0))? {
            0 => Some(1),
            s => Some(s),
        }
    }
}

/// Nonzero null vector of a matrix over `Q`, if one exists.
fn null_vector(mut rows: Vec<Vec<Q>>, cols: usize) -> Option<Vec<Q>> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = Q::one() / rows[r][c].clone();
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..cols {
                    let d = &f * &rows[r][j];
                    rows[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    let free = (0..cols).find(|c| !pivots.contains(c))?;
    let mut v = vec![Q::zero(); cols];
    v[free] = Q::one();
    for (i, &pc) in pivots.iter().enumerate() {
        v[pc] = -rows[i][free].clone();
    }
    Some(v)
}

/// Lowest-degree rational function (degree at most 2 over 2) through
/// every sample. The fit is solved from the first `2d + 1` samples and the
/// rest act as checks, so a returned fit has been confirmed on the whole
/// window.
pub fn fit(xs: &[Q], ys: &[Q]) -> Option<RatFit> {
    if xs.len() >= 3 && ys.iter().all(|y| y == &ys[0]) {
        return Some(RatFit { num: vec![ys[0].clone()], den: vec![Q::one()] });
    }
    for d in 1..=2usize {
        if xs.len() < 2 * d + 3 {
            break;
        }
        let cols = 2 * d + 2;
        let rows: Vec<Vec<Q>> = xs
            .iter()
            .zip(ys)
            .take(2 * d + 1)
            .map(|(x, y)| {
                let pw: Vec<Q> = (0..=d).map(|i| num_traits::pow(x.clone(), i)).collect();
                pw.iter().cloned().chain(pw.iter().map(|p| -(y * p))).collect()
            })
            .collect();
        if let Some(v) = null_vector(rows, cols) {
            let f = RatFit { num: trim(v[..=d].to_vec()), den: trim(v[d + 1..].to_vec()) };
            if f.den.iter().all(|c| c.is_zero()) {
                continue;
            }
            if xs.iter().zip(ys).all(|(x, y)| !peval(&f.den, x).is_zero() && &f.eval(x) == y) {
                return Some(f);
            }
        }
    }
    None
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

// ---------------------------------------------------------------------------
// Truncation oracle

/// Brute-force evaluation of `u_0, …, u_3` straight from the defining
/// recursion `u_{γ+1} = lim_k env(u_γ + τ_k)`.
///
/// Copies are open, so on copy `j` the function is `s_j` times the child's,
/// computed recursively with the same oracle. Every copy family
/// accumulates onto all base points, contributing
/// `limsup_j sup_{copy j}(u_γ + τ_k)` to the envelope there; that limsup is
/// read from an exact rational fit over a window of copies placed past the
/// synchronization threshold of `k = K`. Suprema over all copies enumerate
/// `1..=M` and certify the remaining tail by monotonicity of a fitted
/// rational function. Copy nesting deeper than `D` and any failed fit or
/// unstable `k`-limit yield `None`.
///
/// Constants injected from enclosing composites are carried as a vector
/// indexed by stage, so a model is evaluated once per injection vector for
/// all stages together.
pub struct TruncationOracle {
    pub copies: u64,
    pub depth: usize,
    pub k: u64,
    pub window: u64,
    memo: HashMap<(usize, Vec<Q>, usize), Option<Sups>>,
    ls_memo: HashMap<(usize, Vec<Q>, usize), Option<Vec<Q>>>,
    keep: Vec<EntropyModel>,
}

/// Number of stages past `u_0` the oracle tracks.
pub const STAGES: usize = 3;

/// `sup u_β` and `sup(u_β + h)` for `β = 0..=STAGES`.
#[derive(Clone, Debug)]
struct Sups {
    norm: Vec<Q>,
    upper: Vec<Q>,
}

impl TruncationOracle {
    pub fn new(copies: u64, depth: usize, k: u64) -> Self {
        TruncationOracle { copies, depth, k, window: 10, memo: HashMap::new(), ls_memo: HashMap::new(), keep: Vec::new() }
    }

    fn no_injection() -> Vec<Q> {
        vec![Q::zero(); STAGES]
    }

    /// `‖u_γ‖` of the model.
    pub fn norm(&mut self, model: &EntropyModel, gamma: usize) -> Option<Q> {
        Some(self.sups(model, &Self::no_injection(), self.depth)?.norm[gamma].clone())
    }

    /// `u_γ` at a point of the model.
    pub fn point(&mut self, model: &EntropyModel, gamma: usize, x: &ModelPoint) -> Option<Q> {
        self.point_in(model, model, &x.path, &Q::one(), &Self::no_injection(), gamma, &x.path, self.depth)
    }

    #[allow(clippy::too_many_arguments)]
    fn point_in(
        &mut self,
        root: &EntropyModel,
        model: &EntropyModel,
        rest: &[Step],
        factor: &Q,
        inj: &[Q],
        gamma: usize,
        full: &[Step],
        depth: usize,
    ) -> Option<Q> {
        match (model.node(), rest.split_first()) {
            (Node::Atom { .. }, None) => {
                // k-limit of the tail at this point, certified by agreement at K/2 and K.
                let addr = ModelPoint::new(full.to_vec());
                let t1 = eval_tail(root, &addr, self.k / 2).ok()?;
                let t2 = eval_tail(root, &addr, self.k).ok()?;
                if t1 != t2 {
                    return None;
                }
                let tail = t2 / factor;
                let mut u = Q::zero();
                for g in 1..=gamma {
                    u = qmax(u + &tail, inj[g - 1].clone());
                }
                Some(u)
            }
            (Node::Blow { base, .. }, Some((Step::Base, more))) => {
                let inj2 = self.with_ls(model, inj, depth)?;
                let base = base.clone();
                self.point_in(root, &base, more, factor, &inj2, gamma, full, depth)
            }
            (Node::Blow { children, scale, .. }, Some((Step::Copy(j), more))) => {
                if depth == 0 {
                    return None;
                }
                let s = scale.eval(*j);
                let child = children.member(*j).ok()?;
                let inj2: Vec<Q> = inj.iter().map(|v| v / &s).collect();
                let v = self.point_in(root, &child, more, &(factor * &s), &inj2, gamma, full, depth - 1)?;
                Some(s * v)
            }
            _ => None,
        }
    }

    /// Injection vector for the base of a composite: the outer injection
    /// joined with the composite's own accumulation constants.
    fn with_ls(&mut self, model: &EntropyModel, inj: &[Q], depth: usize) -> Option<Vec<Q>> {
        let ls = self.ls(model, inj, depth)?;
        Some(inj.iter().zip(ls).map(|(a, b)| qmax(a.clone(), b)).collect())
    }

    /// `limsup_j sup_{copy j}(u_β + τ_K)` for `β < STAGES`.
    fn ls(&mut self, model: &EntropyModel, inj: &[Q], depth: usize) -> Option<Vec<Q>> {
        let key = (model.key(), inj.to_vec(), depth);
        if let Some(v) = self.ls_memo.get(&key) {
            return v.clone();
        }
        let v = self.ls_raw(model, inj, depth);
        self.ls_memo.insert(key, v.clone());
        v
    }

    fn ls_raw(&mut self, model: &EntropyModel, inj: &[Q], depth: usize) -> Option<Vec<Q>> {
        let Node::Blow { sync, .. } = model.node() else { return Some(Self::no_injection()) };
        if depth == 0 {
            return None;
        }
        let start = sync.threshold(self.k) + 1;
        let (xs, vals) = self.copy_sups(model, inj, depth, start, start + self.window - 1)?;
        (0..STAGES)
            .map(|b| {
                let ys: Vec<Q> = vals.iter().map(|v| v.upper[b].clone()).collect();
                fit(&xs, &ys)?.limit()
            })
            .collect()
    }

    /// Suprema over copy `j` scaled by `s_j`, for `j ∈ [from, to]`.
    fn copy_sups(&mut self, model: &EntropyModel, inj: &[Q], depth: usize, from: u64, to: u64) -> Option<(Vec<Q>, Vec<Sups>)> {
        let Node::Blow { children, scale, .. } = model.node() else { return None };
        let (children, scale) = (children.clone(), scale.clone());
        let mut xs = Vec::new();
        let mut out = Vec::new();
        for j in from..=to {
            let s = scale.eval(j);
            let child = children.member(j).ok()?;
            self.keep.push(child.clone());
            let inj2: Vec<Q> = inj.iter().map(|v| v / &s).collect();
            let v = self.sups(&child, &inj2, depth - 1)?;
            xs.push(qn(j));
            out.push(Sups {
                norm: v.norm.iter().map(|x| x * &s).collect(),
                upper: v.upper.iter().map(|x| x * &s).collect(),
            });
        }
        Some((xs, out))
    }

    fn sups(&mut self, model: &EntropyModel, inj: &[Q], depth: usize) -> Option<Sups> {
        let key = (model.key(), inj.to_vec(), depth);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let v = self.sups_raw(model, inj, depth);
        self.memo.insert(key, v.clone());
        v
    }

    fn sups_raw(&mut self, model: &EntropyModel, inj: &[Q], depth: usize) -> Option<Sups> {
        match model.node() {
            Node::Atom { h_top, .. } => {
                let norm: Vec<Q> = (0..=STAGES).map(|b| inj[..b].iter().cloned().fold(Q::zero(), qmax)).collect();
                let upper = norm.iter().map(|u| u + h_top).collect();
                Some(Sups { norm, upper })
            }
            Node::Blow { base, .. } => {
                if depth == 0 {
                    return None;
                }
                let base = base.clone();
                let inj2 = self.with_ls(model, inj, depth)?;
                let from_base = self.sups(&base, &inj2, depth)?;
                let m = self.copies;
                let (xs, vals) = self.copy_sups(model, inj, depth, 1, m + self.window)?;
                let tail_x = &xs[m as usize..];
                let sup_of = |pick: &dyn Fn(&Sups) -> Q, start: Q| -> Option<Q> {
                    let ys: Vec<Q> = vals.iter().map(pick).collect();
                    let f = fit(tail_x, &ys[m as usize..])?;
                    let mut best = ys.into_iter().fold(start, qmax);
                    if f.monotone_from(&tail_x[0])? == 1 {
                        best = qmax(best, f.limit()?);
                    }
                    Some(best)
                };
                let mut norm = Vec::new();
                let mut upper = Vec::new();
                for b in 0..=STAGES {
                    norm.push(sup_of(&|v: &Sups| v.norm[b].clone(), from_base.norm[b].clone())?);
                    upper.push(sup_of(&|v: &Sups| v.upper[b].clone(), from_base.upper[b].clone())?);
                }
                Some(Sups { norm, upper })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Seeded model generators

fn pick<T: Clone>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())].clone()
}

fn small_q(rng: &mut ChaCha8Rng) -> Q {
    pick(rng, &[q(1, 2), qi(1), q(3, 2), qi(2), q(1, 3), qi(3)])
}

fn atom_h(rng: &mut ChaCha8Rng) -> ScalarSeq {
    let c = small_q(rng);
    match rng.random_range(0..4) {
        0 => ScalarSeq::constant(c),
        1 => ScalarSeq::approach_up(c),
        2 => ScalarSeq::harmonic(c),
        _ => ScalarSeq::linear_up(c),
    }
}

fn vanishing_scale(rng: &mut ChaCha8Rng) -> ScalarSeq {
    match rng.random_range(0..3) {
        0 => ScalarSeq::inv_succ(),
        1 => ScalarSeq::shift(rng.random_range(1..4), ScalarSeq::inv_succ()),
        _ => ScalarSeq::scale(q(1, 2), ScalarSeq::inv_succ()),
    }
}

fn any_scale(rng: &mut ChaCha8Rng) -> ScalarSeq {
    match rng.random_range(0..4) {
        0 => ScalarSeq::constant(pick(rng, &[q(1, 2), q(1, 3), qi(1)])),
        1 => ScalarSeq::scale(q(1, 2), ScalarSeq::approach_up(qi(1))),
        _ => vanishing_scale(rng),
    }
}

fn sync(rng: &mut ChaCha8Rng) -> SyncRule {
    if rng.random_bool(0.5) {
        SyncRule::Default
    } else {
        SyncRule::Factor(2)
    }
}

fn base_model(rng: &mut ChaCha8Rng) -> EntropyModel {
    if rng.random_bool(0.5) {
        make_atom(pick(rng, &[qi(0), q(1, 2), qi(1), qi(2)])).unwrap()
    } else {
        let p = rng.random_range(1..=2);
        accum_core::constructors::base_finite(p, &small_q(rng), &pick(rng, &[q(1, 2), qi(1)])).unwrap().0
    }
}

fn one_layer(rng: &mut ChaCha8Rng, base: EntropyModel, composite_children: bool) -> Option<EntropyModel> {
    let shift = rng.random_range(0..3);
    let factor = pick(rng, &[qi(1), q(1, 2), qi(2)]);
    let (template, scale) = if composite_children {
        let t = Template::BaseFinite { amp: ScalarSeq::linear_up(small_q(rng)), c: pick(rng, &[q(1, 2), qi(1)]) };
        (t, vanishing_scale(rng))
    } else {
        (Template::Atoms { h: atom_h(rng) }, any_scale(rng))
    };
    let fam = Family::new(template, shift, factor).ok()?;
    make_blow_and_sew(base, fam, scale, sync(rng)).ok()
}

/// A randomized composite with copy nesting at most two: a base (atom or
/// small finite ladder), a family of atoms or finite ladders, and an
/// optional outer atom family.
pub fn random_composite(seed: u64) -> EntropyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let base = base_model(&mut rng);
        let composite = rng.random_bool(0.6);
        let Some(m) = one_layer(&mut rng, base, composite) else { continue };
        if rng.random_bool(0.4) {
            if let Some(w) = one_layer(&mut rng, m.clone(), false) {
                return w;
            }
        }
        return m;
    }
}

/// A randomized model drawn either from the composite generator or from the
/// certified constructors.
pub fn random_model(seed: u64) -> EntropyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    if rng.random_bool(0.5) {
        return random_composite(seed);
    }
    let alpha = pick(&mut rng, &["1", "2", "3", "w", "w + 1", "w*2", "w^2"]);
    let a = small_q(&mut rng);
    let alpha: accum_core::Ordinal = alpha.parse().unwrap();
    accum_core::constructors::general_model(&alpha, &a, &qi(1)).unwrap().0
}
