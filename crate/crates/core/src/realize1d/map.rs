//! Piecewise maps of `[-1, 1]` built from a small formula vocabulary.

use std::f64::consts::PI;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{AccumError, Result};
use crate::rational::{serde_q, to_f64, Q};

/// Affine segment `y = a·x + b` on the closed interval `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Seg {
    #[serde(with = "serde_q")]
    pub lo: Q,
    #[serde(with = "serde_q")]
    pub hi: Q,
    #[serde(with = "serde_q")]
    pub a: Q,
    #[serde(with = "serde_q")]
    pub b: Q,
}

impl Seg {
    pub fn new(lo: Q, hi: Q, a: Q, b: Q) -> Seg {
        Seg { lo, hi, a, b }
    }

    pub fn identity(lo: Q, hi: Q) -> Seg {
        Seg::new(lo, hi, Q::one(), Q::zero())
    }

    pub fn eval(&self, x: &Q) -> Q {
        &self.a * x + &self.b
    }

    pub fn contains(&self, x: &Q) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

/// First segment whose closed interval contains `x`.
pub fn find_seg<'a>(segs: &'a [Seg], x: &Q) -> Option<&'a Seg> {
    let i = segs.partition_point(|s| &s.hi < x);
    segs.get(i).filter(|s| s.contains(x))
}

pub fn eval_segs(segs: &[Seg], x: &Q) -> Option<Q> {
    find_seg(segs, x).map(|s| s.eval(x))
}

/// Segment whose open interior contains `y`, used when `y` is known not to
/// be a breakpoint.
fn seg_with_interior<'a>(segs: &'a [Seg], y: &Q) -> Option<&'a Seg> {
    let i = segs.partition_point(|s| &s.lo < y);
    if i == 0 {
        return None;
    }
    segs.get(i - 1).filter(|s| y < &s.hi)
}

/// `outer ∘ inner` for sorted piecewise-affine maps.
///
/// A non-constant inner segment is split at the preimages of every outer
/// breakpoint inside its image, and each part is matched with the outer
/// segment that overlaps its image in positive length. Jumps of `outer`
/// are therefore resolved by the side from which the image approaches.
pub fn compose_segs(outer: &[Seg], inner: &[Seg]) -> Result<Vec<Seg>> {
    let miss = |y: &Q| AccumError::Realization(format!("value {y} outside the outer map's domain"));
    let mut out: Vec<Seg> = Vec::new();
    for s in inner {
        if s.a.is_zero() {
            let o = find_seg(outer, &s.b).ok_or_else(|| miss(&s.b))?;
            out.push(Seg::new(s.lo.clone(), s.hi.clone(), Q::zero(), o.eval(&s.b)));
            continue;
        }
        let (y0, y1) = (s.eval(&s.lo), s.eval(&s.hi));
        let (ylo, yhi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
        let mut cuts = vec![s.lo.clone(), s.hi.clone()];
        for o in outer {
            for y in [&o.lo, &o.hi] {
                if &ylo < y && y < &yhi {
                    cuts.push((y - &s.b) / &s.a);
                }
            }
        }
        cuts.sort();
        cuts.dedup();
        for w in cuts.windows(2) {
            let mid = (&w[0] + &w[1]) / Q::from_integer(2.into());
            let ym = s.eval(&mid);
            let o = seg_with_interior(outer, &ym).ok_or_else(|| miss(&ym))?;
            out.push(Seg::new(w[0].clone(), w[1].clone(), &o.a * &s.a, &o.a * &s.b + &o.b));
        }
    }
    Ok(merge_segs(out))
}

/// Fuses neighbours that carry the same affine formula.
pub fn merge_segs(segs: Vec<Seg>) -> Vec<Seg> {
    let mut out: Vec<Seg> = Vec::with_capacity(segs.len());
    for s in segs {
        if let Some(last) = out.last_mut() {
            if last.hi == s.lo && last.a == s.a && last.b == s.b {
                last.hi = s.hi;
                continue;
            }
        }
        out.push(s);
    }
    out
}

/// One entry of the formula vocabulary.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Formula {
    Affine {
        #[serde(with = "serde_q")]
        a: Q,
        #[serde(with = "serde_q")]
        b: Q,
    },
    /// Full `n`-branch tent of `[-1, 1]` with both endpoints fixed.
    Tent { n: u64 },
    /// `A_dst ∘ T^σ ∘ A_src⁻¹` on the annulus `r/2 ≤ |x - c| ≤ r`.
    RadialPush {
        sigma: i8,
        #[serde(with = "serde_q")]
        src_center: Q,
        #[serde(with = "serde_q")]
        src_radius: Q,
        #[serde(with = "serde_q")]
        dst_center: Q,
        #[serde(with = "serde_q")]
        dst_radius: Q,
    },
    /// `A_dst ∘ r^out ∘ child^power ∘ r^in ∘ A_src⁻¹`, `r(t) = -t`.
    Sewn {
        #[serde(with = "serde_q")]
        src_center: Q,
        #[serde(with = "serde_q")]
        src_half: Q,
        #[serde(with = "serde_q")]
        dst_center: Q,
        #[serde(with = "serde_q")]
        dst_half: Q,
        reflect_in: bool,
        reflect_out: bool,
        power: u32,
        child: Box<PiecewiseMap>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Piece {
    #[serde(with = "serde_q")]
    pub lo: Q,
    #[serde(with = "serde_q")]
    pub hi: Q,
    pub formula: Formula,
}

#[derive(Clone, Debug)]
enum Fast {
    Affine(f64, f64),
    Tent(u64),
    Radial { sigma: f64, sc: f64, sr: f64, dc: f64, dr: f64 },
    Sewn { sc: f64, sh: f64, dc: f64, dh: f64, rin: bool, rout: bool, power: u32 },
}

/// A map of `[-1, 1]` given as sorted pieces that tile the interval.
#[derive(Clone, Debug, Serialize)]
pub struct PiecewiseMap {
    pub pieces: Vec<Piece>,
    #[serde(skip)]
    lo_f: Vec<f64>,
    #[serde(skip)]
    fast: Vec<Fast>,
}

/// Symmetric radial push: `T^σ(t) = σ·sign(t)·(|t| + sin(2π|t|)/10)`.
pub fn radial_push(sigma: i8, x: f64) -> Result<f64> {
    let t = x.abs();
    if !(0.5..=1.0).contains(&t) {
        return Err(AccumError::InvalidArgument(format!("radial push needs 1/2 <= |x| <= 1, got {x}")));
    }
    if sigma != 1 && sigma != -1 {
        return Err(AccumError::InvalidArgument("radial push sign must be +1 or -1".into()));
    }
    Ok(push_unchecked(sigma as f64, x))
}

fn push_unchecked(sigma: f64, x: f64) -> f64 {
    let t = x.abs();
    sigma * x.signum() * (t + 0.1 * (2.0 * PI * t).sin())
}

fn push_derivative(sigma: f64, x: f64) -> f64 {
    sigma * (1.0 + 0.2 * PI * (2.0 * PI * x.abs()).cos())
}

fn tent_f64(n: u64, x: f64) -> (f64, f64) {
    let nf = n as f64;
    let v = nf * (x + 1.0) / 2.0;
    let i = (v.floor().max(0.0) as u64).min(n - 1);
    let fr = v - i as f64;
    if i % 2 == 0 {
        (2.0 * fr - 1.0, nf)
    } else {
        (1.0 - 2.0 * fr, -nf)
    }
}

fn tent_exact(n: u64, x: &Q) -> Q {
    let two = Q::from_integer(2.into());
    let v = Q::from_integer(n.into()) * (x + Q::one()) / &two;
    let i = v.floor().to_integer().to_u64().unwrap_or(0).min(n - 1);
    let fr = v - Q::from_integer(i.into());
    if i % 2 == 0 {
        &two * fr - Q::one()
    } else {
        Q::one() - &two * fr
    }
}

/// Affine segments of the `n`-tent restricted to `[lo, hi]`.
pub fn tent_segs(n: u64, lo: &Q, hi: &Q) -> Vec<Seg> {
    let nq = Q::from_integer(n.into());
    let mut out = Vec::new();
    for i in 0..n {
        let a = Q::from_integer((2 * i).into()) / &nq - Q::one();
        let b = Q::from_integer((2 * i + 2).into()) / &nq - Q::one();
        let (l, h) = (if &a > lo { a } else { lo.clone() }, if &b < hi { b } else { hi.clone() });
        if l >= h {
            continue;
        }
        let ii = Q::from_integer(i.into());
        let two = Q::from_integer(2.into());
        let seg = if i % 2 == 0 {
            Seg::new(l, h, nq.clone(), &nq - &two * &ii - Q::one())
        } else {
            Seg::new(l, h, -nq.clone(), &two * &ii + Q::one() - &nq)
        };
        out.push(seg);
    }
    out
}

impl Formula {
    fn fast(&self) -> Fast {
        match self {
            Formula::Affine { a, b } => Fast::Affine(to_f64(a), to_f64(b)),
            Formula::Tent { n } => Fast::Tent(*n),
            Formula::RadialPush { sigma, src_center, src_radius, dst_center, dst_radius } => Fast::Radial {
                sigma: *sigma as f64,
                sc: to_f64(src_center),
                sr: to_f64(src_radius),
                dc: to_f64(dst_center),
                dr: to_f64(dst_radius),
            },
            Formula::Sewn { src_center, src_half, dst_center, dst_half, reflect_in, reflect_out, power, .. } => Fast::Sewn {
                sc: to_f64(src_center),
                sh: to_f64(src_half),
                dc: to_f64(dst_center),
                dh: to_f64(dst_half),
                rin: *reflect_in,
                rout: *reflect_out,
                power: *power,
            },
        }
    }

    /// Exact value where the formula is rational, `None` for sine-bearing forms.
    pub fn eval_exact(&self, x: &Q) -> Option<Q> {
        match self {
            Formula::Affine { a, b } => Some(a * x + b),
            Formula::Tent { n } => Some(tent_exact(*n, x)),
            Formula::RadialPush { .. } => None,
            Formula::Sewn { src_center, src_half, dst_center, dst_half, reflect_in, reflect_out, power, child } => {
                let mut t = (x - src_center) / src_half;
                if *reflect_in {
                    t = -t;
                }
                for _ in 0..*power {
                    t = child.eval_exact(&t)?;
                }
                if *reflect_out {
                    t = -t;
                }
                Some(dst_center + dst_half * t)
            }
        }
    }

    pub fn is_rational(&self) -> bool {
        match self {
            Formula::Affine { .. } | Formula::Tent { .. } => true,
            Formula::RadialPush { .. } => false,
            Formula::Sewn { child, .. } => child.pieces.iter().all(|p| p.formula.is_rational()),
        }
    }
}

impl PiecewiseMap {
    /// Builds a map from pieces that must tile `[-1, 1]` in order.
    pub fn new(pieces: Vec<Piece>) -> Result<PiecewiseMap> {
        let bad = |m: String| Err(AccumError::Realization(m));
        if pieces.is_empty() {
            return bad("a map needs at least one piece".into());
        }
        if pieces[0].lo != -Q::one() || pieces[pieces.len() - 1].hi != Q::one() {
            return bad("pieces must start at -1 and end at 1".into());
        }
        for w in pieces.windows(2) {
            if w[0].hi != w[1].lo {
                return bad(format!("pieces do not tile: gap or overlap at {}", w[0].hi));
            }
        }
        if let Some(p) = pieces.iter().find(|p| p.lo >= p.hi) {
            return bad(format!("empty piece at {}", p.lo));
        }
        let lo_f = pieces.iter().map(|p| to_f64(&p.lo)).collect();
        let fast = pieces.iter().map(|p| p.formula.fast()).collect();
        Ok(PiecewiseMap { pieces, lo_f, fast })
    }

    pub fn identity() -> PiecewiseMap {
        PiecewiseMap::from_segs(&[Seg::identity(-Q::one(), Q::one())]).expect("identity tiles [-1, 1]")
    }

    pub fn from_segs(segs: &[Seg]) -> Result<PiecewiseMap> {
        PiecewiseMap::new(
            segs.iter()
                .map(|s| Piece { lo: s.lo.clone(), hi: s.hi.clone(), formula: Formula::Affine { a: s.a.clone(), b: s.b.clone() } })
                .collect(),
        )
    }

    /// Full `n`-branch tent map (`n` odd, `n ≥ 3`), slopes `±n`, endpoints fixed.
    pub fn tent(n: u64) -> Result<PiecewiseMap> {
        if n < 3 || n % 2 == 0 {
            return Err(AccumError::InvalidArgument(format!("tent map needs an odd N >= 3, got {n}")));
        }
        PiecewiseMap::new(vec![Piece { lo: -Q::one(), hi: Q::one(), formula: Formula::Tent { n } }])
    }

    fn index_of(&self, x: f64) -> usize {
        self.lo_f.partition_point(|&l| l <= x).saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_d(x).0
    }

    /// Value and derivative; inputs are clamped to `[-1, 1]`.
    pub fn eval_d(&self, x: f64) -> (f64, f64) {
        let x = x.clamp(-1.0, 1.0);
        let i = self.index_of(x);
        self.eval_piece_d(i, x)
    }

    fn eval_piece_d(&self, i: usize, x: f64) -> (f64, f64) {
        match &self.fast[i] {
            Fast::Affine(a, b) => (a * x + b, *a),
            Fast::Tent(n) => tent_f64(*n, x),
            Fast::Radial { sigma, sc, sr, dc, dr } => {
                let t = ((x - sc) / sr).clamp(-1.0, 1.0);
                (dc + dr * push_unchecked(*sigma, t), dr / sr * push_derivative(*sigma, t))
            }
            Fast::Sewn { sc, sh, dc, dh, rin, rout, power } => {
                let child = match &self.pieces[i].formula {
                    Formula::Sewn { child, .. } => child,
                    _ => unreachable!("fast mirror out of sync"),
                };
                let mut t = ((x - sc) / sh).clamp(-1.0, 1.0);
                let mut d = dh / sh;
                if *rin {
                    t = -t;
                    d = -d;
                }
                for _ in 0..*power {
                    let (v, dv) = child.eval_d(t);
                    t = v;
                    d *= dv;
                }
                if *rout {
                    t = -t;
                    d = -d;
                }
                (dc + dh * t, d)
            }
        }
    }

    /// Exact value when `x` lies in a rational piece. At a shared endpoint
    /// every piece containing `x` is tried.
    pub fn eval_exact(&self, x: &Q) -> Option<Q> {
        let start = self.pieces.partition_point(|p| &p.hi < x);
        self.pieces[start..]
            .iter()
            .take_while(|p| &p.lo <= x)
            .find_map(|p| p.formula.eval_exact(x))
    }

    pub fn is_rational(&self) -> bool {
        self.pieces.iter().all(|p| p.formula.is_rational())
    }

    /// Affine laps of every rational-affine or tent piece; other pieces are skipped.
    pub fn affine_laps(&self) -> Vec<Seg> {
        let mut out = Vec::new();
        for p in &self.pieces {
            match &p.formula {
                Formula::Affine { a, b } => out.push(Seg::new(p.lo.clone(), p.hi.clone(), a.clone(), b.clone())),
                Formula::Tent { n } => out.extend(tent_segs(*n, &p.lo, &p.hi)),
                _ => {}
            }
        }
        out
    }

    /// Every lap as a segment, failing if some piece is not affine.
    pub fn segs(&self) -> Result<Vec<Seg>> {
        if self.pieces.iter().any(|p| !matches!(p.formula, Formula::Affine { .. } | Formula::Tent { .. })) {
            return Err(AccumError::Realization("map has non-affine pieces".into()));
        }
        Ok(self.affine_laps())
    }

    /// Breakpoints `x` where the left and right formulas disagree by more than `tol`,
    /// with both one-sided values.
    pub fn continuity_defects(&self, tol: f64) -> Vec<(Q, f64, f64)> {
        let mut out = Vec::new();
        for i in 0..self.pieces.len().saturating_sub(1) {
            let x = &self.pieces[i].hi;
            let xf = to_f64(x);
            let left = self.one_sided(i, x, xf);
            let right = self.one_sided(i + 1, x, xf);
            if (left - right).abs() > tol {
                out.push((x.clone(), left, right));
            }
        }
        out
    }

    fn one_sided(&self, i: usize, x: &Q, xf: f64) -> f64 {
        match self.pieces[i].formula.eval_exact(x) {
            Some(v) => to_f64(&v),
            None => self.eval_piece_d(i, xf).0,
        }
    }

    pub fn breakpoints(&self) -> Vec<Q> {
        self.pieces.iter().skip(1).map(|p| p.lo.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }
}

/// `±1`, exposed for callers that build signs from slopes.
pub fn slope_sign(a: &Q) -> i8 {
    if a.is_negative() {
        -1
    } else {
        1
    }
}
