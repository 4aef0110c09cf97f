//! Acceptance run: one line per criterion, nonzero exit if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use accum_core::constructors::{base_finite, general_model, irreducible_model, powers_model, verify_certificate};
use accum_core::entmodel::{sample_points as model_points, Family, Node, Template};
use accum_core::ordinal::{ord_add, ord_nat_mul};
use accum_core::rational::{q, qi, to_f64};
use accum_core::realize1d::{
    blowup_compose, check_semiconjugacy, default_schedule, estimate_entropy, realize, sample_points, tent,
    PiecewiseMap, RealizePlan,
};
use accum_core::seqalg::{seq_limit, tail_sup};
use accum_core::transfinite::Calculus;
use accum_core::{EntropyModel, Limit, Ordinal, ScalarSeq, Sup, Q};
use common::{fit, props, random_composite, random_model, TruncationOracle, STAGES};
use num_traits::{Signed, Zero};

type Check = Result<String, String>;

fn ord(s: &str) -> Ordinal {
    s.parse().expect("ordinal literal")
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn halves() -> [Q; 3] {
    [q(1, 2), qi(1), qi(3)]
}

fn general_grid() -> Check {
    let start = Instant::now();
    let alphas = ["1", "2", "3", "4", "w", "w + 1", "w*2", "w^2", "w^2 + w*3 + 2", "w^w"];
    let mut n = 0;
    for s in alphas {
        let alpha = ord(s);
        for a in halves() {
            let (m, cert) = general_model(&alpha, &a, &qi(1)).map_err(e)?;
            let report = verify_certificate(&m, &cert);
            if !report.all_pass {
                let bad: Vec<_> = report.claims.iter().filter(|c| !c.pass).map(|c| c.claim.clone()).collect();
                return Err(format!("alpha {s}, a {a}: failed claims {bad:?}"));
            }
            let mut calc = Calculus::new();
            let a0 = calc.alpha0(&m).map_err(e)?;
            ensure(a0 == alpha, || format!("alpha {s}: computed alpha0 {a0}"))?;
            let top = calc.norm(&m, &alpha).map_err(e)?;
            ensure(top == a, || format!("alpha {s}: norm at alpha0 is {top}, want {a}"))?;
            n += 1;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(300), || format!("grid took {t:?}"))?;
    Ok(format!("{n} models certified in {:.1}s", t.as_secs_f64()))
}

fn finite_ladders() -> Check {
    let mut n = 0;
    for p in 1..=5u64 {
        for a in halves() {
            let (m, cert) = base_finite(p, &a, &qi(1)).map_err(e)?;
            ensure(verify_certificate(&m, &cert).all_pass, || format!("certificate of p = {p}, a = {a}"))?;
            let mut calc = Calculus::new();
            ensure(calc.alpha0(&m).map_err(e)? == Ordinal::finite(p), || format!("alpha0 of p = {p}"))?;
            for k in 0..=p + 2 {
                let want = &a * q(k.min(p) as i64, p as i64);
                let got = calc.norm(&m, &Ordinal::finite(k)).map_err(e)?;
                ensure(got == want, || format!("p = {p}, a = {a}: norm u_{k} = {got}, want {want}"))?;
                n += 1;
            }
        }
    }
    Ok(format!("{n} ladder values"))
}

/// Upper bound on `s_m·‖u_γ(χ_m)‖` for every copy past `cut`, read off the
/// member guarantees of the template: `‖u_γ‖ ≤ ε_j ≤ 1/j` once `δ_j ≥ γ`
/// for irreducible members, and `‖u_γ‖ ≤ (L+1)·amp(j)/j` for powers members
/// where `L` is the coefficient of `ω^β` in `γ < ω^{β+1}`.
fn member_tail_bound(children: &Family, scale: &ScalarSeq, g: &Ordinal, cut: u64) -> Result<Q, String> {
    let j0 = children.index(cut + 1);
    let per_j = match &children.template {
        Template::IrrFixed { .. } | Template::IrrLimit { .. } => {
            let d = children.template.delta(j0).map_err(e)?;
            ensure(d >= *g, || format!("delta_{j0} = {d} is below {g}"))?;
            ScalarSeq::harmonic(qi(1))
        }
        Template::Powers { beta, amp, .. } => {
            ensure(*g < Ordinal::omega_pow(beta.succ()), || format!("{g} is past the powers members"))?;
            let l = g.coefficient_of(beta) as i64;
            ScalarSeq::scale(qi(l + 1), ScalarSeq::product(amp.clone(), ScalarSeq::harmonic(qi(1))))
        }
        t => return Err(format!("no member bound for {t:?}")),
    };
    let seq = ScalarSeq::product(scale.clone(), ScalarSeq::shift(children.shift, per_j));
    match tail_sup(&seq, cut + 1).map_err(e)? {
        Sup::Finite(b) => Ok(&children.factor * b),
        Sup::PosInf => Err("member bound is unbounded".into()),
    }
}

/// `sup_m s_m·‖u_γ(χ_m)‖`, enumerating copies `1..=cut + 10`. The tail is
/// certified by an exact rational fit of the last ten values, or else by
/// the member bound falling below the enumerated maximum.
fn family_sup(calc: &mut Calculus, m: &EntropyModel, g: &Ordinal, cut: u64) -> Result<Q, String> {
    let Node::Blow { children, scale, .. } = m.node() else { return Err("not a composite".into()) };
    let mut best = Q::zero();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for j in 1..=cut + 10 {
        let v = scale.eval(j) * calc.norm(&children.member(j).map_err(e)?, g).map_err(e)?;
        if j > cut {
            xs.push(qi(j as i64));
            ys.push(v.clone());
        }
        if v > best {
            best = v;
        }
    }
    if let Some(f) = fit(&xs, &ys) {
        match f.monotone_from(&xs[0]) {
            Some(-1) => return Ok(best),
            Some(_) => {
                let lim = f.limit().ok_or_else(|| format!("family tail diverges at {g}"))?;
                return Ok(if lim > best { lim } else { best });
            }
            None => {}
        }
    }
    let bound = member_tail_bound(children, scale, g, cut + 10)?;
    ensure(bound <= best, || format!("family tail at {g} bounded only by {bound}, above {best}"))?;
    Ok(best)
}

fn blow_up_formula() -> Check {
    // (model, irreducible α of the top family, base f, stages below α, offsets past α)
    let below_w = ["0", "1", "2", "3", "5"];
    let past_w = ["0", "1", "2", "3", "5"];
    let below_w2 = ["0", "1", "w", "w*2 + 1", "w*5"];
    let past_w2 = ["0", "1", "w", "w*2", "w^2"];
    let cases: Vec<(&str, EntropyModel, Ordinal, &[&str], &[&str])> = vec![
        ("general(w + 3)", general_model(&ord("w + 3"), &qi(1), &qi(1)).map_err(e)?.0, ord("w"), &below_w, &past_w),
        ("general(w*2)", general_model(&ord("w*2"), &qi(2), &qi(1)).map_err(e)?.0, ord("w"), &below_w, &past_w),
        ("general(w^2 + w)", general_model(&ord("w^2 + w"), &qi(1), &qi(1)).map_err(e)?.0, ord("w^2"), &below_w2, &past_w2),
        ("powers(w, 3)", powers_model(&Ordinal::one(), 3, &qi(3), &qi(1)).map_err(e)?.0, ord("w"), &below_w, &past_w),
        (
            "irreducible(w^2)",
            irreducible_model(&Ordinal::finite(2), &qi(1), &ord("w"), &q(1, 2), &qi(1)).map_err(e)?.0,
            ord("w^2"),
            &below_w2,
            &past_w2,
        ),
    ];
    let mut n = 0;
    for (name, m, alpha, below, past) in cases {
        let Node::Blow { base, children, scale, .. } = m.node() else { return Err(format!("{name} is an atom")) };
        let a = match seq_limit(&ScalarSeq::product(scale.clone(), children.final_norm_seq())).map_err(e)? {
            Limit::Finite(x) => x,
            l => return Err(format!("{name}: s_m a_m tends to {l}")),
        };
        // Cross-check the limit of s_m·a_m against sampled values.
        let xs: Vec<Q> = (50..60).map(qi).collect();
        let ys: Vec<Q> = (50..60u64).map(|j| scale.eval(j) * children.final_norm_seq().eval(j)).collect();
        let sampled = fit(&xs, &ys).and_then(|f| f.limit());
        ensure(sampled.as_ref() == Some(&a), || format!("{name}: sampled limit {sampled:?} vs {a}"))?;

        let mut calc = Calculus::new();
        for g in below.iter().map(|s| ord(s)) {
            ensure(g < alpha, || format!("{name}: {g} is not below {alpha}"))?;
            let lhs = calc.norm(&m, &g).map_err(e)?;
            let fb = calc.norm(base, &g).map_err(e)?;
            let fam = family_sup(&mut calc, &m, &g, 20)?;
            let rhs = if fb > fam { fb } else { fam };
            ensure(lhs == rhs, || format!("{name}: norm u_{g} = {lhs}, formula gives {rhs}"))?;
            n += 1;
        }
        for g0 in past.iter().map(|s| ord(s)) {
            let g = ord_add(&alpha, &g0);
            let lhs = calc.norm(&m, &g).map_err(e)?;
            let rhs = &a + calc.norm(base, &g0).map_err(e)?;
            ensure(lhs == rhs, || format!("{name}: norm u_{g} = {lhs}, formula gives {rhs}"))?;
            n += 1;
        }
    }
    Ok(format!("{n} stages across 5 models"))
}

fn powers_of_omega() -> Check {
    let mut n = 0;
    for p in 1..=4u64 {
        for a in [qi(1), q(5, 2)] {
            let (m, cert) = powers_model(&Ordinal::one(), p, &a, &qi(1)).map_err(e)?;
            ensure(verify_certificate(&m, &cert).all_pass, || format!("certificate of p = {p}"))?;
            let mut calc = Calculus::new();
            let want0 = ord_nat_mul(&Ordinal::omega(), p).map_err(e)?;
            ensure(calc.alpha0(&m).map_err(e)? == want0, || format!("alpha0 of p = {p}"))?;
            for l in 1..=p {
                let g = ord_nat_mul(&Ordinal::omega(), l).map_err(e)?;
                let want = &a * q(l as i64, p as i64);
                let got = calc.norm(&m, &g).map_err(e)?;
                ensure(got == want, || format!("p = {p}: norm u_{g} = {got}, want {want}"))?;
                n += 1;
            }
        }
    }
    Ok(format!("{n} values"))
}

fn irreducible_bounds() -> Check {
    let one = [("1", q(1, 2)), ("3", q(1, 4)), ("5", q(1, 8)), ("10", q(1, 10)), ("20", q(1, 100))];
    let two = [("w", q(1, 2)), ("w*3", q(1, 4)), ("w*5 + 2", q(1, 8)), ("7", q(1, 10)), ("w*10", q(1, 100))];
    let mut n = 0;
    for (beta, a, pairs) in [(1u64, qi(1), one), (2, qi(2), two)] {
        let alpha = Ordinal::omega_pow(Ordinal::finite(beta));
        for (d, eps) in pairs {
            let delta = ord(d);
            let (m, cert) = irreducible_model(&Ordinal::finite(beta), &a, &delta, &eps, &qi(1)).map_err(e)?;
            ensure(verify_certificate(&m, &cert).all_pass, || format!("certificate of beta {beta}, delta {d}"))?;
            let mut calc = Calculus::new();
            let got = calc.norm(&m, &delta).map_err(e)?;
            ensure(got <= eps, || format!("beta {beta}: norm u_{d} = {got} exceeds {eps}"))?;
            ensure(calc.alpha0(&m).map_err(e)? == alpha, || format!("beta {beta}, delta {d}: alpha0"))?;
            ensure(calc.norm(&m, &alpha).map_err(e)? == a, || format!("beta {beta}, delta {d}: top norm"))?;
            n += 1;
        }
    }
    Ok(format!("{n} (delta, epsilon) pairs"))
}

fn property_suite() -> Check {
    let mut comparisons = 0;
    for seed in 0..20u64 {
        let m = random_model(seed);
        let tag = |what: &str, err: String| format!("seed {seed}, {what}: {err}");
        comparisons += props::monotone_in_gamma(&m).map_err(|x| tag("monotone", x))?;
        comparisons += props::subadditive(&m).map_err(|x| tag("subadditive", x))?;
        comparisons += props::restriction_monotone(&m).map_err(|x| tag("restriction", x))?;
        if !m.is_atom() {
            comparisons += props::copy_locality(&m).map_err(|x| tag("copy locality", x))?;
        }
        comparisons += props::tower_scaling(&m, 3, 2).map_err(|x| tag("tower scaling", x))?;
        comparisons += props::sync_independent(&m).map_err(|x| tag("sync", x))?;
    }
    Ok(format!("20 models, {comparisons} comparisons"))
}

fn oracle_agreement() -> Check {
    let mut certified = 0;
    for seed in 0..10u64 {
        let m = random_composite(seed);
        let mut oracle = TruncationOracle::new(32, 3, 64);
        let mut calc = Calculus::new();
        let pts = model_points(&m, 2, 1).map_err(e)?;
        let before = certified;
        for g in 0..=STAGES {
            let gamma = Ordinal::finite(g as u64);
            if let Some(v) = oracle.norm(&m, g) {
                let got = calc.norm(&m, &gamma).map_err(e)?;
                ensure(got == v, || format!("seed {seed}: norm u_{g} calculus {got}, oracle {v}"))?;
                certified += 1;
            }
            for p in &pts {
                if let Some(v) = oracle.point(&m, g, p) {
                    let got = calc.point_value(&m, &gamma, p).map_err(e)?;
                    ensure(got == v, || format!("seed {seed}: u_{g}({p}) calculus {got}, oracle {v}"))?;
                    certified += 1;
                }
            }
        }
        ensure(certified > before, || format!("seed {seed}: oracle certified nothing"))?;
    }
    Ok(format!("10 composites, {certified} certified values agree"))
}

fn tent_entropy() -> Check {
    let mut parts = Vec::new();
    for n in [3u64, 5, 7] {
        let start = Instant::now();
        let h = estimate_entropy(&tent(n).map_err(e)?, 1e-3, 12, 10_000, 1);
        let t = start.elapsed();
        let want = (n as f64).ln();
        ensure((h - want).abs() <= 0.15 * want, || format!("tent {n}: {h:.4} vs ln {n} = {want:.4}"))?;
        ensure(t < Duration::from_secs(60), || format!("tent {n} took {t:?}"))?;
        parts.push(format!("tent{n} {h:.3}"));
    }
    let h = estimate_entropy(&PiecewiseMap::identity(), 1e-3, 12, 10_000, 1);
    ensure(h <= 0.05, || format!("identity: {h:.4}"))?;
    parts.push(format!("identity {h:.3}"));
    Ok(parts.join(", "))
}

fn alpha_one_realization() -> Check {
    let (m, _) = general_model(&Ordinal::one(), &qi(1), &qi(1)).map_err(e)?;
    let plan = RealizePlan { orbits: 3, depth: 1, ..RealizePlan::default() };
    let r = realize(&m, &plan).map_err(e)?;
    let semi = check_semiconjugacy(&r.map, &r.base, &r.pi, 10_000, 0);
    ensure(semi < 1e-9, || format!("semiconjugacy error {semi:e}"))?;
    let mut worst = 0.0f64;
    for t in 0..r.towers.len() {
        worst = worst.max(r.tower_conjugacy_error(t, 10_000, 1));
    }
    ensure(worst < 1e-9, || format!("tower error {worst:e}"))?;
    let want = r.predicted_entropy();
    let h = estimate_entropy(&r.map, 1e-3, 12, 10_000, 1);
    ensure((h - want).abs() <= 0.15 * want, || format!("entropy {h:.4} vs predicted {want:.4}"))?;
    let wander = r.wandering_failures(1000, 200, 0);
    ensure(wander == 0, || format!("{wander} annulus points failed to wander"))?;
    Ok(format!(
        "{} towers, semiconjugacy {semi:.1e}, tower error {worst:.1e}, entropy {h:.3} vs {want:.3}",
        r.towers.len()
    ))
}

fn blow_up_inverse() -> Check {
    let pts = vec![q(1, 3), q(-1, 2), q(1, 10), q(7, 9), q(-4, 5), q(3, 5)];
    let (deltas, ns) = default_schedule(&pts).map_err(e)?;
    let c = blowup_compose(&pts, &deltas, &ns).map_err(e)?;
    let mut worst = 0.0f64;
    for x in sample_points(10_000, 11) {
        let xq = Q::from_float(x).ok_or("sample is not finite")?;
        if pts.contains(&xq) {
            continue;
        }
        worst = worst.max((to_f64(&c.g(c.len(), &c.inverse(&xq))) - x).abs());
        for k1 in 0..=c.len() {
            for k2 in k1..=c.len() {
                let gap = (c.g(k1, &xq) - c.g(k2, &xq)).abs();
                let bound: Q = deltas[k1..k2].iter().sum();
                ensure(gap <= bound, || format!("Cauchy bound fails at x = {x}, k = {k1}..{k2}"))?;
            }
        }
    }
    ensure(worst < 1e-6, || format!("g(f(x)) error {worst:e}"))?;
    Ok(format!("{} points blown up, max g(f(x)) error {worst:.1e}", c.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("general models certified", general_grid),
        ("finite ladders", finite_ladders),
        ("blow-up norm formula", blow_up_formula),
        ("powers of omega", powers_of_omega),
        ("irreducible bounds", irreducible_bounds),
        ("property suite", property_suite),
        ("truncation oracle", oracle_agreement),
        ("tent entropy", tent_entropy),
        ("alpha = 1 realization", alpha_one_realization),
        ("blow-up inverse", blow_up_inverse),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
