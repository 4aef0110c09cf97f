use serde_json::{json, Value};

use accum_core::constructors::{
    base_finite, default_cap, general_model, irreducible_model, powers_model, s_zero, verify_certificate, Certificate,
};
use accum_core::entmodel::{eval_h, sample_points};
use accum_core::rational::{fmt_q, parse_q};
use accum_core::realize1d::{
    check_semiconjugacy, entropy_table, orbits_csv, realize as realize_model, sample_points as sample_xs, tent,
    EntropyTable, PiecewiseMap, Realization, RealizePlan,
};
use accum_core::transfinite::{u_gamma, Calculus};
use accum_core::{AccumError, EntropyModel, Ordinal, Result, Q};

use crate::{ConstructArgs, EstimateArgs, EstimatorArgs, Kind, PlanArgs, RealizeArgs, ReportArgs};

fn need<'a>(v: &'a Option<String>, flag: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| AccumError::InvalidArgument(format!("--{flag} is required for this kind")))
}

fn ord(v: &Option<String>, flag: &str) -> Result<Ordinal> {
    let o: Ordinal = need(v, flag)?.parse()?;
    o.check_height()?;
    Ok(o)
}

fn rat(v: &Option<String>, flag: &str) -> Result<Q> {
    parse_q(need(v, flag)?)
}

fn cap(v: &Option<String>) -> Result<Q> {
    v.as_deref().map(parse_q).unwrap_or_else(|| Ok(default_cap()))
}

fn write_or_print(path: Option<&str>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| AccumError::InvalidArgument(format!("cannot write {p}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("values serialize")
}

pub fn construct(a: &ConstructArgs) -> Result<bool> {
    let (kind, params, (model, cert)) = match a.kind {
        Kind::General => {
            let (alpha, av, c) = (ord(&a.alpha, "alpha")?, rat(&a.a, "a")?, cap(&a.cap)?);
            let params = json!({"alpha": alpha.to_string(), "a": fmt_q(&av), "cap": fmt_q(&c)});
            ("general", params, general_model(&alpha, &av, &c)?)
        }
        Kind::SZero => {
            let h = rat(&a.h, "h")?;
            ("s_zero", json!({"h": fmt_q(&h)}), s_zero(&h)?)
        }
        Kind::BaseFinite => {
            let p = a.p.ok_or_else(|| AccumError::InvalidArgument("--p is required for this kind".into()))?;
            let (av, c) = (rat(&a.a, "a")?, cap(&a.cap)?);
            ("base_finite", json!({"p": p, "a": fmt_q(&av), "cap": fmt_q(&c)}), base_finite(p, &av, &c)?)
        }
        Kind::Powers => {
            let p = a.p.ok_or_else(|| AccumError::InvalidArgument("--p is required for this kind".into()))?;
            let (beta, av, c) = (ord(&a.beta, "beta")?, rat(&a.a, "a")?, cap(&a.cap)?);
            let params = json!({"beta": beta.to_string(), "p": p, "a": fmt_q(&av), "cap": fmt_q(&c)});
            ("powers", params, powers_model(&beta, p, &av, &c)?)
        }
        Kind::Irreducible => {
            let (beta, av, c) = (ord(&a.beta, "beta")?, rat(&a.a, "a")?, cap(&a.cap)?);
            let (delta, eps) = (ord(&a.delta, "delta")?, rat(&a.epsilon, "epsilon")?);
            let params = json!({
                "beta": beta.to_string(), "a": fmt_q(&av), "delta": delta.to_string(),
                "epsilon": fmt_q(&eps), "cap": fmt_q(&c),
            });
            ("irreducible", params, irreducible_model(&beta, &av, &delta, &eps, &c)?)
        }
    };
    let report = verify_certificate(&model, &cert);
    let doc = json!({
        "request": {"kind": kind, "params": params},
        "model": to_value(&model),
        "certificate": to_value(&cert),
    });
    write_or_print(a.out.as_deref(), &pretty(&doc))?;
    eprintln!("{}", json!({"verified": report.all_pass, "failed": report.claims.iter().filter(|c| !c.pass).map(to_value).collect::<Vec<_>>()}));
    Ok(report.all_pass)
}

/// The model and certificate stored in a document written by `construct`.
pub fn load(path: &str) -> Result<(EntropyModel, Option<Certificate>)> {
    let text = std::fs::read_to_string(path).map_err(|e| AccumError::InvalidArgument(format!("cannot read {path}: {e}")))?;
    let doc: Value = serde_json::from_str(&text)?;
    let model_v = doc.get("model").cloned().ok_or_else(|| AccumError::InvalidModel(format!("{path} has no \"model\" field")))?;
    let model: EntropyModel = serde_json::from_value(model_v)?;
    let cert = match doc.get("certificate") {
        Some(c) => Some(serde_json::from_value(c.clone())?),
        None => None,
    };
    Ok((model, cert))
}

pub fn verify(path: &str) -> Result<bool> {
    let (model, cert) = load(path)?;
    let cert = cert.ok_or_else(|| AccumError::InvalidModel(format!("{path} has no \"certificate\" field")))?;
    let report = verify_certificate(&model, &cert);
    print!("{}", pretty(&to_value(&report)));
    Ok(report.all_pass)
}

fn plan(p: &PlanArgs) -> RealizePlan {
    RealizePlan { orbits: p.orbits, depth: p.depth, seed: p.seed, max_period: p.max_period, ..RealizePlan::default() }
}

fn table(f: &PiecewiseMap, e: &EstimatorArgs) -> Result<EntropyTable> {
    if e.n == 0 || e.samples == 0 || e.eps.is_empty() || e.eps.iter().any(|x| !(*x > 0.0)) {
        return Err(AccumError::InvalidArgument("estimator needs positive eps, n and samples".into()));
    }
    Ok(entropy_table(f, &e.eps, e.n, e.samples, e.sample_seed))
}

pub fn report(a: &ReportArgs) -> Result<bool> {
    let (model, cert) = load(&a.file)?;
    if a.csv {
        if !a.estimate_entropy {
            return Err(AccumError::InvalidArgument("--csv applies to --estimate-entropy".into()));
        }
        let r = realize_model(&model, &plan(&a.plan))?;
        print!("{}", table(&r.map, &a.est)?.to_csv());
        return Ok(true);
    }
    let mut out = serde_json::Map::new();
    if a.certificate {
        let cert = cert.ok_or_else(|| AccumError::InvalidModel("file has no certificate".into()))?;
        out.insert("certificate".into(), to_value(&cert));
    }
    let points = if a.u_gamma.is_empty() && !a.h_sex { Vec::new() } else { sample_points(&model, a.max_copy, a.point_depth)? };
    if !a.u_gamma.is_empty() {
        let mut calc = Calculus::new();
        let mut rows = Vec::new();
        for g in &a.u_gamma {
            let gamma: Ordinal = g.parse()?;
            rows.push(u_gamma(&mut calc, &model, &gamma, &points)?.report_json());
        }
        out.insert("u_gamma".into(), Value::Array(rows));
    }
    if a.h_sex {
        let mut calc = Calculus::new();
        let mut rows = Vec::new();
        for p in &points {
            let h = eval_h(&model, p)?;
            let hs = calc.h_sex(&model, p)?;
            rows.push(json!({"address": p.to_string(), "h": fmt_q(&h), "h_sex": fmt_q(&hs)}));
        }
        out.insert("h_sex".into(), Value::Array(rows));
    }
    if a.estimate_entropy {
        let r = realize_model(&model, &plan(&a.plan))?;
        out.insert(
            "entropy".into(),
            json!({"predicted": r.predicted_entropy(), "table": to_value(&table(&r.map, &a.est)?)}),
        );
    }
    print!("{}", pretty(&Value::Object(out)));
    Ok(true)
}

fn checks(r: &Realization, samples: usize, seed: u64) -> Value {
    let defects = r.map.continuity_defects(1e-12).len();
    let semi = check_semiconjugacy(&r.map, &r.base, &r.pi, samples, seed);
    let towers: Vec<f64> = (0..r.towers.len()).map(|m| r.tower_conjugacy_error(m, samples, seed + 1)).collect();
    json!({
        "continuity_defects": defects,
        "endpoints_fixed": r.map.eval(-1.0) == -1.0 && r.map.eval(1.0) == 1.0,
        "semiconjugacy_error": semi,
        "semiconjugacy_bound": fmt_q(&r.semiconjugacy_bound),
        "tower_conjugacy_errors": towers,
        "wandering_failures": r.wandering_failures(samples.min(1000), 200, seed + 2),
        "block_invariance_failures": r.block_invariance_failures(samples, seed + 3),
        "boundary_invariant": r.boundary_invariant(),
    })
}

pub fn realize(a: &RealizeArgs) -> Result<bool> {
    let (model, _) = load(&a.file)?;
    let r = realize_model(&model, &plan(&a.plan))?;
    if let Some(p) = &a.map_out {
        write_or_print(Some(p), &r.to_json())?;
    }
    if let Some(p) = &a.orbits_csv {
        let starts = sample_xs(a.starts, a.plan.seed);
        write_or_print(Some(p), &orbits_csv(&r.map, &starts, a.steps))?;
    }
    let summary = json!({
        "pieces": r.map.pieces.len(),
        "blown_points": r.points.len(),
        "towers": r.towers.len(),
        "base_tent": r.base_tent,
        "base_entropy": r.base_entropy,
        "predicted_entropy": r.predicted_entropy(),
        "scales": to_value(&r.scales),
        "blocks": r.blocks().iter().map(|b| b.iter().map(|(l, h)| [fmt_q(l), fmt_q(h)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "checks": checks(&r, a.check_samples, a.plan.seed),
    });
    print!("{}", pretty(&summary));
    Ok(true)
}

pub fn estimate(a: &EstimateArgs) -> Result<bool> {
    let f = match (&a.tent, &a.model) {
        (Some(n), None) => tent(*n)?,
        (None, Some(path)) => realize_model(&load(path)?.0, &plan(&a.plan))?.map,
        _ => return Err(AccumError::InvalidArgument("give exactly one of --tent or --model".into())),
    };
    write_or_print(a.out.as_deref(), &table(&f, &a.est)?.to_csv())?;
    Ok(true)
}
