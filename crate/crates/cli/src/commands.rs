use std::io::Write;

use anyhow::{bail, Result};
use leafsim_core::brownian::sample_ensemble;
use leafsim_core::cocycle::{lyapunov_ensemble, lyapunov_estimate, second_half_slope, Bundle, LyapunovEstimate, LyapunovSeries};
use leafsim_core::config::predicted_exponents;
use leafsim_core::ergodic::{ensemble_occupation, near_plane_fraction_stream, off_plane_start, NearPlane, similarity_check, transition_similarity};
use leafsim_core::heat::heat_tail;
use leafsim_core::projection::{contraction_experiment, transverse_offset};
use leafsim_core::validate::validate;
use leafsim_core::{AmbientPoint, RefDomain, Classification, Complex64, Foliation, SamplerConfig};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::context::Context;

/// Largest number of rows per path in the exported time series.
const SERIES_ROWS: usize = 1000;

fn cx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn point_json(f: &Foliation, p: &AmbientPoint) -> Value {
    json!({ "chart": p.chart, "coords": p.coords.iter().take(f.dim()).map(|z| cx(*z)).collect::<Vec<_>>() })
}

fn fmt_point(f: &Foliation, p: &AmbientPoint) -> String {
    let coords: Vec<String> = p.coords.iter().take(f.dim()).map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
    format!("chart {} ({})", p.chart, coords.join(", "))
}

fn horizons(ctx: &Context, configured: &[f64], overridden: bool) -> Vec<f64> {
    if overridden {
        vec![ctx.cfg.sampler.horizon]
    } else {
        configured.to_vec()
    }
}

fn at_horizon(cfg: &SamplerConfig, t: f64) -> SamplerConfig {
    SamplerConfig { horizon: t, ..*cfg }
}

pub fn singularities(ctx: &Context) -> Result<()> {
    // classification is reported, not enforced
    let f = ctx.cfg.foliation.build()?;
    let mut rows = Vec::new();
    for (i, s) in f.singularities().iter().enumerate() {
        let eigs: Vec<String> = s.eigenvalues.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
        println!("singularity {i}: {} eigenvalues [{}] {:?}", fmt_point(&f, &s.location), eigs.join(", "), s.classification);
        rows.push(json!({
            "index": i,
            "location": point_json(&f, &s.location),
            "eigenvalues": s.eigenvalues.iter().map(|z| cx(*z)).collect::<Vec<_>>(),
            "classification": s.classification,
            "linear_model": s.linear_model.is_some(),
        }));
    }
    let all_hyperbolic = f.singularities().iter().all(|s| s.classification == Classification::Hyperbolic);
    if !all_hyperbolic && !ctx.cfg.exploratory {
        println!("warning: non-hyperbolic singularities; other subcommands need an exploratory run");
    }
    ctx.json(
        "singularities.json",
        json!({ "singularities": rows, "all_hyperbolic": all_hyperbolic, "exploratory": ctx.cfg.exploratory }),
    )?;
    Ok(())
}

fn estimate_json(est: &LyapunovEstimate, expected: Option<f64>) -> Value {
    json!({
        "slope": est.ci.mean,
        "stderr": est.ci.stderr,
        "lower": est.ci.lower,
        "upper": est.ci.upper,
        "excludes_zero": est.ci.excludes_zero(),
        "paths": est.slopes.len(),
        "expected": expected.map(|e| -e),
        "ratio_to_expected": expected.map(|e| -est.ci.mean / e),
    })
}

pub fn lyapunov(ctx: &Context) -> Result<()> {
    let f = ctx.foliation()?;
    let cfg = &ctx.cfg;
    let series = lyapunov_ensemble(&f, &cfg.start_points(), &cfg.sampler, cfg.paths)?;
    let bundles: &[Bundle] = if series.iter().all(|s| s.log_l.is_some()) { &[Bundle::N, Bundle::L] } else { &[Bundle::N] };
    ctx.csv("lyapunov_paths.csv", |w| write_slopes(w, &series, bundles))?;
    ctx.csv("lyapunov_series.csv", |w| write_series(w, &series))?;

    let exp = &cfg.experiments.lyapunov;
    let predicted = predicted_exponents(cfg.foliation.degree);
    let lambda = exp.expected_lambda.or(predicted.map(|p| p.0));
    let mu = exp.expected_mu.or(predicted.map(|p| p.1));
    let source = if exp.expected_lambda.is_some() || exp.expected_mu.is_some() { "config" } else { "degree" };
    let mut summary = serde_json::Map::new();
    for (bundle, expected) in bundles.iter().zip([lambda, mu]) {
        let pairs: Vec<(&[f64], &[f64])> = series.iter().map(|s| (&s.times[..], s.values(*bundle).unwrap_or(&[]))).collect();
        let est = lyapunov_estimate(&pairs, exp.level)?;
        let shown = expected.map_or("none".to_string(), |e| format!("{:.6} (ratio {:.4})", -e, -est.ci.mean / e));
        println!(
            "{bundle:?}: slope {:.6} CI [{:.6}, {:.6}] expected {shown}",
            est.ci.mean, est.ci.lower, est.ci.upper
        );
        summary.insert(format!("{bundle:?}"), estimate_json(&est, expected));
    }
    let terminated = series.iter().filter(|s| s.terminated.is_some()).count();
    ctx.json(
        "lyapunov.json",
        json!({
            "bundles": summary,
            "degree": cfg.foliation.degree,
            "expected": { "lambda": lambda, "mu": mu, "source": source },
            "level": exp.level,
            "terminated_paths": terminated,
            "horizon": cfg.sampler.horizon,
            "note": "slopes are in leaf-metric time; the expected values hold for the constant-curvature leaf metric, which is comparable up to a bounded factor",
        }),
    )?;
    Ok(())
}

fn write_slopes(w: &mut dyn Write, series: &[LyapunovSeries], bundles: &[Bundle]) -> std::io::Result<()> {
    writeln!(w, "path,bundle,slope,terminated_at")?;
    for (i, s) in series.iter().enumerate() {
        let end = s.terminated.as_ref().map_or("nan".to_string(), |(t, _)| t.to_string());
        for b in bundles {
            let slope = s.values(*b).and_then(|v| second_half_slope(&s.times, v)).unwrap_or(f64::NAN);
            writeln!(w, "{i},{b:?},{slope:e},{end}")?;
        }
    }
    Ok(())
}

fn write_series(w: &mut dyn Write, series: &[LyapunovSeries]) -> std::io::Result<()> {
    writeln!(w, "path,t,log_n,log_l")?;
    for (i, s) in series.iter().enumerate() {
        let stride = s.times.len().div_ceil(SERIES_ROWS).max(1);
        for k in (0..s.times.len()).step_by(stride) {
            let ll = s.log_l.as_ref().map_or(f64::NAN, |v| v[k]);
            writeln!(w, "{i},{},{:e},{:e}", s.times[k], s.log_n[k], ll)?;
        }
    }
    Ok(())
}

pub fn contraction(ctx: &Context) -> Result<()> {
    let f = ctx.foliation()?;
    let cfg = &ctx.cfg;
    let exp = &cfg.experiments.contraction;
    let paths = sample_ensemble(&f, &cfg.start_points(), &cfg.sampler, cfg.paths)?;
    let table = contraction_experiment(&f, &paths, exp.rho, &exp.thetas, &cfg.projection)?;
    ctx.csv("contraction.csv", |w| table.write_csv(w))?;
    ctx.csv("contraction_summary.csv", |w| table.write_summary_csv(w))?;
    let rows: Vec<Value> = exp
        .thetas
        .iter()
        .map(|&theta| {
            let series: Vec<_> = table.series.iter().filter(|s| s.theta == theta).collect();
            let rates: Vec<f64> = series.iter().filter_map(|s| s.rate).collect();
            let mean_rate = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
            let exited = series.iter().filter(|s| s.exited).count();
            println!("theta {theta:e}: decaying fraction {:.3}, exited {exited}", table.fraction_decaying(theta));
            json!({
                "theta": theta,
                "fraction_decaying": table.fraction_decaying(theta),
                "mean_rate": mean_rate,
                "exited": exited,
                "paths": series.len(),
            })
        })
        .collect();
    ctx.json("contraction.json", json!({ "rho": exp.rho, "thetas": rows, "horizon": cfg.sampler.horizon }))?;
    Ok(())
}

pub fn occupation(ctx: &Context, horizon_override: bool) -> Result<()> {
    let f = ctx.foliation()?;
    let cfg = &ctx.cfg;
    let exp = &cfg.experiments.occupation;
    let p = cfg.start_points()[0];
    let mut rows = Vec::new();
    for t in horizons(ctx, &exp.horizons, horizon_override) {
        let hist = ensemble_occupation(&f, &p, &at_horizon(&cfg.sampler, t), 0, cfg.paths, &exp.binning)?;
        ctx.csv(&format!("occupation_T{t}.csv"), |w| hist.write_csv(w))?;
        let masses = hist.masses();
        let overflow = masses.last().copied().unwrap_or(0.0);
        println!("T = {t}: total time {:.3}, overflow mass {overflow:.4}", hist.total_time);
        rows.push(json!({
            "horizon": t,
            "total_time": hist.total_time,
            "mass_sum": masses.iter().sum::<f64>(),
            "overflow": overflow,
            "terminated_paths": hist.terminated,
        }));
    }
    let mut summary = json!({ "binning": exp.binning, "paths": cfg.paths, "start": point_json(&f, &p), "horizons": rows });
    if f.dim() == 3 && f.has_invariant_plane() {
        summary["near_plane"] = near_plane(ctx, &f, &p, horizon_override)?;
    }
    ctx.json("occupation.json", summary)?;
    Ok(())
}

fn near_plane(ctx: &Context, f: &Foliation, p: &AmbientPoint, horizon_override: bool) -> Result<Value> {
    let cfg = &ctx.cfg;
    let exp = &cfg.experiments.near_plane;
    let q = off_plane_start(f, p, exp.start_offset)?;
    let ts = horizons(ctx, &exp.horizons, horizon_override);
    let mut table = Vec::new();
    for &t in &ts {
        let s = at_horizon(&cfg.sampler, t);
        let runs = (0..cfg.paths as u64)
            .into_par_iter()
            .map(|i| near_plane_fraction_stream(f, &q, &s, i, exp.eps))
            .collect::<leafsim_core::Result<Vec<NearPlane>>>()?;
        table.push((t, runs));
    }
    ctx.csv("near_plane.csv", |w| {
        writeln!(w, "horizon,path,fraction,terminated_at")?;
        for (t, runs) in &table {
            for (i, r) in runs.iter().enumerate() {
                let end = r.terminated_at.map(|x| x.to_string()).unwrap_or_default();
                writeln!(w, "{t},{i},{},{end}", r.fraction)?;
            }
        }
        Ok(())
    })?;
    let means: Vec<Value> = table
        .iter()
        .map(|(t, runs)| {
            let m = runs.iter().map(|r| r.fraction).sum::<f64>() / runs.len() as f64;
            let terminated = runs.iter().filter(|r| r.terminated_at.is_some()).count();
            println!("near-plane fraction (eps {}) at T = {t}: {m:.4} ({terminated} paths terminated)", exp.eps);
            json!({ "horizon": t, "mean_fraction": m, "terminated_paths": terminated })
        })
        .collect();
    Ok(json!({ "eps": exp.eps, "start": point_json(&f, &q), "horizons": means }))
}

pub fn similarity(ctx: &Context, horizon_override: bool) -> Result<()> {
    let f = ctx.foliation()?;
    let cfg = &ctx.cfg;
    let exp = &cfg.experiments.similarity;
    let binning = &cfg.experiments.occupation.binning;
    let p = cfg.start_points()[0];
    let q = transverse_offset(&f, &p, exp.offset)?;
    let mut tv = Vec::new();
    for t in horizons(ctx, &cfg.experiments.occupation.horizons, horizon_override) {
        let d = similarity_check(&f, &p, &q, &at_horizon(&cfg.sampler, t), cfg.paths, binning, exp.seeding)?;
        println!("T = {t}: occupation TV {d:.4}");
        tv.push((t, d));
    }
    let mut transition = Vec::new();
    for &off in &exp.offsets {
        let qo = transverse_offset(&f, &p, off)?;
        let d = transition_similarity(&f, &p, &qo, &exp.transition, &cfg.sampler, &cfg.projection.ift)?;
        println!("offset {off:e}: transition TV {d:.4}");
        transition.push((off, d));
    }
    ctx.csv("similarity.csv", |w| {
        writeln!(w, "horizon,tv")?;
        tv.iter().try_for_each(|(t, d)| writeln!(w, "{t},{d}"))
    })?;
    ctx.csv("transition.csv", |w| {
        writeln!(w, "offset,tv")?;
        transition.iter().try_for_each(|(o, d)| writeln!(w, "{o:e},{d}"))
    })?;
    let decreasing = |v: &[(f64, f64)]| v.windows(2).all(|w| w[1].1 <= w[0].1);
    ctx.json(
        "similarity.json",
        json!({
            "p": point_json(&f, &p),
            "q": point_json(&f, &q),
            "seeding": exp.seeding,
            "paths": cfg.paths,
            "occupation_tv": tv.iter().map(|(t, d)| json!({ "horizon": t, "tv": d })).collect::<Vec<_>>(),
            "occupation_tv_decreasing": decreasing(&tv),
            "transition_tv": transition.iter().map(|(o, d)| json!({ "offset": o, "tv": d })).collect::<Vec<_>>(),
            "transition_tv_increasing_with_offset": transition.windows(2).all(|w| w[1].1 >= w[0].1),
        }),
    )?;
    Ok(())
}

pub fn heat(ctx: &mut Context) -> Result<()> {
    let hc = ctx.cfg.experiments.heat_tail;
    ctx.seed = hc.seed;
    let tail = heat_tail(RefDomain::UnitDisk, Complex64::new(0.0, 0.0), &hc)?;
    ctx.csv("heat_tail.csv", |w| tail.write_csv(w))?;
    let Some(fit) = tail.fit else {
        bail!("heat-tail fit needs at least two radii with positive tail");
    };
    println!("slope {:.4} intercept {:.4} R^2 {:.4}", fit.slope, fit.intercept, fit.r_squared);
    ctx.json(
        "heat_tail.json",
        json!({
            "domain": RefDomain::UnitDisk,
            "windows": hc.windows,
            "delta": hc.delta,
            "h": hc.h,
            "slope": fit.slope,
            "slope_stderr": fit.slope_stderr,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
        }),
    )?;
    Ok(())
}

/// Returns whether every check passed.
pub fn run_validate(ctx: &Context) -> Result<bool> {
    let report = validate(&ctx.cfg, ctx.seed)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    ctx.json("validate.json", json!({ "passed": report.passed(), "checks": report.checks }))?;
    Ok(report.passed())
}
