//! Property suites behind the `validate` subcommand.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::brownian::{path_rng, sample_path, LeafPath, SamplerConfig};
use crate::cocycle::{canonical_section, normal_derivative_lognorm, transport_flat_section, transport_variational, Bundle};
use crate::config::{PesinExperiment, RunConfig};
use crate::error::Result;
use crate::foliation::{AmbientPoint, Classification, Foliation};
use crate::pesin::{lemma15_profile, lyapunov_norm, op_norm, pesin_compose, pesin_compose_all, pesin_radius, QuadraticMap, TriangularCocycle, C2, M2};
use crate::projection::ProjectionFrame;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, detail }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Check::new(name, passed, detail),
            Err(e) => Check::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn extend(&mut self, checks: Vec<Check>) {
        self.checks.extend(checks);
    }
}

fn cocycle(cfg: &PesinExperiment, seed: u64, i: usize) -> (TriangularCocycle, rand_chacha::ChaCha8Rng) {
    let mut rng = path_rng(seed, i as u64);
    let tc = TriangularCocycle::random(&mut rng, cfg.len, cfg.lambda, cfg.mu, cfg.m_bound, cfg.eps, cfg.spread);
    (tc, rng)
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::NEG_INFINITY, f64::max)
}

/// Runs the adapted-norm and composed-map suites on `cfg.samples` random cocycles.
pub fn pesin_suite(cfg: &PesinExperiment, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    if cfg.len < 4 || cfg.samples == 0 || cfg.steps == 0 {
        out.push(Check::new("pesin.config", false, "need len >= 4 and positive samples and steps".into()));
        return out;
    }
    let hyp = (0..cfg.samples).into_par_iter().map(|i| cocycle(cfg, seed, i).0.check_hypotheses()).collect::<Result<Vec<_>>>();
    out.push(Check::from_result("pesin.hypotheses", hyp.map(|_| (true, format!("{} cocycles", cfg.samples)))));

    let doubling = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let profile = lemma15_profile(&cocycle(cfg, seed, i).0, cfg.eps)?;
            Ok(profile[cfg.len - 1] / profile[cfg.len / 2 - 1])
        })
        .collect::<Result<Vec<f64>>>()
        .map(|r| {
            let worst = max_of(r.iter().copied());
            (r.iter().all(|x| x.is_finite() && *x <= 2.0), format!("max C(len) / C(len/2) = {worst:.4}"))
        });
    out.push(Check::from_result("pesin.lemma15_doubling", doubling));

    // m + series length must stay inside the horizon
    let m_max = (cfg.len / 8).max(1);
    let contraction = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let (tc, mut rng) = cocycle(cfg, seed, i);
            let m = rng.random_range(1..=m_max);
            let u = C2::new(
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            );
            let lhs = lyapunov_norm(&tc, m + 1, &(tc.matrix(m) * u))?;
            let rhs = (-(tc.alpha() - tc.eps)).exp() * lyapunov_norm(&tc, m, &u)?;
            Ok(lhs - rhs - 1e-12 * rhs.max(1.0))
        })
        .collect::<Result<Vec<f64>>>()
        .map(|r| {
            let worst = max_of(r.iter().copied());
            (worst <= 0.0, format!("max excess {worst:.3e}"))
        });
    out.push(Check::from_result("pesin.one_step_contraction", contraction));

    let trials = cfg.samples.min(100);
    let n = cfg.steps.min(cfg.len);
    let linear = (0..trials)
        .into_par_iter()
        .map(|i| {
            let tc = cocycle(cfg, seed, i).0;
            let maps: Vec<_> = (1..=n).map(|k| QuadraticMap::linear(tc.matrix(k))).collect();
            let p = (1..=n).fold(M2::identity(), |p, k| tc.matrix(k) * p);
            let want = op_norm(&p) * 0.5;
            (pesin_compose(&maps, 0.5, n) - want).abs() / want
        })
        .collect::<Vec<f64>>();
    let worst = max_of(linear.iter().copied());
    out.push(Check::new("pesin.linear_composition", worst <= 1e-12, format!("max relative error {worst:.3e}")));

    let quadratic = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (tc, mut rng) = cocycle(cfg, seed, i);
            let maps: Vec<_> = (1..=n).map(|k| QuadraticMap::with_random_quadratic(tc.matrix(k), cfg.quadratic, &mut rng)).collect();
            let (rho, cst) = pesin_radius(&tc, cfg.quadratic, n)?;
            let rate = tc.alpha() - 2.0 * tc.eps;
            let radii = pesin_compose_all(&maps, rho);
            Ok(max_of(radii.iter().enumerate().map(|(k, r)| r / (cst * (-rate * (k + 1) as f64).exp() * rho))))
        })
        .collect::<Result<Vec<f64>>>()
        .map(|r| {
            let worst = max_of(r.iter().copied());
            (worst <= 1.0 + 1e-12, format!("max radius / bound {worst:.4} over {trials} trials, n = {n}"))
        });
    out.push(Check::from_result("pesin.quadratic_contraction", quadratic));
    out
}

fn bundles(f: &Foliation) -> Vec<Bundle> {
    if f.dim() == 3 && f.has_invariant_plane() {
        vec![Bundle::N, Bundle::L]
    } else {
        vec![Bundle::N]
    }
}

fn cocycle_checks(f: &Foliation, path: &LeafPath) -> Result<(f64, f64)> {
    let vs = transport_variational(f, path)?;
    let (mut duality, mut additivity) = (0.0f64, 0.0f64);
    let n = path.samples.len() - 1;
    for bundle in bundles(f) {
        let s0 = canonical_section(f, &path.start, bundle)?;
        let sec = transport_flat_section(f, path, &s0, bundle)?;
        for (k, s) in path.samples.iter().enumerate() {
            let h = sec.h_t(s.t)?;
            let d = normal_derivative_lognorm(f, &vs[k], &path.start, &s.point, bundle)?;
            duality = duality.max((h + d).abs() / (1.0 + d.abs()));
        }
        let a = path.samples[n / 2].t;
        let shifted = path.shift(a)?;
        let s1 = canonical_section(f, &shifted.start, bundle)?;
        let rest = transport_flat_section(f, &shifted, &s1, bundle)?;
        for s in &shifted.samples {
            let lhs = sec.h_t(a + s.t)?;
            additivity = additivity.max((lhs - sec.h_t(a)? - rest.h_t(s.t)?).abs());
        }
    }
    Ok((duality, additivity))
}

fn projection_identity(f: &Foliation, p: &AmbientPoint) -> Result<f64> {
    let frame = ProjectionFrame::new(f, p)?;
    let ift = Default::default();
    // flow times that move p by about 5% of the frame scale
    let x = f.eval(p)?;
    let r = 0.05 * frame.scale() / (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
    let mut worst = 0.0f64;
    for k in 0..8 {
        let zeta = Complex64::from_polar(r, k as f64 * std::f64::consts::FRAC_PI_4);
        let sol = frame.solve_xi(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), zeta, &ift)?;
        worst = worst.max(sol.xi.norm());
    }
    Ok(worst)
}

/// Checks that need the configured foliation: classification, cocycle identities on a
/// short path from every start and the projection identity at every start.
pub fn foliation_suite(cfg: &RunConfig, f: &Foliation) -> Vec<Check> {
    let mut out = Vec::new();
    let bad: Vec<usize> = f
        .singularities()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.classification != Classification::Hyperbolic)
        .map(|(i, _)| i)
        .collect();
    out.push(Check::new(
        "singularities.classified",
        bad.is_empty() || cfg.exploratory,
        format!("{} singularities, non-hyperbolic {:?}, exploratory {}", f.singularities().len(), bad, cfg.exploratory),
    ));
    let short = SamplerConfig { horizon: 20.0 * cfg.sampler.h, ..cfg.sampler };
    let starts = cfg.start_points();
    let per_start = starts.iter().enumerate().map(|(i, p)| sample_path(f, p, &short, i as u64).and_then(|path| cocycle_checks(f, &path)));
    let cocycle = per_start.collect::<Result<Vec<_>>>().map(|r| {
        let duality = max_of(r.iter().map(|x| x.0));
        let additivity = max_of(r.iter().map(|x| x.1));
        (duality, additivity)
    });
    match cocycle {
        Ok((duality, additivity)) => {
            out.push(Check::new("cocycle.duality", duality <= 1e-5, format!("max relative gap {duality:.3e}")));
            out.push(Check::new("cocycle.additivity", additivity <= 1e-8, format!("max gap {additivity:.3e}")));
        }
        Err(e) => out.push(Check::new("cocycle", false, format!("error: {e}"))),
    }
    let identity = starts.iter().map(|p| projection_identity(f, p)).collect::<Result<Vec<f64>>>().map(|r| {
        let worst = max_of(r.iter().copied());
        (worst <= 1e-12, format!("max |xi(0, 0, zeta)| = {worst:.3e}"))
    });
    out.push(Check::from_result("projection.identity", identity));
    out
}

/// Both suites for one configuration.
pub fn validate(cfg: &RunConfig, seed: u64) -> Result<Report> {
    let f = cfg.build()?;
    let mut report = Report::default();
    report.extend(foliation_suite(cfg, &f));
    report.extend(pesin_suite(&cfg.experiments.pesin, seed));
    Ok(report)
}
