//! Tail of the largest displacement of Brownian motion over a time window.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{reference_path, RefDomain, SamplerConfig};
use crate::error::{Error, Result};
use crate::stats::{linear_fit, LinearFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatTailConfig {
    /// Independent windows, one path each.
    pub windows: usize,
    pub delta: f64,
    pub h: f64,
    pub seed: u64,
    /// Number of radii in the fit grid.
    pub radii: usize,
    /// The grid spans the radii where the empirical tail lies in `[min_tail, max_tail]`.
    pub min_tail: f64,
    pub max_tail: f64,
}

impl Default for HeatTailConfig {
    fn default() -> Self {
        HeatTailConfig { windows: 10_000, delta: 1.0, h: 0.01, seed: 0, radii: 12, min_tail: 1e-3, max_tail: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatTail {
    pub delta: f64,
    pub displacements: Vec<f64>,
    pub radii: Vec<f64>,
    /// Empirical `P(displacement >= R)` on `radii`.
    pub tail: Vec<f64>,
    /// Fit of `log tail` against `R^2 / delta`.
    pub fit: Option<LinearFit>,
}

impl HeatTail {
    /// Columns `r,r2_over_delta,tail`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "r,r2_over_delta,tail")?;
        for (r, p) in self.radii.iter().zip(&self.tail) {
            writeln!(w, "{r},{},{p:e}", r * r / self.delta)?;
        }
        Ok(())
    }
}

fn empirical_tail(sorted: &[f64], r: f64) -> f64 {
    let below = sorted.partition_point(|d| *d < r);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// Samples `windows` reference paths from `z0` and fits the tail of their window displacement.
pub fn heat_tail(domain: RefDomain, z0: Complex64, cfg: &HeatTailConfig) -> Result<HeatTail> {
    if cfg.windows < 2 || cfg.radii < 3 || !(cfg.min_tail > 0.0 && cfg.min_tail < cfg.max_tail && cfg.max_tail < 1.0) {
        return Err(Error::Config("heat tail needs >= 2 windows, >= 3 radii and 0 < min_tail < max_tail < 1".into()));
    }
    let sampler = SamplerConfig { h: cfg.h, horizon: cfg.delta, seed: cfg.seed, ..Default::default() };
    sampler.validate()?;
    let steps = sampler.steps();
    let displacements = (0..cfg.windows as u64)
        .into_par_iter()
        .map(|i| Ok(reference_path(z0, domain, &sampler, steps, i)?.window_displacement(0.0, cfg.delta)))
        .collect::<Result<Vec<f64>>>()?;
    let mut sorted = displacements.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let quantile = |p: f64| sorted[((p * n as f64) as usize).min(n - 1)];
    let (lo, hi) = (quantile(1.0 - cfg.max_tail), quantile(1.0 - cfg.min_tail));
    // equal spacing in R^2, the abscissa of the fit
    let radii: Vec<f64> = (0..cfg.radii)
        .map(|k| (lo * lo + (hi * hi - lo * lo) * k as f64 / (cfg.radii - 1) as f64).sqrt())
        .collect();
    let tail: Vec<f64> = radii.iter().map(|r| empirical_tail(&sorted, *r)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        radii.iter().zip(&tail).filter(|(_, p)| **p > 0.0).map(|(r, p)| (r * r / cfg.delta, p.ln())).unzip();
    let fit = linear_fit(&xs, &ys);
    Ok(HeatTail { delta: cfg.delta, displacements, radii, tail, fit })
}
