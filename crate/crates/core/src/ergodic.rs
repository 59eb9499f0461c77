//! Empirical occupation measures of leafwise paths and their comparison.
//!
//! Histograms store time weights; masses are the weights divided by the total
//! time. Histograms over the same binning merge by adding weights.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{sample_path, LeafPath, SamplerConfig, Walker};
use crate::error::{Error, Result};
use crate::foliation::{AmbientKind, AmbientPoint, Foliation};
use crate::metric::speed;
use crate::projection::{local_projection, IftConfig};
use crate::stats::total_variation;

/// A grid of `bins x bins` cells plus one overflow cell (the last entry).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binning {
    /// Moment-map coordinates `|Z_a|^2 / |Z|^2` for the two homogeneous indices `axes`, on `[0, 1]^2`.
    Moment { axes: [usize; 2], bins: usize },
    /// Moduli of two coordinates of a fixed chart, on `[0, extent]^2`.
    Box { chart: usize, axes: [usize; 2], extent: f64, bins: usize },
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Moment { axes: [1, 2], bins: 20 }
    }
}

impl Binning {
    pub fn bins(&self) -> usize {
        match *self {
            Binning::Moment { bins, .. } | Binning::Box { bins, .. } => bins,
        }
    }

    pub fn len(&self) -> usize {
        self.bins() * self.bins() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.bins() == 0
    }

    fn upper(&self) -> f64 {
        match *self {
            Binning::Moment { .. } => 1.0,
            Binning::Box { extent, .. } => extent,
        }
    }

    fn coords(&self, f: &Foliation, p: &AmbientPoint) -> Option<(f64, f64)> {
        match *self {
            Binning::Moment { axes, .. } => {
                let z = f.homogeneous_coords(p);
                let n2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
                Some((z[axes[0]].norm_sqr() / n2, z[axes[1]].norm_sqr() / n2))
            }
            Binning::Box { chart, axes, .. } => {
                let q = f.to_chart(p, chart).ok()?;
                Some((q.coords[axes[0]].norm(), q.coords[axes[1]].norm()))
            }
        }
    }

    /// Cell index of `p`; points off the grid or outside the chart go to the overflow cell.
    pub fn index(&self, f: &Foliation, p: &AmbientPoint) -> usize {
        let n = self.bins();
        let overflow = n * n;
        let Some((a, b)) = self.coords(f, p) else {
            return overflow;
        };
        let top = self.upper();
        let cell = |v: f64| {
            if !(0.0..=top).contains(&v) {
                None
            } else {
                Some(((v / top * n as f64) as usize).min(n - 1))
            }
        };
        match (cell(a), cell(b)) {
            (Some(i), Some(j)) => i * n + j,
            _ => overflow,
        }
    }

    /// Center coordinates of grid cell `k`.
    pub fn center(&self, k: usize) -> (f64, f64) {
        let n = self.bins();
        let w = self.upper() / n as f64;
        ((k / n) as f64 * w + w / 2.0, (k % n) as f64 * w + w / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationHistogram {
    pub binning: Binning,
    pub weights: Vec<f64>,
    pub total_time: f64,
    pub start: Option<AmbientPoint>,
    /// Paths that stopped before the horizon on a sampler error.
    pub terminated: usize,
}

impl OccupationHistogram {
    pub fn new(binning: Binning) -> Self {
        OccupationHistogram { binning, weights: vec![0.0; binning.len()], total_time: 0.0, start: None, terminated: 0 }
    }

    pub fn add(&mut self, f: &Foliation, p: &AmbientPoint, dt: f64) {
        self.weights[self.binning.index(f, p)] += dt;
        self.total_time += dt;
    }

    pub fn merge(&mut self, other: &OccupationHistogram) -> Result<()> {
        if self.binning != other.binning {
            return Err(Error::BinningMismatch);
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.total_time += other.total_time;
        self.terminated += other.terminated;
        if self.start != other.start {
            self.start = None;
        }
        Ok(())
    }

    pub fn masses(&self) -> Vec<f64> {
        if self.total_time == 0.0 {
            return vec![0.0; self.weights.len()];
        }
        self.weights.iter().map(|w| w / self.total_time).collect()
    }

    /// Columns `a,b,mass`; the overflow cell is written with center `nan,nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "a,b,mass")?;
        let masses = self.masses();
        let grid = self.binning.bins() * self.binning.bins();
        for (k, m) in masses.iter().enumerate() {
            if k == grid {
                writeln!(w, "nan,nan,{m:e}")?;
            } else {
                let (a, b) = self.binning.center(k);
                writeln!(w, "{a},{b},{m:e}")?;
            }
        }
        Ok(())
    }
}

/// Time-weighted occupation: every sample but the last carries weight `h`.
pub fn occupation(f: &Foliation, path: &LeafPath, binning: &Binning) -> OccupationHistogram {
    let mut hist = OccupationHistogram::new(*binning);
    hist.start = Some(path.start);
    let n = path.samples.len().saturating_sub(1);
    for s in &path.samples[..n] {
        hist.add(f, &s.point, path.h);
    }
    hist
}

/// Occupation of a path sampled on the fly, without storing it. A sampler error
/// ends the path; the time up to it is kept.
pub fn occupation_stream(f: &Foliation, p: &AmbientPoint, cfg: &SamplerConfig, stream: u64, binning: &Binning) -> Result<OccupationHistogram> {
    let mut walker = Walker::new(f, p, cfg, stream)?;
    let mut hist = OccupationHistogram::new(*binning);
    hist.start = Some(*p);
    for _ in 0..cfg.steps() {
        let at = *walker.point();
        if walker.advance().is_err() {
            hist.terminated = 1;
            break;
        }
        hist.add(f, &at, cfg.h);
    }
    Ok(hist)
}

/// Half the l1 distance between the masses of two histograms.
pub fn tv_distance(a: &OccupationHistogram, b: &OccupationHistogram) -> Result<f64> {
    if a.binning != b.binning {
        return Err(Error::BinningMismatch);
    }
    Ok(total_variation(&a.weights, &b.weights))
}

/// Fraction of samples whose distance to the invariant plane is at most `eps`.
pub fn near_plane_fraction(f: &Foliation, path: &LeafPath, eps: f64) -> f64 {
    if path.samples.is_empty() {
        return 0.0;
    }
    let near = path.samples.iter().filter(|s| f.plane_offset(&s.point) <= eps).count();
    near as f64 / path.samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearPlane {
    pub fraction: f64,
    /// Time at which a sampler error ended the path.
    pub terminated_at: Option<f64>,
}

/// Streaming version of [`near_plane_fraction`] over a path of `cfg.steps()` steps.
/// A sampler error ends the path; the fraction covers the samples up to it.
pub fn near_plane_fraction_stream(f: &Foliation, p: &AmbientPoint, cfg: &SamplerConfig, stream: u64, eps: f64) -> Result<NearPlane> {
    let mut walker = Walker::new(f, p, cfg, stream)?;
    let mut near = usize::from(f.plane_offset(p) <= eps);
    let mut samples = 1;
    let mut terminated_at = None;
    for _ in 0..cfg.steps() {
        if walker.advance().is_err() {
            terminated_at = Some(walker.time());
            break;
        }
        near += usize::from(f.plane_offset(walker.point()) <= eps);
        samples += 1;
    }
    Ok(NearPlane { fraction: near as f64 / samples as f64, terminated_at })
}

/// `p` moved along the last chart coordinate so that its plane offset is `offset`.
pub fn off_plane_start(f: &Foliation, p: &AmbientPoint, offset: f64) -> Result<AmbientPoint> {
    if f.dim() != 3 || !f.has_invariant_plane() {
        return Err(Error::Config("off-plane starts need a threefold with an invariant plane".into()));
    }
    if f.kind() == AmbientKind::Projective && p.chart == 3 {
        return Err(Error::Config("the invariant plane is at infinity in chart 3".into()));
    }
    let mut q = *p;
    q.coords[2] = Complex64::new(1.0, 0.0);
    // the offset is proportional to the modulus of the last coordinate in charts 0..=2
    q.coords[2] = Complex64::new(offset / f.plane_offset(&q), 0.0);
    Ok(q)
}

/// How the second ensemble of a comparison draws its noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// Same streams as the first ensemble.
    Matched,
    /// Streams `n..2n`.
    Independent,
}

/// Ensemble-averaged occupation over streams `first..first + n`.
pub fn ensemble_occupation(f: &Foliation, p: &AmbientPoint, cfg: &SamplerConfig, first: u64, n: usize, binning: &Binning) -> Result<OccupationHistogram> {
    let parts = (0..n as u64)
        .into_par_iter()
        .map(|i| occupation_stream(f, p, cfg, first + i, binning))
        .collect::<Result<Vec<_>>>()?;
    let mut total = OccupationHistogram::new(*binning);
    for h in &parts {
        total.merge(h)?;
    }
    total.start = Some(*p);
    Ok(total)
}

/// TV between the ensemble occupations started at `p` and at `q`.
pub fn similarity_check(f: &Foliation, p: &AmbientPoint, q: &AmbientPoint, cfg: &SamplerConfig, paths: usize, binning: &Binning, seeding: Seeding) -> Result<f64> {
    let a = ensemble_occupation(f, p, cfg, 0, paths, binning)?;
    let first = match seeding {
        Seeding::Matched => 0,
        Seeding::Independent => paths as u64,
    };
    let b = ensemble_occupation(f, q, cfg, first, paths, binning)?;
    tv_distance(&a, &b)
}

/// One-step transition comparison: `samples` steps of length `delta`, binned on a
/// grid of developed displacements `speed(p) * flow time` over `[-extent, extent]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionConfig {
    pub delta: f64,
    pub samples: usize,
    pub extent: f64,
    pub bins: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig { delta: 0.01, samples: 100_000, extent: 0.6, bins: 20 }
    }
}

impl TransitionConfig {
    fn index(&self, d: Complex64) -> usize {
        let n = self.bins;
        let cell = |v: f64| {
            let s = (v + self.extent) / (2.0 * self.extent);
            if (0.0..1.0).contains(&s) {
                Some((s * n as f64) as usize)
            } else {
                None
            }
        };
        match (cell(d.re), cell(d.im)) {
            (Some(i), Some(j)) => i * n + j,
            _ => n * n,
        }
    }
}

/// TV between histograms of one-step displacements from `p` and of the
/// displacements from `q` projected to the leaf of `p`, on matched streams.
pub fn transition_similarity(
    f: &Foliation,
    p: &AmbientPoint,
    q: &AmbientPoint,
    tc: &TransitionConfig,
    cfg: &SamplerConfig,
    ift: &IftConfig,
) -> Result<f64> {
    let step = SamplerConfig { h: tc.delta, horizon: tc.delta, ..*cfg };
    let sp = speed(f, p)?;
    let cells = tc.bins * tc.bins + 1;
    let pairs = (0..tc.samples as u64)
        .into_par_iter()
        .map(|i| {
            let a = sample_path(f, p, &step, i)?;
            let b = sample_path(f, q, &step, i)?;
            for path in [&a, &b] {
                if let Some((_, e)) = &path.terminated {
                    return Err(e.clone());
                }
            }
            let pr = local_projection(f, p, q, b.samples[0].dzeta, ift)?;
            Ok((tc.index(a.samples[0].dzeta * sp), tc.index(pr.time * sp)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ha = vec![0.0; cells];
    let mut hb = vec![0.0; cells];
    for (i, j) in pairs {
        ha[i] += 1.0;
        hb[j] += 1.0;
    }
    Ok(total_variation(&ha, &hb))
}

/// Means of `values` over the last two dyadic windows `[n/4, n/2)` and `[n/2, n)`.
pub fn dyadic_window_means(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 4 {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&values[n / 4..n / 2]), mean(&values[n / 2..])))
}
