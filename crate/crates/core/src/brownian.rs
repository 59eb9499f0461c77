//! Leafwise Brownian motion for the leaf metric, and reference samplers on model disks.
//!
//! In a flow-box chart the metric is conformal with factor `sigma(p) = w(p) / l(p)`,
//! so Brownian motion for `Delta_g` is `dzeta = sqrt(2) dW / sigma` with no drift.
//! Each recorded step of length `h` is split into substeps sized from `l` at the
//! substep start; the chart is re-based at the end of every recorded step.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliation::{AmbientPoint, CMat, Foliation, ZERO};
use crate::integrate::{flow, flow_jacobian};
use crate::metric::{ell_at, ell_unchecked, DEFAULT_FLOWBOX_C};

/// Convention for the generator of the diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `du/dt = Delta_g u`.
    #[default]
    Laplacian,
    /// `du/dt = Delta_g u / 2`.
    HalfLaplacian,
}

impl Generator {
    /// Variance of each real coordinate of the developed increment over time `t`.
    pub fn coordinate_variance(self, t: f64) -> f64 {
        match self {
            Generator::Laplacian => 2.0 * t,
            Generator::HalfLaplacian => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub h: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Split recorded steps into substeps sized by `l` at the substep start.
    pub substep: bool,
    /// Largest RMS substep, as a fraction of the flow-box radius `c / l`.
    pub substep_fraction: f64,
    pub flowbox_c: f64,
    pub generator: Generator,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            h: 0.01,
            horizon: 1.0,
            seed: 0,
            substep: true,
            substep_fraction: 0.2,
            flowbox_c: DEFAULT_FLOWBOX_C,
            generator: Generator::Laplacian,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::Config(format!("step h must be positive, got {}", self.h)));
        }
        if !(self.horizon >= self.h) {
            return Err(Error::Config(format!("horizon {} is shorter than h = {}", self.horizon, self.h)));
        }
        if !(self.substep_fraction > 0.0 && self.flowbox_c > 0.0) {
            return Err(Error::Config("substep fraction and flow-box constant must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.h).round() as usize
    }

    /// Longest substep allowed where `l = ell`.
    pub fn max_substep_time(&self, ell: f64) -> f64 {
        if !self.substep {
            return f64::INFINITY;
        }
        let g = self.substep_fraction * self.flowbox_c / ell;
        // RMS developed increment over time t is sqrt(2 * coordinate_variance(t))
        g * g / (2.0 * self.generator.coordinate_variance(1.0))
    }
}

/// Counter-based RNG stream for path `stream` under `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// One Gaussian flow increment at `p` over diffusion time `h`.
pub fn sample_increment<R: Rng + ?Sized>(
    f: &Foliation,
    p: &AmbientPoint,
    h: f64,
    generator: Generator,
    rng: &mut R,
) -> Result<Complex64> {
    if h == 0.0 {
        return Ok(ZERO);
    }
    let speed = f.chart_weight(p) / ell_at(f, p)?;
    Ok(gaussian_pair(rng) * (generator.coordinate_variance(h).sqrt() / speed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafSample {
    pub t: f64,
    pub point: AmbientPoint,
    pub ell: f64,
    /// Total flow increment taken from this sample (zero for the last one).
    pub dzeta: Complex64,
    /// Substep flow increments; they sum to `dzeta` and are applied in order from `point`.
    pub increments: Vec<Complex64>,
    /// Developed increment: the sum of `sigma * dzeta` over substeps.
    pub developed: Complex64,
}

/// A sampled leaf path. `terminated` holds the time and cause of an early stop.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPath {
    pub start: AmbientPoint,
    pub samples: Vec<LeafSample>,
    pub seed: u64,
    pub stream: u64,
    pub h: f64,
    pub terminated: Option<(f64, Error)>,
}

/// One recorded step produced by [`Walker::advance`].
#[derive(Debug, Clone)]
pub struct Step {
    pub from: AmbientPoint,
    /// End point of the last substep, still in the chart of `from`.
    pub end: AmbientPoint,
    /// `end` re-based to its preferred chart.
    pub to: AmbientPoint,
    pub dzeta: Complex64,
    pub increments: Vec<Complex64>,
    pub developed: Complex64,
}

/// Streaming sampler, for ensembles too long to store.
pub struct Walker<'a> {
    f: &'a Foliation,
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
    point: AmbientPoint,
    index: usize,
}

impl<'a> Walker<'a> {
    pub fn new(f: &'a Foliation, p: &AmbientPoint, cfg: &SamplerConfig, stream: u64) -> Result<Self> {
        cfg.validate()?;
        ell_at(f, p)?;
        if f.eval(p)?.norm() == 0.0 {
            return Err(Error::AtSingularity);
        }
        Ok(Walker { f, cfg: *cfg, rng: path_rng(cfg.seed, stream), point: f.rebase(p), index: 0 })
    }

    pub fn point(&self) -> &AmbientPoint {
        &self.point
    }

    pub fn time(&self) -> f64 {
        self.index as f64 * self.cfg.h
    }

    pub fn advance(&mut self) -> Result<Step> {
        Ok(self.advance_inner(false)?.0)
    }

    /// Like [`Walker::advance`], also returning `d(phi)` from `step.from` to `step.end`.
    pub fn advance_tracked(&mut self) -> Result<(Step, CMat)> {
        let (step, d) = self.advance_inner(true)?;
        Ok((step, d.unwrap_or_else(CMat::identity)))
    }

    fn advance_inner(&mut self, track: bool) -> Result<(Step, Option<CMat>)> {
        let f = self.f;
        let h = self.cfg.h;
        let rtol = f.tolerances().flow_rtol;
        let mut q = self.point;
        let mut remaining = h;
        let mut increments = Vec::new();
        let mut dzeta = ZERO;
        let mut developed = ZERO;
        let mut d = track.then(CMat::identity);
        while remaining > 0.0 {
            let ell = ell_at(f, &q)?;
            let speed = f.chart_weight(&q) / ell;
            let mut tau = remaining.min(self.cfg.max_substep_time(ell));
            if remaining - tau < 1e-9 * h {
                tau = remaining;
            }
            let xi = gaussian_pair(&mut self.rng) * self.cfg.generator.coordinate_variance(tau).sqrt();
            let dz = xi / speed;
            if let Some(d) = d.as_mut() {
                let (next, j) = flow_jacobian(f, &q, dz)?;
                *d = j * *d;
                q = next;
            } else {
                q = flow(f, &q, dz, rtol)?;
            }
            increments.push(dz);
            dzeta += dz;
            developed += xi;
            remaining -= tau;
        }
        let to = f.rebase(&q);
        let step = Step { from: self.point, end: q, to, dzeta, increments, developed };
        self.point = to;
        self.index += 1;
        Ok((step, d))
    }
}

/// Samples one path from `p` on stream `stream`. Integration failures stop the path early.
pub fn sample_path(f: &Foliation, p: &AmbientPoint, cfg: &SamplerConfig, stream: u64) -> Result<LeafPath> {
    let mut walker = Walker::new(f, p, cfg, stream)?;
    let n = cfg.steps();
    let mut samples = Vec::with_capacity(n + 1);
    let mut terminated = None;
    for i in 0..n {
        let t = i as f64 * cfg.h;
        let point = *walker.point();
        let ell = ell_at(f, &point)?;
        match walker.advance() {
            Ok(step) => samples.push(LeafSample {
                t,
                point,
                ell,
                dzeta: step.dzeta,
                increments: step.increments,
                developed: step.developed,
            }),
            Err(e) => {
                terminated = Some((t, e));
                break;
            }
        }
    }
    let point = *walker.point();
    let last = LeafSample {
        t: walker.time(),
        point,
        ell: ell_at(f, &point).unwrap_or(f64::INFINITY),
        dzeta: ZERO,
        increments: Vec::new(),
        developed: ZERO,
    };
    samples.push(last);
    Ok(LeafPath { start: f.rebase(p), samples, seed: cfg.seed, stream, h: cfg.h, terminated })
}

/// Paths on streams `0..n`, started cyclically from `starts`, in stream order.
pub fn sample_ensemble(f: &Foliation, starts: &[AmbientPoint], cfg: &SamplerConfig, n: usize) -> Result<Vec<LeafPath>> {
    if starts.is_empty() {
        return Err(Error::InsufficientPaths { needed: 1, got: 0 });
    }
    (0..n)
        .into_par_iter()
        .map(|i| sample_path(f, &starts[i % starts.len()], cfg, i as u64))
        .collect()
}

impl LeafPath {
    /// Deterministic path taking one given increment per recorded step of length `h`.
    pub fn from_increments(f: &Foliation, p: &AmbientPoint, h: f64, increments: &[Complex64]) -> Result<LeafPath> {
        let rtol = f.tolerances().flow_rtol;
        let mut point = f.rebase(p);
        let mut samples = Vec::with_capacity(increments.len() + 1);
        for (i, dz) in increments.iter().enumerate() {
            let ell = ell_at(f, &point)?;
            let speed = f.chart_weight(&point) / ell;
            samples.push(LeafSample {
                t: i as f64 * h,
                point,
                ell,
                dzeta: *dz,
                increments: vec![*dz],
                developed: dz * speed,
            });
            point = f.rebase(&flow(f, &point, *dz, rtol)?);
        }
        samples.push(LeafSample {
            t: increments.len() as f64 * h,
            point,
            ell: ell_at(f, &point)?,
            dzeta: ZERO,
            increments: Vec::new(),
            developed: ZERO,
        });
        Ok(LeafPath { start: f.rebase(p), samples, seed: 0, stream: 0, h, terminated: None })
    }

    pub fn horizon(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.h).round();
        if k < 0.0 || (k * self.h - t).abs() > 1e-9 * self.h.max(t.abs()) || k as usize >= self.samples.len() {
            return Err(Error::OutOfRange(t));
        }
        Ok(k as usize)
    }

    /// The suffix from sample time `t`, re-indexed to start at time 0.
    pub fn shift(&self, t: f64) -> Result<LeafPath> {
        let k = self.index_of(t)?;
        let samples = self.samples[k..]
            .iter()
            .enumerate()
            .map(|(i, s)| LeafSample { t: i as f64 * self.h, ..s.clone() })
            .collect::<Vec<_>>();
        Ok(LeafPath {
            start: samples[0].point,
            samples,
            seed: self.seed,
            stream: self.stream,
            h: self.h,
            terminated: self.terminated.clone(),
        })
    }

    /// Largest developed displacement reached within `[t0, t0 + delta]`.
    pub fn window_displacement(&self, t0: f64, delta: f64) -> f64 {
        let Ok(k0) = self.index_of(t0) else { return 0.0 };
        let steps = ((delta / self.h) + 1e-9).floor() as usize;
        let end = (k0 + steps).min(self.samples.len() - 1);
        let mut acc = ZERO;
        let mut best = 0.0f64;
        for s in &self.samples[k0..end] {
            acc += s.developed;
            best = best.max(acc.norm());
        }
        best
    }

    /// CSV rows `t,chart,re/im of each chart coordinate,l`.
    pub fn write_csv<W: Write>(&self, dim: usize, mut w: W) -> io::Result<()> {
        write!(w, "t,chart")?;
        for j in 0..dim {
            write!(w, ",z{j}_re,z{j}_im")?;
        }
        writeln!(w, ",ell")?;
        for s in &self.samples {
            write!(w, "{},{}", s.t, s.point.chart)?;
            for j in 0..dim {
                write!(w, ",{},{}", s.point.coords[j].re, s.point.coords[j].im)?;
            }
            writeln!(w, ",{}", s.ell)?;
        }
        Ok(())
    }
}

/// Model domains for the reference sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefDomain {
    /// The plane with the Euclidean metric.
    Flat,
    /// The unit disk with density `4 / (1 - |z|^2)^2`.
    UnitDisk,
    /// The punctured unit disk with density `1 / (|z| log|z|)^2`.
    PuncturedDisk,
}

impl RefDomain {
    fn contains(self, z: Complex64) -> bool {
        match self {
            RefDomain::Flat => z.is_finite(),
            RefDomain::UnitDisk => z.norm() < 1.0,
            RefDomain::PuncturedDisk => {
                let r = z.norm();
                r > 0.0 && r < 1.0
            }
        }
    }

    /// Square root of the metric density at `z`.
    pub fn conformal_factor(self, z: Complex64) -> f64 {
        match self {
            RefDomain::Flat => 1.0,
            RefDomain::UnitDisk => 2.0 / (1.0 - z.norm_sqr()),
            RefDomain::PuncturedDisk => {
                let r = z.norm();
                1.0 / (r * r.ln().abs())
            }
        }
    }

    fn scale(self, z: Complex64) -> f64 {
        match self {
            RefDomain::PuncturedDisk => ell_unchecked(z.norm()),
            _ => 1.0,
        }
    }
}

/// A reference path; `lift` holds a continuous branch of `log z` on the punctured disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RefPath {
    pub domain: RefDomain,
    pub h: f64,
    pub points: Vec<Complex64>,
    lift: Vec<Complex64>,
}

/// Hyperbolic distance in the unit disk with density `4 / (1 - |z|^2)^2`.
pub fn disk_distance(z: Complex64, w: Complex64) -> f64 {
    let num = (z - w).norm();
    let den = (Complex64::new(1.0, 0.0) - w.conj() * z).norm();
    2.0 * (num / den).min(1.0 - f64::EPSILON).atanh()
}

impl RefPath {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points.len()).map(move |i| i as f64 * self.h)
    }

    /// Distance between samples `i` and `j` in the universal cover of the domain.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.points[i], self.points[j]);
        match self.domain {
            RefDomain::Flat => (a - b).norm(),
            RefDomain::UnitDisk => disk_distance(a, b),
            RefDomain::PuncturedDisk => {
                // tau = -i log z lies in the upper half-plane with metric |dtau| / Im tau
                let ta = self.lift[i] * Complex64::new(0.0, -1.0);
                let tb = self.lift[j] * Complex64::new(0.0, -1.0);
                let arg = 1.0 + (ta - tb).norm_sqr() / (2.0 * ta.im * tb.im);
                arg.max(1.0).acosh()
            }
        }
    }

    /// Largest distance from the window start reached within `[t0, t0 + delta]`.
    pub fn window_displacement(&self, t0: f64, delta: f64) -> f64 {
        let k0 = (t0 / self.h).round() as usize;
        let end = (k0 + ((delta / self.h) + 1e-9).floor() as usize).min(self.points.len() - 1);
        (k0..=end).map(|j| self.distance(k0, j)).fold(0.0, f64::max)
    }
}

/// Reference sampler for `cfg.steps()` steps.
pub fn reference_hyperbolic_sampler(z0: Complex64, domain: RefDomain, cfg: &SamplerConfig, stream: u64) -> Result<RefPath> {
    cfg.validate()?;
    reference_path(z0, domain, cfg, cfg.steps(), stream)
}

/// Reference sampler for an explicit number of recorded steps.
pub fn reference_path(z0: Complex64, domain: RefDomain, cfg: &SamplerConfig, steps: usize, stream: u64) -> Result<RefPath> {
    if !domain.contains(z0) {
        return Err(Error::DomainExit);
    }
    let mut rng = path_rng(cfg.seed, stream);
    let mut z = z0;
    let mut log_z = if domain == RefDomain::PuncturedDisk { z0.ln() } else { ZERO };
    let mut points = Vec::with_capacity(steps + 1);
    let mut lift = Vec::new();
    points.push(z);
    if domain == RefDomain::PuncturedDisk {
        lift.push(log_z);
    }
    for _ in 0..steps {
        let mut remaining = cfg.h;
        while remaining > 0.0 {
            let mut tau = remaining.min(cfg.max_substep_time(domain.scale(z)));
            if remaining - tau < 1e-9 * cfg.h {
                tau = remaining;
            }
            let xi = gaussian_pair(&mut rng) * cfg.generator.coordinate_variance(tau).sqrt();
            let next = z + xi / domain.conformal_factor(z);
            if !domain.contains(next) {
                return Err(Error::DomainExit);
            }
            if domain == RefDomain::PuncturedDisk {
                log_z += (next / z).ln();
            }
            z = next;
            remaining -= tau;
        }
        points.push(z);
        if domain == RefDomain::PuncturedDisk {
            lift.push(log_z);
        }
    }
    Ok(RefPath { domain, h: cfg.h, points, lift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliation::ONE;
    use crate::stats::{chi_square_critical, chi_square_stat, ks_critical, ks_two_sample, mean, variance};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model() -> Foliation {
        Foliation::linear(ONE, c(0.0, -1.0), None).unwrap()
    }

    #[test]
    fn increment_moments() {
        let f = model();
        let p = AmbientPoint::new(0, &[c(0.02, 0.01), ZERO]);
        let ell = ell_at(&f, &p).unwrap();
        let h = 0.01;
        let n = 100_000;
        let mut rng = path_rng(7, 0);
        let draws: Vec<Complex64> =
            (0..n).map(|_| sample_increment(&f, &p, h, Generator::Laplacian, &mut rng).unwrap()).collect();
        let m: Complex64 = draws.iter().sum::<Complex64>() / n as f64;
        assert!(m.norm() <= 3.0 * ell * (2.0 * h).sqrt() / (n as f64).sqrt());
        let re: Vec<f64> = draws.iter().map(|z| z.re).collect();
        let im: Vec<f64> = draws.iter().map(|z| z.im).collect();
        let target = 2.0 * h * ell * ell;
        assert!((variance(&re) / target - 1.0).abs() < 0.02);
        assert!((variance(&im) / target - 1.0).abs() < 0.02);
        assert_eq!(sample_increment(&f, &p, 0.0, Generator::Laplacian, &mut rng).unwrap(), ZERO);
    }

    #[test]
    fn path_is_reproducible_and_stays_on_invariant_leaf() {
        let f = model();
        let p = AmbientPoint::new(0, &[c(0.05, 0.0), ZERO]);
        let cfg = SamplerConfig { h: 0.01, horizon: 2.0, seed: 11, ..Default::default() };
        let a = sample_path(&f, &p, &cfg, 3).unwrap();
        let b = sample_path(&f, &p, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.terminated.is_none());
        assert_eq!(a.samples.len(), 201);
        assert!(a.samples.iter().all(|s| s.point.coords[1] == ZERO));
        let other = sample_path(&f, &p, &cfg, 4).unwrap();
        assert_ne!(a.samples[1].point, other.samples[1].point);
    }

    #[test]
    fn consecutive_samples_are_joined_by_recorded_increments() {
        let f = model();
        let p = AmbientPoint::new(0, &[c(0.1, 0.05), c(0.02, 0.0)]);
        let cfg = SamplerConfig { h: 0.05, horizon: 1.0, seed: 2, ..Default::default() };
        let path = sample_path(&f, &p, &cfg, 0).unwrap();
        for w in path.samples.windows(2) {
            let mut q = w[0].point;
            for dz in &w[0].increments {
                q = flow(&f, &q, *dz, 1e-12).unwrap();
            }
            assert!((q.coords - w[1].point.coords).norm() < 1e-12);
            let total: Complex64 = w[0].increments.iter().sum();
            assert!((total - w[0].dzeta).norm() < 1e-14);
        }
    }

    #[test]
    fn shift_identities() {
        let f = model();
        let p = AmbientPoint::new(0, &[c(0.05, 0.0), ZERO]);
        let cfg = SamplerConfig { h: 0.1, horizon: 1.0, seed: 1, ..Default::default() };
        let path = sample_path(&f, &p, &cfg, 0).unwrap();
        assert_eq!(path.shift(0.0).unwrap(), path);
        assert_eq!(path.shift(1.0).unwrap().samples.len(), 1);
        assert_eq!(path.shift(0.3).unwrap().shift(0.4).unwrap(), path.shift(0.7).unwrap());
        assert!(matches!(path.shift(0.35), Err(Error::OutOfRange(_))));
        assert!(matches!(path.shift(1.5), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn window_displacement_monotone() {
        let f = model();
        let p = AmbientPoint::new(0, &[c(0.05, 0.0), ZERO]);
        let cfg = SamplerConfig { h: 0.01, horizon: 1.0, seed: 5, ..Default::default() };
        let path = sample_path(&f, &p, &cfg, 0).unwrap();
        let mut prev = 0.0;
        for k in 0..=50 {
            let d = path.window_displacement(0.2, 0.01 * k as f64);
            assert!(d >= prev);
            prev = d;
        }
        let mut constant = path.clone();
        for s in &mut constant.samples {
            s.developed = ZERO;
        }
        assert_eq!(constant.window_displacement(0.0, 1.0), 0.0);
    }

    #[test]
    fn reference_zero_steps_and_domain() {
        let cfg = SamplerConfig::default();
        let z0 = c(0.3, -0.2);
        let path = reference_path(z0, RefDomain::UnitDisk, &cfg, 0, 0).unwrap();
        assert_eq!(path.points, vec![z0]);
        assert!(matches!(reference_path(c(1.5, 0.0), RefDomain::UnitDisk, &cfg, 1, 0), Err(Error::DomainExit)));
        assert!(matches!(reference_path(ZERO, RefDomain::PuncturedDisk, &cfg, 1, 0), Err(Error::DomainExit)));
    }

    #[test]
    fn flat_second_moment() {
        let h = 0.01;
        let cfg = SamplerConfig { h, horizon: h, seed: 9, ..Default::default() };
        let n = 100_000;
        let m2: Vec<f64> = (0..n)
            .map(|i| {
                let p = reference_path(ZERO, RefDomain::Flat, &cfg, 1, i).unwrap();
                p.points[1].norm_sqr()
            })
            .collect();
        assert!((mean(&m2) / (4.0 * h) - 1.0).abs() < 0.02);
    }

    #[test]
    fn disk_angles_are_uniform() {
        let cfg = SamplerConfig { h: 0.01, horizon: 0.5, seed: 4, ..Default::default() };
        let bins = 8;
        let n = 4000;
        let mut counts = vec![0.0; bins];
        for i in 0..n {
            let p = reference_hyperbolic_sampler(ZERO, RefDomain::UnitDisk, &cfg, i).unwrap();
            let a = p.points.last().unwrap().arg() + PI;
            counts[((a / (2.0 * PI) * bins as f64) as usize).min(bins - 1)] += 1.0;
        }
        let expected = vec![n as f64 / bins as f64; bins];
        assert!(chi_square_stat(&counts, &expected) < chi_square_critical(bins - 1, 0.01));
    }

    #[test]
    fn punctured_lift_distance_matches_radial_formula() {
        // along a radial segment the distance is |log log(1/r1) - log log(1/r2)|
        let path = RefPath {
            domain: RefDomain::PuncturedDisk,
            h: 1.0,
            points: vec![c(0.01, 0.0), c(0.2, 0.0)],
            lift: vec![c(0.01f64.ln(), 0.0), c(0.2f64.ln(), 0.0)],
        };
        let exact = ((1.0 / 0.01f64).ln().ln() - (1.0 / 0.2f64).ln().ln()).abs();
        assert!((path.distance(0, 1) - exact).abs() < 1e-12);
    }

    #[test]
    fn halving_h_keeps_terminal_radius_distribution() {
        let n = 2000;
        let radii = |h: f64, seed: u64| -> Vec<f64> {
            let cfg = SamplerConfig { h, horizon: 0.4, seed, ..Default::default() };
            (0..n)
                .map(|i| reference_hyperbolic_sampler(ZERO, RefDomain::UnitDisk, &cfg, i).unwrap().points.last().unwrap().norm())
                .collect()
        };
        let coarse = radii(0.02, 1);
        let fine = radii(0.01, 2);
        let noise = ks_two_sample(&radii(0.01, 3), &fine);
        let floor = ks_critical(n as usize, n as usize, 0.05).max(noise);
        assert!(ks_two_sample(&coarse, &fine) <= 2.0 * floor);
    }
}
