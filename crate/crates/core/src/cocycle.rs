//! Derivative cocycle, flat conormal sections and Lyapunov exponents along leaf paths.
//!
//! Bundle `N` is the normal bundle of the foliation inside the invariant plane (the
//! whole space for surfaces); bundle `L` is the normal bundle of the plane itself.
//! Quotient norms come from the Euclidean metric on affine charts and from the
//! Fubini-Study metric in projective space, so they do not jump at chart changes.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{LeafPath, SamplerConfig, Walker};
use crate::error::{Error, Result};
use crate::foliation::{AmbientKind, AmbientPoint, CMat, CVec, Foliation, ONE, ZERO};
use crate::integrate::flow_jacobian;
use crate::metric::{speed, MetricFrame, DEFAULT_FLOWBOX_C};
use crate::stats::{linear_fit, mean_ci, MeanCi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bundle {
    N,
    L,
}

const FRAME_TOL: f64 = 1e-14;

/// Gram matrix of the ambient Hermitian metric in the chart of `p`.
pub fn ambient_gram(f: &Foliation, p: &AmbientPoint) -> CMat {
    let n = f.dim();
    let mut g = CMat::identity();
    if f.kind() == AmbientKind::Projective {
        let s = 1.0 + (0..n).map(|i| p.coords[i].norm_sqr()).sum::<f64>();
        for i in 0..n {
            for j in 0..n {
                let diag = if i == j { s } else { 0.0 };
                g[(i, j)] = (Complex64::new(diag, 0.0) - p.coords[i] * p.coords[j].conj()) / (s * s);
            }
        }
    }
    g
}

fn plane(v: &CVec) -> CVec {
    CVec::new(v[0], v[1], ZERO)
}

fn plane_hermitian(g: &CMat, u: &CVec, v: &CVec) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += u[i].conj() * g[(i, j)] * v[j];
        }
    }
    acc
}

fn quotient_norm_n(f: &Foliation, p: &AmbientPoint, x: &CVec, w: &CVec) -> f64 {
    let g = ambient_gram(f, p);
    // Gram determinant of (x, w) = |det[x w]|^2 det G
    let det_g = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
    let det_xw = x[0] * w[1] - x[1] * w[0];
    det_g.sqrt() * det_xw.norm() / plane_hermitian(&g, x, x).re.sqrt()
}

fn quotient_norm_l(f: &Foliation, p: &AmbientPoint, w: &CVec) -> f64 {
    if f.kind() == AmbientKind::Affine {
        return w[2].norm();
    }
    let g = ambient_gram(f, p);
    let det_plane = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
    w[2].norm() * (g.determinant().re / det_plane).sqrt()
}

fn require_l(f: &Foliation) -> Result<()> {
    if f.dim() == 3 && f.has_invariant_plane() {
        Ok(())
    } else {
        Err(Error::HypothesisViolation("bundle L needs an invariant plane in a threefold".into()))
    }
}

fn leaf_direction(f: &Foliation, p: &AmbientPoint) -> Result<CVec> {
    let x = plane(&f.eval(p)?);
    if x.norm() < FRAME_TOL {
        return Err(Error::DegenerateFrame(x.norm()));
    }
    Ok(x)
}

/// A vector whose class spans the bundle fibre at `p`.
pub fn normal_representative(f: &Foliation, p: &AmbientPoint, bundle: Bundle) -> Result<CVec> {
    match bundle {
        Bundle::N => {
            let x = leaf_direction(f, p)?;
            Ok(CVec::new(x[1].conj(), -x[0].conj(), ZERO) / Complex64::from(x.norm()))
        }
        Bundle::L => {
            require_l(f)?;
            Ok(CVec::new(ZERO, ZERO, ONE))
        }
    }
}

/// Norm of the class of `w` in the bundle fibre at `p`.
pub fn quotient_norm(f: &Foliation, p: &AmbientPoint, w: &CVec, bundle: Bundle) -> Result<f64> {
    match bundle {
        Bundle::N => Ok(quotient_norm_n(f, p, &leaf_direction(f, p)?, &plane(w))),
        Bundle::L => {
            require_l(f)?;
            Ok(quotient_norm_l(f, p, w))
        }
    }
}

/// A covector annihilating the leaf (bundle `N`) or the plane (bundle `L`) at `p`.
pub fn canonical_section(f: &Foliation, p: &AmbientPoint, bundle: Bundle) -> Result<CVec> {
    match bundle {
        Bundle::N => {
            let x = leaf_direction(f, p)?;
            Ok(CVec::new(x[1], -x[0], ZERO))
        }
        Bundle::L => {
            require_l(f)?;
            Ok(CVec::new(ZERO, ZERO, ONE))
        }
    }
}

/// Log of the dual norm of the conormal covector `s` at `p`.
pub fn section_lognorm(f: &Foliation, p: &AmbientPoint, s: &CVec, bundle: Bundle) -> Result<f64> {
    let u = normal_representative(f, p, bundle)?;
    let pairing: Complex64 = (0..3).map(|i| s[i] * u[i]).sum();
    Ok(pairing.norm().ln() - quotient_norm(f, p, &u, bundle)?.ln())
}

/// Solutions `V(t)` of the variational equation along `path`, with `V(0) = I`.
///
/// `V(t)` maps tangent vectors in the chart of the start point to the chart of sample `t`.
pub fn transport_variational(f: &Foliation, path: &LeafPath) -> Result<Vec<CMat>> {
    let mut v = CMat::identity();
    let mut out = Vec::with_capacity(path.samples.len());
    out.push(v);
    for pair in path.samples.windows(2) {
        let mut q = pair[0].point;
        for dz in &pair[0].increments {
            let (next, j) = flow_jacobian(f, &q, *dz)?;
            v = j * v;
            q = next;
        }
        if q.chart != pair[1].point.chart {
            v = f.transition_jacobian(&q, pair[1].point.chart) * v;
        }
        out.push(v);
    }
    Ok(out)
}

/// Log of the norm of the map induced by `v` between the bundle fibres at `p0` and `pt`.
pub fn normal_derivative_lognorm(f: &Foliation, v: &CMat, p0: &AmbientPoint, pt: &AmbientPoint, bundle: Bundle) -> Result<f64> {
    let u = normal_representative(f, p0, bundle)?;
    let w = v * u;
    Ok((quotient_norm(f, pt, &w, bundle)? / quotient_norm(f, p0, &u, bundle)?).ln())
}

// J^T s restricted to the bundle's components.
fn masked_adjoint(j: &CMat, s: &CVec, bundle: Bundle) -> CVec {
    match bundle {
        Bundle::N => CVec::new(
            j[(0, 0)] * s[0] + j[(1, 0)] * s[1],
            j[(0, 1)] * s[0] + j[(1, 1)] * s[1],
            ZERO,
        ),
        Bundle::L => CVec::new(ZERO, ZERO, j[(2, 2)] * s[2]),
    }
}

/// Moves `(q, s)` along the flow for time `dz`, solving `ds/dzeta = -dX^T s`.
fn section_increment(f: &Foliation, q: &AmbientPoint, s: &CVec, dz: Complex64, bundle: Bundle) -> Result<(AmbientPoint, CVec)> {
    if let Some((sp, model)) = f.linear_model_at(q) {
        let rates = model.rates();
        let (mut out, mut s2) = (*q, *s);
        for i in 0..f.dim() {
            let e = (rates[i] * dz).exp();
            out.coords[i] = sp.location.coords[i] + (q.coords[i] - sp.location.coords[i]) * e;
            s2[i] = s[i] / e;
        }
        if (out.coords - sp.location.coords).norm() >= model.radius {
            return Err(Error::ChartExit { norm: out.coords.norm() });
        }
        return Ok((out, s2));
    }
    let n = ((40.0 * dz.norm() * f.jacobian(q)?.norm()).ceil() as usize).max(2);
    let hs = dz / n as f64;
    let rhs = |y: &CVec, s: &CVec| -> Result<(CVec, CVec)> {
        let p = AmbientPoint { chart: q.chart, coords: *y };
        Ok((f.eval(&p)? * hs, -masked_adjoint(&f.jacobian(&p)?, s, bundle) * hs))
    };
    let (mut y, mut s) = (q.coords, *s);
    let (half, two, sixth) = (Complex64::from(0.5), Complex64::from(2.0), Complex64::from(1.0 / 6.0));
    for _ in 0..n {
        let (k1, l1) = rhs(&y, &s)?;
        let (k2, l2) = rhs(&(y + k1 * half), &(s + l1 * half))?;
        let (k3, l3) = rhs(&(y + k2 * half), &(s + l2 * half))?;
        let (k4, l4) = rhs(&(y + k3), &(s + l3))?;
        y += (k1 + (k2 + k3) * two + k4) * sixth;
        s += (l1 + (l2 + l3) * two + l4) * sixth;
        if y.norm() > f.tolerances().chart_bound {
            return Err(Error::ChartExit { norm: y.norm() });
        }
    }
    Ok((AmbientPoint { chart: q.chart, coords: y }, s))
}

/// Flat section transported along a path, with the log of its norm at each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSeries {
    pub bundle: Bundle,
    pub h: f64,
    pub sections: Vec<CVec>,
    pub log_norms: Vec<f64>,
}

impl SectionSeries {
    /// `log(|s(t)| / |s(0)|)` at sample time `t`.
    pub fn h_t(&self, t: f64) -> Result<f64> {
        let k = (t / self.h).round();
        if k < 0.0 || k as usize >= self.log_norms.len() || (k * self.h - t).abs() > 1e-9 * self.h.max(t.abs()) {
            return Err(Error::OutOfRange(t));
        }
        Ok(self.log_norms[k as usize] - self.log_norms[0])
    }
}

/// Transports the conormal covector `s0` along `path` by the adjoint of the variational equation.
pub fn transport_flat_section(f: &Foliation, path: &LeafPath, s0: &CVec, bundle: Bundle) -> Result<SectionSeries> {
    let p0 = path.samples[0].point;
    match bundle {
        Bundle::N => {
            let x = leaf_direction(f, &p0)?;
            let sn = plane(s0).norm();
            if sn == 0.0 {
                return Err(Error::HypothesisViolation("zero section".into()));
            }
            if (s0[0] * x[0] + s0[1] * x[1]).norm() > 1e-8 * sn * x.norm() {
                return Err(Error::HypothesisViolation("section does not annihilate the leaf".into()));
            }
        }
        Bundle::L => {
            require_l(f)?;
            if s0[2] == ZERO {
                return Err(Error::HypothesisViolation("zero section".into()));
            }
        }
    }
    let mut s = match bundle {
        Bundle::N => plane(s0),
        Bundle::L => CVec::new(ZERO, ZERO, s0[2]),
    };
    let mut sections = vec![s];
    let mut log_norms = vec![section_lognorm(f, &p0, &s, bundle)?];
    for pair in path.samples.windows(2) {
        let mut q = pair[0].point;
        for dz in &pair[0].increments {
            (q, s) = section_increment(f, &q, &s, *dz, bundle)?;
        }
        let next = pair[1].point;
        if q.chart != next.chart {
            let j = f.transition_jacobian(&q, next.chart);
            s = match bundle {
                Bundle::N => {
                    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
                    CVec::new((j[(1, 1)] * s[0] - j[(1, 0)] * s[1]) / det, (j[(0, 0)] * s[1] - j[(0, 1)] * s[0]) / det, ZERO)
                }
                Bundle::L => CVec::new(ZERO, ZERO, s[2] / j[(2, 2)]),
            };
        }
        sections.push(s);
        log_norms.push(section_lognorm(f, &next, &s, bundle)?);
    }
    Ok(SectionSeries { bundle, h: path.h, sections, log_norms })
}

/// Derivative log-norms on the recorded grid of one sampled path.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub log_n: Vec<f64>,
    /// Present when the foliation has an invariant plane in a threefold.
    pub log_l: Option<Vec<f64>>,
    pub terminated: Option<(f64, Error)>,
}

impl LyapunovSeries {
    pub fn values(&self, bundle: Bundle) -> Option<&[f64]> {
        match bundle {
            Bundle::N => Some(&self.log_n),
            Bundle::L => self.log_l.as_deref(),
        }
    }
}

/// Samples a path and accumulates the derivative log-norms on both bundles.
///
/// The `N` representative is renormalized at every recorded step so that long
/// horizons neither overflow nor lose the transverse direction to cancellation.
pub fn lyapunov_series(f: &Foliation, p: &AmbientPoint, cfg: &SamplerConfig, stream: u64) -> Result<LyapunovSeries> {
    let track_l = f.dim() == 3 && f.has_invariant_plane();
    let mut walker = Walker::new(f, p, cfg, stream)?;
    let start = *walker.point();
    let mut w = normal_representative(f, &start, Bundle::N)?;
    let mut qn_w = quotient_norm(f, &start, &w, Bundle::N)?;
    let (mut ln, mut ll) = (0.0, 0.0);
    let mut out = LyapunovSeries {
        times: vec![0.0],
        log_n: vec![0.0],
        log_l: track_l.then(|| vec![0.0]),
        terminated: None,
    };
    let ez = CVec::new(ZERO, ZERO, ONE);
    for _ in 0..cfg.steps() {
        let t = walker.time();
        let step = walker.advance_tracked().and_then(|(step, d)| {
            let m = if step.end.chart != step.to.chart {
                f.transition_jacobian(&step.end, step.to.chart) * d
            } else {
                d
            };
            let x = leaf_direction(f, &step.to)?;
            Ok((step, m, x))
        });
        let (step, m, x) = match step {
            Ok(v) => v,
            Err(e) => {
                out.terminated = Some((t, e));
                break;
            }
        };
        let w1 = plane(&(m * w));
        let qn1 = quotient_norm_n(f, &step.to, &x, &w1);
        ln += (qn1 / qn_w).ln();
        let perp = w1 - x * (x.dotc(&w1) / x.norm_squared());
        let pn = perp.norm();
        w = perp / Complex64::from(pn);
        qn_w = qn1 / pn;
        out.times.push(walker.time());
        out.log_n.push(ln);
        if let Some(series) = out.log_l.as_mut() {
            ll += (quotient_norm_l(f, &step.to, &(m * ez)) / quotient_norm_l(f, &step.from, &ez)).ln();
            series.push(ll);
        }
    }
    Ok(out)
}

/// Lyapunov series on streams `0..n`, started cyclically from `starts`.
pub fn lyapunov_ensemble(f: &Foliation, starts: &[AmbientPoint], cfg: &SamplerConfig, n: usize) -> Result<Vec<LyapunovSeries>> {
    if starts.is_empty() {
        return Err(Error::InsufficientPaths { needed: 1, got: 0 });
    }
    (0..n)
        .into_par_iter()
        .map(|i| lyapunov_series(f, &starts[i % starts.len()], cfg, i as u64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub ci: MeanCi,
    pub slopes: Vec<f64>,
}

impl LyapunovEstimate {
    pub fn slope(&self) -> f64 {
        self.ci.mean
    }
}

pub const MIN_LYAPUNOV_PATHS: usize = 30;

/// Least-squares slope over the second half of one series.
pub fn second_half_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    let half = times.len() / 2;
    linear_fit(&times[half..], &values[half..]).map(|fit| fit.slope)
}

/// Ensemble mean of per-path slopes with a normal-approximation interval at `level`.
pub fn lyapunov_estimate(paths: &[(&[f64], &[f64])], level: f64) -> Result<LyapunovEstimate> {
    if paths.len() < MIN_LYAPUNOV_PATHS {
        return Err(Error::InsufficientPaths { needed: MIN_LYAPUNOV_PATHS, got: paths.len() });
    }
    let slopes: Vec<f64> = paths.iter().filter_map(|(t, v)| second_half_slope(t, v)).collect();
    if slopes.len() < MIN_LYAPUNOV_PATHS {
        return Err(Error::InsufficientPaths { needed: MIN_LYAPUNOV_PATHS, got: slopes.len() });
    }
    Ok(LyapunovEstimate { ci: mean_ci(&slopes, level), slopes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    Five,
    Nine,
}

/// Leafwise Laplacian `Delta_g log|s|` of a flat section at `p`, by finite differences
/// in the flow coordinate with spacing `step`.
pub fn curvature_theta(f: &Foliation, p: &AmbientPoint, bundle: Bundle, stencil: Stencil, step: f64) -> Result<f64> {
    let frame = MetricFrame::at(f, p, DEFAULT_FLOWBOX_C)?;
    if step * SQRT_2 > frame.flow_radius(f) {
        return Err(Error::StencilExit);
    }
    let value = |z: Complex64| -> Result<f64> {
        let (q, v) = flow_jacobian(f, p, z).map_err(|e| match e {
            Error::ChartExit { .. } => Error::StencilExit,
            e => e,
        })?;
        Ok(-normal_derivative_lognorm(f, &v, p, &q, bundle)?)
    };
    let h = step;
    let c = |re: f64, im: f64| Complex64::new(re * h, im * h);
    let center = value(ZERO)?;
    let edges = value(c(1.0, 0.0))? + value(c(-1.0, 0.0))? + value(c(0.0, 1.0))? + value(c(0.0, -1.0))?;
    let lap = match stencil {
        Stencil::Five => (edges - 4.0 * center) / (h * h),
        Stencil::Nine => {
            let corners = value(c(1.0, 1.0))? + value(c(1.0, -1.0))? + value(c(-1.0, 1.0))? + value(c(-1.0, -1.0))?;
            (4.0 * edges + corners - 20.0 * center) / (6.0 * h * h)
        }
    };
    let s = speed(f, p)?;
    Ok(lap / (s * s))
}
