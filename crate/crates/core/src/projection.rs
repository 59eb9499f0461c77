//! Orthogonal projections between nearby leaves, and point holonomy.
//!
//! For a regular point `p` of the invariant plane `P` the transverse section is
//! `S(p) = {p + t N(p) + u s(p) e_z}` with the anti-holomorphic normal field
//! `N(x, y) = k (conj(X_y), -conj(X_x))`. Inside the neighbourhood of a declared
//! linear model `k = 1` and `s(p) = |p - sing|`; elsewhere `N` is normalized at `p`
//! and `s = 1`. The function
//!
//! `F(t, u, zeta, xi) = det(N(phi^{zeta+xi} p), phi^zeta(q) - phi^{zeta+xi}(p)) / s^2`
//!
//! (determinant of the plane components) vanishes exactly when the displacement from
//! `phi^{zeta+xi}(p)` to `phi^zeta(q)` is orthogonal to the leaf of `p`. With this
//! column order `dF/dxi = -|X(p)|^2 / s^2` at the origin.
//!
//! On surfaces `P` is the whole chart and `u` must be zero.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::LeafPath;
use crate::error::{Error, Result};
use crate::foliation::{AmbientPoint, CVec, Foliation, ZERO};
use crate::integrate::flow;
use crate::metric::ell_at;
use crate::stats::linear_fit;

type C = Complex64;

fn det2(a: &CVec, b: &CVec) -> C {
    a[0] * b[1] - a[1] * b[0]
}

/// Settings of the implicit-function solve for `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IftConfig {
    /// Radius of the `(t, u, zeta)` polydisk.
    pub r0: f64,
    /// Radius in which the root `xi` must lie.
    pub r1: f64,
    /// Derivative bound `C` of the implicit function theorem.
    pub bound: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IftConfig {
    fn default() -> Self {
        IftConfig { r0: 0.5, r1: 0.9, bound: 10.0, tol: 1e-12, max_iter: 20 }
    }
}

impl IftConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |r: f64| r > 0.0 && r < 1.0;
        if !unit(self.r0) || !unit(self.r1) {
            return Err(Error::Config("ift radii must lie in (0, 1)".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.bound > 0.0) {
            return Err(Error::Config("ift tolerance, bound and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// Constants of the projection and holonomy routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub ift: IftConfig,
    /// `eps0` of the smallness condition `exp(C l(p) e^{C R}) dist(p, q) <= eps0`.
    pub eps0: f64,
    /// `C` of the smallness condition.
    pub smallness_c: f64,
    /// Continuation steps have leaf length at most `eta / l(p_n)`.
    pub eta: f64,
    /// Offsets accepted by the holonomy: `dist(p, q) <= rho dist(p, S)`.
    pub rho: f64,
    /// The transported point must stay within `M dist(p', S)` of the base path.
    pub section_m: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { ift: IftConfig::default(), eps0: 0.1, smallness_c: 0.1, eta: 0.25, rho: 0.1, section_m: 1.0 }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.ift.validate()?;
        for (name, v) in [("eps0", self.eps0), ("smallness_c", self.smallness_c), ("eta", self.eta), ("rho", self.rho), ("section_m", self.section_m)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Outcome of a Newton solve for `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiSolution {
    pub xi: C,
    /// `phi^{zeta+xi}(p)`.
    pub point: AmbientPoint,
    pub residual: f64,
    pub iterations: usize,
}

/// The transverse frame at a base point of `P`.
#[derive(Debug, Clone)]
pub struct ProjectionFrame<'a> {
    f: &'a Foliation,
    p: AmbientPoint,
    scale: f64,
    k: f64,
    rtol: f64,
}

impl<'a> ProjectionFrame<'a> {
    pub fn new(f: &'a Foliation, p: &AmbientPoint) -> Result<Self> {
        if f.dim() == 3 {
            if !f.has_invariant_plane() {
                return Err(Error::Config("projections on threefolds need an invariant plane".into()));
            }
            if f.plane_offset(p) > 1e-12 {
                return Err(Error::HypothesisViolation("base point is not on the invariant plane".into()));
            }
        }
        let x = f.eval(p)?;
        let xn = (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
        if xn == 0.0 {
            return Err(Error::DegenerateFrame(xn));
        }
        let (scale, k) = match f.linear_model_at(p) {
            Some((sp, _)) => ((p.coords - sp.location.coords).norm(), 1.0),
            None => (1.0, 1.0 / xn),
        };
        Ok(ProjectionFrame { f, p: *p, scale, k, rtol: f.tolerances().flow_rtol })
    }

    pub fn base(&self) -> &AmbientPoint {
        &self.p
    }

    /// `|p - sing|` in a linear-model neighbourhood, 1 elsewhere.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn normal_from(&self, x: &CVec) -> CVec {
        let k = C::from(self.k);
        CVec::new(x[1].conj() * k, -x[0].conj() * k, ZERO)
    }

    /// `N(w)`.
    pub fn normal(&self, w: &AmbientPoint) -> Result<CVec> {
        Ok(self.normal_from(&self.f.eval(w)?))
    }

    /// `q = p + t N(p) + u s(p) e_z`.
    pub fn section_point(&self, t: C, u: C) -> Result<AmbientPoint> {
        let mut q = self.p;
        q.coords += self.normal(&self.p)? * t;
        if self.f.dim() == 3 {
            q.coords[2] += u * self.scale;
        } else if u != ZERO {
            return Err(Error::Config("the offset u needs a threefold".into()));
        }
        Ok(q)
    }

    /// `(t, u)` of a point of `S(p)` given in the chart of `p`.
    pub fn section_coords(&self, q: &AmbientPoint) -> Result<(C, C)> {
        let n = self.normal(&self.p)?;
        let d = q.coords - self.p.coords;
        let t = (d[0] * n[0].conj() + d[1] * n[1].conj()) / (n[0].norm_sqr() + n[1].norm_sqr());
        let u = if self.f.dim() == 3 { d[2] / self.scale } else { ZERO };
        Ok((t, u))
    }

    fn flow(&self, p: &AmbientPoint, zeta: C) -> Result<AmbientPoint> {
        flow(self.f, p, zeta, self.rtol)
    }

    // (F, dF/dxi, dF/dxi-bar, phi^tau(p)) for a fixed target `y = phi^zeta(q)` and `tau = zeta + xi`.
    fn eval_at(&self, y: &AmbientPoint, tau: C) -> Result<(C, C, C, AmbientPoint)> {
        let w = self.flow(&self.p, tau)?;
        let x = self.f.eval(&w)?;
        let dx = self.f.jacobian(&w)? * x;
        let n = self.normal_from(&x);
        let dn = self.normal_from(&dx);
        let d = y.coords - w.coords;
        let s2 = C::from(self.scale * self.scale);
        Ok((det2(&n, &d) / s2, -det2(&n, &x) / s2, det2(&dn, &d) / s2, w))
    }

    fn target(&self, t: C, u: C, zeta: C) -> Result<AmbientPoint> {
        self.flow(&self.section_point(t, u)?, zeta)
    }

    pub fn f_eval(&self, t: C, u: C, zeta: C, xi: C) -> Result<C> {
        let y = self.target(t, u, zeta)?;
        Ok(self.eval_at(&y, zeta + xi)?.0)
    }

    /// `(dF/dxi, dF/dxi-bar)` from the closed-form expressions.
    pub fn f_derivatives(&self, t: C, u: C, zeta: C, xi: C) -> Result<(C, C)> {
        let y = self.target(t, u, zeta)?;
        let (_, a, b, _) = self.eval_at(&y, zeta + xi)?;
        Ok((a, b))
    }

    pub fn solve_xi(&self, t: C, u: C, zeta: C, cfg: &IftConfig) -> Result<XiSolution> {
        let y = self.target(t, u, zeta)?;
        self.solve_for(&y, zeta, cfg)
    }

    /// Newton iteration in the two real unknowns of `xi` for the target `y`, damped by halving.
    pub fn solve_for(&self, y: &AmbientPoint, zeta: C, cfg: &IftConfig) -> Result<XiSolution> {
        let mut xi = ZERO;
        let (mut fv, mut a, mut b, mut w) = self.eval_at(y, zeta)?;
        let mut it = 0;
        loop {
            if fv.norm() <= cfg.tol {
                if xi.norm() > cfg.r1 {
                    return Err(Error::OutOfRadius(xi.norm()));
                }
                return Ok(XiSolution { xi, point: w, residual: fv.norm(), iterations: it });
            }
            if it >= cfg.max_iter {
                return Err(Error::NoConvergence { iterations: it, residual: fv.norm() });
            }
            it += 1;
            let det = a.norm_sqr() - b.norm_sqr();
            if !(det.abs() > 0.0) {
                return Err(Error::SingularJacobian);
            }
            let delta = (-fv * a.conj() + b * fv.conj()) / det;
            let mut lam = 1.0;
            let accepted = loop {
                let cand = xi + delta * lam;
                if let Ok(r) = self.eval_at(y, zeta + cand) {
                    if r.0.norm() < fv.norm() {
                        break Some((cand, r));
                    }
                }
                lam *= 0.5;
                if lam < 1e-3 {
                    break None;
                }
            };
            match accepted {
                Some((cand, r)) => {
                    xi = cand;
                    (fv, a, b, w) = r;
                }
                None => return Err(Error::NoConvergence { iterations: it, residual: fv.norm() }),
            }
        }
    }
}

fn orthogonality(f: &Foliation, w: &AmbientPoint, y: &AmbientPoint) -> Result<f64> {
    let d = y.coords - w.coords;
    let x = f.eval(w)?;
    let dn = d.norm();
    if dn == 0.0 {
        return Ok(0.0);
    }
    Ok(x.dotc(&d).norm() / (dn * x.norm()))
}

/// A point of `L_p` whose normal line passes through the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: AmbientPoint,
    /// Total flow time `zeta + xi` from `p`.
    pub time: C,
    pub xi: C,
    /// Normalized inner product of the displacement with the leaf tangent at `point`.
    pub orthogonality: f64,
}

/// Projects `z = phi^zeta(q)` to `L_p`, returning `phi^{zeta+xi}(p)`.
pub fn local_projection(f: &Foliation, p: &AmbientPoint, q: &AmbientPoint, zeta: C, cfg: &IftConfig) -> Result<Projection> {
    let frame = ProjectionFrame::new(f, p)?;
    let q = f.to_chart(q, p.chart)?;
    let y = frame.flow(&q, zeta)?;
    let s = frame.solve_for(&y, zeta, cfg)?;
    Ok(Projection { point: s.point, time: zeta + s.xi, xi: s.xi, orthogonality: orthogonality(f, &s.point, &y)? })
}

/// Bookkeeping of one continuation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditStep {
    pub step: usize,
    /// Leaf length travelled along the target path.
    pub length: f64,
    pub ell: f64,
    pub distance: f64,
    pub orthogonality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Continuation {
    /// Projected endpoint on `L_p`.
    pub endpoint: AmbientPoint,
    /// Endpoint of the target path on `L_q`.
    pub target: AmbientPoint,
    pub trail: Vec<AuditStep>,
}

impl Continuation {
    pub fn max_orthogonality(&self) -> f64 {
        self.trail.iter().map(|a| a.orthogonality).fold(0.0, f64::max)
    }
}

/// Projects the path on `L_q` (starting at `path.start`) to `L_p` step by step.
pub fn continue_projection(f: &Foliation, p: &AmbientPoint, path: &LeafPath, cfg: &ProjectionConfig) -> Result<Continuation> {
    let rtol = f.tolerances().flow_rtol;
    let mut qn = path.start;
    let first = local_projection(f, &f.to_chart(p, qn.chart)?, &qn, ZERO, &cfg.ift)?;
    let mut pn = first.point;
    let ell0 = ell_at(f, &pn)?;
    let d0 = f.dist(&pn, &qn);
    let small = |length: f64| (cfg.smallness_c * ell0 * (cfg.smallness_c * length).exp()).exp() * d0 <= cfg.eps0;
    if !small(0.0) {
        return Err(Error::SmallnessViolated { step: 0 });
    }
    let mut trail = vec![AuditStep { step: 0, length: 0.0, ell: ell0, distance: d0, orthogonality: first.orthogonality }];
    let mut length = 0.0;
    for pair in path.samples.windows(2) {
        for dz in &pair[0].increments {
            let ell_p = ell_at(f, &pn)?;
            let ell_q = ell_at(f, &qn)?;
            let w = f.chart_weight(&qn);
            let leaf = dz.norm() * w / ell_q;
            let pieces = ((leaf * ell_p / cfg.eta).ceil() as usize).max(1);
            let piece = dz / pieces as f64;
            for _ in 0..pieces {
                let next = flow(f, &qn, piece, rtol)?;
                let frame = ProjectionFrame::new(f, &pn)?;
                let s = frame.solve_for(&next, piece, &cfg.ift)?;
                length += piece.norm() * f.chart_weight(&qn) / ell_at(f, &qn)?;
                qn = next;
                pn = s.point;
                let step = trail.len();
                if !small(length) {
                    return Err(Error::SmallnessViolated { step });
                }
                trail.push(AuditStep {
                    step,
                    length,
                    ell: ell_at(f, &pn)?,
                    distance: f.dist(&pn, &qn),
                    orthogonality: orthogonality(f, &pn, &qn)?,
                });
            }
        }
        qn = f.rebase(&qn);
        pn = f.to_chart(&pn, qn.chart)?;
    }
    Ok(Continuation { endpoint: pn, target: qn, trail })
}

/// The transported point at a recorded time of the base path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolonomyRecord {
    pub t: f64,
    pub base: AmbientPoint,
    pub point: AmbientPoint,
    pub distance: f64,
}

// Flow time taking q into the normal section of `target`, by holomorphic Newton from `guess`.
fn section_time(f: &Foliation, q: &AmbientPoint, target: &AmbientPoint, guess: C) -> Result<(C, AmbientPoint)> {
    let rtol = f.tolerances().flow_rtol;
    let x = f.eval(target)?;
    let n = CVec::new(x[1].conj(), -x[0].conj(), ZERO);
    let mut zeta = guess;
    let mut y = flow(f, q, zeta, rtol)?;
    let max_iter = 30;
    for _ in 0..max_iter {
        let g = det2(&n, &(y.coords - target.coords));
        let dg = det2(&n, &f.eval(&y)?);
        if dg == ZERO {
            return Err(Error::SingularJacobian);
        }
        let delta = g / dg;
        zeta -= delta;
        y = flow(f, q, zeta, rtol)?;
        if delta.norm() <= 1e-15 * (1.0 + zeta.norm()) {
            return Ok((zeta, y));
        }
    }
    let g = det2(&n, &(y.coords - target.coords)).norm();
    if g <= 1e-13 * n.norm() * (y.coords - target.coords).norm().max(f64::MIN_POSITIVE) {
        return Ok((zeta, y));
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: g })
}

fn transport(f: &Foliation, path: &LeafPath, q: &AmbientPoint, cfg: &ProjectionConfig) -> (Vec<HolonomyRecord>, Option<Error>) {
    let rtol = f.tolerances().flow_rtol;
    let mut records = Vec::with_capacity(path.samples.len());
    let mut p = path.start;
    let mut q = match f.to_chart(q, p.chart) {
        Ok(q) => q,
        Err(e) => return (records, Some(e)),
    };
    let d = f.dist(&p, &q);
    if d > cfg.rho * f.dist_to_singular(&p) {
        return (records, Some(Error::HypothesisViolation("transverse offset exceeds rho dist(p, S)".into())));
    }
    records.push(HolonomyRecord { t: 0.0, base: p, point: q, distance: d });
    let mut step = 0;
    for pair in path.samples.windows(2) {
        let res: Result<()> = (|| {
            for dz in &pair[0].increments {
                let next = flow(f, &p, *dz, rtol)?;
                let (_, y) = section_time(f, &q, &next, *dz)?;
                p = next;
                q = y;
                step += 1;
                if f.dist(&p, &q) > cfg.section_m * f.dist_to_singular(&p) {
                    return Err(Error::SectionExit { step });
                }
            }
            p = f.rebase(&p);
            q = f.to_chart(&q, p.chart)?;
            Ok(())
        })();
        if let Err(e) = res {
            return (records, Some(e));
        }
        records.push(HolonomyRecord { t: pair[1].t, base: p, point: q, distance: f.dist(&p, &q) });
    }
    (records, None)
}

/// Transports `q` (in the normal section at `path.start`) along the base path.
pub fn holonomy_point(f: &Foliation, path: &LeafPath, q: &AmbientPoint, cfg: &ProjectionConfig) -> Result<Vec<HolonomyRecord>> {
    match transport(f, path, q, cfg) {
        (records, None) => Ok(records),
        (_, Some(e)) => Err(e),
    }
}

/// Decay of one transported offset along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSeries {
    pub path: usize,
    pub theta: f64,
    pub times: Vec<f64>,
    /// `dist(q_t, gamma(t)) / (theta dist(gamma(t), S))`.
    pub ratios: Vec<f64>,
    /// Fitted slope of `log ratio` against `t`.
    pub rate: Option<f64>,
    pub decaying: bool,
    /// The transported point left the section before the horizon.
    pub exited: bool,
}

// A negative rate whose maxima over four consecutive blocks never increase.
fn decay_envelope(ratios: &[f64], rate: Option<f64>) -> bool {
    if !matches!(rate, Some(r) if r < 0.0) || ratios.len() < 4 {
        return false;
    }
    let b = ratios.len() / 4;
    let maxima: Vec<f64> = (0..4)
        .map(|i| {
            let end = if i == 3 { ratios.len() } else { (i + 1) * b };
            ratios[i * b..end].iter().cloned().fold(0.0, f64::max)
        })
        .collect();
    maxima.windows(2).all(|w| w[1] <= w[0])
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContractionTable {
    pub series: Vec<ContractionSeries>,
}

impl ContractionTable {
    pub fn fraction_decaying(&self, theta: f64) -> f64 {
        let rows: Vec<_> = self.series.iter().filter(|s| s.theta == theta).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().filter(|s| s.decaying).count() as f64 / rows.len() as f64
    }

    /// Columns `path,theta,t,ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "path,theta,t,ratio")?;
        for s in &self.series {
            for (t, r) in s.times.iter().zip(&s.ratios) {
                writeln!(w, "{},{:e},{},{:e}", s.path, s.theta, t, r)?;
            }
        }
        Ok(())
    }

    /// Columns `path,theta,rate,decaying,exited`.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "path,theta,rate,decaying,exited")?;
        for s in &self.series {
            let rate = s.rate.map_or("nan".to_string(), |r| format!("{r:e}"));
            writeln!(w, "{},{:e},{},{},{}", s.path, s.theta, rate, s.decaying, s.exited)?;
        }
        Ok(())
    }
}

/// `p + theta dist(p, S) n`, with `n` the unit normal to the leaf inside the chart plane.
pub fn transverse_offset(f: &Foliation, p: &AmbientPoint, theta: f64) -> Result<AmbientPoint> {
    let x = f.eval(p)?;
    let n = CVec::new(x[1].conj(), -x[0].conj(), ZERO);
    let nn = n.norm();
    if nn == 0.0 {
        return Err(Error::DegenerateFrame(nn));
    }
    let mut q = *p;
    q.coords += n * C::from(theta * f.dist_to_singular(p) / nn);
    Ok(q)
}

fn contraction_series(f: &Foliation, path: &LeafPath, index: usize, theta: f64, rho: f64, cfg: &ProjectionConfig) -> Result<ContractionSeries> {
    let times: Vec<f64> = path.samples.iter().map(|s| s.t).collect();
    if theta == 0.0 {
        let n = times.len();
        return Ok(ContractionSeries { path: index, theta, times, ratios: vec![0.0; n], rate: None, decaying: false, exited: false });
    }
    let q = transverse_offset(f, &path.start, theta)?;
    // chordal distances never exceed chart distances, so the offset stays below rho dist(p, S)
    let cfg = ProjectionConfig { rho, ..*cfg };
    let (records, err) = transport(f, path, &q, &cfg);
    let exited = match err {
        None => false,
        Some(Error::SectionExit { .. }) => true,
        Some(e) => return Err(e),
    };
    let (times, ratios): (Vec<f64>, Vec<f64>) =
        records.iter().map(|r| (r.t, r.distance / (theta * f.dist_to_singular(&r.base)))).unzip();
    let (lt, lr): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&ratios).filter(|(_, r)| **r > 0.0).map(|(t, r)| (*t, r.ln())).unzip();
    let rate = linear_fit(&lt, &lr).map(|fit| fit.slope);
    let decaying = !exited && decay_envelope(&ratios, rate);
    Ok(ContractionSeries { path: index, theta, times, ratios, rate, decaying, exited })
}

/// Transports offsets `theta dist(p, S)` along each path and tabulates their decay.
pub fn contraction_experiment(f: &Foliation, paths: &[LeafPath], rho: f64, thetas: &[f64], cfg: &ProjectionConfig) -> Result<ContractionTable> {
    if let Some(t) = thetas.iter().find(|t| !(**t >= 0.0 && **t < rho)) {
        return Err(Error::Config(format!("theta {t} must lie in [0, rho)")));
    }
    let jobs: Vec<(usize, f64)> = (0..paths.len()).flat_map(|i| thetas.iter().map(move |t| (i, *t))).collect();
    let series = jobs
        .par_iter()
        .map(|(i, t)| contraction_series(f, &paths[*i], *i, *t, rho, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContractionTable { series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::LeafPath;
    use crate::cocycle::{normal_derivative_lognorm, transport_variational, Bundle};
    use crate::foliation::{Tolerances, ONE};
    use crate::poly::Poly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn model3() -> Foliation {
        Foliation::linear(ONE, c(0.0, -1.0), Some(c(0.5, 0.2))).unwrap()
    }

    fn surface() -> Foliation {
        let comps = vec![
            Poly::from_terms(2, vec![(vec![1, 0], ONE), (vec![0, 2], c(0.3, 0.0)), (vec![1, 1], c(0.1, 0.0))]),
            Poly::from_terms(2, vec![(vec![0, 1], c(0.0, -1.0)), (vec![2, 0], c(0.2, 0.0))]),
        ];
        Foliation::affine(comps, 2, false, &[], Tolerances::default()).unwrap()
    }

    fn wirtinger(frame: &ProjectionFrame, t: C, u: C, zeta: C, xi: C, h: f64) -> (C, C) {
        let fx = (frame.f_eval(t, u, zeta, xi + h).unwrap() - frame.f_eval(t, u, zeta, xi - h).unwrap()) / (2.0 * h);
        let hi = c(0.0, h);
        let fy = (frame.f_eval(t, u, zeta, xi + hi).unwrap() - frame.f_eval(t, u, zeta, xi - hi).unwrap()) / (2.0 * h);
        ((fx - fy * c(0.0, 1.0)) * 0.5, (fx + fy * c(0.0, 1.0)) * 0.5)
    }

    #[test]
    fn f_vanishes_along_the_leaf() {
        let f = model3();
        let frame = ProjectionFrame::new(&f, &AmbientPoint::new(0, &[c(0.03, 0.01), c(0.0, 0.02), ZERO])).unwrap();
        for k in 0..8 {
            let zeta = C::from_polar(0.3, k as f64);
            assert_eq!(frame.f_eval(ZERO, ZERO, zeta, ZERO).unwrap(), ZERO);
        }
    }

    #[test]
    fn derivative_at_origin() {
        let f = Foliation::linear(ONE, c(0.0, -1.0), None).unwrap();
        let frame = ProjectionFrame::new(&f, &AmbientPoint::new(0, &[c(0.01, 0.0), ZERO])).unwrap();
        let (a, b) = frame.f_derivatives(ZERO, ZERO, ZERO, ZERO).unwrap();
        assert!((a - c(-1.0, 0.0)).norm() < 1e-12 && b.norm() < 1e-15);
        let g = model3();
        let p = AmbientPoint::new(0, &[c(0.02, -0.01), c(0.005, 0.03), ZERO]);
        let frame = ProjectionFrame::new(&g, &p).unwrap();
        let x = g.eval(&p).unwrap();
        let (a, _) = frame.f_derivatives(ZERO, ZERO, ZERO, ZERO).unwrap();
        assert!((a.re + x.norm_squared() / p.coords.norm_squared()).abs() < 1e-12 && a.im.abs() < 1e-12);
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let f = model3();
        let frame = ProjectionFrame::new(&f, &AmbientPoint::new(0, &[c(0.03, 0.01), c(0.0, 0.02), ZERO])).unwrap();
        let (t, u, zeta, xi) = (c(0.05, -0.02), c(0.03, 0.04), c(0.2, -0.3), c(-0.04, 0.06));
        let (a, b) = frame.f_derivatives(t, u, zeta, xi).unwrap();
        let (fa, fb) = wirtinger(&frame, t, u, zeta, xi, 1e-5);
        assert!((a - fa).norm() < 1e-6 && (b - fb).norm() < 1e-6, "{a} {fa} {b} {fb}");
        assert!(b.norm() > 1e-3);

        let g = surface();
        let frame = ProjectionFrame::new(&g, &AmbientPoint::new(0, &[c(0.4, 0.1), c(0.2, -0.3)])).unwrap();
        let (t, zeta, xi) = (c(0.02, 0.01), c(0.1, 0.2), c(0.03, -0.02));
        let (a, b) = frame.f_derivatives(t, ZERO, zeta, xi).unwrap();
        let (fa, fb) = wirtinger(&frame, t, ZERO, zeta, xi, 1e-4);
        assert!((a - fa).norm() < 1e-6 && (b - fb).norm() < 1e-6, "{a} {fa} {b} {fb}");
    }

    #[test]
    fn xi_vanishes_without_offset() {
        let f = model3();
        let frame = ProjectionFrame::new(&f, &AmbientPoint::new(0, &[c(0.03, 0.01), c(0.0, 0.02), ZERO])).unwrap();
        for k in 0..10 {
            let s = frame.solve_xi(ZERO, ZERO, C::from_polar(0.4, k as f64), &IftConfig::default()).unwrap();
            assert!(s.xi.norm() <= 1e-12);
        }
    }

    #[test]
    fn xi_is_linear_in_the_offset() {
        let f = model3();
        let cfg = IftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ratios = Vec::new();
        for _ in 0..400 {
            let p = AmbientPoint::new(0, &[C::from_polar(0.05, rng.random::<f64>() * 6.3), C::from_polar(0.05, rng.random::<f64>() * 6.3), ZERO]);
            let frame = ProjectionFrame::new(&f, &p).unwrap();
            let t = C::from_polar(rng.random::<f64>() * 0.1, rng.random::<f64>() * 6.3);
            let u = C::from_polar(rng.random::<f64>() * 0.1, rng.random::<f64>() * 6.3);
            let zeta = C::from_polar(rng.random::<f64>() * 0.4, rng.random::<f64>() * 6.3);
            let s = frame.solve_xi(t, u, zeta, &cfg).unwrap();
            assert!(s.residual <= 1e-10 && s.iterations <= 20);
            ratios.push(s.xi.norm() / (t.norm() + u.norm()));
        }
        let half = ratios[..200].iter().cloned().fold(0.0, f64::max);
        let full = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(full.is_finite() && full <= 2.0 * half, "{half} {full}");
    }

    #[test]
    fn projection_of_a_section_point_is_the_base() {
        let f = model3();
        let p = AmbientPoint::new(0, &[c(0.03, 0.01), c(0.0, 0.02), ZERO]);
        let q = ProjectionFrame::new(&f, &p).unwrap().section_point(c(0.02, 0.01), c(0.01, 0.0)).unwrap();
        let pr = local_projection(&f, &p, &q, ZERO, &IftConfig::default()).unwrap();
        assert!((pr.point.coords - p.coords).norm() < 1e-15 && pr.xi.norm() < 1e-13);
        let pr = local_projection(&f, &p, &q, c(0.2, 0.3), &IftConfig::default()).unwrap();
        assert!(pr.orthogonality < 1e-8);
        let g = surface();
        let p = AmbientPoint::new(0, &[c(0.4, 0.1), c(0.2, -0.3)]);
        let q = AmbientPoint::new(0, &[c(0.401, 0.1), c(0.2, -0.299)]);
        let pr = local_projection(&g, &p, &q, c(0.1, -0.1), &IftConfig::default()).unwrap();
        assert!(pr.orthogonality < 1e-8);
    }

    fn loop_path(f: &Foliation, p: &AmbientPoint, alpha: C, loops: usize, n: usize) -> LeafPath {
        let dz = c(0.0, 2.0 * PI) / alpha / n as f64;
        LeafPath::from_increments(f, p, 1.0 / n as f64, &vec![dz; n * loops]).unwrap()
    }

    #[test]
    fn loop_holonomy_multiplier() {
        let f = Foliation::linear(ONE, c(0.0, -1.0), None).unwrap();
        let r = (-4f64).exp();
        let p = AmbientPoint::new(0, &[c(r, 0.0), ZERO]);
        let y0 = 1e-7;
        let q = AmbientPoint::new(0, &[c(r, 0.0), c(y0, 0.0)]);
        let recs = holonomy_point(&f, &loop_path(&f, &p, ONE, 1, 64), &q, &ProjectionConfig::default()).unwrap();
        let last = recs.last().unwrap();
        let mult = last.point.coords[1] / y0;
        let expect = (2.0 * PI).exp();
        assert!((mult - C::from(expect)).norm() / expect < 1e-9, "{mult}");
        let still = holonomy_point(&f, &loop_path(&f, &p, ONE, 1, 16), &p, &ProjectionConfig::default()).unwrap();
        assert!(still.iter().all(|r| r.distance == 0.0));
    }

    #[test]
    fn holonomy_leaves_the_section() {
        let f = Foliation::linear(ONE, c(0.0, -1.0), None).unwrap();
        let p = AmbientPoint::new(0, &[c(0.01, 0.0), ZERO]);
        let q = AmbientPoint::new(0, &[c(0.01, 0.0), c(5e-4, 0.0)]);
        let res = holonomy_point(&f, &loop_path(&f, &p, ONE, 1, 32), &q, &ProjectionConfig::default());
        assert!(matches!(res, Err(Error::SectionExit { .. })));
    }

    #[test]
    fn holonomy_agrees_with_variational_cocycle() {
        let f = surface();
        let p = AmbientPoint::new(0, &[c(0.4, 0.1), c(0.2, -0.3)]);
        let incs: Vec<C> = (0..20).map(|k| C::from_polar(0.05, 0.7 * k as f64)).collect();
        let path = LeafPath::from_increments(&f, &p, 0.01, &incs).unwrap();
        let x = f.eval(&p).unwrap();
        let n = CVec::new(x[1].conj(), -x[0].conj(), ZERO);
        let v = transport_variational(&f, &path).unwrap();
        let end = path.samples.last().unwrap().point;
        let predicted = normal_derivative_lognorm(&f, v.last().unwrap(), &p, &end, Bundle::N).unwrap().exp();
        for off in [1e-4, 1e-5] {
            let mut q = p;
            q.coords += n * C::from(off / n.norm());
            let recs = holonomy_point(&f, &path, &q, &ProjectionConfig::default()).unwrap();
            let measured = recs.last().unwrap().distance / off;
            assert!((measured / predicted - 1.0).abs() < 0.1, "{measured} {predicted}");
        }
    }

    #[test]
    fn continuation_on_the_model() {
        let f = Foliation::linear(ONE, c(0.0, -1.0), None).unwrap();
        let cfg = ProjectionConfig::default();
        let p = AmbientPoint::new(0, &[c(0.05, 0.0), ZERO]);
        let q = AmbientPoint::new(0, &[c(0.05, 0.0), c(1e-4, 0.0)]);
        let path = |incs: &[C]| LeafPath::from_increments(&f, &q, 0.1, incs).unwrap();

        let same = continue_projection(&f, &p, &LeafPath::from_increments(&f, &p, 0.1, &[c(-0.5, 0.3)]).unwrap(), &cfg).unwrap();
        assert!((same.endpoint.coords - same.target.coords).norm() < 1e-15);

        let run = continue_projection(&f, &p, &path(&vec![c(-0.1, 0.0); 10]), &cfg).unwrap();
        let (ell0, d0) = (run.trail[0].ell, run.trail[0].distance);
        let mut kappa: f64 = 0.0;
        for a in &run.trail[1..] {
            assert!(a.ell <= ell0 + a.step as f64);
            kappa = kappa.max((a.distance / d0).ln() / a.step as f64);
        }
        assert!(kappa.is_finite() && kappa < 1.0);
        assert!(run.max_orthogonality() <= 1e-8);

        let coarse = continue_projection(&f, &p, &path(&[c(-0.5, 0.4)]), &cfg).unwrap();
        let fine = continue_projection(&f, &p, &path(&[c(-0.25, 0.2), c(-0.25, 0.2)]), &cfg).unwrap();
        assert!((coarse.endpoint.coords - fine.endpoint.coords).norm() < 1e-12);

        let first = continue_projection(&f, &p, &path(&[c(-0.3, 0.1)]), &cfg).unwrap();
        let second = LeafPath::from_increments(&f, &first.target, 0.1, &[c(-0.2, 0.3)]).unwrap();
        let chained = continue_projection(&f, &first.endpoint, &second, &cfg).unwrap();
        let whole = continue_projection(&f, &p, &path(&[c(-0.3, 0.1), c(-0.2, 0.3)]), &cfg).unwrap();
        assert!((chained.endpoint.coords - whole.endpoint.coords).norm() < 1e-12);
    }

    #[test]
    fn continuation_reports_smallness_violation() {
        let f = Foliation::linear(ONE, c(0.0, -1.0), None).unwrap();
        let cfg = ProjectionConfig { eps0: 1e-3, ..Default::default() };
        let p = AmbientPoint::new(0, &[c(0.05, 0.0), ZERO]);
        let q = AmbientPoint::new(0, &[c(0.05, 0.0), c(4e-4, 0.0)]);
        let path = LeafPath::from_increments(&f, &q, 0.1, &vec![c(0.0, 1.0); 40]).unwrap();
        match continue_projection(&f, &p, &path, &cfg) {
            Err(Error::SmallnessViolated { step }) => assert!(step > 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contraction_rate_on_a_contracting_loop() {
        let f = Foliation::linear(ONE, c(0.0, 1.0), None).unwrap();
        let p = AmbientPoint::new(0, &[c((-3f64).exp(), 0.0), ZERO]);
        let paths = vec![loop_path(&f, &p, ONE, 3, 32)];
        let table = contraction_experiment(&f, &paths, 0.1, &[0.0, 1e-3], &ProjectionConfig::default()).unwrap();
        assert!(table.series[0].ratios.iter().all(|r| *r == 0.0));
        let s = &table.series[1];
        assert!((s.rate.unwrap() + 2.0 * PI).abs() < 1e-8, "{:?}", s.rate);
        assert!(s.decaying && table.fraction_decaying(1e-3) == 1.0);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 97);
        assert!(contraction_experiment(&f, &paths, 0.1, &[0.2], &ProjectionConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ProjectionConfig::default().validate().is_ok());
        assert!(IftConfig { r0: 1.0, ..Default::default() }.validate().is_err());
        assert!(ProjectionConfig { eta: 0.0, ..Default::default() }.validate().is_err());
    }
}
