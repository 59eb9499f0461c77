//! The `l` function and the Poincare-type leaf metric.
//!
//! The leaf metric has conformal factor `1 / (|X(p)|^2 l(p)^2)`, so a flow
//! increment `dzeta` at `p` has length `|dzeta| * w(p) / l(p)` where `w` is the
//! chart weight of [`Foliation::chart_weight`] (identically 1 on affine charts).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::foliation::{AmbientPoint, CVec, Foliation};
use crate::integrate::flow;

/// Radius constant `c` of the flow box `{phi^z(p) : |z| <= c}` (g-radius `c / l(p)`).
pub const DEFAULT_FLOWBOX_C: f64 = 2.0;

const SPLICE: f64 = 1.0 / 3.0;

// Tail on (1/3, inf): l(s) = 1 + A exp(-B (s - 1/3) - C (s - 1/3)^2), matching
// value, slope and curvature of -log s at the splice.
fn tail_consts() -> (f64, f64, f64) {
    let a = 3f64.ln() - 1.0;
    let b = 3.0 / a;
    let c = (b * b - 9.0 / a) / 2.0;
    (a, b, c)
}

/// Smooth decreasing surrogate for `-log s`, equal to it for `s <= 1/3` and tending to 1.
pub fn ell(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveInput(s));
    }
    Ok(ell_unchecked(s))
}

pub(crate) fn ell_unchecked(s: f64) -> f64 {
    if s <= SPLICE {
        -s.ln()
    } else {
        let (a, b, c) = tail_consts();
        let d = s - SPLICE;
        1.0 + a * (-b * d - c * d * d).exp()
    }
}

/// `(l(s), l'(s), l''(s))` in closed form; one-sided limits agree at the splice.
pub fn ell_derivatives(s: f64) -> Result<(f64, f64, f64)> {
    if !(s > 0.0) {
        return Err(Error::NonPositiveInput(s));
    }
    if s <= SPLICE {
        return Ok((-s.ln(), -1.0 / s, 1.0 / (s * s)));
    }
    let (a, b, c) = tail_consts();
    let d = s - SPLICE;
    let e = a * (-b * d - c * d * d).exp();
    let g1 = -b - 2.0 * c * d;
    Ok((1.0 + e, e * g1, e * (g1 * g1 - 2.0 * c)))
}

/// `l(dist(p, S))`.
pub fn ell_at(f: &Foliation, p: &AmbientPoint) -> Result<f64> {
    let d = f.dist_to_singular(p);
    if d <= 0.0 {
        return Err(Error::AtSingularity);
    }
    Ok(ell_unchecked(d))
}

/// Leaf-metric length of a unit of chart flow time at `p`.
pub fn speed(f: &Foliation, p: &AmbientPoint) -> Result<f64> {
    Ok(f.chart_weight(p) / ell_at(f, p)?)
}

/// Local data of the leaf metric at a regular point.
#[derive(Debug, Clone, Copy)]
pub struct MetricFrame {
    pub point: AmbientPoint,
    pub ell: f64,
    pub x_norm: f64,
    /// Radius of the flow box in the leaf metric, `c / l(p)`.
    pub radius: f64,
}

impl MetricFrame {
    pub fn at(f: &Foliation, p: &AmbientPoint, c: f64) -> Result<Self> {
        let ell = ell_at(f, p)?;
        let x_norm = f.eval(p)?.norm();
        if x_norm == 0.0 {
            return Err(Error::AtSingularity);
        }
        Ok(MetricFrame { point: *p, ell, x_norm, radius: c / ell })
    }

    /// Radius of the flow box measured in chart flow time.
    pub fn flow_radius(&self, f: &Foliation) -> f64 {
        self.radius * self.ell / f.chart_weight(&self.point)
    }
}

/// Leaf-metric norm of a vector tangent to the leaf at `p`.
pub fn poincare_type_norm(f: &Foliation, p: &AmbientPoint, v: &CVec) -> Result<f64> {
    let x = f.eval(p)?;
    let xn2 = x.norm_squared();
    if xn2 == 0.0 {
        return Err(Error::AtSingularity);
    }
    let vn = v.norm();
    if vn == 0.0 {
        return Ok(0.0);
    }
    let coef = x.dotc(v) / xn2;
    let off = (v - x * coef).norm() / vn;
    if off > 1e-6 {
        return Err(Error::NotTangent(off));
    }
    Ok(coef.norm() * speed(f, p)?)
}

/// Conformal density of the leaf metric in the flow coordinate `z -> phi^z(p)`.
pub fn flowbox_density(f: &Foliation, p: &AmbientPoint, z: Complex64, c: f64) -> Result<f64> {
    let frame = MetricFrame::at(f, p, c)?;
    if z.norm() > frame.flow_radius(f) {
        return Err(Error::ChartExit { norm: z.norm() });
    }
    let q = flow(f, p, z, f.tolerances().flow_rtol)?;
    let s = speed(f, &q)?;
    Ok(s * s)
}

/// Riemann-sum length of a path given as points with the flow increments taken there.
pub fn path_length(f: &Foliation, steps: &[(AmbientPoint, Complex64)]) -> Result<f64> {
    let mut total = 0.0;
    for (p, dz) in steps {
        total += dz.norm() * speed(f, p)?;
    }
    Ok(total)
}
