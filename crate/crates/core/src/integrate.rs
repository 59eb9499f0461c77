//! Complex-time flow of a holomorphic vector field.
//!
//! The flow `dq/dzeta = X(q)` is integrated along the straight segment
//! `[0, zeta]`: with `q(s) = phi^{s zeta}(p)` we solve the real-time system
//! `dq/ds = zeta X(q)` on `s in [0, 1]` with the Dormand-Prince 5(4) pair.
//! Tangent vectors follow the variational equation `dw/ds = zeta dX(q) w`.
//! Inside a declared linear-model neighbourhood the exponential formula is used.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::foliation::{AmbientPoint, CMat, CVec, Foliation, Tolerances};

const MAX_TANGENTS: usize = 3;

// Dormand-Prince 5(4) tableau; the field is autonomous so the nodes are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// differences between the 5th and 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy)]
struct State {
    q: CVec,
    w: [CVec; MAX_TANGENTS],
}

impl State {
    fn axpy(&self, h: f64, ks: &[(f64, &State)]) -> State {
        let mut out = *self;
        for (a, k) in ks {
            let s = Complex64::new(h * a, 0.0);
            out.q += k.q * s;
            for i in 0..MAX_TANGENTS {
                out.w[i] += k.w[i] * s;
            }
        }
        out
    }
}

/// Step-size controlled integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub chart_bound: f64,
}

impl From<&Tolerances> for Integrator {
    fn from(t: &Tolerances) -> Self {
        Integrator { rtol: t.flow_rtol, atol: t.flow_atol, max_steps: 200_000, chart_bound: t.chart_bound }
    }
}

impl Integrator {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    /// Flows `p` for complex time `zeta`, carrying the given tangent vectors along.
    pub fn flow_with_tangents(
        &self,
        f: &Foliation,
        p: &AmbientPoint,
        zeta: Complex64,
        tangents: &mut [CVec],
    ) -> Result<AmbientPoint> {
        assert!(tangents.len() <= MAX_TANGENTS);
        if zeta == Complex64::new(0.0, 0.0) {
            return Ok(*p);
        }
        if let Some((sp, model)) = f.linear_model_at(p) {
            let rates = model.rates();
            let mut out = *p;
            for i in 0..f.dim() {
                let e = (rates[i] * zeta).exp();
                out.coords[i] = sp.location.coords[i] + (p.coords[i] - sp.location.coords[i]) * e;
                for t in tangents.iter_mut() {
                    t[i] *= e;
                }
            }
            if (out.coords - sp.location.coords).norm() < model.radius {
                return Ok(out);
            }
            return Err(Error::ChartExit { norm: out.coords.norm() });
        }
        self.integrate(f, p, zeta, tangents)
    }

    fn rhs(&self, f: &Foliation, chart: usize, y: &State, m: usize, zeta: Complex64) -> Result<State> {
        let p = AmbientPoint { chart, coords: y.q };
        let mut out = State { q: f.eval(&p)? * zeta, w: [CVec::zeros(); MAX_TANGENTS] };
        if m > 0 {
            let j: CMat = f.jacobian(&p)? * zeta;
            for i in 0..m {
                out.w[i] = j * y.w[i];
            }
        }
        Ok(out)
    }

    fn integrate(&self, f: &Foliation, p: &AmbientPoint, zeta: Complex64, tangents: &mut [CVec]) -> Result<AmbientPoint> {
        let m = tangents.len();
        let chart = p.chart;
        let mut y = State { q: p.coords, w: [CVec::zeros(); MAX_TANGENTS] };
        for (i, t) in tangents.iter().enumerate() {
            y.w[i] = *t;
        }
        let mut k1 = self.rhs(f, chart, &y, m, zeta)?;
        let speed = k1.q.norm() / (y.q.norm() + self.atol.max(1e-300));
        let mut h = if speed > 0.0 { (0.05 / speed).min(1.0) } else { 1.0 };
        let mut s = 0.0;
        let mut steps = 0;
        while s < 1.0 {
            if steps >= self.max_steps {
                return Err(Error::StepUnderflow { at: s });
            }
            steps += 1;
            if s + h > 1.0 {
                h = 1.0 - s;
            }
            let y2 = y.axpy(h, &[(A21, &k1)]);
            let k2 = self.rhs(f, chart, &y2, m, zeta)?;
            let y3 = y.axpy(h, &[(A31, &k1), (A32, &k2)]);
            let k3 = self.rhs(f, chart, &y3, m, zeta)?;
            let y4 = y.axpy(h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            let k4 = self.rhs(f, chart, &y4, m, zeta)?;
            let y5 = y.axpy(h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            let k5 = self.rhs(f, chart, &y5, m, zeta)?;
            let y6 = y.axpy(h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            let k6 = self.rhs(f, chart, &y6, m, zeta)?;
            let ynew = y.axpy(h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let finite = ynew.q.iter().all(|c| c.re.is_finite() && c.im.is_finite());
            let k7 = if finite { Some(self.rhs(f, chart, &ynew, m, zeta)?) } else { None };
            let err = match &k7 {
                Some(k7) => {
                    let zero = State { q: CVec::zeros(), w: [CVec::zeros(); MAX_TANGENTS] };
                    let e = zero.axpy(h, &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, k7)]);
                    self.error_norm(&y, &ynew, &e, m)
                }
                None => f64::INFINITY,
            };
            if err <= 1.0 {
                s += h;
                y = ynew;
                k1 = k7.expect("finite accepted step");
                if y.q.norm() > self.chart_bound {
                    return Err(Error::ChartExit { norm: y.q.norm() });
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h *= fac;
            } else {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h *= fac;
            }
            if h < 1e-13 && s < 1.0 {
                return Err(Error::StepUnderflow { at: s });
            }
        }
        for (i, t) in tangents.iter_mut().enumerate() {
            *t = y.w[i];
        }
        Ok(AmbientPoint { chart, coords: y.q })
    }

    fn error_norm(&self, y: &State, ynew: &State, e: &State, m: usize) -> f64 {
        let mut err = 0.0f64;
        let qs = self.atol + self.rtol * y.q.norm().max(ynew.q.norm());
        err = err.max(e.q.norm() / qs);
        for i in 0..m {
            let ws = self.atol + self.rtol * y.w[i].norm().max(ynew.w[i].norm());
            err = err.max(e.w[i].norm() / ws);
        }
        err
    }
}

/// `phi^zeta(p)` with the foliation's tolerances, overriding the relative tolerance.
pub fn flow(f: &Foliation, p: &AmbientPoint, zeta: Complex64, rtol: f64) -> Result<AmbientPoint> {
    Integrator::from(f.tolerances()).with_rtol(rtol).flow_with_tangents(f, p, zeta, &mut [])
}

/// `phi^zeta(p)` together with the derivative `d(phi^zeta)_p` (leading `dim x dim` block).
pub fn flow_jacobian(f: &Foliation, p: &AmbientPoint, zeta: Complex64) -> Result<(AmbientPoint, CMat)> {
    let n = f.dim();
    let mut cols: Vec<CVec> = (0..n)
        .map(|i| {
            let mut v = CVec::zeros();
            v[i] = Complex64::new(1.0, 0.0);
            v
        })
        .collect();
    let q = Integrator::from(f.tolerances()).flow_with_tangents(f, p, zeta, &mut cols)?;
    let mut m = CMat::identity();
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            m[(i, j)] = c[i];
        }
    }
    Ok((q, m))
}
