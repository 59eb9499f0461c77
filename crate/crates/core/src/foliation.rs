//! Foliations by curves given by polynomial vector fields on affine charts.
//!
//! Two kinds of ambient spaces are supported. An *affine* foliation lives on a
//! single chart of `C^n` (used for local models and test fields). A
//! *projective* foliation of `P^n` is given by a homogeneous vector field `V`
//! of degree `d` on `C^{n+1}`; chart `k` is `{Z_k != 0}` with affine
//! coordinates `Z_j / Z_k` (`j != k`, increasing order) and carries the
//! dehomogenised field `X_k,j = V_j - x_j V_k` evaluated at `Z_k = 1`.
//!
//! When an invariant hyperplane is declared, it is always the last coordinate:
//! `{x_{n-1} = 0}` in affine charts and `{Z_n = 0}` in projective space.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

pub type CVec = Vector3<Complex64>;
pub type CMat = Matrix3<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// A point in a chart. Coordinates beyond the ambient dimension are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientPoint {
    pub chart: usize,
    pub coords: CVec,
}

impl AmbientPoint {
    pub fn new(chart: usize, coords: &[Complex64]) -> Self {
        let mut v = CVec::zeros();
        for (i, c) in coords.iter().enumerate() {
            v[i] = *c;
        }
        AmbientPoint { chart, coords: v }
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientKind {
    Affine,
    Projective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Hyperbolic,
    NonHyperbolic,
}

/// Diagonal linear model `alpha x d/dx + beta y d/dy (+ gamma z d/dz)` valid on a
/// ball of the given radius around a singular point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Option<Complex64>,
    pub radius: f64,
}

impl LinearModel {
    pub fn rates(&self) -> CVec {
        CVec::new(self.alpha, self.beta, self.gamma.unwrap_or(ZERO))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularPoint {
    pub location: AmbientPoint,
    pub eigenvalues: Vec<Complex64>,
    pub classification: Classification,
    pub linear_model: Option<LinearModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Residual `|X(p)|` accepted for a singular point.
    pub residual: f64,
    /// Hyperbolicity threshold on `|Im(ratio)|` and on `|eigenvalue|`.
    pub hyperbolic: f64,
    pub newton_max_iter: usize,
    pub flow_rtol: f64,
    pub flow_atol: f64,
    /// Coordinates larger than this in modulus count as leaving the chart.
    pub chart_bound: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-10,
            hyperbolic: 1e-9,
            newton_max_iter: 60,
            flow_rtol: 1e-11,
            flow_atol: 1e-14,
            chart_bound: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
struct ChartField {
    components: Vec<Poly>,
    jac: Vec<Vec<Poly>>,
}

impl ChartField {
    fn new(components: Vec<Poly>) -> Self {
        let n = components.len();
        let jac = components
            .iter()
            .map(|c| (0..n).map(|v| c.derivative(v)).collect())
            .collect();
        ChartField { components, jac }
    }
}

/// An immutable foliation: vector fields per chart, singular set, degree, invariant plane.
#[derive(Debug, Clone)]
pub struct Foliation {
    dim: usize,
    kind: AmbientKind,
    degree: usize,
    homogeneous: Option<Vec<Poly>>,
    charts: Vec<ChartField>,
    invariant_plane: bool,
    singularities: Vec<SingularPoint>,
    tol: Tolerances,
}

/// Builder input for a singular point: a seed plus an optional linear model.
#[derive(Debug, Clone)]
pub struct SingularSeed {
    pub seed: AmbientPoint,
    pub linear_model: Option<LinearModel>,
}

impl Foliation {
    /// Affine foliation on `C^dim` given by its polynomial components.
    pub fn affine(
        components: Vec<Poly>,
        degree: usize,
        invariant_plane: bool,
        seeds: &[SingularSeed],
        tol: Tolerances,
    ) -> Result<Self> {
        let dim = components.len();
        if !(2..=3).contains(&dim) || components.iter().any(|c| c.nvars() != dim) {
            return Err(Error::Config("affine field needs 2 or 3 components in as many variables".into()));
        }
        let mut f = Foliation {
            dim,
            kind: AmbientKind::Affine,
            degree,
            homogeneous: None,
            charts: vec![ChartField::new(components)],
            invariant_plane,
            singularities: Vec::new(),
            tol,
        };
        f.finish(seeds)?;
        Ok(f)
    }

    /// Projective foliation of `P^dim` given by a homogeneous field on `C^{dim+1}`.
    pub fn projective(
        homogeneous: Vec<Poly>,
        degree: usize,
        invariant_plane: bool,
        seeds: &[SingularSeed],
        tol: Tolerances,
    ) -> Result<Self> {
        let dim = homogeneous.len().checked_sub(1).unwrap_or(0);
        if !(2..=3).contains(&dim) || homogeneous.iter().any(|c| c.nvars() != dim + 1) {
            return Err(Error::Config("projective field needs 3 or 4 homogeneous components".into()));
        }
        if homogeneous.iter().any(|c| !c.is_homogeneous(degree)) {
            return Err(Error::Config(format!("homogeneous components must have degree {degree}")));
        }
        let charts = (0..=dim)
            .map(|k| {
                let vk = homogeneous[k].dehomogenize(k);
                let comps = (0..=dim)
                    .filter(|&j| j != k)
                    .enumerate()
                    .map(|(a, j)| {
                        let vj = homogeneous[j].dehomogenize(k);
                        let xa = Poly::linear(dim, a, ONE);
                        vj.sub(&xa.mul(&vk))
                    })
                    .collect();
                ChartField::new(comps)
            })
            .collect();
        let mut f = Foliation {
            dim,
            kind: AmbientKind::Projective,
            degree,
            homogeneous: Some(homogeneous),
            charts,
            invariant_plane,
            singularities: Vec::new(),
            tol,
        };
        f.finish(seeds)?;
        Ok(f)
    }

    /// The linear model `alpha x d/dx + beta y d/dy (+ gamma z d/dz)` on `C^2` or `C^3`.
    pub fn linear(alpha: Complex64, beta: Complex64, gamma: Option<Complex64>) -> Result<Self> {
        let dim = if gamma.is_some() { 3 } else { 2 };
        let rates = [alpha, beta, gamma.unwrap_or(ZERO)];
        let comps = (0..dim).map(|i| Poly::linear(dim, i, rates[i])).collect();
        let model = LinearModel { alpha, beta, gamma, radius: f64::INFINITY };
        Foliation::affine(
            comps,
            1,
            dim == 3,
            &[SingularSeed { seed: AmbientPoint::new(0, &[ZERO; 3][..dim]), linear_model: Some(model) }],
            Tolerances::default(),
        )
    }

    fn finish(&mut self, seeds: &[SingularSeed]) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::Config("degree must be at least 1".into()));
        }
        if self.invariant_plane && !self.plane_is_invariant() {
            return Err(Error::Config("declared invariant plane is not invariant".into()));
        }
        let mut sing = Vec::with_capacity(seeds.len());
        for s in seeds {
            let mut sp = self.refine_singularity(s.seed)?;
            if let Some(m) = s.linear_model {
                self.check_linear_model(&sp, &m)?;
                sp.linear_model = Some(m);
            }
            sing.push(sp);
        }
        self.singularities = sing;
        Ok(())
    }

    fn plane_is_invariant(&self) -> bool {
        match self.kind {
            AmbientKind::Affine => self.charts[0].components[self.dim - 1].divisible_by(self.dim - 1),
            AmbientKind::Projective => {
                let h = self.homogeneous.as_ref().expect("projective field");
                h[self.dim].divisible_by(self.dim)
            }
        }
    }

    fn check_linear_model(&self, sp: &SingularPoint, m: &LinearModel) -> Result<()> {
        let r = if m.radius.is_finite() { m.radius.min(1.0) } else { 1.0 };
        let rates = m.rates();
        let probes = [[0.3, -0.2, 0.1], [-0.1, 0.25, -0.3], [0.05, 0.05, 0.2]];
        for pr in probes {
            let mut q = sp.location;
            for i in 0..self.dim {
                q.coords[i] += Complex64::new(pr[i] * r, pr[(i + 1) % 3] * r);
            }
            let x = self.eval(&q)?;
            for i in 0..self.dim {
                let expect = rates[i] * (q.coords[i] - sp.location.coords[i]);
                if (x[i] - expect).norm() > 1e-9 * (1.0 + expect.norm()) {
                    return Err(Error::Config("declared linear model does not match the field".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> AmbientKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn has_invariant_plane(&self) -> bool {
        self.invariant_plane
    }

    pub fn singularities(&self) -> &[SingularPoint] {
        &self.singularities
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn chart_count(&self) -> usize {
        self.charts.len()
    }

    pub fn chart_components(&self, chart: usize) -> &[Poly] {
        &self.charts[chart].components
    }

    fn chart(&self, p: &AmbientPoint) -> Result<&ChartField> {
        self.charts
            .get(p.chart)
            .ok_or(Error::ChartMismatch { expected: self.charts.len() - 1, got: p.chart })
    }

    /// `X(p)` in the chart of `p`.
    pub fn eval(&self, p: &AmbientPoint) -> Result<CVec> {
        let ch = self.chart(p)?;
        let x = p.coords.as_slice();
        let mut out = CVec::zeros();
        for (i, c) in ch.components.iter().enumerate() {
            out[i] = c.eval(x);
        }
        Ok(out)
    }

    /// `dX_p` in the chart of `p`, by evaluation of the symbolic derivatives.
    pub fn jacobian(&self, p: &AmbientPoint) -> Result<CMat> {
        let ch = self.chart(p)?;
        let x = p.coords.as_slice();
        let mut m = CMat::zeros();
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = ch.jac[i][j].eval(x);
            }
        }
        Ok(m)
    }

    /// `dX_p w` without forming the full matrix.
    pub fn jacobian_apply(&self, p: &AmbientPoint, w: &CVec) -> Result<CVec> {
        Ok(self.jacobian(p)? * w)
    }

    /// Homogeneous coordinates (length `dim + 1`) of a projective point.
    pub fn homogeneous_coords(&self, p: &AmbientPoint) -> [Complex64; 4] {
        let mut z = [ZERO; 4];
        match self.kind {
            AmbientKind::Affine => {
                z[0] = ONE;
                for i in 0..self.dim {
                    z[i + 1] = p.coords[i];
                }
            }
            AmbientKind::Projective => {
                let mut a = 0;
                for (j, zj) in z.iter_mut().enumerate().take(self.dim + 1) {
                    if j == p.chart {
                        *zj = ONE;
                    } else {
                        *zj = p.coords[a];
                        a += 1;
                    }
                }
            }
        }
        z
    }

    /// Re-expresses `p` in chart `k` (projective only; affine points are returned as is).
    pub fn to_chart(&self, p: &AmbientPoint, k: usize) -> Result<AmbientPoint> {
        if self.kind == AmbientKind::Affine || p.chart == k {
            return Ok(*p);
        }
        let z = self.homogeneous_coords(p);
        if z[k].norm() == 0.0 {
            return Err(Error::ChartExit { norm: f64::INFINITY });
        }
        let mut out = AmbientPoint { chart: k, coords: CVec::zeros() };
        let mut a = 0;
        for (j, zj) in z.iter().enumerate().take(self.dim + 1) {
            if j != k {
                out.coords[a] = zj / z[k];
                a += 1;
            }
        }
        Ok(out)
    }

    /// Moves a projective point to the chart of its largest homogeneous coordinate.
    pub fn rebase(&self, p: &AmbientPoint) -> AmbientPoint {
        if self.kind == AmbientKind::Affine {
            return *p;
        }
        let z = self.homogeneous_coords(p);
        let k = (0..=self.dim)
            .max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm()))
            .unwrap_or(0);
        self.to_chart(p, k).unwrap_or(*p)
    }

    /// Jacobian of the coordinate change from the chart of `p` to chart `k`, at `p`.
    pub fn transition_jacobian(&self, p: &AmbientPoint, k: usize) -> CMat {
        let n = self.dim;
        if self.kind == AmbientKind::Affine || p.chart == k {
            return CMat::identity();
        }
        let z = self.homogeneous_coords(p);
        // homogeneous index of affine coordinate a in the chart of p
        let src: Vec<usize> = (0..=n).filter(|&j| j != p.chart).collect();
        let dst: Vec<usize> = (0..=n).filter(|&j| j != k).collect();
        let zk = z[k];
        let mut m = CMat::identity();
        for (i, &hi) in dst.iter().enumerate() {
            for (a, &ha) in src.iter().enumerate() {
                // y_i = Z_hi / Z_k, with d Z_j / d x_a = delta(j, ha)
                let dnum = if hi == ha { ONE } else { ZERO };
                let dden = if k == ha { ONE } else { ZERO };
                m[(i, a)] = (dnum * zk - z[hi] * dden) / (zk * zk);
            }
        }
        m
    }

    /// Ambient distance: Euclidean in affine charts, chordal Fubini-Study in projective space.
    pub fn dist(&self, p: &AmbientPoint, q: &AmbientPoint) -> f64 {
        match self.kind {
            AmbientKind::Affine => (p.coords - q.coords).norm(),
            AmbientKind::Projective => {
                let a = self.homogeneous_coords(p);
                let b = self.homogeneous_coords(q);
                let n = self.dim + 1;
                // |a ^ b| / (|a| |b|) by the Lagrange identity; 1 - |<a, b>|^2 cancels below 1e-8
                let (mut wedge, mut na, mut nb) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    na += a[i].norm_sqr();
                    nb += b[i].norm_sqr();
                    for j in i + 1..n {
                        wedge += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
                    }
                }
                (wedge / (na * nb)).sqrt()
            }
        }
    }

    /// Index of and distance to the nearest listed singular point.
    pub fn nearest_singularity(&self, p: &AmbientPoint) -> Option<(usize, f64)> {
        self.singularities
            .iter()
            .enumerate()
            .map(|(i, s)| (i, self.dist(p, &s.location)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn dist_to_singular(&self, p: &AmbientPoint) -> f64 {
        self.nearest_singularity(p).map(|(_, d)| d).unwrap_or(f64::INFINITY)
    }

    /// Conversion factor between chart flow time and the leaf metric, apart from `1/l`.
    ///
    /// Affine charts use the chart field directly (factor 1). In projective space
    /// the factor `(1 + |x|^2)^{(d-1)/2}` makes the metric independent of the chart.
    pub fn chart_weight(&self, p: &AmbientPoint) -> f64 {
        match self.kind {
            AmbientKind::Affine => 1.0,
            AmbientKind::Projective => {
                let s: f64 = (0..self.dim).map(|i| p.coords[i].norm_sqr()).sum();
                (1.0 + s).powf((self.degree as f64 - 1.0) / 2.0)
            }
        }
    }

    /// Distance to the invariant plane measured by the last chart coordinate.
    pub fn plane_offset(&self, p: &AmbientPoint) -> f64 {
        if self.dim < 3 {
            return 0.0;
        }
        match self.kind {
            AmbientKind::Affine => p.coords[2].norm(),
            AmbientKind::Projective => {
                let z = self.homogeneous_coords(p);
                let m = z.iter().take(3).map(|c| c.norm()).fold(0.0, f64::max);
                z[3].norm() / m
            }
        }
    }

    /// The singular point whose declared linear model contains `p`, if any.
    pub fn linear_model_at(&self, p: &AmbientPoint) -> Option<(&SingularPoint, &LinearModel)> {
        self.singularities.iter().find_map(|s| {
            let m = s.linear_model.as_ref()?;
            if s.location.chart == p.chart && (p.coords - s.location.coords).norm() < m.radius {
                Some((s, m))
            } else {
                None
            }
        })
    }

    /// Newton iteration on `X = 0` from `seed`.
    pub fn refine_singularity(&self, seed: AmbientPoint) -> Result<SingularPoint> {
        let mut p = seed;
        let mut x = self.eval(&p)?;
        let mut res = x.norm();
        let mut it = 0;
        while res > self.tol.residual * 1e-2 {
            if it >= self.tol.newton_max_iter {
                if res <= self.tol.residual {
                    break;
                }
                return Err(Error::NoConvergence { iterations: it, residual: res });
            }
            let j = self.jacobian(&p)?;
            let step = solve_block(&j, &(-x), self.dim).ok_or(Error::SingularJacobian)?;
            let mut lambda = 1.0;
            loop {
                let mut trial = p;
                trial.coords += step * Complex64::new(lambda, 0.0);
                let xt = self.eval(&trial)?;
                if xt.norm() < res || lambda < 1e-6 {
                    p = trial;
                    x = xt;
                    break;
                }
                lambda *= 0.5;
            }
            let new_res = x.norm();
            if new_res >= res && new_res > self.tol.residual {
                it = self.tol.newton_max_iter;
            }
            res = new_res;
            it += 1;
        }
        let j = self.jacobian(&p)?;
        let eigenvalues = eigenvalues(&j, self.dim);
        if eigenvalues.iter().all(|e| e.norm() < self.tol.hyperbolic) {
            return Err(Error::SingularJacobian);
        }
        let classification = classify_eigenvalues(&eigenvalues, self.tol.hyperbolic);
        let location = self.rebase(&p);
        Ok(SingularPoint { location, eigenvalues, classification, linear_model: None })
    }

    /// Counts tangencies between the field restricted to the plane coordinates
    /// `(x0, x1)` of chart 0 and the affine line `base + s * dir`.
    pub fn tangency_degree(&self, base: [Complex64; 2], dir: [Complex64; 2]) -> Result<usize> {
        let comps = &self.charts[0].components;
        let deg = comps.iter().take(2).map(|c| c.degree()).max().unwrap_or(0).max(1);
        let n = deg + 1;
        let point = |s: Complex64| {
            let mut p = AmbientPoint::new(0, &[base[0] + s * dir[0], base[1] + s * dir[1], ZERO][..self.dim]);
            p.chart = 0;
            p
        };
        let tang = |s: Complex64| -> Result<Complex64> {
            let x = self.eval(&point(s))?;
            Ok(dir[0] * x[1] - dir[1] * x[0])
        };
        // exact interpolation of a degree <= deg polynomial by the DFT on the unit circle
        let samples: Vec<Complex64> = (0..n)
            .map(|j| tang(Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64)))
            .collect::<Result<_>>()?;
        let mut coeffs: Vec<Complex64> = (0..n)
            .map(|m| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * m) as f64 / n as f64))
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect();
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale < 1e-12 {
            return Err(Error::DegenerateLine);
        }
        while coeffs.last().is_some_and(|c| c.norm() < 1e-9 * scale) {
            coeffs.pop();
        }
        let roots = polynomial_roots(&coeffs);
        for r in &roots {
            let q = point(*r);
            if self.singularities.iter().any(|s| self.dist(&q, &s.location) < 1e-6) {
                return Err(Error::DegenerateLine);
            }
        }
        let mut distinct: Vec<Complex64> = Vec::new();
        for r in roots {
            if distinct.iter().all(|d| (d - r).norm() > 1e-6 * (1.0 + r.norm())) {
                distinct.push(r);
            } else {
                // a repeated root on a line is a non-generic tangency
                return Err(Error::DegenerateLine);
            }
        }
        Ok(distinct.len())
    }

    /// Tangency count for random lines, resampling degenerate ones until two counts agree.
    pub fn generic_tangency_degree<R: Rng>(&self, rng: &mut R) -> Result<usize> {
        let mut last = None;
        for _ in 0..20 {
            let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let base = [c(), c()];
            let dir = [c(), c()];
            match self.tangency_degree(base, dir) {
                Ok(k) => {
                    if last == Some(k) {
                        return Ok(k);
                    }
                    last = Some(k);
                }
                Err(Error::DegenerateLine) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::DegenerateLine)
    }
}

/// Hyperbolic iff every eigenvalue is nonzero and no two are real-colinear.
pub fn classify_eigenvalues(eigs: &[Complex64], tol: f64) -> Classification {
    if eigs.iter().any(|e| e.norm() <= tol) {
        return Classification::NonHyperbolic;
    }
    for i in 0..eigs.len() {
        for j in (i + 1)..eigs.len() {
            if (eigs[i] / eigs[j]).im.abs() <= tol {
                return Classification::NonHyperbolic;
            }
        }
    }
    Classification::Hyperbolic
}

/// Eigenvalues of the leading `dim x dim` block.
pub fn eigenvalues(m: &CMat, dim: usize) -> Vec<Complex64> {
    if dim == 2 {
        let tr = m[(0, 0)] + m[(1, 1)];
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let disc = (tr * tr - 4.0 * det).sqrt();
        return vec![(tr + disc) / 2.0, (tr - disc) / 2.0];
    }
    let d = DMatrix::from_fn(dim, dim, |i, j| m[(i, j)]);
    match d.clone().schur().eigenvalues() {
        Some(v) => v.iter().copied().collect(),
        None => Vec::new(),
    }
}

/// Solves the leading `dim x dim` block system `m x = b`.
pub fn solve_block(m: &CMat, b: &CVec, dim: usize) -> Option<CVec> {
    let mut a = *m;
    let mut rhs = *b;
    for i in dim..3 {
        for j in 0..3 {
            a[(i, j)] = ZERO;
            a[(j, i)] = ZERO;
        }
        a[(i, i)] = ONE;
        rhs[i] = ZERO;
    }
    a.lu().solve(&rhs)
}

/// Inverse of the leading block, identity elsewhere.
pub fn inverse_block(m: &CMat, dim: usize) -> Option<CMat> {
    let mut a = *m;
    for i in dim..3 {
        for j in 0..3 {
            a[(i, j)] = ZERO;
            a[(j, i)] = ZERO;
        }
        a[(i, i)] = ONE;
    }
    a.try_inverse()
}

/// Roots of `sum coeffs[k] s^k` by the Aberth-Ehrlich iteration.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let bound = 1.0 + monic[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| Complex64::from_polar(0.5 * bound, 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4))
        .collect();
    let eval = |s: Complex64| {
        let mut p = ZERO;
        let mut dp = ZERO;
        for c in monic.iter().rev() {
            dp = dp * s + p;
            p = p * s + c;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let sum: Complex64 = (0..deg).filter(|&j| j != i).map(|j| ONE / (z[i] - z[j])).sum();
            let w = ratio / (ONE - ratio * sum);
            z[i] -= w;
            moved = moved.max(w.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}
