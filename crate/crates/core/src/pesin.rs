//! Upper-triangular cocycles, adapted (Lyapunov) norms and contraction of composed maps.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub type C2 = Vector2<Complex64>;
pub type M2 = Matrix2<Complex64>;

/// Tail threshold, relative to the partial sum, for truncating the Lyapunov-norm series.
pub const SERIES_RTOL: f64 = 1e-12;

/// The sequence `A_n = [[a_n, c_n], [0, b_n]]`, `n = 1..=len`, with its declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularCocycle {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
    pub m_bound: f64,
    pub lambda: f64,
    pub mu: f64,
    pub eps: f64,
    /// Allowed gap between the Cesaro means of `log|a|`, `log|b|` and `-lambda`, `-mu`.
    pub mean_tol: f64,
}

/// Operator norm of a 2x2 complex matrix.
pub fn op_norm(m: &M2) -> f64 {
    let t: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let d = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm_sqr();
    ((t + (t * t - 4.0 * d).max(0.0).sqrt()) / 2.0).sqrt()
}

fn vnorm(u: &C2) -> f64 {
    (u[0].norm_sqr() + u[1].norm_sqr()).sqrt()
}

impl TriangularCocycle {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.lambda.min(self.mu)
    }

    /// `A_n`, one-based.
    pub fn matrix(&self, n: usize) -> M2 {
        let i = n - 1;
        M2::new(self.a[i], self.c[i], Complex64::new(0.0, 0.0), self.b[i])
    }

    /// Constant diagonal-plus-offdiagonal sequence.
    pub fn constant(a: Complex64, b: Complex64, c: Complex64, len: usize, eps: f64) -> Self {
        TriangularCocycle {
            a: vec![a; len],
            b: vec![b; len],
            c: vec![c; len],
            m_bound: c.norm(),
            lambda: -a.norm().ln(),
            mu: -b.norm().ln(),
            eps,
            mean_tol: 1e-12,
        }
    }

    /// Random sequence with `log|a_n| ~ N(-lambda, spread)`, `log|b_n| ~ N(-mu, spread)`,
    /// uniform phases and `c_n` uniform in the disk of radius `m_bound`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize, lambda: f64, mu: f64, m_bound: f64, eps: f64, spread: f64) -> Self {
        let la = Normal::new(-lambda, spread).expect("finite spread");
        let lb = Normal::new(-mu, spread).expect("finite spread");
        let phase = |rng: &mut R| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        let mut a = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        let mut c = Vec::with_capacity(len);
        for _ in 0..len {
            a.push(phase(rng) * la.sample(rng).exp());
            b.push(phase(rng) * lb.sample(rng).exp());
            c.push(phase(rng) * m_bound * rng.random::<f64>().sqrt());
        }
        let n = len as f64;
        TriangularCocycle { a, b, c, m_bound, lambda, mu, eps, mean_tol: 4.0 * spread / n.sqrt() + 1e-12 }
    }

    /// The first `len` terms, with the mean tolerance widened like `1 / sqrt(len)`.
    pub fn truncated(&self, len: usize) -> Self {
        let mut t = self.clone();
        if len > 0 && len < self.len() {
            t.mean_tol *= (self.len() as f64 / len as f64).sqrt();
        }
        t.a.truncate(len);
        t.b.truncate(len);
        t.c.truncate(len);
        t
    }

    pub fn check_hypotheses(&self) -> Result<()> {
        if self.is_empty() || self.b.len() != self.len() || self.c.len() != self.len() {
            return Err(Error::HypothesisViolation("sequence lengths differ or are zero".into()));
        }
        if !(self.eps > 0.0 && self.eps < self.alpha()) {
            return Err(Error::HypothesisViolation(format!("need 0 < eps < alpha, got eps = {}", self.eps)));
        }
        if let Some(k) = self.c.iter().position(|c| c.norm() > self.m_bound) {
            return Err(Error::HypothesisViolation(format!("|c_{}| exceeds M = {}", k + 1, self.m_bound)));
        }
        let n = self.len() as f64;
        let ma = self.a.iter().map(|z| z.norm().ln()).sum::<f64>() / n;
        let mb = self.b.iter().map(|z| z.norm().ln()).sum::<f64>() / n;
        if (ma + self.lambda).abs() > self.mean_tol || (mb + self.mu).abs() > self.mean_tol {
            return Err(Error::HypothesisViolation(format!("Cesaro means {ma:.4}, {mb:.4} are off the declared exponents")));
        }
        Ok(())
    }
}

/// Smallest `C` with `|A_{m+n} ... A_{m+1}| <= C e^{eps m} e^{-(alpha - eps) n}` over the horizon.
pub fn lemma15_bound(tc: &TriangularCocycle, eps: f64) -> Result<f64> {
    Ok(*lemma15_profile(tc, eps)?.last().expect("nonempty cocycle"))
}

/// The constant of [`lemma15_bound`] restricted to `m + n <= h`, for every horizon `h = 1..=len`.
pub fn lemma15_profile(tc: &TriangularCocycle, eps: f64) -> Result<Vec<f64>> {
    let tc = TriangularCocycle { eps, ..tc.clone() };
    tc.check_hypotheses()?;
    let rate = tc.alpha() - eps;
    let len = tc.len();
    let mut best = vec![1.0f64; len + 1];
    for m in 0..len {
        // the product is kept at unit norm with its log-scale tracked apart, since raw
        // products underflow long before the weights overflow
        let mut p = M2::identity();
        let mut log_scale = 0.0;
        for n in 1..=(len - m) {
            p = tc.matrix(m + n) * p;
            let s = op_norm(&p);
            if s == 0.0 {
                break;
            }
            p /= Complex64::from(s);
            log_scale += s.ln();
            let c = (log_scale + rate * n as f64 - eps * m as f64).exp();
            best[m + n] = best[m + n].max(c);
        }
    }
    let mut out = Vec::with_capacity(len);
    let mut c = 1.0f64;
    for b in &best[1..] {
        c = c.max(*b);
        out.push(c);
    }
    Ok(out)
}

/// `|u|'_m = sum_k |A_{m+k-1} ... A_m u| e^{(alpha - eps) k}`, truncated at relative tail 1e-12.
pub fn lyapunov_norm(tc: &TriangularCocycle, m: usize, u: &C2) -> Result<f64> {
    let rate = tc.alpha() - tc.eps;
    let mut v = *u;
    let mut sum = vnorm(&v);
    if sum == 0.0 {
        return Ok(0.0);
    }
    let mut k = 0usize;
    loop {
        if m + k > tc.len() {
            return Err(Error::Divergence);
        }
        v = tc.matrix(m + k) * v;
        k += 1;
        let term = vnorm(&v) * (rate * k as f64).exp();
        sum += term;
        if term <= SERIES_RTOL * sum {
            return Ok(sum);
        }
    }
}

/// Upper bound for `sup |u|'_m / |u|`, from operator norms of the window products.
pub fn lyapunov_norm_constant(tc: &TriangularCocycle, m: usize) -> Result<f64> {
    let rate = tc.alpha() - tc.eps;
    let mut p = M2::identity();
    let mut sum = 1.0;
    let mut k = 0usize;
    loop {
        if m + k > tc.len() {
            return Err(Error::Divergence);
        }
        p = tc.matrix(m + k) * p;
        k += 1;
        let term = op_norm(&p) * (rate * k as f64).exp();
        sum += term;
        if term <= SERIES_RTOL * sum {
            return Ok(sum);
        }
    }
}

/// `f(u) = A u + (q_0(u), q_1(u))` with `q_i(u) = q[i][0] u0^2 + q[i][1] u0 u1 + q[i][2] u1^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap {
    pub a: M2,
    pub q: [[Complex64; 3]; 2],
}

impl QuadraticMap {
    pub fn linear(a: M2) -> Self {
        QuadraticMap { a, q: [[Complex64::new(0.0, 0.0); 3]; 2] }
    }

    pub fn apply(&self, u: &C2) -> C2 {
        let quad = |c: &[Complex64; 3]| c[0] * u[0] * u[0] + c[1] * u[0] * u[1] + c[2] * u[1] * u[1];
        self.a * u + C2::new(quad(&self.q[0]), quad(&self.q[1]))
    }

    /// Upper bound for the norm of the second derivative as a bilinear map.
    pub fn second_derivative_bound(&self) -> f64 {
        let row = |c: &[Complex64; 3]| (4.0 * c[0].norm_sqr() + 2.0 * c[1].norm_sqr() + 4.0 * c[2].norm_sqr()).sqrt();
        (row(&self.q[0]).powi(2) + row(&self.q[1]).powi(2)).sqrt()
    }

    /// Random quadratic part scaled so that `second_derivative_bound() = m`.
    pub fn with_random_quadratic<R: Rng + ?Sized>(a: M2, m: f64, rng: &mut R) -> Self {
        let mut q = [[Complex64::new(0.0, 0.0); 3]; 2];
        for row in &mut q {
            for c in row.iter_mut() {
                *c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        let mut f = QuadraticMap { a, q };
        let s = m / f.second_derivative_bound();
        for row in &mut f.q {
            for c in row.iter_mut() {
                *c *= s;
            }
        }
        f
    }
}

fn sphere_samples(theta: f64) -> Vec<C2> {
    let grid = 16;
    let mut out = Vec::with_capacity((grid + 1) * grid);
    for i in 0..=grid {
        let t = std::f64::consts::FRAC_PI_2 * i as f64 / grid as f64;
        for j in 0..grid {
            // only the relative phase matters for the image norm of a linear map
            let phase = std::f64::consts::TAU * j as f64 / grid as f64;
            out.push(C2::new(Complex64::new(theta * t.cos(), 0.0), Complex64::from_polar(theta * t.sin(), phase)));
        }
    }
    out
}

fn top_singular_direction(p: &M2, theta: f64) -> C2 {
    let svd = p.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let (k, _) = svd.singular_values.argmax();
    C2::new(vt[(k, 0)].conj(), vt[(k, 1)].conj()) * Complex64::from(theta)
}

/// Image radii of the sphere of radius `theta` under `f_n o ... o f_1` for `n = 1..=maps.len()`.
///
/// Samples a grid on the sphere plus, for every `n`, the top singular direction of the
/// composed linear parts, so purely linear maps are measured exactly.
pub fn pesin_compose_all(maps: &[QuadraticMap], theta: f64) -> Vec<f64> {
    let n = maps.len();
    let mut starts = sphere_samples(theta);
    let mut p = M2::identity();
    for f in maps {
        p = f.a * p;
        starts.push(top_singular_direction(&p, theta));
    }
    let mut radii = vec![0.0f64; n];
    for u0 in starts {
        let mut u = u0;
        for (k, f) in maps.iter().enumerate() {
            u = f.apply(&u);
            radii[k] = radii[k].max(vnorm(&u));
        }
    }
    radii
}

/// Image radius of the sphere of radius `theta` under `f_n o ... o f_1`.
pub fn pesin_compose(maps: &[QuadraticMap], theta: f64, n: usize) -> f64 {
    if n == 0 {
        return theta;
    }
    pesin_compose_all(&maps[..n], theta)[n - 1]
}

/// Radius `rho` and constant `C` such that the maps `f_m = A_m + O(|u|^2)` with second
/// derivatives bounded by `m_bound` send `B(0, theta)`, `theta <= rho`, into
/// `B(0, C e^{-(alpha - 2 eps) n} theta)` for all `n <= steps`.
pub fn pesin_radius(tc: &TriangularCocycle, m_bound: f64, steps: usize) -> Result<(f64, f64)> {
    let a = tc.alpha();
    let gain = 2.0 * ((-(a - 2.0 * tc.eps)).exp() - (-(a - tc.eps)).exp()) / m_bound;
    let k0 = lyapunov_norm_constant(tc, 1)?;
    let mut rho = f64::INFINITY;
    for m in 0..steps {
        let k_next = lyapunov_norm_constant(tc, m + 2)?;
        rho = rho.min(gain / (k_next * k0 * (-(a - 2.0 * tc.eps) * m as f64).exp()));
    }
    Ok((rho, k0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brownian::path_rng;
    use proptest::prelude::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn op_norm_matches_svd() {
        let m = M2::new(c(1.0, 2.0), c(-0.5, 0.3), c(0.0, 0.0), c(0.2, -0.7));
        let s = m.svd(false, false).singular_values;
        assert_relative_eq!(op_norm(&m), s[0], epsilon = 1e-12);
    }

    #[test]
    fn diagonal_cocycle_has_unit_constant() {
        let tc = TriangularCocycle::constant(c(0.5, 0.0), c(1.0 / 3.0, 0.0), c(0.0, 0.0), 60, 1e-9);
        assert_relative_eq!(lemma15_bound(&tc, 1e-9).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn profile_matches_truncated_bounds() {
        let mut rng = path_rng(4, 0);
        let mut tc = TriangularCocycle::random(&mut rng, 120, 0.8, 1.0, 1.0, 0.2, 0.3);
        tc.mean_tol = 1.0;
        let profile = lemma15_profile(&tc, 0.2).unwrap();
        assert!(profile.windows(2).all(|w| w[1] >= w[0]));
        for h in [1, 7, 60, 120] {
            let direct = lemma15_bound(&tc.truncated(h), 0.2).unwrap();
            assert_relative_eq!(profile[h - 1], direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn long_diagonal_products_have_unit_constant() {
        // |A_n ... A_1| = 4^{-n} leaves the normal doubles at n = 511
        let tc = TriangularCocycle::constant(c(0.25, 0.0), c(0.25, 0.0), c(0.0, 0.0), 800, 0.1);
        let profile = lemma15_profile(&tc, 0.1).unwrap();
        assert!(profile.iter().all(|c| *c == 1.0));
    }

    #[test]
    fn unbounded_offdiagonal_is_rejected() {
        let mut tc = TriangularCocycle::constant(c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0), 20, 0.1);
        for (n, x) in tc.c.iter_mut().enumerate() {
            *x = c((n + 1) as f64, 0.0);
        }
        assert!(matches!(lemma15_bound(&tc, 0.1), Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn geometric_lyapunov_norm() {
        // alpha - eps = log(4/3) with A = I/2 gives sum (2/3)^k = 3
        let eps = 2f64.ln() - (4.0f64 / 3.0).ln();
        let tc = TriangularCocycle::constant(c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0), 200, eps);
        let u = C2::new(c(0.3, 0.4), c(-1.2, 0.0));
        assert_relative_eq!(lyapunov_norm(&tc, 1, &u).unwrap(), 3.0 * vnorm(&u), epsilon = 1e-10);
        let short = tc.truncated(10);
        assert!(matches!(lyapunov_norm(&short, 1, &u), Err(Error::Divergence)));
    }

    #[test]
    fn random_constant_is_stable_under_doubling() {
        let mut rng = path_rng(1, 0);
        for _ in 0..20 {
            let tc = TriangularCocycle::random(&mut rng, 400, 1.0, 1.0, 1.0, 0.2, 0.3);
            let c1 = lemma15_bound(&tc.truncated(200), 0.2).unwrap();
            let c2 = lemma15_bound(&tc, 0.2).unwrap();
            assert!(c1.is_finite() && c2 >= c1 && c2 <= 2.0 * c1, "{c1} {c2}");
        }
    }

    #[test]
    fn linear_composition_is_product_norm() {
        let mut rng = path_rng(2, 0);
        let tc = TriangularCocycle::random(&mut rng, 10, 0.5, 0.7, 1.0, 0.1, 0.2);
        let maps: Vec<_> = (1..=10).map(|n| QuadraticMap::linear(tc.matrix(n))).collect();
        let mut p = M2::identity();
        for n in 1..=10 {
            p = tc.matrix(n) * p;
        }
        assert_relative_eq!(pesin_compose(&maps, 0.5, 10), op_norm(&p) * 0.5, max_relative = 1e-12);
    }

    #[test]
    fn quadratic_perturbations_contract_inside_rho() {
        let mut rng = path_rng(3, 0);
        let n = 30;
        for _ in 0..100 {
            let tc = TriangularCocycle::random(&mut rng, 400, 1.0, 1.2, 1.0, 0.2, 0.3);
            let m = 2.0;
            let maps: Vec<_> = (1..=n).map(|k| QuadraticMap::with_random_quadratic(tc.matrix(k), m, &mut rng)).collect();
            let (rho, cst) = pesin_radius(&tc, m, n).unwrap();
            let radii = pesin_compose_all(&maps, rho);
            let rate = tc.alpha() - 2.0 * tc.eps;
            for (k, r) in radii.iter().enumerate() {
                assert!(*r <= cst * (-rate * (k + 1) as f64).exp() * rho * (1.0 + 1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn one_step_contraction(seed in 0u64..1000, m in 1usize..50, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let mut rng = path_rng(seed, 1);
            let tc = TriangularCocycle::random(&mut rng, 600, 0.8, 1.1, 1.0, 0.25, 0.3);
            let u = C2::new(Complex64::new(re, im), Complex64::new(0.5, -re));
            let lhs = lyapunov_norm(&tc, m + 1, &(tc.matrix(m) * u)).unwrap();
            let rhs = (-(tc.alpha() - tc.eps)).exp() * lyapunov_norm(&tc, m, &u).unwrap();
            prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
        }
    }
}
