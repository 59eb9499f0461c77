//! Sparse complex polynomials in up to four variables.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const MAX_VARS: usize = 4;
const MAX_TABLE_DEGREE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exps: [u8; MAX_VARS],
    pub coeff: Complex64,
}

/// A polynomial `sum c * x^e` with terms kept merged and sorted by exponent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    nvars: usize,
    terms: Vec<Term>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        assert!(nvars <= MAX_VARS, "at most {MAX_VARS} variables");
        Poly { nvars, terms: Vec::new() }
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, Complex64)>) -> Self {
        let mut p = Poly::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent tuple length must equal the variable count");
            let mut exps = [0u8; MAX_VARS];
            for (slot, v) in exps.iter_mut().zip(e) {
                *slot = u8::try_from(v).expect("exponent too large");
            }
            p.terms.push(Term { exps, coeff: c });
        }
        p.normalize();
        p
    }

    /// The monomial `c * x_var`.
    pub fn linear(nvars: usize, var: usize, c: Complex64) -> Self {
        let mut exps = [0u8; MAX_VARS];
        exps[var] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.push(Term { exps, coeff: c });
        p.normalize();
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.exps.iter().map(|&e| e as usize).sum::<usize>())
            .max()
            .unwrap_or(0)
    }

    fn max_exp(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|t| t.exps.iter())
            .map(|&e| e as usize)
            .max()
            .unwrap_or(0)
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| a.exps.cmp(&b.exps));
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.exps == t.exps => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != Complex64::new(0.0, 0.0));
        self.terms = merged;
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        debug_assert!(x.len() >= self.nvars);
        let maxe = self.max_exp();
        if maxe > MAX_TABLE_DEGREE {
            return self
                .terms
                .iter()
                .map(|t| {
                    let mut m = t.coeff;
                    for v in 0..self.nvars {
                        m *= x[v].powi(t.exps[v] as i32);
                    }
                    m
                })
                .sum();
        }
        let mut table = [[Complex64::new(1.0, 0.0); MAX_TABLE_DEGREE + 1]; MAX_VARS];
        for v in 0..self.nvars {
            for k in 1..=maxe {
                table[v][k] = table[v][k - 1] * x[v];
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut m = t.coeff;
            for (v, row) in table.iter().enumerate().take(self.nvars) {
                let e = t.exps[v] as usize;
                if e > 0 {
                    m *= row[e];
                }
            }
            acc += m;
        }
        acc
    }

    /// Exact partial derivative with respect to `var`.
    pub fn derivative(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for t in &self.terms {
            let e = t.exps[var];
            if e == 0 {
                continue;
            }
            let mut exps = t.exps;
            exps[var] -= 1;
            out.terms.push(Term { exps, coeff: t.coeff * e as f64 });
        }
        out.normalize();
        out
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        out.terms.extend_from_slice(&other.terms);
        out.normalize();
        out
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= c;
        }
        out.normalize();
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for a in &self.terms {
            for b in &other.terms {
                let mut exps = [0u8; MAX_VARS];
                for v in 0..MAX_VARS {
                    exps[v] = a.exps[v] + b.exps[v];
                }
                out.terms.push(Term { exps, coeff: a.coeff * b.coeff });
            }
        }
        out.normalize();
        out
    }

    /// Sets variable `var` to one and removes it, shifting later variables down.
    pub fn dehomogenize(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars - 1);
        for t in &self.terms {
            let mut exps = [0u8; MAX_VARS];
            let mut j = 0;
            for v in 0..self.nvars {
                if v != var {
                    exps[j] = t.exps[v];
                    j += 1;
                }
            }
            out.terms.push(Term { exps, coeff: t.coeff });
        }
        out.normalize();
        out
    }

    /// True when every term contains `var`, i.e. the polynomial vanishes on `{x_var = 0}`.
    pub fn divisible_by(&self, var: usize) -> bool {
        self.terms.iter().all(|t| t.exps[var] >= 1)
    }

    /// True when every term has total degree `d`.
    pub fn is_homogeneous(&self, d: usize) -> bool {
        self.terms
            .iter()
            .all(|t| t.exps.iter().map(|&e| e as usize).sum::<usize>() == d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_and_derivative() {
        // x^2 y + 3i y
        let p = Poly::from_terms(2, vec![(vec![2, 1], c(1.0, 0.0)), (vec![0, 1], c(0.0, 3.0))]);
        let v = p.eval(&[c(1.0, 1.0), c(2.0, 0.0)]);
        // (1+i)^2 * 2 + 6i = 4i + 6i
        assert!((v - c(0.0, 10.0)).norm() < 1e-14);
        let dx = p.derivative(0);
        assert!((dx.eval(&[c(1.0, 1.0), c(2.0, 0.0)]) - c(4.0, 4.0)).norm() < 1e-14);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn merging_cancels_terms() {
        let p = Poly::from_terms(1, vec![(vec![1], c(1.0, 0.0)), (vec![1], c(-1.0, 0.0))]);
        assert!(p.is_zero());
    }

    #[test]
    fn dehomogenize_drops_variable() {
        // Z0^2 + Z0 Z1 + Z2^2 with Z0 = 1 -> 1 + x + y^2
        let p = Poly::from_terms(
            3,
            vec![
                (vec![2, 0, 0], c(1.0, 0.0)),
                (vec![1, 1, 0], c(1.0, 0.0)),
                (vec![0, 0, 2], c(1.0, 0.0)),
            ],
        );
        let q = p.dehomogenize(0);
        assert_eq!(q.nvars(), 2);
        let v = q.eval(&[c(2.0, 0.0), c(0.0, 1.0)]);
        assert!((v - c(2.0, 0.0)).norm() < 1e-14);
        assert!(p.is_homogeneous(2));
    }

    #[test]
    fn product_matches_pointwise() {
        let a = Poly::from_terms(2, vec![(vec![1, 0], c(1.0, 2.0)), (vec![0, 2], c(0.5, 0.0))]);
        let b = Poly::from_terms(2, vec![(vec![0, 0], c(3.0, 0.0)), (vec![1, 1], c(0.0, -1.0))]);
        let x = [c(0.3, -0.2), c(-0.7, 0.1)];
        let lhs = a.mul(&b).eval(&x);
        let rhs = a.eval(&x) * b.eval(&x);
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
