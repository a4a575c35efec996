//! Sparse multivariate polynomials over the Flaschka-Manakov variables.
//!
//! Variables are flat-indexed: 0..N are a_0..a_{N-1}, N..2N are b_0..b_{N-1}.
//! Structure functions of the Toda brackets are short polynomials in these
//! variables, so exact differentiation keeps the Jacobi residual at roundoff.

use std::collections::BTreeMap;

/// Exponent list of one monomial, sorted by variable index, powers ≥ 1.
type Exponents = Vec<(usize, u32)>;

/// A polynomial as a map monomial → coefficient. Zero coefficients are pruned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<Exponents, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Poly::zero();
        p.add_term(&[], c);
        p
    }

    /// The variable with the given flat index.
    pub fn var(idx: usize) -> Self {
        let mut p = Poly::zero();
        p.add_term(&[(idx, 1)], 1.0);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: &[(usize, u32)], coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let mut key: Exponents = exps.to_vec();
        key.sort_unstable();
        let entry = self.terms.entry(key.clone()).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (exps, c) in &other.terms {
            out.add_term(exps, *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero();
        for (exps, c) in &self.terms {
            out.add_term(exps, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let mut exps: BTreeMap<usize, u32> = ea.iter().copied().collect();
                for (idx, pow) in eb {
                    *exps.entry(*idx).or_insert(0) += pow;
                }
                let merged: Exponents = exps.into_iter().collect();
                out.add_term(&merged, ca * cb);
            }
        }
        out
    }

    /// Partial derivative with respect to the variable with flat index `idx`.
    pub fn diff(&self, idx: usize) -> Poly {
        let mut out = Poly::zero();
        for (exps, c) in &self.terms {
            if let Some(pos) = exps.iter().position(|(i, _)| *i == idx) {
                let (_, pow) = exps[pos];
                let mut reduced = exps.clone();
                if pow == 1 {
                    reduced.remove(pos);
                } else {
                    reduced[pos].1 = pow - 1;
                }
                out.add_term(&reduced, c * pow as f64);
            }
        }
        out
    }

    /// Evaluate at a flat variable vector.
    pub fn eval(&self, vars: &[f64]) -> f64 {
        let mut total = 0.0;
        for (exps, c) in &self.terms {
            let mut term = *c;
            for (idx, pow) in exps {
                term *= vars[*idx].powi(*pow as i32);
            }
            total += term;
        }
        total
    }

    /// Variables actually appearing in the polynomial.
    pub fn support(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self
            .terms
            .keys()
            .flat_map(|exps| exps.iter().map(|(i, _)| *i))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    }
}
