//! Closed-form structure functions of the three Toda brackets and the
//! Jacobi-identity certification of the whole pencil.
//!
//! Coefficient read-off from the bracket family, per power of λ:
//!
//! ```text
//! P1 (λ²): {b_k, a_{k−1}} = a_{k−1}           {b_k, a_k} = −a_k
//! P2 (λ¹): {a_k, a_{k+1}} = −2 a_k a_{k+1}    {b_k, b_{k+1}} = −2 a_k
//!          {b_k, a_{k−1}} = 2 b_k a_{k−1}     {b_k, a_k} = −2 b_k a_k
//! P3 (λ⁰): {a_k, a_{k+1}} = −2 a_k a_{k+1} b_{k+1}
//!          {b_k, b_{k+1}} = −a_k (b_k + b_{k+1})
//!          {b_k, a_{k−2}} = a_{k−2} a_{k−1}
//!          {b_k, a_{k−1}} = a_{k−1} (b_k² + a_{k−1})
//!          {b_k, a_k}     = −a_k (b_k² + a_k)
//!          {b_k, a_{k+1}} = −a_k a_{k+1}
//! ```
//!
//! Structure functions are exact polynomials in (a, b), so the Jacobi
//! residual is formed by analytic polynomial differentiation and stays at
//! roundoff for a genuine Poisson bracket.

use std::collections::BTreeMap;

use super::poly::Poly;
use super::{FMState, Label};

/// Flatten an FM state into the polynomial variable order a_0..a_{N-1},
/// b_0..b_{N-1}.
pub fn state_vector(s: &FMState) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * s.n());
    v.extend_from_slice(&s.a);
    v.extend_from_slice(&s.b);
    v
}

/// Antisymmetric table of bracket polynomials over the 2N flat variables.
#[derive(Debug, Clone, Default)]
pub struct StructureTable {
    n: usize,
    /// Keyed by (min, max) flat index; the stored polynomial is {z_min, z_max}.
    entries: BTreeMap<(usize, usize), Poly>,
}

impl StructureTable {
    pub fn new(n: usize) -> Self {
        StructureTable {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn insert(&mut self, p: Label, q: Label, poly: Poly) {
        let (i, j) = (p.flat(self.n), q.flat(self.n));
        let (key, oriented) = if i <= j {
            ((i, j), poly)
        } else {
            ((j, i), poly.scale(-1.0))
        };
        let slot = self.entries.entry(key).or_default();
        *slot = slot.add(&oriented);
    }

    /// {z_i, z_j} as a polynomial, respecting antisymmetry.
    pub fn bracket_poly_flat(&self, i: usize, j: usize) -> Poly {
        if i == j {
            return Poly::zero();
        }
        let (key, sign) = if i < j { ((i, j), 1.0) } else { ((j, i), -1.0) };
        match self.entries.get(&key) {
            Some(p) => p.scale(sign),
            None => Poly::zero(),
        }
    }

    pub fn bracket_poly(&self, p: Label, q: Label) -> Poly {
        self.bracket_poly_flat(p.flat(self.n), q.flat(self.n))
    }

    pub fn eval_entry(&self, p: Label, q: Label, vars: &[f64]) -> f64 {
        self.eval_flat(p.flat(self.n), q.flat(self.n), vars)
    }

    fn eval_flat(&self, i: usize, j: usize, vars: &[f64]) -> f64 {
        if i == j {
            return 0.0;
        }
        let (key, sign) = if i < j { ((i, j), 1.0) } else { ((j, i), -1.0) };
        match self.entries.get(&key) {
            Some(p) => sign * p.eval(vars),
            None => 0.0,
        }
    }

    /// Entrywise linear combination of tables over the same variables.
    pub fn combine(parts: &[(f64, &StructureTable)]) -> StructureTable {
        let n = parts[0].1.n;
        let mut out = StructureTable::new(n);
        for (w, table) in parts {
            for (key, poly) in &table.entries {
                let slot = out.entries.entry(*key).or_default();
                *slot = slot.add(&poly.scale(*w));
            }
        }
        out
    }
}

/// The three λ-coefficient tables.
#[derive(Debug, Clone)]
pub struct GradedTables {
    pub p1: StructureTable,
    pub p2: StructureTable,
    pub p3: StructureTable,
}

fn a(n: usize, k: isize) -> Poly {
    Poly::var(crate::curve::wrap(k, n))
}

fn b(n: usize, k: isize) -> Poly {
    Poly::var(n + crate::curve::wrap(k, n))
}

/// Build P1, P2, P3 for site count n.
pub fn graded_tables(n: usize) -> GradedTables {
    let mut p1 = StructureTable::new(n);
    let mut p2 = StructureTable::new(n);
    let mut p3 = StructureTable::new(n);
    for k in 0..n as isize {
        let bk = Label::B(crate::curve::wrap(k, n));
        let ak = Label::A(crate::curve::wrap(k, n));
        let akp1 = Label::A(crate::curve::wrap(k + 1, n));
        let bkp1 = Label::B(crate::curve::wrap(k + 1, n));
        let akm1 = Label::A(crate::curve::wrap(k - 1, n));
        let akm2 = Label::A(crate::curve::wrap(k - 2, n));

        p1.insert(bk, akm1, a(n, k - 1));
        p1.insert(bk, ak, a(n, k).scale(-1.0));

        p2.insert(ak, akp1, a(n, k).mul(&a(n, k + 1)).scale(-2.0));
        p2.insert(bk, bkp1, a(n, k).scale(-2.0));
        p2.insert(bk, akm1, b(n, k).mul(&a(n, k - 1)).scale(2.0));
        p2.insert(bk, ak, b(n, k).mul(&a(n, k)).scale(-2.0));

        p3.insert(
            ak,
            akp1,
            a(n, k).mul(&a(n, k + 1)).mul(&b(n, k + 1)).scale(-2.0),
        );
        p3.insert(
            bk,
            bkp1,
            a(n, k).mul(&b(n, k).add(&b(n, k + 1))).scale(-1.0),
        );
        p3.insert(bk, akm2, a(n, k - 2).mul(&a(n, k - 1)));
        p3.insert(
            bk,
            akm1,
            a(n, k - 1).mul(&b(n, k).mul(&b(n, k)).add(&a(n, k - 1))),
        );
        p3.insert(
            bk,
            ak,
            a(n, k)
                .mul(&b(n, k).mul(&b(n, k)).add(&a(n, k)))
                .scale(-1.0),
        );
        p3.insert(bk, akp1, a(n, k).mul(&a(n, k + 1)).scale(-1.0));
    }
    GradedTables { p1, p2, p3 }
}

/// The full bracket at spectral parameter λ: P3 + λ P2 + λ² P1.
pub fn full_table(n: usize, lambda: f64) -> StructureTable {
    let g = graded_tables(n);
    StructureTable::combine(&[(1.0, &g.p3), (lambda, &g.p2), (lambda * lambda, &g.p1)])
}

/// Max |{f,{g,h}} + {g,{h,f}} + {h,{f,g}}| over coordinate triples at the
/// given state. Exhaustive over all C(2N, 3) triples when that count does
/// not exceed `trials`, otherwise a deterministic pseudo-random sample of
/// `trials` triples.
pub fn jacobi_residual(table: &StructureTable, s: &FMState, trials: usize) -> f64 {
    let n2 = 2 * table.n();
    let vars = state_vector(s);
    let total = n2 * (n2 - 1) * (n2 - 2) / 6;
    let mut worst = 0.0f64;
    if total <= trials {
        for i in 0..n2 {
            for j in (i + 1)..n2 {
                for k in (j + 1)..n2 {
                    worst = worst.max(jacobi_term(table, i, j, k, &vars).abs());
                }
            }
        }
    } else {
        let mut state = 0x51ab_c0ff_ee12_3457u64;
        let mut next = move || {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            (z ^ (z >> 31)) as usize
        };
        let mut done = 0;
        while done < trials {
            let i = next() % n2;
            let j = next() % n2;
            let k = next() % n2;
            if i == j || j == k || i == k {
                continue;
            }
            worst = worst.max(jacobi_term(table, i, j, k, &vars).abs());
            done += 1;
        }
    }
    worst
}

/// {z_i, {z_j, z_k}} + cyclic, contracted through the table.
fn jacobi_term(table: &StructureTable, i: usize, j: usize, k: usize, vars: &[f64]) -> f64 {
    let outer = |p: usize, q: usize, r: usize| -> f64 {
        let inner = table.bracket_poly_flat(q, r);
        let mut sum = 0.0;
        for l in inner.support() {
            let dl = inner.diff(l).eval(vars);
            if dl != 0.0 {
                sum += table.eval_flat(p, l, vars) * dl;
            }
        }
        sum
    };
    outer(i, j, k) + outer(j, k, i) + outer(k, i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_fm_state;

    #[test]
    fn each_bracket_satisfies_jacobi() {
        for seed in 0..10 {
            let s = random_fm_state(6, 0.0, seed);
            let g = graded_tables(6);
            let r1 = jacobi_residual(&g.p1, &s, 4096);
            let r2 = jacobi_residual(&g.p2, &s, 4096);
            let r3 = jacobi_residual(&g.p3, &s, 4096);
            assert!(r1 < 1e-10, "P1 seed {seed}: {r1:.3e}");
            assert!(r2 < 1e-9, "P2 seed {seed}: {r2:.3e}");
            assert!(r3 < 1e-9, "P3 seed {seed}: {r3:.3e}");
        }
    }

    #[test]
    fn pencil_members_satisfy_jacobi() {
        let g = graded_tables(5);
        for t in [0.5, 2.0] {
            let pencil =
                StructureTable::combine(&[(1.0, &g.p1), (t, &g.p2), (t * t, &g.p3)]);
            for seed in 0..5 {
                let s = random_fm_state(5, 0.0, 100 + seed);
                let r = jacobi_residual(&pencil, &s, 4096);
                assert!(r < 1e-9, "pencil t={t} seed {seed}: {r:.3e}");
            }
        }
    }

    #[test]
    fn full_lambda_table_satisfies_jacobi() {
        for lambda in [0.0, 1.0, -1.0, 3.7] {
            let table = full_table(6, lambda);
            let s = random_fm_state(6, lambda, 7);
            let r = jacobi_residual(&table, &s, 4096);
            assert!(r < 1e-9, "λ={lambda}: {r:.3e}");
        }
    }

    #[test]
    fn broken_table_fails_jacobi() {
        // Flip one sign in P3; the checker has to notice.
        let mut g = graded_tables(6);
        let poly = g.p3.bracket_poly(Label::B(0), Label::A(1));
        g.p3.insert(Label::B(0), Label::A(1), poly.scale(-2.0)); // net effect: sign flip
        let s = random_fm_state(6, 0.0, 3);
        let r = jacobi_residual(&g.p3, &s, 4096);
        assert!(r > 1e-3, "sabotaged table still passed: {r:.3e}");
    }

    #[test]
    fn sampled_mode_matches_exhaustive_bound() {
        let g = graded_tables(12);
        let s = random_fm_state(12, 0.0, 9);
        // C(24,3) = 2024 > 500, so this exercises the sampling path.
        let r = jacobi_residual(&g.p3, &s, 500);
        assert!(r < 1e-9, "sampled residual {r:.3e}");
    }
}
