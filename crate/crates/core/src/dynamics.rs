//! The first Toda flow on both sides of the spectral map, fixed-step
//! integration, and conserved quantities from the transfer-matrix trace.
//!
//! The reference dynamics is the Hamiltonian flow of H₂ = Σ (b_k²/2 + a_k)
//! under the λ²-coefficient bracket:
//!
//! ```text
//! ȧ_k = a_k (b_k − b_{k+1})        ḃ_k = a_{k−1} − a_k
//! ```
//!
//! On the curve side the same flow is realized by solving a per-state linear
//! system for (α, β): the induced FM rates are linear in the flow
//! coefficients, with a three-dimensional kernel coming from the unimodular
//! group action that the spectral map forgets.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::bracket::{canonical_bracket, fm_map, grad_g, grad_u, FMState, PhaseGradient};
use crate::curve::{compute_invariants, CurveState, DetInvariants, Tolerances};
use crate::error::{Error, Result};
use crate::flow::{curve_velocity, g_dot, u_dot, FlowCoefficients};

/// ȧ_k = a_k (b_k − b_{k+1}), ḃ_k = a_{k−1} − a_k, indices mod N.
pub fn toda_vector_field_ab(s: &FMState) -> (Vec<f64>, Vec<f64>) {
    let n = s.n() as isize;
    let da = (0..n)
        .map(|k| s.a_at(k) * (s.b_at(k) - s.b_at(k + 1)))
        .collect();
    let db = (0..n).map(|k| s.a_at(k - 1) - s.a_at(k)).collect();
    (da, db)
}

/// Chain-rule rates of (a_k, b_k) induced by a curve flow: ȧ = −2a ġ/g and
/// ḃ = (u̇ − β (ġ_{k−1} g_k + g_{k−1} ġ_k)) / (g_{k−1} g_k), with β the λ⁰
/// part of b (the explicit −λ shift is constant in time).
pub fn fm_rates(inv: &DetInvariants, f: &FlowCoefficients) -> Result<(Vec<f64>, Vec<f64>)> {
    let gd = g_dot(inv, f);
    let ud = u_dot(inv, f)?;
    let n = inv.n();
    let mut da = Vec::with_capacity(n);
    let mut db = Vec::with_capacity(n);
    for k in 0..n as isize {
        let i = crate::curve::wrap(k, n);
        let im = crate::curve::wrap(k - 1, n);
        let g = inv.g_at(k);
        let gm = inv.g_at(k - 1);
        let beta = inv.u_at(k) / (gm * g);
        da.push(-2.0 * gd[i] / (g * g * g));
        db.push((ud[i] - beta * (gd[im] * g + gm * gd[i])) / (gm * g));
    }
    Ok((da, db))
}

/// A solved curve-side realization of the Toda flow.
#[derive(Debug, Clone)]
pub struct TodaCurveFlow {
    pub coeffs: FlowCoefficients,
    /// Numerical rank of the 2N×2N response matrix. The spectral map has a
    /// three-dimensional fiber, so 2N−3 is the generic value.
    pub rank: usize,
    /// ‖M w − rhs‖_∞ of the minimum-norm solution.
    pub residual: f64,
}

/// Find flow coefficients whose induced FM rates equal the Toda field at
/// this curve. Rank-deficiency is expected (the fiber direction moves the
/// curve without moving (a, b)); the minimum-norm solution is returned.
pub fn toda_flow_on_curve(c: &CurveState, lambda: f64) -> Result<TodaCurveFlow> {
    let n = c.n();
    if n <= 3 {
        return Err(Error::UnsupportedSize { n });
    }
    let inv = compute_invariants(c);
    let tol = Tolerances::for_curve(c);
    inv.require_g(tol.eps_g)?;
    inv.require_u(tol.eps_u)?;

    let s = fm_map(c, lambda)?;
    let (da, db) = toda_vector_field_ab(&s);

    // Response matrix: column j is the FM rate of the j-th unit flow.
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let mut f = FlowCoefficients::zero(n);
        if j < n {
            f.alpha[j] = 1.0;
        } else {
            f.beta[j - n] = 1.0;
        }
        let (ra, rb) = fm_rates(&inv, &f)?;
        for i in 0..n {
            m[(i, j)] = ra[i];
            m[(n + i, j)] = rb[i];
        }
    }

    let mut rhs = DVector::zeros(2 * n);
    for i in 0..n {
        rhs[i] = da[i];
        rhs[n + i] = db[i];
    }

    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = sigma_max * 1e-8;
    let rank = svd.rank(eps);
    let sol = svd
        .solve(&rhs, eps)
        .map_err(|_| Error::SolverFailure {
            residual: f64::INFINITY,
            tolerance: 1e-10,
        })?;

    let residual = (&m * &sol - &rhs).amax();
    let tolerance = 1e-10 * rhs.amax().max(1.0);
    if residual > tolerance {
        return Err(Error::SolverFailure {
            residual,
            tolerance,
        });
    }

    let alpha = sol.as_slice()[..n].to_vec();
    let beta = sol.as_slice()[n..].to_vec();
    Ok(TodaCurveFlow {
        coeffs: FlowCoefficients { alpha, beta },
        rank,
        residual,
    })
}

/// States the fixed-step integrator can advance: anything that round-trips
/// through a flat coordinate vector. `from_flat` keeps non-coordinate data
/// (site count, spectral parameter) from the template.
pub trait FlowState: Clone {
    fn as_flat(&self) -> Vec<f64>;
    fn from_flat(&self, flat: &[f64]) -> Self;
}

impl FlowState for CurveState {
    fn as_flat(&self) -> Vec<f64> {
        let mut v = self.x().to_vec();
        v.extend_from_slice(self.y());
        v
    }

    fn from_flat(&self, flat: &[f64]) -> Self {
        let n = self.n();
        CurveState::new(flat[..n].to_vec(), flat[n..].to_vec()).expect("shape preserved")
    }
}

impl FlowState for FMState {
    fn as_flat(&self) -> Vec<f64> {
        let mut v = self.a.clone();
        v.extend_from_slice(&self.b);
        v
    }

    fn from_flat(&self, flat: &[f64]) -> Self {
        let n = self.n();
        FMState {
            a: flat[..n].to_vec(),
            b: flat[n..].to_vec(),
            lambda: self.lambda,
        }
    }
}

/// Snapshots of an integrated flow at t = 0, dt, ..., with optional
/// conserved-quantity values per snapshot.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub invariant_log: Vec<Vec<f64>>,
}

impl<S> Trajectory<S> {
    /// Fill the invariant log by evaluating `f` on every snapshot.
    pub fn log_invariants(&mut self, f: impl Fn(&S) -> Vec<f64>) {
        self.invariant_log = self.states.iter().map(&f).collect();
    }
}

/// Classical fourth-order Runge-Kutta with a fixed step. Snapshots at
/// t = 0, dt, ..., floor(t_end/dt)·dt. Field failures (degeneracy guards,
/// solver failures on intermediate states) surface as `DegeneracyCrossing`
/// tagged with the step's start time.
pub fn integrate<S, F>(s0: &S, field: F, t_end: f64, dt: f64) -> Result<Trajectory<S>>
where
    S: FlowState,
    F: Fn(&S) -> Result<Vec<f64>>,
{
    assert!(dt > 0.0, "dt must be positive");
    assert!(t_end >= 0.0, "t_end must be nonnegative");
    let steps = ((t_end / dt) + 1e-9).floor() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let eval = |flat: &[f64]| -> Result<Vec<f64>> { field(&s0.from_flat(flat)) };

    let mut y = s0.as_flat();
    times.push(0.0);
    states.push(s0.clone());
    for step in 0..steps {
        let t = step as f64 * dt;
        y = rk4_step(&eval, &y, dt).map_err(|e| Error::DegeneracyCrossing {
            time: t,
            source: Box::new(e),
        })?;
        times.push((step + 1) as f64 * dt);
        states.push(s0.from_flat(&y));
    }
    Ok(Trajectory {
        times,
        states,
        invariant_log: Vec::new(),
    })
}

fn rk4_step<F>(f: &F, y: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let axpy = |y: &[f64], s: f64, k: &[f64]| -> Vec<f64> {
        y.iter().zip(k).map(|(yi, ki)| yi + s * ki).collect()
    };
    let k1 = f(y)?;
    let k2 = f(&axpy(y, dt / 2.0, &k1))?;
    let k3 = f(&axpy(y, dt / 2.0, &k2))?;
    let k4 = f(&axpy(y, dt, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// λ-dependent transfer matrix with the λ⁰ FM variables pinned to the curve:
/// L_k(λ) = (u_k/g_{k−1} + λ g_k, −g_k/g_{k−1}; 1, 0). At λ = 0 this is the
/// plain curve transfer matrix, so tr T(0) = 2 on every closed curve.
fn transfer_matrix(inv: &DetInvariants, k: isize, lambda: f64) -> Matrix2<f64> {
    let gm = inv.g_at(k - 1);
    Matrix2::new(
        inv.u_at(k) / gm + lambda * inv.g_at(k),
        -inv.g_at(k) / gm,
        1.0,
        0.0,
    )
}

/// tr T(λ) for each requested λ, with T(λ) = L_{N−1}(λ) ··· L_0(λ).
pub fn spectral_invariants(c: &CurveState, lambdas: &[f64]) -> Result<Vec<f64>> {
    let inv = compute_invariants(c);
    let tol = Tolerances::for_curve(c);
    inv.require_g(tol.eps_g)?;
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let t = (0..inv.n() as isize).fold(Matrix2::identity(), |acc, k| {
                transfer_matrix(&inv, k, lambda) * acc
            });
            t.trace()
        })
        .collect())
}

/// The same traces computed from FM variables alone:
/// tr T(λ) = g_prod · tr Π (b_k + λ, −1; a_k, 0), the diagonal gauge of the
/// curve product. `g_prod` (= Π g_k of the underlying curve) is itself a
/// constant of the Toda flow since Σ log a_k is conserved.
pub fn fm_transfer_trace(s: &FMState, lambda: f64, g_prod: f64) -> f64 {
    let n = s.n() as isize;
    let t = (0..n).fold(Matrix2::identity(), |acc, k| {
        Matrix2::new(s.b_at(k) + lambda, -1.0, s.a_at(k), 0.0) * acc
    });
    g_prod * t.trace()
}

/// Gradient of tr T(λ) with respect to all curve coordinates, via the
/// product rule over the transfer factors.
pub fn grad_transfer_trace(c: &CurveState, lambda: f64) -> Result<PhaseGradient> {
    let inv = compute_invariants(c);
    let tol = Tolerances::for_curve(c);
    inv.require_g(tol.eps_g)?;
    let n = c.n();

    let ls: Vec<Matrix2<f64>> = (0..n as isize)
        .map(|k| transfer_matrix(&inv, k, lambda))
        .collect();
    // prefix[k] = L_{k-1}···L_0, suffix[k] = L_{N-1}···L_k.
    let mut prefix = vec![Matrix2::identity(); n + 1];
    for k in 0..n {
        prefix[k + 1] = ls[k] * prefix[k];
    }
    let mut suffix = vec![Matrix2::identity(); n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] * ls[k];
    }

    let mut grad = PhaseGradient::zero(n);
    for k in 0..n as isize {
        let burden = prefix[crate::curve::wrap(k, n)] * suffix[crate::curve::wrap(k, n) + 1];
        let (b11, b21) = (burden[(0, 0)], burden[(1, 0)]);
        let gm = inv.g_at(k - 1);
        let g = inv.g_at(k);
        let u = inv.u_at(k);
        // tr(∂L_k · B) = ∂L11 · B11 + ∂L12 · B21, row two of L is constant.
        // L11 = u/gm + λg, L12 = −g/gm.
        let w_u = b11 / gm;
        let w_g = b11 * lambda - b21 / gm;
        let w_gm = -b11 * u / (gm * gm) + b21 * g / (gm * gm);
        grad.add_scaled(&grad_u(c, k), w_u);
        grad.add_scaled(&grad_g(c, k), w_g);
        grad.add_scaled(&grad_g(c, k - 1), w_gm);
    }
    Ok(grad)
}

/// Canonical bracket {tr T(λ), tr T(μ)} — the involutivity pairing.
pub fn trace_bracket(c: &CurveState, lambda: f64, mu: f64) -> Result<f64> {
    let gl = grad_transfer_trace(c, lambda)?;
    let gm = grad_transfer_trace(c, mu)?;
    Ok(canonical_bracket(&gl, &gm))
}

/// Outcome of integrating the flow along both routes.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub lambda: f64,
    pub steps: usize,
    /// Max |a| deviation between the curve route (mapped through fm_map)
    /// and the direct FM route, over all snapshots and sites.
    pub max_dev_a: f64,
    /// Same for b.
    pub max_dev_b: f64,
}

impl ConsistencyReport {
    pub fn max_dev(&self) -> f64 {
        self.max_dev_a.max(self.max_dev_b)
    }
}

/// Integrate the curve under the solved Toda flow and the FM state under the
/// direct field, then compare the FM images over time.
pub fn consistency_check(
    c: &CurveState,
    lambda: f64,
    t_end: f64,
    dt: f64,
) -> Result<ConsistencyReport> {
    let curve_field = |state: &CurveState| -> Result<Vec<f64>> {
        let flow = toda_flow_on_curve(state, lambda)?;
        let vel = curve_velocity(state, &flow.coeffs)?;
        let mut flat = Vec::with_capacity(2 * state.n());
        flat.extend(vel.iter().map(|v| v.x));
        flat.extend(vel.iter().map(|v| v.y));
        Ok(flat)
    };
    let curve_traj = integrate(c, curve_field, t_end, dt)?;

    let s0 = fm_map(c, lambda)?;
    let fm_field = |s: &FMState| -> Result<Vec<f64>> {
        let (da, db) = toda_vector_field_ab(s);
        let mut flat = da;
        flat.extend(db);
        Ok(flat)
    };
    let fm_traj = integrate(&s0, fm_field, t_end, dt)?;

    let mut max_dev_a = 0.0f64;
    let mut max_dev_b = 0.0f64;
    for (curve_state, fm_state) in curve_traj.states.iter().zip(&fm_traj.states) {
        let mapped = fm_map(curve_state, lambda)?;
        for k in 0..c.n() {
            max_dev_a = max_dev_a.max((mapped.a[k] - fm_state.a[k]).abs());
            max_dev_b = max_dev_b.max((mapped.b[k] - fm_state.b[k]).abs());
        }
    }
    Ok(ConsistencyReport {
        lambda,
        steps: curve_traj.times.len() - 1,
        max_dev_a,
        max_dev_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::structure::{graded_tables, state_vector};
    use crate::bracket::Label;
    use crate::testutil::{perturbed_polygon, random_curve, random_fm_state};
    use approx::assert_relative_eq;

    #[test]
    fn constant_state_is_fixed_point() {
        let s = FMState::new(vec![1.3; 6], vec![0.4; 6], 0.0).unwrap();
        let (da, db) = toda_vector_field_ab(&s);
        assert!(da.iter().all(|v| *v == 0.0));
        assert!(db.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn b_rates_telescope_to_zero() {
        let s = random_fm_state(7, 0.0, 5);
        let (_, db) = toda_vector_field_ab(&s);
        let total: f64 = db.iter().sum();
        assert!(total.abs() < 1e-14);
    }

    #[test]
    fn field_is_p1_contraction_of_h2() {
        // ∂H₂/∂a_l = 1, ∂H₂/∂b_l = b_l with H₂ = Σ (b²/2 + a).
        let n = 6;
        let s = random_fm_state(n, 0.0, 11);
        let p1 = graded_tables(n).p1;
        let vars = state_vector(&s);
        let (da, db) = toda_vector_field_ab(&s);
        for k in 0..n {
            let mut via_bracket_a = 0.0;
            let mut via_bracket_b = 0.0;
            for l in 0..n {
                via_bracket_a += p1.eval_entry(Label::A(k), Label::A(l), &vars)
                    + p1.eval_entry(Label::A(k), Label::B(l), &vars) * s.b[l];
                via_bracket_b += p1.eval_entry(Label::B(k), Label::A(l), &vars)
                    + p1.eval_entry(Label::B(k), Label::B(l), &vars) * s.b[l];
            }
            assert_relative_eq!(da[k], via_bracket_a, epsilon = 1e-12);
            assert_relative_eq!(db[k], via_bracket_b, epsilon = 1e-12);
        }
    }

    #[test]
    fn toda_flow_on_curve_matches_field() {
        for seed in 0..5 {
            let c = random_curve(6, 60 + seed);
            let flow = toda_flow_on_curve(&c, 0.0).unwrap();
            assert!(flow.residual < 1e-10);
            assert_eq!(flow.rank, 2 * 6 - 3, "seed {seed}: rank {}", flow.rank);
            let inv = compute_invariants(&c);
            let (ra, rb) = fm_rates(&inv, &flow.coeffs).unwrap();
            let s = fm_map(&c, 0.0).unwrap();
            let (da, db) = toda_vector_field_ab(&s);
            for k in 0..6 {
                assert_relative_eq!(ra[k], da[k], epsilon = 1e-10);
                assert_relative_eq!(rb[k], db[k], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hexagon_curve_flow_is_stationary_in_fm() {
        let c = CurveState::hexagon();
        let flow = toda_flow_on_curve(&c, 0.0).unwrap();
        let inv = compute_invariants(&c);
        let (ra, rb) = fm_rates(&inv, &flow.coeffs).unwrap();
        for k in 0..6 {
            assert!(ra[k].abs() < 1e-12);
            assert!(rb[k].abs() < 1e-12);
        }
    }

    #[test]
    fn toda_flow_coefficients_are_lambda_independent() {
        let c = random_curve(6, 77);
        let f0 = toda_flow_on_curve(&c, 0.0).unwrap();
        let f1 = toda_flow_on_curve(&c, 1.0).unwrap();
        for k in 0..6 {
            assert_relative_eq!(f0.coeffs.alpha[k], f1.coeffs.alpha[k], epsilon = 1e-12);
            assert_relative_eq!(f0.coeffs.beta[k], f1.coeffs.beta[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_field_keeps_snapshots_identical() {
        let s = random_fm_state(5, 0.0, 21);
        let traj = integrate(&s, |s: &FMState| Ok(vec![0.0; 2 * s.n()]), 0.5, 0.1).unwrap();
        assert_eq!(traj.times.len(), 6);
        for snap in &traj.states {
            assert_eq!(snap.a, s.a);
            assert_eq!(snap.b, s.b);
        }
    }

    #[test]
    fn integrator_is_fourth_order() {
        let s0 = random_fm_state(4, 0.0, 31);
        let field = |s: &FMState| -> Result<Vec<f64>> {
            let (da, db) = toda_vector_field_ab(s);
            let mut flat = da;
            flat.extend(db);
            Ok(flat)
        };
        let reference = integrate(&s0, field, 1.0, 1e-4).unwrap();
        let endpoint = |traj: &Trajectory<FMState>| traj.states.last().unwrap().clone();
        let ref_end = endpoint(&reference);
        let err = |dt: f64| {
            let traj = integrate(&s0, field, 1.0, dt).unwrap();
            let end = endpoint(&traj);
            (0..4)
                .map(|k| (end.a[k] - ref_end.a[k]).abs().max((end.b[k] - ref_end.b[k]).abs()))
                .fold(0.0f64, f64::max)
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        let order = (e1 / e2).log2();
        assert!(
            (3.7..=4.3).contains(&order),
            "observed order {order:.2} (e1={e1:.3e}, e2={e2:.3e})"
        );
    }

    #[test]
    fn self_convergence_at_small_steps() {
        let s0 = random_fm_state(4, 0.0, 41);
        let field = |s: &FMState| -> Result<Vec<f64>> {
            let (da, db) = toda_vector_field_ab(s);
            let mut flat = da;
            flat.extend(db);
            Ok(flat)
        };
        let coarse = integrate(&s0, field, 1.0, 1e-3).unwrap();
        let fine = integrate(&s0, field, 1.0, 1e-5).unwrap();
        let ce = coarse.states.last().unwrap();
        let fe = fine.states.last().unwrap();
        let dev = (0..4)
            .map(|k| (ce.a[k] - fe.a[k]).abs().max((ce.b[k] - fe.b[k]).abs()))
            .fold(0.0f64, f64::max);
        assert!(dev < 1e-8, "endpoint deviation {dev:.3e}");
    }

    #[test]
    fn hexagon_trace_is_two_at_lambda_zero() {
        let c = CurveState::hexagon();
        let tr = spectral_invariants(&c, &[0.0]).unwrap();
        assert_relative_eq!(tr[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_curve_trace_is_two_at_lambda_zero() {
        let c = random_curve(8, 51);
        let tr = spectral_invariants(&c, &[0.0]).unwrap();
        assert_relative_eq!(tr[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn fm_gauge_reproduces_curve_trace() {
        let c = random_curve(7, 53);
        let inv = compute_invariants(&c);
        let g_prod: f64 = inv.g.iter().product();
        let s = fm_map(&c, 0.0).unwrap();
        for lambda in [0.0, 0.5, 1.0, -2.0] {
            let direct = spectral_invariants(&c, &[lambda]).unwrap()[0];
            let gauged = fm_transfer_trace(&s, lambda, g_prod);
            assert_relative_eq!(direct, gauged, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn trace_gradient_matches_finite_differences() {
        let c = random_curve(5, 57);
        let lambda = 0.7;
        let grad = grad_transfer_trace(&c, lambda).unwrap();
        let h = 1e-6;
        for j in 0..5 {
            for coord in 0..2 {
                let mut xp = c.x().to_vec();
                let mut yp = c.y().to_vec();
                let mut xm = c.x().to_vec();
                let mut ym = c.y().to_vec();
                if coord == 0 {
                    xp[j] += h;
                    xm[j] -= h;
                } else {
                    yp[j] += h;
                    ym[j] -= h;
                }
                let tp = spectral_invariants(&CurveState::new(xp, yp).unwrap(), &[lambda]).unwrap()[0];
                let tm = spectral_invariants(&CurveState::new(xm, ym).unwrap(), &[lambda]).unwrap()[0];
                let fd = (tp - tm) / (2.0 * h);
                let analytic = if coord == 0 { grad.dx[j] } else { grad.dy[j] };
                assert_relative_eq!(analytic, fd, epsilon = 1e-5, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn traces_are_in_involution() {
        for seed in 0..10 {
            let c = random_curve(6, 90 + seed);
            let v = trace_bracket(&c, 0.0, 1.0).unwrap();
            assert!(v.abs() < 1e-8, "seed {seed}: {{trT(0), trT(1)}} = {v:.3e}");
        }
    }

    #[test]
    fn trace_conserved_along_toda_flow() {
        let c = perturbed_polygon(6, 71, 0.2);
        let inv = compute_invariants(&c);
        let g_prod: f64 = inv.g.iter().product();
        let s0 = fm_map(&c, 0.0).unwrap();
        let field = |s: &FMState| -> Result<Vec<f64>> {
            let (da, db) = toda_vector_field_ab(s);
            let mut flat = da;
            flat.extend(db);
            Ok(flat)
        };
        let mut traj = integrate(&s0, field, 1.0, 1e-3).unwrap();
        traj.log_invariants(|s| {
            [0.0, 1.0, -1.0]
                .iter()
                .map(|&l| fm_transfer_trace(s, l, g_prod))
                .collect()
        });
        let first = &traj.invariant_log[0];
        for row in &traj.invariant_log {
            for (v, v0) in row.iter().zip(first) {
                let drift = (v - v0).abs() / v0.abs().max(1.0);
                assert!(drift < 1e-6, "trace drift {drift:.3e}");
            }
        }
    }

    #[test]
    fn consistency_of_both_routes() {
        let c = perturbed_polygon(6, 81, 0.2);
        let report = consistency_check(&c, 0.0, 1.0, 1e-3).unwrap();
        assert!(
            report.max_dev() < 1e-6,
            "two-route deviation {:.3e}",
            report.max_dev()
        );
    }

    #[test]
    fn hexagon_routes_are_stationary() {
        let c = CurveState::hexagon();
        let report = consistency_check(&c, 0.0, 0.1, 1e-2).unwrap();
        assert!(report.max_dev() < 1e-12);
    }

    #[test]
    fn degenerate_start_is_reported_as_crossing() {
        // Collinear consecutive points: g_0 = 0 ⇒ the field fails at t = 0.
        let c = CurveState::new(vec![1.0, 2.0, 0.3, -0.5, 0.2], vec![0.5, 1.0, 0.9, 0.2, -0.7])
            .unwrap();
        let field = |state: &CurveState| -> Result<Vec<f64>> {
            let flow = toda_flow_on_curve(state, 0.0)?;
            let vel = curve_velocity(state, &flow.coeffs)?;
            let mut flat: Vec<f64> = vel.iter().map(|v| v.x).collect();
            flat.extend(vel.iter().map(|v| v.y));
            Ok(flat)
        };
        let err = integrate(&c, field, 0.1, 0.01);
        assert!(matches!(err, Err(Error::DegeneracyCrossing { .. })));
    }
}
