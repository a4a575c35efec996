//! Flows on discrete curves and the induced motion of the invariants.
//!
//! A general flow decomposes per site as
//! γ̇_k = α_k γ_k + (β_k/u_k)(γ_{k+1} − γ_{k−1}); it propagates the frame by
//! Ḟ_k = V_k F_k and is compatible with the transfer recursion through the
//! zero-curvature condition L̇_k = V_{k+1} L_k − L_k V_k.

use nalgebra::{Matrix2, Vector2};

use crate::curve::{compute_invariants, lax_matrices, CurveState, DetInvariants, Tolerances};
use crate::error::{Error, InvariantKind, Result};

/// Per-site flow coefficients (α_k, β_k).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowCoefficients {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl FlowCoefficients {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::LengthMismatch {
                what: "beta",
                got: beta.len(),
                expected: alpha.len(),
            });
        }
        Ok(FlowCoefficients { alpha, beta })
    }

    pub fn zero(n: usize) -> Self {
        FlowCoefficients {
            alpha: vec![0.0; n],
            beta: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha_at(&self, k: isize) -> f64 {
        self.alpha[crate::curve::wrap(k, self.alpha.len())]
    }

    pub fn beta_at(&self, k: isize) -> f64 {
        self.beta[crate::curve::wrap(k, self.beta.len())]
    }
}

/// The two V-matrix entries consumed by the coefficient inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct VMatrixEntries {
    pub v11: Vec<f64>,
    pub v12: Vec<f64>,
}

impl VMatrixEntries {
    pub fn new(v11: Vec<f64>, v12: Vec<f64>) -> Result<Self> {
        if v11.len() != v12.len() {
            return Err(Error::LengthMismatch {
                what: "v12",
                got: v12.len(),
                expected: v11.len(),
            });
        }
        Ok(VMatrixEntries { v11, v12 })
    }
}

/// γ̇_k = α_k γ_k + (β_k/u_k)(γ_{k+1} − γ_{k−1}) per site. The division by
/// u_k is only performed (and only guarded) where β_k ≠ 0.
pub fn curve_velocity(c: &CurveState, f: &FlowCoefficients) -> Result<Vec<Vector2<f64>>> {
    let n = c.n();
    debug_assert_eq!(f.n(), n);
    let inv = compute_invariants(c);
    let tol = Tolerances::for_curve(c);
    let mut vel = Vec::with_capacity(n);
    for k in 0..n as isize {
        let mut v = f.alpha_at(k) * c.point(k);
        let beta = f.beta_at(k);
        if beta != 0.0 {
            let u = inv.u_at(k);
            if u.abs() <= tol.eps_u {
                return Err(Error::DegenerateInvariant {
                    kind: InvariantKind::U,
                    index: crate::curve::wrap(k, n),
                    value: u,
                    threshold: tol.eps_u,
                });
            }
            v += (beta / u) * (c.point(k + 1) - c.point(k - 1));
        }
        vel.push(v);
    }
    Ok(vel)
}

/// The flow matrix
///
/// ```text
/// V_k = ( α_k + β_k/g_{k−1}                      −(1 + g_k/g_{k−1}) β_k/u_k        )
///       ( (1 + g_{k−2}/g_{k−1}) β_{k−1}/u_{k−1}   α_{k−1} − β_{k−1}/g_{k−1}        )
/// ```
///
/// with all indices mod N.
pub fn v_matrix(inv: &DetInvariants, f: &FlowCoefficients, k: isize) -> Result<Matrix2<f64>> {
    let tol = Tolerances::for_invariants(inv);
    let n = inv.n();
    let gm1 = inv.g_at(k - 1);
    if gm1.abs() <= tol.eps_g {
        return Err(Error::DegenerateInvariant {
            kind: InvariantKind::G,
            index: crate::curve::wrap(k - 1, n),
            value: gm1,
            threshold: tol.eps_g,
        });
    }
    let beta_k = f.beta_at(k);
    let beta_km1 = f.beta_at(k - 1);
    let off_diag = |beta: f64, u: f64, idx: isize, ratio: f64| -> Result<f64> {
        if beta == 0.0 {
            return Ok(0.0);
        }
        if u.abs() <= tol.eps_u {
            return Err(Error::DegenerateInvariant {
                kind: InvariantKind::U,
                index: crate::curve::wrap(idx, n),
                value: u,
                threshold: tol.eps_u,
            });
        }
        Ok(ratio * beta / u)
    };
    let v12 = off_diag(beta_k, inv.u_at(k), k, -(1.0 + inv.g_at(k) / gm1))?;
    let v21 = off_diag(beta_km1, inv.u_at(k - 1), k - 1, 1.0 + inv.g_at(k - 2) / gm1)?;
    Ok(Matrix2::new(
        f.alpha_at(k) + beta_k / gm1,
        v12,
        v21,
        f.alpha_at(k - 1) - beta_km1 / gm1,
    ))
}

/// All N flow matrices.
pub fn v_matrices(inv: &DetInvariants, f: &FlowCoefficients) -> Result<Vec<Matrix2<f64>>> {
    (0..inv.n() as isize).map(|k| v_matrix(inv, f, k)).collect()
}

/// ġ_k = g_k (α_{k+1} + α_k) + β_{k+1} − β_k.
pub fn g_dot(inv: &DetInvariants, f: &FlowCoefficients) -> Vec<f64> {
    let n = inv.n() as isize;
    (0..n)
        .map(|k| {
            inv.g_at(k) * (f.alpha_at(k + 1) + f.alpha_at(k)) + f.beta_at(k + 1) - f.beta_at(k)
        })
        .collect()
}

/// The induced flow on u:
///
/// ```text
/// u̇_k = u_k (α_{k−1} + α_{k+1})
///      + β_{k−1} g_k (g_{k−2} + g_{k−1}) / (u_{k−1} g_{k−1})
///      − β_{k+1} g_{k−1} (g_k + g_{k+1}) / (u_{k+1} g_k)
///      + u_k (β_{k+1}/g_k − β_{k−1}/g_{k−1})
/// ```
pub fn u_dot(inv: &DetInvariants, f: &FlowCoefficients) -> Result<Vec<f64>> {
    let tol = Tolerances::for_invariants(inv);
    inv.require_g(tol.eps_g)?;
    inv.require_u(tol.eps_u)?;
    let n = inv.n() as isize;
    Ok((0..n)
        .map(|k| {
            let (gm2, gm1, g0, gp1) = (
                inv.g_at(k - 2),
                inv.g_at(k - 1),
                inv.g_at(k),
                inv.g_at(k + 1),
            );
            let (um1, u0, up1) = (inv.u_at(k - 1), inv.u_at(k), inv.u_at(k + 1));
            u0 * (f.alpha_at(k - 1) + f.alpha_at(k + 1))
                + f.beta_at(k - 1) * g0 * (gm2 + gm1) / (um1 * gm1)
                - f.beta_at(k + 1) * gm1 * (g0 + gp1) / (up1 * g0)
                + u0 * (f.beta_at(k + 1) / g0 - f.beta_at(k - 1) / gm1)
        })
        .collect())
}

/// Invert the V-entry map: α_k = v11_k + v12_k u_k/(g_{k−1}+g_k) and
/// β_k = −v12_k g_{k−1} u_k/(g_{k−1}+g_k). Feeding the result back into
/// `v_matrix` reproduces v11 and v12 identically.
pub fn alpha_beta_from_v(inv: &DetInvariants, v: &VMatrixEntries) -> Result<FlowCoefficients> {
    let tol = Tolerances::for_invariants(inv);
    inv.require_g_sums(tol.eps_sum)?;
    let n = inv.n();
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    for k in 0..n as isize {
        let gm1 = inv.g_at(k - 1);
        let sum = gm1 + inv.g_at(k);
        let u = inv.u_at(k);
        let i = crate::curve::wrap(k, n);
        alpha.push(v.v11[i] + v.v12[i] * u / sum);
        beta.push(-v.v12[i] * gm1 * u / sum);
    }
    Ok(FlowCoefficients { alpha, beta })
}

/// Analytic L̇_k per site, by the quotient rule on (u_k/g_{k−1}, −g_k/g_{k−1})
/// with ġ, u̇ from the induced flows. Row two of L is constant.
fn l_dot(inv: &DetInvariants, gd: &[f64], ud: &[f64]) -> Vec<Matrix2<f64>> {
    let n = inv.n();
    (0..n as isize)
        .map(|k| {
            let i = crate::curve::wrap(k, n);
            let im = crate::curve::wrap(k - 1, n);
            let gm1 = inv.g_at(k - 1);
            let d11 = (ud[i] * gm1 - inv.u_at(k) * gd[im]) / (gm1 * gm1);
            let d12 = -(gd[i] * gm1 - inv.g_at(k) * gd[im]) / (gm1 * gm1);
            Matrix2::new(d11, d12, 0.0, 0.0)
        })
        .collect()
}

fn max_abs(m: &Matrix2<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Zero-curvature residual, analytic mode:
/// max_k ‖L̇_k − (V_{k+1} L_k − L_k V_k)‖_∞ with L̇ formed from ġ, u̇.
pub fn zero_curvature_residual(c: &CurveState, f: &FlowCoefficients) -> Result<f64> {
    let inv = compute_invariants(c);
    let lax = lax_matrices(&inv)?;
    let vs = v_matrices(&inv, f)?;
    let gd = g_dot(&inv, f);
    let ud = u_dot(&inv, f)?;
    let ld = l_dot(&inv, &gd, &ud);
    let n = inv.n();
    let mut worst = 0.0f64;
    for k in 0..n {
        let commutator = vs[(k + 1) % n] * lax.l[k] - lax.l[k] * vs[k];
        worst = worst.max(max_abs(&(ld[k] - commutator)));
    }
    Ok(worst)
}

/// Zero-curvature residual, finite-difference oracle mode: L̇ is estimated by
/// one forward Euler step of the curve along the flow, so the residual is
/// O(dt) instead of roundoff.
pub fn zero_curvature_residual_fd(c: &CurveState, f: &FlowCoefficients, dt: f64) -> Result<f64> {
    let inv = compute_invariants(c);
    let lax = lax_matrices(&inv)?;
    let vs = v_matrices(&inv, f)?;
    let vel = curve_velocity(c, f)?;
    let n = c.n();
    let x: Vec<f64> = (0..n).map(|k| c.x()[k] + dt * vel[k].x).collect();
    let y: Vec<f64> = (0..n).map(|k| c.y()[k] + dt * vel[k].y).collect();
    let advanced = CurveState::new(x, y)?;
    let lax_adv = lax_matrices(&compute_invariants(&advanced))?;
    let mut worst = 0.0f64;
    for k in 0..n {
        let ld = (lax_adv.l[k] - lax.l[k]) / dt;
        let commutator = vs[(k + 1) % n] * lax.l[k] - lax.l[k] * vs[k];
        worst = worst.max(max_abs(&(ld - commutator)));
    }
    Ok(worst)
}
