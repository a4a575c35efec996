//! Closed discrete curves in the plane and their determinant invariants.
//!
//! A curve is a periodic sequence of N points γ_k = (x_k, y_k), indices mod N.
//! The two determinant families
//!
//! ```text
//! g_k = det(γ_k, γ_{k+1}) = x_k y_{k+1} − y_k x_{k+1}
//! u_k = det(γ_{k−1}, γ_{k+1}) = x_{k−1} y_{k+1} − y_{k−1} x_{k+1}
//! ```
//!
//! determine the curve up to two initial points through the recursion
//! γ_{k+1} = (u_k γ_k − g_k γ_{k−1}) / g_{k−1}, and feed the transfer
//! matrices L_k that propagate the frame F_k = (γ_k; γ_{k−1}).

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, InvariantKind, Result};

/// Relative factor for all degeneracy guards: a determinant counts as zero
/// when its magnitude is below `GUARD_FACTOR × scale²`, with `scale` the
/// largest coordinate magnitude in play.
pub const GUARD_FACTOR: f64 = 1e-12;

/// Degeneracy thresholds, scale-aware so that rescaling a curve rescales
/// the guards with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Threshold on |g_k|.
    pub eps_g: f64,
    /// Threshold on |u_k|.
    pub eps_u: f64,
    /// Threshold on |g_{k-1} + g_k|.
    pub eps_sum: f64,
}

impl Tolerances {
    /// Guards for a curve: all thresholds are `GUARD_FACTOR × (max |coord|)²`,
    /// since g and u are quadratic in the coordinates.
    pub fn for_curve(c: &CurveState) -> Self {
        let m = c
            .x
            .iter()
            .chain(c.y.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        Self::from_scale(m * m)
    }

    /// Guards for bare invariant sequences, using the largest |g| or |u| as
    /// the quadratic scale proxy.
    pub fn for_invariants(inv: &DetInvariants) -> Self {
        let m = inv
            .g
            .iter()
            .chain(inv.u.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        Self::from_scale(m)
    }

    fn from_scale(scale: f64) -> Self {
        let eps = GUARD_FACTOR * scale.max(f64::MIN_POSITIVE);
        Tolerances {
            eps_g: eps,
            eps_u: eps,
            eps_sum: eps,
        }
    }
}

/// A closed discrete curve: N points of ℝ², site arithmetic mod N.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveState {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl CurveState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                what: "y",
                got: y.len(),
                expected: x.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::LengthMismatch {
                what: "x",
                got: 0,
                expected: 1,
            });
        }
        Ok(CurveState { x, y })
    }

    /// Build from a point list.
    pub fn from_points(points: &[Vector2<f64>]) -> Result<Self> {
        let x = points.iter().map(|p| p.x).collect();
        let y = points.iter().map(|p| p.y).collect();
        Self::new(x, y)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// γ_k with the index reduced mod N.
    pub fn point(&self, k: isize) -> Vector2<f64> {
        let i = self.wrap(k);
        Vector2::new(self.x[i], self.y[i])
    }

    /// Reduce a signed site index into 0..N.
    pub fn wrap(&self, k: isize) -> usize {
        let n = self.x.len() as isize;
        (k.rem_euclid(n)) as usize
    }

    /// True when every |g_k| clears the scale-aware guard, i.e. no pair of
    /// consecutive points is collinear with the origin.
    pub fn is_generic(&self) -> bool {
        let tol = Tolerances::for_curve(self);
        let inv = compute_invariants(self);
        inv.g.iter().all(|g| g.abs() > tol.eps_g)
    }

    /// Cyclic shift by one site: point k of the result is point k+1 of self.
    pub fn shifted(&self) -> CurveState {
        let n = self.n();
        let x = (0..n).map(|k| self.x[(k + 1) % n]).collect();
        let y = (0..n).map(|k| self.y[(k + 1) % n]).collect();
        CurveState { x, y }
    }

    /// Regular hexagon on the unit circle, written with exact constants so
    /// that g_k = u_k = √3/2 holds bit-for-bit at every site.
    pub fn hexagon() -> CurveState {
        let s = 3.0f64.sqrt() / 2.0;
        CurveState {
            x: vec![1.0, 0.5, -0.5, -1.0, -0.5, 0.5],
            y: vec![0.0, s, s, 0.0, -s, -s],
        }
    }
}

/// The determinant sequences g, u of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DetInvariants {
    pub g: Vec<f64>,
    pub u: Vec<f64>,
}

impl DetInvariants {
    pub fn new(g: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if g.len() != u.len() {
            return Err(Error::LengthMismatch {
                what: "u",
                got: u.len(),
                expected: g.len(),
            });
        }
        Ok(DetInvariants { g, u })
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn g_at(&self, k: isize) -> f64 {
        self.g[wrap(k, self.g.len())]
    }

    pub fn u_at(&self, k: isize) -> f64 {
        self.u[wrap(k, self.u.len())]
    }

    /// Error unless every |g_k| > eps_g.
    pub fn require_g(&self, eps_g: f64) -> Result<()> {
        for (k, g) in self.g.iter().enumerate() {
            if g.abs() <= eps_g {
                return Err(Error::DegenerateInvariant {
                    kind: InvariantKind::G,
                    index: k,
                    value: *g,
                    threshold: eps_g,
                });
            }
        }
        Ok(())
    }

    /// Error unless every |u_k| > eps_u.
    pub fn require_u(&self, eps_u: f64) -> Result<()> {
        for (k, u) in self.u.iter().enumerate() {
            if u.abs() <= eps_u {
                return Err(Error::DegenerateInvariant {
                    kind: InvariantKind::U,
                    index: k,
                    value: *u,
                    threshold: eps_u,
                });
            }
        }
        Ok(())
    }

    /// Error unless every |g_{k-1} + g_k| > eps_sum.
    pub fn require_g_sums(&self, eps_sum: f64) -> Result<()> {
        for k in 0..self.n() {
            let s = self.g_at(k as isize - 1) + self.g[k];
            if s.abs() <= eps_sum {
                return Err(Error::DegenerateSum {
                    index: k,
                    value: s,
                    threshold: eps_sum,
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn wrap(k: isize, n: usize) -> usize {
    (k.rem_euclid(n as isize)) as usize
}

/// g_k = x_k y_{k+1} − y_k x_{k+1} and u_k = x_{k−1} y_{k+1} − y_{k−1} x_{k+1},
/// evaluated in exactly this order at every site.
pub fn compute_invariants(c: &CurveState) -> DetInvariants {
    let n = c.n();
    let mut g = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for k in 0..n {
        let kp = (k + 1) % n;
        let km = (k + n - 1) % n;
        g.push(c.x[k] * c.y[kp] - c.y[k] * c.x[kp]);
        u.push(c.x[km] * c.y[kp] - c.y[km] * c.x[kp]);
    }
    DetInvariants { g, u }
}

/// The frame F_k: rows (γ_k; γ_{k−1}). Satisfies det F_k = −g_{k−1} and the
/// propagation F_{k+1} = L_k F_k.
pub fn frame(c: &CurveState, k: isize) -> Matrix2<f64> {
    let p = c.point(k);
    let q = c.point(k - 1);
    Matrix2::new(p.x, p.y, q.x, q.y)
}

/// Per-site transfer matrices and optional flow matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxData {
    pub l: Vec<Matrix2<f64>>,
    pub v: Option<Vec<Matrix2<f64>>>,
}

/// L_k = (u_k/g_{k−1}, −g_k/g_{k−1}; 1, 0) for all sites.
pub fn lax_matrices(inv: &DetInvariants) -> Result<LaxData> {
    let tol = Tolerances::for_invariants(inv);
    inv.require_g(tol.eps_g)?;
    let n = inv.n();
    let l = (0..n)
        .map(|k| {
            let gm = inv.g_at(k as isize - 1);
            Matrix2::new(inv.u[k] / gm, -inv.g[k] / gm, 1.0, 0.0)
        })
        .collect();
    Ok(LaxData { l, v: None })
}

/// Monodromy T = L_{N−1} · L_{N−2} ··· L_0, so that T F_0 = F_N. For a
/// closed curve with invertible frame this forces T = I.
pub fn monodromy(lax: &LaxData) -> Matrix2<f64> {
    lax.l
        .iter()
        .fold(Matrix2::identity(), |acc, l| l * acc)
}

/// Run the recursion γ_{k+1} = (u_k γ_k − g_k γ_{k−1}) / g_{k−1} from two
/// seed points, returning γ_0 ..= γ_steps. Invariant indices wrap mod N.
pub fn reconstruct_curve(
    inv: &DetInvariants,
    gamma0: Vector2<f64>,
    gamma1: Vector2<f64>,
    steps: usize,
) -> Result<Vec<Vector2<f64>>> {
    let tol = Tolerances::for_invariants(inv);
    let mut pts = Vec::with_capacity(steps + 1);
    pts.push(gamma0);
    if steps >= 1 {
        pts.push(gamma1);
    }
    for k in 1..steps as isize {
        let gm = inv.g_at(k - 1);
        if gm.abs() <= tol.eps_g {
            return Err(Error::DegenerateInvariant {
                kind: InvariantKind::G,
                index: wrap(k - 1, inv.n()),
                value: gm,
                threshold: tol.eps_g,
            });
        }
        let next = (inv.u_at(k) * pts[k as usize] - inv.g_at(k) * pts[k as usize - 1]) / gm;
        pts.push(next);
    }
    Ok(pts)
}
