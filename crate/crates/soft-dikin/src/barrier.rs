//! Log-barrier Hessian, the soft-threshold matrix `Phi`, and Gaussian
//! proposals in the induced local metric.
//!
//! `H(theta) = sum_j a_j a_j^T / (b_j - a_j^T theta)^2` is assembled as
//! `C C^T` with columns `c_j = a_j / s_j`, and
//! `Phi(theta) = alpha^{-1} H(theta) + eta^{-1} I_d` is factored once by a
//! symmetric positive-definite triangular (Cholesky) factorization. The
//! factor yields the log-determinant, local norms and proposal draws in one
//! pass; the symmetric square root that the proposal distribution is usually
//! written with is only a distributional device and never materialized.

use crate::geometry::Polytope;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Slacks below this trip `NumericalUnderflow` instead of letting `1/s^2`
/// overflow to infinity. Well above the ~1e-308 double underflow line.
pub const MIN_SLACK: f64 = 1e-150;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("point is not strictly interior (a slack is <= 0)")]
    NotInterior,
    #[error("slack {0:e} underflows the barrier; point is numerically on the boundary")]
    NumericalUnderflow(f64),
    #[error("soft-threshold matrix is not positive definite (factorization failed)")]
    NotPositiveDefinite,
    #[error("invalid soft-threshold parameters: alpha={alpha}, eta_inv={eta_inv}")]
    InvalidParams { alpha: f64, eta_inv: f64 },
}

/// Dikin scale `alpha` and regularizer weight `eta^{-1}`; `eta_inv = 0`
/// recovers the vanilla Dikin walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftThresholdParams {
    alpha: f64,
    eta_inv: f64,
}

impl SoftThresholdParams {
    pub fn new(alpha: f64, eta_inv: f64) -> Result<Self, BarrierError> {
        if !(alpha > 0.0 && alpha.is_finite() && eta_inv >= 0.0 && eta_inv.is_finite()) {
            return Err(BarrierError::InvalidParams { alpha, eta_inv });
        }
        Ok(Self { alpha, eta_inv })
    }

    /// Plain Dikin walk parameters (`eta^{-1} = 0`).
    pub fn vanilla(alpha: f64) -> Result<Self, BarrierError> {
        Self::new(alpha, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta_inv(&self) -> f64 {
        self.eta_inv
    }
}

std::thread_local! {
    // scratch for the d x m scaled-column matrix and its transpose; reused
    // across calls because fresh 8 m d byte allocations per step turn into
    // measurable allocator churn on the walk's hot path
    static HESSIAN_SCRATCH: std::cell::RefCell<(DMatrix<f64>, DMatrix<f64>)> =
        std::cell::RefCell::new((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
}

/// Slack-checked log-barrier Hessian `H(theta)`, symmetric PSD (PD when `A`
/// has rank `d`). Assembled as `C C^T` with columns `c_j = a_j / s_j`.
pub fn log_barrier_hessian(p: &Polytope, theta: &DVector<f64>) -> Result<DMatrix<f64>, BarrierError> {
    let s = checked_slacks(p, theta)?;
    let (m, d) = (p.num_constraints(), p.dim());
    HESSIAN_SCRATCH.with(|cell| {
        let (c, ct) = &mut *cell.borrow_mut();
        if c.shape() != (d, m) {
            *c = DMatrix::zeros(d, m);
            *ct = DMatrix::zeros(m, d);
        }
        for j in 0..m {
            let inv = 1.0 / s[j];
            for k in 0..d {
                let v = p.matrix()[(j, k)] * inv;
                c[(k, j)] = v;
                ct[(j, k)] = v;
            }
        }
        let mut h = DMatrix::zeros(d, d);
        h.gemm(1.0, c, ct, 0.0);
        Ok(h)
    })
}

/// Log-barrier gradient `sum_j a_j / s_j`. Used by the self-concordance
/// diagnostics; the walk itself is gradient-free.
pub fn log_barrier_gradient(p: &Polytope, theta: &DVector<f64>) -> Result<DVector<f64>, BarrierError> {
    let s = checked_slacks(p, theta)?;
    let mut g = DVector::zeros(p.dim());
    for j in 0..p.num_constraints() {
        g.axpy(1.0 / s[j], &p.matrix().row(j).transpose(), 1.0);
    }
    Ok(g)
}

fn checked_slacks(p: &Polytope, theta: &DVector<f64>) -> Result<DVector<f64>, BarrierError> {
    let s = p.slacks(theta);
    for &sj in s.iter() {
        if sj <= 0.0 {
            return Err(BarrierError::NotInterior);
        }
        if sj < MIN_SLACK {
            return Err(BarrierError::NumericalUnderflow(sj));
        }
    }
    Ok(s)
}

/// The barrier state at one interior point: `H`, `Phi`, the lower-triangular
/// factor `F` with `F F^T = Phi`, and `log det Phi`.
///
/// Immutable once built; the walk caches it across rejected proposals.
#[derive(Debug, Clone)]
pub struct BarrierAt {
    theta: DVector<f64>,
    hessian: DMatrix<f64>,
    phi: DMatrix<f64>,
    factor: DMatrix<f64>,
    log_det_phi: f64,
}

impl BarrierAt {
    /// Builds `Phi(theta)` directly from the polytope.
    pub fn new(
        p: &Polytope,
        theta: DVector<f64>,
        params: &SoftThresholdParams,
    ) -> Result<Self, BarrierError> {
        let h = log_barrier_hessian(p, &theta)?;
        Self::from_hessian(theta, h, params)
    }

    /// Builds `Phi = alpha^{-1} H + eta^{-1} I` from a precomputed Hessian and
    /// factorizes it. `NotPositiveDefinite` can occur when `eta_inv = 0` and
    /// `A` is rank-deficient.
    pub fn from_hessian(
        theta: DVector<f64>,
        hessian: DMatrix<f64>,
        params: &SoftThresholdParams,
    ) -> Result<Self, BarrierError> {
        let d = theta.len();
        let mut phi = &hessian * (1.0 / params.alpha);
        for i in 0..d {
            phi[(i, i)] += params.eta_inv;
        }
        let chol = nalgebra::Cholesky::new(phi.clone()).ok_or(BarrierError::NotPositiveDefinite)?;
        let factor = chol.unpack();
        let mut log_det_phi = 0.0;
        for i in 0..d {
            let fii = factor[(i, i)];
            if !(fii > 0.0 && fii.is_finite()) {
                return Err(BarrierError::NotPositiveDefinite);
            }
            log_det_phi += fii.ln();
        }
        log_det_phi *= 2.0;
        Ok(Self {
            theta,
            hessian,
            phi,
            factor,
            log_det_phi,
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Lower-triangular `F` with `F F^T = Phi`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn log_det_phi(&self) -> f64 {
        self.log_det_phi
    }

    /// Local norm `|v|_Phi = sqrt(v^T Phi v)`, evaluated as `|F^T v|_2`.
    pub fn local_norm(&self, v: &DVector<f64>) -> f64 {
        self.factor.tr_mul(v).norm()
    }

    /// One Gaussian proposal `z = theta + M xi`, `xi ~ N(0, I)`, with
    /// `M = F^{-T}` so that `M M^T = Phi^{-1}` and `z ~ N(theta, Phi^{-1})`.
    pub fn sample_proposal<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let xi = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = self
            .factor
            .tr_solve_lower_triangular(&xi)
            .expect("factor has positive diagonal");
        &self.theta + step
    }

    /// Log-density of the proposal distribution `N(theta, Phi^{-1})` at `z`:
    /// `0.5 log det Phi - (d/2) log 2 pi - 0.5 |z - theta|_Phi^2`.
    pub fn proposal_log_density(&self, z: &DVector<f64>) -> f64 {
        let diff = z - &self.theta;
        let local = self.local_norm(&diff);
        0.5 * self.log_det_phi
            - 0.5 * self.dim() as f64 * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * local * local
    }
}
