//! The soft-threshold Dikin walk: hyperparameter selection, the lazy
//! Metropolis step, chain execution, and warm starts.
//!
//! Default step-size rule (constants overridable for desk-scale runs):
//!
//! ```text
//! alpha   = 1 / (c_alpha * d)                          c_alpha default 1e5
//! eta^-1  = c_eta * d * L^2      (L-Lipschitz f)       c_eta   default 1e4
//!         = c_eta * d * beta     (beta-smooth f)
//!         = c_eta * d * min(L^2, beta)   (both declared)
//! T       = ceil(c_t * (2 m alpha^-1 + eta^-1 R^2) * log(w / delta))
//!                                                      c_t     default 1e9
//! ```
//!
//! With the default constants the prescribed `T` is astronomically large even
//! at d ~ 10; every run report records which constants were actually used.
//!
//! Acceptance-rule variants: `ExactMh` (default) accepts with the exact
//! Metropolis-Hastings ratio `pi(z) rho_z(theta) / (pi(theta) rho_theta(z))`,
//! whose Gaussian expansion halves the two squared-norm terms; this makes
//! detailed balance an identity. `UnhalvedNorms` keeps the squared norms
//! unhalved and is retained, behind the flag, for comparison studies only.

use crate::barrier::{BarrierAt, BarrierError, SoftThresholdParams};
use crate::geometry::{InnerBall, Polytope};
use crate::targets::{SmoothnessClass, TargetSpec};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("starting point is not strictly interior")]
    InvalidStart,
    #[error("invalid walk configuration: {0}")]
    InvalidConfig(String),
    #[error("step count overflows: {0}")]
    Overflow(String),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

/// Overridable constants of the step-size and step-count rules. Defaults are
/// the conservative values the mixing guarantee is stated with;
/// `practical()` is the desk-scale override.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperConstants {
    pub c_alpha: f64,
    pub c_eta: f64,
    pub c_t: f64,
}

impl HyperConstants {
    pub fn theory() -> Self {
        Self {
            c_alpha: 1e5,
            c_eta: 1e4,
            c_t: 1e9,
        }
    }

    /// Unit constants for desk-scale experiments; off the guaranteed setting,
    /// so reports must echo them.
    pub fn practical() -> Self {
        Self {
            c_alpha: 1.0,
            c_eta: 1.0,
            c_t: 1.0,
        }
    }
}

impl Default for HyperConstants {
    fn default() -> Self {
        Self::theory()
    }
}

/// Step-size selection from the declared smoothness class.
pub fn default_hyperparameters(
    d: usize,
    class: SmoothnessClass,
    constants: &HyperConstants,
) -> Result<SoftThresholdParams, WalkError> {
    if d == 0 {
        return Err(WalkError::InvalidConfig("dimension must be >= 1".into()));
    }
    let dd = d as f64;
    let alpha = 1.0 / (constants.c_alpha * dd);
    let eta_inv = match class {
        SmoothnessClass::Lipschitz(l) => constants.c_eta * dd * l * l,
        SmoothnessClass::Smooth(b) => constants.c_eta * dd * b,
        SmoothnessClass::Both { lipschitz, smooth } => {
            constants.c_eta * dd * (lipschitz * lipschitz).min(smooth)
        }
    };
    Ok(SoftThresholdParams::new(alpha, eta_inv)?)
}

/// Warmness certificate `w = exp(d log(R/r) + M)` for a start drawn uniformly
/// from an inscribed ball of radius `r`; `M` bounds the potential gap
/// `max_K e^{-f} / e^{-f(center)}` in log space.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Warmness {
    pub value: f64,
    pub overflowed: bool,
}

pub fn warmness_bound(d: usize, r_outer: f64, r_inner: f64, m_gap: f64) -> Result<Warmness, WalkError> {
    if !(r_inner > 0.0 && r_outer >= r_inner && m_gap >= 0.0) {
        return Err(WalkError::InvalidConfig(format!(
            "warmness needs R >= r > 0 and M >= 0, got R={r_outer}, r={r_inner}, M={m_gap}"
        )));
    }
    let exponent = d as f64 * (r_outer / r_inner).ln() + m_gap;
    let value = exponent.exp();
    Ok(Warmness {
        value: if value.is_finite() { value } else { f64::INFINITY },
        overflowed: !value.is_finite(),
    })
}

/// Step budget `ceil(c_t (2 m alpha^-1 + eta^-1 R^2) log(w/delta))`.
pub fn step_count(
    m: usize,
    params: &SoftThresholdParams,
    radius: f64,
    warmness: f64,
    delta: f64,
    c_t: f64,
) -> Result<u64, WalkError> {
    if !(warmness >= 1.0) {
        return Err(WalkError::InvalidConfig(format!("warmness must be >= 1, got {warmness}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(WalkError::InvalidConfig(format!("delta must be in (0,1), got {delta}")));
    }
    if !(radius > 0.0) {
        return Err(WalkError::InvalidConfig(format!("radius must be > 0, got {radius}")));
    }
    let t = c_t
        * (2.0 * m as f64 / params.alpha() + params.eta_inv() * radius * radius)
        * (warmness / delta).ln();
    if !t.is_finite() || t > u64::MAX as f64 {
        return Err(WalkError::Overflow(format!("T = {t:e} exceeds the integer range")));
    }
    Ok(t.ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AcceptanceVariant {
    /// Exact Metropolis-Hastings ratio; detailed balance holds identically.
    ExactMh,
    /// The acceptance formula with unhalved squared-norm terms, for
    /// comparison studies.
    UnhalvedNorms,
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkConfig {
    #[serde(skip)]
    pub params: SoftThresholdParams,
    pub steps: u64,
    pub laziness: f64,
    pub variant: AcceptanceVariant,
    pub seed: u64,
    pub constants: HyperConstants,
}

impl WalkConfig {
    pub fn new(params: SoftThresholdParams, steps: u64, seed: u64) -> Self {
        Self {
            params,
            steps,
            laziness: 0.5,
            variant: AcceptanceVariant::ExactMh,
            seed,
            constants: HyperConstants::theory(),
        }
    }

    pub fn with_laziness(mut self, laziness: f64) -> Result<Self, WalkError> {
        if !(laziness > 0.0 && laziness <= 1.0) {
            return Err(WalkError::InvalidConfig(format!(
                "laziness must be in (0, 1], got {laziness}"
            )));
        }
        self.laziness = laziness;
        Ok(self)
    }

    pub fn with_variant(mut self, variant: AcceptanceVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_constants(mut self, constants: HyperConstants) -> Self {
        self.constants = constants;
        self
    }
}

/// Current chain position with its cached barrier state and potential value.
/// `accepted_moves` counts accepted transitions; rejected steps return the
/// state untouched, caches included.
#[derive(Debug, Clone)]
pub struct ChainState {
    at: BarrierAt,
    f_value: f64,
    accepted_moves: u64,
}

impl ChainState {
    pub fn new(
        p: &Polytope,
        target: &TargetSpec,
        theta0: DVector<f64>,
        params: &SoftThresholdParams,
    ) -> Result<Self, WalkError> {
        if !p.contains_interior(&theta0) {
            return Err(WalkError::InvalidStart);
        }
        let f_value = target.f(&theta0);
        let at = BarrierAt::new(p, theta0, params)?;
        Ok(Self {
            at,
            f_value,
            accepted_moves: 0,
        })
    }

    pub fn barrier(&self) -> &BarrierAt {
        &self.at
    }

    pub fn theta(&self) -> &DVector<f64> {
        self.at.theta()
    }

    pub fn f_value(&self) -> f64 {
        self.f_value
    }

    pub fn accepted_moves(&self) -> u64 {
        self.accepted_moves
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepKind {
    Accepted,
    RejectedOutside,
    RejectedMh,
    RejectedLazy,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub kind: StepKind,
    pub proposal: DVector<f64>,
    /// Log acceptance ratio; absent when the proposal left the polytope.
    pub log_ratio: Option<f64>,
}

/// Log of the acceptance ratio for moving `current -> proposal`.
///
/// `ExactMh`:
/// `(f(theta) - f(z)) + (log det Phi(z) - log det Phi(theta))/2
///  + |z-theta|^2_{Phi(theta)}/2 - |theta-z|^2_{Phi(z)}/2`.
/// `UnhalvedNorms` keeps the two norm terms unhalved.
pub fn acceptance_log_ratio(
    current: &BarrierAt,
    f_current: f64,
    proposal: &BarrierAt,
    f_proposal: f64,
    variant: AcceptanceVariant,
) -> f64 {
    let diff = proposal.theta() - current.theta();
    let norm_fwd = current.local_norm(&diff);
    let norm_rev = proposal.local_norm(&diff);
    let det_term = 0.5 * (proposal.log_det_phi() - current.log_det_phi());
    let norm_term = norm_fwd * norm_fwd - norm_rev * norm_rev;
    let scale = match variant {
        AcceptanceVariant::ExactMh => 0.5,
        AcceptanceVariant::UnhalvedNorms => 1.0,
    };
    (f_current - f_proposal) + det_term + scale * norm_term
}

/// Classifies the accept/reject draw. Acceptance probability is
/// `laziness * min(1, exp(log_ratio))`; the lazy share of the rejection mass
/// is attributed first.
fn decide(u: f64, laziness: f64, log_ratio: f64) -> StepKind {
    if u >= laziness {
        StepKind::RejectedLazy
    } else if log_ratio >= 0.0 || u < laziness * log_ratio.exp() {
        StepKind::Accepted
    } else {
        StepKind::RejectedMh
    }
}

/// One transition of the chain. Draws `d` standard normals for the proposal
/// and, only when the proposal is interior, one uniform for the
/// accept/reject decision. Rejections return the input state unchanged
/// (caches are reused, not recomputed).
pub fn step<R: Rng + ?Sized>(
    state: ChainState,
    target: &TargetSpec,
    p: &Polytope,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<(ChainState, StepOutcome), WalkError> {
    let z = state.at.sample_proposal(rng);
    if !p.contains_interior(&z) {
        let outcome = StepOutcome {
            kind: StepKind::RejectedOutside,
            proposal: z,
            log_ratio: None,
        };
        return Ok((state, outcome));
    }
    let z_at = BarrierAt::new(p, z.clone(), &cfg.params)?;
    let f_z = target.f(&z);
    let log_ratio = acceptance_log_ratio(&state.at, state.f_value, &z_at, f_z, cfg.variant);
    let u: f64 = rng.random();
    let kind = decide(u, cfg.laziness, log_ratio);
    let next = match kind {
        StepKind::Accepted => ChainState {
            at: z_at,
            f_value: f_z,
            accepted_moves: state.accepted_moves + 1,
        },
        _ => state,
    };
    Ok((
        next,
        StepOutcome {
            kind,
            proposal: z,
            log_ratio: Some(log_ratio),
        },
    ))
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StepNormStats {
    pub proposal_mean: f64,
    pub proposal_max: f64,
    pub accepted_mean: f64,
    pub accepted_max: f64,
}

/// Everything a chain run produces: the retained states (initial point
/// first, then every `thin`-th state), outcome counts by cause, the mean
/// acceptance probability, and Euclidean step-norm statistics.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub dim: usize,
    pub steps: u64,
    pub thin: u64,
    pub accepted: u64,
    pub rejected_outside: u64,
    pub rejected_mh: u64,
    pub rejected_lazy: u64,
    pub mean_acceptance_probability: f64,
    pub step_norms: StepNormStats,
    pub laziness: f64,
    pub variant: AcceptanceVariant,
    pub alpha: f64,
    pub eta_inv: f64,
    pub samples: Vec<Vec<f64>>,
}

impl RunReport {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    pub fn sample_vectors(&self) -> Vec<DVector<f64>> {
        self.samples
            .iter()
            .map(|row| DVector::from_column_slice(row))
            .collect()
    }
}

/// Runs `cfg.steps` transitions from `theta0`, retaining the initial state
/// and every `thin`-th state thereafter. Deterministic given the rng state
/// and inputs.
pub fn run_chain<R: Rng + ?Sized>(
    theta0: DVector<f64>,
    target: &TargetSpec,
    p: &Polytope,
    cfg: &WalkConfig,
    thin: u64,
    rng: &mut R,
) -> Result<RunReport, WalkError> {
    if thin == 0 {
        return Err(WalkError::InvalidConfig("thin must be >= 1".into()));
    }
    let mut state = ChainState::new(p, target, theta0, &cfg.params)?;
    let mut samples = Vec::with_capacity(1 + (cfg.steps / thin) as usize);
    samples.push(state.theta().iter().copied().collect::<Vec<f64>>());

    let (mut accepted, mut rejected_outside, mut rejected_mh, mut rejected_lazy) = (0u64, 0, 0, 0);
    let mut accept_prob_sum = 0.0;
    let (mut prop_sum, mut prop_max, mut acc_sum, mut acc_max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);

    for i in 1..=cfg.steps {
        let prev_theta = state.theta().clone();
        let (next, outcome) = step(state, target, p, cfg, rng)?;
        state = next;
        let step_norm = (&outcome.proposal - &prev_theta).norm();
        prop_sum += step_norm;
        prop_max = prop_max.max(step_norm);
        match outcome.kind {
            StepKind::Accepted => {
                accepted += 1;
                acc_sum += step_norm;
                acc_max = acc_max.max(step_norm);
            }
            StepKind::RejectedOutside => rejected_outside += 1,
            StepKind::RejectedMh => rejected_mh += 1,
            StepKind::RejectedLazy => rejected_lazy += 1,
        }
        if let Some(r) = outcome.log_ratio {
            accept_prob_sum += cfg.laziness * r.exp().min(1.0);
        }
        if i % thin == 0 {
            samples.push(state.theta().iter().copied().collect());
        }
    }

    Ok(RunReport {
        dim: p.dim(),
        steps: cfg.steps,
        thin,
        accepted,
        rejected_outside,
        rejected_mh,
        rejected_lazy,
        mean_acceptance_probability: if cfg.steps == 0 {
            0.0
        } else {
            accept_prob_sum / cfg.steps as f64
        },
        step_norms: StepNormStats {
            proposal_mean: if cfg.steps == 0 { 0.0 } else { prop_sum / cfg.steps as f64 },
            proposal_max: prop_max,
            accepted_mean: if accepted == 0 { 0.0 } else { acc_sum / accepted as f64 },
            accepted_max: acc_max,
        },
        laziness: cfg.laziness,
        variant: cfg.variant,
        alpha: cfg.params.alpha(),
        eta_inv: cfg.params.eta_inv(),
        samples,
    })
}

/// Uniform draw from a certified inscribed ball: Gaussian direction, radius
/// `r * U^{1/d}`. Redraws on the (measure-zero, float-rounding) event that
/// the draw is not strictly interior.
pub fn warm_start_uniform_ball<R: Rng + ?Sized>(
    ball: &InnerBall,
    p: &Polytope,
    rng: &mut R,
) -> DVector<f64> {
    let d = ball.center.len();
    loop {
        let mut dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        dir /= norm;
        let u: f64 = rng.random();
        let radius = ball.radius * u.powf(1.0 / d as f64);
        let theta = &ball.center + dir * radius;
        if p.contains_interior(&theta) {
            return theta;
        }
    }
}
