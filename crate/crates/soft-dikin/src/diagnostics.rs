//! Numerical verification of the structural inequalities behind the walk's
//! mixing analysis, plus brute-force statistical oracles.
//!
//! Every checker draws its own points (chord or inscribed-ball draws through
//! the validated witness — never the sampler under test), runs a documented
//! number of trials, and returns a [`LemmaCheckReport`] recording seed,
//! configuration and the worst margin, so any run can be replayed. Trials use
//! per-trial ChaCha8 substreams (`set_stream(trial)`), so reports merge
//! associatively no matter how trials are scheduled.
//!
//! Statistical assertions use a three-standard-error slack; seeds are pinned
//! by callers.

use crate::barrier::{log_barrier_gradient, log_barrier_hessian, BarrierAt, BarrierError, SoftThresholdParams};
use crate::geometry::{GeometryError, Polytope};
use crate::targets::{SmoothnessClass, TargetSpec};
use crate::walk::{acceptance_log_ratio, warm_start_uniform_ball, AcceptanceVariant, WalkError};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("grid oracle supports d <= 2, got d = {0}")]
    DimensionTooLarge(usize),
    #[error("too few samples: have {have}, need {need}")]
    TooFewSamples { have: usize, need: usize },
    #[error("grid oracle: {0}")]
    BadOracle(String),
    #[error("check precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Walk(#[from] WalkError),
}

/// One lemma check: `violations` counts trials where the stated inequality
/// fails by more than `tolerance`; `worst_margin` is the largest observed
/// excess (negative when every trial had slack).
#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheckReport {
    pub lemma_id: String,
    pub trials: u64,
    pub violations: u64,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl LemmaCheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Independent substream for trial `i` of a seeded check.
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// How far one can move from interior `x` along `+-w` while staying interior.
fn chord_extent(p: &Polytope, x: &DVector<f64>, w: &DVector<f64>) -> (f64, f64) {
    let s = p.slacks(x);
    let rates = p.matrix() * w;
    let (mut t_bwd, mut t_fwd) = (f64::INFINITY, f64::INFINITY);
    for j in 0..p.num_constraints() {
        let r = rates[j];
        if r > 0.0 {
            t_fwd = t_fwd.min(s[j] / r);
        } else if r < 0.0 {
            t_bwd = t_bwd.min(s[j] / -r);
        }
    }
    (t_bwd, t_fwd)
}

/// Interior point drawn along a random chord through the witness: uniform
/// position on the chord, reaching within 0.1% of the boundary. Covers the
/// body (including near-boundary regions) without using the sampler under
/// test. Requires a bounded polytope.
pub fn random_interior_point<R: Rng + ?Sized>(p: &Polytope, rng: &mut R) -> DVector<f64> {
    let w = random_unit_vector(p.dim(), rng);
    let (t_bwd, t_fwd) = chord_extent(p, p.witness(), &w);
    assert!(
        t_bwd.is_finite() && t_fwd.is_finite(),
        "diagnostics require a bounded polytope"
    );
    let u: f64 = rng.random_range(-0.999..0.999);
    let t = if u >= 0.0 { u * t_fwd } else { u * t_bwd };
    p.witness() + w * t
}

/// Reversibility identity: both sides of
/// `pi(theta) rho_theta(z) q(theta,z) = pi(z) rho_z(theta) q(z,theta)` in log
/// space on random interior pairs. Exact (to rounding) under `ExactMh`; the
/// `UnhalvedNorms` variant exposes the unhalved-norm discrepancy and is
/// reported, not asserted.
pub fn detailed_balance_check(
    target: &TargetSpec,
    p: &Polytope,
    params: &SoftThresholdParams,
    variant: AcceptanceVariant,
    pairs: u64,
    seed: u64,
) -> Result<LemmaCheckReport, DiagnosticsError> {
    let tolerance = 1e-10;
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for trial in 0..pairs {
        let mut rng = trial_rng(seed, trial);
        let u = random_interior_point(p, &mut rng);
        let v = random_interior_point(p, &mut rng);
        let at_u = BarrierAt::new(p, u.clone(), params)?;
        let at_v = BarrierAt::new(p, v.clone(), params)?;
        let (f_u, f_v) = (target.f(&u), target.f(&v));
        let fwd = acceptance_log_ratio(&at_u, f_u, &at_v, f_v, variant);
        let rev = acceptance_log_ratio(&at_v, f_v, &at_u, f_u, variant);
        let lhs = -f_u + at_u.proposal_log_density(&v) + fwd.min(0.0);
        let rhs = -f_v + at_v.proposal_log_density(&u) + rev.min(0.0);
        let margin = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0);
        worst = worst.max(margin);
        if margin > tolerance {
            violations += 1;
        }
    }
    Ok(LemmaCheckReport {
        lemma_id: "detailed_balance".into(),
        trials: pairs,
        violations,
        worst_margin: worst,
        tolerance,
        seed,
        config: json!({
            "variant": format!("{variant:?}"),
            "alpha": params.alpha(),
            "eta_inv": params.eta_inv(),
            "m": p.num_constraints(),
            "d": p.dim(),
        }),
    })
}

/// Matrix-comparability check: for gated pairs with
/// `sqrt(alpha) |u-v|_{Phi(u)} <= 1/2`, all eigenvalues of
/// `Phi(v)^{-1/2} Phi(u) Phi(v)^{-1/2}` lie in
/// `[(1 - s)^2, (1 + s)^2]` with `s = sqrt(alpha) |u-v|_{Phi(u)}`.
pub fn comparability_check(
    p: &Polytope,
    params: &SoftThresholdParams,
    pairs: u64,
    seed: u64,
) -> Result<LemmaCheckReport, DiagnosticsError> {
    let tolerance = 1e-8;
    let sqrt_alpha = params.alpha().sqrt();
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for trial in 0..pairs {
        let mut rng = trial_rng(seed, trial);
        let u = random_interior_point(p, &mut rng);
        let at_u = BarrierAt::new(p, u.clone(), params)?;
        // aim for a gate value in (0, 1/2]; shrinking to stay interior only
        // lowers it
        let dir = random_unit_vector(p.dim(), &mut rng);
        let gate_target: f64 = rng.random_range(0.02..0.5);
        let mut step = &dir * (gate_target / (sqrt_alpha * at_u.local_norm(&dir)));
        let mut v = &u + &step;
        for _ in 0..200 {
            if p.contains_interior(&v) {
                break;
            }
            step *= 0.5;
            v = &u + &step;
        }
        if !p.contains_interior(&v) {
            v = u.clone();
        }
        let gate = sqrt_alpha * at_u.local_norm(&(&v - &u));
        debug_assert!(gate <= 0.5 + 1e-12);
        let at_v = BarrierAt::new(p, v.clone(), params)?;

        // whitened matrix F_v^{-1} Phi(u) F_v^{-T}
        let f_v = at_v.factor();
        let x = f_v
            .solve_lower_triangular(at_u.phi())
            .expect("factor is nonsingular");
        let mut m = f_v
            .solve_lower_triangular(&x.transpose())
            .expect("factor is nonsingular");
        // symmetrize rounding noise before the symmetric eigensolver
        m = (&m + m.transpose()) * 0.5;
        let eigs = m.symmetric_eigenvalues();
        let lo = (1.0 - gate) * (1.0 - gate);
        let hi = (1.0 + gate) * (1.0 + gate);
        let mut margin: f64 = f64::NEG_INFINITY;
        for &lambda in eigs.iter() {
            margin = margin.max(lo - lambda).max(lambda - hi);
        }
        worst = worst.max(margin);
        if margin > tolerance {
            violations += 1;
        }
    }
    Ok(LemmaCheckReport {
        lemma_id: "comparability".into(),
        trials: pairs,
        violations,
        worst_margin: worst,
        tolerance,
        seed,
        config: json!({
            "alpha": params.alpha(),
            "eta_inv": params.eta_inv(),
            "m": p.num_constraints(),
            "d": p.dim(),
            "gate": "sqrt(alpha) |u-v|_{Phi(u)} <= 1/2",
        }),
    })
}

/// Cross-ratio lower bound with the proved constant:
/// `sigma(u,v)^2 >= |u-v|^2_{Phi(u)} / (2 m alpha^-1 + 2 eta^-1 R^2) - 1e-9`.
pub fn cross_ratio_bound_check(
    p: &Polytope,
    params: &SoftThresholdParams,
    r_bound: f64,
    pairs: u64,
    seed: u64,
) -> Result<LemmaCheckReport, DiagnosticsError> {
    let tolerance = 1e-9;
    let denom = 2.0 * p.num_constraints() as f64 / params.alpha()
        + 2.0 * params.eta_inv() * r_bound * r_bound;
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for trial in 0..pairs {
        let mut rng = trial_rng(seed, trial);
        let u = random_interior_point(p, &mut rng);
        let v = random_interior_point(p, &mut rng);
        let sigma = p.cross_ratio(&u, &v)?;
        let at_u = BarrierAt::new(p, u.clone(), params)?;
        let local = at_u.local_norm(&(&u - &v));
        let margin = local * local / denom - sigma * sigma;
        worst = worst.max(margin);
        if margin > tolerance {
            violations += 1;
        }
    }
    Ok(LemmaCheckReport {
        lemma_id: "cross_ratio".into(),
        trials: pairs,
        violations,
        worst_margin: worst,
        tolerance,
        seed,
        config: json!({
            "alpha": params.alpha(),
            "eta_inv": params.eta_inv(),
            "r_bound": r_bound,
            "m": p.num_constraints(),
            "d": p.dim(),
            "constant": "2 m alpha^-1 + 2 eta^-1 R^2",
        }),
    })
}

fn anchor_points(p: &Polytope, count: u64, seed: u64) -> Vec<DVector<f64>> {
    let ball = p
        .inscribed_radius_at(p.witness())
        .expect("witness is interior");
    (0..count)
        .map(|i| {
            let mut rng = trial_rng(seed, u64::MAX - i);
            warm_start_uniform_ball(&ball, p, &mut rng)
        })
        .collect()
}

/// Acceptance-event rate: per anchor, the probability that the full
/// acceptance ratio (interiority indicator included, unhalved norm terms as
/// displayed in the algorithm) is at least 3/10 must be at least
/// `1/3 - 3 stderr`.
pub fn acceptance_event_rate(
    target: &TargetSpec,
    p: &Polytope,
    params: &SoftThresholdParams,
    anchors: u64,
    proposals_per_anchor: u64,
    seed: u64,
) -> Result<LemmaCheckReport, DiagnosticsError> {
    let threshold = (0.3f64).ln();
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (i, anchor) in anchor_points(p, anchors, seed).into_iter().enumerate() {
        let at = BarrierAt::new(p, anchor.clone(), params)?;
        let f_a = target.f(&anchor);
        let mut hits = 0u64;
        for trial in 0..proposals_per_anchor {
            let mut rng = trial_rng(seed, i as u64 * proposals_per_anchor + trial);
            let z = at.sample_proposal(&mut rng);
            if !p.contains_interior(&z) {
                continue;
            }
            let z_at = BarrierAt::new(p, z.clone(), params)?;
            let r = acceptance_log_ratio(&at, f_a, &z_at, target.f(&z), AcceptanceVariant::UnhalvedNorms);
            if r >= threshold {
                hits += 1;
            }
        }
        let n = proposals_per_anchor as f64;
        let rate = hits as f64 / n;
        let stderr = (rate * (1.0 - rate) / n).sqrt();
        let margin = (1.0 / 3.0 - 3.0 * stderr) - rate;
        worst = worst.max(margin);
        if margin > 0.0 {
            violations += 1;
        }
    }
    Ok(LemmaCheckReport {
        lemma_id: "acceptance_event".into(),
        trials: anchors,
        violations,
        worst_margin: worst,
        tolerance: 0.0,
        seed,
        config: json!({
            "alpha": params.alpha(),
            "eta_inv": params.eta_inv(),
            "proposals_per_anchor": proposals_per_anchor,
            "event": "ratio >= 3/10 with rate >= 1/3 - 3 stderr",
            "variant": "UnhalvedNorms",
        }),
    })
}

/// Step-norm tail: with `eta^-1 > 0`, the fraction of proposals with
/// `|z - theta|_2 > sqrt(40 d eta)` is at most `1/100 + 3 stderr` per anchor.
pub fn step_norm_tail_check(
    p: &Polytope,
    params: &SoftThresholdParams,
    anchors: u64,
    draws_per_anchor: u64,
    seed: u64,
) -> Result<LemmaCheckReport, DiagnosticsError> {
    if params.eta_inv() <= 0.0 {
        return Err(DiagnosticsError::Precondition(
            "step-norm tail check needs eta^-1 > 0".into(),
        ));
    }
    let eta = 1.0 / params.eta_inv();
    let threshold = (40.0 * p.dim() as f64 * eta).sqrt();
    let n = draws_per_anchor as f64;
    let bound = 0.01 + 3.0 * (0.01 * 0.99 / n).sqrt();
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (i, anchor) in anchor_points(p, anchors, seed).into_iter().enumerate() {
        let at = BarrierAt::new(p, anchor, params)?;
        let mut tail = 0u64;
        for trial in 0..draws_per_anchor {
            let mut rng = trial_rng(seed, i as u64 * draws_per_anchor + trial);
            let z = at.sample_proposal(&mut rng);
            if (z - at.theta()).norm() > threshold {
                tail += 1;
            }
        }
        let margin = tail as f64 / n - bound;
        worst = worst.max(margin);
        if margin > 0.0 {
            violations += 1;
        }
    }
    Ok(LemmaCheckReport {
        lemma_id: "step_norm_tail".into(),
        trials: anchors,
        violations,
        worst_margin: worst,
        tolerance: 0.0,
        seed,
        config: json!({
            "alpha": params.alpha(),
            "eta_inv": params.eta_inv(),
            "threshold": threshold,
            "draws_per_anchor": draws_per_anchor,
            "bound": "1/100 + 3 stderr",
        }),
    })
}

/// Density-ratio event rate. Lipschitz branch:
/// `P(pi(z)/pi(theta) >= 99/100) >= 99/100 - 3 stderr`. Smooth-only branch is
/// asserted at the 49/100 level implied by the halving argument (the
/// nominal 99/100 level does not survive the halving argument). `Both`
/// targets use the branch that set the regularizer (the smaller of `L^2` and
/// `beta`).
pub fn density_ratio_check(
    target: &TargetSpec,
    p: &Polytope,
    params: &SoftThresholdParams,
    anchors: u64,
    draws_per_anchor: u64,
    seed: u64,
) -> Result<LemmaCheckReport, DiagnosticsError> {
    let lipschitz_branch = match target.class() {
        SmoothnessClass::Lipschitz(_) => true,
        SmoothnessClass::Smooth(_) => false,
        SmoothnessClass::Both { lipschitz, smooth } => lipschitz * lipschitz <= smooth,
    };
    let level = if lipschitz_branch { 0.99 } else { 0.49 };
    let event_threshold = (0.99f64).ln(); // pi(z)/pi(theta) >= 99/100
    let n = draws_per_anchor as f64;
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (i, anchor) in anchor_points(p, anchors, seed).into_iter().enumerate() {
        let at = BarrierAt::new(p, anchor.clone(), params)?;
        let f_a = target.f(&anchor);
        let mut hits = 0u64;
        for trial in 0..draws_per_anchor {
            let mut rng = trial_rng(seed, i as u64 * draws_per_anchor + trial);
            let z = at.sample_proposal(&mut rng);
            if f_a - target.f(&z) >= event_threshold {
                hits += 1;
            }
        }
        let rate = hits as f64 / n;
        let stderr = (rate * (1.0 - rate) / n).sqrt().max((level * (1.0 - level) / n).sqrt());
        let margin = (level - 3.0 * stderr) - rate;
        worst = worst.max(margin);
        if margin > 0.0 {
            violations += 1;
        }
    }
    Ok(LemmaCheckReport {
        lemma_id: "density_ratio".into(),
        trials: anchors,
        violations,
        worst_margin: worst,
        tolerance: 0.0,
        seed,
        config: json!({
            "alpha": params.alpha(),
            "eta_inv": params.eta_inv(),
            "branch": if lipschitz_branch { "lipschitz (level 99/100)" } else { "smooth (level 49/100)" },
            "draws_per_anchor": draws_per_anchor,
        }),
    })
}

/// Self-concordance of `g = log-barrier + (alpha_quad/2) x^T x`:
/// `|h^T grad g(x)| <= sqrt((4 nu' + 4 alpha_quad R^2) h^T hess g(x) h) + 1e-8`
/// on random interior points and unit directions, with the log-barrier
/// gradient and Hessian in closed form.
pub fn self_concordance_check(
    p: &Polytope,
    alpha_quad: f64,
    r_bound: f64,
    nu_prime: f64,
    samples: u64,
    seed: u64,
) -> Result<LemmaCheckReport, DiagnosticsError> {
    let tolerance = 1e-8;
    let nu = 4.0 * nu_prime + 4.0 * alpha_quad * r_bound * r_bound;
    let mut violations = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for trial in 0..samples {
        let mut rng = trial_rng(seed, trial);
        let x = random_interior_point(p, &mut rng);
        let h = random_unit_vector(p.dim(), &mut rng);
        let grad = log_barrier_gradient(p, &x)? + &x * alpha_quad;
        let hess = log_barrier_hessian(p, &x)?;
        let quad = (&hess * &h).dot(&h) + alpha_quad * h.norm_squared();
        let lhs = h.dot(&grad).abs(); // covers both h and -h
        let rhs = (nu * quad).sqrt();
        let margin = lhs - rhs - tolerance;
        worst = worst.max(margin);
        if margin > 0.0 {
            violations += 1;
        }
    }
    Ok(LemmaCheckReport {
        lemma_id: "self_concordance".into(),
        trials: samples,
        violations,
        worst_margin: worst,
        tolerance,
        seed,
        config: json!({
            "alpha_quad": alpha_quad,
            "r_bound": r_bound,
            "nu_prime": nu_prime,
            "nu": nu,
        }),
    })
}

/// Brute-force quadrature truth for `pi ∝ exp(-f)` on a `d <= 2` polytope:
/// cell masses by midpoint rule, boundary cells clipped by a 16-point
/// subsample. Masses are normalized to sum to one.
#[derive(Debug, Clone)]
pub struct GridOracle {
    dim: usize,
    resolution: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    masses: Vec<f64>,
}

impl GridOracle {
    pub fn new(p: &Polytope, target: &TargetSpec, resolution: usize) -> Result<Self, DiagnosticsError> {
        let d = p.dim();
        if d > 2 {
            return Err(DiagnosticsError::DimensionTooLarge(d));
        }
        if resolution < 2 {
            return Err(DiagnosticsError::BadOracle("resolution must be >= 2".into()));
        }
        let (lo, hi) = bounding_box(p)?;
        let cells = if d == 1 { resolution } else { resolution * resolution };
        let width: Vec<f64> = (0..d).map(|k| (hi[k] - lo[k]) / resolution as f64).collect();
        let cell_vol: f64 = width.iter().product();
        let mut masses = vec![0.0; cells];
        let mut corner = DVector::zeros(d);
        let mut point = DVector::zeros(d);
        for (idx, mass) in masses.iter_mut().enumerate() {
            let cell_coord = |k: usize| -> usize {
                if d == 1 {
                    idx
                } else if k == 0 {
                    idx % resolution
                } else {
                    idx / resolution
                }
            };
            // fully-inside test: all cell corners strictly interior
            let mut fully_inside = true;
            let corners = 1usize << d;
            'corners: for c in 0..corners {
                for k in 0..d {
                    let off = if c >> k & 1 == 1 { 1 } else { 0 };
                    corner[k] = lo[k] + (cell_coord(k) + off) as f64 * width[k];
                }
                if !p.contains_interior(&corner) {
                    fully_inside = false;
                    break 'corners;
                }
            }
            if fully_inside {
                for k in 0..d {
                    point[k] = lo[k] + (cell_coord(k) as f64 + 0.5) * width[k];
                }
                *mass = (-target.f(&point)).exp() * cell_vol;
            } else {
                // 16 sub-points: 4x4 midpoints in 2-d, 16 midpoints in 1-d
                let (sub, subcells) = if d == 1 { (16, 16) } else { (4, 16) };
                let mut acc = 0.0;
                for s in 0..subcells {
                    for k in 0..d {
                        let si = if d == 1 {
                            s
                        } else if k == 0 {
                            s % sub
                        } else {
                            s / sub
                        };
                        point[k] = lo[k]
                            + cell_coord(k) as f64 * width[k]
                            + (si as f64 + 0.5) * width[k] / sub as f64;
                    }
                    if p.contains_interior(&point) {
                        acc += (-target.f(&point)).exp();
                    }
                }
                *mass = acc * cell_vol / subcells as f64;
            }
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(DiagnosticsError::BadOracle("no interior mass on the grid".into()));
        }
        for m in &mut masses {
            *m /= total;
        }
        Ok(Self {
            dim: d,
            resolution,
            lo,
            hi,
            masses,
        })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn cells(&self) -> usize {
        self.masses.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Index of the cell containing `point`; `None` outside the grid box.
    pub fn cell_index(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim {
            return None;
        }
        let mut idx = 0usize;
        for k in (0..self.dim).rev() {
            let w = (self.hi[k] - self.lo[k]) / self.resolution as f64;
            let rel = (point[k] - self.lo[k]) / w;
            if !(0.0..=self.resolution as f64).contains(&rel) {
                return None;
            }
            let cell = (rel as usize).min(self.resolution - 1);
            idx = idx * self.resolution + cell;
        }
        Some(idx)
    }

    /// Midpoint of cell `idx`.
    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut rest = idx;
        for (k, slot) in out.iter_mut().enumerate() {
            let c = rest % self.resolution;
            rest /= self.resolution;
            let w = (self.hi[k] - self.lo[k]) / self.resolution as f64;
            *slot = self.lo[k] + (c as f64 + 0.5) * w;
        }
        out
    }

    /// `n` multinomial draws from the oracle's own cell masses, reported as
    /// cell midpoints. The calibration path for TV noise floors.
    pub fn sample_multinomial<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let mut cdf = Vec::with_capacity(self.masses.len());
        let mut acc = 0.0;
        for &m in &self.masses {
            acc += m;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let cell = cdf.partition_point(|&c| c < u).min(self.masses.len() - 1);
                self.cell_center(cell)
            })
            .collect()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }
}

/// Bounding box of a bounded `d <= 2` polytope: chord extents in 1-d, vertex
/// enumeration over constraint pairs in 2-d.
fn bounding_box(p: &Polytope) -> Result<(Vec<f64>, Vec<f64>), DiagnosticsError> {
    let d = p.dim();
    if d == 1 {
        let w = DVector::from_element(1, 1.0);
        let (t_bwd, t_fwd) = chord_extent(p, p.witness(), &w);
        if !(t_bwd.is_finite() && t_fwd.is_finite()) {
            return Err(DiagnosticsError::BadOracle("polytope is unbounded".into()));
        }
        let x = p.witness()[0];
        return Ok((vec![x - t_bwd], vec![x + t_fwd]));
    }
    let a = p.matrix();
    let b = p.offsets();
    let m = p.num_constraints();
    let mut lo = vec![f64::INFINITY; 2];
    let mut hi = vec![f64::NEG_INFINITY; 2];
    let mut found = false;
    for i in 0..m {
        for j in (i + 1)..m {
            let det = a[(i, 0)] * a[(j, 1)] - a[(i, 1)] * a[(j, 0)];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (b[i] * a[(j, 1)] - b[j] * a[(i, 1)]) / det;
            let y = (a[(i, 0)] * b[j] - a[(j, 0)] * b[i]) / det;
            let vertex = DVector::from_column_slice(&[x, y]);
            let s = p.slacks(&vertex);
            if s.iter().enumerate().all(|(r, &sv)| sv >= -1e-9 * (1.0 + b[r].abs())) {
                found = true;
                lo[0] = lo[0].min(x);
                lo[1] = lo[1].min(y);
                hi[0] = hi[0].max(x);
                hi[1] = hi[1].max(y);
            }
        }
    }
    if !found || lo[0] >= hi[0] || lo[1] >= hi[1] {
        return Err(DiagnosticsError::BadOracle(
            "could not enumerate a bounded vertex set".into(),
        ));
    }
    Ok((lo, hi))
}

/// Upwardly biased TV estimate over the grid partition:
/// `0.5 sum_cells |empirical - oracle|`. Samples outside the grid box count
/// as misplaced mass. Requires at least `10 * cells` samples.
pub fn grid_tv_estimate(samples: &[Vec<f64>], oracle: &GridOracle) -> Result<f64, DiagnosticsError> {
    if samples.is_empty() {
        return Err(DiagnosticsError::TooFewSamples { have: 0, need: 1 });
    }
    let need = 10 * oracle.cells();
    if samples.len() < need {
        return Err(DiagnosticsError::TooFewSamples {
            have: samples.len(),
            need,
        });
    }
    let mut counts = vec![0u64; oracle.cells()];
    let mut outside = 0u64;
    for s in samples {
        match oracle.cell_index(s) {
            Some(idx) => counts[idx] += 1,
            None => outside += 1,
        }
    }
    let n = samples.len() as f64;
    let mut tv = outside as f64 / n;
    for (c, &mass) in counts.iter().zip(oracle.masses()) {
        tv += (*c as f64 / n - mass).abs();
    }
    Ok(0.5 * tv)
}

/// Initial-positive-sequence (Geyer) effective sample size, per coordinate.
/// Raw estimates above `n` (antithetic chains) clamp to `n`; a constant
/// coordinate reports the 1.0 floor.
pub fn ess(samples: &[Vec<f64>]) -> Result<Vec<f64>, DiagnosticsError> {
    let n = samples.len();
    if n < 100 {
        return Err(DiagnosticsError::TooFewSamples { have: n, need: 100 });
    }
    let dim = samples[0].len();
    let max_lag = (n - 2).min(1000);
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim {
        let series: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let mean = series.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
        let gamma = |lag: usize| -> f64 {
            let mut acc = 0.0;
            for i in 0..n - lag {
                acc += centered[i] * centered[i + lag];
            }
            acc / n as f64
        };
        let g0 = gamma(0);
        if g0 < 1e-300 {
            out.push(1.0);
            continue;
        }
        // tau = -1 + 2 sum of positive pair sums (rho_{2t} + rho_{2t+1})
        let mut tau = -1.0;
        let mut lag = 0usize;
        while lag < max_lag {
            let pair = (gamma(lag) + gamma(lag + 1)) / g0;
            if pair <= 0.0 {
                break;
            }
            tau += 2.0 * pair;
            lag += 2;
        }
        let raw = if tau <= 0.0 { f64::INFINITY } else { n as f64 / tau };
        out.push(raw.clamp(1.0, n as f64));
    }
    Ok(out)
}
