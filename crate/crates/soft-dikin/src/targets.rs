//! Potential oracles `f` with declared smoothness classes.
//!
//! The walk never sees gradients: a target is a value oracle plus the
//! constants (`L`, `beta`, `R`) that drive hyperparameter selection. Declared
//! constants only need to be valid upper bounds — a smaller step scale is
//! always safe — and the audit helpers spot-check them by sampling (they can
//! warn, never prove).

use crate::geometry::{GeometryError, Polytope};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("dataset row {row} has norm {norm} > 1; logistic-Lasso requires unit-norm rows")]
    RowNormExceeded { row: usize, norm: f64 },
    #[error("invalid target parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Declared smoothness of the potential: `L`-Lipschitz, `beta`-smooth, or
/// both. Constants are upper bounds over `K`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum SmoothnessClass {
    Lipschitz(f64),
    Smooth(f64),
    Both { lipschitz: f64, smooth: f64 },
}

impl SmoothnessClass {
    pub fn lipschitz(&self) -> Option<f64> {
        match *self {
            SmoothnessClass::Lipschitz(l) | SmoothnessClass::Both { lipschitz: l, .. } => Some(l),
            SmoothnessClass::Smooth(_) => None,
        }
    }

    pub fn smooth(&self) -> Option<f64> {
        match *self {
            SmoothnessClass::Smooth(b) | SmoothnessClass::Both { smooth: b, .. } => Some(b),
            SmoothnessClass::Lipschitz(_) => None,
        }
    }

    fn validate(&self) -> Result<(), TargetError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        let valid = match *self {
            SmoothnessClass::Lipschitz(l) => ok(l),
            SmoothnessClass::Smooth(b) => ok(b),
            SmoothnessClass::Both { lipschitz, smooth } => ok(lipschitz) && ok(smooth),
        };
        if valid {
            Ok(())
        } else {
            Err(TargetError::InvalidParameter(format!(
                "smoothness constants must be finite and nonnegative, got {self:?}"
            )))
        }
    }
}

type Oracle = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// A log-density oracle for `pi ∝ exp(-f)`: the value oracle, its declared
/// smoothness class, and a radius `R` of a ball containing `K`.
///
/// `R` is user-supplied, never computed — exact circumradii are expensive and
/// any valid upper bound works. Oracles must be pure functions of `theta`,
/// safe for concurrent evaluation.
#[derive(Clone)]
pub struct TargetSpec {
    oracle: Oracle,
    class: SmoothnessClass,
    radius: f64,
}

impl std::fmt::Debug for TargetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetSpec")
            .field("class", &self.class)
            .field("radius", &self.radius)
            .finish_non_exhaustive()
    }
}

fn check_radius(r: f64) -> Result<(), TargetError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(TargetError::InvalidParameter(format!("radius must be positive, got {r}")))
    }
}

impl TargetSpec {
    /// Wraps a user oracle with declared constants.
    pub fn custom<F>(f: F, class: SmoothnessClass, radius: f64) -> Result<Self, TargetError>
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        class.validate()?;
        check_radius(radius)?;
        Ok(Self {
            oracle: Arc::new(f),
            class,
            radius,
        })
    }

    /// Uniform distribution on the polytope: `f = 0`, 0-smooth, so the
    /// soft-threshold weight vanishes and the walk reduces to the vanilla
    /// Dikin walk.
    pub fn uniform(radius: f64) -> Result<Self, TargetError> {
        Self::custom(|_| 0.0, SmoothnessClass::Smooth(0.0), radius)
    }

    /// Linear potential `f(theta) = c^T theta`: `|c|`-Lipschitz and 0-smooth.
    pub fn linear(c: DVector<f64>, radius: f64) -> Result<Self, TargetError> {
        let class = SmoothnessClass::Both {
            lipschitz: c.norm(),
            smooth: 0.0,
        };
        Self::custom(move |theta| c.dot(theta), class, radius)
    }

    /// Isotropic quadratic `f(theta) = (beta/2) |theta - center|^2`.
    pub fn quadratic(beta: f64, center: DVector<f64>, radius: f64) -> Result<Self, TargetError> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(TargetError::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        Self::custom(
            move |theta| 0.5 * beta * (theta - &center).norm_squared(),
            SmoothnessClass::Smooth(beta),
            radius,
        )
    }

    /// Logistic-Lasso potential
    /// `f(theta) = scale * sum_i log(1 + exp(-y_i x_i^T theta))` for labels
    /// `y_i in {-1, +1}` and rows with `|x_i| <= 1`.
    ///
    /// The scalar logistic loss is 1-Lipschitz and 1/4-smooth, so the declared
    /// constants are `L = scale * sum_i |x_i|` and
    /// `beta = scale/4 * sum_i |x_i|^2` — conservative upper bounds
    /// (tighter data-dependent constants exist, but an upper bound is all the
    /// step-size rule needs).
    pub fn logistic_lasso(
        x: DMatrix<f64>,
        y: DVector<f64>,
        scale: f64,
        radius: f64,
    ) -> Result<Self, TargetError> {
        if x.nrows() == 0 || x.nrows() != y.len() {
            return Err(TargetError::Dataset(format!(
                "need n >= 1 rows with matching labels, got {} rows and {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(TargetError::InvalidParameter(format!("scale must be > 0, got {scale}")));
        }
        for (i, &yi) in y.iter().enumerate() {
            if yi != 1.0 && yi != -1.0 {
                return Err(TargetError::Dataset(format!("label {i} is {yi}, expected +1 or -1")));
            }
        }
        let mut norm_sum = 0.0;
        let mut norm_sq_sum = 0.0;
        for i in 0..x.nrows() {
            let norm = x.row(i).norm();
            if norm > 1.0 + 1e-12 {
                return Err(TargetError::RowNormExceeded { row: i, norm });
            }
            norm_sum += norm;
            norm_sq_sum += norm * norm;
        }
        let class = SmoothnessClass::Both {
            lipschitz: scale * norm_sum,
            smooth: scale * 0.25 * norm_sq_sum,
        };
        Self::custom(
            move |theta| {
                let margins = &x * theta;
                let mut total = 0.0;
                for i in 0..margins.len() {
                    total += log1p_exp(-y[i] * margins[i]);
                }
                scale * total
            },
            class,
            radius,
        )
    }

    /// Exponential-mechanism rescaling: the potential is multiplied by
    /// `epsilon / (2 * l_hat * R)` (per-datum Lipschitz bound `l_hat`), and
    /// the smoothness constants scale identically.
    pub fn exponential_mechanism(base: TargetSpec, l_hat: f64, epsilon: f64) -> Result<Self, TargetError> {
        if !(epsilon > 0.0 && epsilon.is_finite() && l_hat > 0.0 && l_hat.is_finite()) {
            return Err(TargetError::InvalidParameter(format!(
                "need epsilon > 0 and l_hat > 0, got epsilon={epsilon}, l_hat={l_hat}"
            )));
        }
        let s = epsilon / (2.0 * l_hat * base.radius);
        base.scaled(s)
    }

    /// The same target with `f` (and constants) multiplied by `s`.
    pub fn scaled(self, s: f64) -> Result<Self, TargetError> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(TargetError::InvalidParameter(format!("scale must be >= 0, got {s}")));
        }
        let class = match self.class {
            SmoothnessClass::Lipschitz(l) => SmoothnessClass::Lipschitz(s * l),
            SmoothnessClass::Smooth(b) => SmoothnessClass::Smooth(s * b),
            SmoothnessClass::Both { lipschitz, smooth } => SmoothnessClass::Both {
                lipschitz: s * lipschitz,
                smooth: s * smooth,
            },
        };
        let inner = self.oracle;
        Self::custom(move |theta| s * inner(theta), class, self.radius)
    }

    /// Potential value `f(theta)`.
    pub fn f(&self, theta: &DVector<f64>) -> f64 {
        (self.oracle)(theta)
    }

    pub fn class(&self) -> SmoothnessClass {
        self.class
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Numerically stable `log(1 + exp(t))`.
fn log1p_exp(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Loads the logistic-Lasso dataset format: CSV rows `x_1, .., x_d, y` with
/// `y in {-1, +1}`. A non-numeric first record is treated as a header.
pub fn load_logistic_dataset_csv<P: AsRef<Path>>(
    path: P,
) -> Result<(DMatrix<f64>, DVector<f64>), TargetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(|t| t.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => rows.push(vals),
            Err(e) if i == 0 => {
                // header row
                let _ = e;
            }
            Err(e) => return Err(TargetError::Dataset(format!("row {i}: {e}"))),
        }
    }
    if rows.is_empty() {
        return Err(TargetError::Dataset("no data rows".into()));
    }
    let width = rows[0].len();
    if width < 2 || rows.iter().any(|r| r.len() != width) {
        return Err(TargetError::Dataset("rows must all have d features plus a label".into()));
    }
    let (n, d) = (rows.len(), width - 1);
    let mut x = DMatrix::zeros(n, d);
    let mut y = DVector::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        for k in 0..d {
            x[(i, k)] = row[k];
        }
        y[i] = row[d];
    }
    Ok((x, y))
}

/// Outcome of a sampled audit of a declared constant. Violations mean the
/// declaration is too small somewhere; the library warns, it does not error,
/// since sampling cannot prove a bound.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AuditReport {
    pub what: String,
    pub trials: u64,
    pub violations: u64,
    pub worst_excess: f64,
}

/// Spot-checks `|f(u) - f(v)| <= L |u - v| + 1e-9` on random interior pairs.
pub fn audit_lipschitz<R: Rng + ?Sized>(
    target: &TargetSpec,
    p: &Polytope,
    trials: u64,
    rng: &mut R,
) -> AuditReport {
    let Some(l) = target.class().lipschitz() else {
        return AuditReport {
            what: "lipschitz (not declared)".into(),
            trials: 0,
            violations: 0,
            worst_excess: 0.0,
        };
    };
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u = crate::diagnostics::random_interior_point(p, rng);
        let v = crate::diagnostics::random_interior_point(p, rng);
        let gap = (target.f(&u) - target.f(&v)).abs() - l * (&u - &v).norm();
        worst = worst.max(gap);
        if gap > 1e-9 {
            violations += 1;
        }
    }
    AuditReport {
        what: "lipschitz".into(),
        trials,
        violations,
        worst_excess: worst,
    }
}

/// Spot-checks convexity: `f(t u + (1-t) v) <= t f(u) + (1-t) f(v) + 1e-9`.
pub fn audit_convexity<R: Rng + ?Sized>(
    target: &TargetSpec,
    p: &Polytope,
    trials: u64,
    rng: &mut R,
) -> AuditReport {
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u = crate::diagnostics::random_interior_point(p, rng);
        let v = crate::diagnostics::random_interior_point(p, rng);
        let t: f64 = rng.random();
        let mid = &u * t + &v * (1.0 - t);
        let gap = target.f(&mid) - (t * target.f(&u) + (1.0 - t) * target.f(&v));
        worst = worst.max(gap);
        if gap > 1e-9 {
            violations += 1;
        }
    }
    AuditReport {
        what: "convexity".into(),
        trials,
        violations,
        worst_excess: worst,
    }
}

/// Spot-checks the declared smoothness constant with a central second
/// difference along random unit directions:
/// `(f(x+h u) - 2 f(x) + f(x-h u)) / h^2 <= beta (1 + 1e-4) + 1e-9`.
pub fn audit_smoothness<R: Rng + ?Sized>(
    target: &TargetSpec,
    p: &Polytope,
    trials: u64,
    rng: &mut R,
) -> AuditReport {
    let Some(beta) = target.class().smooth() else {
        return AuditReport {
            what: "smoothness (not declared)".into(),
            trials: 0,
            violations: 0,
            worst_excess: 0.0,
        };
    };
    let h = 1e-3;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = crate::diagnostics::random_interior_point(p, rng);
        let u = crate::diagnostics::random_unit_vector(p.dim(), rng);
        let (fwd, bwd) = (&x + &u * h, &x - &u * h);
        if !p.contains_interior(&fwd) || !p.contains_interior(&bwd) {
            continue;
        }
        let second = (target.f(&fwd) - 2.0 * target.f(&x) + target.f(&bwd)) / (h * h);
        let gap = second - beta * (1.0 + 1e-4);
        worst = worst.max(gap);
        if gap > 1e-9 {
            violations += 1;
        }
    }
    AuditReport {
        what: "smoothness".into(),
        trials,
        violations,
        worst_excess: worst,
    }
}
