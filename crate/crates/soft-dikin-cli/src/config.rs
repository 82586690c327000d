//! Run configuration: a TOML file of flat `key = value` entries grouped in
//! sections. Exactly one polytope source and one target; the seed is
//! mandatory (there is no wall-clock default) unless `--seed` overrides it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use soft_dikin::geometry::{box_polytope, l1_ball, simplex, Polytope};
use soft_dikin::targets::{load_logistic_dataset_csv, TargetSpec};
use soft_dikin::walk::{AcceptanceVariant, HyperConstants};
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub polytope: PolytopeSection,
    pub target: TargetSection,
    pub walk: WalkSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(default)]
    pub dp: Option<DpSection>,
    #[serde(default)]
    pub bench: Option<BenchSection>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeSection {
    pub builtin: Option<String>,
    pub file: Option<String>,
    pub dim: Option<usize>,
    pub half_width: Option<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub kind: String,
    /// Radius of a ball containing K; defaults to the builtin polytope's
    /// circumradius when omitted.
    pub radius: Option<f64>,
    pub c: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub dataset: Option<String>,
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSection {
    pub seed: Option<u64>,
    pub steps: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
    #[serde(default = "default_laziness")]
    pub laziness: f64,
    #[serde(default = "default_variant")]
    pub variant: String,
    pub c_alpha: Option<f64>,
    pub c_eta: Option<f64>,
    pub c_t: Option<f64>,
    #[serde(default = "default_start")]
    pub start: String,
}

fn default_thin() -> u64 {
    1
}
fn default_laziness() -> f64 {
    0.5
}
fn default_variant() -> String {
    "exact-mh".into()
}
fn default_start() -> String {
    "ball".into()
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    #[serde(default = "default_pairs")]
    pub pairs: u64,
    #[serde(default = "default_anchors")]
    pub anchors: u64,
    #[serde(default = "default_draws")]
    pub draws: u64,
    #[serde(default = "default_sc_samples")]
    pub self_concordance_samples: u64,
    #[serde(default = "default_alpha_quad")]
    pub alpha_quad: f64,
}

fn default_pairs() -> u64 {
    500
}
fn default_anchors() -> u64 {
    5
}
fn default_draws() -> u64 {
    2000
}
fn default_sc_samples() -> u64 {
    500
}
fn default_alpha_quad() -> f64 {
    1.0
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self {
            pairs: default_pairs(),
            anchors: default_anchors(),
            draws: default_draws(),
            self_concordance_samples: default_sc_samples(),
            alpha_quad: default_alpha_quad(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DpSection {
    pub epsilon: f64,
    #[serde(default = "default_l_hat")]
    pub l_hat: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_l_hat() -> f64 {
    1.0
}
fn default_grid() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Vec<[usize; 2]>,
    #[serde(default = "default_bench_steps")]
    pub steps: u64,
}

fn default_bench_steps() -> u64 {
    200
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        match (&self.polytope.builtin, &self.polytope.file) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "polytope: exactly one of `builtin` or `file`, got both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "polytope: exactly one of `builtin` or `file` required".into(),
                ))
            }
            _ => {}
        }
        if !(self.walk.laziness > 0.0 && self.walk.laziness <= 1.0) {
            return Err(CliError::Config(format!(
                "walk.laziness must be in (0, 1], got {}",
                self.walk.laziness
            )));
        }
        if self.walk.thin == 0 {
            return Err(CliError::Config("walk.thin must be >= 1".into()));
        }
        match self.walk.variant.as_str() {
            "exact-mh" | "unhalved-norms" => {}
            other => {
                return Err(CliError::Config(format!(
                    "walk.variant must be exact-mh or unhalved-norms, got {other}"
                )))
            }
        }
        match self.walk.start.as_str() {
            "ball" | "witness" => {}
            other => {
                return Err(CliError::Config(format!(
                    "walk.start must be ball or witness, got {other}"
                )))
            }
        }
        Ok(())
    }

    /// The mandatory seed, after any CLI override.
    pub fn seed(&self, override_seed: Option<u64>) -> Result<u64, CliError> {
        override_seed.or(self.walk.seed).ok_or_else(|| {
            CliError::Config("seed is mandatory: set walk.seed or pass --seed".into())
        })
    }

    pub fn variant(&self) -> AcceptanceVariant {
        match self.walk.variant.as_str() {
            "unhalved-norms" => AcceptanceVariant::UnhalvedNorms,
            _ => AcceptanceVariant::ExactMh,
        }
    }

    pub fn constants(&self) -> HyperConstants {
        let theory = HyperConstants::theory();
        HyperConstants {
            c_alpha: self.walk.c_alpha.unwrap_or(theory.c_alpha),
            c_eta: self.walk.c_eta.unwrap_or(theory.c_eta),
            c_t: self.walk.c_t.unwrap_or(theory.c_t),
        }
    }

    pub fn build_polytope(&self, config_dir: &Path) -> Result<Polytope, CliError> {
        if let Some(file) = &self.polytope.file {
            let path = config_dir.join(file);
            return Polytope::from_file(&path)
                .map_err(|e| CliError::Config(format!("polytope file {}: {e}", path.display())));
        }
        let builtin = self.polytope.builtin.as_deref().unwrap();
        let dim = self
            .polytope
            .dim
            .ok_or_else(|| CliError::Config("polytope.dim required for builtins".into()))?;
        match builtin {
            "box" => Ok(box_polytope(dim, self.polytope.half_width.unwrap_or(1.0))),
            "simplex" => Ok(simplex(dim)),
            "l1_ball" => l1_ball(dim, self.polytope.radius.unwrap_or(1.0))
                .map_err(|e| CliError::Config(e.to_string())),
            other => Err(CliError::Config(format!("unknown builtin polytope {other}"))),
        }
    }

    /// Circumradius fallback for builtin bodies.
    fn default_radius(&self) -> Option<f64> {
        let dim = self.polytope.dim? as f64;
        match self.polytope.builtin.as_deref()? {
            "box" => Some(self.polytope.half_width.unwrap_or(1.0) * dim.sqrt()),
            "simplex" => Some(1.0),
            "l1_ball" => Some(self.polytope.radius.unwrap_or(1.0)),
            _ => None,
        }
    }

    pub fn target_radius(&self) -> Result<f64, CliError> {
        self.target
            .radius
            .or_else(|| self.default_radius())
            .ok_or_else(|| {
                CliError::Config("target.radius required (no builtin circumradius available)".into())
            })
    }

    pub fn build_target(&self, d: usize, config_dir: &Path) -> Result<TargetSpec, CliError> {
        let radius = self.target_radius()?;
        match self.target.kind.as_str() {
            "uniform" => TargetSpec::uniform(radius).map_err(into_config),
            "linear" => {
                let c = self
                    .target
                    .c
                    .clone()
                    .ok_or_else(|| CliError::Config("target.c required for linear".into()))?;
                if c.len() != d {
                    return Err(CliError::Config(format!(
                        "target.c has {} entries, polytope dimension is {d}",
                        c.len()
                    )));
                }
                TargetSpec::linear(DVector::from_vec(c), radius).map_err(into_config)
            }
            "quadratic" => {
                let beta = self
                    .target
                    .beta
                    .ok_or_else(|| CliError::Config("target.beta required for quadratic".into()))?;
                let center = match &self.target.center {
                    Some(c) if c.len() == d => DVector::from_vec(c.clone()),
                    Some(c) => {
                        return Err(CliError::Config(format!(
                            "target.center has {} entries, polytope dimension is {d}",
                            c.len()
                        )))
                    }
                    None => DVector::zeros(d),
                };
                TargetSpec::quadratic(beta, center, radius).map_err(into_config)
            }
            "logistic_lasso" => {
                let (x, y) = self.load_dataset(d, config_dir)?;
                TargetSpec::logistic_lasso(x, y, self.target.scale.unwrap_or(1.0), radius)
                    .map_err(into_config)
            }
            other => Err(CliError::Config(format!("unknown target kind {other}"))),
        }
    }

    pub fn load_dataset(
        &self,
        d: usize,
        config_dir: &Path,
    ) -> Result<(DMatrix<f64>, DVector<f64>), CliError> {
        let dataset = self
            .target
            .dataset
            .as_ref()
            .ok_or_else(|| CliError::Config("target.dataset required for logistic_lasso".into()))?;
        let path = config_dir.join(dataset);
        let (x, y) = load_logistic_dataset_csv(&path)
            .map_err(|e| CliError::Config(format!("dataset {}: {e}", path.display())))?;
        if x.ncols() != d {
            return Err(CliError::Config(format!(
                "dataset has {} features, polytope dimension is {d}",
                x.ncols()
            )));
        }
        Ok((x, y))
    }
}

fn into_config(e: soft_dikin::targets::TargetError) -> CliError {
    CliError::Config(e.to_string())
}
