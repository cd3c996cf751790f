//! Solver hyperparameters and the two built-in schedules.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings for one iterative stage. Unknown keys in config files (such as
/// `full_eval` or `num_par`) are accepted and ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageConfig {
    /// Subspace size; `None` lets the stage discover it.
    pub k: Option<usize>,
    /// Iteration cap. For the null-space stage the cap applies per value of `k`.
    pub iters: usize,
    pub eta: f64,
    /// Rows sampled per step; values `>=` the row count mean full batch.
    pub batch_size: usize,
    pub norm_tol: f64,
    /// Steps between full evaluations.
    pub skip: usize,
    pub eigenvalue_tolerance: Option<f64>,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            k: None,
            iters: 1000,
            eta: 1.0,
            batch_size: 1000,
            norm_tol: 0.0,
            skip: 100,
            eigenvalue_tolerance: None,
        }
    }
}

impl StageConfig {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.iters < 1 || self.batch_size < 1 || self.skip < 1 {
            return Err(Error::InvalidArgument(format!(
                "{name}: iters, batch_size and skip must be at least 1"
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidArgument(format!("{name}: eta must be positive")));
        }
        if !(self.norm_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name}: norm_tol must be nonnegative")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Estimate of the top singular value of the Macaulay matrix.
    pub sigma_max: StageConfig,
    /// Null space through the top eigenvectors of `lambda* I - M^T M`.
    pub null_space: StageConfig,
    /// Pseudoinverse of `S_1 Z` when it is too large for a dense SVD.
    pub pinv_shift_1_z: StageConfig,
    /// Pseudoinverse of `T - lambda I` when it is too large for a dense SVD.
    pub pinv_mat_lam: StageConfig,
    /// Inverse power iteration at each grid point.
    pub maxv: StageConfig,
    pub num_lams: usize,
    pub sum_to_1_tol: f64,
    pub seed: u64,
    /// Largest `|| p(v) ||` accepted for a candidate root.
    pub residual_tol: f64,
    pub neg_tol: f64,
    pub dedup_tol: f64,
    pub shift_variable: usize,
    pub extra_rows: usize,
    /// Relative singular-value cutoff for pseudoinverses.
    pub pinv_cutoff: f64,
    /// Matrices with both sides at most this size use a dense SVD.
    pub dense_pinv_max: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::full_batch()
    }
}

impl SolverConfig {
    /// Every stage sees all rows at each step.
    pub fn full_batch() -> Self {
        let batch = 1000;
        Self {
            sigma_max: StageConfig {
                k: Some(1),
                iters: 1000,
                eta: 0.1,
                batch_size: batch,
                norm_tol: 1e-10,
                skip: 100,
                eigenvalue_tolerance: None,
            },
            null_space: StageConfig {
                k: None,
                iters: 100_000,
                eta: 1.0,
                batch_size: batch,
                norm_tol: 1e-10,
                skip: 1000,
                eigenvalue_tolerance: Some(1e-6),
            },
            pinv_shift_1_z: StageConfig {
                k: None,
                iters: 1000,
                eta: 1.0,
                batch_size: batch,
                norm_tol: 0.0,
                skip: 100,
                eigenvalue_tolerance: None,
            },
            pinv_mat_lam: StageConfig {
                k: None,
                iters: 10_000,
                eta: 1.0,
                batch_size: batch,
                norm_tol: 0.0,
                skip: 100,
                eigenvalue_tolerance: None,
            },
            maxv: StageConfig {
                k: Some(1),
                iters: 1000,
                eta: 0.1,
                batch_size: batch,
                norm_tol: 1e-6,
                skip: 10,
                eigenvalue_tolerance: None,
            },
            num_lams: 100,
            sum_to_1_tol: 5e-2,
            seed: 12345,
            residual_tol: 1e-2,
            neg_tol: 1e-6,
            dedup_tol: crate::solution::DEDUP_TOL,
            shift_variable: 0,
            extra_rows: crate::macaulay::EXTRA_SELECTOR_ROWS,
            pinv_cutoff: 1e-12,
            dense_pinv_max: 512,
        }
    }

    /// Mini-batches of 100 rows. The step size sits below the stability
    /// limit of the sampled update and the iteration budget grows to match.
    pub fn batch_100() -> Self {
        let mut cfg = Self::full_batch();
        for stage in [&mut cfg.sigma_max, &mut cfg.null_space, &mut cfg.pinv_shift_1_z] {
            stage.batch_size = 100;
        }
        cfg.sigma_max.iters = 3000;
        cfg.null_space.iters = 500_000;
        cfg.null_space.eta = 0.3;
        cfg.null_space.skip = 2000;
        cfg.pinv_shift_1_z.iters = 50_000;
        cfg.pinv_shift_1_z.eta = 0.3;
        cfg.pinv_shift_1_z.skip = 2000;
        cfg
    }

    /// Named presets: `full_batch` and `bs_100`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full_batch" | "bs_1000" => Ok(Self::full_batch()),
            "bs_100" => Ok(Self::batch_100()),
            other => Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sigma_max.validate("sigma_max")?;
        self.null_space.validate("null_space")?;
        self.pinv_shift_1_z.validate("pinv_shift_1_z")?;
        self.pinv_mat_lam.validate("pinv_mat_lam")?;
        self.maxv.validate("maxv")?;
        if self.num_lams < 2 {
            return Err(Error::InvalidArgument("num_lams must be at least 2".into()));
        }
        if !(self.sum_to_1_tol > 0.0) {
            return Err(Error::InvalidArgument("sum_to_1_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Contents of a TOML config file: optional game parameters next to the
/// solver settings, e.g.
///
/// ```toml
/// tau_inv = 3
/// gamma_tilde = 0.25
/// num_lams = 100
/// seed = 12345
///
/// [null_space]
/// batch_size = 100
/// eta = 0.3
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ConfigFile {
    #[serde(default)]
    pub tau_inv: Option<u32>,
    #[serde(default)]
    pub gamma_tilde: Option<f64>,
    /// Preset applied before the explicit keys.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(flatten)]
    pub solver: toml::Table,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Starts from the preset (default `full_batch`) and overlays the keys
    /// given in the file, stage tables merged key by key.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let base = SolverConfig::preset(self.preset.as_deref().unwrap_or("full_batch"))?;
        let mut merged = match toml::Value::try_from(&base) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(Error::InvalidArgument("config serialization failed".into())),
        };
        for (key, value) in &self.solver {
            match (merged.get_mut(key), value) {
                (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => {
                    for (k, v) in src {
                        dst.insert(k.clone(), v.clone());
                    }
                }
                _ => {
                    merged.insert(key.clone(), value.clone());
                }
            }
        }
        let cfg: SolverConfig = toml::Value::Table(merged).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        SolverConfig::full_batch().validate().unwrap();
        SolverConfig::batch_100().validate().unwrap();
        assert!(SolverConfig::preset("bs_7").is_err());
        let mut bad = SolverConfig::full_batch();
        bad.num_lams = 1;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn file_overlays_preset() {
        let text = r#"
            tau_inv = 3
            gamma_tilde = 0.25
            preset = "bs_100"
            seed = 7
            num_lams = 50

            [null_space]
            eta = 0.2

            [pinv_mat_lam]
            full_eval = false
            num_par = 1
        "#;
        let file = ConfigFile::parse(text).unwrap();
        assert_eq!(file.tau_inv, Some(3));
        let cfg = file.solver_config().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.num_lams, 50);
        assert_eq!(cfg.null_space.eta, 0.2);
        assert_eq!(cfg.null_space.batch_size, 100);
        assert_eq!(cfg.null_space.skip, 2000);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let file = ConfigFile::parse("[maxv]\neta = -1.0\n").unwrap();
        assert!(file.solver_config().is_err());
        assert!(ConfigFile::parse("tau_inv = \"three\"").is_err());
    }
}
