//! JSON model configuration.
//!
//! ```json
//! {
//!   "dim": 1, "kappa": 2.0, "gamma": 1.0, "noise_matrix": 2.0,
//!   "alpha": 1.0, "c_h": 1000.0,
//!   "potential": { "name": "gaussian_mixture", "params": { "iota": 1.0, "sigma": 0.5 } }
//! }
//! ```
//!
//! `noise_matrix` is either a scalar c (meaning c·I) or a list of rows.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsavError};
use crate::linalg::NoiseMatrix;
use crate::model::{
    builtin_bimodal, builtin_double_well, builtin_gaussian_mixture, AnalyticDensity, ModelParams, ModelSpec, Potential,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseMatrixConfig {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub noise_matrix: NoiseMatrixConfig,
    pub alpha: f64,
    pub c_h: f64,
    pub potential: PotentialConfig,
}

/// A built model with the invariant density of its potential, when one is known.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: ModelSpec,
    pub density: Option<AnalyticDensity>,
    pub config: ModelConfig,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SsavError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| SsavError::Config(format!("{}: {e}", path.display())))
    }

    fn param(&self, key: &str) -> Result<f64> {
        self.potential.params.get(key).copied().ok_or_else(|| {
            SsavError::Config(format!("potential {:?} needs parameter {key:?}", self.potential.name))
        })
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            kappa: self.kappa,
            gamma: self.gamma,
            alpha: self.alpha,
            c_h: self.c_h,
        }
    }

    /// The named potential with its Boltzmann density, without validating the other parameters.
    pub fn potential(&self) -> Result<(Arc<dyn Potential>, AnalyticDensity)> {
        let (potential, density): (Arc<dyn Potential>, AnalyticDensity) = match self.potential.name.as_str() {
            "gaussian_mixture" => {
                let (p, d) = builtin_gaussian_mixture(self.param("iota")?, self.param("sigma")?, self.kappa)?;
                (Arc::new(p), d)
            }
            "double_well" => {
                let (p, d) = builtin_double_well(self.dim, self.kappa)?;
                (Arc::new(p), d)
            }
            "bimodal" => {
                let (p, d) = builtin_bimodal(self.kappa);
                (Arc::new(p), d)
            }
            other => return Err(SsavError::Config(format!("unknown potential {other:?}"))),
        };
        if potential.dim() != self.dim {
            return Err(SsavError::Config(format!(
                "potential {:?} has dimension {} but config says dim = {}",
                self.potential.name,
                potential.dim(),
                self.dim
            )));
        }
        Ok((potential, density))
    }

    pub fn build(&self) -> Result<LoadedModel> {
        let (potential, density) = self.potential()?;
        let noise = match &self.noise_matrix {
            NoiseMatrixConfig::Scalar(c) => NoiseMatrix::scaled_identity(self.dim, *c),
            NoiseMatrixConfig::Rows(rows) => NoiseMatrix::from_rows(rows)?,
        };
        let model = ModelSpec::new(potential, self.params(), noise)?;
        let density = model.has_canonical_noise().then_some(density);
        Ok(LoadedModel {
            model,
            density,
            config: self.clone(),
        })
    }
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    ModelConfig::from_path(path)?.build()
}
