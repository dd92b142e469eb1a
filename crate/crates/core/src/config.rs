//! Run configuration read from JSON. Missing keys take the 2D channel
//! defaults; relative paths are resolved against the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deform::{ExtensionDirection, Strategy};
use crate::error::{Error, Result};
use crate::flow::InflowProfile;
use crate::kkt::{KktParams, KktSetup};
use crate::mesh::TagMap;
use crate::solver::{ContinuationOptions, NewtonOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: PathBuf,
    pub tags: TagMap,
    pub strategy: Strategy,
    /// Direction field `n_ext` for S1.
    pub extension_direction: ExtensionDirection,
    pub inflow: InflowProfile,
    pub alpha_init: f64,
    pub alpha_dec: f64,
    pub alpha_target: f64,
    pub gamma: f64,
    pub eta: f64,
    /// Relative residual tolerance of the Newton solves.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Absolute residual norm accepted as converged.
    pub newton_abs_tol: f64,
    pub max_backtracks: usize,
    pub output_dir: PathBuf,
    pub quadrature_degree: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = ContinuationOptions::default();
        RunConfig {
            mesh: PathBuf::from("meshes/channel_coarse.msh"),
            tags: TagMap::default(),
            strategy: Strategy::S3,
            extension_direction: ExtensionDirection::Scaled,
            inflow: InflowProfile::default(),
            alpha_init: c.alpha_init,
            alpha_dec: c.alpha_dec,
            alpha_target: c.alpha_target,
            gamma: c.gamma,
            eta: c.eta,
            newton_tol: c.newton.tol,
            newton_max_iter: c.newton.max_iter,
            newton_abs_tol: c.newton.abs_tol,
            max_backtracks: c.max_backtracks,
            output_dir: PathBuf::from("output"),
            quadrature_degree: 5,
        }
    }
}

const MAX_DEGREE: usize = 12;

impl RunConfig {
    /// Parses and validates; paths stay as written.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, value: f64, bound: &str| {
            Err(Error::Config(format!("{name} = {value}: {bound}")))
        };
        if !(self.alpha_init > 0.0 && self.alpha_init.is_finite()) {
            return field("alpha_init", self.alpha_init, "α_init must be > 0");
        }
        if !(self.alpha_target > 0.0 && self.alpha_target <= self.alpha_init) {
            return field(
                "alpha_target",
                self.alpha_target,
                "must satisfy 0 < α_target ≤ α_init",
            );
        }
        if !(self.alpha_dec > 0.0 && self.alpha_dec < 1.0) {
            return field("alpha_dec", self.alpha_dec, "α_dec must lie in (0,1)");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return field("gamma", self.gamma, "γ₁ must be ≥ 0");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return field("eta", self.eta, "η₁ must lie in (0,1)");
        }
        if !(self.newton_tol > 0.0) {
            return field("newton_tol", self.newton_tol, "ε_ssn must be > 0");
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Config(
                "newton_max_iter = 0: n_ssn must be ≥ 1".into(),
            ));
        }
        if !(self.newton_abs_tol >= 0.0) {
            return field("newton_abs_tol", self.newton_abs_tol, "must be ≥ 0");
        }
        if !(self.inflow.delta > 0.0 && self.inflow.delta.is_finite()) {
            return field("inflow.delta", self.inflow.delta, "δ must be > 0");
        }
        if !(1..=MAX_DEGREE).contains(&self.quadrature_degree) {
            return Err(Error::Config(format!(
                "quadrature_degree = {}: must lie in 1..={MAX_DEGREE}",
                self.quadrature_degree
            )));
        }
        self.continuation().validate()
    }

    /// Resolves relative `mesh` and `output_dir` against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if self.mesh.is_relative() {
            self.mesh = base.join(&self.mesh);
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn continuation(&self) -> ContinuationOptions {
        ContinuationOptions {
            alpha_init: self.alpha_init,
            alpha_target: self.alpha_target,
            alpha_dec: self.alpha_dec,
            gamma: self.gamma,
            eta: self.eta,
            newton: NewtonOptions {
                tol: self.newton_tol,
                max_iter: self.newton_max_iter,
                abs_tol: self.newton_abs_tol,
            },
            max_backtracks: self.max_backtracks,
        }
    }

    pub fn setup(&self) -> KktSetup {
        KktSetup {
            strategy: self.strategy,
            direction: self.extension_direction,
            degree: self.quadrature_degree,
        }
    }

    pub fn params(&self, alpha: f64) -> KktParams {
        self.continuation().params(alpha)
    }
}

/// Reads a config file; relative paths in it are taken relative to the
/// file's directory.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = RunConfig::from_json(&text)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}
