//! JSON run configuration for the command-line driver.
//!
//! Keys are flat for the problem, grid and solver settings; each subcommand
//! that needs more has its own block. Unknown keys are rejected.
//!
//! ```json
//! { "N": 3, "alpha": 2.0, "p": 2.0, "q": 2.0, "n": 48, "L": 12.0,
//!   "tol": 1e-8, "seed": 7, "out_dir": "out" }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::grid::{Grid, Params};
use crate::minimizer::SolveConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub dim: Option<usize>,
    pub alpha: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub n: Option<usize>,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub step0: Option<f64>,
    pub bb_steps: Option<bool>,
    pub seed: Option<u64>,
    pub epsilon_regularization: Option<f64>,
    pub init: Option<InitKind>,
    /// Whole-cell offset applied to the initializer.
    pub init_shift: Option<Vec<isize>>,
    pub out_dir: Option<PathBuf>,
    /// Input field for `check` and `convolve`.
    pub snapshot: Option<PathBuf>,
    pub phase: Option<PhaseBlock>,
    pub bltest: Option<BlTestBlock>,
    pub vanish: Option<VanishBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// `exp(−|x|²/2)`
    Gaussian,
    /// Gaussian times a seeded random factor in `[0.5, 1.5)`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseBlock {
    pub p_min: f64,
    pub p_max: f64,
    pub p_steps: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub q_steps: usize,
    /// Run the minimizer at every admissible point inside the window.
    #[serde(default = "default_true")]
    pub solve: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlTestBlock {
    pub w_center: Vec<f64>,
    pub v_center: Vec<f64>,
    #[serde(default = "default_bump_radius")]
    pub radius: f64,
    #[serde(default = "default_bump_power")]
    pub power: i32,
    pub shifts: Vec<Vec<isize>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VanishBlock {
    pub radius: f64,
    #[serde(default = "default_bump_power")]
    pub power: i32,
    pub lambdas: Vec<f64>,
}

fn default_true() -> bool {
    true
}

fn default_bump_radius() -> f64 {
    1.9
}

fn default_bump_power() -> i32 {
    4
}

/// A config problem, reported with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

fn need<T: Copy>(v: Option<T>, field: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| err(field, "required for this command"))
}

impl RunConfig {
    /// Parses JSON text; syntax errors and unknown keys carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| err("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks every value that is present; absent values are checked when a
    /// command requires them.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(d) = self.dim {
            if d < 3 {
                return Err(err("N", format!("{d} is unsupported, need N >= 3")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) || self.dim.is_some_and(|d| a >= d as f64) {
                return Err(err("alpha", format!("{a} must lie in (0, N)")));
            }
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(err(name, format!("{v} must be positive")));
                }
            }
        }
        if let Some(n) = self.n {
            if n < 2 {
                return Err(err("n", format!("{n} points per axis, need at least 2")));
            }
        }
        if let Some(l) = self.length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(err("L", format!("{l} must be positive")));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(err("tol", format!("{t} must be positive")));
            }
        }
        if self.max_iters == Some(0) {
            return Err(err("max_iters", "must be at least 1"));
        }
        if let Some(s) = self.step0 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(err("step0", format!("{s} must be positive")));
            }
        }
        if let Some(e) = self.epsilon_regularization {
            if !(e > 0.0 && e.is_finite()) {
                return Err(err(
                    "epsilon_regularization",
                    format!("{e} must be positive"),
                ));
            }
        }
        if let (Some(shift), Some(d)) = (&self.init_shift, self.dim) {
            if shift.len() != d {
                return Err(err("init_shift", format!("needs {d} components")));
            }
        }
        if let Some(ph) = &self.phase {
            if ph.p_steps == 0 || ph.q_steps == 0 {
                return Err(err("phase", "p_steps and q_steps must be at least 1"));
            }
            if !(ph.p_min > 0.0 && ph.q_min > 0.0 && ph.p_max >= ph.p_min && ph.q_max >= ph.q_min) {
                return Err(err("phase", "ranges must be positive and ordered"));
            }
        }
        if let Some(v) = &self.vanish {
            if !(v.radius > 0.0) {
                return Err(err("vanish.radius", "must be positive"));
            }
            if v.lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
                return Err(err("vanish.lambdas", "every lambda must lie in (0, 1]"));
            }
        }
        if let Some(b) = &self.bltest {
            if !(b.radius > 0.0) {
                return Err(err("bltest.radius", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params, ConfigError> {
        let dim = need(self.dim, "N")?;
        let params = Params::new(
            dim,
            need(self.alpha, "alpha")?,
            need(self.p, "p")?,
            need(self.q, "q")?,
        )
        .map_err(|e| err("params", e.to_string()))?;
        match self.epsilon_regularization {
            Some(eps) => params
                .with_regularization(eps)
                .map_err(|e| err("epsilon_regularization", e.to_string())),
            None => Ok(params),
        }
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(
            need(self.dim, "N")?,
            need(self.n, "n")?,
            need(self.length, "L")?,
        )
        .map_err(|e| err("grid", e.to_string()))
    }

    pub fn solver(&self) -> SolveConfig {
        let d = SolveConfig::default();
        SolveConfig {
            tol: self.tol.unwrap_or(d.tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            step0: self.step0.unwrap_or(d.step0),
            bb_steps: self.bb_steps.unwrap_or(d.bb_steps),
            seed: self.seed.unwrap_or(d.seed),
        }
    }

    /// Fails when a value given in the config disagrees with a snapshot header.
    pub fn check_matches(&self, grid: &Grid, params: &Params) -> Result<(), ConfigError> {
        let mismatch = |field: &str, cfg: String, file: String| {
            err(
                field,
                format!("config says {cfg} but the snapshot header says {file}"),
            )
        };
        if let Some(d) = self.dim.filter(|&d| d != grid.dim()) {
            return Err(mismatch("N", d.to_string(), grid.dim().to_string()));
        }
        if let Some(n) = self.n.filter(|&n| n != grid.n()) {
            return Err(mismatch("n", n.to_string(), grid.n().to_string()));
        }
        for (field, cfg, file) in [
            ("L", self.length, grid.length()),
            ("alpha", self.alpha, params.alpha),
            ("p", self.p, params.p),
            ("q", self.q, params.q),
        ] {
            if let Some(v) = cfg.filter(|&v| v != file) {
                return Err(mismatch(field, v.to_string(), file.to_string()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_problem() {
        let cfg = RunConfig::from_json(r#"{"N":3,"alpha":2,"p":2,"q":2,"n":48,"L":12}"#).unwrap();
        let params = cfg.params().unwrap();
        assert_eq!(
            (params.dim, params.alpha, params.p, params.q),
            (3, 2.0, 2.0, 2.0)
        );
        assert_eq!(cfg.grid().unwrap().n(), 48);
        assert_eq!(cfg.solver(), SolveConfig::default());
    }

    #[test]
    fn unknown_key_reports_position() {
        let e = RunConfig::from_json("{\n  \"N\": 3,\n  \"alhpa\": 2\n}").unwrap_err();
        assert!(e.message.contains("alhpa"), "{e}");
        assert!(e.message.contains("line 3"), "{e}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let e = RunConfig::from_json(r#"{"N":3,"alpha":3.5}"#).unwrap_err();
        assert_eq!(e.field, "alpha");
        let e = RunConfig::from_json(r#"{"N":2}"#).unwrap_err();
        assert_eq!(e.field, "N");
        let e = RunConfig::from_json(r#"{"tol":0}"#).unwrap_err();
        assert_eq!(e.field, "tol");
        let e = RunConfig::from_json(r#"{"N":3}"#)
            .unwrap()
            .params()
            .unwrap_err();
        assert_eq!(e.field, "alpha");
    }

    #[test]
    fn snapshot_mismatch_is_an_error() {
        let cfg = RunConfig::from_json(r#"{"p":3}"#).unwrap();
        let g = Grid::new(3, 4, 4.0).unwrap();
        let params = Params::new(3, 2.0, 2.0, 2.0).unwrap();
        assert_eq!(cfg.check_matches(&g, &params).unwrap_err().field, "p");
        assert!(RunConfig::default().check_matches(&g, &params).is_ok());
    }
}
