//! TOML configuration for single runs and sweeps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SymmetricFamily;
use crate::sweep::{Axis, AxisParam, InitKind, SweepSpec};

/// Parameters of a single network / inference run.
///
/// Keys: `n, q, c, epsilon, delta, zeta (optional), disassortative, seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub q: usize,
    pub c: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub zeta: Option<Vec<f64>>,
    #[serde(default)]
    pub disassortative: bool,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn family(&self) -> SymmetricFamily {
        SymmetricFamily {
            q: self.q,
            c: self.c,
            epsilon: self.epsilon,
            delta: self.delta,
            zeta: self.zeta.clone(),
            disassortative: self.disassortative,
        }
    }
}

/// One swept parameter range, inclusive of both ends (within half a step).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisConfig {
    /// `"epsilon"`, `"delta"`, or `"c"`.
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl AxisConfig {
    pub fn resolve(&self) -> Result<Axis> {
        let param = match self.param.as_str() {
            "epsilon" => AxisParam::Epsilon,
            "delta" => AxisParam::Delta,
            "c" => AxisParam::MeanDegree,
            other => {
                return Err(Error::invalid(format!(
                    "unknown axis parameter `{other}` (expected epsilon, delta, or c)"
                )))
            }
        };
        if self.step <= 0.0 || !self.step.is_finite() {
            return Err(Error::invalid("axis step must be positive"));
        }
        if self.to < self.from {
            return Err(Error::invalid("axis range must have to >= from"));
        }
        let count = ((self.to - self.from) / self.step + 0.5).floor() as usize + 1;
        let values = (0..count).map(|k| self.from + k as f64 * self.step).collect();
        Ok(Axis { param, values })
    }
}

/// Full sweep description as read from a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub q: usize,
    pub c: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub zeta: Option<Vec<f64>>,
    #[serde(default)]
    pub disassortative: bool,
    #[serde(default)]
    pub seed: u64,
    pub axis1: AxisConfig,
    #[serde(default)]
    pub axis2: Option<AxisConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Subset of `random`, `prior`, `planted`.
    #[serde(default = "default_inits")]
    pub inits: Vec<String>,
    /// Optional synchronous step counts recorded alongside converged runs.
    #[serde(default)]
    pub finite_steps: Vec<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_gap_threshold")]
    pub gap_threshold: f64,
}

fn default_trials() -> usize {
    5
}
fn default_inits() -> Vec<String> {
    vec!["random".into()]
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_sweeps() -> usize {
    2000
}
fn default_gap_threshold() -> f64 {
    0.05
}

pub fn parse_init(name: &str) -> Result<InitKind> {
    match name.to_ascii_lowercase().as_str() {
        "random" => Ok(InitKind::Random),
        "prior" => Ok(InitKind::Prior),
        "planted" => Ok(InitKind::Planted),
        other => Err(Error::invalid(format!(
            "unknown init mode `{other}` (expected random, prior, or planted)"
        ))),
    }
}

impl SweepConfig {
    pub fn resolve(&self) -> Result<SweepSpec> {
        let family = SymmetricFamily {
            q: self.q,
            c: self.c,
            epsilon: self.epsilon,
            delta: self.delta,
            zeta: self.zeta.clone(),
            disassortative: self.disassortative,
        };
        let inits = self
            .inits
            .iter()
            .map(|s| parse_init(s))
            .collect::<Result<Vec<_>>>()?;
        if inits.is_empty() && self.finite_steps.is_empty() {
            return Err(Error::invalid("sweep needs at least one init mode"));
        }
        let spec = SweepSpec {
            family,
            axis1: self.axis1.resolve()?,
            axis2: match &self.axis2 {
                Some(a) => Some(a.resolve()?),
                None => None,
            },
            n: self.n,
            trials: self.trials,
            inits,
            finite_steps: self.finite_steps.clone(),
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            gap_threshold: self.gap_threshold,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn load_run_config<P: AsRef<Path>>(path: P) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::invalid(format!("bad config: {e}")))
}

pub fn load_sweep_config<P: AsRef<Path>>(path: P) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::invalid(format!("bad config: {e}")))
}
