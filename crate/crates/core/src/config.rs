//! Run configuration files: schema, defaults and parameter conditions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cooling::ScheduleSpec;
use crate::error::{PdlError, Result};
use crate::game::{GameSpec, Quantization};
use crate::numeric::{q_flex, to_f64, Q};
use crate::params::PolicyParams;
use crate::policy::{Algorithm, Policy};
use crate::sim::{SimParams, DEFAULT_BURN_IN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub epsilon: f64,
    /// Steps, or periods under RITEL.
    pub steps: u64,
    #[serde(default = "one")]
    pub replicates: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_every: Option<u64>,
}

fn one() -> u64 {
    1
}

fn default_burn_in() -> f64 {
    DEFAULT_BURN_IN
}

fn default_grid() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.02]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// Solve the chain on `eps_grid` and compare with the prediction.
    #[serde(default)]
    pub verify: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            eps_grid: default_grid(),
            cap: None,
            verify: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolSection {
    pub schedules: Vec<ScheduleSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
}

fn default_replicates() -> u64 {
    200
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dot: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Game file, relative to the configuration file.
    pub game: PathBuf,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub policy: PolicyParams,
    /// Bin width (RITEL).
    #[serde(default, with = "q_flex::option", skip_serializing_if = "Option::is_none")]
    pub delta: Option<Q>,
    /// Period constant (RITEL).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooling: Option<CoolSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Condition failures tolerated outside strict mode.
    #[serde(skip)]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Reads, schema-checks and condition-checks a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| PdlError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        PdlError::config(path, e.into_inner().to_string())
    })?;
    config.base_dir = base_dir.to_path_buf();
    config.warnings = config.check()?;
    Ok(config)
}

impl RunConfig {
    pub fn minimal(game: impl Into<PathBuf>, algorithm: Algorithm) -> Self {
        RunConfig {
            game: game.into(),
            algorithm,
            policy: PolicyParams::default(),
            delta: None,
            tau0: None,
            seed: None,
            strict: false,
            simulation: None,
            analysis: AnalysisSection::default(),
            cooling: None,
            output: OutputSection::default(),
            warnings: Vec::new(),
            base_dir: PathBuf::new(),
        }
    }

    fn condition(&self, key: &str, message: String, warnings: &mut Vec<String>) -> Result<()> {
        if self.strict {
            Err(PdlError::config(key, message))
        } else {
            warnings.push(message);
            Ok(())
        }
    }

    /// Game-independent checks. Shape errors always fail; parameter
    /// conditions fail only in strict mode.
    pub fn check(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if let Some(sim) = &self.simulation {
            if !(sim.epsilon > 0.0 && sim.epsilon < 1.0) {
                return Err(PdlError::config("simulation.epsilon", "must lie in (0,1)"));
            }
            if sim.steps == 0 {
                return Err(PdlError::config("simulation.steps", "must be positive"));
            }
            if sim.replicates == 0 {
                return Err(PdlError::config("simulation.replicates", "must be positive"));
            }
            if !(0.0..1.0).contains(&sim.burn_in) {
                return Err(PdlError::config("simulation.burn_in", "must lie in [0,1)"));
            }
        }
        if let Some(&bad) = self.analysis.eps_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(PdlError::config("analysis.eps_grid", format!("{bad} is not in (0,1)")));
        }
        if let Some(cool) = &self.cooling {
            for (k, s) in cool.schedules.iter().enumerate() {
                s.schedule
                    .validate()
                    .map_err(|e| PdlError::config(format!("cooling.schedules[{k}]"), e.to_string()))?;
            }
        }
        if self.policy.accept_bound + self.policy.explore_bound > Q::from_integer(1) {
            let msg = format!(
                "F0 + G0 \\le 1 violated: {} + {} > 1",
                crate::numeric::fmt_q(&self.policy.accept_bound),
                crate::numeric::fmt_q(&self.policy.explore_bound)
            );
            self.condition("policy.F0", msg, &mut warnings)?;
        }
        if self.algorithm == Algorithm::Ritel {
            let delta = self.delta.ok_or_else(|| PdlError::config("delta", "RITEL needs a bin width"))?;
            Quantization::from_delta(delta).map_err(|e| PdlError::config("delta", e.to_string()))?;
            let tau0 = self.tau0.ok_or_else(|| PdlError::config("tau0", "RITEL needs a period constant"))?;
            if !(tau0 > 0.0) {
                return Err(PdlError::config("tau0", "must be positive"));
            }
            let margin = 2.0 * tau0 * to_f64(&delta).powi(2);
            if margin < 1.0 - 1e-12 {
                self.condition("tau0", format!("2 tau0 delta^2 \\ge 1 violated: 2 tau0 delta^2 = {margin}"), &mut warnings)?;
            }
        }
        Ok(warnings)
    }

    /// Loads the game and checks the conditions that depend on it.
    pub fn load_game(&mut self) -> Result<GameSpec> {
        let path = self.base_dir.join(&self.game);
        let text = std::fs::read_to_string(&path).map_err(|e| PdlError::io(&path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| PdlError::config("game", format!("{}: {e}", path.display())))?;
        let game = GameSpec::from_json(&value)?;
        if let Err(v) = self.policy.validate(game.agent_count(), &game.all_means()) {
            let mut warnings = std::mem::take(&mut self.warnings);
            self.condition(&format!("policy.{}", v.key), v.message, &mut warnings)?;
            self.warnings = warnings;
        }
        Ok(game)
    }

    pub fn quantization(&self) -> Result<Option<Quantization>> {
        match (self.algorithm, self.delta) {
            (Algorithm::Ritel, Some(d)) => Ok(Some(Quantization::from_delta(d)?)),
            (Algorithm::Ritel, None) => Err(PdlError::config("delta", "RITEL needs a bin width")),
            _ => Ok(None),
        }
    }

    pub fn policy(&self) -> Result<Policy> {
        Policy::new(self.algorithm, self.policy.clone(), self.quantization()?)
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| PdlError::config("seed", "a seed is required for simulation"))
    }

    pub fn sim_params(&self) -> Result<(SimParams, u64)> {
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| PdlError::config("simulation", "missing simulation section"))?;
        let mut p = SimParams::new(sim.epsilon, sim.steps, self.require_seed()?);
        p.tau0 = self.tau0;
        p.burn_in = sim.burn_in;
        p.trace_every = sim.trace_every;
        p.strict = self.strict;
        Ok((p, sim.replicates))
    }

    /// Resolves an output path against the configuration directory.
    pub fn output_path(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
