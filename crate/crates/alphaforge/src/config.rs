//! Run configuration: one TOML file wiring data, labels, backtest, GP search,
//! LLM client, and the pool directory together. CLI flags override file
//! values; file values override built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpConfig;
use crate::metrics::{DEFAULT_COST_RATE, DEFAULT_QUANTILES};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub horizon: usize,
    pub lag: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig { horizon: 5, lag: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub quantiles: usize,
    pub cost_rate: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig { quantiles: DEFAULT_QUANTILES, cost_rate: DEFAULT_COST_RATE }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// OpenAI-compatible chat-completions endpoint URL.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Scripted transcript path; when set, no network access happens.
    pub transcript: Option<PathBuf>,
    /// Knowledge library (JSONL) for few-shot retrieval.
    pub knowledge: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dates: Option<usize>,
    pub instruments: Option<usize>,
    pub sectors: Option<usize>,
    /// Expression planted into labels so searches have a recoverable signal.
    pub plant: Option<String>,
    pub plant_strength: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Panel CSV for eval/backtest/search.
    pub data: Option<PathBuf>,
    /// Reference panel CSV the pool store is keyed to.
    pub reference: Option<PathBuf>,
    /// Pool store directory.
    pub pool: Option<PathBuf>,
    /// Seed for randomized commands; the GP section carries its own.
    pub seed: u64,
    pub label: LabelConfig,
    pub backtest: BacktestConfig,
    pub gp: GpConfig,
    pub llm: LlmConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            reference: None,
            pool: None,
            seed: 0,
            label: LabelConfig::default(),
            backtest: BacktestConfig::default(),
            gp: GpConfig::default(),
            llm: LlmConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&body)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.label.horizon < 1 || self.label.lag < 1 {
            return Err(Error::Config("label horizon and lag must be >= 1".into()));
        }
        if self.backtest.quantiles < 2 {
            return Err(Error::Config("backtest quantiles must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.backtest.cost_rate) {
            return Err(Error::Config("backtest cost_rate must be in [0, 1)".into()));
        }
        self.gp.check()?;
        for (name, path) in [
            ("data", &self.data),
            ("reference", &self.reference),
            ("llm.transcript", &self.llm.transcript.clone()),
            ("llm.knowledge", &self.llm.knowledge.clone()),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!(
                        "{name} path does not exist: {}",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The panel path, required by commands that read market data.
    pub fn require_data(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::Config("no data path: set `data` in the config or pass --data".into()))
    }
}
