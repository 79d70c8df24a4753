use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rsa2_core::eval::AblationTarget;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Rsa,
    Rsa2,
    QudAffect,
    Rsc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyPrior {
    Uniform,
    File,
    Provider,
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Mock,
    Http,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Ablate {
    MeaningPrior,
    UtterancePrior,
}

impl From<Ablate> for AblationTarget {
    fn from(a: Ablate) -> Self {
        match a {
            Ablate::MeaningPrior => AblationTarget::MeaningPrior,
            Ablate::UtterancePrior => AblationTarget::UtterancePrior,
        }
    }
}

/// Every setting of every subcommand. Loaded from TOML, then overridden by
/// flags; the resolved value is written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelKind,
    /// `numbers`, `weather`, `scenarios` (bundled) or a file: `.jsonl`
    /// scenarios, a toy lexicon JSON or a weather priors JSON.
    pub dataset: String,
    /// Numbers `P(m|c)` table; the bundled synthetic table when unset.
    pub meaning_prior: Option<PathBuf>,
    pub alpha: f64,
    pub strategy_prior: StrategyPrior,
    pub strategy_prior_file: Option<PathBuf>,
    pub ablate: Option<Ablate>,
    pub provider: ProviderKind,
    /// Replay cache. Recorded into for `mock`/`http`, read for `replay`.
    pub cache: Option<PathBuf>,
    pub mock_fixture: Option<PathBuf>,
    pub seed: u64,
    pub output: PathBuf,
    pub shuffles: usize,
    pub alts: usize,
    pub max_in_flight: usize,
    pub k: usize,
    pub n_init: usize,
    /// Use `P_N(m|c)` in the clustered listener; uniform otherwise.
    pub rsc_meaning_prior: bool,
    pub epochs: usize,
    /// Train/validation/test percentages, e.g. `60/20/20`.
    pub split: String,
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Training samples; generated from the scale-irony strategies when unset.
    pub samples: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            model: ModelKind::Rsa2,
            dataset: "numbers".into(),
            meaning_prior: None,
            alpha: 1.0,
            strategy_prior: StrategyPrior::Uniform,
            strategy_prior_file: None,
            ablate: None,
            provider: ProviderKind::Mock,
            cache: None,
            mock_fixture: None,
            seed: 0,
            output: PathBuf::from("out"),
            shuffles: 10,
            alts: 50,
            max_in_flight: 4,
            k: 4,
            n_init: 10,
            rsc_meaning_prior: true,
            epochs: 500,
            split: "60/20/20".into(),
            hidden: 16,
            learning_rate: 0.001,
            weight_decay: 0.001,
            samples: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn split_fractions(&self) -> CliResult<[f64; 3]> {
        let bad = || CliError::Config(format!("split `{}` must look like 60/20/20", self.split));
        let parts: Vec<f64> =
            self.split.split('/').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<CliResult<_>>()?;
        let [a, b, c] = parts[..] else { return Err(bad()) };
        if [a, b, c].iter().any(|x| *x < 0.0) || (a + b + c - 100.0).abs() > 1e-9 {
            return Err(CliError::Config(format!("split `{}` must add up to 100", self.split)));
        }
        Ok([a / 100.0, b / 100.0, c / 100.0])
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(CliError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        for (name, value) in [("shuffles", self.shuffles), ("alts", self.alts), ("k", self.k), ("n_init", self.n_init)] {
            if value == 0 {
                return Err(CliError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.max_in_flight == 0 {
            return Err(CliError::Config("max_in_flight must be at least 1".into()));
        }
        self.split_fractions()?;
        if self.strategy_prior == StrategyPrior::File && self.strategy_prior_file.is_none() {
            return Err(CliError::Config("strategy_prior = \"file\" needs strategy_prior_file".into()));
        }
        if self.provider == ProviderKind::Replay && self.cache.is_none() {
            return Err(CliError::Config("the replay provider needs a cache file".into()));
        }
        let must_exist = [&self.meaning_prior, &self.strategy_prior_file, &self.mock_fixture, &self.samples];
        for path in must_exist.into_iter().flatten() {
            if !path.is_file() {
                return Err(CliError::Config(format!("{} does not exist", path.display())));
            }
        }
        if self.provider == ProviderKind::Replay {
            let cache = self.cache.as_ref().expect("checked above");
            if !cache.is_file() {
                return Err(CliError::Config(format!("{} does not exist", cache.display())));
            }
        }
        if !matches!(self.dataset.as_str(), "numbers" | "weather" | "scenarios") && !Path::new(&self.dataset).is_file() {
            return Err(CliError::Config(format!("dataset `{}` is neither a built-in name nor a file", self.dataset)));
        }
        Ok(())
    }
}
