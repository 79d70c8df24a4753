use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rsa2_core::eval::{distributions_from_json, distributions_to_json, read_distributions_csv, write_distributions_csv, KeyedDistributions};
use serde_json::{Map, Value};

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const DISTRIBUTIONS: &str = "distributions.json";
pub const STRATEGY_POSTERIORS: &str = "strategy_posteriors.json";
pub const SUMMARY: &str = "summary.json";
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

/// Output directory whose writers re-load every file they produce.
pub struct OutputDir {
    root: PathBuf,
}

fn mismatch(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Output { path: path.display().to_string(), message: message.into() }
}

/// Loaders renormalize, which can move the last bit.
const RELOAD_TOLERANCE: f64 = 1e-12;

fn same_distributions(a: &KeyedDistributions, b: &KeyedDistributions) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("{} pairs written, {} read back", a.len(), b.len()));
    }
    for (key, d) in a {
        let other = b.get(key).ok_or_else(|| format!("pair {key:?} missing"))?;
        if other.len() != d.len() {
            return Err(format!("pair {key:?} lost meanings"));
        }
        for (label, p) in d.space().labels().iter().zip(d.probs()) {
            let q = other.prob_of(label).map_err(|e| e.to_string())?;
            if (q - p).abs() > RELOAD_TOLERANCE {
                return Err(format!("pair {key:?}, meaning {label}: {p} became {q}"));
            }
        }
    }
    Ok(())
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    fn read(&self, path: &Path) -> CliResult<String> {
        std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
    }

    pub fn write_config(&self, config: &Config) -> CliResult<()> {
        let path = self.write(RESOLVED_CONFIG, &config.to_toml())?;
        let back: Config = toml::from_str(&self.read(&path)?).map_err(|e| mismatch(&path, e.to_string()))?;
        if &back != config {
            return Err(mismatch(&path, "re-loaded config differs"));
        }
        Ok(())
    }

    pub fn write_json(&self, name: &str, value: &Value) -> CliResult<()> {
        let path = self.write(name, &pretty(value))?;
        let back: Value = serde_json::from_str(&self.read(&path)?).map_err(|e| mismatch(&path, e.to_string()))?;
        if &back != value {
            return Err(mismatch(&path, "re-loaded JSON differs"));
        }
        Ok(())
    }

    /// `{level: {c: {u: {m: p}}}}` to `name`; with `csv`, one
    /// `distributions_<level>.csv` per level as well.
    pub fn write_levels(&self, name: &str, model: &str, levels: &[(&str, &KeyedDistributions)], csv: bool) -> CliResult<()> {
        let mut root = Map::new();
        for (level, dists) in levels {
            root.insert(level.to_string(), distributions_to_json(dists));
        }
        let path = self.write(name, &pretty(&Value::Object(root)))?;
        for (level, dists) in levels {
            let back = read_level(&path, level)?;
            same_distributions(dists, &back).map_err(|m| mismatch(&path, m))?;
        }
        if csv {
            for (level, dists) in levels {
                let path = self.path(&format!("distributions_{level}.csv"));
                let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
                let label = format!("{model}-{level}");
                write_distributions_csv(file, &label, dists)?;
                let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
                let (read_model, back) = read_distributions_csv(BufReader::new(file))?;
                if read_model != label {
                    return Err(mismatch(&path, format!("model column reads `{read_model}`")));
                }
                same_distributions(dists, &back).map_err(|m| mismatch(&path, m))?;
            }
        }
        Ok(())
    }
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON value serializes");
    s.push('\n');
    s
}

/// One level of a levelled distributions file.
pub fn read_level(path: &Path, level: &str) -> CliResult<KeyedDistributions> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| rsa2_core::data::DataError::Parse {
        origin: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let inner = value.get(level).ok_or_else(|| {
        rsa2_core::data::DataError::Schema(format!("{} has no `{level}` level", path.display()))
    })?;
    Ok(distributions_from_json(inner)?)
}

/// Reads predictions or references: a run directory (its distributions
/// file, at `level`), a distributions CSV, or flat `{c: {u: {m: p}}}` JSON.
pub fn read_distributions(path: &Path, level: &str) -> CliResult<KeyedDistributions> {
    if path.is_dir() {
        return read_level(&path.join(DISTRIBUTIONS), level);
    }
    if path.extension().is_some_and(|e| e == "csv") {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        return Ok(read_distributions_csv(BufReader::new(file))?.1);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| rsa2_core::data::DataError::Parse {
        origin: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(distributions_from_json(&value)?)
}
