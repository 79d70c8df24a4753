use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ProbabilityProvider, ProviderError, ProviderRequest, ProviderResponse, ProviderResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Serve hits from the cache, forward misses and append them.
    Record,
    /// Serve only from the cache; a miss is an error.
    Replay,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    request_hash: String,
    request: ProviderRequest,
    response: ProviderResponse,
}

struct State {
    entries: HashMap<String, ProviderResponse>,
    file: Option<File>,
}

/// Caching wrapper backed by an append-only JSON-lines file.
pub struct ReplayProvider {
    inner: Option<Box<dyn ProbabilityProvider>>,
    mode: CacheMode,
    path: PathBuf,
    state: Mutex<State>,
}

fn load(path: &Path) -> ProviderResult<HashMap<String, ProviderResponse>> {
    let mut entries = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(entries),
        Err(e) => return Err(ProviderError::Cache(format!("{}: {e}", path.display()))),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ProviderError::Cache(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: Entry = serde_json::from_str(&line)
            .map_err(|e| ProviderError::Cache(format!("{} line {}: {e}", path.display(), i + 1)))?;
        entries.insert(entry.request_hash, entry.response);
    }
    Ok(entries)
}

impl ReplayProvider {
    pub fn record(inner: Box<dyn ProbabilityProvider>, path: impl Into<PathBuf>) -> ProviderResult<Self> {
        let path = path.into();
        let entries = load(&path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ProviderError::Cache(format!("{}: {e}", path.display())))?;
        Ok(ReplayProvider {
            inner: Some(inner),
            mode: CacheMode::Record,
            path,
            state: Mutex::new(State { entries, file: Some(file) }),
        })
    }

    pub fn replay(path: impl Into<PathBuf>) -> ProviderResult<Self> {
        let path = path.into();
        if !path.exists() {
            return Err(ProviderError::Cache(format!("{} does not exist", path.display())));
        }
        let entries = load(&path)?;
        Ok(ReplayProvider { inner: None, mode: CacheMode::Replay, path, state: Mutex::new(State { entries, file: None }) })
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ProbabilityProvider for ReplayProvider {
    fn name(&self) -> &str {
        match self.mode {
            CacheMode::Record => "record",
            CacheMode::Replay => "replay",
        }
    }

    fn request(&self, request: &ProviderRequest) -> ProviderResult<ProviderResponse> {
        let hash = request.hash();
        if let Some(hit) = self.state.lock().expect("cache lock").entries.get(&hash) {
            return Ok(hit.clone());
        }
        let Some(inner) = &self.inner else {
            return Err(ProviderError::CacheMiss { hash });
        };
        // The lock is not held across the inner call so concurrent misses
        // can proceed; a duplicate append for the same key is harmless.
        let response = inner.request(request)?;
        let line = serde_json::to_string(&Entry { request_hash: hash.clone(), request: request.clone(), response })
            .map_err(|e| ProviderError::Cache(e.to_string()))?;
        let mut state = self.state.lock().expect("cache lock");
        if let Some(file) = state.file.as_mut() {
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|e| ProviderError::Cache(format!("{}: {e}", self.path.display())))?;
        }
        let entry: Entry = serde_json::from_str(&line).map_err(|e| ProviderError::Cache(e.to_string()))?;
        // Return the value as it reads back from disk so record and replay
        // runs see identical numbers.
        state.entries.insert(hash, entry.response.clone());
        Ok(entry.response)
    }
}
