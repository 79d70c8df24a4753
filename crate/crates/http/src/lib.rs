//! `ProbabilityProvider` over an OpenAI-compatible completions endpoint.
//!
//! Option probabilities come from the top log-probabilities of the single
//! token after the prompt, generations from sampled completions stopped at
//! the closing quote, and log-likelihoods from `echo` scoring.

use std::time::Duration;

use rsa2_core::provider::{
    McqPrompt, ProbabilityProvider, ProviderError, ProviderRequest, ProviderResponse, ProviderResult, RawGeneration,
};
use serde_json::{json, Value};

pub const ENV_URL: &str = "RSA2_PROVIDER_URL";
pub const ENV_KEY: &str = "RSA2_PROVIDER_KEY";
pub const ENV_MODEL: &str = "RSA2_PROVIDER_MODEL";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HttpConfigError {
    #[error("environment variable {0} is not set")]
    MissingVar(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on every further retry.
    pub backoff: Duration,
    pub top_logprobs: usize,
    /// Token budget for a generated utterance.
    pub max_tokens: usize,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            timeout: Duration::from_secs(60),
            max_retries: 4,
            backoff: Duration::from_millis(500),
            top_logprobs: 20,
            max_tokens: 64,
        }
    }

    pub fn from_env() -> Result<Self, HttpConfigError> {
        let var = |name: &'static str| std::env::var(name).ok().filter(|v| !v.is_empty());
        let url = var(ENV_URL).ok_or(HttpConfigError::MissingVar(ENV_URL))?;
        let model = var(ENV_MODEL).ok_or(HttpConfigError::MissingVar(ENV_MODEL))?;
        Ok(HttpConfig { api_key: var(ENV_KEY), ..HttpConfig::new(url, model) })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }
}

pub struct HttpProvider {
    config: HttpConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Done(Value),
    Retry(ProviderError),
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider { config, agent }
    }

    pub fn from_env() -> Result<Self, HttpConfigError> {
        Ok(Self::new(HttpConfig::from_env()?))
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, url: &str, body: &str) -> Result<Attempt, ProviderError> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let resp = match req.send(body) {
            Ok(resp) => resp,
            Err(ureq::Error::Timeout(_)) => {
                return Ok(Attempt::Retry(ProviderError::Timeout(self.config.timeout.as_millis() as u64)))
            }
            Err(e @ (ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound)) => {
                return Ok(Attempt::Retry(ProviderError::Transport(e.to_string())))
            }
            Err(e) => return Err(ProviderError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = resp.into_body().read_to_string().map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map(Attempt::Done)
                .map_err(|e| ProviderError::Protocol(format!("response is not JSON: {e}"))),
            401 | 403 => Err(ProviderError::Auth { status }),
            429 | 500..=599 => Ok(Attempt::Retry(ProviderError::Status { status, body: text })),
            _ => Err(ProviderError::Status { status, body: text }),
        }
    }

    fn post(&self, path: &str, body: &Value) -> ProviderResult<Value> {
        let url = self.config.endpoint(path);
        let body = body.to_string();
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(&url, &body)? {
                Attempt::Done(v) => return Ok(v),
                Attempt::Retry(e) if attempt >= self.config.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    log::warn!("{url}: {e}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }

    fn option_logits(&self, prompt: &McqPrompt) -> ProviderResult<Vec<f64>> {
        let body = json!({
            "model": self.config.model,
            "prompt": prompt.text,
            "max_tokens": 1,
            "temperature": 0.0,
            "logprobs": self.config.top_logprobs,
        });
        let resp = self.post("completions", &body)?;
        parse_option_logits(&resp, &prompt.option_tokens())
    }

    fn generate(&self, prefix: &str, n: usize, temperature: f64, seed: u64) -> ProviderResult<Vec<RawGeneration>> {
        let body = json!({
            "model": self.config.model,
            "prompt": prefix,
            "n": n,
            "temperature": temperature,
            "seed": seed,
            "max_tokens": self.config.max_tokens,
            "stop": ["\""],
            "logprobs": 1,
        });
        parse_generations(&self.post("completions", &body)?)
    }

    fn loglik(&self, prefix: &str, continuation: &str) -> ProviderResult<f64> {
        let body = json!({
            "model": self.config.model,
            "prompt": format!("{prefix}{continuation}"),
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
        });
        parse_echo_loglik(&self.post("completions", &body)?, prefix.len())
    }

    fn embed(&self, texts: &[String]) -> ProviderResult<Vec<Vec<f64>>> {
        let body = json!({ "model": self.config.model, "input": texts });
        parse_embeddings(&self.post("embeddings", &body)?, texts.len())
    }
}

impl ProbabilityProvider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn request(&self, req: &ProviderRequest) -> ProviderResult<ProviderResponse> {
        Ok(match req {
            ProviderRequest::OptionLogits { prompt } => ProviderResponse::OptionLogits { logits: self.option_logits(prompt)? },
            ProviderRequest::Generate { prefix, n, temperature, seed } => {
                ProviderResponse::Generations { items: self.generate(prefix, *n, *temperature, *seed)? }
            }
            ProviderRequest::Loglik { prefix, continuation } => {
                ProviderResponse::Loglik { value: self.loglik(prefix, continuation)? }
            }
            ProviderRequest::Embed { texts } => ProviderResponse::Embeddings { vectors: self.embed(texts)? },
        })
    }
}

fn choices(resp: &Value) -> ProviderResult<&Vec<Value>> {
    resp.get("choices")
        .and_then(Value::as_array)
        .filter(|c| !c.is_empty())
        .ok_or_else(|| ProviderError::Protocol("response has no choices".into()))
}

/// Log-probability of each option token at the first generated position.
///
/// Tokenizers may emit the digit with a leading space, so variants that
/// trim to the same digit are pooled with log-sum-exp.
pub fn parse_option_logits(resp: &Value, tokens: &[String]) -> ProviderResult<Vec<f64>> {
    let missing = |t: &str| ProviderError::MissingLogprob { token: t.to_string() };
    let first = tokens.first().map(String::as_str).unwrap_or("");
    let top = choices(resp)?[0]
        .pointer("/logprobs/top_logprobs/0")
        .and_then(Value::as_object)
        .ok_or_else(|| missing(first))?;
    tokens
        .iter()
        .map(|t| {
            let hits: Vec<f64> =
                top.iter().filter(|(k, _)| k.trim() == t).filter_map(|(_, v)| v.as_f64()).collect();
            if hits.is_empty() {
                return Err(missing(t));
            }
            let max = hits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(max + hits.iter().map(|h| (h - max).exp()).sum::<f64>().ln())
        })
        .collect()
}

/// Each choice's text with the sum of its token log-probabilities.
pub fn parse_generations(resp: &Value) -> ProviderResult<Vec<RawGeneration>> {
    choices(resp)?
        .iter()
        .map(|c| {
            let text = c
                .get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| ProviderError::Protocol("choice has no text".into()))?;
            let logprobs = c
                .pointer("/logprobs/token_logprobs")
                .and_then(Value::as_array)
                .ok_or_else(|| ProviderError::MissingLogprob { token: text.to_string() })?;
            let loglik = logprobs.iter().filter_map(Value::as_f64).sum();
            Ok(RawGeneration { text: text.to_string(), loglik })
        })
        .collect()
}

/// Sum of echoed token log-probabilities for tokens that end past the
/// prefix. A token straddling the boundary counts toward the continuation.
pub fn parse_echo_loglik(resp: &Value, prefix_len: usize) -> ProviderResult<f64> {
    let lp = choices(resp)?[0]
        .get("logprobs")
        .ok_or_else(|| ProviderError::MissingLogprob { token: "<echo>".into() })?;
    let field = |name: &str| {
        lp.get(name).and_then(Value::as_array).ok_or_else(|| ProviderError::MissingLogprob { token: "<echo>".into() })
    };
    let (tokens, values, offsets) = (field("tokens")?, field("token_logprobs")?, field("text_offset")?);
    if tokens.len() != values.len() || tokens.len() != offsets.len() {
        return Err(ProviderError::Protocol("echo arrays differ in length".into()));
    }
    let mut total = 0.0;
    let mut counted = 0;
    for ((tok, val), off) in tokens.iter().zip(values).zip(offsets) {
        let (Some(tok), Some(off)) = (tok.as_str(), off.as_u64()) else {
            return Err(ProviderError::Protocol("malformed echo token".into()));
        };
        if off as usize + tok.len() > prefix_len {
            total += val.as_f64().ok_or_else(|| ProviderError::MissingLogprob { token: tok.to_string() })?;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(ProviderError::Protocol("no continuation tokens were echoed".into()));
    }
    Ok(total)
}

pub fn parse_embeddings(resp: &Value, expected: usize) -> ProviderResult<Vec<Vec<f64>>> {
    let data = resp
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::Protocol("embedding response has no data".into()))?;
    let mut rows: Vec<(u64, Vec<f64>)> = data
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let index = d.get("index").and_then(Value::as_u64).unwrap_or(i as u64);
            let vector = d
                .get("embedding")
                .and_then(Value::as_array)
                .and_then(|v| v.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
                .ok_or_else(|| ProviderError::Protocol("malformed embedding".into()))?;
            Ok((index, vector))
        })
        .collect::<ProviderResult<_>>()?;
    if rows.len() != expected {
        return Err(ProviderError::Protocol(format!("expected {expected} embeddings, got {}", rows.len())));
    }
    rows.sort_by_key(|r| r.0);
    Ok(rows.into_iter().map(|r| r.1).collect())
}
