//! Externally estimated probabilities: multiple-choice option logits,
//! sampled continuations, continuation log-likelihoods and embeddings.
//!
//! Every backend implements [`ProbabilityProvider::request`]; the typed
//! helpers and the aggregation logic (shuffle averaging, generation
//! deduplication) live on this side so all backends share them.

mod generation;
mod mcq;
mod mock;
mod replay;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dist::DistError;

pub use generation::{generate_alternatives, softmax_prior, truncate_at_quote, Alternative, GenerationQuery};
pub use mcq::{
    mcq_distribution, permutation_count, McqCondition, McqQuery, McqResult, McqTask, PromptTemplates,
};
pub use mock::{token_bag_embedding, GenerationRule, LoglikRule, MockFixture, MockProvider, ScoreRule, MOCK_EMBEDDING_DIM};
pub use replay::{CacheMode, ReplayProvider};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("response has no log-probability for option token `{token}`")]
    MissingLogprob { token: String },
    #[error("generation returned no usable utterances")]
    EmptyGeneration,
    #[error("replay cache has no entry for request {hash}")]
    CacheMiss { hash: String },
    #[error("replay cache: {0}")]
    Cache(String),
    #[error("mock fixture: {0}")]
    Fixture(String),
    #[error("provider does not support {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Dist(#[from] DistError),
}

pub type ProviderResult<T> = Result<T, ProviderError>;

/// The multiple-choice prompt as sent: structured fields plus rendered text.
///
/// `options` are in presented order; option `i` is labeled with the digit
/// string `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqPrompt {
    pub task: McqTask,
    pub condition: McqCondition,
    pub options: Vec<String>,
    pub text: String,
}

impl McqPrompt {
    pub fn option_tokens(&self) -> Vec<String> {
        (1..=self.options.len()).map(|i| i.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderRequest {
    /// Next-token logits of the option numbers after the prompt.
    OptionLogits { prompt: McqPrompt },
    /// `n` sampled continuations of `prefix`.
    Generate { prefix: String, n: usize, temperature: f64, seed: u64 },
    /// Total log-probability of `continuation` after `prefix`.
    Loglik { prefix: String, continuation: String },
    Embed { texts: Vec<String> },
}

impl ProviderRequest {
    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("requests are plain data");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// One raw sampled continuation, before truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGeneration {
    pub text: String,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderResponse {
    /// One logit per option number, in option order.
    OptionLogits { logits: Vec<f64> },
    Generations { items: Vec<RawGeneration> },
    Loglik { value: f64 },
    Embeddings { vectors: Vec<Vec<f64>> },
}

fn unexpected(expected: &str, got: &ProviderResponse) -> ProviderError {
    let kind = match got {
        ProviderResponse::OptionLogits { .. } => "option_logits",
        ProviderResponse::Generations { .. } => "generations",
        ProviderResponse::Loglik { .. } => "loglik",
        ProviderResponse::Embeddings { .. } => "embeddings",
    };
    ProviderError::Protocol(format!("expected a {expected} response, got {kind}"))
}

/// A source of model probabilities. Implementations must be shareable
/// across threads; the MCQ and RSC code issue requests concurrently.
pub trait ProbabilityProvider: Send + Sync {
    fn name(&self) -> &str;

    fn request(&self, request: &ProviderRequest) -> ProviderResult<ProviderResponse>;

    fn option_logits(&self, prompt: &McqPrompt) -> ProviderResult<Vec<f64>> {
        match self.request(&ProviderRequest::OptionLogits { prompt: prompt.clone() })? {
            ProviderResponse::OptionLogits { logits } if logits.len() == prompt.options.len() => Ok(logits),
            ProviderResponse::OptionLogits { logits } => Err(ProviderError::Protocol(format!(
                "{} logits for {} options",
                logits.len(),
                prompt.options.len()
            ))),
            other => Err(unexpected("option_logits", &other)),
        }
    }

    fn generate(&self, prefix: &str, n: usize, temperature: f64, seed: u64) -> ProviderResult<Vec<RawGeneration>> {
        let request = ProviderRequest::Generate { prefix: prefix.to_string(), n, temperature, seed };
        match self.request(&request)? {
            ProviderResponse::Generations { items } => Ok(items),
            other => Err(unexpected("generations", &other)),
        }
    }

    fn loglik(&self, prefix: &str, continuation: &str) -> ProviderResult<f64> {
        let request = ProviderRequest::Loglik { prefix: prefix.to_string(), continuation: continuation.to_string() };
        match self.request(&request)? {
            ProviderResponse::Loglik { value } => Ok(value),
            other => Err(unexpected("loglik", &other)),
        }
    }

    fn embed(&self, texts: &[String]) -> ProviderResult<Vec<Vec<f64>>> {
        match self.request(&ProviderRequest::Embed { texts: texts.to_vec() })? {
            ProviderResponse::Embeddings { vectors } if vectors.len() == texts.len() => Ok(vectors),
            ProviderResponse::Embeddings { vectors } => {
                Err(ProviderError::Protocol(format!("{} embeddings for {} texts", vectors.len(), texts.len())))
            }
            other => Err(unexpected("embeddings", &other)),
        }
    }
}

impl<P: ProbabilityProvider + ?Sized> ProbabilityProvider for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn request(&self, request: &ProviderRequest) -> ProviderResult<ProviderResponse> {
        (**self).request(request)
    }
}

impl<P: ProbabilityProvider + ?Sized> ProbabilityProvider for std::sync::Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn request(&self, request: &ProviderRequest) -> ProviderResult<ProviderResponse> {
        (**self).request(request)
    }
}
