use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    McqPrompt, McqTask, ProbabilityProvider, ProviderError, ProviderRequest, ProviderResponse, ProviderResult,
    RawGeneration,
};

pub const MOCK_EMBEDDING_DIM: usize = 32;

/// Fixed logit for one option. Unset fields match anything; `context` is a
/// substring match, the others are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRule {
    #[serde(default)]
    pub task: Option<McqTask>,
    #[serde(default)]
    pub context: Option<String>,
    #[serde(default)]
    pub utterance: Option<String>,
    #[serde(default)]
    pub strategy: Option<String>,
    pub option: String,
    pub logit: f64,
}

impl ScoreRule {
    fn matches(&self, prompt: &McqPrompt, option: &str) -> bool {
        let c = &prompt.condition;
        self.option.trim() == option.trim()
            && self.task.is_none_or(|t| t == prompt.task)
            && self.context.as_deref().is_none_or(|s| c.context.contains(s))
            && self.utterance.as_deref().is_none_or(|u| c.utterance.as_deref() == Some(u))
            && self.strategy.as_deref().is_none_or(|r| c.strategy.as_deref() == Some(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRule {
    pub prefix_contains: String,
    pub items: Vec<RawGeneration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikRule {
    pub continuation: String,
    pub value: f64,
}

/// Request patterns with canned answers. Anything unmatched falls back to
/// hash-derived values, so every request has a deterministic answer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockFixture {
    pub scores: Vec<ScoreRule>,
    pub generations: Vec<GenerationRule>,
    pub logliks: Vec<LoglikRule>,
    /// Added to the logit of whichever option sits at each position; lets
    /// tests model positional bias.
    pub position_bias: Vec<f64>,
}

impl MockFixture {
    pub fn from_json(text: &str) -> ProviderResult<Self> {
        serde_json::from_str(text).map_err(|e| ProviderError::Fixture(e.to_string()))
    }
}

/// Deterministic offline provider.
///
/// Option logits depend only on the task, the condition fields and the
/// option text, never on position (unless `position_bias` is set), which
/// makes shuffle averaging exactly order-independent.
#[derive(Debug, Default)]
pub struct MockProvider {
    fixture: MockFixture,
    calls: AtomicUsize,
}

const STOCK_UTTERANCES: &[&str] = &[
    "That went perfectly.",
    "What a disaster.",
    "Well, that was fun.",
    "I have seen worse.",
    "Just great, thanks.",
    "It was completely fine.",
    "Nothing could be better.",
    "That was a mess.",
];

fn digest(parts: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    h.finalize().into()
}

fn unit_from(bytes: &[u8]) -> f64 {
    let mut word = [0u8; 8];
    word.copy_from_slice(&bytes[..8]);
    (u64::from_le_bytes(word) >> 11) as f64 / (1u64 << 53) as f64
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(|t| t.to_lowercase())
}

/// Sum of per-token hash vectors, L2-normalized. Texts sharing words land
/// close together; the empty text maps to the zero vector.
pub fn token_bag_embedding(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; MOCK_EMBEDDING_DIM];
    for token in tokens(text) {
        let d = digest(&["token", &token]);
        for (x, b) in v.iter_mut().zip(d.iter()) {
            *x += *b as f64 / 127.5 - 1.0;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl MockProvider {
    pub fn new(fixture: MockFixture) -> Self {
        MockProvider { fixture, calls: AtomicUsize::new(0) }
    }

    pub fn symmetric() -> Self {
        Self::default()
    }

    pub fn fixture(&self) -> &MockFixture {
        &self.fixture
    }

    /// Number of requests answered so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn option_logit(&self, prompt: &McqPrompt, option: &str) -> f64 {
        if let Some(rule) = self.fixture.scores.iter().find(|r| r.matches(prompt, option)) {
            return rule.logit;
        }
        let c = &prompt.condition;
        let task = serde_json::to_string(&prompt.task).expect("task serializes");
        let d = digest(&[
            "option",
            &task,
            &c.context,
            c.utterance.as_deref().unwrap_or(""),
            c.strategy.as_deref().unwrap_or(""),
            option.trim(),
        ]);
        8.0 * unit_from(&d) - 4.0
    }

    fn generations(&self, prefix: &str, n: usize, seed: u64) -> Vec<RawGeneration> {
        if let Some(rule) = self.fixture.generations.iter().find(|r| prefix.contains(&r.prefix_contains)) {
            return rule.items.iter().cycle().take(n).cloned().collect();
        }
        let d = digest(&["generate", prefix]);
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(d[..8].try_into().unwrap()) ^ seed);
        (0..n)
            .map(|_| {
                let text = STOCK_UTTERANCES[rng.random_range(0..STOCK_UTTERANCES.len())];
                let words = tokens(text).count() as f64;
                RawGeneration { text: format!(" {text}\" they added."), loglik: -1.5 * words }
            })
            .collect()
    }

    fn loglik(&self, prefix: &str, continuation: &str) -> f64 {
        if let Some(rule) = self.fixture.logliks.iter().find(|r| r.continuation == continuation) {
            return rule.value;
        }
        -1.0 - 19.0 * unit_from(&digest(&["loglik", prefix, continuation]))
    }
}

impl ProbabilityProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn request(&self, request: &ProviderRequest) -> ProviderResult<ProviderResponse> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(match request {
            ProviderRequest::OptionLogits { prompt } => {
                let logits = prompt
                    .options
                    .iter()
                    .enumerate()
                    .map(|(pos, o)| {
                        self.option_logit(prompt, o) + self.fixture.position_bias.get(pos).copied().unwrap_or(0.0)
                    })
                    .collect();
                ProviderResponse::OptionLogits { logits }
            }
            ProviderRequest::Generate { prefix, n, seed, .. } => {
                ProviderResponse::Generations { items: self.generations(prefix, *n, *seed) }
            }
            ProviderRequest::Loglik { prefix, continuation } => {
                ProviderResponse::Loglik { value: self.loglik(prefix, continuation) }
            }
            ProviderRequest::Embed { texts } => {
                ProviderResponse::Embeddings { vectors: texts.iter().map(|t| token_bag_embedding(t)).collect() }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{McqCondition, PromptTemplates};

    fn prompt(options: &[&str]) -> McqPrompt {
        let c = McqCondition::new("Ana said,").with_utterance("Lovely.");
        PromptTemplates::default().render(
            McqTask::MeaningPosterior,
            &c,
            &options.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn logits_follow_option_text_not_position() {
        let m = MockProvider::symmetric();
        let a = m.option_logits(&prompt(&["x", "y", "z"])).unwrap();
        let b = m.option_logits(&prompt(&["z", "x", "y"])).unwrap();
        assert_eq!(a, vec![b[1], b[2], b[0]]);
        assert_eq!(m.calls(), 2);
    }

    #[test]
    fn fixture_rules_win() {
        let fx = MockFixture::from_json(
            r#"{"scores":[{"task":"meaning_posterior","utterance":"Lovely.","option":"y","logit":7.5}]}"#,
        )
        .unwrap();
        let m = MockProvider::new(fx);
        assert_eq!(m.option_logits(&prompt(&["x", "y"])).unwrap()[1], 7.5);
    }

    #[test]
    fn embeddings_are_unit_and_word_sensitive() {
        let a = token_bag_embedding("What a disaster.");
        let b = token_bag_embedding("what a DISASTER");
        let c = token_bag_embedding("That went perfectly.");
        assert_eq!(a, b);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, c);
        assert!(token_bag_embedding("").iter().all(|x| *x == 0.0));
    }

    #[test]
    fn generations_are_seeded() {
        let m = MockProvider::symmetric();
        let a = m.generate("Ana said, \"", 6, 1.0, 1).unwrap();
        assert_eq!(a, m.generate("Ana said, \"", 6, 1.0, 1).unwrap());
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|g| g.text.contains('"')));
    }
}
