use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{McqPrompt, ProbabilityProvider, ProviderError, ProviderResult};
use crate::parallel::map_bounded;

/// Which conditional the question estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McqTask {
    /// P(m|c): the scenario is shown without the utterance.
    MeaningPrior,
    /// P(m|c,u).
    MeaningPosterior,
    /// P(m|c,u,r): the question names the strategy.
    MeaningGivenStrategy,
    /// P(r|c,u).
    StrategyPosterior,
}

/// Structured fields the prompt is rendered from.
///
/// `context` is the scenario text up to (not including) the opening quote
/// of the utterance, e.g. `... the principal, John said,`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqCondition {
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
}

impl McqCondition {
    pub fn new(context: impl Into<String>) -> Self {
        McqCondition { context: context.into(), speaker: None, utterance: None, strategy: None }
    }

    pub fn with_speaker(mut self, speaker: impl Into<String>) -> Self {
        self.speaker = Some(speaker.into());
        self
    }

    pub fn with_utterance(mut self, utterance: impl Into<String>) -> Self {
        self.utterance = Some(utterance.into());
        self
    }

    pub fn with_strategy(mut self, strategy: impl Into<String>) -> Self {
        self.strategy = Some(strategy.into());
        self
    }

    /// Scenario text with the quoted utterance, or with the utterance
    /// replaced by "something" when there is none.
    pub fn scenario(&self) -> String {
        let context = self.context.trim();
        match &self.utterance {
            Some(u) => format!("{context} \"{u}\""),
            None => format!("{} something.", context.trim_end_matches(',')),
        }
    }

    fn speaker_or_default(&self) -> &str {
        self.speaker.as_deref().unwrap_or("the speaker")
    }
}

/// Prompt wording per task. Placeholders: `{scenario}`, `{speaker}`,
/// `{strategy}`, `{options}` (numbered list) and `{labels}` (e.g. `1, 2 or 3`).
///
/// The prompt must end where the option number is expected; logits are read
/// at the next token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    pub meaning_prior: String,
    pub meaning_posterior: String,
    pub meaning_given_strategy: String,
    pub strategy_posterior: String,
}

const PREAMBLE: &str = "Below is a short story followed by a question. Pick the option that best answers it. \
Reply with the option number only ({labels}).";

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            meaning_prior: format!(
                "{PREAMBLE}\n\nStory: {{scenario}}\nQuestion: What is {{speaker}} most likely to mean?\n\n{{options}}\n\nAnswer:"
            ),
            meaning_posterior: format!(
                "{PREAMBLE}\n\nStory: {{scenario}}\nQuestion: What does {{speaker}} mean by this?\n\n{{options}}\n\nAnswer:"
            ),
            meaning_given_strategy: format!(
                "{PREAMBLE}\n\nStory: {{scenario}}\nQuestion: Suppose {{speaker}} is speaking in a {{strategy}} way. \
What does {{speaker}} mean by this?\n\n{{options}}\n\nAnswer:"
            ),
            strategy_posterior: format!(
                "{PREAMBLE}\n\nStory: {{scenario}}\nQuestion: Is {{speaker}} speaking sincerely?\n\n{{options}}\n\nAnswer:"
            ),
        }
    }
}

impl PromptTemplates {
    pub fn template(&self, task: McqTask) -> &str {
        match task {
            McqTask::MeaningPrior => &self.meaning_prior,
            McqTask::MeaningPosterior => &self.meaning_posterior,
            McqTask::MeaningGivenStrategy => &self.meaning_given_strategy,
            McqTask::StrategyPosterior => &self.strategy_posterior,
        }
    }

    /// Renders the prompt for options in the presented order.
    pub fn render(&self, task: McqTask, condition: &McqCondition, options: &[String]) -> McqPrompt {
        let list = options.iter().enumerate().map(|(i, o)| format!("{}. {}", i + 1, o.trim())).join("\n");
        let labels: Vec<String> = (1..=options.len()).map(|i| i.to_string()).collect();
        let labels = match labels.split_last() {
            Some((last, rest)) if !rest.is_empty() => format!("{} or {last}", rest.join(", ")),
            Some((last, _)) => last.clone(),
            None => String::new(),
        };
        let text = self
            .template(task)
            .replace("{labels}", &labels)
            .replace("{scenario}", &condition.scenario())
            .replace("{speaker}", condition.speaker_or_default())
            .replace("{strategy}", condition.strategy.as_deref().unwrap_or(""))
            .replace("{options}", &list);
        McqPrompt { task, condition: condition.clone(), options: options.to_vec(), text }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McqQuery {
    pub task: McqTask,
    pub condition: McqCondition,
    pub options: Vec<String>,
    pub shuffles: usize,
    pub seed: u64,
    pub max_in_flight: usize,
}

impl McqQuery {
    pub fn new(task: McqTask, condition: McqCondition, options: Vec<String>) -> Self {
        McqQuery { task, condition, options, shuffles: 10, seed: 0, max_in_flight: 4 }
    }

    pub fn with_shuffles(mut self, shuffles: usize) -> Self {
        self.shuffles = shuffles;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.max_in_flight = limit;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McqResult {
    /// Probabilities in the query's original option order.
    pub probs: Vec<f64>,
    /// Presentation orders used; `permutations[k][j]` is the original index
    /// of the option shown in position `j`.
    pub permutations: Vec<Vec<usize>>,
}

/// `min(shuffles, n!)` without overflowing.
pub fn permutation_count(n: usize, shuffles: usize) -> usize {
    let mut total = 1usize;
    for i in 2..=n {
        total = total.saturating_mul(i);
        if total >= shuffles {
            return shuffles;
        }
    }
    total.min(shuffles)
}

fn presentation_orders(n: usize, shuffles: usize, seed: u64) -> Vec<Vec<usize>> {
    let count = permutation_count(n, shuffles);
    if count == permutation_count(n, usize::MAX) {
        return (0..n).permutations(n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: Vec<Vec<usize>> = Vec::with_capacity(count);
    while seen.len() < count {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        if !seen.contains(&order) {
            seen.push(order);
        }
    }
    seen
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Shuffle-averaged option distribution.
///
/// Each presentation order is rendered and queried separately; the
/// per-order softmax over the option-number logits is mapped back to the
/// original option order, and the probability vectors are averaged.
pub fn mcq_distribution<P: ProbabilityProvider + ?Sized>(
    provider: &P,
    templates: &PromptTemplates,
    query: &McqQuery,
) -> ProviderResult<McqResult> {
    let n = query.options.len();
    if n < 2 {
        return Err(ProviderError::Protocol(format!("multiple-choice query needs at least 2 options, got {n}")));
    }
    if query.shuffles == 0 {
        return Err(ProviderError::Protocol("shuffles must be at least 1".into()));
    }
    let orders = presentation_orders(n, query.shuffles, query.seed);
    let per_order = map_bounded(&orders, query.max_in_flight, |order| {
        let shown: Vec<String> = order.iter().map(|&i| query.options[i].clone()).collect();
        let prompt = templates.render(query.task, &query.condition, &shown);
        let logits = provider.option_logits(&prompt)?;
        if logits.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(ProviderError::Protocol(format!("non-finite option logits {logits:?}")));
        }
        let probs = softmax(&logits);
        let mut aligned = vec![0.0; n];
        for (pos, &orig) in order.iter().enumerate() {
            aligned[orig] = probs[pos];
        }
        Ok(aligned)
    })?;
    let mut mean = vec![0.0; n];
    for probs in &per_order {
        for (acc, p) in mean.iter_mut().zip(probs) {
            *acc += p;
        }
    }
    let z: f64 = mean.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(ProviderError::Protocol("option probabilities have no mass".into()));
    }
    for p in &mut mean {
        *p /= z;
    }
    Ok(McqResult { probs: mean, permutations: orders })
}
