//! Listeners whose literal layer comes from a language model: the baseline
//! that reads L0 straight off `P_N(m|c,u)`, and the strategy-aware variant
//! reading `P_N(m|c,u,r)` and marginalizing with `P_N(r|c,u)` or its
//! indicator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Scenario;
use crate::dist::{same_space, Categorical, DistError, LabelSpace, SpaceKind, SpaceRef};
use crate::error::ModelError;
use crate::provider::{
    generate_alternatives, mcq_distribution, softmax_prior, GenerationQuery, McqCondition, McqQuery, McqTask,
    ProbabilityProvider, PromptTemplates, ProviderError,
};
use crate::rsa::LiteralTable;
use crate::rsa2::{implicit_fr, indicator_posterior, l1_marginal};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

pub type LlmResult<T> = Result<T, LlmError>;

/// Observed utterance plus sampled alternatives, sorted, with `P_G(u|c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternativeSet {
    pub utterances: SpaceRef,
    pub observed: usize,
    pub logliks: Vec<f64>,
    pub prior: Categorical,
}

/// Builds `{u} ∪ samples`, sorted lexicographically so downstream results do
/// not depend on sample order.
///
/// Generated strings carry their merged generation log-likelihood; the
/// observed utterance, if never sampled, is scored with a log-likelihood
/// request against the same prefix.
pub fn build_alternatives<P: ProbabilityProvider + ?Sized>(
    provider: &P,
    scenario: &Scenario,
    n: usize,
    seed: u64,
) -> LlmResult<AlternativeSet> {
    let prefix = scenario.generation_prefix();
    let generated = generate_alternatives(provider, &GenerationQuery::new(prefix.clone()).with_n(n).with_seed(seed))?;
    let observed_text = scenario.utterance.trim().to_string();
    let mut pairs: Vec<(String, f64)> = generated.into_iter().map(|a| (a.utterance, a.loglik)).collect();
    if !pairs.iter().any(|(u, _)| *u == observed_text) {
        let ll = provider.loglik(&prefix, &observed_text)?;
        pairs.push((observed_text.clone(), ll));
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let observed = pairs.iter().position(|(u, _)| *u == observed_text).expect("observed utterance inserted");
    let logliks: Vec<f64> = pairs.iter().map(|(_, l)| *l).collect();
    let utterances = LabelSpace::new(SpaceKind::Utterance, pairs.into_iter().map(|(u, _)| u))?;
    let prior = Categorical::from_weights(utterances.clone(), softmax_prior(&logliks))?;
    Ok(AlternativeSet { utterances, observed, logliks, prior })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub alpha: f64,
    pub shuffles: usize,
    pub n_alts: usize,
    pub seed: u64,
    pub max_in_flight: usize,
    /// Strategy labels; the first is the literal strategy.
    pub strategies: Vec<String>,
    /// Option texts for the strategy question, aligned with `strategies`.
    pub strategy_options: Vec<String>,
    /// Words substituted into `{strategy}` when conditioning on a strategy.
    pub strategy_phrases: Vec<String>,
    pub templates: PromptTemplates,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            alpha: 1.0,
            shuffles: 10,
            n_alts: 50,
            seed: 0,
            max_in_flight: 4,
            strategies: vec!["literal".into(), "irony".into()],
            strategy_options: vec!["Sincere".into(), "Not sincere".into()],
            strategy_phrases: vec!["literal".into(), "ironic".into()],
            templates: PromptTemplates::default(),
        }
    }
}

/// Everything the LLM listeners need for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmInputs {
    pub meanings: SpaceRef,
    pub strategies: SpaceRef,
    pub alternatives: AlternativeSet,
    /// `P_N(m|c)`.
    pub meaning_prior: Categorical,
    /// `P_N(m|c,u')`, one row per alternative.
    pub meaning_posteriors: Vec<Categorical>,
    /// `P_N(m|c,u',r)`, indexed `[r][u']`.
    pub conditioned: Vec<Vec<Categorical>>,
    /// `P_N(r|c,u)` for the observed utterance.
    pub strategy_posterior: Categorical,
}

fn derived_seed(base: u64, slot: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(slot)
}

/// Queries the provider for every table the listeners use.
pub fn collect_inputs<P: ProbabilityProvider + ?Sized>(
    provider: &P,
    scenario: &Scenario,
    config: &LlmConfig,
) -> LlmResult<LlmInputs> {
    if config.strategies.len() != config.strategy_options.len() || config.strategies.len() != config.strategy_phrases.len()
    {
        return Err(ModelError::InvalidModel("strategy labels, options and phrases must align".into()).into());
    }
    let meanings = scenario.meaning_space();
    let strategies = LabelSpace::new(SpaceKind::Strategy, config.strategies.iter().cloned())?;
    let options = scenario.meaning_texts();
    let alternatives = build_alternatives(provider, scenario, config.n_alts, config.seed)?;
    let base = McqCondition::new(scenario.context_text.clone()).with_speaker(scenario.speaker_name.clone());

    let mut slot = 0u64;
    let mut ask = |task: McqTask, condition: McqCondition, options: &[String], space: &SpaceRef| -> LlmResult<Categorical> {
        slot += 1;
        let query = McqQuery::new(task, condition, options.to_vec())
            .with_shuffles(config.shuffles)
            .with_seed(derived_seed(config.seed, slot))
            .with_max_in_flight(config.max_in_flight);
        let result = mcq_distribution(provider, &config.templates, &query)?;
        Ok(Categorical::from_weights(space.clone(), result.probs)?)
    };

    let meaning_prior = ask(McqTask::MeaningPrior, base.clone(), &options, &meanings)?;
    let alts = alternatives.utterances.clone();
    let mut meaning_posteriors = Vec::with_capacity(alts.len());
    for u in alts.labels() {
        meaning_posteriors.push(ask(McqTask::MeaningPosterior, base.clone().with_utterance(u.clone()), &options, &meanings)?);
    }
    let mut conditioned = Vec::with_capacity(strategies.len());
    for phrase in &config.strategy_phrases {
        let mut rows = Vec::with_capacity(alts.len());
        for u in alts.labels() {
            let condition = base.clone().with_utterance(u.clone()).with_strategy(phrase.clone());
            rows.push(ask(McqTask::MeaningGivenStrategy, condition, &options, &meanings)?);
        }
        conditioned.push(rows);
    }
    let observed = alts.label(alternatives.observed).to_string();
    let strategy_posterior = ask(
        McqTask::StrategyPosterior,
        base.clone().with_utterance(observed),
        &config.strategy_options,
        &strategies,
    )?;
    Ok(LlmInputs { meanings, strategies, alternatives, meaning_prior, meaning_posteriors, conditioned, strategy_posterior })
}

/// Which priors to flatten before running a listener.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub uniform_meaning_prior: bool,
    pub uniform_utterance_prior: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorSource {
    /// The model's own `P_N(r|c,u)`.
    Provider,
    /// All mass on its most probable strategy.
    Indicator,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListenerPair {
    pub l0: Categorical,
    pub l1: Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyAwareOutput {
    pub marginal: ListenerPair,
    pub per_strategy: Vec<ListenerPair>,
    pub posterior: Categorical,
}

impl LlmInputs {
    pub fn validate(&self) -> LlmResult<()> {
        let n_alt = self.alternatives.utterances.len();
        let rows_ok = |rows: &[Categorical]| rows.len() == n_alt && rows.iter().all(|d| same_space(d.space(), &self.meanings));
        if !same_space(self.meaning_prior.space(), &self.meanings)
            || !rows_ok(&self.meaning_posteriors)
            || self.conditioned.len() != self.strategies.len()
            || !self.conditioned.iter().all(|rows| rows_ok(rows))
            || !same_space(self.strategy_posterior.space(), &self.strategies)
        {
            return Err(DistError::SpaceMismatch.into());
        }
        Ok(())
    }

    fn priors(&self, ablation: Ablation) -> (Categorical, Categorical) {
        let meaning = if ablation.uniform_meaning_prior {
            Categorical::uniform(self.meanings.clone())
        } else {
            self.meaning_prior.clone()
        };
        let utterance = if ablation.uniform_utterance_prior {
            Categorical::uniform(self.alternatives.utterances.clone())
        } else {
            self.alternatives.prior.clone()
        };
        (meaning, utterance)
    }

    fn listeners(&self, rows: &[Categorical], alpha: f64, ablation: Ablation) -> LlmResult<ListenerPair> {
        let table = LiteralTable::build(self.meanings.clone(), self.alternatives.utterances.clone(), |u| {
            Ok(rows[u].clone())
        })?;
        let (meaning_prior, utterance_prior) = self.priors(ablation);
        let u = self.alternatives.observed;
        let l1 = table.listener(alpha, &utterance_prior, &meaning_prior, u)?;
        Ok(ListenerPair { l0: rows[u].clone(), l1 })
    }

    /// Baseline: `L0(m|c,u) = P_N(m|c,u)` and a standard pragmatic layer.
    pub fn rsa(&self, alpha: f64, ablation: Ablation) -> LlmResult<ListenerPair> {
        self.validate()?;
        self.listeners(&self.meaning_posteriors, alpha, ablation)
    }

    /// Strategy-aware: one listener pair per strategy from `P_N(m|c,u',r)`,
    /// mixed with the chosen strategy posterior.
    pub fn rsa2(&self, alpha: f64, source: PosteriorSource, ablation: Ablation) -> LlmResult<StrategyAwareOutput> {
        self.validate()?;
        let per_strategy: Vec<ListenerPair> =
            self.conditioned.iter().map(|rows| self.listeners(rows, alpha, ablation)).collect::<LlmResult<_>>()?;
        let posterior = match source {
            PosteriorSource::Provider => self.strategy_posterior.clone(),
            PosteriorSource::Indicator => indicator_posterior(&self.strategy_posterior),
            PosteriorSource::Uniform => Categorical::uniform(self.strategies.clone()),
        };
        let l0s: Vec<Categorical> = per_strategy.iter().map(|p| p.l0.clone()).collect();
        let l1s: Vec<Categorical> = per_strategy.iter().map(|p| p.l1.clone()).collect();
        let marginal = ListenerPair { l0: l1_marginal(&l0s, &posterior)?, l1: l1_marginal(&l1s, &posterior)? };
        Ok(StrategyAwareOutput { marginal, per_strategy, posterior })
    }

    /// The rhetorical function each strategy implies at the observed
    /// utterance, `[r][m]`.
    pub fn implicit_functions(&self) -> LlmResult<Vec<Vec<f64>>> {
        let u = self.alternatives.observed;
        self.conditioned.iter().map(|rows| Ok(implicit_fr(&rows[u], &self.meaning_prior)?)).collect()
    }
}
