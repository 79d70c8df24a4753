//! Rhetorical-strategy-aware RSA.
//!
//! Each strategy `r` carries a rhetorical function `f_r(c, m, u) ∈ [0, 1]`
//! that replaces the lexicon indicator in the literal listener. Speakers and
//! listeners are conditioned on `r`, and the strategy is marginalized out of
//! the pragmatic listener with `P(r | c, u)`.

use std::fmt;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use crate::dist::{same_space, Categorical, DistError, LabelSpace, SpaceKind, SpaceRef};
use crate::error::{ModelError, ModelResult};
use crate::rsa::{LiteralTable, PriorSet, RsaConfig, SemanticLexicon};

/// The ten prices of the number-expression setting.
pub const NUMBER_PRICES: [i64; 10] = [50, 51, 500, 501, 1000, 1001, 5000, 5001, 10000, 10001];

/// The smoothing value every number strategy returns outside its case.
pub const NUMBER_FLOOR: f64 = 0.001;

type FrCallable = Arc<dyn Fn(usize, usize, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum FrValues {
    Dense { meanings: usize, utterances: usize, values: Vec<f64> },
    Callable(FrCallable),
}

/// `f_r : C × M × U → [0, 1]` for one strategy.
#[derive(Clone)]
pub struct RhetoricalFunction {
    strategy: String,
    values: FrValues,
}

impl fmt::Debug for RhetoricalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.values {
            FrValues::Dense { .. } => "dense",
            FrValues::Callable(_) => "callable",
        };
        f.debug_struct("RhetoricalFunction").field("strategy", &self.strategy).field("kind", &kind).finish()
    }
}

#[derive(Deserialize)]
struct FrEntry {
    c: String,
    m: String,
    u: String,
    v: f64,
}

#[derive(Deserialize)]
struct FrFile {
    strategy: String,
    #[serde(default)]
    default: f64,
    #[serde(default)]
    values: Vec<FrEntry>,
}

impl RhetoricalFunction {
    /// Dense table indexed `[c][m][u]`, flattened row-major.
    pub fn dense(
        strategy: impl Into<String>,
        dims: (usize, usize, usize),
        values: Vec<f64>,
    ) -> ModelResult<Self> {
        let strategy = strategy.into();
        let (nc, nm, nu) = dims;
        if values.len() != nc * nm * nu {
            return Err(DistError::LengthMismatch { expected: nc * nm * nu, got: values.len() }.into());
        }
        if let Some(&value) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ModelError::InvalidRhetoricalValue { strategy, value });
        }
        Ok(RhetoricalFunction { strategy, values: FrValues::Dense { meanings: nm, utterances: nu, values } })
    }

    /// Evaluates `f` over the whole product space and stores the result densely.
    pub fn tabulate<F>(strategy: impl Into<String>, dims: (usize, usize, usize), mut f: F) -> ModelResult<Self>
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        let (nc, nm, nu) = dims;
        let mut values = Vec::with_capacity(nc * nm * nu);
        for c in 0..nc {
            for m in 0..nm {
                for u in 0..nu {
                    values.push(f(c, m, u));
                }
            }
        }
        RhetoricalFunction::dense(strategy, dims, values)
    }

    /// Wraps a closure. Its range is checked when it joins a [`StrategySet`].
    pub fn from_fn<F>(strategy: impl Into<String>, f: F) -> Self
    where
        F: Fn(usize, usize, usize) -> f64 + Send + Sync + 'static,
    {
        RhetoricalFunction { strategy: strategy.into(), values: FrValues::Callable(Arc::new(f)) }
    }

    /// The lexicon indicator `1[m ∈ ⟦u⟧]`, i.e. the literal strategy.
    pub fn from_lexicon(strategy: impl Into<String>, lexicon: &SemanticLexicon) -> Self {
        let lexicon = lexicon.clone();
        RhetoricalFunction::from_fn(strategy, move |_, m, u| lexicon.indicator(u, m))
    }

    /// Parses `{"strategy", "default", "values": [{"c","m","u","v"}]}`.
    pub fn from_json(value: &Value, contexts: &SpaceRef, meanings: &SpaceRef, utterances: &SpaceRef) -> ModelResult<Self> {
        let file: FrFile =
            serde_json::from_value(value.clone()).map_err(|e| ModelError::InvalidModel(format!("f_r table: {e}")))?;
        let (nc, nm, nu) = (contexts.len(), meanings.len(), utterances.len());
        let mut values = vec![file.default; nc * nm * nu];
        for entry in &file.values {
            let c = contexts.index_of(&entry.c)?;
            let m = meanings.index_of(&entry.m)?;
            let u = utterances.index_of(&entry.u)?;
            values[(c * nm + m) * nu + u] = entry.v;
        }
        RhetoricalFunction::dense(file.strategy, (nc, nm, nu), values)
    }

    pub fn to_json(&self, contexts: &SpaceRef, meanings: &SpaceRef, utterances: &SpaceRef) -> Value {
        let mut entries = Vec::new();
        for c in 0..contexts.len() {
            for m in 0..meanings.len() {
                for u in 0..utterances.len() {
                    let v = self.value(c, m, u);
                    if v != 0.0 {
                        entries.push(serde_json::json!({
                            "c": contexts.label(c), "m": meanings.label(m), "u": utterances.label(u), "v": v,
                        }));
                    }
                }
            }
        }
        serde_json::json!({ "strategy": self.strategy, "default": 0.0, "values": entries })
    }

    pub fn strategy(&self) -> &str {
        &self.strategy
    }

    pub fn value(&self, c: usize, m: usize, u: usize) -> f64 {
        match &self.values {
            FrValues::Dense { meanings, utterances, values } => values[(c * meanings + m) * utterances + u],
            FrValues::Callable(f) => f(c, m, u),
        }
    }

    fn check_range(&self, dims: (usize, usize, usize)) -> ModelResult<()> {
        if let FrValues::Dense { meanings, utterances, values } = &self.values {
            if *meanings != dims.1 || *utterances != dims.2 || values.len() != dims.0 * dims.1 * dims.2 {
                return Err(ModelError::InvalidModel(format!(
                    "rhetorical function `{}` was tabulated for different spaces",
                    self.strategy
                )));
            }
            return Ok(());
        }
        for c in 0..dims.0 {
            for m in 0..dims.1 {
                for u in 0..dims.2 {
                    let value = self.value(c, m, u);
                    if !(0.0..=1.0).contains(&value) {
                        return Err(ModelError::InvalidRhetoricalValue { strategy: self.strategy.clone(), value });
                    }
                }
            }
        }
        Ok(())
    }
}

/// The strategy space together with one rhetorical function per strategy.
#[derive(Debug, Clone)]
pub struct StrategySet {
    strategies: SpaceRef,
    functions: Vec<RhetoricalFunction>,
}

impl StrategySet {
    pub fn new(functions: Vec<RhetoricalFunction>) -> ModelResult<Self> {
        let strategies = LabelSpace::new(SpaceKind::Strategy, functions.iter().map(|f| f.strategy.clone()))?;
        Ok(StrategySet { strategies, functions })
    }

    /// Builds a set over an existing strategy space; labels must match one-to-one.
    pub fn with_space(strategies: SpaceRef, functions: Vec<RhetoricalFunction>) -> ModelResult<Self> {
        if strategies.len() != functions.len()
            || strategies.labels().iter().zip(&functions).any(|(l, f)| *l != f.strategy)
        {
            return Err(ModelError::InvalidModel("strategy labels and rhetorical functions differ".into()));
        }
        Ok(StrategySet { strategies, functions })
    }

    pub fn strategies(&self) -> &SpaceRef {
        &self.strategies
    }

    pub fn functions(&self) -> &[RhetoricalFunction] {
        &self.functions
    }

    pub fn function(&self, r: usize) -> &RhetoricalFunction {
        &self.functions[r]
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn validate(&self, dims: (usize, usize, usize)) -> ModelResult<()> {
        self.functions.iter().try_for_each(|f| f.check_range(dims))
    }
}

/// `L0(·|c,u,r) ∝ f_r(c,m,u) · P(m|c)`.
pub fn l0_conditioned(fr: &RhetoricalFunction, priors: &PriorSet, c: usize, u: usize) -> ModelResult<Categorical> {
    let prior = priors.meaning_prior(c)?;
    priors.utterances().check_index(u)?;
    let weights = (0..prior.len())
        .map(|m| {
            let f = fr.value(c, m, u);
            if (0.0..=1.0).contains(&f) {
                Ok(f * prior.prob(m))
            } else {
                Err(ModelError::InvalidRhetoricalValue { strategy: fr.strategy.clone(), value: f })
            }
        })
        .collect::<ModelResult<Vec<_>>>()?;
    Ok(Categorical::from_weights(prior.space().clone(), weights)?)
}

/// Strategy-conditioned literal listener for every utterance of context `c`.
pub fn conditioned_table(fr: &RhetoricalFunction, priors: &PriorSet, c: usize) -> ModelResult<LiteralTable> {
    LiteralTable::build(priors.meanings().clone(), priors.utterances().clone(), |u| l0_conditioned(fr, priors, c, u))
}

/// `S1(·|c,m,r) ∝ L0(m|c,u,r)^α · P(u|c)`.
pub fn s1_conditioned(
    config: &RsaConfig,
    l0r: &LiteralTable,
    priors: &PriorSet,
    c: usize,
    m: usize,
) -> ModelResult<Categorical> {
    l0r.speaker(config.alpha, priors.utterance_prior(c)?, m)
}

/// `L1(·|c,u,r) ∝ S1(u|c,m,r) · P(m|c)`.
pub fn l1_conditioned(
    config: &RsaConfig,
    l0r: &LiteralTable,
    priors: &PriorSet,
    c: usize,
    u: usize,
) -> ModelResult<Categorical> {
    l0r.listener(config.alpha, priors.utterance_prior(c)?, priors.meaning_prior(c)?, u)
}

/// `Σ_r P(r|c,u) · L(·|c,u,r)`.
pub fn l1_marginal(listeners: &[Categorical], strategy_posterior: &Categorical) -> ModelResult<Categorical> {
    if listeners.len() != strategy_posterior.len() {
        return Err(DistError::LengthMismatch { expected: strategy_posterior.len(), got: listeners.len() }.into());
    }
    let components: Vec<(f64, &Categorical)> = strategy_posterior.probs().iter().copied().zip(listeners).collect();
    Ok(Categorical::mix(&components)?)
}

/// `I(r|c,u)`: all mass on the most probable strategy (lowest index on ties).
pub fn indicator_posterior(p: &Categorical) -> Categorical {
    Categorical::delta(p.space().clone(), p.argmax()).expect("argmax is always in range")
}

/// The rhetorical function implied by a strategy-conditioned posterior and a
/// meaning prior: `f(m) = P(m|c,u,r) / (k · P(m|c))`, `k` the largest ratio.
pub fn implicit_fr(conditioned: &Categorical, prior: &Categorical) -> ModelResult<Vec<f64>> {
    if !same_space(conditioned.space(), prior.space()) {
        return Err(DistError::SpaceMismatch.into());
    }
    let mut ratios = Vec::with_capacity(prior.len());
    for m in 0..prior.len() {
        let p = prior.prob(m);
        if p <= 0.0 {
            return Err(ModelError::DivisionByZeroPrior { meaning: prior.space().label(m).to_string() });
        }
        ratios.push(conditioned.prob(m) / p);
    }
    let k = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ratios.into_iter().map(|r| (r / k).min(1.0)).collect())
}

/// The hand-built strategies of the number-expression setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberStrategy {
    Literal,
    Hyperbole,
    Understatement,
    Halo,
}

impl NumberStrategy {
    pub const ALL: [NumberStrategy; 4] =
        [NumberStrategy::Literal, NumberStrategy::Hyperbole, NumberStrategy::Understatement, NumberStrategy::Halo];

    pub fn label(self) -> &'static str {
        match self {
            NumberStrategy::Literal => "literal",
            NumberStrategy::Hyperbole => "hyperbole",
            NumberStrategy::Understatement => "understatement",
            NumberStrategy::Halo => "halo",
        }
    }
}

/// Case function over prices; the context is ignored.
pub fn numbers_fr(strategy: NumberStrategy, m: i64, u: i64) -> ModelResult<f64> {
    for x in [m, u] {
        if !NUMBER_PRICES.contains(&x) {
            return Err(ModelError::LabelOutOfSpace(x.to_string()));
        }
    }
    let hit = match strategy {
        NumberStrategy::Literal => u == m,
        NumberStrategy::Hyperbole => u - m > 10,
        NumberStrategy::Understatement => m - u > 10,
        NumberStrategy::Halo => (u - m).abs() == 1 && u % 10 == 0,
    };
    Ok(if hit { 1.0 } else { NUMBER_FLOOR })
}

fn parse_price(label: &str) -> ModelResult<i64> {
    label.trim().parse::<i64>().map_err(|_| ModelError::LabelOutOfSpace(label.to_string()))
}

/// The four number strategies over meaning/utterance spaces labeled by price.
pub fn numbers_strategy_set(meanings: &SpaceRef, utterances: &SpaceRef) -> ModelResult<StrategySet> {
    let m_prices = meanings.labels().iter().map(|l| parse_price(l)).collect::<ModelResult<Vec<_>>>()?;
    let u_prices = utterances.labels().iter().map(|l| parse_price(l)).collect::<ModelResult<Vec<_>>>()?;
    let functions = NumberStrategy::ALL
        .iter()
        .map(|&s| {
            let table = m_prices
                .iter()
                .map(|&m| u_prices.iter().map(|&u| numbers_fr(s, m, u)).collect::<ModelResult<Vec<_>>>())
                .collect::<ModelResult<Vec<_>>>()?;
            Ok(RhetoricalFunction::from_fn(s.label(), move |_, m, u| table[m][u]))
        })
        .collect::<ModelResult<Vec<_>>>()?;
    StrategySet::new(functions)
}

/// Literal and irony strategies over an ordered rating scale where utterance
/// `i` literally denotes meaning `i`. Irony maps an utterance to the mirror
/// image of its literal meaning (first ↔ last, and so on inward).
pub fn scale_irony_strategy_set(meanings: &SpaceRef, utterances: &SpaceRef) -> ModelResult<StrategySet> {
    if meanings.len() != utterances.len() {
        return Err(ModelError::InvalidModel("scale strategies need one utterance per meaning".into()));
    }
    let n = meanings.len();
    let literal = RhetoricalFunction::from_fn("literal", |_, m, u| if m == u { 1.0 } else { 0.0 });
    let irony = RhetoricalFunction::from_fn("irony", move |_, m, u| if m == n - 1 - u { 1.0 } else { 0.0 });
    StrategySet::new(vec![literal, irony])
}

/// A full (RSA)² model.
#[derive(Debug, Clone)]
pub struct Rsa2Model {
    pub strategies: StrategySet,
    pub priors: PriorSet,
    pub config: RsaConfig,
}

impl Rsa2Model {
    pub fn new(strategies: StrategySet, priors: PriorSet, config: RsaConfig) -> ModelResult<Self> {
        strategies.validate((priors.contexts().len(), priors.meanings().len(), priors.utterances().len()))?;
        if let Some(table) = priors.strategy_posterior_table() {
            if !same_space(table.over(), strategies.strategies()) {
                return Err(DistError::SpaceMismatch.into());
            }
        }
        Ok(Rsa2Model { strategies, priors, config })
    }

    pub fn table(&self, c: usize, r: usize) -> ModelResult<LiteralTable> {
        conditioned_table(self.strategies.function(r), &self.priors, c)
    }

    pub fn l0(&self, c: usize, u: usize, r: usize) -> ModelResult<Categorical> {
        l0_conditioned(self.strategies.function(r), &self.priors, c, u)
    }

    pub fn s1(&self, c: usize, m: usize, r: usize) -> ModelResult<Categorical> {
        s1_conditioned(&self.config, &self.table(c, r)?, &self.priors, c, m)
    }

    pub fn l1(&self, c: usize, u: usize, r: usize) -> ModelResult<Categorical> {
        l1_conditioned(&self.config, &self.table(c, r)?, &self.priors, c, u)
    }

    /// `P(r|c,u)` from the prior set, or uniform when none was supplied.
    pub fn strategy_posterior(&self, c: usize, u: usize) -> ModelResult<Categorical> {
        Ok(match self.priors.strategy_posterior(c, u)? {
            Some(p) => p.clone(),
            None => Categorical::uniform(self.strategies.strategies().clone()),
        })
    }

    pub fn l0_marginal(&self, c: usize, u: usize, posterior: &Categorical) -> ModelResult<Categorical> {
        let listeners = (0..self.strategies.len()).map(|r| self.l0(c, u, r)).collect::<ModelResult<Vec<_>>>()?;
        l1_marginal(&listeners, posterior)
    }

    pub fn l1_marginal(&self, c: usize, u: usize, posterior: &Categorical) -> ModelResult<Categorical> {
        let listeners = (0..self.strategies.len()).map(|r| self.l1(c, u, r)).collect::<ModelResult<Vec<_>>>()?;
        l1_marginal(&listeners, posterior)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ConditionalTable;
    use crate::rsa::{literal_table, pragmatic_listener, pragmatic_speaker};
    use proptest::prelude::*;

    const STATES: [&str; 5] = ["terrible", "bad", "ok", "good", "amazing"];

    fn blizzard() -> (SpaceRef, SpaceRef, SpaceRef, PriorSet) {
        let ctx = LabelSpace::new(SpaceKind::Context, ["blizzard"]).unwrap();
        let meanings = LabelSpace::new(SpaceKind::Meaning, STATES).unwrap();
        let utterances =
            LabelSpace::new(SpaceKind::Utterance, STATES.iter().map(|s| format!("The weather is {s}."))).unwrap();
        let prior = Categorical::from_weights(meanings.clone(), vec![0.6, 0.25, 0.1, 0.04, 0.01]).unwrap();
        let priors = PriorSet::new(
            ConditionalTable::new(vec![ctx.clone()], meanings.clone(), vec![prior]).unwrap(),
            ConditionalTable::uniform(vec![ctx.clone()], utterances.clone()),
            None,
        )
        .unwrap();
        (ctx, meanings, utterances, priors)
    }

    #[test]
    fn numbers_case_function() {
        use NumberStrategy::*;
        assert_eq!(numbers_fr(Hyperbole, 50, 500).unwrap(), 1.0);
        assert_eq!(numbers_fr(Halo, 501, 500).unwrap(), 1.0);
        assert_eq!(numbers_fr(Literal, 50, 50).unwrap(), 1.0);
        assert_eq!(numbers_fr(Literal, 50, 51).unwrap(), 0.001);
        assert_eq!(numbers_fr(Understatement, 5000, 50).unwrap(), 1.0);
        assert_eq!(numbers_fr(Halo, 1000, 1001).unwrap(), 0.001);
        assert_eq!(numbers_fr(Halo, 1001, 1000).unwrap(), 1.0);
        // |u - m| = 10 is not enough for hyperbole
        assert_eq!(numbers_fr(Hyperbole, 50, 51).unwrap(), 0.001);
        assert_eq!(numbers_fr(Literal, 52, 50).unwrap_err(), ModelError::LabelOutOfSpace("52".into()));
    }

    #[test]
    fn literal_strategy_reduces_to_standard_l0() {
        let model = crate::rsa::tests::toy();
        let fr = RhetoricalFunction::from_lexicon("literal", &model.lexicon);
        for u in 0..2 {
            assert_eq!(l0_conditioned(&fr, &model.priors, 0, u).unwrap(), model.l0(0, u).unwrap());
        }
    }

    #[test]
    fn constant_one_returns_the_prior() {
        let (_, _, _, priors) = blizzard();
        let fr = RhetoricalFunction::from_fn("flat", |_, _, _| 1.0);
        assert_eq!(&l0_conditioned(&fr, &priors, 0, 4).unwrap(), priors.meaning_prior(0).unwrap());
    }

    #[test]
    fn blizzard_irony() {
        let (_, meanings, utterances, priors) = blizzard();
        let set = scale_irony_strategy_set(&meanings, &utterances).unwrap();
        let irony = set.function(1);
        assert_eq!(irony.value(0, 0, 4), 1.0);
        assert_eq!(irony.value(0, 4, 4), 0.0);
        let l0 = l0_conditioned(irony, &priors, 0, 4).unwrap();
        assert_eq!(l0.argmax_label(), "terrible");
        assert_eq!(l0.prob(0), 1.0);

        let model = Rsa2Model::new(set, priors, RsaConfig::default()).unwrap();
        let l1 = model.l1(0, 4, 1).unwrap();
        assert_eq!(l1.probs(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn marginal_escapes_the_zero_mass_theorem() {
        let (_, meanings, utterances, priors) = blizzard();
        let model = Rsa2Model::new(scale_irony_strategy_set(&meanings, &utterances).unwrap(), priors, RsaConfig::default())
            .unwrap();
        for p in [0.01, 0.3, 0.9] {
            let posterior = Categorical::from_weights(model.strategies.strategies().clone(), vec![1.0 - p, p]).unwrap();
            let l1 = model.l1_marginal(0, 4, &posterior).unwrap();
            assert!(l1.prob(0) > 0.0);
        }
    }

    #[test]
    fn numbers_halo_speaker_prefers_round_number() {
        let ctx = LabelSpace::new(SpaceKind::Context, ["electric kettle"]).unwrap();
        let labels: Vec<String> = NUMBER_PRICES.iter().map(|p| p.to_string()).collect();
        let meanings = LabelSpace::new(SpaceKind::Meaning, labels.clone()).unwrap();
        let utterances = LabelSpace::new(SpaceKind::Utterance, labels).unwrap();
        let priors = PriorSet::uniform(ctx, meanings.clone(), utterances.clone());
        let set = numbers_strategy_set(&meanings, &utterances).unwrap();
        let model = Rsa2Model::new(set, priors, RsaConfig::default()).unwrap();
        let halo = 3;
        let m501 = meanings.index_of("501").unwrap();
        let s1 = model.s1(0, m501, halo).unwrap();
        assert_eq!(s1.argmax_label(), "500");

        // oracle: direct evaluation of the case function and the two normalizations
        let f = |m: i64, u: i64| numbers_fr(NumberStrategy::Halo, m, u).unwrap();
        let l0_501 = |u: i64| f(501, u) / NUMBER_PRICES.iter().map(|&m| f(m, u)).sum::<f64>();
        let z: f64 = NUMBER_PRICES.iter().map(|&u| l0_501(u)).sum();
        for (i, &u) in NUMBER_PRICES.iter().enumerate() {
            assert!((s1.prob(i) - l0_501(u) / z).abs() < 1e-12);
        }
    }

    #[test]
    fn single_utterance_listener_is_prior_weighted_fr() {
        let ctx = LabelSpace::new(SpaceKind::Context, ["c"]).unwrap();
        let meanings = LabelSpace::new(SpaceKind::Meaning, ["a", "b", "c"]).unwrap();
        let utterances = LabelSpace::new(SpaceKind::Utterance, ["only"]).unwrap();
        let prior = Categorical::from_weights(meanings.clone(), vec![0.2, 0.3, 0.5]).unwrap();
        let priors = PriorSet::new(
            ConditionalTable::new(vec![ctx.clone()], meanings.clone(), vec![prior]).unwrap(),
            ConditionalTable::uniform(vec![ctx], utterances),
            None,
        )
        .unwrap();
        let f = [0.9, 0.1, 0.5];
        let set = StrategySet::new(vec![RhetoricalFunction::from_fn("r", move |_, m, _| f[m])]).unwrap();
        let model = Rsa2Model::new(set, priors, RsaConfig::default()).unwrap();
        let l1 = model.l1(0, 0, 0).unwrap();
        let expected = Categorical::from_weights(meanings, vec![0.2, 0.3, 0.5]).unwrap();
        for (a, b) in l1.probs().iter().zip(expected.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_zero_is_uniform_over_defined_utterances() {
        let (_, meanings, utterances, priors) = blizzard();
        let set = StrategySet::new(vec![RhetoricalFunction::from_fn("r", |_, m, u| {
            if u == 0 || m == u {
                1.0
            } else {
                0.0
            }
        })])
        .unwrap();
        let _ = (meanings, utterances);
        let model = Rsa2Model::new(set, priors, RsaConfig::new(0.0).unwrap()).unwrap();
        // meaning 2 is reachable from utterance 0 and utterance 2 only
        let s1 = model.s1(0, 2, 0).unwrap();
        assert_eq!(s1.probs(), &[0.5, 0.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn marginal_examples() {
        let (_, meanings, utterances, priors) = blizzard();
        let model = Rsa2Model::new(scale_irony_strategy_set(&meanings, &utterances).unwrap(), priors, RsaConfig::default())
            .unwrap();
        let rs = model.strategies.strategies().clone();
        let delta = Categorical::delta(rs.clone(), 1).unwrap();
        assert_eq!(model.l1_marginal(0, 4, &delta).unwrap(), model.l1(0, 4, 1).unwrap());
        let same = model.l1(0, 2, 0).unwrap();
        let mixed = l1_marginal(&[same.clone(), same.clone()], &Categorical::uniform(rs)).unwrap();
        for (a, b) in mixed.probs().iter().zip(same.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let wrong = l1_marginal(&[same.clone()], &Categorical::uniform(model.strategies.strategies().clone()));
        assert!(wrong.is_err());
    }

    #[test]
    fn indicator_posterior_examples() {
        let rs = LabelSpace::new(SpaceKind::Strategy, ["irony", "literal"]).unwrap();
        let p = Categorical::from_weights(rs.clone(), vec![0.88, 0.12]).unwrap();
        assert_eq!(indicator_posterior(&p).probs(), &[1.0, 0.0]);
        let p = Categorical::from_weights(rs.clone(), vec![0.45, 0.55]).unwrap();
        assert_eq!(indicator_posterior(&p).probs(), &[0.0, 1.0]);
        assert_eq!(indicator_posterior(&Categorical::uniform(rs)).probs(), &[1.0, 0.0]);
    }

    #[test]
    fn implicit_fr_examples() {
        let ms = LabelSpace::new(SpaceKind::Meaning, ["a", "b"]).unwrap();
        let half = Categorical::uniform(ms.clone());
        assert_eq!(implicit_fr(&half, &half).unwrap(), vec![1.0, 1.0]);
        let cond = Categorical::from_weights(ms.clone(), vec![0.8, 0.2]).unwrap();
        let f = implicit_fr(&cond, &half).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-15 && (f[1] - 0.25).abs() < 1e-15);
        let zero = Categorical::delta(ms, 0).unwrap();
        assert!(matches!(implicit_fr(&cond, &zero), Err(ModelError::DivisionByZeroPrior { .. })));
    }

    #[test]
    fn rhetorical_function_range_is_enforced() {
        assert!(RhetoricalFunction::dense("x", (1, 1, 2), vec![0.5, 1.5]).is_err());
        let set = StrategySet::new(vec![RhetoricalFunction::from_fn("bad", |_, _, _| 2.0)]).unwrap();
        let model = crate::rsa::tests::toy();
        assert!(Rsa2Model::new(set, model.priors, RsaConfig::default()).is_err());
    }

    #[test]
    fn fr_json_roundtrip() {
        let (ctx, meanings, utterances, _) = blizzard();
        let json = serde_json::json!({
            "strategy": "irony", "default": 0.0,
            "values": [{"c": "blizzard", "m": "terrible", "u": "The weather is amazing.", "v": 1.0}]
        });
        let fr = RhetoricalFunction::from_json(&json, &ctx, &meanings, &utterances).unwrap();
        assert_eq!(fr.value(0, 0, 4), 1.0);
        assert_eq!(fr.value(0, 4, 4), 0.0);
        let back = RhetoricalFunction::from_json(&fr.to_json(&ctx, &meanings, &utterances), &ctx, &meanings, &utterances)
            .unwrap();
        assert_eq!(back.value(0, 0, 4), 1.0);
        let bad = serde_json::json!({"strategy": "x", "values": [{"c": "nope", "m": "ok", "u": "x", "v": 1.0}]});
        assert!(RhetoricalFunction::from_json(&bad, &ctx, &meanings, &utterances).is_err());
    }

    fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n)
    }

    proptest! {
        #[test]
        fn implicit_fr_round_trips_through_l0(a in positive_vec(6), b in positive_vec(6)) {
            let ctx = LabelSpace::new(SpaceKind::Context, ["c"]).unwrap();
            let ms = LabelSpace::new(SpaceKind::Meaning, (0..6).map(|i| format!("m{i}"))).unwrap();
            let us = LabelSpace::new(SpaceKind::Utterance, ["u"]).unwrap();
            let cond = Categorical::from_weights(ms.clone(), a).unwrap();
            let prior = Categorical::from_weights(ms.clone(), b).unwrap();
            let f = implicit_fr(&cond, &prior).unwrap();
            prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
            let priors = PriorSet::new(
                ConditionalTable::new(vec![ctx.clone()], ms, vec![prior]).unwrap(),
                ConditionalTable::uniform(vec![ctx], us),
                None,
            ).unwrap();
            let fr = RhetoricalFunction::from_fn("implicit", move |_, m, _| f[m]);
            let back = l0_conditioned(&fr, &priors, 0, 0).unwrap();
            for (x, y) in back.probs().iter().zip(cond.probs()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn literal_only_marginal_equals_standard_rsa(
            den in prop::collection::vec(prop::collection::vec(any::<bool>(), 5), 4),
            prior in positive_vec(5),
            uprior in positive_vec(4),
            alpha in 0.1f64..5.0,
            u in 0usize..4,
        ) {
            prop_assume!(den[u].iter().any(|&b| b));
            let ctx = LabelSpace::new(SpaceKind::Context, ["c"]).unwrap();
            let ms = LabelSpace::new(SpaceKind::Meaning, (0..5).map(|i| format!("m{i}"))).unwrap();
            let us = LabelSpace::new(SpaceKind::Utterance, (0..4).map(|i| format!("u{i}"))).unwrap();
            let lexicon = SemanticLexicon::new(ms.clone(), us.clone(), den).unwrap();
            let priors = PriorSet::new(
                ConditionalTable::new(vec![ctx.clone()], ms.clone(), vec![Categorical::from_weights(ms, prior).unwrap()]).unwrap(),
                ConditionalTable::new(vec![ctx], us.clone(), vec![Categorical::from_weights(us, uprior).unwrap()]).unwrap(),
                None,
            ).unwrap();
            let config = RsaConfig::new(alpha).unwrap();
            let set = StrategySet::new(vec![RhetoricalFunction::from_lexicon("literal", &lexicon)]).unwrap();
            let model = Rsa2Model::new(set, priors.clone(), config).unwrap();
            let posterior = Categorical::uniform(model.strategies.strategies().clone());
            let table = literal_table(&lexicon, &priors, 0).unwrap();
            let standard = pragmatic_listener(&config, &table, &priors, 0, u).unwrap();
            let marginal = model.l1_marginal(0, u, &posterior).unwrap();
            prop_assert_eq!(marginal.probs(), standard.probs());
            for m in 0..5 {
                if let Ok(s) = pragmatic_speaker(&config, &table, &priors, 0, m) {
                    let ours = model.s1(0, m, 0).unwrap();
                    prop_assert_eq!(ours.probs(), s.probs());
                }
            }
        }
    }
}
