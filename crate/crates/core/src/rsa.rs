//! Standard RSA: literal listener, pragmatic speaker and pragmatic listener
//! over a semantic lexicon, plus the cost-based speaker formulation.
//!
//! The recursion is exact vector arithmetic. For a fixed context the literal
//! listener is materialized for every utterance in a [`LiteralTable`]; the
//! speaker normalizes over the full declared utterance set and the listener
//! inverts the speaker against the meaning prior.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::dist::{same_space, Categorical, ConditionalTable, DistError, SpaceKind, SpaceRef};
use crate::error::{ModelError, ModelResult};

/// `⟦u⟧`: the meanings each utterance literally denotes.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLexicon {
    meanings: SpaceRef,
    utterances: SpaceRef,
    // denotation[u][m]
    denotation: Vec<Vec<bool>>,
}

impl SemanticLexicon {
    pub fn new(meanings: SpaceRef, utterances: SpaceRef, denotation: Vec<Vec<bool>>) -> ModelResult<Self> {
        if denotation.len() != utterances.len() {
            return Err(ModelError::InvalidLexicon(format!(
                "{} denotation rows for {} utterances",
                denotation.len(),
                utterances.len()
            )));
        }
        if denotation.iter().any(|row| row.len() != meanings.len()) {
            return Err(ModelError::InvalidLexicon("denotation row length differs from the meaning space".into()));
        }
        if !denotation.iter().any(|row| row.iter().any(|&b| b)) {
            return Err(ModelError::InvalidLexicon("every denotation is empty".into()));
        }
        Ok(SemanticLexicon { meanings, utterances, denotation })
    }

    pub fn from_map(
        meanings: SpaceRef,
        utterances: SpaceRef,
        map: &BTreeMap<String, Vec<String>>,
    ) -> ModelResult<Self> {
        let mut denotation = vec![vec![false; meanings.len()]; utterances.len()];
        for (utterance, denoted) in map {
            let u = utterances.index_of(utterance)?;
            for m in denoted {
                denotation[u][meanings.index_of(m)?] = true;
            }
        }
        if let Some(label) = utterances.labels().iter().find(|l| !map.contains_key(*l)) {
            return Err(ModelError::InvalidLexicon(format!("utterance `{label}` has no entry")));
        }
        SemanticLexicon::new(meanings, utterances, denotation)
    }

    /// Parses `{"denotation": {"<utterance>": ["<meaning>", ...]}}`.
    pub fn from_json(value: &Value, meanings: SpaceRef, utterances: SpaceRef) -> ModelResult<Self> {
        let map: BTreeMap<String, Vec<String>> = value
            .get("denotation")
            .cloned()
            .ok_or_else(|| ModelError::InvalidLexicon("missing `denotation` object".into()))
            .and_then(|v| serde_json::from_value(v).map_err(|e| ModelError::InvalidLexicon(e.to_string())))?;
        SemanticLexicon::from_map(meanings, utterances, &map)
    }

    pub fn to_json(&self) -> Value {
        let map: BTreeMap<&str, Vec<&str>> = self
            .utterances
            .labels()
            .iter()
            .enumerate()
            .map(|(u, label)| {
                let denoted = (0..self.meanings.len())
                    .filter(|&m| self.denotation[u][m])
                    .map(|m| self.meanings.label(m))
                    .collect();
                (label.as_str(), denoted)
            })
            .collect();
        serde_json::json!({ "denotation": map })
    }

    pub fn meanings(&self) -> &SpaceRef {
        &self.meanings
    }

    pub fn utterances(&self) -> &SpaceRef {
        &self.utterances
    }

    pub fn contains(&self, u: usize, m: usize) -> bool {
        self.denotation[u][m]
    }

    /// `1[m ∈ ⟦u⟧]` as a real.
    pub fn indicator(&self, u: usize, m: usize) -> f64 {
        if self.denotation[u][m] {
            1.0
        } else {
            0.0
        }
    }
}

/// Meaning prior `P(m|c)`, utterance prior `P(u|c)` and optional strategy
/// posterior `P(r|c,u)` for one model run.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    contexts: SpaceRef,
    meaning_prior: ConditionalTable,
    utterance_prior: ConditionalTable,
    strategy_posterior: Option<ConditionalTable>,
}

impl PriorSet {
    pub fn new(
        meaning_prior: ConditionalTable,
        utterance_prior: ConditionalTable,
        strategy_posterior: Option<ConditionalTable>,
    ) -> ModelResult<Self> {
        let contexts = match meaning_prior.given() {
            [c] if c.kind() == SpaceKind::Context => c.clone(),
            _ => return Err(ModelError::InvalidModel("meaning prior must be conditioned on the context only".into())),
        };
        match utterance_prior.given() {
            [c] if same_space(c, &contexts) => {}
            _ => {
                return Err(ModelError::InvalidModel(
                    "utterance prior must be conditioned on the same context space".into(),
                ))
            }
        }
        if let Some(posterior) = &strategy_posterior {
            match posterior.given() {
                [c, u] if same_space(c, &contexts) && same_space(u, utterance_prior.over()) => {}
                _ => {
                    return Err(ModelError::InvalidModel(
                        "strategy posterior must be conditioned on (context, utterance)".into(),
                    ))
                }
            }
        }
        Ok(PriorSet { contexts, meaning_prior, utterance_prior, strategy_posterior })
    }

    /// Uniform meaning and utterance priors over the given spaces.
    pub fn uniform(contexts: SpaceRef, meanings: SpaceRef, utterances: SpaceRef) -> Self {
        PriorSet {
            meaning_prior: ConditionalTable::uniform(vec![contexts.clone()], meanings),
            utterance_prior: ConditionalTable::uniform(vec![contexts.clone()], utterances),
            strategy_posterior: None,
            contexts,
        }
    }

    pub fn contexts(&self) -> &SpaceRef {
        &self.contexts
    }

    pub fn meanings(&self) -> &SpaceRef {
        self.meaning_prior.over()
    }

    pub fn utterances(&self) -> &SpaceRef {
        self.utterance_prior.over()
    }

    pub fn meaning_prior_table(&self) -> &ConditionalTable {
        &self.meaning_prior
    }

    pub fn utterance_prior_table(&self) -> &ConditionalTable {
        &self.utterance_prior
    }

    pub fn strategy_posterior_table(&self) -> Option<&ConditionalTable> {
        self.strategy_posterior.as_ref()
    }

    pub fn meaning_prior(&self, c: usize) -> ModelResult<&Categorical> {
        Ok(self.meaning_prior.row(&[c])?)
    }

    pub fn utterance_prior(&self, c: usize) -> ModelResult<&Categorical> {
        Ok(self.utterance_prior.row(&[c])?)
    }

    pub fn strategy_posterior(&self, c: usize, u: usize) -> ModelResult<Option<&Categorical>> {
        match &self.strategy_posterior {
            Some(t) => Ok(Some(t.row(&[c, u])?)),
            None => Ok(None),
        }
    }

    pub fn with_meaning_prior(&self, table: ConditionalTable) -> ModelResult<Self> {
        PriorSet::new(table, self.utterance_prior.clone(), self.strategy_posterior.clone())
    }

    pub fn with_utterance_prior(&self, table: ConditionalTable) -> ModelResult<Self> {
        PriorSet::new(self.meaning_prior.clone(), table, self.strategy_posterior.clone())
    }

    pub fn with_strategy_posterior(&self, table: Option<ConditionalTable>) -> ModelResult<Self> {
        PriorSet::new(self.meaning_prior.clone(), self.utterance_prior.clone(), table)
    }
}

/// Rationality parameter `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsaConfig {
    pub alpha: f64,
}

impl RsaConfig {
    pub fn new(alpha: f64) -> ModelResult<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(ModelError::InvalidAlpha(alpha));
        }
        Ok(RsaConfig { alpha })
    }
}

impl Default for RsaConfig {
    fn default() -> Self {
        RsaConfig { alpha: 1.0 }
    }
}

/// `x^α` with `0^α = 0` for every `α`, including `α = 0`.
///
/// Keeps the product structure of the zero-mass argument intact: a meaning
/// the literal listener rules out is never resurrected by the exponent.
pub fn rational_power(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x.powf(alpha)
    } else {
        0.0
    }
}

/// Literal-listener rows for a single context, one per utterance.
///
/// A row is `None` when the utterance leaves no probability mass, e.g. an
/// empty denotation; such an utterance can never be chosen by the speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct LiteralTable {
    meanings: SpaceRef,
    utterances: SpaceRef,
    rows: Vec<Option<Categorical>>,
}

impl LiteralTable {
    pub fn build<F>(meanings: SpaceRef, utterances: SpaceRef, mut row: F) -> ModelResult<Self>
    where
        F: FnMut(usize) -> ModelResult<Categorical>,
    {
        let mut rows = Vec::with_capacity(utterances.len());
        for u in 0..utterances.len() {
            match row(u) {
                Ok(d) => {
                    if !same_space(d.space(), &meanings) {
                        return Err(DistError::SpaceMismatch.into());
                    }
                    rows.push(Some(d));
                }
                Err(e) if e.is_all_zero_mass() => rows.push(None),
                Err(e) => return Err(e),
            }
        }
        Ok(LiteralTable { meanings, utterances, rows })
    }

    pub fn meanings(&self) -> &SpaceRef {
        &self.meanings
    }

    pub fn utterances(&self) -> &SpaceRef {
        &self.utterances
    }

    pub fn row(&self, u: usize) -> Option<&Categorical> {
        self.rows[u].as_ref()
    }

    /// `L0(m | c, u)`, zero for utterances without a defined row.
    pub fn value(&self, u: usize, m: usize) -> f64 {
        self.rows[u].as_ref().map_or(0.0, |d| d.prob(m))
    }

    /// `S1(·|c,m) ∝ L0(m|c,u)^α · P(u|c)` over the full utterance set.
    pub fn speaker(&self, alpha: f64, utterance_prior: &Categorical, m: usize) -> ModelResult<Categorical> {
        if !same_space(utterance_prior.space(), &self.utterances) {
            return Err(DistError::SpaceMismatch.into());
        }
        self.meanings.check_index(m)?;
        let weights = (0..self.utterances.len())
            .map(|u| rational_power(self.value(u, m), alpha) * utterance_prior.prob(u))
            .collect();
        Ok(Categorical::from_weights(self.utterances.clone(), weights)?)
    }

    /// `S(·|c,m) ∝ exp(−α·κ(u)) · L0(m|c,u)^α`.
    pub fn cost_speaker(&self, alpha: f64, kappa: &[f64], m: usize) -> ModelResult<Categorical> {
        if kappa.len() != self.utterances.len() {
            return Err(DistError::LengthMismatch { expected: self.utterances.len(), got: kappa.len() }.into());
        }
        for (utterance, &value) in kappa.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(ModelError::InvalidCost { utterance, value });
            }
        }
        self.meanings.check_index(m)?;
        let weights = (0..self.utterances.len())
            .map(|u| (-alpha * kappa[u]).exp() * rational_power(self.value(u, m), alpha))
            .collect();
        Ok(Categorical::from_weights(self.utterances.clone(), weights)?)
    }

    /// `L1(·|c,u) ∝ S1(u|c,m) · P(m|c)`.
    ///
    /// Meanings that no utterance can convey get likelihood zero instead of
    /// failing the whole listener.
    pub fn listener(
        &self,
        alpha: f64,
        utterance_prior: &Categorical,
        meaning_prior: &Categorical,
        u: usize,
    ) -> ModelResult<Categorical> {
        if !same_space(meaning_prior.space(), &self.meanings) {
            return Err(DistError::SpaceMismatch.into());
        }
        self.utterances.check_index(u)?;
        let mut weights = Vec::with_capacity(self.meanings.len());
        for m in 0..self.meanings.len() {
            let likelihood = match self.speaker(alpha, utterance_prior, m) {
                Ok(s1) => s1.prob(u),
                Err(e) if e.is_all_zero_mass() => 0.0,
                Err(e) => return Err(e),
            };
            weights.push(likelihood * meaning_prior.prob(m));
        }
        Ok(Categorical::from_weights(self.meanings.clone(), weights)?)
    }
}

/// `L0(·|c,u) ∝ 1[m ∈ ⟦u⟧] · P(m|c)`.
pub fn literal_listener(lexicon: &SemanticLexicon, priors: &PriorSet, c: usize, u: usize) -> ModelResult<Categorical> {
    let prior = priors.meaning_prior(c)?;
    check_lexicon_spaces(lexicon, priors)?;
    lexicon.utterances.check_index(u)?;
    let weights = (0..lexicon.meanings.len()).map(|m| lexicon.indicator(u, m) * prior.prob(m)).collect();
    Ok(Categorical::from_weights(lexicon.meanings.clone(), weights)?)
}

/// The literal listener for every utterance in context `c`.
pub fn literal_table(lexicon: &SemanticLexicon, priors: &PriorSet, c: usize) -> ModelResult<LiteralTable> {
    LiteralTable::build(lexicon.meanings.clone(), lexicon.utterances.clone(), |u| {
        literal_listener(lexicon, priors, c, u)
    })
}

pub fn pragmatic_speaker(
    config: &RsaConfig,
    l0: &LiteralTable,
    priors: &PriorSet,
    c: usize,
    m: usize,
) -> ModelResult<Categorical> {
    l0.speaker(config.alpha, priors.utterance_prior(c)?, m)
}

pub fn pragmatic_listener(
    config: &RsaConfig,
    l0: &LiteralTable,
    priors: &PriorSet,
    c: usize,
    u: usize,
) -> ModelResult<Categorical> {
    l0.listener(config.alpha, priors.utterance_prior(c)?, priors.meaning_prior(c)?, u)
}

pub fn cost_speaker(alpha: f64, kappa: &[f64], l0: &LiteralTable, m: usize) -> ModelResult<Categorical> {
    l0.cost_speaker(alpha, kappa, m)
}

/// The cost `κ(u) = −ln P(u|c) / α` under which the cost speaker coincides
/// with the prior-weighted speaker.
pub fn cost_from_utterance_prior(utterance_prior: &Categorical, alpha: f64) -> ModelResult<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidAlpha(alpha));
    }
    Ok(utterance_prior.probs().iter().map(|&p| (-p.ln() / alpha).max(0.0)).collect())
}

fn check_lexicon_spaces(lexicon: &SemanticLexicon, priors: &PriorSet) -> ModelResult<()> {
    if !same_space(&lexicon.meanings, priors.meanings()) || !same_space(&lexicon.utterances, priors.utterances()) {
        return Err(DistError::SpaceMismatch.into());
    }
    Ok(())
}

/// A standard RSA model: lexicon, priors and rationality.
#[derive(Debug, Clone)]
pub struct StandardRsa {
    pub lexicon: SemanticLexicon,
    pub priors: PriorSet,
    pub config: RsaConfig,
}

impl StandardRsa {
    pub fn new(lexicon: SemanticLexicon, priors: PriorSet, config: RsaConfig) -> ModelResult<Self> {
        check_lexicon_spaces(&lexicon, &priors)?;
        Ok(StandardRsa { lexicon, priors, config })
    }

    pub fn l0(&self, c: usize, u: usize) -> ModelResult<Categorical> {
        literal_listener(&self.lexicon, &self.priors, c, u)
    }

    pub fn s1(&self, c: usize, m: usize) -> ModelResult<Categorical> {
        let table = literal_table(&self.lexicon, &self.priors, c)?;
        pragmatic_speaker(&self.config, &table, &self.priors, c, m)
    }

    pub fn l1(&self, c: usize, u: usize) -> ModelResult<Categorical> {
        let table = literal_table(&self.lexicon, &self.priors, c)?;
        pragmatic_listener(&self.config, &table, &self.priors, c, u)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dist::LabelSpace;
    use proptest::prelude::*;

    /// M = {m1, m2}, ⟦u1⟧ = {m1, m2}, ⟦u2⟧ = {m2}, uniform priors.
    pub(crate) fn toy() -> StandardRsa {
        let ctx = LabelSpace::new(SpaceKind::Context, ["c"]).unwrap();
        let meanings = LabelSpace::new(SpaceKind::Meaning, ["m1", "m2"]).unwrap();
        let utterances = LabelSpace::new(SpaceKind::Utterance, ["u1", "u2"]).unwrap();
        let lexicon = SemanticLexicon::new(
            meanings.clone(),
            utterances.clone(),
            vec![vec![true, true], vec![false, true]],
        )
        .unwrap();
        StandardRsa::new(lexicon, PriorSet::uniform(ctx, meanings, utterances), RsaConfig::default()).unwrap()
    }

    #[test]
    fn toy_literal_listener() {
        let model = toy();
        assert_eq!(model.l0(0, 0).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(model.l0(0, 1).unwrap().probs(), &[0.0, 1.0]);
    }

    #[test]
    fn toy_speaker_hand_recursion() {
        let model = toy();
        let s = model.s1(0, 1).unwrap();
        assert!((s.prob(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.prob(1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(model.s1(0, 0).unwrap().probs(), &[1.0, 0.0]);
    }

    #[test]
    fn toy_speaker_large_alpha() {
        let mut model = toy();
        model.config = RsaConfig::new(1e3).unwrap();
        let s = model.s1(0, 1).unwrap();
        assert!(s.prob(0) < 1e-200);
        assert!((s.prob(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn toy_pragmatic_listener() {
        let model = toy();
        let l1 = model.l1(0, 0).unwrap();
        assert!((l1.prob(0) - 0.75).abs() <= 1e-12);
        assert!((l1.prob(1) - 0.25).abs() <= 1e-12);
        assert_eq!(model.l1(0, 1).unwrap().probs(), &[0.0, 1.0]);
        // pragmatic strengthening
        assert!(l1.prob(0) > model.l0(0, 0).unwrap().prob(0));
    }

    #[test]
    fn weather_singleton_denotation_is_a_delta() {
        let ctx = LabelSpace::new(SpaceKind::Context, ["blizzard"]).unwrap();
        let states = ["terrible", "bad", "ok", "good", "amazing"];
        let meanings = LabelSpace::new(SpaceKind::Meaning, states).unwrap();
        let utterances =
            LabelSpace::new(SpaceKind::Utterance, states.iter().map(|s| format!("The weather is {s}."))).unwrap();
        let denotation = (0..5).map(|u| (0..5).map(|m| m == u).collect()).collect();
        let lexicon = SemanticLexicon::new(meanings.clone(), utterances.clone(), denotation).unwrap();
        let prior = Categorical::from_weights(meanings.clone(), vec![0.5, 0.3, 0.1, 0.07, 0.03]).unwrap();
        let priors = PriorSet::new(
            ConditionalTable::new(vec![ctx.clone()], meanings, vec![prior]).unwrap(),
            ConditionalTable::uniform(vec![ctx], utterances),
            None,
        )
        .unwrap();
        let l0 = literal_listener(&lexicon, &priors, 0, 4).unwrap();
        assert_eq!(l0.probs(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn literal_listener_all_zero_mass() {
        let ctx = LabelSpace::new(SpaceKind::Context, ["c"]).unwrap();
        let meanings = LabelSpace::new(SpaceKind::Meaning, ["m1", "m2"]).unwrap();
        let utterances = LabelSpace::new(SpaceKind::Utterance, ["u1", "u2"]).unwrap();
        let lexicon =
            SemanticLexicon::new(meanings.clone(), utterances.clone(), vec![vec![true, false], vec![false, true]])
                .unwrap();
        let prior = Categorical::delta(meanings.clone(), 1).unwrap();
        let priors = PriorSet::new(
            ConditionalTable::new(vec![ctx.clone()], meanings, vec![prior]).unwrap(),
            ConditionalTable::uniform(vec![ctx], utterances),
            None,
        )
        .unwrap();
        assert!(literal_listener(&lexicon, &priors, 0, 0).unwrap_err().is_all_zero_mass());
        let table = literal_table(&lexicon, &priors, 0).unwrap();
        assert!(table.row(0).is_none());
        // m1 cannot be conveyed by any utterance
        let err = pragmatic_speaker(&RsaConfig::default(), &table, &priors, 0, 0).unwrap_err();
        assert!(err.is_all_zero_mass());
    }

    #[test]
    fn cost_speaker_examples() {
        let model = toy();
        let table = literal_table(&model.lexicon, &model.priors, 0).unwrap();
        let zero = cost_speaker(1.0, &[0.0, 0.0], &table, 1).unwrap();
        let standard = model.s1(0, 1).unwrap();
        for (a, b) in zero.probs().iter().zip(standard.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let kappa = cost_from_utterance_prior(model.priors.utterance_prior(0).unwrap(), 1.0).unwrap();
        let eq = cost_speaker(1.0, &kappa, &table, 1).unwrap();
        for (a, b) in eq.probs().iter().zip(standard.probs()) {
            assert!((a - b).abs() < 1e-9);
        }
        let suppressed = cost_speaker(1.0, &[0.0, 50.0], &table, 1).unwrap();
        assert!(suppressed.prob(0) > 1.0 - 1e-12);
        assert!(matches!(
            cost_speaker(1.0, &[0.0, -1.0], &table, 1),
            Err(ModelError::InvalidCost { utterance: 1, .. })
        ));
    }

    #[test]
    fn alpha_zero_flattens_over_defined_utterances() {
        let mut model = toy();
        model.config = RsaConfig::new(0.0).unwrap();
        // m1 is only reachable from u1: L0(m1|u2)=0 stays 0 at α=0
        assert_eq!(model.s1(0, 0).unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(model.s1(0, 1).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn config_rejects_bad_alpha() {
        assert!(RsaConfig::new(-1.0).is_err());
        assert!(RsaConfig::new(f64::INFINITY).is_err());
    }

    #[test]
    fn lexicon_json_roundtrip_and_validation() {
        let model = toy();
        let json = model.lexicon.to_json();
        let back =
            SemanticLexicon::from_json(&json, model.lexicon.meanings().clone(), model.lexicon.utterances().clone())
                .unwrap();
        assert_eq!(back, model.lexicon);
        let missing = serde_json::json!({"denotation": {"u1": ["m1"]}});
        assert!(SemanticLexicon::from_json(&missing, back.meanings().clone(), back.utterances().clone()).is_err());
        let empty = serde_json::json!({"denotation": {"u1": [], "u2": []}});
        assert!(SemanticLexicon::from_json(&empty, back.meanings().clone(), back.utterances().clone()).is_err());
    }

    proptest! {
        #[test]
        fn speaker_monotone_in_alpha(
            den in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 4),
            prior in prop::collection::vec(0.05f64..1.0, 4),
            m in 0usize..4,
            a1 in 0.0f64..4.0,
            da in 0.0f64..4.0,
        ) {
            let ctx = LabelSpace::new(SpaceKind::Context, ["c"]).unwrap();
            let meanings = LabelSpace::new(SpaceKind::Meaning, ["a", "b", "c", "d"]).unwrap();
            let utterances = LabelSpace::new(SpaceKind::Utterance, ["w", "x", "y", "z"]).unwrap();
            prop_assume!(den.iter().any(|r| r[m]));
            let lexicon = SemanticLexicon::new(meanings.clone(), utterances.clone(), den).unwrap();
            let mp = Categorical::from_weights(meanings.clone(), prior).unwrap();
            let priors = PriorSet::new(
                ConditionalTable::new(vec![ctx.clone()], meanings, vec![mp]).unwrap(),
                ConditionalTable::uniform(vec![ctx], utterances),
                None,
            ).unwrap();
            let table = literal_table(&lexicon, &priors, 0).unwrap();
            let best = (0..4).max_by(|&x, &y| table.value(x, m).total_cmp(&table.value(y, m))).unwrap();
            let up = priors.utterance_prior(0).unwrap();
            let low = table.speaker(a1, up, m).unwrap().prob(best);
            let high = table.speaker(a1 + da, up, m).unwrap().prob(best);
            prop_assert!(high >= low - 1e-12, "{high} < {low}");
        }
    }
}
