//! Dataset schemas and loaders: role-tagged irony scenarios, the numbers
//! setting and the weather setting.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dist::{Categorical, ConditionalTable, DistError, LabelSpace, SpaceKind, SpaceRef};
use crate::error::ModelError;
use crate::qud::{weather_utterance, WeatherPriors};
use crate::rsa::{PriorSet, RsaConfig};
use crate::rsa2::{numbers_strategy_set, scale_irony_strategy_set, Rsa2Model, NUMBER_PRICES};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{origin} line {line}: {message}")]
    Parse { origin: String, line: usize, message: String },
    #[error("{origin} line {line}, field `{field}`: {message}")]
    Invalid { origin: String, line: usize, field: String, message: String },
    #[error("key sets differ: {0}")]
    KeyMismatch(String),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type DataResult<T> = Result<T, DataError>;

pub fn read_text(path: &Path) -> DataResult<String> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeaningRole {
    Literal,
    Nonliteral,
    Overlap,
    Nonsequitur,
}

impl MeaningRole {
    pub const ALL: [MeaningRole; 4] =
        [MeaningRole::Literal, MeaningRole::Nonliteral, MeaningRole::Overlap, MeaningRole::Nonsequitur];

    pub fn label(self) -> &'static str {
        match self {
            MeaningRole::Literal => "literal",
            MeaningRole::Nonliteral => "nonliteral",
            MeaningRole::Overlap => "overlap",
            MeaningRole::Nonsequitur => "nonsequitur",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.label() == label)
    }

    /// The other candidate interpretation: literal and nonliteral swap,
    /// distractors have none.
    pub fn opposite(self) -> Option<Self> {
        match self {
            MeaningRole::Literal => Some(MeaningRole::Nonliteral),
            MeaningRole::Nonliteral => Some(MeaningRole::Literal),
            _ => None,
        }
    }
}

impl fmt::Display for MeaningRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioMeaning {
    pub text: String,
    pub role: MeaningRole,
}

/// One irony-interpretation item.
///
/// `context_text` runs up to the opening quote of the utterance (the quote
/// itself excluded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub context_text: String,
    pub speaker_name: String,
    pub utterance: String,
    pub meanings: Vec<ScenarioMeaning>,
    pub intended_role: MeaningRole,
    pub split: Split,
}

impl Scenario {
    /// Returns the offending field and a message.
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if self.id.trim().is_empty() {
            return Err(("id", "must not be empty".into()));
        }
        if self.utterance.trim().is_empty() {
            return Err(("utterance", "must not be empty".into()));
        }
        if self.context_text.trim().is_empty() {
            return Err(("context_text", "must not be empty".into()));
        }
        if self.meanings.len() != 4 {
            return Err(("meanings", format!("expected 4 meanings, found {}", self.meanings.len())));
        }
        let roles: BTreeSet<MeaningRole> = self.meanings.iter().map(|m| m.role).collect();
        if roles.len() != 4 {
            return Err(("meanings", "each role must appear exactly once".into()));
        }
        let texts: BTreeSet<&str> = self.meanings.iter().map(|m| m.text.trim()).collect();
        if texts.len() != 4 {
            return Err(("meanings", "meaning texts must be distinct".into()));
        }
        if self.intended_role.opposite().is_none() {
            return Err(("intended_role", format!("must be literal or nonliteral, got {}", self.intended_role)));
        }
        Ok(())
    }

    /// Meaning space labeled by role, in file order.
    pub fn meaning_space(&self) -> SpaceRef {
        LabelSpace::new(SpaceKind::Meaning, self.meanings.iter().map(|m| m.role.label()))
            .expect("roles are distinct after check")
    }

    pub fn meaning_texts(&self) -> Vec<String> {
        self.meanings.iter().map(|m| m.text.clone()).collect()
    }

    pub fn role_index(&self, role: MeaningRole) -> usize {
        self.meanings.iter().position(|m| m.role == role).expect("every role present after check")
    }

    /// Text a generator continues from: the context plus an opening quote.
    pub fn generation_prefix(&self) -> String {
        format!("{} \"", self.context_text.trim_end())
    }
}

/// Parses JSON-lines scenarios; blank lines and `#` comments are skipped.
pub fn parse_scenarios(text: &str, origin: &str) -> DataResult<Vec<Scenario>> {
    let mut out: Vec<Scenario> = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let scenario: Scenario = serde_json::from_str(trimmed).map_err(|e| DataError::Parse {
            origin: origin.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        scenario.check().map_err(|(field, message)| DataError::Invalid {
            origin: origin.to_string(),
            line: line_no,
            field: field.to_string(),
            message,
        })?;
        if !ids.insert(scenario.id.clone()) {
            return Err(DataError::Invalid {
                origin: origin.to_string(),
                line: line_no,
                field: "id".into(),
                message: format!("duplicate id `{}`", scenario.id),
            });
        }
        out.push(scenario);
    }
    Ok(out)
}

pub fn load_scenarios(path: &Path) -> DataResult<Vec<Scenario>> {
    parse_scenarios(&read_text(path)?, &path.display().to_string())
}

/// The bundled eight-scenario fixture (four items, each in an ironic and a
/// literal variant).
pub fn fixture_scenarios() -> Vec<Scenario> {
    parse_scenarios(include_str!("../fixtures/scenarios.jsonl"), "fixtures/scenarios.jsonl")
        .expect("bundled fixture is valid")
}

pub const NUMBER_CONTEXTS: [&str; 3] = ["electric kettle", "laptop", "watch"];

pub fn number_sentence(context: &str, price: &str) -> String {
    format!("The {context} costs {price} dollars.")
}

/// Price expressions: three items, ten prices shared by meanings and
/// utterances.
#[derive(Debug, Clone)]
pub struct NumbersDataset {
    pub contexts: SpaceRef,
    pub meanings: SpaceRef,
    pub utterances: SpaceRef,
}

impl Default for NumbersDataset {
    fn default() -> Self {
        Self::new()
    }
}

impl NumbersDataset {
    pub fn new() -> Self {
        let prices: Vec<String> = NUMBER_PRICES.iter().map(|p| p.to_string()).collect();
        NumbersDataset {
            contexts: LabelSpace::new(SpaceKind::Context, NUMBER_CONTEXTS).expect("distinct"),
            meanings: LabelSpace::new(SpaceKind::Meaning, prices.clone()).expect("distinct"),
            utterances: LabelSpace::new(SpaceKind::Utterance, prices).expect("distinct"),
        }
    }

    pub fn sentence(&self, c: usize, u: usize) -> String {
        number_sentence(self.contexts.label(c), self.utterances.label(u))
    }

    pub fn meaning_prior_from_json(&self, value: &Value) -> DataResult<ConditionalTable> {
        Ok(ConditionalTable::from_json(value, vec![self.contexts.clone()], self.meanings.clone())?)
    }

    /// Synthetic meaning prior bundled for demos and tests.
    pub fn fixture_meaning_prior(&self) -> ConditionalTable {
        let value: Value = serde_json::from_str(include_str!("../fixtures/numbers_meaning_prior.json"))
            .expect("bundled fixture parses");
        self.meaning_prior_from_json(&value).expect("bundled fixture matches the spaces")
    }

    /// Priors with uniform utterance prior and uniform strategy posterior.
    pub fn priors(&self, meaning_prior: ConditionalTable) -> DataResult<PriorSet> {
        let uniform = PriorSet::uniform(self.contexts.clone(), self.meanings.clone(), self.utterances.clone());
        Ok(uniform.with_meaning_prior(meaning_prior)?)
    }

    pub fn model(&self, priors: PriorSet, alpha: f64) -> DataResult<Rsa2Model> {
        let strategies = numbers_strategy_set(&self.meanings, &self.utterances)?;
        Ok(Rsa2Model::new(strategies, priors, RsaConfig::new(alpha)?)?)
    }
}

/// Weather descriptions: nine contexts, five states, one utterance per state.
#[derive(Debug, Clone)]
pub struct WeatherDataset {
    pub priors: WeatherPriors,
    pub utterances: SpaceRef,
    pub strategies: SpaceRef,
}

impl WeatherDataset {
    pub fn new(priors: WeatherPriors) -> DataResult<Self> {
        let utterances =
            LabelSpace::new(SpaceKind::Utterance, priors.states.labels().iter().map(|s| weather_utterance(s)))?;
        let strategies = LabelSpace::new(SpaceKind::Strategy, ["literal", "irony"])?;
        Ok(WeatherDataset { priors, utterances, strategies })
    }

    pub fn from_json(value: &Value) -> DataResult<Self> {
        Self::new(WeatherPriors::from_json(value)?)
    }

    pub fn load(path: &Path) -> DataResult<Self> {
        let value: Value = serde_json::from_str(&read_text(path)?).map_err(|e| DataError::Parse {
            origin: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::from_json(&value)
    }

    /// Synthetic priors bundled with the crate.
    pub fn fixture() -> Self {
        let value: Value =
            serde_json::from_str(include_str!("../fixtures/weather_priors.json")).expect("bundled fixture parses");
        Self::from_json(&value).expect("bundled fixture is valid")
    }

    pub fn contexts(&self) -> &SpaceRef {
        &self.priors.contexts
    }

    pub fn states(&self) -> &SpaceRef {
        &self.priors.states
    }

    /// Every (context, state, utterance, strategy) index tuple.
    pub fn quadruples(&self) -> Vec<[usize; 4]> {
        let mut out = Vec::new();
        for c in 0..self.contexts().len() {
            for m in 0..self.states().len() {
                for u in 0..self.utterances.len() {
                    for r in 0..self.strategies.len() {
                        out.push([c, m, u, r]);
                    }
                }
            }
        }
        out
    }

    /// State prior, uniform utterance prior, no strategy posterior.
    pub fn prior_set(&self) -> PriorSet {
        let mut priors =
            PriorSet::uniform(self.contexts().clone(), self.states().clone(), self.utterances.clone());
        priors = priors.with_meaning_prior(self.priors.state_prior.clone()).expect("spaces match by construction");
        priors
    }

    /// Literal and mirror-irony strategies over the five-point scale.
    pub fn scale_model(&self, alpha: f64, strategy_posterior: Option<ConditionalTable>) -> DataResult<Rsa2Model> {
        let set = scale_irony_strategy_set(self.states(), &self.utterances)?;
        let priors = self.prior_set().with_strategy_posterior(strategy_posterior)?;
        Ok(Rsa2Model::new(set, priors, RsaConfig::new(alpha)?)?)
    }
}

/// Uniform strategy posterior table given (context, utterance).
pub fn uniform_strategy_posterior(contexts: &SpaceRef, utterances: &SpaceRef, strategies: &SpaceRef) -> ConditionalTable {
    ConditionalTable::uniform(vec![contexts.clone(), utterances.clone()], strategies.clone())
}

/// Reads an optional `(context, utterance) -> meaning` table, e.g. human
/// listener judgments.
pub fn load_listener_table(
    path: &Path,
    contexts: &SpaceRef,
    utterances: &SpaceRef,
    meanings: &SpaceRef,
) -> DataResult<ConditionalTable> {
    let value: Value = serde_json::from_str(&read_text(path)?).map_err(|e| DataError::Parse {
        origin: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(ConditionalTable::from_json(&value, vec![contexts.clone(), utterances.clone()], meanings.clone())?)
}

/// Keyed view of a listener table, convenient for metrics.
pub fn table_to_keyed(table: &ConditionalTable) -> DataResult<crate::eval::KeyedDistributions> {
    if table.given().len() != 2 {
        return Err(DataError::Schema("listener tables are keyed by (context, utterance)".into()));
    }
    let (cs, us) = (&table.given()[0], &table.given()[1]);
    let mut out = crate::eval::KeyedDistributions::new();
    for c in 0..cs.len() {
        for u in 0..us.len() {
            out.insert((cs.label(c).to_string(), us.label(u).to_string()), table.row(&[c, u])?.clone());
        }
    }
    Ok(out)
}

pub fn categorical_for(space: &SpaceRef, weights: Vec<f64>) -> DataResult<Categorical> {
    Ok(Categorical::from_weights(space.clone(), weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_scenarios_are_paired() {
        let s = fixture_scenarios();
        assert_eq!(s.len(), 8);
        let nonliteral = s.iter().filter(|x| x.intended_role == MeaningRole::Nonliteral).count();
        assert_eq!(nonliteral, 4);
        assert_eq!(s.iter().filter(|x| x.split == Split::Validation).count(), 4);
        for x in &s {
            assert!(!x.context_text.ends_with('"'));
            assert!(x.generation_prefix().ends_with(" \""));
        }
    }

    #[test]
    fn loader_reports_line_and_field() {
        let good = serde_json::to_string(&fixture_scenarios()[0]).unwrap();
        let mut bad = fixture_scenarios()[1].clone();
        bad.meanings[1].role = MeaningRole::Literal;
        let text = format!("{good}\n\n{}\n", serde_json::to_string(&bad).unwrap());
        match parse_scenarios(&text, "x.jsonl") {
            Err(DataError::Invalid { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "meanings");
            }
            other => panic!("unexpected {other:?}"),
        }
        let dup = format!("{good}\n{good}\n");
        assert!(matches!(parse_scenarios(&dup, "x"), Err(DataError::Invalid { line: 2, .. })));
        assert!(matches!(parse_scenarios("{not json", "x"), Err(DataError::Parse { line: 1, .. })));
    }

    #[test]
    fn intended_role_must_be_an_interpretation() {
        let mut s = fixture_scenarios()[0].clone();
        s.intended_role = MeaningRole::Overlap;
        assert_eq!(s.check().unwrap_err().0, "intended_role");
    }

    #[test]
    fn numbers_spaces_and_sentence() {
        let d = NumbersDataset::new();
        assert_eq!(d.contexts.len(), 3);
        assert_eq!(d.meanings.len(), 10);
        assert_eq!(d.sentence(1, 4), "The laptop costs 1000 dollars.");
        let prior = d.fixture_meaning_prior();
        assert_eq!(prior.rows().len(), 3);
    }

    #[test]
    fn weather_covers_450_quadruples() {
        let w = WeatherDataset::fixture();
        assert_eq!(w.quadruples().len(), 450);
        assert_eq!(w.utterances.label(0), "The weather is terrible.");
    }
}
