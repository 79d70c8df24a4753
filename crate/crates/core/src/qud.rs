//! Projection-based (QUD) RSA, the affect-aware weather listener built on it,
//! and the two constructions relating QUD-RSA to strategy-aware RSA.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use crate::dist::{same_space, Categorical, ConditionalTable, DistError, LabelSpace, SpaceKind, SpaceRef};
use crate::error::{ModelError, ModelResult};
use crate::rsa::{literal_listener, LiteralTable, PriorSet, RsaConfig, SemanticLexicon};
use crate::rsa2::{RhetoricalFunction, StrategySet};

/// A total map from meanings to the labels of some subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    name: String,
    meanings: SpaceRef,
    fibers: Vec<String>,
    // fiber index of every meaning
    map: Vec<usize>,
}

impl Projection {
    /// `targets[m]` is the subspace label meaning `m` projects to.
    pub fn new(name: impl Into<String>, meanings: SpaceRef, targets: Vec<String>) -> ModelResult<Self> {
        if targets.len() != meanings.len() {
            return Err(DistError::LengthMismatch { expected: meanings.len(), got: targets.len() }.into());
        }
        let mut fibers: Vec<String> = Vec::new();
        let map = targets
            .into_iter()
            .map(|t| match fibers.iter().position(|f| *f == t) {
                Some(i) => i,
                None => {
                    fibers.push(t);
                    fibers.len() - 1
                }
            })
            .collect();
        Ok(Projection { name: name.into(), meanings, fibers, map })
    }

    pub fn from_fn<F>(name: impl Into<String>, meanings: SpaceRef, f: F) -> ModelResult<Self>
    where
        F: Fn(&str) -> String,
    {
        let targets = meanings.labels().iter().map(|l| f(l)).collect();
        Projection::new(name, meanings, targets)
    }

    /// Label-keyed map; every meaning must be present.
    pub fn from_map(name: impl Into<String>, meanings: SpaceRef, map: &BTreeMap<String, String>) -> ModelResult<Self> {
        for key in map.keys() {
            meanings.index_of(key)?;
        }
        let targets = meanings
            .labels()
            .iter()
            .map(|m| {
                map.get(m).cloned().ok_or_else(|| ModelError::InvalidModel(format!("projection is not defined on `{m}`")))
            })
            .collect::<ModelResult<Vec<_>>>()?;
        Projection::new(name, meanings, targets)
    }

    pub fn identity(meanings: SpaceRef) -> Self {
        let targets = meanings.labels().to_vec();
        Projection::new("identity", meanings, targets).expect("one target per meaning")
    }

    pub fn constant(meanings: SpaceRef) -> Self {
        let targets = vec![String::from("*"); meanings.len()];
        Projection::new("constant", meanings, targets).expect("one target per meaning")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn meanings(&self) -> &SpaceRef {
        &self.meanings
    }

    pub fn fiber_of(&self, m: usize) -> usize {
        self.map[m]
    }

    pub fn target(&self, m: usize) -> &str {
        &self.fibers[self.map[m]]
    }

    pub fn fiber_count(&self) -> usize {
        self.fibers.len()
    }

    /// Unnormalized `Σ_{m'} 1[q(m') = q(m)] · w(m')` for every `m`.
    pub fn pool(&self, weights: &[f64]) -> Vec<f64> {
        let mut totals = vec![0.0; self.fibers.len()];
        for (m, w) in weights.iter().enumerate() {
            totals[self.map[m]] += w;
        }
        self.map.iter().map(|&f| totals[f]).collect()
    }

    fn is_identity(&self) -> bool {
        self.fibers.len() == self.map.len()
    }
}

/// `L0(·|c,u,q) ∝ Σ_{m'} 1[q(m')=q(m)] · L0(m'|c,u)`.
pub fn qud_literal_listener(
    lexicon: &SemanticLexicon,
    priors: &PriorSet,
    c: usize,
    u: usize,
    q: &Projection,
) -> ModelResult<Categorical> {
    if !same_space(q.meanings(), lexicon.meanings()) {
        return Err(DistError::SpaceMismatch.into());
    }
    let l0 = literal_listener(lexicon, priors, c, u)?;
    if q.is_identity() {
        // singleton fibers: pooling is the identity, keep the standard path
        return Ok(l0);
    }
    Ok(Categorical::from_weights(l0.space().clone(), q.pool(l0.probs()))?)
}

pub fn qud_literal_table(
    lexicon: &SemanticLexicon,
    priors: &PriorSet,
    c: usize,
    q: &Projection,
) -> ModelResult<LiteralTable> {
    LiteralTable::build(lexicon.meanings().clone(), lexicon.utterances().clone(), |u| {
        qud_literal_listener(lexicon, priors, c, u, q)
    })
}

/// QUD-RSA: a lexicon, priors and a set of projections.
#[derive(Debug, Clone)]
pub struct QudRsa {
    pub lexicon: SemanticLexicon,
    pub priors: PriorSet,
    pub config: RsaConfig,
    pub projections: Vec<Projection>,
}

impl QudRsa {
    pub fn new(
        lexicon: SemanticLexicon,
        priors: PriorSet,
        config: RsaConfig,
        projections: Vec<Projection>,
    ) -> ModelResult<Self> {
        if !same_space(lexicon.meanings(), priors.meanings()) || !same_space(lexicon.utterances(), priors.utterances())
        {
            return Err(DistError::SpaceMismatch.into());
        }
        if projections.iter().any(|q| !same_space(q.meanings(), lexicon.meanings())) {
            return Err(DistError::SpaceMismatch.into());
        }
        Ok(QudRsa { lexicon, priors, config, projections })
    }

    pub fn l0(&self, c: usize, u: usize, q: usize) -> ModelResult<Categorical> {
        qud_literal_listener(&self.lexicon, &self.priors, c, u, &self.projections[q])
    }

    pub fn table(&self, c: usize, q: usize) -> ModelResult<LiteralTable> {
        qud_literal_table(&self.lexicon, &self.priors, c, &self.projections[q])
    }

    /// `S1(·|c,m,q) ∝ L0(m|c,u,q)^α · P(u|c)`.
    pub fn s1(&self, c: usize, m: usize, q: usize) -> ModelResult<Categorical> {
        self.table(c, q)?.speaker(self.config.alpha, self.priors.utterance_prior(c)?, m)
    }

    /// `L1(·|c,u,q) ∝ S1(u|c,m,q) · P(m|c)`.
    pub fn l1(&self, c: usize, u: usize, q: usize) -> ModelResult<Categorical> {
        self.table(c, q)?.listener(
            self.config.alpha,
            self.priors.utterance_prior(c)?,
            self.priors.meaning_prior(c)?,
            u,
        )
    }
}

/// Rebuilds every projection as a rhetorical function whose literal listener
/// matches the QUD literal listener:
/// `f(c,m,u) = Σ_{m'} 1[q(m')=q(m)] L0(m'|c,u) / (k · P(m|c))`.
///
/// Utterances with an undefined literal listener get `f = 0` everywhere, so
/// both sides stay undefined together.
pub fn qud_to_rsa2(model: &QudRsa) -> ModelResult<StrategySet> {
    let priors = &model.priors;
    let (contexts, meanings, utterances) = (priors.contexts(), priors.meanings(), priors.utterances());
    for c in 0..contexts.len() {
        let prior = priors.meaning_prior(c)?;
        if let Some(m) = (0..meanings.len()).find(|&m| prior.prob(m) <= 0.0) {
            return Err(ModelError::ZeroPriorViolation {
                context: contexts.label(c).to_string(),
                meaning: meanings.label(m).to_string(),
            });
        }
    }
    let dims = (contexts.len(), meanings.len(), utterances.len());
    let functions = model
        .projections
        .iter()
        .map(|q| {
            let mut values = vec![0.0; dims.0 * dims.1 * dims.2];
            for c in 0..dims.0 {
                let prior = priors.meaning_prior(c)?;
                for u in 0..dims.2 {
                    let l0 = match literal_listener(&model.lexicon, priors, c, u) {
                        Ok(l0) => l0,
                        Err(e) if e.is_all_zero_mass() => continue,
                        Err(e) => return Err(e),
                    };
                    let ratios: Vec<f64> =
                        q.pool(l0.probs()).iter().enumerate().map(|(m, p)| p / prior.prob(m)).collect();
                    let k = ratios.iter().copied().fold(0.0, f64::max);
                    for (m, r) in ratios.iter().enumerate() {
                        values[(c * dims.1 + m) * dims.2 + u] = (r / k).min(1.0);
                    }
                }
            }
            RhetoricalFunction::dense(q.name().to_string(), dims, values)
        })
        .collect::<ModelResult<Vec<_>>>()?;
    StrategySet::new(functions)
}

/// Every distribution of the form `b ⊙ P / Σ(b ⊙ P)` for a non-zero binary mask `b`.
///
/// These are all the literal listeners a lexicon can induce from prior `P`.
pub fn binary_combinations(prior: &Categorical) -> Vec<Vec<f64>> {
    let n = prior.len();
    assert!(n < 31, "binary-combination enumeration is exponential in the meaning count");
    let mut out = Vec::with_capacity((1usize << n) - 1);
    for mask in 1usize..(1 << n) {
        let weights: Vec<f64> =
            (0..n).map(|m| if mask & (1 << m) != 0 { prior.prob(m) } else { 0.0 }).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            out.push(weights.into_iter().map(|w| w / total).collect());
        }
    }
    out
}

/// True when `value` occurs (within `tol`) as an entry of any vector.
pub fn occurs_in(vectors: &[Vec<f64>], value: f64, tol: f64) -> bool {
    vectors.iter().flatten().any(|&x| (x - value).abs() <= tol)
}

/// True when `candidate` equals (within `tol`) one of the vectors.
pub fn contains_vector(vectors: &[Vec<f64>], candidate: &[f64], tol: f64) -> bool {
    vectors.iter().any(|v| v.len() == candidate.len() && v.iter().zip(candidate).all(|(a, b)| (a - b).abs() <= tol))
}

/// A strategy-aware literal listener that no lexicon can produce.
#[derive(Debug, Clone)]
pub struct UnreachableWitness {
    pub function: RhetoricalFunction,
    /// Probability the witness listener assigns to the first meaning.
    pub k: f64,
    /// Smallest non-zero entry over all binary combinations.
    pub p_min: f64,
    pub combinations: Vec<Vec<f64>>,
}

/// Builds the two-point rhetorical function putting mass `k = p_min / 2` on
/// the first meaning and `1 − k` on the second, for context `c`.
pub fn unreachable_witness(priors: &PriorSet, c: usize) -> ModelResult<UnreachableWitness> {
    let prior = priors.meaning_prior(c)?;
    let n = prior.len();
    if n < 2 {
        return Err(ModelError::InvalidModel("the construction needs at least two meanings".into()));
    }
    if let Some(m) = (0..n).find(|&m| prior.prob(m) <= 0.0) {
        return Err(ModelError::ZeroPriorViolation {
            context: priors.contexts().label(c).to_string(),
            meaning: priors.meanings().label(m).to_string(),
        });
    }
    let combinations = binary_combinations(prior);
    let p_min = combinations.iter().flatten().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    let k = p_min / 2.0;
    let mut f = vec![0.0; n];
    f[0] = k / prior.prob(0);
    f[1] = (1.0 - k) / prior.prob(1);
    let max = f.iter().copied().fold(0.0, f64::max);
    let f: Vec<f64> = f.into_iter().map(|v| v / max).collect();
    let function = RhetoricalFunction::from_fn("witness", move |_, m, _| f[m]);
    Ok(UnreachableWitness { function, k, p_min, combinations })
}

/// Default arousal labels when a priors file does not declare them.
pub const DEFAULT_AROUSAL: [&str; 2] = ["low", "high"];
/// Default valence labels when a priors file does not declare them.
pub const DEFAULT_VALENCE: [&str; 2] = ["neg", "pos"];
/// QUD prior of the affect-aware weather listener.
pub const DEFAULT_QUD_PRIOR: [(&str, f64); 3] = [("literal", 0.3), ("arousal", 0.4), ("valence", 0.3)];

/// Human (or synthetic) priors for the weather setting.
#[derive(Debug, Clone)]
pub struct WeatherPriors {
    pub contexts: SpaceRef,
    pub states: SpaceRef,
    pub arousal: SpaceRef,
    pub valence: SpaceRef,
    pub state_prior: ConditionalTable,
    pub arousal_prior: ConditionalTable,
    pub valence_prior: ConditionalTable,
    pub qud_prior: Categorical,
}

#[derive(Deserialize)]
struct WeatherPriorsFile {
    contexts: Vec<String>,
    states: Vec<String>,
    #[serde(default)]
    arousal: Option<Vec<String>>,
    #[serde(default)]
    valence: Option<Vec<String>>,
    state_prior: Value,
    arousal_prior: Value,
    valence_prior: Value,
    #[serde(default)]
    qud_prior: Option<BTreeMap<String, f64>>,
}

impl WeatherPriors {
    pub fn from_json(value: &Value) -> ModelResult<Self> {
        let file: WeatherPriorsFile = serde_json::from_value(value.clone())
            .map_err(|e| ModelError::InvalidModel(format!("weather priors: {e}")))?;
        let contexts = LabelSpace::new(SpaceKind::Context, file.contexts)?;
        let states = LabelSpace::new(SpaceKind::Meaning, file.states)?;
        let arousal = LabelSpace::new(
            SpaceKind::AffectArousal,
            file.arousal.unwrap_or_else(|| DEFAULT_AROUSAL.iter().map(|s| s.to_string()).collect()),
        )?;
        let valence = LabelSpace::new(
            SpaceKind::AffectValence,
            file.valence.unwrap_or_else(|| DEFAULT_VALENCE.iter().map(|s| s.to_string()).collect()),
        )?;
        let state_prior = ConditionalTable::from_json(&file.state_prior, vec![contexts.clone()], states.clone())?;
        let arousal_prior = ConditionalTable::from_json(&file.arousal_prior, vec![contexts.clone()], arousal.clone())?;
        let valence_prior = ConditionalTable::from_json(&file.valence_prior, vec![contexts.clone()], valence.clone())?;
        let qud_prior = match file.qud_prior {
            Some(map) => {
                let qs = LabelSpace::new(SpaceKind::Qud, map.keys().cloned())?;
                Categorical::from_weights(qs, map.values().copied().collect())?
            }
            None => default_qud_prior(),
        };
        WeatherPriors::new(contexts, states, arousal, valence, state_prior, arousal_prior, valence_prior, qud_prior)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        contexts: SpaceRef,
        states: SpaceRef,
        arousal: SpaceRef,
        valence: SpaceRef,
        state_prior: ConditionalTable,
        arousal_prior: ConditionalTable,
        valence_prior: ConditionalTable,
        qud_prior: Categorical,
    ) -> ModelResult<Self> {
        for (table, over) in [(&state_prior, &states), (&arousal_prior, &arousal), (&valence_prior, &valence)] {
            if table.given().len() != 1 || !same_space(&table.given()[0], &contexts) || !same_space(table.over(), over) {
                return Err(DistError::SpaceMismatch.into());
            }
        }
        for q in qud_prior.space().labels() {
            if !["literal", "arousal", "valence"].contains(&q.as_str()) {
                return Err(ModelError::InvalidModel(format!("unknown QUD `{q}`")));
            }
        }
        Ok(WeatherPriors { contexts, states, arousal, valence, state_prior, arousal_prior, valence_prior, qud_prior })
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "contexts": self.contexts.labels(),
            "states": self.states.labels(),
            "arousal": self.arousal.labels(),
            "valence": self.valence.labels(),
            "state_prior": self.state_prior.to_json(),
            "arousal_prior": self.arousal_prior.to_json(),
            "valence_prior": self.valence_prior.to_json(),
            "qud_prior": self.qud_prior.to_label_map(),
        })
    }

    pub fn with_qud_prior(&self, qud_prior: Categorical) -> ModelResult<Self> {
        let mut out = self.clone();
        out.qud_prior = qud_prior;
        WeatherPriors::new(
            out.contexts,
            out.states,
            out.arousal,
            out.valence,
            out.state_prior,
            out.arousal_prior,
            out.valence_prior,
            out.qud_prior,
        )
    }
}

pub fn default_qud_prior() -> Categorical {
    let qs = LabelSpace::new(SpaceKind::Qud, DEFAULT_QUD_PRIOR.iter().map(|(q, _)| *q)).expect("distinct labels");
    Categorical::from_weights(qs, DEFAULT_QUD_PRIOR.iter().map(|(_, p)| *p).collect()).expect("positive weights")
}

/// The utterance for a weather state.
pub fn weather_utterance(state: &str) -> String {
    format!("The weather is {state}.")
}

/// Affect-aware weather listener over joint `(state, arousal, valence)` meanings.
#[derive(Debug, Clone)]
pub struct AffectWeatherModel {
    pub priors: WeatherPriors,
    pub config: RsaConfig,
    joint: QudRsa,
    // (s, a, v) of every joint meaning
    cells: Vec<(usize, usize, usize)>,
}

impl AffectWeatherModel {
    pub fn new(priors: WeatherPriors, config: RsaConfig) -> ModelResult<Self> {
        let (ns, na, nv) = (priors.states.len(), priors.arousal.len(), priors.valence.len());
        let mut cells = Vec::with_capacity(ns * na * nv);
        for s in 0..ns {
            for a in 0..na {
                for v in 0..nv {
                    cells.push((s, a, v));
                }
            }
        }
        let joint_labels = cells.iter().map(|&(s, a, v)| {
            format!("{}|{}|{}", priors.states.label(s), priors.arousal.label(a), priors.valence.label(v))
        });
        let meanings = LabelSpace::new(SpaceKind::Meaning, joint_labels)?;
        let utterances =
            LabelSpace::new(SpaceKind::Utterance, priors.states.labels().iter().map(|s| weather_utterance(s)))?;
        let denotation = (0..ns).map(|u| cells.iter().map(|&(s, _, _)| s == u).collect()).collect();
        let lexicon = SemanticLexicon::new(meanings.clone(), utterances.clone(), denotation)?;
        let joint_prior = ConditionalTable::from_fn(vec![priors.contexts.clone()], meanings.clone(), |t| {
            let c = t[0];
            let (ps, pa, pv) = (
                priors.state_prior.row(&[c])?,
                priors.arousal_prior.row(&[c])?,
                priors.valence_prior.row(&[c])?,
            );
            Categorical::from_weights(
                meanings.clone(),
                cells.iter().map(|&(s, a, v)| ps.prob(s) * pa.prob(a) * pv.prob(v)).collect(),
            )
        })?;
        let prior_set =
            PriorSet::new(joint_prior, ConditionalTable::uniform(vec![priors.contexts.clone()], utterances), None)?;
        let projections = priors
            .qud_prior
            .space()
            .labels()
            .iter()
            .map(|q| {
                let targets = cells
                    .iter()
                    .map(|&(s, a, v)| match q.as_str() {
                        "literal" => priors.states.label(s).to_string(),
                        "arousal" => priors.arousal.label(a).to_string(),
                        _ => priors.valence.label(v).to_string(),
                    })
                    .collect();
                Projection::new(q.clone(), meanings.clone(), targets)
            })
            .collect::<ModelResult<Vec<_>>>()?;
        let joint = QudRsa::new(lexicon, prior_set, config, projections)?;
        Ok(AffectWeatherModel { priors, config, joint, cells })
    }

    pub fn utterances(&self) -> &SpaceRef {
        self.joint.lexicon.utterances()
    }

    pub fn joint_meanings(&self) -> &SpaceRef {
        self.joint.lexicon.meanings()
    }

    pub fn qud(&self) -> &QudRsa {
        &self.joint
    }

    /// `Σ_q P(q) · L0(s,a,v|c,u,q)`.
    pub fn l0_joint(&self, c: usize, u: usize) -> ModelResult<Categorical> {
        let per_q = (0..self.joint.projections.len()).map(|q| self.joint.l0(c, u, q)).collect::<ModelResult<Vec<_>>>()?;
        let components: Vec<(f64, &Categorical)> =
            self.priors.qud_prior.probs().iter().copied().zip(per_q.iter()).collect();
        Ok(Categorical::mix(&components)?)
    }

    /// `Σ_q P(q) · P(s,a,v|c) · S1(u|c,s,a,v,q)`, normalized once at the end.
    pub fn l1_joint(&self, c: usize, u: usize) -> ModelResult<Categorical> {
        self.utterances().check_index(u)?;
        let prior = self.joint.priors.meaning_prior(c)?;
        let uprior = self.joint.priors.utterance_prior(c)?;
        let mut weights = vec![0.0; self.cells.len()];
        for (q, &pq) in self.priors.qud_prior.probs().iter().enumerate() {
            let table = self.joint.table(c, q)?;
            for (m, w) in weights.iter_mut().enumerate() {
                let likelihood = match table.speaker(self.config.alpha, uprior, m) {
                    Ok(s1) => s1.prob(u),
                    Err(e) if e.is_all_zero_mass() => 0.0,
                    Err(e) => return Err(e),
                };
                *w += pq * prior.prob(m) * likelihood;
            }
        }
        Ok(Categorical::from_weights(self.joint_meanings().clone(), weights)?)
    }

    /// Sums the affect dimensions out of a joint distribution.
    pub fn state_marginal(&self, joint: &Categorical) -> ModelResult<Categorical> {
        if !same_space(joint.space(), self.joint_meanings()) {
            return Err(DistError::SpaceMismatch.into());
        }
        let mut weights = vec![0.0; self.priors.states.len()];
        for (m, &(s, _, _)) in self.cells.iter().enumerate() {
            weights[s] += joint.prob(m);
        }
        Ok(Categorical::from_weights(self.priors.states.clone(), weights)?)
    }

    pub fn l0_state(&self, c: usize, u: usize) -> ModelResult<Categorical> {
        self.state_marginal(&self.l0_joint(c, u)?)
    }

    pub fn l1_state(&self, c: usize, u: usize) -> ModelResult<Categorical> {
        self.state_marginal(&self.l1_joint(c, u)?)
    }
}
