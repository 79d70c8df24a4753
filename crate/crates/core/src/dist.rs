//! Finite label spaces and normalized categorical distributions.
//!
//! Every listener, speaker and prior in the crate is a [`Categorical`] over a
//! shared [`LabelSpace`]. Construction always goes through a normalization
//! step, so a value of this type upholds `min >= 0` and `|sum - 1| <= 1e-12`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Tolerance on the total mass of every constructed distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Tolerance accepted on mixture weights before they are treated as unnormalized.
pub const MIX_WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("all weights are zero; the model left no probability mass")]
    AllZeroMass,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weight {index} is not finite ({value})")]
    NonFiniteWeight { index: usize, value: f64 },
    #[error("distributions are defined over different label spaces")]
    SpaceMismatch,
    #[error("mixture weights sum to {sum}, expected 1")]
    WeightsNotNormalized { sum: f64 },
    #[error("label space is empty")]
    EmptySpace,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("label `{label}` is not in the {kind} space")]
    UnknownLabel { kind: SpaceKind, label: String },
    #[error("index {index} is out of range for a space of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("conditional table has no row for `{0}`")]
    MissingRow(String),
    #[error("malformed conditional table: {0}")]
    MalformedTable(String),
    #[error("cannot mix an empty list of components")]
    EmptyMixture,
}

/// What a label space enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Context,
    Meaning,
    Utterance,
    Strategy,
    AffectArousal,
    AffectValence,
    Qud,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Context => "context",
            SpaceKind::Meaning => "meaning",
            SpaceKind::Utterance => "utterance",
            SpaceKind::Strategy => "strategy",
            SpaceKind::AffectArousal => "affect-arousal",
            SpaceKind::AffectValence => "affect-valence",
            SpaceKind::Qud => "qud",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "context" => SpaceKind::Context,
            "meaning" => SpaceKind::Meaning,
            "utterance" => SpaceKind::Utterance,
            "strategy" => SpaceKind::Strategy,
            "affect-arousal" | "arousal" => SpaceKind::AffectArousal,
            "affect-valence" | "valence" => SpaceKind::AffectValence,
            "qud" => SpaceKind::Qud,
            _ => return None,
        })
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An ordered, duplicate-free list of labels. The order defines the
/// index/label bijection used by every vector over the space.
#[derive(Debug, Clone)]
pub struct LabelSpace {
    kind: SpaceKind,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

/// Label spaces are shared between many distributions.
pub type SpaceRef = Arc<LabelSpace>;

impl LabelSpace {
    pub fn new<I, S>(kind: SpaceKind, labels: I) -> Result<SpaceRef, DistError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(DistError::EmptySpace);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(DistError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Arc::new(LabelSpace { kind, labels, index }))
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, DistError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| DistError::UnknownLabel { kind: self.kind, label: label.to_string() })
    }

    pub fn check_index(&self, index: usize) -> Result<(), DistError> {
        if index < self.len() {
            Ok(())
        } else {
            Err(DistError::IndexOutOfRange { index, size: self.len() })
        }
    }
}

impl PartialEq for LabelSpace {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.labels == other.labels
    }
}

impl Eq for LabelSpace {}

pub fn same_space(a: &SpaceRef, b: &SpaceRef) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// A normalized probability vector over a [`LabelSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    space: SpaceRef,
    probs: Vec<f64>,
}

impl Categorical {
    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(space: SpaceRef, weights: Vec<f64>) -> Result<Self, DistError> {
        if weights.len() != space.len() {
            return Err(DistError::LengthMismatch { expected: space.len(), got: weights.len() });
        }
        let mut total = 0.0;
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(DistError::NonFiniteWeight { index, value });
            }
            if value < 0.0 {
                return Err(DistError::NegativeWeight { index, value });
            }
            total += value;
        }
        if total <= 0.0 {
            return Err(DistError::AllZeroMass);
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Categorical { space, probs })
    }

    pub fn delta(space: SpaceRef, index: usize) -> Result<Self, DistError> {
        space.check_index(index)?;
        let mut probs = vec![0.0; space.len()];
        probs[index] = 1.0;
        Ok(Categorical { space, probs })
    }

    pub fn uniform(space: SpaceRef) -> Self {
        let n = space.len();
        Categorical { probs: vec![1.0 / n as f64; n], space }
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn prob_of(&self, label: &str) -> Result<f64, DistError> {
        Ok(self.probs[self.space.index_of(label)?])
    }

    /// Index of the most probable label; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn argmax_label(&self) -> &str {
        self.space.label(self.argmax())
    }

    /// Convex combination of distributions over a common space.
    ///
    /// Components are summed in a canonical order (by weight, then by
    /// probability vector) so the result does not depend on the order of
    /// the input list.
    pub fn mix(components: &[(f64, &Categorical)]) -> Result<Categorical, DistError> {
        let (_, first) = components.first().ok_or(DistError::EmptyMixture)?;
        let space = first.space.clone();
        let mut weight_sum = 0.0;
        for (index, (w, d)) in components.iter().enumerate() {
            if !same_space(&space, &d.space) {
                return Err(DistError::SpaceMismatch);
            }
            if !w.is_finite() {
                return Err(DistError::NonFiniteWeight { index, value: *w });
            }
            if *w < 0.0 {
                return Err(DistError::NegativeWeight { index, value: *w });
            }
            weight_sum += w;
        }
        if (weight_sum - 1.0).abs() > MIX_WEIGHT_TOLERANCE {
            return Err(DistError::WeightsNotNormalized { sum: weight_sum });
        }
        // a degenerate mixture is returned untouched
        if let Some((_, d)) = components.iter().find(|(w, _)| *w == 1.0) {
            if components.iter().all(|(w, _)| *w == 0.0 || *w == 1.0) && weight_sum == 1.0 {
                return Ok((*d).clone());
            }
        }

        let mut ordered: Vec<&(f64, &Categorical)> = components.iter().collect();
        ordered.sort_by(|a, b| {
            a.0.total_cmp(&b.0).then_with(|| {
                a.1.probs
                    .iter()
                    .zip(&b.1.probs)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });

        let mut acc = vec![0.0; space.len()];
        for (w, d) in ordered {
            for (a, p) in acc.iter_mut().zip(&d.probs) {
                *a += w * p;
            }
        }
        Categorical::from_weights(space, acc)
    }

    /// Label → probability pairs in space order.
    pub fn to_label_map(&self) -> Map<String, Value> {
        self.space
            .labels()
            .iter()
            .zip(&self.probs)
            .map(|(l, p)| (l.clone(), Value::from(*p)))
            .collect()
    }
}

/// `P(over | given...)` with exactly one row per conditioning tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    given: Vec<SpaceRef>,
    over: SpaceRef,
    rows: Vec<Categorical>,
}

impl ConditionalTable {
    pub fn new(given: Vec<SpaceRef>, over: SpaceRef, rows: Vec<Categorical>) -> Result<Self, DistError> {
        let expected: usize = given.iter().map(|s| s.len()).product();
        if rows.len() != expected {
            return Err(DistError::LengthMismatch { expected, got: rows.len() });
        }
        if rows.iter().any(|r| !same_space(r.space(), &over)) {
            return Err(DistError::SpaceMismatch);
        }
        Ok(ConditionalTable { given, over, rows })
    }

    pub fn from_fn<F>(given: Vec<SpaceRef>, over: SpaceRef, mut row: F) -> Result<Self, DistError>
    where
        F: FnMut(&[usize]) -> Result<Categorical, DistError>,
    {
        let tuples = product_indices(&given);
        let rows = tuples.iter().map(|t| row(t)).collect::<Result<Vec<_>, _>>()?;
        ConditionalTable::new(given, over, rows)
    }

    pub fn uniform(given: Vec<SpaceRef>, over: SpaceRef) -> Self {
        let n: usize = given.iter().map(|s| s.len()).product();
        let rows = vec![Categorical::uniform(over.clone()); n];
        ConditionalTable { given, over, rows }
    }

    pub fn given(&self) -> &[SpaceRef] {
        &self.given
    }

    pub fn over(&self) -> &SpaceRef {
        &self.over
    }

    pub fn rows(&self) -> &[Categorical] {
        &self.rows
    }

    fn flat_index(&self, tuple: &[usize]) -> Result<usize, DistError> {
        if tuple.len() != self.given.len() {
            return Err(DistError::LengthMismatch { expected: self.given.len(), got: tuple.len() });
        }
        let mut flat = 0;
        for (space, &i) in self.given.iter().zip(tuple) {
            space.check_index(i)?;
            flat = flat * space.len() + i;
        }
        Ok(flat)
    }

    pub fn row(&self, tuple: &[usize]) -> Result<&Categorical, DistError> {
        Ok(&self.rows[self.flat_index(tuple)?])
    }

    pub fn row_by_labels(&self, labels: &[&str]) -> Result<&Categorical, DistError> {
        if labels.len() != self.given.len() {
            return Err(DistError::LengthMismatch { expected: self.given.len(), got: labels.len() });
        }
        let tuple = self
            .given
            .iter()
            .zip(labels)
            .map(|(s, l)| s.index_of(l))
            .collect::<Result<Vec<_>, _>>()?;
        self.row(&tuple)
    }

    /// Parses the `{"given": [...], "over": "...", "rows": {...}}` format.
    ///
    /// Axis names must match the kinds of the supplied spaces. Row keys join
    /// conditioning labels with `|`; labels missing from a row get weight 0 and
    /// each row is renormalized.
    pub fn from_json(value: &Value, given: Vec<SpaceRef>, over: SpaceRef) -> Result<Self, DistError> {
        let obj = value.as_object().ok_or_else(|| DistError::MalformedTable("expected an object".into()))?;
        let given_names: Vec<&str> = obj
            .get("given")
            .and_then(Value::as_array)
            .ok_or_else(|| DistError::MalformedTable("`given` must be an array of axis names".into()))?
            .iter()
            .map(|v| v.as_str().ok_or_else(|| DistError::MalformedTable("axis names must be strings".into())))
            .collect::<Result<_, _>>()?;
        if given_names.len() != given.len() {
            return Err(DistError::MalformedTable(format!(
                "`given` lists {} axes, expected {}",
                given_names.len(),
                given.len()
            )));
        }
        for (name, space) in given_names.iter().zip(&given) {
            if SpaceKind::from_name(name) != Some(space.kind()) {
                return Err(DistError::MalformedTable(format!(
                    "axis `{name}` does not match expected `{}`",
                    space.kind()
                )));
            }
        }
        let over_name = obj
            .get("over")
            .and_then(Value::as_str)
            .ok_or_else(|| DistError::MalformedTable("`over` must be a string".into()))?;
        if SpaceKind::from_name(over_name) != Some(over.kind()) {
            return Err(DistError::MalformedTable(format!(
                "`over` is `{over_name}`, expected `{}`",
                over.kind()
            )));
        }
        let rows_obj = obj
            .get("rows")
            .and_then(Value::as_object)
            .ok_or_else(|| DistError::MalformedTable("`rows` must be an object".into()))?;

        let tuples = product_indices(&given);
        let mut rows = Vec::with_capacity(tuples.len());
        for tuple in &tuples {
            let key = tuple_key(&given, tuple);
            let row = rows_obj.get(&key).ok_or_else(|| DistError::MissingRow(key.clone()))?;
            let row = row
                .as_object()
                .ok_or_else(|| DistError::MalformedTable(format!("row `{key}` must be an object")))?;
            let mut weights = vec![0.0; over.len()];
            for (label, p) in row {
                let i = over.index_of(label)?;
                weights[i] = p
                    .as_f64()
                    .ok_or_else(|| DistError::MalformedTable(format!("row `{key}`, label `{label}`: not a number")))?;
            }
            rows.push(Categorical::from_weights(over.clone(), weights)?);
        }
        if rows_obj.len() != tuples.len() {
            let known: std::collections::HashSet<String> = tuples.iter().map(|t| tuple_key(&given, t)).collect();
            if let Some(extra) = rows_obj.keys().find(|k| !known.contains(*k)) {
                return Err(DistError::MalformedTable(format!("unknown row key `{extra}`")));
            }
        }
        ConditionalTable::new(given, over, rows)
    }

    pub fn to_json(&self) -> Value {
        let tuples = product_indices(&self.given);
        let rows: Map<String, Value> = tuples
            .iter()
            .zip(&self.rows)
            .map(|(t, r)| (tuple_key(&self.given, t), Value::Object(r.to_label_map())))
            .collect();
        serde_json::json!({
            "given": self.given.iter().map(|s| s.kind().name()).collect::<Vec<_>>(),
            "over": self.over.kind().name(),
            "rows": rows,
        })
    }
}

/// All index tuples of the product of `spaces`, row-major.
pub fn product_indices(spaces: &[SpaceRef]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for space in spaces {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..space.len()).map(move |i| {
                    let mut t = prefix.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

fn tuple_key(spaces: &[SpaceRef], tuple: &[usize]) -> String {
    spaces
        .iter()
        .zip(tuple)
        .map(|(s, &i)| s.label(i))
        .collect::<Vec<_>>()
        .join("|")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abc() -> SpaceRef {
        LabelSpace::new(SpaceKind::Meaning, ["a", "b", "c"]).unwrap()
    }

    fn assert_valid(d: &Categorical) {
        let sum: f64 = d.probs().iter().sum();
        assert!((sum - 1.0).abs() <= NORMALIZATION_TOLERANCE, "sum = {sum}");
        assert!(d.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn from_weights_normalizes() {
        let d = Categorical::from_weights(abc(), vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.25, 0.5]);
        let d = Categorical::from_weights(abc(), vec![0.0, 0.0, 5.0]).unwrap();
        assert_eq!(d.probs(), &[0.0, 0.0, 1.0]);
        assert_valid(&d);
    }

    #[test]
    fn from_weights_errors() {
        assert_eq!(Categorical::from_weights(abc(), vec![0.0; 3]), Err(DistError::AllZeroMass));
        assert!(matches!(
            Categorical::from_weights(abc(), vec![1.0]),
            Err(DistError::LengthMismatch { expected: 3, got: 1 })
        ));
        assert!(matches!(
            Categorical::from_weights(abc(), vec![1.0, -1.0, 1.0]),
            Err(DistError::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(
            Categorical::from_weights(abc(), vec![1.0, f64::NAN, 1.0]),
            Err(DistError::NonFiniteWeight { index: 1, .. })
        ));
    }

    #[test]
    fn label_space_rejects_duplicates_and_empty() {
        assert_eq!(
            LabelSpace::new(SpaceKind::Meaning, ["a", "a"]).unwrap_err(),
            DistError::DuplicateLabel("a".into())
        );
        assert_eq!(LabelSpace::new(SpaceKind::Meaning, Vec::<String>::new()).unwrap_err(), DistError::EmptySpace);
    }

    #[test]
    fn mix_examples() {
        let ab = LabelSpace::new(SpaceKind::Meaning, ["a", "b"]).unwrap();
        let da = Categorical::delta(ab.clone(), 0).unwrap();
        let db = Categorical::delta(ab.clone(), 1).unwrap();
        assert_eq!(Categorical::mix(&[(0.5, &da), (0.5, &db)]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(Categorical::mix(&[(1.0, &da), (0.0, &db)]).unwrap(), da);

        let x = Categorical::from_weights(ab.clone(), vec![0.2, 0.8]).unwrap();
        let m = Categorical::mix(&[(0.25, &da), (0.75, &x)]).unwrap();
        assert!((m.prob(0) - 0.4).abs() < 1e-15);
        assert!((m.prob(1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn mix_errors() {
        let ab = LabelSpace::new(SpaceKind::Meaning, ["a", "b"]).unwrap();
        let other = LabelSpace::new(SpaceKind::Meaning, ["a", "c"]).unwrap();
        let d1 = Categorical::uniform(ab);
        let d2 = Categorical::uniform(other);
        assert_eq!(Categorical::mix(&[(0.5, &d1), (0.5, &d2)]), Err(DistError::SpaceMismatch));
        assert!(matches!(
            Categorical::mix(&[(0.5, &d1), (0.4, &d1)]),
            Err(DistError::WeightsNotNormalized { .. })
        ));
        assert_eq!(Categorical::mix(&[]), Err(DistError::EmptyMixture));
    }

    #[test]
    fn argmax_and_ties() {
        let d = Categorical::from_weights(abc(), vec![0.2, 0.7, 0.1]).unwrap();
        assert_eq!(d.argmax_label(), "b");
        let ab = LabelSpace::new(SpaceKind::Meaning, ["a", "b"]).unwrap();
        assert_eq!(Categorical::uniform(ab).argmax_label(), "a");
        assert_eq!(Categorical::delta(abc(), 2).unwrap().argmax_label(), "c");
    }

    #[test]
    fn conditional_table_json_roundtrip() {
        let ctx = LabelSpace::new(SpaceKind::Context, ["x", "y"]).unwrap();
        let json = serde_json::json!({
            "given": ["context"],
            "over": "meaning",
            "rows": {"x": {"a": 1.0, "b": 3.0}, "y": {"c": 2.0}}
        });
        let t = ConditionalTable::from_json(&json, vec![ctx.clone()], abc()).unwrap();
        assert_eq!(t.row_by_labels(&["x"]).unwrap().probs(), &[0.25, 0.75, 0.0]);
        assert_eq!(t.row_by_labels(&["y"]).unwrap().probs(), &[0.0, 0.0, 1.0]);
        let back = ConditionalTable::from_json(&t.to_json(), vec![ctx], abc()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn conditional_table_multi_axis_keys() {
        let ctx = LabelSpace::new(SpaceKind::Context, ["x", "y"]).unwrap();
        let utt = LabelSpace::new(SpaceKind::Utterance, ["u1", "u2"]).unwrap();
        let t = ConditionalTable::uniform(vec![ctx.clone(), utt.clone()], abc());
        let json = t.to_json();
        assert!(json["rows"].get("y|u2").is_some());
        let back = ConditionalTable::from_json(&json, vec![ctx, utt], abc()).unwrap();
        assert_eq!(back.row(&[1, 1]).unwrap().probs().len(), 3);
    }

    #[test]
    fn conditional_table_rejects_bad_files() {
        let ctx = LabelSpace::new(SpaceKind::Context, ["x", "y"]).unwrap();
        let missing = serde_json::json!({"given": ["context"], "over": "meaning", "rows": {"x": {"a": 1.0}}});
        assert_eq!(
            ConditionalTable::from_json(&missing, vec![ctx.clone()], abc()).unwrap_err(),
            DistError::MissingRow("y".into())
        );
        let unknown = serde_json::json!({"given": ["context"], "over": "meaning",
            "rows": {"x": {"zz": 1.0}, "y": {"a": 1.0}}});
        assert!(matches!(
            ConditionalTable::from_json(&unknown, vec![ctx.clone()], abc()),
            Err(DistError::UnknownLabel { .. })
        ));
        let wrong_axis = serde_json::json!({"given": ["utterance"], "over": "meaning", "rows": {}});
        assert!(matches!(
            ConditionalTable::from_json(&wrong_axis, vec![ctx.clone()], abc()),
            Err(DistError::MalformedTable(_))
        ));
        let extra = serde_json::json!({"given": ["context"], "over": "meaning",
            "rows": {"x": {"a": 1.0}, "y": {"a": 1.0}, "z": {"a": 1.0}}});
        assert!(matches!(
            ConditionalTable::from_json(&extra, vec![ctx], abc()),
            Err(DistError::MalformedTable(_))
        ));
    }

    fn weights_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..10.0, 1..12).prop_filter("some mass", |w| w.iter().any(|&x| x > 1e-3))
    }

    proptest! {
        #[test]
        fn constructed_distributions_are_normalized(w in weights_strategy()) {
            let space = LabelSpace::new(SpaceKind::Meaning, (0..w.len()).map(|i| format!("m{i}"))).unwrap();
            let d = Categorical::from_weights(space, w).unwrap();
            assert_valid(&d);
        }

        #[test]
        fn from_weights_is_scale_invariant(w in weights_strategy(), k in 1e-3f64..1e3) {
            let space = LabelSpace::new(SpaceKind::Meaning, (0..w.len()).map(|i| format!("m{i}"))).unwrap();
            let a = Categorical::from_weights(space.clone(), w.clone()).unwrap();
            let b = Categorical::from_weights(space, w.iter().map(|x| x * k).collect()).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn mix_is_order_independent(
            raw in prop::collection::vec((0.01f64..1.0, prop::collection::vec(0.01f64..1.0, 4)), 1..6),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let space = LabelSpace::new(SpaceKind::Meaning, ["a", "b", "c", "d"]).unwrap();
            let total: f64 = raw.iter().map(|(w, _)| w).sum();
            let dists: Vec<(f64, Categorical)> = raw
                .iter()
                .map(|(w, p)| (w / total, Categorical::from_weights(space.clone(), p.clone()).unwrap()))
                .collect();
            let comps: Vec<(f64, &Categorical)> = dists.iter().map(|(w, d)| (*w, d)).collect();
            let mut shuffled = comps.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = Categorical::mix(&comps).unwrap();
            let b = Categorical::mix(&shuffled).unwrap();
            prop_assert_eq!(a.probs(), b.probs());
            assert_valid(&a);
        }
    }
}
