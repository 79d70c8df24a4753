//! Metrics over listener outputs: MAD against reference tables, role-based
//! meaning scores, strategy-posterior summaries and prior ablations.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::{DataError, DataResult, MeaningRole, Scenario, Split};
use crate::dist::{same_space, Categorical, ConditionalTable, LabelSpace, SpaceKind};
use crate::rsa::PriorSet;

/// Listener outputs keyed by (context label, utterance label).
pub type KeyedDistributions = BTreeMap<(String, String), Categorical>;

/// Mean absolute difference over every (context, utterance, meaning) cell.
pub fn mad(pred: &KeyedDistributions, human: &KeyedDistributions) -> DataResult<f64> {
    if pred.len() != human.len() || pred.keys().zip(human.keys()).any(|(a, b)| a != b) {
        let only_pred: Vec<_> = pred.keys().filter(|k| !human.contains_key(*k)).take(3).collect();
        let only_human: Vec<_> = human.keys().filter(|k| !pred.contains_key(*k)).take(3).collect();
        return Err(DataError::KeyMismatch(format!(
            "{} vs {} pairs; only in prediction {only_pred:?}, only in reference {only_human:?}",
            pred.len(),
            human.len()
        )));
    }
    if pred.is_empty() {
        return Err(DataError::KeyMismatch("no (context, utterance) pairs".into()));
    }
    let mut total = 0.0;
    let mut cells = 0usize;
    for (key, p) in pred {
        let h = &human[key];
        if p.space().labels() != h.space().labels() {
            return Err(DataError::KeyMismatch(format!("meaning labels differ for {key:?}")));
        }
        for (a, b) in p.probs().iter().zip(h.probs()) {
            total += (a - b).abs();
        }
        cells += p.len();
    }
    Ok(total / cells as f64)
}

/// Average mass per meaning role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeaningScores {
    pub n: usize,
    pub correct: f64,
    pub incorrect: f64,
    pub distractor: f64,
    pub literal: f64,
    pub nonliteral: f64,
    pub overlap: f64,
    pub nonsequitur: f64,
}

impl MeaningScores {
    fn add(&mut self, scenario: &Scenario, dist: &Categorical) {
        let role_mass = |r: MeaningRole| dist.prob(scenario.role_index(r));
        let intended = scenario.intended_role;
        let opposite = intended.opposite().expect("checked scenarios have an interpretive intended role");
        self.n += 1;
        self.correct += role_mass(intended);
        self.incorrect += role_mass(opposite);
        self.distractor += role_mass(MeaningRole::Overlap) + role_mass(MeaningRole::Nonsequitur);
        self.literal += role_mass(MeaningRole::Literal);
        self.nonliteral += role_mass(MeaningRole::Nonliteral);
        self.overlap += role_mass(MeaningRole::Overlap);
        self.nonsequitur += role_mass(MeaningRole::Nonsequitur);
    }

    fn finish(mut self) -> Self {
        if self.n > 0 {
            let n = self.n as f64;
            for v in [
                &mut self.correct,
                &mut self.incorrect,
                &mut self.distractor,
                &mut self.literal,
                &mut self.nonliteral,
                &mut self.overlap,
                &mut self.nonsequitur,
            ] {
                *v /= n;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeaningScoreTable {
    pub overall: MeaningScores,
    pub by_split: BTreeMap<Split, MeaningScores>,
    pub by_intended: BTreeMap<MeaningRole, MeaningScores>,
}

/// Scores listener outputs, one distribution over the scenario's role-labeled
/// meaning space per scenario.
pub fn meaning_scores(outputs: &[(&Scenario, &Categorical)]) -> DataResult<MeaningScoreTable> {
    let mut overall = MeaningScores::default();
    let mut by_split: BTreeMap<Split, MeaningScores> = BTreeMap::new();
    let mut by_intended: BTreeMap<MeaningRole, MeaningScores> = BTreeMap::new();
    for (scenario, dist) in outputs {
        if dist.space().labels() != scenario.meaning_space().labels() {
            return Err(DataError::KeyMismatch(format!("scenario {} has a different meaning space", scenario.id)));
        }
        overall.add(scenario, dist);
        by_split.entry(scenario.split).or_default().add(scenario, dist);
        by_intended.entry(scenario.intended_role).or_default().add(scenario, dist);
    }
    Ok(MeaningScoreTable {
        overall: overall.finish(),
        by_split: by_split.into_iter().map(|(k, v)| (k, v.finish())).collect(),
        by_intended: by_intended.into_iter().map(|(k, v)| (k, v.finish())).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationTarget {
    MeaningPrior,
    UtterancePrior,
}

/// Replaces one prior table with the uniform table over the same spaces.
pub fn ablate(priors: &PriorSet, which: AblationTarget) -> PriorSet {
    let out = match which {
        AblationTarget::MeaningPrior => {
            let t = priors.meaning_prior_table();
            priors.with_meaning_prior(ConditionalTable::uniform(t.given().to_vec(), t.over().clone()))
        }
        AblationTarget::UtterancePrior => {
            let t = priors.utterance_prior_table();
            priors.with_utterance_prior(ConditionalTable::uniform(t.given().to_vec(), t.over().clone()))
        }
    };
    out.expect("uniform table has the original spaces")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPosteriorReport {
    pub strategies: Vec<String>,
    pub overall: Vec<f64>,
    pub by_split: BTreeMap<Split, Vec<f64>>,
    pub by_intended: BTreeMap<MeaningRole, Vec<f64>>,
}

/// Mean P(r|c,u) overall, per split and per intended role. All posteriors
/// must share one strategy space.
pub fn rs_posterior_report(outputs: &[(&Scenario, &Categorical)]) -> DataResult<StrategyPosteriorReport> {
    let Some((_, first)) = outputs.first() else {
        return Err(DataError::Schema("no strategy posteriors to summarize".into()));
    };
    let space = first.space().clone();
    let k = space.len();
    let mut sums: BTreeMap<Option<Result<Split, MeaningRole>>, (Vec<f64>, usize)> = BTreeMap::new();
    for (scenario, p) in outputs {
        if !same_space(p.space(), &space) && p.space().labels() != space.labels() {
            return Err(DataError::KeyMismatch(format!("scenario {} has a different strategy space", scenario.id)));
        }
        for key in [None, Some(Ok(scenario.split)), Some(Err(scenario.intended_role))] {
            let entry = sums.entry(key).or_insert_with(|| (vec![0.0; k], 0));
            for (acc, v) in entry.0.iter_mut().zip(p.probs()) {
                *acc += v;
            }
            entry.1 += 1;
        }
    }
    let mean = |(v, n): &(Vec<f64>, usize)| v.iter().map(|x| x / *n as f64).collect::<Vec<f64>>();
    let mut report = StrategyPosteriorReport {
        strategies: space.labels().to_vec(),
        overall: mean(&sums[&None]),
        by_split: BTreeMap::new(),
        by_intended: BTreeMap::new(),
    };
    for (key, acc) in &sums {
        match key {
            Some(Ok(split)) => {
                report.by_split.insert(*split, mean(acc));
            }
            Some(Err(role)) => {
                report.by_intended.insert(*role, mean(acc));
            }
            None => {}
        }
    }
    Ok(report)
}

/// Writes one CSV row per (context, utterance, meaning) cell.
pub fn write_distributions_csv<W: Write>(writer: W, model: &str, dists: &KeyedDistributions) -> DataResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| DataError::Schema(format!("csv: {e}"));
    w.write_record(["model", "context", "utterance", "meaning", "probability"]).map_err(csv_err)?;
    for ((c, u), d) in dists {
        for (m, p) in d.space().labels().iter().zip(d.probs()) {
            w.write_record([model, c, u, m, &format!("{p:?}")]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| DataError::Schema(format!("csv: {e}")))?;
    Ok(())
}

/// Reads back the CSV written by [`write_distributions_csv`]. Meaning order is
/// the row order of the first block for each key.
pub fn read_distributions_csv<R: Read>(reader: R) -> DataResult<(String, KeyedDistributions)> {
    let mut r = csv::Reader::from_reader(reader);
    let mut model = None;
    let mut cells: BTreeMap<(String, String), Vec<(String, f64)>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| DataError::Parse { origin: "csv".into(), line, message: e.to_string() })?;
        if rec.len() != 5 {
            return Err(DataError::Parse { origin: "csv".into(), line, message: format!("{} fields", rec.len()) });
        }
        let m = rec[0].to_string();
        match &model {
            None => model = Some(m),
            Some(prev) if *prev != m => {
                return Err(DataError::Invalid {
                    origin: "csv".into(),
                    line,
                    field: "model".into(),
                    message: format!("mixed models `{prev}` and `{m}`"),
                })
            }
            _ => {}
        }
        let p: f64 = rec[4].parse().map_err(|e| DataError::Invalid {
            origin: "csv".into(),
            line,
            field: "probability".into(),
            message: format!("{e}"),
        })?;
        cells.entry((rec[1].to_string(), rec[2].to_string())).or_default().push((rec[3].to_string(), p));
    }
    let mut out = KeyedDistributions::new();
    for (key, row) in cells {
        let space = LabelSpace::new(SpaceKind::Meaning, row.iter().map(|(m, _)| m.clone()))?;
        out.insert(key, Categorical::from_weights(space, row.into_iter().map(|(_, p)| p).collect())?);
    }
    Ok((model.unwrap_or_default(), out))
}

/// JSON object `{ "context": { "utterance": { "meaning": p } } }`.
pub fn distributions_to_json(dists: &KeyedDistributions) -> Value {
    let mut root = Map::new();
    for ((c, u), d) in dists {
        let by_c = root.entry(c.clone()).or_insert_with(|| Value::Object(Map::new()));
        by_c.as_object_mut().expect("object").insert(u.clone(), Value::Object(d.to_label_map()));
    }
    Value::Object(root)
}

pub fn distributions_from_json(value: &Value) -> DataResult<KeyedDistributions> {
    let bad = |what: &str| DataError::Schema(format!("distribution JSON: {what}"));
    let mut out = KeyedDistributions::new();
    for (c, by_u) in value.as_object().ok_or_else(|| bad("top level must be an object"))? {
        for (u, cell) in by_u.as_object().ok_or_else(|| bad("context entries must be objects"))? {
            let cell = cell.as_object().ok_or_else(|| bad("cells must be objects"))?;
            let mut labels = Vec::with_capacity(cell.len());
            let mut weights = Vec::with_capacity(cell.len());
            for (m, p) in cell {
                labels.push(m.clone());
                weights.push(p.as_f64().ok_or_else(|| bad("probabilities must be numbers"))?);
            }
            let space = LabelSpace::new(SpaceKind::Meaning, labels)?;
            out.insert((c.clone(), u.clone()), Categorical::from_weights(space, weights)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixture_scenarios;

    fn cell(ps: &[f64]) -> Categorical {
        let space = LabelSpace::new(SpaceKind::Meaning, (0..ps.len()).map(|i| format!("m{i}"))).unwrap();
        Categorical::from_weights(space, ps.to_vec()).unwrap()
    }

    fn keyed(rows: &[(&str, &[f64])]) -> KeyedDistributions {
        rows.iter().map(|(k, ps)| (("c".to_string(), k.to_string()), cell(ps))).collect()
    }

    #[test]
    fn mad_arithmetic() {
        let p = keyed(&[("a", &[1.0, 0.0]), ("b", &[0.3, 0.7])]);
        let h = keyed(&[("a", &[0.0, 1.0]), ("b", &[0.3, 0.7])]);
        assert_eq!(mad(&p, &h).unwrap(), 0.5);
        assert_eq!(mad(&p, &p).unwrap(), 0.0);
        assert_eq!(mad(&h, &p).unwrap(), 0.5);
        let short = keyed(&[("a", &[1.0, 0.0])]);
        assert!(matches!(mad(&p, &short), Err(DataError::KeyMismatch(_))));
    }

    #[test]
    fn delta_and_uniform_scores() {
        let scenarios = fixture_scenarios();
        let deltas: Vec<Categorical> = scenarios
            .iter()
            .map(|s| Categorical::delta(s.meaning_space(), s.role_index(s.intended_role)).unwrap())
            .collect();
        let pairs: Vec<_> = scenarios.iter().zip(&deltas).collect();
        let t = meaning_scores(&pairs).unwrap();
        assert_eq!((t.overall.correct, t.overall.incorrect, t.overall.distractor), (1.0, 0.0, 0.0));
        let uniform: Vec<Categorical> = scenarios.iter().map(|s| Categorical::uniform(s.meaning_space())).collect();
        let pairs: Vec<_> = scenarios.iter().zip(&uniform).collect();
        let t = meaning_scores(&pairs).unwrap();
        assert_eq!((t.overall.correct, t.overall.incorrect, t.overall.distractor), (0.25, 0.25, 0.5));
        assert_eq!(t.by_split.len(), 2);
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let p = keyed(&[("a", &[0.1, 0.9]), ("b", &[1.0 / 3.0, 2.0 / 3.0])]);
        let mut buf = Vec::new();
        write_distributions_csv(&mut buf, "rsa", &p).unwrap();
        let (model, back) = read_distributions_csv(buf.as_slice()).unwrap();
        assert_eq!(model, "rsa");
        assert_eq!(back, p);
        assert_eq!(distributions_from_json(&distributions_to_json(&p)).unwrap(), p);
    }
}
