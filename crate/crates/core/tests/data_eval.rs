use proptest::prelude::*;
use rsa2_core::data::{fixture_scenarios, MeaningRole, NumbersDataset, Split, WeatherDataset};
use rsa2_core::dist::{Categorical, LabelSpace, SpaceKind};
use rsa2_core::eval::{ablate, mad, meaning_scores, rs_posterior_report, AblationTarget, KeyedDistributions};
use rsa2_core::rsa::{PriorSet, RsaConfig, SemanticLexicon, StandardRsa};

fn scalar_toy() -> (SemanticLexicon, PriorSet) {
    let ctx = LabelSpace::new(SpaceKind::Context, ["c"]).unwrap();
    let meanings = LabelSpace::new(SpaceKind::Meaning, ["some-not-all", "all"]).unwrap();
    let utterances = LabelSpace::new(SpaceKind::Utterance, ["some", "all"]).unwrap();
    let lexicon =
        SemanticLexicon::new(meanings.clone(), utterances.clone(), vec![vec![true, true], vec![false, true]]).unwrap();
    (lexicon, PriorSet::uniform(ctx, meanings, utterances))
}

#[test]
fn ablating_uniform_priors_changes_nothing() {
    let (lexicon, priors) = scalar_toy();
    for which in [AblationTarget::MeaningPrior, AblationTarget::UtterancePrior] {
        let ablated = ablate(&priors, which);
        let model = StandardRsa::new(lexicon.clone(), ablated, RsaConfig::default()).unwrap();
        let l1 = model.l1(0, 0).unwrap();
        assert!((l1.prob(0) - 0.75).abs() < 1e-12 && (l1.prob(1) - 0.25).abs() < 1e-12);
    }
}

#[test]
fn ablation_replaces_only_the_named_table() {
    let numbers = NumbersDataset::new();
    let priors = numbers.priors(numbers.fixture_meaning_prior()).unwrap();
    let flat = ablate(&priors, AblationTarget::MeaningPrior);
    for c in 0..3 {
        assert!(flat.meaning_prior(c).unwrap().probs().iter().all(|p| *p == 0.1));
        assert_eq!(flat.utterance_prior(c).unwrap(), priors.utterance_prior(c).unwrap());
    }
    let same = ablate(&priors, AblationTarget::UtterancePrior);
    assert_eq!(same.meaning_prior_table(), priors.meaning_prior_table());
}

fn strategy_space() -> rsa2_core::dist::SpaceRef {
    LabelSpace::new(SpaceKind::Strategy, ["literal", "irony"]).unwrap()
}

#[test]
fn rs_report_on_delta_inputs() {
    let scenarios = fixture_scenarios();
    let irony = Categorical::delta(strategy_space(), 1).unwrap();
    let pairs: Vec<_> = scenarios.iter().map(|s| (s, &irony)).collect();
    let report = rs_posterior_report(&pairs).unwrap();
    assert_eq!(report.overall, vec![0.0, 1.0]);
    assert_eq!(report.by_split[&Split::Test], vec![0.0, 1.0]);
}

#[test]
fn rs_report_fixture_arithmetic() {
    // Ironic items get P(irony) 0.9 or 0.7, literal items 0.4 or 0.2.
    let scenarios = fixture_scenarios();
    let dists: Vec<Categorical> = scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let irony = match (s.intended_role, i % 4 < 2) {
                (MeaningRole::Nonliteral, true) => 0.9,
                (MeaningRole::Nonliteral, false) => 0.7,
                (_, true) => 0.4,
                (_, false) => 0.2,
            };
            Categorical::from_weights(strategy_space(), vec![1.0 - irony, irony]).unwrap()
        })
        .collect();
    let pairs: Vec<_> = scenarios.iter().zip(&dists).collect();
    let report = rs_posterior_report(&pairs).unwrap();
    let ironic = &report.by_intended[&MeaningRole::Nonliteral];
    let literal = &report.by_intended[&MeaningRole::Literal];
    assert!((ironic[1] - 0.8).abs() < 1e-12 && (ironic[0] - 0.2).abs() < 1e-12);
    assert!((literal[1] - 0.3).abs() < 1e-12);
    assert!((report.overall[1] - 0.55).abs() < 1e-12);
}

fn keyed(cells: &[Vec<f64>]) -> KeyedDistributions {
    let space = LabelSpace::new(SpaceKind::Meaning, ["a", "b", "c"]).unwrap();
    cells
        .iter()
        .enumerate()
        .map(|(i, w)| (("ctx".to_string(), format!("u{i}")), Categorical::from_weights(space.clone(), w.clone()).unwrap()))
        .collect()
}

proptest! {
    #[test]
    fn mad_is_symmetric_and_bounded(
        cells in proptest::collection::vec(
            (proptest::collection::vec(0.01f64..1.0, 3), proptest::collection::vec(0.01f64..1.0, 3)), 1..10)
    ) {
        let p = keyed(&cells.iter().map(|(a, _)| a.clone()).collect::<Vec<_>>());
        let h = keyed(&cells.iter().map(|(_, b)| b.clone()).collect::<Vec<_>>());
        let d = mad(&p, &h).unwrap();
        prop_assert_eq!(d, mad(&h, &p).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(mad(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn meaning_scores_cover_all_mass(weights in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 4), 8)) {
        let scenarios = fixture_scenarios();
        let dists: Vec<Categorical> = scenarios
            .iter()
            .zip(&weights)
            .map(|(s, w)| Categorical::from_weights(s.meaning_space(), w.clone()).unwrap())
            .collect();
        let pairs: Vec<_> = scenarios.iter().zip(&dists).collect();
        let t = meaning_scores(&pairs).unwrap();
        for row in std::iter::once(&t.overall).chain(t.by_split.values()).chain(t.by_intended.values()) {
            prop_assert!((row.correct + row.incorrect + row.distractor - 1.0).abs() < 1e-9);
            prop_assert!((row.literal + row.nonliteral + row.overlap + row.nonsequitur - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn weather_fixture_model_is_complete() {
    let w = WeatherDataset::fixture();
    let model = w.scale_model(1.0, None).unwrap();
    let uniform = Categorical::uniform(w.strategies.clone());
    for c in 0..w.contexts().len() {
        for u in 0..w.utterances.len() {
            let l1 = model.l1_marginal(c, u, &uniform).unwrap();
            assert!((l1.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
