mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsa2_core::data::fixture_scenarios;
use rsa2_core::dist::{Categorical, ConditionalTable, LabelSpace, SpaceKind};
use rsa2_core::provider::{MockFixture, MockProvider};
use rsa2_core::rsa::PriorSet;
use rsa2_core::rsa2::{l0_conditioned, RhetoricalFunction};
use rsa2_core::rsc::{
    cluster_meaning_distribution, cluster_size_posterior, kmeans, rsc_fr_raw, rsc_pipeline, RscConfig,
};

/// Two blobs whose centres are 20 apart with noise in [-1, 1).
fn blobs(n_each: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * n_each {
        let blob = (i + seed as usize) % 2;
        let centre = if blob == 0 { -10.0 } else { 10.0 };
        points.push((0..dim).map(|_| centre + rng.random_range(-1.0..1.0)).collect());
        labels.push(blob);
    }
    (points, labels)
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| a.iter().zip(b).all(|(x2, y2)| (x == x2) == (y == y2)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn separated_blobs_are_recovered(seed in any::<u64>(), n in 5usize..30, dim in 1usize..6) {
        let (points, truth) = blobs(n, dim, seed);
        let model = kmeans(&points, 2, 10, seed).unwrap();
        prop_assert!(same_partition(&model.assignment, &truth));
        let p = cluster_size_posterior(&model);
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn best_inertia_beats_every_single_init(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let best = kmeans(&points, 4, 10, seed).unwrap();
        prop_assert_eq!(best.sizes().iter().filter(|s| **s == 0).count(), 0);
        let single = kmeans(&points, 4, 1, seed).unwrap();
        prop_assert!(best.inertia <= single.inertia);
    }

    #[test]
    fn rsc_l0_is_proportional_to_pooled_distribution(
        a in proptest::collection::vec(0.05f64..1.0, 3),
        b in proptest::collection::vec(0.05f64..1.0, 3),
        u in proptest::collection::vec(0.05f64..1.0, 3),
    ) {
        let space = LabelSpace::new(SpaceKind::Meaning, ["x", "y", "z"]).unwrap();
        let cat = |w: &[f64]| Categorical::from_weights(space.clone(), w.to_vec()).unwrap();
        let (a, b, u) = (cat(&a), cat(&b), cat(&u));
        let p_mc = cluster_meaning_distribution(&[&a, &b]).unwrap();
        let raw = rsc_fr_raw(&p_mc, &u).unwrap();
        let k = raw.iter().copied().fold(0.0, f64::max);
        let ctx = LabelSpace::new(SpaceKind::Context, ["c"]).unwrap();
        let utts = LabelSpace::new(SpaceKind::Utterance, ["u"]).unwrap();
        let f = RhetoricalFunction::dense("r", (1, 3, 1), raw.iter().map(|v| v / k).collect()).unwrap();
        let priors = PriorSet::uniform(ctx.clone(), space.clone(), utts)
            .with_meaning_prior(ConditionalTable::new(vec![ctx], space.clone(), vec![u.clone()]).unwrap())
            .unwrap();
        let l0 = l0_conditioned(&f, &priors, 0, 0).unwrap();
        for m in 0..3 {
            prop_assert!((l0.prob(m) - p_mc.prob(m)).abs() < 1e-12);
        }
    }
}

fn small(k: usize) -> RscConfig {
    RscConfig { k, n_alts: 20, shuffles: 3, seed: 11, ..RscConfig::default() }
}

#[test]
fn k_choices_all_complete() {
    let mock = MockProvider::symmetric();
    for scenario in fixture_scenarios() {
        for k in [2, 4, 8] {
            let report = rsc_pipeline(&mock, &scenario, &small(k)).unwrap();
            assert!(report.k <= k && report.k >= 1);
            let total: f64 = report.l1.values().sum();
            assert!((total - 1.0).abs() < 1e-12, "{} k={k}", scenario.id);
            let post: f64 = report.clusters.iter().map(|c| c.posterior).sum();
            assert!((post - 1.0).abs() < 1e-12);
            for c in &report.clusters {
                assert!(c.size > 0);
                assert!(c.f_observed.values().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

#[test]
fn degenerate_generation_gives_one_cluster() {
    let scenario = &fixture_scenarios()[0];
    let fx = MockFixture::from_json(
        &serde_json::json!({
            "generations": [{
                "prefix_contains": "Lara",
                "items": [{ "text": format!("{}\" he said.", scenario.utterance), "loglik": -4.0 }]
            }]
        })
        .to_string(),
    )
    .unwrap();
    let mock = MockProvider::new(fx);
    let report = rsc_pipeline(&mock, scenario, &small(4)).unwrap();
    assert_eq!(report.k, 1);
    assert_eq!(report.alternatives.len(), 1);
    // One cluster holding only `u`: f is identically 1 and the listener is
    // the plain prior-weighted listener.
    let c = &report.clusters[0];
    assert!(c.f_observed.values().all(|v| (v - 1.0).abs() < 1e-12));
    assert_eq!(c.posterior, 1.0);
    for (m, p) in &report.l0 {
        assert!((p - report.meaning_prior[m]).abs() < 1e-12);
    }
    assert_eq!(report.l1, c.l1);
}

#[test]
fn pipeline_is_deterministic_and_matches_golden() {
    let mock = MockProvider::symmetric();
    let scenario = &fixture_scenarios()[0];
    let a = rsc_pipeline(&mock, scenario, &small(4)).unwrap().to_json_pretty();
    let b = rsc_pipeline(&mock, scenario, &small(4)).unwrap().to_json_pretty();
    assert_eq!(a, b);
    common::check_golden("rsc_report.json", &a);
}

#[test]
fn alternative_order_does_not_matter() {
    let scenario = &fixture_scenarios()[3];
    let items = ["What a disaster.", "Just great, thanks.", "That was a mess.", "Nothing could be better."];
    let make = |order: &[usize]| {
        let gens: Vec<_> =
            order.iter().map(|&i| serde_json::json!({ "text": items[i], "loglik": -1.0 - i as f64 })).collect();
        MockProvider::new(
            MockFixture::from_json(
                &serde_json::json!({ "generations": [{ "prefix_contains": "Tom", "items": gens }] }).to_string(),
            )
            .unwrap(),
        )
    };
    let config = RscConfig { n_alts: 4, ..small(2) };
    let a = rsc_pipeline(&make(&[0, 1, 2, 3]), scenario, &config).unwrap();
    let b = rsc_pipeline(&make(&[3, 1, 0, 2]), scenario, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn uniform_meaning_prior_variant_runs() {
    let mock = MockProvider::symmetric();
    let scenario = &fixture_scenarios()[5];
    let config = RscConfig { meaning_prior: false, ..small(4) };
    let report = rsc_pipeline(&mock, scenario, &config).unwrap();
    assert!(report.meaning_prior.values().all(|p| *p == 0.25));
}
