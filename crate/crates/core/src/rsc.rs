//! Strategy induction by clustering alternative utterances: each k-means
//! cluster of embedded alternatives stands in for one rhetorical strategy,
//! with a rhetorical function read off the cluster's pooled meaning
//! posterior and a posterior proportional to cluster size.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Scenario;
use crate::dist::{Categorical, ConditionalTable, DistError, LabelSpace, SpaceKind, SpaceRef};
use crate::error::ModelError;
use crate::llm::{build_alternatives, AlternativeSet};
use crate::provider::{mcq_distribution, McqCondition, McqQuery, McqTask, ProbabilityProvider, PromptTemplates, ProviderError};
use crate::rsa::{PriorSet, RsaConfig};
use crate::rsa2::{RhetoricalFunction, Rsa2Model, StrategySet};

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const EMPTY_CLUSTER_RETRIES: usize = 5;

#[derive(Debug, Error)]
pub enum RscError {
    #[error("k-means needs 1 <= k <= #points, got k={k} for {points} points")]
    TooFewPoints { k: usize, points: usize },
    #[error("every k-means initialization ended with an empty cluster (k={k})")]
    EmptyClusterUnrecoverable { k: usize },
    #[error("points must be non-empty, finite and share one dimension")]
    InvalidPoints,
    #[error("P(m|c,u) is zero for meaning `{meaning}` of utterance `{utterance}`")]
    DivisionByZero { meaning: String, utterance: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

impl From<crate::llm::LlmError> for RscError {
    fn from(e: crate::llm::LlmError) -> Self {
        match e {
            crate::llm::LlmError::Provider(p) => RscError::Provider(p),
            crate::llm::LlmError::Model(m) => RscError::Model(m),
            crate::llm::LlmError::Dist(d) => RscError::Dist(d),
        }
    }
}

pub type RscResult<T> = Result<T, RscError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster of each input point. Clusters are numbered in order of their
    /// first member.
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

impl ClusterModel {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self, r: usize) -> Vec<usize> {
        self.assignment.iter().enumerate().filter(|(_, &a)| a == r).map(|(i, _)| i).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding. `None` when fewer than `k` distinct points exist.
fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<f64>>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                pick = i;
                break;
            }
        }
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    Some(centroids)
}

/// One Lloyd run from a seeded start; `None` if a cluster empties.
fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Option<ClusterModel> {
    let dim = points[0].len();
    let mut centroids = seed_centroids(points, k, rng)?;
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (j, _) = nearest(p, &centroids);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for ((c, s), n) in centroids.iter_mut().zip(sums).zip(&counts) {
            *c = s.into_iter().map(|x| x / *n as f64).collect();
        }
        if !changed {
            break;
        }
    }
    let inertia = points.iter().zip(&assignment).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
    Some(canonical(ClusterModel { k, centroids, assignment, inertia }))
}

/// Renumbers clusters by their smallest member index.
fn canonical(model: ClusterModel) -> ClusterModel {
    let mut order: Vec<usize> = Vec::with_capacity(model.k);
    for &a in &model.assignment {
        if !order.contains(&a) {
            order.push(a);
        }
    }
    let mut relabel = vec![0; model.k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let mut centroids = vec![Vec::new(); model.k];
    for (old, c) in model.centroids.into_iter().enumerate() {
        centroids[relabel[old]] = c;
    }
    ClusterModel {
        k: model.k,
        centroids,
        assignment: model.assignment.iter().map(|&a| relabel[a]).collect(),
        inertia: model.inertia,
    }
}

fn derive_seed(seed: u64, init: usize, attempt: usize) -> u64 {
    seed ^ ((init as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ ((attempt as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Best-inertia clustering over `n_init` seeded k-means++/Lloyd runs.
///
/// A run that empties a cluster is restarted with a fresh derived seed, up
/// to [`EMPTY_CLUSTER_RETRIES`] times; runs that never succeed are skipped.
pub fn kmeans(points: &[Vec<f64>], k: usize, n_init: usize, seed: u64) -> RscResult<ClusterModel> {
    if k == 0 || k > points.len() {
        return Err(RscError::TooFewPoints { k, points: points.len() });
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
        return Err(RscError::InvalidPoints);
    }
    let mut best: Option<ClusterModel> = None;
    for init in 0..n_init.max(1) {
        for attempt in 0..=EMPTY_CLUSTER_RETRIES {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, init, attempt));
            if let Some(model) = lloyd(points, k, &mut rng) {
                if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
                    best = Some(model);
                }
                break;
            }
            log::debug!("k-means init {init} attempt {attempt} emptied a cluster");
        }
    }
    best.ok_or(RscError::EmptyClusterUnrecoverable { k })
}

/// Number of distinct points (exact equality).
pub fn distinct_points(points: &[Vec<f64>]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    seen.len()
}

pub fn cluster_space(k: usize) -> SpaceRef {
    LabelSpace::new(SpaceKind::Strategy, (0..k).map(|r| format!("cluster{r}"))).expect("distinct labels")
}

/// `P(r|c,u) = |U_r| / |U|`.
pub fn cluster_size_posterior(model: &ClusterModel) -> Categorical {
    let total = model.assignment.len();
    let probs = model.sizes().into_iter().map(|s| s as f64 / total as f64).collect();
    Categorical::from_weights(cluster_space(model.k), probs).expect("sizes are positive")
}

/// Pooled meaning distribution of a cluster: summed posteriors, renormalized.
pub fn cluster_meaning_distribution(rows: &[&Categorical]) -> RscResult<Categorical> {
    let first = rows.first().ok_or(RscError::InvalidPoints)?;
    let mut sum = vec![0.0; first.len()];
    for row in rows {
        if row.space().labels() != first.space().labels() {
            return Err(DistError::SpaceMismatch.into());
        }
        for (s, p) in sum.iter_mut().zip(row.probs()) {
            *s += p;
        }
    }
    Ok(Categorical::from_weights(first.space().clone(), sum)?)
}

/// `p_mc(m) / P(m|c,u)` for every meaning, before normalization.
pub fn rsc_fr_raw(p_mc: &Categorical, posterior: &Categorical) -> RscResult<Vec<f64>> {
    (0..p_mc.len())
        .map(|m| {
            let p = posterior.prob(m);
            if p <= 0.0 {
                return Err(RscError::DivisionByZero {
                    meaning: posterior.space().label(m).to_string(),
                    utterance: String::new(),
                });
            }
            Ok(p_mc.prob(m) / p)
        })
        .collect()
}

/// Raw ratios divided by their maximum, so values lie in [0, 1].
pub fn rsc_fr_values(p_mc: &Categorical, posterior: &Categorical) -> RscResult<Vec<f64>> {
    let raw = rsc_fr_raw(p_mc, posterior)?;
    let k = raw.iter().copied().fold(0.0, f64::max);
    Ok(raw.into_iter().map(|v| (v / k).clamp(0.0, 1.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RscConfig {
    pub k: usize,
    pub n_alts: usize,
    pub n_init: usize,
    pub alpha: f64,
    pub shuffles: usize,
    pub seed: u64,
    pub max_in_flight: usize,
    /// Use `P(m|c)` from the provider; otherwise uniform.
    pub meaning_prior: bool,
    pub templates: PromptTemplates,
}

impl Default for RscConfig {
    fn default() -> Self {
        RscConfig {
            k: 4,
            n_alts: 50,
            n_init: 10,
            alpha: 1.0,
            shuffles: 10,
            seed: 0,
            max_in_flight: 4,
            meaning_prior: true,
            templates: PromptTemplates::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeReport {
    pub utterance: String,
    pub loglik: f64,
    pub prior: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub id: usize,
    pub size: usize,
    pub members: Vec<String>,
    pub posterior: f64,
    /// Pooled meaning distribution of the members.
    pub p_mc: BTreeMap<String, f64>,
    /// Normalized rhetorical function at the observed utterance.
    pub f_observed: BTreeMap<String, f64>,
    pub l0: BTreeMap<String, f64>,
    pub l1: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscReport {
    pub scenario: String,
    pub observed: String,
    pub k_requested: usize,
    pub k: usize,
    pub inertia: f64,
    pub meaning_prior: BTreeMap<String, f64>,
    pub alternatives: Vec<AlternativeReport>,
    pub clusters: Vec<ClusterReport>,
    pub l0: BTreeMap<String, f64>,
    pub l1: BTreeMap<String, f64>,
}

impl RscReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn l1_categorical(&self, meanings: &SpaceRef) -> RscResult<Categorical> {
        let w = meanings.labels().iter().map(|m| self.l1.get(m).copied().unwrap_or(0.0)).collect();
        Ok(Categorical::from_weights(meanings.clone(), w)?)
    }
}

fn label_map(d: &Categorical) -> BTreeMap<String, f64> {
    d.space().labels().iter().cloned().zip(d.probs().iter().copied()).collect()
}

/// Clustered strategies for a fixed alternative set and meaning tables.
pub struct RscModel {
    pub alternatives: AlternativeSet,
    pub clusters: ClusterModel,
    pub posteriors: Vec<Categorical>,
    pub meaning_prior: Categorical,
    pub pooled: Vec<Categorical>,
    pub model: Rsa2Model,
}

impl RscModel {
    /// Assembles per-cluster rhetorical functions and the listener model.
    /// `posteriors[u']` is `P(m|c,u')` for each alternative.
    pub fn new(
        alternatives: AlternativeSet,
        clusters: ClusterModel,
        posteriors: Vec<Categorical>,
        meaning_prior: Categorical,
        alpha: f64,
    ) -> RscResult<Self> {
        let meanings = meaning_prior.space().clone();
        let nu = alternatives.utterances.len();
        let nm = meanings.len();
        if posteriors.len() != nu || clusters.assignment.len() != nu {
            return Err(DistError::LengthMismatch { expected: nu, got: posteriors.len() }.into());
        }
        let mut pooled = Vec::with_capacity(clusters.k);
        let mut functions = Vec::with_capacity(clusters.k);
        let space = cluster_space(clusters.k);
        for r in 0..clusters.k {
            let rows: Vec<&Categorical> = clusters.members(r).into_iter().map(|i| &posteriors[i]).collect();
            let p_mc = cluster_meaning_distribution(&rows)?;
            let mut values = vec![0.0; nm * nu];
            for (u, post) in posteriors.iter().enumerate() {
                let f = rsc_fr_values(&p_mc, post).map_err(|e| match e {
                    RscError::DivisionByZero { meaning, .. } => {
                        RscError::DivisionByZero { meaning, utterance: alternatives.utterances.label(u).to_string() }
                    }
                    other => other,
                })?;
                for (m, v) in f.into_iter().enumerate() {
                    values[m * nu + u] = v;
                }
            }
            functions.push(RhetoricalFunction::dense(space.label(r), (1, nm, nu), values)?);
            pooled.push(p_mc);
        }
        let contexts = LabelSpace::new(SpaceKind::Context, ["c"])?;
        let posterior = cluster_size_posterior(&clusters);
        let meaning_table = ConditionalTable::new(vec![contexts.clone()], meanings.clone(), vec![meaning_prior.clone()])?;
        let utterance_table =
            ConditionalTable::new(vec![contexts.clone()], alternatives.utterances.clone(), vec![alternatives.prior.clone()])?;
        let strategy_table = ConditionalTable::new(
            vec![contexts.clone(), alternatives.utterances.clone()],
            space.clone(),
            vec![posterior; nu],
        )?;
        let priors = PriorSet::new(meaning_table, utterance_table, Some(strategy_table))?;
        let model = Rsa2Model::new(StrategySet::with_space(space, functions)?, priors, RsaConfig::new(alpha)?)?;
        Ok(RscModel { alternatives, clusters, posteriors, meaning_prior, pooled, model })
    }

    pub fn report(&self, scenario: &str, k_requested: usize) -> RscResult<RscReport> {
        let u = self.alternatives.observed;
        let posterior = cluster_size_posterior(&self.clusters);
        let sizes = self.clusters.sizes();
        let labels = self.alternatives.utterances.labels();
        let meanings = self.meaning_prior.space();
        let mut clusters = Vec::with_capacity(self.clusters.k);
        for r in 0..self.clusters.k {
            let f = self.model.strategies.function(r);
            clusters.push(ClusterReport {
                id: r,
                size: sizes[r],
                members: self.clusters.members(r).into_iter().map(|i| labels[i].clone()).collect(),
                posterior: posterior.prob(r),
                p_mc: label_map(&self.pooled[r]),
                f_observed: (0..meanings.len()).map(|m| (meanings.label(m).to_string(), f.value(0, m, u))).collect(),
                l0: label_map(&self.model.l0(0, u, r)?),
                l1: label_map(&self.model.l1(0, u, r)?),
            });
        }
        Ok(RscReport {
            scenario: scenario.to_string(),
            observed: labels[u].clone(),
            k_requested,
            k: self.clusters.k,
            inertia: self.clusters.inertia,
            meaning_prior: label_map(&self.meaning_prior),
            alternatives: labels
                .iter()
                .enumerate()
                .map(|(i, text)| AlternativeReport {
                    utterance: text.clone(),
                    loglik: self.alternatives.logliks[i],
                    prior: self.alternatives.prior.prob(i),
                    cluster: self.clusters.assignment[i],
                })
                .collect(),
            clusters,
            l0: label_map(&self.model.l0_marginal(0, u, &posterior)?),
            l1: label_map(&self.model.l1_marginal(0, u, &posterior)?),
        })
    }
}

/// Generate, embed, cluster, score and marginalize for one scenario.
pub fn rsc_pipeline<P: ProbabilityProvider + ?Sized>(
    provider: &P,
    scenario: &Scenario,
    config: &RscConfig,
) -> RscResult<RscReport> {
    let alternatives = build_alternatives(provider, scenario, config.n_alts, config.seed)?;
    let texts = alternatives.utterances.labels().to_vec();
    let embeddings = provider.embed(&texts)?;
    let k = config.k.min(distinct_points(&embeddings));
    let clusters = kmeans(&embeddings, k, config.n_init, config.seed)?;

    let meanings = scenario.meaning_space();
    let options = scenario.meaning_texts();
    let base = McqCondition::new(scenario.context_text.clone()).with_speaker(scenario.speaker_name.clone());
    let ask = |task: McqTask, condition: McqCondition, slot: u64| -> RscResult<Categorical> {
        let query = McqQuery::new(task, condition, options.clone())
            .with_shuffles(config.shuffles)
            .with_seed(config.seed.wrapping_add(slot))
            .with_max_in_flight(config.max_in_flight);
        let result = mcq_distribution(provider, &config.templates, &query)?;
        Ok(Categorical::from_weights(meanings.clone(), result.probs)?)
    };
    // Each MCQ already fans out over its shuffles up to the in-flight cap.
    let posteriors = texts
        .iter()
        .enumerate()
        .map(|(i, u)| ask(McqTask::MeaningPosterior, base.clone().with_utterance(u.clone()), i as u64 + 1))
        .collect::<RscResult<Vec<_>>>()?;
    let meaning_prior = if config.meaning_prior {
        ask(McqTask::MeaningPrior, base.clone(), 0)?
    } else {
        Categorical::uniform(meanings.clone())
    };
    let model = RscModel::new(alternatives, clusters, posteriors, meaning_prior, config.alpha)?;
    model.report(&scenario.id, config.k)
}
