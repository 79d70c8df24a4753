//! A learned rhetorical function: a one-hidden-layer sigmoid network mapping
//! a (context, utterance, strategy) one-hot to per-meaning `f_r` values,
//! trained through the full strategy-aware listener with hand-written
//! backprop and Adam.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dist::{same_space, Categorical, ConditionalTable, LabelSpace, SpaceKind, SpaceRef};
use crate::error::ModelError;
use crate::qud::{weather_utterance, WeatherPriors};
use crate::rsa::{rational_power, PriorSet, RsaConfig};
use crate::rsa2::{RhetoricalFunction, Rsa2Model, StrategySet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("input has {got} entries, the network expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("listener assigned zero probability to the target of sample {sample}")]
    NonFiniteLoss { sample: usize },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

impl From<crate::dist::DistError> for LearnError {
    fn from(e: crate::dist::DistError) -> Self {
        LearnError::Model(e.into())
    }
}

pub type LearnResult<T> = Result<T, LearnError>;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `inputs → hidden → outputs`, sigmoid after both layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrNet {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// `hidden × inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `outputs × hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl FrNet {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        FrNet {
            inputs,
            hidden,
            outputs,
            w1: vec![0.0; hidden * inputs],
            b1: vec![0.0; hidden],
            w2: vec![0.0; outputs * hidden],
            b2: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-0.5, 0.5]` scaled by `1/sqrt(fan_in)`.
    pub fn init(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = FrNet::zeros(inputs, hidden, outputs);
        let s1 = 1.0 / (inputs as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        net.w1.iter_mut().chain(net.b1.iter_mut()).for_each(|w| *w = rng.random_range(-0.5..0.5) * s1);
        net.w2.iter_mut().chain(net.b2.iter_mut()).for_each(|w| *w = rng.random_range(-0.5..0.5) * s2);
        net
    }

    pub fn zeros_like(&self) -> Self {
        FrNet::zeros(self.inputs, self.hidden, self.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(self.b2.iter_mut())
    }

    fn check_shapes(&self) -> LearnResult<()> {
        let ok = self.w1.len() == self.hidden * self.inputs
            && self.b1.len() == self.hidden
            && self.w2.len() == self.outputs * self.hidden
            && self.b2.len() == self.outputs;
        if ok {
            Ok(())
        } else {
            Err(LearnError::Checkpoint("weight shapes do not match layer sizes".into()))
        }
    }

    fn hidden_layer(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
                sigmoid(self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            })
            .collect()
    }

    fn output_layer(&self, h: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|k| {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                sigmoid(self.b2[k] + row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>())
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> LearnResult<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(LearnError::ShapeMismatch { expected: self.inputs, got: x.len() });
        }
        Ok(self.output_layer(&self.hidden_layer(x)))
    }

    /// Accumulates parameter gradients for one input given `∂/∂output`.
    fn backward(&self, x: &[f64], h: &[f64], y: &[f64], dy: &[f64], grads: &mut FrNet) {
        let mut dh = vec![0.0; self.hidden];
        for k in 0..self.outputs {
            let dz = dy[k] * y[k] * (1.0 - y[k]);
            if dz == 0.0 {
                continue;
            }
            grads.b2[k] += dz;
            for j in 0..self.hidden {
                grads.w2[k * self.hidden + j] += dz * h[j];
                dh[j] += dz * self.w2[k * self.hidden + j];
            }
        }
        for j in 0..self.hidden {
            let dz = dh[j] * h[j] * (1.0 - h[j]);
            grads.b1[j] += dz;
            for (i, &xi) in x.iter().enumerate() {
                if xi != 0.0 {
                    grads.w1[j * self.inputs + i] += dz * xi;
                }
            }
        }
    }
}

/// The fixed part of the listener the network is trained through.
#[derive(Debug, Clone)]
pub struct FrProblem {
    pub contexts: SpaceRef,
    pub meanings: SpaceRef,
    pub utterances: SpaceRef,
    pub strategies: SpaceRef,
    pub meaning_prior: ConditionalTable,
    pub utterance_prior: ConditionalTable,
    pub alpha: f64,
}

impl FrProblem {
    pub fn new(
        strategies: SpaceRef,
        meaning_prior: ConditionalTable,
        utterance_prior: ConditionalTable,
        alpha: f64,
    ) -> LearnResult<Self> {
        let config = RsaConfig::new(alpha)?;
        let priors = PriorSet::new(meaning_prior, utterance_prior, None)?;
        Ok(FrProblem {
            contexts: priors.contexts().clone(),
            meanings: priors.meanings().clone(),
            utterances: priors.utterances().clone(),
            strategies,
            meaning_prior: priors.meaning_prior_table().clone(),
            utterance_prior: priors.utterance_prior_table().clone(),
            alpha: config.alpha,
        })
    }

    /// The weather setting: state prior from `priors`, uniform utterance
    /// prior, strategies `literal` and `irony`.
    pub fn weather(priors: &WeatherPriors, alpha: f64) -> LearnResult<Self> {
        let utterances =
            LabelSpace::new(SpaceKind::Utterance, priors.states.labels().iter().map(|s| weather_utterance(s)))?;
        let strategies = LabelSpace::new(SpaceKind::Strategy, ["literal", "irony"])?;
        FrProblem::new(
            strategies,
            priors.state_prior.clone(),
            ConditionalTable::uniform(vec![priors.contexts.clone()], utterances),
            alpha,
        )
    }

    pub fn input_len(&self) -> usize {
        self.contexts.len() + self.utterances.len() + self.strategies.len()
    }

    /// One-hot blocks for context, utterance and strategy, in that order.
    pub fn encode(&self, c: usize, u: usize, r: usize) -> Vec<f64> {
        let (nc, nu) = (self.contexts.len(), self.utterances.len());
        let mut x = vec![0.0; self.input_len()];
        x[c] = 1.0;
        x[nc + u] = 1.0;
        x[nc + nu + r] = 1.0;
        x
    }

    pub fn new_net(&self, hidden: usize, seed: u64) -> FrNet {
        FrNet::init(self.input_len(), hidden, self.meanings.len(), seed)
    }

    pub fn priors(&self) -> PriorSet {
        PriorSet::new(self.meaning_prior.clone(), self.utterance_prior.clone(), None).expect("checked at construction")
    }

    /// Tabulates the network as one rhetorical function per strategy.
    pub fn strategy_set(&self, net: &FrNet) -> LearnResult<StrategySet> {
        let dims = (self.contexts.len(), self.meanings.len(), self.utterances.len());
        let mut functions = Vec::with_capacity(self.strategies.len());
        for r in 0..self.strategies.len() {
            let mut values = vec![0.0; dims.0 * dims.1 * dims.2];
            for c in 0..dims.0 {
                for u in 0..dims.2 {
                    let y = net.forward(&self.encode(c, u, r))?;
                    for (m, v) in y.into_iter().enumerate() {
                        values[(c * dims.1 + m) * dims.2 + u] = v;
                    }
                }
            }
            functions.push(RhetoricalFunction::dense(self.strategies.label(r), dims, values)?);
        }
        Ok(StrategySet::with_space(self.strategies.clone(), functions)?)
    }

    /// The full strategy-aware model induced by the network.
    pub fn model(&self, net: &FrNet) -> LearnResult<Rsa2Model> {
        Ok(Rsa2Model::new(self.strategy_set(net)?, self.priors(), RsaConfig::new(self.alpha)?)?)
    }
}

/// A training row. `r` is the annotated strategy, used as a point-mass
/// posterior when no posterior table is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrSample {
    pub c: usize,
    pub u: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    pub target_m: usize,
}

/// A sample with its strategy posterior resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub c: usize,
    pub u: usize,
    pub target: usize,
    pub posterior: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FrDataset {
    pub problem: FrProblem,
    pub samples: Vec<FrSample>,
    /// `P(r | c, u)`; kept fixed during training.
    pub strategy_posterior: Option<ConditionalTable>,
}

impl FrDataset {
    pub fn new(
        problem: FrProblem,
        samples: Vec<FrSample>,
        strategy_posterior: Option<ConditionalTable>,
    ) -> LearnResult<Self> {
        if let Some(table) = &strategy_posterior {
            let given = table.given();
            if given.len() != 2
                || !same_space(&given[0], &problem.contexts)
                || !same_space(&given[1], &problem.utterances)
                || !same_space(table.over(), &problem.strategies)
            {
                return Err(crate::dist::DistError::SpaceMismatch.into());
            }
        }
        let dataset = FrDataset { problem, samples, strategy_posterior };
        for i in 0..dataset.samples.len() {
            dataset.prepare(i)?;
        }
        Ok(dataset)
    }

    /// Reads a JSON array or JSON-lines of `{"c","u","r","target_m"}` rows.
    pub fn parse_samples(text: &str) -> LearnResult<Vec<FrSample>> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('[') {
            return serde_json::from_str(trimmed)
                .map_err(|e| LearnError::InvalidSample { index: e.line(), reason: e.to_string() });
        }
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| LearnError::InvalidSample { index: i + 1, reason: e.to_string() })
            })
            .collect()
    }

    pub fn samples_to_json(samples: &[FrSample]) -> Value {
        serde_json::to_value(samples).expect("plain data")
    }

    pub fn prepare(&self, i: usize) -> LearnResult<PreparedSample> {
        let s = self.samples[i];
        let p = &self.problem;
        let bad = |reason: String| LearnError::InvalidSample { index: i, reason };
        if s.c >= p.contexts.len() || s.u >= p.utterances.len() || s.target_m >= p.meanings.len() {
            return Err(bad(format!("index out of range in {s:?}")));
        }
        let posterior = match (&self.strategy_posterior, s.r) {
            (Some(table), _) => table.row(&[s.c, s.u])?.probs().to_vec(),
            (None, Some(r)) if r < p.strategies.len() => {
                let mut v = vec![0.0; p.strategies.len()];
                v[r] = 1.0;
                v
            }
            (None, Some(r)) => return Err(bad(format!("strategy {r} out of range"))),
            (None, None) => return Err(bad("no strategy and no strategy posterior".into())),
        };
        Ok(PreparedSample { c: s.c, u: s.u, target: s.target_m, posterior })
    }

    pub fn prepared(&self, indices: &[usize]) -> LearnResult<Vec<PreparedSample>> {
        indices.iter().map(|&i| self.prepare(i)).collect()
    }
}

/// Network outputs and the normalized listener stack for one (context, strategy).
struct Pass {
    xs: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
    // f[u][m]
    f: Vec<Vec<f64>>,
    // A[u] = Σ_m f[u][m] p[m]
    a: Vec<f64>,
    l0: Vec<Vec<f64>>,
    // S[u][m] = g[u][m] / Z[m]
    s: Vec<Vec<f64>>,
    z: Vec<f64>,
    df: Vec<Vec<f64>>,
}

fn run_pass(net: &FrNet, problem: &FrProblem, c: usize, r: usize) -> LearnResult<Pass> {
    let (nu, nm) = (problem.utterances.len(), problem.meanings.len());
    let p = problem.meaning_prior.row(&[c])?.probs();
    let q = problem.utterance_prior.row(&[c])?.probs();
    let alpha = problem.alpha;
    let mut pass = Pass {
        xs: Vec::with_capacity(nu),
        hs: Vec::with_capacity(nu),
        f: Vec::with_capacity(nu),
        a: Vec::with_capacity(nu),
        l0: Vec::with_capacity(nu),
        s: vec![vec![0.0; nm]; nu],
        z: vec![0.0; nm],
        df: vec![vec![0.0; nm]; nu],
    };
    for u in 0..nu {
        let x = problem.encode(c, u, r);
        let h = net.hidden_layer(&x);
        let f = net.output_layer(&h);
        let a: f64 = f.iter().zip(p).map(|(f, p)| f * p).sum();
        let l0 = f.iter().zip(p).map(|(f, p)| if a > 0.0 { f * p / a } else { 0.0 }).collect();
        pass.xs.push(x);
        pass.hs.push(h);
        pass.f.push(f);
        pass.a.push(a);
        pass.l0.push(l0);
    }
    for m in 0..nm {
        for u in 0..nu {
            pass.s[u][m] = rational_power(pass.l0[u][m], alpha) * q[u];
            pass.z[m] += pass.s[u][m];
        }
        if pass.z[m] > 0.0 {
            for u in 0..nu {
                pass.s[u][m] /= pass.z[m];
            }
        }
    }
    Ok(pass)
}

/// `L1(·|c,u,r)` from a pass, with its normalizer.
fn conditioned_listener(pass: &Pass, p: &[f64], u: usize) -> (Vec<f64>, f64) {
    let h: Vec<f64> = pass.s[u].iter().zip(p).map(|(s, p)| s * p).collect();
    let total: f64 = h.iter().sum();
    let l1 = h.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect();
    (l1, total)
}

fn passes_for(
    net: &FrNet,
    problem: &FrProblem,
    batch: &[PreparedSample],
) -> LearnResult<BTreeMap<(usize, usize), Pass>> {
    let mut passes = BTreeMap::new();
    for s in batch {
        for (r, &w) in s.posterior.iter().enumerate() {
            if w > 0.0 && !passes.contains_key(&(s.c, r)) {
                passes.insert((s.c, r), run_pass(net, problem, s.c, r)?);
            }
        }
    }
    Ok(passes)
}

/// Mean negative log-likelihood of the targets under the marginal listener.
pub fn data_loss(net: &FrNet, problem: &FrProblem, batch: &[PreparedSample]) -> LearnResult<f64> {
    let passes = passes_for(net, problem, batch)?;
    let mut total = 0.0;
    for (i, s) in batch.iter().enumerate() {
        let p = problem.meaning_prior.row(&[s.c])?.probs();
        let mut l1t = 0.0;
        for (r, &w) in s.posterior.iter().enumerate() {
            if w > 0.0 {
                l1t += w * conditioned_listener(&passes[&(s.c, r)], p, s.u).0[s.target];
            }
        }
        if l1t <= 0.0 {
            return Err(LearnError::NonFiniteLoss { sample: i });
        }
        total -= l1t.ln();
    }
    Ok(total / batch.len() as f64)
}

/// Training objective `data_loss + wd/2 · ‖θ‖²` and its gradient.
pub fn loss_and_grad(
    net: &FrNet,
    problem: &FrProblem,
    batch: &[PreparedSample],
    weight_decay: f64,
) -> LearnResult<(f64, FrNet)> {
    let (nu, nm) = (problem.utterances.len(), problem.meanings.len());
    let alpha = problem.alpha;
    let n = batch.len() as f64;
    let mut passes = passes_for(net, problem, batch)?;
    let mut loss = 0.0;

    for (i, s) in batch.iter().enumerate() {
        let p = problem.meaning_prior.row(&[s.c])?.probs();
        let q = problem.utterance_prior.row(&[s.c])?.probs();
        let active: Vec<(usize, f64)> = s.posterior.iter().copied().enumerate().filter(|(_, w)| *w > 0.0).collect();
        let conditioned: Vec<(Vec<f64>, f64)> =
            active.iter().map(|&(r, _)| conditioned_listener(&passes[&(s.c, r)], p, s.u)).collect();
        let l1t: f64 = active.iter().zip(&conditioned).map(|(&(_, w), (l1, _))| w * l1[s.target]).sum();
        if l1t <= 0.0 {
            return Err(LearnError::NonFiniteLoss { sample: i });
        }
        loss -= l1t.ln();

        // ∂loss/∂L1 is non-zero only at the target
        let e = -1.0 / (n * l1t);
        for (&(r, w), (l1r, total)) in active.iter().zip(&conditioned) {
            let pass = passes.get_mut(&(s.c, r)).expect("pass computed above");
            // L1r = h / Σh with h[m] = S[u*][m] p[m]
            let dl1r_t = w * e;
            let dh: Vec<f64> = (0..nm)
                .map(|m| {
                    let own = if m == s.target { dl1r_t } else { 0.0 };
                    (own - dl1r_t * l1r[s.target]) / total
                })
                .collect();
            // S[u][m] = g[u][m] / Z[m], only row u* receives gradient
            let mut dl0 = vec![vec![0.0; nm]; nu];
            for m in 0..nm {
                let ds = dh[m] * p[m];
                if ds == 0.0 || pass.z[m] <= 0.0 {
                    continue;
                }
                let su = pass.s[s.u][m];
                for u in 0..nu {
                    let dg = ds * ((u == s.u) as u8 as f64 - su) / pass.z[m];
                    let l0 = pass.l0[u][m];
                    // g = L0^α q
                    let dg_dl0 = if alpha == 1.0 {
                        q[u]
                    } else if l0 > 0.0 {
                        alpha * l0.powf(alpha - 1.0) * q[u]
                    } else {
                        0.0
                    };
                    dl0[u][m] += dg * dg_dl0;
                }
            }
            // L0[u][m] = f[u][m] p[m] / A[u]
            for u in 0..nu {
                if pass.a[u] <= 0.0 {
                    continue;
                }
                let inner: f64 = (0..nm).map(|j| dl0[u][j] * pass.l0[u][j]).sum();
                for m in 0..nm {
                    pass.df[u][m] += p[m] / pass.a[u] * (dl0[u][m] - inner);
                }
            }
        }
    }

    let mut grads = net.zeros_like();
    for pass in passes.values() {
        for u in 0..nu {
            net.backward(&pass.xs[u], &pass.hs[u], &pass.f[u], &pass.df[u], &mut grads);
        }
    }
    let mut objective = loss / n;
    if weight_decay != 0.0 {
        objective += 0.5 * weight_decay * net.params().map(|w| w * w).sum::<f64>();
        for (g, w) in grads.params_mut().zip(net.params()) {
            *g += weight_decay * w;
        }
    }
    Ok((objective, grads))
}

/// Adam with coupled (L2) weight decay folded into the gradient by the caller.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, params: usize) -> Self {
        Adam { lr, beta1, beta2, eps, m: vec![0.0; params], v: vec![0.0; params], t: 0 }
    }

    pub fn step(&mut self, net: &mut FrNet, grads: &FrNet) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (((w, g), m), v) in net.params_mut().zip(grads.params()).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *w -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrTrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Train/validation/test fractions.
    pub split: [f64; 3],
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for FrTrainConfig {
    fn default() -> Self {
        FrTrainConfig {
            hidden: 16,
            learning_rate: 0.001,
            weight_decay: 0.001,
            epochs: 500,
            split: [0.6, 0.2, 0.2],
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl FrTrainConfig {
    pub fn validate(&self) -> LearnResult<()> {
        if self.split.iter().any(|f| !(0.0..=1.0).contains(f)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(LearnError::InvalidConfig(format!("split fractions {:?} must sum to 1", self.split)));
        }
        if self.hidden == 0 {
            return Err(LearnError::InvalidConfig("hidden layer needs at least one unit".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(LearnError::InvalidConfig("learning rate and weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, then cut by the given fractions.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((n as f64) * fractions[0]).round() as usize;
    let n_val = (((n as f64) * fractions[1]).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let test = idx.split_off(n_train + n_val);
    let validation = idx.split_off(n_train);
    Split { train: idx, validation, test }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// The checkpoint with the lowest validation loss.
    pub net: FrNet,
    /// 0 when no update improved on the initial network.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub initial_train_loss: f64,
    pub history: Vec<EpochRecord>,
    pub split: Split,
    pub test_loss: Option<f64>,
}

/// Full-batch training with best-validation checkpointing.
pub fn train(config: &FrTrainConfig, dataset: &FrDataset) -> LearnResult<TrainOutcome> {
    config.validate()?;
    let split = split_indices(dataset.samples.len(), config.split, config.seed);
    if split.train.is_empty() {
        return Err(LearnError::EmptySplit("training"));
    }
    if split.validation.is_empty() {
        return Err(LearnError::EmptySplit("validation"));
    }
    let train_set = dataset.prepared(&split.train)?;
    let val_set = dataset.prepared(&split.validation)?;
    let problem = &dataset.problem;

    let mut net = problem.new_net(config.hidden, config.seed);
    let mut adam = Adam::new(config.learning_rate, config.beta1, config.beta2, config.eps, net.param_count());
    let initial_train_loss = data_loss(&net, problem, &train_set)?;
    let mut best = (net.clone(), 0, data_loss(&net, problem, &val_set)?);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let (_, grads) = loss_and_grad(&net, problem, &train_set, config.weight_decay)?;
        adam.step(&mut net, &grads);
        let train_loss = data_loss(&net, problem, &train_set)?;
        let val_loss = data_loss(&net, problem, &val_set)?;
        history.push(EpochRecord { epoch, train_loss, val_loss });
        if val_loss < best.2 {
            best = (net.clone(), epoch, val_loss);
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
    }

    let test_loss = if split.test.is_empty() { None } else { Some(data_loss(&best.0, problem, &dataset.prepared(&split.test)?)?) };
    Ok(TrainOutcome {
        net: best.0,
        best_epoch: best.1,
        best_val_loss: best.2,
        initial_train_loss,
        history,
        split,
        test_loss,
    })
}

/// Network weights plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub net: FrNet,
    pub config: FrTrainConfig,
    pub contexts: Vec<String>,
    pub utterances: Vec<String>,
    pub strategies: Vec<String>,
    pub meanings: Vec<String>,
}

impl Checkpoint {
    pub fn new(net: FrNet, config: FrTrainConfig, problem: &FrProblem) -> Self {
        Checkpoint {
            net,
            config,
            contexts: problem.contexts.labels().to_vec(),
            utterances: problem.utterances.labels().to_vec(),
            strategies: problem.strategies.labels().to_vec(),
            meanings: problem.meanings.labels().to_vec(),
        }
    }

    pub fn from_json(text: &str) -> LearnResult<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| LearnError::Checkpoint(e.to_string()))?;
        ck.net.check_shapes()?;
        let inputs = ck.contexts.len() + ck.utterances.len() + ck.strategies.len();
        if ck.net.inputs != inputs || ck.net.outputs != ck.meanings.len() {
            return Err(LearnError::Checkpoint("layer sizes do not match the recorded label spaces".into()));
        }
        Ok(ck)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

/// Samples whose targets are the argmax of the listener induced by `f_star`
/// under a point-mass posterior on each strategy, one per (c, u, r).
pub fn generate_samples(problem: &FrProblem, f_star: &StrategySet) -> LearnResult<Vec<FrSample>> {
    let model = Rsa2Model::new(f_star.clone(), problem.priors(), RsaConfig::new(problem.alpha)?)?;
    let mut out = Vec::new();
    for c in 0..problem.contexts.len() {
        for u in 0..problem.utterances.len() {
            for r in 0..problem.strategies.len() {
                let l1 = model.l1(c, u, r)?;
                out.push(FrSample { c, u, r: Some(r), target_m: l1.argmax() });
            }
        }
    }
    Ok(out)
}

/// Fraction of samples whose target is the argmax of the network's listener.
pub fn argmax_agreement(net: &FrNet, dataset: &FrDataset, indices: &[usize]) -> LearnResult<f64> {
    if indices.is_empty() {
        return Ok(0.0);
    }
    let model = dataset.problem.model(net)?;
    let mut hits = 0;
    for s in dataset.prepared(indices)? {
        let posterior = Categorical::from_weights(dataset.problem.strategies.clone(), s.posterior.clone())?;
        if model.l1_marginal(s.c, s.u, &posterior)?.argmax() == s.target {
            hits += 1;
        }
    }
    Ok(hits as f64 / indices.len() as f64)
}
