use std::path::Path;

use rsa2_core::data::{fixture_scenarios, load_scenarios, read_text, NumbersDataset, Scenario, WeatherDataset};
use rsa2_core::dist::{Categorical, ConditionalTable, LabelSpace, SpaceKind, SpaceRef};
use rsa2_core::eval::{ablate, meaning_scores, rs_posterior_report, KeyedDistributions};
use rsa2_core::llm::{collect_inputs, Ablation, LlmConfig, PosteriorSource};
use rsa2_core::provider::ProbabilityProvider;
use rsa2_core::qud::AffectWeatherModel;
use rsa2_core::rsa::{PriorSet, RsaConfig, SemanticLexicon, StandardRsa};
use rsa2_core::rsa2::{numbers_strategy_set, scale_irony_strategy_set, RhetoricalFunction, Rsa2Model, StrategySet};
use rsa2_core::rsc::{rsc_pipeline, RscConfig, RscReport};
use rsa2_core::ModelResult;
use serde_json::{json, Value};

use crate::config::{Config, ModelKind, StrategyPrior};
use crate::error::{CliError, CliResult};
use crate::output::{pretty, OutputDir, DISTRIBUTIONS, STRATEGY_POSTERIORS, SUMMARY};
use crate::provider;

pub enum Dataset {
    Numbers { data: NumbersDataset, meaning_prior: ConditionalTable },
    Weather(WeatherDataset),
    Toy { lexicon: SemanticLexicon, priors: PriorSet },
    Scenarios(Vec<Scenario>),
}

impl Dataset {
    pub fn name(&self) -> &'static str {
        match self {
            Dataset::Numbers { .. } => "numbers",
            Dataset::Weather(_) => "weather",
            Dataset::Toy { .. } => "toy",
            Dataset::Scenarios(_) => "scenarios",
        }
    }
}

fn parse_json(path: &Path) -> CliResult<Value> {
    serde_json::from_str(&read_text(path)?).map_err(|e| {
        rsa2_core::data::DataError::Parse { origin: path.display().to_string(), line: e.line(), message: e.to_string() }
            .into()
    })
}

fn schema(path: &Path, message: impl std::fmt::Display) -> CliError {
    rsa2_core::data::DataError::Schema(format!("{}: {message}", path.display())).into()
}

fn labels(value: &Value, key: &str, path: &Path) -> CliResult<Vec<String>> {
    serde_json::from_value(value.get(key).cloned().unwrap_or(Value::Null))
        .map_err(|_| schema(path, format!("`{key}` must be an array of strings")))
}

/// Optional `{label: weight}` map applied to every context; uniform when absent.
fn shared_prior(value: &Value, key: &str, contexts: &SpaceRef, over: &SpaceRef, path: &Path) -> CliResult<ConditionalTable> {
    let Some(map) = value.get(key) else {
        return Ok(ConditionalTable::uniform(vec![contexts.clone()], over.clone()));
    };
    let map = map.as_object().ok_or_else(|| schema(path, format!("`{key}` must be an object")))?;
    let mut weights = vec![0.0; over.len()];
    for (label, w) in map {
        let i = over.index_of(label).map_err(|e| schema(path, e))?;
        weights[i] = w.as_f64().ok_or_else(|| schema(path, format!("`{key}.{label}` is not a number")))?;
    }
    let row = Categorical::from_weights(over.clone(), weights).map_err(|e| schema(path, e))?;
    Ok(ConditionalTable::new(vec![contexts.clone()], over.clone(), vec![row; contexts.len()])?)
}

/// `{"meanings", "utterances", "denotation", "contexts"?, "meaning_prior"?, "utterance_prior"?}`.
pub fn parse_toy(value: &Value, path: &Path) -> CliResult<(SemanticLexicon, PriorSet)> {
    let meanings = LabelSpace::new(SpaceKind::Meaning, labels(value, "meanings", path)?).map_err(|e| schema(path, e))?;
    let utterances =
        LabelSpace::new(SpaceKind::Utterance, labels(value, "utterances", path)?).map_err(|e| schema(path, e))?;
    let contexts = match value.get("contexts") {
        Some(_) => labels(value, "contexts", path)?,
        None => vec!["default".to_string()],
    };
    let contexts = LabelSpace::new(SpaceKind::Context, contexts).map_err(|e| schema(path, e))?;
    let lexicon = SemanticLexicon::from_json(value, meanings.clone(), utterances.clone()).map_err(|e| schema(path, e))?;
    let priors = PriorSet::new(
        shared_prior(value, "meaning_prior", &contexts, &meanings, path)?,
        shared_prior(value, "utterance_prior", &contexts, &utterances, path)?,
        None,
    )
    .map_err(|e| schema(path, e))?;
    Ok((lexicon, priors))
}

pub fn load_dataset(config: &Config) -> CliResult<Dataset> {
    Ok(match config.dataset.as_str() {
        "numbers" => {
            let data = NumbersDataset::new();
            let meaning_prior = match &config.meaning_prior {
                Some(path) => data.meaning_prior_from_json(&parse_json(path)?)?,
                None => data.fixture_meaning_prior(),
            };
            Dataset::Numbers { data, meaning_prior }
        }
        "weather" => Dataset::Weather(WeatherDataset::fixture()),
        "scenarios" => Dataset::Scenarios(fixture_scenarios()),
        other => {
            let path = Path::new(other);
            if path.extension().is_some_and(|e| e == "jsonl") {
                Dataset::Scenarios(load_scenarios(path)?)
            } else {
                let value = parse_json(path)?;
                if value.get("denotation").is_some() {
                    let (lexicon, priors) = parse_toy(&value, path)?;
                    Dataset::Toy { lexicon, priors }
                } else {
                    Dataset::Weather(WeatherDataset::from_json(&value)?)
                }
            }
        }
    })
}

/// Literal lexicon pairing each meaning with the same-index utterance.
fn diagonal(meanings: &SpaceRef, utterances: &SpaceRef) -> ModelResult<SemanticLexicon> {
    let n = meanings.len().min(utterances.len());
    let den = (0..utterances.len()).map(|u| (0..meanings.len()).map(|m| m == u && m < n).collect()).collect();
    SemanticLexicon::new(meanings.clone(), utterances.clone(), den)
}

/// Listener outputs keyed by (context, utterance).
pub struct Levels {
    pub l0: KeyedDistributions,
    pub l1: KeyedDistributions,
}

fn collect<F>(contexts: &SpaceRef, utterances: &SpaceRef, mut f: F) -> CliResult<Levels>
where
    F: FnMut(usize, usize) -> CliResult<(Categorical, Categorical)>,
{
    let mut levels = Levels { l0: KeyedDistributions::new(), l1: KeyedDistributions::new() };
    for c in 0..contexts.len() {
        for u in 0..utterances.len() {
            let key = (contexts.label(c).to_string(), utterances.label(u).to_string());
            let (l0, l1) = f(c, u)?;
            levels.l0.insert(key.clone(), l0);
            levels.l1.insert(key, l1);
        }
    }
    Ok(levels)
}

fn unsupported(config: &Config, dataset: &Dataset, why: &str) -> CliError {
    CliError::Config(format!("model {:?} on the {} dataset: {why}", config.model, dataset.name()))
}

fn structured(config: &Config, dataset: &Dataset) -> CliResult<Levels> {
    let rsa_config = RsaConfig::new(config.alpha)?;
    let (lexicon, priors, strategies) = match dataset {
        Dataset::Numbers { data, meaning_prior } => {
            let priors = data.priors(meaning_prior.clone())?;
            let lexicon = diagonal(&data.meanings, &data.utterances)?;
            (lexicon, priors, numbers_strategy_set(&data.meanings, &data.utterances)?)
        }
        Dataset::Weather(w) => {
            let lexicon = diagonal(w.states(), &w.utterances)?;
            (lexicon, w.prior_set(), scale_irony_strategy_set(w.states(), &w.utterances)?)
        }
        Dataset::Toy { lexicon, priors } => {
            let literal = StrategySet::new(vec![RhetoricalFunction::from_lexicon("literal", lexicon)])?;
            (lexicon.clone(), priors.clone(), literal)
        }
        Dataset::Scenarios(_) => unreachable!("scenario datasets go through the provider"),
    };
    let priors = match config.ablate {
        Some(a) => ablate(&priors, a.into()),
        None => priors,
    };
    let (contexts, utterances) = (priors.contexts().clone(), priors.utterances().clone());
    match config.model {
        ModelKind::Rsa => {
            let model = StandardRsa::new(lexicon, priors, rsa_config)?;
            collect(&contexts, &utterances, |c, u| Ok((model.l0(c, u)?, model.l1(c, u)?)))
        }
        ModelKind::Rsa2 => {
            let table = match config.strategy_prior {
                StrategyPrior::Uniform => None,
                StrategyPrior::File => {
                    let path = config.strategy_prior_file.as_ref().expect("validated");
                    let value = parse_json(path)?;
                    let given = vec![contexts.clone(), utterances.clone()];
                    Some(ConditionalTable::from_json(&value, given, strategies.strategies().clone()).map_err(|e| schema(path, e))?)
                }
                StrategyPrior::Provider | StrategyPrior::Indicator => {
                    return Err(unsupported(config, dataset, "provider strategy posteriors need scenario data"))
                }
            };
            let model = Rsa2Model::new(strategies, priors.with_strategy_posterior(table)?, rsa_config)?;
            collect(&contexts, &utterances, |c, u| {
                let posterior = model.strategy_posterior(c, u)?;
                Ok((model.l0_marginal(c, u, &posterior)?, model.l1_marginal(c, u, &posterior)?))
            })
        }
        ModelKind::QudAffect => {
            let Dataset::Weather(w) = dataset else {
                return Err(unsupported(config, dataset, "the affect model needs weather priors"));
            };
            if config.ablate.is_some() {
                return Err(unsupported(config, dataset, "ablation is not defined for the affect model"));
            }
            let model = AffectWeatherModel::new(w.priors.clone(), rsa_config)?;
            let utterances = model.utterances().clone();
            collect(w.contexts(), &utterances, |c, u| Ok((model.l0_state(c, u)?, model.l1_state(c, u)?)))
        }
        ModelKind::Rsc => Err(unsupported(config, dataset, "clustering needs scenario data")),
    }
}

struct ScenarioRun {
    levels: Levels,
    strategy_posteriors: Option<KeyedDistributions>,
    reports: Vec<RscReport>,
}

fn llm_config(config: &Config) -> LlmConfig {
    LlmConfig {
        alpha: config.alpha,
        shuffles: config.shuffles,
        n_alts: config.alts,
        seed: config.seed,
        max_in_flight: config.max_in_flight,
        ..LlmConfig::default()
    }
}

pub fn rsc_config(config: &Config) -> RscConfig {
    RscConfig {
        k: config.k,
        n_alts: config.alts,
        n_init: config.n_init,
        alpha: config.alpha,
        shuffles: config.shuffles,
        seed: config.seed,
        max_in_flight: config.max_in_flight,
        meaning_prior: config.rsc_meaning_prior,
        ..RscConfig::default()
    }
}

fn from_map(space: &SpaceRef, map: &std::collections::BTreeMap<String, f64>) -> CliResult<Categorical> {
    let weights = space.labels().iter().map(|l| map.get(l).copied().unwrap_or(0.0)).collect();
    Ok(Categorical::from_weights(space.clone(), weights)?)
}

fn scenarios(config: &Config, dataset: &Dataset, items: &[Scenario], provider: &dyn ProbabilityProvider) -> CliResult<ScenarioRun> {
    let mut sorted: Vec<&Scenario> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut run = ScenarioRun {
        levels: Levels { l0: KeyedDistributions::new(), l1: KeyedDistributions::new() },
        strategy_posteriors: None,
        reports: Vec::new(),
    };
    let ablation = Ablation {
        uniform_meaning_prior: config.ablate == Some(crate::config::Ablate::MeaningPrior),
        uniform_utterance_prior: config.ablate == Some(crate::config::Ablate::UtterancePrior),
    };
    for scenario in sorted {
        log::info!("scenario {}", scenario.id);
        let key = (scenario.id.clone(), scenario.utterance.clone());
        let (l0, l1) = match config.model {
            ModelKind::Rsa => {
                let pair = collect_inputs(provider, scenario, &llm_config(config))?.rsa(config.alpha, ablation)?;
                (pair.l0, pair.l1)
            }
            ModelKind::Rsa2 => {
                let source = match config.strategy_prior {
                    StrategyPrior::Provider => PosteriorSource::Provider,
                    StrategyPrior::Indicator => PosteriorSource::Indicator,
                    StrategyPrior::Uniform => PosteriorSource::Uniform,
                    StrategyPrior::File => {
                        return Err(unsupported(config, dataset, "strategy prior files apply to structured datasets"))
                    }
                };
                let out = collect_inputs(provider, scenario, &llm_config(config))?.rsa2(config.alpha, source, ablation)?;
                run.strategy_posteriors.get_or_insert_with(KeyedDistributions::new).insert(key.clone(), out.posterior);
                (out.marginal.l0, out.marginal.l1)
            }
            ModelKind::Rsc => {
                if config.ablate.is_some() {
                    return Err(unsupported(config, dataset, "use rsc_meaning_prior = false for the prior ablation"));
                }
                let report = rsc_pipeline(provider, scenario, &rsc_config(config))?;
                let space = scenario.meaning_space();
                let pair = (from_map(&space, &report.l0)?, from_map(&space, &report.l1)?);
                run.reports.push(report);
                pair
            }
            ModelKind::QudAffect => return Err(unsupported(config, dataset, "the affect model needs weather priors")),
        };
        run.levels.l0.insert(key.clone(), l0);
        run.levels.l1.insert(key, l1);
    }
    Ok(run)
}

fn model_name(model: ModelKind) -> &'static str {
    match model {
        ModelKind::Rsa => "rsa",
        ModelKind::Rsa2 => "rsa2",
        ModelKind::QudAffect => "qud-affect",
        ModelKind::Rsc => "rsc",
    }
}

fn scenario_summary(items: &[Scenario], run: &ScenarioRun) -> CliResult<Value> {
    let by_id: std::collections::BTreeMap<&str, &Scenario> = items.iter().map(|s| (s.id.as_str(), s)).collect();
    let scores = |dists: &KeyedDistributions| -> CliResult<Value> {
        let pairs: Vec<(&Scenario, &Categorical)> = dists.iter().map(|((id, _), d)| (by_id[id.as_str()], d)).collect();
        Ok(serde_json::to_value(meaning_scores(&pairs)?).expect("scores serialize"))
    };
    let mut summary = json!({
        "scenarios": items.len(),
        "meaning_scores": { "l0": scores(&run.levels.l0)?, "l1": scores(&run.levels.l1)? },
    });
    if let Some(posteriors) = &run.strategy_posteriors {
        let pairs: Vec<(&Scenario, &Categorical)> =
            posteriors.iter().map(|((id, _), d)| (by_id[id.as_str()], d)).collect();
        summary["strategy_posteriors"] = serde_json::to_value(rs_posterior_report(&pairs)?).expect("report serializes");
    }
    if !run.reports.is_empty() {
        summary["clusters"] = run.reports.iter().map(|r| (r.scenario.clone(), json!(r.k))).collect::<serde_json::Map<_, _>>().into();
    }
    Ok(summary)
}

pub fn execute(config: &Config) -> CliResult<()> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    let out = OutputDir::create(&config.output)?;
    out.write_config(config)?;
    let name = model_name(config.model);
    let mut summary = json!({
        "model": name,
        "dataset": dataset.name(),
        "alpha": config.alpha,
        "seed": config.seed,
    });
    let levels = match &dataset {
        Dataset::Scenarios(items) => {
            let provider = provider::build(config)?;
            summary["provider"] = json!(provider.name());
            let run = scenarios(config, &dataset, items, provider.as_ref())?;
            for report in &run.reports {
                let file = format!("rsc_{}.json", report.scenario);
                let path = out.write(&file, &report.to_json_pretty())?;
                let back: RscReport = serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?)
                    .map_err(|e| CliError::Output { path: path.display().to_string(), message: e.to_string() })?;
                if &back != report {
                    return Err(CliError::Output { path: path.display().to_string(), message: "report differs on re-load".into() });
                }
            }
            if let Some(posteriors) = &run.strategy_posteriors {
                out.write_levels(STRATEGY_POSTERIORS, name, &[("posterior", posteriors)], false)?;
            }
            let extra = scenario_summary(items, &run)?;
            for (k, v) in extra.as_object().expect("object") {
                summary[k] = v.clone();
            }
            run.levels
        }
        _ => {
            let levels = structured(config, &dataset)?;
            summary["pairs"] = json!(levels.l1.len());
            levels
        }
    };
    out.write_levels(DISTRIBUTIONS, name, &[("l0", &levels.l0), ("l1", &levels.l1)], true)?;
    out.write_json(SUMMARY, &summary)?;
    print!("{}", pretty(&summary));
    Ok(())
}
