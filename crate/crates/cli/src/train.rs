use std::fmt::Write as _;
use std::path::Path;

use rsa2_core::data::{read_text, WeatherDataset};
use rsa2_core::dist::ConditionalTable;
use rsa2_core::learn::{argmax_agreement, generate_samples, train, Checkpoint, FrDataset, FrProblem, FrTrainConfig};
use rsa2_core::rsa2::scale_irony_strategy_set;
use serde_json::json;

use crate::config::{Config, StrategyPrior};
use crate::error::{CliError, CliResult};
use crate::output::{pretty, OutputDir, SUMMARY};

pub const CHECKPOINT: &str = "checkpoint.json";
pub const HISTORY: &str = "history.csv";

fn weather(config: &Config) -> CliResult<WeatherDataset> {
    match config.dataset.as_str() {
        "weather" => Ok(WeatherDataset::fixture()),
        "numbers" | "scenarios" => {
            Err(CliError::Config(format!("train-fr needs weather priors, not the {} dataset", config.dataset)))
        }
        path => Ok(WeatherDataset::load(Path::new(path))?),
    }
}

pub fn execute(config: &Config) -> CliResult<()> {
    config.validate()?;
    let w = weather(config)?;
    let problem = FrProblem::weather(&w.priors, config.alpha)?;
    let samples = match &config.samples {
        Some(path) => FrDataset::parse_samples(&read_text(path)?)?,
        None => generate_samples(&problem, &scale_irony_strategy_set(&problem.meanings, &problem.utterances)?)?,
    };
    let posterior = match config.strategy_prior {
        StrategyPrior::Uniform => None,
        StrategyPrior::File => {
            let path = config.strategy_prior_file.as_ref().expect("validated");
            let value: serde_json::Value = serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let given = vec![problem.contexts.clone(), problem.utterances.clone()];
            Some(ConditionalTable::from_json(&value, given, problem.strategies.clone())?)
        }
        other => return Err(CliError::Config(format!("train-fr does not take a {other:?} strategy prior"))),
    };
    let dataset = FrDataset::new(problem, samples, posterior)?;
    let train_config = FrTrainConfig {
        hidden: config.hidden,
        learning_rate: config.learning_rate,
        weight_decay: config.weight_decay,
        epochs: config.epochs,
        split: config.split_fractions()?,
        seed: config.seed,
        ..FrTrainConfig::default()
    };
    let outcome = train(&train_config, &dataset)?;

    let out = OutputDir::create(&config.output)?;
    out.write_config(config)?;
    let checkpoint = Checkpoint::new(outcome.net.clone(), train_config, &dataset.problem);
    let path = out.write(CHECKPOINT, &checkpoint.to_json())?;
    let back = Checkpoint::from_json(&read_text(&path)?)?;
    if back != checkpoint {
        return Err(CliError::Output { path: path.display().to_string(), message: "checkpoint differs on re-load".into() });
    }
    let mut history = String::from("epoch,train_loss,val_loss\n");
    for r in &outcome.history {
        writeln!(history, "{},{:?},{:?}", r.epoch, r.train_loss, r.val_loss).expect("string write");
    }
    let path = out.write(HISTORY, &history)?;
    let rows = read_text(&path)?.lines().count();
    if rows != outcome.history.len() + 1 {
        return Err(CliError::Output { path: path.display().to_string(), message: format!("{rows} lines read back") });
    }

    let summary = json!({
        "samples": dataset.samples.len(),
        "split": {
            "train": outcome.split.train.len(),
            "validation": outcome.split.validation.len(),
            "test": outcome.split.test.len(),
        },
        "epochs": config.epochs,
        "initial_train_loss": outcome.initial_train_loss,
        "final_train_loss": outcome.history.last().map(|r| r.train_loss),
        "best_epoch": outcome.best_epoch,
        "best_val_loss": outcome.best_val_loss,
        "test_loss": outcome.test_loss,
        "train_agreement": argmax_agreement(&outcome.net, &dataset, &outcome.split.train)?,
    });
    out.write_json(SUMMARY, &summary)?;
    print!("{}", pretty(&summary));
    Ok(())
}
