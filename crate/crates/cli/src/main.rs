mod config;
mod error;
mod eval;
mod output;
mod probe;
mod provider;
mod run;
mod train;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Ablate, Config, ModelKind, ProviderKind, StrategyPrior};
use error::CliResult;

#[derive(Parser)]
#[command(name = "rsa2", version, about = "Run RSA and strategy-aware RSA listeners on finite datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute listener distributions for every (context, utterance) pair.
    Run(Overrides),
    /// Score predictions against human data or scenario annotations.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        /// Reference distributions (mad) or scenario file (`scenarios` for the bundled set).
        #[arg(long)]
        human: PathBuf,
        #[arg(long, value_enum)]
        metric: eval::Metric,
        #[arg(long, default_value = "l1")]
        level: String,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train the rhetorical-function network on weather data.
    TrainFr(Overrides),
    /// Cluster generated alternatives into strategy proxies.
    Rsc(Overrides),
    /// Send one raw provider request (JSON) and print the response.
    Probe {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        request: String,
    },
}

/// Flags override values from `--config`; unset flags keep them.
#[derive(Args, Default)]
struct Overrides {
    /// TOML file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// numbers, weather, scenarios, or a data file.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    meaning_prior: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    strategy_prior: Option<StrategyPrior>,
    #[arg(long)]
    strategy_prior_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    ablate: Option<Ablate>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    mock_fixture: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    shuffles: Option<usize>,
    #[arg(long)]
    alts: Option<usize>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    /// Use a uniform meaning prior in the clustered listener.
    #[arg(long)]
    no_meaning_prior: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    samples: Option<PathBuf>,
}

impl Overrides {
    /// `default_dataset` replaces the built-in default when neither the
    /// file nor the flags pick one.
    fn resolve(self, default_dataset: Option<&str>) -> CliResult<Config> {
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let (Some(d), None) = (default_dataset, &self.dataset) {
            if c.dataset == Config::default().dataset {
                c.dataset = d.to_string();
            }
        }
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(model => model, dataset => dataset, alpha => alpha, strategy_prior => strategy_prior,
             provider => provider, seed => seed, out => output, shuffles => shuffles, alts => alts,
             max_in_flight => max_in_flight, k => k, n_init => n_init, epochs => epochs, split => split,
             hidden => hidden, lr => learning_rate, wd => weight_decay);
        macro_rules! set_opt {
            ($($field:ident),*) => { $(if self.$field.is_some() { c.$field = self.$field; })* };
        }
        set_opt!(meaning_prior, strategy_prior_file, ablate, cache, mock_fixture, samples);
        if self.no_meaning_prior {
            c.rsc_meaning_prior = false;
        }
        Ok(c)
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(o) => run::execute(&o.resolve(None)?),
        Command::Rsc(o) => {
            let mut config = o.resolve(Some("scenarios"))?;
            config.model = ModelKind::Rsc;
            run::execute(&config)
        }
        Command::TrainFr(o) => train::execute(&o.resolve(Some("weather"))?),
        Command::Eval { pred, human, metric, level, csv } => {
            eval::execute(&eval::EvalArgs { pred, human, metric, level, csv })
        }
        Command::Probe { overrides, request } => probe::execute(&overrides.resolve(None)?, &request),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
