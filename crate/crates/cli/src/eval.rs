use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rsa2_core::data::{fixture_scenarios, load_scenarios, Scenario};
use rsa2_core::dist::{Categorical, LabelSpace, SpaceKind, SpaceRef};
use rsa2_core::eval::{mad, meaning_scores, rs_posterior_report, KeyedDistributions, MeaningScores};

use crate::error::{CliError, CliResult};
use crate::output::{read_distributions, read_level, STRATEGY_POSTERIORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Mad,
    MeaningScores,
    RsReport,
}

pub struct EvalArgs {
    pub pred: PathBuf,
    /// Human distributions for `mad`; scenario annotations otherwise.
    pub human: PathBuf,
    pub metric: Metric,
    pub level: String,
    pub csv: Option<PathBuf>,
}

/// Rebuilds every distribution over its labels in sorted order so
/// differently loaded files line up.
fn canonical(dists: KeyedDistributions) -> CliResult<KeyedDistributions> {
    dists
        .into_iter()
        .map(|(key, d)| {
            let mut cells: Vec<(String, f64)> = d.space().labels().iter().cloned().zip(d.probs().iter().copied()).collect();
            cells.sort_by(|a, b| a.0.cmp(&b.0));
            let space = LabelSpace::new(SpaceKind::Meaning, cells.iter().map(|c| c.0.clone()))?;
            Ok((key, Categorical::from_weights(space, cells.into_iter().map(|c| c.1).collect())?))
        })
        .collect()
}

fn scenarios(path: &Path) -> CliResult<Vec<Scenario>> {
    if path.as_os_str() == "scenarios" {
        return Ok(fixture_scenarios());
    }
    Ok(load_scenarios(path)?)
}

/// Looks up each prediction's scenario by context id and re-expresses the
/// distribution over `space(scenario)`.
fn align<'a>(
    items: &'a [Scenario],
    dists: &KeyedDistributions,
    space: impl Fn(&Scenario) -> SpaceRef,
) -> CliResult<Vec<(&'a Scenario, Categorical)>> {
    let by_id: BTreeMap<&str, &Scenario> = items.iter().map(|s| (s.id.as_str(), s)).collect();
    dists
        .iter()
        .map(|((id, _), d)| {
            let scenario = by_id
                .get(id.as_str())
                .ok_or_else(|| rsa2_core::data::DataError::KeyMismatch(format!("no scenario with id `{id}`")))?;
            let space = space(scenario);
            let weights = space
                .labels()
                .iter()
                .map(|l| d.prob_of(l))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| rsa2_core::data::DataError::KeyMismatch(format!("scenario `{id}`: {e}")))?;
            Ok((*scenario, Categorical::from_weights(space, weights)?))
        })
        .collect()
}

fn score_row(name: &str, s: &MeaningScores) -> Vec<String> {
    let f = |x: f64| format!("{x:.4}");
    vec![
        name.to_string(),
        s.n.to_string(),
        f(s.correct),
        f(s.incorrect),
        f(s.distractor),
        f(s.literal),
        f(s.nonliteral),
        f(s.overlap),
        f(s.nonsequitur),
    ]
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).expect("string write");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        std::iter::once(&self.header).chain(&self.rows).map(|r| r.join(",") + "\n").collect()
    }
}

pub fn evaluate(args: &EvalArgs) -> CliResult<Table> {
    match args.metric {
        Metric::Mad => {
            let pred = canonical(read_distributions(&args.pred, &args.level)?)?;
            let human = canonical(read_distributions(&args.human, &args.level)?)?;
            let value = mad(&pred, &human)?;
            let cells: usize = pred.values().map(Categorical::len).sum();
            Ok(Table {
                header: vec!["metric".into(), "pairs".into(), "cells".into(), "value".into()],
                rows: vec![vec!["mad".into(), pred.len().to_string(), cells.to_string(), format!("{value:.6}")]],
            })
        }
        Metric::MeaningScores => {
            let items = scenarios(&args.human)?;
            let pred = read_distributions(&args.pred, &args.level)?;
            let aligned = align(&items, &pred, Scenario::meaning_space)?;
            let pairs: Vec<(&Scenario, &Categorical)> = aligned.iter().map(|(s, d)| (*s, d)).collect();
            let t = meaning_scores(&pairs)?;
            let mut rows = vec![score_row("overall", &t.overall)];
            rows.extend(t.by_split.iter().map(|(k, v)| score_row(&format!("split:{}", label(k)), v)));
            rows.extend(t.by_intended.iter().map(|(k, v)| score_row(&format!("intended:{}", k.label()), v)));
            let header = ["group", "n", "correct", "incorrect", "distractor", "literal", "nonliteral", "overlap", "nonsequitur"];
            Ok(Table { header: header.iter().map(|s| s.to_string()).collect(), rows })
        }
        Metric::RsReport => {
            let items = scenarios(&args.human)?;
            let path = if args.pred.is_dir() { args.pred.join(STRATEGY_POSTERIORS) } else { args.pred.clone() };
            let posteriors = read_level(&path, "posterior")?;
            let first = posteriors
                .values()
                .next()
                .ok_or_else(|| CliError::Config(format!("{} holds no posteriors", path.display())))?;
            let strategies = LabelSpace::new(SpaceKind::Strategy, first.space().labels().iter().cloned())?;
            let aligned = align(&items, &posteriors, |_| strategies.clone())?;
            let pairs: Vec<(&Scenario, &Categorical)> = aligned.iter().map(|(s, d)| (*s, d)).collect();
            let report = rs_posterior_report(&pairs)?;
            let row = |name: String, v: &[f64]| {
                std::iter::once(name).chain(v.iter().map(|x| format!("{x:.4}"))).collect::<Vec<_>>()
            };
            let mut rows = vec![row("overall".into(), &report.overall)];
            rows.extend(report.by_split.iter().map(|(k, v)| row(format!("split:{}", label(k)), v)));
            rows.extend(report.by_intended.iter().map(|(k, v)| row(format!("intended:{}", k.label()), v)));
            let header = std::iter::once("group".to_string()).chain(report.strategies.iter().cloned()).collect();
            Ok(Table { header, rows })
        }
    }
}

fn label<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_value(value).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

pub fn execute(args: &EvalArgs) -> CliResult<()> {
    let table = evaluate(args)?;
    print!("{}", table.render());
    if let Some(path) = &args.csv {
        std::fs::write(path, table.to_csv()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}
