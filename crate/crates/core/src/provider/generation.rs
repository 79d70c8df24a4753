use serde::{Deserialize, Serialize};

use super::{ProbabilityProvider, ProviderError, ProviderResult};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationQuery {
    /// Scenario text ending at the opening quotation mark.
    pub prefix: String,
    pub n: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl GenerationQuery {
    pub fn new(prefix: impl Into<String>) -> Self {
        GenerationQuery { prefix: prefix.into(), n: 50, temperature: 1.0, seed: 0 }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub utterance: String,
    pub loglik: f64,
}

/// Cuts a continuation at its first closing quote (straight or curly) and
/// trims whitespace.
pub fn truncate_at_quote(text: &str) -> &str {
    let end = text.find(['"', '\u{201d}']).unwrap_or(text.len());
    text[..end].trim()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Samples `n` continuations, truncates them, and merges duplicates.
///
/// Duplicate strings keep their first-seen position; their log-likelihoods
/// are combined with log-sum-exp, so the merged string carries the total
/// probability of every sample that produced it.
pub fn generate_alternatives<P: ProbabilityProvider + ?Sized>(
    provider: &P,
    query: &GenerationQuery,
) -> ProviderResult<Vec<Alternative>> {
    if query.n == 0 {
        return Err(ProviderError::Protocol("generation count must be at least 1".into()));
    }
    let raw = provider.generate(&query.prefix, query.n, query.temperature, query.seed)?;
    let mut out: Vec<Alternative> = Vec::new();
    for item in raw {
        let text = truncate_at_quote(&item.text);
        if text.is_empty() || !item.loglik.is_finite() {
            continue;
        }
        match out.iter_mut().find(|a| a.utterance == text) {
            Some(existing) => existing.loglik = log_add_exp(existing.loglik, item.loglik),
            None => out.push(Alternative { utterance: text.to_string(), loglik: item.loglik }),
        }
    }
    if out.is_empty() {
        return Err(ProviderError::EmptyGeneration);
    }
    Ok(out)
}

/// Utterance prior over the returned set: softmax of the log-likelihoods.
pub fn softmax_prior(logliks: &[f64]) -> Vec<f64> {
    let max = logliks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logliks.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation() {
        assert_eq!(truncate_at_quote(" Great job.\" she said"), "Great job.");
        assert_eq!(truncate_at_quote("No quote here "), "No quote here");
        assert_eq!(truncate_at_quote("Curly\u{201d} tail"), "Curly");
        assert_eq!(truncate_at_quote("\" leading"), "");
    }

    #[test]
    fn softmax_of_equal_logliks_is_uniform() {
        assert_eq!(softmax_prior(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax_prior(&[-1000.0, -1001.0]);
        assert!((p[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn log_add_exp_matches_direct_sum() {
        let direct = ((-2.0f64).exp() + (-3.5f64).exp()).ln();
        assert!((log_add_exp(-2.0, -3.5) - direct).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -1.0), -1.0);
    }
}
