use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::MetricError;

pub const BLEU_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Any zero n-gram precision makes the score zero.
    #[default]
    None,
    /// `(matches + 1) / (total + 1)` at every order.
    AddOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// 0..=100.
    pub score: f64,
    pub precisions: [f64; BLEU_ORDER],
    pub weights: [f64; BLEU_ORDER],
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

pub fn bleu<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Result<BleuReport, MetricError> {
    bleu_with(candidate, reference, Smoothing::None)
}

/// Sentence BLEU with clipped n-gram counts up to 4-grams, uniform weights,
/// and brevity penalty `exp(1 - r/c)` when the candidate is not longer than
/// the reference.
pub fn bleu_with<T: Eq + Hash>(
    candidate: &[T],
    reference: &[T],
    smoothing: Smoothing,
) -> Result<BleuReport, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let weights = [1.0 / BLEU_ORDER as f64; BLEU_ORDER];
    let mut precisions = [0.0; BLEU_ORDER];
    for n in 1..=BLEU_ORDER {
        let (matched, total) = clipped_matches(candidate, reference, n);
        precisions[n - 1] = match smoothing {
            Smoothing::None if total == 0 => 0.0,
            Smoothing::None => matched as f64 / total as f64,
            Smoothing::AddOne => (matched + 1) as f64 / (total + 1) as f64,
        };
    }
    let (c, r) = (candidate.len(), reference.len());
    let brevity_penalty = if c > r {
        1.0
    } else if c == 0 {
        0.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    let score = if precisions.contains(&0.0) || brevity_penalty == 0.0 {
        0.0
    } else {
        let log_sum: f64 = weights.iter().zip(&precisions).map(|(w, p)| w * p.ln()).sum();
        100.0 * brevity_penalty * log_sum.exp()
    };
    Ok(BleuReport { score, precisions, weights, brevity_penalty, candidate_len: c, reference_len: r })
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// (clipped matches, candidate n-gram total) at order `n`.
fn clipped_matches<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let total = candidate.len().saturating_sub(n - 1);
    let matched = cand.iter().map(|(g, &k)| k.min(refs.get(g).copied().unwrap_or(0))).sum();
    (matched, total)
}
