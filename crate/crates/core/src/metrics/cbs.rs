use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Maps tokens to vectors. Vectors for different calls must live in the same
/// space; shorter vectors are treated as zero-padded.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError>;
}

/// One-hot embedding over a vocabulary that grows as tokens are seen, so two
/// tokens have cosine similarity 1 if equal and 0 otherwise.
#[derive(Default)]
pub struct OneHotProvider {
    vocab: Mutex<HashMap<String, usize>>,
}

impl OneHotProvider {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EmbeddingProvider for OneHotProvider {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError> {
        let mut vocab = self.vocab.lock().map_err(|e| MetricError::ProviderFailure(e.to_string()))?;
        Ok(tokens
            .iter()
            .map(|t| {
                let next = vocab.len();
                let idx = *vocab.entry(t.clone()).or_insert(next);
                let mut v = vec![0.0; idx + 1];
                v[idx] = 1.0;
                v
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbsReport {
    pub precision: f64,
    pub recall: f64,
    pub f3: f64,
}

/// Recall-weighted harmonic mean `10PR / (9P + R)`.
pub fn f3(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        10.0 * precision * recall / (9.0 * precision + recall)
    } else {
        0.0
    }
}

fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>, MetricError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(MetricError::ProviderFailure("embedding is not normalizable".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean over `from` of the best cosine similarity against `to`.
fn greedy_match(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    if from.is_empty() || to.is_empty() {
        return 0.0;
    }
    let total: f64 = from.iter().map(|a| to.iter().map(|b| dot(a, b)).fold(f64::NEG_INFINITY, f64::max)).sum();
    total / from.len() as f64
}

pub fn codebertscore(
    candidate: &[String],
    reference: &[String],
    provider: &dyn EmbeddingProvider,
) -> Result<CbsReport, MetricError> {
    let embed = |tokens: &[String]| -> Result<Vec<Vec<f64>>, MetricError> {
        let vecs = provider.embed(tokens)?;
        if vecs.len() != tokens.len() {
            return Err(MetricError::ProviderFailure(format!(
                "provider returned {} vectors for {} tokens",
                vecs.len(),
                tokens.len()
            )));
        }
        vecs.into_iter().map(normalize).collect()
    };
    let cand = embed(candidate)?;
    let refs = embed(reference)?;
    let precision = greedy_match(&cand, &refs);
    let recall = greedy_match(&refs, &cand);
    Ok(CbsReport { precision, recall, f3: f3(precision, recall) })
}
