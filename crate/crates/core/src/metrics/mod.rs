//! Completion metrics: BLEU, CodeBERTScore-F3, AST exact match, refusal rate
//! and Cohen's kappa for annotator agreement.

mod agreement;
mod bleu;
mod cbs;
mod em;

pub use agreement::{cohens_kappa, refusal_rate, AgreementReport, RefusalDecision};
pub use bleu::{bleu, bleu_with, BleuReport, Smoothing, BLEU_ORDER};
pub use cbs::{codebertscore, f3, CbsReport, EmbeddingProvider, OneHotProvider};
pub use em::{em_batch, em_element, EmBatchReport};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("reference token list is empty")]
    EmptyReference,
    #[error("embedding provider failed: {0}")]
    ProviderFailure(String),
    #[error("no misuse-free samples to compute a refusal rate over")]
    NoCleanSamples,
    #[error("label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label lists are empty")]
    EmptyLabels,
    #[error("expected agreement is 1; kappa is undefined")]
    DegenerateMarginals,
}
