//! Build API-usage completion benchmarks from Python and Java source, score
//! model completions, and repair API misuse with a staged prompting pipeline.

pub mod annotate;
pub mod cli;
pub mod corpus;
pub mod drfix;
pub mod jsonl;
pub mod lang;
pub mod locator;
pub mod metrics;
pub mod modelgw;
pub mod report;
pub mod score;
pub mod taskgen;
