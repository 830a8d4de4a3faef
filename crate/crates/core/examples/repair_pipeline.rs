//! Runs the three repair pipelines over the bundled snippets against the
//! recorded repair model, then scores each repair against its reference.
//!
//! ```text
//! cargo run --example repair_pipeline
//! ```

use std::path::Path;
use std::sync::Arc;

use apimisuse::drfix::{Pipeline, PipelineVariant, RepairInput, TemplatePack};
use apimisuse::jsonl;
use apimisuse::metrics::{refusal_rate, OneHotProvider, RefusalDecision};
use apimisuse::modelgw::{Gateway, GatewayLimits, GenParams, ReplayBackend, ReplayStore};
use apimisuse::score::{score_repairs, ScoreOptions};

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/fixtures");
    let inputs: Vec<RepairInput> = jsonl::read(&fixtures.join("drfix_snippets.jsonl")).unwrap();
    let store = Arc::new(ReplayStore::open(&ReplayStore::path_for(&fixtures, "repairer")).unwrap());
    let gateway = Gateway::new(Arc::new(ReplayBackend::strict("repairer", store)), GatewayLimits::default());
    let pack = TemplatePack::builtin();
    let pipeline = Pipeline { gateway: &gateway, pack: &pack, model: "repairer".into(), params: GenParams::repair() };

    for variant in PipelineVariant::ALL {
        let traces: Vec<_> = inputs.iter().map(|i| pipeline.run(i, variant).expect("recorded")).collect();
        // Clean snippets are those whose reference is the snippet itself.
        let decisions: Vec<RefusalDecision> = inputs
            .iter()
            .zip(&traces)
            .map(|(i, t)| RefusalDecision {
                is_clean: i.reference.as_deref() == Some(&i.snippet),
                model_said_no_issue: t.refused,
            })
            .collect();
        let scored =
            score_repairs(&inputs, &traces, "repairer", &ScoreOptions::default(), &OneHotProvider::new()).unwrap();
        let fixed = scored.iter().filter(|s| s.em).count();
        let requests: u32 = traces.iter().map(|t| t.requests_made).sum();
        println!(
            "{:<12} exact repairs {fixed:>2}/{}  refusal rate {:>5.1}%  requests {requests}",
            variant.to_string(),
            scored.len(),
            refusal_rate(&decisions).unwrap()
        );
    }

    let full = pipeline.run(&inputs[0], PipelineVariant::Full).unwrap();
    println!(
        "\n{} detected {:?}\n--- before\n{}--- after\n{}",
        full.task_id, full.detected_category, inputs[0].snippet, full.repaired_code
    );
}
