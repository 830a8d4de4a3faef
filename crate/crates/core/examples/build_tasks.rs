//! Turns one call site into a method-infill and a parameter-completion task,
//! then extracts the element back out of plausible model outputs.
//!
//! ```text
//! cargo run --example build_tasks
//! ```

use apimisuse::corpus::SourceFile;
use apimisuse::lang::Language;
use apimisuse::locator::locate;
use apimisuse::taskgen::{extract_element, gen_task, TaskKind, TaskOptions};

const SOURCE: &str = "\
import numpy as np

def normalise(xs):
    total = np.sum(xs, axis=0)
    return xs / total
";

fn main() {
    let file = SourceFile::new("demo", "normalise.py", Language::Python, SOURCE.to_string());
    let site = locate(&file).expect("parses").into_iter().next().expect("one call site");
    println!("site {} -> {} (arity {})", site.site_id, site.fqn, site.arity);

    for kind in [TaskKind::MethodInfill, TaskKind::ParamCompletion] {
        let task = gen_task(kind, &site, &file, &TaskOptions::default()).expect("task builds");
        assert_eq!(task.reconstruct(), &SOURCE[task.region.start()..task.region.end()]);
        println!("\n[{}] ground truth `{}`", kind.short(), task.ground_truth);
        println!("  statement: {}", task.statement_with(&task.ground_truth));

        let outputs: &[&str] = match kind {
            TaskKind::MethodInfill => &["sum", "  sum(xs", "nansum"],
            TaskKind::ParamCompletion => &["xs, axis=0)\n    return xs / total", "xs)", "xs, axis=0"],
        };
        for raw in outputs {
            match extract_element(raw, kind, Language::Python) {
                Ok(e) => println!("  {raw:?} -> {e:?}"),
                Err(err) => println!("  {raw:?} -> error: {err}"),
            }
        }
    }
}
