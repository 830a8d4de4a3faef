//! Property tests for the invariants the library promises.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use apimisuse::annotate::round_half_up;
use apimisuse::corpus::SourceFile;
use apimisuse::drfix::{parse_detect, DetectOutcome};
use apimisuse::lang::Language;
use apimisuse::locator::{dedup_sample, locate};
use apimisuse::metrics::{
    bleu, codebertscore, cohens_kappa, em_element, f3, refusal_rate, OneHotProvider, RefusalDecision,
};
use apimisuse::report::overlap_partition;
use apimisuse::taskgen::{extract_element, gen_task, TaskKind, TaskOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tokens(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..16, 1..=max)
}

/// A Python file whose calls go through four imported modules.
fn synthetic_python(calls: &[(u8, u8, u8)]) -> String {
    let mut src = String::from("import mod0\nimport mod1\nimport mod2\nimport mod3\n\n\ndef run(a, b, c):\n");
    for (m, f, arity) in calls {
        let args = ["a", "b", "c"][..*arity as usize].join(", ");
        src.push_str(&format!("    mod{m}.fn{f}({args})\n"));
    }
    src.push_str("    return a\n");
    src
}

fn calls() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
    prop::collection::vec((0u8..4, 0u8..3, 0u8..4), 1..24)
}

proptest! {
    #[test]
    fn bleu_matches_counting_oracle(c in tokens(40), r in tokens(40)) {
        let got = bleu(&c, &r).unwrap().score;
        prop_assert!((got - common::bleu_oracle(&c, &r)).abs() < 1e-9);
    }

    #[test]
    fn bleu_is_bounded_and_perfect_on_identity(x in tokens(64)) {
        let s = bleu(&x, &x).unwrap().score;
        if x.len() >= 4 {
            prop_assert!((s - 100.0).abs() < 1e-9);
        } else {
            prop_assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn bleu_prefix_scores_equal_brevity_penalty(x in tokens(64), cut in 4usize..64) {
        prop_assume!(cut <= x.len());
        let s = bleu(&x[..cut], &x).unwrap().score;
        let bp = (1.0 - x.len() as f64 / cut as f64).exp();
        prop_assert!((s - 100.0 * bp).abs() < 1e-9);
    }

    #[test]
    fn cbs_precision_is_membership(c in tokens(30), r in tokens(30)) {
        let c: Vec<String> = c.iter().map(|t| format!("t{t}")).collect();
        let r: Vec<String> = r.iter().map(|t| format!("t{t}")).collect();
        let rep = codebertscore(&c, &r, &OneHotProvider::new()).unwrap();
        prop_assert_eq!(rep.precision, common::membership_precision(&c, &r));
        prop_assert_eq!(rep.recall, common::membership_precision(&r, &c));
        prop_assert!(rep.f3 >= rep.precision.min(rep.recall) - 1e-12);
        prop_assert!(rep.f3 <= rep.precision.max(rep.recall) + 1e-12);
    }

    #[test]
    fn f3_lies_between_its_inputs(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
        let v = f3(p, r);
        prop_assert!(v >= p.min(r) - 1e-12 && v <= p.max(r) + 1e-12);
    }

    #[test]
    fn em_ignores_layout_and_catches_renames(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = common::random_element(&mut rng);
        let text = e.text();
        prop_assert!(em_element(&common::relayout(&e, &mut rng), &text, e.kind, e.language));
        prop_assert!(!em_element(&common::rename(&e, &mut rng), &text, e.kind, e.language));
    }

    #[test]
    fn dedup_leaves_one_site_per_signature(files in prop::collection::vec(calls(), 1..4), seed in any::<u64>()) {
        let mut sites = Vec::new();
        for (i, c) in files.iter().enumerate() {
            let f = SourceFile::new("synthetic", &format!("f{i}.py"), Language::Python, synthetic_python(c));
            sites.extend(locate(&f).unwrap());
        }
        let kept = dedup_sample(&sites, usize::MAX, seed);
        let mut groups: BTreeMap<_, usize> = BTreeMap::new();
        for s in &kept {
            *groups.entry(s.signature_key()).or_default() += 1;
        }
        prop_assert!(groups.values().all(|&n| n == 1));
        let all: BTreeSet<_> = sites.iter().filter(|s| s.is_resolved()).map(|s| s.signature_key()).collect();
        prop_assert_eq!(groups.keys().cloned().collect::<BTreeSet<_>>(), all);
        prop_assert_eq!(&dedup_sample(&sites, usize::MAX, seed), &kept);
    }

    #[test]
    fn dedup_respects_cap(c in calls(), cap in 0usize..10, seed in any::<u64>()) {
        let f = SourceFile::new("synthetic", "f.py", Language::Python, synthetic_python(&c));
        let sites = locate(&f).unwrap();
        let kept = dedup_sample(&sites, cap, seed);
        prop_assert!(kept.len() <= cap);
        prop_assert!(kept.iter().all(|k| sites.contains(k)));
    }

    #[test]
    fn masking_round_trips(c in calls()) {
        let src = synthetic_python(&c);
        let f = SourceFile::new("synthetic", "f.py", Language::Python, src.clone());
        for site in locate(&f).unwrap() {
            for kind in [TaskKind::MethodInfill, TaskKind::ParamCompletion] {
                let t = gen_task(kind, &site, &f, &TaskOptions::default()).unwrap();
                prop_assert_eq!(t.reconstruct(), &src[t.region.start()..t.region.end()]);
                let raw = format!("{}{}", t.ground_truth, t.suffix);
                prop_assert_eq!(extract_element(&raw, kind, Language::Python).unwrap(), t.ground_truth.clone());
            }
        }
    }

    #[test]
    fn refusal_rate_ignores_order(mut d in prop::collection::vec((any::<bool>(), any::<bool>()), 1..50), seed in any::<u64>()) {
        d.push((true, false));
        let decisions: Vec<RefusalDecision> = d.iter().map(|&(c, n)| RefusalDecision { is_clean: c, model_said_no_issue: n }).collect();
        let mut shuffled = decisions.clone();
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(refusal_rate(&decisions).unwrap(), refusal_rate(&shuffled).unwrap());
    }

    #[test]
    fn kappa_is_symmetric_and_one_on_self(pairs in prop::collection::vec((0u8..4, 0u8..4), 2..60)) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        if let (Ok(x), Ok(y)) = (cohens_kappa(&a, &b), cohens_kappa(&b, &a)) {
            prop_assert!((x.kappa - y.kappa).abs() < 1e-12);
            prop_assert!(x.kappa <= 1.0 + 1e-12);
        }
        if a.iter().collect::<BTreeSet<_>>().len() > 1 {
            prop_assert!((cohens_kappa(&a, &a).unwrap().kappa - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_partition_inverts_region_counts(r in prop::array::uniform7(0usize..200)) {
        let [a, b, c] = common::sets_from_regions(r);
        let p = overlap_partition(&a, &b, &c);
        prop_assert_eq!([p.a_only, p.b_only, p.c_only, p.ab, p.ac, p.bc, p.abc], r);
        prop_assert_eq!(p.union(), r.iter().sum::<usize>());
        prop_assert_eq!(p.size_a(), a.len());
    }

    #[test]
    fn round_half_up_matches_decimal_rounding(tenths in 0u32..100_000) {
        let expected = (tenths / 10 + u32::from(tenths % 10 >= 5)) as usize;
        prop_assert_eq!(round_half_up(f64::from(tenths) / 10.0), expected);
    }

    #[test]
    fn detect_parsing_finds_named_category(pad in "[a-z ]{0,20}", i in 0usize..4) {
        let cat = apimisuse::annotate::MisuseCategory::MISUSES[i];
        let raw = format!("{pad} {}: {pad}", cat.name());
        prop_assume!(!raw.to_ascii_lowercase().contains("no issue"));
        prop_assume!(apimisuse::annotate::MisuseCategory::MISUSES[..i].iter().all(|c| !raw.to_ascii_lowercase().contains(&c.name().to_ascii_lowercase())));
        prop_assert_eq!(parse_detect(&raw).unwrap(), DetectOutcome::Misuse(cat));
        prop_assert_eq!(parse_detect(&format!("{pad} No Issue")).unwrap(), DetectOutcome::Refusal);
    }
}
