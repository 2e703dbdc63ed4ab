mod common;

use std::collections::{BTreeMap, HashMap};

use common::*;
use fulfil_core::dsl::run_script;
use fulfil_lm::taskgen::*;
use fulfil_lm::templates::{fill, fill_with_spans, Category, TaskTemplate};
use fulfil_lm::TemplateLibrary;
use proptest::prelude::*;
use rand::Rng;

fn tiny_library(n: usize) -> TemplateLibrary {
    let templates = (0..n)
        .map(|i| TaskTemplate {
            task_id: format!("task{i:02}"),
            title: String::new(),
            category: Category::DataExtraction,
            query_variants: vec![format!("question {i} about {{X}}"), format!("variant {i} of {{X}}")],
            gold_snippet: "logger.log('{X}')".into(),
            slot_domains: BTreeMap::from([("X".into(), vec!["a1".into(), "b2".into()])]),
            slot_patterns: BTreeMap::new(),
            in_domain: true,
        })
        .collect();
    TemplateLibrary::new(templates).unwrap()
}

/// Smallest k with k / (n + k) >= f, found by counting up.
fn ood_oracle(n: usize, f: f64) -> usize {
    (0..).find(|&k| k as f64 >= f * (n + k) as f64 - 1e-9).unwrap()
}

#[test]
fn fifty_templates_thousand_shots_four_percent() {
    let lib = tiny_library(50);
    let pool = ood_pool();
    let records = generate_dataset(&lib, &pool, 1000, 0.04, &PerturbationConfig::clean(3)).unwrap();
    let n_in = records.iter().filter(|r| r.in_domain).count();
    let n_ood = records.len() - n_in;
    assert_eq!(n_in, 50_000);
    assert_eq!(n_ood, ood_oracle(50_000, 0.04));
    assert_eq!(n_ood, 2084);
    assert!(records.iter().all(DatasetRecord::is_consistent));
}

#[test]
fn ood_count_matches_enumeration() {
    for n in [0, 1, 7, 100, 280, 999, 5000] {
        for f in [0.0, 0.01, 0.03, 0.04, 0.05, 0.2, 0.5, 0.9] {
            assert_eq!(ood_count(n, f), ood_oracle(n, f), "n={n} f={f}");
        }
    }
}

#[test]
fn same_seed_same_bytes() {
    let lib = library();
    let pool = ood_pool();
    let cfg = PerturbationConfig {
        typo_rate: 0.05,
        distraction_phrases: DEFAULT_DISTRACTIONS.iter().map(|s| s.to_string()).collect(),
        distraction_rate: 0.5,
        seed: 11,
    };
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    write_jsonl(&a, &generate_dataset(&lib, &pool, 15, 0.04, &cfg).unwrap()).unwrap();
    write_jsonl(&b, &generate_dataset(&lib, &pool, 15, 0.04, &cfg).unwrap()).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let other = PerturbationConfig { seed: 12, ..cfg };
    assert_ne!(generate_dataset(&lib, &pool, 15, 0.04, &other).unwrap(), read_jsonl::<DatasetRecord>(&a).unwrap());
}

#[test]
fn unperturbed_single_shot_is_the_filled_variant() {
    let lib = library();
    let records = generate_dataset(&lib, &[], 1, 0.0, &PerturbationConfig::clean(5)).unwrap();
    assert_eq!(records.len(), lib.len());
    for (r, t) in records.iter().zip(lib.templates()) {
        assert_eq!(r.task_id, t.task_id);
        assert_eq!(r.query, fill(&t.query_variants[0], &r.slots));
        assert_eq!(r.gold_snippet.as_deref(), Some(fill(&t.gold_snippet, &r.slots).as_str()));
        for (slot, value) in &r.slots {
            assert!(t.slot_domains[slot].contains(value));
        }
    }
}

#[test]
fn coverage_per_template_and_variant() {
    let lib = library();
    let shots = 20;
    let records = generate_dataset(&lib, &[], shots, 0.0, &PerturbationConfig::clean(9)).unwrap();
    for t in lib.templates() {
        let mine: Vec<_> = records.iter().filter(|r| r.task_id == t.task_id).collect();
        assert_eq!(mine.len(), shots);
        let mut uses: HashMap<&str, usize> = HashMap::new();
        for r in &mine {
            let v = t
                .query_variants
                .iter()
                .find(|v| fill(v, &r.slots) == r.query)
                .expect("query comes from a variant");
            *uses.entry(v).or_default() += 1;
        }
        for v in &t.query_variants {
            assert!(uses.get(v.as_str()).copied().unwrap_or(0) >= shots / t.query_variants.len());
        }
    }
}

#[test]
fn generated_gold_snippets_run_on_the_reference_fixture() {
    let lib = library();
    let cfg = PerturbationConfig {
        typo_rate: 0.1,
        ..PerturbationConfig::clean(21)
    };
    let base = reference_hosts();
    for r in generate_dataset(&lib, &ood_pool(), 10, 0.04, &cfg).unwrap() {
        let Some(snippet) = &r.gold_snippet else { continue };
        let mut hosts = base.clone();
        let result = run_script(snippet, &mut hosts.env());
        assert!(result.is_ok(), "{}: {:?}", r.query, result.error_detail);
    }
}

#[test]
fn generation_errors() {
    let mut t = library().templates()[0].clone();
    let slot = t.slot_domains.keys().next().unwrap().clone();
    t.slot_domains.insert(slot, Vec::new());
    let lib = TemplateLibrary::new(vec![t]).unwrap();
    assert!(matches!(
        generate_dataset(&lib, &[], 2, 0.0, &PerturbationConfig::clean(0)),
        Err(TaskgenError::EmptyDomain { .. })
    ));
    assert!(matches!(
        generate_dataset(&library(), &[], 2, 0.1, &PerturbationConfig::clean(0)),
        Err(TaskgenError::EmptyPool)
    ));
    assert!(generate_dataset(&library(), &ood_pool(), 0, 0.0, &PerturbationConfig::clean(0)).is_err());
    assert!(generate_dataset(&library(), &ood_pool(), 1, 1.0, &PerturbationConfig::clean(0)).is_err());
}

#[test]
fn slot_values_survive_ten_thousand_perturbations() {
    let cfg = PerturbationConfig {
        typo_rate: 0.3,
        distraction_phrases: DEFAULT_DISTRACTIONS.iter().map(|s| s.to_string()).collect(),
        distraction_rate: 0.5,
        seed: 99,
    };
    let template = "What is the standard deviation of supplier {S}'s inventory in the last {T} weeks?";
    for i in 0..10_000 {
        let mut rng = record_stream(cfg.seed, "fuzz", i);
        let s = format!("S{}", rng.random_range(0..100));
        let t = rng.random_range(1..60).to_string();
        let slots = BTreeMap::from([("S".to_string(), s.clone()), ("T".to_string(), t.clone())]);
        let (text, spans) = fill_with_spans(template, &slots);
        // span oracle: the recorded ranges hold exactly the values
        assert_eq!(&text[spans[0].clone()], s);
        assert_eq!(&text[spans[1].clone()], t);
        let out = perturb(&text, &spans, &cfg, &mut rng);
        let words: Vec<&str> = out.split(|c: char| !c.is_alphanumeric()).collect();
        assert!(words.contains(&s.as_str()), "{s} lost in {out:?}");
        assert!(words.contains(&t.as_str()), "{t} lost in {out:?}");
    }
}

proptest! {
    #[test]
    fn perturbation_never_edits_protected_text(
        text in "[a-zA-Z ]{0,40}",
        start in 0usize..40,
        len in 1usize..8,
        seed in any::<u64>(),
    ) {
        let start = start.min(text.len());
        let end = (start + len).min(text.len());
        let cfg = PerturbationConfig { typo_rate: 0.5, ..PerturbationConfig::clean(seed) };
        let protected = start..end;
        let out = perturb(&text, std::slice::from_ref(&protected), &cfg, &mut record_stream(seed, "p", 0));
        prop_assert!(out.contains(&text[start..end]));
        let clean = perturb(&text, &[], &PerturbationConfig::clean(seed), &mut record_stream(seed, "p", 0));
        prop_assert_eq!(clean, text);
    }
}

#[test]
fn training_config_export() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    export_training_config(&a).unwrap();
    export_training_config(&b).unwrap();
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["learning_rate"], 0.0002);
    assert_eq!(v["batch_size"], 16);
    assert_eq!(v["optimizer"], "AdamW");
    assert_eq!(v["max_input_tokens"], 1024);
    assert_eq!(v["max_output_tokens"], 500);
    assert_eq!(v["max_steps"], 100_000);
    assert_eq!(v["adapter"], "LoRA");
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 7);
}
