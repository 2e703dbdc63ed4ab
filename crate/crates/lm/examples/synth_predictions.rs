//! Writes the synthetic prediction files under `data/predictions/`.
//!
//! Each cell corrupts a clean dataset at a target error rate, so the numbers
//! in the resulting report are made up by construction. They exist to pin the
//! report and sweep formats, not to say anything about real models.
//!
//! Usage: cargo run -p fulfil-lm --example synth_predictions [OUT_DIR]

use std::path::PathBuf;

use fulfil_lm::eval::EvalRecord;
use fulfil_lm::taskgen::{
    generate_dataset, load_ood_pool, record_stream, write_jsonl, PerturbationConfig, DEFAULT_DISTRACTIONS,
};
use fulfil_lm::{count_tokens, TemplateLibrary, TokenUsage};
use rand::seq::IndexedRandom;
use rand::Rng;

/// (file stem, target accuracy)
const CELLS: &[(&str, f64)] = &[
    ("phi3_10", 0.62),
    ("phi3_100", 0.84),
    ("phi3_1000", 0.95),
    ("mistral_10", 0.58),
    ("mistral_100", 0.80),
    ("mistral_1000", 0.93),
    ("gpt4_1shot", 0.80),
    ("gpt4_5shot", 0.88),
    ("gpt35_1shot", 0.70),
];
const RUNS: usize = 3;

fn main() -> anyhow::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or(root.join("data/predictions"));
    let lib = TemplateLibrary::load_dir(root.join("templates"))?;
    let pool = load_ood_pool(root.join("data/ood_pool.txt"))?;
    let cfg = PerturbationConfig {
        typo_rate: 0.02,
        distraction_phrases: DEFAULT_DISTRACTIONS.iter().map(|s| s.to_string()).collect(),
        distraction_rate: 0.3,
        seed: 2024,
    };
    let dataset = generate_dataset(&lib, &pool, 8, 0.04, &cfg)?;
    let golds: Vec<(&str, &str)> = dataset
        .iter()
        .filter_map(|d| d.gold_snippet.as_deref().map(|g| (d.task_id.as_str(), g)))
        .collect();

    for &(stem, accuracy) in CELLS {
        for run in 0..RUNS {
            let records: Vec<EvalRecord> = dataset
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let mut rng = record_stream(run as u64, stem, i);
                    let mut r = EvalRecord::from_gold(d);
                    r.predicted_in_domain = d.in_domain;
                    r.predicted_snippet = d.gold_snippet.clone();
                    if rng.random_bool(1.0 - accuracy) {
                        if !d.in_domain {
                            r.predicted_in_domain = true;
                            r.predicted_snippet = Some(golds.choose(&mut rng).unwrap().1.to_string());
                        } else if rng.random_bool(0.25) {
                            r.predicted_in_domain = false;
                            r.predicted_snippet = None;
                        } else {
                            let others: Vec<_> = golds.iter().filter(|(t, _)| *t != d.task_id).collect();
                            r.predicted_snippet = Some(others.choose(&mut rng).unwrap().1.to_string());
                        }
                    }
                    let output = r.predicted_snippet.as_deref().map_or(1, count_tokens);
                    r.usage = Some(TokenUsage::new(count_tokens(&d.query), output));
                    r
                })
                .collect();
            let path = out.join(format!("{stem}_run{run}.jsonl"));
            write_jsonl(&path, &records)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
