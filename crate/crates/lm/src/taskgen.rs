//! Synthetic query datasets from task templates.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::templates::{fill, fill_with_spans, TemplateLibrary};

pub const OOD_TASK_ID: &str = "OOD";

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Per-character probability of a swap or drop.
    #[serde(default)]
    pub typo_rate: f64,
    #[serde(default)]
    pub distraction_phrases: Vec<String>,
    /// Chance that a query gets wrapped with one distraction phrase.
    #[serde(default = "half")]
    pub distraction_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbationConfig {
    /// No typos, no distractions.
    pub fn clean(seed: u64) -> Self {
        PerturbationConfig {
            typo_rate: 0.0,
            distraction_phrases: Vec::new(),
            distraction_rate: half(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TaskgenError> {
        for (name, p) in [("typo_rate", self.typo_rate), ("distraction_rate", self.distraction_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(TaskgenError::Config(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Greetings and filler used when no phrases are configured explicitly.
pub const DEFAULT_DISTRACTIONS: &[&str] = &[
    "Hi there!",
    "Hello,",
    "Quick question:",
    "Thanks!",
    "Thanks in advance.",
    "Sorry to bother you,",
    "I was wondering,",
    "Good morning!",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub query: String,
    pub task_id: String,
    #[serde(default)]
    pub slots: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_snippet: Option<String>,
    pub in_domain: bool,
}

impl DatasetRecord {
    /// `in_domain = false` exactly when the task is OOD and there is no snippet.
    pub fn is_consistent(&self) -> bool {
        let ood = !self.in_domain;
        ood == (self.task_id == OOD_TASK_ID) && ood == self.gold_snippet.is_none()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaskgenError {
    #[error("template {task_id}: slot {slot} has an empty domain")]
    EmptyDomain { task_id: String, slot: String },
    #[error("an out-of-domain fraction was requested but the pool is empty")]
    EmptyPool,
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
}

/// Random stream for one record, derived from the dataset seed and the
/// record's identity so records can be generated in any order.
pub fn record_stream(seed: u64, task_id: &str, index: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(task_id.as_bytes());
    h.update([0]);
    h.update((index as u64).to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}

/// Number of OOD records so they make up `fraction` of the whole set.
pub fn ood_count(n_in_domain: usize, fraction: f64) -> usize {
    if fraction <= 0.0 {
        return 0;
    }
    (fraction / (1.0 - fraction) * n_in_domain as f64 - 1e-9).ceil() as usize
}

/// Applies typos outside `protected` byte ranges, then maybe a distraction.
pub fn perturb(text: &str, protected: &[Range<usize>], cfg: &PerturbationConfig, rng: &mut impl Rng) -> String {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let eligible = |i: usize| -> bool {
        let (pos, c) = chars[i];
        c.is_alphabetic() && !protected.iter().any(|r| r.contains(&pos))
    };
    let mut out = String::with_capacity(text.len() + 24);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if cfg.typo_rate > 0.0 && eligible(i) && rng.random_bool(cfg.typo_rate) {
            let can_swap = i + 1 < chars.len() && eligible(i + 1);
            if can_swap && rng.random_bool(0.5) {
                out.push(chars[i + 1].1);
                out.push(c);
                i += 2;
                continue;
            }
            // drop the character
            i += 1;
            continue;
        }
        out.push(c);
        i += 1;
    }
    if !cfg.distraction_phrases.is_empty() && rng.random_bool(cfg.distraction_rate) {
        let phrase = cfg.distraction_phrases.choose(rng).unwrap();
        if rng.random_bool(0.5) {
            out = format!("{phrase} {out}");
        } else {
            out = format!("{out} {phrase}");
        }
    }
    out
}

/// Expands every template `shots_per_task` times, then appends OOD queries so
/// they form `ood_fraction` of the result.
pub fn generate_dataset(
    library: &TemplateLibrary,
    ood_pool: &[String],
    shots_per_task: usize,
    ood_fraction: f64,
    cfg: &PerturbationConfig,
) -> Result<Vec<DatasetRecord>, TaskgenError> {
    cfg.validate()?;
    if shots_per_task == 0 {
        return Err(TaskgenError::Config("shots per task must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&ood_fraction) {
        return Err(TaskgenError::Config(format!("ood fraction {ood_fraction} outside [0, 1)")));
    }
    for t in library.templates() {
        if let Some((slot, _)) = t.slot_domains.iter().find(|(_, d)| d.is_empty()) {
            return Err(TaskgenError::EmptyDomain {
                task_id: t.task_id.clone(),
                slot: slot.clone(),
            });
        }
    }
    let mut records = Vec::with_capacity(library.len() * shots_per_task);
    for t in library.templates() {
        for index in 0..shots_per_task {
            let mut rng = record_stream(cfg.seed, &t.task_id, index);
            let variant = &t.query_variants[index % t.query_variants.len()];
            let slots: BTreeMap<String, String> = t
                .slot_domains
                .iter()
                .map(|(k, d)| (k.clone(), d.choose(&mut rng).unwrap().clone()))
                .collect();
            let (query, spans) = fill_with_spans(variant, &slots);
            records.push(DatasetRecord {
                query: perturb(&query, &spans, cfg, &mut rng),
                task_id: t.task_id.clone(),
                gold_snippet: Some(fill(&t.gold_snippet, &slots)),
                slots,
                in_domain: true,
            });
        }
    }
    let n_ood = ood_count(records.len(), ood_fraction);
    if n_ood > 0 && ood_pool.is_empty() {
        return Err(TaskgenError::EmptyPool);
    }
    let mut order: Vec<usize> = (0..ood_pool.len()).collect();
    order.shuffle(&mut record_stream(cfg.seed, OOD_TASK_ID, usize::MAX));
    for index in 0..n_ood {
        let mut rng = record_stream(cfg.seed, OOD_TASK_ID, index);
        let text = &ood_pool[order[index % order.len()]];
        records.push(DatasetRecord {
            query: perturb(text, &[], cfg, &mut rng),
            task_id: OOD_TASK_ID.into(),
            slots: BTreeMap::new(),
            gold_snippet: None,
            in_domain: false,
        });
    }
    Ok(records)
}

/// One query per nonblank line; `#` starts a comment line.
pub fn load_ood_pool(path: impl AsRef<Path>) -> Result<Vec<String>, TaskgenError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TaskgenError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<(), TaskgenError> {
    let path = path.as_ref();
    let io = |source| TaskgenError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&buf).map_err(io)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>, TaskgenError> {
    let path = path.as_ref();
    let io = |source| TaskgenError::Io {
        path: path.display().to_string(),
        source,
    };
    let f = fs::File::open(path).map_err(io)?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|source| TaskgenError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(rows)
}

/// Fine-tuning hyperparameters, exported for reference only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: u32,
    pub optimizer: String,
    pub learning_rate: f64,
    pub max_input_tokens: u32,
    pub max_output_tokens: u32,
    pub max_steps: u64,
    pub adapter: String,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 16,
            optimizer: "AdamW".into(),
            learning_rate: 0.0002,
            max_input_tokens: 1024,
            max_output_tokens: 500,
            max_steps: 100_000,
            adapter: "LoRA".into(),
        }
    }
}

pub fn export_training_config(path: impl AsRef<Path>) -> Result<(), TaskgenError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&TrainingConfig::default()).expect("config serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| TaskgenError::Io {
        path: path.display().to_string(),
        source,
    })
}
