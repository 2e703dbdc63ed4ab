use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    DataExtraction,
    PlanGeneration,
    WhatIf,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::DataExtraction, Category::PlanGeneration, Category::WhatIf];

    pub fn label(self) -> &'static str {
        match self {
            Category::DataExtraction => "data extraction",
            Category::PlanGeneration => "plan generation",
            Category::WhatIf => "what-if analysis",
        }
    }
}

fn yes() -> bool {
    true
}

/// One task type: how users phrase it and the snippet that answers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTemplate {
    pub task_id: String,
    #[serde(default)]
    pub title: String,
    pub category: Category,
    pub query_variants: Vec<String>,
    pub gold_snippet: String,
    #[serde(default)]
    pub slot_domains: BTreeMap<String, Vec<String>>,
    /// Optional per-slot capture regexes used when no variant matches.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slot_patterns: BTreeMap<String, String>,
    #[serde(default = "yes")]
    pub in_domain: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("template {task_id}: {message}")]
    Invalid { task_id: String, message: String },
    #[error("duplicate task id {0}")]
    Duplicate(String),
    #[error("no templates found in {0}")]
    Empty(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SlotError {
    #[error("could not find a value for slot {slot} in the query")]
    Missing { slot: String },
    #[error("slot {slot} value {value:?} contains characters outside [A-Za-z0-9_.-]")]
    BadValue { slot: String, value: String },
}

static HOLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Z][A-Z0-9_]*)\}").unwrap());
static SLOT_VALUE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[\w.-]+$").unwrap());
static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9]+").unwrap());

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "at", "be", "by", "can", "could", "do", "does", "for", "from", "how",
    "i", "in", "is", "it", "its", "me", "my", "of", "on", "or", "please", "s", "that", "the",
    "there", "this", "to", "was", "we", "were", "what", "when", "why", "with", "would", "you",
    "your",
];

/// Slot names referenced as `{NAME}` in `text`, in order of appearance.
pub fn holes(text: &str) -> Vec<String> {
    HOLE.captures_iter(text).map(|c| c[1].to_string()).collect()
}

/// Replaces `{NAME}` for every slot present in `slots`; other braces are left
/// alone so snippet f-string holes survive. Returns the text and the byte
/// ranges of the substituted values.
pub fn fill_with_spans(text: &str, slots: &BTreeMap<String, String>) -> (String, Vec<Range<usize>>) {
    let mut out = String::with_capacity(text.len());
    let mut spans = Vec::new();
    let mut last = 0;
    for cap in HOLE.captures_iter(text) {
        let whole = cap.get(0).unwrap();
        let Some(value) = slots.get(&cap[1]) else {
            continue;
        };
        out.push_str(&text[last..whole.start()]);
        let start = out.len();
        out.push_str(value);
        spans.push(start..out.len());
        last = whole.end();
    }
    out.push_str(&text[last..]);
    (out, spans)
}

pub fn fill(text: &str, slots: &BTreeMap<String, String>) -> String {
    fill_with_spans(text, slots).0
}

/// Lowercased content words, with stopwords removed.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    WORD.find_iter(text)
        .map(|m| m.as_str().to_ascii_lowercase())
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone)]
struct VariantMatcher {
    anchored: Regex,
    loose: Regex,
    /// Capture group index to slot name.
    groups: Vec<String>,
    tokens: BTreeSet<String>,
}

impl VariantMatcher {
    fn new(variant: &str) -> Self {
        let mut body = String::new();
        let mut groups = Vec::new();
        let mut last = 0;
        for cap in HOLE.captures_iter(variant) {
            let whole = cap.get(0).unwrap();
            push_literal(&variant[last..whole.start()], &mut body);
            body.push_str(r"([\w.-]+)");
            groups.push(cap[1].to_string());
            last = whole.end();
        }
        push_literal(&variant[last..], &mut body);
        let core = strip_trailing_punct(&body);
        let anchored = Regex::new(&format!(r"(?i)^\s*{core}\s*[.!?]*\s*$")).unwrap();
        let loose = Regex::new(&format!("(?i){core}")).unwrap();
        let without_holes = HOLE.replace_all(variant, " ");
        VariantMatcher {
            anchored,
            loose,
            groups,
            tokens: content_tokens(&without_holes),
        }
    }

    fn captures(&self, re: &Regex, query: &str) -> Option<(usize, BTreeMap<String, String>)> {
        let cap = re.captures(query)?;
        let mut slots = BTreeMap::new();
        for (i, name) in self.groups.iter().enumerate() {
            if let Some(m) = cap.get(i + 1) {
                slots.entry(name.clone()).or_insert_with(|| m.as_str().to_string());
            }
        }
        Some((cap.get(0).unwrap().len(), slots))
    }
}

/// Appends a literal run as regex, letting any whitespace run match `\s+`.
fn push_literal(s: &str, body: &mut String) {
    let mut in_ws = false;
    for c in s.chars() {
        if c.is_whitespace() {
            if !in_ws {
                body.push_str(r"\s+");
            }
            in_ws = true;
        } else {
            in_ws = false;
            body.push_str(&regex::escape(&c.to_string()));
        }
    }
}

/// Drops escaped trailing `.`, `!` or `?` so the anchored form can accept any
/// terminal punctuation.
fn strip_trailing_punct(body: &str) -> &str {
    let mut b = body;
    loop {
        let next = b
            .strip_suffix(r"\.")
            .or_else(|| b.strip_suffix(r"\?"))
            .or_else(|| b.strip_suffix('!'));
        match next {
            Some(n) => b = n,
            None => return b,
        }
    }
}

#[derive(Debug, Clone)]
struct CompiledTemplate {
    variants: Vec<VariantMatcher>,
    slot_patterns: BTreeMap<String, Regex>,
}

/// Best-matching template for a query.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMatch {
    pub task_id: String,
    pub score: f64,
    /// A query variant matched the whole query.
    pub exact: bool,
}

/// A validated set of templates, sorted by task id.
#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    templates: Vec<TaskTemplate>,
    compiled: Vec<CompiledTemplate>,
    slot_vocabulary: BTreeSet<String>,
}

impl TemplateLibrary {
    pub fn new(mut templates: Vec<TaskTemplate>) -> Result<Self, TemplateError> {
        templates.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        for pair in templates.windows(2) {
            if pair[0].task_id == pair[1].task_id {
                return Err(TemplateError::Duplicate(pair[0].task_id.clone()));
            }
        }
        let mut compiled = Vec::with_capacity(templates.len());
        for t in &templates {
            validate(t)?;
            let mut slot_patterns = BTreeMap::new();
            for (slot, pat) in &t.slot_patterns {
                let re = Regex::new(&format!("(?i){pat}")).map_err(|e| TemplateError::Invalid {
                    task_id: t.task_id.clone(),
                    message: format!("slot pattern for {slot}: {e}"),
                })?;
                slot_patterns.insert(slot.clone(), re);
            }
            compiled.push(CompiledTemplate {
                variants: t.query_variants.iter().map(|v| VariantMatcher::new(v)).collect(),
                slot_patterns,
            });
        }
        let slot_vocabulary = templates
            .iter()
            .flat_map(|t| t.slot_domains.values().flatten())
            .map(|v| v.to_ascii_lowercase())
            .collect();
        Ok(TemplateLibrary {
            templates,
            compiled,
            slot_vocabulary,
        })
    }

    /// Loads every `*.json` file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let dir = dir.as_ref();
        let io = |source| TemplateError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(TemplateError::Empty(dir.to_path_buf()));
        }
        let mut templates = Vec::with_capacity(paths.len());
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                path: path.clone(),
                source,
            })?;
            let t = serde_json::from_str(&text).map_err(|source| TemplateError::Json { path, source })?;
            templates.push(t);
        }
        Self::new(templates)
    }

    pub fn templates(&self) -> &[TaskTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, task_id: &str) -> Option<&TaskTemplate> {
        self.position(task_id).map(|i| &self.templates[i])
    }

    fn position(&self, task_id: &str) -> Option<usize> {
        self.templates
            .binary_search_by(|t| t.task_id.as_str().cmp(task_id))
            .ok()
    }

    /// Similarity of `query` to one template: 1.0 and exact when a variant
    /// matches the whole query with any slot values, otherwise the best token
    /// Jaccard.
    pub fn score(&self, index: usize, query: &str, query_tokens: &BTreeSet<String>) -> (bool, f64) {
        let c = &self.compiled[index];
        if c.variants.iter().any(|v| v.anchored.is_match(query)) {
            return (true, 1.0);
        }
        let best = c
            .variants
            .iter()
            .map(|v| jaccard(query_tokens, &v.tokens))
            .fold(0.0, f64::max);
        (false, best)
    }

    /// Highest-scoring template. An exact variant match outranks any token
    /// overlap; ties go to the smallest task id.
    pub fn best_match(&self, query: &str) -> Option<TemplateMatch> {
        let tokens = self.query_tokens(query);
        let mut best: Option<TemplateMatch> = None;
        for (i, t) in self.templates.iter().enumerate() {
            let (exact, score) = self.score(i, query, &tokens);
            if best.as_ref().is_none_or(|b| (exact, score) > (b.exact, b.score)) {
                best = Some(TemplateMatch {
                    task_id: t.task_id.clone(),
                    score,
                    exact,
                });
            }
        }
        best
    }

    /// Content tokens of a query minus numbers and known slot values, which
    /// carry no information about the task.
    pub fn query_tokens(&self, query: &str) -> BTreeSet<String> {
        content_tokens(query)
            .into_iter()
            .filter(|w| !w.chars().any(|c| c.is_ascii_digit()) && !self.slot_vocabulary.contains(w))
            .collect()
    }

    /// Pulls slot values for `task_id` out of `query`.
    pub fn extract_slots(&self, task_id: &str, query: &str) -> Result<BTreeMap<String, String>, SlotError> {
        let i = self.position(task_id).ok_or_else(|| SlotError::Missing {
            slot: format!("<unknown task {task_id}>"),
        })?;
        let (t, c) = (&self.templates[i], &self.compiled[i]);
        let wanted: BTreeSet<&String> = t.slot_domains.keys().collect();
        if wanted.is_empty() {
            return Ok(BTreeMap::new());
        }
        let mut slots = c
            .variants
            .iter()
            .find_map(|v| v.captures(&v.anchored, query).map(|(_, s)| s))
            .or_else(|| {
                c.variants
                    .iter()
                    .filter_map(|v| v.captures(&v.loose, query))
                    .max_by_key(|(len, _)| *len)
                    .map(|(_, s)| s)
            })
            .unwrap_or_default();
        for slot in wanted {
            if slots.contains_key(slot) {
                continue;
            }
            let found = match c.slot_patterns.get(slot) {
                Some(re) => re
                    .captures(query)
                    .and_then(|cap| cap.get(1).or(cap.get(0)))
                    .map(|m| m.as_str().to_string()),
                None => find_domain_value(query, &t.slot_domains[slot]),
            };
            match found {
                Some(v) => {
                    slots.insert(slot.clone(), v);
                }
                None => return Err(SlotError::Missing { slot: slot.clone() }),
            }
        }
        slots.retain(|k, _| t.slot_domains.contains_key(k));
        for (slot, value) in &slots {
            if !SLOT_VALUE.is_match(value) {
                return Err(SlotError::BadValue {
                    slot: slot.clone(),
                    value: value.clone(),
                });
            }
        }
        Ok(slots)
    }

    /// One-line summary of supported tasks per category.
    pub fn capability_summary(&self) -> Vec<(Category, Vec<&str>)> {
        Category::ALL
            .iter()
            .map(|&cat| {
                let titles = self
                    .templates
                    .iter()
                    .filter(|t| t.category == cat)
                    .map(|t| if t.title.is_empty() { t.task_id.as_str() } else { t.title.as_str() })
                    .collect();
                (cat, titles)
            })
            .collect()
    }
}

fn find_domain_value(query: &str, domain: &[String]) -> Option<String> {
    let words: Vec<&str> = query
        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '.' || c == '-'))
        .map(|w| w.trim_end_matches('.'))
        .collect();
    domain
        .iter()
        .find(|v| words.iter().any(|w| w.eq_ignore_ascii_case(v)))
        .cloned()
}

fn validate(t: &TaskTemplate) -> Result<(), TemplateError> {
    let invalid = |message: String| TemplateError::Invalid {
        task_id: t.task_id.clone(),
        message,
    };
    if t.task_id.is_empty() || t.task_id == "OOD" {
        return Err(invalid("task id must be nonempty and not \"OOD\"".into()));
    }
    if !t.in_domain {
        return Err(invalid("templates describe in-domain tasks only".into()));
    }
    if t.query_variants.is_empty() {
        return Err(invalid("needs at least one query variant".into()));
    }
    for slot in t.slot_domains.keys() {
        if !HOLE.is_match(&format!("{{{slot}}}")) {
            return Err(invalid(format!("slot name {slot:?} must be uppercase")));
        }
    }
    for hole in holes(&t.gold_snippet) {
        if !t.slot_domains.contains_key(&hole) {
            return Err(invalid(format!("snippet hole {{{hole}}} has no slot domain")));
        }
    }
    for v in &t.query_variants {
        for hole in holes(v) {
            if !t.slot_domains.contains_key(&hole) {
                return Err(invalid(format!("variant hole {{{hole}}} has no slot domain")));
            }
        }
    }
    for slot in t.slot_patterns.keys() {
        if !t.slot_domains.contains_key(slot) {
            return Err(invalid(format!("pattern for undeclared slot {slot}")));
        }
    }
    Ok(())
}
