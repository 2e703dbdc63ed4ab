//! Execution-based judging, accuracy metrics, cost accounting and reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fulfil_core::dsl::{run_script, ExecutionResult};
use fulfil_core::Hosts;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::router::Router;
use crate::taskgen::{read_jsonl, DatasetRecord, TaskgenError};
use crate::tokens::TokenUsage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query: String,
    pub gold_in_domain: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_task_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_snippet: Option<String>,
    pub predicted_in_domain: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_snippet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    /// `None` until judged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judged_correct: Option<bool>,
    /// Why no usable prediction exists (transport error, slot extraction).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl EvalRecord {
    /// Gold side from a dataset record, prediction left empty.
    pub fn from_gold(rec: &DatasetRecord) -> Self {
        EvalRecord {
            query: rec.query.clone(),
            gold_in_domain: rec.in_domain,
            gold_task_id: rec.in_domain.then(|| rec.task_id.clone()),
            gold_snippet: rec.gold_snippet.clone(),
            predicted_in_domain: false,
            predicted_snippet: None,
            usage: None,
            judged_correct: None,
            failure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("gold snippet for {query:?} failed: {detail}")]
    Fixture { query: String, detail: String },
    #[error("in-domain record {query:?} has no gold snippet")]
    MissingGold { query: String },
}

fn run_on(base: &Hosts, text: &str) -> (ExecutionResult, Hosts) {
    let mut hosts = base.clone();
    let result = run_script(text, &mut hosts.env());
    (result, hosts)
}

fn trimmed(logs: &[String]) -> Vec<&str> {
    logs.iter().map(|l| l.trim()).collect()
}

/// Out-of-domain records are correct when the prediction is out of domain.
/// In-domain records are correct when predicted in domain and the predicted
/// snippet, run on a fresh copy of `base`, leaves the same trimmed logs, plan
/// version and constraint lists as the gold snippet.
pub fn judge(rec: &EvalRecord, base: &Hosts) -> Result<bool, JudgeError> {
    if !rec.gold_in_domain {
        return Ok(!rec.predicted_in_domain);
    }
    let gold = rec.gold_snippet.as_deref().ok_or_else(|| JudgeError::MissingGold {
        query: rec.query.clone(),
    })?;
    let (gold_result, gold_hosts) = run_on(base, gold);
    if !gold_result.is_ok() {
        return Err(JudgeError::Fixture {
            query: rec.query.clone(),
            detail: gold_result.error_detail.unwrap_or_default(),
        });
    }
    let predicted = match (&rec.failure, rec.predicted_in_domain, &rec.predicted_snippet) {
        (None, true, Some(p)) => p,
        _ => return Ok(false),
    };
    let (result, hosts) = run_on(base, predicted);
    Ok(result.is_ok()
        && trimmed(&result.logs) == trimmed(&gold_result.logs)
        && hosts.plans.version() == gold_hosts.plans.version()
        && hosts.model.baseline_constraints == gold_hosts.model.baseline_constraints
        && hosts.model.scenario_constraints == gold_hosts.model.scenario_constraints)
}

/// Judges every record in place, spreading the work over threads.
pub fn judge_all(records: &mut [EvalRecord], base: &Hosts) -> Result<(), JudgeError> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = records.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = records
            .chunks_mut(chunk)
            .map(|part| {
                s.spawn(move || {
                    for r in part.iter_mut() {
                        r.judged_correct = Some(judge(r, base)?);
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().expect("judge thread panicked"))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall_acc: f64,
    pub coder_acc: f64,
    pub f1_ood: f64,
    pub n_total: usize,
    pub n_in_domain: usize,
    pub n_ood: usize,
    /// Confusion counts with out-of-domain as the positive class.
    pub ood_tp: usize,
    pub ood_fp: usize,
    pub ood_fn: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no records to score")]
    Empty,
    #[error("record {0} has not been judged")]
    Unjudged(usize),
}

/// F-1 for the out-of-domain class, in percent.
pub fn f1_percent(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp + fn_ == 0 {
        return 100.0;
    }
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    200.0 * p * r / (p + r)
}

pub fn compute_metrics(records: &[EvalRecord]) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut correct, mut correct_in, mut n_in) = (0usize, 0usize, 0usize);
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (i, r) in records.iter().enumerate() {
        let ok = r.judged_correct.ok_or(MetricsError::Unjudged(i))?;
        correct += ok as usize;
        if r.gold_in_domain {
            n_in += 1;
            correct_in += ok as usize;
        }
        match (r.gold_in_domain, r.predicted_in_domain) {
            (false, false) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (true, true) => {}
        }
    }
    let n = records.len();
    Ok(MetricsReport {
        overall_acc: 100.0 * correct as f64 / n as f64,
        coder_acc: if n_in == 0 {
            100.0
        } else {
            100.0 * correct_in as f64 / n_in as f64
        },
        f1_ood: f1_percent(tp, fp, fn_),
        n_total: n,
        n_in_domain: n_in,
        n_ood: n - n_in,
        ood_tp: tp,
        ood_fp: fp,
        ood_fn: fn_,
    })
}

/// Prices in dollars; costs come out in cents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostModel {
    /// Dollars per million tokens.
    PerToken { input_price: f64, output_price: f64 },
    GpuAmortized { gpu_hourly_rate: f64, queries_per_hour: u64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("queries_per_hour must be positive")]
    ZeroThroughput,
    #[error("prices and rates must be nonnegative")]
    Negative,
}

impl CostModel {
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Cost of one query in cents. Token counts may be averages, hence `f64`.
pub fn query_cost(input_tokens: f64, output_tokens: f64, cm: &CostModel) -> Result<f64, CostError> {
    match *cm {
        CostModel::PerToken {
            input_price,
            output_price,
        } => {
            if input_price < 0.0 || output_price < 0.0 {
                return Err(CostError::Negative);
            }
            Ok((input_tokens * input_price + output_tokens * output_price) / 1e6 * 100.0)
        }
        CostModel::GpuAmortized {
            gpu_hourly_rate,
            queries_per_hour,
        } => {
            if gpu_hourly_rate < 0.0 {
                return Err(CostError::Negative);
            }
            if queries_per_hour == 0 {
                return Err(CostError::ZeroThroughput);
            }
            Ok(gpu_hourly_rate / queries_per_hour as f64 * 100.0)
        }
    }
}

pub fn usage_cost(usage: &TokenUsage, cm: &CostModel) -> Result<f64, CostError> {
    query_cost(usage.input_tokens as f64, usage.output_tokens as f64, cm)
}

pub fn format_cents(cents: f64) -> String {
    format!("{cents:.2}")
}

/// Mean per-query cost over records that carry usage.
pub fn mean_cost(records: &[EvalRecord], cm: &CostModel) -> Result<Option<f64>, CostError> {
    if let CostModel::GpuAmortized { .. } = cm {
        return query_cost(0.0, 0.0, cm).map(Some);
    }
    let costs = records
        .iter()
        .filter_map(|r| r.usage.as_ref())
        .map(|u| usage_cost(u, cm))
        .collect::<Result<Vec<_>, _>>()?;
    if costs.is_empty() {
        return Ok(None);
    }
    Ok(Some(costs.iter().sum::<f64>() / costs.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub records: Vec<EvalRecord>,
    pub metrics: MetricsReport,
    pub mean_cost_cents: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Io(#[from] TaskgenError),
}

/// Fills in predictions for `dataset` by routing each query.
pub fn predict(dataset: &[DatasetRecord], router: &Router) -> Vec<EvalRecord> {
    dataset
        .iter()
        .map(|d| {
            let mut rec = EvalRecord::from_gold(d);
            match router.route(&d.query) {
                Ok(routed) => {
                    rec.predicted_in_domain = routed.decision.in_domain;
                    rec.usage = Some(routed.gate_usage + routed.coder_usage);
                    rec.predicted_snippet = routed.snippet;
                    rec.failure = routed.failure;
                }
                Err(e) => {
                    warn!(query = %d.query, error = %e, "backend failure, record counts as a miss");
                    // a forced miss on both the coder and the gate side
                    rec.predicted_in_domain = !d.in_domain;
                    rec.failure = Some(e.to_string());
                }
            }
            rec
        })
        .collect()
}

/// Judges already-predicted records and aggregates them.
pub fn score_records(mut records: Vec<EvalRecord>, base: &Hosts, cm: Option<&CostModel>) -> Result<EvalRun, EvalError> {
    judge_all(&mut records, base)?;
    let metrics = compute_metrics(&records)?;
    let mean_cost_cents = match cm {
        Some(cm) => mean_cost(&records, cm)?,
        None => None,
    };
    Ok(EvalRun {
        records,
        metrics,
        mean_cost_cents,
    })
}

/// Live mode: route, judge, aggregate.
pub fn run_eval(dataset: &[DatasetRecord], router: &Router, base: &Hosts, cm: Option<&CostModel>) -> Result<EvalRun, EvalError> {
    score_records(predict(dataset, router), base, cm)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One line of a report spec: a model/method cell and the prediction files of
/// its repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub model: String,
    pub method: String,
    #[serde(default)]
    pub shots: Option<u32>,
    #[serde(default)]
    pub runs: Vec<PathBuf>,
    #[serde(default)]
    pub cost_model: Option<CostModel>,
    /// Average token counts to price instead of the per-record usage.
    #[serde(default)]
    pub mean_usage: Option<MeanUsage>,
    /// Shown in place of metrics when there are no runs.
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanUsage {
    pub input_tokens: f64,
    pub output_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    /// Instance directory used for judging, relative to the report file.
    pub instance: PathBuf,
    pub entries: Vec<ReportEntry>,
}

impl ReportSpec {
    /// Reads a spec and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let mut spec: ReportSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.instance = base.join(&spec.instance);
        for e in &mut spec.entries {
            for r in &mut e.runs {
                *r = base.join(&*r);
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub method: String,
    pub shots: Option<u32>,
    pub runs: usize,
    pub overall: (f64, f64),
    pub coder: (f64, f64),
    pub f1: (f64, f64),
    pub cost_cents: Option<f64>,
    pub note: Option<String>,
}

/// Judges every run of every entry. Entries whose run files are missing keep
/// only their note and are reported with a warning.
pub fn build_report(spec: &ReportSpec, base: &Hosts) -> Result<Vec<ReportRow>, EvalError> {
    let mut rows = Vec::with_capacity(spec.entries.len());
    for e in &spec.entries {
        let mut overall = Vec::new();
        let mut coder = Vec::new();
        let mut f1 = Vec::new();
        let mut costs = Vec::new();
        let mut missing = false;
        for path in &e.runs {
            let records: Vec<EvalRecord> = match read_jsonl(path) {
                Ok(r) => r,
                Err(err) => {
                    warn!(model = %e.model, method = %e.method, error = %err, "skipping cell with unreadable run");
                    missing = true;
                    break;
                }
            };
            let run = score_records(records, base, e.cost_model.as_ref())?;
            overall.push(run.metrics.overall_acc);
            coder.push(run.metrics.coder_acc);
            f1.push(run.metrics.f1_ood);
            if let Some(c) = run.mean_cost_cents {
                costs.push(c);
            }
        }
        let runs = if missing { 0 } else { overall.len() };
        let cost_cents = match (&e.cost_model, e.mean_usage) {
            (Some(cm), Some(u)) => Some(query_cost(u.input_tokens, u.output_tokens, cm)?),
            (Some(cm @ CostModel::GpuAmortized { .. }), None) => Some(query_cost(0.0, 0.0, cm)?),
            _ if !costs.is_empty() && runs > 0 => Some(mean_std(&costs).0),
            _ => None,
        };
        let (overall, coder, f1) = if runs > 0 {
            (mean_std(&overall), mean_std(&coder), mean_std(&f1))
        } else {
            ((f64::NAN, 0.0), (f64::NAN, 0.0), (f64::NAN, 0.0))
        };
        rows.push(ReportRow {
            model: e.model.clone(),
            method: e.method.clone(),
            shots: e.shots,
            runs,
            overall,
            coder,
            f1,
            cost_cents,
            note: e.note.clone().or_else(|| missing.then(|| "missing run".to_string())),
        });
    }
    Ok(rows)
}

fn cell((mean, std): (f64, f64), note: Option<&str>) -> String {
    if mean.is_nan() {
        note.unwrap_or("-").to_string()
    } else {
        format!("{mean:.2} ± {std:.2}")
    }
}

/// Plain-text table in the layout of the accuracy/cost comparison.
pub fn render_table(rows: &[ReportRow]) -> String {
    let header = ["Model", "Method", "Overall Acc. (%)", "Coder Acc. (%)", "F-1 (%)", "Cost (¢)"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            let note = r.note.as_deref();
            [
                r.model.clone(),
                r.method.clone(),
                cell(r.overall, note),
                cell(r.coder, note),
                cell(r.f1, note),
                r.cost_cents.map_or("-".to_string(), format_cents),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            s.push_str(c);
            s.extend(std::iter::repeat_n(' ', w - c.chars().count()));
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    writeln!(out, "{}", line(&header.map(String::from))).unwrap();
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    writeln!(out, "{}", rule.join("-+-")).unwrap();
    for row in &body {
        writeln!(out, "{}", line(row)).unwrap();
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("model,method,overall_acc,overall_std,coder_acc,coder_std,f1,f1_std,cost_cents,note\n");
    let num = |x: f64| if x.is_nan() { String::new() } else { format!("{x:.4}") };
    for r in rows {
        let missing = r.overall.0.is_nan();
        let std = |x: f64| if missing { String::new() } else { format!("{x:.4}") };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.model),
            csv_field(&r.method),
            num(r.overall.0),
            std(r.overall.1),
            num(r.coder.0),
            std(r.coder.1),
            num(r.f1.0),
            std(r.f1.1),
            r.cost_cents.map_or(String::new(), format_cents),
            csv_field(r.note.as_deref().unwrap_or("")),
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub shots: u32,
    pub overall_acc: f64,
    pub stddev: f64,
}

/// Overall accuracy against shot count, one row per cell that has runs and a
/// shot count.
pub fn sweep(rows: &[ReportRow]) -> Vec<SweepRow> {
    rows.iter()
        .filter_map(|r| {
            let shots = r.shots?;
            if r.runs == 0 {
                warn!(model = %r.model, shots, "sweep cell has no runs, omitted");
                return None;
            }
            Some(SweepRow {
                model: r.model.clone(),
                shots,
                overall_acc: r.overall.0,
                stddev: r.overall.1,
            })
        })
        .collect()
}

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("model,shots,overall_acc,stddev\n");
    for r in rows {
        writeln!(out, "{},{},{:.4},{:.4}", csv_field(&r.model), r.shots, r.overall_acc, r.stddev).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_edges() {
        assert_eq!(f1_percent(0, 0, 0), 100.0);
        assert_eq!(f1_percent(0, 3, 2), 0.0);
        assert!((f1_percent(4, 1, 1) - 80.0).abs() < 1e-12);
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[95.5, 96.1, 95.9]);
        assert!((m - 95.833333).abs() < 1e-5);
        assert!((s - 0.249444).abs() < 1e-5);
        assert_eq!(mean_std(&[70.0]), (70.0, 0.0));
    }

    #[test]
    fn gpu_cost() {
        let cm = CostModel::GpuAmortized {
            gpu_hourly_rate: 2.0,
            queries_per_hour: 1000,
        };
        assert_eq!(format_cents(query_cost(0.0, 0.0, &cm).unwrap()), "0.20");
        let zero = CostModel::GpuAmortized {
            gpu_hourly_rate: 2.0,
            queries_per_hour: 0,
        };
        assert_eq!(query_cost(0.0, 0.0, &zero), Err(CostError::ZeroThroughput));
    }
}
