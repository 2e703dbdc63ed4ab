//! Command-line front ends shared by the `taskgen` and `eval` binaries and
//! the `fulfil` service binary.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Subcommand, ValueEnum};
use fulfil_core::Hosts;

use crate::eval::{
    build_report, compute_metrics, render_report_csv, render_sweep_csv, render_table, run_eval, score_records, sweep,
    CostModel, EvalRecord, ReportRow, ReportSpec,
};
use crate::remote::RemoteSpec;
use crate::router::{BackendSpec, Router, DEFAULT_THETA};
use crate::taskgen::{
    export_training_config, generate_dataset, load_ood_pool, read_jsonl, write_jsonl, DatasetRecord, PerturbationConfig,
    DEFAULT_DISTRACTIONS,
};
use crate::templates::TemplateLibrary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Fixture,
    Remote,
}

/// Backend selection flags.
#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value = "fixture")]
    pub backend: BackendKind,
    /// Template directory for the fixture backend.
    #[arg(long, default_value = "templates")]
    pub templates: PathBuf,
    /// Similarity threshold for the fixture backend.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long, env = "FULFIL_BACKEND_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long = "remote-model", env = "FULFIL_MODEL")]
    pub remote_model: Option<String>,
    #[arg(long, env = "FULFIL_AUTH_HEADER")]
    pub auth_header: Option<String>,
    #[arg(long, env = "FULFIL_AUTH_VALUE", hide_env_values = true)]
    pub auth_value: Option<String>,
    #[arg(long, default_value_t = 500)]
    pub max_output_tokens: u32,
    #[arg(long, default_value_t = 1024)]
    pub max_input_tokens: u32,
    /// Gate prompt file with a `{query}` hole.
    #[arg(long)]
    pub gate_prompt: Option<PathBuf>,
    /// Coder prompt file with a `{query}` hole.
    #[arg(long)]
    pub coder_prompt: Option<PathBuf>,
}

impl BackendArgs {
    pub fn spec(&self) -> anyhow::Result<BackendSpec> {
        Ok(match self.backend {
            BackendKind::Fixture => BackendSpec::Fixture {
                templates: self.templates.clone(),
                theta: self.theta,
            },
            BackendKind::Remote => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .context("the remote backend needs --endpoint or FULFIL_BACKEND_ENDPOINT")?;
                let model = self
                    .remote_model
                    .clone()
                    .context("the remote backend needs --remote-model or FULFIL_MODEL")?;
                let read = |p: &Option<PathBuf>| -> anyhow::Result<Option<String>> {
                    p.as_ref()
                        .map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
                        .transpose()
                };
                let mut r = RemoteSpec::new(endpoint, model);
                r.auth_header = self.auth_header.clone();
                r.auth_value = self.auth_value.clone();
                r.max_output_tokens = self.max_output_tokens;
                r.max_input_tokens = self.max_input_tokens;
                r.gate_prompt = read(&self.gate_prompt)?;
                r.coder_prompt = read(&self.coder_prompt)?;
                BackendSpec::Remote(r)
            }
        })
    }

    pub fn router(&self) -> anyhow::Result<Router> {
        let backend = self.spec()?.build()?;
        Ok(Router::new(backend))
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value = "templates")]
    pub templates: PathBuf,
    #[arg(long)]
    pub shots: usize,
    #[arg(long, default_value_t = 0.0)]
    pub ood_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Off-topic queries, one per line.
    #[arg(long, default_value = "data/ood_pool.txt")]
    pub ood_pool: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub typo_rate: f64,
    /// Distraction phrase; repeatable. `--distractions` uses a built-in set.
    #[arg(long = "distraction")]
    pub distraction: Vec<String>,
    #[arg(long)]
    pub distractions: bool,
    #[arg(long, default_value_t = 0.5)]
    pub distraction_rate: f64,
    /// Also write the fine-tuning hyperparameters here.
    #[arg(long)]
    pub training_config: Option<PathBuf>,
}

pub fn run_gen(args: &GenArgs) -> anyhow::Result<()> {
    let lib = TemplateLibrary::load_dir(&args.templates)?;
    let pool = if args.ood_fraction > 0.0 {
        load_ood_pool(&args.ood_pool)?
    } else {
        Vec::new()
    };
    let mut phrases = args.distraction.clone();
    if args.distractions {
        phrases.extend(DEFAULT_DISTRACTIONS.iter().map(|s| s.to_string()));
    }
    let cfg = PerturbationConfig {
        typo_rate: args.typo_rate,
        distraction_phrases: phrases,
        distraction_rate: args.distraction_rate,
        seed: args.seed,
    };
    let records = generate_dataset(&lib, &pool, args.shots, args.ood_fraction, &cfg)?;
    write_jsonl(&args.out, &records)?;
    let ood = records.iter().filter(|r| !r.in_domain).count();
    println!(
        "wrote {} records ({} in-domain, {} out-of-domain) to {}",
        records.len(),
        records.len() - ood,
        ood,
        args.out.display()
    );
    if let Some(path) = &args.training_config {
        export_training_config(path)?;
        println!("wrote training config to {}", path.display());
    }
    Ok(())
}

#[derive(Debug, Clone, Subcommand)]
pub enum EvalCommand {
    /// Route a dataset through a backend, judge and report.
    Run(RunArgs),
    /// Judge an external predictions file.
    Judge(JudgeArgs),
    /// Accuracy against shot count as CSV.
    Sweep(SpecArgs),
    /// Accuracy and cost table over several models and methods.
    Report(SpecArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
    #[arg(long, default_value = "data/reference")]
    pub instance: PathBuf,
    /// Per-record results as JSONL.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Report label.
    #[arg(long, default_value = "fixture")]
    pub label: String,
    #[arg(long, default_value = "live")]
    pub method: String,
    /// CSV copy of the report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct JudgeArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value = "data/reference")]
    pub instance: PathBuf,
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long, default_value = "predictions")]
    pub label: String,
    #[arg(long, default_value = "file")]
    pub method: String,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report only: CSV copy.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn single_row(label: &str, method: &str, run: &crate::eval::EvalRun) -> ReportRow {
    ReportRow {
        model: label.to_string(),
        method: method.to_string(),
        shots: None,
        runs: 1,
        overall: (run.metrics.overall_acc, 0.0),
        coder: (run.metrics.coder_acc, 0.0),
        f1: (run.metrics.f1_ood, 0.0),
        cost_cents: run.mean_cost_cents,
        note: None,
    }
}

fn finish(run: &crate::eval::EvalRun, label: &str, method: &str, records: &Option<PathBuf>, csv: &Option<PathBuf>) -> anyhow::Result<()> {
    if let Some(p) = records {
        write_jsonl(p, &run.records)?;
    }
    let rows = [single_row(label, method, run)];
    print!("{}", render_table(&rows));
    println!("{}", serde_json::to_string(&run.metrics)?);
    if let Some(p) = csv {
        fs::write(p, render_report_csv(&rows))?;
    }
    Ok(())
}

fn load_cost(path: &Option<PathBuf>) -> anyhow::Result<Option<CostModel>> {
    path.as_ref().map(CostModel::load).transpose()
}

pub fn run_eval_command(cmd: &EvalCommand) -> anyhow::Result<()> {
    match cmd {
        EvalCommand::Run(a) => {
            let dataset: Vec<DatasetRecord> = read_jsonl(&a.dataset)?;
            if dataset.is_empty() {
                bail!("{} holds no records", a.dataset.display());
            }
            let router = a.backend.router()?;
            let base = Hosts::load(&a.instance)?;
            let cm = load_cost(&a.cost_model)?;
            let run = run_eval(&dataset, &router, &base, cm.as_ref())?;
            finish(&run, &a.label, &a.method, &a.records, &a.csv)
        }
        EvalCommand::Judge(a) => {
            let records: Vec<EvalRecord> = read_jsonl(&a.predictions)?;
            let base = Hosts::load(&a.instance)?;
            let cm = load_cost(&a.cost_model)?;
            let run = score_records(records, &base, cm.as_ref())?;
            debug_assert_eq!(compute_metrics(&run.records).ok().as_ref(), Some(&run.metrics));
            finish(&run, &a.label, &a.method, &a.records, &a.csv)
        }
        EvalCommand::Sweep(a) => {
            let spec = ReportSpec::load(&a.spec)?;
            let base = Hosts::load(&spec.instance)?;
            let rows = build_report(&spec, &base)?;
            emit(&a.out, &render_sweep_csv(&sweep(&rows)))
        }
        EvalCommand::Report(a) => {
            let spec = ReportSpec::load(&a.spec)?;
            let base = Hosts::load(&spec.instance)?;
            let rows = build_report(&spec, &base)?;
            emit(&a.out, &render_table(&rows))?;
            if let Some(p) = &a.csv {
                fs::write(p, render_report_csv(&rows))?;
            }
            Ok(())
        }
    }
}

/// Logs to stderr, filtered by `RUST_LOG` (default `info`).
pub fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}
