mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cogscreen::cohort::{
    generate_cohort, load_sessions, persist_results, read_audit, save_sessions, CohortSpec, ParticipantRecord, Session,
};
use cogscreen::examination::Examiner;
use cogscreen::gateway::{ChatBackend, HttpBackend, HttpConfig, Sampling, ScriptedBackend};
use cogscreen::inference::{
    classification_metrics, svm_fit, svm_predict, ClassificationMetrics, KernelSvmModel, Method, PrimitiveSet,
    ScreeningResult,
};
use cogscreen::pipeline::{case_data, gold_record, oracle_for, record_features, score_report, training_set, Pipeline};
use cogscreen::primitives::Stimuli;
use cogscreen::profiler::{generate_report, render_report, Analyst, ReportMode, KNOWLEDGE_DOC};
use cogscreen::task::Label;
use rayon::prelude::*;
use serde::Serialize;

use config::{BackendKind, BoundaryMode, RunConfig};

/// Agentic scoring and screening of spoken cognitive-assessment transcripts.
#[derive(Parser)]
#[command(name = "cogscreen", version)]
struct Cli {
    #[command(flatten)]
    flags: RunFlags,
    #[command(subcommand)]
    command: Command,
}

/// Overrides for config-file keys. A flag beats the file; the file beats
/// the built-in default.
#[derive(Args, Default)]
struct RunFlags {
    /// TOML config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    backend: Option<BackendKind>,
    /// JSON map from request fingerprint to response text
    #[arg(long, global = true)]
    mock_script: Option<PathBuf>,
    /// Model name sent to the live endpoint
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    examiner_temperature: Option<f64>,
    #[arg(long, global = true)]
    verifier_temperature: Option<f64>,
    /// Maximum verifier-triggered retries per task
    #[arg(long, global = true)]
    n_max: Option<u32>,
    #[arg(long, global = true)]
    moca_norms: Option<PathBuf>,
    #[arg(long, global = true)]
    hkllt_norms: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    zero_shot_mode: Option<BoundaryMode>,
    /// Serialized classifier for supervised screening
    #[arg(long, global = true)]
    classifier_model: Option<PathBuf>,
    /// Sessions processed in parallel
    #[arg(long, global = true)]
    concurrency: Option<usize>,
}

impl RunFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            )*};
        }
        apply!(out, backend, examiner_temperature, verifier_temperature, n_max, zero_shot_mode, concurrency);
        if let Some(v) = &self.mock_script {
            cfg.mock_script = Some(v.clone());
        }
        if let Some(v) = &self.model {
            cfg.model = Some(v.clone());
        }
        if let Some(v) = &self.moca_norms {
            cfg.moca_norms = Some(v.clone());
        }
        if let Some(v) = &self.hkllt_norms {
            cfg.hkllt_norms = Some(v.clone());
        }
        if let Some(v) = &self.classifier_model {
            cfg.classifier_model = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Examine every task and report agreement with gold when present
    Score {
        /// Session JSON file or directory of session files
        sessions: PathBuf,
    },
    /// Assign AD/HC labels
    Screen {
        sessions: PathBuf,
        #[arg(long, value_enum, default_value_t = ScreenMode::ZeroShot)]
        mode: ScreenMode,
    },
    /// Fit the RBF-kernel SVM on labelled sessions
    Train {
        sessions: PathBuf,
        /// Train on the gold primitives instead of examining transcripts
        #[arg(long)]
        from_gold: bool,
        /// Use only the task features, without age and education
        #[arg(long)]
        no_demographics: bool,
    },
    /// Write a cognitive profile report per participant
    Report {
        /// Session files, or an audit file when --from-audit is given
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportKind::Template)]
        mode: ReportKind,
        /// Reuse the records of an earlier score or screen run
        #[arg(long)]
        from_audit: bool,
    },
    /// Generate a synthetic cohort with gold annotations
    Simulate {
        /// TOML cohort spec
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        participants: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ad_fraction: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ScreenMode {
    ZeroShot,
    Supervised,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportKind {
    Template,
    Llm,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{failed} participant(s) had errors; see the audit file");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns the number of participants with hard errors.
fn run(cli: Cli) -> Result<usize> {
    let cfg = cli.flags.resolve()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    match cli.command {
        Command::Score { sessions } => cmd_score(&cfg, &read_sessions(&sessions)?),
        Command::Screen { sessions, mode } => cmd_screen(&cfg, &read_sessions(&sessions)?, mode),
        Command::Train { sessions, from_gold, no_demographics } => {
            cmd_train(&cfg, &read_sessions(&sessions)?, from_gold, !no_demographics && cfg.include_demographics)
        }
        Command::Report { input, mode, from_audit } => cmd_report(&cfg, &input, mode, from_audit),
        Command::Simulate { spec, participants, seed, ad_fraction } => {
            let mut spec = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str(&text).with_context(|| format!("parsing cohort spec {}", p.display()))?
                }
                None => CohortSpec::default(),
            };
            spec.n_participants = participants.unwrap_or(spec.n_participants);
            spec.seed = seed.unwrap_or(spec.seed);
            spec.ad_fraction = ad_fraction.unwrap_or(spec.ad_fraction);
            cmd_simulate(&cfg, &spec)
        }
    }
}

fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    let sessions = load_sessions(path).with_context(|| format!("loading sessions from {}", path.display()))?;
    for s in &sessions {
        s.validate()?;
    }
    if sessions.is_empty() {
        bail!("no sessions found in {}", path.display());
    }
    Ok(sessions)
}

fn build_backend(cfg: &RunConfig, sessions: &[Session]) -> Result<Arc<dyn ChatBackend>> {
    Ok(match cfg.backend {
        BackendKind::Live => {
            let mut http = HttpConfig::from_env()?;
            if let Some(m) = &cfg.model {
                http.model = m.clone();
            }
            http.max_in_flight = cfg.concurrency;
            Arc::new(HttpBackend::new(http))
        }
        BackendKind::Mock => {
            let path = cfg.mock_script.as_deref().expect("validated");
            Arc::new(ScriptedBackend::load(path).with_context(|| format!("loading mock script {}", path.display()))?)
        }
        BackendKind::Oracle => Arc::new(oracle_for(sessions, Stimuli::default())),
    })
}

fn thread_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(cfg.concurrency).build()?)
}

fn examine(cfg: &RunConfig, sessions: &[Session]) -> Result<Vec<ParticipantRecord>> {
    let backend = build_backend(cfg, sessions)?;
    let pipeline = Pipeline::new(Examiner::new(backend, cfg.examination()), cfg.norms()?, cfg.zero_shot_mode.into());
    Ok(thread_pool(cfg)?.install(|| sessions.par_iter().map(|s| pipeline.score_session(s)).collect()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Writes the audit and lists failures on stderr.
fn finish(cfg: &RunConfig, records: &[ParticipantRecord]) -> Result<usize> {
    let path = cfg.out.join("audit.json");
    persist_results(records, &path)?;
    let mut failed = 0;
    for r in records {
        if !r.errors.is_empty() {
            failed += 1;
            for e in &r.errors {
                eprintln!("{}: {e}", r.participant_id);
            }
        }
    }
    println!("audit: {}", path.display());
    Ok(failed)
}

fn cmd_score(cfg: &RunConfig, sessions: &[Session]) -> Result<usize> {
    let records = examine(cfg, sessions)?;
    match score_report(&records) {
        Some(report) => {
            println!("{:<16} {:>6} {:>8} {:>8}", "task", "n", "SMR%", "MAE");
            for (task, a) in &report.tasks {
                let mae = a.mae.map_or("-".to_string(), |m| format!("{m:.3}"));
                println!("{:<16} {:>6} {:>8.1} {:>8}", task.as_str(), a.n_gold, a.smr, mae);
            }
            write_json(&cfg.out.join("metrics.json"), &report)?;
        }
        None => println!("no gold primitives; metrics omitted"),
    }
    finish(cfg, &records)
}

#[derive(Serialize)]
struct ScreeningOutput {
    mode: &'static str,
    predictions: BTreeMap<String, Option<ScreeningResult>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<ClassificationMetrics>,
}

fn load_model(cfg: &RunConfig) -> Result<KernelSvmModel> {
    let Some(path) = &cfg.classifier_model else {
        bail!("supervised screening needs classifier_model (--classifier-model or config)");
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    KernelSvmModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn cmd_screen(cfg: &RunConfig, sessions: &[Session], mode: ScreenMode) -> Result<usize> {
    let model = match mode {
        ScreenMode::Supervised => Some(load_model(cfg)?),
        ScreenMode::ZeroShot => None,
    };
    let mut records = examine(cfg, sessions)?;
    if let Some(model) = &model {
        let demographics = model.feature_names == PrimitiveSet::names(true);
        if !demographics && model.feature_names != PrimitiveSet::names(false) {
            bail!("model feature names do not match this build's feature set");
        }
        for r in records.iter_mut() {
            let features = record_features(r);
            let names = PrimitiveSet::names(demographics);
            let missing: Vec<&str> =
                names.iter().zip(&features.missing).filter(|(_, m)| **m).map(|(n, _)| *n).collect();
            if !missing.is_empty() {
                r.warnings.push(format!("features imputed as 0: {}", missing.join(", ")));
            }
            r.screening = match svm_predict(model, &features.vector(demographics)) {
                Ok(p) => Some(ScreeningResult {
                    label: p.label,
                    method: Method::Supervised,
                    triggers: Vec::new(),
                    decision_value: Some(p.decision_value),
                }),
                Err(e) => {
                    r.errors.push(format!("classifier: {e}"));
                    None
                }
            };
        }
    }
    let (mut predicted, mut gold) = (Vec::new(), Vec::new());
    for r in &records {
        let label = r.screening.as_ref().map(|s| s.label);
        println!("{}\t{}", r.participant_id, label.map_or("-".to_string(), |l| l.to_string()));
        if let (Some(p), Some(g)) = (label, r.gold.as_ref().and_then(|g| g.label)) {
            predicted.push(p);
            gold.push(g);
        }
    }
    let metrics = if predicted.is_empty() { None } else { Some(classification_metrics(&predicted, &gold)?) };
    if let Some(m) = &metrics {
        println!(
            "accuracy {:.1}%  F1 {:.1}%  precision {:.1}%  recall {:.1}%",
            m.accuracy, m.f1, m.precision, m.recall
        );
    }
    let output = ScreeningOutput {
        mode: if model.is_some() { "supervised" } else { "zero_shot" },
        predictions: records.iter().map(|r| (r.participant_id.clone(), r.screening.clone())).collect(),
        metrics,
    };
    write_json(&cfg.out.join("screening.json"), &output)?;
    finish(cfg, &records)
}

#[derive(Serialize)]
struct TrainOutput {
    n: usize,
    n_ad: usize,
    n_hc: usize,
    features: Vec<String>,
    iterations: u64,
    converged: bool,
    train: ClassificationMetrics,
}

fn cmd_train(cfg: &RunConfig, sessions: &[Session], from_gold: bool, demographics: bool) -> Result<usize> {
    let records = if from_gold {
        let norms = cfg.norms()?;
        let records: Vec<_> = sessions.iter().filter_map(|s| gold_record(s, &norms)).collect();
        if records.len() < sessions.len() {
            eprintln!("{} session(s) without gold skipped", sessions.len() - records.len());
        }
        records
    } else {
        examine(cfg, sessions)?
    };
    let (x, y, _) = training_set(&records, demographics);
    if x.is_empty() {
        bail!("no session carries a gold label");
    }
    let model = svm_fit(&x, &y, PrimitiveSet::names(demographics), cfg.svm_params())?;
    let predicted: Vec<Label> =
        x.iter().map(|row| svm_predict(&model, row).map(|p| p.label)).collect::<Result<_, _>>()?;
    let train = classification_metrics(&predicted, &y)?;
    let path = cfg.out.join("model.json");
    fs::write(&path, model.to_json()).with_context(|| format!("writing {}", path.display()))?;
    let n_ad = y.iter().filter(|l| l.is_positive()).count();
    write_json(
        &cfg.out.join("train_metrics.json"),
        &TrainOutput {
            n: y.len(),
            n_ad,
            n_hc: y.len() - n_ad,
            features: model.feature_names.clone(),
            iterations: model.iterations as u64,
            converged: model.converged,
            train,
        },
    )?;
    println!("model: {} ({} samples, train accuracy {:.1}%)", path.display(), y.len(), train.accuracy);
    if from_gold {
        Ok(0)
    } else {
        finish(cfg, &records)
    }
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn cmd_report(cfg: &RunConfig, input: &Path, kind: ReportKind, from_audit: bool) -> Result<usize> {
    let (mut records, sessions) = if from_audit {
        let audit = read_audit(input)?;
        (audit.participants.into_values().collect::<Vec<_>>(), Vec::new())
    } else {
        let sessions = read_sessions(input)?;
        (examine(cfg, &sessions)?, sessions)
    };
    let genders: BTreeMap<&str, _> = sessions.iter().map(|s| (s.participant_id.as_str(), s.gender)).collect();
    let mode = match kind {
        ReportKind::Template => ReportMode::Template,
        ReportKind::Llm => ReportMode::Llm,
    };
    let backend = match mode {
        ReportMode::Llm => Some(build_backend(cfg, &sessions)?),
        ReportMode::Template => None,
    };
    let analyst = backend.as_deref().map(|b| Analyst {
        backend: b,
        knowledge_doc: KNOWLEDGE_DOC,
        sampling: Sampling { temperature: cfg.examiner_temperature, ..Sampling::examiner() },
    });
    let profiles: Vec<_> = thread_pool(cfg)?.install(|| {
        records
            .par_iter()
            .map(|r| {
                let triggers = r.screening.as_ref().map(|s| s.triggers.clone()).unwrap_or_default();
                let gender = genders.get(r.participant_id.as_str()).copied().flatten();
                generate_report(&case_data(r, gender), &triggers, mode, analyst.as_ref())
            })
            .collect()
    });
    let dir = cfg.out.join("reports");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (r, profile) in records.iter_mut().zip(profiles) {
        for w in &profile.warnings {
            eprintln!("{}: {w}", r.participant_id);
        }
        let stem = file_stem(&r.participant_id);
        write_json(&dir.join(format!("{stem}.json")), &profile)?;
        fs::write(dir.join(format!("{stem}.txt")), render_report(&profile))?;
        r.profile = Some(profile);
    }
    println!("reports: {} ({} participants)", dir.display(), records.len());
    finish(cfg, &records)
}

fn cmd_simulate(cfg: &RunConfig, spec: &CohortSpec) -> Result<usize> {
    let sessions = generate_cohort(spec, &Stimuli::default())?;
    for s in &sessions {
        s.validate()?;
    }
    let dir = cfg.out.join("sessions");
    let written = save_sessions(&sessions, &dir)?;
    let n_ad = sessions.iter().filter(|s| s.gold.as_ref().and_then(|g| g.label) == Some(Label::Ad)).count();
    println!("{} sessions ({n_ad} AD) written to {}", written.len(), dir.display());
    Ok(0)
}
