//! Command-line front end. Subcommands communicate only through the files
//! named on the command line; all randomness derives from `--seed`.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::{self, FailureSample};
use crate::corpus::{self, IngestOptions, SourceFile};
use crate::drfix::{self, Pipeline, PipelineVariant, RepairInput, RepairTrace, TemplatePack};
use crate::jsonl;
use crate::lang::Language;
use crate::locator::{self, ApiCallSite, LocateOptions};
use crate::metrics::{refusal_rate, OneHotProvider, RefusalDecision, Smoothing};
use crate::modelgw::{
    Backend, Gateway, GatewayLimits, GenParams, GenRequest, HttpBackend, RateLimit, ReplayBackend, ReplayStore,
};
use crate::report::{self, Format, TableSource, TableSpec};
use crate::score::{self, CompletionRecord, Metric, MetricReport, ScoreOptions, ScoredTask};
use crate::taskgen::{self, TaskInstance, TaskKind, TaskOptions};

type Result<T> = std::result::Result<T, Box<dyn std::error::Error + Send + Sync>>;

/// How model requests are served.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReplayPolicy {
    /// Every request must hit a recorded fixture.
    #[default]
    Strict,
    /// Serve from fixtures, forward misses over HTTP and record them.
    Record,
    /// Always call the HTTP backend.
    Off,
}

/// Every tunable of a run. Precedence: defaults, then `--config`, then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; `None` uses every logical CPU.
    pub jobs: Option<usize>,
    pub language: Option<Language>,
    pub exclusions: Vec<String>,
    pub max_file_bytes: u64,
    pub include_stdlib: bool,
    pub cap_per_language: usize,
    pub prefix_char_budget: usize,
    pub suffix_to_eof: bool,
    pub model: String,
    /// Replay store name; defaults to `model`.
    pub backend: Option<String>,
    pub fixtures_dir: PathBuf,
    pub replay: ReplayPolicy,
    /// Overrides the model's completion preset.
    pub completion_params: Option<GenParams>,
    pub repair_params: GenParams,
    pub max_in_flight: usize,
    pub requests_per_minute: Option<u32>,
    pub request_budget: Option<u64>,
    pub metrics: Vec<Metric>,
    pub smoothing: Smoothing,
    pub variant: PipelineVariant,
    pub prompts_dir: Option<PathBuf>,
    pub n_per_cell: usize,
    pub fraction: f64,
    pub clean_count: usize,
    pub format: Format,
    pub strict_report: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: None,
            language: None,
            exclusions: Vec::new(),
            max_file_bytes: corpus::MAX_FILE_BYTES,
            include_stdlib: true,
            cap_per_language: 3000,
            prefix_char_budget: taskgen::PREFIX_CHAR_BUDGET,
            suffix_to_eof: false,
            model: "starcoder".into(),
            backend: None,
            fixtures_dir: PathBuf::from("fixtures"),
            replay: ReplayPolicy::Strict,
            completion_params: None,
            repair_params: GenParams::repair(),
            max_in_flight: 8,
            requests_per_minute: None,
            request_budget: None,
            metrics: vec![Metric::Bleu, Metric::Cbs, Metric::Em],
            smoothing: Smoothing::None,
            variant: PipelineVariant::Full,
            prompts_dir: None,
            n_per_cell: 300,
            fraction: 0.1,
            clean_count: 100,
            format: Format::Txt,
            strict_report: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?)
    }

    fn backend_name(&self) -> &str {
        self.backend.as_deref().unwrap_or(&self.model)
    }

    fn limits(&self) -> GatewayLimits {
        GatewayLimits {
            max_in_flight: self.max_in_flight,
            rate: self.requests_per_minute.map(RateLimit::per_minute),
            budget: self.request_budget,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "apimisuse", version, about = "API-usage completion benchmarks and misuse repair")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress progress lines on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collect parseable Python and Java files into corpus.jsonl.
    Ingest(IngestArgs),
    /// Find resolvable API call sites and draw the deduplicated sample.
    Localize(LocalizeArgs),
    /// Mask call sites into completion tasks.
    GenTasks(GenTasksArgs),
    /// Query a model backend for every task.
    Complete(CompleteArgs),
    /// Score completions and write report.json.
    Score(ScoreArgs),
    /// Draw EM failures per (model, kind, language) cell for annotation.
    SampleFailures(SampleFailuresArgs),
    /// Build the stratified mitigation set from labels.
    MitigationSet(MitigationArgs),
    /// Run the repair pipeline over snippets.
    Drfix(DrfixArgs),
    /// Render tables from report.json files and labels.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    root: PathBuf,
    #[arg(long, default_value = "corpus.jsonl")]
    out: PathBuf,
    /// Manifest path; defaults to manifest.json beside --out.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    language: Option<Language>,
    #[arg(long = "exclude")]
    exclude: Vec<String>,
    #[arg(long)]
    max_file_bytes: Option<u64>,
    #[arg(long)]
    repo: Option<String>,
}

#[derive(Debug, Args)]
struct LocalizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "callsites.jsonl")]
    out: PathBuf,
    /// Distinct signatures kept per language.
    #[arg(long)]
    cap: Option<usize>,
    /// Write every located site instead of the deduplicated sample.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    no_stdlib: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Method,
    Param,
    Both,
}

#[derive(Debug, Args)]
struct GenTasksArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    callsites: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
    #[arg(long, default_value = "tasks.jsonl")]
    out: PathBuf,
    #[arg(long)]
    prefix_budget: Option<usize>,
    #[arg(long)]
    suffix_to_eof: bool,
}

#[derive(Debug, Args)]
struct BackendArgs {
    #[arg(long)]
    model: Option<String>,
    /// Replay store name; defaults to the model name.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, value_enum)]
    replay: Option<ReplayPolicy>,
}

#[derive(Debug, Args)]
struct CompleteArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long, default_value = "completions.jsonl")]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    tasks: PathBuf,
    /// Completions file; repeat for several models.
    #[arg(long, required = true)]
    completions: Vec<PathBuf>,
    /// Comma-separated subset of bleu, cbs, em.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<Metric>>,
    #[arg(long, value_enum)]
    smoothing: Option<SmoothingArg>,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Per-task scores.
    #[arg(long, default_value = "scored.jsonl")]
    scored_out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SmoothingArg {
    None,
    AddOne,
}

impl From<SmoothingArg> for Smoothing {
    fn from(s: SmoothingArg) -> Self {
        match s {
            SmoothingArg::None => Smoothing::None,
            SmoothingArg::AddOne => Smoothing::AddOne,
        }
    }
}

#[derive(Debug, Args)]
struct SampleFailuresArgs {
    #[arg(long)]
    scored: PathBuf,
    #[arg(long = "n")]
    n_per_cell: Option<usize>,
    #[arg(long, default_value = "failures.jsonl")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MitigationArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    scored: PathBuf,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    clean_count: Option<usize>,
    #[arg(long, default_value = "mitigation.json")]
    out: PathBuf,
    /// With --completions, also write the repair snippets here.
    #[arg(long, requires = "completions")]
    tasks: Option<PathBuf>,
    #[arg(long, requires = "tasks")]
    completions: Vec<PathBuf>,
    #[arg(long, default_value = "snippets.jsonl")]
    inputs_out: PathBuf,
}

#[derive(Debug, Args)]
struct DrfixArgs {
    /// Repair snippets, one per line.
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    variant: Option<PipelineVariant>,
    /// Template pack directory; the bundled pack is used when absent.
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long, default_value = "repairs.jsonl")]
    out: PathBuf,
    /// Scores of repaired code against references, in report.json shape.
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// report.json files, optionally as PATH=METHOD.
    #[arg(long = "input")]
    inputs: Vec<String>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long, default_value = "reports")]
    out_dir: PathBuf,
    #[arg(long)]
    strict: bool,
    /// Misuse labels; adds a category distribution table.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Per-task scores; with --overlap adds failure-overlap tables.
    #[arg(long)]
    scored: Option<PathBuf>,
    /// Three model names, comma-separated.
    #[arg(long, value_delimiter = ',', requires = "scored")]
    overlap: Option<Vec<String>>,
}

/// Parses `argv` (including the program name) and runs it. Returns the
/// process exit code: 0 success, 1 operation error, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.global.jobs {
        cfg.jobs = Some(j);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build()?;
    let quiet = cli.global.quiet;
    let say = |msg: String| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    pool.install(|| match cli.command {
        Command::Ingest(a) => ingest(a, cfg, &say),
        Command::Localize(a) => localize(a, cfg, &say),
        Command::GenTasks(a) => gen_tasks(a, cfg, &say),
        Command::Complete(a) => complete(a, cfg, &say),
        Command::Score(a) => score_cmd(a, cfg, &say),
        Command::SampleFailures(a) => sample_failures(a, cfg, &say),
        Command::MitigationSet(a) => mitigation_set(a, cfg, &say),
        Command::Drfix(a) => drfix_cmd(a, cfg, &say),
        Command::Report(a) => report_cmd(a, cfg, &say),
    })
}

fn read_all<T: serde::de::DeserializeOwned>(paths: &[PathBuf]) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(jsonl::read::<T>(p)?);
    }
    Ok(out)
}

type Say<'a> = &'a (dyn Fn(String) + Sync);

fn ingest(a: IngestArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    cfg.language = a.language.or(cfg.language);
    cfg.exclusions.extend(a.exclude);
    cfg.max_file_bytes = a.max_file_bytes.unwrap_or(cfg.max_file_bytes);
    let opts = IngestOptions {
        language: cfg.language,
        exclusions: cfg.exclusions,
        max_file_bytes: cfg.max_file_bytes,
        seed: cfg.seed,
        repo: a.repo,
    };
    let c = corpus::ingest(&a.root, &opts)?;
    jsonl::write(&a.out, &c.files)?;
    let manifest = a.manifest.unwrap_or_else(|| a.out.with_file_name("manifest.json"));
    jsonl::write_json(&manifest, &c.manifest)?;
    say(format!(
        "ingest: kept {} of {} files ({} skipped) -> {}",
        c.files.len(),
        c.manifest.discovered,
        c.manifest.skipped.len(),
        a.out.display()
    ));
    Ok(())
}

fn localize(a: LocalizeArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    cfg.include_stdlib &= !a.no_stdlib;
    cfg.cap_per_language = a.cap.unwrap_or(cfg.cap_per_language);
    let files: Vec<SourceFile> = jsonl::read(&a.corpus)?;
    let opts = LocateOptions { include_stdlib: cfg.include_stdlib };
    let per_file: Vec<Vec<ApiCallSite>> =
        files.par_iter().map(|f| locator::locate_with(f, &opts)).collect::<std::result::Result<_, _>>()?;
    let sites: Vec<ApiCallSite> = per_file.into_iter().flatten().collect();
    let out = if a.all { sites.clone() } else { locator::dedup_sample(&sites, cfg.cap_per_language, cfg.seed) };
    jsonl::write(&a.out, &out)?;
    say(format!("localize: {} sites located, {} written -> {}", sites.len(), out.len(), a.out.display()));
    Ok(())
}

fn gen_tasks(a: GenTasksArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    cfg.prefix_char_budget = a.prefix_budget.unwrap_or(cfg.prefix_char_budget);
    cfg.suffix_to_eof |= a.suffix_to_eof;
    let files: Vec<SourceFile> = jsonl::read(&a.corpus)?;
    let sites: Vec<ApiCallSite> = jsonl::read(&a.callsites)?;
    let by_id: BTreeMap<&str, &SourceFile> = files.iter().map(|f| (f.file_id.as_str(), f)).collect();
    let kinds: &[TaskKind] = match a.kind {
        KindArg::Method => &[TaskKind::MethodInfill],
        KindArg::Param => &[TaskKind::ParamCompletion],
        KindArg::Both => &[TaskKind::MethodInfill, TaskKind::ParamCompletion],
    };
    let opts = TaskOptions { prefix_char_budget: cfg.prefix_char_budget, suffix_to_eof: cfg.suffix_to_eof };
    let mut tasks = Vec::new();
    for site in &sites {
        let file =
            by_id.get(site.file_id.as_str()).ok_or_else(|| format!("site {} names unknown file", site.site_id))?;
        for k in kinds {
            tasks.push(taskgen::gen_task(*k, site, file, &opts)?);
        }
    }
    jsonl::write(&a.out, &tasks)?;
    say(format!("gen-tasks: {} tasks from {} sites -> {}", tasks.len(), sites.len(), a.out.display()));
    Ok(())
}

fn apply_backend_args(b: &BackendArgs, cfg: &mut RunConfig) {
    if let Some(m) = &b.model {
        cfg.model = m.clone();
    }
    if b.backend.is_some() {
        cfg.backend = b.backend.clone();
    }
    if let Some(f) = &b.fixtures {
        cfg.fixtures_dir = f.clone();
    }
    cfg.replay = b.replay.unwrap_or(cfg.replay);
}

/// The gateway for `cfg` plus the replay store to compact after recording.
fn build_gateway(cfg: &RunConfig) -> Result<(Gateway, Option<Arc<ReplayStore>>)> {
    let name = cfg.backend_name().to_string();
    let backend: Arc<dyn Backend> = match cfg.replay {
        ReplayPolicy::Off => Arc::new(HttpBackend::from_env(&name)?),
        ReplayPolicy::Strict | ReplayPolicy::Record => {
            let path = ReplayStore::path_for(&cfg.fixtures_dir, &name);
            let store = Arc::new(ReplayStore::open(&path)?);
            if cfg.replay == ReplayPolicy::Strict {
                if store.is_empty() {
                    log::warn!("replay store {} is empty", path.display());
                }
                Arc::new(ReplayBackend::strict(&name, store))
            } else {
                let inner = Box::new(HttpBackend::from_env(&name)?);
                let gw = Gateway::new(Arc::new(ReplayBackend::recording(&name, store.clone(), inner)), cfg.limits());
                return Ok((gw, Some(store)));
            }
        }
    };
    Ok((Gateway::new(backend, cfg.limits()), None))
}

/// Method tasks use fill-in-the-middle; parameter tasks see only the prefix.
pub fn completion_request(task: &TaskInstance, model: &str, params: GenParams) -> GenRequest {
    match task.kind {
        TaskKind::MethodInfill => GenRequest::fill_in_middle(model, &task.prefix, &task.suffix, params),
        TaskKind::ParamCompletion => GenRequest::left_to_right(model, &task.prefix, params),
    }
}

fn complete(a: CompleteArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    apply_backend_args(&a.backend, &mut cfg);
    let tasks: Vec<TaskInstance> = jsonl::read(&a.tasks)?;
    let (gw, recording) = build_gateway(&cfg)?;
    let params = cfg.completion_params.unwrap_or_else(|| GenParams::completion_preset(&cfg.model));
    let records: Vec<CompletionRecord> = tasks
        .par_iter()
        .map(|t| {
            let resp = gw.generate(&completion_request(t, &cfg.model, params))?;
            Ok(CompletionRecord { task_id: t.task_id.clone(), model: cfg.model.clone(), raw: resp.text })
        })
        .collect::<Result<_>>()?;
    if let Some(store) = recording {
        store.compact()?;
    }
    jsonl::write(&a.out, &records)?;
    say(format!("complete: {} completions from {} -> {}", records.len(), gw.backend_name(), a.out.display()));
    Ok(())
}

fn score_cmd(a: ScoreArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    if let Some(m) = a.metrics {
        cfg.metrics = m;
    }
    if let Some(s) = a.smoothing {
        cfg.smoothing = s.into();
    }
    let tasks: Vec<TaskInstance> = jsonl::read(&a.tasks)?;
    let completions = read_all::<CompletionRecord>(&a.completions)?;
    let opts = ScoreOptions { metrics: cfg.metrics.iter().copied().collect(), smoothing: cfg.smoothing };
    let scored = score::score_all(&tasks, &completions, &opts, &OneHotProvider::new())?;
    let report = score::aggregate(&scored, &opts);
    jsonl::write(&a.scored_out, &scored)?;
    jsonl::write_json(&a.out, &report)?;
    say(format!("score: {} completions scored -> {}", scored.len(), a.out.display()));
    Ok(())
}

fn sample_failures(a: SampleFailuresArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    cfg.n_per_cell = a.n_per_cell.unwrap_or(cfg.n_per_cell);
    let scored: Vec<ScoredTask> = jsonl::read(&a.scored)?;
    let sample: Vec<FailureSample> = annotate::sample_failures(&scored, cfg.n_per_cell, cfg.seed)?;
    jsonl::write(&a.out, &sample)?;
    say(format!("sample-failures: {} failures -> {}", sample.len(), a.out.display()));
    Ok(())
}

fn mitigation_set(a: MitigationArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    cfg.fraction = a.fraction.unwrap_or(cfg.fraction);
    cfg.clean_count = a.clean_count.unwrap_or(cfg.clean_count);
    let labels = annotate::read_labels(&a.labels)?;
    let scored: Vec<ScoredTask> = jsonl::read(&a.scored)?;
    annotate::check_labels(&labels, &scored)?;
    let set = annotate::build_mitigation_set(&labels, &scored, cfg.fraction, cfg.clean_count, cfg.seed)?;
    jsonl::write_json(&a.out, &set)?;
    say(format!("mitigation-set: {} misused, {} clean -> {}", set.misused.len(), set.clean.len(), a.out.display()));
    if let Some(t) = &a.tasks {
        let tasks: Vec<TaskInstance> = jsonl::read(t)?;
        let completions = read_all::<CompletionRecord>(&a.completions)?;
        let inputs = drfix::repair_inputs(&set, &tasks, &completions)?;
        jsonl::write(&a.inputs_out, &inputs)?;
        say(format!("mitigation-set: {} repair snippets -> {}", inputs.len(), a.inputs_out.display()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RepairFailure {
    task_id: String,
    error: String,
}

fn drfix_cmd(a: DrfixArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    apply_backend_args(&a.backend, &mut cfg);
    cfg.variant = a.variant.unwrap_or(cfg.variant);
    if a.prompts.is_some() {
        cfg.prompts_dir = a.prompts;
    }
    let pack = match &cfg.prompts_dir {
        Some(d) => TemplatePack::load(d)?,
        None => TemplatePack::builtin(),
    };
    let inputs: Vec<RepairInput> = jsonl::read(&a.inputs)?;
    let (gw, recording) = build_gateway(&cfg)?;
    let pipeline = Pipeline { gateway: &gw, pack: &pack, model: cfg.model.clone(), params: cfg.repair_params };
    let outcomes: Vec<std::result::Result<RepairTrace, drfix::DrFixError>> =
        inputs.par_iter().map(|i| pipeline.run(i, cfg.variant)).collect();
    if let Some(store) = recording {
        store.compact()?;
    }
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for (input, o) in inputs.iter().zip(outcomes) {
        match o {
            Ok(t) => traces.push(t),
            Err(drfix::DrFixError::Gateway(e)) => return Err(e.into()),
            Err(e) => failures.push(RepairFailure { task_id: input.task_id.clone(), error: e.to_string() }),
        }
    }
    jsonl::write(&a.out, &traces)?;
    if !failures.is_empty() {
        let path = a.out.with_extension("errors.jsonl");
        jsonl::write(&path, &failures)?;
        say(format!("drfix: {} snippets failed -> {}", failures.len(), path.display()));
    }
    let clean: BTreeSet<&str> = inputs
        .iter()
        .filter(|i| i.reference.as_deref() == Some(i.snippet.as_str()))
        .map(|i| i.task_id.as_str())
        .collect();
    let decisions: Vec<RefusalDecision> = traces
        .iter()
        .map(|t| RefusalDecision { is_clean: clean.contains(t.task_id.as_str()), model_said_no_issue: t.refused })
        .collect();
    let refusal = refusal_rate(&decisions).map(|r| format!("{r:.1}%")).unwrap_or_else(|_| report::MISSING.into());
    say(format!("drfix: {} traces ({}), refusal rate {refusal} -> {}", traces.len(), cfg.variant, a.out.display()));
    if let Some(path) = a.report_out {
        let opts = ScoreOptions { metrics: cfg.metrics.iter().copied().collect(), smoothing: cfg.smoothing };
        let scored = score::score_repairs(&inputs, &traces, &cfg.model, &opts, &OneHotProvider::new())?;
        jsonl::write_json(&path, &score::aggregate(&scored, &opts))?;
    }
    Ok(())
}

fn report_cmd(a: ReportArgs, mut cfg: RunConfig, say: Say) -> Result<()> {
    cfg.format = a.format.unwrap_or(cfg.format);
    cfg.strict_report |= a.strict;
    let ext = cfg.format.extension();
    fs::create_dir_all(&a.out_dir)?;
    let mut written = Vec::new();

    let mut loaded: Vec<(String, MetricReport)> = Vec::new();
    for spec in &a.inputs {
        let (path, method) = match spec.split_once('=') {
            Some((p, m)) => (PathBuf::from(p), m.to_string()),
            None => (PathBuf::from(spec), "completion".to_string()),
        };
        loaded.push((method, jsonl::read_json(&path)?));
    }
    if !loaded.is_empty() {
        let sources: Vec<TableSource> =
            loaded.iter().map(|(m, r)| TableSource { method: m.clone(), report: r }).collect();
        let spec = TableSpec { strict: cfg.strict_report, ..Default::default() };
        let table = report::build_table(&spec, &sources)?;
        let path = a.out_dir.join(format!("metrics.{ext}"));
        fs::write(&path, report::render_table(&table, cfg.format))?;
        written.push(path);
    }
    if let Some(l) = &a.labels {
        let cells = annotate::distribution(&annotate::read_labels(l)?)?;
        let path = a.out_dir.join(format!("distribution.{ext}"));
        fs::write(&path, report::render_distribution(&cells, cfg.format))?;
        written.push(path);
    }
    if let (Some(s), Some(models)) = (&a.scored, &a.overlap) {
        let [ma, mb, mc] =
            <[String; 3]>::try_from(models.clone()).map_err(|_| "--overlap takes exactly three model names")?;
        let scored: Vec<ScoredTask> = jsonl::read(s)?;
        let cells: BTreeSet<(Language, TaskKind)> = scored.iter().map(|s| (s.language, s.kind)).collect();
        let mut out = String::new();
        for (language, kind) in cells {
            let failed = |m: &str| -> BTreeSet<&str> {
                scored
                    .iter()
                    .filter(|s| s.model == m && s.language == language && s.kind == kind && !s.em)
                    .map(|s| s.task_id.as_str())
                    .collect()
            };
            let p = report::overlap_partition(&failed(&ma), &failed(&mb), &failed(&mc));
            if cfg.format == Format::Txt {
                out.push_str(&format!("{} -- {}\n", language.display_name(), kind));
            }
            out.push_str(&report::render_overlap([&ma, &mb, &mc], &p, cfg.format));
        }
        let path = a.out_dir.join(format!("overlap.{ext}"));
        fs::write(&path, out)?;
        written.push(path);
    }
    if written.is_empty() {
        return Err("nothing to report: pass --input, --labels or --scored with --overlap".into());
    }
    for p in written {
        say(format!("report: wrote {}", p.display()));
    }
    Ok(())
}
