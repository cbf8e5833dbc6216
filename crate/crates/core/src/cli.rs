//! Command-line front end behind the `drivethru` binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 partial failure.
//! Settings resolve as flags, then the key=value config file named by
//! `--config` or `DRIVETHRU_CONFIG`, then built-in defaults. With `--json`
//! stdout carries exactly one JSON document; logs go to stderr.

use std::collections::HashMap;
use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{self, BenchDeps, ReportFormat, System};
use crate::corrector::{self, EchoBackend, HttpBackend, HttpBackendConfig, LlmBackend, TableBackend};
use crate::imaging::{self, PageImage, PreprocessConfig};
use crate::lexicon::{self, Dictionary};
use crate::metrics::EvalRecord;
use crate::ocr::{self, FakeEngine, OcrConfig, OcrEngine, TesseractEngine};
use crate::pipeline::{
    self, CorrectionJob, CorrectionMode, JobOptions, JobStatus, PipelineDeps, UploadedFile,
};
use crate::service::{self, ServiceConfig};

pub const CONFIG_ENV: &str = "DRIVETHRU_CONFIG";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Partial(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) | Self::Partial(m) => f.write_str(m),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "drivethru", version, about = "Scanned-page OCR with dictionary-guided LLM post-correction")]
pub struct Cli {
    /// key=value config file; flags override its values
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preprocess, recognize and optionally correct images.
    ///
    /// Unlike the HTTP service, which accepts at most 5 images per upload,
    /// the CLI takes any number of images.
    Extract(ExtractArgs),
    /// Write the preprocessed (binarized) form of each image as PNG.
    Preprocess(PreprocessArgs),
    /// Print raw OCR text for each image.
    Ocr(OcrArgs),
    /// Post-correct an OCR text file (or stdin with `-`).
    Correct(CorrectArgs),
    /// Score a hypothesis text against ground truth.
    Eval(EvalArgs),
    /// Benchmark tools.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Dictionary tools.
    #[command(subcommand)]
    Dict(DictCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Run every manifest document through each system and write a report.
    Run(BenchRunArgs),
}

#[derive(Debug, Subcommand)]
pub enum DictCommand {
    /// Check a tab-separated dictionary file; reports offending line numbers.
    Validate {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// OCR engine binary [config: ocr_bin]
    #[arg(long)]
    pub ocr_bin: Option<PathBuf>,
    /// Canned OCR output as JSON {"<image name or sha256>": "text"} instead of a real engine
    #[arg(long)]
    pub fake_ocr: Option<PathBuf>,
    /// OCR engine language model, e.g. `ind` [config: ocr_lang]
    #[arg(long)]
    pub ocr_lang: Option<String>,
    /// Page segmentation mode [config: psm]
    #[arg(long)]
    pub psm: Option<u8>,
    /// Engine mode [config: oem]
    #[arg(long)]
    pub oem: Option<u8>,
    /// Per-page OCR timeout [config: ocr_timeout_ms]
    #[arg(long)]
    pub ocr_timeout_ms: Option<u64>,
    /// Minimum page width before upscaling [config: min_width]
    #[arg(long)]
    pub min_width: Option<u32>,
    /// Images processed concurrently [config: parallelism]
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CorrectionArgs {
    /// Language code, e.g. jav [config: lang]
    #[arg(long)]
    pub lang: Option<String>,
    /// none | zero_shot | few_shot [config: mode]
    #[arg(long)]
    pub mode: Option<String>,
    /// Dictionary file (word<TAB>gloss) for few-shot hints [config: dict]
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Directory of <lang>.tsv dictionaries [config: dict_dir]
    #[arg(long)]
    pub dict_dir: Option<PathBuf>,
    /// Backend as [id=]echo | [id=]mock:<table.json> | [id=]http (env-configured) [config: backend]
    #[arg(long)]
    pub backend: Vec<String>,
    /// Seed for similar-word sampling [config: seed]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [config: sim_threshold]
    #[arg(long)]
    pub sim_threshold: Option<f64>,
    /// Drop tokens with more dictionary matches than this [config: k_max]
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Maximum hint pairs per prompt [config: pair_cap]
    #[arg(long)]
    pub pair_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub correction: CorrectionArgs,
    /// Output directory [config: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write <name>.preprocessed.png
    #[arg(long)]
    pub dump_preprocessed: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub min_width: Option<u32>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct OcrArgs {
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    /// OCR text file, `-` for stdin
    pub input: PathBuf,
    #[command(flatten)]
    pub correction: CorrectionArgs,
    /// Print the rendered prompt instead of calling a backend
    #[arg(long)]
    pub print_prompt: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long, default_value = "")]
    pub lang: String,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchRunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated: ots, <backend>-zs, <backend>-fs
    #[arg(long, default_value = "ots")]
    pub systems: String,
    /// Report file; printed to stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// table | json | csv; defaults from the --out extension, else table
    #[arg(long)]
    pub format: Option<String>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub correction: CorrectionArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// host:port [config: listen]
    #[arg(long)]
    pub listen: Option<String>,
    /// Job store directory [config: data_dir, env DRIVETHRU_DATA_DIR]
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Default correction mode for uploads without one [config: mode_default]
    #[arg(long)]
    pub mode_default: Option<String>,
    /// Static assets served under / [config: static_dir]
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Allowed CORS origin, repeatable; `*` for any [config: cors_origin]
    #[arg(long)]
    pub cors_origin: Vec<String>,
    /// Concurrent jobs [config: workers]
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub correction: CorrectionArgs,
}

/// Parsed `key = value` file. `#` starts a comment line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| format!("config line {}: expected key=value", idx + 1))?;
            let v = v.trim();
            let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
            values.insert(k.trim().to_string(), v.to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Flag value if given, else the parsed file value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                v.parse().map(Some).map_err(|_| config_err(format!("config key {key}: invalid value {v:?}")))
            }
        }
    }
}

fn read_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p).map_err(CliError::Config),
        None => Ok(ConfigFile::default()),
    }
}

fn ocr_config(args: &EngineArgs, cfg: &ConfigFile) -> CliResult<OcrConfig> {
    let mut ocr = OcrConfig::from_env();
    if let Some(bin) = cfg.pick(args.ocr_bin.clone(), "ocr_bin")? {
        ocr.engine_path = bin;
    }
    ocr.language = cfg.pick(args.ocr_lang.clone(), "ocr_lang")?.or(ocr.language);
    ocr.page_seg_mode = cfg.pick(args.psm, "psm")?.unwrap_or(ocr.page_seg_mode);
    ocr.engine_mode = cfg.pick(args.oem, "oem")?.unwrap_or(ocr.engine_mode);
    ocr.timeout_ms = cfg.pick(args.ocr_timeout_ms, "ocr_timeout_ms")?.unwrap_or(ocr.timeout_ms);
    ocr.validate().map_err(config_err)?;
    Ok(ocr)
}

fn engine(args: &EngineArgs, cfg: &ConfigFile) -> CliResult<Arc<dyn OcrEngine>> {
    match cfg.pick(args.fake_ocr.clone(), "fake_ocr")? {
        Some(path) => {
            let json =
                std::fs::read_to_string(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            Ok(Arc::new(
                FakeEngine::from_json(&json).map_err(|e| config_err(format!("{}: {e}", path.display())))?,
            ))
        }
        None => Ok(Arc::new(TesseractEngine)),
    }
}

fn preprocess_config(min_width: Option<u32>, cfg: &ConfigFile) -> CliResult<PreprocessConfig> {
    let mut pre = PreprocessConfig::default();
    pre.min_width = cfg.pick(min_width, "min_width")?.unwrap_or(pre.min_width);
    pre.blur_kernel = cfg.pick(None, "blur_kernel")?.unwrap_or(pre.blur_kernel);
    pre.validate().map_err(config_err)?;
    Ok(pre)
}

/// A `--backend` value: `[id=]echo`, `[id=]mock:<file>` or `[id=]http`.
pub fn parse_backend(spec: &str) -> CliResult<Arc<dyn LlmBackend>> {
    let (id, kind) = match spec.split_once('=') {
        Some((id, kind)) => (Some(id.trim().to_string()), kind.trim()),
        None => (None, spec.trim()),
    };
    if kind == "echo" {
        return Ok(match id {
            None => Arc::new(EchoBackend::new()),
            Some(id) => Arc::new(Named { id, inner: EchoBackend::new() }),
        });
    }
    if let Some(path) = kind.strip_prefix("mock:") {
        let json = std::fs::read_to_string(path).map_err(|e| config_err(format!("{path}: {e}")))?;
        let table = TableBackend::from_json(id.unwrap_or_else(|| "mock".into()), &json)
            .map_err(|e| config_err(format!("{path}: {e}")))?;
        return Ok(Arc::new(table));
    }
    if kind == "http" {
        let mut http = HttpBackendConfig::from_env()
            .ok_or_else(|| config_err(format!("backend http needs {}", corrector::LLM_BASE_URL_ENV)))?;
        if let Some(id) = id {
            http.id = id;
        }
        return Ok(Arc::new(HttpBackend::new(http)));
    }
    Err(config_err(format!("unknown backend {spec:?}; expected echo, mock:<file> or http")))
}

struct Named<B> {
    id: String,
    inner: B,
}

impl<B: LlmBackend> LlmBackend for Named<B> {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(
        &self,
        prompt: &str,
        params: &corrector::GenerationParams,
    ) -> Result<String, corrector::LlmError> {
        self.inner.complete(prompt, params)
    }
}

fn backends(args: &CorrectionArgs, cfg: &ConfigFile) -> CliResult<Vec<Arc<dyn LlmBackend>>> {
    let specs: Vec<String> = if args.backend.is_empty() {
        cfg.raw("backend").map(|v| v.split(',').map(|s| s.trim().to_string()).collect()).unwrap_or_default()
    } else {
        args.backend.clone()
    };
    let mut out: Vec<Arc<dyn LlmBackend>> =
        specs.iter().map(|s| parse_backend(s)).collect::<CliResult<_>>()?;
    if out.is_empty() {
        if let Some(http) = HttpBackendConfig::from_env() {
            out.push(Arc::new(HttpBackend::new(http)));
        }
    }
    Ok(out)
}

fn load_dict_dir(dir: &Path) -> CliResult<Vec<Dictionary>> {
    let mut dicts = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| config_err(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if !matches!(ext, "tsv" | "txt") {
            continue;
        }
        let Some(lang) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        dicts.push(
            lexicon::load_dictionary(&path, lang)
                .map_err(|e| config_err(format!("{}: {e}", path.display())))?,
        );
    }
    Ok(dicts)
}

struct Correction {
    language: String,
    mode: CorrectionMode,
    seed: u64,
}

/// Fills `deps` with selection settings, dictionaries and the first backend.
fn correction_setup(
    args: &CorrectionArgs,
    cfg: &ConfigFile,
    deps: &mut PipelineDeps,
    default_mode: CorrectionMode,
) -> CliResult<Correction> {
    let language = cfg.pick(args.lang.clone(), "lang")?.unwrap_or_default();
    let mode = match cfg.pick(args.mode.clone(), "mode")? {
        Some(m) => m.parse().map_err(CliError::Config)?,
        None => default_mode,
    };
    let seed = cfg.pick(args.seed, "seed")?.unwrap_or(0);
    let sel = &mut deps.selection;
    sel.sim_threshold = cfg.pick(args.sim_threshold, "sim_threshold")?.unwrap_or(sel.sim_threshold);
    sel.k_max_matches = cfg.pick(args.k_max, "k_max")?.unwrap_or(sel.k_max_matches);
    sel.pair_cap = cfg.pick(args.pair_cap, "pair_cap")?.unwrap_or(sel.pair_cap);
    sel.validate().map_err(config_err)?;

    if let Some(dir) = cfg.pick(args.dict_dir.clone(), "dict_dir")? {
        for d in load_dict_dir(&dir)? {
            deps.dictionaries.insert(d.language().to_string(), Arc::new(d));
        }
    }
    if let Some(path) = cfg.pick(args.dict.clone(), "dict")? {
        let d = lexicon::load_dictionary(&path, &language)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        deps.dictionaries.insert(language.clone(), Arc::new(d));
    }
    deps.backend = backends(args, cfg)?.into_iter().next();
    Ok(Correction { language, mode, seed })
}

fn require_correction_inputs(c: &Correction, deps: &PipelineDeps) -> CliResult {
    if c.mode == CorrectionMode::None {
        return Ok(());
    }
    if c.language.is_empty() {
        return Err(config_err("--lang is required when correcting"));
    }
    if c.mode == CorrectionMode::FewShot && !deps.dictionaries.contains_key(&c.language) {
        return Err(config_err(format!("dictionary required for few_shot mode (language {})", c.language)));
    }
    if deps.backend.is_none() {
        return Err(config_err(format!(
            "no correction backend; pass --backend or set {}",
            corrector::LLM_BASE_URL_ENV
        )));
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "page".into())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    std::fs::write(path, contents).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn out_dir(flag: Option<PathBuf>, cfg: &ConfigFile) -> CliResult<PathBuf> {
    let dir = cfg.pick(flag, "out")?.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| config_err(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn pipeline_deps(engine_args: &EngineArgs, cfg: &ConfigFile) -> CliResult<PipelineDeps> {
    let mut deps = PipelineDeps::new(engine(engine_args, cfg)?);
    deps.ocr = ocr_config(engine_args, cfg)?;
    deps.preprocess = preprocess_config(engine_args.min_width, cfg)?;
    deps.parallelism = cfg.pick(engine_args.parallelism, "parallelism")?.unwrap_or(deps.parallelism).max(1);
    Ok(deps)
}

fn run_extract(args: ExtractArgs, cfg: &ConfigFile) -> CliResult {
    let mut deps = pipeline_deps(&args.engine, cfg)?;
    let c = correction_setup(&args.correction, cfg, &mut deps, CorrectionMode::None)?;
    require_correction_inputs(&c, &deps)?;
    let files = args
        .images
        .iter()
        .map(|p| UploadedFile::read(p).map_err(|e| config_err(format!("{}: {e}", p.display()))))
        .collect::<CliResult<Vec<_>>>()?;
    let images = pipeline::validate_files(files, None).map_err(config_err)?;
    let dir = out_dir(args.out, cfg)?;

    if args.dump_preprocessed {
        for (path, img) in args.images.iter().zip(&images) {
            let page = PageImage::decode(&img.bytes).and_then(|p| imaging::preprocess(&p, &deps.preprocess));
            match page {
                Ok(p) => {
                    p.save_png(dir.join(format!("{}.preprocessed.png", stem(path)))).map_err(config_err)?
                }
                Err(e) => tracing::warn!(image = %img.name, error = %e, "cannot preprocess"),
            }
        }
    }

    let options = JobOptions { language: c.language, mode: c.mode, seed: c.seed };
    let job = CorrectionJob::new("cli", images, options).map_err(config_err)?;
    let job = pipeline::run_job(job, &deps);
    if let Some(err) = &job.error {
        return Err(config_err(err));
    }
    for (path, result) in args.images.iter().zip(&job.results) {
        let base = stem(path);
        if let Some(text) = &result.ocr_text {
            write_file(&dir.join(format!("{base}.txt")), text)?;
        }
        if let Some(text) = &result.corrected_text {
            write_file(&dir.join(format!("{base}.corrected.txt")), text)?;
        }
        if let Some(e) = &result.error {
            eprintln!("{}: {e}", path.display());
        }
    }
    if args.json {
        println!("{}", job.to_json());
    }
    match job.status {
        JobStatus::Done => Ok(()),
        status => Err(CliError::Partial(format!(
            "{status}: {} of {} images failed",
            job.results.iter().filter(|r| r.error.is_some()).count(),
            job.results.len()
        ))),
    }
}

#[derive(Serialize)]
struct FileOutcome {
    image: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn finish_batch(outcomes: Vec<FileOutcome>, json: bool) -> CliResult {
    if json {
        print_json(&outcomes);
    }
    let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
    for o in outcomes.iter().filter(|o| o.error.is_some()) {
        eprintln!("{}: {}", o.image, o.error.as_deref().unwrap_or_default());
    }
    if failed > 0 {
        return Err(CliError::Partial(format!("{failed} of {} images failed", outcomes.len())));
    }
    Ok(())
}

fn run_preprocess(args: PreprocessArgs, cfg: &ConfigFile) -> CliResult {
    let pre = preprocess_config(args.min_width, cfg)?;
    let dir = out_dir(args.out, cfg)?;
    let outcomes = args
        .images
        .iter()
        .map(|path| {
            let target = dir.join(format!("{}.preprocessed.png", stem(path)));
            let res = PageImage::open(path)
                .and_then(|p| imaging::preprocess(&p, &pre))
                .and_then(|p| p.save_png(&target));
            FileOutcome {
                image: path.display().to_string(),
                output: res.is_ok().then(|| target.display().to_string()),
                text: None,
                error: res.err().map(|e| e.to_string()),
            }
        })
        .collect();
    finish_batch(outcomes, args.json)
}

fn run_ocr(args: OcrArgs, cfg: &ConfigFile) -> CliResult {
    let deps = pipeline_deps(&args.engine, cfg)?;
    let single = args.images.len() == 1;
    let mut outcomes = Vec::new();
    for path in &args.images {
        let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let res = PageImage::open(path)
            .and_then(|p| imaging::preprocess(&p, &deps.preprocess))
            .map_err(|e| e.to_string())
            .and_then(|p| {
                ocr::recognize(deps.engine.as_ref(), &p, &id, &deps.ocr).map_err(|e| e.to_string())
            });
        if !args.json {
            if let Ok(out) = &res {
                if single {
                    println!("{}", out.text);
                } else {
                    println!("== {} ==\n{}", path.display(), out.text);
                }
            }
        }
        outcomes.push(FileOutcome {
            image: path.display().to_string(),
            output: None,
            text: res.as_ref().ok().map(|o| o.text.clone()),
            error: res.err(),
        });
    }
    finish_batch(outcomes, args.json)
}

fn read_input(path: &Path) -> CliResult<String> {
    if path == Path::new("-") {
        std::io::read_to_string(std::io::stdin()).map_err(config_err)
    } else {
        std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }
}

#[derive(Serialize)]
struct CorrectOutput<'a> {
    backend_id: &'a str,
    mode: CorrectionMode,
    prompt: &'a str,
    corrected_text: &'a str,
}

fn run_correct(args: CorrectArgs, cfg: &ConfigFile) -> CliResult {
    let mut deps = PipelineDeps::new(Arc::new(FakeEngine::new()));
    let c = correction_setup(&args.correction, cfg, &mut deps, CorrectionMode::ZeroShot)?;
    if c.mode == CorrectionMode::None {
        return Err(config_err("correct needs --mode zero_shot or few_shot"));
    }
    let text = read_input(&args.input)?;
    let dict = deps.dictionaries.get(&c.language).cloned();
    if c.mode == CorrectionMode::FewShot && dict.is_none() {
        return Err(config_err(format!("dictionary required for few_shot mode (language {})", c.language)));
    }
    let req = pipeline::correction_request(
        &text,
        c.mode,
        &c.language,
        dict.as_deref(),
        &deps.selection,
        &deps.template,
        c.seed,
    )
    .expect("mode is not none");
    if args.print_prompt {
        print!("{}", corrector::render_prompt(&req));
        return Ok(());
    }
    require_correction_inputs(&c, &deps)?;
    let backend = deps.backend.as_ref().expect("checked above");
    let out = corrector::correct(&req, backend.as_ref(), &deps.generation)
        .map_err(|e| CliError::Partial(format!("correction failed: {e}")))?;
    if args.json {
        print_json(&CorrectOutput {
            backend_id: &out.backend_id,
            mode: c.mode,
            prompt: &out.prompt_rendered,
            corrected_text: &out.corrected_text,
        });
    } else {
        println!("{}", out.corrected_text);
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> CliResult {
    let gt = read_input(&args.gt)?;
    let hyp = read_input(&args.hyp)?;
    let doc_id = stem(&args.hyp);
    let rec = EvalRecord::evaluate(&doc_id, &args.lang, &gt, &hyp).map_err(config_err)?;
    if args.json {
        print_json(&rec);
    } else {
        println!(
            "car={:?} war={:?} gt_tokens={} hyp_tokens={}",
            rec.car, rec.war, rec.gt_tokens, rec.hyp_tokens
        );
    }
    Ok(())
}

fn run_bench(args: BenchRunArgs, cfg: &ConfigFile) -> CliResult {
    let entries = bench::load_manifest(&args.manifest).map_err(config_err)?;
    let systems = System::parse_list(&args.systems).map_err(config_err)?;
    if systems.is_empty() {
        return Err(config_err("--systems lists no systems"));
    }
    let mut pipeline = pipeline_deps(&args.engine, cfg)?;
    let c = correction_setup(&args.correction, cfg, &mut pipeline, CorrectionMode::None)?;
    let backends = backends(&args.correction, cfg)?;
    pipeline.backend = None;
    let mut deps = BenchDeps::new(pipeline);
    deps.seed = c.seed;
    for b in backends {
        deps.backends.insert(b.id().to_string(), b);
    }
    let format = match args.format.as_deref() {
        Some(f) => f.parse().map_err(CliError::Config)?,
        None => match args.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Table,
        },
    };
    let report = bench::run_benchmark(&entries, &systems, &deps).map_err(config_err)?;
    let rendered = bench::render_report(&report, format);
    match &args.out {
        Some(path) => write_file(path, &rendered)?,
        None => print!("{rendered}"),
    }
    if !report.is_complete() {
        for d in report.documents.iter().filter(|d| d.record.is_none()) {
            for p in d.pages.iter().filter(|p| p.error.is_some()) {
                eprintln!(
                    "{} [{}] page {}: {}",
                    d.doc_id,
                    d.system,
                    p.page,
                    p.error.as_deref().unwrap_or_default()
                );
            }
        }
        return Err(CliError::Partial("some documents failed; affected cells are marked *".into()));
    }
    Ok(())
}

fn run_dict_validate(file: &Path, json: bool) -> CliResult {
    let text = std::fs::read_to_string(file).map_err(|e| config_err(format!("{}: {e}", file.display())))?;
    let report = lexicon::validate_dictionary(&text);
    if json {
        print_json(&report);
    } else {
        println!("{} pairs, {} duplicates, {} errors", report.pairs, report.duplicates, report.errors.len());
        for e in &report.errors {
            eprintln!("{}:{}: {}", file.display(), e.line, e.reason);
        }
    }
    if report.is_ok() {
        Ok(())
    } else {
        Err(config_err(format!("{}: {} malformed lines", file.display(), report.errors.len())))
    }
}

fn run_serve(args: ServeArgs, cfg: &ConfigFile) -> CliResult {
    let mut deps = pipeline_deps(&args.engine, cfg)?;
    let default_mode = match cfg.pick(args.mode_default.clone(), "mode_default")? {
        Some(m) => m.parse().map_err(CliError::Config)?,
        None => CorrectionMode::None,
    };
    correction_setup(&args.correction, cfg, &mut deps, default_mode)?;
    let listen = cfg.pick(args.listen.clone(), "listen")?.unwrap_or_else(|| "127.0.0.1:8080".into());
    let addr: SocketAddr =
        listen.parse().map_err(|_| config_err(format!("--listen {listen:?} is not host:port")))?;
    let data_dir = cfg
        .pick(args.data_dir.clone(), "data_dir")?
        .or_else(|| std::env::var_os(pipeline::DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("drivethru-data"));
    let mut sc = ServiceConfig::new(data_dir);
    sc.default_mode = default_mode;
    sc.static_dir = cfg.pick(args.static_dir.clone(), "static_dir")?;
    sc.workers = cfg.pick(args.workers, "workers")?.unwrap_or(sc.workers);
    sc.cors_origins = if args.cors_origin.is_empty() {
        cfg.raw("cors_origin")
            .map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
            .unwrap_or_default()
    } else {
        args.cors_origin.clone()
    };
    service::run(addr, sc, deps).map_err(config_err)
}

pub fn execute(cli: Cli) -> CliResult {
    let cfg = read_config(cli.config.as_deref())?;
    match cli.command {
        Command::Extract(a) => run_extract(a, &cfg),
        Command::Preprocess(a) => run_preprocess(a, &cfg),
        Command::Ocr(a) => run_ocr(a, &cfg),
        Command::Correct(a) => run_correct(a, &cfg),
        Command::Eval(a) => run_eval(a),
        Command::Bench(BenchCommand::Run(a)) => run_bench(a, &cfg),
        Command::Dict(DictCommand::Validate { file, json }) => run_dict_validate(&file, json),
        Command::Serve(a) => run_serve(a, &cfg),
    }
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("DRIVETHRU_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Parses `args` and runs the command, mapping failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drivethru: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    main_with_args(std::env::args_os())
}
