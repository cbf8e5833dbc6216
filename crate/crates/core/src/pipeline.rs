//! Upload cycles as jobs: preprocess, recognize and optionally correct each
//! image, recording per-image outcomes in upload order.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corrector::{self, CorrectionRequest, GenerationParams, LlmBackend, PromptTemplate};
use crate::imaging::{self, PageImage, PreprocessConfig};
use crate::lexicon::{self, Dictionary, SelectionConfig};
use crate::ocr::{self, OcrConfig, OcrEngine};

/// Images accepted in one upload cycle.
pub const MAX_IMAGES_PER_JOB: usize = 5;
pub const DATA_DIR_ENV: &str = "DRIVETHRU_DATA_DIR";

const PNG_MAGIC: &[u8] = &[0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];
const JPEG_MAGIC: &[u8] = &[0xFF, 0xD8, 0xFF];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UploadError {
    #[error("no files uploaded")]
    NoFiles,
    #[error("{0} files uploaded, at most {MAX_IMAGES_PER_JOB} allowed per cycle")]
    TooManyFiles(usize),
    #[error("unsupported format for {0}; accepted: .png, .jpg, .jpeg")]
    UnsupportedFormat(String),
    #[error("content of {0} does not match its extension")]
    MagicMismatch(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("illegal job transition {from} -> {to}")]
    IllegalTransition { from: JobStatus, to: JobStatus },
    #[error("invalid job id {0:?}")]
    InvalidJobId(String),
    #[error("job store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormatKind {
    Png,
    Jpeg,
}

impl ImageFormatKind {
    fn from_name(name: &str) -> Option<Self> {
        let ext = Path::new(name).extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(Self::Png),
            "jpg" | "jpeg" => Some(Self::Jpeg),
            _ => None,
        }
    }

    fn magic(self) -> &'static [u8] {
        match self {
            Self::Png => PNG_MAGIC,
            Self::Jpeg => JPEG_MAGIC,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Png => "png",
            Self::Jpeg => "jpg",
        }
    }
}

#[derive(Debug, Clone)]
pub struct UploadedFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl UploadedFile {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self { name: name.into(), bytes }
    }

    pub fn read(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self { name, bytes: std::fs::read(path)? })
    }
}

/// An accepted upload. Bytes stay out of the job JSON; only metadata is
/// serialized.
#[derive(Clone, Serialize, Deserialize)]
pub struct JobImage {
    pub name: String,
    pub format: ImageFormatKind,
    pub size_bytes: usize,
    pub sha256: String,
    #[serde(skip)]
    pub bytes: Arc<Vec<u8>>,
}

impl fmt::Debug for JobImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JobImage")
            .field("name", &self.name)
            .field("format", &self.format)
            .field("size_bytes", &self.size_bytes)
            .finish()
    }
}

impl PartialEq for JobImage {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.format == other.format && self.sha256 == other.sha256
    }
}

fn accept(file: UploadedFile) -> Result<JobImage, UploadError> {
    let format = ImageFormatKind::from_name(&file.name)
        .ok_or_else(|| UploadError::UnsupportedFormat(file.name.clone()))?;
    if !file.bytes.starts_with(format.magic()) {
        return Err(UploadError::MagicMismatch(file.name));
    }
    Ok(JobImage {
        format,
        size_bytes: file.bytes.len(),
        sha256: hex::encode(Sha256::digest(&file.bytes)),
        name: file.name,
        bytes: Arc::new(file.bytes),
    })
}

/// Service-side validation: 1 to 5 PNG/JPEG files whose content matches
/// their extension. Any violation rejects the whole batch.
pub fn validate_upload(files: Vec<UploadedFile>) -> Result<Vec<JobImage>, UploadError> {
    validate_files(files, Some(MAX_IMAGES_PER_JOB))
}

/// Like [`validate_upload`] with a configurable (or no) count limit.
pub fn validate_files(files: Vec<UploadedFile>, max: Option<usize>) -> Result<Vec<JobImage>, UploadError> {
    if files.is_empty() {
        return Err(UploadError::NoFiles);
    }
    if let Some(max) = max {
        if files.len() > max {
            return Err(UploadError::TooManyFiles(files.len()));
        }
    }
    files.into_iter().map(accept).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
    Partial,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Done | Self::Failed | Self::Partial)
    }

    fn can_become(self, next: JobStatus) -> bool {
        matches!((self, next), (Self::Queued, Self::Running)) || (self == Self::Running && next.is_terminal())
    }
}

impl fmt::Display for JobStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Queued => "queued",
            Self::Running => "running",
            Self::Done => "done",
            Self::Failed => "failed",
            Self::Partial => "partial",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    /// Raw OCR output, no post-correction.
    #[default]
    None,
    ZeroShot,
    FewShot,
}

impl std::str::FromStr for CorrectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "none" | "ots" => Ok(Self::None),
            "zero_shot" | "zs" => Ok(Self::ZeroShot),
            "few_shot" | "fs" => Ok(Self::FewShot),
            other => Err(format!("unknown mode {other:?}; expected none, zero_shot or few_shot")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOptions {
    pub language: String,
    pub mode: CorrectionMode,
    /// Drives similar-word sampling; fixed per job.
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ocr_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionJob {
    pub job_id: String,
    pub status: JobStatus,
    pub options: JobOptions,
    pub images: Vec<JobImage>,
    pub results: Vec<ImageResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn is_valid_job_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl CorrectionJob {
    pub fn new(
        job_id: impl Into<String>,
        images: Vec<JobImage>,
        options: JobOptions,
    ) -> Result<Self, PipelineError> {
        let job_id = job_id.into();
        if !is_valid_job_id(&job_id) {
            return Err(PipelineError::InvalidJobId(job_id));
        }
        Ok(Self { job_id, status: JobStatus::Queued, options, images, results: Vec::new(), error: None })
    }

    pub fn transition(&mut self, next: JobStatus) -> Result<(), PipelineError> {
        if !self.status.can_become(next) {
            return Err(PipelineError::IllegalTransition { from: self.status, to: next });
        }
        self.status = next;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("job serializes")
    }
}

/// Everything a job needs to run.
#[derive(Clone)]
pub struct PipelineDeps {
    pub preprocess: PreprocessConfig,
    pub engine: Arc<dyn OcrEngine>,
    pub ocr: OcrConfig,
    pub dictionaries: HashMap<String, Arc<Dictionary>>,
    pub backend: Option<Arc<dyn LlmBackend>>,
    pub selection: SelectionConfig,
    pub template: PromptTemplate,
    pub generation: GenerationParams,
    pub parallelism: usize,
}

impl PipelineDeps {
    pub fn new(engine: Arc<dyn OcrEngine>) -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            engine,
            ocr: OcrConfig::from_env(),
            dictionaries: HashMap::new(),
            backend: None,
            selection: SelectionConfig::default(),
            template: PromptTemplate::default(),
            generation: GenerationParams::default(),
            parallelism: 2,
        }
    }

    pub fn with_backend(mut self, backend: Arc<dyn LlmBackend>) -> Self {
        self.backend = Some(backend);
        self
    }

    pub fn with_dictionary(mut self, dict: Dictionary) -> Self {
        self.dictionaries.insert(dict.language().to_string(), Arc::new(dict));
        self
    }
}

impl fmt::Debug for PipelineDeps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PipelineDeps")
            .field("engine", &self.engine.name())
            .field("backend", &self.backend.as_ref().map(|b| b.id().to_string()))
            .field("dictionaries", &self.dictionaries.keys().collect::<Vec<_>>())
            .field("parallelism", &self.parallelism)
            .finish()
    }
}

/// Decode, preprocess and recognize one upload.
pub fn extract_text(image: &JobImage, deps: &PipelineDeps) -> Result<String, String> {
    let page = PageImage::decode(&image.bytes).map_err(|e| e.to_string())?;
    let prepared = imaging::preprocess(&page, &deps.preprocess).map_err(|e| e.to_string())?;
    let out =
        ocr::recognize(deps.engine.as_ref(), &prepared, &image.name, &deps.ocr).map_err(|e| e.to_string())?;
    Ok(out.text)
}

/// Builds the correction request for `ocr_text`; few-shot hints are sampled
/// with `seed`.
pub fn correction_request(
    ocr_text: &str,
    mode: CorrectionMode,
    language: &str,
    dict: Option<&Dictionary>,
    selection: &SelectionConfig,
    template: &PromptTemplate,
    seed: u64,
) -> Option<CorrectionRequest> {
    let mut req = match mode {
        CorrectionMode::None => return None,
        CorrectionMode::ZeroShot => CorrectionRequest::zero_shot(ocr_text, language),
        CorrectionMode::FewShot => {
            let cfg = SelectionConfig { rng_seed: Some(seed), ..selection.clone() };
            let pairs = dict
                .map(|d| lexicon::select_pairs(&lexicon::candidate_tokens(ocr_text), d, &cfg))
                .unwrap_or_default();
            CorrectionRequest::few_shot(ocr_text, language, pairs)
        }
    };
    req.template = template.clone();
    Some(req)
}

/// Per-image sampling seed derived from the job seed.
pub fn image_seed(job_seed: u64, index: usize) -> u64 {
    job_seed.wrapping_add(index as u64)
}

/// Runs a queued (or already running) job to a terminal status.
///
/// Image failures are isolated; the job fails outright only when the
/// configuration cannot support the requested mode.
pub fn run_job(mut job: CorrectionJob, deps: &PipelineDeps) -> CorrectionJob {
    if job.status == JobStatus::Queued {
        job.transition(JobStatus::Running).expect("queued -> running");
    }
    if job.status != JobStatus::Running {
        return job;
    }
    let mode = job.options.mode;
    let language = job.options.language.clone();
    let dict = deps.dictionaries.get(&language).cloned();
    let infra_fault = match mode {
        CorrectionMode::None => None,
        _ if deps.backend.is_none() => Some("no correction backend configured".to_string()),
        CorrectionMode::FewShot if dict.is_none() => {
            Some(format!("dictionary required for language {language}"))
        }
        _ => None,
    };
    if let Some(msg) = infra_fault {
        job.error = Some(msg);
        job.transition(JobStatus::Failed).expect("running -> failed");
        return job;
    }

    let ocr_texts = crate::par::map_bounded(&job.images, deps.parallelism, |_, img| extract_text(img, deps));
    let seed = job.options.seed;
    let results: Vec<ImageResult> = job
        .images
        .iter()
        .zip(ocr_texts)
        .enumerate()
        .map(|(idx, (img, ocr))| {
            let mut result = ImageResult { name: img.name.clone(), ..Default::default() };
            match ocr {
                Err(e) => result.error = Some(e),
                Ok(text) => {
                    let req = correction_request(
                        &text,
                        mode,
                        &language,
                        dict.as_deref(),
                        &deps.selection,
                        &deps.template,
                        image_seed(seed, idx),
                    );
                    if let (Some(req), Some(backend)) = (req, deps.backend.as_ref()) {
                        match corrector::correct(&req, backend.as_ref(), &deps.generation) {
                            Ok(res) => result.corrected_text = Some(res.corrected_text),
                            Err(e) => result.error = Some(e.to_string()),
                        }
                    }
                    result.ocr_text = Some(text);
                }
            }
            result
        })
        .collect();

    let failures = results.iter().filter(|r| r.error.is_some()).count();
    job.results = results;
    let status = match failures {
        0 => JobStatus::Done,
        n if n == job.results.len() => JobStatus::Failed,
        _ => JobStatus::Partial,
    };
    job.transition(status).expect("running -> terminal");
    job
}

/// One JSON file per job under `<root>/jobs`, uploads under
/// `<root>/uploads/<job_id>/`. Writes go through a temp file and rename.
#[derive(Debug)]
pub struct JobStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl JobStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let root = root.into();
        std::fs::create_dir_all(root.join("jobs"))?;
        std::fs::create_dir_all(root.join("uploads"))?;
        Ok(Self { root, write_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn job_path(&self, id: &str) -> Result<PathBuf, PipelineError> {
        if !is_valid_job_id(id) {
            return Err(PipelineError::InvalidJobId(id.to_string()));
        }
        Ok(self.root.join("jobs").join(format!("{id}.json")))
    }

    fn upload_dir(&self, id: &str) -> PathBuf {
        self.root.join("uploads").join(id)
    }

    pub fn save(&self, job: &CorrectionJob) -> Result<(), PipelineError> {
        let path = self.job_path(&job.job_id)?;
        let _guard = self.write_lock.lock().unwrap();
        let mut tmp = tempfile::NamedTempFile::new_in(self.root.join("jobs"))?;
        std::io::Write::write_all(&mut tmp, job.to_json().as_bytes())?;
        tmp.persist(&path).map_err(|e| PipelineError::Io(e.error))?;
        Ok(())
    }

    /// Stores the upload bytes so an interrupted job can be resumed.
    pub fn save_uploads(&self, job: &CorrectionJob) -> Result<(), PipelineError> {
        let dir = self.upload_dir(&job.job_id);
        std::fs::create_dir_all(&dir)?;
        for (idx, img) in job.images.iter().enumerate() {
            std::fs::write(dir.join(format!("{idx}.{}", img.format.extension())), img.bytes.as_slice())?;
        }
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<Option<CorrectionJob>, PipelineError> {
        let path = self.job_path(id)?;
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Reattaches upload bytes to a loaded job.
    pub fn load_uploads(&self, job: &mut CorrectionJob) -> Result<(), PipelineError> {
        let dir = self.upload_dir(&job.job_id);
        for (idx, img) in job.images.iter_mut().enumerate() {
            let bytes = std::fs::read(dir.join(format!("{idx}.{}", img.format.extension())))?;
            img.bytes = Arc::new(bytes);
        }
        Ok(())
    }

    pub fn remove_uploads(&self, id: &str) -> Result<(), PipelineError> {
        match std::fs::remove_dir_all(self.upload_dir(id)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    /// Every job on disk, sorted by id.
    pub fn list(&self) -> Result<Vec<CorrectionJob>, PipelineError> {
        let mut jobs = Vec::new();
        for entry in std::fs::read_dir(self.root.join("jobs"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let text = std::fs::read_to_string(&path)?;
                jobs.push(serde_json::from_str::<CorrectionJob>(&text)?);
            }
        }
        jobs.sort_by(|a, b| a.job_id.cmp(&b.job_id));
        Ok(jobs)
    }
}
