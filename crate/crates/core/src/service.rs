//! HTTP facade over [`pipeline`](crate::pipeline).
//!
//! | Method | Path | Success |
//! |---|---|---|
//! | `POST` | `/api/jobs` | `202 {"job_id": ...}` plus `Location` |
//! | `GET` | `/api/jobs/{id}` | `200` job JSON |
//! | `GET` | `/api/healthz` | `200 {"ocr_engine": bool, "backend": bool}` |
//!
//! Uploads are multipart: one or more `files` (or `files[]`) parts and the
//! text fields `language`, `mode` and optionally `seed`. Errors are
//! `{"code", "message", "http_status"}` with `code` from [`ErrorCode`].
//! Jobs run on a bounded pool of blocking workers and are persisted after
//! every status change; queued or running jobs found on disk at startup are
//! run again.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::multipart::MultipartError;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::pipeline::{
    self, CorrectionJob, CorrectionMode, JobOptions, JobStatus, JobStore, PipelineDeps, UploadError,
    UploadedFile,
};

/// Total upload cap per request.
pub const MAX_UPLOAD_BYTES: usize = 25 * 1024 * 1024;
const MULTIPART_OVERHEAD: usize = 256 * 1024;

pub const DEFAULT_LANGUAGES: &[&str] = &["ban", "jav", "sun", "min"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NoFiles,
    TooManyFiles,
    UnsupportedFormat,
    MagicMismatch,
    PayloadTooLarge,
    UnknownLanguage,
    InvalidMode,
    InvalidRequest,
    NotFound,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 10] = [
        Self::NoFiles,
        Self::TooManyFiles,
        Self::UnsupportedFormat,
        Self::MagicMismatch,
        Self::PayloadTooLarge,
        Self::UnknownLanguage,
        Self::InvalidMode,
        Self::InvalidRequest,
        Self::NotFound,
        Self::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoFiles => "no_files",
            Self::TooManyFiles => "too_many_files",
            Self::UnsupportedFormat => "unsupported_format",
            Self::MagicMismatch => "magic_mismatch",
            Self::PayloadTooLarge => "payload_too_large",
            Self::UnknownLanguage => "unknown_language",
            Self::InvalidMode => "invalid_mode",
            Self::InvalidRequest => "invalid_request",
            Self::NotFound => "not_found",
            Self::Internal => "internal",
        }
    }

    pub fn status(self) -> StatusCode {
        match self {
            Self::NoFiles
            | Self::TooManyFiles
            | Self::UnsupportedFormat
            | Self::MagicMismatch
            | Self::InvalidMode
            | Self::InvalidRequest => StatusCode::BAD_REQUEST,
            Self::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            Self::UnknownLanguage => StatusCode::UNPROCESSABLE_ENTITY,
            Self::NotFound => StatusCode::NOT_FOUND,
            Self::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    pub http_status: u16,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), http_status: code.status().as_u16() }
    }
}

impl From<UploadError> for ApiError {
    fn from(e: UploadError) -> Self {
        let code = match e {
            UploadError::NoFiles => ErrorCode::NoFiles,
            UploadError::TooManyFiles(_) => ErrorCode::TooManyFiles,
            UploadError::UnsupportedFormat(_) => ErrorCode::UnsupportedFormat,
            UploadError::MagicMismatch(_) => ErrorCode::MagicMismatch,
        };
        Self::new(code, e.to_string())
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            Self::new(ErrorCode::PayloadTooLarge, format!("upload exceeds {MAX_UPLOAD_BYTES} bytes"))
        } else {
            Self::new(ErrorCode::InvalidRequest, e.body_text())
        }
    }
}

impl From<pipeline::PipelineError> for ApiError {
    fn from(e: pipeline::PipelineError) -> Self {
        Self::new(ErrorCode::Internal, e.to_string())
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    let mut resp = (status, body).into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json; charset=utf-8"));
    resp
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.code.status(), serde_json::to_string(&self).expect("error serializes"))
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Accepted language codes; dictionary languages are added on top.
    pub languages: BTreeSet<String>,
    pub default_mode: CorrectionMode,
    /// Jobs executed concurrently.
    pub workers: usize,
    /// Allowed CORS origins; `*` allows any. Empty disables CORS headers.
    pub cors_origins: Vec<String>,
    pub static_dir: Option<PathBuf>,
    pub max_upload_bytes: usize,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            languages: DEFAULT_LANGUAGES.iter().map(|s| s.to_string()).collect(),
            default_mode: CorrectionMode::None,
            workers: 2,
            cors_origins: Vec::new(),
            static_dir: None,
            max_upload_bytes: MAX_UPLOAD_BYTES,
        }
    }
}

/// Shared state behind the router.
pub struct Service {
    config: ServiceConfig,
    languages: BTreeSet<String>,
    store: JobStore,
    deps: Arc<PipelineDeps>,
    workers: Semaphore,
}

impl Service {
    pub fn new(config: ServiceConfig, deps: PipelineDeps) -> Result<Arc<Self>, pipeline::PipelineError> {
        let store = JobStore::open(&config.data_dir)?;
        let mut languages = config.languages.clone();
        languages.extend(deps.dictionaries.keys().cloned());
        let workers = Semaphore::new(config.workers.max(1));
        Ok(Arc::new(Self { config, languages, store, deps: Arc::new(deps), workers }))
    }

    pub fn store(&self) -> &JobStore {
        &self.store
    }

    pub fn languages(&self) -> &BTreeSet<String> {
        &self.languages
    }

    /// Re-queues every non-terminal job found in the store. Must run inside
    /// a Tokio runtime. Returns the resumed job ids.
    pub fn resume_pending(self: &Arc<Self>) -> Result<Vec<String>, pipeline::PipelineError> {
        let mut resumed = Vec::new();
        for mut job in self.store.list()? {
            if job.status.is_terminal() {
                continue;
            }
            if let Err(e) = self.store.load_uploads(&mut job) {
                tracing::warn!(job_id = %job.job_id, error = %e, "uploads lost; failing job");
                if job.status == JobStatus::Queued {
                    job.transition(JobStatus::Running)?;
                }
                job.error = Some(format!("uploads lost: {e}"));
                job.transition(JobStatus::Failed)?;
                self.store.save(&job)?;
                continue;
            }
            tracing::info!(job_id = %job.job_id, "resuming job");
            resumed.push(job.job_id.clone());
            self.spawn_job(job);
        }
        Ok(resumed)
    }

    fn spawn_job(self: &Arc<Self>, job: CorrectionJob) {
        let svc = Arc::clone(self);
        tokio::spawn(async move {
            let _permit = svc.workers.acquire().await.expect("worker pool open");
            let id = job.job_id.clone();
            let worker = Arc::clone(&svc);
            let outcome = tokio::task::spawn_blocking(move || worker.execute(job)).await;
            match outcome {
                Ok(Ok(status)) => tracing::info!(job_id = %id, %status, "job finished"),
                Ok(Err(e)) => tracing::error!(job_id = %id, error = %e, "job store failure"),
                Err(e) => tracing::error!(job_id = %id, error = %e, "job worker panicked"),
            }
        });
    }

    fn execute(&self, mut job: CorrectionJob) -> Result<JobStatus, pipeline::PipelineError> {
        if job.status == JobStatus::Queued {
            job.transition(JobStatus::Running)?;
            self.store.save(&job)?;
        }
        let job = pipeline::run_job(job, &self.deps);
        self.store.save(&job)?;
        self.store.remove_uploads(&job.job_id)?;
        Ok(job.status)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobCreated {
    pub job_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub ocr_engine: bool,
    pub backend: bool,
}

struct UploadForm {
    files: Vec<UploadedFile>,
    language: Option<String>,
    mode: Option<String>,
    seed: Option<String>,
}

async fn read_form(mut mp: Multipart, limit: usize) -> Result<UploadForm, ApiError> {
    let mut form = UploadForm { files: Vec::new(), language: None, mode: None, seed: None };
    let mut total = 0usize;
    while let Some(field) = mp.next_field().await? {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "files" | "files[]" | "file" => {
                let file_name = field.file_name().unwrap_or_default().to_string();
                let bytes = field.bytes().await?;
                total += bytes.len();
                if total > limit {
                    return Err(ApiError::new(
                        ErrorCode::PayloadTooLarge,
                        format!("upload exceeds {limit} bytes"),
                    ));
                }
                form.files.push(UploadedFile::new(file_name, bytes.to_vec()));
            }
            "language" => form.language = Some(field.text().await?.trim().to_string()),
            "mode" => form.mode = Some(field.text().await?),
            "seed" => form.seed = Some(field.text().await?),
            _ => {
                field.bytes().await?;
            }
        }
    }
    Ok(form)
}

async fn create_job(State(svc): State<Arc<Service>>, mp: Multipart) -> Result<Response, ApiError> {
    let form = read_form(mp, svc.config.max_upload_bytes).await?;
    let images = pipeline::validate_upload(form.files)?;
    let language = form.language.filter(|l| !l.is_empty()).unwrap_or_default();
    if !svc.languages.contains(&language) {
        let known: Vec<&str> = svc.languages.iter().map(String::as_str).collect();
        return Err(ApiError::new(
            ErrorCode::UnknownLanguage,
            format!("unknown language {language:?}; known: {}", known.join(", ")),
        ));
    }
    let mode = match form.mode.as_deref().map(str::trim).filter(|m| !m.is_empty()) {
        None => svc.config.default_mode,
        Some(m) => m.parse().map_err(|e: String| ApiError::new(ErrorCode::InvalidMode, e))?,
    };
    let seed = match form.seed.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        None => rand::random::<u64>(),
        Some(s) => s
            .parse()
            .map_err(|_| ApiError::new(ErrorCode::InvalidRequest, format!("seed {s:?} is not a u64")))?,
    };
    let job_id = uuid::Uuid::new_v4().simple().to_string();
    let job = CorrectionJob::new(job_id.clone(), images, JobOptions { language, mode, seed })?;
    svc.store.save_uploads(&job)?;
    svc.store.save(&job)?;
    tracing::info!(%job_id, seed, images = job.images.len(), "job queued");
    svc.spawn_job(job);

    let mut resp = json_response(
        StatusCode::ACCEPTED,
        serde_json::to_string(&JobCreated { job_id: job_id.clone() }).unwrap(),
    );
    resp.headers_mut().insert(
        header::LOCATION,
        HeaderValue::from_str(&format!("/api/jobs/{job_id}")).expect("job ids are header-safe"),
    );
    Ok(resp)
}

async fn get_job(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let not_found = || ApiError::new(ErrorCode::NotFound, format!("no job {id:?}"));
    if !pipeline::is_valid_job_id(&id) {
        return Err(not_found());
    }
    match svc.store.load(&id)? {
        Some(job) => Ok(json_response(StatusCode::OK, job.to_json())),
        None => Err(not_found()),
    }
}

async fn healthz(State(svc): State<Arc<Service>>) -> Response {
    let deps = Arc::clone(&svc.deps);
    let health = tokio::task::spawn_blocking(move || Health {
        ocr_engine: deps.engine.is_available(&deps.ocr),
        backend: deps.backend.as_ref().is_some_and(|b| b.probe()),
    })
    .await
    .unwrap_or(Health { ocr_engine: false, backend: false });
    json_response(StatusCode::OK, serde_json::to_string(&health).unwrap())
}

async fn api_not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE])
            .expose_headers([header::LOCATION]),
    )
}

pub fn router(svc: Arc<Service>) -> Router {
    let limit = svc.config.max_upload_bytes + MULTIPART_OVERHEAD;
    let api = Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(get_job))
        .route("/healthz", get(healthz))
        .fallback(api_not_found)
        .layer(DefaultBodyLimit::max(limit));
    let mut app = Router::new().nest("/api", api);
    if let Some(dir) = &svc.config.static_dir {
        app = app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true));
    }
    if let Some(cors) = cors_layer(&svc.config.cors_origins) {
        app = app.layer(cors);
    }
    app.with_state(svc)
}

/// Resumes pending jobs and serves until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, svc: Arc<Service>) -> std::io::Result<()> {
    svc.resume_pending().map_err(std::io::Error::other)?;
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Blocking entry point: builds a runtime, binds `addr` and serves.
pub fn run(addr: SocketAddr, svc_config: ServiceConfig, deps: PipelineDeps) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let svc = Service::new(svc_config, deps).map_err(std::io::Error::other)?;
        let listener = tokio::net::TcpListener::bind(addr).await?;
        serve(listener, svc).await
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_are_closed_and_stable() {
        let names: Vec<&str> = ErrorCode::ALL.iter().map(|c| c.as_str()).collect();
        for code in ErrorCode::ALL {
            let json = serde_json::to_string(&code).unwrap();
            assert_eq!(json, format!("\"{}\"", code.as_str()));
        }
        assert!(names.contains(&"too_many_files") && names.contains(&"unsupported_format"));
        assert_eq!(ErrorCode::UnknownLanguage.status(), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(ErrorCode::PayloadTooLarge.status(), StatusCode::PAYLOAD_TOO_LARGE);
    }

    #[test]
    fn upload_errors_map_to_codes() {
        let e: ApiError = UploadError::TooManyFiles(6).into();
        assert_eq!((e.code, e.http_status), (ErrorCode::TooManyFiles, 400));
        let e: ApiError = UploadError::UnsupportedFormat("a.tiff".into()).into();
        assert_eq!(e.code, ErrorCode::UnsupportedFormat);
    }
}
