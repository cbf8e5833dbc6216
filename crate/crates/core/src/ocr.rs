//! OCR engine adapters.
//!
//! [`TesseractEngine`] shells out once per page: the preprocessed image is
//! written to a temporary PNG and the engine prints recognized text to
//! stdout. [`FakeEngine`] answers from a table and is what tests and the
//! examples use.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::imaging::PageImage;

pub const OCR_BIN_ENV: &str = "DRIVETHRU_OCR_BIN";

#[derive(Debug, Error)]
pub enum OcrError {
    #[error("OCR engine not found at {0}")]
    EngineNotFound(PathBuf),
    #[error("OCR engine failed (exit {code:?}): {stderr}")]
    EngineFailed { code: Option<i32>, stderr: String },
    #[error("OCR engine timed out after {0:?}")]
    Timeout(Duration),
    #[error("invalid OCR config: {0}")]
    InvalidConfig(String),
    #[error("could not stage page image: {0}")]
    Staging(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrConfig {
    pub engine_mode: u8,
    pub page_seg_mode: u8,
    /// `None` leaves the engine on its built-in default language.
    pub language: Option<String>,
    pub engine_path: PathBuf,
    pub timeout_ms: u64,
}

impl Default for OcrConfig {
    fn default() -> Self {
        Self {
            engine_mode: 3,
            page_seg_mode: 6,
            language: None,
            engine_path: PathBuf::from("tesseract"),
            timeout_ms: 120_000,
        }
    }
}

impl OcrConfig {
    /// Defaults with `DRIVETHRU_OCR_BIN` applied.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(bin) = std::env::var_os(OCR_BIN_ENV).filter(|v| !v.is_empty()) {
            cfg.engine_path = PathBuf::from(bin);
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), OcrError> {
        if self.engine_mode > 3 {
            return Err(OcrError::InvalidConfig(format!("engine mode {} outside 0..=3", self.engine_mode)));
        }
        if self.page_seg_mode > 13 {
            return Err(OcrError::InvalidConfig(format!(
                "page segmentation mode {} outside 0..=13",
                self.page_seg_mode
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    /// Flags handed to the engine after the input and output arguments.
    pub fn engine_args(&self) -> Vec<String> {
        let mut args = vec![
            "--oem".to_string(),
            self.engine_mode.to_string(),
            "--psm".to_string(),
            self.page_seg_mode.to_string(),
        ];
        if let Some(lang) = self.language.as_deref().filter(|l| !l.is_empty() && *l != "default") {
            args.push("-l".into());
            args.push(lang.into());
        }
        args
    }

    pub fn flag_string(&self) -> String {
        self.engine_args().join(" ")
    }

    /// Inverse of [`OcrConfig::flag_string`]; fields not carried by the flags
    /// are taken from `base`.
    pub fn with_flags(base: &OcrConfig, flags: &str) -> Result<Self, OcrError> {
        let mut cfg = OcrConfig { language: None, ..base.clone() };
        let mut it = flags.split_whitespace();
        while let Some(flag) = it.next() {
            let value =
                it.next().ok_or_else(|| OcrError::InvalidConfig(format!("flag {flag} has no value")))?;
            let num = || {
                value
                    .parse::<u8>()
                    .map_err(|_| OcrError::InvalidConfig(format!("{flag} expects a number, got {value}")))
            };
            match flag {
                "--oem" => cfg.engine_mode = num()?,
                "--psm" => cfg.page_seg_mode = num()?,
                "-l" => cfg.language = Some(value.to_string()),
                other => return Err(OcrError::InvalidConfig(format!("unknown flag {other}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrOutput {
    pub text: String,
    pub source_image_id: String,
    pub config_used: OcrConfig,
    pub duration_ms: u64,
}

pub trait OcrEngine: Send + Sync {
    fn name(&self) -> &str;

    /// Raw engine text for one preprocessed page.
    fn run(&self, image: &PageImage, image_id: &str, cfg: &OcrConfig) -> Result<String, OcrError>;

    /// Cheap presence probe with no side effects.
    fn is_available(&self, cfg: &OcrConfig) -> bool;
}

pub fn recognize(
    engine: &dyn OcrEngine,
    image: &PageImage,
    image_id: &str,
    cfg: &OcrConfig,
) -> Result<OcrOutput, OcrError> {
    cfg.validate()?;
    let started = Instant::now();
    let raw = engine.run(image, image_id, cfg)?;
    Ok(OcrOutput {
        text: raw.trim_end().to_string(),
        source_image_id: image_id.to_string(),
        config_used: cfg.clone(),
        duration_ms: started.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Clone)]
pub struct OcrInput {
    pub id: String,
    pub image: PageImage,
}

/// Runs every page, at most `parallelism` at a time. Results keep input
/// order and a failing page does not stop the others.
pub fn recognize_batch(
    engine: &dyn OcrEngine,
    inputs: &[OcrInput],
    cfg: &OcrConfig,
    parallelism: usize,
) -> Vec<Result<OcrOutput, OcrError>> {
    crate::par::map_bounded(inputs, parallelism, |_, i| recognize(engine, &i.image, &i.id, cfg))
}

/// Hex SHA-256 over dimensions, channel count and pixels.
pub fn content_hash(image: &PageImage) -> String {
    let mut hasher = Sha256::new();
    hasher.update(image.width().to_le_bytes());
    hasher.update(image.height().to_le_bytes());
    hasher.update([image.channels()]);
    hasher.update(image.pixels());
    hex::encode(hasher.finalize())
}

/// Child-process adapter for a Tesseract-compatible CLI:
/// `<engine> <image.png> stdout --oem N --psm N [-l LANG]`.
#[derive(Debug, Default, Clone)]
pub struct TesseractEngine;

impl TesseractEngine {
    fn resolve(path: &Path) -> Option<PathBuf> {
        if path.components().count() > 1 || path.is_absolute() {
            return path.is_file().then(|| path.to_path_buf());
        }
        let dirs = std::env::var_os("PATH")?;
        std::env::split_paths(&dirs).map(|d| d.join(path)).find(|p| p.is_file())
    }
}

impl OcrEngine for TesseractEngine {
    fn name(&self) -> &str {
        "tesseract"
    }

    fn is_available(&self, cfg: &OcrConfig) -> bool {
        Self::resolve(&cfg.engine_path).is_some()
    }

    fn run(&self, image: &PageImage, _image_id: &str, cfg: &OcrConfig) -> Result<String, OcrError> {
        let bin = Self::resolve(&cfg.engine_path)
            .ok_or_else(|| OcrError::EngineNotFound(cfg.engine_path.clone()))?;
        let png = image.encode_png().map_err(|e| OcrError::Staging(e.to_string()))?;
        let staged = tempfile::Builder::new()
            .prefix("drivethru-page-")
            .suffix(".png")
            .tempfile()
            .map_err(|e| OcrError::Staging(e.to_string()))?;
        std::fs::write(staged.path(), png).map_err(|e| OcrError::Staging(e.to_string()))?;

        let mut child = Command::new(&bin)
            .arg(staged.path())
            .arg("stdout")
            .args(cfg.engine_args())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                    OcrError::EngineNotFound(bin.clone())
                }
                _ => OcrError::EngineFailed { code: None, stderr: e.to_string() },
            })?;

        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });

        let deadline = Instant::now() + cfg.timeout();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(OcrError::Timeout(cfg.timeout()));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(OcrError::EngineFailed { code: None, stderr: e.to_string() }),
            }
        };
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(OcrError::EngineFailed {
                code: status.code(),
                stderr: String::from_utf8_lossy(&stderr).trim().to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&stdout).into_owned())
    }
}

type DelayFn = dyn Fn(&str) -> Duration + Send + Sync;

/// Table-driven engine. Lookup is by page content hash, then by image id.
#[derive(Clone, Default)]
pub struct FakeEngine {
    by_hash: HashMap<String, String>,
    by_id: HashMap<String, String>,
    fallback: Option<String>,
    delay: Option<Arc<DelayFn>>,
    in_flight: Arc<AtomicUsize>,
    peak_in_flight: Arc<AtomicUsize>,
}

impl std::fmt::Debug for FakeEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FakeEngine")
            .field("by_hash", &self.by_hash.len())
            .field("by_id", &self.by_id.len())
            .field("fallback", &self.fallback)
            .finish()
    }
}

impl FakeEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_page(mut self, image: &PageImage, text: impl Into<String>) -> Self {
        self.by_hash.insert(content_hash(image), text.into());
        self
    }

    pub fn with_hash(mut self, hash: impl Into<String>, text: impl Into<String>) -> Self {
        self.by_hash.insert(hash.into(), text.into());
        self
    }

    pub fn with_id(mut self, id: impl Into<String>, text: impl Into<String>) -> Self {
        self.by_id.insert(id.into(), text.into());
        self
    }

    /// Text returned for pages found in neither table.
    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    pub fn with_delay(mut self, delay: impl Fn(&str) -> Duration + Send + Sync + 'static) -> Self {
        self.delay = Some(Arc::new(delay));
        self
    }

    /// Loads `{"<hash or id>": "text", ...}`. Keys of 64 hex digits are
    /// treated as content hashes, anything else as an image id.
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let table: HashMap<String, String> = serde_json::from_str(json)?;
        let mut engine = Self::new();
        for (key, text) in table {
            if key.len() == 64 && key.bytes().all(|b| b.is_ascii_hexdigit()) {
                engine.by_hash.insert(key.to_ascii_lowercase(), text);
            } else {
                engine.by_id.insert(key, text);
            }
        }
        Ok(engine)
    }

    /// Highest number of concurrent `run` calls observed.
    pub fn peak_concurrency(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }
}

impl OcrEngine for FakeEngine {
    fn name(&self) -> &str {
        "fake"
    }

    fn is_available(&self, _cfg: &OcrConfig) -> bool {
        true
    }

    fn run(&self, image: &PageImage, image_id: &str, _cfg: &OcrConfig) -> Result<String, OcrError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        if let Some(delay) = &self.delay {
            std::thread::sleep(delay(image_id));
        }
        let found = self
            .by_hash
            .get(&content_hash(image))
            .or_else(|| self.by_id.get(image_id))
            .or(self.fallback.as_ref())
            .cloned();
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        found.ok_or_else(|| OcrError::EngineFailed {
            code: Some(1),
            stderr: format!("no canned text for page {image_id}"),
        })
    }
}
