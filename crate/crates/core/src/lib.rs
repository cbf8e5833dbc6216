//! Scanned-page digitization for low-resource languages.
//!
//! Pages go through a fixed preprocessing chain ([`imaging`]), an external
//! OCR engine ([`ocr`]) and optionally a prompted LLM post-correction step
//! ([`corrector`]) that can be primed with similar words from a bilingual
//! dictionary ([`lexicon`]). [`metrics`] and [`bench`] score the output
//! against ground truth; [`pipeline`], [`service`] and [`cli`] wire it all up.

pub mod bench;
pub mod cli;
pub mod corrector;
pub mod imaging;
pub mod lexicon;
pub mod metrics;
pub mod ocr;
mod par;
pub mod pipeline;
pub mod service;

pub use bench::{run_benchmark, BenchmarkReport, System};
pub use corrector::{
    correct, render_prompt, CorrectionRequest, CorrectionResult, GenerationParams, LlmBackend, LlmError,
    PromptMode, PromptTemplate,
};
pub use imaging::{preprocess, PageImage, PreprocessConfig};
pub use lexicon::{select_pairs, Dictionary, SelectionConfig, SimilarPair, WordPair};
pub use metrics::{car, token_count, war, EvalRecord};
pub use ocr::{recognize, FakeEngine, OcrConfig, OcrEngine, OcrOutput, TesseractEngine};
pub use pipeline::{run_job, CorrectionJob, CorrectionMode, JobStatus, JobStore, PipelineDeps, UploadedFile};
