//! Talking to a chat-completions endpoint. Set DRIVETHRU_LLM_BASE_URL (and
//! optionally DRIVETHRU_LLM_API_KEY, DRIVETHRU_LLM_MODEL) to use a real one;
//! without it the example uses a canned table.

use drivethru::corrector::{
    self, CorrectionRequest, GenerationParams, HttpBackend, HttpBackendConfig, TableBackend,
};
use drivethru::LlmBackend;

fn main() {
    let req = CorrectionRequest::zero_shot(". eRe ; Naskah Supersemar jing tangane Pak Harto we", "jav");
    let prompt = corrector::render_prompt(&req);

    let backend: Box<dyn LlmBackend> = match HttpBackendConfig::from_env() {
        Some(cfg) => {
            println!("endpoint {} model {}", cfg.base_url, cfg.model);
            Box::new(HttpBackend::new(cfg))
        }
        None => Box::new(
            TableBackend::new("canned").with_completion(&prompt, "Naskah Supersemar ing tangane Pak Harto."),
        ),
    };
    println!("reachable: {}", backend.probe());
    match corrector::correct(&req, backend.as_ref(), &GenerationParams::default()) {
        Ok(out) => println!("[{} in {} ms] {}", out.backend_id, out.latency_ms, out.corrected_text),
        Err(e) => println!("correction failed: {e}"),
    }
}
