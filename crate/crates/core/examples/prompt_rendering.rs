//! Zero-shot and few-shot prompts, and what a backend reply turns into.

use drivethru::corrector::{self, CorrectionRequest, EchoBackend, GenerationParams, TableBackend};
use drivethru::SimilarPair;

fn main() {
    let ocr = "Untu iki bisa ma- mah gegodhongan kang akeh banget";
    let zs = CorrectionRequest::zero_shot(ocr, "jav");
    println!("--- zero-shot\n{}\n", corrector::render_prompt(&zs));

    let hints = vec![SimilarPair {
        token: "mah".into(),
        candidate: "mamah".into(),
        gloss: "mengunyah".into(),
        score: 0.75,
    }];
    let fs = CorrectionRequest::few_shot(ocr, "jav", hints);
    let prompt = corrector::render_prompt(&fs);
    println!("--- few-shot\n{prompt}\n");

    let params = GenerationParams::default();
    let echo = corrector::correct(&fs, &EchoBackend::new(), &params).unwrap();
    println!("echo backend:  {}", echo.corrected_text);

    let reply = "Here is the corrected text:\n```\nUntu iki bisa mamah gegodhongan kang akeh banget.\n```";
    let table = TableBackend::new("canned").with_completion(&prompt, reply);
    let fixed = corrector::correct(&fs, &table, &params).unwrap();
    println!("canned reply:  {}", fixed.corrected_text);
    println!("prompt sha256: {}", corrector::prompt_hash(&prompt));
}
