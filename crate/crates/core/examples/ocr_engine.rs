//! Recognizing preprocessed pages with the external engine, or a canned one.
//!
//! Uses the real engine when it is installed (`DRIVETHRU_OCR_BIN` overrides
//! the binary), otherwise falls back to a fake engine.

use drivethru::imaging::{self, PageImage, PreprocessConfig};
use drivethru::ocr::{self, FakeEngine, OcrConfig, OcrEngine, OcrInput, TesseractEngine};

fn main() {
    let cfg = OcrConfig::from_env();
    println!("engine flags: {}", cfg.flag_string());

    let page = PageImage::filled_gray(200, 60, 235).unwrap();
    let prepared = imaging::preprocess(&page, &PreprocessConfig::default()).unwrap();

    let real = TesseractEngine;
    let fake = FakeEngine::new().with_page(&prepared, "Naskah Supersemar ing tangane Pak Harto");
    let engine: &dyn OcrEngine = if real.is_available(&cfg) { &real } else { &fake };
    println!("using {}", engine.name());

    match ocr::recognize(engine, &prepared, "blank.png", &cfg) {
        Ok(out) => println!("{} ms: {:?}", out.duration_ms, out.text),
        Err(e) => println!("failed: {e}"),
    }

    let inputs: Vec<OcrInput> =
        (0..3).map(|i| OcrInput { id: format!("p{i}"), image: prepared.clone() }).collect();
    for (input, out) in inputs.iter().zip(ocr::recognize_batch(engine, &inputs, &cfg, 2)) {
        println!("{}: {}", input.id, out.map(|o| o.text).unwrap_or_else(|e| e.to_string()));
    }
}
