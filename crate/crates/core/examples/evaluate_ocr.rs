//! Character and word accuracy of OCR output against ground truth.
//!
//! `cargo run --example evaluate_ocr [gt.txt hyp.txt]`

use drivethru::metrics::{self, EvalRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (gt, hyp) = if let [g, h] = args.as_slice() {
        (std::fs::read_to_string(g)?, std::fs::read_to_string(h)?)
    } else {
        (
            "Terekel Salim naek kena kai, rak ngadon sare.".to_string(),
            "Bataan ceeiaalteleea Saati: St meinen, aa Terekel Salim naek kena kai, rak ngadon sare."
                .to_string(),
        )
    };

    let rec = EvalRecord::evaluate("sample", "sun", &gt, &hyp)?;
    println!(
        "car={:.4} war={:.4} gt_tokens={} hyp_tokens={}",
        rec.car, rec.war, rec.gt_tokens, rec.hyp_tokens
    );

    // hallucinated text drives both rates below zero
    println!("car(\"ab\", \"xyzw\") = {}", metrics::car("ab", "xyzw")?);
    println!("war(\"kata\", 6 tokens) = {}", metrics::war("kata", "a b c d e f")?);
    Ok(())
}
