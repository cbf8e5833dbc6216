//! Aggregating per-document scores into language rows and rendering the
//! CAR, WAR and token tables.
//!
//! `cargo run --example benchmark_report [table|csv|json]`

use drivethru::bench::{self, BenchmarkReport, System};
use drivethru::EvalRecord;

fn main() {
    let format = std::env::args().nth(1).unwrap_or_else(|| "table".into()).parse().unwrap();
    let systems = System::parse_list("ots,llm-zs,llm-fs").unwrap();
    let rows = [
        ("ban", [0.943, 0.917, 0.919], [0.777, 0.808, 0.818], 16138, [16207, 16034, 15955]),
        ("jav", [-0.993, 0.970, 0.956], [-4.04, 0.532, -0.966], 12300, [14471, 11979, 12897]),
        ("sun", [0.911, 0.738, 0.168], [0.777, 0.903, 0.872], 18558, [18771, 18513, 18524]),
        ("min", [0.958, 0.942, 0.942], [0.866, 0.806, 0.779], 30368, [30614, 30389, 30490]),
    ];
    let mut records = Vec::new();
    for (lang, car, war, gt, hyp) in rows {
        for (i, sys) in systems.iter().enumerate() {
            let rec = EvalRecord {
                doc_id: format!("{lang}-all"),
                language: lang.into(),
                car: car[i],
                war: war[i],
                hyp_tokens: hyp[i],
                gt_tokens: gt,
            };
            records.push((sys.clone(), rec));
        }
    }
    let report = BenchmarkReport::from_records(&systems, records);
    print!("{}", bench::render_report(&report, format));
}
