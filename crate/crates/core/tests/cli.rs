mod common;

use std::path::Path;
use std::process::{Command, Output};

fn drivethru(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drivethru"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DRIVETHRU_CONFIG")
        .env_remove("DRIVETHRU_LLM_BASE_URL")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `n` page images and a fake-OCR table covering the first `known`.
fn pages(dir: &Path, n: usize, known: usize) -> Vec<String> {
    let mut table = serde_json::Map::new();
    let mut names = Vec::new();
    for i in 0..n {
        let name = format!("page{i}.png");
        std::fs::write(dir.join(&name), common::page_png(30, 10, i as u32)).unwrap();
        if i < known {
            table.insert(name.clone(), format!("Sing unik maneh {i}").into());
        }
        names.push(name);
    }
    std::fs::write(dir.join("ocr.json"), serde_json::Value::Object(table).to_string()).unwrap();
    names
}

#[test]
fn extract_raw_text() {
    let dir = tempfile::tempdir().unwrap();
    pages(dir.path(), 1, 1);
    let o = drivethru(&["extract", "page0.png", "--fake-ocr", "ocr.json", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(dir.path().join("out/page0.txt")).unwrap(), "Sing unik maneh 0");
    assert!(!dir.path().join("out/page0.corrected.txt").exists());
}

#[test]
fn extract_is_not_capped_at_five() {
    let dir = tempfile::tempdir().unwrap();
    let names = pages(dir.path(), 6, 6);
    let mut args = vec!["extract"];
    args.extend(names.iter().map(String::as_str));
    args.extend(["--fake-ocr", "ocr.json", "--out", "out", "--dump-preprocessed"]);
    let o = drivethru(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..6 {
        assert!(dir.path().join(format!("out/page{i}.txt")).exists());
        assert!(dir.path().join(format!("out/page{i}.preprocessed.png")).exists());
    }
}

#[test]
fn extract_partial_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    pages(dir.path(), 2, 1);
    let o = drivethru(
        &["extract", "page0.png", "page1.png", "--fake-ocr", "ocr.json", "--out", "out", "--json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let job: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(job["status"], "partial");
    assert!(dir.path().join("out/page0.txt").exists());
}

#[test]
fn few_shot_requires_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    pages(dir.path(), 1, 1);
    let args = [
        "extract",
        "page0.png",
        "--fake-ocr",
        "ocr.json",
        "--lang",
        "jav",
        "--mode",
        "few_shot",
        "--backend",
        "echo",
    ];
    let o = drivethru(&args, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dictionary required"), "{}", stderr(&o));

    std::fs::write(dir.path().join("jav.tsv"), "unik\tunik\n").unwrap();
    let mut with_dict = args.to_vec();
    with_dict.extend(["--dict", "jav.tsv", "--out", "out"]);
    let o = drivethru(&with_dict, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("out/page0.corrected.txt")).unwrap(),
        "Sing unik maneh 0"
    );
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    pages(dir.path(), 1, 1);
    std::fs::write(
        dir.path().join("dt.conf"),
        "lang = jav\nmode = few_shot\nbackend = echo\nfake_ocr = ocr.json\n",
    )
    .unwrap();
    let o = drivethru(&["--config", "dt.conf", "extract", "page0.png"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dictionary required"));
    let o = drivethru(
        &["--config", "dt.conf", "extract", "page0.png", "--mode", "none", "--out", "out"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let o = Command::new(env!("CARGO_BIN_EXE_drivethru"))
        .args(["extract", "page0.png"])
        .current_dir(dir.path())
        .env("DRIVETHRU_CONFIG", "dt.conf")
        .output()
        .unwrap();
    assert!(stderr(&o).contains("dictionary required"));
}

#[test]
fn eval_prints_scores() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "Sing unik maneh").unwrap();
    std::fs::write(dir.path().join("h.txt"), "Sing unik").unwrap();
    let o = drivethru(&["eval", "--gt", "g.txt", "--hyp", "g.txt"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "car=1.0 war=1.0 gt_tokens=3 hyp_tokens=3");
    let o = drivethru(&["eval", "--gt", "g.txt", "--hyp", "h.txt", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["hyp_tokens"], 2);
    assert!((v["war"].as_f64().unwrap() - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn dict_validate_reports_lines() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.tsv"), "makan\tnedha\nbroken line\nminum\tngombe\n").unwrap();
    let o = drivethru(&["dict", "validate", "bad.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.tsv:2:"), "{}", stderr(&o));
    let o = drivethru(&["dict", "validate", "bad.tsv", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["errors"][0]["line"], 2);
    std::fs::write(dir.path().join("good.tsv"), "makan\tnedha\n").unwrap();
    assert!(drivethru(&["dict", "validate", "good.tsv"], dir.path()).status.success());
}

#[test]
fn correct_prints_prompt_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ocr.txt"), "ndu- weni").unwrap();
    let o = drivethru(&["correct", "ocr.txt", "--lang", "jav", "--print-prompt"], dir.path());
    assert_eq!(stdout(&o), "Fix the grammar of the following text:\n\nndu- weni");
    let o = drivethru(&["correct", "ocr.txt", "--lang", "jav", "--backend", "echo", "--json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["corrected_text"], "ndu- weni");
    assert_eq!(v["mode"], "zero_shot");
}

#[test]
fn bench_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    pages(dir.path(), 2, 2);
    std::fs::write(dir.path().join("page0.txt"), "Sing unik maneh 0").unwrap();
    std::fs::write(dir.path().join("page1.txt"), "Sing unik maneh siji").unwrap();
    std::fs::create_dir(dir.path().join("dicts")).unwrap();
    std::fs::write(dir.path().join("dicts/jav.tsv"), "unik\tunik\n").unwrap();
    let manifest = serde_json::json!({"entries": [
        {"doc_id": "a", "language": "jav", "title": "A", "genre": "g", "pages": [{"image": "page0.png", "gt": "page0.txt"}]},
        {"doc_id": "b", "language": "jav", "title": "B", "genre": "g", "pages": [{"image": "page1.png", "gt": "page1.txt"}]}
    ]});
    std::fs::write(dir.path().join("manifest.json"), manifest.to_string()).unwrap();
    let run = |out: &str| {
        let o = drivethru(
            &[
                "bench",
                "run",
                "--manifest",
                "manifest.json",
                "--systems",
                "ots,llm-zs,llm-fs",
                "--backend",
                "llm=echo",
                "--dict-dir",
                "dicts",
                "--fake-ocr",
                "ocr.json",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(dir.path().join(out)).unwrap()
    };
    let first = run("r1.csv");
    assert_eq!(first, run("r2.csv"));
    assert!(first.starts_with("metric,language,GT,OTS,llm (ZS),llm (FS)\n"), "{first}");
    assert!(first.contains("car,avg,"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(drivethru(&["extract"], dir.path()).status.code(), Some(1));
    assert_eq!(drivethru(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        drivethru(&["eval", "--gt", "missing", "--hyp", "missing"], dir.path()).status.code(),
        Some(1)
    );
    let help = drivethru(&["extract", "--help"], dir.path());
    assert!(help.status.success());
    assert!(stdout(&help).contains("at most 5 images"));
}
