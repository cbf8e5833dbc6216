mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use drivethru::corrector::EchoBackend;
use drivethru::pipeline::{
    validate_upload, CorrectionJob, CorrectionMode, JobOptions, JobStatus, UploadedFile,
};
use drivethru::service::{router, ErrorCode, Service, ServiceConfig};
use drivethru::Dictionary;

fn two_pages() -> Vec<(&'static str, Vec<u8>)> {
    vec![("a.png", common::page_png(40, 20, 1)), ("b.png", common::page_png(40, 20, 2))]
}

#[tokio::test(flavor = "multi_thread")]
async fn accepted_upload_runs_to_done() {
    let dir = tempfile::tempdir().unwrap();
    let svc = common::service(dir.path(), common::fake_deps("Sing unik maneh"));
    let app = router(Arc::clone(&svc));
    let reply = common::send(
        &app,
        common::upload_request(&two_pages(), &[("language", "jav"), ("mode", "none"), ("seed", "9")]),
    )
    .await;
    assert_eq!(reply.status, StatusCode::ACCEPTED);
    assert_eq!(reply.headers["content-type"], "application/json; charset=utf-8");
    let id = reply.json()["job_id"].as_str().unwrap().to_string();
    assert_eq!(reply.headers["location"], format!("/api/jobs/{id}"));

    let job = common::wait_terminal(svc.store(), &id).await;
    assert_eq!(job.status, JobStatus::Done);
    let body = common::get(&app, &format!("/api/jobs/{id}")).await.json();
    assert_eq!(body["status"], "done");
    assert_eq!(body["options"]["seed"], 9);
    let results = body["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["name"], "a.png");
    assert_eq!(results[1]["name"], "b.png");
    assert_eq!(results[0]["ocr_text"], "Sing unik maneh");
    assert!(results[0].get("corrected_text").is_none());
}

#[tokio::test(flavor = "multi_thread")]
async fn few_shot_with_echo_backend() {
    let dir = tempfile::tempdir().unwrap();
    let dict = Dictionary::parse("unik\tunik\n", "jav").unwrap();
    let deps =
        common::fake_deps("Sing unik maneh").with_dictionary(dict).with_backend(Arc::new(EchoBackend::new()));
    let svc = common::service(dir.path(), deps);
    let app = router(Arc::clone(&svc));
    let reply = common::send(
        &app,
        common::upload_request(&two_pages(), &[("language", "jav"), ("mode", "few_shot")]),
    )
    .await;
    let id = reply.json()["job_id"].as_str().unwrap().to_string();
    let job = common::wait_terminal(svc.store(), &id).await;
    assert_eq!(job.status, JobStatus::Done);
    assert_eq!(job.results[0].corrected_text.as_deref(), Some("Sing unik maneh"));
}

#[tokio::test]
async fn upload_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(common::service(dir.path(), common::fake_deps("x")));
    let cases: Vec<(Vec<(&str, Vec<u8>)>, Vec<(&str, &str)>, u16, &str)> = vec![
        (vec![], vec![("language", "jav")], 400, "no_files"),
        (vec![("a.tiff", b"II*\0".to_vec())], vec![("language", "jav")], 400, "unsupported_format"),
        (vec![("a.png", vec![0xFF, 0xD8, 0xFF, 0xE0])], vec![("language", "jav")], 400, "magic_mismatch"),
        (two_pages(), vec![("language", "xyz")], 422, "unknown_language"),
        (two_pages(), vec![], 422, "unknown_language"),
        (two_pages(), vec![("language", "jav"), ("mode", "three_shot")], 400, "invalid_mode"),
        (two_pages(), vec![("language", "jav"), ("seed", "-1")], 400, "invalid_request"),
    ];
    for (files, fields, status, code) in cases {
        let reply = common::send(&app, common::upload_request(&files, &fields)).await;
        let body = reply.json();
        assert_eq!(reply.status.as_u16(), status, "{code}: {body}");
        assert_eq!(body["code"], code);
        assert_eq!(body["http_status"], status);
        assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[tokio::test]
async fn oversized_upload_is_413() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ServiceConfig::new(dir.path());
    cfg.max_upload_bytes = 1000;
    let app = router(Service::new(cfg, common::fake_deps("x")).unwrap());
    let mut big = common::page_png(40, 20, 1);
    big.resize(2000, 0);
    let reply = common::send(&app, common::upload_request(&[("big.png", big)], &[("language", "jav")])).await;
    assert_eq!(reply.status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(reply.json()["code"], "payload_too_large");
}

#[tokio::test]
async fn unknown_job_is_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(common::service(dir.path(), common::fake_deps("x")));
    for path in ["/api/jobs/0123456789abcdef", "/api/jobs/..%2Fetc", "/api/nope"] {
        let reply = common::get(&app, path).await;
        assert_eq!(reply.status, StatusCode::NOT_FOUND, "{path}");
        assert_eq!(reply.json()["code"], "not_found");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn healthz_reports_components() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(common::service(
        dir.path(),
        common::fake_deps("x").with_backend(Arc::new(EchoBackend::new())),
    ));
    for _ in 0..2 {
        let reply = common::get(&app, "/api/healthz").await;
        assert_eq!(reply.status, StatusCode::OK);
        assert_eq!(reply.json(), serde_json::json!({"ocr_engine": true, "backend": true}));
    }

    let dir = tempfile::tempdir().unwrap();
    let mut deps = drivethru::PipelineDeps::new(Arc::new(drivethru::TesseractEngine));
    deps.ocr.engine_path = "/nonexistent/ocr-engine".into();
    let app = router(common::service(dir.path(), deps));
    let reply = common::get(&app, "/api/healthz").await;
    assert_eq!(reply.status, StatusCode::OK);
    assert_eq!(reply.json(), serde_json::json!({"ocr_engine": false, "backend": false}));
}

#[tokio::test(flavor = "multi_thread")]
async fn queued_job_resumes_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let images = validate_upload(vec![UploadedFile::new("a.png", common::page_png(40, 20, 3))]).unwrap();
    let job = CorrectionJob::new(
        "pending1",
        images,
        JobOptions { language: "jav".into(), mode: CorrectionMode::None, seed: 1 },
    )
    .unwrap();
    {
        let store = drivethru::JobStore::open(dir.path()).unwrap();
        store.save_uploads(&job).unwrap();
        store.save(&job).unwrap();
    }
    let svc = common::service(dir.path(), common::fake_deps("resumed"));
    assert_eq!(svc.resume_pending().unwrap(), vec!["pending1".to_string()]);
    let done = common::wait_terminal(svc.store(), "pending1").await;
    assert_eq!(done.status, JobStatus::Done);
    assert_eq!(done.results[0].ocr_text.as_deref(), Some("resumed"));
}

#[tokio::test]
async fn static_assets_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "<html>ui</html>").unwrap();
    let mut cfg = ServiceConfig::new(dir.path());
    cfg.static_dir = Some(assets.path().to_path_buf());
    cfg.cors_origins = vec!["http://ui.example".into()];
    let app = router(Service::new(cfg, common::fake_deps("x")).unwrap());

    let reply = common::get(&app, "/").await;
    assert_eq!(reply.status, StatusCode::OK);
    assert_eq!(reply.body, b"<html>ui</html>");

    let req = Request::get("/api/healthz").header("origin", "http://ui.example").body(Body::empty()).unwrap();
    let reply = common::send(&app, req).await;
    assert_eq!(reply.headers["access-control-allow-origin"], "http://ui.example");
}

#[test]
fn error_code_set_is_closed() {
    let codes: Vec<&str> = ErrorCode::ALL.iter().map(|c| c.as_str()).collect();
    assert_eq!(
        codes,
        [
            "no_files",
            "too_many_files",
            "unsupported_format",
            "magic_mismatch",
            "payload_too_large",
            "unknown_language",
            "invalid_mode",
            "invalid_request",
            "not_found",
            "internal"
        ]
    );
}
