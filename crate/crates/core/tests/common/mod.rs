#![allow(dead_code)]

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use drivethru::imaging::PageImage;
use drivethru::pipeline::{CorrectionJob, JobStore, PipelineDeps};
use drivethru::service::{Service, ServiceConfig};
use drivethru::FakeEngine;
use http_body_util::BodyExt;
use tower::ServiceExt;

/// Light page with a few dark horizontal strokes; `seed` varies the layout.
pub fn page_png(width: u32, height: u32, seed: u32) -> Vec<u8> {
    let mut px = vec![230u8; (width * height * 3) as usize];
    for y in 0..height {
        for x in 0..width {
            let line = (y + seed) % 12 < 3 && (x + seed * 7) % 40 < 30;
            if line {
                let i = ((y * width + x) * 3) as usize;
                px[i..i + 3].copy_from_slice(&[20, 25, 30]);
            }
        }
    }
    PageImage::new(width, height, 3, px).unwrap().encode_png().unwrap()
}

pub const BOUNDARY: &str = "drivethru-test-boundary";

pub fn multipart(files: &[(&str, Vec<u8>)], fields: &[(&str, &str)]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, value) in fields {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n")
                .as_bytes(),
        );
    }
    for (file_name, bytes) in files {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"files[]\"; filename=\"{file_name}\"\r\n\
                 Content-Type: application/octet-stream\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub fn upload_request(files: &[(&str, Vec<u8>)], fields: &[(&str, &str)]) -> Request<Body> {
    Request::post("/api/jobs")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(files, fields)))
        .unwrap()
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub async fn get(app: &Router, path: &str) -> Reply {
    send(app, Request::get(path).body(Body::empty()).unwrap()).await
}

pub fn fake_deps(text: &str) -> PipelineDeps {
    PipelineDeps::new(Arc::new(FakeEngine::new().with_fallback(text)))
}

pub fn service(dir: &std::path::Path, deps: PipelineDeps) -> Arc<Service> {
    Service::new(ServiceConfig::new(dir), deps).unwrap()
}

pub async fn wait_terminal(store: &JobStore, id: &str) -> CorrectionJob {
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        if let Some(job) = store.load(id).unwrap() {
            if job.status.is_terminal() {
                return job;
            }
        }
        assert!(Instant::now() < deadline, "job {id} did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}
