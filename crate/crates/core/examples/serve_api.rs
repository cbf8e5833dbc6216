//! Starts the HTTP service on an ephemeral port with a fake engine, uploads
//! nothing, and checks the health endpoint. Pass `--forever` to keep serving.

use std::sync::Arc;

use drivethru::service::{self, Service, ServiceConfig};
use drivethru::{FakeEngine, PipelineDeps};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let data = tempfile::tempdir()?;
    let deps = PipelineDeps::new(Arc::new(FakeEngine::new().with_fallback("Sing unik maneh")));
    let mut cfg = ServiceConfig::new(data.path());
    cfg.cors_origins = vec!["*".into()];
    let svc = Service::new(cfg, deps).map_err(std::io::Error::other)?;

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    println!("POST http://{addr}/api/jobs  (multipart: files[], language, mode)");

    if std::env::args().any(|a| a == "--forever") {
        return service::serve(listener, svc).await;
    }
    tokio::spawn(async move { axum::serve(listener, service::router(svc)).await });
    let url = format!("http://{addr}/api/healthz");
    let body = tokio::task::spawn_blocking(move || reqwest::blocking::get(url).and_then(|r| r.text()))
        .await
        .unwrap()
        .map_err(std::io::Error::other)?;
    println!("healthz: {body}");
    Ok(())
}
