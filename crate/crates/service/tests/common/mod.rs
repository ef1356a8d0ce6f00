#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;

use gazekit::ingest::{self, ScreenSpec};
use gazekit::synth::{self, StreamConfig};
use gazekit::Point;
use gazekit_service::http::{spawn_local, AppState};
use gazekit_service::workspace::Workspace;

pub const SCREEN: ScreenSpec = ScreenSpec {
    width: 1366,
    height: 768,
};

/// A gaze log with fixations drawn around three well-separated targets.
pub fn synthetic_log(seed: u64, n_samples: usize) -> String {
    let targets = [
        Point::new(300.0, 200.0),
        Point::new(1000.0, 250.0),
        Point::new(650.0, 600.0),
    ];
    let rec = synth::gaze_recording(seed, SCREEN, n_samples, &targets, &StreamConfig::default());
    ingest::export_gaze_log(&rec.samples)
}

pub async fn start(root: &Path, ui_dir: Option<&Path>) -> String {
    let ws = Workspace::open(root).expect("workspace opens");
    let addr: SocketAddr = spawn_local(AppState {
        workspace: ws,
        ui_dir: ui_dir.map(Path::to_path_buf),
    })
    .await
    .expect("server binds");
    format!("http://{addr}")
}

pub async fn upload(client: &reqwest::Client, base: &str, log: &str) -> String {
    let resp = client
        .post(format!("{base}/recordings"))
        .json(&serde_json::json!({ "log": log, "screen": "1366x768" }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 201);
    let body: serde_json::Value = resp.json().await.unwrap();
    body["id"].as_str().unwrap().to_string()
}
