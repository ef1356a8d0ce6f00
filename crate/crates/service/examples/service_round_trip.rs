//! Starts the HTTP service in-process on an ephemeral port, uploads a
//! synthetic recording and runs fixate -> cluster sweep -> heatmap.
//!
//! `cargo run -p gazekit-service --release --example service_round_trip`

use std::time::Instant;

use gazekit::ingest::{self, ScreenSpec};
use gazekit::synth::{self, StreamConfig};
use gazekit::Point;
use gazekit_service::http::{spawn_local, AppState};
use gazekit_service::workspace::Workspace;
use serde_json::{json, Value};

#[tokio::main]
async fn main() {
    let root = std::env::temp_dir().join(format!("gazekit-ws-{}", std::process::id()));
    let workspace = Workspace::open(&root).unwrap();
    let addr = spawn_local(AppState {
        workspace,
        ui_dir: None,
    })
    .await
    .unwrap();
    let base = format!("http://{addr}");
    println!("workspace {} served at {base}", root.display());

    let screen = ScreenSpec::new(1366, 768).unwrap();
    let targets = [
        Point::new(300.0, 200.0),
        Point::new(1000.0, 250.0),
        Point::new(650.0, 600.0),
    ];
    let rec = synth::gaze_recording(1, screen, 10_000, &targets, &StreamConfig::default());
    let log = ingest::export_gaze_log(&rec.samples);

    let c = reqwest::Client::new();
    let start = Instant::now();
    let receipt: Value = c
        .post(format!("{base}/recordings"))
        .json(&json!({ "log": log, "screen": "1366x768" }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = receipt["id"].as_str().unwrap();
    println!("uploaded {id}: {} samples", receipt["samples"]);

    for (kind, params) in [
        ("fixate", json!({})),
        ("cluster", json!({ "sweep": "2..8" })),
    ] {
        let resp = c
            .post(format!("{base}/recordings/{id}/analyses"))
            .json(&json!({ "kind": kind, "params": params }))
            .send()
            .await
            .unwrap();
        let cache = resp.headers()["x-gazekit-cache"]
            .to_str()
            .unwrap()
            .to_string();
        let job: Value = resp.json().await.unwrap();
        println!("{kind:<8} {} ({cache}) -> {}", job["id"], job["status"]);
        if kind == "cluster" {
            let out = &job["output"];
            for row in out["table"].as_array().unwrap() {
                println!("    k={} XB={}", row["k"], row["xb"]);
            }
            println!("    selected k = {}", out["model"]["k"]);
        }
    }

    let png = c
        .get(format!(
            "{base}/recordings/{id}/layers/heatmap?low=00ff00&high=ff0000"
        ))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    println!(
        "heatmap: {} bytes PNG; round trip {:.2?}",
        png.len(),
        start.elapsed()
    );

    let err: Value = c
        .get(format!(
            "{base}/recordings/{id}/layers/gazeplot?window=900,100"
        ))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    println!("inverted window -> {}", err["error"]);
    std::fs::remove_dir_all(&root).ok();
}
