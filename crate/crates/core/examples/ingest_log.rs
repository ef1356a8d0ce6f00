//! Parse a raw gaze log plus trial metadata into a `Recording`.
//!
//! `cargo run -p gazekit --example ingest_log`

use gazekit::ingest::{self, ScreenSpec};

const LOG: &str = "\
t_ms,x_px,y_px,valid
0,402.5,311.0,1
16,404.0,309.5,1
33,403.1,310.2,1
50,0,0,0
66,not-a-number,12,1
83,870.0,120.4,1
83,871.0,121.0,1
100,1500.0,90.0,1
116,868.2,118.9,1
";

const META: &str = r#"{
  "screen": {"width": 1366, "height": 768},
  "aoi": [
    {"name": "question", "rect": [300, 250, 500, 370]},
    {"name": "options", "polygon": [[800, 80], [950, 80], [950, 160], [800, 160]]}
  ],
  "responses": [{"question_id": "q1", "answer": "B", "t_ms": 100, "correct": true}],
  "operator": "lab-3"
}"#;

fn main() {
    let screen: ScreenSpec = "1366x768".parse().unwrap();
    let (mut recording, report) = ingest::parse_gaze_log(LOG, screen).unwrap();
    println!(
        "rows in: {}, samples: {}",
        report.rows_in, report.samples_out
    );
    println!(
        "malformed: {}, duplicate stamps: {}, off-screen: {}",
        report.malformed, report.deduplicated, report.out_of_range
    );
    for row in &report.malformed_rows {
        println!("  line {}: {}", row.line, row.reason);
    }

    let meta = ingest::parse_trial_meta(META).unwrap();
    for w in &meta.warnings {
        println!("warning: {w}");
    }
    recording.attach_meta(meta).unwrap();
    println!(
        "{} valid of {} samples over {} ms at ~{:.0} Hz; {} AOIs, {} responses",
        recording.valid_samples().count(),
        recording.samples.len(),
        recording.span_ms(),
        recording.sample_rate_hz,
        recording.aois.len(),
        recording.responses.len()
    );

    // The canonical log format round-trips.
    let text = ingest::export_gaze_log(&recording.samples);
    let (again, _) = ingest::parse_gaze_log(&text, screen).unwrap();
    assert_eq!(again.samples, recording.samples);
}
