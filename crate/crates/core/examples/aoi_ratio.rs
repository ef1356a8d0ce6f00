//! Declared AOIs: share of fixations per polygon, and per-question
//! aggregates from logged responses.
//!
//! `cargo run -p gazekit --example aoi_ratio`

use gazekit::fixation::{self, FixationConfig};
use gazekit::ingest::{self, ScreenSpec};
use gazekit::sequence::{self, AoiSpec};
use gazekit::synth::{self, StreamConfig};
use gazekit::Point;

fn main() {
    let screen = ScreenSpec::new(1366, 768).unwrap();
    let targets = [
        Point::new(400.0, 300.0),
        Point::new(900.0, 300.0),
        Point::new(650.0, 650.0),
    ];
    let mut rec = synth::gaze_recording(9, screen, 3600, &targets, &StreamConfig::default());
    let meta = ingest::parse_trial_meta(
        r#"{"responses": [
            {"question_id": "q1", "answer": "A", "t_ms": 20000, "correct": true},
            {"question_id": "q2", "answer": "C", "t_ms": 41000, "correct": false},
            {"question_id": "q3", "answer": "B", "t_ms": 58000, "correct": true}
        ]}"#,
    )
    .unwrap();
    rec.attach_meta(meta).unwrap();
    let fixations = fixation::detect_fixations(&rec, &FixationConfig::default()).unwrap();

    let aois = [
        AoiSpec::rect("left chart", 300.0, 200.0, 500.0, 400.0).unwrap(),
        AoiSpec::rect("right chart", 800.0, 200.0, 1000.0, 400.0).unwrap(),
        AoiSpec::new(
            "answer strip",
            vec![
                Point::new(500.0, 580.0),
                Point::new(800.0, 580.0),
                Point::new(760.0, 720.0),
                Point::new(540.0, 720.0),
            ],
        )
        .unwrap(),
    ];
    for aoi in &aois {
        let ratio = sequence::aoi_fixation_ratio(&fixations, aoi).unwrap();
        println!("{:<13} {:>5.1}% of fixations", aoi.name, 100.0 * ratio);
    }

    let bowtie = AoiSpec::new(
        "bad",
        vec![
            Point::new(0.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(10.0, 0.0),
            Point::new(0.0, 10.0),
        ],
    );
    println!("self-intersecting polygon: {}", bowtie.unwrap_err());

    let summary = fixation::fixation_summary(&fixations, &rec.responses);
    for q in &summary.questions {
        println!(
            "{}: {} fixations, mean {:.0} ms, answered after {} ms, correct {:?}",
            q.question_id, q.fixation_count, q.mean_fixation_ms, q.latency_ms, q.correct
        );
    }
    println!(
        "{} correct, mean correct latency {:.0} ms, total {} ms",
        summary.correct_count,
        summary.mean_correct_latency_ms.unwrap_or(f64::NAN),
        summary.total_time_ms
    );
}
