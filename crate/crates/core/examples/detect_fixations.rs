//! Dispersion-threshold fixation detection on a synthetic 60 Hz stream.
//!
//! `cargo run -p gazekit --example detect_fixations`

use gazekit::fixation::{self, FixationConfig};
use gazekit::ingest::ScreenSpec;
use gazekit::synth::{self, StreamConfig};

fn main() {
    let screen = ScreenSpec::new(1366, 768).unwrap();
    let recording = synth::gaze_recording(7, screen, 1800, &[], &StreamConfig::default());

    let cfg = FixationConfig::default();
    let fixations = fixation::detect_fixations(&recording, &cfg).unwrap();
    println!(
        "{} samples -> {} fixations (dispersion {} px, min {} ms)",
        recording.samples.len(),
        fixations.len(),
        cfg.dispersion_px,
        cfg.min_duration_ms
    );
    for f in fixations.iter().take(8) {
        println!(
            "  t={:>6.0} ms  dur={:>4.0} ms  at ({:>6.1}, {:>5.1})  n={}",
            f.onset, f.duration, f.cx, f.cy, f.n
        );
    }

    for dispersion in [10.0, 30.0, 60.0, 120.0] {
        let cfg = FixationConfig {
            dispersion_px: dispersion,
            ..cfg
        };
        let fx = fixation::detect_fixations(&recording, &cfg).unwrap();
        let covered: usize = fx.iter().map(|f| f.n).sum();
        println!(
            "dispersion {dispersion:>5} px: {:>3} fixations covering {covered} samples",
            fx.len()
        );
    }

    // Fixation lists have a compact text form.
    let csv = gazekit::ingest::export_fixations(&fixations);
    println!("{}", csv.lines().take(3).collect::<Vec<_>>().join("\n"));
}
