//! Nine-region scanpaths: first-fixation region and region-to-region
//! transition frequencies, per user and pooled.
//!
//! `cargo run -p gazekit --example scanpath_bigrams`

use gazekit::fixation::{self, FixationConfig};
use gazekit::ingest::ScreenSpec;
use gazekit::sequence::{self, RegionLabel};
use gazekit::synth::{self, StreamConfig};

fn main() {
    let screen = ScreenSpec::new(1366, 768).unwrap();
    let mut per_user = Vec::new();
    for user in 0..4 {
        let rec = synth::gaze_recording(100 + user, screen, 2400, &[], &StreamConfig::default());
        let fx = fixation::detect_fixations(&rec, &FixationConfig::default()).unwrap();
        let labels = sequence::label_sequence(&fx, screen).unwrap();
        let first = sequence::first_fixation_region(&fx, screen).unwrap();
        let path: Vec<&str> = labels.iter().take(12).map(RegionLabel::code).collect();
        println!(
            "user {user}: first region {}, path {} ...",
            first.code(),
            path.join(" ")
        );
        per_user.push(labels);
    }

    let pooled = sequence::pooled_bigram_frequencies(&per_user);
    println!("top transitions over {} users:", per_user.len());
    for b in pooled.ranking.iter().take(5) {
        println!("  {} -> {}: {}", b.from.code(), b.to.code(), b.count);
    }
    println!(
        "{} transitions, {} within one region",
        pooled.table.total(),
        pooled.table.diagonal_total()
    );

    // Screen edges belong to the last row and column.
    let corner = sequence::region_of(1366.0, 768.0, screen).unwrap();
    println!("(1366, 768) lies in {}", corner.code());
}
