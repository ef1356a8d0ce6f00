//! Discover areas of interest with k-means on fixation centroids and pick k
//! with the Xie–Beni index.
//!
//! `cargo run -p gazekit --example kmeans_aois`

use gazekit::cluster::{self, ClusterConfig, Membership, Method};
use gazekit::fixation::{self, FixationConfig};
use gazekit::ingest::ScreenSpec;
use gazekit::synth::{self, StreamConfig};
use gazekit::Point;

fn main() {
    let screen = ScreenSpec::new(1366, 768).unwrap();
    let targets = [
        Point::new(250.0, 200.0),
        Point::new(1100.0, 180.0),
        Point::new(300.0, 600.0),
        Point::new(1000.0, 620.0),
    ];
    let recording = synth::gaze_recording(3, screen, 6000, &targets, &StreamConfig::default());
    let fixations = fixation::detect_fixations(&recording, &FixationConfig::default()).unwrap();
    let points: Vec<Point> = fixations.iter().map(|f| f.centroid()).collect();

    let cfg = ClusterConfig {
        seed: 1,
        membership: Membership::Hard,
        ..Default::default()
    };
    let sweep = cluster::select_k(&points, 2, 8, &cfg, Method::Kmeans).unwrap();
    println!("{} fixations", points.len());
    println!("  k   XB          WCSS");
    for row in &sweep.table {
        println!(
            "  {}   {:<10.5}  {:.0}",
            row.k,
            row.xb.unwrap_or(f64::NAN),
            row.objective.unwrap_or(f64::NAN)
        );
    }
    let best = &sweep.best;
    println!(
        "best k = {} (restart {}, {} Lloyd updates)",
        best.k, best.restart, best.iterations
    );
    let assign = best.assignments();
    for (j, c) in best.means.iter().enumerate() {
        let size = assign.iter().filter(|&&a| a == j).count();
        println!(
            "  AOI {j}: center ({:.0}, {:.0}), {size} fixations",
            c.x, c.y
        );
    }

    // A fixed k skips the sweep.
    let two = cluster::kmeans(&points, 2, &cfg).unwrap();
    println!(
        "k = 2 WCSS {:.0} vs k = {} WCSS {:.0}",
        two.wcss.unwrap(),
        best.k,
        best.wcss.unwrap()
    );
}
