//! Offline eye-gaze analytics.
//!
//! `gazekit` turns recorded gaze logs into fixations, discovers areas of
//! interest by hard (k-means) and soft (Gaussian mixture EM) clustering with
//! Xie–Beni validity-driven model selection, computes region-based scanpath
//! statistics, runs the usual inferential tests over trial aggregates and
//! renders heatmaps, gaze plots and time-coded scatter plots.
//!
//! The typical pipeline:
//!
//! ```no_run
//! use gazekit::{cluster, fixation, ingest, render, sequence};
//!
//! let screen = ingest::ScreenSpec::new(1366, 768).unwrap();
//! let raw = std::fs::read_to_string("session.csv").unwrap();
//! let (recording, _report) = ingest::parse_gaze_log(&raw, screen).unwrap();
//!
//! let fixations = fixation::detect_fixations(&recording, &Default::default()).unwrap();
//! let points: Vec<_> = fixations.iter().map(|f| f.centroid()).collect();
//! let sweep = cluster::select_k(&points, 2, 8, &Default::default(), cluster::Method::Em).unwrap();
//! println!("best k = {}", sweep.best.k);
//!
//! let labels = sequence::label_sequence(&fixations, screen).unwrap();
//! let bigrams = sequence::bigram_frequencies(&labels);
//! let heatmap = render::render_heatmap(&fixations, screen, &Default::default()).unwrap();
//! std::fs::write("heatmap.png", heatmap.encode().unwrap().bytes).unwrap();
//! # let _ = bigrams;
//! ```
//!
//! Runnable walkthroughs for each capability live in this crate's `examples/`
//! directory (`cargo run -p gazekit --example <name>`).

pub mod cluster;
mod error;
pub mod fixation;
pub mod ingest;
pub mod render;
pub mod sequence;
pub mod special;
pub mod stats;
pub mod synth;

pub use error::Error;

use serde::{Deserialize, Serialize};

/// A 2-D position in screen pixels (origin top-left, y downward).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}
