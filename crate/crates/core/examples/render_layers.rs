//! Heatmap (PNG), gaze plot and time-coded scatter plot (SVG), plus a
//! cluster overlay. Files go to the system temp directory.
//!
//! `cargo run -p gazekit --example render_layers`

use gazekit::cluster::{self, ClusterConfig, Method};
use gazekit::fixation::{self, FixationConfig};
use gazekit::ingest::ScreenSpec;
use gazekit::render::{self, GazePlotConfig, Gradient, HeatmapConfig, Rgb, ScatterConfig};
use gazekit::synth::{self, StreamConfig};
use gazekit::Point;

fn main() {
    let out = std::env::temp_dir().join("gazekit-examples");
    std::fs::create_dir_all(&out).unwrap();
    let screen = ScreenSpec::new(1366, 768).unwrap();
    let targets = [
        Point::new(350.0, 250.0),
        Point::new(1000.0, 300.0),
        Point::new(700.0, 600.0),
    ];
    let rec = synth::gaze_recording(21, screen, 3000, &targets, &StreamConfig::default());
    let fixations = fixation::detect_fixations(&rec, &FixationConfig::default()).unwrap();

    let save = |name: &str, layer: &render::RenderLayer| {
        let enc = layer.encode().unwrap();
        let path = out.join(format!("{name}.{}", enc.extension));
        std::fs::write(&path, &enc.bytes).unwrap();
        println!(
            "{:<14} {:>8} bytes  {}",
            enc.content_type,
            enc.bytes.len(),
            path.display()
        );
    };

    let heat = render::render_heatmap(&fixations, screen, &HeatmapConfig::default()).unwrap();
    save("heatmap", &heat);
    let blue_red = HeatmapConfig {
        gradient: Gradient {
            low: "0000ff".parse().unwrap(),
            high: Rgb::RED,
        },
        ..Default::default()
    };
    save(
        "heatmap-blue",
        &render::render_heatmap(&fixations, screen, &blue_red).unwrap(),
    );

    let window = Some((5_000.0, 15_000.0));
    let plot =
        render::render_gazeplot(&fixations, screen, window, &GazePlotConfig::default()).unwrap();
    println!(
        "gaze plot window {window:?}: fixations {:?}",
        plot.fixation_markers()
    );
    save("gazeplot", &plot);
    let scatter =
        render::render_scatter(&fixations, screen, window, &ScatterConfig::default()).unwrap();
    assert_eq!(scatter.fixation_markers(), plot.fixation_markers());
    save("scatter", &scatter);

    let points: Vec<Point> = fixations.iter().map(|f| f.centroid()).collect();
    let model = cluster::fit(&points, 3, &ClusterConfig::default(), Method::Em).unwrap();
    let base = render::render_scatter(&fixations, screen, None, &ScatterConfig::default()).unwrap();
    save(
        "clusters",
        &render::overlay_clusters(base, &model, &points).unwrap(),
    );
}
