//! Gaussian mixture EM with Xie–Beni model selection over k = 2..8.
//!
//! `cargo run -p gazekit --release --example em_xb_sweep`

use gazekit::cluster::{self, ClusterConfig, Method};
use gazekit::synth;

fn main() {
    let blobs = synth::three_blobs(42);
    println!("true centers:");
    for c in &blobs.centers {
        println!("  ({:.1}, {:.1})", c.x, c.y);
    }

    let cfg = ClusterConfig {
        seed: 42,
        ..Default::default()
    };
    let sweep = cluster::select_k(&blobs.points, 2, 8, &cfg, Method::Em).unwrap();
    println!("  k   XB           log-likelihood");
    for row in &sweep.table {
        match (&row.error, row.xb) {
            (Some(code), _) => println!("  {}   failed: {code}", row.k),
            (None, xb) => println!(
                "  {}   {:<11.3e}  {:.2}",
                row.k,
                xb.unwrap_or(f64::NAN),
                row.objective.unwrap_or(f64::NAN)
            ),
        }
    }

    let best = &sweep.best;
    println!("selected k = {}", best.k);
    let weights = best.weights.as_ref().unwrap();
    let covs = best.covariances.as_ref().unwrap();
    for ((m, w), c) in best.means.iter().zip(weights).zip(covs) {
        let (l1, l2) = c.eigenvalues();
        println!(
            "  mean ({:.2}, {:.2})  weight {:.3}  sd {:.2} x {:.2}",
            m.x,
            m.y,
            w,
            l1.sqrt(),
            l2.sqrt()
        );
    }

    let trace = &best.log_likelihood_trace;
    println!(
        "winning restart: {} iterations, LL {:.3} -> {:.3}",
        best.iterations,
        trace[0],
        trace[trace.len() - 1]
    );
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-8));
}
