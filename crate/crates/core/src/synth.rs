//! Seeded synthetic data: Gaussian point blobs and gaze-sample streams.
//!
//! Everything here is deterministic in its seed, which makes it suitable for
//! tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{GazeSample, Recording, ScreenSpec};
use crate::Point;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Points drawn from isotropic Gaussians, with their generating labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    pub points: Vec<Point>,
    pub labels: Vec<usize>,
    pub centers: Vec<Point>,
}

/// `per_blob` points from `N(center, sigma² I)` for every center, blob by blob.
pub fn gaussian_blobs(seed: u64, centers: &[Point], sigma: f64, per_blob: usize) -> Blobs {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut points = Vec::with_capacity(centers.len() * per_blob);
    let mut labels = Vec::with_capacity(points.capacity());
    for (j, c) in centers.iter().enumerate() {
        for _ in 0..per_blob {
            points.push(Point::new(
                c.x + noise.sample(&mut rng),
                c.y + noise.sample(&mut rng),
            ));
            labels.push(j);
        }
    }
    Blobs {
        points,
        labels,
        centers: centers.to_vec(),
    }
}

/// `k` centers uniform in `[margin, w - margin] × [margin, h - margin]`,
/// pairwise at least `min_sep` apart (rejection sampling).
///
/// Panics if 10 000 consecutive draws fail to place a center.
pub fn separated_centers(
    seed: u64,
    k: usize,
    min_sep: f64,
    screen: ScreenSpec,
    margin: f64,
) -> Vec<Point> {
    let mut rng = rng(seed);
    let (w, h) = (screen.width as f64, screen.height as f64);
    assert!(
        w > 2.0 * margin && h > 2.0 * margin,
        "margin leaves no room"
    );
    let mut centers: Vec<Point> = Vec::with_capacity(k);
    let mut misses = 0;
    while centers.len() < k {
        let c = Point::new(
            rng.random_range(margin..w - margin),
            rng.random_range(margin..h - margin),
        );
        if centers.iter().all(|o| o.dist_sq(&c) >= min_sep * min_sep) {
            centers.push(c);
            misses = 0;
        } else {
            misses += 1;
            assert!(
                misses < 10_000,
                "cannot place {k} centers {min_sep} px apart"
            );
        }
    }
    centers
}

/// Three blobs with σ = 2 px and 100 points each, centers at least 80 px
/// apart on a 1366×768 screen.
pub fn three_blobs(seed: u64) -> Blobs {
    let screen = ScreenSpec {
        width: 1366,
        height: 768,
    };
    let centers = separated_centers(seed, 3, 80.0, screen, 40.0);
    gaussian_blobs(seed.wrapping_add(0x9E37_79B9_7F4A_7C15), &centers, 2.0, 100)
}

/// Shape of a synthetic gaze stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub rate_hz: f64,
    /// Fixation durations are uniform in this range (ms).
    pub fixation_ms: (f64, f64),
    /// Positional jitter within a fixation (px, standard deviation).
    pub jitter_px: f64,
    /// Samples spent moving between targets.
    pub saccade_samples: usize,
    /// Per-fixation probability of a following blink.
    pub blink_prob: f64,
    pub blink_ms: (f64, f64),
    /// Keep targets this far from the screen edge.
    pub margin_px: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            rate_hz: 60.0,
            fixation_ms: (150.0, 450.0),
            jitter_px: 3.0,
            saccade_samples: 3,
            blink_prob: 0.05,
            blink_ms: (100.0, 200.0),
            margin_px: 40.0,
        }
    }
}

fn stamp(i: usize, rate_hz: f64) -> u64 {
    (i as f64 * 1000.0 / rate_hz).round() as u64
}

/// A fixation/saccade sample stream of exactly `n_samples` samples.
///
/// With `targets` empty, fixation targets are uniform over the screen;
/// otherwise they are drawn from `targets` with a little spread, which yields
/// clusterable fixations.
pub fn gaze_recording(
    seed: u64,
    screen: ScreenSpec,
    n_samples: usize,
    targets: &[Point],
    cfg: &StreamConfig,
) -> Recording {
    let mut rng = rng(seed);
    let jitter =
        Normal::new(0.0, cfg.jitter_px).expect("jitter_px must be finite and non-negative");
    let spread = Normal::new(0.0, 15.0).expect("constant");
    let (w, h) = (screen.width as f64, screen.height as f64);
    let clamp = |x: f64, hi: f64| x.clamp(0.0, hi);
    let pick_target = |rng: &mut ChaCha8Rng| -> Point {
        if targets.is_empty() {
            let m = cfg.margin_px;
            Point::new(rng.random_range(m..w - m), rng.random_range(m..h - m))
        } else {
            let t = targets[rng.random_range(0..targets.len())];
            Point::new(
                clamp(t.x + spread.sample(rng), w),
                clamp(t.y + spread.sample(rng), h),
            )
        }
    };

    let mut samples = Vec::with_capacity(n_samples);
    let push = |samples: &mut Vec<GazeSample>, x: f64, y: f64, valid: bool| {
        let i = samples.len();
        samples.push(GazeSample {
            t: stamp(i, cfg.rate_hz),
            x,
            y,
            valid,
        });
    };
    let mut current = pick_target(&mut rng);
    let per_ms = cfg.rate_hz / 1000.0;
    while samples.len() < n_samples {
        let dur = rng.random_range(cfg.fixation_ms.0..=cfg.fixation_ms.1);
        let count = ((dur * per_ms).round() as usize).max(1);
        for _ in 0..count {
            let x = clamp(current.x + jitter.sample(&mut rng), w);
            let y = clamp(current.y + jitter.sample(&mut rng), h);
            push(&mut samples, x, y, true);
        }
        if rng.random::<f64>() < cfg.blink_prob {
            let blink = rng.random_range(cfg.blink_ms.0..=cfg.blink_ms.1);
            for _ in 0..((blink * per_ms).round() as usize) {
                push(&mut samples, 0.0, 0.0, false);
            }
        }
        let next = pick_target(&mut rng);
        let steps = cfg.saccade_samples;
        for s in 1..=steps {
            let f = s as f64 / (steps + 1) as f64;
            push(
                &mut samples,
                current.x + (next.x - current.x) * f,
                current.y + (next.y - current.y) * f,
                true,
            );
        }
        current = next;
    }
    samples.truncate(n_samples);
    Recording {
        id: format!("synthetic-{seed}"),
        screen,
        stimulus: None,
        samples,
        responses: Vec::new(),
        aois: Vec::new(),
        sample_rate_hz: cfg.rate_hz,
    }
}

/// 200 ms steady at (100, 100), a three-sample sweep, then 200 ms steady at
/// (900, 600), sampled at 60 Hz on a 1366×768 screen.
pub fn two_segment_stream() -> Recording {
    let rate = 60.0;
    let steady = (200.0 * rate / 1000.0) as usize + 1;
    let (a, b) = (Point::new(100.0, 100.0), Point::new(900.0, 600.0));
    let mut pts = vec![a; steady];
    for s in 1..=3 {
        let f = s as f64 / 4.0;
        pts.push(Point::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f));
    }
    pts.extend(std::iter::repeat_n(b, steady));
    let samples = pts
        .iter()
        .enumerate()
        .map(|(i, p)| GazeSample {
            t: stamp(i, rate),
            x: p.x,
            y: p.y,
            valid: true,
        })
        .collect();
    Recording {
        id: "two-segment".into(),
        screen: ScreenSpec {
            width: 1366,
            height: 768,
        },
        stimulus: None,
        samples,
        responses: Vec::new(),
        aois: Vec::new(),
        sample_rate_hz: rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_deterministic() {
        assert_eq!(three_blobs(7), three_blobs(7));
        assert_ne!(three_blobs(7).points, three_blobs(8).points);
    }

    #[test]
    fn centers_are_separated() {
        for seed in 0..50 {
            let c = three_blobs(seed).centers;
            for i in 0..3 {
                for j in i + 1..3 {
                    assert!(c[i].dist_sq(&c[j]) >= 80.0 * 80.0);
                }
            }
        }
    }

    #[test]
    fn stream_has_requested_length_and_stays_on_screen() {
        let screen = ScreenSpec {
            width: 1366,
            height: 768,
        };
        let rec = gaze_recording(3, screen, 10_000, &[], &StreamConfig::default());
        assert_eq!(rec.samples.len(), 10_000);
        assert!(rec.samples.windows(2).all(|w| w[0].t < w[1].t));
        assert!(rec.valid_samples().all(|s| screen.contains(s.x, s.y)));
    }
}
