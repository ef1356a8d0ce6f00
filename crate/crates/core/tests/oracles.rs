//! Library results checked against independently computed references:
//! exhaustive search, direct summation, alternative sums-of-squares routes,
//! closed forms and frozen high-precision tables.

use gazekit::cluster::{self, ClusterConfig, Membership, Method};
use gazekit::fixation::{detect_fixations, Fixation, FixationConfig};
use gazekit::ingest::ScreenSpec;
use gazekit::render::{self, Gradient, HeatmapConfig};
use gazekit::sequence::{self, RegionLabel};
use gazekit::{special, stats, synth, Point};
use rand::Rng;

fn pts(raw: &[(f64, f64)]) -> Vec<Point> {
    raw.iter().map(|&p| p.into()).collect()
}

// ---------------------------------------------------------------- clustering

/// Exhaustive optimum of the 2-means objective: every bipartition of the
/// points into two non-empty sets, each scored around its own mean.
fn brute_force_two_means(points: &[Point]) -> f64 {
    let n = points.len();
    let sse = |idx: &[usize]| {
        let m = idx.len() as f64;
        let cx = idx.iter().map(|&i| points[i].x).sum::<f64>() / m;
        let cy = idx.iter().map(|&i| points[i].y).sum::<f64>() / m;
        idx.iter()
            .map(|&i| (points[i].x - cx).powi(2) + (points[i].y - cy).powi(2))
            .sum::<f64>()
    };
    let mut best = f64::INFINITY;
    // Point 0 is pinned to side A so each partition is visited once.
    for mask in 0u32..(1 << (n - 1)) - 1 {
        let mut a = vec![0];
        let mut b = Vec::new();
        for i in 1..n {
            if mask >> (i - 1) & 1 == 1 {
                a.push(i);
            } else {
                b.push(i);
            }
        }
        if b.is_empty() {
            continue;
        }
        best = best.min(sse(&a) + sse(&b));
    }
    best
}

#[test]
fn kmeans_matches_exhaustive_optimum() {
    let mut rng = synth::rng(2024);
    for instance in 0..50u64 {
        let n = rng.random_range(4..=10);
        let points: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect();
        let cfg = ClusterConfig {
            seed: instance,
            ..Default::default()
        };
        let model = cluster::kmeans(&points, 2, &cfg).unwrap();
        let exact = brute_force_two_means(&points);
        let got = model.wcss.unwrap();
        assert!(
            (got - exact).abs() <= 1e-9,
            "instance {instance}: {got} vs {exact}"
        );
    }
}

/// Xie–Beni by direct double summation over a membership matrix.
fn xb_direct(points: &[Point], centers: &[Point], u: &[Vec<f64>], m: f64) -> f64 {
    let mut num = 0.0;
    for (p, row) in points.iter().zip(u) {
        for (c, &uik) in centers.iter().zip(row) {
            num += uik.powf(m) * ((p.x - c.x).powi(2) + (p.y - c.y).powi(2));
        }
    }
    let mut min_sep = f64::INFINITY;
    for (j, a) in centers.iter().enumerate() {
        for b in &centers[j + 1..] {
            min_sep = min_sep.min((a.x - b.x).powi(2) + (a.y - b.y).powi(2));
        }
    }
    num / (points.len() as f64 * min_sep)
}

#[test]
fn xb_four_point_fixture() {
    let points = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]);
    let model = cluster::kmeans(&points, 2, &ClusterConfig::default()).unwrap();
    let xb = cluster::xb_index_with(&points, &model, 2.0, Membership::Hard).unwrap();
    assert!((xb - 0.0025).abs() <= 1e-12, "{xb}");

    let hard: Vec<Vec<f64>> = model
        .assignments()
        .iter()
        .map(|&a| (0..2).map(|j| if j == a { 1.0 } else { 0.0 }).collect())
        .collect();
    let direct = xb_direct(&points, &model.means, &hard, 2.0);
    assert!((xb - direct).abs() <= 1e-15);
}

#[test]
fn soft_xb_matches_direct_summation() {
    let blobs = synth::three_blobs(11);
    for k in 2..=5 {
        let model = cluster::em_gmm(
            &blobs.points,
            k,
            &ClusterConfig {
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let lib = cluster::xb_index(&blobs.points, &model, 2.0).unwrap();
        let direct = xb_direct(&blobs.points, &model.means, &model.responsibilities, 2.0);
        assert!(
            (lib - direct).abs() <= 1e-12 * direct.max(1.0),
            "k={k}: {lib} vs {direct}"
        );
    }
}

#[test]
fn em_recovers_two_unit_gaussians() {
    let truth = pts(&[(0.0, 0.0), (50.0, 50.0)]);
    let blobs = synth::gaussian_blobs(99, &truth, 1.0, 300);
    let model = cluster::em_gmm(&blobs.points, 2, &ClusterConfig::default()).unwrap();
    for t in &truth {
        let nearest = model
            .means
            .iter()
            .map(|m| m.dist_sq(t).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 0.5, "mean off by {nearest}");
    }
    let confident = model
        .responsibilities
        .iter()
        .filter(|row| row.iter().copied().fold(0.0, f64::max) > 0.99)
        .count();
    assert!(confident as f64 > 0.99 * blobs.points.len() as f64);
}

#[test]
fn em_single_component_is_closed_form() {
    let points = synth::gaussian_blobs(5, &pts(&[(300.0, 200.0)]), 7.0, 120).points;
    let cfg = ClusterConfig::default();
    let model = cluster::em_gmm(&points, 1, &cfg).unwrap();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.x - mx).powi(2)).sum::<f64>() / n;
    let syy = points.iter().map(|p| (p.y - my).powi(2)).sum::<f64>() / n;
    let sxy = points.iter().map(|p| (p.x - mx) * (p.y - my)).sum::<f64>() / n;
    assert!((model.means[0].x - mx).abs() < 1e-9 && (model.means[0].y - my).abs() < 1e-9);
    let c = model.covariances.as_ref().unwrap()[0];
    assert!((c.xx - (sxx + cfg.cov_floor)).abs() < 1e-9);
    assert!((c.yy - (syy + cfg.cov_floor)).abs() < 1e-9);
    assert!((c.xy - sxy).abs() < 1e-9);
    assert!(model.responsibilities.iter().all(|r| r == &[1.0]));
}

#[test]
fn sweep_finds_three_blobs_for_both_methods() {
    for method in [Method::Kmeans, Method::Em] {
        let blobs = synth::three_blobs(42);
        let sweep =
            cluster::select_k(&blobs.points, 2, 8, &ClusterConfig::default(), method).unwrap();
        assert_eq!(sweep.best.k, 3, "{method:?}");
        assert_eq!(sweep.table.len(), 7);
    }
}

// ----------------------------------------------------------------- fixations

#[test]
fn two_segment_stream_gives_two_exact_fixations() {
    let rec = synth::two_segment_stream();
    let fx = detect_fixations(&rec, &FixationConfig::default()).unwrap();
    assert_eq!(fx.len(), 2);
    assert!((fx[0].cx - 100.0).abs() <= 1e-9 && (fx[0].cy - 100.0).abs() <= 1e-9);
    assert!((fx[1].cx - 900.0).abs() <= 1e-9 && (fx[1].cy - 600.0).abs() <= 1e-9);
    assert_eq!(fx[0].onset, 0.0);
    assert_eq!(fx[0].duration, 200.0);
}

// --------------------------------------------------------------------- stats

/// One-way ANOVA through raw sums (Σx, Σx²) with SS_within obtained by
/// subtraction.
fn one_way_oracle(groups: &[Vec<f64>]) -> (f64, f64, f64) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let t = all.iter().sum::<f64>();
    let ss_total = all.iter().map(|v| v * v).sum::<f64>() - t * t / n;
    let ss_between = groups
        .iter()
        .map(|g| g.iter().sum::<f64>().powi(2) / g.len() as f64)
        .sum::<f64>()
        - t * t / n;
    let ss_within = ss_total - ss_between;
    let df1 = (groups.len() - 1) as f64;
    let df2 = n - groups.len() as f64;
    (
        ss_between,
        ss_within,
        (ss_between / df1) / (ss_within / df2),
    )
}

/// Repeated-measures ANOVA with the error term as total − conditions − subjects.
fn rm_oracle(m: &[Vec<f64>]) -> (f64, f64, f64) {
    let (s, c) = (m.len() as f64, m[0].len() as f64);
    let grand = m.iter().flatten().sum::<f64>() / (s * c);
    let ss_total: f64 = m.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_subj: f64 = m
        .iter()
        .map(|row| c * (row.iter().sum::<f64>() / c - grand).powi(2))
        .sum();
    let ss_cond: f64 = (0..m[0].len())
        .map(|j| s * (m.iter().map(|r| r[j]).sum::<f64>() / s - grand).powi(2))
        .sum();
    let ss_err = ss_total - ss_subj - ss_cond;
    let (df1, df2) = (c - 1.0, (c - 1.0) * (s - 1.0));
    (ss_cond, ss_err, (ss_cond / df1) / (ss_err / df2))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn anova_matches_sums_of_squares_oracle_on_random_designs() {
    let mut rng = synth::rng(77);
    for design in 0..20 {
        let k = rng.random_range(2..=5);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|g| {
                let len = rng.random_range(2..=9);
                (0..len)
                    .map(|_| g as f64 * 0.7 + rng.random_range(0.0..10.0))
                    .collect()
            })
            .collect();
        let lib = stats::one_way_anova(&groups).unwrap();
        let (ssb, ssw, f) = one_way_oracle(&groups);
        assert!(close(lib.ss_effect, ssb, 1e-9), "design {design}");
        assert!(close(lib.ss_error, ssw, 1e-9), "design {design}");
        assert!(close(lib.f, f, 1e-9), "design {design}: {} vs {f}", lib.f);

        let subjects = rng.random_range(3..=12);
        let conds = rng.random_range(2..=6);
        let matrix: Vec<Vec<f64>> = (0..subjects)
            .map(|_| {
                let base = rng.random_range(0.0..50.0);
                (0..conds)
                    .map(|j| base + j as f64 + rng.random_range(0.0..5.0))
                    .collect()
            })
            .collect();
        let lib = stats::rm_anova(&matrix).unwrap();
        let (ssc, sse, f) = rm_oracle(&matrix);
        assert!(close(lib.ss_effect, ssc, 1e-9), "design {design}");
        assert!(close(lib.ss_error, sse, 1e-9), "design {design}");
        assert!(close(lib.f, f, 1e-9), "design {design}: {} vs {f}", lib.f);
    }
}

#[test]
fn textbook_one_way_example() {
    // Reference values from scipy.stats.f_oneway.
    let groups = [
        vec![6.0, 8.0, 4.0, 5.0, 3.0, 4.0],
        vec![8.0, 12.0, 9.0, 11.0, 6.0, 8.0],
        vec![13.0, 9.0, 11.0, 8.0, 7.0, 12.0],
    ];
    let r = stats::one_way_anova(&groups).unwrap();
    assert!((r.f - 9.264705882352942).abs() < 1e-12);
    assert_eq!((r.df1, r.df2), (2, 15));
    assert!((r.p - 0.0023987773293929083).abs() < 1e-12);
}

#[test]
fn rm_anova_reference_design() {
    // Reference values computed with numpy/scipy.
    let m = [
        vec![45.0, 50.0, 55.0],
        vec![42.0, 42.0, 45.0],
        vec![36.0, 41.0, 43.0],
        vec![39.0, 35.0, 40.0],
        vec![51.0, 55.0, 59.0],
        vec![44.0, 49.0, 56.0],
    ];
    let r = stats::rm_anova(&m).unwrap();
    assert!((r.f - 12.53398058252424).abs() < 1e-10);
    assert_eq!((r.df1, r.df2), (2, 10));
    assert!((r.p - 0.0018855906470255548).abs() < 1e-12);
    assert!((r.eta_sq_partial - 0.7148394241417492).abs() < 1e-12);
}

#[test]
fn pearson_reference() {
    // scipy.stats.pearsonr.
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
    let y = [2.1, 3.9, 6.2, 7.8, 10.1, 12.2, 13.8];
    let r = stats::pearson_r(&x, &y).unwrap();
    assert!((r.r - 0.999172912755884).abs() < 1e-13);
    assert!((r.p - 3.776936574882502e-08).abs() < 1e-15);
}

pub fn f_sf_reference() -> Vec<(f64, f64, f64, f64)> {
    include_str!("data/f_sf_reference.csv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (v[0], v[1], v[2], v[3])
        })
        .collect()
}

#[test]
fn f_survival_matches_high_precision_table() {
    let table = f_sf_reference();
    assert!(table.len() >= 10);
    for (f, d1, d2, p) in table {
        let got = special::f_sf(f, d1, d2);
        assert!((got - p).abs() <= 1e-8, "F({f}; {d1}, {d2}): {got} vs {p}");
        // Relative agreement is far tighter than the absolute gate.
        assert!(
            (got - p).abs() <= 1e-10 * p,
            "F({f}; {d1}, {d2}): {got} vs {p}"
        );
    }
}

#[test]
fn reported_effect_sizes() {
    assert!((stats::partial_eta_squared(98.251, 11, 110) - 0.908).abs() <= 1e-3);
    assert!((stats::partial_eta_squared(1.252, 11, 110) - 0.111).abs() <= 1e-3);
}

// ------------------------------------------------------------------ sequence

#[test]
fn lattice_regions_follow_floor_rule() {
    let screen = ScreenSpec::new(1366, 768).unwrap();
    for i in 0..137 {
        for j in 0..77 {
            let (x, y) = (i as f64 * 10.0, j as f64 * 10.0);
            let col = ((3.0 * x / 1366.0).floor() as usize).min(2);
            let row = ((3.0 * y / 768.0).floor() as usize).min(2);
            let got = sequence::region_of(x, y, screen).unwrap();
            assert_eq!(
                got,
                RegionLabel::from_index(row * 3 + col).unwrap(),
                "({x}, {y})"
            );
        }
    }
    // Far edges clamp into the last row and column.
    assert_eq!(
        sequence::region_of(1366.0, 768.0, screen).unwrap().code(),
        "BR"
    );
}

#[test]
fn bigram_counts_reconcile_with_naive_count() {
    let mut rng = synth::rng(5);
    for _ in 0..100 {
        let len: usize = rng.random_range(0..60);
        let seq: Vec<RegionLabel> = (0..len)
            .map(|_| RegionLabel::ALL[rng.random_range(0..9)])
            .collect();
        let report = sequence::bigram_frequencies(&seq);
        let mut naive = [[0u64; 9]; 9];
        for w in seq.windows(2) {
            naive[w[0].index()][w[1].index()] += 1;
        }
        assert_eq!(report.table.counts, naive);
        let ranked: u64 = report.ranking.iter().map(|b| b.count).sum();
        assert_eq!(ranked, report.table.off_diagonal_total());
        assert_eq!(report.table.total(), len.saturating_sub(1) as u64);
    }
}

// -------------------------------------------------------------------- render

#[test]
fn heatmap_pixels_match_analytic_gaussian() {
    let screen = ScreenSpec::new(400, 300).unwrap();
    let f = Fixation {
        cx: 200.0,
        cy: 150.0,
        onset: 0.0,
        duration: 250.0,
        n: 15,
    };
    let cfg = HeatmapConfig::default();
    let img = render::render_heatmap(&[f], screen, &cfg)
        .unwrap()
        .raster
        .unwrap();
    let sigma = cfg.kernel_sigma_px;
    let alpha = (cfg.opacity * 255.0).round() as u8;
    let lerp = |a: u8, b: u8, t: f64| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    for &(dx, dy) in &[(0i32, 0i32), (10, 5), (-30, 20), (0, -60), (74, 0)] {
        let t = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
        let g = Gradient::default();
        let expect = [
            lerp(g.low.0, g.high.0, t),
            lerp(g.low.1, g.high.1, t),
            lerp(g.low.2, g.high.2, t),
            alpha,
        ];
        let px = img.get_pixel((200 + dx) as u32, (150 + dy) as u32).0;
        assert_eq!(px, expect, "offset ({dx}, {dy})");
    }
    // Beyond the kernel support the density is exactly zero.
    assert_eq!(img.get_pixel(200 + 76, 150).0, [0, 0, 0, 0]);
}

#[test]
fn density_integrates_to_truncated_mass() {
    let screen = ScreenSpec::new(400, 300).unwrap();
    let f = Fixation {
        cx: 200.0,
        cy: 150.0,
        onset: 0.0,
        duration: 250.0,
        n: 15,
    };
    let field = render::density_field(&[f], screen, 25.0);
    let mass: f64 = field.iter().sum();
    let expect = 1.0 - (-4.5f64).exp();
    assert!((mass - expect).abs() < 2e-3, "{mass} vs {expect}");
}
