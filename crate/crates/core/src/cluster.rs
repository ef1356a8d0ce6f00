//! Hard (k-means) and soft (Gaussian mixture EM) clustering of fixation
//! positions, with Xie–Beni validity-driven selection of the number of
//! clusters.
//!
//! Every fit is deterministic given [`ClusterConfig::seed`]: restart `r` of a
//! `k`-component fit draws from its own ChaCha stream, and restarts and
//! sweeps are reduced in index order whatever order they finish in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("{n} points cannot be split into {k} clusters")]
    TooFewPoints { n: usize, k: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("all points are identical; a {k}-component mixture is degenerate")]
    DegenerateInput { k: usize },
    #[error("the Xie-Beni index is undefined for k = 1")]
    UndefinedForK1,
    #[error("cluster centers coincide (minimum separation {min_separation:e})")]
    DegenerateSeparation { min_separation: f64 },
    #[error("invalid k range {k_min}..={k_max} for {n} points (need 2 <= k_min <= k_max <= n)")]
    InvalidRange {
        k_min: usize,
        k_max: usize,
        n: usize,
    },
    #[error("no k in the sweep produced a valid model")]
    NoValidModel,
    #[error("invalid cluster config: {0}")]
    InvalidConfig(&'static str),
    #[error("model has {rows} responsibility rows but {points} points were given")]
    ShapeMismatch { rows: usize, points: usize },
    #[error("non-finite point coordinate")]
    NonFinite,
}

impl ClusterError {
    pub fn code(&self) -> &'static str {
        match self {
            ClusterError::TooFewPoints { .. } => "TooFewPoints",
            ClusterError::ZeroK => "ZeroK",
            ClusterError::DegenerateInput { .. } => "DegenerateInput",
            ClusterError::UndefinedForK1 => "UndefinedForK1",
            ClusterError::DegenerateSeparation { .. } => "DegenerateSeparation",
            ClusterError::InvalidRange { .. } => "InvalidRange",
            ClusterError::NoValidModel => "NoValidModel",
            ClusterError::InvalidConfig(_) => "ValidationError",
            ClusterError::ShapeMismatch { .. } => "ShapeMismatch",
            ClusterError::NonFinite => "NonFinite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kmeans,
    Em,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kmeans" | "k-means" => Ok(Method::Kmeans),
            "em" | "gmm" => Ok(Method::Em),
            other => Err(format!(
                "unknown clustering method {other:?} (expected em|kmeans)"
            )),
        }
    }
}

/// Which memberships feed the Xie–Beni compactness term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    /// Model responsibilities as they are (0/1 for k-means).
    #[default]
    Soft,
    /// Responsibilities hardened to their row argmax.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub max_iters: usize,
    /// Log-likelihood improvement below which EM stops.
    pub tol: f64,
    pub restarts: usize,
    /// Added to every covariance diagonal in each M step.
    pub cov_floor: f64,
    pub seed: u64,
    /// Membership exponent in the Xie–Beni index.
    pub fuzzifier_m: f64,
    pub membership: Membership,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            restarts: 10,
            cov_floor: 1e-6,
            seed: 0,
            fuzzifier_m: 2.0,
            membership: Membership::Soft,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.max_iters == 0 {
            return Err(ClusterError::InvalidConfig("max_iters must be positive"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(ClusterError::InvalidConfig("tol must be positive"));
        }
        if self.restarts == 0 {
            return Err(ClusterError::InvalidConfig("restarts must be positive"));
        }
        if !(self.cov_floor > 0.0 && self.cov_floor.is_finite()) {
            return Err(ClusterError::InvalidConfig("cov_floor must be positive"));
        }
        if !(self.fuzzifier_m > 0.0 && self.fuzzifier_m.is_finite()) {
            return Err(ClusterError::InvalidConfig("fuzzifier_m must be positive"));
        }
        Ok(())
    }
}

/// Symmetric 2×2 covariance `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub fn isotropic(v: f64) -> Self {
        Self {
            xx: v,
            xy: 0.0,
            yy: v,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues, larger first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (half_tr + r, half_tr - r)
    }

    /// Angle (radians, from +x toward +y) of the major axis.
    pub fn major_axis_angle(&self) -> f64 {
        0.5 * (2.0 * self.xy).atan2(self.xx - self.yy)
    }

    fn log_pdf(&self, mean: Point, p: Point) -> f64 {
        let det = self.det();
        let dx = p.x - mean.x;
        let dy = p.y - mean.y;
        // (p - μ)ᵀ Σ⁻¹ (p - μ) via the closed-form 2×2 inverse.
        let q = (self.yy * dx * dx - 2.0 * self.xy * dx * dy + self.xx * dy * dy) / det;
        -LN_2PI - 0.5 * det.ln() - 0.5 * q
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// A fitted clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub method: Method,
    pub k: usize,
    pub means: Vec<Point>,
    /// Mixture weights (EM only).
    pub weights: Option<Vec<f64>>,
    /// Component covariances (EM only).
    pub covariances: Option<Vec<Cov2>>,
    /// n × k, rows sum to one. 0/1 for k-means.
    pub responsibilities: Vec<Vec<f64>>,
    /// Final log-likelihood (EM only).
    pub log_likelihood: Option<f64>,
    /// Log-likelihood after every E step of the winning restart (EM only).
    #[serde(default)]
    pub log_likelihood_trace: Vec<f64>,
    /// Within-cluster sum of squares (k-means only).
    pub wcss: Option<f64>,
    /// WCSS after every Lloyd update of the winning restart (k-means only).
    #[serde(default)]
    pub wcss_trace: Vec<f64>,
    pub iterations: usize,
    /// Index of the winning restart.
    pub restart: usize,
    /// Xie–Beni index; `None` for k = 1 or when not evaluated.
    pub xb: Option<f64>,
    /// Membership flavor used for `xb`.
    pub xb_membership: Option<Membership>,
}

impl ClusterModel {
    /// Row argmax of the responsibilities (lowest index on ties).
    pub fn assignments(&self) -> Vec<usize> {
        self.responsibilities
            .iter()
            .map(|row| argmax(row))
            .collect()
    }

    fn hardened(&self) -> Vec<Vec<f64>> {
        self.responsibilities
            .iter()
            .map(|row| {
                let j = argmax(row);
                (0..self.k)
                    .map(|c| if c == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

fn check_points(points: &[Point], k: usize) -> Result<(), ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if points.len() < k {
        return Err(ClusterError::TooFewPoints { n: points.len(), k });
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    Ok(())
}

fn rng_for(seed: u64, k: usize, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((k as u64) << 32) | restart as u64);
    rng
}

/// k-means++ seeding: first center uniform, then each next center drawn with
/// probability proportional to its squared distance to the nearest chosen one.
fn kmeans_pp_seed(points: &[Point], k: usize, rng: &mut impl Rng) -> Vec<Point> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = points.iter().map(|p| p.dist_sq(&centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points[next];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.dist_sq(&c));
        }
        centers.push(c);
    }
    centers
}

fn nearest(p: &Point, centers: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = p.dist_sq(c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn assign_all(points: &[Point], centers: &[Point]) -> Vec<usize> {
    points.iter().map(|p| nearest(p, centers)).collect()
}

/// Cluster means for `assign`. An empty cluster takes over the point farthest
/// from its own cluster's mean (among clusters with more than one member),
/// which may update `assign`.
fn update_centers(points: &[Point], assign: &mut [usize], k: usize) -> Vec<Point> {
    loop {
        let mut sums = vec![(0.0, 0.0); k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(assign.iter()) {
            sums[a].0 += p.x;
            sums[a].1 += p.y;
            counts[a] += 1;
        }
        let means: Vec<Point> = sums
            .iter()
            .zip(&counts)
            .map(|(&(sx, sy), &c)| {
                if c == 0 {
                    Point::new(f64::NAN, f64::NAN)
                } else {
                    Point::new(sx / c as f64, sy / c as f64)
                }
            })
            .collect();
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return means;
        };
        let mut far = None;
        let mut far_d = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let a = assign[i];
            if counts[a] > 1 {
                let d = p.dist_sq(&means[a]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
        }
        // n >= k guarantees some cluster has two or more members.
        assign[far.expect("a cluster with two or more members")] = empty;
    }
}

fn wcss_of(points: &[Point], centers: &[Point], assign: &[usize]) -> f64 {
    points
        .iter()
        .zip(assign)
        .map(|(p, &a)| p.dist_sq(&centers[a]))
        .sum()
}

struct LloydRun {
    centers: Vec<Point>,
    assign: Vec<usize>,
    wcss: f64,
    trace: Vec<f64>,
    iterations: usize,
}

/// One sweep of single-point moves: a point leaves its cluster when joining
/// another lowers the WCSS, accounting for both means shifting. Returns
/// whether any point moved; `centers` are recomputed exactly afterwards.
fn hartigan_pass(
    points: &[Point],
    k: usize,
    assign: &mut [usize],
    centers: &mut Vec<Point>,
) -> bool {
    let mut counts = vec![0usize; k];
    for &a in assign.iter() {
        counts[a] += 1;
    }
    let mut moved = false;
    for (i, p) in points.iter().enumerate() {
        let a = assign[i];
        if counts[a] < 2 {
            continue;
        }
        let na = counts[a] as f64;
        let leave = na / (na - 1.0) * p.dist_sq(&centers[a]);
        let mut best: Option<(usize, f64)> = None;
        for b in (0..k).filter(|&b| b != a) {
            let nb = counts[b] as f64;
            let join = nb / (nb + 1.0) * p.dist_sq(&centers[b]);
            if best.is_none_or(|(_, v)| join < v) {
                best = Some((b, join));
            }
        }
        let Some((b, join)) = best else { continue };
        // Relative margin keeps rounding noise from cycling points.
        if join < leave * (1.0 - 1e-12) {
            let nb = counts[b] as f64;
            let ca = centers[a];
            let cb = centers[b];
            centers[a] = Point::new(
                (ca.x * na - p.x) / (na - 1.0),
                (ca.y * na - p.y) / (na - 1.0),
            );
            centers[b] = Point::new(
                (cb.x * nb + p.x) / (nb + 1.0),
                (cb.y * nb + p.y) / (nb + 1.0),
            );
            counts[a] -= 1;
            counts[b] += 1;
            assign[i] = b;
            moved = true;
        }
    }
    if moved {
        *centers = update_centers(points, assign, k);
    }
    moved
}

/// Lloyd iterations to a fixed point, then single-point moves; repeated
/// until neither changes the partition or `max_iters` updates have run.
fn lloyd(points: &[Point], k: usize, max_iters: usize, rng: &mut impl Rng) -> LloydRun {
    let seeds = kmeans_pp_seed(points, k, rng);
    let mut assign = assign_all(points, &seeds);
    let mut centers = update_centers(points, &mut assign, k);
    let mut trace = vec![wcss_of(points, &centers, &assign)];
    let mut iterations = 1;
    while iterations < max_iters {
        let mut next = assign_all(points, &centers);
        if next == assign {
            if !hartigan_pass(points, k, &mut assign, &mut centers) {
                break;
            }
        } else {
            centers = update_centers(points, &mut next, k);
            assign = next;
        }
        trace.push(wcss_of(points, &centers, &assign));
        iterations += 1;
    }
    LloydRun {
        wcss: *trace.last().expect("non-empty trace"),
        centers,
        assign,
        trace,
        iterations,
    }
}

/// Lloyd's k-means from k-means++ seeds with single-point refinement, best
/// of `cfg.restarts` by WCSS.
pub fn kmeans(
    points: &[Point],
    k: usize,
    cfg: &ClusterConfig,
) -> Result<ClusterModel, ClusterError> {
    cfg.validate()?;
    check_points(points, k)?;
    let runs: Vec<LloydRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| lloyd(points, k, cfg.max_iters, &mut rng_for(cfg.seed, k, r)))
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|best, cand| {
            if cand.1.wcss < best.1.wcss {
                cand
            } else {
                best
            }
        })
        .expect("restarts >= 1");
    let responsibilities = best
        .assign
        .iter()
        .map(|&a| (0..k).map(|j| if j == a { 1.0 } else { 0.0 }).collect())
        .collect();
    Ok(ClusterModel {
        method: Method::Kmeans,
        k,
        means: best.centers,
        weights: None,
        covariances: None,
        responsibilities,
        log_likelihood: None,
        log_likelihood_trace: Vec::new(),
        wcss: Some(best.wcss),
        wcss_trace: best.trace,
        iterations: best.iterations,
        restart,
        xb: None,
        xb_membership: None,
    })
}

struct Mixture {
    weights: Vec<f64>,
    means: Vec<Point>,
    covs: Vec<Cov2>,
}

/// E step: responsibilities (n × k, row-major) and the log-likelihood.
fn e_step(points: &[Point], mix: &Mixture, resp: &mut [f64]) -> f64 {
    let k = mix.weights.len();
    let log_w: Vec<f64> = mix.weights.iter().map(|w| w.ln()).collect();
    let mut ll = 0.0;
    for (p, row) in points.iter().zip(resp.chunks_exact_mut(k)) {
        let mut max = f64::NEG_INFINITY;
        for j in 0..k {
            let v = log_w[j] + mix.covs[j].log_pdf(mix.means[j], *p);
            row[j] = v;
            max = max.max(v);
        }
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        ll += max + sum.ln();
    }
    ll
}

/// M step with the diagonal floor. Components whose responsibility mass
/// underflows keep their previous mean and covariance with zero weight.
fn m_step(points: &[Point], resp: &[f64], mix: &mut Mixture, cov_floor: f64) {
    let k = mix.weights.len();
    let n = points.len() as f64;
    for j in 0..k {
        let mut nk = 0.0;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (p, row) in points.iter().zip(resp.chunks_exact(k)) {
            let r = row[j];
            nk += r;
            sx += r * p.x;
            sy += r * p.y;
        }
        mix.weights[j] = nk / n;
        if nk <= f64::MIN_POSITIVE * n {
            continue;
        }
        let mean = Point::new(sx / nk, sy / nk);
        let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
        for (p, row) in points.iter().zip(resp.chunks_exact(k)) {
            let r = row[j];
            let (dx, dy) = (p.x - mean.x, p.y - mean.y);
            cxx += r * dx * dx;
            cxy += r * dx * dy;
            cyy += r * dy * dy;
        }
        mix.means[j] = mean;
        mix.covs[j] = Cov2 {
            xx: cxx / nk + cov_floor,
            xy: cxy / nk,
            yy: cyy / nk + cov_floor,
        };
    }
}

/// Initial mixture from one k-means pass over k-means++ seeds.
fn init_mixture(points: &[Point], k: usize, cov_floor: f64, rng: &mut impl Rng) -> Mixture {
    let seeds = kmeans_pp_seed(points, k, rng);
    let mut assign = assign_all(points, &seeds);
    let means = update_centers(points, &mut assign, k);
    let n = points.len() as f64;
    let mut counts = vec![0usize; k];
    let mut covs = vec![
        Cov2 {
            xx: 0.0,
            xy: 0.0,
            yy: 0.0
        };
        k
    ];
    for (p, &a) in points.iter().zip(&assign) {
        let (dx, dy) = (p.x - means[a].x, p.y - means[a].y);
        counts[a] += 1;
        covs[a].xx += dx * dx;
        covs[a].xy += dx * dy;
        covs[a].yy += dy * dy;
    }
    for (c, &m) in covs.iter_mut().zip(&counts) {
        let m = m as f64;
        *c = Cov2 {
            xx: c.xx / m + cov_floor,
            xy: c.xy / m,
            yy: c.yy / m + cov_floor,
        };
    }
    Mixture {
        weights: counts.iter().map(|&c| c as f64 / n).collect(),
        means,
        covs,
    }
}

struct EmRun {
    mix: Mixture,
    resp: Vec<f64>,
    ll: f64,
    trace: Vec<f64>,
    iterations: usize,
}

fn em_single(points: &[Point], k: usize, cfg: &ClusterConfig, rng: &mut impl Rng) -> EmRun {
    let mut mix = init_mixture(points, k, cfg.cov_floor, rng);
    let mut resp = vec![0.0; points.len() * k];
    let mut ll = e_step(points, &mix, &mut resp);
    let mut trace = vec![ll];
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        m_step(points, &resp, &mut mix, cfg.cov_floor);
        let next = e_step(points, &mix, &mut resp);
        trace.push(next);
        iterations += 1;
        let improvement = next - ll;
        ll = next;
        if improvement < cfg.tol {
            break;
        }
    }
    EmRun {
        mix,
        resp,
        ll,
        trace,
        iterations,
    }
}

/// Full-covariance Gaussian mixture fitted by EM, best of `cfg.restarts` by
/// final log-likelihood.
pub fn em_gmm(
    points: &[Point],
    k: usize,
    cfg: &ClusterConfig,
) -> Result<ClusterModel, ClusterError> {
    cfg.validate()?;
    check_points(points, k)?;
    if k >= 2 && points.iter().all(|p| p == &points[0]) {
        return Err(ClusterError::DegenerateInput { k });
    }
    let runs: Vec<EmRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| em_single(points, k, cfg, &mut rng_for(cfg.seed, k, r)))
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        // NaN never wins, so a numerically broken restart cannot be selected.
        .reduce(|best, cand| {
            if cand.1.ll > best.1.ll || best.1.ll.is_nan() {
                cand
            } else {
                best
            }
        })
        .expect("restarts >= 1");
    Ok(ClusterModel {
        method: Method::Em,
        k,
        means: best.mix.means,
        weights: Some(best.mix.weights),
        covariances: Some(best.mix.covs),
        responsibilities: best.resp.chunks_exact(k).map(<[f64]>::to_vec).collect(),
        log_likelihood: Some(best.ll),
        log_likelihood_trace: best.trace,
        wcss: None,
        wcss_trace: Vec::new(),
        iterations: best.iterations,
        restart,
        xb: None,
        xb_membership: None,
    })
}

pub fn fit(
    points: &[Point],
    k: usize,
    cfg: &ClusterConfig,
    method: Method,
) -> Result<ClusterModel, ClusterError> {
    match method {
        Method::Kmeans => kmeans(points, k, cfg),
        Method::Em => em_gmm(points, k, cfg),
    }
}

/// Xie–Beni index of `model` on `points` using the model's responsibilities
/// raised to `fuzzifier_m`:
///
/// `XB = Σ_i Σ_j u_ij^m ‖x_i − v_j‖² / (n · min_{j≠l} ‖v_j − v_l‖²)`.
///
/// Lower is better.
pub fn xb_index(
    points: &[Point],
    model: &ClusterModel,
    fuzzifier_m: f64,
) -> Result<f64, ClusterError> {
    xb_from(points, &model.means, &model.responsibilities, fuzzifier_m)
}

/// [`xb_index`] with an explicit membership flavor.
pub fn xb_index_with(
    points: &[Point],
    model: &ClusterModel,
    fuzzifier_m: f64,
    membership: Membership,
) -> Result<f64, ClusterError> {
    match membership {
        Membership::Soft => xb_index(points, model, fuzzifier_m),
        Membership::Hard => xb_from(points, &model.means, &model.hardened(), fuzzifier_m),
    }
}

fn xb_from(
    points: &[Point],
    centers: &[Point],
    memberships: &[Vec<f64>],
    m: f64,
) -> Result<f64, ClusterError> {
    let k = centers.len();
    if k < 2 {
        return Err(ClusterError::UndefinedForK1);
    }
    if memberships.len() != points.len() {
        return Err(ClusterError::ShapeMismatch {
            rows: memberships.len(),
            points: points.len(),
        });
    }
    let mut min_sep_sq = f64::INFINITY;
    for j in 0..k {
        for l in j + 1..k {
            min_sep_sq = min_sep_sq.min(centers[j].dist_sq(&centers[l]));
        }
    }
    let min_separation = min_sep_sq.sqrt();
    if min_separation.is_nan() || min_separation < 1e-12 {
        return Err(ClusterError::DegenerateSeparation { min_separation });
    }
    let compactness: f64 = points
        .iter()
        .zip(memberships)
        .map(|(p, row)| {
            row.iter()
                .zip(centers)
                .filter(|(u, _)| **u > 0.0)
                .map(|(u, c)| u.powf(m) * p.dist_sq(c))
                .sum::<f64>()
        })
        .sum();
    Ok(compactness / (points.len() as f64 * min_sep_sq))
}

/// One row of a k sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub xb: Option<f64>,
    /// Final log-likelihood (EM) or WCSS (k-means).
    pub objective: Option<f64>,
    /// Error code when the fit or the index failed for this k.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub method: Method,
    pub membership: Membership,
    pub best: ClusterModel,
    pub table: Vec<SweepRow>,
}

/// Index into `table` of the smallest XB; a later k only wins if it beats
/// the incumbent by more than 1e-9.
pub fn argmin_xb(table: &[SweepRow]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in table.iter().enumerate() {
        let Some(xb) = row.xb else { continue };
        match best {
            Some((_, b)) if xb >= b - 1e-9 => {}
            _ => best = Some((i, xb)),
        }
    }
    best.map(|(i, _)| i)
}

/// Fits every k in `k_min..=k_max` and returns the XB-minimizing model plus
/// the full XB-by-k table.
pub fn select_k(
    points: &[Point],
    k_min: usize,
    k_max: usize,
    cfg: &ClusterConfig,
    method: Method,
) -> Result<Sweep, ClusterError> {
    cfg.validate()?;
    let n = points.len();
    if k_min < 2 || k_min > k_max || k_max > n {
        return Err(ClusterError::InvalidRange { k_min, k_max, n });
    }
    let fits: Vec<(SweepRow, Option<ClusterModel>)> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let scored = fit(points, k, cfg, method).and_then(|mut model| {
                let xb = xb_index_with(points, &model, cfg.fuzzifier_m, cfg.membership)?;
                model.xb = Some(xb);
                model.xb_membership = Some(cfg.membership);
                Ok(model)
            });
            match scored {
                Ok(model) => (
                    SweepRow {
                        k,
                        xb: model.xb,
                        objective: model.log_likelihood.or(model.wcss),
                        error: None,
                    },
                    Some(model),
                ),
                Err(e) => (
                    SweepRow {
                        k,
                        xb: None,
                        objective: None,
                        error: Some(e.code().to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let (table, mut models): (Vec<SweepRow>, Vec<Option<ClusterModel>>) = fits.into_iter().unzip();
    let best = argmin_xb(&table).ok_or(ClusterError::NoValidModel)?;
    Ok(Sweep {
        method,
        membership: cfg.membership,
        best: models[best].take().expect("row with xb has a model"),
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&p| p.into()).collect()
    }

    #[test]
    fn identical_points_single_center() {
        let p = pts(&[(7.0, 7.0); 5]);
        let m = kmeans(&p, 1, &ClusterConfig::default()).unwrap();
        assert_eq!(m.means, vec![Point::new(7.0, 7.0)]);
        assert_eq!(m.wcss, Some(0.0));
    }

    #[test]
    fn four_point_two_clusters() {
        let p = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]);
        let m = kmeans(&p, 2, &ClusterConfig::default()).unwrap();
        let mut centers = m.means.clone();
        centers.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(centers, pts(&[(0.0, 0.5), (10.0, 0.5)]));
        assert!((m.wcss.unwrap() - 1.0).abs() < 1e-12);
        assert!((xb_index(&p, &m, 2.0).unwrap() - 0.0025).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let p = pts(&[(0.0, 0.0), (1.0, 1.0)]);
        let cfg = ClusterConfig::default();
        assert_eq!(
            kmeans(&p, 3, &cfg).unwrap_err(),
            ClusterError::TooFewPoints { n: 2, k: 3 }
        );
        assert_eq!(
            em_gmm(&p, 3, &cfg).unwrap_err(),
            ClusterError::TooFewPoints { n: 2, k: 3 }
        );
        assert_eq!(kmeans(&p, 0, &cfg).unwrap_err(), ClusterError::ZeroK);
    }

    #[test]
    fn em_rejects_identical_points_for_k2() {
        let p = pts(&[(3.0, 3.0); 6]);
        assert_eq!(
            em_gmm(&p, 2, &ClusterConfig::default()).unwrap_err(),
            ClusterError::DegenerateInput { k: 2 }
        );
        // k = 1 is fine: the covariance is just the floor.
        let m = em_gmm(&p, 1, &ClusterConfig::default()).unwrap();
        assert_eq!(m.covariances.unwrap()[0], Cov2::isotropic(1e-6));
    }

    #[test]
    fn kmeans_with_duplicates_fills_every_cluster() {
        let p = pts(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (5.0, 5.0)]);
        let m = kmeans(&p, 3, &ClusterConfig::default()).unwrap();
        let a = m.assignments();
        for j in 0..3 {
            assert!(a.contains(&j), "cluster {j} empty: {a:?}");
        }
        assert_eq!(m.wcss, Some(0.0));
    }

    #[test]
    fn xb_guards() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        let m = kmeans(&p, 1, &ClusterConfig::default()).unwrap();
        assert_eq!(xb_index(&p, &m, 2.0), Err(ClusterError::UndefinedForK1));

        let mut coincident = kmeans(&p, 2, &ClusterConfig::default()).unwrap();
        coincident.means = pts(&[(0.5, 0.0), (0.5, 0.0)]);
        assert!(matches!(
            xb_index(&p, &coincident, 2.0),
            Err(ClusterError::DegenerateSeparation { .. })
        ));
        assert!(matches!(
            xb_index(&p[..1], &coincident, 2.0),
            Err(ClusterError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn sweep_range_is_checked() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (5.0, 5.0)]);
        let cfg = ClusterConfig::default();
        assert!(matches!(
            select_k(&p, 4, 5, &cfg, Method::Kmeans),
            Err(ClusterError::InvalidRange { .. })
        ));
        assert!(matches!(
            select_k(&p, 1, 2, &cfg, Method::Kmeans),
            Err(ClusterError::InvalidRange { .. })
        ));
    }

    #[test]
    fn argmin_prefers_smaller_k_on_ties() {
        let row = |k, xb| SweepRow {
            k,
            xb: Some(xb),
            objective: None,
            error: None,
        };
        let table = vec![row(2, 0.5), row(3, 0.1), row(4, 0.1 - 5e-10), row(5, 0.3)];
        assert_eq!(argmin_xb(&table), Some(1));
        let table = vec![row(2, 0.5), row(3, 0.1), row(4, 0.05)];
        assert_eq!(argmin_xb(&table), Some(2));
        let failed = SweepRow {
            k: 2,
            xb: None,
            objective: None,
            error: Some("x".into()),
        };
        assert_eq!(argmin_xb(&[failed]), None);
    }

    #[test]
    fn config_validation() {
        let cfg = ClusterConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(matches!(
            kmeans(&pts(&[(0.0, 0.0)]), 1, &cfg),
            Err(ClusterError::InvalidConfig(_))
        ));
    }

    #[test]
    fn cov_eigenstructure() {
        let c = Cov2 {
            xx: 4.0,
            xy: 0.0,
            yy: 1.0,
        };
        assert_eq!(c.eigenvalues(), (4.0, 1.0));
        assert_eq!(c.major_axis_angle(), 0.0);
        let c = Cov2 {
            xx: 1.0,
            xy: 0.0,
            yy: 4.0,
        };
        assert!((c.major_axis_angle().abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
