//! One-way and repeated-measures ANOVA, partial eta squared and Pearson
//! correlation.
//!
//! Repeated-measures results use uncorrected degrees of freedom
//! (`c - 1`, `(c - 1)(s - 1)`); no sphericity correction is applied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("all observations are identical; F is undefined")]
    DegenerateVariance,
    #[error("incomplete design: {0}")]
    IncompleteDesign(String),
    #[error("series {0} is constant")]
    ZeroVariance(&'static str),
    #[error("shape error: {0}")]
    ShapeError(String),
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            StatsError::InsufficientData(_) => "InsufficientData",
            StatsError::DegenerateVariance => "DegenerateVariance",
            StatsError::IncompleteDesign(_) => "IncompleteDesign",
            StatsError::ZeroVariance(_) => "ZeroVariance",
            StatsError::ShapeError(_) => "ShapeError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df1: u64,
    pub df2: u64,
    pub p: f64,
    pub eta_sq_partial: f64,
    pub ss_effect: f64,
    pub ss_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    pub p: f64,
}

/// Relative size below which a sum of squares counts as zero.
const SS_ZERO: f64 = 1e-12;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn finish(ss_effect: f64, ss_error: f64, ss_total: f64, df1: u64, df2: u64) -> AnovaResult {
    let effect_zero = ss_effect <= SS_ZERO * ss_total;
    let error_zero = ss_error <= SS_ZERO * ss_total;
    let ss_effect = if effect_zero { 0.0 } else { ss_effect };
    let ss_error = if error_zero { 0.0 } else { ss_error };
    let f = if effect_zero {
        0.0
    } else if error_zero {
        f64::INFINITY
    } else {
        (ss_effect / df1 as f64) / (ss_error / df2 as f64)
    };
    AnovaResult {
        f,
        df1,
        df2,
        p: special::f_sf(f, df1 as f64, df2 as f64),
        eta_sq_partial: partial_eta_squared(f, df1, df2),
        ss_effect,
        ss_error,
    }
}

fn all_equal(mut values: impl Iterator<Item = f64>) -> bool {
    match values.next() {
        Some(first) => values.all(|v| v == first),
        None => true,
    }
}

/// One-way between-groups ANOVA.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some((i, g)) = groups
        .iter()
        .enumerate()
        .find(|(_, g)| g.as_ref().len() < 2)
    {
        return Err(StatsError::InsufficientData(format!(
            "group {i} has {} observation(s); at least 2 are required",
            g.as_ref().len()
        )));
    }
    if groups
        .iter()
        .flat_map(|g| g.as_ref())
        .any(|v| !v.is_finite())
    {
        return Err(StatsError::InsufficientData(
            "non-finite observation".into(),
        ));
    }
    if all_equal(groups.iter().flat_map(|g| g.as_ref().iter().copied())) {
        return Err(StatsError::DegenerateVariance);
    }

    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let ss_total = ss_between + ss_within;
    let df1 = (groups.len() - 1) as u64;
    let df2 = (n - groups.len()) as u64;
    Ok(finish(ss_between, ss_within, ss_total, df1, df2))
}

/// Repeated-measures (within-subjects) ANOVA on a subjects × conditions
/// matrix. Missing cells are `NaN`.
pub fn rm_anova<R: AsRef<[f64]>>(matrix: &[R]) -> Result<AnovaResult, StatsError> {
    let subjects = matrix.len();
    if subjects < 2 {
        return Err(StatsError::InsufficientData(format!(
            "need at least 2 subjects, got {subjects}"
        )));
    }
    let conditions = matrix[0].as_ref().len();
    if conditions < 2 {
        return Err(StatsError::InsufficientData(format!(
            "need at least 2 conditions, got {conditions}"
        )));
    }
    for (s, row) in matrix.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != conditions {
            return Err(StatsError::IncompleteDesign(format!(
                "subject {s} has {} cells, expected {conditions}",
                row.len()
            )));
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::IncompleteDesign(format!(
                "missing cell at subject {s}, condition {c}"
            )));
        }
    }
    if all_equal(matrix.iter().flat_map(|r| r.as_ref().iter().copied())) {
        return Err(StatsError::DegenerateVariance);
    }

    let (s_n, c_n) = (subjects as f64, conditions as f64);
    let grand = matrix.iter().flat_map(|r| r.as_ref()).sum::<f64>() / (s_n * c_n);
    let subject_means: Vec<f64> = matrix.iter().map(|r| mean(r.as_ref())).collect();
    let condition_means: Vec<f64> = (0..conditions)
        .map(|c| matrix.iter().map(|r| r.as_ref()[c]).sum::<f64>() / s_n)
        .collect();

    let ss_condition = s_n
        * condition_means
            .iter()
            .map(|m| (m - grand).powi(2))
            .sum::<f64>();
    let ss_subject = c_n
        * subject_means
            .iter()
            .map(|m| (m - grand).powi(2))
            .sum::<f64>();
    // Residual of the additive subject + condition model, summed directly so
    // it cannot go negative through cancellation.
    let ss_error: f64 = matrix
        .iter()
        .zip(&subject_means)
        .flat_map(|(row, sm)| {
            row.as_ref()
                .iter()
                .zip(&condition_means)
                .map(move |(v, cm)| (v - sm - cm + grand).powi(2))
        })
        .sum();
    let ss_total = ss_condition + ss_subject + ss_error;
    let df1 = (conditions - 1) as u64;
    let df2 = ((conditions - 1) * (subjects - 1)) as u64;
    Ok(finish(ss_condition, ss_error, ss_total, df1, df2))
}

/// Partial eta squared recovered from an F statistic: `f·df1 / (f·df1 + df2)`.
pub fn partial_eta_squared(f: f64, df1: u64, df2: u64) -> f64 {
    if f.is_infinite() {
        return 1.0;
    }
    let num = f * df1 as f64;
    if num == 0.0 {
        return 0.0;
    }
    num / (num + df2 as f64)
}

/// Pearson product-moment correlation with a two-sided t-test p-value.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::ShapeError(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::InsufficientData(format!(
            "need at least 3 pairs, got {n}"
        )));
    }
    if all_equal(xs.iter().copied()) {
        return Err(StatsError::ZeroVariance("xs"));
    }
    if all_equal(ys.iter().copied()) {
        return Err(StatsError::ZeroVariance("ys"));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        special::t_two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(CorrelationResult { r, n, p })
}
