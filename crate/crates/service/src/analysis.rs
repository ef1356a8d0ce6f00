//! Typed analysis parameters and the single execution path shared by the
//! HTTP service and the command line.

use std::fmt;
use std::str::FromStr;

use gazekit::cluster::{self, ClusterConfig, ClusterModel, Method, SweepRow};
use gazekit::fixation::{self, Fixation, FixationConfig, TrialSummary};
use gazekit::ingest::{Recording, ScreenSpec};
use gazekit::render::{
    self, GazePlotConfig, Gradient, HeatmapConfig, LayerKind, Rgb, ScatterConfig,
};
use gazekit::sequence::{self, AoiSpec, BigramReport, RegionLabel};
use gazekit::Point;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Fixate,
    Cluster,
    Sequence,
    Stats,
    Render,
}

impl AnalysisKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnalysisKind::Fixate => "fixate",
            AnalysisKind::Cluster => "cluster",
            AnalysisKind::Sequence => "sequence",
            AnalysisKind::Stats => "stats",
            AnalysisKind::Render => "render",
        }
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive `k_min..=k_max`, written `"2..8"` (a `[2, 8]` pair is accepted too).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KRange {
    pub min: usize,
    pub max: usize,
}

impl FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("{s:?} is not a range like 2..8"))?;
        let b = b.strip_prefix('=').unwrap_or(b);
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("{s:?} is not a range like 2..8"))
        };
        Ok(KRange {
            min: parse(a)?,
            max: parse(b)?,
        })
    }
}

impl fmt::Display for KRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

impl Serialize for KRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Pair([usize; 2]),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Pair([min, max]) => Ok(KRange { min, max }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    pub method: Method,
    /// Fit exactly this k. Mutually exclusive with `sweep`.
    pub k: Option<usize>,
    /// XB sweep range; defaults to `2..min(10, n)` when neither `k` nor
    /// `sweep` is given.
    pub sweep: Option<KRange>,
    pub config: ClusterConfig,
    pub fixation: FixationConfig,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            method: Method::Em,
            k: None,
            sweep: None,
            config: ClusterConfig::default(),
            fixation: FixationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixationOnly {
    pub fixation: FixationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderParams {
    pub layer: LayerKind,
    /// Inclusive onset window `[t0, t1]` (gaze plot and scatter only).
    pub window: Option<[f64; 2]>,
    pub low: Rgb,
    pub high: Rgb,
    pub kernel_sigma_px: f64,
    pub opacity: f64,
    pub fixation: FixationConfig,
}

impl Default for RenderParams {
    fn default() -> Self {
        let heat = HeatmapConfig::default();
        Self {
            layer: LayerKind::Heatmap,
            window: None,
            low: heat.gradient.low,
            high: heat.gradient.high,
            kernel_sigma_px: heat.kernel_sigma_px,
            opacity: heat.opacity,
            fixation: FixationConfig::default(),
        }
    }
}

impl RenderParams {
    pub fn gradient(&self) -> Gradient {
        Gradient {
            low: self.low,
            high: self.high,
        }
    }

    fn window(&self) -> Option<(f64, f64)> {
        self.window.map(|[a, b]| (a, b))
    }
}

/// Validated parameters for one analysis kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisParams {
    Fixate(FixationConfig),
    Cluster(ClusterParams),
    Sequence(FixationOnly),
    Stats(FixationOnly),
    Render(RenderParams),
}

fn typed<T: DeserializeOwned>(raw: serde_json::Value) -> Result<T, ApiError> {
    let raw = if raw.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        raw
    };
    serde_path_to_error::deserialize(raw).map_err(|e| {
        let path = e.path().to_string();
        ApiError::validation(
            if path == "." { None } else { Some(path) },
            e.into_inner().to_string(),
        )
    })
}

impl AnalysisParams {
    /// Parses and semantically validates `raw` for `kind`. Unknown fields and
    /// bad values are `ValidationError`s naming the offending field.
    pub fn parse(kind: AnalysisKind, raw: serde_json::Value) -> Result<Self, ApiError> {
        let params = match kind {
            AnalysisKind::Fixate => AnalysisParams::Fixate(typed(raw)?),
            AnalysisKind::Cluster => AnalysisParams::Cluster(typed(raw)?),
            AnalysisKind::Sequence => AnalysisParams::Sequence(typed(raw)?),
            AnalysisKind::Stats => AnalysisParams::Stats(typed(raw)?),
            AnalysisKind::Render => AnalysisParams::Render(typed(raw)?),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn kind(&self) -> AnalysisKind {
        match self {
            AnalysisParams::Fixate(_) => AnalysisKind::Fixate,
            AnalysisParams::Cluster(_) => AnalysisKind::Cluster,
            AnalysisParams::Sequence(_) => AnalysisKind::Sequence,
            AnalysisParams::Stats(_) => AnalysisKind::Stats,
            AnalysisParams::Render(_) => AnalysisKind::Render,
        }
    }

    pub fn fixation_config(&self) -> &FixationConfig {
        match self {
            AnalysisParams::Fixate(f) => f,
            AnalysisParams::Cluster(p) => &p.fixation,
            AnalysisParams::Sequence(p) | AnalysisParams::Stats(p) => &p.fixation,
            AnalysisParams::Render(p) => &p.fixation,
        }
    }

    fn validate(&self) -> Result<(), ApiError> {
        let field = |prefix: &str, e: &dyn std::fmt::Display| {
            ApiError::validation(Some(prefix.to_string()), e.to_string())
        };
        let fix_prefix = if matches!(self, AnalysisParams::Fixate(_)) {
            "."
        } else {
            "fixation"
        };
        self.fixation_config()
            .validate()
            .map_err(|e| field(fix_prefix, &e))?;
        match self {
            AnalysisParams::Cluster(p) => {
                p.config.validate().map_err(|e| field("config", &e))?;
                if p.k.is_some() && p.sweep.is_some() {
                    return Err(ApiError::validation(
                        Some("k".into()),
                        "give either k or sweep, not both",
                    ));
                }
                if p.k == Some(0) {
                    return Err(ApiError::validation(
                        Some("k".into()),
                        "k must be at least 1",
                    ));
                }
                if let Some(r) = p.sweep {
                    if r.min < 2 || r.min > r.max {
                        return Err(ApiError::validation(
                            Some("sweep".into()),
                            format!("sweep {r} must satisfy 2 <= k_min <= k_max"),
                        ));
                    }
                }
            }
            AnalysisParams::Render(p) => {
                if !(p.kernel_sigma_px > 0.0 && p.kernel_sigma_px.is_finite()) {
                    return Err(ApiError::validation(
                        Some("kernel_sigma_px".into()),
                        "must be positive",
                    ));
                }
                if !(0.0..=1.0).contains(&p.opacity) {
                    return Err(ApiError::validation(
                        Some("opacity".into()),
                        "must lie in [0, 1]",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Sorted-key JSON with defaults filled in; two requests that mean the
    /// same thing canonicalize to the same string.
    pub fn canonical(&self) -> String {
        let value = match self {
            AnalysisParams::Fixate(p) => serde_json::to_value(p),
            AnalysisParams::Cluster(p) => serde_json::to_value(p),
            AnalysisParams::Sequence(p) | AnalysisParams::Stats(p) => serde_json::to_value(p),
            AnalysisParams::Render(p) => serde_json::to_value(p),
        }
        .expect("parameters serialize");
        // serde_json's default map is ordered by key.
        value.to_string()
    }
}

/// Output of an analysis: a JSON document or a rendered image.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Json(serde_json::Value),
    Binary {
        bytes: Vec<u8>,
        content_type: &'static str,
        extension: &'static str,
    },
}

impl Artifact {
    pub fn extension(&self) -> &'static str {
        match self {
            Artifact::Json(_) => "json",
            Artifact::Binary { extension, .. } => extension,
        }
    }

    pub fn content_type(&self) -> &'static str {
        match self {
            Artifact::Json(_) => "application/json",
            Artifact::Binary { content_type, .. } => content_type,
        }
    }

    pub fn bytes(&self) -> Vec<u8> {
        match self {
            Artifact::Json(v) => {
                let mut out = serde_json::to_vec_pretty(v).expect("json value serializes");
                out.push(b'\n');
                out
            }
            Artifact::Binary { bytes, .. } => bytes.clone(),
        }
    }
}

/// A fixation with its position in the recording's fixation list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumberedFixation {
    pub id: usize,
    #[serde(flatten)]
    pub fixation: Fixation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixateResult {
    pub config: FixationConfig,
    pub count: usize,
    pub fixations: Vec<NumberedFixation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub method: Method,
    pub config: ClusterConfig,
    pub n_points: usize,
    /// XB by k; present for sweeps.
    pub table: Option<Vec<SweepRow>>,
    /// Index into `table` of the selected k.
    pub best_row: Option<usize>,
    pub model: ClusterModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiRatio {
    pub name: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub screen: ScreenSpec,
    pub sequence: Vec<RegionLabel>,
    pub first_region: Option<RegionLabel>,
    pub bigrams: BigramReport,
    pub aoi_ratios: Vec<AoiRatio>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsResult {
    pub fixation_count: usize,
    pub total_fixation_ms: f64,
    pub summary: TrialSummary,
}

pub fn fixations_of(
    recording: &Recording,
    cfg: &FixationConfig,
) -> Result<Vec<Fixation>, ApiError> {
    Ok(fixation::detect_fixations(recording, cfg)?)
}

/// Clusters fixation centroids per `params`.
pub fn cluster_fixations(
    fixations: &[Fixation],
    params: &ClusterParams,
) -> Result<ClusterResult, ApiError> {
    let points: Vec<Point> = fixations.iter().map(Fixation::centroid).collect();
    let n = points.len();
    let (model, table, best_row) = match params.k {
        Some(k) => {
            let mut model = cluster::fit(&points, k, &params.config, params.method)?;
            if k >= 2 {
                model.xb = Some(cluster::xb_index_with(
                    &points,
                    &model,
                    params.config.fuzzifier_m,
                    params.config.membership,
                )?);
                model.xb_membership = Some(params.config.membership);
            }
            (model, None, None)
        }
        None => {
            let range = params.sweep.unwrap_or(KRange {
                min: 2,
                max: n.min(10),
            });
            let sweep =
                cluster::select_k(&points, range.min, range.max, &params.config, params.method)?;
            let best_row = sweep.table.iter().position(|r| r.k == sweep.best.k);
            (sweep.best, Some(sweep.table), best_row)
        }
    };
    Ok(ClusterResult {
        method: params.method,
        config: params.config,
        n_points: n,
        table,
        best_row,
        model,
    })
}

pub fn sequence_report(
    fixations: &[Fixation],
    recording: &Recording,
) -> Result<SequenceResult, ApiError> {
    sequence_report_with(fixations, recording.screen, &recording.aois)
}

/// Region sequence, bigrams and per-AOI fixation ratios for one fixation list.
pub fn sequence_report_with(
    fixations: &[Fixation],
    screen: ScreenSpec,
    aois: &[AoiSpec],
) -> Result<SequenceResult, ApiError> {
    let labels = sequence::label_sequence(fixations, screen)?;
    let first_region = if fixations.is_empty() {
        None
    } else {
        Some(sequence::first_fixation_region(fixations, screen)?)
    };
    let aoi_ratios = aois
        .iter()
        .map(|aoi| {
            let ratio = if fixations.is_empty() {
                0.0
            } else {
                sequence::aoi_fixation_ratio(fixations, aoi)?
            };
            Ok(AoiRatio {
                name: aoi.name.clone(),
                ratio,
            })
        })
        .collect::<Result<_, ApiError>>()?;
    Ok(SequenceResult {
        screen,
        bigrams: sequence::bigram_frequencies(&labels),
        sequence: labels,
        first_region,
        aoi_ratios,
    })
}

/// Renders one layer. `stimulus`, when given, is placed underneath.
pub fn render_layer(
    fixations: &[Fixation],
    screen: ScreenSpec,
    params: &RenderParams,
    stimulus: Option<&gazekit::render::RgbaImage>,
) -> Result<Artifact, ApiError> {
    let layer = match params.layer {
        LayerKind::Heatmap => {
            if params.window.is_some() {
                return Err(ApiError::validation(
                    Some("window".into()),
                    "time windows apply to gazeplot and scatter layers",
                ));
            }
            let cfg = HeatmapConfig {
                kernel_sigma_px: params.kernel_sigma_px,
                gradient: params.gradient(),
                opacity: params.opacity,
            };
            render::render_heatmap(fixations, screen, &cfg)?
        }
        LayerKind::Gazeplot => render::render_gazeplot(
            fixations,
            screen,
            params.window(),
            &GazePlotConfig::default(),
        )?,
        LayerKind::Scatter => {
            let cfg = ScatterConfig {
                gradient: params.gradient(),
                ..Default::default()
            };
            render::render_scatter(fixations, screen, params.window(), &cfg)?
        }
    };
    let layer = match stimulus {
        Some(img) => layer.with_background(img),
        None => layer,
    };
    let enc = layer.encode()?;
    Ok(Artifact::Binary {
        bytes: enc.bytes,
        content_type: enc.content_type,
        extension: enc.extension,
    })
}

fn json<T: Serialize>(v: &T) -> Artifact {
    Artifact::Json(serde_json::to_value(v).expect("results serialize"))
}

/// Runs `params` on `recording`.
pub fn run(recording: &Recording, params: &AnalysisParams) -> Result<Artifact, ApiError> {
    let fixations = fixations_of(recording, params.fixation_config())?;
    match params {
        AnalysisParams::Fixate(cfg) => Ok(json(&FixateResult {
            config: *cfg,
            count: fixations.len(),
            fixations: fixations
                .iter()
                .enumerate()
                .map(|(id, &fixation)| NumberedFixation { id, fixation })
                .collect(),
        })),
        AnalysisParams::Cluster(p) => Ok(json(&cluster_fixations(&fixations, p)?)),
        AnalysisParams::Sequence(_) => Ok(json(&sequence_report(&fixations, recording)?)),
        AnalysisParams::Stats(_) => Ok(json(&StatsResult {
            fixation_count: fixations.len(),
            total_fixation_ms: fixations.iter().map(|f| f.duration).sum(),
            summary: fixation::fixation_summary(&fixations, &recording.responses),
        })),
        AnalysisParams::Render(p) => render_layer(&fixations, recording.screen, p, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_and_explicit_defaults_canonicalize_alike() {
        let a = AnalysisParams::parse(AnalysisKind::Cluster, json!({})).unwrap();
        let b = AnalysisParams::parse(
            AnalysisKind::Cluster,
            json!({"config": {"seed": 0, "restarts": 10}, "method": "em", "fixation": {"dispersion_px": 60}}),
        )
        .unwrap();
        assert_eq!(a.canonical(), b.canonical());
        let c =
            AnalysisParams::parse(AnalysisKind::Cluster, json!({"config": {"seed": 1}})).unwrap();
        assert_ne!(a.canonical(), c.canonical());
    }

    #[test]
    fn unknown_fields_name_their_path() {
        let err = AnalysisParams::parse(AnalysisKind::Cluster, json!({"config": {"sed": 1}}))
            .unwrap_err();
        assert_eq!(err.code(), "ValidationError");
        assert_eq!(err.field(), Some("config.sed"));
        let err =
            AnalysisParams::parse(AnalysisKind::Render, json!({"low": "GGGGGG"})).unwrap_err();
        assert_eq!(err.field(), Some("low"));
    }

    #[test]
    fn sweep_forms() {
        let p = AnalysisParams::parse(AnalysisKind::Cluster, json!({"sweep": "2..8"})).unwrap();
        let q = AnalysisParams::parse(AnalysisKind::Cluster, json!({"sweep": [2, 8]})).unwrap();
        assert_eq!(p, q);
        assert!(AnalysisParams::parse(AnalysisKind::Cluster, json!({"sweep": "1..8"})).is_err());
        assert!(
            AnalysisParams::parse(AnalysisKind::Cluster, json!({"sweep": "2..8", "k": 3})).is_err()
        );
    }

    #[test]
    fn invalid_fixation_config_is_rejected() {
        let err = AnalysisParams::parse(AnalysisKind::Fixate, json!({"dispersion_px": -1.0}))
            .unwrap_err();
        assert_eq!(err.code(), "ValidationError");
    }
}
