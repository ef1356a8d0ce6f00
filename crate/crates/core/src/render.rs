//! Deterministic rendering of fixation heatmaps, gaze plots and time-coded
//! scatter plots.
//!
//! Heatmaps are rasters (PNG); gaze plots, scatter plots and cluster overlays
//! are vector layers (SVG). A layer may carry a stimulus background, which is
//! composited under a raster or embedded as the first SVG element. Identical
//! inputs always produce identical bytes.

use std::fmt::Write as _;
use std::io::Cursor;

use base64::Engine as _;
pub use image::RgbaImage;
use image::{ImageFormat, Rgba};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterModel;
use crate::fixation::Fixation;
use crate::ingest::ScreenSpec;
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("point ({x}, {y}) lies outside the {width}x{height} layer")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("time window start {t0} is after its end {t1}")]
    BadWindow { t0: f64, t1: f64 },
    #[error("invalid render config: {0}")]
    InvalidConfig(String),
    #[error("model has {rows} responsibility rows but {points} points were given")]
    ShapeMismatch { rows: usize, points: usize },
    #[error("image error: {0}")]
    Image(String),
}

impl RenderError {
    pub fn code(&self) -> &'static str {
        match self {
            RenderError::OutOfBounds { .. } => "OutOfBounds",
            RenderError::BadWindow { .. } => "BadWindow",
            RenderError::InvalidConfig(_) => "ValidationError",
            RenderError::ShapeMismatch { .. } => "ShapeMismatch",
            RenderError::Image(_) => "ImageError",
        }
    }
}

/// An 8-bit RGB color; parses from and prints as `RRGGBB` hex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const RED: Rgb = Rgb(255, 0, 0);
    pub const GREEN: Rgb = Rgb(0, 255, 0);
    pub const WHITE: Rgb = Rgb(255, 255, 255);
    pub const BLACK: Rgb = Rgb(0, 0, 0);

    pub fn hex(&self) -> String {
        format!("{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }
}

impl std::str::FromStr for Rgb {
    type Err = RenderError;

    /// Accepts `RRGGBB` with an optional leading `#`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let h = s.strip_prefix('#').unwrap_or(s);
        let bad = || RenderError::InvalidConfig(format!("{s:?} is not a 6-digit hex color"));
        if h.len() != 6 || !h.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(bad());
        }
        let byte = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).map_err(|_| bad());
        Ok(Rgb(byte(0)?, byte(2)?, byte(4)?))
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.hex())
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Linear RGB interpolation between two endpoint colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gradient {
    pub low: Rgb,
    pub high: Rgb,
}

impl Default for Gradient {
    /// Green for low values, red for high.
    fn default() -> Self {
        Self {
            low: Rgb::GREEN,
            high: Rgb::RED,
        }
    }
}

impl Gradient {
    /// Color at `t ∈ [0, 1]` (clamped). `at(0) == low`, `at(1) == high`.
    pub fn at(&self, t: f64) -> Rgb {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
        Rgb(
            mix(self.low.0, self.high.0),
            mix(self.low.1, self.high.1),
            mix(self.low.2, self.high.2),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub kernel_sigma_px: f64,
    pub gradient: Gradient,
    /// Alpha of every pixel with non-zero density.
    pub opacity: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            kernel_sigma_px: 25.0,
            gradient: Gradient::default(),
            opacity: 0.6,
        }
    }
}

impl HeatmapConfig {
    fn validate(&self) -> Result<(), RenderError> {
        if !(self.kernel_sigma_px > 0.0 && self.kernel_sigma_px.is_finite()) {
            return Err(RenderError::InvalidConfig(
                "kernel_sigma_px must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.opacity) {
            return Err(RenderError::InvalidConfig(
                "opacity must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GazePlotConfig {
    /// Radius of a zero-duration fixation.
    pub r_min: f64,
    /// Extra radius per millisecond of duration.
    pub r_scale: f64,
    pub fill: Rgb,
    pub line: Rgb,
}

impl Default for GazePlotConfig {
    fn default() -> Self {
        Self {
            r_min: 4.0,
            r_scale: 0.04,
            fill: Rgb(31, 119, 180),
            line: Rgb(60, 60, 60),
        }
    }
}

impl GazePlotConfig {
    pub fn radius(&self, duration_ms: f64) -> f64 {
        self.r_min + self.r_scale * duration_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterConfig {
    pub radius: f64,
    pub gradient: Gradient,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            radius: 5.0,
            gradient: Gradient::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Heatmap,
    Gazeplot,
    Scatter,
}

impl std::str::FromStr for LayerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heatmap" => Ok(LayerKind::Heatmap),
            "gazeplot" => Ok(LayerKind::Gazeplot),
            "scatter" => Ok(LayerKind::Scatter),
            other => Err(format!(
                "unknown layer kind {other:?} (expected heatmap|gazeplot|scatter)"
            )),
        }
    }
}

/// A vector primitive. `fixation` carries the index of the source fixation
/// so linked views can match markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Element {
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
        fill: Rgb,
        stroke: Option<Rgb>,
        fixation: Option<usize>,
    },
    Line {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        stroke: Rgb,
        width: f64,
    },
    Text {
        x: f64,
        y: f64,
        text: String,
        size: f64,
        fill: Rgb,
    },
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        /// Rotation of the `rx` axis, degrees.
        angle_deg: f64,
        stroke: Rgb,
    },
    Cross {
        cx: f64,
        cy: f64,
        size: f64,
        stroke: Rgb,
    },
}

/// A rendered layer: an optional raster plus vector elements on top.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderLayer {
    pub kind: LayerKind,
    pub width: u32,
    pub height: u32,
    pub background: Option<RgbaImage>,
    pub raster: Option<RgbaImage>,
    pub elements: Vec<Element>,
}

/// Serialized layer bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub content_type: &'static str,
    pub extension: &'static str,
}

impl RenderLayer {
    fn empty(kind: LayerKind, screen: ScreenSpec) -> Self {
        Self {
            kind,
            width: screen.width,
            height: screen.height,
            background: None,
            raster: None,
            elements: Vec::new(),
        }
    }

    /// Circle elements tagged with a fixation index, in drawing order.
    pub fn fixation_markers(&self) -> Vec<usize> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Circle {
                    fixation: Some(i), ..
                } => Some(*i),
                _ => None,
            })
            .collect()
    }

    /// Places `stimulus` under the layer, resized to the layer size.
    pub fn with_background(mut self, stimulus: &RgbaImage) -> Self {
        let img = if stimulus.dimensions() == (self.width, self.height) {
            stimulus.clone()
        } else {
            image::imageops::resize(
                stimulus,
                self.width,
                self.height,
                image::imageops::FilterType::Triangle,
            )
        };
        self.background = Some(img);
        self
    }

    /// PNG for raster-only layers, SVG otherwise.
    pub fn encode(&self) -> Result<Encoded, RenderError> {
        if self.elements.is_empty() {
            if let Some(raster) = &self.raster {
                let composed = match &self.background {
                    Some(bg) => composite(bg, raster),
                    None => raster.clone(),
                };
                return Ok(Encoded {
                    bytes: png_bytes(&composed)?,
                    content_type: "image/png",
                    extension: "png",
                });
            }
        }
        Ok(Encoded {
            bytes: self.to_svg()?.into_bytes(),
            content_type: "image/svg+xml",
            extension: "svg",
        })
    }

    pub fn to_svg(&self) -> Result<String, RenderError> {
        let (w, h) = (self.width, self.height);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" data-layer="{}">"#,
            serde_json::to_value(self.kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default()
        );
        for img in self.background.iter().chain(&self.raster) {
            let _ = writeln!(
                s,
                r#"<image x="0" y="0" width="{w}" height="{h}" href="data:image/png;base64,{}"/>"#,
                base64::engine::general_purpose::STANDARD.encode(png_bytes(img)?)
            );
        }
        for e in &self.elements {
            write_element(&mut s, e);
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

fn write_element(s: &mut String, e: &Element) {
    match e {
        Element::Circle {
            cx,
            cy,
            r,
            fill,
            stroke,
            fixation,
        } => {
            let _ = write!(
                s,
                r##"<circle cx="{cx:.3}" cy="{cy:.3}" r="{r:.3}" fill="#{}""##,
                fill.hex()
            );
            if let Some(c) = stroke {
                let _ = write!(s, r##" stroke="#{}""##, c.hex());
            }
            if let Some(i) = fixation {
                let _ = write!(s, r#" data-fixation="{i}""#);
            }
            s.push_str("/>\n");
        }
        Element::Line {
            x1,
            y1,
            x2,
            y2,
            stroke,
            width,
        } => {
            let _ = writeln!(
                s,
                r##"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#{}" stroke-width="{width:.3}"/>"##,
                stroke.hex()
            );
        }
        Element::Text {
            x,
            y,
            text,
            size,
            fill,
        } => {
            let _ = writeln!(
                s,
                r##"<text x="{x:.3}" y="{y:.3}" font-size="{size:.3}" text-anchor="middle" dominant-baseline="central" fill="#{}">{}</text>"##,
                fill.hex(),
                escape(text)
            );
        }
        Element::Ellipse {
            cx,
            cy,
            rx,
            ry,
            angle_deg,
            stroke,
        } => {
            let _ = writeln!(
                s,
                r##"<ellipse cx="{cx:.3}" cy="{cy:.3}" rx="{rx:.3}" ry="{ry:.3}" transform="rotate({angle_deg:.3} {cx:.3} {cy:.3})" fill="none" stroke="#{}" stroke-width="2"/>"##,
                stroke.hex()
            );
        }
        Element::Cross {
            cx,
            cy,
            size,
            stroke,
        } => {
            let h = size / 2.0;
            let _ = writeln!(
                s,
                r##"<path d="M{:.3} {:.3}L{:.3} {:.3}M{:.3} {:.3}L{:.3} {:.3}" stroke="#{}" stroke-width="3"/>"##,
                cx - h,
                cy - h,
                cx + h,
                cy + h,
                cx - h,
                cy + h,
                cx + h,
                cy - h,
                stroke.hex()
            );
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn png_bytes(img: &RgbaImage) -> Result<Vec<u8>, RenderError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| RenderError::Image(e.to_string()))?;
    Ok(buf.into_inner())
}

/// Source-over compositing of `top` onto an opaque copy of `bottom`.
fn composite(bottom: &RgbaImage, top: &RgbaImage) -> RgbaImage {
    let mut out = bottom.clone();
    for (dst, src) in out.pixels_mut().zip(top.pixels()) {
        let a = src[3] as u32;
        for c in 0..3 {
            dst[c] = ((src[c] as u32 * a + dst[c] as u32 * (255 - a) + 127) / 255) as u8;
        }
        dst[3] = 255;
    }
    out
}

/// Loads a stimulus image from disk.
pub fn load_stimulus(path: &std::path::Path) -> Result<RgbaImage, RenderError> {
    image::open(path)
        .map(|img| img.to_rgba8())
        .map_err(|e| RenderError::Image(format!("{}: {e}", path.display())))
}

fn check_bounds(fixations: &[Fixation], screen: ScreenSpec) -> Result<(), RenderError> {
    match fixations.iter().find(|f| !screen.contains(f.cx, f.cy)) {
        Some(f) => Err(RenderError::OutOfBounds {
            x: f.cx,
            y: f.cy,
            width: screen.width,
            height: screen.height,
        }),
        None => Ok(()),
    }
}

/// Kernel support radius in multiples of sigma.
const KERNEL_SUPPORT_SIGMAS: f64 = 3.0;

/// Unnormalized fixation-count density: one unit-mass isotropic Gaussian per
/// centroid, sampled at integer pixel coordinates and truncated at 3σ.
/// Fixations are accumulated in list order.
pub fn density_field(fixations: &[Fixation], screen: ScreenSpec, sigma: f64) -> Vec<f64> {
    let (w, h) = (screen.width as usize, screen.height as usize);
    let mut field = vec![0.0f64; w * h];
    let radius = KERNEL_SUPPORT_SIGMAS * sigma;
    let r2 = radius * radius;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let span = |c: f64, len: usize| {
        let lo = (c - radius).ceil().max(0.0) as usize;
        let hi = ((c + radius).floor() as i64).min(len as i64 - 1);
        (lo, hi)
    };
    for f in fixations {
        let (x0, x1) = span(f.cx, w);
        let (y0, y1) = span(f.cy, h);
        if x1 < x0 as i64 || y1 < y0 as i64 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        let gx: Vec<(f64, f64)> = (x0..=x1)
            .map(|px| {
                let d = px as f64 - f.cx;
                (d * d, (-d * d * inv2s2).exp())
            })
            .collect();
        for py in y0..=y1 {
            let dy = py as f64 - f.cy;
            let dy2 = dy * dy;
            let gy = norm * (-dy2 * inv2s2).exp();
            let row = &mut field[py * w + x0..=py * w + x1];
            for (cell, &(dx2, g)) in row.iter_mut().zip(&gx) {
                if dx2 + dy2 <= r2 {
                    *cell += gy * g;
                }
            }
        }
    }
    field
}

/// Fixation-count heatmap normalized by its maximum and mapped through the
/// gradient. Zero-density pixels are fully transparent.
pub fn render_heatmap(
    fixations: &[Fixation],
    screen: ScreenSpec,
    cfg: &HeatmapConfig,
) -> Result<RenderLayer, RenderError> {
    cfg.validate()?;
    check_bounds(fixations, screen)?;
    let field = density_field(fixations, screen, cfg.kernel_sigma_px);
    let max = field.iter().copied().fold(0.0f64, f64::max);
    let alpha = (cfg.opacity * 255.0).round() as u8;
    let mut img = RgbaImage::new(screen.width, screen.height);
    if max > 0.0 {
        for (px, &v) in img.pixels_mut().zip(&field) {
            if v > 0.0 {
                let c = cfg.gradient.at(v / max);
                *px = Rgba([c.0, c.1, c.2, alpha]);
            }
        }
    }
    let mut layer = RenderLayer::empty(LayerKind::Heatmap, screen);
    layer.raster = Some(img);
    Ok(layer)
}

fn check_window(window: Option<(f64, f64)>) -> Result<(), RenderError> {
    match window {
        Some((t0, t1)) if t0 > t1 || t0.is_nan() || t1.is_nan() => {
            Err(RenderError::BadWindow { t0, t1 })
        }
        _ => Ok(()),
    }
}

fn in_window(f: &Fixation, window: Option<(f64, f64)>) -> bool {
    window.is_none_or(|(t0, t1)| f.onset >= t0 && f.onset <= t1)
}

/// Numbered fixation circles (radius `r_min + r_scale · duration`) joined in
/// temporal order. With a window, only fixations whose onset lies in it
/// (inclusive) are drawn; numbers keep their position in the full list.
pub fn render_gazeplot(
    fixations: &[Fixation],
    screen: ScreenSpec,
    window: Option<(f64, f64)>,
    cfg: &GazePlotConfig,
) -> Result<RenderLayer, RenderError> {
    check_window(window)?;
    check_bounds(fixations, screen)?;
    let shown: Vec<(usize, &Fixation)> = fixations
        .iter()
        .enumerate()
        .filter(|(_, f)| in_window(f, window))
        .collect();
    let mut layer = RenderLayer::empty(LayerKind::Gazeplot, screen);
    for pair in shown.windows(2) {
        let (a, b) = (pair[0].1, pair[1].1);
        layer.elements.push(Element::Line {
            x1: a.cx,
            y1: a.cy,
            x2: b.cx,
            y2: b.cy,
            stroke: cfg.line,
            width: 1.5,
        });
    }
    for &(i, f) in &shown {
        let r = cfg.radius(f.duration);
        layer.elements.push(Element::Circle {
            cx: f.cx,
            cy: f.cy,
            r,
            fill: cfg.fill,
            stroke: Some(Rgb::WHITE),
            fixation: Some(i),
        });
        layer.elements.push(Element::Text {
            x: f.cx,
            y: f.cy,
            text: (i + 1).to_string(),
            size: r.clamp(8.0, 16.0),
            fill: Rgb::WHITE,
        });
    }
    Ok(layer)
}

/// One marker per fixation colored by onset time over the full recording
/// span (first onset → `gradient.low`, last → `gradient.high`). A window
/// keeps only fixations with onset in `[t0, t1]`; colors are unaffected.
pub fn render_scatter(
    fixations: &[Fixation],
    screen: ScreenSpec,
    window: Option<(f64, f64)>,
    cfg: &ScatterConfig,
) -> Result<RenderLayer, RenderError> {
    check_window(window)?;
    check_bounds(fixations, screen)?;
    let (t_min, t_max) = fixations
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
            (lo.min(f.onset), hi.max(f.onset))
        });
    let span = t_max - t_min;
    let mut layer = RenderLayer::empty(LayerKind::Scatter, screen);
    for (i, f) in fixations
        .iter()
        .enumerate()
        .filter(|(_, f)| in_window(f, window))
    {
        let t = if span > 0.0 {
            (f.onset - t_min) / span
        } else {
            0.0
        };
        layer.elements.push(Element::Circle {
            cx: f.cx,
            cy: f.cy,
            r: cfg.radius,
            fill: cfg.gradient.at(t),
            stroke: None,
            fixation: Some(i),
        });
    }
    Ok(layer)
}

/// Categorical palette for cluster assignments.
pub const PALETTE: [Rgb; 10] = [
    Rgb(31, 119, 180),
    Rgb(255, 127, 14),
    Rgb(44, 160, 44),
    Rgb(214, 39, 40),
    Rgb(148, 103, 189),
    Rgb(140, 86, 75),
    Rgb(227, 119, 194),
    Rgb(127, 127, 127),
    Rgb(188, 189, 34),
    Rgb(23, 190, 207),
];

/// Draws `points` colored by hard assignment, a cross at every center and,
/// for mixture models, the 2σ ellipse of every component.
pub fn overlay_clusters(
    mut layer: RenderLayer,
    model: &ClusterModel,
    points: &[Point],
) -> Result<RenderLayer, RenderError> {
    if model.responsibilities.len() != points.len() {
        return Err(RenderError::ShapeMismatch {
            rows: model.responsibilities.len(),
            points: points.len(),
        });
    }
    let screen = ScreenSpec {
        width: layer.width,
        height: layer.height,
    };
    if let Some(m) = model.means.iter().find(|m| !screen.contains(m.x, m.y)) {
        return Err(RenderError::OutOfBounds {
            x: m.x,
            y: m.y,
            width: layer.width,
            height: layer.height,
        });
    }
    let color = |j: usize| PALETTE[j % PALETTE.len()];
    for (i, (p, a)) in points.iter().zip(model.assignments()).enumerate() {
        layer.elements.push(Element::Circle {
            cx: p.x,
            cy: p.y,
            r: 4.0,
            fill: color(a),
            stroke: None,
            fixation: Some(i),
        });
    }
    if let Some(covs) = &model.covariances {
        for (j, (m, c)) in model.means.iter().zip(covs).enumerate() {
            let (major, minor) = c.eigenvalues();
            layer.elements.push(Element::Ellipse {
                cx: m.x,
                cy: m.y,
                rx: 2.0 * major.max(0.0).sqrt(),
                ry: 2.0 * minor.max(0.0).sqrt(),
                angle_deg: c.major_axis_angle().to_degrees(),
                stroke: color(j),
            });
        }
    }
    for (j, m) in model.means.iter().enumerate() {
        layer.elements.push(Element::Cross {
            cx: m.x,
            cy: m.y,
            size: 14.0,
            stroke: Rgb::BLACK,
        });
        layer.elements.push(Element::Circle {
            cx: m.x,
            cy: m.y,
            r: 6.0,
            fill: color(j),
            stroke: Some(Rgb::BLACK),
            fixation: None,
        });
    }
    Ok(layer)
}
