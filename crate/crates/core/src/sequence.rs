//! Region-based scanpath analysis.
//!
//! The screen is split into an equal-thirds 3×3 grid. A point on an interior
//! grid line belongs to the cell below/right of it, and the far screen edge
//! belongs to the last cell. Fixation sequences are reduced to region labels
//! and summarized as first-fixation region and region-to-region transition
//! counts. Named polygonal AOIs support fixation-ratio analyses.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixation::Fixation;
use crate::ingest::ScreenSpec;
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("point ({x}, {y}) lies outside the {width}x{height} screen")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("no fixations")]
    NoFixations,
}

impl SequenceError {
    pub fn code(&self) -> &'static str {
        match self {
            SequenceError::OutOfBounds { .. } => "OutOfBounds",
            SequenceError::NoFixations => "NoFixations",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("AOI {name:?} has {count} vertices; at least 3 are required")]
    TooFewVertices { name: String, count: usize },
    #[error("AOI {name:?} has zero area")]
    ZeroArea { name: String },
    #[error("AOI {name:?} is self-intersecting")]
    SelfIntersecting { name: String },
    #[error("AOI {name:?} has a non-finite vertex")]
    NonFinite { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Row {
    Top,
    Middle,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Col {
    Left,
    Center,
    Right,
}

const ROWS: [Row; 3] = [Row::Top, Row::Middle, Row::Bottom];
const COLS: [Col; 3] = [Col::Left, Col::Center, Col::Right];

/// One of the nine 3×3 screen-grid cells. Ordered row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionLabel {
    pub row: Row,
    pub col: Col,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 9] = {
        let mut all = [RegionLabel {
            row: Row::Top,
            col: Col::Left,
        }; 9];
        let mut i = 0;
        while i < 9 {
            all[i] = RegionLabel {
                row: ROWS[i / 3],
                col: COLS[i % 3],
            };
            i += 1;
        }
        all
    };

    pub const fn new(row: Row, col: Col) -> Self {
        Self { row, col }
    }

    /// Row-major index in `0..9`.
    pub fn index(&self) -> usize {
        self.row as usize * 3 + self.col as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Two-letter code such as `MC` (middle-center) or `BR` (bottom-right).
    pub fn code(&self) -> &'static str {
        const CODES: [&str; 9] = ["TL", "TC", "TR", "ML", "MC", "MR", "BL", "BC", "BR"];
        CODES[self.index()]
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = match self.row {
            Row::Top => "top",
            Row::Middle => "middle",
            Row::Bottom => "bottom",
        };
        let col = match self.col {
            Col::Left => "left",
            Col::Center => "center",
            Col::Right => "right",
        };
        write!(f, "{row}-{col}")
    }
}

impl std::str::FromStr for RegionLabel {
    type Err = String;

    /// Accepts the two-letter code (`BC`) or the long form (`bottom-center`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegionLabel::ALL
            .into_iter()
            .find(|r| r.code().eq_ignore_ascii_case(s) || r.to_string() == s)
            .ok_or_else(|| format!("unknown region {s:?}"))
    }
}

impl Serialize for RegionLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for RegionLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn cell(v: f64, extent: u32) -> usize {
    ((3.0 * v / extent as f64).floor() as usize).min(2)
}

pub fn region_of(x: f64, y: f64, screen: ScreenSpec) -> Result<RegionLabel, SequenceError> {
    if !screen.contains(x, y) {
        return Err(SequenceError::OutOfBounds {
            x,
            y,
            width: screen.width,
            height: screen.height,
        });
    }
    Ok(RegionLabel::new(
        ROWS[cell(y, screen.height)],
        COLS[cell(x, screen.width)],
    ))
}

pub fn label_sequence(
    fixations: &[Fixation],
    screen: ScreenSpec,
) -> Result<Vec<RegionLabel>, SequenceError> {
    fixations
        .iter()
        .map(|f| region_of(f.cx, f.cy, screen))
        .collect()
}

/// Region of the earliest-onset fixation (the first one listed on ties).
pub fn first_fixation_region(
    fixations: &[Fixation],
    screen: ScreenSpec,
) -> Result<RegionLabel, SequenceError> {
    let first = fixations
        .iter()
        .reduce(|best, f| if f.onset < best.onset { f } else { best })
        .ok_or(SequenceError::NoFixations)?;
    region_of(first.cx, first.cy, screen)
}

/// 9×9 from-region × to-region counts, indexed by [`RegionLabel::index`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub counts: [[u64; 9]; 9],
}

impl TransitionTable {
    pub fn get(&self, from: RegionLabel, to: RegionLabel) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn off_diagonal_total(&self) -> u64 {
        self.total() - self.diagonal_total()
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..9).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn merge(&mut self, other: &TransitionTable) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bigram {
    pub from: RegionLabel,
    pub to: RegionLabel,
    pub count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigramReport {
    /// Region-changing transitions by count descending, then by (from, to).
    pub ranking: Vec<Bigram>,
    pub table: TransitionTable,
}

impl BigramReport {
    fn from_table(table: TransitionTable) -> Self {
        let mut ranking: Vec<Bigram> = RegionLabel::ALL
            .iter()
            .flat_map(|&from| RegionLabel::ALL.iter().map(move |&to| (from, to)))
            .filter(|(from, to)| from != to)
            .filter_map(|(from, to)| {
                let count = table.get(from, to);
                (count > 0).then_some(Bigram { from, to, count })
            })
            .collect();
        ranking.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then_with(|| (a.from, a.to).cmp(&(b.from, b.to)))
        });
        Self { ranking, table }
    }

    pub fn top(&self) -> Option<&Bigram> {
        self.ranking.first()
    }
}

pub fn bigram_frequencies(sequence: &[RegionLabel]) -> BigramReport {
    let mut table = TransitionTable::default();
    for pair in sequence.windows(2) {
        table.counts[pair[0].index()][pair[1].index()] += 1;
    }
    BigramReport::from_table(table)
}

/// Bigram counts over several scanpaths (one per user or trial). Pairs never
/// straddle two sequences.
pub fn pooled_bigram_frequencies<S: AsRef<[RegionLabel]>>(sequences: &[S]) -> BigramReport {
    let mut table = TransitionTable::default();
    for s in sequences {
        table.merge(&bigram_frequencies(s.as_ref()).table);
    }
    BigramReport::from_table(table)
}

/// A named polygonal area of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiSpec {
    pub name: String,
    pub polygon: Vec<Point>,
}

impl AoiSpec {
    /// Validates that the polygon has ≥3 finite vertices, positive area and
    /// no self-intersections.
    pub fn new(name: impl Into<String>, polygon: Vec<Point>) -> Result<Self, GeometryError> {
        let name = name.into();
        if polygon.len() < 3 {
            return Err(GeometryError::TooFewVertices {
                name,
                count: polygon.len(),
            });
        }
        if polygon.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(GeometryError::NonFinite { name });
        }
        if is_self_intersecting(&polygon) {
            return Err(GeometryError::SelfIntersecting { name });
        }
        if signed_area(&polygon).abs() <= f64::EPSILON {
            return Err(GeometryError::ZeroArea { name });
        }
        Ok(Self { name, polygon })
    }

    pub fn rect(
        name: impl Into<String>,
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(
            name,
            vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        )
    }

    /// Even-odd point-in-polygon test; points on the boundary are inside.
    pub fn contains(&self, p: Point) -> bool {
        let poly = &self.polygon;
        let n = poly.len();
        if (0..n).any(|i| on_segment(p, poly[i], poly[(i + 1) % n])) {
            return true;
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (poly[i], poly[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let scale = (b.x - a.x).abs().max((b.y - a.y).abs()).max(1.0);
    cross(a, b, p).abs() <= 1e-9 * scale
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

fn is_self_intersecting(poly: &[Point]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            // Edges sharing a vertex are adjacent, not crossing.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Fraction of fixations whose centroid lies inside or on `aoi`.
pub fn aoi_fixation_ratio(fixations: &[Fixation], aoi: &AoiSpec) -> Result<f64, SequenceError> {
    if fixations.is_empty() {
        return Err(SequenceError::NoFixations);
    }
    let inside = fixations
        .iter()
        .filter(|f| aoi.contains(f.centroid()))
        .count();
    Ok(inside as f64 / fixations.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MC: RegionLabel = RegionLabel::new(Row::Middle, Col::Center);
    const BC: RegionLabel = RegionLabel::new(Row::Bottom, Col::Center);

    fn screen() -> ScreenSpec {
        ScreenSpec::new(1366, 768).unwrap()
    }

    fn fix(cx: f64, cy: f64, onset: f64) -> Fixation {
        Fixation {
            cx,
            cy,
            onset,
            duration: 100.0,
            n: 12,
        }
    }

    #[test]
    fn region_examples() {
        assert_eq!(
            region_of(0.0, 0.0, screen()).unwrap().to_string(),
            "top-left"
        );
        assert_eq!(region_of(683.0, 384.0, screen()).unwrap(), MC);
        assert_eq!(region_of(1365.9, 767.9, screen()).unwrap().code(), "BR");
        assert_eq!(region_of(1366.0, 768.0, screen()).unwrap().code(), "BR");
        assert!(matches!(
            region_of(-0.1, 5.0, screen()),
            Err(SequenceError::OutOfBounds { .. })
        ));
        assert!(region_of(f64::NAN, 5.0, screen()).is_err());
    }

    #[test]
    fn interior_boundary_goes_to_higher_cell() {
        let s = ScreenSpec::new(300, 300).unwrap();
        assert_eq!(region_of(100.0, 200.0, s).unwrap().code(), "BC");
        assert_eq!(region_of(99.999, 199.999, s).unwrap().code(), "ML");
    }

    #[test]
    fn label_round_trip() {
        for r in RegionLabel::ALL {
            assert_eq!(r.code().parse::<RegionLabel>().unwrap(), r);
            assert_eq!(r.to_string().parse::<RegionLabel>().unwrap(), r);
            assert_eq!(RegionLabel::from_index(r.index()), Some(r));
        }
    }

    #[test]
    fn sequences_and_first_region() {
        assert!(label_sequence(&[], screen()).unwrap().is_empty());
        let fx = [fix(683.0, 384.0, 0.0), fix(683.0, 640.0, 300.0)];
        assert_eq!(label_sequence(&fx, screen()).unwrap(), vec![MC, BC]);

        assert_eq!(
            first_fixation_region(&[fix(683.0, 384.0, 0.0)], screen()).unwrap(),
            MC
        );
        let unordered = [fix(1300.0, 10.0, 50.0), fix(10.0, 700.0, 20.0)];
        assert_eq!(
            first_fixation_region(&unordered, screen()).unwrap().code(),
            "BL"
        );
        assert_eq!(
            first_fixation_region(&[], screen()),
            Err(SequenceError::NoFixations)
        );
    }

    #[test]
    fn bigram_examples() {
        let r = bigram_frequencies(&[BC, MC, BC, MC]);
        assert_eq!(
            r.top(),
            Some(&Bigram {
                from: BC,
                to: MC,
                count: 2
            })
        );
        assert_eq!(r.ranking.len(), 2);

        let r = bigram_frequencies(&[MC, MC, MC]);
        assert!(r.ranking.is_empty());
        assert_eq!(r.table.get(MC, MC), 2);

        assert!(bigram_frequencies(&[]).ranking.is_empty());
        assert!(bigram_frequencies(&[MC]).ranking.is_empty());
    }

    #[test]
    fn ties_rank_lexicographically() {
        let tr: RegionLabel = "TR".parse().unwrap();
        let r = bigram_frequencies(&[tr, MC, BC, MC]);
        // BC→MC, MC→BC and TR→MC all occur once.
        let order: Vec<_> = r
            .ranking
            .iter()
            .map(|b| (b.from.code(), b.to.code()))
            .collect();
        assert_eq!(order, vec![("TR", "MC"), ("MC", "BC"), ("BC", "MC")]);
    }

    #[test]
    fn pooled_counts_do_not_straddle_sequences() {
        let r = pooled_bigram_frequencies(&[vec![BC, MC], vec![BC, MC], vec![MC]]);
        assert_eq!(r.table.total(), 2);
        assert_eq!(r.top().unwrap().count, 2);
    }

    #[test]
    fn aoi_validation() {
        assert!(matches!(
            AoiSpec::new("a", vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0)]),
            Err(GeometryError::TooFewVertices { count: 2, .. })
        ));
        assert!(matches!(
            AoiSpec::new(
                "line",
                vec![
                    Point::new(0.0, 0.0),
                    Point::new(1.0, 1.0),
                    Point::new(2.0, 2.0)
                ]
            ),
            Err(GeometryError::ZeroArea { .. })
        ));
        let bowtie = vec![
            Point::new(0.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(10.0, 0.0),
            Point::new(0.0, 10.0),
        ];
        assert!(matches!(
            AoiSpec::new("bowtie", bowtie),
            Err(GeometryError::SelfIntersecting { .. })
        ));
    }

    #[test]
    fn aoi_ratios() {
        let aoi = AoiSpec::rect("deceptive", 100.0, 100.0, 300.0, 200.0).unwrap();
        let inside: Vec<_> = (0..10).map(|i| fix(150.0 + i as f64, 150.0, 0.0)).collect();
        let outside: Vec<_> = (0..10).map(|i| fix(500.0 + i as f64, 150.0, 0.0)).collect();
        assert_eq!(aoi_fixation_ratio(&inside, &aoi).unwrap(), 1.0);
        assert_eq!(aoi_fixation_ratio(&outside, &aoi).unwrap(), 0.0);
        let mut mixed = outside[..7].to_vec();
        // One strictly inside, two on the boundary (edge and corner).
        mixed.extend([
            fix(200.0, 150.0, 0.0),
            fix(300.0, 170.0, 0.0),
            fix(100.0, 100.0, 0.0),
        ]);
        assert!((aoi_fixation_ratio(&mixed, &aoi).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(
            aoi_fixation_ratio(&[], &aoi),
            Err(SequenceError::NoFixations)
        );
    }

    #[test]
    fn concave_polygon_membership() {
        // An L shape.
        let l = AoiSpec::new(
            "L",
            vec![
                Point::new(0.0, 0.0),
                Point::new(10.0, 0.0),
                Point::new(10.0, 4.0),
                Point::new(4.0, 4.0),
                Point::new(4.0, 10.0),
                Point::new(0.0, 10.0),
            ],
        )
        .unwrap();
        assert!(l.contains(Point::new(2.0, 8.0)));
        assert!(l.contains(Point::new(8.0, 2.0)));
        assert!(!l.contains(Point::new(8.0, 8.0)));
        assert!(l.contains(Point::new(4.0, 7.0)));
    }
}
