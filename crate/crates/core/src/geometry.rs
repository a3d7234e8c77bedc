//! Shared geometric types: sensor deployments, hypothesis grids and the
//! true top-p nearest-sensor sets.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_json, write_json, Error, Result};

/// Distances below this are clamped before taking `log10`.
pub const D_MIN: f64 = 0.1;

/// Two sensor distances closer than this count as a tie when validating grids.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// A point in the plane, in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Location {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Location> for [f64; 2] {
    fn from(l: Location) -> Self {
        [l.x, l.y]
    }
}

/// Euclidean distance with the [`D_MIN`] floor applied.
pub fn floored_distance(a: &Location, b: &Location) -> f64 {
    a.distance(b).max(D_MIN)
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub min: Location,
    pub max: Location,
}

impl Area {
    pub fn new(min: Location, max: Location) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::param("area corners must be finite"));
        }
        if min.x > max.x || min.y > max.y {
            return Err(Error::param("area min corner exceeds max corner"));
        }
        Ok(Self { min, max })
    }

    pub fn unit_square() -> Self {
        Self {
            min: Location::new(0.0, 0.0),
            max: Location::new(1.0, 1.0),
        }
    }

    pub fn contains(&self, l: &Location) -> bool {
        l.x >= self.min.x && l.x <= self.max.x && l.y >= self.min.y && l.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn centroid(&self) -> Location {
        Location::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }
}

/// Sensor positions inside a surveyed area. Sensor indices follow the order of
/// `sensors` everywhere in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDeployment", into = "RawDeployment")]
pub struct DeploymentMap {
    sensors: Vec<Location>,
    area: Area,
}

#[derive(Serialize, Deserialize)]
struct RawDeployment {
    area: Area,
    sensors: Vec<Location>,
}

impl TryFrom<RawDeployment> for DeploymentMap {
    type Error = Error;

    fn try_from(raw: RawDeployment) -> Result<Self> {
        let area = Area::new(raw.area.min, raw.area.max)?;
        DeploymentMap::new(raw.sensors, area)
    }
}

impl From<DeploymentMap> for RawDeployment {
    fn from(m: DeploymentMap) -> Self {
        RawDeployment {
            area: m.area,
            sensors: m.sensors,
        }
    }
}

impl DeploymentMap {
    pub fn new(sensors: Vec<Location>, area: Area) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::param("deployment needs at least one sensor"));
        }
        for (i, s) in sensors.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::param(format!("sensor {i} has non-finite coordinates")));
            }
            if !area.contains(s) {
                return Err(Error::param(format!(
                    "sensor {i} at ({}, {}) lies outside the area",
                    s.x, s.y
                )));
            }
        }
        Ok(Self { sensors, area })
    }

    pub fn sensors(&self) -> &[Location] {
        &self.sensors
    }

    pub fn sensor(&self, i: usize) -> Location {
        self.sensors[i]
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn area(&self) -> &Area {
        &self.area
    }

    /// Reads a deployment file: `{"area": {"min": [x, y], "max": [x, y]}, "sensors": [[x, y], ...]}`.
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Floored distances from `loc` to every sensor, in sensor order.
    pub fn distances(&self, loc: &Location) -> Vec<f64> {
        self.sensors.iter().map(|s| floored_distance(s, loc)).collect()
    }
}

/// Grid geometry as stored in deployment files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Location,
    pub spacing: f64,
    pub rows: usize,
    pub cols: usize,
}

/// A regular lattice of candidate target locations, enumerated row-major:
/// point `r * cols + c` sits at `origin + (c * spacing, r * spacing)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct HypothesisGrid {
    origin: Location,
    spacing: f64,
    rows: usize,
    cols: usize,
    points: Vec<Location>,
}

impl TryFrom<GridSpec> for HypothesisGrid {
    type Error = Error;

    fn try_from(g: GridSpec) -> Result<Self> {
        HypothesisGrid::new(g.origin, g.spacing, g.rows, g.cols)
    }
}

impl From<HypothesisGrid> for GridSpec {
    fn from(g: HypothesisGrid) -> Self {
        g.spec()
    }
}

/// A grid point from which two sensors are (numerically) equidistant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieViolation {
    pub hypothesis: usize,
    pub sensor_a: usize,
    pub sensor_b: usize,
}

impl HypothesisGrid {
    pub fn new(origin: Location, spacing: f64, rows: usize, cols: usize) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::param("grid origin must be finite"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::param("grid spacing must be positive"));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::param("grid needs at least one row and one column"));
        }
        let points = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| Location::new(origin.x + c as f64 * spacing, origin.y + r as f64 * spacing))
            })
            .collect();
        Ok(Self {
            origin,
            spacing,
            rows,
            cols,
            points,
        })
    }

    /// Cell-centered `rows x cols` grid covering `area` with square cells.
    pub fn covering(area: &Area, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("grid needs at least one row and one column"));
        }
        let spacing = (area.width() / cols as f64).min(area.height() / rows as f64);
        if !(spacing > 0.0) {
            return Err(Error::param("cannot cover a degenerate area"));
        }
        let origin = Location::new(area.min.x + 0.5 * spacing, area.min.y + 0.5 * spacing);
        Self::new(origin, spacing, rows, cols)
    }

    /// Builds the grid and logs any equidistance violations against `map`.
    pub fn for_deployment(map: &DeploymentMap, spec: GridSpec) -> Result<Self> {
        let grid = Self::try_from(spec)?;
        let ties = grid.tie_violations(map);
        if !ties.is_empty() {
            let shown: Vec<String> = ties
                .iter()
                .take(10)
                .map(|t| format!("(h={}, i={}, j={})", t.hypothesis, t.sensor_a, t.sensor_b))
                .collect();
            log::warn!(
                "{} grid points are equidistant from two sensors: {}{}",
                ties.len(),
                shown.join(", "),
                if ties.len() > 10 { ", ..." } else { "" }
            );
        }
        Ok(grid)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            origin: self.origin,
            spacing: self.spacing,
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn origin(&self) -> Location {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn points(&self) -> &[Location] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Location {
        self.points[index]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Row and column of the grid point nearest `loc`, clamped to the grid.
    pub fn nearest_cell(&self, loc: &Location) -> (usize, usize) {
        let clamp = |v: f64, n: usize| -> usize {
            let r = v.round();
            if r <= 0.0 {
                0
            } else {
                (r as usize).min(n - 1)
            }
        };
        let col = clamp((loc.x - self.origin.x) / self.spacing, self.cols);
        let row = clamp((loc.y - self.origin.y) / self.spacing, self.rows);
        (row, col)
    }

    /// Grid points where two sensors are equidistant within [`TIE_TOLERANCE`].
    pub fn tie_violations(&self, map: &DeploymentMap) -> Vec<TieViolation> {
        let mut out = Vec::new();
        for (h, p) in self.points.iter().enumerate() {
            let d: Vec<f64> = map.sensors().iter().map(|s| s.distance(p)).collect();
            for a in 0..d.len() {
                for b in a + 1..d.len() {
                    if (d[a] - d[b]).abs() <= TIE_TOLERANCE {
                        out.push(TieViolation {
                            hypothesis: h,
                            sensor_a: a,
                            sensor_b: b,
                        });
                    }
                }
            }
        }
        out
    }
}

/// The `p` sensors closest to a location.
///
/// `ranked` keeps distance order (closest first) as a diagnostic; set
/// semantics are what every success criterion uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopPSet {
    ranked: Vec<usize>,
}

impl TopPSet {
    pub(crate) fn from_ranked(ranked: Vec<usize>) -> Self {
        Self { ranked }
    }

    pub fn p(&self) -> usize {
        self.ranked.len()
    }

    pub fn ranked(&self) -> &[usize] {
        &self.ranked
    }

    pub fn indices(&self) -> BTreeSet<usize> {
        self.ranked.iter().copied().collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.ranked.contains(&i)
    }
}

/// Indices of the `k` smallest values, ties resolved toward the lower index.
pub(crate) fn bottom_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Indices of the `k` largest values, ties resolved toward the lower index.
pub(crate) fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// The `p` sensors nearest `loc` (raw Euclidean distance, lowest index on ties).
pub fn true_top_p(map: &DeploymentMap, loc: &Location, p: usize) -> Result<TopPSet> {
    if p == 0 || p > map.len() {
        return Err(Error::param(format!("p = {p} outside 1..={}", map.len())));
    }
    let d: Vec<f64> = map.sensors().iter().map(|s| s.distance(loc)).collect();
    Ok(TopPSet::from_ranked(bottom_k(&d, p)))
}
