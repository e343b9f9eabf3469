//! Frames, per-frame face meshes and the canonical face model.
//!
//! A [`FaceMesh`] carries the landmark positions detected in one video frame
//! together with the triangle topology shared by the whole sequence. The
//! [`CanonicalModel`] holds the same topology laid out flat on a fixed
//! canvas; every frame is embedded onto that canvas before measuring motion.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{signed_area, triangle_contains, Point2};
use crate::grid::Grid;
use crate::par;

/// Vertex indices of one triangle.
pub type Triangle = [usize; 3];

/// Triangles with `|area|` below this (px²) are degenerate.
pub const DEGENERATE_AREA: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid canonical model: {}", IssueList(.0))]
    InvalidModel(Vec<MeshIssue>),
    #[error("invalid mesh: {}", IssueList(.0))]
    InvalidMesh(Vec<MeshIssue>),
    #[error("landmark sequence has no frames")]
    EmptySequence,
    #[error("missing frame index {0}")]
    MissingFrameIndex(usize),
    #[error("duplicate frame index {0}")]
    DuplicateFrameIndex(usize),
    #[error("frame {frame}: landmark count {found} differs from {expected}")]
    LandmarkCountMismatch {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame {frame}, landmark {landmark}: non-finite coordinate")]
    NonFiniteCoordinate { frame: usize, landmark: usize },
    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}

/// One validation finding. Model validation collects all of them before
/// failing.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshIssue {
    LandmarkOutOfCanvas { landmark: usize, x: f64, y: f64 },
    NonFiniteCoordinate { landmark: usize },
    IndexOutOfRange { triangle: usize, index: usize, count: usize },
    RepeatedVertex { triangle: usize },
    DegenerateTriangle { triangle: usize, area: f64 },
    OverlappingTriangles { first: usize, second: usize },
    EmptyCanvas,
    NoTriangles,
}

impl fmt::Display for MeshIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MeshIssue::LandmarkOutOfCanvas { landmark, x, y } => {
                write!(f, "landmark {landmark} at ({x}, {y}): landmark out of canvas")
            }
            MeshIssue::NonFiniteCoordinate { landmark } => {
                write!(f, "landmark {landmark}: non-finite coordinate")
            }
            MeshIssue::IndexOutOfRange {
                triangle,
                index,
                count,
            } => write!(
                f,
                "triangle {triangle}: index {index} out of range for {count} landmarks"
            ),
            MeshIssue::RepeatedVertex { triangle } => {
                write!(f, "triangle {triangle}: repeated vertex index")
            }
            MeshIssue::DegenerateTriangle { triangle, area } => {
                write!(f, "triangle {triangle}: degenerate triangle (area {area:e} px²)")
            }
            MeshIssue::OverlappingTriangles { first, second } => {
                write!(f, "triangles {first} and {second} overlap")
            }
            MeshIssue::EmptyCanvas => write!(f, "canvas must be at least 1×1"),
            MeshIssue::NoTriangles => write!(f, "no triangles"),
        }
    }
}

struct IssueList<'a>(&'a [MeshIssue]);

impl fmt::Display for IssueList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// A grayscale frame with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    grid: Grid,
}

impl Frame {
    pub fn new(width: usize, height: usize, intensity: Vec<f64>) -> Result<Self, MeshError> {
        if width == 0 || height == 0 {
            return Err(MeshError::InvalidFrame(format!(
                "frame must be at least 1×1, got {width}×{height}"
            )));
        }
        if intensity.len() != width * height {
            return Err(MeshError::InvalidFrame(format!(
                "expected {} intensities, got {}",
                width * height,
                intensity.len()
            )));
        }
        if let Some(i) = intensity
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(MeshError::InvalidFrame(format!(
                "intensity at ({}, {}) is {} (must be finite, in [0, 1])",
                i % width,
                i / width,
                intensity[i]
            )));
        }
        Ok(Self {
            grid: Grid::new(width, height, intensity),
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self, MeshError> {
        Self::new(width, height, Grid::from_fn(width, height, f).into_data())
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.grid.get(x, y)
    }
}

/// Ordered frames of one video, all the same size.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self, MeshError> {
        if let Some(first) = frames.first() {
            let dims = (first.width(), first.height());
            for (i, f) in frames.iter().enumerate() {
                if (f.width(), f.height()) != dims {
                    return Err(MeshError::InvalidFrame(format!(
                        "frame {i} is {}×{}, frame 0 is {}×{}",
                        f.width(),
                        f.height(),
                        dims.0,
                        dims.1
                    )));
                }
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}

fn topology_issues(triangles: &[Triangle], landmark_count: usize) -> Vec<MeshIssue> {
    let mut issues = Vec::new();
    for (t, tri) in triangles.iter().enumerate() {
        for &index in tri {
            if index >= landmark_count {
                issues.push(MeshIssue::IndexOutOfRange {
                    triangle: t,
                    index,
                    count: landmark_count,
                });
            }
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            issues.push(MeshIssue::RepeatedVertex { triangle: t });
        }
    }
    issues
}

fn triangle_points(landmarks: &[Point2], tri: Triangle) -> [Point2; 3] {
    [landmarks[tri[0]], landmarks[tri[1]], landmarks[tri[2]]]
}

/// Landmarks detected in one frame plus the shared triangle topology.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceMesh {
    landmarks: Vec<Point2>,
    triangles: Vec<Triangle>,
}

impl FaceMesh {
    /// Checks index ranges, repeated vertices and finiteness. Degenerate
    /// triangles are allowed here; see [`FaceMesh::degenerate_triangles`].
    pub fn new(landmarks: Vec<Point2>, triangles: Vec<Triangle>) -> Result<Self, MeshError> {
        let mut issues: Vec<MeshIssue> = landmarks
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_finite())
            .map(|(landmark, _)| MeshIssue::NonFiniteCoordinate { landmark })
            .collect();
        issues.extend(topology_issues(&triangles, landmarks.len()));
        if !issues.is_empty() {
            return Err(MeshError::InvalidMesh(issues));
        }
        Ok(Self {
            landmarks,
            triangles,
        })
    }

    pub fn landmarks(&self) -> &[Point2] {
        &self.landmarks
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle(&self, k: usize) -> [Point2; 3] {
        triangle_points(&self.landmarks, self.triangles[k])
    }

    /// Indices of triangles whose area collapsed below [`DEGENERATE_AREA`].
    pub fn degenerate_triangles(&self) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&k| {
                let [a, b, c] = self.triangle(k);
                signed_area(a, b, c).abs() < DEGENERATE_AREA
            })
            .collect()
    }
}

/// The flat canonical face: landmark layout on a fixed canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalModel {
    canvas_width: u32,
    canvas_height: u32,
    landmarks: Vec<Point2>,
    triangles: Vec<Triangle>,
}

impl CanonicalModel {
    pub fn new(
        canvas_width: u32,
        canvas_height: u32,
        landmarks: Vec<Point2>,
        triangles: Vec<Triangle>,
    ) -> Result<Self, MeshError> {
        let mut issues = Vec::new();
        if canvas_width == 0 || canvas_height == 0 {
            issues.push(MeshIssue::EmptyCanvas);
        }
        if triangles.is_empty() {
            issues.push(MeshIssue::NoTriangles);
        }
        for (landmark, p) in landmarks.iter().enumerate() {
            if !p.is_finite() {
                issues.push(MeshIssue::NonFiniteCoordinate { landmark });
            } else if p.x < 0.0
                || p.y < 0.0
                || p.x >= canvas_width as f64
                || p.y >= canvas_height as f64
            {
                issues.push(MeshIssue::LandmarkOutOfCanvas {
                    landmark,
                    x: p.x,
                    y: p.y,
                });
            }
        }
        let topo = topology_issues(&triangles, landmarks.len());
        let topology_ok = topo.is_empty();
        issues.extend(topo);
        if topology_ok && issues.is_empty() {
            for (t, &tri) in triangles.iter().enumerate() {
                let [a, b, c] = triangle_points(&landmarks, tri);
                let area = signed_area(a, b, c);
                if area.abs() < DEGENERATE_AREA {
                    issues.push(MeshIssue::DegenerateTriangle { triangle: t, area });
                }
            }
            if issues.is_empty() {
                issues.extend(overlap_issues(&landmarks, &triangles));
            }
        }
        if !issues.is_empty() {
            return Err(MeshError::InvalidModel(issues));
        }
        Ok(Self {
            canvas_width,
            canvas_height,
            landmarks,
            triangles,
        })
    }

    pub fn canvas_width(&self) -> u32 {
        self.canvas_width
    }

    pub fn canvas_height(&self) -> u32 {
        self.canvas_height
    }

    pub fn canvas_dims(&self) -> (usize, usize) {
        (self.canvas_width as usize, self.canvas_height as usize)
    }

    pub fn landmarks(&self) -> &[Point2] {
        &self.landmarks
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle(&self, k: usize) -> [Point2; 3] {
        triangle_points(&self.landmarks, self.triangles[k])
    }

    /// Ensures `mesh` uses exactly this model's topology.
    pub fn check_mesh(&self, mesh: &FaceMesh) -> Result<(), MeshError> {
        if mesh.landmarks().len() != self.landmarks.len() {
            return Err(MeshError::TopologyMismatch(format!(
                "mesh has {} landmarks, canonical model has {}",
                mesh.landmarks().len(),
                self.landmarks.len()
            )));
        }
        if mesh.triangles() != self.triangles.as_slice() {
            return Err(MeshError::TopologyMismatch(
                "mesh triangles differ from the canonical model's".into(),
            ));
        }
        Ok(())
    }

    /// Compact canonical-model JSON with keys in schema order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&CanonicalJson {
            canvas: [self.canvas_width, self.canvas_height],
            landmarks: self.landmarks.iter().map(|&p| Some(p).into()).collect(),
            triangles: self.triangles.clone(),
        })
        .expect("canonical model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let raw: CanonicalJson = serde_json::from_str(&normalize_non_finite(text))?;
        let landmarks = raw
            .landmarks
            .into_iter()
            .map(|p| p.point().unwrap_or(Point2::new(f64::NAN, f64::NAN)))
            .collect();
        Self::new(raw.canvas[0], raw.canvas[1], landmarks, raw.triangles)
    }
}

/// Samples a few interior points of every triangle and reports pairs where
/// one triangle's sample lies strictly inside another.
fn overlap_issues(landmarks: &[Point2], triangles: &[Triangle]) -> Vec<MeshIssue> {
    const SAMPLES: [[f64; 3]; 4] = [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [0.6, 0.2, 0.2],
        [0.2, 0.6, 0.2],
        [0.2, 0.2, 0.6],
    ];
    let tris: Vec<[Point2; 3]> = triangles
        .iter()
        .map(|&t| triangle_points(landmarks, t))
        .collect();
    let boxes: Vec<[f64; 4]> = tris.iter().map(bbox).collect();
    let mut issues = Vec::new();
    for a in 0..tris.len() {
        for b in (a + 1)..tris.len() {
            let (ba, bb) = (boxes[a], boxes[b]);
            if ba[2] <= bb[0] || bb[2] <= ba[0] || ba[3] <= bb[1] || bb[3] <= ba[1] {
                continue;
            }
            let hit = SAMPLES.iter().any(|w| {
                strictly_inside(tris[b], crate::geometry::from_barycentric(tris[a], *w))
            }) || SAMPLES.iter().any(|w| {
                strictly_inside(tris[a], crate::geometry::from_barycentric(tris[b], *w))
            });
            if hit {
                issues.push(MeshIssue::OverlappingTriangles {
                    first: a,
                    second: b,
                });
            }
        }
    }
    issues
}

fn strictly_inside(tri: [Point2; 3], p: Point2) -> bool {
    crate::geometry::barycentric(tri, p).is_some_and(|w| w.iter().all(|&v| v > 1e-9))
}

fn bbox(t: &[Point2; 3]) -> [f64; 4] {
    let min_x = t[0].x.min(t[1].x).min(t[2].x);
    let min_y = t[0].y.min(t[1].y).min(t[2].y);
    let max_x = t[0].x.max(t[1].x).max(t[2].x);
    let max_y = t[0].y.max(t[1].y).max(t[2].y);
    [min_x, min_y, max_x, max_y]
}

/// Index of the triangle whose closed region contains `point`, lowest index
/// first on shared edges.
pub fn locate_triangle(model: &CanonicalModel, point: Point2) -> Option<usize> {
    (0..model.triangles.len()).find(|&k| triangle_contains(model.triangle(k), point))
}

/// Per-pixel triangle labels for the canonical canvas, evaluated at pixel
/// centers with the same rule as [`locate_triangle`].
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRaster {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl TriangleRaster {
    const EMPTY: u32 = u32::MAX;

    pub fn new(model: &CanonicalModel) -> Self {
        let (width, height) = model.canvas_dims();
        let tris: Vec<[Point2; 3]> = (0..model.triangles.len())
            .map(|k| model.triangle(k))
            .collect();
        let boxes: Vec<[f64; 4]> = tris.iter().map(bbox).collect();
        let mut labels = vec![Self::EMPTY; width * height];
        par::for_each_row(&mut labels, width, |y, row| {
            let yf = y as f64;
            for (k, tri) in tris.iter().enumerate() {
                let b = boxes[k];
                if yf < b[1] - 1.0 || yf > b[3] + 1.0 {
                    continue;
                }
                let x0 = (b[0].floor() - 1.0).max(0.0) as usize;
                let x1 = ((b[2].ceil() + 1.0).max(0.0) as usize).min(width - 1);
                for (x, label) in row.iter_mut().enumerate().take(x1 + 1).skip(x0) {
                    if *label == Self::EMPTY
                        && triangle_contains(*tri, Point2::new(x as f64, yf))
                    {
                        *label = k as u32;
                    }
                }
            }
        });
        Self {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn label(&self, x: usize, y: usize) -> Option<usize> {
        match self.labels[y * self.width + x] {
            Self::EMPTY => None,
            k => Some(k as usize),
        }
    }

    pub fn covered(&self) -> usize {
        self.labels.iter().filter(|&&l| l != Self::EMPTY).count()
    }
}

/// Landmark positions of every frame in a video, sharing one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSequence {
    pub triangles: Vec<Triangle>,
    pub meshes: Vec<FaceMesh>,
}

impl LandmarkSequence {
    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let raw: LandmarkJson = serde_json::from_str(&normalize_non_finite(text))?;
        if raw.frames.is_empty() {
            return Err(MeshError::EmptySequence);
        }
        let mut frames = raw.frames;
        frames.sort_by_key(|f| f.index);
        for (expected, f) in frames.iter().enumerate() {
            if f.index < expected {
                return Err(MeshError::DuplicateFrameIndex(f.index));
            }
            if f.index > expected {
                return Err(MeshError::MissingFrameIndex(expected));
            }
        }
        let count = frames[0].landmarks.len();
        let mut meshes = Vec::with_capacity(frames.len());
        for f in frames {
            if f.landmarks.len() != count {
                return Err(MeshError::LandmarkCountMismatch {
                    frame: f.index,
                    expected: count,
                    found: f.landmarks.len(),
                });
            }
            let mut points = Vec::with_capacity(count);
            for (landmark, p) in f.landmarks.iter().enumerate() {
                match p.point() {
                    Some(p) if p.is_finite() => points.push(p),
                    _ => {
                        return Err(MeshError::NonFiniteCoordinate {
                            frame: f.index,
                            landmark,
                        })
                    }
                }
            }
            meshes.push(FaceMesh::new(points, raw.triangles.clone())?);
        }
        Ok(Self {
            triangles: raw.triangles,
            meshes,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&LandmarkJson {
            triangles: self.triangles.clone(),
            frames: self
                .meshes
                .iter()
                .enumerate()
                .map(|(index, m)| FrameLandmarks {
                    index,
                    landmarks: m.landmarks().iter().map(|&p| Some(p).into()).collect(),
                })
                .collect(),
        })
        .expect("landmark sequence serializes")
    }
}

pub fn load_canonical_model(path: impl AsRef<Path>) -> Result<CanonicalModel, MeshError> {
    CanonicalModel::from_json(&read_text(path.as_ref())?)
}

pub fn load_landmark_sequence(path: impl AsRef<Path>) -> Result<LandmarkSequence, MeshError> {
    LandmarkSequence::from_json(&read_text(path.as_ref())?)
}

fn read_text(path: &Path) -> Result<String, MeshError> {
    fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct CanonicalJson {
    canvas: [u32; 2],
    landmarks: Vec<JsonPoint>,
    triangles: Vec<Triangle>,
}

#[derive(Serialize, Deserialize)]
struct LandmarkJson {
    triangles: Vec<Triangle>,
    frames: Vec<FrameLandmarks>,
}

#[derive(Serialize, Deserialize)]
struct FrameLandmarks {
    index: usize,
    landmarks: Vec<JsonPoint>,
}

/// A coordinate pair where either component may be `null` (written for
/// NaN/Infinity by lenient JSON producers).
#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct JsonPoint([Option<f64>; 2]);

impl JsonPoint {
    fn point(&self) -> Option<Point2> {
        Some(Point2::new(self.0[0]?, self.0[1]?))
    }
}

impl From<Option<Point2>> for JsonPoint {
    fn from(p: Option<Point2>) -> Self {
        match p {
            Some(p) => JsonPoint([Some(p.x), Some(p.y)]),
            None => JsonPoint([None, None]),
        }
    }
}

/// Replaces bare `NaN`, `Infinity` and `-Infinity` tokens outside string
/// literals with `null`. Python's `json` module emits these by default.
fn normalize_non_finite(text: &str) -> std::borrow::Cow<'_, str> {
    if !text.contains("NaN") && !text.contains("Infinity") {
        return std::borrow::Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        let token = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t));
        match token {
            Some(t) => {
                out.push_str("null");
                rest = &rest[t.len()..];
            }
            None => {
                out.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
    }
    std::borrow::Cow::Owned(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"canvas":[16,16],"landmarks":[[0.0,0.0],[10.0,0.0],[0.0,10.0]],"triangles":[[0,1,2]]}"#;

    fn square_model() -> CanonicalModel {
        // Four triangles fanning around the center of a 20×20 square.
        CanonicalModel::new(
            32,
            32,
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(20.0, 0.0),
                Point2::new(20.0, 20.0),
                Point2::new(0.0, 20.0),
                Point2::new(10.0, 10.0),
            ],
            vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        )
        .unwrap()
    }

    #[test]
    fn loads_minimal_model() {
        let m = CanonicalModel::from_json(MINIMAL).unwrap();
        assert_eq!(m.triangles().len(), 1);
        assert_eq!(m.landmarks().len(), 3);
        assert_eq!(m.canvas_dims(), (16, 16));
    }

    #[test]
    fn rejects_landmark_out_of_canvas() {
        let text = MINIMAL.replace("[10.0,0.0]", "[20.0,0.0]");
        let err = CanonicalModel::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("landmark out of canvas"), "{err}");
        assert!(err.to_string().contains("landmark 1"), "{err}");
    }

    #[test]
    fn rejects_repeated_vertex() {
        let text = MINIMAL.replace("[[0,1,2]]", "[[0,1,1]]");
        let err = CanonicalModel::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("repeated vertex index"), "{err}");
    }

    #[test]
    fn rejects_index_out_of_range_and_degenerate() {
        let text = MINIMAL.replace("[[0,1,2]]", "[[0,1,3]]");
        let err = CanonicalModel::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");

        let text = MINIMAL.replace("[0.0,10.0]", "[5.0,0.0]");
        let err = CanonicalModel::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn rejects_overlap_and_enumerates_all_issues() {
        let err = CanonicalModel::new(
            32,
            32,
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(10.0, 0.0),
                Point2::new(0.0, 10.0),
                Point2::new(1.0, 1.0),
            ],
            vec![[0, 1, 2], [3, 1, 2]],
        )
        .unwrap_err();
        assert!(err.to_string().contains("overlap"), "{err}");

        let err = CanonicalModel::new(
            8,
            8,
            vec![Point2::new(9.0, 0.0), Point2::new(0.0, -1.0)],
            vec![[0, 1, 1]],
        )
        .unwrap_err();
        match err {
            MeshError::InvalidModel(issues) => assert_eq!(issues.len(), 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            CanonicalModel::from_json("{\"canvas\":[1]"),
            Err(MeshError::Parse(_))
        ));
    }

    #[test]
    fn model_json_round_trips() {
        let m = square_model();
        let text = m.to_json();
        assert!(text.starts_with("{\"canvas\":[32,32],\"landmarks\":"));
        let again = CanonicalModel::from_json(&text).unwrap();
        assert_eq!(again, m);
        assert_eq!(again.to_json(), text);
    }

    #[test]
    fn loads_landmark_sequence() {
        let text = r#"{"triangles":[[0,1,2]],"frames":[
            {"index":0,"landmarks":[[0,0],[10,0],[0,10]]},
            {"index":1,"landmarks":[[1,0],[11,0],[1,10]]}]}"#;
        let seq = LandmarkSequence::from_json(text).unwrap();
        assert_eq!(seq.meshes.len(), 2);
        assert_eq!(seq.meshes[1].landmarks().len(), 3);
        assert_eq!(seq.meshes[1].landmarks()[0], Point2::new(1.0, 0.0));
        assert_eq!(seq.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn landmark_sequence_errors() {
        let gap = r#"{"triangles":[[0,1,2]],"frames":[
            {"index":0,"landmarks":[[0,0],[10,0],[0,10]]},
            {"index":2,"landmarks":[[0,0],[10,0],[0,10]]}]}"#;
        let err = LandmarkSequence::from_json(gap).unwrap_err();
        assert_eq!(err.to_string(), "missing frame index 1");

        let nan = r#"{"triangles":[[0,1,2]],"frames":[
            {"index":0,"landmarks":[[0,0],[NaN,0],[0,10]]}]}"#;
        let err = LandmarkSequence::from_json(nan).unwrap_err();
        assert!(err.to_string().contains("non-finite coordinate"), "{err}");

        let count = r#"{"triangles":[[0,1,2]],"frames":[
            {"index":0,"landmarks":[[0,0],[10,0],[0,10]]},
            {"index":1,"landmarks":[[0,0],[10,0]]}]}"#;
        assert!(matches!(
            LandmarkSequence::from_json(count),
            Err(MeshError::LandmarkCountMismatch { frame: 1, .. })
        ));

        let dup = r#"{"triangles":[[0,1,2]],"frames":[
            {"index":0,"landmarks":[[0,0],[10,0],[0,10]]},
            {"index":0,"landmarks":[[0,0],[10,0],[0,10]]}]}"#;
        assert!(matches!(
            LandmarkSequence::from_json(dup),
            Err(MeshError::DuplicateFrameIndex(0))
        ));
    }

    #[test]
    fn nan_inside_strings_is_untouched() {
        assert_eq!(normalize_non_finite(r#"{"a":"NaN","b":NaN}"#), r#"{"a":"NaN","b":null}"#);
        assert_eq!(normalize_non_finite("[-Infinity,Infinity]"), "[null,null]");
    }

    #[test]
    fn locate_minimal_model() {
        let m = CanonicalModel::from_json(MINIMAL).unwrap();
        assert_eq!(locate_triangle(&m, Point2::new(10.0 / 3.0, 10.0 / 3.0)), Some(0));
        assert_eq!(locate_triangle(&m, Point2::new(15.0, 15.0)), None);
    }

    #[test]
    fn shared_edge_goes_to_lowest_index() {
        let m = square_model();
        // Edge between triangles 1 and 2 runs from (20,20) to the center.
        assert_eq!(locate_triangle(&m, Point2::new(15.0, 15.0)), Some(1));
        // The center touches all four.
        assert_eq!(locate_triangle(&m, Point2::new(10.0, 10.0)), Some(0));
        assert_eq!(locate_triangle(&m, Point2::new(10.0, 18.0)), Some(2));
    }

    #[test]
    fn raster_agrees_with_locate() {
        let m = square_model();
        let r = TriangleRaster::new(&m);
        for y in 0..32 {
            for x in 0..32 {
                let p = Point2::new(x as f64, y as f64);
                assert_eq!(r.label(x, y), locate_triangle(&m, p), "({x},{y})");
            }
        }
        assert_eq!(r.covered(), 21 * 21);
    }

    #[test]
    fn frame_validation() {
        assert!(Frame::new(2, 1, vec![0.0, 1.0]).is_ok());
        assert!(Frame::new(0, 1, vec![]).is_err());
        assert!(Frame::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(Frame::new(2, 1, vec![0.0, f64::NAN]).is_err());
        let a = Frame::new(2, 1, vec![0.0, 1.0]).unwrap();
        let b = Frame::new(1, 2, vec![0.0, 1.0]).unwrap();
        assert!(FrameSequence::new(vec![a.clone(), a.clone()]).is_ok());
        assert!(FrameSequence::new(vec![a, b]).is_err());
    }

    #[test]
    fn degenerate_frame_triangles_are_reported() {
        let mesh = FaceMesh::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(4.0, 0.0),
                Point2::new(8.0, 0.0),
                Point2::new(0.0, 4.0),
            ],
            vec![[0, 1, 3], [0, 1, 2]],
        )
        .unwrap();
        assert_eq!(mesh.degenerate_triangles(), vec![1]);
        assert!(FaceMesh::new(vec![Point2::new(0.0, 0.0)], vec![[0, 1, 2]]).is_err());
    }
}
