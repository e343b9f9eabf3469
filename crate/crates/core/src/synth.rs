//! Synthetic face-like sequences with known motion.
//!
//! A smooth random texture is laid under a 5×5 landmark grid. Three kinds of
//! sequence are produced:
//!
//! * `static`: every frame identical.
//! * `rigid`: texture and mesh move together under one global affine per
//!   frame (3 px/frame translation plus a slow rotation). The canonical
//!   frames are motion-free.
//! * `deform`: the skin under one interior landmark is pushed by up to
//!   `displacement` px while the reported mesh stays put, so motion is
//!   confined to the triangles around that landmark.
//!
//! Frames are quantized to 8 bits so an in-memory sequence matches the one
//! written to disk exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::facemesh::{CanonicalModel, FaceMesh, Frame, LandmarkSequence, Triangle};
use crate::geometry::{triangle_contains, Point2};
use crate::grid::Grid;
use crate::imageio::{frame_to_gray, write_gray_png, ImageIoError};
use crate::par;
use crate::warp::{apply_affine, solve_affine, TriangleAffine};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageIoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Static,
    Rigid,
    Deform,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 3] = [SequenceKind::Static, SequenceKind::Rigid, SequenceKind::Deform];

    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Static => "static",
            SequenceKind::Rigid => "rigid",
            SequenceKind::Deform => "deform",
        }
    }
}

impl FromStr for SequenceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(SequenceKind::Static),
            "rigid" => Ok(SequenceKind::Rigid),
            "deform" => Ok(SequenceKind::Deform),
            other => Err(format!("unknown sequence kind `{other}`")),
        }
    }
}

/// Sum of Gaussian blobs on a jittered lattice around a mid-gray level.
#[derive(Debug, Clone)]
pub struct Texture {
    origin: Point2,
    cell: f64,
    cols: usize,
    rows: usize,
    blobs: Vec<Blob>,
    reach: isize,
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    center: Point2,
    inv_two_sigma2: f64,
    amplitude: f64,
}

impl Texture {
    /// Blob spacing in px.
    pub const CELL: f64 = 8.0;
    const SIGMA: (f64, f64) = (2.0, 4.0);
    const AMPLITUDE: f64 = 0.22;

    /// A texture defined over `[x0, x1) × [y0, y1)` (and smoothly fading
    /// to gray beyond it).
    pub fn random(seed: u64, min: Point2, max: Point2) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = Self::CELL;
        let cols = ((max.x - min.x) / cell).ceil().max(1.0) as usize;
        let rows = ((max.y - min.y) / cell).ceil().max(1.0) as usize;
        let mut blobs = Vec::with_capacity(cols * rows);
        for j in 0..rows {
            for i in 0..cols {
                let center = Point2::new(
                    min.x + (i as f64 + rng.gen::<f64>()) * cell,
                    min.y + (j as f64 + rng.gen::<f64>()) * cell,
                );
                let sigma = rng.gen_range(Self::SIGMA.0..Self::SIGMA.1);
                let amplitude = rng.gen_range(-Self::AMPLITUDE..Self::AMPLITUDE);
                blobs.push(Blob {
                    center,
                    inv_two_sigma2: 1.0 / (2.0 * sigma * sigma),
                    amplitude,
                });
            }
        }
        let reach = (4.0 * Self::SIGMA.1 / cell).ceil() as isize + 1;
        Self {
            origin: min,
            cell,
            cols,
            rows,
            blobs,
            reach,
        }
    }

    pub fn eval(&self, p: Point2) -> f64 {
        let ci = ((p.x - self.origin.x) / self.cell).floor() as isize;
        let cj = ((p.y - self.origin.y) / self.cell).floor() as isize;
        let mut v = 0.5;
        for j in (cj - self.reach).max(0)..=(cj + self.reach).min(self.rows as isize - 1) {
            for i in (ci - self.reach).max(0)..=(ci + self.reach).min(self.cols as isize - 1) {
                let b = &self.blobs[j as usize * self.cols + i as usize];
                let r2 = (p - b.center).dot(p - b.center);
                v += b.amplitude * (-r2 * b.inv_two_sigma2).exp();
            }
        }
        v.clamp(0.0, 1.0)
    }

    /// Renders the texture at `(x - shift.x, y - shift.y)`, i.e. the
    /// texture translated by `shift`.
    pub fn render(&self, width: usize, height: usize, shift: Point2) -> Grid {
        let mut data = vec![0.0; width * height];
        par::for_each_row(&mut data, width, |y, row| {
            for (x, v) in row.iter_mut().enumerate() {
                *v = self.eval(Point2::new(x as f64 - shift.x, y as f64 - shift.y));
            }
        });
        Grid::new(width, height, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub kind: SequenceKind,
    pub frames: usize,
    pub seed: u64,
    pub frame_size: usize,
    /// Rigid translation per frame, px.
    pub rigid_step: f64,
    /// Rigid rotation per frame, degrees.
    pub rigid_rotation_deg: f64,
    /// Final landmark push for `deform`, px.
    pub displacement: f64,
}

impl SynthParams {
    pub fn new(kind: SequenceKind) -> Self {
        Self {
            kind,
            frames: 5,
            seed: 7,
            frame_size: 256,
            rigid_step: 3.0,
            rigid_rotation_deg: 0.5,
            displacement: 2.0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.frames < 1 {
            return Err(SynthError::InvalidParams("need at least one frame".into()));
        }
        if self.frame_size < 224 {
            return Err(SynthError::InvalidParams("frame size must be at least 224".into()));
        }
        Ok(())
    }
}

/// Canonical canvas side and landmark lattice used for every synthetic
/// sequence.
pub const CANVAS: u32 = 128;
pub const GRID_SIDE: usize = 5;
const GRID_ORIGIN: f64 = 8.0;
const GRID_SPACING: f64 = 28.0;
/// Frame placement of the canonical grid in the neutral frame.
const FRAME_SCALE: f64 = 1.25;
/// Landmark pushed in `deform` sequences (grid centre).
pub const DEFORM_LANDMARK: usize = 12;
/// Direction of the deform push (normalized on use).
const DEFORM_DIRECTION: Point2 = Point2::new(1.0, 0.5);

fn grid_model() -> CanonicalModel {
    let mut landmarks = Vec::new();
    for j in 0..GRID_SIDE {
        for i in 0..GRID_SIDE {
            landmarks.push(Point2::new(
                GRID_ORIGIN + GRID_SPACING * i as f64,
                GRID_ORIGIN + GRID_SPACING * j as f64,
            ));
        }
    }
    let mut triangles: Vec<Triangle> = Vec::new();
    for j in 0..GRID_SIDE - 1 {
        for i in 0..GRID_SIDE - 1 {
            let a = j * GRID_SIDE + i;
            let b = a + 1;
            let c = a + GRID_SIDE + 1;
            let d = a + GRID_SIDE;
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    CanonicalModel::new(CANVAS, CANVAS, landmarks, triangles).expect("grid model is valid")
}

/// Per-frame global affine of a rigid sequence.
fn rigid_affine(params: &SynthParams, i: usize, center: Point2) -> TriangleAffine {
    let t = i as f64;
    let (s, c) = (params.rigid_rotation_deg * t).to_radians().sin_cos();
    let dir = Point2::new(30f64.to_radians().cos(), 30f64.to_radians().sin());
    let shift = dir * (params.rigid_step * t);
    // Rotate about `center`, then translate.
    let m3 = center.x - c * center.x + s * center.y + shift.x;
    let m6 = center.y - s * center.x - c * center.y + shift.y;
    TriangleAffine::new([c, -s, m3, s, c, m6], 0).expect("rotation is invertible")
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundTruth {
    pub kind: SequenceKind,
    pub frames: usize,
    pub frame_size: usize,
    pub seed: u64,
    /// Global frame affine `[m1..m6]` per frame (identity unless rigid).
    pub frame_affines: Vec<[f64; 6]>,
    /// Landmark whose skin is pushed, for `deform`.
    pub moved_landmark: Option<usize>,
    /// Push of that landmark per frame, frame px.
    pub landmark_displacements: Vec<[f64; 2]>,
    /// Triangles containing the moved landmark.
    pub adjacent_triangles: Vec<usize>,
    /// Expected canonical motion everywhere outside `adjacent_triangles`.
    pub canonical_motion_outside: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub frames: Vec<Frame>,
    pub landmarks: LandmarkSequence,
    pub model: CanonicalModel,
    pub truth: GroundTruth,
}

fn quantized(grid: Grid) -> Frame {
    let (w, h) = grid.dims();
    let data = grid
        .into_data()
        .into_iter()
        .map(|v| (v * 255.0).round() / 255.0)
        .collect();
    Frame::new(w, h, data).expect("texture values are in [0, 1]")
}

fn render_frame(size: usize, f: impl Fn(Point2) -> f64 + Sync) -> Frame {
    let mut data = vec![0.0; size * size];
    par::for_each_row(&mut data, size, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = f(Point2::new(x as f64, y as f64));
        }
    });
    quantized(Grid::new(size, size, data))
}

pub fn generate(params: &SynthParams) -> Result<SyntheticSequence, SynthError> {
    params.validate()?;
    let size = params.frame_size;
    let model = grid_model();
    let offset = (size as f64 - FRAME_SCALE * CANVAS as f64) / 2.0;
    let neutral: Vec<Point2> = model
        .landmarks()
        .iter()
        .map(|&p| Point2::new(offset, offset) + p * FRAME_SCALE)
        .collect();
    let margin = 64.0;
    let texture = Texture::random(
        params.seed,
        Point2::new(-margin, -margin),
        Point2::new(size as f64 + margin, size as f64 + margin),
    );
    let triangles = model.triangles().to_vec();
    let adjacent: Vec<usize> = triangles
        .iter()
        .enumerate()
        .filter(|(_, t)| t.contains(&DEFORM_LANDMARK))
        .map(|(k, _)| k)
        .collect();

    let mut frames = Vec::with_capacity(params.frames);
    let mut meshes = Vec::with_capacity(params.frames);
    let mut frame_affines = Vec::with_capacity(params.frames);
    let mut pushes = Vec::with_capacity(params.frames);
    let center = Point2::new(size as f64 / 2.0, size as f64 / 2.0);

    for i in 0..params.frames {
        match params.kind {
            SequenceKind::Static => {
                frames.push(render_frame(size, |p| texture.eval(p)));
                meshes.push(neutral.clone());
                frame_affines.push(TriangleAffine::identity().params());
                pushes.push([0.0, 0.0]);
            }
            SequenceKind::Rigid => {
                let a = rigid_affine(params, i, center);
                let inv = crate::warp::invert_affine(&a).expect("rigid map inverts");
                frames.push(render_frame(size, |p| texture.eval(apply_affine(&inv, p))));
                meshes.push(neutral.iter().map(|&p| apply_affine(&a, p)).collect());
                frame_affines.push(a.params());
                pushes.push([0.0, 0.0]);
            }
            SequenceKind::Deform => {
                let frac = if params.frames > 1 {
                    i as f64 / (params.frames - 1) as f64
                } else {
                    0.0
                };
                let dir = DEFORM_DIRECTION * (1.0 / DEFORM_DIRECTION.norm());
                let push = dir * (params.displacement * frac);
                let mut moved = neutral.clone();
                moved[DEFORM_LANDMARK] = moved[DEFORM_LANDMARK] + push;
                // Skin follows the moved mesh: sample the texture through the
                // piecewise-affine map from the moved mesh back to neutral.
                let back: Vec<([Point2; 3], TriangleAffine)> = adjacent
                    .iter()
                    .map(|&k| {
                        let t = triangles[k];
                        let src = [moved[t[0]], moved[t[1]], moved[t[2]]];
                        let dst = [neutral[t[0]], neutral[t[1]], neutral[t[2]]];
                        (src, solve_affine(src, dst).expect("deformed triangle is valid"))
                    })
                    .collect();
                frames.push(render_frame(size, |p| {
                    let q = back
                        .iter()
                        .find(|(tri, _)| triangle_contains(*tri, p))
                        .map_or(p, |(_, a)| apply_affine(a, p));
                    texture.eval(q)
                }));
                meshes.push(neutral.clone());
                frame_affines.push(TriangleAffine::identity().params());
                pushes.push([push.x, push.y]);
            }
        }
    }

    let meshes = meshes
        .into_iter()
        .map(|pts| FaceMesh::new(pts, triangles.clone()).expect("synthetic mesh is valid"))
        .collect();
    let deform = params.kind == SequenceKind::Deform;
    Ok(SyntheticSequence {
        frames,
        landmarks: LandmarkSequence {
            triangles: triangles.clone(),
            meshes,
        },
        model,
        truth: GroundTruth {
            kind: params.kind,
            frames: params.frames,
            frame_size: size,
            seed: params.seed,
            frame_affines,
            moved_landmark: deform.then_some(DEFORM_LANDMARK),
            landmark_displacements: pushes,
            adjacent_triangles: if deform { adjacent } else { Vec::new() },
            canonical_motion_outside: 0.0,
        },
    })
}

/// Files written by [`SyntheticSequence::write_to`].
#[derive(Debug, Clone)]
pub struct SequencePaths {
    pub frames_dir: PathBuf,
    pub landmarks: PathBuf,
    pub canonical: PathBuf,
    pub truth: PathBuf,
}

impl SyntheticSequence {
    /// Writes `frames/frame_%06d.png`, `landmarks.json`, `canonical.json`
    /// and the `truth.json` sidecar under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<SequencePaths, SynthError> {
        let paths = SequencePaths {
            frames_dir: dir.join("frames"),
            landmarks: dir.join("landmarks.json"),
            canonical: dir.join("canonical.json"),
            truth: dir.join("truth.json"),
        };
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SynthError::Io { path, source }
        };
        fs::create_dir_all(&paths.frames_dir).map_err(io(&paths.frames_dir))?;
        for (i, frame) in self.frames.iter().enumerate() {
            let path = paths.frames_dir.join(format!("frame_{i:06}.png"));
            write_gray_png(&path, &frame_to_gray(frame))?;
        }
        fs::write(&paths.landmarks, self.landmarks.to_json()).map_err(io(&paths.landmarks))?;
        fs::write(&paths.canonical, self.model.to_json()).map_err(io(&paths.canonical))?;
        let truth = serde_json::to_string_pretty(&self.truth).expect("truth serializes");
        fs::write(&paths.truth, truth).map_err(io(&paths.truth))?;
        Ok(paths)
    }
}
