//! Per-triangle affine maps between a frame's face mesh and the canonical
//! model, piecewise-affine warping onto the canonical canvas, and the
//! inverse mapping of canonical points and vectors back to the frame.

use thiserror::Error;

use crate::facemesh::{locate_triangle, CanonicalModel, FaceMesh, Frame, MeshError, TriangleRaster};
use crate::geometry::{signed_area, Point2};
use crate::grid::Grid;
use crate::par;

/// Minimum |area| (px²) of a source triangle for [`solve_affine`].
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;
/// Minimum |det| of an affine's linear part.
pub const MIN_DETERMINANT: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum WarpError {
    #[error("singular system: source triangle area {area:e} px² is degenerate")]
    SingularSystem { area: f64 },
    #[error("near-singular affine map (det {det:e})")]
    NearSingular { det: f64 },
    #[error("point ({x}, {y}) lies outside the canonical mesh")]
    OutOfMesh { x: f64, y: f64 },
    #[error("triangle {0} is degenerate in this frame")]
    DegenerateTriangle(usize),
    #[error("every triangle of the frame mesh is degenerate")]
    AllDegenerate,
    #[error("canonical frame: {0}")]
    InvalidCanonicalFrame(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// A 2D affine map `(x, y) -> (m1 x + m2 y + m3, m4 x + m5 y + m6)` tied to
/// one triangle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleAffine {
    m: [f64; 6],
    k: usize,
}

impl TriangleAffine {
    pub fn new(m: [f64; 6], k: usize) -> Result<Self, WarpError> {
        let det = m[0] * m[4] - m[1] * m[3];
        if !(det.abs() > MIN_DETERMINANT) || m.iter().any(|v| !v.is_finite()) {
            return Err(WarpError::NearSingular { det });
        }
        Ok(Self { m, k })
    }

    pub fn identity() -> Self {
        Self {
            m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            k: 0,
        }
    }

    pub fn params(&self) -> [f64; 6] {
        self.m
    }

    pub fn triangle(&self) -> usize {
        self.k
    }

    pub fn with_triangle(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn determinant(&self) -> f64 {
        self.m[0] * self.m[4] - self.m[1] * self.m[3]
    }

    #[inline]
    pub fn apply(&self, p: Point2) -> Point2 {
        apply_affine(self, p)
    }

    /// Applies only the linear part.
    #[inline]
    pub fn apply_vector(&self, v: Point2) -> Point2 {
        let m = &self.m;
        Point2::new(m[0] * v.x + m[1] * v.y, m[3] * v.x + m[4] * v.y)
    }
}

/// Solves the six parameters of the affine map taking `src[j]` to `dst[j]`.
///
/// The stacked vertex equations split into two 3×3 systems sharing the
/// matrix `[x_j y_j 1]`; both are solved relative to the first vertex,
/// which keeps the residual small for triangles far from the origin.
pub fn solve_affine(src: [Point2; 3], dst: [Point2; 3]) -> Result<TriangleAffine, WarpError> {
    let area = signed_area(src[0], src[1], src[2]);
    if !(area.abs() > MIN_TRIANGLE_AREA) {
        return Err(WarpError::SingularSystem { area });
    }
    let e1 = src[1] - src[0];
    let e2 = src[2] - src[0];
    let f1 = dst[1] - dst[0];
    let f2 = dst[2] - dst[0];
    let det = e1.cross(e2);
    // S = [e1 e2], S^-1 = [[e2.y, -e2.x], [-e1.y, e1.x]] / det, L = [f1 f2] S^-1
    let a = (f1.x * e2.y - f2.x * e1.y) / det;
    let b = (f2.x * e1.x - f1.x * e2.x) / det;
    let d = (f1.y * e2.y - f2.y * e1.y) / det;
    let e = (f2.y * e1.x - f1.y * e2.x) / det;
    let c = dst[0].x - (a * src[0].x + b * src[0].y);
    let f = dst[0].y - (d * src[0].x + e * src[0].y);
    TriangleAffine::new([a, b, c, d, e, f], 0)
}

pub fn invert_affine(a: &TriangleAffine) -> Result<TriangleAffine, WarpError> {
    let [m1, m2, m3, m4, m5, m6] = a.m;
    let det = m1 * m5 - m2 * m4;
    if !(det.abs() > MIN_DETERMINANT) {
        return Err(WarpError::NearSingular { det });
    }
    let i1 = m5 / det;
    let i2 = -m2 / det;
    let i4 = -m4 / det;
    let i5 = m1 / det;
    let i3 = -(i1 * m3 + i2 * m6);
    let i6 = -(i4 * m3 + i5 * m6);
    TriangleAffine::new([i1, i2, i3, i4, i5, i6], a.k)
}

#[inline]
pub fn apply_affine(a: &TriangleAffine, p: Point2) -> Point2 {
    let m = &a.m;
    Point2::new(
        m[0] * p.x + m[1] * p.y + m[2],
        m[3] * p.x + m[4] * p.y + m[5],
    )
}

/// A frame rendered onto the canonical canvas. Pixels outside every
/// triangle are uncovered and hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFrame {
    intensity: Grid,
    coverage: Vec<bool>,
}

impl CanonicalFrame {
    pub fn new(intensity: Grid, coverage: Vec<bool>) -> Result<Self, WarpError> {
        let (w, h) = intensity.dims();
        if coverage.len() != w * h {
            return Err(WarpError::InvalidCanonicalFrame(format!(
                "coverage has {} entries for a {w}×{h} canvas",
                coverage.len()
            )));
        }
        for (i, (&v, &c)) in intensity.data().iter().zip(&coverage).enumerate() {
            let ok = if c {
                v.is_finite() && (0.0..=1.0).contains(&v)
            } else {
                v == 0.0
            };
            if !ok {
                return Err(WarpError::InvalidCanonicalFrame(format!(
                    "pixel ({}, {}) has intensity {v} with coverage {c}",
                    i % w,
                    i / w
                )));
            }
        }
        Ok(Self {
            intensity,
            coverage,
        })
    }

    /// Treats every pixel of `intensity` as covered.
    pub fn fully_covered(intensity: Grid) -> Result<Self, WarpError> {
        let n = intensity.data().len();
        Self::new(intensity, vec![true; n])
    }

    pub fn from_frame(frame: &Frame) -> Self {
        let grid = frame.grid().clone();
        let n = grid.data().len();
        Self {
            intensity: grid,
            coverage: vec![true; n],
        }
    }

    pub fn intensity(&self) -> &Grid {
        &self.intensity
    }

    pub fn coverage(&self) -> &[bool] {
        &self.coverage
    }

    pub fn width(&self) -> usize {
        self.intensity.width()
    }

    pub fn height(&self) -> usize {
        self.intensity.height()
    }

    pub fn is_covered(&self, x: usize, y: usize) -> bool {
        self.coverage[y * self.intensity.width() + x]
    }
}

/// The affine maps of every triangle for one (frame mesh, canonical model)
/// pair. `forward` maps frame to canonical coordinates. Triangles that are
/// degenerate in the frame have no maps.
#[derive(Debug, Clone)]
pub struct MeshEmbedding {
    forward: Vec<Option<TriangleAffine>>,
    inverse: Vec<Option<TriangleAffine>>,
    degenerate: Vec<usize>,
}

impl MeshEmbedding {
    pub fn new(mesh: &FaceMesh, model: &CanonicalModel) -> Result<Self, WarpError> {
        model.check_mesh(mesh)?;
        let k_count = model.triangles().len();
        let mut forward = Vec::with_capacity(k_count);
        let mut inverse = Vec::with_capacity(k_count);
        let mut degenerate = Vec::new();
        for k in 0..k_count {
            let maps = solve_affine(mesh.triangle(k), model.triangle(k))
                .and_then(|a| Ok((a.with_triangle(k), invert_affine(&a.with_triangle(k))?)));
            match maps {
                Ok((f, i)) => {
                    forward.push(Some(f));
                    inverse.push(Some(i));
                }
                Err(_) => {
                    forward.push(None);
                    inverse.push(None);
                    degenerate.push(k);
                }
            }
        }
        if degenerate.len() == k_count {
            return Err(WarpError::AllDegenerate);
        }
        Ok(Self {
            forward,
            inverse,
            degenerate,
        })
    }

    pub fn forward(&self, k: usize) -> Option<&TriangleAffine> {
        self.forward[k].as_ref()
    }

    pub fn inverse(&self, k: usize) -> Option<&TriangleAffine> {
        self.inverse[k].as_ref()
    }

    /// Triangles skipped because they collapsed in the frame.
    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    /// Triangle used for canonical point `p`: the lowest-index containing
    /// triangle that is usable in this frame.
    fn usable_triangle(&self, model: &CanonicalModel, p: Point2) -> Option<usize> {
        match locate_triangle(model, p) {
            Some(k) if self.forward[k].is_some() => Some(k),
            Some(_) => (0..model.triangles().len()).find(|&k| {
                self.forward[k].is_some()
                    && crate::geometry::triangle_contains(model.triangle(k), p)
            }),
            None => None,
        }
    }

    /// Destination-driven warp: each covered canonical pixel samples the
    /// frame (bilinear, edge-clamped) at its preimage.
    pub fn warp(&self, frame: &Frame, model: &CanonicalModel, raster: &TriangleRaster) -> CanonicalFrame {
        let (w, h) = model.canvas_dims();
        debug_assert_eq!((raster.width(), raster.height()), (w, h));
        let mut cells: Vec<(f64, bool)> = vec![(0.0, false); w * h];
        let src = frame.grid();
        par::for_each_row(&mut cells, w, |y, row| {
            for (x, cell) in row.iter_mut().enumerate() {
                let Some(label) = raster.label(x, y) else {
                    continue;
                };
                let p = Point2::new(x as f64, y as f64);
                let k = if self.inverse[label].is_some() {
                    Some(label)
                } else {
                    self.usable_triangle(model, p)
                };
                if let Some(inv) = k.and_then(|k| self.inverse[k].as_ref()) {
                    let q = inv.apply(p);
                    *cell = (src.sample_clamped(q.x, q.y), true);
                }
            }
        });
        let (data, coverage): (Vec<f64>, Vec<bool>) = cells.into_iter().unzip();
        CanonicalFrame {
            intensity: Grid::new(w, h, data),
            coverage,
        }
    }

    /// Maps a canonical base point and displacement back into frame
    /// coordinates using the base point's triangle for both endpoints.
    pub fn map_vector(
        &self,
        model: &CanonicalModel,
        base: Point2,
        disp: Point2,
    ) -> Result<(Point2, Point2), WarpError> {
        let k = match locate_triangle(model, base) {
            None => return Err(WarpError::OutOfMesh { x: base.x, y: base.y }),
            Some(k) => self
                .usable_triangle(model, base)
                .ok_or(WarpError::DegenerateTriangle(k))?,
        };
        let inv = self.inverse[k].as_ref().expect("usable triangle has a map");
        let frame_base = inv.apply(base);
        let frame_tip = inv.apply(base + disp);
        Ok((frame_base, frame_tip - frame_base))
    }
}

pub fn warp_to_canonical(
    frame: &Frame,
    mesh: &FaceMesh,
    model: &CanonicalModel,
) -> Result<CanonicalFrame, WarpError> {
    let embedding = MeshEmbedding::new(mesh, model)?;
    Ok(embedding.warp(frame, model, &TriangleRaster::new(model)))
}

pub fn map_vector_to_original(
    base: Point2,
    disp: Point2,
    model: &CanonicalModel,
    mesh: &FaceMesh,
) -> Result<(Point2, Point2), WarpError> {
    MeshEmbedding::new(mesh, model)?.map_vector(model, base, disp)
}
