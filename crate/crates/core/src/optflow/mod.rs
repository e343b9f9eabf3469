//! Lucas-Kanade optical flow on the canonical canvas.
//!
//! Each site solves the 2×2 normal equations built from the nine gradient
//! samples of its 3×3 window. [`compute_flow`] wraps the per-site solve in a
//! coarse-to-fine pyramid with a few refinement rounds per level; with
//! `pyramid_levels = 1` and `iterations_per_level = 1` it is the plain
//! single-shot solve.

mod io;

pub use io::{read_flow, write_flow, write_flow_csv, FLOW_MAGIC};

use thiserror::Error;

use crate::geometry::Point2;
use crate::grid::Grid;
use crate::par;
use crate::warp::CanonicalFrame;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("grid is {width}×{height}; gradients need at least 3×3")]
    GridTooSmall { width: usize, height: usize },
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimMismatch((usize, usize), (usize, usize)),
    #[error("site ({x}, {y}) is too close to the border for a 3×3 window")]
    BorderSite { x: usize, y: usize },
    #[error("site step must be at least 1")]
    InvalidStep,
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite gradient value")]
    NonFinite,
    #[error("flow file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    ix: Grid,
    iy: Grid,
    it: Grid,
}

impl GradientField {
    pub fn new(ix: Grid, iy: Grid, it: Grid) -> Result<Self, FlowError> {
        if ix.dims() != iy.dims() {
            return Err(FlowError::DimMismatch(ix.dims(), iy.dims()));
        }
        if ix.dims() != it.dims() {
            return Err(FlowError::DimMismatch(ix.dims(), it.dims()));
        }
        let finite = |g: &Grid| g.data().iter().all(|v| v.is_finite());
        if !(finite(&ix) && finite(&iy) && finite(&it)) {
            return Err(FlowError::NonFinite);
        }
        Ok(Self { ix, iy, it })
    }

    /// Spatial gradients of `reference` and the temporal difference to
    /// `current`.
    pub fn from_frames(reference: &Grid, current: &Grid) -> Result<Self, FlowError> {
        let (ix, iy) = spatial_gradients(reference)?;
        let it = temporal_gradient(reference, current)?;
        Self::new(ix, iy, it)
    }

    pub fn ix(&self) -> &Grid {
        &self.ix
    }

    pub fn iy(&self) -> &Grid {
        &self.iy
    }

    pub fn it(&self) -> &Grid {
        &self.it
    }
}

/// Central differences inside, one-sided differences on the border.
pub fn spatial_gradients(grid: &Grid) -> Result<(Grid, Grid), FlowError> {
    let (w, h) = grid.dims();
    if w < 3 || h < 3 {
        return Err(FlowError::GridTooSmall {
            width: w,
            height: h,
        });
    }
    Ok(gradients_unchecked(grid))
}

fn gradients_unchecked(grid: &Grid) -> (Grid, Grid) {
    let (w, h) = grid.dims();
    let ix = Grid::from_fn(w, h, |x, y| {
        if x == 0 {
            grid.get(1, y) - grid.get(0, y)
        } else if x == w - 1 {
            grid.get(x, y) - grid.get(x - 1, y)
        } else {
            0.5 * (grid.get(x + 1, y) - grid.get(x - 1, y))
        }
    });
    let iy = Grid::from_fn(w, h, |x, y| {
        if y == 0 {
            grid.get(x, 1) - grid.get(x, 0)
        } else if y == h - 1 {
            grid.get(x, y) - grid.get(x, y - 1)
        } else {
            0.5 * (grid.get(x, y + 1) - grid.get(x, y - 1))
        }
    });
    (ix, iy)
}

pub fn temporal_gradient(reference: &Grid, current: &Grid) -> Result<Grid, FlowError> {
    if reference.dims() != current.dims() {
        return Err(FlowError::DimMismatch(reference.dims(), current.dims()));
    }
    let (w, h) = reference.dims();
    let data = current
        .data()
        .iter()
        .zip(reference.data())
        .map(|(c, r)| c - r)
        .collect();
    Ok(Grid::new(w, h, data))
}

/// Result of one 3×3 solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkEstimate {
    pub d: Point2,
    pub valid: bool,
    /// Smaller eigenvalue of `AᵀA`.
    pub min_eig: f64,
}

/// The 2×2 structure tensor `AᵀA` of one window, stored as `[Σix², Σixiy, Σiy²]`.
#[derive(Debug, Clone, Copy)]
struct Structure {
    xx: f64,
    xy: f64,
    yy: f64,
}

impl Structure {
    fn from_window(ix: &[f64; 9], iy: &[f64; 9]) -> Self {
        let mut s = Structure {
            xx: 0.0,
            xy: 0.0,
            yy: 0.0,
        };
        for j in 0..9 {
            s.xx += ix[j] * ix[j];
            s.xy += ix[j] * iy[j];
            s.yy += iy[j] * iy[j];
        }
        s
    }

    fn min_eig(&self) -> f64 {
        let half_trace = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        half_trace - half_diff.hypot(self.xy)
    }

    /// `G⁻¹ (−Σ ix it, −Σ iy it)` by the explicit 2×2 inverse.
    fn solve(&self, ix: &[f64; 9], iy: &[f64; 9], it: &[f64; 9]) -> Point2 {
        let mut bx = 0.0;
        let mut by = 0.0;
        for j in 0..9 {
            bx -= ix[j] * it[j];
            by -= iy[j] * it[j];
        }
        let det = self.xx * self.yy - self.xy * self.xy;
        Point2::new(
            (self.yy * bx - self.xy * by) / det,
            (self.xx * by - self.xy * bx) / det,
        )
    }
}

const WINDOW: [(isize, isize); 9] = [
    (0, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[inline]
fn gather(grid: &Grid, x: usize, y: usize) -> [f64; 9] {
    let mut out = [0.0; 9];
    for (o, (dx, dy)) in out.iter_mut().zip(WINDOW) {
        *o = grid.get((x as isize + dx) as usize, (y as isize + dy) as usize);
    }
    out
}

/// Solves `AᵀA d = Aᵀb` over the 3×3 window centred on `site`. The site is
/// valid when the smaller eigenvalue of `AᵀA` reaches `tau_eig`; invalid
/// sites report `d = (0, 0)`.
pub fn lk_solve_at(
    grads: &GradientField,
    site: (usize, usize),
    tau_eig: f64,
) -> Result<LkEstimate, FlowError> {
    let (x, y) = site;
    let (w, h) = grads.ix.dims();
    if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
        return Err(FlowError::BorderSite { x, y });
    }
    let ix = gather(&grads.ix, x, y);
    let iy = gather(&grads.iy, x, y);
    let it = gather(&grads.it, x, y);
    let g = Structure::from_window(&ix, &iy);
    let min_eig = g.min_eig();
    if min_eig >= tau_eig {
        Ok(LkEstimate {
            d: g.solve(&ix, &iy, &it),
            valid: true,
            min_eig,
        })
    } else {
        Ok(LkEstimate {
            d: Point2::default(),
            valid: false,
            min_eig,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    /// Minimum accepted smaller eigenvalue of `AᵀA` (intensities in [0, 1]).
    pub tau_eig: f64,
    pub pyramid_levels: usize,
    pub iterations_per_level: usize,
    /// Site stride on the finest level; 1 is dense.
    pub step: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            tau_eig: 1e-4,
            pyramid_levels: 3,
            iterations_per_level: 3,
            step: 1,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.tau_eig > 0.0) {
            return Err(FlowError::InvalidParams("tau_eig must be positive".into()));
        }
        if self.pyramid_levels < 1 {
            return Err(FlowError::InvalidParams(
                "pyramid_levels must be at least 1".into(),
            ));
        }
        if self.iterations_per_level < 1 {
            return Err(FlowError::InvalidParams(
                "iterations_per_level must be at least 1".into(),
            ));
        }
        if self.step < 1 {
            return Err(FlowError::InvalidStep);
        }
        Ok(())
    }
}

/// Displacements on a lattice of canonical sites `(i·step, j·step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    step: usize,
    d: Vec<Point2>,
    valid: Vec<bool>,
    min_eig: Vec<f64>,
}

impl FlowField {
    /// Builds a field from per-site records; invalid sites are forced to zero
    /// displacement.
    pub fn new(
        width: usize,
        height: usize,
        step: usize,
        mut d: Vec<Point2>,
        valid: Vec<bool>,
        min_eig: Vec<f64>,
    ) -> Result<Self, FlowError> {
        if step < 1 {
            return Err(FlowError::InvalidStep);
        }
        let n = sites_along(width, step) * sites_along(height, step);
        if d.len() != n || valid.len() != n || min_eig.len() != n {
            return Err(FlowError::Format(format!(
                "expected {n} sites for {width}×{height} at step {step}"
            )));
        }
        for (v, d) in valid.iter().zip(d.iter_mut()) {
            if !v {
                *d = Point2::default();
            }
        }
        Ok(Self {
            width,
            height,
            step,
            d,
            valid,
            min_eig,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn cols(&self) -> usize {
        sites_along(self.width, self.step)
    }

    pub fn rows(&self) -> usize {
        sites_along(self.height, self.step)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Canonical pixel coordinates of site `(i, j)`.
    pub fn site_position(&self, i: usize, j: usize) -> (usize, usize) {
        (i * self.step, j * self.step)
    }

    fn index(&self, i: usize, j: usize) -> usize {
        j * self.cols() + i
    }

    pub fn displacement(&self, i: usize, j: usize) -> Point2 {
        self.d[self.index(i, j)]
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[self.index(i, j)]
    }

    pub fn min_eig(&self, i: usize, j: usize) -> f64 {
        self.min_eig[self.index(i, j)]
    }

    /// `(u, v, d, valid, min_eig)` for every site, row-major.
    pub fn sites(&self) -> impl Iterator<Item = (usize, usize, Point2, bool, f64)> + '_ {
        let cols = self.cols();
        (0..self.d.len()).map(move |n| {
            let (u, v) = self.site_position(n % cols, n / cols);
            (u, v, self.d[n], self.valid[n], self.min_eig[n])
        })
    }

    /// Magnitudes of valid sites in row-major order.
    pub fn valid_magnitudes(&self) -> Vec<f64> {
        self.sites()
            .filter(|s| s.3)
            .map(|s| s.2.norm())
            .collect()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

fn sites_along(len: usize, step: usize) -> usize {
    len.div_ceil(step)
}

struct Level {
    reference: Grid,
    current: Grid,
    ix: Grid,
    iy: Grid,
    /// Pixels covered in both frames.
    mask: Vec<bool>,
}

impl Level {
    fn dims(&self) -> (usize, usize) {
        self.reference.dims()
    }

    /// The 3×3 window lies inside the grid and every pixel its gradients
    /// read (radius 2, clipped to the grid) is covered.
    fn supported(&self, x: usize, y: usize) -> bool {
        let (w, h) = self.dims();
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            return false;
        }
        let (x0, x1) = (x.saturating_sub(2), (x + 2).min(w - 1));
        let (y0, y1) = (y.saturating_sub(2), (y + 2).min(h - 1));
        (y0..=y1).all(|yy| (x0..=x1).all(|xx| self.mask[yy * w + xx]))
    }
}

fn downsample_mask(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let (cw, ch) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(cw * ch);
    for y in 0..ch {
        for x in 0..cw {
            out.push(
                mask[2 * y * w + 2 * x]
                    && mask[2 * y * w + 2 * x + 1]
                    && mask[(2 * y + 1) * w + 2 * x]
                    && mask[(2 * y + 1) * w + 2 * x + 1],
            );
        }
    }
    out
}

/// Smallest side a pyramid level may have.
const MIN_LEVEL_SIDE: usize = 8;

fn build_pyramid(reference: &CanonicalFrame, current: &CanonicalFrame, levels: usize) -> Vec<Level> {
    let mask: Vec<bool> = reference
        .coverage()
        .iter()
        .zip(current.coverage())
        .map(|(a, b)| *a && *b)
        .collect();
    let mut out = Vec::with_capacity(levels);
    let mut r = reference.intensity().clone();
    let mut c = current.intensity().clone();
    let mut m = mask;
    loop {
        let (ix, iy) = gradients_unchecked(&r);
        let (w, h) = r.dims();
        let next_ok = w / 2 >= MIN_LEVEL_SIDE && h / 2 >= MIN_LEVEL_SIDE;
        let (nr, nc, nm) = if out.len() + 1 < levels && next_ok {
            (Some(r.downsample()), Some(c.downsample()), Some(downsample_mask(&m, w, h)))
        } else {
            (None, None, None)
        };
        out.push(Level {
            reference: r,
            current: c,
            ix,
            iy,
            mask: m,
        });
        match (nr, nc, nm) {
            (Some(a), Some(b), Some(d)) => {
                r = a;
                c = b;
                m = d;
            }
            _ => break,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct SiteResult {
    d: Point2,
    valid: bool,
    min_eig: f64,
}

/// Iterative refinement at one site: the structure tensor comes from the
/// reference window, the temporal term from the current frame sampled at
/// the displaced window.
fn refine_site(level: &Level, x: usize, y: usize, init: Point2, params: &FlowParams) -> SiteResult {
    if !level.supported(x, y) {
        return SiteResult {
            d: init,
            valid: false,
            min_eig: 0.0,
        };
    }
    let ix = gather(&level.ix, x, y);
    let iy = gather(&level.iy, x, y);
    let g = Structure::from_window(&ix, &iy);
    let min_eig = g.min_eig();
    if !(min_eig >= params.tau_eig) {
        return SiteResult {
            d: init,
            valid: false,
            min_eig,
        };
    }
    let reference = gather(&level.reference, x, y);
    let mut d = init;
    for _ in 0..params.iterations_per_level {
        let mut it = [0.0; 9];
        for (j, (dx, dy)) in WINDOW.iter().enumerate() {
            let qx = x as f64 + *dx as f64 + d.x;
            let qy = y as f64 + *dy as f64 + d.y;
            it[j] = level.current.sample_clamped(qx, qy) - reference[j];
        }
        let delta = g.solve(&ix, &iy, &it);
        if !delta.is_finite() {
            break;
        }
        d = d + delta;
        if delta.norm() < 1e-9 {
            break;
        }
    }
    SiteResult {
        d,
        valid: d.is_finite(),
        min_eig,
    }
}

/// Coarse-to-fine Lucas-Kanade flow from `reference` to `current`.
///
/// Levels are built by 2×2 box averaging; a coarse pixel is covered only if
/// all four children are. Coarse flow is bilinearly upsampled and doubled
/// to seed the next level. Only the finest level is restricted to the
/// `step` lattice.
pub fn compute_flow(
    reference: &CanonicalFrame,
    current: &CanonicalFrame,
    params: &FlowParams,
) -> Result<FlowField, FlowError> {
    params.validate()?;
    let dims = (reference.width(), reference.height());
    let other = (current.width(), current.height());
    if dims != other {
        return Err(FlowError::DimMismatch(dims, other));
    }
    let (width, height) = dims;
    if width < 3 || height < 3 {
        return Err(FlowError::GridTooSmall { width, height });
    }
    let pyramid = build_pyramid(reference, current, params.pyramid_levels);

    let mut seed: Option<(Grid, Grid)> = None;
    for level in pyramid.iter().skip(1).rev() {
        let (w, h) = level.dims();
        let mut cells = vec![SiteResult::default(); w * h];
        par::for_each_row(&mut cells, w, |y, row| {
            for (x, cell) in row.iter_mut().enumerate() {
                let init = upsampled_seed(seed.as_ref(), x, y);
                *cell = refine_site(level, x, y, init, params);
            }
        });
        let dx = Grid::new(w, h, cells.iter().map(|c| c.d.x).collect());
        let dy = Grid::new(w, h, cells.iter().map(|c| c.d.y).collect());
        seed = Some((dx, dy));
    }

    let finest = &pyramid[0];
    let step = params.step;
    let cols = sites_along(width, step);
    let rows = sites_along(height, step);
    let mut cells = vec![SiteResult::default(); cols * rows];
    par::for_each_row(&mut cells, cols, |j, row| {
        for (i, cell) in row.iter_mut().enumerate() {
            let (x, y) = (i * step, j * step);
            let init = upsampled_seed(seed.as_ref(), x, y);
            *cell = refine_site(finest, x, y, init, params);
        }
    });
    FlowField::new(
        width,
        height,
        step,
        cells.iter().map(|c| c.d).collect(),
        cells.iter().map(|c| c.valid).collect(),
        cells.iter().map(|c| c.min_eig).collect(),
    )
}

/// Flow seed at fine pixel `(x, y)` from the next-coarser level. Coarse
/// pixel `i` covers fine pixels `2i` and `2i + 1`.
fn upsampled_seed(seed: Option<&(Grid, Grid)>, x: usize, y: usize) -> Point2 {
    match seed {
        None => Point2::default(),
        Some((dx, dy)) => {
            let cx = (x as f64 - 0.5) * 0.5;
            let cy = (y as f64 - 0.5) * 0.5;
            Point2::new(2.0 * dx.sample_clamped(cx, cy), 2.0 * dy.sample_clamped(cx, cy))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_of_constant_and_ramp() {
        let c = Grid::filled(8, 8, 0.3);
        let (ix, iy) = spatial_gradients(&c).unwrap();
        assert!(ix.data().iter().chain(iy.data()).all(|&v| v == 0.0));

        let ramp = Grid::from_fn(8, 8, |x, _| x as f64 / 10.0);
        let (ix, iy) = spatial_gradients(&ramp).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert!((ix.get(x, y) - 0.1).abs() < 1e-12);
                assert_eq!(iy.get(x, y), 0.0);
            }
        }
    }

    #[test]
    fn gradients_of_bilinear_field() {
        let g = Grid::from_fn(8, 8, |x, y| (x * y) as f64 / 100.0);
        let (ix, iy) = spatial_gradients(&g).unwrap();
        for y in 1..7 {
            for x in 1..7 {
                assert!((ix.get(x, y) - y as f64 / 100.0).abs() < 1e-12);
                assert!((iy.get(x, y) - x as f64 / 100.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_need_three_by_three() {
        assert!(matches!(
            spatial_gradients(&Grid::filled(2, 5, 0.0)),
            Err(FlowError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn temporal_examples() {
        let r = Grid::from_fn(6, 6, |x, y| (x + y) as f64 / 20.0);
        assert!(temporal_gradient(&r, &r).unwrap().data().iter().all(|&v| v == 0.0));
        let c = Grid::from_fn(6, 6, |x, y| (x + y) as f64 / 20.0 + 0.1);
        assert!(temporal_gradient(&r, &c)
            .unwrap()
            .data()
            .iter()
            .all(|&v| (v - 0.1).abs() < 1e-12));

        let g = 0.05;
        let ramp = Grid::from_fn(10, 4, |x, _| g * x as f64);
        let shifted = Grid::from_fn(10, 4, |x, _| g * (x as f64 - 1.0));
        let it = temporal_gradient(&ramp, &shifted).unwrap();
        assert!(it.data().iter().all(|&v| (v + g).abs() < 1e-12));

        assert!(matches!(
            temporal_gradient(&r, &Grid::filled(5, 6, 0.0)),
            Err(FlowError::DimMismatch(..))
        ));
    }

    #[test]
    fn aperture_cases_are_invalid() {
        let flat = Grid::filled(5, 5, 0.4);
        let grads = GradientField::from_frames(&flat, &flat).unwrap();
        let e = lk_solve_at(&grads, (2, 2), 1e-4).unwrap();
        assert!(!e.valid);
        assert_eq!(e.min_eig, 0.0);
        assert_eq!(e.d, Point2::default());

        let ramp = Grid::from_fn(5, 5, |x, _| 0.1 * x as f64);
        let moved = Grid::from_fn(5, 5, |x, _| 0.1 * x as f64 - 0.05);
        let grads = GradientField::from_frames(&ramp, &moved).unwrap();
        let e = lk_solve_at(&grads, (2, 2), 1e-4).unwrap();
        assert!(!e.valid);
        assert!(e.min_eig.abs() < 1e-15);
    }

    #[test]
    fn border_sites_are_rejected() {
        let g = Grid::filled(5, 5, 0.0);
        let grads = GradientField::from_frames(&g, &g).unwrap();
        assert!(matches!(
            lk_solve_at(&grads, (0, 2), 1e-4),
            Err(FlowError::BorderSite { .. })
        ));
        assert!(matches!(
            lk_solve_at(&grads, (2, 4), 1e-4),
            Err(FlowError::BorderSite { .. })
        ));
    }

    #[test]
    fn quadratic_patch_recovers_known_motion() {
        // I(x, y) = x² + y² scaled; cur = I shifted by (0.1, -0.05) evaluated
        // analytically. The 3×3 least-squares solution is close to the
        // shift for small motion.
        let f = |x: f64, y: f64| 0.01 * ((x - 2.3).powi(2) + 0.7 * (y - 1.6).powi(2)) + 0.1;
        let r = Grid::from_fn(7, 7, |x, y| f(x as f64, y as f64));
        let c = Grid::from_fn(7, 7, |x, y| f(x as f64 - 0.1, y as f64 + 0.05));
        let grads = GradientField::from_frames(&r, &c).unwrap();
        let e = lk_solve_at(&grads, (4, 4), 1e-6).unwrap();
        assert!(e.valid);
        assert!((e.d - Point2::new(0.1, -0.05)).norm() < 0.02, "{:?}", e.d);
    }

    #[test]
    fn params_validation() {
        assert!(FlowParams::default().validate().is_ok());
        let bad = FlowParams {
            step: 0,
            ..FlowParams::default()
        };
        assert!(matches!(bad.validate(), Err(FlowError::InvalidStep)));
        let bad = FlowParams {
            tau_eig: 0.0,
            ..FlowParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = FlowParams {
            pyramid_levels: 0,
            ..FlowParams::default()
        };
        assert!(bad.validate().is_err());
    }

    fn blobs(w: usize, h: usize, shift: (f64, f64)) -> CanonicalFrame {
        let centers = [
            (12.3, 10.1, 3.0, 0.5),
            (30.2, 14.7, 4.0, -0.3),
            (20.5, 30.4, 3.5, 0.4),
            (40.1, 38.2, 5.0, 0.35),
            (8.4, 40.6, 4.5, -0.25),
            (44.0, 8.0, 3.2, 0.3),
        ];
        let f = |x: f64, y: f64| {
            let mut v = 0.5;
            for &(cx, cy, s, a) in &centers {
                v += 0.4 * a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp();
            }
            v.clamp(0.0, 1.0)
        };
        let g = Grid::from_fn(w, h, |x, y| f(x as f64 - shift.0, y as f64 - shift.1));
        CanonicalFrame::fully_covered(g).unwrap()
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let a = blobs(48, 48, (0.0, 0.0));
        let flow = compute_flow(&a, &a, &FlowParams::default()).unwrap();
        assert!(flow.valid_count() > 0);
        for (_, _, d, valid, _) in flow.sites() {
            if valid {
                assert!(d.norm() <= 1e-6);
            } else {
                assert_eq!(d, Point2::default());
            }
        }
    }

    #[test]
    fn step_subsamples_sites() {
        let a = blobs(48, 48, (0.0, 0.0));
        let b = blobs(48, 48, (1.0, 0.0));
        let dense = compute_flow(&a, &b, &FlowParams::default()).unwrap();
        let params = FlowParams {
            step: 4,
            ..FlowParams::default()
        };
        let sparse = compute_flow(&a, &b, &params).unwrap();
        assert_eq!((sparse.cols(), sparse.rows()), (12, 12));
        for j in 0..12 {
            for i in 0..12 {
                let (x, y) = sparse.site_position(i, j);
                assert_eq!(sparse.displacement(i, j), dense.displacement(x, y));
                assert_eq!(sparse.is_valid(i, j), dense.is_valid(x, y));
            }
        }
    }

    #[test]
    fn uncovered_sites_are_invalid() {
        let a = blobs(32, 32, (0.0, 0.0));
        let mut data = a.intensity().clone();
        let mut cov = a.coverage().to_vec();
        for y in 0..32 {
            for x in 0..16 {
                data.set(x, y, 0.0);
                cov[y * 32 + x] = false;
            }
        }
        let half = CanonicalFrame::new(data, cov).unwrap();
        let flow = compute_flow(&half, &a, &FlowParams::default()).unwrap();
        for (u, _, _, valid, _) in flow.sites() {
            if u < 18 {
                assert!(!valid);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = blobs(32, 32, (0.0, 0.0));
        let b = blobs(32, 30, (0.0, 0.0));
        assert!(matches!(
            compute_flow(&a, &b, &FlowParams::default()),
            Err(FlowError::DimMismatch(..))
        ));
    }
}
