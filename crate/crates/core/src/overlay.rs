//! Arrow overlays of inverse-mapped flow on the original frames.

use image::{Rgb, RgbImage};
use thiserror::Error;

use crate::facemesh::{CanonicalModel, FaceMesh, Frame};
use crate::geometry::Point2;
use crate::optflow::FlowField;
use crate::warp::MeshEmbedding;

#[derive(Debug, Error)]
pub enum OverlayError {
    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimMismatch((u32, u32), (u32, u32)),
    #[error("invalid overlay style: {0}")]
    InvalidStyle(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrow {
    pub base: Point2,
    pub tip: Point2,
    /// Unscaled canonical displacement magnitude.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayStyle {
    /// Canonical pixels between sampled arrows.
    pub grid_step: usize,
    /// Display multiplier applied to mapped vectors.
    pub scale: f64,
    /// Canonical displacement below which no arrow is drawn.
    pub min_magnitude: f64,
    pub head_length: f64,
    pub color: [u8; 3],
    /// Only single-pixel lines are drawn.
    pub thickness: u32,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            grid_step: 8,
            scale: 4.0,
            min_magnitude: 0.15,
            head_length: 3.0,
            color: [0, 255, 0],
            thickness: 1,
        }
    }
}

impl OverlayStyle {
    pub fn validate(&self) -> Result<(), OverlayError> {
        if self.grid_step < 1 {
            return Err(OverlayError::InvalidStyle(
                "grid_step must be at least 1".into(),
            ));
        }
        if !(self.scale > 0.0) {
            return Err(OverlayError::InvalidStyle("scale must be positive".into()));
        }
        if !(self.min_magnitude >= 0.0) {
            return Err(OverlayError::InvalidStyle(
                "min_magnitude must be non-negative".into(),
            ));
        }
        if !(self.head_length >= 0.0) {
            return Err(OverlayError::InvalidStyle(
                "head_length must be non-negative".into(),
            ));
        }
        if self.thickness != 1 {
            return Err(OverlayError::InvalidStyle(
                "only thickness 1 is supported".into(),
            ));
        }
        Ok(())
    }
}

/// RGB frame at the source resolution with arrows drawn on it.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedFrame(pub RgbImage);

impl AnnotatedFrame {
    pub fn image(&self) -> &RgbImage {
        &self.0
    }

    pub fn into_image(self) -> RgbImage {
        self.0
    }
}

/// Gray replicated into three channels, quantized as `round(v·255)`.
pub fn frame_to_rgb(frame: &Frame) -> RgbImage {
    RgbImage::from_fn(frame.width() as u32, frame.height() as u32, |x, y| {
        let v = (frame.get(x as usize, y as usize) * 255.0).round() as u8;
        Rgb([v, v, v])
    })
}

/// Picks valid lattice sites with enough motion and maps them into the frame.
pub fn select_arrows(
    field: &FlowField,
    style: &OverlayStyle,
    model: &CanonicalModel,
    mesh: &FaceMesh,
) -> Vec<Arrow> {
    match MeshEmbedding::new(mesh, model) {
        Ok(embedding) => select_arrows_with(field, style, model, &embedding),
        Err(_) => Vec::new(),
    }
}

/// [`select_arrows`] with a precomputed embedding. Sites outside the mesh,
/// or on triangles collapsed in this frame, are dropped.
pub fn select_arrows_with(
    field: &FlowField,
    style: &OverlayStyle,
    model: &CanonicalModel,
    embedding: &MeshEmbedding,
) -> Vec<Arrow> {
    let grid_step = style.grid_step.max(1);
    let mut arrows = Vec::new();
    for (u, v, d, valid, _) in field.sites() {
        if !valid || u % grid_step != 0 || v % grid_step != 0 {
            continue;
        }
        let magnitude = d.norm();
        if magnitude < style.min_magnitude {
            continue;
        }
        let base = Point2::new(u as f64, v as f64);
        if let Ok((frame_base, frame_vec)) = embedding.map_vector(model, base, d) {
            arrows.push(Arrow {
                base: frame_base,
                tip: frame_base + frame_vec * style.scale,
                magnitude,
            });
        }
    }
    arrows
}

/// Pixels of the Bresenham segment from `(x0, y0)` to `(x1, y1)`, endpoints
/// included.
pub fn bresenham(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(i64, i64)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push((x, y));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

fn round_px(p: Point2) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

/// Integer endpoints of an arrow's segments: the shaft, then the two head
/// strokes at ±30° off the reversed shaft. A zero-length arrow is just its
/// base.
pub fn arrow_segments(arrow: &Arrow, head_length: f64) -> Vec<((i64, i64), (i64, i64))> {
    let shaft = arrow.tip - arrow.base;
    let len = shaft.norm();
    let mut segs = vec![(round_px(arrow.base), round_px(arrow.tip))];
    if len > 0.0 && head_length > 0.0 {
        let back = shaft * (-1.0 / len);
        let (s, c) = 30f64.to_radians().sin_cos();
        for sign in [1.0, -1.0] {
            let dir = Point2::new(
                c * back.x - sign * s * back.y,
                sign * s * back.x + c * back.y,
            );
            segs.push((round_px(arrow.tip), round_px(arrow.tip + dir * head_length)));
        }
    }
    segs
}

/// Draws arrows in list order; off-frame pixels are clipped.
pub fn render_arrows(frame: &RgbImage, arrows: &[Arrow], style: &OverlayStyle) -> AnnotatedFrame {
    let mut out = frame.clone();
    let (w, h) = (out.width() as i64, out.height() as i64);
    let color = Rgb(style.color);
    for arrow in arrows {
        for ((x0, y0), (x1, y1)) in arrow_segments(arrow, style.head_length) {
            for (x, y) in bresenham(x0, y0, x1, y1) {
                if (0..w).contains(&x) && (0..h).contains(&y) {
                    out.put_pixel(x as u32, y as u32, color);
                }
            }
        }
    }
    AnnotatedFrame(out)
}

/// Fraction of pixels whose RGB value differs.
pub fn coverage_fraction(original: &RgbImage, annotated: &RgbImage) -> Result<f64, OverlayError> {
    if original.dimensions() != annotated.dimensions() {
        return Err(OverlayError::DimMismatch(
            original.dimensions(),
            annotated.dimensions(),
        ));
    }
    let total = original.width() as usize * original.height() as usize;
    if total == 0 {
        return Ok(0.0);
    }
    let changed = original
        .pixels()
        .zip(annotated.pixels())
        .filter(|(a, b)| a != b)
        .count();
    Ok(changed as f64 / total as f64)
}
