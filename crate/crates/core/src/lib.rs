//! Facial micro-movement measurement.
//!
//! Frames are embedded onto a canonical face canvas with per-triangle
//! affine maps, Lucas-Kanade flow is measured on the canvas, and the
//! resulting vectors are mapped back onto the original frames as arrows.
//!
//! With the default `parallel` feature, warping, flow and per-frame work run
//! on the rayon pool. Disabling it gives the same results sequentially.

// `!(x > t)` is used on purpose so that NaN fails threshold checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod facemesh;
pub mod geometry;
pub mod grid;
pub mod imageio;
pub mod optflow;
pub mod overlay;
pub mod par;
pub mod pipeline;
pub mod synth;
pub mod warp;

pub use facemesh::{
    load_canonical_model, load_landmark_sequence, locate_triangle, CanonicalModel, FaceMesh,
    Frame, FrameSequence, LandmarkSequence, MeshError, Triangle, TriangleRaster,
};
pub use geometry::Point2;
pub use grid::Grid;
pub use optflow::{
    compute_flow, lk_solve_at, spatial_gradients, temporal_gradient, FlowError, FlowField,
    FlowParams, GradientField, LkEstimate,
};
pub use overlay::{
    coverage_fraction, render_arrows, select_arrows, AnnotatedFrame, Arrow, OverlayStyle,
};
pub use pipeline::{run_pipeline, summarize, FlowMode, FrameResult, PipelineConfig, PipelineError};
pub use warp::{
    apply_affine, invert_affine, map_vector_to_original, solve_affine, warp_to_canonical,
    CanonicalFrame, MeshEmbedding, TriangleAffine, WarpError,
};
