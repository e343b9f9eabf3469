//! End-to-end processing of a frame directory: canonical embedding, flow
//! against the reference (or previous) frame, inverse mapping and overlay,
//! and the files that go with them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::facemesh::{
    load_canonical_model, load_landmark_sequence, CanonicalModel, Frame, LandmarkSequence,
    MeshError, TriangleRaster,
};
use crate::imageio::{self, ImageIoError};
use crate::optflow::{self, compute_flow, FlowError, FlowField, FlowParams};
use crate::overlay::{
    coverage_fraction, frame_to_rgb, render_arrows, select_arrows_with, AnnotatedFrame, Arrow,
    OverlayError, OverlayStyle,
};
use crate::par;
use crate::warp::{CanonicalFrame, MeshEmbedding, WarpError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("frame {frame}: {source}")]
    Warp {
        frame: usize,
        #[source]
        source: WarpError,
    },
    #[error("frame {frame}: {source}")]
    Flow {
        frame: usize,
        #[source]
        source: FlowError,
    },
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no frame results to summarize")]
    EmptyResults,
}

impl PipelineError {
    /// Process exit status: 2 for invalid inputs, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. } => 3,
            PipelineError::Mesh(MeshError::Io { .. }) => 3,
            PipelineError::Image(ImageIoError::Io { .. }) => 3,
            PipelineError::Image(ImageIoError::Decode { .. }) => 3,
            PipelineError::Flow {
                source: FlowError::Io(_),
                ..
            } => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    /// Every frame against frame 0.
    #[default]
    Reference,
    /// Every frame against its predecessor.
    Consecutive,
}

impl FromStr for FlowMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(FlowMode::Reference),
            "consecutive" => Ok(FlowMode::Consecutive),
            other => Err(format!("unknown mode `{other}` (expected reference|consecutive)")),
        }
    }
}

/// Which artifacts to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Emit {
    pub canonical: bool,
    pub flow: bool,
    pub overlay: bool,
    pub csv: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            canonical: true,
            flow: true,
            overlay: true,
            csv: true,
        }
    }
}

impl FromStr for Emit {
    type Err = String;

    /// Comma-separated subset of `canonical,flow,overlay,csv`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut emit = Emit {
            canonical: false,
            flow: false,
            overlay: false,
            csv: false,
        };
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match item {
                "canonical" => emit.canonical = true,
                "flow" => emit.flow = true,
                "overlay" => emit.overlay = true,
                "csv" => emit.csv = true,
                other => return Err(format!("unknown output `{other}`")),
            }
        }
        Ok(emit)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub frames_dir: PathBuf,
    pub landmarks_path: PathBuf,
    pub canonical_path: PathBuf,
    pub out_dir: PathBuf,
    pub mode: FlowMode,
    pub flow: FlowParams,
    pub style: OverlayStyle,
    pub emit: Emit,
}

impl PipelineConfig {
    pub fn new(
        frames_dir: impl Into<PathBuf>,
        landmarks_path: impl Into<PathBuf>,
        canonical_path: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            frames_dir: frames_dir.into(),
            landmarks_path: landmarks_path.into(),
            canonical_path: canonical_path.into(),
            out_dir: out_dir.into(),
            mode: FlowMode::default(),
            flow: FlowParams::default(),
            style: OverlayStyle::default(),
            emit: Emit::default(),
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        for (name, p) in [
            ("frames dir", &self.frames_dir),
            ("landmarks path", &self.landmarks_path),
            ("canonical path", &self.canonical_path),
            ("out dir", &self.out_dir),
        ] {
            if p.as_os_str().is_empty() {
                return Err(PipelineError::Validation(format!("{name} is empty")));
            }
        }
        self.flow
            .validate()
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        self.style.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FrameStats {
    pub valid_sites: usize,
    pub mean_magnitude: f64,
    pub median_magnitude: f64,
    pub max_magnitude: f64,
    pub degenerate_triangles: usize,
    pub arrow_count: usize,
    pub coverage_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_index: usize,
    pub canonical: CanonicalFrame,
    /// Absent for the first frame.
    pub flow: Option<FlowField>,
    pub arrows: Vec<Arrow>,
    pub annotated: AnnotatedFrame,
    pub stats: FrameStats,
}

/// Median of `values` (mean of the middle pair for even counts); 0 when
/// empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn flow_stats(flow: &FlowField) -> FrameStats {
    let mags = flow.valid_magnitudes();
    let n = mags.len();
    FrameStats {
        valid_sites: n,
        mean_magnitude: if n == 0 { 0.0 } else { mags.iter().sum::<f64>() / n as f64 },
        median_magnitude: median(&mags),
        max_magnitude: mags.iter().copied().fold(0.0, f64::max),
        ..FrameStats::default()
    }
}

/// In-memory processing of a loaded sequence. Returns one result per frame
/// and any warnings.
pub fn process_sequence(
    frames: &[Frame],
    landmarks: &LandmarkSequence,
    model: &CanonicalModel,
    mode: FlowMode,
    flow: &FlowParams,
    style: &OverlayStyle,
) -> Result<(Vec<FrameResult>, Vec<String>), PipelineError> {
    flow.validate()
        .map_err(|e| PipelineError::Validation(e.to_string()))?;
    style.validate()?;
    if frames.len() != landmarks.meshes.len() {
        return Err(PipelineError::Validation(format!(
            "{} image frames but {} landmark frames",
            frames.len(),
            landmarks.meshes.len()
        )));
    }
    if let Some(first) = frames.first() {
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| (f.width(), f.height()) != (first.width(), first.height()))
        {
            return Err(PipelineError::Validation(format!(
                "frame {i} is {}×{}, frame 0 is {}×{}",
                f.width(),
                f.height(),
                first.width(),
                first.height()
            )));
        }
    }
    let mut embeddings = Vec::with_capacity(frames.len());
    for (i, mesh) in landmarks.meshes.iter().enumerate() {
        model.check_mesh(mesh).map_err(|e| {
            PipelineError::Validation(format!("frame {i}: {e}"))
        })?;
        embeddings.push(
            MeshEmbedding::new(mesh, model).map_err(|source| PipelineError::Warp { frame: i, source })?,
        );
    }
    let mut warnings = Vec::new();
    if frames.len() < 2 {
        warnings.push("p < 2: no flow fields computed".to_string());
    }
    for (i, e) in embeddings.iter().enumerate() {
        if !e.degenerate().is_empty() {
            warnings.push(format!(
                "frame {i}: {} degenerate triangle(s) skipped: {:?}",
                e.degenerate().len(),
                e.degenerate()
            ));
        }
    }

    let raster = TriangleRaster::new(model);
    let canonical: Vec<CanonicalFrame> =
        par::map_collect(frames, |i, f| embeddings[i].warp(f, model, &raster));

    let flows: Vec<Option<Result<FlowField, FlowError>>> = par::map_range(frames.len(), |i| {
        if i == 0 {
            return None;
        }
        let reference = match mode {
            FlowMode::Reference => &canonical[0],
            FlowMode::Consecutive => &canonical[i - 1],
        };
        Some(compute_flow(reference, &canonical[i], flow))
    });
    let mut flow_fields = Vec::with_capacity(frames.len());
    for (i, f) in flows.into_iter().enumerate() {
        flow_fields.push(match f {
            None => None,
            Some(Ok(field)) => Some(field),
            Some(Err(source)) => return Err(PipelineError::Flow { frame: i, source }),
        });
    }

    let rendered: Vec<(Vec<Arrow>, AnnotatedFrame, f64)> = par::map_collect(frames, |i, frame| {
        let rgb = frame_to_rgb(frame);
        let arrows = match &flow_fields[i] {
            Some(field) => select_arrows_with(field, style, model, &embeddings[i]),
            None => Vec::new(),
        };
        let annotated = render_arrows(&rgb, &arrows, style);
        let coverage = coverage_fraction(&rgb, annotated.image()).unwrap_or(0.0);
        (arrows, annotated, coverage)
    });

    let results = canonical
        .into_iter()
        .zip(flow_fields)
        .zip(rendered)
        .enumerate()
        .map(|(i, ((canonical, flow), (arrows, annotated, coverage)))| {
            let mut stats = flow.as_ref().map(flow_stats).unwrap_or_default();
            stats.degenerate_triangles = embeddings[i].degenerate().len();
            stats.arrow_count = arrows.len();
            stats.coverage_fraction = coverage;
            FrameResult {
                frame_index: i,
                canonical,
                flow,
                arrows,
                annotated,
                stats,
            }
        })
        .collect();
    Ok((results, warnings))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub frames_dir: String,
    pub landmarks: String,
    pub canonical: String,
    pub out_dir: String,
    pub mode: FlowMode,
    pub tau_eig: f64,
    pub pyramid_levels: usize,
    pub iterations_per_level: usize,
    pub step: usize,
    pub grid_step: usize,
    pub scale: f64,
    pub min_magnitude: f64,
    pub head_length: f64,
    pub emit: Emit,
}

impl From<&PipelineConfig> for ConfigEcho {
    fn from(c: &PipelineConfig) -> Self {
        Self {
            frames_dir: c.frames_dir.display().to_string(),
            landmarks: c.landmarks_path.display().to_string(),
            canonical: c.canonical_path.display().to_string(),
            out_dir: c.out_dir.display().to_string(),
            mode: c.mode,
            tau_eig: c.flow.tau_eig,
            pyramid_levels: c.flow.pyramid_levels,
            iterations_per_level: c.flow.iterations_per_level,
            step: c.flow.step,
            grid_step: c.style.grid_step,
            scale: c.style.scale,
            min_magnitude: c.style.min_magnitude,
            head_length: c.style.head_length,
            emit: c.emit,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameSummary {
    pub frame_index: usize,
    pub has_flow: bool,
    #[serde(flatten)]
    pub stats: FrameStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub frames: usize,
    pub flow_fields: usize,
    pub mean_coverage_fraction: f64,
    pub max_coverage_fraction: f64,
    /// Mean of the per-frame mean magnitudes over frames with flow.
    pub mean_magnitude: f64,
    pub wall_time_seconds: f64,
    pub warnings: Vec<String>,
    pub config: Option<ConfigEcho>,
    pub per_frame: Vec<FrameSummary>,
}

/// Aggregates per-frame statistics.
pub fn summarize(
    results: &[FrameResult],
    config: Option<ConfigEcho>,
    wall_time_seconds: f64,
    mut warnings: Vec<String>,
) -> Result<Summary, PipelineError> {
    if results.is_empty() {
        return Err(PipelineError::EmptyResults);
    }
    let flow_fields = results.iter().filter(|r| r.flow.is_some()).count();
    if results.len() < 2 && !warnings.iter().any(|w| w.starts_with("p < 2")) {
        warnings.push("p < 2: no flow fields computed".to_string());
    }
    let coverages: Vec<f64> = results.iter().map(|r| r.stats.coverage_fraction).collect();
    let means: Vec<f64> = results
        .iter()
        .filter(|r| r.flow.is_some())
        .map(|r| r.stats.mean_magnitude)
        .collect();
    Ok(Summary {
        frames: results.len(),
        flow_fields,
        mean_coverage_fraction: coverages.iter().sum::<f64>() / coverages.len() as f64,
        max_coverage_fraction: coverages.iter().copied().fold(0.0, f64::max),
        mean_magnitude: if means.is_empty() {
            0.0
        } else {
            means.iter().sum::<f64>() / means.len() as f64
        },
        wall_time_seconds,
        warnings,
        config,
        per_frame: results
            .iter()
            .map(|r| FrameSummary {
                frame_index: r.frame_index,
                has_flow: r.flow.is_some(),
                stats: r.stats,
            })
            .collect(),
    })
}

/// Frame images named `frame_%06d.png` or `frame_%06d.pgm`, indexed from 0
/// without gaps.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let io = |source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut found: BTreeMap<usize, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(index) = parse_frame_name(name) else {
            continue;
        };
        if let Some(prev) = found.insert(index, path.clone()) {
            return Err(PipelineError::Validation(format!(
                "frame {index} appears twice: {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }
    if found.is_empty() {
        return Err(PipelineError::Validation(format!(
            "no frame_%06d.png/.pgm files in {}",
            dir.display()
        )));
    }
    for (expected, &index) in found.keys().enumerate() {
        if index != expected {
            return Err(PipelineError::Validation(format!(
                "missing frame image index {expected}"
            )));
        }
    }
    Ok(found.into_values().collect())
}

fn parse_frame_name(name: &str) -> Option<usize> {
    let stem = name
        .strip_suffix(".png")
        .or_else(|| name.strip_suffix(".pgm"))?;
    let digits = stem.strip_prefix("frame_")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Output of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub results: Vec<FrameResult>,
    pub summary: Summary,
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let start = Instant::now();
    config.validate()?;
    let model = load_canonical_model(&config.canonical_path)?;
    let landmarks = load_landmark_sequence(&config.landmarks_path)?;
    let frame_paths = list_frames(&config.frames_dir)?;
    if frame_paths.len() != landmarks.meshes.len() {
        return Err(PipelineError::Validation(format!(
            "{} frame images but {} landmark frames",
            frame_paths.len(),
            landmarks.meshes.len()
        )));
    }
    let loaded = par::map_collect(&frame_paths, |_, p| imageio::load_frame(p));
    let frames = loaded.into_iter().collect::<Result<Vec<_>, _>>()?;

    let (results, warnings) = process_sequence(
        &frames,
        &landmarks,
        &model,
        config.mode,
        &config.flow,
        &config.style,
    )?;

    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(|source| PipelineError::Io {
        path: out.clone(),
        source,
    })?;
    for r in &results {
        write_frame_outputs(out, r, &config.emit)?;
    }
    let summary = summarize(
        &results,
        Some(ConfigEcho::from(config)),
        start.elapsed().as_secs_f64(),
        warnings,
    )?;
    let summary_path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, text).map_err(|source| PipelineError::Io {
        path: summary_path,
        source,
    })?;
    Ok(PipelineOutput { results, summary })
}

fn write_frame_outputs(out: &Path, r: &FrameResult, emit: &Emit) -> Result<(), PipelineError> {
    let i = r.frame_index;
    if emit.canonical {
        imageio::write_gray_png(
            &out.join(format!("canonical_{i:06}.png")),
            &imageio::canonical_to_gray(&r.canonical),
        )?;
    }
    if emit.overlay {
        imageio::write_rgb_png(&out.join(format!("overlay_{i:06}.png")), r.annotated.image())?;
    }
    if let Some(flow) = &r.flow {
        let write = |path: PathBuf, csv: bool| -> Result<(), PipelineError> {
            let file = fs::File::create(&path).map_err(|source| PipelineError::Io {
                path: path.clone(),
                source,
            })?;
            let writer = std::io::BufWriter::new(file);
            let res = if csv {
                optflow::write_flow_csv(writer, flow)
            } else {
                optflow::write_flow(writer, flow)
            };
            res.map_err(|e| match e {
                FlowError::Io(source) => PipelineError::Io { path, source },
                source => PipelineError::Flow { frame: i, source },
            })
        };
        if emit.flow {
            write(out.join(format!("flow_{i:06}.mflw")), false)?;
        }
        if emit.csv {
            write(out.join(format!("flow_{i:06}.csv")), true)?;
        }
    }
    Ok(())
}
