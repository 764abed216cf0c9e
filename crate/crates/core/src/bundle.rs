//! Scene bundles: per-frame cameras, depth, optional images and attention,
//! plus point tracks, stored as a directory with `manifest.json` and `VGTF`
//! tensor files.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::geom::{Camera, CameraExtrinsics, CameraIntrinsics, DepthMap, GeomError, Pixel};
use crate::sampling::{ScoreGrid, TokenGrid};
use crate::synth::CorruptionSpec;
use crate::tensor::{Tensor, TensorError};

pub use crate::geom::PointTrack;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{file}: {source}")]
    Tensor { file: String, source: TensorError },
    #[error("unsupported schema version {0}")]
    UnsupportedSchema(u32),
    #[error("invalid bundle: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

fn invalid(msg: impl Into<String>) -> BundleError {
    BundleError::Invalid(msg.into())
}

/// Row-major image with `channels` interleaved values per pixel, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn gray(height: usize, width: usize, data: Vec<f64>) -> Self {
        Self { height, width, channels: 1, data }
    }

    /// Channel-averaged intensity at an integer pixel.
    pub fn intensity(&self, row: usize, col: usize) -> f64 {
        let base = (row * self.width + col) * self.channels;
        let px = &self.data[base..base + self.channels];
        px.iter().sum::<f64>() / self.channels as f64
    }

    /// Bilinear intensity; `None` outside `[0, W-1] × [0, H-1]`.
    pub fn sample(&self, px: &Pixel) -> Option<f64> {
        let (w, h) = (self.width as f64, self.height as f64);
        if !(px.u >= 0.0 && px.v >= 0.0 && px.u <= w - 1.0 && px.v <= h - 1.0) {
            return None;
        }
        let c0 = (px.u.floor() as usize).min(self.width.saturating_sub(2));
        let r0 = (px.v.floor() as usize).min(self.height.saturating_sub(2));
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let a = px.u - c0 as f64;
        let b = px.v - r0 as f64;
        Some(
            (1.0 - a) * (1.0 - b) * self.intensity(r0, c0)
                + a * (1.0 - b) * self.intensity(r0, c1)
                + (1.0 - a) * b * self.intensity(r1, c0)
                + a * b * self.intensity(r1, c1),
        )
    }
}

/// Attention exported for a frame: a precomputed per-token score grid, or
/// per-head query/key token grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FrameAttention {
    Scores(ScoreGrid),
    Tokens { queries: Vec<TokenGrid>, keys: Vec<TokenGrid> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub camera: Camera,
    pub depth: DepthMap,
    pub image: Option<Image>,
    pub attention: Option<FrameAttention>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub exporter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention_layer: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub model_ids: Vec<String>,
    /// `[height, width]` of the source video before resizing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_size: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corruptions: Vec<CorruptionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBundle {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Frame>,
    pub tracks: Vec<PointTrack>,
    pub provenance: Provenance,
}

impl SceneBundle {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn cameras(&self) -> Vec<Camera> {
        self.frames.iter().map(|f| f.camera).collect()
    }

    pub fn has_images(&self) -> bool {
        !self.frames.is_empty() && self.frames.iter().all(|f| f.image.is_some())
    }

    /// Frames `start..=end` with tracks restricted to them. Query frames that
    /// fall outside the window are set out of range.
    pub fn window(&self, start: usize, end: usize) -> SceneBundle {
        let end = end.min(self.frames.len().saturating_sub(1));
        let start = start.min(end);
        let n = end - start + 1;
        let tracks = self
            .tracks
            .iter()
            .map(|t| PointTrack {
                query_frame: if (start..=end).contains(&t.query_frame) { t.query_frame - start } else { n },
                positions: t.positions[start..=end].to_vec(),
                confidences: t.confidences[start..=end].to_vec(),
            })
            .collect();
        SceneBundle {
            width: self.width,
            height: self.height,
            frames: self.frames[start..=end].to_vec(),
            tracks,
            provenance: self.provenance.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        if self.frames.is_empty() {
            return Err(invalid("bundle has no frames"));
        }
        let (h, w) = (self.height, self.width);
        for (i, f) in self.frames.iter().enumerate() {
            f.camera.intrinsics.validate()?;
            f.camera.extrinsics.validate()?;
            if f.depth.height != h || f.depth.width != w || f.depth.values.len() != h * w {
                return Err(invalid(format!(
                    "frame {i}: depth is {}x{}, expected {h}x{w}",
                    f.depth.height, f.depth.width
                )));
            }
            if let Some(img) = &f.image {
                if img.height != h || img.width != w || img.channels == 0 || img.data.len() != h * w * img.channels {
                    return Err(invalid(format!("frame {i}: image shape does not match {h}x{w}")));
                }
            }
            match &f.attention {
                Some(FrameAttention::Scores(s)) => s.validate().map_err(|e| invalid(format!("frame {i}: {e}")))?,
                Some(FrameAttention::Tokens { queries, keys }) => {
                    if queries.is_empty() || queries.len() != keys.len() {
                        return Err(invalid(format!("frame {i}: query/key head counts differ")));
                    }
                    for t in queries.iter().chain(keys) {
                        t.validate().map_err(|e| invalid(format!("frame {i}: {e}")))?;
                    }
                }
                None => {}
            }
        }
        let n = self.frames.len();
        for (k, t) in self.tracks.iter().enumerate() {
            if t.positions.len() != n || t.confidences.len() != n {
                return Err(invalid(format!("track {k} spans {} frames, expected {n}", t.positions.len())));
            }
            if t.query_frame >= n {
                return Err(invalid(format!("track {k} query frame {} out of range", t.query_frame)));
            }
            if t.confidences.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(invalid(format!("track {k} has confidence outside [0, 1]")));
            }
            if t.positions.iter().any(|p| !p.u.is_finite() || !p.v.is_finite()) {
                return Err(invalid(format!("track {k} has non-finite position")));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), BundleError> {
        self.validate()?;
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let (h, w) = (self.height, self.width);
        let mut frames = Vec::with_capacity(self.frames.len());
        for (i, f) in self.frames.iter().enumerate() {
            let depth = format!("depth_{i:04}.vgtf");
            write_tensor(dir, &depth, Tensor::from_f64(vec![h, w], f.depth.values.clone()))?;
            let image = match &f.image {
                Some(img) => {
                    let name = format!("image_{i:04}.vgtf");
                    write_tensor(dir, &name, Tensor::from_f64(vec![h, w, img.channels], img.data.clone()))?;
                    Some(name)
                }
                None => None,
            };
            let (mut attention, mut queries, mut keys) = (None, None, None);
            match &f.attention {
                Some(FrameAttention::Scores(s)) => {
                    let name = format!("attention_{i:04}.vgtf");
                    write_tensor(dir, &name, Tensor::from_f64(vec![s.height, s.width], s.values.clone()))?;
                    attention = Some(name);
                }
                Some(FrameAttention::Tokens { queries: q, keys: k }) => {
                    let qn = format!("queries_{i:04}.vgtf");
                    let kn = format!("keys_{i:04}.vgtf");
                    write_tensor(dir, &qn, heads_to_tensor(q))?;
                    write_tensor(dir, &kn, heads_to_tensor(k))?;
                    queries = Some(qn);
                    keys = Some(kn);
                }
                None => {}
            }
            let r = &f.camera.extrinsics.rotation;
            let t = &f.camera.extrinsics.translation;
            frames.push(FrameEntry {
                intrinsics: mat3_rows(&f.camera.intrinsics.matrix()),
                extrinsics: [
                    [r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0]],
                    [r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1]],
                    [r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2]],
                ],
                depth,
                image,
                attention,
                queries,
                keys,
            });
        }
        let (tracks, track_query_frames) = if self.tracks.is_empty() {
            (None, None)
        } else {
            let n = self.frames.len();
            let mut v = Vec::with_capacity(self.tracks.len() * n * 3);
            for t in &self.tracks {
                for (p, c) in t.positions.iter().zip(&t.confidences) {
                    v.extend_from_slice(&[p.u, p.v, *c]);
                }
            }
            write_tensor(dir, "tracks.vgtf", Tensor::from_f64(vec![self.tracks.len(), n, 3], v))?;
            (Some("tracks.vgtf".to_string()), Some(self.tracks.iter().map(|t| t.query_frame).collect()))
        };
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            frame_count: self.frames.len(),
            height: h,
            width: w,
            frames,
            tracks,
            track_query_frames,
            provenance: self.provenance.clone(),
        };
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, BundleError> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(BundleError::UnsupportedSchema(m.schema_version));
        }
        if m.frame_count != m.frames.len() {
            return Err(invalid(format!("frame_count {} but {} frame entries", m.frame_count, m.frames.len())));
        }
        let (h, w) = (m.height, m.width);
        let mut frames = Vec::with_capacity(m.frames.len());
        for (i, e) in m.frames.iter().enumerate() {
            let intrinsics = CameraIntrinsics::from_matrix(&Matrix3::from_row_slice(&e.intrinsics.concat()))?;
            let x = &e.extrinsics;
            let rotation = Matrix3::new(
                x[0][0], x[0][1], x[0][2], x[1][0], x[1][1], x[1][2], x[2][0], x[2][1], x[2][2],
            );
            let extrinsics = CameraExtrinsics::new(rotation, Vector3::new(x[0][3], x[1][3], x[2][3]))?;
            let dt = read_tensor(dir, &e.depth)?;
            expect_dims(&dt, &[h, w], &e.depth)?;
            let depth = DepthMap::new(h, w, dt.to_f64())?;
            let image = match &e.image {
                Some(name) => {
                    let t = read_tensor(dir, name)?;
                    let channels = match t.dims.as_slice() {
                        [a, b] if *a == h && *b == w => 1,
                        [a, b, c] if *a == h && *b == w && *c > 0 => *c,
                        d => return Err(invalid(format!("{name}: image dims {d:?} do not match {h}x{w}"))),
                    };
                    Some(Image { height: h, width: w, channels, data: t.to_f64() })
                }
                None => None,
            };
            let attention = match (&e.attention, &e.queries, &e.keys) {
                (Some(name), None, None) => {
                    let t = read_tensor(dir, name)?;
                    t.expect_rank(2).map_err(|source| BundleError::Tensor { file: name.clone(), source })?;
                    Some(FrameAttention::Scores(ScoreGrid::new(t.dims[0], t.dims[1], t.to_f64()).map_err(invalid)?))
                }
                (None, Some(q), Some(k)) => Some(FrameAttention::Tokens {
                    queries: tensor_to_heads(i, &read_tensor(dir, q)?, q)?,
                    keys: tensor_to_heads(i, &read_tensor(dir, k)?, k)?,
                }),
                (None, None, None) => None,
                _ => return Err(invalid(format!("frame {i}: give either attention or both queries and keys"))),
            };
            frames.push(Frame { camera: Camera::new(intrinsics, extrinsics), depth, image, attention });
        }
        let n = frames.len();
        let tracks = match &m.tracks {
            Some(name) => {
                let t = read_tensor(dir, name)?;
                let k = match t.dims.as_slice() {
                    [k, nn, 3] if *nn == n => *k,
                    d => return Err(invalid(format!("{name}: dims {d:?}, expected [K, {n}, 3]"))),
                };
                let q = m.track_query_frames.clone().unwrap_or_else(|| vec![0; k]);
                if q.len() != k {
                    return Err(invalid("track_query_frames length does not match track count"));
                }
                let v = t.to_f64();
                (0..k)
                    .map(|ki| {
                        let rows = &v[ki * n * 3..(ki + 1) * n * 3];
                        PointTrack {
                            query_frame: q[ki],
                            positions: rows.chunks_exact(3).map(|c| Pixel::new(c[0], c[1])).collect(),
                            confidences: rows.chunks_exact(3).map(|c| c[2]).collect(),
                        }
                    })
                    .collect()
            }
            None => Vec::new(),
        };
        let bundle = SceneBundle { width: w, height: h, frames, tracks, provenance: m.provenance };
        bundle.validate()?;
        Ok(bundle)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
    frame_count: usize,
    height: usize,
    width: usize,
    frames: Vec<FrameEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tracks: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    track_query_frames: Option<Vec<usize>>,
    #[serde(default)]
    provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameEntry {
    intrinsics: [[f64; 3]; 3],
    extrinsics: [[f64; 4]; 3],
    depth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attention: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    queries: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keys: Option<String>,
}

fn io_err(path: &Path, source: std::io::Error) -> BundleError {
    BundleError::Io { path: path.to_path_buf(), source }
}

fn mat3_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

fn write_tensor(dir: &Path, name: &str, t: Result<Tensor, TensorError>) -> Result<(), BundleError> {
    let wrap = |source| BundleError::Tensor { file: name.to_string(), source };
    t.map_err(wrap)?.save(dir.join(name)).map_err(wrap)
}

fn read_tensor(dir: &Path, name: &str) -> Result<Tensor, BundleError> {
    if Path::new(name).components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
        return Err(invalid(format!("tensor reference {name:?} must be a plain relative path")));
    }
    Tensor::load(dir.join(name)).map_err(|source| BundleError::Tensor { file: name.to_string(), source })
}

fn expect_dims(t: &Tensor, dims: &[usize], name: &str) -> Result<(), BundleError> {
    if t.dims != dims {
        return Err(invalid(format!("{name}: dims {:?}, expected {dims:?}", t.dims)));
    }
    Ok(())
}

fn heads_to_tensor(heads: &[TokenGrid]) -> Result<Tensor, TensorError> {
    let g = &heads[0];
    let mut v = Vec::with_capacity(heads.len() * g.tokens.len());
    for h in heads {
        v.extend_from_slice(&h.tokens);
    }
    Tensor::from_f64(vec![heads.len(), g.height, g.width, g.dim], v)
}

fn tensor_to_heads(frame: usize, t: &Tensor, name: &str) -> Result<Vec<TokenGrid>, BundleError> {
    let [heads, h, w, d] = t.dims[..] else {
        return Err(invalid(format!("{name}: dims {:?}, expected [heads, h, w, d]", t.dims)));
    };
    let v = t.to_f64();
    let per = h * w * d;
    (0..heads)
        .map(|k| TokenGrid::new(frame, h, w, d, v[k * per..(k + 1) * per].to_vec()).map_err(invalid))
        .collect()
}
