//! Synthetic point-cloud scenes with exact geometry, seeded corruptions, and
//! a toy frame generator whose per-seed quality is known.

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::bundle::{Frame, FrameAttention, Image, Provenance, SceneBundle};
use crate::geom::{
    filter_valid, reprojection_error_parts, rotation_from_axis_angle, Camera, CameraExtrinsics,
    CameraIntrinsics, DepthMap, GeomError, Pixel, PointTrack, ValidityConfig,
};
use crate::hash::{mix64, unit_f64};
use crate::sampling::ScoreGrid;
use crate::search::{FrameGenerator, GeneratorError, Verifier, VerifyError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible trajectory: {0}")]
    InfeasibleTrajectory(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Camera path around a sphere of points centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    /// Circle of `distance` around the vertical axis at height `elevation`,
    /// sweeping `arc` radians over the sequence, looking at the origin.
    Orbit { distance: f64, elevation: f64, arc: f64 },
    /// Straight approach along the optical axis from `start` to `end`.
    Dolly { start: f64, end: f64 },
    /// Sideways translation over `span` at fixed `distance`, constant heading.
    Pan { distance: f64, span: f64 },
    /// Smoothed random walk on a sphere of `distance` with angular step scale `step`.
    RandomSmooth { distance: f64, step: f64 },
}

impl Trajectory {
    pub fn kind(&self) -> &'static str {
        match self {
            Trajectory::Orbit { .. } => "orbit",
            Trajectory::Dolly { .. } => "dolly",
            Trajectory::Pan { .. } => "pan",
            Trajectory::RandomSmooth { .. } => "random_smooth",
        }
    }

    /// Default parameters of `kind` for a scene of the given extent.
    pub fn default_for(kind: &str, extent: f64) -> Option<Self> {
        let d = 2.0 * extent;
        Some(match kind {
            "orbit" => Trajectory::Orbit { distance: d, elevation: 0.2 * extent, arc: 0.5 },
            "dolly" => Trajectory::Dolly { start: d * 1.2, end: d * 0.9 },
            "pan" => Trajectory::Pan { distance: d, span: 0.4 * extent },
            "random_smooth" | "random-smooth" => Trajectory::RandomSmooth { distance: d, step: 0.05 },
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub points: usize,
    /// Diameter of the point sphere.
    pub extent: f64,
    pub trajectory: Trajectory,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub focal: f64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub images: bool,
    #[serde(default = "default_true")]
    pub attention: bool,
    /// Keep at most this many tracks, chosen with the scene rng.
    #[serde(default)]
    pub max_tracks: Option<usize>,
    #[serde(default = "default_splat")]
    pub splat_radius: f64,
}

fn default_true() -> bool {
    true
}

fn default_splat() -> f64 {
    1.5
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            points: 4000,
            extent: 2.0,
            trajectory: Trajectory::Orbit { distance: 4.0, elevation: 0.4, arc: 0.5 },
            frames: 8,
            height: 96,
            width: 128,
            focal: 120.0,
            seed: 0,
            images: true,
            attention: true,
            max_tracks: None,
            splat_radius: 1.5,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.into()));
        if self.frames < 2 {
            return bad("at least two frames are required");
        }
        if self.points == 0 {
            return bad("point count must be positive");
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return bad("extent must be positive");
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return bad("focal length must be positive");
        }
        if self.height < 8 || self.width < 8 {
            return bad("image must be at least 8x8");
        }
        if !(self.splat_radius >= 0.5) {
            return bad("splat radius must be at least 0.5 px");
        }
        let r = self.extent / 2.0;
        let min_dist = match self.trajectory {
            Trajectory::Orbit { distance, .. } => distance,
            Trajectory::Dolly { start, end } => start.min(end),
            Trajectory::Pan { distance, .. } => distance,
            Trajectory::RandomSmooth { distance, .. } => distance,
        };
        if !(min_dist > r * 1.05) {
            return Err(SynthError::InfeasibleTrajectory(format!(
                "camera distance {min_dist} does not clear the scene radius {r}"
            )));
        }
        Ok(())
    }
}

/// Smooth albedo over the point sphere; values stay in `[0.2, 0.8]`.
pub fn texture(p: &Point3<f64>, radius: f64) -> f64 {
    let (x, y, z) = (p.x / radius, p.y / radius, p.z / radius);
    0.5 + 0.18 * (0.5 * std::f64::consts::PI * x + 0.3).sin() * (0.4 * std::f64::consts::PI * y).cos()
        + 0.12 * (0.45 * std::f64::consts::PI * z + 1.1).sin()
}

/// Camera at `center` looking at `target`, image `v` pointing down world `-y`.
pub fn look_at(center: &Point3<f64>, target: &Point3<f64>) -> CameraExtrinsics {
    let z = (target - center).normalize();
    let up = Vector3::new(0.0, -1.0, 0.0);
    let x = z.cross(&up).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    CameraExtrinsics { rotation: r, translation: -(r * center.coords) }
}

fn camera_path(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<CameraExtrinsics> {
    let n = spec.frames;
    let s = |i: usize| i as f64 / (n - 1) as f64;
    let origin = Point3::origin();
    match spec.trajectory {
        Trajectory::Orbit { distance, elevation, arc } => (0..n)
            .map(|i| {
                let th = arc * (s(i) - 0.5);
                look_at(&Point3::new(distance * th.sin(), elevation, -distance * th.cos()), &origin)
            })
            .collect(),
        Trajectory::Dolly { start, end } => (0..n)
            .map(|i| look_at(&Point3::new(0.0, 0.0, -(start + (end - start) * s(i))), &origin))
            .collect(),
        Trajectory::Pan { distance, span } => (0..n)
            .map(|i| {
                let x = span * (s(i) - 0.5);
                look_at(&Point3::new(x, 0.0, -distance), &Point3::new(x, 0.0, 0.0))
            })
            .collect(),
        Trajectory::RandomSmooth { distance, step } => {
            let (mut th, mut ph) = (0.0f64, 0.0f64);
            let (mut vth, mut vph) = (0.0f64, 0.0f64);
            (0..n)
                .map(|_| {
                    let c = Point3::new(distance * th.sin() * ph.cos(), distance * ph.sin(), -distance * th.cos() * ph.cos());
                    let e = look_at(&c, &origin);
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    vth = 0.7 * vth + step * a;
                    vph = 0.7 * vph + step * b;
                    th += vth;
                    ph = (ph + vph).clamp(-1.0, 1.0);
                    e
                })
                .collect()
        }
    }
}

fn sphere_points(n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    (0..n)
        .map(|_| loop {
            let v = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
            let nrm: f64 = v.norm();
            if nrm > 1e-9 {
                break Point3::from(v * (radius / nrm));
            }
        })
        .collect()
}

/// Depth, owner index and projections of every point for one camera.
struct Render {
    depth: DepthMap,
    owner: Vec<usize>,
    projections: Vec<Option<Pixel>>,
}

fn render(points: &[Point3<f64>], cam: &Camera, h: usize, w: usize, radius_px: f64) -> Render {
    let mut depth = DepthMap::filled(h, w, 0.0);
    let mut zbuf = vec![f64::INFINITY; h * w];
    let mut owner = vec![usize::MAX; h * w];
    let mut projections = Vec::with_capacity(points.len());
    let r2 = radius_px * radius_px;
    for (k, p) in points.iter().enumerate() {
        let pc = cam.extrinsics.transform(p);
        if !(pc.z > 1e-6) {
            projections.push(None);
            continue;
        }
        let px = cam.intrinsics.project(&pc.coords);
        projections.push(Some(px));
        let r0 = (px.v - radius_px).ceil().max(0.0) as usize;
        let c0 = (px.u - radius_px).ceil().max(0.0) as usize;
        let r1 = (px.v + radius_px).floor();
        let c1 = (px.u + radius_px).floor();
        if r1 < 0.0 || c1 < 0.0 {
            continue;
        }
        let r1 = (r1 as usize).min(h - 1);
        let c1 = (c1 as usize).min(w - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let du = c as f64 - px.u;
                let dv = r as f64 - px.v;
                if du * du + dv * dv <= r2 && pc.z < zbuf[r * w + c] {
                    zbuf[r * w + c] = pc.z;
                    owner[r * w + c] = k;
                    depth.set(r, c, pc.z);
                }
            }
        }
    }
    Render { depth, owner, projections }
}

/// Pixel each projection rounds to, if inside the image.
fn rounded_index(px: &Pixel, h: usize, w: usize) -> Option<usize> {
    let (c, r) = (px.u.round(), px.v.round());
    if c < 0.0 || r < 0.0 || c >= w as f64 || r >= h as f64 || !px.in_bounds(w, h, 0.0) {
        return None;
    }
    Some(r as usize * w + c as usize)
}

/// Foreground coverage of each 8×8-pixel token cell.
fn coverage_scores(depth: &DepthMap) -> ScoreGrid {
    const CELL: usize = 8;
    let (gh, gw) = (depth.height.div_ceil(CELL), depth.width.div_ceil(CELL));
    let mut values = vec![0.0; gh * gw];
    for (i, v) in values.iter_mut().enumerate() {
        let (gr, gc) = (i / gw, i % gw);
        let (mut fg, mut all) = (0usize, 0usize);
        for r in gr * CELL..((gr + 1) * CELL).min(depth.height) {
            for c in gc * CELL..((gc + 1) * CELL).min(depth.width) {
                all += 1;
                fg += (depth.get(r, c) > 0.0) as usize;
            }
        }
        *v = fg as f64 / all as f64;
    }
    ScoreGrid { height: gh, width: gw, values }
}

/// Builds a self-consistent bundle: exact cameras, splatted depth, exact
/// tracks of points visible (owning their pixel) in every frame.
pub fn make_scene(spec: &SceneSpec) -> Result<SceneBundle, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let radius = spec.extent / 2.0;
    let extrinsics = camera_path(spec, &mut rng);
    let intr = CameraIntrinsics::new(
        spec.focal,
        spec.focal,
        (spec.width as f64 - 1.0) / 2.0,
        (spec.height as f64 - 1.0) / 2.0,
    )?;
    let cams: Vec<Camera> = extrinsics.iter().map(|e| Camera::new(intr, *e)).collect();
    let mut points = sphere_points(spec.points, radius, &mut rng);
    let mut attempts = 0;
    while !points.iter().all(|p| cams.iter().all(|c| c.extrinsics.transform(p).z > 1e-6)) {
        attempts += 1;
        if attempts > 16 {
            return Err(SynthError::InfeasibleTrajectory("points behind a camera".into()));
        }
        points = sphere_points(spec.points, radius, &mut rng);
    }
    let (h, w) = (spec.height, spec.width);
    let renders: Vec<Render> = cams.par_iter().map(|c| render(&points, c, h, w, spec.splat_radius)).collect();

    let mut track_ids: Vec<usize> = (0..points.len())
        .filter(|&k| {
            renders.iter().all(|r| {
                r.projections[k]
                    .as_ref()
                    .and_then(|px| rounded_index(px, h, w))
                    .is_some_and(|i| r.owner[i] == k)
            })
        })
        .collect();
    if track_ids.is_empty() {
        return Err(SynthError::InfeasibleTrajectory("no point is visible in every frame".into()));
    }
    if let Some(m) = spec.max_tracks {
        if m < track_ids.len() {
            let mut chosen = rand::seq::index::sample(&mut rng, track_ids.len(), m).into_vec();
            chosen.sort_unstable();
            track_ids = chosen.into_iter().map(|i| track_ids[i]).collect();
        }
    }
    let tracks = track_ids
        .iter()
        .map(|&k| PointTrack {
            query_frame: 0,
            positions: renders.iter().map(|r| r.projections[k].unwrap()).collect(),
            confidences: vec![1.0; spec.frames],
        })
        .collect();

    let frames = cams
        .par_iter()
        .zip(renders.into_par_iter())
        .map(|(cam, r)| {
            let image = spec.images.then(|| {
                let data = (0..h * w)
                    .map(|i| {
                        let d = r.depth.values[i];
                        let px = Pixel::new((i % w) as f64, (i / w) as f64);
                        match crate::geom::back_project(&px, d, &cam.intrinsics, &cam.extrinsics) {
                            Ok(x) => texture(&x, radius),
                            Err(_) => 0.0,
                        }
                    })
                    .collect();
                Image::gray(h, w, data)
            });
            let attention = spec.attention.then(|| FrameAttention::Scores(coverage_scores(&r.depth)));
            Frame { camera: *cam, depth: r.depth, image, attention }
        })
        .collect();
    Ok(SceneBundle {
        width: w,
        height: h,
        frames,
        tracks,
        provenance: Provenance { exporter: format!("synth/{}", spec.trajectory.kind()), ..Default::default() },
    })
}

/// Seeded noise on the three geometric channels. Each channel draws from
/// its own stream, and a zero σ leaves that channel untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// Multiplicative lognormal depth noise.
    #[serde(default)]
    pub depth_sigma: f64,
    /// Rotation jitter in radians (axis-angle components).
    #[serde(default)]
    pub rotation_sigma: f64,
    #[serde(default)]
    pub translation_sigma: f64,
    /// Per-frame random-walk step of track positions, pixels.
    #[serde(default)]
    pub track_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Restrict corruption to these frames; all frames when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<usize>>,
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, s) in [
            ("depth_sigma", self.depth_sigma),
            ("rotation_sigma", self.rotation_sigma),
            ("translation_sigma", self.translation_sigma),
            ("track_sigma", self.track_sigma),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(SynthError::InvalidSpec(format!("{name} must be a finite non-negative value")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.depth_sigma == 0.0 && self.rotation_sigma == 0.0 && self.translation_sigma == 0.0 && self.track_sigma == 0.0
    }

    fn applies(&self, frame: usize) -> bool {
        self.frames.as_ref().is_none_or(|f| f.contains(&frame))
    }
}

fn channel_rng(seed: u64, channel: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(channel)))
}

fn gauss3(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Confidence assigned to a track displaced by `drift` pixels.
pub fn drift_confidence(drift: f64) -> f64 {
    (-drift / 4.0).exp()
}

/// Applies `spec` to a copy of `bundle` and records it in the provenance.
/// The identity spec returns an unchanged copy.
pub fn corrupt(bundle: &SceneBundle, spec: &CorruptionSpec) -> Result<SceneBundle, SynthError> {
    spec.validate()?;
    let mut out = bundle.clone();
    if spec.is_identity() {
        return Ok(out);
    }
    if spec.depth_sigma > 0.0 {
        let mut rng = channel_rng(spec.seed, 1);
        let dist = rand_distr::LogNormal::new(0.0, spec.depth_sigma).expect("sigma validated");
        for (i, f) in out.frames.iter_mut().enumerate() {
            if !spec.applies(i) {
                continue;
            }
            for d in f.depth.values.iter_mut() {
                let m: f64 = dist.sample(&mut rng);
                if *d > 0.0 {
                    *d *= m;
                }
            }
        }
    }
    if spec.rotation_sigma > 0.0 || spec.translation_sigma > 0.0 {
        let mut rng = channel_rng(spec.seed, 2);
        for (i, f) in out.frames.iter_mut().enumerate() {
            let dr = gauss3(&mut rng) * spec.rotation_sigma;
            let dt = gauss3(&mut rng) * spec.translation_sigma;
            if !spec.applies(i) {
                continue;
            }
            let e = &mut f.camera.extrinsics;
            if spec.rotation_sigma > 0.0 {
                e.rotation = rotation_from_axis_angle(&dr) * e.rotation;
            }
            e.translation += dt;
        }
    }
    if spec.track_sigma > 0.0 {
        let mut rng = channel_rng(spec.seed, 3);
        let n = out.frames.len();
        for t in out.tracks.iter_mut() {
            let q = t.query_frame.min(n.saturating_sub(1));
            let steps: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.sample::<f64, _>(StandardNormal) * spec.track_sigma, rng.sample::<f64, _>(StandardNormal) * spec.track_sigma))
                .collect();
            let mut walk = |order: &mut dyn Iterator<Item = usize>| {
                let (mut ou, mut ov) = (0.0, 0.0);
                for j in order {
                    if spec.applies(j) {
                        ou += steps[j].0;
                        ov += steps[j].1;
                    }
                    t.positions[j].u += ou;
                    t.positions[j].v += ov;
                    let drift = ou.hypot(ov);
                    if drift > 0.0 {
                        t.confidences[j] *= drift_confidence(drift);
                    }
                }
            };
            walk(&mut (q + 1..n));
            walk(&mut (0..q).rev());
        }
    }
    out.provenance.corruptions.push(spec.clone());
    Ok(out)
}

/// Maps a per-step seed to a corruption magnitude in `[0, ∞)`.
#[derive(Clone)]
pub enum QualityMap {
    /// `max · u`, `u` uniform in `[0, 1)` from the seed hash.
    Uniform { max: f64 },
    /// Zero with probability `p_clean`, otherwise `level`.
    Binary { p_clean: f64, level: f64 },
    Constant(f64),
    Custom(Arc<dyn Fn(u64) -> f64 + Send + Sync>),
}

impl fmt::Debug for QualityMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QualityMap::Uniform { max } => write!(f, "Uniform {{ max: {max} }}"),
            QualityMap::Binary { p_clean, level } => write!(f, "Binary {{ p_clean: {p_clean}, level: {level} }}"),
            QualityMap::Constant(q) => write!(f, "Constant({q})"),
            QualityMap::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl QualityMap {
    pub fn quality(&self, z: u64) -> f64 {
        let u = unit_f64(mix64(z ^ 0x5157_414C_4954_5900));
        match self {
            QualityMap::Uniform { max } => max * u,
            QualityMap::Binary { p_clean, level } => {
                if u < *p_clean {
                    0.0
                } else {
                    *level
                }
            }
            QualityMap::Constant(q) => *q,
            QualityMap::Custom(f) => f(z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyConfig {
    pub quality: QualityMap,
    /// Noise scales multiplied by the per-step quality.
    pub rotation_sigma: f64,
    pub translation_sigma: f64,
    pub track_sigma: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { quality: QualityMap::Uniform { max: 1.0 }, rotation_sigma: 0.0, translation_sigma: 0.0, track_sigma: 2.0 }
    }
}

/// One generated frame of the toy generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyFrame {
    pub index: usize,
    pub seed: u64,
    pub quality: f64,
    pub camera: Camera,
    pub depth: Arc<DepthMap>,
    pub positions: Vec<Pixel>,
    pub confidences: Vec<f64>,
}

/// Index of the next frame to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyState {
    pub next: usize,
}

/// Replays a clean scene frame by frame, corrupting frame `t` by an amount
/// determined only by its step seed.
#[derive(Debug, Clone)]
pub struct ToyGenerator {
    scene: Arc<SceneBundle>,
    depths: Vec<Arc<DepthMap>>,
    pub config: ToyConfig,
}

impl ToyGenerator {
    pub fn new(scene: SceneBundle, config: ToyConfig) -> Self {
        let depths = scene.frames.iter().map(|f| Arc::new(f.depth.clone())).collect();
        Self { scene: Arc::new(scene), depths, config }
    }

    pub fn scene(&self) -> &SceneBundle {
        &self.scene
    }

    pub fn max_frames(&self) -> usize {
        self.scene.frame_count()
    }

    /// Frame `t` generated from step seed `z`.
    pub fn frame(&self, t: usize, z: u64) -> ToyFrame {
        let src = &self.scene.frames[t];
        let q = self.config.quality.quality(z);
        let mut camera = src.camera;
        let mut positions: Vec<Pixel> = self.scene.tracks.iter().map(|tr| tr.positions[t]).collect();
        if q > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(z));
            let dr = gauss3(&mut rng) * (q * self.config.rotation_sigma);
            let dt = gauss3(&mut rng) * (q * self.config.translation_sigma);
            if self.config.rotation_sigma > 0.0 {
                camera.extrinsics.rotation = rotation_from_axis_angle(&dr) * camera.extrinsics.rotation;
            }
            camera.extrinsics.translation += dt;
            let s = q * self.config.track_sigma;
            if s > 0.0 {
                for p in positions.iter_mut() {
                    p.u += s * rng.sample::<f64, _>(StandardNormal);
                    p.v += s * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        ToyFrame {
            index: t,
            seed: z,
            quality: q,
            camera,
            depth: Arc::clone(&self.depths[t]),
            confidences: self.scene.tracks.iter().map(|tr| tr.confidences[t]).collect(),
            positions,
        }
    }

    /// Assembles generated frames into a bundle.
    pub fn assemble(&self, frames: &[ToyFrame]) -> SceneBundle {
        let tracks = (0..self.scene.tracks.len())
            .map(|k| PointTrack {
                query_frame: 0,
                positions: frames.iter().map(|f| f.positions[k]).collect(),
                confidences: frames.iter().map(|f| f.confidences[k]).collect(),
            })
            .collect();
        SceneBundle {
            width: self.scene.width,
            height: self.scene.height,
            frames: frames
                .iter()
                .map(|f| Frame { camera: f.camera, depth: (*f.depth).clone(), image: None, attention: None })
                .collect(),
            tracks,
            provenance: Provenance { exporter: "toy".into(), ..Default::default() },
        }
    }
}

impl FrameGenerator for ToyGenerator {
    type State = ToyState;
    type Frame = ToyFrame;
    type Condition = ();

    fn init(&self, _seed: u64, _cond: &()) -> Result<ToyState, GeneratorError> {
        Ok(ToyState { next: 0 })
    }

    fn step(&self, state: &ToyState, z: u64, _cond: &()) -> Result<(ToyFrame, ToyState), GeneratorError> {
        if state.next >= self.max_frames() {
            return Err(GeneratorError::new(z, format!("scene has only {} frames", self.max_frames())));
        }
        Ok((self.frame(state.next, z), ToyState { next: state.next + 1 }))
    }
}

/// Pointwise reprojection reward on a span of toy frames.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToyRptVerifier {
    pub validity: ValidityConfig,
    pub normalized: bool,
}

impl ToyRptVerifier {
    pub fn error(&self, frames: &[ToyFrame]) -> Result<f64, VerifyError> {
        let tracks: Vec<PointTrack> = (0..frames.first().map_or(0, |f| f.positions.len()))
            .map(|k| PointTrack {
                query_frame: 0,
                positions: frames.iter().map(|f| f.positions[k]).collect(),
                confidences: frames.iter().map(|f| f.confidences[k]).collect(),
            })
            .collect();
        if tracks.is_empty() {
            return Err(VerifyError::Undefined("no tracks".into()));
        }
        let depths: Vec<&DepthMap> = frames.iter().map(|f| f.depth.as_ref()).collect();
        let cams: Vec<Camera> = frames.iter().map(|f| f.camera).collect();
        let pairs = filter_valid(&tracks, &depths, &cams, &self.validity).map_err(|e| VerifyError::Failed(e.to_string()))?;
        match reprojection_error_parts(&tracks, &depths, &cams, &pairs, &self.validity) {
            Ok(s) => Ok(if self.normalized { s.normalized_mean } else { s.mean }),
            Err(GeomError::NoValidPairs) => Err(VerifyError::Undefined("no valid point-frame pairs".into())),
            Err(e) => Err(VerifyError::Failed(e.to_string())),
        }
    }
}

impl Verifier<ToyFrame> for ToyRptVerifier {
    fn score(&self, frames: &[ToyFrame]) -> Result<f64, VerifyError> {
        self.error(frames).map(|e| -e)
    }

    fn min_frames(&self) -> usize {
        2
    }
}

/// Small scene suited to fast search experiments.
pub fn toy_scene_spec(frames: usize, seed: u64) -> SceneSpec {
    SceneSpec {
        points: 1500,
        extent: 2.0,
        trajectory: Trajectory::Orbit { distance: 4.0, elevation: 0.4, arc: 0.4 },
        frames,
        height: 48,
        width: 64,
        focal: 60.0,
        seed,
        images: false,
        attention: false,
        max_tracks: Some(48),
        splat_radius: 1.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{epi_reward, rpt_reward, rpx_reward, MetricKind, RewardConfig};

    fn small(seed: u64, traj: Trajectory) -> SceneSpec {
        SceneSpec { points: 1500, height: 48, width: 64, focal: 60.0, seed, trajectory: traj, frames: 5, ..SceneSpec::default() }
    }

    #[test]
    fn trajectories_are_self_consistent() {
        for kind in ["orbit", "dolly", "pan", "random_smooth"] {
            let spec = small(3, Trajectory::default_for(kind, 2.0).unwrap());
            let b = make_scene(&spec).unwrap();
            b.validate().unwrap();
            assert!(!b.tracks.is_empty(), "{kind}");
            let r = rpt_reward(&b, &RewardConfig::default()).unwrap();
            assert!(r.reward >= -1e-6, "{kind}: {}", r.reward);
            assert_eq!(r.valid_pairs, b.tracks.len() * 5 * 4, "{kind}");
            let e = epi_reward(&b, &RewardConfig::new(MetricKind::Epi)).unwrap();
            assert!(e.error < 1e-6, "{kind}: {}", e.error);
        }
    }

    #[test]
    fn rotations_orthonormal() {
        let spec = SceneSpec { frames: 8, ..small(1, Trajectory::default_for("orbit", 2.0).unwrap()) };
        let b = make_scene(&spec).unwrap();
        for f in &b.frames {
            assert!(f.camera.extrinsics.rotation_deviation() < 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let spec = small(9, Trajectory::default_for("random_smooth", 2.0).unwrap());
        assert_eq!(make_scene(&spec).unwrap(), make_scene(&spec).unwrap());
        let other = SceneSpec { seed: 10, ..spec.clone() };
        assert_ne!(make_scene(&spec).unwrap(), make_scene(&other).unwrap());
    }

    #[test]
    fn infeasible() {
        let spec = SceneSpec { trajectory: Trajectory::Orbit { distance: 0.5, elevation: 0.0, arc: 0.1 }, ..small(0, Trajectory::default_for("orbit", 2.0).unwrap()) };
        assert!(matches!(make_scene(&spec), Err(SynthError::InfeasibleTrajectory(_))));
        let spec = SceneSpec { frames: 1, ..SceneSpec::default() };
        assert!(matches!(make_scene(&spec), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn background_is_non_positive() {
        let b = make_scene(&small(2, Trajectory::default_for("orbit", 2.0).unwrap())).unwrap();
        let d = &b.frames[0].depth;
        assert_eq!(d.get(0, 0), 0.0);
        assert!(d.values.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn identity_corruption_is_bit_exact() {
        let b = make_scene(&small(4, Trajectory::default_for("orbit", 2.0).unwrap())).unwrap();
        let c = corrupt(&b, &CorruptionSpec { seed: 77, ..Default::default() }).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn corruption_records_spec_and_moves_geometry() {
        let b = make_scene(&small(4, Trajectory::default_for("orbit", 2.0).unwrap())).unwrap();
        let spec = CorruptionSpec { rotation_sigma: 0.01, seed: 5, ..Default::default() };
        let c = corrupt(&b, &spec).unwrap();
        assert_eq!(c.provenance.corruptions, vec![spec]);
        assert_eq!(c.tracks, b.tracks);
        assert!(rpt_reward(&c, &RewardConfig::default()).unwrap().reward < -1e-3);
        assert!(corrupt(&b, &CorruptionSpec { depth_sigma: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn drift_starts_at_query_frame() {
        let b = make_scene(&small(4, Trajectory::default_for("orbit", 2.0).unwrap())).unwrap();
        let c = corrupt(&b, &CorruptionSpec { track_sigma: 1.0, seed: 1, ..Default::default() }).unwrap();
        for (t0, t1) in b.tracks.iter().zip(&c.tracks) {
            assert_eq!(t0.positions[0], t1.positions[0]);
            assert_eq!(t1.confidences[0], 1.0);
            assert!(t1.confidences[1] < 1.0);
        }
    }

    #[test]
    fn rpx_exact_geometry_is_small() {
        let b = make_scene(&SceneSpec::default()).unwrap();
        let r = rpx_reward(&b, &RewardConfig::new(MetricKind::Rpx)).unwrap();
        assert!(r.error < 2.0 / 255.0, "{}", r.error);
        let noisy = corrupt(&b, &CorruptionSpec { depth_sigma: 0.05, seed: 3, ..Default::default() }).unwrap();
        let rn = rpx_reward(&noisy, &RewardConfig::new(MetricKind::Rpx)).unwrap();
        assert!(rn.error > r.error);
    }

    #[test]
    fn toy_generator_is_deterministic_and_clean_at_zero() {
        let scene = make_scene(&toy_scene_spec(4, 0)).unwrap();
        let g = ToyGenerator::new(scene, ToyConfig { quality: QualityMap::Constant(0.0), ..Default::default() });
        let frames: Vec<ToyFrame> = (0..4).map(|t| g.frame(t, 1000 + t as u64)).collect();
        assert_eq!(g.assemble(&frames).tracks, g.scene().tracks);
        let v = ToyRptVerifier::default();
        assert!(v.score(&frames).unwrap() >= -1e-6);

        let g = ToyGenerator::new(g.scene().clone(), ToyConfig::default());
        assert_eq!(g.frame(2, 42), g.frame(2, 42));
        assert_ne!(g.frame(2, 42), g.frame(2, 43));
        let q = QualityMap::Uniform { max: 1.0 };
        assert!((0..100).all(|z| (0.0..1.0).contains(&q.quality(z))));
    }
}
