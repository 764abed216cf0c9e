//! Geometric consistency rewards computed from a [`SceneBundle`].
//!
//! All metrics are errors (lower is better) and the reward is the negated
//! error. Metric code never invents a value when a metric is undefined; it
//! returns an error and leaves the policy to the caller.

pub mod fidelity;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::bundle::SceneBundle;
use crate::geom::{
    back_project, filter_valid_bundle, reprojection_error, Camera, GeomError, Pixel, ValidityConfig,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("reward undefined: {0}")]
    RewardUndefined(String),
    #[error("degenerate baseline between frames {0} and {1}")]
    DegenerateBaseline(usize, usize),
    #[error("bundle has no images")]
    MissingImages,
    #[error("no pixel lands inside the target frame for any pair")]
    NoOverlap,
    #[error("window length must be at least 1")]
    InvalidWindow,
    #[error("end frame {end} outside a {frames}-frame bundle")]
    FrameOutOfRange { end: usize, frames: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

impl RewardError {
    /// The metric cannot be evaluated on this input at all, as opposed to
    /// the input being broken.
    pub fn is_inapplicable(&self) -> bool {
        matches!(
            self,
            RewardError::RewardUndefined(_)
                | RewardError::DegenerateBaseline(..)
                | RewardError::MissingImages
                | RewardError::NoOverlap
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Rpt,
    Epi,
    Rpx,
}

impl MetricKind {
    /// Fewest frames a window must hold for the metric to be defined.
    pub fn min_frames(self) -> usize {
        2
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Rpt => "rpt",
            MetricKind::Epi => "epi",
            MetricKind::Rpx => "rpx",
        })
    }
}

impl FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rpt" => Ok(MetricKind::Rpt),
            "epi" => Ok(MetricKind::Epi),
            "rpx" => Ok(MetricKind::Rpx),
            other => Err(format!("unknown metric '{other}' (expected rpt, epi or rpx)")),
        }
    }
}

/// Number of frames in a sliding window, including the newest one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub w: usize,
}

impl WindowSpec {
    pub fn new(w: usize) -> Result<Self, RewardError> {
        if w == 0 {
            return Err(RewardError::InvalidWindow);
        }
        Ok(Self { w })
    }

    /// Window covering any sequence.
    pub fn unbounded() -> Self {
        Self { w: usize::MAX }
    }

    /// Inclusive `(start, end)` frame span of the window ending at `end`.
    pub fn span(&self, end: usize) -> (usize, usize) {
        (end + 1 - self.w.min(end + 1), end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpxConfig {
    /// Upper bound on ordered frame pairs; longer lists are stride-subsampled.
    pub max_pairs: usize,
    /// Skip pixels whose bilinear footprint in the target touches background.
    pub mask_background: bool,
    /// Skip pixels whose reprojected depth exceeds the target depth by more
    /// than this relative amount (occluded in the target).
    pub occlusion_tolerance: Option<f64>,
}

impl Default for RpxConfig {
    fn default() -> Self {
        Self { max_pairs: 64, mask_background: true, occlusion_tolerance: Some(0.05) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub metric: MetricKind,
    pub validity: ValidityConfig,
    /// Use the diagonal-normalized RPT error as the reward.
    pub normalized: bool,
    pub rpx: RpxConfig,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self::new(MetricKind::Rpt)
    }
}

impl RewardConfig {
    pub fn new(metric: MetricKind) -> Self {
        Self { metric, validity: ValidityConfig::default(), normalized: false, rpx: RpxConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub metric: MetricKind,
    pub reward: f64,
    /// Raw error in pixels (RPT, EPI) or intensity units (RPX).
    pub error: f64,
    /// Error divided by the image diagonal (RPT only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_error: Option<f64>,
    pub normalized: bool,
    /// Valid point-frame pairs (RPT), correspondences (EPI) or compared pixels (RPX).
    pub valid_pairs: usize,
    /// Mean error per frame of the evaluated span, `None` where nothing was measured.
    pub per_frame: Vec<Option<f64>>,
    /// Inclusive frame span evaluated.
    pub window: [usize; 2],
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rejections: BTreeMap<String, usize>,
}

/// Pointwise reprojection reward over the whole bundle.
pub fn rpt_reward(bundle: &SceneBundle, cfg: &RewardConfig) -> Result<RewardReport, RewardError> {
    let pairs = filter_valid_bundle(bundle, &cfg.validity)?;
    let stats = match reprojection_error(bundle, &pairs, &cfg.validity) {
        Ok(s) => s,
        Err(GeomError::NoValidPairs) => {
            return Err(RewardError::RewardUndefined(format!(
                "no valid point-frame pairs ({} rejected)",
                pairs.rejected.len()
            )))
        }
        Err(e) => return Err(e.into()),
    };
    let reward = if cfg.normalized { -stats.normalized_mean } else { -stats.mean };
    Ok(RewardReport {
        metric: MetricKind::Rpt,
        reward,
        error: stats.mean,
        normalized_error: Some(stats.normalized_mean),
        normalized: cfg.normalized,
        valid_pairs: stats.count,
        per_frame: stats.per_frame,
        window: [0, bundle.frame_count().saturating_sub(1)],
        rejections: pairs.rejection_counts(),
    })
}

fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

/// Baselines shorter than this are treated as pure rotations.
pub const MIN_BASELINE: f64 = 1e-9;

/// Fundamental matrix with `x_bᵀ F x_a = 0`, scaled to unit Frobenius norm.
pub fn fundamental_matrix(a: &Camera, b: &Camera) -> Result<Matrix3<f64>, RewardError> {
    let r = b.extrinsics.rotation * a.extrinsics.rotation.transpose();
    let t = b.extrinsics.translation - r * a.extrinsics.translation;
    let scale = a.extrinsics.translation.norm().max(b.extrinsics.translation.norm()).max(1.0);
    if t.norm() <= MIN_BASELINE * scale {
        return Err(RewardError::DegenerateBaseline(0, 1));
    }
    let ka = a.intrinsics.matrix().try_inverse().ok_or(GeomError::SingularIntrinsics)?;
    let kb = b.intrinsics.matrix().try_inverse().ok_or(GeomError::SingularIntrinsics)?;
    let f = kb.transpose() * skew(&t) * r * ka;
    Ok(f / f.norm())
}

/// First-order geometric (Sampson) distance of one correspondence, in pixels.
pub fn sampson_distance(f: &Matrix3<f64>, xa: &Pixel, xb: &Pixel) -> f64 {
    let a = Vector3::new(xa.u, xa.v, 1.0);
    let b = Vector3::new(xb.u, xb.v, 1.0);
    let fa = f * a;
    let ftb = f.transpose() * b;
    let num = b.dot(&fa);
    let den = fa.x * fa.x + fa.y * fa.y + ftb.x * ftb.x + ftb.y * ftb.y;
    if den <= 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    num.abs() / den.sqrt()
}

/// Mean Sampson distance of `correspondences` between two posed cameras.
pub fn sampson_epipolar(correspondences: &[(Pixel, Pixel)], a: &Camera, b: &Camera) -> Result<f64, RewardError> {
    if correspondences.is_empty() {
        return Err(RewardError::RewardUndefined("no correspondences".into()));
    }
    let f = fundamental_matrix(a, b)?;
    let sum: f64 = correspondences.iter().map(|(xa, xb)| sampson_distance(&f, xa, xb)).sum();
    Ok(sum / correspondences.len() as f64)
}

/// Mean Sampson distance over track correspondences of every frame pair
/// `i < j` with a usable baseline.
pub fn epi_reward(bundle: &SceneBundle, cfg: &RewardConfig) -> Result<RewardReport, RewardError> {
    let n = bundle.frame_count();
    let (w, h) = (bundle.width, bundle.height);
    let v = &cfg.validity;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let results: Vec<Result<Vec<f64>, RewardError>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (ca, cb) = (&bundle.frames[i].camera, &bundle.frames[j].camera);
            let f = fundamental_matrix(ca, cb).map_err(|e| match e {
                RewardError::DegenerateBaseline(..) => RewardError::DegenerateBaseline(i, j),
                other => other,
            })?;
            Ok(bundle
                .tracks
                .iter()
                .filter(|t| {
                    t.confidences[i] >= v.min_confidence
                        && t.confidences[j] >= v.min_confidence
                        && t.positions[i].in_bounds(w, h, v.bounds_margin)
                        && t.positions[j].in_bounds(w, h, v.bounds_margin)
                })
                .map(|t| sampson_distance(&f, &t.positions[i], &t.positions[j]))
                .collect())
        })
        .collect();
    let mut sums = vec![(0.0f64, 0usize); n];
    let (mut total, mut count) = (0.0, 0usize);
    let mut degenerate = None;
    let mut usable = 0;
    for (&(i, j), r) in pairs.iter().zip(results) {
        match r {
            Ok(d) => {
                usable += 1;
                for x in d {
                    total += x;
                    count += 1;
                    sums[i].0 += x;
                    sums[i].1 += 1;
                    sums[j].0 += x;
                    sums[j].1 += 1;
                }
            }
            Err(e @ RewardError::DegenerateBaseline(..)) => {
                log::debug!("epi: skipping pair ({i}, {j}): {e}");
                degenerate.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if usable == 0 {
        return Err(degenerate.unwrap_or_else(|| RewardError::RewardUndefined("fewer than two frames".into())));
    }
    if count == 0 {
        return Err(RewardError::RewardUndefined("no usable correspondences".into()));
    }
    let error = total / count as f64;
    Ok(RewardReport {
        metric: MetricKind::Epi,
        reward: -error,
        error,
        normalized_error: None,
        normalized: false,
        valid_pairs: count,
        per_frame: sums.iter().map(|&(s, c)| (c > 0).then(|| s / c as f64)).collect(),
        window: [0, n.saturating_sub(1)],
        rejections: BTreeMap::new(),
    })
}

/// Ordered pairs `(i, j)`, `i ≠ j`, stride-subsampled to at most `cap`.
pub fn rpx_pairs(n: usize, cap: usize) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    if cap == 0 || all.len() <= cap {
        return all;
    }
    (0..cap).map(|k| all[k * all.len() / cap]).collect()
}

/// Sum and count of absolute intensity differences between frame `i` and
/// frame `j` warped into it.
fn warp_pair(bundle: &SceneBundle, i: usize, j: usize, cfg: &RewardConfig) -> (f64, usize) {
    let src = &bundle.frames[i];
    let dst = &bundle.frames[j];
    let (Some(img_i), Some(img_j)) = (&src.image, &dst.image) else { return (0.0, 0) };
    let (w, h) = (bundle.width, bundle.height);
    let mut sum = 0.0;
    let mut count = 0;
    for r in 0..h {
        for c in 0..w {
            let d = src.depth.get(r, c);
            let px = Pixel::new(c as f64, r as f64);
            let Ok(x) = back_project(&px, d, &src.camera.intrinsics, &src.camera.extrinsics) else { continue };
            let pc = dst.camera.extrinsics.transform(&x);
            if !(pc.z > cfg.validity.min_depth) {
                continue;
            }
            let q = dst.camera.intrinsics.project(&pc.coords);
            if cfg.rpx.mask_background || cfg.rpx.occlusion_tolerance.is_some() {
                let Some(dj) = dst.depth.bilinear(&q) else {
                    if cfg.rpx.mask_background {
                        continue;
                    }
                    if let Some(v) = img_j.sample(&q) {
                        sum += (img_i.intensity(r, c) - v).abs();
                        count += 1;
                    }
                    continue;
                };
                if let Some(tol) = cfg.rpx.occlusion_tolerance {
                    if pc.z > dj * (1.0 + tol) {
                        continue;
                    }
                }
            }
            if let Some(v) = img_j.sample(&q) {
                sum += (img_i.intensity(r, c) - v).abs();
                count += 1;
            }
        }
    }
    (sum, count)
}

/// Pixelwise photometric reward from dense depth-and-pose warping.
pub fn rpx_reward(bundle: &SceneBundle, cfg: &RewardConfig) -> Result<RewardReport, RewardError> {
    if !bundle.has_images() {
        return Err(RewardError::MissingImages);
    }
    let n = bundle.frame_count();
    let pairs = rpx_pairs(n, cfg.rpx.max_pairs);
    let results: Vec<(f64, usize)> = pairs.par_iter().map(|&(i, j)| warp_pair(bundle, i, j, cfg)).collect();
    let mut frame_sums = vec![(0.0f64, 0usize); n];
    let (mut total, mut used, mut pixels) = (0.0, 0usize, 0usize);
    for (&(_, j), &(s, c)) in pairs.iter().zip(&results) {
        if c == 0 {
            continue;
        }
        let m = s / c as f64;
        total += m;
        used += 1;
        pixels += c;
        frame_sums[j].0 += m;
        frame_sums[j].1 += 1;
    }
    if used == 0 {
        return Err(RewardError::NoOverlap);
    }
    let error = total / used as f64;
    Ok(RewardReport {
        metric: MetricKind::Rpx,
        reward: -error,
        error,
        normalized_error: None,
        normalized: false,
        valid_pairs: pixels,
        per_frame: frame_sums.iter().map(|&(s, c)| (c > 0).then(|| s / c as f64)).collect(),
        window: [0, n.saturating_sub(1)],
        rejections: BTreeMap::new(),
    })
}

/// Evaluates `cfg.metric` over the whole bundle.
pub fn score(bundle: &SceneBundle, cfg: &RewardConfig) -> Result<RewardReport, RewardError> {
    match cfg.metric {
        MetricKind::Rpt => rpt_reward(bundle, cfg),
        MetricKind::Epi => epi_reward(bundle, cfg),
        MetricKind::Rpx => rpx_reward(bundle, cfg),
    }
}

/// Evaluates `cfg.metric` on frames `max(0, end-w+1) ..= end`.
pub fn windowed_reward(
    bundle: &SceneBundle,
    window: WindowSpec,
    end: usize,
    cfg: &RewardConfig,
) -> Result<RewardReport, RewardError> {
    if window.w == 0 {
        return Err(RewardError::InvalidWindow);
    }
    let n = bundle.frame_count();
    if end >= n {
        return Err(RewardError::FrameOutOfRange { end, frames: n });
    }
    let (start, end) = window.span(end);
    if start == 0 && end + 1 == n {
        return score(bundle, cfg);
    }
    if end - start + 1 < cfg.metric.min_frames() {
        return Err(RewardError::RewardUndefined(format!("window [{start}, {end}] holds a single frame")));
    }
    let mut report = score(&bundle.window(start, end), cfg)?;
    report.window = [start, end];
    Ok(report)
}

/// Windowed reward for every end frame, evaluated concurrently.
pub fn windowed_rewards(
    bundle: &SceneBundle,
    window: WindowSpec,
    cfg: &RewardConfig,
) -> Vec<Result<RewardReport, RewardError>> {
    (0..bundle.frame_count()).into_par_iter().map(|end| windowed_reward(bundle, window, end, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{Frame, Image, Provenance};
    use crate::geom::{rotation_from_axis_angle, CameraExtrinsics, CameraIntrinsics, DepthMap, PointTrack};
    use nalgebra::Point3;

    fn cam(rot: Vector3<f64>, t: Vector3<f64>) -> Camera {
        Camera::new(
            CameraIntrinsics::new(80.0, 90.0, 31.5, 23.5).unwrap(),
            CameraExtrinsics::new(rotation_from_axis_angle(&rot), t).unwrap(),
        )
    }

    fn project(c: &Camera, x: &Point3<f64>) -> Pixel {
        let pc = c.extrinsics.transform(x);
        c.intrinsics.project(&pc.coords)
    }

    #[test]
    fn exact_correspondences_have_zero_sampson() {
        let a = cam(Vector3::new(0.01, -0.02, 0.03), Vector3::new(0.1, 0.0, 4.0));
        let b = cam(Vector3::new(-0.05, 0.2, 0.0), Vector3::new(-0.4, 0.1, 4.2));
        let pts: Vec<Point3<f64>> = (0..50)
            .map(|k| {
                let s = k as f64;
                Point3::new((s * 0.37).sin(), (s * 0.71).cos() * 0.8, (s * 0.13).sin() * 0.5)
            })
            .collect();
        let corr: Vec<(Pixel, Pixel)> = pts.iter().map(|p| (project(&a, p), project(&b, p))).collect();
        assert!(sampson_epipolar(&corr, &a, &b).unwrap() < 1e-6);
    }

    #[test]
    fn perpendicular_offset_matches_direct_formula() {
        let a = cam(Vector3::zeros(), Vector3::new(0.0, 0.0, 4.0));
        let b = cam(Vector3::new(0.0, 0.1, 0.0), Vector3::new(-0.5, 0.0, 4.0));
        let x = Point3::new(0.2, -0.1, 0.3);
        let (pa, pb) = (project(&a, &x), project(&b, &x));
        // Epipolar line in b: l = F·pa, unit normal (l0, l1)/|.|
        let f = fundamental_matrix(&a, &b).unwrap();
        let l = f * Vector3::new(pa.u, pa.v, 1.0);
        let nrm = (l.x * l.x + l.y * l.y).sqrt();
        let delta = 0.01;
        let pb2 = Pixel::new(pb.u + delta * l.x / nrm, pb.v + delta * l.y / nrm);
        // Independent scalar evaluation of the Sampson expression.
        let fm = |r: usize, c: usize| f[(r, c)];
        let xa = [pa.u, pa.v, 1.0];
        let xb = [pb2.u, pb2.v, 1.0];
        let mut num = 0.0;
        let mut fxa = [0.0; 3];
        let mut ftxb = [0.0; 3];
        for r in 0..3 {
            for c in 0..3 {
                num += xb[r] * fm(r, c) * xa[c];
                fxa[r] += fm(r, c) * xa[c];
                ftxb[c] += fm(r, c) * xb[r];
            }
        }
        let direct = num.abs() / (fxa[0].powi(2) + fxa[1].powi(2) + ftxb[0].powi(2) + ftxb[1].powi(2)).sqrt();
        let got = sampson_epipolar(&[(pa, pb2)], &a, &b).unwrap();
        assert!((got - direct).abs() < 1e-12);
        // Moving off the line by delta changes the numerator by delta·|(l0, l1)|.
        let factor = nrm / (fxa[0].powi(2) + fxa[1].powi(2) + ftxb[0].powi(2) + ftxb[1].powi(2)).sqrt();
        assert!((got - delta * factor).abs() < 1e-9, "{got} vs {}", delta * factor);
        assert!(got > 0.0 && got <= delta * (1.0 + 1e-9));
    }

    #[test]
    fn zero_baseline_is_degenerate() {
        let a = cam(Vector3::zeros(), Vector3::new(0.0, 0.0, 4.0));
        // Same optical center, different orientation.
        let r = rotation_from_axis_angle(&Vector3::new(0.0, 0.3, 0.0));
        let b = Camera::new(a.intrinsics, CameraExtrinsics::new(r, r * Vector3::new(0.0, 0.0, 4.0)).unwrap());
        let corr = [(Pixel::new(1.0, 1.0), Pixel::new(2.0, 2.0))];
        assert!(matches!(sampson_epipolar(&corr, &a, &b), Err(RewardError::DegenerateBaseline(..))));
    }

    /// Two frames of a fronto-parallel plane at depth 5 with constant texture.
    fn plane_bundle(shift: f64, images: bool) -> SceneBundle {
        let (w, h) = (16, 12);
        let intr = CameraIntrinsics::new(20.0, 20.0, 7.5, 5.5).unwrap();
        let frames = (0..2)
            .map(|i| Frame {
                camera: Camera::new(
                    intr,
                    CameraExtrinsics::new(Matrix3::identity(), Vector3::new(-0.1 * i as f64, 0.0, 0.0)).unwrap(),
                ),
                depth: DepthMap::filled(h, w, 5.0),
                image: images.then(|| Image::gray(h, w, vec![0.5; h * w])),
                attention: None,
            })
            .collect();
        let tracks = (0..6)
            .map(|k| {
                let (u, v) = (3.0 + k as f64, 4.0);
                PointTrack {
                    query_frame: 0,
                    positions: vec![Pixel::new(u, v), Pixel::new(u - 0.4 + shift, v)],
                    confidences: vec![1.0, 1.0],
                }
            })
            .collect();
        SceneBundle { width: w, height: h, frames, tracks, provenance: Provenance::default() }
    }

    #[test]
    fn rpt_on_plane() {
        let b = plane_bundle(0.0, false);
        let mut cfg = RewardConfig::default();
        cfg.validity.reference_frames = crate::geom::ReferenceFrames::QueryOnly;
        let r = rpt_reward(&b, &cfg).unwrap();
        assert!(r.reward.abs() < 1e-12 && r.valid_pairs == 6);
        let r = rpt_reward(&plane_bundle(0.25, false), &cfg).unwrap();
        assert!((r.error - 0.25).abs() < 1e-12);
        assert_eq!(r.reward, -r.error);
    }

    #[test]
    fn rpx_identity_and_missing_images() {
        let b = plane_bundle(0.0, true);
        let mut same = b.clone();
        same.frames[1] = same.frames[0].clone();
        let r = rpx_reward(&same, &RewardConfig::new(MetricKind::Rpx)).unwrap();
        assert_eq!(r.error, 0.0);
        assert!(r.valid_pairs > 0);
        assert_eq!(rpx_reward(&plane_bundle(0.0, false), &RewardConfig::new(MetricKind::Rpx)), Err(RewardError::MissingImages));
    }

    #[test]
    fn pair_cap() {
        assert_eq!(rpx_pairs(3, 64).len(), 6);
        let p = rpx_pairs(10, 64);
        assert_eq!(p.len(), 64);
        assert_eq!(p[0], (0, 1));
        let mut d = p.clone();
        d.dedup();
        assert_eq!(d.len(), 64);
    }

    #[test]
    fn single_frame_window_is_undefined() {
        let b = plane_bundle(0.0, false);
        let cfg = RewardConfig::default();
        let r = windowed_reward(&b, WindowSpec::new(1).unwrap(), 1, &cfg);
        assert!(matches!(r, Err(RewardError::RewardUndefined(_))));
        let full = score(&b, &cfg).unwrap();
        assert_eq!(windowed_reward(&b, WindowSpec::new(5).unwrap(), 1, &cfg).unwrap(), full);
        assert_eq!(WindowSpec::new(0), Err(RewardError::InvalidWindow));
        assert_eq!(WindowSpec::new(3).unwrap().span(1), (0, 1));
        assert_eq!(WindowSpec::new(3).unwrap().span(7), (5, 7));
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("RPX".parse::<MetricKind>().unwrap(), MetricKind::Rpx);
        assert!("lpips".parse::<MetricKind>().is_err());
        assert_eq!(serde_json::to_string(&MetricKind::Epi).unwrap(), "\"epi\"");
    }
}
