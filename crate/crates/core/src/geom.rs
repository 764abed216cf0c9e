//! Pinhole camera geometry and the pointwise reprojection error.
//!
//! Conventions: world→camera extrinsics (`X_c = R·X_w + t`), pixel origin at
//! the top-left corner, `u` along columns, `v` along rows, pixel centers at
//! integer coordinates. Everything is `f64`.

use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::bundle::SceneBundle;

/// Points closer than this to the principal plane cannot be projected.
pub const PRINCIPAL_PLANE_EPS: f64 = 1e-12;

/// Tolerance used when validating ingested rotation matrices.
pub const ROTATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("intrinsics are not invertible")]
    SingularIntrinsics,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal with determinant +1 (deviation {0:e})")]
    InvalidRotation(f64),
    #[error("point lies on the principal plane (z = {0:e})")]
    DegenerateProjection(f64),
    #[error("frame count mismatch: {0}")]
    FrameMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("no valid point-frame pairs")]
    NoValidPairs,
}

/// A continuous pixel location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn in_bounds(&self, width: usize, height: usize, margin: f64) -> bool {
        self.u >= margin
            && self.v >= margin
            && self.u < width as f64 - margin
            && self.v < height as f64 - margin
    }
}

pub type WorldPoint = Point3<f64>;
pub type CameraPoint = Point3<f64>;

/// Pinhole intrinsics `K = [[fx, skew, cx], [0, fy, cy], [0, 0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeomError> {
        Self::with_skew(fx, fy, cx, cy, 0.0)
    }

    pub fn with_skew(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64) -> Result<Self, GeomError> {
        let k = Self { fx, fy, cx, cy, skew };
        k.validate()?;
        Ok(k)
    }

    pub fn identity() -> Self {
        Self { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0, skew: 0.0 }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        let all = [self.fx, self.fy, self.cx, self.cy, self.skew];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(GeomError::InvalidIntrinsics("non-finite entry".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeomError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    /// Parses a 3×3 matrix, which must be upper-triangular with bottom row `(0, 0, 1)`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self, GeomError> {
        if m[(1, 0)] != 0.0 || m[(2, 0)] != 0.0 || m[(2, 1)] != 0.0 || m[(2, 2)] != 1.0 {
            return Err(GeomError::InvalidIntrinsics(
                "matrix must be upper-triangular with bottom row (0,0,1)".into(),
            ));
        }
        Self::with_skew(m[(0, 0)], m[(1, 1)], m[(0, 2)], m[(1, 2)], m[(0, 1)])
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `K⁻¹·[u, v, 1]ᵀ`, written out for the upper-triangular case.
    pub fn unproject_ray(&self, px: &Pixel) -> Result<Vector3<f64>, GeomError> {
        if !(self.fx != 0.0 && self.fy != 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(GeomError::SingularIntrinsics);
        }
        let y = (px.v - self.cy) / self.fy;
        let x = (px.u - self.cx - self.skew * y) / self.fx;
        Ok(Vector3::new(x, y, 1.0))
    }

    /// `K·X` followed by division by `z`.
    pub fn project(&self, p: &Vector3<f64>) -> Pixel {
        let x = p.x / p.z;
        let y = p.y / p.z;
        Pixel::new(self.fx * x + self.skew * y + self.cx, self.fy * y + self.cy)
    }
}

/// World→camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        let e = Self { rotation, translation };
        e.validate()?;
        Ok(e)
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Max abs deviation of `RᵀR` from identity and of `det R` from 1.
    pub fn rotation_deviation(&self) -> f64 {
        let rtr = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let ortho = rtr.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        ortho.max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if self.rotation.iter().chain(self.translation.iter()).any(|x| !x.is_finite()) {
            return Err(GeomError::InvalidRotation(f64::INFINITY));
        }
        let dev = self.rotation_deviation();
        if dev > ROTATION_TOL {
            return Err(GeomError::InvalidRotation(dev));
        }
        Ok(())
    }

    /// Inverse transform (camera→world expressed as world→camera of the inverse).
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform(&self, p: &WorldPoint) -> CameraPoint {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> WorldPoint {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

impl Camera {
    pub fn new(intrinsics: CameraIntrinsics, extrinsics: CameraExtrinsics) -> Self {
        Self { intrinsics, extrinsics }
    }
}

/// Lifts `pixel` at camera-frame depth `depth` to world space:
/// `X_w = R⁻¹(d·K⁻¹[u, v, 1]ᵀ − t)`.
pub fn back_project(
    pixel: &Pixel,
    depth: f64,
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
) -> Result<WorldPoint, GeomError> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(GeomError::NonPositiveDepth(depth));
    }
    let ray = intr.unproject_ray(pixel)?;
    let cam = ray * depth - extr.translation;
    Ok(Point3::from(extr.rotation.transpose() * cam))
}

/// Projects a world point into a camera; returns the pixel and the camera-frame depth.
///
/// Points behind the camera are projected too; only the principal plane is rejected.
pub fn reproject(
    point: &WorldPoint,
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
) -> Result<(Pixel, f64), GeomError> {
    let pc = extr.transform(point);
    if pc.z.abs() < PRINCIPAL_PLANE_EPS {
        return Err(GeomError::DegenerateProjection(pc.z));
    }
    Ok((intr.project(&pc.coords), pc.z))
}

/// Row-major depth grid of camera-frame `z` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl DepthMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, GeomError> {
        if values.len() != height * width {
            return Err(GeomError::FrameMismatch(format!(
                "depth map {}x{} has {} values",
                height,
                width,
                values.len()
            )));
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self { height, width, values: vec![value; height * width] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    /// Depth at the nearest integer pixel; `None` outside the grid.
    pub fn nearest(&self, px: &Pixel) -> Option<f64> {
        let col = px.u.round();
        let row = px.v.round();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some(self.get(row as usize, col as usize))
    }

    /// Bilinear depth; `None` unless all four neighbours are usable.
    pub fn bilinear(&self, px: &Pixel) -> Option<f64> {
        let x0 = px.u.floor();
        let y0 = px.v.floor();
        if x0 < 0.0 || y0 < 0.0 {
            return None;
        }
        let (c0, r0) = (x0 as usize, y0 as usize);
        if c0 + 1 >= self.width || r0 + 1 >= self.height {
            // Exactly on the last row/column still has a well-defined value.
            if (px.u == x0 && c0 < self.width) && (px.v == y0 && r0 < self.height) {
                return Some(self.get(r0, c0));
            }
            return None;
        }
        let (a, b) = (px.u - x0, px.v - y0);
        let d = [
            self.get(r0, c0),
            self.get(r0, c0 + 1),
            self.get(r0 + 1, c0),
            self.get(r0 + 1, c0 + 1),
        ];
        if d.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return None;
        }
        Some((1.0 - a) * (1.0 - b) * d[0] + a * (1.0 - b) * d[1] + (1.0 - a) * b * d[2] + a * b * d[3])
    }
}

/// One tracked point: a position and confidence in every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTrack {
    /// Frame the tracker was queried from.
    pub query_frame: usize,
    pub positions: Vec<Pixel>,
    pub confidences: Vec<f64>,
}

impl PointTrack {
    pub fn frames(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceFrames {
    /// Every ordered pair `i ≠ j`.
    #[default]
    All,
    /// Only the frame each track was queried from.
    QueryOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthLookup {
    #[default]
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityConfig {
    pub min_confidence: f64,
    pub min_depth: f64,
    pub bounds_margin: f64,
    pub reference_frames: ReferenceFrames,
    pub depth_lookup: DepthLookup,
}

impl Default for ValidityConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.5,
            min_depth: 1e-6,
            bounds_margin: 0.0,
            reference_frames: ReferenceFrames::All,
            depth_lookup: DepthLookup::Nearest,
        }
    }
}

/// First predicate a `(point, reference, target)` triple failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MinConfidence,
    QueryOutOfBounds,
    InvalidDepth,
    BehindCamera,
    OutOfBounds,
    TrackOutOfBounds,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MinConfidence => "min_confidence",
            Self::QueryOutOfBounds => "query_out_of_bounds",
            Self::InvalidDepth => "invalid_depth",
            Self::BehindCamera => "behind_camera",
            Self::OutOfBounds => "out_of_bounds",
            Self::TrackOutOfBounds => "track_out_of_bounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairIndex {
    pub point: usize,
    pub reference: usize,
    pub target: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidPairSet {
    pub entries: Vec<PairIndex>,
    pub rejected: Vec<(PairIndex, RejectReason)>,
}

impl ValidPairSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rejection_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for (_, r) in &self.rejected {
            *out.entry(r.as_str().to_string()).or_insert(0) += 1;
        }
        out
    }
}

/// Predicted location of `track` in `target` via its depth in `reference`.
fn predict(
    track: &PointTrack,
    reference: usize,
    target: usize,
    depth: &DepthMap,
    cams: &[Camera],
    cfg: &ValidityConfig,
) -> Result<(Pixel, f64), RejectReason> {
    let query = &track.positions[reference];
    let d = match cfg.depth_lookup {
        DepthLookup::Nearest => depth.nearest(query),
        DepthLookup::Bilinear => {
            if depth.nearest(query).is_none() {
                None
            } else {
                Some(depth.bilinear(query).unwrap_or(f64::NAN))
            }
        }
    }
    .ok_or(RejectReason::QueryOutOfBounds)?;
    if !(d.is_finite() && d > 0.0) {
        return Err(RejectReason::InvalidDepth);
    }
    let src = &cams[reference];
    let dst = &cams[target];
    let world = back_project(query, d, &src.intrinsics, &src.extrinsics)
        .map_err(|_| RejectReason::InvalidDepth)?;
    let pc = dst.extrinsics.transform(&world);
    if !(pc.z > cfg.min_depth) || pc.z.abs() < PRINCIPAL_PLANE_EPS {
        return Err(RejectReason::BehindCamera);
    }
    Ok((dst.intrinsics.project(&pc.coords), pc.z))
}

fn check_triple(
    track: &PointTrack,
    reference: usize,
    target: usize,
    depths: &[&DepthMap],
    cams: &[Camera],
    cfg: &ValidityConfig,
) -> Result<(Pixel, Pixel), RejectReason> {
    if !(track.confidences[target] >= cfg.min_confidence) {
        return Err(RejectReason::MinConfidence);
    }
    let depth = depths[reference];
    let (pred, _) = predict(track, reference, target, depth, cams, cfg)?;
    let (w, h) = (depths[target].width, depths[target].height);
    if !pred.in_bounds(w, h, cfg.bounds_margin) {
        return Err(RejectReason::OutOfBounds);
    }
    let observed = track.positions[target];
    if !observed.in_bounds(w, h, cfg.bounds_margin) {
        return Err(RejectReason::TrackOutOfBounds);
    }
    Ok((pred, observed))
}

fn reference_frames(track: &PointTrack, n: usize, cfg: &ValidityConfig) -> Vec<usize> {
    match cfg.reference_frames {
        ReferenceFrames::All => (0..n).collect(),
        ReferenceFrames::QueryOnly => {
            if track.query_frame < n {
                vec![track.query_frame]
            } else {
                Vec::new()
            }
        }
    }
}

/// Enumerates `(point, reference, target)` triples in lexicographic order and
/// keeps those passing every validity predicate.
pub fn filter_valid(
    tracks: &[PointTrack],
    depths: &[&DepthMap],
    cams: &[Camera],
    cfg: &ValidityConfig,
) -> Result<ValidPairSet, GeomError> {
    if tracks.is_empty() {
        return Err(GeomError::EmptyInput);
    }
    let n = cams.len();
    if depths.len() != n {
        return Err(GeomError::FrameMismatch(format!("{} depth maps for {} cameras", depths.len(), n)));
    }
    for (k, t) in tracks.iter().enumerate() {
        if t.positions.len() != n || t.confidences.len() != n {
            return Err(GeomError::FrameMismatch(format!(
                "track {k} spans {} frames, expected {n}",
                t.positions.len()
            )));
        }
    }
    let mut set = ValidPairSet::default();
    for (k, track) in tracks.iter().enumerate() {
        for i in reference_frames(track, n, cfg) {
            for j in (0..n).filter(|&j| j != i) {
                let idx = PairIndex { point: k, reference: i, target: j };
                match check_triple(track, i, j, depths, cams, cfg) {
                    Ok(_) => set.entries.push(idx),
                    Err(r) => set.rejected.push((idx, r)),
                }
            }
        }
    }
    Ok(set)
}

/// Convenience wrapper pulling tracks, depths and cameras out of a bundle.
pub fn filter_valid_bundle(bundle: &SceneBundle, cfg: &ValidityConfig) -> Result<ValidPairSet, GeomError> {
    let depths: Vec<&DepthMap> = bundle.frames.iter().map(|f| &f.depth).collect();
    filter_valid(&bundle.tracks, &depths, &bundle.cameras(), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Mean L2 pixel distance over valid pairs.
    pub mean: f64,
    /// `mean` divided by the image diagonal.
    pub normalized_mean: f64,
    pub max: f64,
    pub count: usize,
    pub per_pair: Vec<f64>,
    /// Mean distance grouped by target frame.
    pub per_frame: Vec<Option<f64>>,
}

/// Mean distance between geometry-predicted and tracked pixels over `pairs`.
///
/// Per-pair terms may be evaluated in parallel; they are summed in pair
/// order so the result does not depend on the worker count.
pub fn reprojection_error(
    bundle: &SceneBundle,
    pairs: &ValidPairSet,
    cfg: &ValidityConfig,
) -> Result<ErrorStats, GeomError> {
    let depths: Vec<&DepthMap> = bundle.frames.iter().map(|f| &f.depth).collect();
    reprojection_error_parts(&bundle.tracks, &depths, &bundle.cameras(), pairs, cfg)
}

/// [`reprojection_error`] over borrowed per-frame data.
pub fn reprojection_error_parts(
    tracks: &[PointTrack],
    depths: &[&DepthMap],
    cams: &[Camera],
    pairs: &ValidPairSet,
    cfg: &ValidityConfig,
) -> Result<ErrorStats, GeomError> {
    if pairs.is_empty() {
        return Err(GeomError::NoValidPairs);
    }
    let n = cams.len();
    if depths.len() != n {
        return Err(GeomError::FrameMismatch(format!("{} depth maps for {} cameras", depths.len(), n)));
    }
    let per_pair: Vec<f64> = pairs
        .entries
        .par_iter()
        .map(|p| {
            let Some(track) = tracks.get(p.point) else { return f64::NAN };
            if p.reference >= n || p.target >= n || track.positions.len() != n {
                return f64::NAN;
            }
            match predict(track, p.reference, p.target, depths[p.reference], cams, cfg) {
                Ok((pred, _)) => pred.distance(&track.positions[p.target]),
                Err(_) => f64::NAN,
            }
        })
        .collect();
    if per_pair.iter().any(|d| !d.is_finite()) {
        return Err(GeomError::FrameMismatch("pair set does not match bundle".into()));
    }
    let mut sums = vec![(0.0f64, 0usize); n];
    let mut total = 0.0;
    let mut max = 0.0f64;
    for (p, d) in pairs.entries.iter().zip(&per_pair) {
        total += d;
        max = max.max(*d);
        let s = &mut sums[p.target];
        s.0 += d;
        s.1 += 1;
    }
    let mean = total / per_pair.len() as f64;
    let diag = (depths[0].width as f64).hypot(depths[0].height as f64);
    Ok(ErrorStats {
        mean,
        normalized_mean: mean / diag,
        max,
        count: per_pair.len(),
        per_pair,
        per_frame: sums.iter().map(|&(s, c)| (c > 0).then(|| s / c as f64)).collect(),
    })
}

/// Rotation matrix from an axis-angle vector (Rodrigues).
pub fn rotation_from_axis_angle(w: &Vector3<f64>) -> Matrix3<f64> {
    nalgebra::Rotation3::new(*w).into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix4;
    use proptest::prelude::*;

    fn cam_k(f: f64, c: f64) -> CameraIntrinsics {
        CameraIntrinsics::new(f, f, c, c).unwrap()
    }

    #[test]
    fn identity_camera_backprojects_origin_ray() {
        let p = back_project(&Pixel::new(0.0, 0.0), 1.0, &CameraIntrinsics::identity(), &CameraExtrinsics::identity())
            .unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn principal_point_is_optical_axis() {
        let p = back_project(&Pixel::new(50.0, 50.0), 3.0, &cam_k(100.0, 50.0), &CameraExtrinsics::identity())
            .unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 3.0));
    }

    #[test]
    fn reproject_hand_example() {
        let extr = CameraExtrinsics::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let (px, z) = reproject(&Point3::new(0.0, 0.0, 5.0), &CameraIntrinsics::identity(), &extr).unwrap();
        assert_abs_diff_eq!(px.u, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(px.v, 0.0, epsilon = 1e-15);
        assert_eq!(z, 5.0);
    }

    #[test]
    fn principal_plane_is_degenerate() {
        let r = reproject(&Point3::new(1.0, 2.0, 0.0), &CameraIntrinsics::identity(), &CameraExtrinsics::identity());
        assert!(matches!(r, Err(GeomError::DegenerateProjection(_))));
    }

    #[test]
    fn behind_camera_is_reported_not_dropped() {
        let (_, z) = reproject(&Point3::new(0.0, 0.0, -2.0), &CameraIntrinsics::identity(), &CameraExtrinsics::identity())
            .unwrap();
        assert_eq!(z, -2.0);
    }

    #[test]
    fn depth_errors() {
        let k = CameraIntrinsics::identity();
        let e = CameraExtrinsics::identity();
        assert_eq!(back_project(&Pixel::new(0.0, 0.0), 0.0, &k, &e), Err(GeomError::NonPositiveDepth(0.0)));
        assert!(back_project(&Pixel::new(0.0, 0.0), -1.0, &k, &e).is_err());
        let singular = CameraIntrinsics { fx: 0.0, fy: 1.0, cx: 0.0, cy: 0.0, skew: 0.0 };
        assert_eq!(back_project(&Pixel::new(0.0, 0.0), 1.0, &singular, &e), Err(GeomError::SingularIntrinsics));
    }

    #[test]
    fn rejects_bad_rotation_and_intrinsics() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0; // reflection, det = -1
        assert!(CameraExtrinsics::new(r, Vector3::zeros()).is_err());
        assert!(CameraIntrinsics::new(-1.0, 1.0, 0.0, 0.0).is_err());
        let bad = Matrix3::new(1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraIntrinsics::from_matrix(&bad).is_err());
    }

    #[test]
    fn extrinsics_inverse_composes_to_identity() {
        let r = rotation_from_axis_angle(&Vector3::new(0.3, -0.2, 0.9));
        let e = CameraExtrinsics::new(r, Vector3::new(1.0, -2.0, 0.5)).unwrap();
        let id = e.compose(&e.inverse());
        assert!((id.rotation - Matrix3::identity()).amax() < 1e-9);
        assert!(id.translation.amax() < 1e-9);
    }

    fn arb_camera() -> impl Strategy<Value = Camera> {
        (
            (50.0f64..800.0, 50.0f64..800.0, 0.0f64..640.0, 0.0f64..480.0, -2.0f64..2.0),
            (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0),
            (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
        )
            .prop_map(|((fx, fy, cx, cy, s), (a, b, c), (x, y, z))| {
                let k = CameraIntrinsics::with_skew(fx, fy, cx, cy, s).unwrap();
                let r = rotation_from_axis_angle(&Vector3::new(a, b, c));
                Camera::new(k, CameraExtrinsics::new(r, Vector3::new(x, y, z)).unwrap())
            })
    }

    /// Independent route: build the 4×4 homogeneous projection `[K 0; 0 1]·[R t; 0 1]`,
    /// invert it numerically and apply it to `(d·u, d·v, d, 1)`.
    fn homogeneous_back_project(px: &Pixel, d: f64, cam: &Camera) -> Point3<f64> {
        let mut kh = Matrix4::identity();
        kh.fixed_view_mut::<3, 3>(0, 0).copy_from(&cam.intrinsics.matrix());
        let mut rt = Matrix4::identity();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&cam.extrinsics.rotation);
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&cam.extrinsics.translation);
        let p = (kh * rt).try_inverse().unwrap();
        let h = p * nalgebra::Vector4::new(d * px.u, d * px.v, d, 1.0);
        Point3::new(h.x / h.w, h.y / h.w, h.z / h.w)
    }

    proptest! {
        #[test]
        fn back_project_matches_homogeneous_oracle(cam in arb_camera(), u in -100.0f64..800.0, v in -100.0f64..600.0, d in 0.1f64..50.0) {
            let px = Pixel::new(u, v);
            let a = back_project(&px, d, &cam.intrinsics, &cam.extrinsics).unwrap();
            let b = homogeneous_back_project(&px, d, &cam);
            let scale = 1.0f64.max(a.coords.amax());
            prop_assert!((a - b).amax() <= 1e-9 * scale, "{a} vs {b}");
        }

        #[test]
        fn round_trip(cam in arb_camera(), u in 0.0f64..640.0, v in 0.0f64..480.0, d in 0.1f64..50.0) {
            let px = Pixel::new(u, v);
            let w = back_project(&px, d, &cam.intrinsics, &cam.extrinsics).unwrap();
            let (q, z) = reproject(&w, &cam.intrinsics, &cam.extrinsics).unwrap();
            prop_assert!((q.u - u).abs() < 1e-9 && (q.v - v).abs() < 1e-9);
            prop_assert!((z - d).abs() < 1e-9);
        }

        #[test]
        fn rigid_transform_invariance(a in arb_camera(), b in arb_camera(), g in arb_camera(), u in 0.0f64..640.0, v in 0.0f64..480.0, d in 0.5f64..20.0) {
            let px = Pixel::new(u, v);
            let w = back_project(&px, d, &a.intrinsics, &a.extrinsics).unwrap();
            let (p0, _) = reproject(&w, &b.intrinsics, &b.extrinsics).unwrap();
            // Re-express the world in a new frame: X' = G·X, cameras become E·G⁻¹.
            let ginv = g.extrinsics.inverse();
            let a2 = a.extrinsics.compose(&ginv);
            let b2 = b.extrinsics.compose(&ginv);
            let w2 = back_project(&px, d, &a.intrinsics, &a2).unwrap();
            let (p1, _) = reproject(&w2, &b.intrinsics, &b2).unwrap();
            let scale = 1.0f64.max(p0.u.abs()).max(p0.v.abs());
            prop_assert!((p0.u - p1.u).abs() < 1e-9 * scale && (p0.v - p1.v).abs() < 1e-9 * scale);
        }

        #[test]
        fn uniform_scaling_invariance(a in arb_camera(), b in arb_camera(), u in 0.0f64..640.0, v in 0.0f64..480.0, d in 0.5f64..20.0, s in 0.1f64..10.0) {
            let px = Pixel::new(u, v);
            let w = back_project(&px, d, &a.intrinsics, &a.extrinsics).unwrap();
            let (p0, _) = reproject(&w, &b.intrinsics, &b.extrinsics).unwrap();
            let scale_t = |e: &CameraExtrinsics| CameraExtrinsics { rotation: e.rotation, translation: e.translation * s };
            let w2 = back_project(&px, d * s, &a.intrinsics, &scale_t(&a.extrinsics)).unwrap();
            let (p1, _) = reproject(&w2, &b.intrinsics, &scale_t(&b.extrinsics)).unwrap();
            let tol = 1e-9 * 1.0f64.max(p0.u.abs()).max(p0.v.abs());
            prop_assert!((p0.u - p1.u).abs() < tol && (p0.v - p1.v).abs() < tol);
        }
    }

    #[test]
    fn depth_lookup_rounds_to_nearest() {
        let mut d = DepthMap::filled(4, 4, 1.0);
        d.set(2, 3, 7.0);
        assert_eq!(d.nearest(&Pixel::new(2.6, 1.6)), Some(7.0));
        assert_eq!(d.nearest(&Pixel::new(3.4, 2.4)), Some(7.0));
        assert_eq!(d.nearest(&Pixel::new(3.6, 2.0)), None);
        assert_eq!(d.nearest(&Pixel::new(-0.6, 0.0)), None);
        assert_eq!(d.nearest(&Pixel::new(-0.4, 0.0)), Some(1.0));
    }

    #[test]
    fn bilinear_lookup() {
        let d = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.bilinear(&Pixel::new(0.5, 0.5)), Some(2.5));
        assert_eq!(d.bilinear(&Pixel::new(1.0, 1.0)), Some(4.0));
        assert_eq!(d.bilinear(&Pixel::new(1.5, 0.0)), None);
        let holes = DepthMap::new(2, 2, vec![1.0, 0.0, 3.0, 4.0]).unwrap();
        assert_eq!(holes.bilinear(&Pixel::new(0.5, 0.5)), None);
    }
}
