//! Geometric consistency rewards for generated video and reward-guided
//! sequential search over frame generators.
//!
//! The crate is organised bottom-up:
//!
//! - [`geom`]: pinhole back-projection, reprojection, validity filtering and
//!   the pointwise reprojection error.
//! - [`sampling`]: attention aggregation, heatmaps and patch-center selection.
//! - [`reward`]: pointwise (RPT), Sampson-epipolar (EPI) and pixelwise (RPX)
//!   rewards, windowed evaluation, plus [`reward::fidelity`] (PSNR/SSIM).
//! - [`search`]: Search on Start, Search on Path, beam search and brute force.
//! - [`synth`]: synthetic scenes, corruptions and a toy frame generator.
//! - [`losses`]: flow-matching, Flow-DPO and the auxiliary anti-collapse loss.
//! - [`curate`]: best/worst preference pairing and JSONL manifests.
//! - [`bundle`] and [`tensor`]: the on-disk scene bundle and tensor container.

pub mod bundle;
pub mod curate;
pub mod geom;
pub mod hash;
pub mod losses;
pub mod reward;
pub mod sampling;
pub mod search;
pub mod synth;
pub mod tensor;

pub use bundle::{Frame, FrameAttention, Image, PointTrack, Provenance, SceneBundle};
pub use geom::{
    back_project, filter_valid, reproject, reprojection_error, Camera, CameraExtrinsics,
    CameraIntrinsics, DepthMap, ErrorStats, GeomError, Pixel, ValidPairSet, ValidityConfig,
};
pub use reward::{MetricKind, RewardConfig, RewardError, RewardReport, WindowSpec};

/// Version string embedded in every emitted record.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
