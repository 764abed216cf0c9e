//! `georeward` command-line front end.
//!
//! JSON records go to stdout, logs to stderr. Exit codes: 0 success,
//! 1 usage, 2 malformed input, 3 inapplicable metric, 4 budget exceeded,
//! 5 internal error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use georeward_core::bundle::{BundleError, SceneBundle};
use georeward_core::curate::{self, CandidateSet, Clock, Curation, CurateError, FixedClock, PairPolicy, SystemClock};
use georeward_core::geom::{DepthLookup, ReferenceFrames};
use georeward_core::hash::mix64;
use georeward_core::losses::check;
use georeward_core::reward::{self, MetricKind, RewardConfig, RewardError, WindowSpec};
use georeward_core::sampling::{self, KeyReduction, SamplingConfig, SamplingError};
use georeward_core::search::{self, Verifier, budget_shape, Method, Objective, SearchConfig, SearchError, SearchOutcome};
use georeward_core::synth::{
    self, make_scene, toy_scene_spec, CorruptionSpec, QualityMap, SceneSpec, SynthError, ToyConfig, ToyFrame,
    ToyGenerator, ToyRptVerifier, Trajectory,
};
use georeward_core::ENGINE_VERSION;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Malformed(String),
    Inapplicable(String),
    Budget(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Malformed(_) => 2,
            CliError::Inapplicable(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Internal(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Malformed(m)
            | CliError::Inapplicable(m)
            | CliError::Budget(m)
            | CliError::Internal(m) => m,
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        if e.is_inapplicable() {
            CliError::Inapplicable(e.to_string())
        } else {
            match e {
                RewardError::InvalidWindow | RewardError::FrameOutOfRange { .. } => CliError::Usage(e.to_string()),
                _ => CliError::Malformed(e.to_string()),
            }
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::PatchTooLarge { .. } | SamplingError::InvalidTau(_) => CliError::Usage(e.to_string()),
            SamplingError::MissingAttention(_) | SamplingError::EmptyKeys => CliError::Inapplicable(e.to_string()),
            SamplingError::DimensionMismatch(_) | SamplingError::InvalidGrid(_) => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            SearchError::InvalidConfig(_) | SearchError::PoolTooSmall { .. } => CliError::Usage(e.to_string()),
            SearchError::AllRewardsUndefined { .. } => CliError::Inapplicable(e.to_string()),
            SearchError::Generator(_) | SearchError::Verifier(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) | SynthError::InfeasibleTrajectory(_) => CliError::Usage(e.to_string()),
            SynthError::Geom(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<CurateError> for CliError {
    fn from(e: CurateError) -> Self {
        match e {
            CurateError::EmptyPairs => CliError::Inapplicable(e.to_string()),
            CurateError::TooFewCandidates(_) | CurateError::DuplicateSeed { .. } => CliError::Malformed(e.to_string()),
            CurateError::Parse { .. } | CurateError::UnsupportedSchema { .. } => CliError::Malformed(e.to_string()),
            CurateError::Io { .. } => CliError::Malformed(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "georeward", version, about = "Geometric consistency rewards and reward-guided search")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "GEOREWARD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a scene bundle with a geometric metric.
    Score(ScoreArgs),
    /// Select attention-guided query points for every frame of a bundle.
    SamplePoints(SampleArgs),
    /// Run reward-guided search over the toy generator.
    Search(SearchArgs),
    /// Write a synthetic scene bundle, optionally corrupted.
    Synth(SynthArgs),
    /// Build a preference-pair manifest from scored candidates.
    Curate(CurateArgs),
    /// Check loss gradients against finite differences.
    LossCheck(LossCheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MetricArg {
    Rpt,
    Epi,
    Rpx,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Rpt => MetricKind::Rpt,
            MetricArg::Epi => MetricKind::Epi,
            MetricArg::Rpx => MetricKind::Rpx,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum RefFramesArg {
    All,
    Query,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LookupArg {
    Nearest,
    Bilinear,
}

#[derive(Args, Debug, Serialize)]
struct ValidityArgs {
    #[arg(long, default_value_t = 0.5)]
    min_confidence: f64,
    #[arg(long, default_value_t = 1e-6)]
    min_depth: f64,
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    #[arg(long, value_enum, default_value_t = RefFramesArg::All)]
    reference_frames: RefFramesArg,
    #[arg(long, value_enum, default_value_t = LookupArg::Nearest)]
    depth_lookup: LookupArg,
}

impl ValidityArgs {
    fn config(&self) -> georeward_core::ValidityConfig {
        georeward_core::ValidityConfig {
            min_confidence: self.min_confidence,
            min_depth: self.min_depth,
            bounds_margin: self.margin,
            reference_frames: match self.reference_frames {
                RefFramesArg::All => ReferenceFrames::All,
                RefFramesArg::Query => ReferenceFrames::QueryOnly,
            },
            depth_lookup: match self.depth_lookup {
                LookupArg::Nearest => DepthLookup::Nearest,
                LookupArg::Bilinear => DepthLookup::Bilinear,
            },
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ScoreArgs {
    /// Bundle directory.
    bundle: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Rpt)]
    metric: MetricArg,
    /// Sliding window length; the whole sequence when absent.
    #[arg(long)]
    window: Option<usize>,
    /// Last frame of the window; defaults to the final frame.
    #[arg(long)]
    end: Option<usize>,
    /// Report the diagonal-normalized RPT error as the reward.
    #[arg(long)]
    normalized: bool,
    #[command(flatten)]
    validity: ValidityArgs,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    bundle: PathBuf,
    #[arg(long, default_value_t = 14)]
    patch: usize,
    #[arg(long, default_value_t = 30.0)]
    tau: f64,
    /// Reduction of each softmax row over key tokens.
    #[arg(long, value_enum, default_value_t = ReductionArg::Max)]
    reduction: ReductionArg,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ReductionArg {
    Max,
    Sum,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Sos,
    Sop,
    Beam,
    Brute,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sos => Method::Sos,
            MethodArg::Sop => Method::Sop,
            MethodArg::Beam => Method::Beam,
            MethodArg::Brute => Method::Brute,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ObjectiveArg {
    WindowSum,
    FullSequence,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Beam)]
    method: MethodArg,
    /// Compute budget B, mapped to (K, S) per method.
    #[arg(long, conflicts_with_all = ["k", "s"])]
    budget: Option<usize>,
    /// Beam width.
    #[arg(long = "K", id = "k")]
    k: Option<usize>,
    /// Candidates per step.
    #[arg(long = "S", id = "s")]
    s: Option<usize>,
    /// Root seeds for beam search and brute force; defaults to K.
    #[arg(long)]
    roots: Option<usize>,
    #[arg(long, default_value_t = 6)]
    frames: usize,
    #[arg(long, default_value_t = 2)]
    window: usize,
    /// Path ranking; full_sequence for sos, window_sum otherwise by default.
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    /// Generator spec, e.g. `toy:seed=3,quality=uniform:1.5,track=2`.
    #[arg(long, default_value = "toy")]
    generator: String,
    /// Base seed the seed pool is derived from.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = search::DEFAULT_BRUTE_CAP)]
    brute_cap: usize,
    /// Search on Path keeps the baseline first frame instead of searching it.
    #[arg(long)]
    fixed_first_frame: bool,
    /// Write the run record here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a budget sweep (budget, method, metric, value) here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Budgets of the sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    budgets: Vec<usize>,
    /// Methods of the sweep.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sos,sop,beam")]
    sweep_methods: Vec<MethodArg>,
    /// Trials averaged per sweep cell, each with its own seed pool.
    #[arg(long, default_value_t = 1)]
    trials: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum TrajectoryArg {
    Orbit,
    Dolly,
    Pan,
    RandomSmooth,
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4000)]
    points: usize,
    #[arg(long, default_value_t = 2.0)]
    extent: f64,
    #[arg(long, value_enum, default_value_t = TrajectoryArg::Orbit)]
    trajectory: TrajectoryArg,
    /// Camera distance from the scene center; trajectory default when absent.
    #[arg(long)]
    distance: Option<f64>,
    /// Orbit arc (radians), pan span or dolly travel; trajectory default when absent.
    #[arg(long)]
    sweep: Option<f64>,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    #[arg(long, default_value_t = 96)]
    height: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 120.0)]
    focal: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_images: bool,
    #[arg(long)]
    no_attention: bool,
    #[arg(long)]
    max_tracks: Option<usize>,
    #[arg(long, default_value_t = 1.5)]
    splat_radius: f64,
    #[arg(long, default_value_t = 0.0)]
    depth_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    rotation_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    translation_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    track_sigma: f64,
    #[arg(long, default_value_t = 0)]
    corruption_seed: u64,
    /// Corrupt only these frames.
    #[arg(long, value_delimiter = ',')]
    corrupt_frames: Option<Vec<usize>>,
}

#[derive(Args, Debug, Serialize)]
struct CurateArgs {
    /// JSON array of candidate sets, or one set per line.
    #[arg(long)]
    input: PathBuf,
    /// Manifest destination (JSONL).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    min_gap: f64,
    /// Fixed curation timestamp (Unix seconds); the system clock otherwise.
    #[arg(long)]
    timestamp: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct LossCheckArgs {
    #[arg(long, default_value_t = 50)]
    batches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Hex SHA-256 of the canonical JSON form of `cfg`.
fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    engine_version: &'a str,
    command: &'a str,
    config_hash: String,
    #[serde(flatten)]
    body: T,
}

fn emit<C: Serialize, T: Serialize>(command: &str, cfg: &C, body: T) -> Result<String, CliError> {
    let rec = Record { engine_version: ENGINE_VERSION, command, config_hash: config_hash(cfg), body };
    serde_json::to_string_pretty(&rec).map_err(|e| CliError::Internal(e.to_string()))
}

fn cmd_score(a: &ScoreArgs) -> Result<String, CliError> {
    let bundle = SceneBundle::load(&a.bundle)?;
    let mut cfg = RewardConfig::new(a.metric.into());
    cfg.validity = a.validity.config();
    cfg.normalized = a.normalized;
    let report = match a.window {
        None => reward::score(&bundle, &cfg)?,
        Some(w) => {
            let end = a.end.unwrap_or(bundle.frame_count().saturating_sub(1));
            reward::windowed_reward(&bundle, WindowSpec::new(w)?, end, &cfg)?
        }
    };
    #[derive(Serialize)]
    struct Body<'a> {
        config: &'a RewardConfig,
        report: reward::RewardReport,
    }
    emit("score", &cfg, Body { config: &cfg, report })
}

fn cmd_sample(a: &SampleArgs) -> Result<String, CliError> {
    let bundle = SceneBundle::load(&a.bundle)?;
    let cfg = SamplingConfig {
        patch: a.patch,
        tau: a.tau,
        reduction: match a.reduction {
            ReductionArg::Max => KeyReduction::Max,
            ReductionArg::Sum => KeyReduction::Sum,
        },
    };
    let sets = sampling::sample_bundle(&bundle, &cfg)?;
    #[derive(Serialize)]
    struct Body<'a> {
        config: &'a SamplingConfig,
        frames: Vec<sampling::SampledPointSet>,
    }
    emit("sample-points", &cfg, Body { config: &cfg, frames: sets })
}

/// Parsed `toy:key=value,...` generator spec.
#[derive(Debug, Clone, Serialize)]
struct ToySpec {
    scene_seed: u64,
    quality: String,
    track_sigma: f64,
    rotation_sigma: f64,
    translation_sigma: f64,
    points: usize,
    max_tracks: usize,
}

fn parse_quality(s: &str) -> Result<QualityMap, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| CliError::Usage(format!("bad number '{x}' in quality '{s}'")));
    match parts.as_slice() {
        ["uniform", max] => Ok(QualityMap::Uniform { max: num(max)? }),
        ["binary", p, level] => Ok(QualityMap::Binary { p_clean: num(p)?, level: num(level)? }),
        ["constant", q] => Ok(QualityMap::Constant(num(q)?)),
        _ => Err(CliError::Usage(format!(
            "quality '{s}' is not uniform:<max>, binary:<p_clean>:<level> or constant:<q>"
        ))),
    }
}

fn parse_generator(spec: &str) -> Result<ToySpec, CliError> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    if kind != "toy" {
        return Err(CliError::Usage(format!("unknown generator '{kind}'; only 'toy' is available")));
    }
    let defaults = toy_scene_spec(2, 0);
    let mut out = ToySpec {
        scene_seed: 0,
        quality: "uniform:1".into(),
        track_sigma: 2.0,
        rotation_sigma: 0.0,
        translation_sigma: 0.0,
        points: defaults.points,
        max_tracks: defaults.max_tracks.unwrap_or(48),
    };
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("expected key=value, got '{kv}'")))?;
        let f = || v.parse::<f64>().map_err(|_| CliError::Usage(format!("bad value for {k}: '{v}'")));
        let u = || v.parse::<u64>().map_err(|_| CliError::Usage(format!("bad value for {k}: '{v}'")));
        match k {
            "seed" => out.scene_seed = u()?,
            "quality" => {
                parse_quality(v)?;
                out.quality = v.to_string();
            }
            "track" => out.track_sigma = f()?,
            "rot" => out.rotation_sigma = f()?,
            "trans" => out.translation_sigma = f()?,
            "points" => out.points = u()? as usize,
            "tracks" => out.max_tracks = u()? as usize,
            other => return Err(CliError::Usage(format!("unknown generator key '{other}'"))),
        }
    }
    Ok(out)
}

fn build_generator(spec: &ToySpec, frames: usize) -> Result<ToyGenerator, CliError> {
    let mut scene = toy_scene_spec(frames, spec.scene_seed);
    scene.points = spec.points;
    scene.max_tracks = Some(spec.max_tracks);
    let bundle = make_scene(&scene)?;
    Ok(ToyGenerator::new(
        bundle,
        ToyConfig {
            quality: parse_quality(&spec.quality)?,
            rotation_sigma: spec.rotation_sigma,
            translation_sigma: spec.translation_sigma,
            track_sigma: spec.track_sigma,
        },
    ))
}

fn seed_pool(base: u64, len: usize) -> Vec<u64> {
    (0..len as u64).map(|i| mix64(base ^ mix64(i))).collect()
}

struct Plan {
    method: Method,
    cfg: SearchConfig,
}

fn run_plan(gen: &ToyGenerator, plan: &Plan, pool: &[u64]) -> Result<SearchOutcome<ToyFrame>, CliError> {
    let v = ToyRptVerifier::default();
    let c = &plan.cfg;
    Ok(match plan.method {
        Method::Sos => search::search_on_start(gen, &v, &(), pool, c.beam_width, c.frames, c.window, c.objective)?,
        Method::Sop => search::search_on_path(gen, &v, &(), pool, c.candidates, c.frames, c.window, c.search_first_frame)?,
        Method::Beam => search::beam_search(gen, &v, &(), pool, c)?,
        Method::Brute => search::brute_force(gen, &v, &(), pool, c)?,
    })
}

/// Whole-sequence reward of the selected video, comparable across methods.
fn sequence_reward(o: &SearchOutcome<ToyFrame>) -> f64 {
    o.path.full_reward.unwrap_or_else(|| ToyRptVerifier::default().score(&o.frames).unwrap_or(f64::NEG_INFINITY))
}

fn make_plan(
    method: Method,
    k: usize,
    s: usize,
    a: &SearchArgs,
) -> Result<Plan, CliError> {
    let window = WindowSpec::new(a.window)?;
    let objective = match a.objective {
        Some(ObjectiveArg::WindowSum) => Objective::WindowSum,
        Some(ObjectiveArg::FullSequence) => Objective::FullSequence,
        None if method == Method::Sos => Objective::FullSequence,
        None => Objective::WindowSum,
    };
    let (k, s) = match method {
        Method::Sos => (k.max(s), 1),
        Method::Sop => (1, s.max(k)),
        _ => (k, s),
    };
    let mut cfg = SearchConfig::new(k, s, a.frames, window).with_objective(objective);
    if let Some(r) = a.roots {
        cfg = cfg.with_roots(r);
    }
    cfg.brute_cap = a.brute_cap;
    cfg.search_first_frame = !a.fixed_first_frame;
    cfg.validate()?;
    Ok(Plan { method, cfg })
}

fn pool_len(cfg: &SearchConfig) -> usize {
    cfg.root_count().max(cfg.beam_width).max(cfg.candidates)
}

fn cmd_search(a: &SearchArgs) -> Result<String, CliError> {
    let spec = parse_generator(&a.generator)?;
    let gen = build_generator(&spec, a.frames)?;
    let method: Method = a.method.into();
    let (k, s) = match (a.budget, a.k, a.s) {
        (Some(b), _, _) => {
            if b == 0 {
                return Err(CliError::Usage("budget must be at least 1".into()));
            }
            budget_shape(method, b)
        }
        (None, k, s) => match method {
            Method::Sos => (k.or(s).unwrap_or(4), 1),
            Method::Sop => (1, s.or(k).unwrap_or(4)),
            _ => (k.unwrap_or(2), s.unwrap_or(2)),
        },
    };
    let plan = make_plan(method, k, s, a)?;
    let pool = seed_pool(a.seed, pool_len(&plan.cfg));
    log::info!("search {} K={} S={} N={}", method, plan.cfg.beam_width, plan.cfg.candidates, plan.cfg.frames);
    let outcome = run_plan(&gen, &plan, &pool)?;

    let mut sweep_rows = Vec::new();
    if let Some(csv) = &a.csv {
        let trials = a.trials.max(1);
        let mut text = String::from("budget,method,metric,value\n");
        for &m in &a.sweep_methods {
            let m: Method = m.into();
            for &b in &a.budgets {
                let (k, s) = budget_shape(m, b);
                let p = make_plan(m, k, s, a)?;
                let runs: Vec<Result<f64, CliError>> = (0..trials)
                    .map(|t| {
                        let pool = seed_pool(a.seed.wrapping_add(t as u64), pool_len(&p.cfg));
                        run_plan(&gen, &p, &pool).map(|o| sequence_reward(&o))
                    })
                    .collect();
                let mut sum = 0.0;
                for r in runs {
                    sum += r?;
                }
                let mean = sum / trials as f64;
                text.push_str(&format!("{b},{m},rpt,{mean}\n"));
                sweep_rows.push((b, m.to_string(), mean));
            }
        }
        std::fs::write(csv, text).map_err(|e| CliError::Malformed(format!("{}: {e}", csv.display())))?;
    }

    #[derive(Serialize)]
    struct Body<'a> {
        method: String,
        generator: &'a ToySpec,
        config: &'a SearchConfig,
        seed_pool: &'a [u64],
        path: &'a search::GenPath,
        trace: &'a search::SearchTrace,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        sweep: Vec<(usize, String, f64)>,
    }
    #[derive(Serialize)]
    struct Hashed<'a> {
        method: String,
        generator: &'a ToySpec,
        config: &'a SearchConfig,
        seed: u64,
    }
    let hashed = Hashed { method: method.to_string(), generator: &spec, config: &plan.cfg, seed: a.seed };
    let json = emit(
        "search",
        &hashed,
        Body {
            method: method.to_string(),
            generator: &spec,
            config: &plan.cfg,
            seed_pool: &pool,
            path: &outcome.path,
            trace: &outcome.trace,
            sweep: sweep_rows,
        },
    )?;
    if let Some(out) = &a.out {
        std::fs::write(out, &json).map_err(|e| CliError::Malformed(format!("{}: {e}", out.display())))?;
    }
    Ok(json)
}

fn cmd_synth(a: &SynthArgs) -> Result<String, CliError> {
    let kind = match a.trajectory {
        TrajectoryArg::Orbit => "orbit",
        TrajectoryArg::Dolly => "dolly",
        TrajectoryArg::Pan => "pan",
        TrajectoryArg::RandomSmooth => "random_smooth",
    };
    let mut trajectory = Trajectory::default_for(kind, a.extent).expect("known kind");
    match &mut trajectory {
        Trajectory::Orbit { distance, arc, .. } => {
            *distance = a.distance.unwrap_or(*distance);
            *arc = a.sweep.unwrap_or(*arc);
        }
        Trajectory::Dolly { start, end } => {
            let travel = a.sweep.unwrap_or(*start - *end);
            *end = a.distance.unwrap_or(*end);
            *start = *end + travel;
        }
        Trajectory::Pan { distance, span } => {
            *distance = a.distance.unwrap_or(*distance);
            *span = a.sweep.unwrap_or(*span);
        }
        Trajectory::RandomSmooth { distance, step } => {
            *distance = a.distance.unwrap_or(*distance);
            *step = a.sweep.unwrap_or(*step);
        }
    }
    let spec = SceneSpec {
        points: a.points,
        extent: a.extent,
        trajectory,
        frames: a.frames,
        height: a.height,
        width: a.width,
        focal: a.focal,
        seed: a.seed,
        images: !a.no_images,
        attention: !a.no_attention,
        max_tracks: a.max_tracks,
        splat_radius: a.splat_radius,
    };
    let corruption = CorruptionSpec {
        depth_sigma: a.depth_sigma,
        rotation_sigma: a.rotation_sigma,
        translation_sigma: a.translation_sigma,
        track_sigma: a.track_sigma,
        seed: a.corruption_seed,
        frames: a.corrupt_frames.clone(),
    };
    corruption.validate()?;
    let bundle = synth::corrupt(&make_scene(&spec)?, &corruption)?;
    bundle.save(&a.out)?;
    #[derive(Serialize)]
    struct Hashed<'a> {
        scene: &'a SceneSpec,
        corruption: &'a CorruptionSpec,
    }
    #[derive(Serialize)]
    struct Body<'a> {
        out: String,
        scene: &'a SceneSpec,
        corruption: &'a CorruptionSpec,
        frames: usize,
        tracks: usize,
    }
    emit(
        "synth",
        &Hashed { scene: &spec, corruption: &corruption },
        Body {
            out: a.out.display().to_string(),
            scene: &spec,
            corruption: &corruption,
            frames: bundle.frame_count(),
            tracks: bundle.tracks.len(),
        },
    )
}

fn read_candidate_sets(path: &PathBuf) -> Result<Vec<CandidateSet>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())));
    }
    trimmed
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_curate(a: &CurateArgs) -> Result<String, CliError> {
    let sets = read_candidate_sets(&a.input)?;
    let policy = PairPolicy { min_gap: a.min_gap };
    let fixed;
    let clock: &dyn Clock = match a.timestamp {
        Some(t) => {
            fixed = FixedClock(t);
            &fixed
        }
        None => &SystemClock,
    };
    let results = curate::curate_all(&sets, &policy, clock)?;
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Curation::Pair(p) => pairs.push(p),
            skip => skipped.push(skip),
        }
    }
    curate::build_manifest(&pairs, &a.out)?;
    #[derive(Serialize)]
    struct Body<'a> {
        manifest: String,
        pairs: &'a [curate::PreferencePair],
        skipped: &'a [Curation],
    }
    emit(
        "curate",
        &(&policy, a.timestamp),
        Body { manifest: a.out.display().to_string(), pairs: &pairs, skipped: &skipped },
    )
}

fn cmd_loss_check(a: &LossCheckArgs) -> Result<(String, bool), CliError> {
    let results = check::run_suite(a.batches, a.seed);
    eprintln!("{:<12} {:>8} {:>14} {:>10}  result", "loss", "batches", "max rel err", "tolerance");
    for r in &results {
        eprintln!(
            "{:<12} {:>8} {:>14.3e} {:>10.0e}  {}",
            r.name,
            r.batches,
            r.max_relative_error,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    let ok = results.iter().all(|r| r.passed);
    #[derive(Serialize)]
    struct Body<'a> {
        passed: bool,
        checks: &'a [check::CheckResult],
    }
    let json = emit("loss-check", a, Body { passed: ok, checks: &results })?;
    Ok((json, ok))
}

fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Score(a) => cmd_score(a),
        Command::SamplePoints(a) => cmd_sample(a),
        Command::Search(a) => cmd_search(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Curate(a) => cmd_curate(a),
        Command::LossCheck(a) => {
            let (json, ok) = cmd_loss_check(a)?;
            if ok {
                Ok(json)
            } else {
                println!("{json}");
                Err(CliError::Internal("gradient check failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(5);
        }
    }
    match run(&cli) {
        Ok(json) => {
            let mut out = std::io::stdout().lock();
            // A closed pipe downstream is not an error of ours.
            let _ = writeln!(out, "{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
