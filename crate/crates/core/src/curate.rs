//! Preference-pair curation: best versus worst candidate per prompt, written
//! to a line-delimited JSON manifest.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::reward::MetricKind;
use crate::ENGINE_VERSION;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CurateError {
    #[error("prompt {0}: at least two candidates are needed")]
    TooFewCandidates(String),
    #[error("prompt {prompt}: seed {seed} appears twice")]
    DuplicateSeed { prompt: String, seed: u64 },
    #[error("no pairs to write")]
    EmptyPairs,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Parse { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{path}:{line}: unsupported schema version {version}")]
    UnsupportedSchema { path: PathBuf, line: usize, version: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Reference to the generated video (path or identifier).
    pub video: String,
    pub seed: u64,
    /// `None` when the verifier could not score the candidate.
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub prompt_id: String,
    pub metric: MetricKind,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPolicy {
    /// Prompts whose best/worst gap falls below this are skipped.
    pub min_gap: f64,
}

impl Default for PairPolicy {
    fn default() -> Self {
        Self { min_gap: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt_id: String,
    pub winner: String,
    pub loser: String,
    pub winner_seed: u64,
    pub loser_seed: u64,
    pub winner_reward: f64,
    pub loser_reward: f64,
    pub gap: f64,
    pub metric: MetricKind,
    /// Seconds since the Unix epoch, from the injected clock.
    pub curated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    ZeroGap { gap: f64 },
    UndefinedReward { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Curation {
    Pair(PreferencePair),
    Skip { prompt_id: String, #[serde(flatten)] reason: SkipReason },
}

pub trait Clock: Sync {
    fn now(&self) -> u64;
}

/// Constant time source, for reproducible manifests.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
    }
}

/// Index of the best candidate under `better` with ties on the lower seed.
fn pick(cands: &[Candidate], skip: Option<usize>, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best: Option<usize> = None;
    for (i, c) in cands.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let r = c.reward.unwrap();
        best = match best {
            None => Some(i),
            Some(b) => {
                let rb = cands[b].reward.unwrap();
                if better(r, rb) || (r == rb && c.seed < cands[b].seed) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.unwrap()
}

/// Picks the highest- and lowest-reward candidates of a prompt.
pub fn rank_and_pair(set: &CandidateSet, policy: &PairPolicy, clock: &dyn Clock) -> Result<Curation, CurateError> {
    let cands = &set.candidates;
    if cands.len() < 2 {
        return Err(CurateError::TooFewCandidates(set.prompt_id.clone()));
    }
    let mut seen = HashSet::new();
    for c in cands {
        if !seen.insert(c.seed) {
            return Err(CurateError::DuplicateSeed { prompt: set.prompt_id.clone(), seed: c.seed });
        }
    }
    if let Some(c) = cands.iter().find(|c| c.reward.is_none_or(|r| !r.is_finite())) {
        return Ok(Curation::Skip { prompt_id: set.prompt_id.clone(), reason: SkipReason::UndefinedReward { seed: c.seed } });
    }
    let w = pick(cands, None, |a, b| a.partial_cmp(&b) == Some(Ordering::Greater));
    let l = pick(cands, Some(w), |a, b| a.partial_cmp(&b) == Some(Ordering::Less));
    let (rw, rl) = (cands[w].reward.unwrap(), cands[l].reward.unwrap());
    let gap = rw - rl;
    if gap < policy.min_gap {
        return Ok(Curation::Skip { prompt_id: set.prompt_id.clone(), reason: SkipReason::ZeroGap { gap } });
    }
    Ok(Curation::Pair(PreferencePair {
        prompt_id: set.prompt_id.clone(),
        winner: cands[w].video.clone(),
        loser: cands[l].video.clone(),
        winner_seed: cands[w].seed,
        loser_seed: cands[l].seed,
        winner_reward: rw,
        loser_reward: rl,
        gap,
        metric: set.metric,
        curated_at: clock.now(),
    }))
}

/// Curates every prompt concurrently; output order follows `sets`.
pub fn curate_all(sets: &[CandidateSet], policy: &PairPolicy, clock: &dyn Clock) -> Result<Vec<Curation>, CurateError> {
    sets.par_iter().map(|s| rank_and_pair(s, policy, clock)).collect()
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub schema_version: u32,
    #[serde(flatten)]
    pub pair: PreferencePair,
    pub engine_version: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CurateError + '_ {
    move |source| CurateError::Io { path: path.to_path_buf(), source }
}

/// Serializes `pairs` as JSONL, one record per line.
pub fn manifest_string(pairs: &[PreferencePair]) -> Result<String, CurateError> {
    if pairs.is_empty() {
        return Err(CurateError::EmptyPairs);
    }
    let mut out = String::new();
    for p in pairs {
        let rec = ManifestRecord { schema_version: MANIFEST_SCHEMA_VERSION, pair: p.clone(), engine_version: ENGINE_VERSION.into() };
        out.push_str(&serde_json::to_string(&rec).expect("manifest records serialize"));
        out.push('\n');
    }
    Ok(out)
}

/// Writes the manifest; nothing is created when `pairs` is empty.
pub fn build_manifest(pairs: &[PreferencePair], path: impl AsRef<Path>) -> Result<(), CurateError> {
    let path = path.as_ref();
    let text = manifest_string(pairs)?;
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, CurateError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord =
            serde_json::from_str(&line).map_err(|source| CurateError::Parse { path: path.to_path_buf(), line: i + 1, source })?;
        if rec.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CurateError::UnsupportedSchema { path: path.to_path_buf(), line: i + 1, version: rec.schema_version });
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rewards: &[Option<f64>]) -> CandidateSet {
        CandidateSet {
            prompt_id: "p".into(),
            metric: MetricKind::Rpt,
            candidates: rewards
                .iter()
                .enumerate()
                .map(|(i, &r)| Candidate { video: format!("v{i}.mp4"), seed: i as u64, reward: r })
                .collect(),
        }
    }

    const CLOCK: FixedClock = FixedClock(1_700_000_000);

    #[test]
    fn best_and_worst() {
        let c = rank_and_pair(&set(&[Some(-1.0), Some(-3.0), Some(-2.0)]), &PairPolicy::default(), &CLOCK).unwrap();
        let Curation::Pair(p) = c else { panic!("expected pair") };
        assert_eq!((p.winner.as_str(), p.loser.as_str(), p.gap), ("v0.mp4", "v1.mp4", 2.0));
        assert_eq!(p.curated_at, 1_700_000_000);
    }

    #[test]
    fn ties_and_skips() {
        let eq = set(&[Some(-2.0), Some(-2.0), Some(-2.0)]);
        let c = rank_and_pair(&eq, &PairPolicy { min_gap: 0.1 }, &CLOCK).unwrap();
        assert_eq!(c, Curation::Skip { prompt_id: "p".into(), reason: SkipReason::ZeroGap { gap: 0.0 } });
        let Curation::Pair(p) = rank_and_pair(&eq, &PairPolicy::default(), &CLOCK).unwrap() else { panic!() };
        assert_eq!((p.winner_seed, p.loser_seed), (0, 1));

        let c = rank_and_pair(&set(&[Some(-1.0), None]), &PairPolicy::default(), &CLOCK).unwrap();
        assert!(matches!(c, Curation::Skip { reason: SkipReason::UndefinedReward { seed: 1 }, .. }));
        assert!(matches!(rank_and_pair(&set(&[Some(1.0)]), &PairPolicy::default(), &CLOCK), Err(CurateError::TooFewCandidates(_))));
        let mut dup = set(&[Some(1.0), Some(2.0)]);
        dup.candidates[1].seed = 0;
        assert!(matches!(rank_and_pair(&dup, &PairPolicy::default(), &CLOCK), Err(CurateError::DuplicateSeed { .. })));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let pairs: Vec<PreferencePair> = (0..5)
            .map(|i| {
                let Curation::Pair(p) =
                    rank_and_pair(&set(&[Some(-0.1 * i as f64), Some(-1.0 / 3.0), Some(-7.25)]), &PairPolicy::default(), &CLOCK).unwrap()
                else {
                    panic!()
                };
                p
            })
            .collect();
        build_manifest(&pairs, &path).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back.iter().map(|r| r.pair.clone()).collect::<Vec<_>>(), pairs);
        assert!(back.iter().all(|r| r.engine_version == ENGINE_VERSION && r.schema_version == 1));
        let bytes = std::fs::read(&path).unwrap();
        build_manifest(&pairs, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);

        let empty = dir.path().join("none.jsonl");
        assert!(matches!(build_manifest(&[], &empty), Err(CurateError::EmptyPairs)));
        assert!(!empty.exists());
    }

    #[test]
    fn monotone_transform_invariance() {
        let s = set(&[Some(-1.5), Some(-0.2), Some(-9.0), Some(-0.2), Some(-3.0)]);
        let t = CandidateSet {
            candidates: s.candidates.iter().map(|c| Candidate { reward: c.reward.map(|r| (r * 3.0).exp()), ..c.clone() }).collect(),
            ..s.clone()
        };
        let (Curation::Pair(a), Curation::Pair(b)) =
            (rank_and_pair(&s, &PairPolicy::default(), &CLOCK).unwrap(), rank_and_pair(&t, &PairPolicy::default(), &CLOCK).unwrap())
        else {
            panic!()
        };
        assert_eq!((a.winner_seed, a.loser_seed), (b.winner_seed, b.loser_seed));
        assert_eq!((a.winner_seed, a.loser_seed), (1, 2));
    }
}
