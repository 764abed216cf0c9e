//! Reward-guided search over a sequential frame generator.
//!
//! A generation path starts from a root seed `pool[r]` and picks, at each
//! step `t`, a candidate index `c_t`; the generator receives the step seed
//! `step_seed(pool[r], t, c_t)`. Search on Start varies the root with
//! `c_t = 0`, Search on Path varies `c_t` from a single root, and beam search
//! does both. Brute force enumerates every path and serves as the oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::hash::step_seed;
use crate::reward::WindowSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("generator failed at seed {seed}: {message}")]
pub struct GeneratorError {
    pub seed: u64,
    pub message: String,
}

impl GeneratorError {
    pub fn new(seed: u64, message: impl Into<String>) -> Self {
        Self { seed, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    /// The reward does not exist for this input; search treats it as `-∞`.
    #[error("reward undefined: {0}")]
    Undefined(String),
    #[error("verifier failed: {0}")]
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("seed pool holds {got} seeds, {needed} needed")]
    PoolTooSmall { needed: usize, got: usize },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("verifier failed: {0}")]
    Verifier(String),
    #[error("every candidate reward is undefined at step {step}")]
    AllRewardsUndefined { step: usize },
    #[error("{paths} paths exceed the enumeration cap of {cap}")]
    BudgetExceeded { paths: u128, cap: usize },
}

/// Sequential generator. States are plain values, so branching a path
/// never affects its siblings.
pub trait FrameGenerator: Sync {
    type State: Clone + Send + Sync;
    type Frame: Clone + Send + Sync;
    type Condition: Sync + ?Sized;

    fn init(&self, seed: u64, cond: &Self::Condition) -> Result<Self::State, GeneratorError>;

    fn step(
        &self,
        state: &Self::State,
        z: u64,
        cond: &Self::Condition,
    ) -> Result<(Self::Frame, Self::State), GeneratorError>;

    /// Whether `step` may be called from several threads at once.
    fn is_concurrent(&self) -> bool {
        true
    }
}

/// Forces sequential invocation of the wrapped generator.
#[derive(Debug, Clone)]
pub struct Serial<G>(pub G);

impl<G: FrameGenerator> FrameGenerator for Serial<G> {
    type State = G::State;
    type Frame = G::Frame;
    type Condition = G::Condition;

    fn init(&self, seed: u64, cond: &Self::Condition) -> Result<Self::State, GeneratorError> {
        self.0.init(seed, cond)
    }

    fn step(&self, state: &Self::State, z: u64, cond: &Self::Condition) -> Result<(Self::Frame, Self::State), GeneratorError> {
        self.0.step(state, z, cond)
    }

    fn is_concurrent(&self) -> bool {
        false
    }
}

/// Scores a contiguous span of frames; higher is better.
pub trait Verifier<F>: Sync {
    fn score(&self, frames: &[F]) -> Result<f64, VerifyError>;

    /// Spans shorter than this are not scored.
    fn min_frames(&self) -> usize {
        1
    }
}

impl<F, V: Verifier<F> + ?Sized> Verifier<F> for &V {
    fn score(&self, frames: &[F]) -> Result<f64, VerifyError> {
        (**self).score(frames)
    }

    fn min_frames(&self) -> usize {
        (**self).min_frames()
    }
}

/// How a finished path is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Sum of per-step window rewards.
    WindowSum,
    /// Reward of the complete sequence.
    FullSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Beam width `K`.
    pub beam_width: usize,
    /// Step-seed candidates per node `S`.
    pub candidates: usize,
    /// Frames per path `N`.
    pub frames: usize,
    /// Root seeds taken from the pool; defaults to `beam_width`.
    pub roots: Option<usize>,
    pub window: WindowSpec,
    pub objective: Objective,
    /// Maximum number of enumerated paths for brute force.
    pub brute_cap: usize,
    /// Search on Path also chooses among `S` candidates for frame 0.
    pub search_first_frame: bool,
}

pub const DEFAULT_BRUTE_CAP: usize = 4096;

impl SearchConfig {
    pub fn new(beam_width: usize, candidates: usize, frames: usize, window: WindowSpec) -> Self {
        Self {
            beam_width,
            candidates,
            frames,
            roots: None,
            window,
            objective: Objective::WindowSum,
            brute_cap: DEFAULT_BRUTE_CAP,
            search_first_frame: true,
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_roots(mut self, roots: usize) -> Self {
        self.roots = Some(roots);
        self
    }

    pub fn root_count(&self) -> usize {
        self.roots.unwrap_or(self.beam_width)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.into()));
        if self.beam_width == 0 {
            return bad("beam width must be at least 1");
        }
        if self.candidates == 0 {
            return bad("candidate count must be at least 1");
        }
        if self.frames == 0 {
            return bad("frame count must be at least 1");
        }
        if self.root_count() == 0 {
            return bad("root count must be at least 1");
        }
        if self.window.w == 0 {
            return bad("window must hold at least one frame");
        }
        Ok(())
    }
}

/// `(K, S)` spent by each method for a budget `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sos,
    Sop,
    Beam,
    Brute,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sos" => Ok(Method::Sos),
            "sop" => Ok(Method::Sop),
            "beam" => Ok(Method::Beam),
            "brute" => Ok(Method::Brute),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Sos => "sos",
            Method::Sop => "sop",
            Method::Beam => "beam",
            Method::Brute => "brute",
        })
    }
}

/// Budget `B` → `(K, S)`: SoS `(B, 1)`, SoP `(1, B)`, beam `(⌈√B⌉, ⌈B/K⌉)`.
pub fn budget_shape(method: Method, budget: usize) -> (usize, usize) {
    let b = budget.max(1);
    match method {
        Method::Sos => (b, 1),
        Method::Sop | Method::Brute => (1, b),
        Method::Beam => {
            let k = (b as f64).sqrt().ceil() as usize;
            let k = if (k - 1) * (k - 1) >= b { k - 1 } else { k };
            (k, b.div_ceil(k))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenPath {
    pub root: usize,
    pub root_seed: u64,
    /// Candidate index chosen at every step.
    pub choices: Vec<usize>,
    /// Step seed fed to the generator at every step.
    pub seeds: Vec<u64>,
    /// Window reward per step; `None` where the step was not scored.
    pub step_rewards: Vec<Option<f64>>,
    /// Sum of the scored step rewards.
    pub cumulative: f64,
    /// Reward of the complete sequence, when evaluated.
    pub full_reward: Option<f64>,
    pub objective: Objective,
    /// Value of `objective` for this path.
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedPath {
    pub step: usize,
    pub root: usize,
    pub choices: Vec<usize>,
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchTrace {
    pub generator_calls: u64,
    pub verifier_calls: u64,
    /// Generator calls actually made; brute force shares path prefixes, so
    /// this can be below `generator_calls`.
    pub expanded_nodes: u64,
    /// `(root, choices)` of the paths alive after each step.
    pub survivors: Vec<Vec<(usize, Vec<usize>)>>,
    pub pruned: Vec<PrunedPath>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<F> {
    pub path: GenPath,
    pub frames: Vec<F>,
    pub trace: SearchTrace,
}

#[derive(Clone)]
struct Node<S, F> {
    root: usize,
    choices: Vec<usize>,
    seeds: Vec<u64>,
    frames: Vec<F>,
    state: S,
    step_rewards: Vec<Option<f64>>,
    cumulative: f64,
}

impl<S, F> Node<S, F> {
    fn key(&self) -> (usize, &[usize]) {
        (self.root, &self.choices)
    }

    /// Latest window reward; unscored counts as zero.
    fn last_reward(&self) -> f64 {
        self.step_rewards.last().copied().flatten().unwrap_or(0.0)
    }
}

/// Higher reward first, `-∞` and NaN last.
fn reward_desc(a: f64, b: f64) -> Ordering {
    let fix = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
    fix(b).total_cmp(&fix(a))
}

fn verify<F, V: Verifier<F>>(v: &V, frames: &[F], calls: &mut u64) -> Result<f64, SearchError> {
    *calls += 1;
    match v.score(frames) {
        Ok(r) if r.is_nan() => Err(SearchError::Verifier("verifier returned NaN".into())),
        Ok(r) => Ok(r),
        Err(VerifyError::Undefined(msg)) => {
            log::warn!("reward undefined, treated as -inf: {msg}");
            Ok(f64::NEG_INFINITY)
        }
        Err(VerifyError::Failed(msg)) => Err(SearchError::Verifier(msg)),
    }
}

/// Window reward of the path whose newest frame is `frames.last()`.
fn window_reward<F, V: Verifier<F>>(
    v: &V,
    frames: &[F],
    window: WindowSpec,
    calls: &mut u64,
) -> Result<Option<f64>, SearchError> {
    let t = frames.len() - 1;
    let (start, _) = window.span(t);
    if frames.len() - start < v.min_frames().max(1) {
        return Ok(None);
    }
    verify(v, &frames[start..], calls).map(Some)
}

fn check_pool(pool: &[u64], needed: usize) -> Result<(), SearchError> {
    if pool.len() < needed {
        return Err(SearchError::PoolTooSmall { needed, got: pool.len() });
    }
    Ok(())
}

fn map_maybe_par<T: Sync, R: Send>(concurrent: bool, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    if concurrent {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn finish_path<S, F>(node: &Node<S, F>, pool: &[u64], objective: Objective, full: Option<f64>) -> GenPath {
    GenPath {
        root: node.root,
        root_seed: pool[node.root],
        choices: node.choices.clone(),
        seeds: node.seeds.clone(),
        step_rewards: node.step_rewards.clone(),
        cumulative: node.cumulative,
        full_reward: full,
        objective,
        reward: match objective {
            Objective::WindowSum => node.cumulative,
            Objective::FullSequence => full.unwrap_or(f64::NEG_INFINITY),
        },
    }
}

fn roll_out<G: FrameGenerator>(
    gen: &G,
    cond: &G::Condition,
    pool: &[u64],
    root: usize,
    n: usize,
) -> Result<Node<G::State, G::Frame>, SearchError> {
    let mut node = Node {
        root,
        choices: Vec::with_capacity(n),
        seeds: Vec::with_capacity(n),
        frames: Vec::with_capacity(n),
        state: gen.init(pool[root], cond)?,
        step_rewards: Vec::with_capacity(n),
        cumulative: 0.0,
    };
    for t in 0..n {
        let z = step_seed(pool[root], t, 0);
        let (f, s) = gen.step(&node.state, z, cond)?;
        node.choices.push(0);
        node.seeds.push(z);
        node.frames.push(f);
        node.state = s;
    }
    Ok(node)
}

/// Rolls out `pool[0..s]` completely and keeps the best by `objective`
/// (ties to the lower pool index).
pub fn search_on_start<G, V>(
    gen: &G,
    verifier: &V,
    cond: &G::Condition,
    pool: &[u64],
    s: usize,
    n: usize,
    window: WindowSpec,
    objective: Objective,
) -> Result<SearchOutcome<G::Frame>, SearchError>
where
    G: FrameGenerator,
    V: Verifier<G::Frame>,
{
    if s == 0 || n == 0 {
        return Err(SearchError::InvalidConfig("S and N must be at least 1".into()));
    }
    check_pool(pool, s)?;
    let roots: Vec<usize> = (0..s).collect();
    let results = map_maybe_par(gen.is_concurrent(), &roots, |&r| -> Result<_, SearchError> {
        let mut node = roll_out(gen, cond, pool, r, n)?;
        let mut calls = 0;
        let full = match objective {
            Objective::FullSequence => {
                // Steps are left unscored, as in beam search without pruning.
                node.step_rewards = vec![None; n];
                Some(verify(verifier, &node.frames, &mut calls)?)
            }
            Objective::WindowSum => {
                for t in 0..n {
                    let r = window_reward(verifier, &node.frames[..=t], window, &mut calls)?;
                    node.step_rewards.push(r);
                    node.cumulative += r.unwrap_or(0.0);
                }
                None
            }
        };
        Ok((node, full, calls))
    });
    let mut trace = SearchTrace::default();
    let mut best: Option<(GenPath, Vec<G::Frame>)> = None;
    for res in results {
        let (node, full, calls) = res?;
        trace.generator_calls += n as u64;
        trace.expanded_nodes += n as u64;
        trace.verifier_calls += calls;
        let path = finish_path(&node, pool, objective, full);
        if best.as_ref().is_none_or(|(b, _)| reward_desc(path.reward, b.reward) == Ordering::Less) {
            best = Some((path, node.frames));
        }
    }
    let (path, frames) = best.expect("s >= 1");
    if path.reward == f64::NEG_INFINITY {
        return Err(SearchError::AllRewardsUndefined { step: n - 1 });
    }
    trace.survivors.push(vec![(path.root, path.choices.clone())]);
    Ok(SearchOutcome { path, frames, trace })
}

/// Greedy temporal search from `pool[0]`: each step keeps the best of `s`
/// candidate step seeds by window reward (ties to the lower index).
pub fn search_on_path<G, V>(
    gen: &G,
    verifier: &V,
    cond: &G::Condition,
    pool: &[u64],
    s: usize,
    n: usize,
    window: WindowSpec,
    search_first_frame: bool,
) -> Result<SearchOutcome<G::Frame>, SearchError>
where
    G: FrameGenerator,
    V: Verifier<G::Frame>,
{
    if s == 0 || n == 0 || window.w == 0 {
        return Err(SearchError::InvalidConfig("S, N and w must be at least 1".into()));
    }
    check_pool(pool, 1)?;
    let root_seed = pool[0];
    let mut trace = SearchTrace::default();
    let mut node: Node<G::State, G::Frame> = Node {
        root: 0,
        choices: vec![],
        seeds: vec![],
        frames: vec![],
        state: gen.init(root_seed, cond)?,
        step_rewards: vec![],
        cumulative: 0.0,
    };
    for t in 0..n {
        let width = if t == 0 && !search_first_frame { 1 } else { s };
        let cands: Vec<usize> = (0..width).collect();
        let base = &node;
        let results = map_maybe_par(gen.is_concurrent(), &cands, |&c| -> Result<_, SearchError> {
            let z = step_seed(root_seed, t, c);
            let (f, st) = gen.step(&base.state, z, cond)?;
            let mut frames = base.frames.clone();
            frames.push(f);
            let mut calls = 0;
            let r = window_reward(verifier, &frames, window, &mut calls)?;
            Ok((c, z, frames, st, r, calls))
        });
        let mut best: Option<(usize, u64, Vec<G::Frame>, G::State, Option<f64>)> = None;
        let mut all_undefined = true;
        for res in results {
            let (c, z, frames, st, r, calls) = res?;
            trace.generator_calls += 1;
            trace.expanded_nodes += 1;
            trace.verifier_calls += calls;
            let score = r.unwrap_or(0.0);
            all_undefined &= score == f64::NEG_INFINITY;
            let better = match &best {
                None => true,
                Some((_, _, _, _, br)) => reward_desc(score, br.unwrap_or(0.0)) == Ordering::Less,
            };
            if better {
                if let Some((bc, _, _, _, br)) = best.take() {
                    trace.pruned.push(PrunedPath { step: t, root: 0, choices: with(&node.choices, bc), reward: br });
                }
                best = Some((c, z, frames, st, r));
            } else {
                trace.pruned.push(PrunedPath { step: t, root: 0, choices: with(&node.choices, c), reward: r });
            }
        }
        if all_undefined {
            return Err(SearchError::AllRewardsUndefined { step: t });
        }
        let (c, z, frames, st, r) = best.expect("at least one candidate");
        node.choices.push(c);
        node.seeds.push(z);
        node.frames = frames;
        node.state = st;
        node.step_rewards.push(r);
        node.cumulative += r.unwrap_or(0.0);
        trace.survivors.push(vec![(0, node.choices.clone())]);
    }
    let path = finish_path(&node, pool, Objective::WindowSum, None);
    Ok(SearchOutcome { path, frames: node.frames, trace })
}

fn with(prefix: &[usize], c: usize) -> Vec<usize> {
    let mut v = prefix.to_vec();
    v.push(c);
    v
}

/// Shared expansion loop: `roots` beams, `S` children each, top `keep` by
/// window reward after every step but the last, best finished path by
/// objective over all final children.
fn expand<G, V>(
    gen: &G,
    verifier: &V,
    cond: &G::Condition,
    pool: &[u64],
    cfg: &SearchConfig,
    keep: usize,
    trace: &mut SearchTrace,
) -> Result<(GenPath, Vec<G::Frame>), SearchError>
where
    G: FrameGenerator,
    V: Verifier<G::Frame>,
{
    let n = cfg.frames;
    let mut beams: Vec<Node<G::State, G::Frame>> = Vec::with_capacity(cfg.root_count());
    for r in 0..cfg.root_count() {
        beams.push(Node {
            root: r,
            choices: vec![],
            seeds: vec![],
            frames: vec![],
            state: gen.init(pool[r], cond)?,
            step_rewards: vec![],
            cumulative: 0.0,
        });
    }
    for t in 0..n {
        let last = t + 1 == n;
        let slots: Vec<(usize, usize)> =
            (0..beams.len()).flat_map(|b| (0..cfg.candidates).map(move |c| (b, c))).collect();
        // Window scores matter for pruning, and for the final ranking under WindowSum.
        let needs_score = if last { cfg.objective == Objective::WindowSum } else { slots.len() > keep || cfg.objective == Objective::WindowSum };
        let parents = &beams;
        let results = map_maybe_par(gen.is_concurrent(), &slots, |&(b, c)| -> Result<_, SearchError> {
            let p = &parents[b];
            let z = step_seed(pool[p.root], t, c);
            let (f, st) = gen.step(&p.state, z, cond)?;
            let mut frames = p.frames.clone();
            frames.push(f);
            let mut calls = 0;
            let r = if needs_score { window_reward(verifier, &frames, cfg.window, &mut calls)? } else { None };
            let full = if last && cfg.objective == Objective::FullSequence {
                Some(verify(verifier, &frames, &mut calls)?)
            } else {
                None
            };
            let mut node = Node {
                root: p.root,
                choices: with(&p.choices, c),
                seeds: p.seeds.clone(),
                frames,
                state: st,
                step_rewards: p.step_rewards.clone(),
                cumulative: p.cumulative + r.unwrap_or(0.0),
            };
            node.seeds.push(z);
            node.step_rewards.push(r);
            Ok((node, full, calls))
        });
        let mut children = Vec::with_capacity(slots.len());
        for res in results {
            let (node, full, calls) = res?;
            trace.expanded_nodes += 1;
            trace.verifier_calls += calls;
            children.push((node, full));
        }
        if last {
            let mut best: Option<GenPath> = None;
            let mut best_frames = Vec::new();
            for (node, full) in children {
                let path = finish_path(&node, pool, cfg.objective, full);
                let better = best.as_ref().is_none_or(|b| match reward_desc(path.reward, b.reward) {
                    Ordering::Less => true,
                    Ordering::Equal => (path.root, &path.choices) < (b.root, &b.choices),
                    Ordering::Greater => false,
                });
                if better {
                    best = Some(path);
                    best_frames = node.frames;
                }
            }
            let best = best.expect("at least one child");
            if best.reward == f64::NEG_INFINITY {
                return Err(SearchError::AllRewardsUndefined { step: t });
            }
            trace.survivors.push(vec![(best.root, best.choices.clone())]);
            return Ok((best, best_frames));
        }
        if needs_score && children.iter().all(|(c, _)| c.step_rewards[t].is_some_and(|r| r == f64::NEG_INFINITY)) {
            return Err(SearchError::AllRewardsUndefined { step: t });
        }
        // Children come out ordered by (parent index, candidate index), so a
        // stable sort on reward implements the lexicographic tie-break.
        let mut order: Vec<usize> = (0..children.len()).collect();
        order.sort_by(|&a, &b| reward_desc(children[a].0.last_reward(), children[b].0.last_reward()));
        let mut slots: Vec<Option<Node<_, _>>> = children.into_iter().map(|(n, _)| Some(n)).collect();
        let mut next = Vec::with_capacity(keep.min(order.len()));
        for (rank, &i) in order.iter().enumerate() {
            let node = slots[i].take().unwrap();
            if rank < keep {
                next.push(node);
            } else {
                trace.pruned.push(PrunedPath {
                    step: t,
                    root: node.root,
                    choices: node.choices.clone(),
                    reward: node.step_rewards[t],
                });
            }
        }
        next.sort_by(|a, b| a.key().cmp(&b.key()));
        trace.survivors.push(next.iter().map(|b| (b.root, b.choices.clone())).collect());
        beams = next;
    }
    unreachable!("loop returns on the last step")
}

/// Beam search with width `K`, `S` candidates per node and `N` steps.
pub fn beam_search<G, V>(
    gen: &G,
    verifier: &V,
    cond: &G::Condition,
    pool: &[u64],
    cfg: &SearchConfig,
) -> Result<SearchOutcome<G::Frame>, SearchError>
where
    G: FrameGenerator,
    V: Verifier<G::Frame>,
{
    cfg.validate()?;
    check_pool(pool, cfg.root_count())?;
    let mut trace = SearchTrace::default();
    let (path, frames) = expand(gen, verifier, cond, pool, cfg, cfg.beam_width, &mut trace)?;
    trace.generator_calls = trace.expanded_nodes;
    Ok(SearchOutcome { path, frames, trace })
}

/// Enumerates all `roots · S^N` paths and returns the optimum of the
/// configured objective. Call accounting charges every path a full rollout
/// of `N` generator calls.
pub fn brute_force<G, V>(
    gen: &G,
    verifier: &V,
    cond: &G::Condition,
    pool: &[u64],
    cfg: &SearchConfig,
) -> Result<SearchOutcome<G::Frame>, SearchError>
where
    G: FrameGenerator,
    V: Verifier<G::Frame>,
{
    cfg.validate()?;
    let roots = cfg.root_count();
    let paths = (roots as u128).saturating_mul((cfg.candidates as u128).saturating_pow(cfg.frames as u32));
    if paths > cfg.brute_cap as u128 {
        return Err(SearchError::BudgetExceeded { paths, cap: cfg.brute_cap });
    }
    check_pool(pool, roots)?;
    let mut trace = SearchTrace::default();
    let (path, frames) = expand(gen, verifier, cond, pool, cfg, usize::MAX, &mut trace)?;
    trace.generator_calls = (paths * cfg.frames as u128) as u64;
    Ok(SearchOutcome { path, frames, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

    /// Frame value is a deterministic function of the step seed; the
    /// verifier rewards low values and is defined on any span.
    struct Table {
        calls: AtomicU64,
    }

    fn value(z: u64) -> f64 {
        crate::hash::unit_f64(crate::hash::mix64(z))
    }

    impl FrameGenerator for Table {
        type State = usize;
        type Frame = f64;
        type Condition = ();
        fn init(&self, _seed: u64, _: &()) -> Result<usize, GeneratorError> {
            Ok(0)
        }
        fn step(&self, s: &usize, z: u64, _: &()) -> Result<(f64, usize), GeneratorError> {
            self.calls.fetch_add(1, AtomicOrdering::Relaxed);
            Ok((value(z), s + 1))
        }
    }

    struct SumNeg;
    impl Verifier<f64> for SumNeg {
        fn score(&self, frames: &[f64]) -> Result<f64, VerifyError> {
            Ok(-frames.iter().sum::<f64>())
        }
    }

    fn table() -> Table {
        Table { calls: AtomicU64::new(0) }
    }

    const POOL: [u64; 8] = [11, 22, 33, 44, 55, 66, 77, 88];

    #[test]
    fn budget_shapes() {
        assert_eq!(budget_shape(Method::Beam, 1), (1, 1));
        assert_eq!(budget_shape(Method::Beam, 2), (2, 1));
        assert_eq!(budget_shape(Method::Beam, 4), (2, 2));
        assert_eq!(budget_shape(Method::Beam, 8), (3, 3));
        assert_eq!(budget_shape(Method::Beam, 16), (4, 4));
        assert_eq!(budget_shape(Method::Sos, 4), (4, 1));
        assert_eq!(budget_shape(Method::Sop, 4), (1, 4));
    }

    #[test]
    fn two_by_two_hand_table() {
        // N = 2, S = 2, w = 1: objective = -(v(z0) + v(z1)) for the four choice pairs.
        let g = table();
        let w1 = WindowSpec::new(1).unwrap();
        let cfg = SearchConfig::new(1, 2, 2, w1).with_roots(1);
        let out = brute_force(&g, &SumNeg, &(), &POOL, &cfg).unwrap();
        let mut table = HashMap::new();
        for c0 in 0..2 {
            for c1 in 0..2 {
                let r = -(value(step_seed(11, 0, c0)) + value(step_seed(11, 1, c1)));
                table.insert((c0, c1), r);
            }
        }
        let (&best, &best_r) = table.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(out.path.choices, vec![best.0, best.1]);
        assert!((out.path.reward - best_r).abs() < 1e-15);
        assert_eq!(out.trace.generator_calls, 8);
        assert_eq!(out.trace.expanded_nodes, 6);
    }

    #[test]
    fn call_counts() {
        let w = WindowSpec::new(2).unwrap();
        let g = table();
        let sos = search_on_start(&g, &SumNeg, &(), &POOL, 5, 4, w, Objective::FullSequence).unwrap();
        assert_eq!((sos.trace.generator_calls, sos.trace.verifier_calls), (20, 5));
        let sop = search_on_path(&g, &SumNeg, &(), &POOL, 3, 4, w, true).unwrap();
        assert_eq!(sop.trace.generator_calls, 12);
        let bs = beam_search(&g, &SumNeg, &(), &POOL, &SearchConfig::new(3, 2, 4, w)).unwrap();
        assert_eq!(bs.trace.generator_calls, 24);
        assert_eq!(g.calls.load(AtomicOrdering::Relaxed), 20 + 12 + 24);
        let sop1 = search_on_path(&g, &SumNeg, &(), &POOL, 3, 4, w, false).unwrap();
        assert_eq!(sop1.trace.generator_calls, 10);
        assert_eq!(sop1.path.choices[0], 0);
    }

    #[test]
    fn specializations() {
        let g = table();
        let w = WindowSpec::new(2).unwrap();
        for k in 1..=6 {
            let sos = search_on_start(&g, &SumNeg, &(), &POOL, k, 5, w, Objective::FullSequence).unwrap();
            let bs = beam_search(&g, &SumNeg, &(), &POOL, &SearchConfig::new(k, 1, 5, w).with_objective(Objective::FullSequence))
                .unwrap();
            assert_eq!(sos.path.seeds, bs.path.seeds);
            assert_eq!(sos.path.reward, bs.path.reward);
            let sop = search_on_path(&g, &SumNeg, &(), &POOL, k, 5, w, true).unwrap();
            let bs = beam_search(&g, &SumNeg, &(), &POOL, &SearchConfig::new(1, k, 5, w)).unwrap();
            assert_eq!(sop.path, bs.path);
            assert_eq!(sop.frames, bs.frames);
        }
    }

    #[test]
    fn wide_beam_equals_brute_force() {
        let g = table();
        let w = WindowSpec::new(2).unwrap();
        let cfg = SearchConfig::new(9, 3, 3, w).with_roots(1);
        let brute = brute_force(&g, &SumNeg, &(), &POOL, &cfg).unwrap();
        let bs = beam_search(&g, &SumNeg, &(), &POOL, &cfg).unwrap();
        assert_eq!(brute.path, bs.path);
        let cfg = SearchConfig::new(3, 3, 3, w).with_roots(1);
        assert!(brute.path.reward >= beam_search(&g, &SumNeg, &(), &POOL, &cfg).unwrap().path.reward);
    }

    #[test]
    fn brute_cap() {
        let g = table();
        let mut cfg = SearchConfig::new(1, 4, 7, WindowSpec::new(2).unwrap()).with_roots(1);
        assert!(matches!(brute_force(&g, &SumNeg, &(), &POOL, &cfg), Err(SearchError::BudgetExceeded { paths: 16384, .. })));
        cfg.brute_cap = 1 << 14;
        assert!(brute_force(&g, &SumNeg, &(), &POOL, &cfg).is_ok());
    }

    struct Undefined;
    impl Verifier<f64> for Undefined {
        fn score(&self, _: &[f64]) -> Result<f64, VerifyError> {
            Err(VerifyError::Undefined("never".into()))
        }
    }

    #[test]
    fn undefined_everywhere_fails_loudly() {
        let g = table();
        let w = WindowSpec::new(2).unwrap();
        assert!(matches!(
            search_on_path(&g, &Undefined, &(), &POOL, 2, 3, w, true),
            Err(SearchError::AllRewardsUndefined { step: 0 })
        ));
        assert!(matches!(
            beam_search(&g, &Undefined, &(), &POOL, &SearchConfig::new(2, 2, 3, w)),
            Err(SearchError::AllRewardsUndefined { .. })
        ));
    }

    #[test]
    fn serial_wrapper_matches() {
        let w = WindowSpec::new(3).unwrap();
        let cfg = SearchConfig::new(3, 3, 4, w);
        let a = beam_search(&table(), &SumNeg, &(), &POOL, &cfg).unwrap();
        let b = beam_search(&Serial(table()), &SumNeg, &(), &POOL, &cfg).unwrap();
        assert_eq!(a.path, b.path);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn errors() {
        let g = table();
        let w = WindowSpec::new(2).unwrap();
        assert!(matches!(
            beam_search(&g, &SumNeg, &(), &POOL[..2], &SearchConfig::new(3, 1, 2, w)),
            Err(SearchError::PoolTooSmall { needed: 3, got: 2 })
        ));
        assert!(matches!(
            beam_search(&g, &SumNeg, &(), &POOL, &SearchConfig::new(0, 1, 2, w)),
            Err(SearchError::InvalidConfig(_))
        ));
    }
}
