//! Alignment losses with analytic gradients: flow matching, Flow-DPO and
//! the auxiliary anti-collapse term. Tensors are flat `f64` slices; every
//! reduction is a mean.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("noise level t must lie in [0, 1], got {0}")]
    InvalidT(f64),
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("sequence of {0} frames is too short; at least 3 are needed")]
    SequenceTooShort(usize),
    #[error("weights must be non-negative")]
    NegativeWeight,
    #[error("empty tensor")]
    Empty,
}

fn same_len(name: &str, a: &[f64], b: &[f64]) -> Result<(), LossError> {
    if a.len() != b.len() {
        return Err(LossError::ShapeMismatch(format!("{name}: {} vs {}", a.len(), b.len())));
    }
    Ok(())
}

/// `x_t = (1 − t)·x0 + t·ε` with target velocity `x0 − ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    pub t: f64,
}

impl FlowSample {
    pub fn new(x0: Vec<f64>, eps: Vec<f64>, t: f64) -> Result<Self, LossError> {
        same_len("x0/eps", &x0, &eps)?;
        if x0.is_empty() {
            return Err(LossError::Empty);
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(LossError::InvalidT(t));
        }
        Ok(Self { x0, eps, t })
    }

    pub fn x_t(&self) -> Vec<f64> {
        self.x0.iter().zip(&self.eps).map(|(x, e)| (1.0 - self.t) * x + self.t * e).collect()
    }

    pub fn target(&self) -> Vec<f64> {
        self.x0.iter().zip(&self.eps).map(|(x, e)| x - e).collect()
    }
}

/// Mean squared value of `a − b`.
fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `mean‖pred − (x0 − ε)‖²` and its gradient with respect to `pred`.
pub fn flow_match_loss(pred: &[f64], sample: &FlowSample) -> Result<(f64, Vec<f64>), LossError> {
    same_len("pred/x0", pred, &sample.x0)?;
    same_len("x0/eps", &sample.x0, &sample.eps)?;
    if pred.is_empty() {
        return Err(LossError::Empty);
    }
    let target = sample.target();
    let n = pred.len() as f64;
    let grad = pred.iter().zip(&target).map(|(p, v)| 2.0 * (p - v) / n).collect();
    Ok((mse(pred, &target), grad))
}

/// `log(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x == 0.0 {
        std::f64::consts::LN_2
    } else if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoBatch {
    pub v_theta_w: Vec<f64>,
    pub v_ref_w: Vec<f64>,
    pub v_theta_l: Vec<f64>,
    pub v_ref_l: Vec<f64>,
    pub v_w_target: Vec<f64>,
    pub v_l_target: Vec<f64>,
    pub beta: f64,
    pub t: f64,
}

impl DpoBatch {
    pub fn validate(&self) -> Result<(), LossError> {
        let n = self.v_theta_w.len();
        for (name, v) in [
            ("v_ref_w", &self.v_ref_w),
            ("v_theta_l", &self.v_theta_l),
            ("v_ref_l", &self.v_ref_l),
            ("v_w_target", &self.v_w_target),
            ("v_l_target", &self.v_l_target),
        ] {
            if v.len() != n {
                return Err(LossError::ShapeMismatch(format!("{name} has {} elements, v_theta_w has {n}", v.len())));
            }
        }
        if n == 0 {
            return Err(LossError::Empty);
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(LossError::InvalidBeta(self.beta));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(LossError::InvalidT(self.t));
        }
        Ok(())
    }

    /// `β_t = β(1 − t²)`.
    pub fn beta_t(&self) -> f64 {
        self.beta * (1.0 - self.t * self.t)
    }

    /// Winner and loser branches exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            v_theta_w: self.v_theta_l.clone(),
            v_ref_w: self.v_ref_l.clone(),
            v_theta_l: self.v_theta_w.clone(),
            v_ref_l: self.v_ref_w.clone(),
            v_w_target: self.v_l_target.clone(),
            v_l_target: self.v_w_target.clone(),
            beta: self.beta,
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoOutput {
    pub loss: f64,
    /// `(e_θ^w − e_ref^w) − (e_θ^l − e_ref^l)` with `e` the velocity MSE.
    pub margin: f64,
    pub beta_t: f64,
    pub grad_theta_w: Vec<f64>,
    pub grad_theta_l: Vec<f64>,
}

/// `−log σ(−(β_t/2)·m)`, written as `softplus((β_t/2)·m)`, with gradients
/// for the policy predictions of both branches.
pub fn flow_dpo_loss(b: &DpoBatch) -> Result<DpoOutput, LossError> {
    b.validate()?;
    let margin = (mse(&b.v_w_target, &b.v_theta_w) - mse(&b.v_w_target, &b.v_ref_w))
        - (mse(&b.v_l_target, &b.v_theta_l) - mse(&b.v_l_target, &b.v_ref_l));
    let beta_t = b.beta_t();
    let x = 0.5 * beta_t * margin;
    let loss = softplus(x);
    let dm = sigmoid(x) * 0.5 * beta_t;
    let n = b.v_theta_w.len() as f64;
    let grad_theta_w = b.v_theta_w.iter().zip(&b.v_w_target).map(|(p, v)| dm * 2.0 * (p - v) / n).collect();
    let grad_theta_l = b.v_theta_l.iter().zip(&b.v_l_target).map(|(p, v)| -dm * 2.0 * (p - v) / n).collect();
    Ok(DpoOutput { loss, margin, beta_t, grad_theta_w, grad_theta_l })
}

/// Reconstructed clean sequence, `frames × dim` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxBatch {
    pub x0_hat: Vec<f64>,
    pub frames: usize,
    pub gamma: f64,
    pub lambda: f64,
}

impl AuxBatch {
    pub fn dim(&self) -> usize {
        if self.frames == 0 {
            0
        } else {
            self.x0_hat.len() / self.frames
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if self.frames < 3 {
            return Err(LossError::SequenceTooShort(self.frames));
        }
        if self.x0_hat.is_empty() || self.x0_hat.len() % self.frames != 0 {
            return Err(LossError::ShapeMismatch(format!(
                "{} values do not split into {} frames",
                self.x0_hat.len(),
                self.frames
            )));
        }
        if !(self.gamma >= 0.0 && self.lambda >= 0.0) {
            return Err(LossError::NegativeWeight);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxOutput {
    /// Population variance over time, averaged over elements.
    pub variance: f64,
    /// Mean squared second temporal difference.
    pub smoothness: f64,
    /// `−variance + γ·smoothness`.
    pub aux: f64,
    /// `base + λ·aux` when a base loss was given.
    pub total: Option<f64>,
    /// Gradient of `aux` with respect to `x0_hat`.
    pub grad: Vec<f64>,
}

/// Auxiliary loss rewarding motion (temporal variance) and penalizing jerk
/// (second differences).
pub fn aux_loss(b: &AuxBatch, base: Option<f64>) -> Result<AuxOutput, LossError> {
    b.validate()?;
    let (t_len, d) = (b.frames, b.dim());
    let x = |t: usize, j: usize| b.x0_hat[t * d + j];
    let mut grad = vec![0.0; t_len * d];

    let mut variance = 0.0;
    let vscale = 1.0 / (t_len * d) as f64;
    for j in 0..d {
        // Centered on frame 0 so a constant sequence gives exactly zero.
        let shift = x(0, j);
        let mean = (0..t_len).map(|t| x(t, j) - shift).sum::<f64>() / t_len as f64;
        for t in 0..t_len {
            let c = (x(t, j) - shift) - mean;
            variance += c * c * vscale;
            // d(−Var)/dx: the mean's own derivative cancels.
            grad[t * d + j] -= 2.0 * c * vscale;
        }
    }

    let m = ((t_len - 2) * d) as f64;
    let mut smoothness = 0.0;
    for i in 1..t_len - 1 {
        for j in 0..d {
            let dd = x(i + 1, j) - 2.0 * x(i, j) + x(i - 1, j);
            smoothness += dd * dd / m;
            let g = b.gamma * 2.0 * dd / m;
            grad[(i + 1) * d + j] += g;
            grad[i * d + j] -= 2.0 * g;
            grad[(i - 1) * d + j] += g;
        }
    }
    let aux = -variance + b.gamma * smoothness;
    Ok(AuxOutput { variance, smoothness, aux, total: base.map(|l| l + b.lambda * aux), grad })
}

/// Central-difference gradient checks.
pub mod check {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde::Serialize;

    pub const STEP: f64 = 1e-4;
    pub const TOLERANCE: f64 = 1e-5;

    /// Central-difference gradient of `f` at `x`.
    pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|i| {
                let orig = probe[i];
                probe[i] = orig + h;
                let up = f(&probe);
                probe[i] = orig - h;
                let down = f(&probe);
                probe[i] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
    pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let scale = norm(a).max(norm(b));
        if scale == 0.0 {
            0.0
        } else {
            norm(&diff) / scale
        }
    }

    #[derive(Debug, Clone, PartialEq, Serialize)]
    pub struct CheckResult {
        pub name: String,
        pub batches: usize,
        pub max_relative_error: f64,
        pub tolerance: f64,
        pub passed: bool,
    }

    fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
    }

    pub fn random_flow(rng: &mut ChaCha8Rng) -> (Vec<f64>, FlowSample) {
        let n = rng.random_range(1..40);
        let s = FlowSample::new(normal_vec(rng, n), normal_vec(rng, n), rng.random_range(0.0..=1.0)).unwrap();
        (normal_vec(rng, n), s)
    }

    pub fn random_dpo(rng: &mut ChaCha8Rng) -> DpoBatch {
        let n = rng.random_range(1..24);
        DpoBatch {
            v_theta_w: normal_vec(rng, n),
            v_ref_w: normal_vec(rng, n),
            v_theta_l: normal_vec(rng, n),
            v_ref_l: normal_vec(rng, n),
            v_w_target: normal_vec(rng, n),
            v_l_target: normal_vec(rng, n),
            beta: rng.random_range(0.1..10.0),
            t: rng.random_range(0.0..1.0),
        }
    }

    pub fn random_aux(rng: &mut ChaCha8Rng) -> AuxBatch {
        let frames = rng.random_range(3..10);
        let dim = rng.random_range(1..6);
        AuxBatch { x0_hat: normal_vec(rng, frames * dim), frames, gamma: rng.random_range(0.0..3.0), lambda: 0.5 }
    }

    fn flow_error(pred: &[f64], s: &FlowSample) -> f64 {
        let (_, g) = flow_match_loss(pred, s).unwrap();
        let fd = numeric_gradient(|p| flow_match_loss(p, s).unwrap().0, pred, STEP);
        relative_error(&g, &fd)
    }

    fn dpo_error(b: &DpoBatch) -> f64 {
        let out = flow_dpo_loss(b).unwrap();
        let fw = numeric_gradient(
            |p| flow_dpo_loss(&DpoBatch { v_theta_w: p.to_vec(), ..b.clone() }).unwrap().loss,
            &b.v_theta_w,
            STEP,
        );
        let fl = numeric_gradient(
            |p| flow_dpo_loss(&DpoBatch { v_theta_l: p.to_vec(), ..b.clone() }).unwrap().loss,
            &b.v_theta_l,
            STEP,
        );
        let a: Vec<f64> = out.grad_theta_w.iter().chain(&out.grad_theta_l).copied().collect();
        let n: Vec<f64> = fw.into_iter().chain(fl).collect();
        relative_error(&a, &n)
    }

    fn aux_error(b: &AuxBatch) -> f64 {
        let out = aux_loss(b, None).unwrap();
        let fd = numeric_gradient(|x| aux_loss(&AuxBatch { x0_hat: x.to_vec(), ..b.clone() }, None).unwrap().aux, &b.x0_hat, STEP);
        relative_error(&out.grad, &fd)
    }

    /// Runs `batches` randomized gradient checks per loss.
    pub fn run_suite(batches: usize, seed: u64) -> Vec<CheckResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max = [0.0f64; 3];
        for _ in 0..batches {
            let (pred, s) = random_flow(&mut rng);
            max[0] = max[0].max(flow_error(&pred, &s));
            max[1] = max[1].max(dpo_error(&random_dpo(&mut rng)));
            max[2] = max[2].max(aux_error(&random_aux(&mut rng)));
        }
        ["flow_match", "flow_dpo", "aux"]
            .iter()
            .zip(max)
            .map(|(name, e)| CheckResult {
                name: name.to_string(),
                batches,
                max_relative_error: e,
                tolerance: TOLERANCE,
                passed: e < TOLERANCE,
            })
            .collect()
    }
}
