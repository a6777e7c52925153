//! Actor-critic learner over lattice-basis coefficient actions.
//!
//! The actor and critic share a feature extractor `phi_theta`. The actor
//! head maps features to a mean and log standard deviation per basis
//! coefficient; the critic is the linear map `V(s) = phi_theta(s) . omega`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::LatticeBasis;
use crate::mdp::{FiberEnv, MdpConfig};
use crate::models::DesignMatrix;
use crate::nn::{Activation, DenseNet, Layout, Trace};
use crate::point::FiberPoint;

pub const SIGMA_MIN: f64 = 1e-3;
pub const SIGMA_MAX: f64 = 1e3;
pub const DEFAULT_PARAM_RADIUS: f64 = 1e3;

/// Default masking rule: no mask up to 100 cells, otherwise keep 10 coefficients.
pub fn default_mask(d: usize, c: usize) -> Option<usize> {
    if d <= 100 {
        None
    } else {
        Some(10.min(c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { hidden: vec![64, 64], activation: Activation::Tanh }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub feature_net: DenseNet,
    pub actor_head: DenseNet,
    pub critic_weights: Vec<f64>,
    pub mask_k: Option<usize>,
    pub c1: i64,
    pub c2: i64,
    /// States are divided by this before entering the feature extractor.
    pub input_scale: f64,
}

/// One draw from the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    /// Rounded, clamped and masked coefficients.
    pub coeffs: Vec<i64>,
    /// Pre-rounding Gaussian draw.
    pub continuous: Vec<f64>,
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
    pub features: Vec<f64>,
    /// Gradient of `ln pi(continuous | state)` with respect to `theta`.
    pub log_prob_grad: Vec<f64>,
}

/// Per-state Gaussian head outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHead {
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Whether `log sigma` sat inside the clamp (gradient flows) per coordinate.
    pub sigma_free: Vec<bool>,
    pub features: Vec<f64>,
}

struct Forward {
    feature_trace: Trace,
    head_trace: Trace,
    head: PolicyHead,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(
        d: usize,
        c: usize,
        arch: &Architecture,
        mdp: &MdpConfig,
        input_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if c == 0 {
            return Err(Error::Config("the lattice basis is empty".into()));
        }
        if !(input_scale > 0.0 && input_scale.is_finite()) {
            return Err(Error::Validation("input scale must be positive".into()));
        }
        let (hidden_last, body) = match arch.hidden.split_last() {
            Some((&last, body)) => (last, body),
            None => return Err(Error::Validation("the feature extractor needs a hidden layer".into())),
        };
        let mut widths = body.to_vec();
        widths.push(hidden_last);
        let features = Layout::chain(d, &widths, arch.activation, arch.activation)?;
        let head = Layout::chain(hidden_last, &[2 * c], Activation::Identity, Activation::Identity)?;
        Ok(Self {
            feature_net: DenseNet::init(features, rng),
            actor_head: DenseNet::init(head, rng),
            critic_weights: vec![0.0; hidden_last],
            mask_k: default_mask(d, c),
            c1: mdp.c1,
            c2: mdp.c2,
            input_scale,
        })
    }

    /// Scale used by default: the largest entry of the starting point.
    pub fn scale_for(start: &[i64]) -> f64 {
        start.iter().map(|v| v.abs()).max().unwrap_or(0).max(1) as f64
    }

    pub fn num_coefficients(&self) -> usize {
        self.actor_head.output_dim() / 2
    }

    pub fn state_dim(&self) -> usize {
        self.feature_net.input_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_net.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.critic_weights.len() != self.feature_dim() || self.actor_head.input_dim() != self.feature_dim() {
            return Err(Error::Validation("network widths do not chain".into()));
        }
        if self.actor_head.output_dim() % 2 != 0 {
            return Err(Error::Validation("actor head must emit mean and log-sigma pairs".into()));
        }
        if let Some(k) = self.mask_k {
            if k == 0 || k > self.num_coefficients() {
                return Err(Error::Validation(format!("mask size {k} outside 1..={}", self.num_coefficients())));
            }
        }
        if self.c1 >= self.c2 {
            return Err(Error::Validation("c1 must be below c2".into()));
        }
        Ok(())
    }

    pub fn theta_len(&self) -> usize {
        self.feature_net.params().len() + self.actor_head.params().len()
    }

    /// Actor parameters: feature extractor followed by the actor head.
    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.feature_net.params().to_vec();
        t.extend_from_slice(self.actor_head.params());
        t
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.theta_len() {
            return Err(Error::Contract("theta has the wrong length".into()));
        }
        let split = self.feature_net.params().len();
        self.feature_net.params_mut().copy_from_slice(&theta[..split]);
        self.actor_head.params_mut().copy_from_slice(&theta[split..]);
        Ok(())
    }

    fn scaled(&self, state: &[i64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::Contract(format!(
                "state of length {} for a policy over {} cells",
                state.len(),
                self.state_dim()
            )));
        }
        Ok(state.iter().map(|&v| v as f64 / self.input_scale).collect())
    }

    pub fn features(&self, state: &[i64]) -> Result<Vec<f64>> {
        self.feature_net.forward(&self.scaled(state)?)
    }

    fn forward(&self, state: &[i64]) -> Result<Forward> {
        let feature_trace = self.feature_net.trace(&self.scaled(state)?)?;
        let head_trace = self.actor_head.trace(feature_trace.output())?;
        let out = head_trace.output();
        let c = self.num_coefficients();
        let (lo, hi) = (libm::log(SIGMA_MIN), libm::log(SIGMA_MAX));
        let mean = out[..c].to_vec();
        let mut sigma = Vec::with_capacity(c);
        let mut sigma_free = Vec::with_capacity(c);
        for &ls in &out[c..] {
            sigma_free.push(ls > lo && ls < hi);
            sigma.push(libm::exp(ls.clamp(lo, hi)));
        }
        let features = feature_trace.output().to_vec();
        Ok(Forward { feature_trace, head_trace, head: PolicyHead { mean, sigma, sigma_free, features } })
    }

    pub fn head(&self, state: &[i64]) -> Result<PolicyHead> {
        Ok(self.forward(state)?.head)
    }

    /// `ln pi(a | state)` of a continuous action under the Gaussian head.
    pub fn log_prob(&self, state: &[i64], action: &[f64]) -> Result<f64> {
        let head = self.head(state)?;
        Ok(gaussian_log_density(&head.mean, &head.sigma, action))
    }

    /// `ln pi(a | state)` and its gradient with respect to `theta`.
    pub fn log_prob_grad(&self, state: &[i64], action: &[f64]) -> Result<(f64, Vec<f64>)> {
        let fwd = self.forward(state)?;
        let grad = self.grad_from_forward(&fwd, action)?;
        Ok((gaussian_log_density(&fwd.head.mean, &fwd.head.sigma, action), grad))
    }

    fn grad_from_forward(&self, fwd: &Forward, action: &[f64]) -> Result<Vec<f64>> {
        let c = self.num_coefficients();
        if action.len() != c {
            return Err(Error::Contract("action length differs from the basis size".into()));
        }
        let mut out_grad = vec![0.0; 2 * c];
        for i in 0..c {
            let s = fwd.head.sigma[i];
            let z = (action[i] - fwd.head.mean[i]) / s;
            out_grad[i] = z / s;
            if fwd.head.sigma_free[i] {
                out_grad[c + i] = z * z - 1.0;
            }
        }
        let split = self.feature_net.params().len();
        let mut grad = vec![0.0; self.theta_len()];
        let feature_grad = self.actor_head.backward_into(&fwd.head_trace, &out_grad, 1.0, &mut grad[split..])?;
        self.feature_net.backward_into(&fwd.feature_trace, &feature_grad, 1.0, &mut grad[..split])?;
        Ok(grad)
    }

    /// Round, clamp and mask a continuous action.
    pub fn discretize(&self, continuous: &[f64]) -> Vec<i64> {
        let mut coeffs: Vec<i64> = continuous
            .iter()
            .map(|&v| {
                let r = libm::round(v);
                if r <= self.c1 as f64 {
                    self.c1
                } else if r >= self.c2 as f64 {
                    self.c2
                } else {
                    r as i64
                }
            })
            .collect();
        if let Some(k) = self.mask_k {
            apply_mask(&mut coeffs, k);
        }
        coeffs
    }

    pub fn policy_sample<R: Rng + ?Sized>(&self, state: &[i64], rng: &mut R) -> Result<PolicySample> {
        let fwd = self.forward(state)?;
        let continuous: Vec<f64> = fwd
            .head
            .mean
            .iter()
            .zip(&fwd.head.sigma)
            .map(|(&m, &s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let log_prob_grad = self.grad_from_forward(&fwd, &continuous)?;
        let coeffs = self.discretize(&continuous);
        let Forward { head, .. } = fwd;
        Ok(PolicySample {
            coeffs,
            continuous,
            mean: head.mean,
            sigma: head.sigma,
            features: head.features,
            log_prob_grad,
        })
    }

    /// Log probability that the policy proposes exactly `coeffs` from `state`:
    /// the Gaussian mass of each rounded cell, with the clamp cells extended
    /// to infinity.
    pub fn proposal_log_prob(&self, state: &[i64], coeffs: &[i64]) -> Result<f64> {
        let head = self.head(state)?;
        Ok(self.cell_log_prob(&head, coeffs))
    }

    pub fn cell_log_prob(&self, head: &PolicyHead, coeffs: &[i64]) -> f64 {
        let mut total = 0.0;
        for ((&a, &m), &s) in coeffs.iter().zip(&head.mean).zip(&head.sigma) {
            if a < self.c1 || a > self.c2 {
                return f64::NEG_INFINITY;
            }
            let lo = if a == self.c1 { f64::NEG_INFINITY } else { a as f64 - 0.5 };
            let hi = if a == self.c2 { f64::INFINITY } else { a as f64 + 0.5 };
            total += log_gaussian_mass(lo, hi, m, s);
        }
        total
    }

    pub fn critic_value(&self, state: &[i64]) -> Result<f64> {
        Ok(dot(&self.features(state)?, &self.critic_weights))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn gaussian_log_density(mean: &[f64], sigma: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(sigma)
        .zip(x)
        .map(|((&m, &s), &v)| {
            let z = (v - m) / s;
            -0.5 * z * z - libm::log(s) - LN_SQRT_2PI
        })
        .sum()
}

/// `ln P(Z > z)` for standard normal `Z`, accurate far into the tail.
pub fn log_upper_tail(z: f64) -> f64 {
    if z == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if z < 30.0 {
        return libm::log(0.5 * libm::erfc(z / core::f64::consts::SQRT_2));
    }
    let z2 = z * z;
    -0.5 * z2 - libm::log(z) - LN_SQRT_2PI + libm::log1p(-1.0 / z2 + 3.0 / (z2 * z2))
}

/// `ln P(lo <= X < hi)` for `X ~ N(mean, sigma^2)`.
pub fn log_gaussian_mass(lo: f64, hi: f64, mean: f64, sigma: f64) -> f64 {
    let a = (lo - mean) / sigma;
    let b = (hi - mean) / sigma;
    if a >= 0.0 {
        // both bounds in the upper tail
        let la = log_upper_tail(a);
        let lb = log_upper_tail(b);
        la + libm::log1p(-libm::exp(lb - la))
    } else if b <= 0.0 {
        let la = log_upper_tail(-b);
        let lb = log_upper_tail(-a);
        la + libm::log1p(-libm::exp(lb - la))
    } else {
        libm::log1p(-(libm::exp(log_upper_tail(-a)) + libm::exp(log_upper_tail(b))))
    }
}

/// Zero all but the `k` coefficients of largest magnitude; ties go to the
/// lower index.
pub fn apply_mask(coeffs: &mut [i64], k: usize) {
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&i, &j| coeffs[j].abs().cmp(&coeffs[i].abs()).then(i.cmp(&j)));
    for &i in order.iter().skip(k) {
        coeffs[i] = 0;
    }
}

/// One roll-out window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// `K + 1` states; the last one is the bootstrap state.
    pub states: Vec<FiberPoint>,
    pub continuous_actions: Vec<Vec<f64>>,
    pub coeff_actions: Vec<Vec<i64>>,
    pub rewards: Vec<f64>,
    /// `K + 1` critic values, the last one being the bootstrap value.
    pub values: Vec<f64>,
    /// Features of all `K + 1` states.
    pub features: Vec<Vec<f64>>,
    pub log_prob_grads: Vec<Vec<f64>>,
    /// Steps whose move was nonzero and feasible.
    pub moves_taken: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn check(&self) -> Result<()> {
        let k = self.rewards.len();
        if k == 0
            || self.states.len() != k + 1
            || self.values.len() != k + 1
            || self.features.len() != k + 1
            || self.coeff_actions.len() != k
            || self.log_prob_grads.len() != k
        {
            return Err(Error::Contract("trajectory lengths are inconsistent".into()));
        }
        Ok(())
    }
}

/// Temporal differences `delta_t = r_t + gamma V_{t+1} - V_t`.
pub fn temporal_differences(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len(), "one value per reward");
    (0..rewards.len())
        .map(|t| {
            let next = if t + 1 < values.len() { values[t + 1] } else { bootstrap };
            rewards[t] + gamma * next - values[t]
        })
        .collect()
}

/// Truncated generalized advantage estimates over one window.
pub fn compute_gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let deltas = temporal_differences(rewards, values, bootstrap, gamma);
    let mut adv = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for t in (0..deltas.len()).rev() {
        acc = deltas[t] + gamma * lambda * acc;
        adv[t] = acc;
    }
    adv
}

/// Scales `v` back onto the ball of the given radius if it lies outside.
pub fn project_ball(v: &mut [f64], radius: f64) {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm > radius {
        let s = radius / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

fn l2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

/// Ascent direction `(1/K) sum_k grad ln pi(A_k|S_k) * GAE_k`.
pub fn actor_direction(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    traj.check()?;
    let k = traj.len();
    let adv = compute_gae(&traj.rewards, &traj.values[..k], traj.values[k], gamma, lambda);
    let mut dir = vec![0.0; traj.log_prob_grads[0].len()];
    for (g, &a) in traj.log_prob_grads.iter().zip(&adv) {
        if a == 0.0 {
            continue;
        }
        for (d, &gi) in dir.iter_mut().zip(g) {
            *d += gi * a;
        }
    }
    let inv = 1.0 / k as f64;
    dir.iter_mut().for_each(|d| *d *= inv);
    if dir.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("actor gradient".into()));
    }
    Ok(dir)
}

/// Descent direction of the n-step bootstrap squared error in `omega`:
/// `sum_k (V_k - target_k)(phi_k - gamma^(K-k) phi_K)`.
pub fn critic_direction(traj: &Trajectory, gamma: f64) -> Result<Vec<f64>> {
    traj.check()?;
    let k = traj.len();
    let boot = traj.values[k];
    let phi_k = &traj.features[k];
    let mut dir = vec![0.0; phi_k.len()];
    for i in 0..k {
        let mut target = 0.0;
        let mut disc = 1.0;
        for j in i..k {
            target += disc * traj.rewards[j];
            disc *= gamma;
        }
        // disc is now gamma^(K - i)
        target += disc * boot;
        let resid = traj.values[i] - target;
        if resid == 0.0 {
            continue;
        }
        for ((d, &p), &q) in dir.iter_mut().zip(&traj.features[i]).zip(phi_k) {
            *d += resid * (p - disc * q);
        }
    }
    if dir.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("critic gradient".into()));
    }
    Ok(dir)
}

/// `theta <- Pi(theta + step * direction)`.
pub fn actor_update(ac: &mut ActorCritic, traj: &Trajectory, step: f64, gamma: f64, lambda: f64, radius: f64) -> Result<()> {
    let dir = actor_direction(traj, gamma, lambda)?;
    apply_actor(ac, &dir, step, radius)
}

/// `omega <- Pi(omega - step * direction)`.
pub fn critic_update(ac: &mut ActorCritic, traj: &Trajectory, step: f64, gamma: f64, radius: f64) -> Result<()> {
    let dir = critic_direction(traj, gamma)?;
    apply_critic(ac, &dir, step, radius)
}

fn apply_actor(ac: &mut ActorCritic, dir: &[f64], step: f64, radius: f64) -> Result<()> {
    let mut theta = ac.theta();
    for (t, &g) in theta.iter_mut().zip(dir) {
        *t += step * g;
    }
    project_ball(&mut theta, radius);
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("actor parameters".into()));
    }
    ac.set_theta(&theta)
}

fn apply_critic(ac: &mut ActorCritic, dir: &[f64], step: f64, radius: f64) -> Result<()> {
    if dir.len() != ac.critic_weights.len() {
        return Err(Error::Contract("critic direction has the wrong length".into()));
    }
    for (w, &g) in ac.critic_weights.iter_mut().zip(dir) {
        *w -= step * g;
    }
    project_ball(&mut ac.critic_weights, radius);
    if ac.critic_weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("critic parameters".into()));
    }
    Ok(())
}

/// `scale / t^exponent` for `t >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub scale: f64,
    pub exponent: f64,
}

impl StepSchedule {
    pub fn at(&self, t: u64) -> f64 {
        self.scale / libm::pow(t.max(1) as f64, self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    /// Roll-out window length `K`.
    pub rollout: usize,
    pub episodes: usize,
    pub actor_schedule: StepSchedule,
    pub critic_schedule: StepSchedule,
    pub param_radius: f64,
    /// Largest Euclidean norm of an actor update direction; `None` disables clipping.
    pub actor_clip: Option<f64>,
    /// Same for the critic.
    pub critic_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.95,
            rollout: 10,
            episodes: 1000,
            actor_schedule: StepSchedule { scale: 0.005, exponent: 2.0 / 3.0 },
            critic_schedule: StepSchedule { scale: 0.05, exponent: 1.0 },
            param_radius: DEFAULT_PARAM_RADIUS,
            actor_clip: None,
            critic_clip: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Swaps which network follows which schedule.
    pub fn swapped_timescales(mut self) -> Self {
        core::mem::swap(&mut self.actor_schedule, &mut self.critic_schedule);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Validation("lambda must lie in [0, 1]".into()));
        }
        if self.rollout == 0 {
            return Err(Error::Validation("roll-out length must be at least 1".into()));
        }
        for s in [self.actor_schedule, self.critic_schedule] {
            if !(s.scale > 0.0 && s.scale.is_finite() && s.exponent >= 0.0) {
                return Err(Error::Validation("step-size schedules must be positive and nonincreasing".into()));
            }
        }
        if !(self.param_radius > 0.0) {
            return Err(Error::Validation("parameter radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRecord {
    pub window: u64,
    pub mean_reward: f64,
    pub feasible_fraction: f64,
    pub discovered_count: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub records: Vec<WindowRecord>,
}

impl TrainingLog {
    /// Mean of a column over the windows in `[from, to)` given as fractions.
    pub fn mean_over(&self, from: f64, to: f64, f: impl Fn(&WindowRecord) -> f64) -> f64 {
        let n = self.records.len();
        let a = (from * n as f64) as usize;
        let b = ((to * n as f64) as usize).max(a + 1).min(n);
        if a >= b {
            return f64::NAN;
        }
        self.records[a..b].iter().map(f).sum::<f64>() / (b - a) as f64
    }
}

/// Collects one window of at most `k` steps.
pub fn rollout<R: Rng + ?Sized>(env: &mut FiberEnv<'_>, ac: &ActorCritic, k: usize, rng: &mut R) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    for _ in 0..k {
        let state = env.current().clone();
        let sample = ac.policy_sample(&state, rng)?;
        let out = env.step(&sample.coeffs)?;
        traj.values.push(dot(&sample.features, &ac.critic_weights));
        traj.features.push(sample.features);
        traj.states.push(state);
        traj.rewards.push(out.reward);
        traj.continuous_actions.push(sample.continuous);
        traj.coeff_actions.push(sample.coeffs);
        traj.log_prob_grads.push(sample.log_prob_grad);
        if out.moved() {
            traj.moves_taken += 1;
        }
    }
    let last = env.current().clone();
    let phi = ac.features(&last)?;
    traj.values.push(dot(&phi, &ac.critic_weights));
    traj.features.push(phi);
    traj.states.push(last);
    Ok(traj)
}

/// Trains `ac` on the fiber through `start`. Both updates of a window use
/// the parameters the window was collected with.
pub fn train(
    design: &DesignMatrix,
    basis: &LatticeBasis,
    start: &FiberPoint,
    ac: &mut ActorCritic,
    mdp: &MdpConfig,
    cfg: &TrainConfig,
) -> Result<TrainingLog> {
    cfg.validate()?;
    ac.validate()?;
    if basis.is_empty() {
        return Err(Error::Config("the lattice basis is empty".into()));
    }
    if ac.num_coefficients() != basis.len() || ac.state_dim() != design.d() {
        return Err(Error::Config("policy shape does not match the fiber".into()));
    }
    let mut env = FiberEnv::new(design, basis, start.clone(), *mdp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = TrainingLog::default();
    let mut window = 0u64;
    for _ in 0..cfg.episodes {
        env.reset(start.clone())?;
        let mut remaining = mdp.steps_per_episode;
        while remaining > 0 {
            let k = cfg.rollout.min(remaining);
            remaining -= k;
            let traj = rollout(&mut env, ac, k, &mut rng)?;
            window += 1;
            let alpha = cfg.actor_schedule.at(window);
            let beta = cfg.critic_schedule.at(window);
            let mut critic_dir = critic_direction(&traj, mdp.gamma)?;
            let mut actor_dir = actor_direction(&traj, mdp.gamma, cfg.lambda)?;
            if let Some(c) = cfg.actor_clip {
                project_ball(&mut actor_dir, c);
            }
            if let Some(c) = cfg.critic_clip {
                project_ball(&mut critic_dir, c);
            }
            apply_actor(ac, &actor_dir, alpha, cfg.param_radius)?;
            apply_critic(ac, &critic_dir, beta, cfg.param_radius)?;
            debug_assert!(l2(&ac.theta()) <= cfg.param_radius * (1.0 + 1e-12));
            log.records.push(WindowRecord {
                window,
                mean_reward: traj.rewards.iter().sum::<f64>() / k as f64,
                feasible_fraction: traj.moves_taken as f64 / k as f64,
                discovered_count: env.state().discovered.len(),
                alpha,
                beta,
            });
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::compute_lattice_basis;
    use crate::models::{build_design_matrix, ModelFamily, ModelSpec};

    fn zero_policy(d: usize, c: usize, width: usize) -> ActorCritic {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = Architecture { hidden: vec![width], activation: Activation::Tanh };
        let mut ac = ActorCritic::new(d, c, &arch, &MdpConfig::default(), 1.0, &mut rng).unwrap();
        ac.feature_net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        ac.actor_head.params_mut().iter_mut().for_each(|p| *p = 0.0);
        ac
    }

    #[test]
    fn zero_parameters_give_standard_normal() {
        let ac = zero_policy(4, 1, 3);
        let head = ac.head(&[1, 0, 0, 1]).unwrap();
        assert_eq!(head.mean, vec![0.0]);
        assert_eq!(head.sigma, vec![1.0]);
    }

    #[test]
    fn rounding_and_clamping() {
        let ac = zero_policy(4, 3, 2);
        assert_eq!(ac.discretize(&[0.4, 7.3, -9.0]), vec![0, 2, -2]);
        assert_eq!(ac.discretize(&[-0.6, 1.5, -1.4]), vec![-1, 2, -1]);
    }

    #[test]
    fn mask_keeps_largest_lowest_index() {
        let mut v = vec![1, -2, 2, 0, 1];
        apply_mask(&mut v, 2);
        assert_eq!(v, vec![0, -2, 2, 0, 0]);
        let mut w = vec![1, 1, 1];
        apply_mask(&mut w, 1);
        assert_eq!(w, vec![1, 0, 0]);
    }

    #[test]
    fn critic_value_examples() {
        let mut ac = zero_policy(2, 1, 1);
        assert_eq!(ac.critic_value(&[3, 4]).unwrap(), 0.0);
        // feature = tanh(b) with zero weights; choose b so phi = tanh(b)
        let b = libm::atanh(0.5);
        let n = ac.feature_net.params().len();
        ac.feature_net.params_mut()[n - 1] = b;
        ac.critic_weights = vec![3.0];
        assert!((ac.critic_value(&[3, 4]).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gae_examples() {
        // gamma 0.5, lambda 1, deltas (1, 1): values zero, rewards one
        let a = compute_gae(&[1.0, 1.0], &[0.0, 0.0], 0.0, 0.5, 1.0);
        assert_eq!(a[0], 1.5);
        let r = [0.3, -1.0, 2.0];
        let v = [0.1, 0.5, -0.2];
        let d = temporal_differences(&r, &v, 0.7, 0.9);
        assert_eq!(compute_gae(&r, &v, 0.7, 0.9, 0.0), d);
        assert_eq!(compute_gae(&r[..1], &v[..1], 0.7, 0.9, 0.8), temporal_differences(&r[..1], &v[..1], 0.7, 0.9));
    }

    #[test]
    fn log_mass_matches_direct_cdf() {
        let phi = |z: f64| 0.5 * libm::erfc(-z / core::f64::consts::SQRT_2);
        for &(lo, hi, m, s) in &[(-0.5, 0.5, 0.0, 1.0), (0.5, 1.5, 0.3, 0.7), (-2.5, -1.5, 1.0, 2.0), (1.5, f64::INFINITY, 0.0, 1.0)] {
            let direct = phi((hi - m) / s) - phi((lo - m) / s);
            assert!((libm::exp(log_gaussian_mass(lo, hi, m, s)) - direct).abs() < 1e-12);
        }
        // far tail stays finite
        let far = log_gaussian_mass(99.5, 100.5, 0.0, 1.0);
        assert!(far.is_finite() && far < -4000.0);
        let near = log_gaussian_mass(f64::NEG_INFINITY, -1.5, 400.0, 1e-3);
        assert!(near.is_finite());
    }

    #[test]
    fn projection_bounds_norm() {
        let mut v = vec![3.0, 4.0];
        project_ball(&mut v, 1.0);
        assert!((l2(&v) - 1.0).abs() < 1e-15);
        let mut w = vec![0.3, 0.4];
        project_ball(&mut w, 1.0);
        assert_eq!(w, vec![0.3, 0.4]);
    }

    fn two_by_two() -> (DesignMatrix, LatticeBasis) {
        let m = build_design_matrix(&ModelSpec::new(ModelFamily::Independence { rows: 2, cols: 2 })).unwrap();
        let b = compute_lattice_basis(&m).unwrap();
        (m, b)
    }

    #[test]
    fn zero_episodes_leave_parameters() {
        let (m, b) = two_by_two();
        let mut ac = zero_policy(4, 1, 4);
        let before = ac.clone();
        let cfg = TrainConfig { episodes: 0, ..TrainConfig::default() };
        let start = FiberPoint::new(vec![1, 0, 0, 1]).unwrap();
        let log = train(&m, &b, &start, &mut ac, &MdpConfig::default(), &cfg).unwrap();
        assert!(log.records.is_empty());
        assert_eq!(ac, before);
    }

    #[test]
    fn zero_advantage_leaves_theta() {
        let (m, b) = two_by_two();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ac = ActorCritic::new(4, 1, &Architecture::default(), &MdpConfig::default(), 1.0, &mut rng).unwrap();
        let start = FiberPoint::new(vec![1, 0, 0, 1]).unwrap();
        let mut env = FiberEnv::new(&m, &b, start, MdpConfig::default()).unwrap();
        let mut traj = rollout(&mut env, &ac, 3, &mut rng).unwrap();
        traj.rewards = vec![0.0; 3];
        traj.values = vec![0.0; 4];
        let before = ac.theta();
        actor_update(&mut ac, &traj, 0.1, 0.99, 0.95, 1e3).unwrap();
        assert_eq!(ac.theta(), before);
    }

    #[test]
    fn critic_fixed_point_when_values_match_targets() {
        let traj = Trajectory {
            states: vec![FiberPoint::zeros(1); 2],
            continuous_actions: vec![vec![0.0]],
            coeff_actions: vec![vec![0]],
            rewards: vec![-1.0],
            values: vec![-1.0 + 0.5 * 2.0, 2.0],
            features: vec![vec![1.0], vec![0.5]],
            log_prob_grads: vec![vec![0.0]],
            moves_taken: 0,
        };
        assert_eq!(critic_direction(&traj, 0.5).unwrap(), vec![0.0]);
    }

    #[test]
    fn one_step_critic_without_discount() {
        let traj = Trajectory {
            states: vec![FiberPoint::zeros(1); 2],
            continuous_actions: vec![vec![0.0]],
            coeff_actions: vec![vec![0]],
            rewards: vec![-2.0],
            values: vec![0.5, 7.0],
            features: vec![vec![1.0, -2.0], vec![3.0, 3.0]],
            log_prob_grads: vec![vec![0.0]],
            moves_taken: 0,
        };
        // (V - r) phi = 2.5 * (1, -2)
        assert_eq!(critic_direction(&traj, 0.0).unwrap(), vec![2.5, -5.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = Architecture { hidden: vec![2], activation: Activation::Tanh };
        let mut ac = ActorCritic::new(1, 1, &arch, &MdpConfig::default(), 1.0, &mut rng).unwrap();
        ac.critic_weights = vec![1.0, 1.0];
        critic_update(&mut ac, &traj, 0.1, 0.0, 1e3).unwrap();
        assert_eq!(ac.critic_weights, vec![0.75, 1.5]);
    }

    #[test]
    fn training_is_reproducible() {
        let (m, b) = two_by_two();
        let start = FiberPoint::new(vec![2, 1, 1, 2]).unwrap();
        let mdp = MdpConfig { steps_per_episode: 20, ..MdpConfig::default() };
        let cfg = TrainConfig { episodes: 3, seed: 11, ..TrainConfig::default() };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut ac = ActorCritic::new(4, 1, &Architecture::default(), &mdp, 2.0, &mut rng).unwrap();
            let log = train(&m, &b, &start, &mut ac, &mdp, &cfg).unwrap();
            (ac, log)
        };
        let (a1, l1) = run();
        let (a2, l2) = run();
        assert_eq!(l1, l2);
        assert_eq!(a1, a2);
        assert_eq!(l1.records.len(), 6);
    }
}
