//! Rollout storage, advantage estimation and the clipped-surrogate update.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::mlp::{backward, Trace};
use super::policy::{PolicyParams, ACT_DIM};
use super::{PpoConfig, TrainError};

/// Fixed-capacity on-policy storage.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    capacity: usize,
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<[f64; ACT_DIM]>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [f64; ACT_DIM],
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn push(&mut self, t: Transition) -> Result<(), TrainError> {
        if self.is_full() {
            return Err(TrainError::BufferFull(self.capacity));
        }
        self.obs.push(t.obs);
        self.actions.push(t.action);
        self.log_probs.push(t.log_prob);
        self.rewards.push(t.reward);
        self.values.push(t.value);
        self.terminated.push(t.terminated);
        self.truncated.push(t.truncated);
        Ok(())
    }

    /// Fills `advantages` and `returns`. `bootstrap` is the value of the
    /// observation following the last stored step (ignored if that step ended
    /// its episode). Truncated steps are expected to already carry their
    /// bootstrap in the reward.
    pub fn compute_advantages(&mut self, bootstrap: f64, gamma: f64, lambda: f64) -> Result<(), TrainError> {
        if !self.is_full() {
            return Err(TrainError::BufferNotFull {
                len: self.len(),
                capacity: self.capacity,
            });
        }
        let ends: Vec<bool> = self.terminated.iter().zip(&self.truncated).map(|(a, b)| *a || *b).collect();
        let (adv, ret) = gae(&self.rewards, &self.values, bootstrap, gamma, lambda, &ends);
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    /// Appends another full buffer, keeping both segments' advantages.
    pub fn extend(&mut self, other: RolloutBuffer) {
        self.capacity += other.capacity;
        self.obs.extend(other.obs);
        self.actions.extend(other.actions);
        self.log_probs.extend(other.log_probs);
        self.rewards.extend(other.rewards);
        self.values.extend(other.values);
        self.terminated.extend(other.terminated);
        self.truncated.extend(other.truncated);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
    }
}

/// Generalized advantage estimation. `ends[t]` marks the last step of an
/// episode, which cuts both the value bootstrap and the advantage recursion.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
    ends: &[bool],
) -> (Vec<f64>, Vec<f64>) {
    assert!(rewards.len() == values.len() && rewards.len() == ends.len());
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if ends[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        adv[t] = delta + gamma * lambda * live * next_adv;
        next_value = values[t];
        next_adv = adv[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Zero mean, unit population standard deviation. Constant input maps to
/// all zeros.
pub fn normalize(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let centred: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let var = centred.iter().map(|c| c * c).sum::<f64>() / n;
    if var > 0.0 {
        let sd = var.sqrt();
        centred.iter().map(|c| c / sd).collect()
    } else {
        vec![0.0; xs.len()]
    }
}

/// Inputs to one loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Minibatch<'a> {
    pub obs: &'a [&'a [f64]],
    pub actions: &'a [[f64; ACT_DIM]],
    pub old_log_probs: &'a [f64],
    /// Already normalized.
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    #[serde(skip)]
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoeffs {
    pub clip: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

impl From<&PpoConfig> for LossCoeffs {
    fn from(c: &PpoConfig) -> Self {
        Self {
            clip: c.clip,
            vf_coef: c.vf_coef,
            ent_coef: c.ent_coef,
        }
    }
}

/// Mean-over-batch loss
/// `-min(ρA, clip(ρ)A) + vf_coef·(V - R)² - ent_coef·H`
/// and its exact gradient.
pub fn loss_and_grad(p: &PolicyParams, mb: &Minibatch<'_>, k: LossCoeffs) -> (LossStats, PolicyParams) {
    let n = mb.obs.len();
    let inv_n = 1.0 / n as f64;
    let mut grad = p.zeros_like();
    let mut stats = LossStats {
        ratios: Vec::with_capacity(n),
        ..LossStats::default()
    };
    let mut pi = Trace::default();
    let mut vf = Trace::default();
    let mut scratch = Vec::new();
    let stds: Vec<f64> = p.log_std.iter().map(|s| s.exp()).collect();
    let mut clipped = 0usize;
    for i in 0..n {
        let out = p.forward_traced(mb.obs[i], &mut pi, &mut vf);
        let a = &mb.actions[i];
        let logp = p.log_prob(&out.mean, a);
        let log_ratio = logp - mb.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = mb.advantages[i];
        let unclipped = ratio * adv;
        let clipped_ratio = ratio.clamp(1.0 - k.clip, 1.0 + k.clip);
        let surrogate = unclipped.min(clipped_ratio * adv);
        stats.policy -= surrogate * inv_n;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
        if clipped_ratio != ratio {
            clipped += 1;
        }
        stats.ratios.push(ratio);

        // The clipped branch is constant in θ; only the unclipped one carries
        // gradient.
        let d_logp = if unclipped <= clipped_ratio * adv { -adv * ratio * inv_n } else { 0.0 };
        if d_logp != 0.0 {
            let mut d_mean = [0.0; ACT_DIM];
            for j in 0..ACT_DIM {
                let z = (a[j] - out.mean[j]) / stds[j];
                d_mean[j] = d_logp * z / stds[j];
                grad.log_std[j] += d_logp * (z * z - 1.0);
            }
            backward(&p.layers, &pi, &d_mean, &mut grad.layers, &mut scratch);
        }

        let err = out.value - mb.returns[i];
        stats.value += err * err * inv_n;
        let d_v = k.vf_coef * 2.0 * err * inv_n;
        backward(&p.value_layers, &vf, &[d_v], &mut grad.value_layers, &mut scratch);
    }
    stats.entropy = p.entropy();
    for g in &mut grad.log_std {
        *g -= k.ent_coef;
    }
    stats.clip_fraction = clipped as f64 * inv_n;
    stats.total = stats.policy + k.vf_coef * stats.value - k.ent_coef * stats.entropy;
    (stats, grad)
}

/// Adam over the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scales `g` in place so its Euclidean norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Runs `epochs` passes of shuffled minibatch updates over a full buffer.
pub fn ppo_update<R: Rng + ?Sized>(
    buf: &RolloutBuffer,
    p: &mut PolicyParams,
    opt: &mut Adam,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, TrainError> {
    if !buf.is_full() || buf.advantages.len() != buf.len() {
        return Err(TrainError::BufferNotFull {
            len: buf.advantages.len(),
            capacity: buf.capacity(),
        });
    }
    let coeffs = LossCoeffs::from(cfg);
    let mut idx: Vec<usize> = (0..buf.len()).collect();
    let mut out = UpdateStats::default();
    let mut flat = p.to_flat();
    for epoch in 0..cfg.epochs {
        let mut epoch_kl = 0.0;
        let mut epoch_batches = 0usize;
        idx.shuffle(rng);
        for (k, chunk) in idx.chunks(cfg.minibatch).enumerate() {
            let obs: Vec<&[f64]> = chunk.iter().map(|&i| buf.obs[i].as_slice()).collect();
            let actions: Vec<[f64; ACT_DIM]> = chunk.iter().map(|&i| buf.actions[i]).collect();
            let old: Vec<f64> = chunk.iter().map(|&i| buf.log_probs[i]).collect();
            let raw: Vec<f64> = chunk.iter().map(|&i| buf.advantages[i]).collect();
            let returns: Vec<f64> = chunk.iter().map(|&i| buf.returns[i]).collect();
            let adv = normalize(&raw);
            let mb = Minibatch {
                obs: &obs,
                actions: &actions,
                old_log_probs: &old,
                advantages: &adv,
                returns: &returns,
            };
            let (stats, grad) = loss_and_grad(p, &mb, coeffs);
            if !stats.total.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    minibatch: k,
                    policy: stats.policy,
                    value: stats.value,
                    entropy: stats.entropy,
                });
            }
            let mut g = grad.to_flat();
            // The value loss is on the return scale and would otherwise
            // dominate a shared norm, shrinking policy steps below Adam's eps.
            let (pi_g, vf_g) = g.split_at_mut(p.policy_len());
            let norm = clip_grad_norm(pi_g, cfg.max_grad_norm).hypot(clip_grad_norm(vf_g, cfg.max_grad_norm));
            opt.step(&mut flat, &g);
            p.set_flat(&flat);

            out.policy_loss += stats.policy;
            out.value_loss += stats.value;
            out.entropy += stats.entropy;
            out.approx_kl += stats.approx_kl;
            epoch_kl += stats.approx_kl;
            epoch_batches += 1;
            out.clip_fraction += stats.clip_fraction;
            out.grad_norm += norm;
            out.minibatches += 1;
        }
        if cfg.target_kl.is_some_and(|k| epoch_kl / epoch_batches as f64 > k) {
            break;
        }
    }
    if out.minibatches > 0 {
        let n = out.minibatches as f64;
        out.policy_loss /= n;
        out.value_loss /= n;
        out.entropy /= n;
        out.approx_kl /= n;
        out.clip_fraction /= n;
        out.grad_norm /= n;
    }
    Ok(out)
}

/// Per-component comparison of the analytic loss gradient against central
/// differences with step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradCheck {
    /// Largest `|a - n| / max(|a|, |n|, floor)` over all parameters.
    pub fn max_rel_error(&self, floor: f64) -> f64 {
        self.analytic
            .iter()
            .zip(&self.numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

pub fn check_gradients(p: &PolicyParams, mb: &Minibatch<'_>, k: LossCoeffs, h: f64) -> GradCheck {
    let analytic = loss_and_grad(p, mb, k).1.to_flat();
    let base = p.to_flat();
    let mut probe = p.clone();
    let mut numeric = Vec::with_capacity(base.len());
    let mut x = base.clone();
    for i in 0..base.len() {
        x[i] = base[i] + h;
        probe.set_flat(&x);
        let up = loss_and_grad(&probe, mb, k).0.total;
        x[i] = base[i] - h;
        probe.set_flat(&x);
        let down = loss_and_grad(&probe, mb, k).0.total;
        x[i] = base[i];
        numeric.push((up - down) / (2.0 * h));
    }
    GradCheck { analytic, numeric }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_single_terminal_step() {
        let (a, r) = gae(&[1.0], &[0.0], 123.0, 0.99, 0.95, &[true]);
        assert_eq!(a, vec![1.0]);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn gae_two_step_hand_values() {
        let (a, r) = gae(&[1.0, 1.0], &[0.5, 0.5], 0.0, 0.99, 0.95, &[false, false]);
        assert!((a[1] - 0.5).abs() < 1e-15);
        assert!((a[0] - 1.46525).abs() < 1e-12);
        assert!((r[0] - 1.96525).abs() < 1e-12);
    }

    #[test]
    fn gae_lambda_zero_is_td_error() {
        let rw = [1.0, -2.0, 0.5, 3.0];
        let v = [0.1, 0.4, -0.3, 0.2];
        let ends = [false, true, false, false];
        let (a, _) = gae(&rw, &v, 0.7, 0.9, 0.0, &ends);
        let next = [0.4, 0.0, 0.2, 0.7];
        for t in 0..4 {
            let live = if ends[t] { 0.0 } else { 1.0 };
            assert_eq!(a[t], rw[t] + 0.9 * next[t] * live - v[t]);
        }
    }

    #[test]
    fn gae_gamma_zero_is_reward_minus_value() {
        let (a, _) = gae(&[1.0, 2.0, 3.0], &[0.5, 0.25, 4.0], 9.0, 0.0, 0.95, &[false; 3]);
        assert_eq!(a, vec![0.5, 1.75, -1.0]);
    }

    #[test]
    fn normalize_moments() {
        let xs: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 * 1.7 - 3.0).collect();
        let z = normalize(&xs);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let sd = (z.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-10);
        assert!((sd - 1.0).abs() < 1e-6);
        assert_eq!(normalize(&[2.0, 2.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn buffer_rejects_overflow_and_early_advantages() {
        let mut b = RolloutBuffer::new(1);
        assert!(b.compute_advantages(0.0, 0.99, 0.95).is_err());
        let t = Transition {
            obs: vec![0.0],
            action: [0.0; 2],
            log_prob: 0.0,
            reward: 1.0,
            value: 0.0,
            terminated: true,
            truncated: false,
        };
        b.push(t.clone()).unwrap();
        assert!(b.push(t).is_err());
        b.compute_advantages(0.0, 0.99, 0.95).unwrap();
        assert_eq!(b.advantages, vec![1.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut opt = Adam::new(2, 0.1);
        let mut p = vec![1.0, 1.0];
        opt.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-5);
        assert!((p[1] - 1.1).abs() < 1e-4);
    }

    #[test]
    fn grad_norm_clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.4).abs() < 1e-15);
    }
}
