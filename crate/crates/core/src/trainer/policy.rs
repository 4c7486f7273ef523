//! Gaussian policy and value networks plus their JSON file format.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{forward, Layer, Trace};
use super::TrainError;

pub const POLICY_VERSION: u32 = 1;
pub const ACT_DIM: usize = 2;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arch {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub act_dim: usize,
}

/// Separate policy and value MLPs sharing the hidden layout, and a
/// state-independent log standard deviation per action dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    pub version: u32,
    pub arch: Arch,
    pub log_std: Vec<f64>,
    pub layers: Vec<Layer>,
    pub value_layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    pub mean: [f64; ACT_DIM],
    pub value: f64,
}

fn sizes(arch: &Arch, out: usize) -> Vec<(usize, usize)> {
    let mut dims = vec![arch.obs_dim];
    dims.extend(&arch.hidden);
    dims.push(out);
    dims.windows(2).map(|w| (w[0], w[1])).collect()
}

impl PolicyParams {
    pub fn zeros(obs_dim: usize, hidden: &[usize]) -> Self {
        let arch = Arch {
            obs_dim,
            hidden: hidden.to_vec(),
            act_dim: ACT_DIM,
        };
        Self {
            version: POLICY_VERSION,
            log_std: vec![0.0; ACT_DIM],
            layers: sizes(&arch, ACT_DIM).into_iter().map(|(i, o)| Layer::zeros(i, o)).collect(),
            value_layers: sizes(&arch, 1).into_iter().map(|(i, o)| Layer::zeros(i, o)).collect(),
            arch,
        }
    }

    /// Hidden layers get unit gain; the policy head is scaled down so the
    /// initial mean action is near zero.
    pub fn init<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], log_std: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(obs_dim, hidden);
        let build = |shape: Vec<(usize, usize)>, head_gain: f64, rng: &mut R| {
            let n = shape.len();
            shape
                .into_iter()
                .enumerate()
                .map(|(k, (i, o))| Layer::random(i, o, if k + 1 == n { head_gain } else { 1.0 }, rng))
                .collect()
        };
        p.layers = build(sizes(&p.arch, ACT_DIM), 0.01, rng);
        p.value_layers = build(sizes(&p.arch, 1), 1.0, rng);
        p.log_std = vec![log_std; ACT_DIM];
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.arch.obs_dim, &self.arch.hidden)
    }

    pub fn obs_dim(&self) -> usize {
        self.arch.obs_dim
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Policy(m));
        if self.version != POLICY_VERSION {
            return bad(format!("unsupported policy version {}", self.version));
        }
        if self.arch.act_dim != ACT_DIM || self.log_std.len() != ACT_DIM {
            return bad(format!("act_dim must be {ACT_DIM}"));
        }
        if self.arch.obs_dim == 0 || self.arch.hidden.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        for (name, layers, out) in [("layers", &self.layers, ACT_DIM), ("value_layers", &self.value_layers, 1)] {
            let want = sizes(&self.arch, out);
            if layers.len() != want.len() {
                return bad(format!("{name}: expected {} layers, found {}", want.len(), layers.len()));
            }
            for (k, (layer, (i, o))) in layers.iter().zip(want).enumerate() {
                if layer.b.len() != o || layer.w.len() != o || layer.w.iter().any(|r| r.len() != i) {
                    return bad(format!("{name}[{k}]: expected {o}x{i} weights"));
                }
            }
        }
        if !self.to_flat().iter().all(|v| v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let p: PolicyParams = serde_json::from_str(text).map_err(|e| TrainError::Policy(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn num_params(&self) -> usize {
        let count = |ls: &[Layer]| ls.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum::<usize>();
        ACT_DIM + count(&self.layers) + count(&self.value_layers)
    }

    /// Length of the log_std + policy-layer prefix of [`Self::to_flat`].
    pub fn policy_len(&self) -> usize {
        ACT_DIM + self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum::<usize>()
    }

    /// All parameters in a fixed order: log_std, policy layers, value layers,
    /// each layer row-major weights then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.log_std);
        for l in self.layers.iter().chain(&self.value_layers) {
            for row in &l.w {
                v.extend_from_slice(row);
            }
            v.extend_from_slice(&l.b);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut it = flat.iter().copied();
        for x in &mut self.log_std {
            *x = it.next().unwrap();
        }
        for l in self.layers.iter_mut().chain(&mut self.value_layers) {
            for row in &mut l.w {
                row.iter_mut().for_each(|x| *x = it.next().unwrap());
            }
            l.b.iter_mut().for_each(|x| *x = it.next().unwrap());
        }
    }

    pub fn check_obs(&self, obs: &[f64]) -> Result<(), TrainError> {
        if obs.len() != self.arch.obs_dim {
            return Err(TrainError::Shape {
                expected: self.arch.obs_dim,
                found: obs.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput, TrainError> {
        self.check_obs(obs)?;
        let mut pi = Trace::default();
        let mut vf = Trace::default();
        Ok(self.forward_traced(obs, &mut pi, &mut vf))
    }

    pub(crate) fn forward_traced(&self, obs: &[f64], pi: &mut Trace, vf: &mut Trace) -> PolicyOutput {
        forward(&self.layers, obs, pi);
        forward(&self.value_layers, obs, vf);
        let m = pi.output();
        PolicyOutput {
            mean: [m[0], m[1]],
            value: vf.output()[0],
        }
    }

    pub fn log_prob(&self, mean: &[f64; ACT_DIM], action: &[f64; ACT_DIM]) -> f64 {
        let mut lp = 0.0;
        for j in 0..ACT_DIM {
            let z = (action[j] - mean[j]) / self.log_std[j].exp();
            lp += -0.5 * z * z - self.log_std[j] - HALF_LN_2PI;
        }
        lp
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|s| s + 0.5 + HALF_LN_2PI).sum()
    }

    /// Draws a raw (unclamped) action from the Gaussian head.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64; ACT_DIM], rng: &mut R) -> [f64; ACT_DIM] {
        let mut a = [0.0; ACT_DIM];
        for j in 0..ACT_DIM {
            let eps: f64 = rng.sample(StandardNormal);
            a[j] = mean[j] + self.log_std[j].exp() * eps;
        }
        a
    }

    /// Deterministic action: the Gaussian mean.
    pub fn greedy(&self, obs: &[f64]) -> Result<[f64; ACT_DIM], TrainError> {
        Ok(self.forward(obs)?.mean)
    }
}
