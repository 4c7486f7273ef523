//! Dense tanh networks with a linear output layer and explicit backprop.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `w[o][i]`: weight from input `i` to output `o`.
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: vec![vec![0.0; inputs]; outputs],
            b: vec![0.0; outputs],
        }
    }

    /// Gaussian weights with variance `gain² / inputs`, zero biases.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let scale = gain / (inputs as f64).sqrt();
        let w = (0..outputs)
            .map(|_| {
                (0..inputs)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Self {
            w,
            b: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.w.iter().zip(&self.b).map(|(row, b)| b + dot(row, x)));
    }
}

/// Four independent partial sums so the loop vectorizes; the summation order
/// is fixed, so results are still deterministic.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Layer activations from one forward pass: `acts[0]` is the input and
/// `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], Vec::as_slice)
    }
}

pub fn forward(layers: &[Layer], x: &[f64], trace: &mut Trace) {
    trace.acts.resize_with(layers.len() + 1, Vec::new);
    trace.acts[0].clear();
    trace.acts[0].extend_from_slice(x);
    let last = layers.len().saturating_sub(1);
    for (l, layer) in layers.iter().enumerate() {
        let (done, rest) = trace.acts.split_at_mut(l + 1);
        let out = &mut rest[0];
        layer.apply(&done[l], out);
        if l < last {
            out.iter_mut().for_each(|v| *v = v.tanh());
        }
    }
}

/// Accumulates `dL/dθ` into `grads` given `dL/d(output)` for the pass in
/// `trace`.
pub fn backward(layers: &[Layer], trace: &Trace, d_out: &[f64], grads: &mut [Layer], scratch: &mut Vec<f64>) {
    let mut delta = d_out.to_vec();
    for l in (0..layers.len()).rev() {
        let input = &trace.acts[l];
        let g = &mut grads[l];
        for (o, d) in delta.iter().enumerate() {
            if *d != 0.0 {
                axpy(*d, input, &mut g.w[o]);
            }
            g.b[o] += d;
        }
        if l == 0 {
            break;
        }
        scratch.clear();
        scratch.resize(input.len(), 0.0);
        for (row, d) in layers[l].w.iter().zip(&delta) {
            if *d != 0.0 {
                axpy(*d, row, scratch);
            }
        }
        // `input` is the tanh output of the previous layer.
        delta.clear();
        delta.extend(scratch.iter().zip(input).map(|(s, h)| s * (1.0 - h * h)));
    }
}
