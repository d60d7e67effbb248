//! Dueling Q-network: a ReLU trunk feeding an advantage stream and a value
//! stream, combined as `Q = V + A − mean(A)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cells::ACTION_COUNT;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub trunk: Vec<usize>,
    pub head_hidden: usize,
    pub actions: usize,
}

impl Architecture {
    pub const TRUNK: [usize; 5] = [128, 256, 512, 256, 128];
    pub const HEAD_HIDDEN: usize = 64;

    pub fn standard(input: usize) -> Self {
        Self { input, trunk: Self::TRUNK.to_vec(), head_hidden: Self::HEAD_HIDDEN, actions: ACTION_COUNT }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.input == 0 || self.trunk.is_empty() || self.trunk.contains(&0) || self.head_hidden == 0 || self.actions == 0 {
            return Err(Error::Config(format!("invalid network shape {self:?}")));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every dense layer: trunk, advantage hidden,
    /// advantage out, value hidden, value out.
    fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut prev = self.input;
        for &w in &self.trunk {
            out.push((prev, w));
            prev = w;
        }
        out.push((prev, self.head_hidden));
        out.push((self.head_hidden, self.actions));
        out.push((prev, self.head_hidden));
        out.push((self.head_hidden, 1));
        out
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Weights `fan_out × fan_in` row-major, then biases.
    offset: usize,
}

impl Layer {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let w = self.offset + self.fan_in * self.fan_out;
        w..w + self.fan_out
    }
}

/// Network parameters in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    layers: Vec<Layer>,
    pub params: Vec<f64>,
}

/// Intermediate outputs of a batched forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub batch: usize,
    /// Post-ReLU output of each trunk layer.
    trunk: Vec<Vec<f64>>,
    adv_hidden: Vec<f64>,
    pub advantage: Vec<f64>,
    val_hidden: Vec<f64>,
    pub value: Vec<f64>,
    pub q: Vec<f64>,
}

/// `c = a·b + beta·c` with arbitrary strides on `a` and `b`; `c` is
/// row-major `m × n`.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], rsa: usize, csa: usize, b: &[f64], rsb: usize, csb: usize, beta: f64, c: &mut [f64]) {
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Network {
    fn layout(arch: &Architecture) -> Vec<Layer> {
        let mut offset = 0;
        arch.shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let l = Layer { fan_in, fan_out, offset };
                offset += fan_in * fan_out + fan_out;
                l
            })
            .collect()
    }

    /// Weights and biases drawn from `U(−1/√fan_in, 1/√fan_in)`.
    pub fn new<R: Rng>(arch: Architecture, rng: &mut R) -> Result<Self, Error> {
        arch.validate()?;
        let layers = Self::layout(&arch);
        let mut params = vec![0.0; arch.param_count()];
        for l in &layers {
            let bound = 1.0 / (l.fan_in as f64).sqrt();
            for p in &mut params[l.offset..l.biases().end] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self { arch, layers, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self, Error> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::DimensionMismatch(format!("{} parameters for a network with {}", params.len(), arch.param_count())));
        }
        let layers = Self::layout(&arch);
        Ok(Self { arch, layers, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_len(&self) -> usize {
        self.arch.input
    }

    fn trunk_len(&self) -> usize {
        self.arch.trunk.len()
    }

    /// Output-layer biases of the advantage stream.
    pub fn advantage_bias_mut(&mut self) -> &mut [f64] {
        let r = self.layers[self.trunk_len() + 1].biases();
        &mut self.params[r]
    }

    /// Parameter range of the value stream (both layers).
    pub fn value_head_range(&self) -> std::ops::Range<usize> {
        let t = self.trunk_len();
        self.layers[t + 2].offset..self.layers[t + 3].biases().end
    }

    fn dense(&self, l: &Layer, x: &[f64], batch: usize, relu: bool) -> Vec<f64> {
        let mut y = Vec::with_capacity(batch * l.fan_out);
        let b = &self.params[l.biases()];
        for _ in 0..batch {
            y.extend_from_slice(b);
        }
        let w = &self.params[l.weights()];
        gemm(batch, l.fan_in, l.fan_out, x, l.fan_in, 1, w, 1, l.fan_in, 1.0, &mut y);
        if relu {
            for v in &mut y {
                *v = v.max(0.0);
            }
        }
        y
    }

    /// Batched forward pass; `x` is `batch × input` row-major.
    pub fn forward(&self, x: &[f64], batch: usize) -> Result<Activations, Error> {
        if x.len() != batch * self.arch.input {
            return Err(Error::DimensionMismatch(format!("input of length {} for batch {batch} × {}", x.len(), self.arch.input)));
        }
        let t = self.trunk_len();
        let mut trunk: Vec<Vec<f64>> = Vec::with_capacity(t);
        for i in 0..t {
            let input = if i == 0 { x } else { &trunk[i - 1] };
            let y = self.dense(&self.layers[i], input, batch, true);
            trunk.push(y);
        }
        let features = &trunk[t - 1];
        let adv_hidden = self.dense(&self.layers[t], features, batch, true);
        let advantage = self.dense(&self.layers[t + 1], &adv_hidden, batch, false);
        let val_hidden = self.dense(&self.layers[t + 2], features, batch, true);
        let value = self.dense(&self.layers[t + 3], &val_hidden, batch, false);
        let n = self.arch.actions;
        let mut q = vec![0.0; batch * n];
        for b in 0..batch {
            let adv = &advantage[b * n..(b + 1) * n];
            let mean = adv.iter().sum::<f64>() / n as f64;
            for j in 0..n {
                q[b * n + j] = value[b] + adv[j] - mean;
            }
        }
        Ok(Activations { batch, trunk, adv_hidden, advantage, val_hidden, value, q })
    }

    pub fn q_values(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        Ok(self.forward(x, 1)?.q)
    }

    /// Accumulates `∂L/∂θ` into `grad` given `dq = ∂L/∂Q` (`batch × actions`).
    pub fn backward(&self, x: &[f64], acts: &Activations, dq: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let batch = acts.batch;
        let n = self.arch.actions;
        let t = self.trunk_len();
        let mut d_adv = vec![0.0; batch * n];
        let mut d_val = vec![0.0; batch];
        for b in 0..batch {
            let row = &dq[b * n..(b + 1) * n];
            let total: f64 = row.iter().sum();
            d_val[b] = total;
            for j in 0..n {
                d_adv[b * n + j] = row[j] - total / n as f64;
            }
        }
        let features = &acts.trunk[t - 1];
        let mut d_features = vec![0.0; batch * self.layers[t].fan_in];

        let d_ah = self.dense_backward(&self.layers[t + 1], &acts.adv_hidden, &d_adv, batch, grad, Some(&acts.adv_hidden));
        let d_f = self.dense_backward(&self.layers[t], features, &d_ah, batch, grad, Some(features));
        add(&mut d_features, &d_f);
        let d_vh = self.dense_backward(&self.layers[t + 3], &acts.val_hidden, &d_val, batch, grad, Some(&acts.val_hidden));
        let d_f = self.dense_backward(&self.layers[t + 2], features, &d_vh, batch, grad, Some(features));
        add(&mut d_features, &d_f);

        let mut d = d_features;
        for i in (0..t).rev() {
            let input: &[f64] = if i == 0 { x } else { &acts.trunk[i - 1] };
            let mask = if i == 0 { None } else { Some(&acts.trunk[i - 1][..]) };
            d = self.dense_backward(&self.layers[i], input, &d, batch, grad, mask);
        }
    }

    /// Gradient of one dense layer given `dy` at its output (already
    /// through its activation). Returns `dx`, masked by the ReLU of the
    /// producing layer when `mask` holds that layer's output.
    fn dense_backward(&self, l: &Layer, x: &[f64], dy: &[f64], batch: usize, grad: &mut [f64], mask: Option<&[f64]>) -> Vec<f64> {
        let (fi, fo) = (l.fan_in, l.fan_out);
        // dW += dyᵀ · x
        let mut dw = vec![0.0; fo * fi];
        gemm(fo, batch, fi, dy, 1, fo, x, fi, 1, 0.0, &mut dw);
        add(&mut grad[l.weights()], &dw);
        let db = &mut grad[l.biases()];
        for b in 0..batch {
            for o in 0..fo {
                db[o] += dy[b * fo + o];
            }
        }
        // dx = dy · W
        let mut dx = vec![0.0; batch * fi];
        let w = &self.params[l.weights()];
        gemm(batch, fo, fi, dy, fo, 1, w, fi, 1, 0.0, &mut dx);
        if let Some(m) = mask {
            for (d, y) in dx.iter_mut().zip(m) {
                if *y <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        dx
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
