use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub params: AdamParams,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(params: AdamParams, len: usize) -> Self {
        Self { params, t: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        let AdamParams { learning_rate, beta1, beta2, eps } = self.params;
        self.t += 1;
        let c1 = 1.0 - beta1.powf(self.t as f64);
        let c2 = 1.0 - beta2.powf(self.t as f64);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            // Moments of dead units decay geometrically; subnormals are
            // flushed to zero to keep the arithmetic fast.
            if self.m[i].abs() < f64::MIN_POSITIVE {
                self.m[i] = 0.0;
            }
            if self.v[i] < f64::MIN_POSITIVE {
                self.v[i] = 0.0;
            }
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
