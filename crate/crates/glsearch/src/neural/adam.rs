//! Adam optimizer over the parameter blocks.

use super::params::{GradBuf, ParamSet};
use super::tensor::Mat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(lr: f64, params: &ParamSet) -> Adam {
        let zeros: Vec<Mat> = params.iter().map(|(d, _)| Mat::zeros(d.rows, d.cols)).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &GradBuf) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for block in 0..params.block_count() {
            let g = grads.value(block);
            let m = &mut self.m[block];
            let v = &mut self.v[block];
            for (idx, &gi) in g.data.iter().enumerate() {
                m.data[idx] = self.beta1 * m.data[idx] + (1.0 - self.beta1) * gi;
                v.data[idx] = self.beta2 * v.data[idx] + (1.0 - self.beta2) * gi * gi;
            }
            let (m, v, lr, eps) = (&self.m[block], &self.v[block], self.lr, self.eps);
            params.apply_update(block, |idx, x| {
                let m_hat = m.data[idx] / bc1;
                let v_hat = v.data[idx] / bc2;
                x - lr * m_hat / (v_hat.sqrt() + eps)
            });
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}
