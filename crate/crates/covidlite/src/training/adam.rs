//! Adam with bias correction and time-based learning-rate decay.

use super::TrainError;
use crate::nncore::{Gradients, Network, Tensor};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-7;

/// Optimizer state: first/second-moment accumulators per trainable tensor
/// and the global step count. The effective rate for step t (0-based) is
/// `initial_lr / (1 + decay * t)`, decayed per iteration.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    names: Vec<String>,
    step: u64,
    initial_lr: f64,
    decay: f64,
}

impl AdamState {
    pub fn new(net: &Network<f32>, initial_lr: f64, decay: f64) -> Self {
        let mut m = Vec::new();
        let mut names = Vec::new();
        for (info, tensor) in net.params() {
            if info.trainable {
                m.push(Tensor::zeros(tensor.shape()));
                names.push(info.name);
            }
        }
        Self {
            v: m.clone(),
            m,
            names,
            step: 0,
            initial_lr,
            decay,
        }
    }

    /// Completed update steps.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Learning rate the *next* step will use; equals `initial_lr` before
    /// the first step and decreases strictly in t.
    pub fn next_lr(&self) -> f64 {
        self.initial_lr / (1.0 + self.decay * self.step as f64)
    }

    /// Applies one update from the accumulated batch gradients. Errors on a
    /// non-finite gradient, naming the offending parameter tensor.
    pub fn step(&mut self, net: &mut Network<f32>, grads: &Gradients<f32>) -> Result<(), TrainError> {
        let lr = self.next_lr();
        let t = self.step + 1; // bias-correction timestep
        let correction1 = 1.0 - BETA1.powi(t as i32);
        let correction2 = 1.0 - BETA2.powi(t as i32);

        let mut slot = 0;
        for (info, tensor) in net.params_mut() {
            if !info.trainable {
                continue;
            }
            let g = grads.slots()[slot].data();
            if g.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::NonFiniteGradient {
                    name: info.name.clone(),
                });
            }
            adam_apply(
                tensor.data_mut(),
                g,
                self.m[slot].data_mut(),
                self.v[slot].data_mut(),
                lr,
                correction1,
                correction2,
            );
            slot += 1;
        }
        self.step += 1;
        Ok(())
    }
}

/// The elementwise update rule, shared with the scalar reference tests:
/// `m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;`
/// `w -= lr * (m / c1) / (sqrt(v / c2) + eps)`.
fn adam_apply(
    w: &mut [f32],
    g: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    lr: f64,
    correction1: f64,
    correction2: f64,
) {
    let b1 = BETA1 as f32;
    let b2 = BETA2 as f32;
    let eps = EPSILON as f32;
    let lr = lr as f32;
    let c1 = correction1 as f32;
    let c2 = correction2 as f32;
    for i in 0..w.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
