//! Adam optimizer over a [`ParamStore`].

use crate::tensor::ParamStore;

/// Standard Adam with bias correction. One instance owns the moment state
/// for a fixed store layout; `step` applies the accumulated gradients of a
/// chosen subset of parameters and leaves the rest untouched.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: store.iter().map(|(_, t)| vec![0.0; t.len()]).collect(),
            v: store.iter().map(|(_, t)| vec![0.0; t.len()]).collect(),
        }
    }

    /// Applies one update to the parameters listed in `ids` using the
    /// gradients currently held in the store.
    pub fn step(&mut self, store: &mut ParamStore, ids: &[usize]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for &pid in ids {
            let tensor = store.get_mut(pid);
            let m = &mut self.m[pid];
            let v = &mut self.v[pid];
            for i in 0..tensor.values.len() {
                let g = tensor.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                tensor.values[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
