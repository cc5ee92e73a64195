use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    /// β₁ = 0.9, β₂ = 0.999, ε = 1e-8
    Adam,
}

/// Optimizer moments for a fixed, ordered list of parameter tensors.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    lens: Vec<usize>,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lens: &[usize]) -> Self {
        let moments = || match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::Adam => lens.iter().map(|&n| vec![0.0; n]).collect(),
        };
        Self { kind, lens: lens.to_vec(), step: 0, first: moments(), second: moments() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update in place. `params` and `grads` must follow the order
    /// the state was created with.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.lens.len() || grads.len() != self.lens.len() {
            return Err(Error::InvalidState(format!(
                "state tracks {} tensors, got {} params and {} grads",
                self.lens.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (&n, (p, g))) in self.lens.iter().zip(params.iter().zip(grads)).enumerate() {
            if p.len() != n || g.len() != n {
                return Err(Error::InvalidState(format!(
                    "tensor {i}: state length {n}, param {}, grad {}",
                    p.len(),
                    g.len()
                )));
            }
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (w, d) in p.iter_mut().zip(g.iter()) {
                        *w -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (beta1, beta2) = (ADAM_BETA1, ADAM_BETA2);
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (m, v) = (&mut self.first[i], &mut self.second[i]);
                    for j in 0..g.len() {
                        m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                        v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                        let m_hat = m[j] / c1;
                        let v_hat = v[j] / c2;
                        p[j] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}
