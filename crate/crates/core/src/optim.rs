//! ADADELTA.
//!
//! Per element, with decay `ρ` and conditioning constant `ε`:
//!
//! ```text
//! E[g²]  ← ρ·E[g²] + (1−ρ)·g²
//! Δx     = −(√(E[Δx²]+ε) / √(E[g²]+ε))·g
//! E[Δx²] ← ρ·E[Δx²] + (1−ρ)·Δx²
//! x      ← x + Δx
//! ```

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamStore};

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct AdadeltaState {
    pub rho: f64,
    pub epsilon: f64,
    /// Number of updates applied so far.
    pub steps: u64,
    /// Running `E[g²]`, one buffer per parameter block.
    pub mean_sq_grad: Vec<Vec<f64>>,
    /// Running `E[Δx²]`.
    pub mean_sq_delta: Vec<Vec<f64>>,
}

impl AdadeltaState {
    pub fn new(params: &ParamStore, rho: f64, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Config(format!("rho {rho} outside [0, 1)")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon {epsilon} must be positive")));
        }
        let zeros: Vec<Vec<f64>> = params.blocks().iter().map(|b| vec![0.0; b.values.len()]).collect();
        Ok(AdadeltaState {
            rho,
            epsilon,
            steps: 0,
            mean_sq_grad: zeros.clone(),
            mean_sq_delta: zeros,
        })
    }

    pub fn with_defaults(params: &ParamStore) -> Self {
        Self::new(params, DEFAULT_RHO, DEFAULT_EPSILON).expect("defaults are valid")
    }

    fn check_shapes(&self, params: &ParamStore, grads: &Gradients) -> Result<()> {
        let blocks = params.blocks();
        let ok = blocks.len() == grads.blocks().len()
            && blocks.len() == self.mean_sq_grad.len()
            && blocks.len() == self.mean_sq_delta.len()
            && blocks.iter().enumerate().all(|(i, b)| {
                let n = b.values.len();
                grads.blocks()[i].len() == n
                    && self.mean_sq_grad[i].len() == n
                    && self.mean_sq_delta[i].len() == n
            });
        if ok {
            Ok(())
        } else {
            Err(Error::shape("optimizer state, gradients and parameters disagree"))
        }
    }

    /// One update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) -> Result<()> {
        self.check_shapes(params, grads)?;
        if !grads.all_finite() {
            return Err(Error::Numeric("non-finite gradient; update skipped".into()));
        }
        let (rho, eps) = (self.rho, self.epsilon);
        for (i, block) in params.blocks_mut().iter_mut().enumerate() {
            let g = &grads.blocks()[i];
            let eg = &mut self.mean_sq_grad[i];
            let ed = &mut self.mean_sq_delta[i];
            for j in 0..g.len() {
                eg[j] = rho * eg[j] + (1.0 - rho) * g[j] * g[j];
                let dx = -((ed[j] + eps).sqrt() / (eg[j] + eps).sqrt()) * g[j];
                ed[j] = rho * ed[j] + (1.0 - rho) * dx * dx;
                block.values[j] += dx;
            }
        }
        self.steps += 1;
        Ok(())
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`.
pub fn clip_by_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}
