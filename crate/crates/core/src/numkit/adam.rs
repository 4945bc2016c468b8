use serde::{Deserialize, Serialize};

use super::mlp::{MlpGrads, MlpParams};
use crate::error::{Error, Result};

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self::with_betas(n_params, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(n_params: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        assert!(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0, "Adam betas must lie in (0, 1)");
        Self {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn for_mlp(params: &MlpParams, learning_rate: f64) -> Self {
        Self::new(params.num_params(), learning_rate)
    }

    /// Applies one bias-corrected Adam update across parameter slices laid out
    /// in the same order as the moment vectors.
    pub fn step_slices(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) -> Result<()> {
        let total: usize = params.iter().map(|p| p.len()).sum();
        let total_g: usize = grads.iter().map(|g| g.len()).sum();
        if total != self.first_moment.len() || total_g != total || params.len() != grads.len() {
            return Err(Error::shape(format!(
                "Adam state holds {} moments, got {total} parameters and {total_g} gradients",
                self.first_moment.len()
            )));
        }
        if let Some(i) = grads.iter().flat_map(|g| g.iter()).position(|g| !g.is_finite()) {
            return Err(Error::numeric(format!("non-finite gradient at flat index {i}")));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut k = 0;
        for (p, g) in params.into_iter().zip(grads) {
            for (pi, &gi) in p.iter_mut().zip(g) {
                let m = &mut self.first_moment[k];
                let v = &mut self.second_moment[k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *pi -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                k += 1;
            }
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        self.step_slices(vec![params], vec![grads])
    }

    pub fn step_mlp(&mut self, params: &mut MlpParams, grads: &MlpGrads) -> Result<()> {
        self.step_slices(params.slices_mut(), grads.slices())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}
