//! Spectral normalization by power iteration.
//!
//! A masked layer's weight `W` is replaced in the forward pass by `W / sigma`
//! where `sigma = u^T W v` is the power-iteration estimate of the top singular
//! value. The vectors `u`, `v` persist between calls so one iteration per
//! training step is enough to track a slowly moving `W`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::matrix::{norm, Matrix};
use crate::error::{Error, Result};

/// Singular values at or below this are treated as zero and the layer is
/// left unnormalized.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Left/right singular vector estimates for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerVectors {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl PowerVectors {
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self {
            left: random_unit(rows, rng),
            right: random_unit(cols, rng),
        }
    }
}

fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-12 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Per-layer power-iteration state for an MLP. `layers[i]` is `Some` exactly
/// for the masked layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralNormState {
    pub layers: Vec<Option<PowerVectors>>,
    pub power_iterations: usize,
}

impl SpectralNormState {
    pub fn is_active(&self, layer: usize) -> bool {
        matches!(self.layers.get(layer), Some(Some(_)))
    }
}

/// Runs `iterations` rounds of `v <- W^T u / |W^T u|`, `u <- W v / |W v|`.
/// Leaves the vectors untouched if `W` annihilates them.
pub fn power_iterate(w: &Matrix, vectors: &mut PowerVectors, iterations: usize) {
    for _ in 0..iterations {
        let v = w.matvec_transposed(&vectors.left);
        let vn = norm(&v);
        if vn <= SIGMA_FLOOR {
            return;
        }
        vectors.right = v.into_iter().map(|x| x / vn).collect();
        let u = w.matvec(&vectors.right);
        let un = norm(&u);
        if un <= SIGMA_FLOOR {
            return;
        }
        vectors.left = u.into_iter().map(|x| x / un).collect();
    }
}

/// `u^T W v` for the stored vectors.
pub fn sigma_estimate(w: &Matrix, vectors: &PowerVectors) -> f64 {
    super::matrix::dot(&vectors.left, &w.matvec(&vectors.right))
}

/// Advances the power iteration and returns `(W / sigma, sigma)`. A zero
/// matrix comes back unchanged with `sigma = 0`.
pub fn spectral_normalize(
    w: &Matrix,
    vectors: &mut PowerVectors,
    iterations: usize,
) -> Result<(Matrix, f64)> {
    if iterations == 0 {
        return Err(Error::argument("spectral normalization needs at least one power iteration"));
    }
    if vectors.left.len() != w.rows() || vectors.right.len() != w.cols() {
        return Err(Error::shape(format!(
            "power vectors ({}, {}) do not fit a {}x{} weight",
            vectors.left.len(),
            vectors.right.len(),
            w.rows(),
            w.cols()
        )));
    }
    power_iterate(w, vectors, iterations);
    Ok(normalized(w, vectors))
}

/// `W / sigma` using the current vectors, without iterating.
pub fn normalized(w: &Matrix, vectors: &PowerVectors) -> (Matrix, f64) {
    let sigma = sigma_estimate(w, vectors);
    if sigma.abs() <= SIGMA_FLOOR {
        return (w.clone(), 0.0);
    }
    let mut out = w.clone();
    out.scale(1.0 / sigma);
    (out, sigma)
}
