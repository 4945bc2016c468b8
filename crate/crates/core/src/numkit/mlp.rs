//! Multilayer perceptron with hand-written reverse-mode gradients.
//!
//! Hidden layers use ReLU, the output layer is linear. Layers flagged in the
//! spectral-norm mask run with `W / sigma` in the forward pass; their raw
//! weight gradient accounts for the dependence of `sigma` on `W` while the
//! power-iteration vectors are treated as constants.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, Matrix};
use super::spectral::{self, PowerVectors, SpectralNormState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    /// `weights[i]` has shape `(layer_sizes[i + 1], layer_sizes[i])`.
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
    pub spectral_norm_mask: Vec<bool>,
}

impl MlpParams {
    /// All-zero parameters.
    pub fn zeros(layer_sizes: &[usize], spectral_norm_mask: Vec<bool>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::shape("an MLP needs at least an input and an output size"));
        }
        let n_layers = layer_sizes.len() - 1;
        if spectral_norm_mask.len() != n_layers {
            return Err(Error::shape(format!(
                "spectral mask has {} entries for {n_layers} layers",
                spectral_norm_mask.len()
            )));
        }
        let weights = layer_sizes
            .windows(2)
            .map(|w| Matrix::zeros(w[1], w[0]))
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation: Activation::Relu,
            spectral_norm_mask,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("layer_sizes is non-empty")
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.data().len()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Checks the shape invariants, used after deserializing.
    pub fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::shape("layer count does not match layer_sizes"));
        }
        if self.spectral_norm_mask.len() != n - 1 {
            return Err(Error::shape("spectral mask length does not match layer count"));
        }
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if w.shape() != (self.layer_sizes[i + 1], self.layer_sizes[i]) {
                return Err(Error::shape(format!("weight {i} has shape {:?}", w.shape())));
            }
            if b.len() != self.layer_sizes[i + 1] {
                return Err(Error::shape(format!("bias {i} has length {}", b.len())));
            }
            if !w.all_finite() || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("layer {i} holds non-finite values")));
            }
        }
        Ok(())
    }

    /// Parameters in canonical order: for each layer, weights row-major then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape(format!(
                "flat vector has {} values, network has {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.data().len();
            w.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            let m = b.len();
            b.copy_from_slice(&flat[offset..offset + m]);
            offset += m;
        }
        Ok(())
    }

    /// Mutable views in canonical order.
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.data_mut());
            out.push(b.as_mut_slice());
        }
        out
    }

    /// `self <- (1 - tau) * self + tau * source`
    pub fn polyak_update(&mut self, source: &MlpParams, tau: f64) {
        for (dst, src) in self.slices_mut().into_iter().zip(source.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = (1.0 - tau) * *d + tau * s;
            }
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.data());
            out.push(b.as_slice());
        }
        out
    }
}

/// Gradients shaped like [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.data());
            out.push(b.as_slice());
        }
        out
    }

    /// `self += other`
    pub fn accumulate(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            axpy(1.0, b.data(), a.data_mut());
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            axpy(1.0, b, a);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(Matrix::all_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }
}

/// Activations recorded by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activations of every layer (the last one is the output).
    pre_activations: Vec<Matrix>,
    /// Normalized weight and sigma for spectrally normalized layers.
    effective: Vec<Option<(Matrix, f64)>>,
    layer_sizes: Vec<usize>,
}

impl ForwardCache {
    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre_activations
    }

    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }
}

/// An MLP together with its spectral-norm power-iteration state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub params: MlpParams,
    pub spectral: SpectralNormState,
}

/// Mask that spectrally normalizes only the layer feeding the last hidden
/// activation; earlier layers stay unconstrained.
pub fn last_hidden_mask(n_layers: usize, enabled: bool) -> Vec<bool> {
    let mut mask = vec![false; n_layers];
    if enabled && n_layers >= 2 {
        mask[n_layers - 2] = true;
    }
    mask
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        spectral_norm_mask: Vec<bool>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = MlpParams::zeros(layer_sizes, spectral_norm_mask)?;
        for (w, b) in params.weights.iter_mut().zip(params.biases.iter_mut()) {
            let bound = 1.0 / (w.cols() as f64).sqrt();
            for v in w.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
            for v in b.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        let spectral = Self::fresh_spectral_state(&params, rng);
        Ok(Self { params, spectral })
    }

    /// Wraps parameters with freshly drawn power vectors for masked layers.
    pub fn from_params<R: Rng + ?Sized>(params: MlpParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let spectral = Self::fresh_spectral_state(&params, rng);
        Ok(Self { params, spectral })
    }

    fn fresh_spectral_state<R: Rng + ?Sized>(params: &MlpParams, rng: &mut R) -> SpectralNormState {
        let layers = params
            .weights
            .iter()
            .zip(&params.spectral_norm_mask)
            .map(|(w, &on)| on.then(|| PowerVectors::random(w.rows(), w.cols(), rng)))
            .collect();
        SpectralNormState {
            layers,
            power_iterations: 1,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.params.output_dim()
    }

    /// One training-time refresh of the power-iteration vectors.
    pub fn refresh_spectral(&mut self) {
        let iters = self.spectral.power_iterations.max(1);
        for (w, pv) in self.params.weights.iter().zip(self.spectral.layers.iter_mut()) {
            if let Some(pv) = pv {
                spectral::power_iterate(w, pv, iters);
            }
        }
    }

    fn effective_weight(&self, layer: usize) -> Option<(Matrix, f64)> {
        let pv = self.spectral.layers.get(layer)?.as_ref()?;
        let (w, sigma) = spectral::normalized(&self.params.weights[layer], pv);
        (sigma != 0.0).then_some((w, sigma))
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let n_layers = self.params.n_layers();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut effective = Vec::with_capacity(n_layers);
        let mut x = batch.clone();
        for layer in 0..n_layers {
            let eff = self.effective_weight(layer);
            let w = eff.as_ref().map_or(&self.params.weights[layer], |(w, _)| w);
            let mut z = x.matmul_transposed(w)?;
            let bias = &self.params.biases[layer];
            for r in 0..z.rows() {
                axpy(1.0, bias, z.row_mut(r));
            }
            let next = if layer + 1 < n_layers {
                let mut a = z.clone();
                a.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                a
            } else {
                z.clone()
            };
            inputs.push(x);
            pre_activations.push(z);
            effective.push(eff);
            x = next;
        }
        Ok((
            x,
            ForwardCache {
                inputs,
                pre_activations,
                effective,
                layer_sizes: self.params.layer_sizes.clone(),
            },
        ))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch)?.0)
    }

    /// Backpropagates `output_gradient` (dLoss/dOutput) and returns parameter
    /// gradients plus the gradient with respect to the input batch.
    pub fn backward(&self, cache: &ForwardCache, output_gradient: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let n_layers = self.params.n_layers();
        if cache.layer_sizes != self.params.layer_sizes || cache.inputs.len() != n_layers {
            return Err(Error::shape("forward cache was produced by a different network"));
        }
        let batch = cache.batch_size();
        if output_gradient.shape() != (batch, self.output_dim()) {
            return Err(Error::shape(format!(
                "output gradient {:?} does not match output ({batch}, {})",
                output_gradient.shape(),
                self.output_dim()
            )));
        }
        let mut grads = MlpGrads::zeros_like(&self.params);
        let mut g = output_gradient.clone();
        for layer in (0..n_layers).rev() {
            let x = &cache.inputs[layer];
            let eff = &cache.effective[layer];
            let w = eff.as_ref().map_or(&self.params.weights[layer], |(w, _)| w);

            grads.weights[layer] = g.transposed_matmul(x)?;
            let db = &mut grads.biases[layer];
            for b in 0..batch {
                axpy(1.0, g.row(b), db);
            }
            let dw = &mut grads.weights[layer];
            if let (Some((w_hat, sigma)), Some(Some(pv))) = (eff, self.spectral.layers.get(layer)) {
                // d/dW of f(W / (u^T W v)) = (G - <G, W_hat> u v^T) / sigma
                let proj = dw.frobenius_dot(w_hat);
                for (o, &uo) in pv.left.iter().enumerate() {
                    let row = dw.row_mut(o);
                    for (d, &vi) in row.iter_mut().zip(&pv.right) {
                        *d = (*d - proj * uo * vi) / sigma;
                    }
                }
            }

            let mut dx = g.matmul(w)?;
            if layer > 0 {
                let pre = &cache.pre_activations[layer - 1];
                for (d, &z) in dx.data_mut().iter_mut().zip(pre.data()) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            g = dx;
        }
        Ok((grads, g))
    }
}

/// Free-function form of [`Mlp::forward`].
pub fn mlp_forward(net: &Mlp, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
    net.forward(batch)
}

/// Free-function form of [`Mlp::backward`], parameter gradients only.
pub fn mlp_backward(net: &Mlp, cache: &ForwardCache, output_gradient: &Matrix) -> Result<MlpGrads> {
    Ok(net.backward(cache, output_gradient)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::finite_diff::finite_diff_grad;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn relu(v: f64) -> f64 {
        v.max(0.0)
    }

    /// Straight-line evaluation with explicit loops, independent of the
    /// batched kernel.
    fn oracle_forward(p: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (l, (w, b)) in p.weights.iter().zip(&p.biases).enumerate() {
            let mut z = vec![0.0; w.rows()];
            for o in 0..w.rows() {
                let mut s = b[o];
                for i in 0..w.cols() {
                    s += w[(o, i)] * a[i];
                }
                z[o] = s;
            }
            a = if l + 1 < p.n_layers() {
                z.into_iter().map(relu).collect()
            } else {
                z
            };
        }
        a
    }

    #[test]
    fn zero_network_outputs_zero() {
        let params = MlpParams::zeros(&[3, 5, 2], vec![false, false]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::from_params(params, &mut rng).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]]).unwrap();
        let (y, _) = net.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_then_relu_clamps() {
        // Two layers so the first is a hidden ReLU layer; the output layer is identity.
        let mut params = MlpParams::zeros(&[2, 2, 2], vec![false, false]).unwrap();
        params.weights[0] = Matrix::identity(2);
        params.weights[1] = Matrix::identity(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::from_params(params, &mut rng).unwrap();
        let (y, _) = net.forward(&Matrix::from_rows(&[[1.0, -1.0]]).unwrap()).unwrap();
        assert_eq!(y.data(), &[1.0, 0.0]);
    }

    #[test]
    fn seeded_network_matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = Mlp::new(&[2, 4, 1], vec![false, false], &mut rng).unwrap();
        let (y, _) = net.forward(&Matrix::from_rows(&[[0.3, 0.7]]).unwrap()).unwrap();
        let expected = oracle_forward(&net.params, &[0.3, 0.7]);
        assert!((y[(0, 0)] - expected[0]).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(&[2, 3, 1], vec![false, false], &mut rng).unwrap();
        assert!(matches!(net.forward(&Matrix::zeros(1, 3)), Err(Error::Shape(_))));
        let (_, cache) = net.forward(&Matrix::zeros(2, 2)).unwrap();
        assert!(net.backward(&cache, &Matrix::zeros(3, 1)).is_err());
        let other = Mlp::new(&[2, 4, 1], vec![false, false], &mut rng).unwrap();
        assert!(other.backward(&cache, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 4, 2], vec![false, false], &mut rng).unwrap();
        let (_, cache) = net.forward(&Matrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap()).unwrap();
        let grads = mlp_backward(&net, &cache, &Matrix::zeros(1, 2)).unwrap();
        assert!(grads.to_flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_linear_layer_chain_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[3, 1], vec![false], &mut rng).unwrap();
        let x = [0.4, -1.5, 2.0];
        let (_, cache) = net.forward(&Matrix::from_rows(&[x]).unwrap()).unwrap();
        let grads = mlp_backward(&net, &cache, &Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        assert_eq!(grads.weights[0].data(), &x);
        assert_eq!(grads.biases[0], vec![1.0]);
    }

    fn check_gradients(net: &Mlp, x: &Matrix, seed: u64) {
        // loss = sum(c .* output) for fixed random c
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..x.rows() * net.output_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let c = Matrix::from_vec(x.rows(), net.output_dim(), c).unwrap();
        let (_, cache) = net.forward(x).unwrap();
        let (grads, dx) = net.backward(&cache, &c).unwrap();
        let analytic = grads.to_flat();
        let base = net.params.to_flat();
        let mut probe = net.clone();
        let numeric = finite_diff_grad(
            |p| {
                probe.params.set_flat(p).unwrap();
                probe.predict(x).unwrap().frobenius_dot(&c)
            },
            &base,
            1e-6,
        )
        .unwrap();
        for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: analytic {a} numeric {n}");
        }
        let input_numeric = finite_diff_grad(
            |v| {
                let xm = Matrix::from_vec(x.rows(), x.cols(), v.to_vec()).unwrap();
                net.predict(&xm).unwrap().frobenius_dot(&c)
            },
            x.data(),
            1e-6,
        )
        .unwrap();
        for (a, n) in dx.data().iter().zip(&input_numeric) {
            assert!((a - n).abs() / a.abs().max(n.abs()).max(1e-6) < 1e-4);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let sizes = [3, 1 + (seed as usize % 5), 4 + (seed as usize % 3), 2];
            let mask = last_hidden_mask(3, seed % 2 == 0);
            let mut net = Mlp::new(&sizes, mask, &mut rng).unwrap();
            net.refresh_spectral();
            let data: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = Matrix::from_vec(5, 3, data).unwrap();
            check_gradients(&net, &x, seed);
        }
    }

    #[test]
    fn polyak_update_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Mlp::new(&[2, 2], vec![false], &mut rng).unwrap();
        let b = Mlp::new(&[2, 2], vec![false], &mut rng).unwrap();
        let mut t = a.params.clone();
        t.polyak_update(&b.params, 0.25);
        for ((tv, av), bv) in t.to_flat().iter().zip(a.params.to_flat()).zip(b.params.to_flat()) {
            assert!((tv - (0.75 * av + 0.25 * bv)).abs() < 1e-15);
        }
    }

    #[test]
    fn last_hidden_mask_layout() {
        assert_eq!(last_hidden_mask(4, true), vec![false, false, true, false]);
        assert_eq!(last_hidden_mask(3, false), vec![false; 3]);
        assert_eq!(last_hidden_mask(1, true), vec![false]);
    }
}
