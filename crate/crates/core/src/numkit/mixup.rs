//! Mixup: convex combinations of input/label pairs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// `(lambda x1 + (1 - lambda) x2, lambda y1 + (1 - lambda) y2)`
pub fn mixup_pair(x1: &[f64], y1: f64, x2: &[f64], y2: f64, lambda: f64) -> Result<(Vec<f64>, f64)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::argument(format!("mixup lambda {lambda} outside [0, 1]")));
    }
    if x1.len() != x2.len() {
        return Err(Error::shape(format!("mixup inputs of length {} and {}", x1.len(), x2.len())));
    }
    let x = x1
        .iter()
        .zip(x2)
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect();
    Ok((x, lambda * y1 + (1.0 - lambda) * y2))
}

/// Mixing coefficients are drawn from `Beta(alpha, alpha)`.
#[derive(Debug, Clone, Copy)]
pub struct MixupSampler {
    beta: Beta<f64>,
}

impl MixupSampler {
    pub fn new(alpha: f64) -> Result<Self> {
        let beta = Beta::new(alpha, alpha)
            .map_err(|e| Error::argument(format!("invalid mixup Beta parameter {alpha}: {e}")))?;
        Ok(Self { beta })
    }

    pub fn sample_lambda<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.beta.sample(rng)
    }

    /// Draws a random partner permutation and one coefficient per row.
    pub fn plan<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> MixPlan {
        let mut partners: Vec<usize> = (0..rows).collect();
        partners.shuffle(rng);
        let lambdas = (0..rows).map(|_| self.sample_lambda(rng)).collect();
        MixPlan { partners, lambdas }
    }
}

/// Row `i` of a mixed batch is `lambdas[i] * row(i) + (1 - lambdas[i]) * row(partners[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixPlan {
    pub partners: Vec<usize>,
    pub lambdas: Vec<f64>,
}

impl MixPlan {
    pub fn identity(rows: usize) -> Self {
        Self {
            partners: (0..rows).collect(),
            lambdas: vec![1.0; rows],
        }
    }

    pub fn mix_rows(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.partners.len() {
            return Err(Error::shape("mix plan row count differs from batch"));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for (i, (&j, &lam)) in self.partners.iter().zip(&self.lambdas).enumerate() {
            let (a, b) = (x.row(i), x.row(j));
            for ((o, &ai), &bi) in out.row_mut(i).iter_mut().zip(a).zip(b) {
                *o = lam * ai + (1.0 - lam) * bi;
            }
        }
        Ok(out)
    }

    pub fn mix_labels(&self, y: &[f64]) -> Vec<f64> {
        self.partners
            .iter()
            .zip(&self.lambdas)
            .enumerate()
            .map(|(i, (&j, &lam))| lam * y[i] + (1.0 - lam) * y[j])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::loss::{bce_with_logits, sigmoid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lambda_one_is_identity() {
        let (x, y) = mixup_pair(&[1.0, 2.0], 1.0, &[5.0, 6.0], 0.0, 1.0).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert_eq!(y, 1.0);
    }

    #[test]
    fn half_mix_of_hard_labels() {
        let (x, y) = mixup_pair(&[0.0], 1.0, &[2.0], 0.0, 0.5).unwrap();
        assert_eq!(x, vec![1.0]);
        assert_eq!(y, 0.5);
    }

    #[test]
    fn lambda_out_of_range_rejected() {
        assert!(matches!(mixup_pair(&[0.0], 1.0, &[0.0], 0.0, 1.5), Err(Error::Argument(_))));
        assert!(matches!(mixup_pair(&[0.0], 1.0, &[0.0], 0.0, -0.1), Err(Error::Argument(_))));
    }

    #[test]
    fn seeded_batch_matches_recomputation() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0], [6.0, 7.0]]).unwrap();
        let y = [1.0, 0.0, 1.0, 0.0];
        let sampler = MixupSampler::new(1.0).unwrap();
        let plan = sampler.plan(4, &mut ChaCha8Rng::seed_from_u64(9));
        let mixed = plan.mix_rows(&x).unwrap();
        let labels = plan.mix_labels(&y);

        let again = sampler.plan(4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(plan, again);
        for i in 0..4 {
            let j = plan.partners[i];
            let (xr, yr) = mixup_pair(x.row(i), y[i], x.row(j), y[j], plan.lambdas[i]).unwrap();
            assert_eq!(mixed.row(i), xr.as_slice());
            assert_eq!(labels[i], yr);
        }
    }

    #[test]
    fn mixed_label_loss_decomposes() {
        let (lam, z) = (0.3, 0.8);
        let (l, _) = bce_with_logits(z, lam);
        let split = lam * bce_with_logits(z, 1.0).0 + (1.0 - lam) * bce_with_logits(z, 0.0).0;
        assert!((l - split).abs() < 1e-15);
        assert!(sigmoid(z) > 0.5);
    }
}
