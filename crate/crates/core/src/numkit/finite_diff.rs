use crate::error::{Error, Result};

/// Central-difference gradient `(f(p + h e_i) - f(p - h e_i)) / 2h` for every
/// coordinate of `params`.
pub fn finite_diff_grad<F>(mut loss_fn: F, params: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::argument(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = loss_fn(&probe);
        probe[i] = orig - h;
        let down = loss_fn(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::numeric(format!("loss is not finite around parameter {i}")));
        }
        grads.push((up - down) / (2.0 * h));
    }
    Ok(grads)
}

/// `|a - b| / max(|a|, |b|, floor)`, the comparison used by gradient checks.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 3.0], 1e-4).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn quadratic_form_matches_symbolic_gradient() {
        // f(p) = p^T A p + b^T p with A symmetric; grad = 2 A p + b
        let a = [[2.0, 0.5, -1.0], [0.5, 3.0, 0.25], [-1.0, 0.25, 1.5]];
        let b = [0.3, -0.7, 1.1];
        let f = |p: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += p[i] * a[i][j] * p[j];
                }
                s += b[i] * p[i];
            }
            s
        };
        let p = [0.4, -1.2, 0.9];
        let g = finite_diff_grad(f, &p, 1e-5).unwrap();
        for i in 0..3 {
            let exact: f64 = 2.0 * (0..3).map(|j| a[i][j] * p[j]).sum::<f64>() + b[i];
            assert!((g[i] - exact).abs() < 1e-6, "{i}: {} vs {exact}", g[i]);
        }
    }

    #[test]
    fn rejects_bad_step_and_nonfinite_loss() {
        assert!(finite_diff_grad(|p| p[0], &[1.0], 0.0).is_err());
        assert!(matches!(
            finite_diff_grad(|p| 1.0 / (p[0] - p[0]), &[1.0], 1e-3),
            Err(Error::Numeric(_))
        ));
    }
}
