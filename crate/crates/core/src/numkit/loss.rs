//! Numerically stable scalar primitives shared by the ranking and
//! classification losses.

/// Probabilities entering a logarithm are clamped to `[EPS, 1 - EPS]`.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(sigmoid(x))`, finite for any finite `x`.
pub fn stable_log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn clamp_probability(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

/// `-y log p - (1 - y) log(1 - p)` with `p` clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = clamp_probability(p, PROB_CLAMP);
    -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
}

/// Binary cross-entropy of `sigmoid(logit)` against a soft label, computed
/// from the logit. Returns `(loss, dloss/dlogit)`.
pub fn bce_with_logits(logit: f64, y: f64) -> (f64, f64) {
    let loss = y * softplus(-logit) + (1.0 - y) * softplus(logit);
    (loss, sigmoid(logit) - y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn log_sigmoid_reference_values() {
        assert!((stable_log_sigmoid(0.0) + LN_2).abs() < 1e-15);
        let far = stable_log_sigmoid(-1000.0);
        assert!(far.is_finite() && (far + 1000.0).abs() < 1e-9);
        assert!((stable_log_sigmoid(9f64.ln()) - 0.9f64.ln()).abs() < 1e-15);
        assert!((stable_log_sigmoid(9f64.ln()) + 0.105361).abs() < 1e-6);
        assert!(stable_log_sigmoid(1e6).is_finite() && stable_log_sigmoid(-1e6).is_finite());
    }

    #[test]
    fn bce_reference_values() {
        assert!((bce_loss(0.5, 1.0) - LN_2).abs() < 1e-15);
        assert!((bce_loss(1.0 - 1e-7, 1.0) - 1e-7).abs() < 1e-12);
        assert!((bce_loss(0.9, 0.0) - 10f64.ln()).abs() < 1e-12);
        assert!(bce_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn bce_with_logits_agrees_with_probability_form() {
        for &(z, y) in &[(0.0, 1.0), (1.3, 0.0), (-2.1, 0.25), (4.0, 0.6)] {
            let (l, g) = bce_with_logits(z, y);
            assert!((l - bce_loss(sigmoid(z), y)).abs() < 1e-12);
            assert!((g - (sigmoid(z) - y)).abs() < 1e-15);
        }
        assert!(bce_with_logits(20.0, 1.0).0 < 1e-8);
        assert!(bce_with_logits(-20.0, 0.0).0 < 1e-8);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for &x in &[-30.0, -1.0, 0.0, 0.5, 700.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }
}
