//! Smooth plateau cutoff separating small and large frequencies.

/// Default small-frequency radius.
pub const DEFAULT_KAPPA: f64 = 0.5;

fn flank(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Equal to 1 on `[0, 1]`, 0 on `[2, ∞)`, infinitely differentiable in between.
pub fn plateau(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let a = flank(2.0 - r);
    a / (a + flank(r - 1.0))
}

/// Low-frequency weight `χ(|ξ|/κ)`.
pub fn low_pass(xi_norm: f64, kappa: f64) -> f64 {
    plateau(xi_norm / kappa)
}

/// High-frequency weight `1 − χ(|ξ|/κ)`.
pub fn high_pass(xi_norm: f64, kappa: f64) -> f64 {
    1.0 - low_pass(xi_norm, kappa)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_shape() {
        assert_eq!(plateau(0.0), 1.0);
        assert_eq!(plateau(1.0), 1.0);
        assert_eq!(plateau(2.0), 0.0);
        assert_eq!(plateau(7.0), 0.0);
        assert!((plateau(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=100 {
            let x = plateau(1.0 + k as f64 / 100.0);
            assert!(x <= prev);
            prev = x;
        }
        assert!((low_pass(0.6, 0.5) + high_pass(0.6, 0.5) - 1.0).abs() < 1e-15);
    }
}
