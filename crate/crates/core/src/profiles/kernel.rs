use std::f64::consts::PI;

/// Non-coalescence kernel `q_t` for contraction rate `lambda` and constant `c`.
///
/// `1/(2c√(πt))` before the branch point `t = 1/(2λ)` and
/// `√(λ/(2π)) e^{1/2 - λt} / c` after it. The branches agree at the branch
/// point and `∫₀^∞ q_t dt = √2 / (c √(πλ))`.
pub fn q_kernel(lambda: f64, c: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return f64::INFINITY;
    }
    if t < branch_point(lambda) {
        1.0 / (2.0 * c * (PI * t).sqrt())
    } else {
        (lambda / (2.0 * PI)).sqrt() * (0.5 - lambda * t).exp() / c
    }
}

pub fn branch_point(lambda: f64) -> f64 {
    0.5 / lambda
}

/// Closed form of `∫₀^∞ q_t dt`.
pub fn q_integral(lambda: f64, c: f64) -> f64 {
    2f64.sqrt() / (c * (PI * lambda).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::{integrate, integrate_to_infinity, QuadOptions};
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        assert!((q_kernel(0.5, 0.5, 0.25) - 1.128_379_167_095_512_6).abs() < 1e-12);
        assert!((q_kernel(0.5, 0.5, 1.0) - 0.564_189_583_547_756_3).abs() < 1e-12);
        assert!((q_integral(0.5, 0.5) - 2.256_758_334_191_025).abs() < 1e-12);
    }

    #[test]
    fn integral_matches_quadrature() {
        let (l, c) = (0.5, 0.5);
        let tb = branch_point(l);
        let o = QuadOptions::with_tol(1e-13);
        let a = integrate(|t| q_kernel(l, c, t), 0.0, tb, o).unwrap().value;
        let b = integrate_to_infinity(|t| q_kernel(l, c, t), tb, o).unwrap().value;
        assert!(((a + b) / q_integral(l, c) - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn continuous_and_decreasing(lambda in 0.01f64..5.0, c in 0.01f64..1.0, s in 0.0f64..10.0) {
            let tb = branch_point(lambda);
            let left = 1.0 / (2.0 * c * (PI * tb).sqrt());
            prop_assert!((left - q_kernel(lambda, c, tb)).abs() <= 1e-12 * left);
            let t = tb + s;
            prop_assert!(q_kernel(lambda, c, t + 0.1) <= q_kernel(lambda, c, t));
        }
    }
}
