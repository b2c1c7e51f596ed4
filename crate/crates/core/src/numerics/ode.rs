//! Fixed-step explicit integrators.

/// One classical Runge–Kutta step of `y' = f(t, y)` for a scalar state.
pub fn rk4_step<F: FnMut(f64, f64) -> f64>(f: &mut F, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// One Runge–Kutta step for a vector state. `f` writes the derivative into its last argument.
pub fn rk4_step_vec<F: FnMut(f64, &[f64], &mut [f64])>(f: &mut F, t: f64, y: &mut [f64], h: f64) {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut y = 1.0;
            for k in 0..n {
                y = rk4_step(&mut |_, y| -y, k as f64 * h, y, h);
            }
            (y - (-1f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn vector_step_matches_scalar() {
        let mut y = [1.0, 2.0];
        rk4_step_vec(&mut |_, y: &[f64], d: &mut [f64]| {
            d[0] = -y[0];
            d[1] = -y[1];
        }, 0.0, &mut y, 0.1);
        let s = rk4_step(&mut |_, y| -y, 0.0, 1.0, 0.1);
        assert_eq!(y[0], s);
        assert_eq!(y[1], 2.0 * s);
    }
}
