//! Small dense symmetric eigenvalue problems (cyclic Jacobi).

/// Eigenvalues of the symmetric `d × d` row-major matrix `a`, ascending.
pub fn symmetric_eigenvalues(a: &[f64], d: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    match d {
        0 => return Vec::new(),
        1 => return vec![m[0]],
        2 => {
            let (p, q, r) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
            let mean = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            return vec![mean - rad, mean + rad];
        }
        _ => {}
    }
    for _sweep in 0..64 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i * d + j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (m[q * d + q] - m[p * d + p]) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = m[k * d + p];
                    let akq = m[k * d + q];
                    m[k * d + p] = c * akp - s * akq;
                    m[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = m[p * d + k];
                    let aqk = m[q * d + k];
                    m[p * d + k] = c * apk - s * aqk;
                    m[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..d).map(|i| m[i * d + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Operator 2-norm of a symmetric matrix.
pub fn symmetric_norm(a: &[f64], d: usize) -> f64 {
    symmetric_eigenvalues(a, d).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonalizes_3x3() {
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0];
        let ev = symmetric_eigenvalues(&a, 3);
        for (x, y) in ev.iter().zip([1.0, 3.0, 5.0]) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let ev = symmetric_eigenvalues(&[0.0, 1.0, 1.0, 0.0], 2);
        assert_eq!(ev, vec![-1.0, 1.0]);
    }
}
