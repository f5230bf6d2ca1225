//! Gauss–Legendre rules and the discrete mollifier.

use crate::geom::Vec2;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `exp(−1/(1−|x|²))` on the unit disk, zero outside.
pub fn bump(x: Vec2) -> f64 {
    let s = x.norm2();
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s)).exp()
    }
}

/// Offsets `y_q` and weights (summing to one) of the order-`n` tensor rule for
/// convolution with the normalized bump of radius `eps`.
pub fn mollifier_nodes(eps: f64, n: usize) -> Vec<(Vec2, f64)> {
    let (x, w) = gauss_legendre(n);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s = Vec2::new(x[i], x[j]);
            let wt = w[i] * w[j] * bump(s);
            if wt > 0.0 {
                out.push((s * eps, wt));
            }
        }
    }
    let total: f64 = out.iter().map(|p| p.1).sum();
    out.iter_mut().for_each(|p| p.1 /= total);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [2usize, 5, 8, 12] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert_relative_eq!(q, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn known_nodes() {
        let (x, _) = gauss_legendre(2);
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn mollifier_is_symmetric_probability() {
        let nodes = mollifier_nodes(0.1, 8);
        assert_relative_eq!(nodes.iter().map(|p| p.1).sum::<f64>(), 1.0, epsilon = 1e-14);
        let mean = nodes.iter().fold(Vec2::ZERO, |a, p| a + p.0 * p.1);
        assert!(mean.norm() < 1e-16);
        assert!(nodes.iter().all(|p| p.0.norm() < 0.1));
    }
}
