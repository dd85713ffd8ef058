//! Finite-difference weights (Fornberg's algorithm) and uniform-grid derivative helpers.

/// Weights for derivatives of order 0..=m at `z` from the nodes `x`.
/// Returns `c[k][j]`, the weight of node j for the k-th derivative.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives on a uniform grid of spacing `h`, using stencils of
/// `width` points (odd), centred where possible and one-sided near the ends.
/// Also returns the rounding bound sum_j |w_j| |f_j| for each derivative.
pub struct UniformDiff {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub round1: Vec<f64>,
    pub round2: Vec<f64>,
}

pub fn uniform_derivatives(f: &[f64], h: f64, width: usize) -> UniformDiff {
    let n = f.len();
    let half = width / 2;
    let offsets: Vec<f64> = (0..width).map(|j| j as f64).collect();
    let mut cache: Vec<Option<Vec<Vec<f64>>>> = vec![None; width];
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    for i in 0..n {
        let start = if i < half {
            0
        } else if i + half >= n {
            n - width
        } else {
            i - half
        };
        let pos = i - start;
        let w = cache[pos].get_or_insert_with(|| fornberg(pos as f64, &offsets, 2));
        let (mut a1, mut a2, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..width {
            let v = f[start + j];
            a1 += w[1][j] * v;
            a2 += w[2][j] * v;
            b1 += (w[1][j] * v).abs();
            b2 += (w[2][j] * v).abs();
        }
        d1[i] = a1 / h;
        d2[i] = a2 / (h * h);
        r1[i] = b1 * f64::EPSILON / h;
        r2[i] = b2 * f64::EPSILON / (h * h);
    }
    UniformDiff {
        d1,
        d2,
        round1: r1,
        round2: r2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_second_derivative() {
        let c = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((c[2][0] - 1.0).abs() < 1e-14);
        assert!((c[2][1] + 2.0).abs() < 1e-14);
        assert!((c[1][2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn uniform_derivatives_of_sine() {
        let h = 0.01;
        let f: Vec<f64> = (0..400).map(|i| (i as f64 * h).sin()).collect();
        let d = uniform_derivatives(&f, h, 7);
        for i in [0, 3, 200, 399] {
            let x = i as f64 * h;
            assert!((d.d1[i] - x.cos()).abs() < 1e-9, "i={i}");
            assert!((d.d2[i] + x.sin()).abs() < 1e-7, "i={i}");
        }
    }
}
