//! Bessel functions J0, J1 and modified Bessel functions K0, K1 for real arguments.

use std::f64::consts::{FRAC_PI_4, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Crossover between the power series and the Hankel asymptotic expansion.
const J_SERIES_MAX: f64 = 12.0;

fn j_series(nu: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = (0.5 * x).powi(nu as i32);
    for k in 1..=nu {
        term /= k as f64;
    }
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + nu) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Hankel asymptotic P, Q with optimal truncation (stop once terms start growing).
fn j_asymptotic(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let omega = x - (nu as f64) * PI / 2.0 - FRAC_PI_4;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        let term = a / x.powi(k);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        let kk = (2 * k + 1) as f64;
        a *= (mu - kk * kk) / (8.0 * (k + 1) as f64);
        if a == 0.0 {
            break;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * omega.cos() - q * omega.sin())
}

/// Bessel function of the first kind, order 0.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x < J_SERIES_MAX {
        j_series(0, x)
    } else {
        j_asymptotic(0, x)
    }
}

/// Bessel function of the first kind, order 1 (odd in x).
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < J_SERIES_MAX {
        j_series(1, ax)
    } else {
        j_asymptotic(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// J1(x)/x, regular at the origin where it equals 1/2.
pub fn j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let q = x * x;
        0.5 - q / 16.0 + q * q / 384.0
    } else {
        bessel_j1(x) / x
    }
}

/// First positive zero of J1 by bisection on the implemented J1.
pub fn j1_first_zero() -> f64 {
    let (mut a, mut b) = (3.0, 4.5);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if bessel_j1(a) * bessel_j1(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn k_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let l = (0.5 * x).ln();
    // K0
    let mut t = 1.0;
    let mut h = 0.0;
    let mut i0 = 1.0;
    let mut s0 = 0.0;
    // K1 pieces
    let mut t1 = 1.0; // y^k / (k! (k+1)!)
    let mut i1 = 1.0;
    let mut psi_k1 = -EULER_GAMMA; // psi(k+1)
    let mut s1 = psi_k1 + (1.0 - EULER_GAMMA); // psi(1) + psi(2)
    for k in 1..60 {
        let kf = k as f64;
        t *= y / (kf * kf);
        h += 1.0 / kf;
        i0 += t;
        s0 += h * t;
        t1 *= y / (kf * (kf + 1.0));
        i1 += t1;
        psi_k1 += 1.0 / kf;
        s1 += (2.0 * psi_k1 + 1.0 / (kf + 1.0)) * t1;
        if t < 1e-18 && t1 < 1e-18 {
            break;
        }
    }
    let k0 = -(l + EULER_GAMMA) * i0 + s0;
    let i1 = 0.5 * x * i1;
    let k1 = 1.0 / x + l * i1 - 0.25 * x * s1;
    (k0, k1)
}

/// e^x K_nu(x) for x > 2 by the trapezoid rule on the integral representation
/// K_nu(x) = ∫_0^∞ exp(-x cosh t) cosh(nu t) dt, which converges geometrically.
fn k_scaled_integral(nu: f64, x: f64) -> f64 {
    let h = 0.05;
    let mut sum = 0.5;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let e = (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
        sum += e;
        if e < 1e-19 * sum {
            break;
        }
        k += 1;
    }
    sum * h
}

/// e^x K0(x).
pub fn bessel_k0_scaled(x: f64) -> f64 {
    if x <= 2.0 {
        k_series(x).0 * x.exp()
    } else {
        k_scaled_integral(0.0, x)
    }
}

/// e^x K1(x).
pub fn bessel_k1_scaled(x: f64) -> f64 {
    if x <= 2.0 {
        k_series(x).1 * x.exp()
    } else {
        k_scaled_integral(1.0, x)
    }
}

/// Modified Bessel function of the second kind, order 0.
pub fn bessel_k0(x: f64) -> f64 {
    if x <= 2.0 {
        k_series(x).0
    } else {
        k_scaled_integral(0.0, x) * (-x).exp()
    }
}

/// Modified Bessel function of the second kind, order 1.
pub fn bessel_k1(x: f64) -> f64 {
    if x <= 2.0 {
        k_series(x).1
    } else {
        k_scaled_integral(1.0, x) * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j1_reference_values() {
        // values from standard tables
        let cases = [
            (0.5, 0.242_268_457_674_873_9),
            (1.0, 0.440_050_585_744_933_5),
            (5.0, -0.327_579_137_591_465_2),
            (11.9, -0.228_983_249_661_924_04),
            (12.0, -0.223_447_104_490_627_6),
            (20.0, 0.066_833_124_175_850_05),
            (100.0, -0.077_145_352_014_112_3),
        ];
        for (x, v) in cases {
            assert!((bessel_j1(x) - v).abs() < 1e-12, "x={x}: {} vs {v}", bessel_j1(x));
        }
    }

    #[test]
    fn j0_reference_values() {
        let cases = [
            (1.0, 0.765_197_686_557_966_6),
            (10.0, -0.245_935_764_451_348_3),
            (30.0, -0.086_367_983_581_040_23),
        ];
        for (x, v) in cases {
            assert!((bessel_j0(x) - v).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn j1_zero_and_origin() {
        assert_eq!(bessel_j1(0.0), 0.0);
        assert!((j1_over_x(1e-6) - 0.5).abs() < 1e-12);
        assert!((j1_first_zero() - 3.831_705_970_207_512).abs() < 1e-12);
    }

    #[test]
    fn j1_derivative_identity() {
        // J1' = J0 - J1/x
        for &x in &[0.7, 3.0, 11.5, 12.5, 40.0] {
            let h = 1e-4;
            let d = (bessel_j1(x + h) - bessel_j1(x - h)) / (2.0 * h);
            assert!((d - (bessel_j0(x) - bessel_j1(x) / x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn k_reference_values() {
        let cases = [
            (0.1, 2.427_069_024_702_016_6, 9.853_844_780_870_606),
            (1.0, 0.421_024_438_240_708_3, 0.601_907_230_197_234_6),
            (2.0, 0.113_893_872_749_533_4, 0.139_865_881_816_522_4),
            (2.5, 0.062_347_553_200_366_2, 0.073_890_816_347_747_05),
            (10.0, 1.778_006_231_616_765e-5, 1.864_877_345_382_558e-5),
        ];
        for (x, k0, k1) in cases {
            assert!(((bessel_k0(x) - k0) / k0).abs() < 1e-13, "K0({x})");
            assert!(((bessel_k1(x) - k1) / k1).abs() < 1e-13, "K1({x})");
        }
    }
}
