//! Adaptive Dormand-Prince 5(4) integrator with dense output landing on requested points.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Dopri5 {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Dopri5 {
            rtol,
            atol,
            ..Default::default()
        }
    }

    /// Integrate y' = f(t, y) from t0 through the monotone list `t_out` (either direction).
    /// `obs(i, t, y)` is called at each output point; the state lands exactly on them.
    pub fn integrate<F, O>(
        &self,
        f: F,
        t0: f64,
        y0: &[f64],
        t_out: &[f64],
        obs: O,
    ) -> Result<OdeStats, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(usize, f64, &[f64]),
    {
        let atol = vec![self.atol; y0.len()];
        self.integrate_with_atol(f, t0, y0, &atol, t_out, obs)
    }

    /// As `integrate`, with a per-component absolute tolerance.
    pub fn integrate_with_atol<F, O>(
        &self,
        mut f: F,
        t0: f64,
        y0: &[f64],
        atol: &[f64],
        t_out: &[f64],
        mut obs: O,
    ) -> Result<OdeStats, OdeError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(usize, f64, &[f64]),
    {
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut stats = OdeStats::default();
        if t_out.is_empty() {
            return Ok(stats);
        }
        let dir = if t_out[t_out.len() - 1] >= t0 { 1.0 } else { -1.0 };
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut yt = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        f(t, &y, &mut k1);
        let span = (t_out[t_out.len() - 1] - t0).abs();
        let mut h = (span * 1e-3).min(self.h_max).max(1e-12);
        let mut steps = 0;
        let mut fac_old: f64 = 1e-4;
        for (i, &target) in t_out.iter().enumerate() {
            while (target - t) * dir > 1e-14 * (1.0 + t.abs()) {
                steps += 1;
                if steps > self.max_steps {
                    return Err(OdeError::TooManySteps(self.max_steps));
                }
                let mut hs = h.min(self.h_max);
                let mut hit = false;
                if hs >= (target - t) * dir {
                    hs = (target - t) * dir;
                    hit = true;
                }
                let hh = hs * dir;
                for j in 0..n {
                    yt[j] = y[j] + hh * A21 * k1[j];
                }
                f(t + C2 * hh, &yt, &mut k2);
                for j in 0..n {
                    yt[j] = y[j] + hh * (A31 * k1[j] + A32 * k2[j]);
                }
                f(t + C3 * hh, &yt, &mut k3);
                for j in 0..n {
                    yt[j] = y[j] + hh * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j]);
                }
                f(t + C4 * hh, &yt, &mut k4);
                for j in 0..n {
                    yt[j] = y[j] + hh * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j]);
                }
                f(t + C5 * hh, &yt, &mut k5);
                for j in 0..n {
                    yt[j] = y[j]
                        + hh * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j]);
                }
                let tn = if hit { target } else { t + hh };
                f(tn, &yt, &mut k6);
                for j in 0..n {
                    ynew[j] = y[j]
                        + hh * (B1 * k1[j] + B3 * k3[j] + B4 * k4[j] + B5 * k5[j] + B6 * k6[j]);
                }
                f(tn, &ynew, &mut k7);
                let mut err = 0.0;
                for j in 0..n {
                    let e = hh
                        * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j]);
                    let sc = atol[j] + self.rtol * y[j].abs().max(ynew[j].abs());
                    err += (e / sc) * (e / sc);
                }
                let err = (err / n as f64).sqrt();
                if !err.is_finite() {
                    return Err(OdeError::NonFinite(t));
                }
                if err <= 1.0 {
                    stats.accepted += 1;
                    t = tn;
                    std::mem::swap(&mut y, &mut ynew);
                    std::mem::swap(&mut k1, &mut k7);
                    // PI step size control
                    let fac = (0.9 * err.max(1e-10).powf(-0.17) * fac_old.powf(0.04)).clamp(0.2, 5.0);
                    fac_old = err.max(1e-4);
                    if !hit || fac < 1.0 {
                        h = hs * fac;
                    }
                } else {
                    stats.rejected += 1;
                    h = hs * (0.9 * err.powf(-0.2)).max(0.2);
                    if h < 1e-14 * (1.0 + t.abs()) {
                        return Err(OdeError::StepUnderflow(t));
                    }
                }
            }
            t = target;
            obs(i, t, &y);
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let ts: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let mut out = vec![];
        Dopri5::with_tol(1e-11, 1e-13)
            .integrate(
                |_, y, d| {
                    d[0] = y[1];
                    d[1] = -y[0];
                },
                0.0,
                &[0.0, 1.0],
                &ts,
                |_, t, y| out.push((t, y[0])),
            )
            .unwrap();
        for (t, y) in out {
            assert!((y - t.sin()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn backward_direction() {
        let mut last = 0.0;
        Dopri5::default()
            .integrate(|_, y, d| d[0] = y[0], 1.0, &[1.0], &[0.5, 0.0], |_, _, y| last = y[0])
            .unwrap();
        assert!((last - (-1.0f64).exp()).abs() < 1e-9);
    }
}
