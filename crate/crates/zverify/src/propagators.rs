//! Desk-scale model propagators: the Schrödinger propagator S on the distorted Fourier
//! side, the dilated wave parametrix U with Hankel synthesis, the temporal mollifier
//! Q_{<a}, the transference operator and the pseudo-transference kernel.
//!
//! Time integrals run on a uniform grid over [t0, t1]; sources are compactly supported
//! inside, so "vanishing at +∞" is vanishing at t1. Dilated frequency arguments are
//! read off the ξ-grid by cubic interpolation.

use crate::fd::uniform_derivatives;
use crate::hankel::{phi_r4, transform_at, Analytic};
use crate::multipliers::smooth_step;
use crate::par;
use crate::quad::{adaptive, gauss_legendre, NodeSet};
use crate::spectral::{connection_coefficients, distorted_transform, regular_solution, OpKind, SpectralError, TransformFn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error("source does not vanish near the horizon t1 = {0}")]
    HorizonTooShort(f64),
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("spectral: {0}")]
    Spectral(#[from] SpectralError),
    #[error("hankel: {0}")]
    Hankel(#[from] crate::hankel::HankelError),
}

/// λ(s) = (c s)^p as a function of the clock s; `Frozen` is λ ≡ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Clock {
    Power { c: f64, p: f64 },
    Frozen,
}

impl Clock {
    /// λ(τ) = (2ντ)^((1/2+ν)/(2ν)) in Schrödinger time.
    pub fn schrodinger(nu: f64) -> Clock {
        Clock::Power {
            c: 2.0 * nu,
            p: (0.5 + nu) / (2.0 * nu),
        }
    }

    /// λ(τ̃) = ((ν-1/2)τ̃)^((ν+1/2)/(ν-1/2)) in wave time.
    pub fn wave(nu: f64) -> Clock {
        Clock::Power {
            c: nu - 0.5,
            p: (nu + 0.5) / (nu - 0.5),
        }
    }

    pub fn lambda(&self, s: f64) -> f64 {
        match *self {
            Clock::Power { c, p } => (c * s).powf(p),
            Clock::Frozen => 1.0,
        }
    }

    /// β = λ_s / λ.
    pub fn beta(&self, s: f64) -> f64 {
        match *self {
            Clock::Power { p, .. } => p / s,
            Clock::Frozen => 0.0,
        }
    }

    pub fn beta_prime(&self, s: f64) -> f64 {
        match *self {
            Clock::Power { p, .. } => -p / (s * s),
            Clock::Frozen => 0.0,
        }
    }

    /// An antiderivative of λ^-m.
    pub fn inv_power_antiderivative(&self, m: f64, s: f64) -> f64 {
        match *self {
            Clock::Power { c, p } => {
                let e = 1.0 - m * p;
                if e.abs() < 1e-14 {
                    c.powf(-m * p) * s.ln()
                } else {
                    c.powf(-m * p) * s.powf(e) / e
                }
            }
            Clock::Frozen => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl UniformGrid {
    /// n+1 nodes covering [start, end] with step ≤ h.
    pub fn covering(start: f64, end: f64, h: f64) -> Self {
        let n = ((end - start) / h).ceil().max(1.0) as usize;
        UniformGrid {
            start,
            step: (end - start) / n as f64,
            n: n + 1,
        }
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.at(i)).collect()
    }

    pub fn end(&self) -> f64 {
        self.at(self.n - 1)
    }

    /// Halved step over the same interval.
    pub fn refined(&self) -> Self {
        UniformGrid {
            start: self.start,
            step: self.step / 2.0,
            n: 2 * self.n - 1,
        }
    }
}

/// Fourth-order end-corrected trapezoid weights for m+1 equispaced nodes (step 1).
fn gregory_weights(m: usize) -> Vec<f64> {
    let mut w = vec![1.0; m + 1];
    if m < 6 {
        w[0] = 0.5;
        w[m] = 0.5;
        return w;
    }
    let c = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    for k in 0..3 {
        w[k] = c[k];
        w[m - k] = c[k];
    }
    w
}

/// Cubic Lagrange interpolation of row samples on a uniform grid starting at 0.
fn interp_cubic(row: &[C], h: f64, x: f64) -> C {
    let n = row.len();
    let t = x / h;
    let k = (t.floor() as isize).clamp(1, n as isize - 3) as usize;
    let s = t - k as f64;
    let l0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let l1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let l2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let l3 = (s + 1.0) * s * (s - 1.0) / 6.0;
    row[k - 1] * l0 + row[k] * l1 + row[k + 1] * l2 + row[k + 2] * l3
}

/// Complex samples on a time grid × ξ-grid (row-major in time); ξ-grid starts at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorField {
    pub label: String,
    pub clock: Clock,
    pub time: UniformGrid,
    pub xi: UniformGrid,
    pub values: Vec<C>,
}

impl PropagatorField {
    pub fn zeros(label: &str, clock: Clock, time: UniformGrid, xi: UniformGrid) -> Self {
        PropagatorField {
            label: label.to_string(),
            clock,
            time,
            xi,
            values: vec![ZERO; time.n * xi.n],
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> C>(label: &str, clock: Clock, time: UniformGrid, xi: UniformGrid, f: F) -> Self {
        let mut values = Vec::with_capacity(time.n * xi.n);
        for i in 0..time.n {
            for j in 0..xi.n {
                values.push(f(time.at(i), xi.at(j)));
            }
        }
        PropagatorField {
            label: label.to_string(),
            clock,
            time,
            xi,
            values,
        }
    }

    pub fn row(&self, i: usize) -> &[C] {
        &self.values[i * self.xi.n..(i + 1) * self.xi.n]
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.values[i * self.xi.n + j]
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn lin(&self, a: C, o: &PropagatorField, b: C) -> PropagatorField {
        let mut r = self.clone();
        for (x, y) in r.values.iter_mut().zip(&o.values) {
            *x = a * *x + b * *y;
        }
        r
    }

    /// Plain text: header, then (time, ξ, Re, Im) per sample.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# propagator field {} clock={:?}", self.label, self.clock);
        let _ = writeln!(s, "# time xi re im");
        for i in 0..self.time.n {
            for j in 0..self.xi.n {
                let v = self.get(i, j);
                let _ = writeln!(s, "{:.10e} {:.10e} {:.12e} {:.12e}", self.time.at(i), self.xi.at(j), v.re, v.im);
            }
        }
        s
    }

    fn check_horizon(&self) -> Result<(), PropagatorError> {
        let sup = self.sup();
        let n = self.time.n;
        let tail = (n.saturating_sub(4)..n)
            .flat_map(|i| self.row(i).iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if tail > 1e-13 * sup.max(f64::MIN_POSITIVE) && sup > 0.0 {
            return Err(PropagatorError::HorizonTooShort(self.time.end()));
        }
        Ok(())
    }

    fn active_rows(&self) -> Vec<bool> {
        (0..self.time.n).map(|i| self.row(i).iter().any(|v| *v != ZERO)).collect()
    }
}

/// Time profiles of compactly supported test sources on [a, b].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeBump {
    /// sin⁴(π(s-a)/(b-a)), C³ with closed-form Fourier integrals
    Sin4 { a: f64, b: f64 },
    /// exp(1 - 1/(1-u²)) with u the position in [a, b] mapped to [-1, 1]; C^∞
    Smooth { a: f64, b: f64 },
}

impl TimeBump {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            TimeBump::Sin4 { a, b } => {
                if s <= a || s >= b {
                    0.0
                } else {
                    (PI * (s - a) / (b - a)).sin().powi(4)
                }
            }
            TimeBump::Smooth { a, b } => {
                let u = (2.0 * s - a - b) / (b - a);
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            TimeBump::Sin4 { a, b } | TimeBump::Smooth { a, b } => (a, b),
        }
    }

    /// ∫_lo^b e^{iωs} g(s) ds for the Sin4 profile, in closed form.
    pub fn sin4_fourier(&self, omega: f64, lo: f64) -> Option<C> {
        let TimeBump::Sin4 { a, b } = *self else {
            return None;
        };
        let lo = lo.max(a);
        if lo >= b {
            return Some(ZERO);
        }
        // sin⁴x = Σ c_m e^{2imx}, x = π(s-a)/(b-a)
        let k = 2.0 * PI / (b - a);
        let coef = [(-2, 1.0 / 16.0), (-1, -0.25), (0, 0.375), (1, -0.25), (2, 1.0 / 16.0)];
        let mut sum = ZERO;
        for (m, c) in coef {
            let w = omega + m as f64 * k;
            let phase = C::from_polar(1.0, -(m as f64) * k * a);
            let int = if w.abs() < 1e-12 {
                C::new(b - lo, 0.0)
            } else {
                (C::from_polar(1.0, w * b) - C::from_polar(1.0, w * lo)) / C::new(0.0, w)
            };
            sum += c * phase * int;
        }
        Some(sum)
    }
}

/// Separable source samples G(σ, ξ) = g(σ) b(ξ).
pub fn separable_source<B: Fn(f64) -> f64>(label: &str, clock: Clock, time: UniformGrid, xi: UniformGrid, g: &TimeBump, b: B) -> PropagatorField {
    PropagatorField::from_fn(label, clock, time, xi, |s, x| C::new(g.eval(s) * b(x), 0.0))
}

/// ẑ = S(G): the solution of -i(∂_τ - 2β - βξ∂_ξ)ẑ - ξ²ẑ = G vanishing at the horizon,
/// ẑ(τ,ξ) = -i ∫_τ^∞ (λ(τ)/λ(σ))² e^{iλ²(τ)ξ²∫_σ^τ λ⁻²} G(σ, λ(τ)ξ/λ(σ)) dσ.
pub fn schrodinger_s(g: &PropagatorField) -> Result<PropagatorField, PropagatorError> {
    g.check_horizon()?;
    let clock = g.clock;
    let (nt, nx) = (g.time.n, g.xi.n);
    let ht = g.time.step;
    let hx = g.xi.step;
    let lam: Vec<f64> = (0..nt).map(|k| clock.lambda(g.time.at(k))).collect();
    let anti: Vec<f64> = (0..nt).map(|k| clock.inv_power_antiderivative(2.0, g.time.at(k))).collect();
    let active = g.active_rows();
    let rows: Vec<Vec<C>> = par::map_range(nt, |i| {
        let w = gregory_weights(nt - 1 - i);
        let mut out = vec![ZERO; nx];
        for (jj, o) in out.iter_mut().enumerate() {
            let xi = g.xi.at(jj);
            let mut acc = ZERO;
            for k in i..nt {
                if !active[k] {
                    continue;
                }
                let ratio = lam[i] / lam[k];
                let phase = lam[i] * lam[i] * xi * xi * (anti[i] - anti[k]);
                let gv = interp_cubic(g.row(k), hx, ratio * xi);
                acc += w[k - i] * ratio * ratio * C::from_polar(1.0, phase) * gv;
            }
            *o = C::new(0.0, -ht) * acc;
        }
        out
    });
    let mut z = PropagatorField::zeros(&format!("S({})", g.label), clock, g.time, g.xi);
    for (i, r) in rows.into_iter().enumerate() {
        z.values[i * nx..(i + 1) * nx].copy_from_slice(&r);
    }
    Ok(z)
}

/// Frozen-λ closed form of S for G = g(σ) b(ξ) with g a Sin4 bump:
/// ẑ = -i e^{iξ²τ} b(ξ) ∫_τ^∞ e^{-iξ²σ} g(σ) dσ.
pub fn schrodinger_frozen_oracle(g: &TimeBump, b: f64, tau: f64, xi: f64) -> Option<C> {
    let int = g.sin4_fourier(-xi * xi, tau)?;
    Some(C::new(0.0, -1.0) * C::from_polar(1.0, xi * xi * tau) * b * int)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    pub sup_residual: f64,
    pub sup_source: f64,
    pub relative: f64,
    /// estimated cubic-interpolation error of the source, relative to its sup
    pub interp_error: f64,
}

fn fd_complex(v: &[C], h: f64) -> (Vec<C>, Vec<C>) {
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    let dr = uniform_derivatives(&re, h, 7);
    let di = uniform_derivatives(&im, h, 7);
    let d1 = dr.d1.iter().zip(&di.d1).map(|(a, b)| C::new(*a, *b)).collect();
    let d2 = dr.d2.iter().zip(&di.d2).map(|(a, b)| C::new(*a, *b)).collect();
    (d1, d2)
}

/// Interpolation-error estimate: cubic interpolation from every other ξ node, scaled by 2⁻⁴.
fn interp_error_estimate(f: &PropagatorField) -> f64 {
    let sup = f.sup().max(f64::MIN_POSITIVE);
    let h2 = 2.0 * f.xi.step;
    let mut worst: f64 = 0.0;
    for i in 0..f.time.n {
        let row = f.row(i);
        let coarse: Vec<C> = row.iter().step_by(2).cloned().collect();
        if coarse.len() < 4 {
            continue;
        }
        for j in (1..row.len() - 1).step_by(2) {
            let x = f.xi.at(j);
            if x >= h2 * (coarse.len() - 1) as f64 {
                break;
            }
            worst = worst.max((interp_cubic(&coarse, h2, x) - row[j]).norm());
        }
    }
    worst / 16.0 / sup
}

/// Finite-difference residual of -i(∂_τ - 2β - βξ∂_ξ)ẑ - ξ²ẑ - G on interior nodes.
pub fn schrodinger_residual(z: &PropagatorField, g: &PropagatorField) -> Result<ResidualReport, PropagatorError> {
    if z.time != g.time || z.xi != g.xi {
        return Err(PropagatorError::Grid("z and G differ".into()));
    }
    let (nt, nx) = (z.time.n, z.xi.n);
    let mut dt = vec![ZERO; nt * nx];
    for j in 0..nx {
        let col: Vec<C> = (0..nt).map(|i| z.get(i, j)).collect();
        let (d1, _) = fd_complex(&col, z.time.step);
        for i in 0..nt {
            dt[i * nx + j] = d1[i];
        }
    }
    let mut sup_res: f64 = 0.0;
    for i in 3..nt - 3 {
        let tau = z.time.at(i);
        let beta = z.clock.beta(tau);
        let (dx, _) = fd_complex(z.row(i), z.xi.step);
        for j in 3..nx - 3 {
            let xi = z.xi.at(j);
            let zz = z.get(i, j);
            let op = dt[i * nx + j] - 2.0 * beta * zz - beta * xi * dx[j];
            let res = C::new(0.0, -1.0) * op - xi * xi * zz - g.get(i, j);
            sup_res = sup_res.max(res.norm());
        }
    }
    let sup_source = g.sup();
    Ok(ResidualReport {
        sup_residual: sup_res,
        sup_source,
        relative: sup_res / sup_source.max(f64::MIN_POSITIVE),
        interp_error: interp_error_estimate(g),
    })
}

/// x = U(F): the solution of D̃²x + βD̃x + ξ²x = -λ⁻²F̂ vanishing at the horizon, with
/// D̃ = ∂ - β(ξ∂_ξ + 4), i.e.
/// x(τ̃,ξ) = -∫_τ̃^∞ (λ(τ̃)/λ(σ̃))³ sin[λ(τ̃)ξ∫_τ̃^σ̃ λ⁻¹]/ξ · λ⁻²(σ̃) F̂(σ̃, λ(τ̃)ξ/λ(σ̃)) dσ̃.
/// The input holds F̂ = F_{R⁴}(F) (not yet multiplied by λ⁻²).
pub fn wave_u(fhat: &PropagatorField) -> Result<PropagatorField, PropagatorError> {
    fhat.check_horizon()?;
    let clock = fhat.clock;
    let (nt, nx) = (fhat.time.n, fhat.xi.n);
    let ht = fhat.time.step;
    let hx = fhat.xi.step;
    let lam: Vec<f64> = (0..nt).map(|k| clock.lambda(fhat.time.at(k))).collect();
    let anti: Vec<f64> = (0..nt).map(|k| clock.inv_power_antiderivative(1.0, fhat.time.at(k))).collect();
    let active = fhat.active_rows();
    let rows: Vec<Vec<C>> = par::map_range(nt, |i| {
        let w = gregory_weights(nt - 1 - i);
        let mut out = vec![ZERO; nx];
        for (jj, o) in out.iter_mut().enumerate() {
            let xi = fhat.xi.at(jj);
            let mut acc = ZERO;
            for k in i..nt {
                if !active[k] {
                    continue;
                }
                let ratio = lam[i] / lam[k];
                let s = anti[k] - anti[i];
                let kern = if xi == 0.0 { lam[i] * s } else { (lam[i] * xi * s).sin() / xi };
                let fv = interp_cubic(fhat.row(k), hx, ratio * xi);
                acc += w[k - i] * ratio.powi(3) * kern / (lam[k] * lam[k]) * fv;
            }
            *o = -ht * acc;
        }
        out
    });
    let mut x = PropagatorField::zeros(&format!("U({})", fhat.label), clock, fhat.time, fhat.xi);
    for (i, r) in rows.into_iter().enumerate() {
        x.values[i * nx..(i + 1) * nx].copy_from_slice(&r);
    }
    Ok(x)
}

/// n(τ̃, R) = ∫ φ_{R⁴}(R;ξ) x(τ̃,ξ) ξ³ dξ on the radii `r`; returns rows per time slice.
pub fn hankel_synthesis(x: &PropagatorField, r: &[f64]) -> Vec<Vec<C>> {
    let nx = x.xi.n;
    let w = gregory_weights(nx - 1);
    let basis: Vec<Vec<f64>> = r
        .iter()
        .map(|&rr| {
            (0..nx)
                .map(|j| {
                    let xi = x.xi.at(j);
                    w[j] * x.xi.step * phi_r4(rr, xi) * xi * xi * xi
                })
                .collect()
        })
        .collect();
    par::map_range(x.time.n, |i| {
        let row = x.row(i);
        basis.iter().map(|b| b.iter().zip(row).map(|(bb, v)| *v * *bb).sum()).collect()
    })
}

/// Radial profile and time bump of a separable wave source F(τ̃, R) = g(τ̃) b(R).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSource {
    pub bump: TimeBump,
    /// b(R) = exp(-R²/(2 s²))
    pub width: f64,
}

impl WaveSource {
    pub fn profile(&self, r: f64) -> f64 {
        (-r * r / (2.0 * self.width * self.width)).exp()
    }

    /// F_{R⁴}(b) in closed form: s⁴ e^{-s²ξ²/2}.
    pub fn profile_hat_exact(&self, xi: f64) -> f64 {
        let s = self.width;
        s.powi(4) * (-0.5 * s * s * xi * xi).exp()
    }

    /// F̂ sampled on the grid, with the radial transform computed by quadrature.
    pub fn sampled_hat(&self, clock: Clock, time: UniformGrid, xi: UniformGrid) -> Result<PropagatorField, PropagatorError> {
        let s = self.width;
        let src = Analytic::new(move |r: f64| (-r * r / (2.0 * s * s)).exp(), None, 12.0 * s);
        let nodes = xi.nodes();
        let bh: Vec<Result<(f64, f64), _>> = par::map(&nodes, |&x| transform_at(&src, x));
        let mut bhat = Vec::with_capacity(nodes.len());
        for v in bh {
            bhat.push(v?.0);
        }
        let g = self.bump;
        Ok(PropagatorField::from_fn("F_hat", clock, time, xi, |t, x| {
            let j = ((x - xi.start) / xi.step).round() as usize;
            C::new(g.eval(t) * bhat[j], 0.0)
        }))
    }
}

/// Physical-space finite-difference residual of
/// -(∂+βR∂_R)²n - β(∂+βR∂_R)n + Δn - λ⁻²F on the radii window [r_a, r_b].
pub fn wave_residual(x: &PropagatorField, src: &WaveSource, r_grid: UniformGrid, r_a: f64, r_b: f64) -> ResidualReport {
    let r = r_grid.nodes();
    let n = hankel_synthesis(x, &r);
    let (nt, nr) = (x.time.n, r.len());
    let ht = x.time.step;
    let hr = r_grid.step;
    // time derivatives per radius
    let mut nt1 = vec![vec![ZERO; nr]; nt];
    let mut nt2 = vec![vec![ZERO; nr]; nt];
    for j in 0..nr {
        let col: Vec<C> = (0..nt).map(|i| n[i][j]).collect();
        let (d1, d2) = fd_complex(&col, ht);
        for i in 0..nt {
            nt1[i][j] = d1[i];
            nt2[i][j] = d2[i];
        }
    }
    let clock = x.clock;
    let mut sup_res: f64 = 0.0;
    let mut sup_src: f64 = 0.0;
    for i in 3..nt - 3 {
        let t = x.time.at(i);
        let beta = clock.beta(t);
        let dbeta = clock.beta_prime(t);
        let lam = clock.lambda(t);
        let (nr1, nr2) = fd_complex(&n[i], hr);
        let (ntr, _) = fd_complex(&nt1[i], hr);
        let g = src.bump.eval(t);
        for j in 3..nr - 3 {
            let rr = r[j];
            if rr < r_a || rr > r_b {
                continue;
            }
            let rn = rr * nr1[j];
            let dil2 = nt2[i][j] + dbeta * rn + 2.0 * beta * rr * ntr[j] + beta * beta * (rr * rr * nr2[j] + rn);
            let dil1 = nt1[i][j] + beta * rn;
            let lap = nr2[j] + 3.0 / rr * nr1[j];
            let f = g * src.profile(rr) / (lam * lam);
            let res = -dil2 - beta * dil1 + lap - f;
            sup_res = sup_res.max(res.norm());
            sup_src = sup_src.max(f.abs());
        }
    }
    ResidualReport {
        sup_residual: sup_res,
        sup_source: sup_src,
        relative: sup_res / sup_src.max(f64::MIN_POSITIVE),
        interp_error: 0.0,
    }
}

/// Frozen-λ oracle for U: x(τ,ξ) = -∫_τ^∞ sin(ξ(σ-τ))/ξ g(σ) b̂(ξ) dσ by adaptive quadrature.
pub fn wave_frozen_oracle(src: &WaveSource, tau: f64, xi: f64) -> f64 {
    let (a, b) = src.bump.support();
    let lo = tau.max(a);
    if lo >= b {
        return 0.0;
    }
    let bh = src.profile_hat_exact(xi);
    let g = src.bump;
    let mut f = |s: f64| {
        let k = if xi == 0.0 { s - tau } else { (xi * (s - tau)).sin() / xi };
        k * g.eval(s)
    };
    let q = adaptive(&mut f, lo, b, 1e-14, 1e-13, 200);
    -q.value * bh
}

/// Temporal mollifier Q_{<a} f(σ) = ∫ a χ̌(a(σ - s)) f(s) ds with χ = 1 on [-1, 1], 0 beyond
/// |ω| ≥ 2 and χ̌(t) = (1/2π) ∫ χ(ω) e^{iωt} dω. The convolution runs over |a(σ-s)| ≤ window.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub a: f64,
    pub window: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// χ(ω) = 1 - smooth_step(|ω| - 1).
pub fn mollifier_chi(omega: f64) -> f64 {
    1.0 - smooth_step(omega.abs() - 1.0)
}

/// χ̌(t) = (1/π)[sin t / t + ∫_1^2 χ(k) cos(kt) dk].
fn chi_check(t: f64, gl: &(Vec<f64>, Vec<f64>), panels: usize) -> f64 {
    let head = if t.abs() < 1e-8 { 1.0 - t * t / 6.0 } else { t.sin() / t };
    let (x, w) = gl;
    let h = 1.0 / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let c = 1.0 + (p as f64 + 0.5) * h;
        for (xx, ww) in x.iter().zip(w) {
            let k = c + 0.5 * h * xx;
            s += 0.5 * h * ww * mollifier_chi(k) * (k * t).cos();
        }
    }
    (head + s) / PI
}

impl Mollifier {
    pub fn new(a: f64, window: f64) -> Self {
        let gl = gauss_legendre(16);
        let panels_k = ((window / 2.0).ceil() as usize).max(16);
        let m = window.ceil() as usize;
        let breaks: Vec<f64> = (0..=2 * m).map(|i| -(m as f64) + i as f64).collect();
        let ns = NodeSet::panels(&breaks, 16);
        let half: Vec<f64> = ns.nodes.iter().map(|v| v.abs()).collect();
        let chk = par::map(&half, |&v| chi_check(v, &gl, panels_k));
        let weights = ns.weights.iter().zip(&chk).map(|(w, c)| w * c).collect();
        Mollifier {
            a,
            window: m as f64,
            nodes: ns.nodes,
            weights,
        }
    }

    pub fn apply<F: Fn(f64) -> C>(&self, f: F, sigma: f64) -> C {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| *w * f(sigma - v / self.a))
            .sum()
    }

    /// The sampled multiplier: Q e^{iωσ} / e^{iωσ}.
    pub fn multiplier(&self, omega: f64) -> C {
        self.apply(|s| C::from_polar(1.0, omega * s), 0.0)
    }
}

/// Q_{<a}f as a function.
pub fn q_mollifier<F: Fn(f64) -> C + Sync>(f: F, a: f64, window: f64) -> impl Fn(f64) -> C {
    let m = Mollifier::new(a, window);
    move |s| m.apply(&f, s)
}

/// Gaussian shell and its R∂_R image, for transference tests.
pub fn shell_pair(c: f64, s: f64) -> (TransformFn, TransformFn) {
    let f = TransformFn::gaussian(&format!("shell({c:.4},{s:.4})"), c, s);
    let rdf = TransformFn::new(
        &format!("RdR shell({c:.4},{s:.4})"),
        move |r| -r * (r - c) / (s * s) * (-(r - c) * (r - c) / (2.0 * s * s)).exp(),
        None,
        c + 10.0 * s,
    );
    (f, rdf)
}

#[derive(Debug, Clone, Serialize)]
pub struct Transference {
    pub op: OpKind,
    pub constant: f64,
    pub xi: Vec<f64>,
    pub fhat: Vec<f64>,
    /// K f̂ = F(R∂_R f) + ξ∂_ξ F(f) + c F(f) on the interior nodes
    pub k: Vec<f64>,
    pub rho: Vec<f64>,
    /// max |ξ∂_ξ F| difference between steps h and 2h, relative to sup|F|
    pub diff_noise: f64,
    pub noisy: bool,
    /// least-squares constant making K orthogonal to F in L²_ρ
    pub fitted_constant: f64,
}

impl Transference {
    pub fn sup_ratio(&self) -> f64 {
        let sk = self.k.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let sf = self.fhat.iter().map(|v| v.abs()).fold(0.0, f64::max);
        sk / sf
    }

    pub fn l2rho_ratio(&self) -> f64 {
        let nk: f64 = self.k.iter().zip(&self.rho).map(|(k, r)| k * k * r).sum();
        let nf: f64 = self.fhat.iter().zip(&self.rho).map(|(f, r)| f * f * r).sum();
        (nk / nf).sqrt()
    }
}

/// The transference identity on a uniform ξ-grid (ξ∂_ξ by 7-point differences).
pub fn apply_transference(op: OpKind, f: &TransformFn, rdf: &TransformFn, xi: UniformGrid, constant: f64, rtol: f64, noise_tol: f64) -> Result<Transference, PropagatorError> {
    let nodes = xi.nodes();
    let fh = distorted_transform(f, op, &nodes, rtol)?;
    let frd = distorted_transform(rdf, op, &nodes, rtol)?;
    let a = connection_coefficients(op, &nodes, rtol)?;
    let d = uniform_derivatives(&fh, xi.step, 7).d1;
    let coarse: Vec<f64> = fh.iter().step_by(2).cloned().collect();
    let dc = uniform_derivatives(&coarse, 2.0 * xi.step, 7).d1;
    let sup_f = fh.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut noise: f64 = 0.0;
    for (jc, v) in dc.iter().enumerate().skip(3).take(dc.len().saturating_sub(6)) {
        let j = 2 * jc;
        noise = noise.max(nodes[j] * (v - d[j]).abs());
    }
    noise /= sup_f;
    let idx: Vec<usize> = (3..nodes.len() - 3).collect();
    let rho: Vec<f64> = idx.iter().map(|&j| xi.step / (2.0 * PI * a[j].norm_sqr())).collect();
    let g: Vec<f64> = idx.iter().map(|&j| frd[j] + nodes[j] * d[j]).collect();
    let fi: Vec<f64> = idx.iter().map(|&j| fh[j]).collect();
    let num: f64 = g.iter().zip(&fi).zip(&rho).map(|((g, f), r)| g * f * r).sum();
    let den: f64 = fi.iter().zip(&rho).map(|(f, r)| f * f * r).sum();
    let k = g.iter().zip(&fi).map(|(g, f)| g + constant * f).collect();
    Ok(Transference {
        op,
        constant,
        xi: idx.iter().map(|&j| nodes[j]).collect(),
        fhat: fi,
        k,
        rho,
        diff_noise: noise,
        noisy: noise > noise_tol,
        fitted_constant: -num / den,
    })
}

/// Seeded Gaussian shells (centre, width) for transference tests.
pub fn random_shells(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.gen_range(1.5..4.0), rng.gen_range(0.5..0.9))).collect()
}

/// Regular solutions v(·;ξ) of L sampled on a radial node set.
struct RadialBasis {
    nodes: NodeSet,
}

impl RadialBasis {
    fn new(r_max: f64, panel: f64) -> Self {
        let n = (r_max / panel).ceil() as usize;
        let breaks: Vec<f64> = (0..=n).map(|i| r_max * i as f64 / n as f64).collect();
        RadialBasis {
            nodes: NodeSet::panels(&breaks, 16),
        }
    }

    fn solve(&self, op: OpKind, xi: f64, rtol: f64) -> Result<Vec<f64>, SpectralError> {
        Ok(regular_solution(op, xi, &self.nodes.nodes, rtol)?.into_iter().map(|(v, _)| v).collect())
    }
}

/// Pseudo-transference kernel F̃(ξ,η) = ⟨v(·;ξ), χ_{≲Λ} f v(·;η)⟩ for the operator `op` on
/// all pairs of the given frequencies, χ_{≲Λ}(R) = 1 - smooth_step(R/Λ - 1).
pub fn pseudo_kernel<F: Fn(f64) -> f64 + Sync>(op: OpKind, f: F, xis: &[f64], etas: &[f64], cutoff: f64, rtol: f64) -> Result<Vec<Vec<f64>>, PropagatorError> {
    let basis = RadialBasis::new(2.0 * cutoff, 0.5);
    let weight: Vec<f64> = basis
        .nodes
        .nodes
        .iter()
        .zip(&basis.nodes.weights)
        .map(|(&r, &w)| w * r * r * r * f(r) * (1.0 - smooth_step(r / cutoff - 1.0)))
        .collect();
    let vx: Vec<Result<Vec<f64>, SpectralError>> = par::map(xis, |&x| basis.solve(op, x, rtol));
    let vx: Vec<Vec<f64>> = vx.into_iter().collect::<Result<_, _>>()?;
    let ve: Vec<Result<Vec<f64>, SpectralError>> = par::map(etas, |&x| basis.solve(op, x, rtol));
    let ve: Vec<Vec<f64>> = ve.into_iter().collect::<Result<_, _>>()?;
    Ok(vx
        .iter()
        .map(|a| {
            let wa: Vec<f64> = a.iter().zip(&weight).map(|(x, w)| x * w).collect();
            ve.iter().map(|b| wa.iter().zip(b).map(|(x, y)| x * y).sum()).collect()
        })
        .collect())
}

/// Envelope min{|ξ-η|⁻¹, Λ}·⟨ξ-η⟩⁻³.
pub fn pseudo_envelope(xi: f64, eta: f64, cutoff: f64) -> f64 {
    let d = (xi - eta).abs();
    let m = if d > 0.0 { (1.0 / d).min(cutoff) } else { cutoff };
    m * (1.0 + d * d).powf(-1.5)
}

/// L¹_ρ row sum ∫ |F̃(ξ₀,η)| ρ(η) dη over η ∈ [η_lo, η_hi], with panels graded towards ξ₀ on
/// the scale 1/Λ.
pub fn pseudo_row_sum<F: Fn(f64) -> f64 + Sync>(op: OpKind, f: F, xi0: f64, cutoff: f64, eta_lo: f64, eta_hi: f64, rtol: f64) -> Result<f64, PropagatorError> {
    let mut breaks = vec![eta_lo, eta_hi, xi0];
    let mut d = 0.25 / cutoff;
    while d < (xi0 - eta_lo).max(eta_hi - xi0) {
        for b in [xi0 - d, xi0 + d] {
            if b > eta_lo && b < eta_hi {
                breaks.push(b);
            }
        }
        d *= 1.5;
    }
    let mut u = eta_lo + 0.25;
    while u < eta_hi {
        breaks.push(u);
        u += 0.25;
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let ns = NodeSet::panels(&breaks, 8);
    let k = pseudo_kernel(op, &f, &[xi0], &ns.nodes, cutoff, rtol)?;
    let a = connection_coefficients(op, &ns.nodes, rtol)?;
    Ok(k[0]
        .iter()
        .zip(&ns.weights)
        .zip(&a)
        .map(|((kv, w), a)| kv.abs() * w / (2.0 * PI * a.norm_sqr()))
        .sum())
}

/// Discretisation parameters of the propagator checks; none is fixed by the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorConfig {
    /// taken from the top-level ν of the run configuration
    #[serde(skip)]
    pub nu: f64,
    pub schr_t0: f64,
    pub schr_t1: f64,
    pub schr_support: [f64; 2],
    pub schr_dt: f64,
    pub schr_xi_max: f64,
    pub schr_dxi: f64,
    pub wave_t0: f64,
    pub wave_t1: f64,
    pub wave_support: [f64; 2],
    pub wave_dt: f64,
    pub wave_xi_max: f64,
    pub wave_dxi: f64,
    pub wave_width: f64,
    pub wave_r_max: f64,
    pub wave_dr: f64,
    pub wave_window: [f64; 2],
    pub mollifier_window: f64,
    pub transference_xi: [f64; 2],
    pub transference_dxi: f64,
    pub transference_bumps: usize,
    pub transference_noise_tol: f64,
    pub transference_constant: f64,
    pub pseudo_cutoffs: [f64; 4],
    pub rtol: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            nu: 8.0,
            schr_t0: 1.0,
            schr_t1: 2.0,
            schr_support: [1.2, 1.8],
            schr_dt: 0.004,
            schr_xi_max: 6.0,
            schr_dxi: 0.02,
            wave_t0: 1.0,
            wave_t1: 2.2,
            wave_support: [1.3, 1.9],
            wave_dt: 0.005,
            wave_xi_max: 16.0,
            wave_dxi: 0.02,
            wave_width: 1.0,
            wave_r_max: 8.0,
            wave_dr: 0.02,
            wave_window: [0.25, 6.0],
            mollifier_window: 400.0,
            transference_xi: [0.05, 6.0],
            transference_dxi: 0.02,
            transference_bumps: 10,
            transference_noise_tol: 1e-5,
            transference_constant: 4.0,
            pseudo_cutoffs: [8.0, 16.0, 32.0, 64.0],
            rtol: 1e-10,
        }
    }
}

/// Radial profile of the Schrödinger test source: b(ξ) = ξ² e^{-ξ²}.
pub fn schr_profile(xi: f64) -> f64 {
    xi * xi * (-xi * xi).exp()
}

impl PropagatorConfig {
    pub fn schr_grids(&self, refine: bool) -> (UniformGrid, UniformGrid) {
        let t = UniformGrid::covering(self.schr_t0, self.schr_t1, self.schr_dt);
        let x = UniformGrid::covering(0.0, self.schr_xi_max, self.schr_dxi);
        if refine {
            (t.refined(), x.refined())
        } else {
            (t, x)
        }
    }

    pub fn wave_grids(&self, refine: bool) -> (UniformGrid, UniformGrid, UniformGrid) {
        let t = UniformGrid::covering(self.wave_t0, self.wave_t1, self.wave_dt);
        let x = UniformGrid::covering(0.0, self.wave_xi_max, self.wave_dxi);
        let r = UniformGrid::covering(0.0, self.wave_r_max, self.wave_dr);
        if refine {
            (t.refined(), x.refined(), r.refined())
        } else {
            (t, x, r)
        }
    }

    pub fn schr_source(&self, refine: bool) -> PropagatorField {
        let (t, x) = self.schr_grids(refine);
        let g = TimeBump::Smooth {
            a: self.schr_support[0],
            b: self.schr_support[1],
        };
        separable_source("G", Clock::schrodinger(self.nu), t, x, &g, schr_profile)
    }

    pub fn wave_source(&self) -> WaveSource {
        WaveSource {
            bump: TimeBump::Smooth {
                a: self.wave_support[0],
                b: self.wave_support[1],
            },
            width: self.wave_width,
        }
    }
}

/// Residual oracles of both propagators at base and refined resolution.
#[derive(Debug, Clone, Serialize)]
pub struct PropagatorResiduals {
    pub schrodinger: [ResidualReport; 2],
    pub wave: [ResidualReport; 2],
}

pub fn propagator_residuals(cfg: &PropagatorConfig) -> Result<PropagatorResiduals, PropagatorError> {
    propagator_residuals_with_fields(cfg).map(|r| r.0)
}

/// As [`propagator_residuals`], also returning the base-resolution S(G) and U(F) fields.
pub fn propagator_residuals_with_fields(cfg: &PropagatorConfig) -> Result<(PropagatorResiduals, PropagatorField, PropagatorField), PropagatorError> {
    let mut s = vec![];
    let mut w = vec![];
    let mut fields = vec![];
    for refine in [false, true] {
        let g = cfg.schr_source(refine);
        let z = schrodinger_s(&g)?;
        s.push(schrodinger_residual(&z, &g)?);
        let (t, x, r) = cfg.wave_grids(refine);
        let src = cfg.wave_source();
        let fh = src.sampled_hat(Clock::wave(cfg.nu), t, x)?;
        let xx = wave_u(&fh)?;
        w.push(wave_residual(&xx, &src, r, cfg.wave_window[0], cfg.wave_window[1]));
        if !refine {
            fields.push(z);
            fields.push(xx);
        }
    }
    let wave_field = fields.pop().unwrap();
    let schr_field = fields.pop().unwrap();
    let res = PropagatorResiduals {
        schrodinger: [s[0], s[1]],
        wave: [w[0], w[1]],
    };
    Ok((res, schr_field, wave_field))
}

impl PropagatorResiduals {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# propagator residuals: equation resolution sup_residual sup_source relative interp_error");
        for (name, r) in [("schrodinger", &self.schrodinger), ("wave", &self.wave)] {
            for (k, x) in r.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{name} {} {:.6e} {:.6e} {:.6e} {:.6e}",
                    if k == 0 { "base" } else { "refined" },
                    x.sup_residual,
                    x.sup_source,
                    x.relative,
                    x.interp_error
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_schr() -> PropagatorConfig {
        PropagatorConfig {
            schr_dt: 0.008,
            schr_dxi: 0.04,
            ..Default::default()
        }
    }

    #[test]
    fn clocks_match_profile_time_maps() {
        let nu = 8.0;
        for t in [0.5, 1.0, 3.0] {
            let s = Clock::schrodinger(nu);
            assert!((s.lambda(t) / crate::profiles::lambda_of_tau(t, nu) - 1.0).abs() < 1e-13);
            let w = Clock::wave(nu);
            assert!((w.lambda(t) / crate::profiles::lambda_of_tau_tilde(t, nu) - 1.0).abs() < 1e-13);
            let h = 1e-5;
            let d = (s.inv_power_antiderivative(2.0, t + h) - s.inv_power_antiderivative(2.0, t - h)) / (2.0 * h);
            assert!((d * s.lambda(t).powi(2) - 1.0).abs() < 1e-8);
            let db = (w.lambda(t + h).ln() - w.lambda(t - h).ln()) / (2.0 * h);
            assert!((db - w.beta(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn schrodinger_zero_linear_and_vanishing_at_horizon() {
        let cfg = small_schr();
        let g = cfg.schr_source(false);
        let zero = PropagatorField::zeros("0", g.clock, g.time, g.xi);
        assert_eq!(schrodinger_s(&zero).unwrap().sup(), 0.0);
        let g2 = PropagatorField::from_fn("G2", g.clock, g.time, g.xi, |t, x| {
            C::new(0.0, TimeBump::Smooth { a: 1.3, b: 1.7 }.eval(t) * (-(x - 1.0).powi(2)).exp())
        });
        let a = C::new(0.7, -0.2);
        let b = C::new(-1.3, 0.4);
        let lhs = schrodinger_s(&g.lin(a, &g2, b)).unwrap();
        let rhs = schrodinger_s(&g).unwrap().lin(a, &schrodinger_s(&g2).unwrap(), b);
        let d = lhs.lin(C::new(1.0, 0.0), &rhs, C::new(-1.0, 0.0)).sup();
        assert!(d < 1e-10 * lhs.sup(), "{d}");
        let z = schrodinger_s(&g).unwrap();
        assert!(z.row(z.time.n - 1).iter().all(|v| *v == ZERO));
    }

    #[test]
    fn schrodinger_frozen_matches_closed_form() {
        let cfg = small_schr();
        let (t, x) = cfg.schr_grids(false);
        let bump = TimeBump::Sin4 { a: 1.2, b: 1.8 };
        let g = separable_source("G", Clock::Frozen, t, x, &bump, schr_profile);
        let z = schrodinger_s(&g).unwrap();
        let mut err: f64 = 0.0;
        for i in (0..t.n).step_by(7) {
            for j in (0..x.n).step_by(5) {
                let o = schrodinger_frozen_oracle(&bump, schr_profile(x.at(j)), t.at(i), x.at(j)).unwrap();
                err = err.max((z.get(i, j) - o).norm());
            }
        }
        assert!(err < 1e-6 * z.sup(), "{err} {}", z.sup());
    }

    #[test]
    fn horizon_check_rejects_late_sources() {
        let cfg = small_schr();
        let (t, x) = cfg.schr_grids(false);
        let g = separable_source("G", Clock::Frozen, t, x, &TimeBump::Smooth { a: 1.5, b: 2.5 }, schr_profile);
        assert!(matches!(schrodinger_s(&g), Err(PropagatorError::HorizonTooShort(_))));
    }

    #[test]
    fn wave_source_transform_matches_closed_form() {
        let cfg = PropagatorConfig::default();
        let src = cfg.wave_source();
        let (t, x, _) = cfg.wave_grids(false);
        let fh = src.sampled_hat(Clock::Frozen, t, x).unwrap();
        let i = t.n / 2;
        let g = src.bump.eval(t.at(i));
        for j in (0..x.n).step_by(37) {
            let e = src.profile_hat_exact(x.at(j)) * g;
            assert!((fh.get(i, j).re - e).abs() < 1e-9, "{} {} {e}", x.at(j), fh.get(i, j).re);
        }
    }

    #[test]
    fn wave_frozen_matches_duhamel_oracle() {
        let cfg = PropagatorConfig {
            wave_dt: 0.01,
            wave_dxi: 0.04,
            ..Default::default()
        };
        let src = cfg.wave_source();
        let (t, x, _) = cfg.wave_grids(false);
        let fh = src.sampled_hat(Clock::Frozen, t, x).unwrap();
        let xx = wave_u(&fh).unwrap();
        let mut err: f64 = 0.0;
        for i in (0..t.n).step_by(9) {
            for j in (0..x.n).step_by(13) {
                err = err.max((xx.get(i, j).re - wave_frozen_oracle(&src, t.at(i), x.at(j))).abs());
            }
        }
        assert!(err < 1e-6 * xx.sup(), "{err} {}", xx.sup());
        assert!(xx.values.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn mollifier_reproduces_the_multiplier() {
        let m = Mollifier::new(3.0, 400.0);
        assert!((m.apply(|_| C::new(1.0, 0.0), 0.7) - 1.0).norm() < 1e-10);
        for omega in [0.0, 1.0, -2.5, 3.0] {
            assert!((m.multiplier(omega) - 1.0).norm() < 1e-10, "{omega}");
        }
        for omega in [6.0, -7.5, 12.0] {
            assert!(m.multiplier(omega).norm() < 1e-10, "{omega}");
        }
        let mid = m.multiplier(4.5);
        assert!((mid.re - mollifier_chi(1.5)).abs() < 1e-10 && mid.im.abs() < 1e-10);
    }
}
