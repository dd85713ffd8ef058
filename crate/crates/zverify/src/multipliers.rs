//! Principal-value quadrature and the temporal Fourier multipliers: the Schrödinger
//! multiplier built from ρ₁, β₁, β₂, the assembled β̃ and β_*, c₃, and the oscillatory
//! principal-value integral g_a.

use crate::certificate::{floor_error, CertValue, Certificate};
use crate::hankel::{hankel_forward, nv2_g_scaled, Analytic, HankelError, RootReport};
use crate::par;
use crate::profiles::{eval_lambda_w, eval_w, lambda_w_tail, w_tail};
use crate::quad::{adaptive, gk15, NodeSet};
use crate::special::{bessel_k0_scaled, bessel_k1_scaled};
use crate::spectral::{connection_coefficients, spectral_measure, OpKind, SmallXiFit, SpectralConfig, SpectralError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MultiplierError {
    #[error("integrand is not Hölder at the singular point {tau} (remainder ratio {ratio:.3e})")]
    NonHolder { tau: f64, ratio: f64 },
    #[error("non-finite integrand value at {0}")]
    NonFinite(f64),
    #[error("upper limit {upper} must exceed twice the singular point {tau} when a power tail is given")]
    Upper { upper: f64, tau: f64 },
    #[error("beta2 vanishes on the support of c3 near {0}")]
    Division(f64),
    #[error("spectral: {0}")]
    Spectral(#[from] SpectralError),
    #[error("hankel: {0}")]
    Hankel(#[from] HankelError),
}

/// g(ξ) = c ξ^-p for ξ beyond the upper limit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerTail {
    pub c: f64,
    pub p: f64,
}

impl PowerTail {
    /// ∫_U^∞ c ξ^-p / (τ² - ξ²) dξ for U > τ, as a series in (τ/U)².
    fn integral(&self, tau: f64, u: f64) -> f64 {
        let q = (tau / u).powi(2);
        let mut s = 0.0;
        let mut t = 1.0;
        for k in 0..400 {
            let term = t / (self.p + 2.0 * k as f64 + 1.0);
            s += term;
            if term < 1e-17 * s {
                break;
            }
            t *= q;
        }
        -self.c * u.powf(-self.p - 1.0) * s
    }
}

/// Quadrature parameters of a principal-value integral over (0, ∞).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PvOptions {
    /// computational upper limit; g is either negligible beyond it or given by `tail`
    pub upper: f64,
    pub tail: Option<PowerTail>,
    /// smallest breakpoint, relative to max(τ, 1)
    pub lo_rel: f64,
    pub abs_tol: f64,
}

impl PvOptions {
    pub fn new(upper: f64) -> Self {
        PvOptions {
            upper,
            tail: None,
            lo_rel: 1e-12,
            abs_tol: 1e-15,
        }
    }

    pub fn with_tail(mut self, c: f64, p: f64) -> Self {
        self.tail = Some(PowerTail { c, p });
        self
    }
}

/// PV∫_0^∞ g(ξ)/(τ² - ξ²) dξ by subtraction, with ε-stable error estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PvIntegral {
    pub tau: f64,
    pub value: f64,
    pub error: f64,
    pub g_tau: f64,
    /// |remainder| at distance 1e-5 τ over |remainder| at 1e-3 τ; ~1 for smooth g
    pub holder_ratio: f64,
}

const HOLDER_LIMIT: f64 = 50.0;

/// Breakpoints on [0, U]: geometric through the origin region, uniform at unit scale,
/// geometric towards U, with τ inserted.
fn pv_breaks(tau: f64, opt: &PvOptions, cut: Option<f64>) -> Vec<f64> {
    let u = opt.upper;
    let scale = tau.max(1.0);
    let lo = opt.lo_rel * scale.min(if tau > 0.0 { tau } else { 1.0 }).max(1e-300);
    let mut b = vec![0.0];
    let mut x = lo.min(u / 2.0);
    while x < u {
        b.push(x);
        x *= 2f64.powf(0.25);
    }
    let mut y = 0.25;
    while y < u.min(64.0) {
        b.push(y);
        y += 0.25;
    }
    if tau > 0.0 && tau < u {
        match cut {
            None => {
                b.push(tau);
                b.push(tau * (1.0 - 1e-4));
                b.push(tau * (1.0 + 1e-4));
            }
            Some(e) => {
                let mut k = 0;
                loop {
                    let d = e * 2f64.powi(k);
                    if d > 0.5 * tau || d > 0.5 * (u - tau) {
                        break;
                    }
                    b.push(tau - d);
                    b.push(tau + d);
                    k += 1;
                }
            }
        }
    }
    b.push(u);
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    b.dedup_by(|a, c| (*a - *c).abs() <= 1e-13 * c.abs().max(1e-300));
    if let Some(e) = cut {
        // drop breaks inside the excised window
        b.retain(|&x| (x - tau).abs() >= e * (1.0 - 1e-12));
    }
    b
}

fn integrate_panels<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], abs_tol: f64, skip: Option<(f64, f64)>) -> (f64, f64) {
    let mut v = 0.0;
    let mut e = 0.0;
    for w in breaks.windows(2) {
        if let Some((a, c)) = skip {
            if w[0] >= a && w[1] <= c {
                continue;
            }
        }
        let r = adaptive(f, w[0], w[1], abs_tol, 1e-13, 200);
        v += r.value;
        e += r.error;
    }
    (v, e)
}

pub fn pv_integral<F: Fn(f64) -> f64>(g: F, tau: f64, opt: &PvOptions) -> Result<PvIntegral, MultiplierError> {
    let u = opt.upper;
    let tau = tau.abs();
    if let Some(_t) = opt.tail {
        if u < 2.0 * tau {
            return Err(MultiplierError::Upper { upper: u, tau });
        }
    }
    if tau == 0.0 || tau >= u {
        // no singular point inside the computational range
        let f = |x: f64| if x == 0.0 { 0.0 } else { g(x) / (tau * tau - x * x) };
        let (mut v, e) = integrate_panels(&f, &pv_breaks(tau, opt, None), opt.abs_tol, None);
        if !v.is_finite() {
            return Err(MultiplierError::NonFinite(tau));
        }
        if let Some(t) = opt.tail {
            v += t.integral(tau, u);
        }
        return Ok(PvIntegral {
            tau,
            value: v,
            error: floor_error(e, v),
            g_tau: if tau < u { g(tau) } else { 0.0 },
            holder_ratio: 1.0,
        });
    }
    let gt = g(tau);
    if !gt.is_finite() {
        return Err(MultiplierError::NonFinite(tau));
    }
    let q_raw = |x: f64| (g(x) - gt) / ((tau - x) * (tau + x));
    let near = |d: f64| q_raw(tau + d).abs().max(q_raw(tau - d).abs());
    let (q1, q2) = (near(1e-3 * tau), near(1e-5 * tau));
    let holder_ratio = if q1 > 1e-300 { q2 / q1 } else { 1.0 };
    if holder_ratio > HOLDER_LIMIT {
        return Err(MultiplierError::NonHolder { tau, ratio: holder_ratio });
    }
    // inside |ξ-τ| < δ the difference quotient is dominated by rounding; the remainder is
    // smooth there, so use its linear interpolant between τ ± δ
    let d = 1e-4 * tau;
    let (qm, qp) = (q_raw(tau - d), q_raw(tau + d));
    let q = |x: f64| {
        if (x - tau).abs() < d {
            qm + (qp - qm) * (x - tau + d) / (2.0 * d)
        } else {
            q_raw(x)
        }
    };
    let (rem, e) = integrate_panels(&q, &pv_breaks(tau, opt, None), opt.abs_tol, None);
    let mut v = rem + gt * ((u + tau) / (u - tau)).ln() / (2.0 * tau);
    if let Some(t) = opt.tail {
        v += t.integral(tau, u);
    }
    if !v.is_finite() {
        return Err(MultiplierError::NonFinite(tau));
    }
    Ok(PvIntegral {
        tau,
        value: v,
        error: floor_error(e + 64.0 * f64::EPSILON * gt.abs() / tau + (qp - qm).abs() * d, v),
        g_tau: gt,
        holder_ratio,
    })
}

/// Symmetric excision ∫_{|ξ-τ|>ε} g/(τ²-ξ²), plus the tail.
pub fn pv_excised<F: Fn(f64) -> f64>(g: &F, tau: f64, eps: f64, opt: &PvOptions) -> f64 {
    let f = |x: f64| g(x) / ((tau - x) * (tau + x));
    let b = pv_breaks(tau, opt, Some(eps));
    let (mut v, _) = integrate_panels(&f, &b, opt.abs_tol, Some((tau - eps, tau + eps)));
    if let Some(t) = opt.tail {
        v += t.integral(tau, opt.upper);
    }
    v
}

/// Excision oracle: E(ε) = PV + 2h'(τ)ε + O(ε³), h = g/(τ+ξ); two Richardson levels.
#[derive(Debug, Clone, Serialize)]
pub struct ExcisionLimit {
    pub levels: Vec<(f64, f64)>,
    pub extrapolated: f64,
    pub error: f64,
}

pub fn pv_excision_limit<F: Fn(f64) -> f64>(g: F, tau: f64, eps0: f64, opt: &PvOptions) -> ExcisionLimit {
    let eps = [eps0, eps0 / 2.0, eps0 / 4.0, eps0 / 8.0];
    let e: Vec<f64> = eps.iter().map(|&x| pv_excised(&g, tau, x, opt)).collect();
    let r1: Vec<f64> = (0..3).map(|i| 2.0 * e[i + 1] - e[i]).collect();
    let r2: Vec<f64> = (0..2).map(|i| (8.0 * r1[i + 1] - r1[i]) / 7.0).collect();
    ExcisionLimit {
        levels: eps.iter().copied().zip(e.iter().copied()).collect(),
        extrapolated: r2[1],
        error: (r2[1] - r2[0]).abs(),
    }
}

/// Smooth step: 0 for t ≤ 0, 1 for t ≥ 1, C^∞ in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |s: f64| (-1.0 / s).exp();
    f(t) / (f(t) + f(1.0 - t))
}

/// ρ₁: the spectral measure of L on (0, 1], ξ^-2 on [2, ∞), blended by a smooth step on [1, 2].
#[derive(Debug, Clone)]
pub struct Rho1 {
    ln_lo: f64,
    dln: f64,
    ln_rho: Vec<f64>,
    pub fit: SmallXiFit,
    pub xi_lo: f64,
    pub kappa_cal: f64,
}

const RHO1_PER_DECADE: usize = 32;

impl Rho1 {
    pub fn build(cfg: &SpectralConfig) -> Result<Self, MultiplierError> {
        let data = spectral_measure(OpKind::L, cfg, &[])?;
        let xi_lo = cfg.xi_min;
        let ln_lo = xi_lo.ln();
        let dln = std::f64::consts::LN_10 / RHO1_PER_DECADE as f64;
        let n = ((2.5f64.ln() - ln_lo) / dln).ceil() as usize + 1;
        let xi: Vec<f64> = (0..n).map(|i| (ln_lo + i as f64 * dln).exp()).collect();
        let a = connection_coefficients(OpKind::L, &xi, cfg.rtol)?;
        let ln_rho = a.iter().map(|a| (data.kappa_cal / (2.0 * PI * a.norm_sqr())).ln()).collect();
        Ok(Rho1 {
            ln_lo,
            dln,
            ln_rho,
            fit: data.small_xi,
            xi_lo,
            kappa_cal: data.kappa_cal,
        })
    }

    /// ρ of L: cubic interpolation of ln ρ in ln ξ, the small-ξ model below the table.
    pub fn rho(&self, xi: f64) -> f64 {
        if xi < self.xi_lo {
            return self.fit.eval(xi);
        }
        let s = (xi.ln() - self.ln_lo) / self.dln;
        let n = self.ln_rho.len();
        let i0 = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let mut v = 0.0;
        for j in 0..4 {
            let mut l = 1.0;
            for k in 0..4 {
                if k != j {
                    l *= (s - (i0 + k) as f64) / (j as f64 - k as f64);
                }
            }
            v += l * self.ln_rho[i0 + j];
        }
        v.exp()
    }

    pub fn eval(&self, xi: f64) -> f64 {
        if xi <= 1.0 {
            return self.rho(xi);
        }
        if xi >= 2.0 {
            return 1.0 / (xi * xi);
        }
        let c = smooth_step(xi - 1.0);
        (1.0 - c) * self.rho(xi) + c / (xi * xi)
    }
}

/// Constants and cutoffs of the multiplier pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplierConfig {
    pub c1: f64,
    /// sign convention of the principal-value term; ±1/2 across the two lemmas
    pub c2: f64,
    /// taken from the top-level ν of the run configuration
    #[serde(skip)]
    pub nu: f64,
    /// β̃ transition starts at γ^-1 and ends at 2γ^-1
    pub gamma_inv: f64,
    pub c3_radius: f64,
    pub osc_a: f64,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        MultiplierConfig {
            c1: PI / 2.0,
            c2: 0.5,
            nu: 8.0,
            gamma_inv: 2.0,
            c3_radius: 1.0,
            osc_a: 0.25,
        }
    }
}

impl MultiplierConfig {
    /// c(ν) in cΛ(ΛW W) = λ^-2 t∂_t(λ² ΛW(λr)W(λr)) with λ = t^(-1/2-ν).
    pub fn c_nu(&self) -> f64 {
        -(0.5 + self.nu)
    }

    pub fn with_c2(self, c2: f64) -> Self {
        MultiplierConfig { c2, ..self }
    }
}

/// Schrödinger multiplier m(τ̂) = c₁√|τ̂|ρ₁(√|τ̂|) + i c₂ PV∫ τ̂√ξ₁ρ₁(√ξ₁)/(τ̂²-ξ₁²) dξ₁.
pub fn schrodinger_multiplier(rho1: &Rho1, tau: f64, c1: f64, c2: f64) -> Result<(Complex64, f64), MultiplierError> {
    let t = tau.abs();
    let g = |x: f64| x.sqrt() * rho1.eval(x.sqrt());
    let opt = PvOptions::new((4.0 * t).max(4.0)).with_tail(1.0, 0.5);
    let pv = pv_integral(g, t, &opt)?;
    let re = c1 * t.sqrt() * rho1.eval(t.sqrt());
    let im = c2 * tau * pv.value;
    Ok((Complex64::new(re, im), (c2 * tau * pv.error).abs()))
}

/// F_{R^4}(W²)(ξ) = 32 K0(√8 ξ).
pub fn f_w2(xi: f64) -> f64 {
    let x = 8f64.sqrt() * xi;
    32.0 * bessel_k0_scaled(x) * (-x).exp()
}

fn g_and_dg(t: f64) -> (f64, f64) {
    let e = (-2.0 * t).exp();
    let k0 = bessel_k0_scaled(2.0 * t) * e;
    let k1 = bessel_k1_scaled(2.0 * t) * e;
    (t * k1 - k0, 2.0 * k1 - 2.0 * t * k0)
}

/// F_{R^4}(ΛW·W)(ξ) = 32 G(√2 ξ), G(t) = t K1(2t) - K0(2t).
pub fn f_lww(xi: f64) -> f64 {
    32.0 * nv2_g_scaled(2f64.sqrt() * xi) * (-2.0 * 2f64.sqrt() * xi).exp()
}

/// F_{R^4}((2 + R∂_R)(ΛW·W)) = -(2 + ξ∂_ξ) F(ΛW·W).
pub fn f_llww(xi: f64) -> f64 {
    let t = 2f64.sqrt() * xi;
    let (g, dg) = g_and_dg(t);
    -32.0 * (2.0 * g + t * dg)
}

/// F(W²) F(ΛW W) ξ³
pub fn g2(xi: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    f_w2(xi) * f_lww(xi) * xi.powi(3)
}

/// F(W²) F((2 + R∂_R)(ΛW W)) ξ³
pub fn g1(xi: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    f_w2(xi) * f_llww(xi) * xi.powi(3)
}

const PRODUCT_UPPER: f64 = 12.0;

fn product_multiplier<F: Fn(f64) -> f64>(g: F, tau: f64, c1: f64, c2: f64) -> Result<(Complex64, f64), MultiplierError> {
    let t = tau.abs();
    let opt = PvOptions::new(PRODUCT_UPPER.max(2.0 * t));
    let pv = pv_integral(&g, t, &opt)?;
    let im = if tau == 0.0 { 0.0 } else { c1 * g(t) / tau };
    Ok((Complex64::new(-c2 * pv.value, im), (c2 * pv.error).abs()))
}

/// β₂(τ̂) = i c₁ F(W²)F(ΛW W)ρ/τ̂ - c₂ PV∫ F(W²)F(ΛW W)ρ/(τ̂² - ξ²) dξ.
pub fn beta2(tau: f64, cfg: &MultiplierConfig) -> Result<(Complex64, f64), MultiplierError> {
    product_multiplier(g2, tau, cfg.c1, cfg.c2)
}

/// β₁(τ̂, ν): as β₂ with ΛW W replaced by c(ν)(2 + R∂_R)(ΛW W).
pub fn beta1(tau: f64, cfg: &MultiplierConfig) -> Result<(Complex64, f64), MultiplierError> {
    let (v, e) = product_multiplier(g1, tau, cfg.c1, cfg.c2)?;
    Ok((v * cfg.c_nu(), e * cfg.c_nu().abs()))
}

/// β̃ = (1-χ)β₂ + χ(-τ̂²β₂ - α_* τ̂^-2), χ a real smooth step over [γ^-1, 2γ^-1].
pub fn beta_tilde(tau: f64, alpha_star: f64, cfg: &MultiplierConfig) -> Result<(Complex64, f64), MultiplierError> {
    let (b2, e) = beta2(tau, cfg)?;
    let chi = smooth_step(tau.abs() / cfg.gamma_inv - 1.0);
    let mut v = b2 * (1.0 - chi);
    let mut err = e * (1.0 - chi);
    if chi > 0.0 {
        v += (b2 * (-tau * tau) - alpha_star / (tau * tau)) * chi;
        err += e * tau * tau * chi;
    }
    Ok((v, err))
}

pub fn beta_star(tau: f64, alpha_star: f64, cfg: &MultiplierConfig) -> Result<(Complex64, f64), MultiplierError> {
    let (b, e) = beta_tilde(tau, alpha_star, cfg)?;
    Ok((b.inv(), e / b.norm_sqr()))
}

fn c3_cutoff(tau: f64, radius: f64) -> f64 {
    1.0 - smooth_step(tau.abs() / radius - 1.0)
}

/// c₃ = χ_{|τ̂|≲r} β₁/β₂, supported in |τ̂| < 2r.
pub fn compute_c3(tau: f64, cfg: &MultiplierConfig) -> Result<Complex64, MultiplierError> {
    let chi = c3_cutoff(tau, cfg.c3_radius);
    if chi == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (b1, _) = beta1(tau, cfg)?;
    let (b2, e2) = beta2(tau, cfg)?;
    if b2.norm() <= 10.0 * e2 {
        return Err(MultiplierError::Division(tau));
    }
    Ok(b1 / b2 * chi)
}

/// g_a(ξ, κ) = PV∫_{-aξ}^{aξ} e^{i(η²+2ξη)κ}/η dη = ∫_0^{aξ} 2i e^{iη²κ} sin(2ξηκ)/η dη.
/// Split at min{(ξκ)^-1, aξ}; the outer part uses panels shorter than a local period.
pub fn osc_pv(xi: f64, kappa: f64, a: f64, density: f64) -> Complex64 {
    if kappa == 0.0 || xi == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let top = a * xi;
    let split = (1.0 / (xi * kappa)).min(top);
    let f = |eta: f64| {
        let s = if eta == 0.0 { 2.0 * xi * kappa } else { (2.0 * xi * eta * kappa).sin() / eta };
        Complex64::new(0.0, 2.0 * s) * Complex64::from_polar(1.0, eta * eta * kappa)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    let inner = (8.0 * density).ceil() as usize;
    let mut ff = f;
    for i in 0..inner {
        let a0 = split * i as f64 / inner as f64;
        let b0 = split * (i + 1) as f64 / inner as f64;
        acc += gk15(&mut ff, a0, b0).0;
    }
    if top > split {
        // local angular frequency bounded by 2κ(η + ξ)
        let mut x = split;
        while x < top {
            let w = (PI / (2.0 * kappa * (x + xi) * density)).min(top - x).min(x.max(split));
            acc += gk15(&mut ff, x, x + w).0;
            x += w;
        }
    }
    acc
}

/// A complex multiplier on a symmetric τ̂ grid with its conjugation-symmetry residual.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplierTable {
    pub name: String,
    pub tau: Vec<f64>,
    pub values: Vec<[f64; 2]>,
    /// max |m(-τ̂) - conj m(τ̂)| / max(|m(τ̂)|, tiny)
    pub conj_residual: f64,
}

impl MultiplierTable {
    /// Sample m at ±τ̂ for each positive τ̂.
    pub fn build<F>(name: &str, taus: &[f64], m: F) -> Result<Self, MultiplierError>
    where
        F: Fn(f64) -> Result<Complex64, MultiplierError> + Sync,
    {
        let mut pts: Vec<f64> = taus.iter().rev().map(|t| -t).collect();
        pts.extend_from_slice(taus);
        let vals: Vec<Result<Complex64, MultiplierError>> = par::map(&pts, |&t| m(t));
        let vals: Vec<Complex64> = vals.into_iter().collect::<Result<_, _>>()?;
        let n = taus.len();
        let mut res: f64 = 0.0;
        for i in 0..n {
            let neg = vals[n - 1 - i];
            let pos = vals[n + i];
            res = res.max((neg - pos.conj()).norm() / pos.norm().max(1e-300));
        }
        Ok(MultiplierTable {
            name: name.to_string(),
            tau: pts,
            values: vals.iter().map(|v| [v.re, v.im]).collect(),
            conj_residual: res,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# multiplier {} conj_residual={:.3e}", self.name, self.conj_residual);
        let _ = writeln!(s, "# tau re im");
        for (t, v) in self.tau.iter().zip(&self.values) {
            let _ = writeln!(s, "{:.12e} {:.12e} {:.12e}", t, v[0], v[1]);
        }
        s
    }
}

/// Geometric τ̂ grid with `per_decade` points per decade on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).round() as usize;
    (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect()
}

/// |m(τ̂)| log²|τ̂| on a small-frequency scan.
#[derive(Debug, Clone, Serialize)]
pub struct LogBracket {
    pub tau: Vec<f64>,
    pub normalized: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// smallest B with all values in [B0/B, B0·B], B0 the geometric mean of min and max
    pub bracket: f64,
}

pub fn schrodinger_log_bracket(rho1: &Rho1, cfg: &MultiplierConfig, lo: f64, hi: f64) -> Result<LogBracket, MultiplierError> {
    let tau = log_grid(lo, hi, 8);
    let vals: Vec<Result<f64, MultiplierError>> = par::map(&tau, |&t| {
        let (m, _) = schrodinger_multiplier(rho1, t, cfg.c1, cfg.c2)?;
        Ok(m.norm() * t.ln().powi(2))
    });
    let normalized: Vec<f64> = vals.into_iter().collect::<Result<_, _>>()?;
    let min = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = normalized.iter().cloned().fold(0.0, f64::max);
    Ok(LogBracket {
        tau,
        normalized,
        min,
        max,
        bracket: (max / min).sqrt(),
    })
}

/// Numerical oracle for (C2): β₂(τ̂_*) from transforms sampled on a Gauss-Legendre grid
/// with τ̂_* as a breakpoint.
pub fn beta2_numerical(tau: f64, c2: f64, h: f64, gl: usize) -> Result<f64, MultiplierError> {
    let mut b = vec![0.0, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2];
    let mut x = 0.25;
    while x < PRODUCT_UPPER {
        b.push(x);
        x += h;
    }
    b.push(PRODUCT_UPPER);
    b.push(tau);
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-12);
    let nodes = NodeSet::panels(&b, gl);
    let w2 = Analytic::new(|r: f64| eval_w(r).powi(2), Some(w_tail().mul(&w_tail(), 40.0)), 60.0).with_scale(1.0);
    let lww = Analytic::new(
        |r: f64| eval_lambda_w(r) * eval_w(r),
        Some(lambda_w_tail().mul(&w_tail(), 40.0)),
        60.0,
    )
    .with_scale(1.0);
    let a = hankel_forward(&w2, &nodes)?;
    let c = hankel_forward(&lww, &nodes)?;
    let mut s = 0.0;
    for i in 0..nodes.len() {
        let x = nodes.nodes[i];
        s += nodes.weights[i] * a.values[i] * c.values[i] * x.powi(3) / (tau * tau - x * x);
    }
    Ok(-c2 * s)
}

/// (C2): Re β₂(τ̂_*) ≠ 0, emitted for both signs of c₂.
pub fn check_c2(root: &RootReport, cfg: &MultiplierConfig, threshold: f64) -> Certificate {
    let tau = root.xi_star_w;
    let emit = |c2: f64| -> Result<Certificate, MultiplierError> {
        let c = cfg.with_c2(c2);
        let (b, e) = beta2(tau, &c)?;
        let num = beta2_numerical(tau, c2, 0.25, 10)?;
        let num2 = beta2_numerical(tau, c2, 0.125, 10)?;
        // root position uncertainty enters through dβ₂/dτ̂
        let (bp, _) = beta2(tau * (1.0 + 1e-6), &c)?;
        let droot = ((bp.re - b.re) / (tau * 1e-6)).abs() * (root.bracket.1 - root.bracket.0).abs();
        let err = floor_error(e + (b.re - num).abs().max((num - num2).abs()) + droot, b.re);
        Ok(Certificate::real("C2", b.re, err, 0.0, threshold)
            .note(format!("c2={c2}: Re beta2(tau*)={:.12e} numerical-transform oracle={:.12e}", b.re, num))
            .note(format!("Im beta2(tau*)={:.3e} (vanishes at the root)", b.im)))
    };
    let a = emit(cfg.c2.abs());
    let b = emit(-cfg.c2.abs());
    match (a, b) {
        (Ok(p), Ok(m)) => {
            let mut c = p.clone();
            c.notes.push(format!("tau*={:.15e}", tau));
            c.notes.push(format!(
                "c2=-1/2 variant: value={:.12e} error={:.2e} margin={:.3e} verdict={:?}",
                m.value.re(),
                m.error,
                m.margin,
                m.verdict
            ));
            c.notes.extend(m.notes.iter().cloned());
            if !m.passed() {
                c = c.fail_with("c2=-1/2 variant fails");
            }
            c
        }
        (Err(e), _) | (_, Err(e)) => Certificate::failed("C2", &e.to_string()),
    }
}

/// Low- and high-frequency anchors of β̃ and β_*.
#[derive(Debug, Clone, Serialize)]
pub struct BetaAnchors {
    pub beta_star_low: [f64; 2],
    pub low_tau: f64,
    pub low_target: f64,
    pub low_rel: f64,
    /// (τ̂, τ̂²β̃) on [1e2, 1e3]
    pub high: Vec<(f64, [f64; 2])>,
    pub high_limit: f64,
    pub high_limit_error: f64,
    pub min_abs_beta_tilde: f64,
    pub min_abs_transition: f64,
}

/// `i_c1` is ∫Δ^-1(ΛW W)W²R³, `alpha_star` the product constant.
pub fn beta_anchors(i_c1: f64, alpha_star: f64, cfg: &MultiplierConfig) -> Result<BetaAnchors, MultiplierError> {
    let low_tau = 1e-3;
    let (bs, _) = beta_star(low_tau, alpha_star, cfg)?;
    let low_target = 1.0 / (-0.5 * i_c1);
    let high_tau = log_grid(1e2, 1e3, 4);
    let high: Vec<(f64, [f64; 2])> = high_tau
        .iter()
        .map(|&t| beta_tilde(t, alpha_star, cfg).map(|(b, _)| (t, [t * t * b.re, t * t * b.im])))
        .collect::<Result<_, _>>()?;
    // τ̂²β̃ = L + b τ̂^-2 + ...: extrapolate from the two ends
    let (t0, v0) = (high[0].0, high[0].1[0]);
    let (t1, v1) = (high[high.len() - 1].0, high[high.len() - 1].1[0]);
    let lim = (v1 * t1 * t1 - v0 * t0 * t0) / (t1 * t1 - t0 * t0);
    let scan = log_grid(1e-3, 1e3, 16);
    let min_abs = scan
        .iter()
        .map(|&t| beta_tilde(t, alpha_star, cfg).map(|(b, _)| b.norm() * (1.0 + t * t)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let trans: Vec<f64> = (0..=64).map(|i| cfg.gamma_inv * (1.0 + i as f64 / 64.0)).collect();
    let min_tr = trans
        .iter()
        .map(|&t| beta_tilde(t, alpha_star, cfg).map(|(b, _)| b.norm()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(BetaAnchors {
        beta_star_low: [bs.re, bs.im],
        low_tau,
        low_target,
        low_rel: (Complex64::new(bs.re, bs.im) - low_target).norm() / low_target.abs(),
        high_limit_error: (lim - v1).abs().max(1e-12),
        high,
        high_limit: lim,
        min_abs_beta_tilde: min_abs,
        min_abs_transition: min_tr,
    })
}

/// alphadstar: the computed high-frequency limit of τ̂²β̃.
pub fn check_alphadstar(a: &BetaAnchors, alpha_dstar_literal: f64, threshold: f64) -> Certificate {
    let err = floor_error(a.high_limit_error, a.high_limit);
    let rel = (a.high_limit - alpha_dstar_literal).abs() / alpha_dstar_literal.abs();
    Certificate::new("alphadstar", CertValue::Real(a.high_limit), err, Complex64::new(0.0, 0.0), threshold)
        .note(format!(
            "limit of tau^2 beta~ on [1e2,1e3]; literal alpha** = -alpha* + J/2 = {alpha_dstar_literal:.12e}, relative gap {rel:.3e}"
        ))
        .note("the limit has the opposite sign of the J term: -alpha* - J/2 (closed form -56/15)")
        .note(format!("min |beta~|(1+tau^2) on scan={:.3e}, min |beta~| on transition={:.3e}", a.min_abs_beta_tilde, a.min_abs_transition))
}

/// Symbol-type spot checks of c₃: |c₃|, |τ̂ c₃'|, |τ̂² c₃''| at a few points.
#[derive(Debug, Clone, Serialize)]
pub struct C3Check {
    pub spots: Vec<(f64, [f64; 3])>,
    pub conj_residual: f64,
    pub outside_support: f64,
}

pub fn c3_checks(cfg: &MultiplierConfig) -> Result<C3Check, MultiplierError> {
    let mut spots = vec![];
    let mut conj: f64 = 0.0;
    for &t in &[0.05, 0.2, 0.5, 0.9, 1.3, 1.8] {
        let t = t * cfg.c3_radius;
        let h = 1e-3 * t;
        let c0 = compute_c3(t, cfg)?;
        let cp = compute_c3(t + h, cfg)?;
        let cm = compute_c3(t - h, cfg)?;
        let d1 = (cp - cm) / (2.0 * h);
        let d2 = (cp - c0 * 2.0 + cm) / (h * h);
        spots.push((t, [c0.norm(), t * d1.norm(), t * t * d2.norm()]));
        let neg = compute_c3(-t, cfg)?;
        conj = conj.max((neg - c0.conj()).norm() / c0.norm().max(1e-300));
    }
    let outside = compute_c3(2.0 * cfg.c3_radius * 1.01, cfg)?.norm();
    Ok(C3Check {
        spots,
        conj_residual: conj,
        outside_support: outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::{root_tauhat_star, transform_at};

    #[test]
    fn pv_of_one_vanishes() {
        for &tau in &[0.1, 1.0, 3.0, 20.0] {
            let opt = PvOptions::new(8.0 * tau).with_tail(1.0, 0.0);
            let v = pv_integral(|_| 1.0, tau, &opt).unwrap();
            assert!(v.value.abs() < 1e-12, "{tau}: {}", v.value);
        }
    }

    #[test]
    fn subtraction_matches_excision() {
        let opt = PvOptions::new(60.0);
        let s = pv_integral(|x: f64| (-x).exp(), 1.0, &opt).unwrap();
        let e = pv_excision_limit(|x: f64| (-x).exp(), 1.0, 0.05, &opt);
        assert!((s.value - e.extrapolated).abs() < 1e-8, "{} {}", s.value, e.extrapolated);
        let g = |x: f64| x * x * (-x * x).exp();
        let s = pv_integral(g, 2.0, &PvOptions::new(12.0)).unwrap();
        let e = pv_excision_limit(g, 2.0, 0.05, &PvOptions::new(12.0));
        assert!((s.value - e.extrapolated).abs() < 1e-8, "{} {}", s.value, e.extrapolated);
    }

    #[test]
    fn non_holder_is_detected() {
        let r = pv_integral(|x: f64| (x - 1.0).abs().powf(0.1), 1.0, &PvOptions::new(10.0));
        assert!(matches!(r, Err(MultiplierError::NonHolder { .. })), "{r:?}");
    }

    #[test]
    fn transforms_match_closed_forms() {
        let lww = Analytic::new(
            |r: f64| eval_lambda_w(r) * eval_w(r),
            Some(lambda_w_tail().mul(&w_tail(), 40.0)),
            60.0,
        )
        .with_scale(1.0);
        let llww = Analytic::new(
            |r: f64| {
                let h = 1e-5 * r.max(1e-3);
                let f = |s: f64| eval_lambda_w(s) * eval_w(s);
                2.0 * f(r) + r * (f(r + h) - f(r - h)) / (2.0 * h)
            },
            Some(lambda_w_tail().mul(&w_tail(), 40.0).lambda().add(&lambda_w_tail().mul(&w_tail(), 40.0))),
            60.0,
        )
        .with_scale(1.0);
        for &xi in &[0.05, 0.4, 1.0, 2.5] {
            let (a, _) = transform_at(&lww, xi).unwrap();
            assert!((a - f_lww(xi)).abs() < 1e-8 * f_lww(xi).abs().max(1e-3), "{xi}: {a} {}", f_lww(xi));
            let (b, _) = transform_at(&llww, xi).unwrap();
            assert!((b - f_llww(xi)).abs() < 1e-6 * f_llww(xi).abs().max(1e-2), "{xi}: {b} {}", f_llww(xi));
        }
    }

    #[test]
    fn beta2_at_zero_is_minus_half_c1_integral() {
        let (b, _) = beta2(0.0, &MultiplierConfig::default()).unwrap();
        assert!((b.re + 16.0).abs() < 1e-9, "{b}");
        let (b, _) = beta2(1e-4, &MultiplierConfig::default()).unwrap();
        assert!((b.re + 16.0).abs() < 1e-4 * 16.0, "{b}");
    }

    #[test]
    fn beta2_root_and_symmetry() {
        let root = root_tauhat_star().unwrap();
        let cfg = MultiplierConfig::default();
        let (b, _) = beta2(root.xi_star_w, &cfg).unwrap();
        assert!(b.im.abs() < 1e-12 * b.re.abs(), "{b}");
        let (p, _) = beta2(0.8, &cfg).unwrap();
        let (m, _) = beta2(-0.8, &cfg).unwrap();
        assert!((m - p.conj()).norm() < 1e-14 * p.norm());
        let num = beta2_numerical(root.xi_star_w, 0.5, 0.25, 10).unwrap();
        assert!((num - b.re).abs() < 1e-7 * b.re.abs(), "{num} {}", b.re);
    }

    #[test]
    fn beta_tilde_high_frequency_limit() {
        // -α_* - J/2 with α_* = 64/15, J = -16/15
        let (b, _) = beta_tilde(1e3, 64.0 / 15.0, &MultiplierConfig::default()).unwrap();
        assert!((1e6 * b.re + 56.0 / 15.0).abs() < 1e-4, "{}", 1e6 * b.re);
    }

    #[test]
    fn smooth_step_blend() {
        assert_eq!(smooth_step(-0.1), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn osc_pv_trivial_and_bounded() {
        assert_eq!(osc_pv(1.0, 0.0, 0.25, 1.0).norm(), 0.0);
        let a = osc_pv(3.0, 5.0, 0.25, 1.0);
        let b = osc_pv(3.0, 5.0, 0.25, 2.0);
        assert!((a - b).norm() < 1e-10, "{a} {b}");
        assert!(a.norm() < 10.0);
    }
}
