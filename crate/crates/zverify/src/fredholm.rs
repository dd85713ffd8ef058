//! The Fredholm apparatus of the intermediate wave-frequency regime: the operator
//! K u = 2Δ(W·L⁻¹(uW)) + 2W²u and its truncation K_main, fundamental systems of
//! τ̂² + Δ + 2W², the zero and good inverses, the Volterra iterate v_τ̂ with its
//! coefficient α_τ̂, the function g̃ entering κ, and the Carleman inequality.
//!
//! All operators act on samples at the nodes of a panelled Gauss-Legendre grid; integrals
//! from 0 are spectral cumulative quadratures, so K, L⁻¹ and the zero inverse are exact
//! compositions of Volterra integrals rather than differentiated quantities.

use crate::certificate::{floor_error, CertValue, Certificate};
use crate::multipliers::{beta_star, smooth_step, MultiplierConfig, MultiplierError};
use crate::par;
use crate::profiles::{eval_lambda_w, eval_w, eval_w_prime, w_tail};
use crate::quad::gauss_legendre;
use crate::spectral::{
    connection_coefficients, discrete_eigenvalue, distorted_transform, jost_solution, jost_tail_pairing,
    regular_solution, OpKind, SpectralError, TransformFn,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };

#[derive(Debug, Error)]
pub enum FredholmError {
    #[error("spectral: {0}")]
    Spectral(#[from] SpectralError),
    #[error("multiplier: {0}")]
    Multiplier(#[from] MultiplierError),
    #[error("Wronskian drift {drift:e} at tau {tau}")]
    Wronskian { drift: f64, tau: f64 },
    #[error("Volterra iteration stalled at tau {tau}: increment {last:e} after {terms} terms")]
    Volterra { tau: f64, last: f64, terms: usize },
    #[error("alpha vanishes at tau {0}")]
    Degenerate(f64),
}

/// Numerical parameters of the Fredholm pipeline; none of them is fixed by the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FredholmConfig {
    /// truncation radius: χ ≡ 1 on [0, M], ≡ 0 on [2M, ∞)
    pub m: f64,
    /// weight exponent of ⟨R⟩R^δ₀ L²
    pub delta0: f64,
    pub r_lo: f64,
    /// panel length of the uniform part of the grid (geometric panels below R = 1)
    pub panel_h: f64,
    pub gl_n: usize,
    /// grid end is 2M + r_extra
    pub r_extra: f64,
    pub rtol: f64,
    pub volterra_tol: f64,
    pub max_terms: usize,
    pub a1_tau_min: f64,
    pub a1_tau_max: f64,
    pub a1_points: usize,
    /// (B3) scan range [γ₁, γ₁⁻¹]
    pub gamma1: f64,
    pub b3_points: usize,
    /// |F_*(K_main v)| below this multiple of its error counts as a near-zero
    pub near_zero_factor: f64,
    pub wronskian_tol: f64,
}

impl Default for FredholmConfig {
    fn default() -> Self {
        FredholmConfig {
            m: 20.0,
            delta0: 0.1,
            r_lo: 1e-6,
            panel_h: 2.0,
            gl_n: 16,
            r_extra: 60.0,
            rtol: 1e-11,
            volterra_tol: 1e-10,
            max_terms: 400,
            a1_tau_min: 0.05,
            a1_tau_max: 4.0,
            a1_points: 80,
            gamma1: 0.5,
            b3_points: 31,
            near_zero_factor: 10.0,
            wronskian_tol: 1e-6,
        }
    }
}

impl FredholmConfig {
    /// Half the panel length and a tenfold tighter ODE tolerance.
    pub fn refined(&self) -> Self {
        FredholmConfig {
            panel_h: self.panel_h / 2.0,
            rtol: self.rtol / 10.0,
            ..*self
        }
    }

    pub fn with_m(&self, m: f64) -> Self {
        FredholmConfig { m, ..*self }
    }

    pub fn r_out(&self) -> f64 {
        2.0 * self.m + self.r_extra
    }

    pub fn a1_taus(&self) -> Vec<f64> {
        let n = self.a1_points.max(2);
        (0..n)
            .map(|i| self.a1_tau_min + (self.a1_tau_max - self.a1_tau_min) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn b3_taus(&self) -> Vec<f64> {
        let n = self.b3_points.max(2);
        let (lo, hi) = (self.gamma1, 1.0 / self.gamma1);
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }
}

/// Lagrange basis on the Gauss-Legendre nodes x, evaluated at y.
fn lagrange(x: &[f64], j: usize, y: f64) -> f64 {
    let mut p = 1.0;
    for (k, &xk) in x.iter().enumerate() {
        if k != j {
            p *= (y - xk) / (x[j] - xk);
        }
    }
    p
}

/// Panelled Gauss-Legendre grid on [r_lo, r_out] with cumulative integration and
/// differentiation matrices per panel.
#[derive(Debug, Clone)]
pub struct PanelGrid {
    pub breaks: Vec<f64>,
    pub p: usize,
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    gl_w: Vec<f64>,
    cum: Vec<f64>,
    diff: Vec<f64>,
}

impl PanelGrid {
    /// Geometric panels (ratio 2) from r_lo to 1, then panels of length h to r_out, with
    /// the extra points inserted as breaks.
    pub fn new(r_lo: f64, r_out: f64, h: f64, p: usize, extra: &[f64]) -> Self {
        let mut b = vec![];
        let mut x = r_lo;
        while x < 1.0 {
            b.push(x);
            x *= 2.0;
        }
        let mut y = 1.0;
        while y < r_out - 1e-9 {
            b.push(y);
            y += h;
        }
        b.push(r_out);
        b.extend(extra.iter().cloned().filter(|&e| e > r_lo && e < r_out));
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup_by(|a, c| (*a - *c).abs() < 1e-9 * c.abs().max(1.0));
        let (x, gw) = gauss_legendre(p);
        let mut cum = vec![0.0; p * p];
        let mut diff = vec![0.0; p * p];
        for i in 0..p {
            let half = 0.5 * (x[i] + 1.0);
            for j in 0..p {
                let mut s = 0.0;
                for k in 0..p {
                    s += gw[k] * lagrange(&x, j, -1.0 + half * (x[k] + 1.0));
                }
                cum[i * p + j] = s * half;
            }
        }
        let bary: Vec<f64> = (0..p)
            .map(|j| 1.0 / (0..p).filter(|&k| k != j).map(|k| x[j] - x[k]).product::<f64>())
            .collect();
        for i in 0..p {
            let mut d = 0.0;
            for j in 0..p {
                if i != j {
                    let v = bary[j] / bary[i] / (x[i] - x[j]);
                    diff[i * p + j] = v;
                    d -= v;
                }
            }
            diff[i * p + i] = d;
        }
        let mut r = Vec::with_capacity(p * b.len());
        let mut w = Vec::with_capacity(p * b.len());
        for pw in b.windows(2) {
            let (c, hh) = (0.5 * (pw[0] + pw[1]), 0.5 * (pw[1] - pw[0]));
            for k in 0..p {
                r.push(c + hh * x[k]);
                w.push(hh * gw[k]);
            }
        }
        PanelGrid {
            breaks: b,
            p,
            r,
            w,
            gl_w: gw,
            cum,
            diff,
        }
    }

    pub fn for_config(cfg: &FredholmConfig) -> Self {
        PanelGrid::new(cfg.r_lo, cfg.r_out(), cfg.panel_h, cfg.gl_n, &[cfg.m, 2.0 * cfg.m])
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_out(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    fn half(&self, k: usize) -> f64 {
        0.5 * (self.breaks[k + 1] - self.breaks[k])
    }

    /// ∫_{r_lo}^{r_i} g dR at every node.
    pub fn cumulative(&self, g: &[C]) -> Vec<C> {
        let p = self.p;
        let mut out = vec![ZERO; g.len()];
        let mut base = ZERO;
        for k in 0..self.breaks.len() - 1 {
            let h = self.half(k);
            let gs = &g[k * p..(k + 1) * p];
            for i in 0..p {
                let mut s = ZERO;
                for j in 0..p {
                    s += gs[j] * self.cum[i * p + j];
                }
                out[k * p + i] = base + s * h;
            }
            let mut t = ZERO;
            for j in 0..p {
                t += gs[j] * self.gl_w[j];
            }
            base += t * h;
        }
        out
    }

    pub fn integrate(&self, g: &[C]) -> C {
        g.iter().zip(&self.w).map(|(g, w)| g * w).sum()
    }

    /// ∫ g R³ dR over the nodes with R ≤ r_max.
    pub fn integrate_r3_below(&self, g: &[C], r_max: f64) -> C {
        self.r
            .iter()
            .zip(g.iter().zip(&self.w))
            .filter(|(r, _)| **r <= r_max)
            .map(|(r, (g, w))| g * (w * r * r * r))
            .sum()
    }

    /// Panelwise spectral derivative.
    pub fn derivative(&self, u: &[C]) -> Vec<C> {
        let p = self.p;
        let mut out = vec![ZERO; u.len()];
        for k in 0..self.breaks.len() - 1 {
            let h = self.half(k);
            let us = &u[k * p..(k + 1) * p];
            for i in 0..p {
                let mut s = ZERO;
                for j in 0..p {
                    s += us[j] * self.diff[i * p + j];
                }
                out[k * p + i] = s / h;
            }
        }
        out
    }

    /// Δu = u'' + 3u'/R from the panelwise derivative.
    pub fn laplacian(&self, u: &[C]) -> Vec<C> {
        let d = self.derivative(u);
        let dd = self.derivative(&d);
        dd.iter().zip(&d).zip(&self.r).map(|((a, b), r)| a + b * (3.0 / r)).collect()
    }

    /// ‖u‖ in ⟨R⟩R^δ L²_{R³dR}, i.e. the L² norm of u / (⟨R⟩R^δ).
    pub fn weighted_norm(&self, u: &[C], delta0: f64) -> f64 {
        self.r
            .iter()
            .zip(u.iter().zip(&self.w))
            .map(|(r, (u, w))| w * u.norm_sqr() * r.powi(3) / ((1.0 + r * r) * r.powf(2.0 * delta0)))
            .sum::<f64>()
            .sqrt()
    }

    /// L²_{R³dR} norm.
    pub fn l2_norm(&self, u: &[C]) -> f64 {
        self.r
            .iter()
            .zip(u.iter().zip(&self.w))
            .map(|(r, (u, w))| w * u.norm_sqr() * r.powi(3))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn real_vec(x: &[f64]) -> Vec<C> {
    x.iter().map(|&v| C::new(v, 0.0)).collect()
}

/// P with Y = -W P the second solution of (Δ + W²)Y = 0, R³(W'Y - Y'W) = 1.
fn second_p(r: f64) -> (f64, f64) {
    let p = -0.5 / (r * r) + r.ln() / 4.0 + r * r / 128.0;
    let q = r * r + 8.0;
    (p, q * q / (64.0 * r.powi(3)))
}

/// Profile samples on a grid: W, W', the L-kernel pair W, Y and the truncation χ.
#[derive(Debug, Clone)]
pub struct Profile {
    pub m: f64,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
    pub chi: Vec<f64>,
}

/// χ_{R≲M}: C^∞, ≡ 1 on [0, M], ≡ 0 on [2M, ∞).
pub fn chi_m(r: f64, m: f64) -> f64 {
    1.0 - smooth_step((r - m) / m)
}

impl Profile {
    pub fn new(grid: &PanelGrid, m: f64) -> Self {
        let mut pr = Profile {
            m,
            w: vec![],
            dw: vec![],
            y: vec![],
            dy: vec![],
            chi: vec![],
        };
        for &r in &grid.r {
            let (w, dw) = (eval_w(r), eval_w_prime(r));
            let (p, dp) = second_p(r);
            pr.w.push(w);
            pr.dw.push(dw);
            pr.y.push(-w * p);
            pr.dy.push(-dw * p - w * dp);
            pr.chi.push(chi_m(r, m));
        }
        pr
    }
}

/// The truncated grid, profile and configuration bundled.
#[derive(Debug, Clone)]
pub struct Setup {
    pub cfg: FredholmConfig,
    pub grid: PanelGrid,
    pub prof: Profile,
}

impl Setup {
    pub fn new(cfg: &FredholmConfig) -> Self {
        let grid = PanelGrid::for_config(cfg);
        let prof = Profile::new(&grid, cfg.m);
        Setup { cfg: *cfg, grid, prof }
    }

    fn r3(&self, f: &[C]) -> Vec<C> {
        f.iter().zip(&self.grid.r).map(|(f, r)| f * r.powi(3)).collect()
    }

    /// u = L⁻¹f, L = -Δ - W², on the branch vanishing at 0; returns (u, u').
    pub fn apply_linv(&self, f: &[C]) -> (Vec<C>, Vec<C>) {
        let p = &self.prof;
        let fy: Vec<C> = self.r3(f).iter().zip(&p.y).map(|(f, y)| f * y).collect();
        let fw: Vec<C> = self.r3(f).iter().zip(&p.w).map(|(f, w)| f * w).collect();
        let a = self.grid.cumulative(&fy);
        let b = self.grid.cumulative(&fw);
        let u = (0..f.len()).map(|i| -(a[i] * p.w[i] - b[i] * p.y[i])).collect();
        let du = (0..f.len()).map(|i| -(a[i] * p.dw[i] - b[i] * p.dy[i])).collect();
        (u, du)
    }

    /// L applied by spectral differentiation, for residual checks.
    pub fn apply_l(&self, u: &[C]) -> Vec<C> {
        let lap = self.grid.laplacian(u);
        (0..u.len()).map(|i| -lap[i] - u[i] * self.prof.w[i].powi(2)).collect()
    }

    /// K u = 2Δ(W h) + 2W²u with h = L⁻¹(uW), evaluated as 4W'h' - 4W³h.
    pub fn apply_k(&self, u: &[C]) -> Vec<C> {
        let p = &self.prof;
        let uw: Vec<C> = u.iter().zip(&p.w).map(|(u, w)| u * w).collect();
        let (h, dh) = self.apply_linv(&uw);
        (0..u.len()).map(|i| dh[i] * (4.0 * p.dw[i]) - h[i] * (4.0 * p.w[i].powi(3))).collect()
    }

    /// K_main = χ K χ.
    pub fn apply_kmain(&self, u: &[C]) -> Vec<C> {
        let chi = &self.prof.chi;
        let cu: Vec<C> = u.iter().zip(chi).map(|(u, c)| u * c).collect();
        self.apply_k(&cu).iter().zip(chi).map(|(k, c)| k * c).collect()
    }

    /// Dense Nyström matrix of K_main (column j is K_main of the j-th nodal basis vector).
    pub fn build_kmain(&self) -> KernelOperator {
        let n = self.grid.len();
        let cols: Vec<Vec<f64>> = par::map_range(n, |j| {
            let mut e = vec![ZERO; n];
            e[j] = C::new(1.0, 0.0);
            self.apply_kmain(&e).iter().map(|z| z.re).collect()
        });
        let mut mat = vec![0.0; n * n];
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                mat[i * n + j] = c[i];
            }
        }
        KernelOperator {
            m: self.cfg.m,
            n,
            mat,
            weights: self.grid.w.clone(),
        }
    }
}

/// Dense matrix of a kernel operator on the nodes.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    pub m: f64,
    pub n: usize,
    /// row-major
    pub mat: Vec<f64>,
    pub weights: Vec<f64>,
}

impl KernelOperator {
    pub fn apply(&self, u: &[C]) -> Vec<C> {
        (0..self.n)
            .map(|i| {
                let row = &self.mat[i * self.n..(i + 1) * self.n];
                row.iter().zip(u).map(|(a, u)| u * a).sum()
            })
            .collect()
    }

    /// Largest absolute entry in rows i with R_i beyond `r`.
    pub fn max_row_beyond(&self, grid: &PanelGrid, r: f64) -> f64 {
        (0..self.n)
            .filter(|&i| grid.r[i] >= r)
            .flat_map(|i| self.mat[i * self.n..(i + 1) * self.n].iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    }
}

/// Regular and outgoing solutions of τ̂² + Δ + m W² on the grid, and the real pair
/// {φ, θ} with φ(0) = 1 and ∂φ·θ - ∂θ·φ = R⁻³.
#[derive(Debug, Clone)]
pub struct FundamentalSystem {
    pub tau: f64,
    pub kind: OpKind,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub theta: Vec<f64>,
    pub dtheta: Vec<f64>,
    /// Jost solution g = R^{-3/2} f₊ and g'
    pub jost: Vec<C>,
    pub djost: Vec<C>,
    /// R³(φ g' - φ' g), constant
    pub w: C,
    /// max |R³ W(φ, θ) - 1| over 50 sample radii
    pub wronskian_residual: f64,
}

/// Indices of 50 nodes spread evenly in log R.
fn sample_indices(grid: &PanelGrid) -> Vec<usize> {
    let (lo, hi) = (grid.r[0].ln(), grid.r[grid.len() - 1].ln());
    (0..50)
        .map(|k| {
            let t = (lo + (hi - lo) * k as f64 / 49.0).exp();
            grid.r.partition_point(|&r| r < t).min(grid.len() - 1)
        })
        .collect()
}

pub fn fundamental_system(grid: &PanelGrid, kind: OpKind, tau: f64, rtol: f64) -> Result<FundamentalSystem, FredholmError> {
    let reg = regular_solution(kind, tau, &grid.r, rtol)?;
    let jost = jost_solution(kind, tau, &grid.r, rtol)?;
    let n = grid.len();
    let phi: Vec<f64> = reg.iter().map(|x| x.0).collect();
    let dphi: Vec<f64> = reg.iter().zip(&grid.r).map(|(x, r)| x.1 / r).collect();
    let g: Vec<C> = jost.iter().map(|x| x.0).collect();
    let dg: Vec<C> = jost.iter().zip(&grid.r).map(|(x, r)| x.1 / r).collect();
    let wr = |i: usize| (g[i] * (-dphi[i]) + dg[i] * phi[i]) * grid.r[i].powi(3);
    let i_ref = grid.r.partition_point(|&r| r < 2.0).min(n - 1);
    let w = wr(i_ref);
    let c = -1.0 / w;
    let theta: Vec<f64> = g.iter().map(|g| (g * c).re).collect();
    let dtheta: Vec<f64> = dg.iter().map(|g| (g * c).re).collect();
    let wronskian_residual = sample_indices(grid)
        .into_iter()
        .map(|i| ((dphi[i] * theta[i] - dtheta[i] * phi[i]) * grid.r[i].powi(3) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(FundamentalSystem {
        tau,
        kind,
        phi,
        dphi,
        theta,
        dtheta,
        jost: g,
        djost: dg,
        w,
        wronskian_residual,
    })
}

impl FundamentalSystem {
    pub fn check(&self, tol: f64) -> Result<(), FredholmError> {
        if !(self.wronskian_residual <= tol) {
            return Err(FredholmError::Wronskian {
                drift: self.wronskian_residual,
                tau: self.tau,
            });
        }
        Ok(())
    }

    /// (τ̂² + Δ + mW²)₀⁻¹ f = φ∫₀^R θ f s³ - θ∫₀^R φ f s³; returns (u, u').
    pub fn zero_inverse(&self, grid: &PanelGrid, f: &[C]) -> (Vec<C>, Vec<C>) {
        let ft: Vec<C> = (0..f.len()).map(|i| f[i] * (self.theta[i] * grid.r[i].powi(3))).collect();
        let fp: Vec<C> = (0..f.len()).map(|i| f[i] * (self.phi[i] * grid.r[i].powi(3))).collect();
        let a = grid.cumulative(&ft);
        let b = grid.cumulative(&fp);
        let u = (0..f.len()).map(|i| a[i] * self.phi[i] - b[i] * self.theta[i]).collect();
        let du = (0..f.len()).map(|i| a[i] * self.dphi[i] - b[i] * self.dtheta[i]).collect();
        (u, du)
    }

    /// The good inverse as the outgoing Green's function: regular at 0 and a multiple of
    /// the Jost solution beyond the support of f (f negligible beyond the grid).
    pub fn good_inverse(&self, grid: &PanelGrid, f: &[C]) -> (Vec<C>, Vec<C>) {
        let n = f.len();
        let fp: Vec<C> = (0..n).map(|i| f[i] * (self.phi[i] * grid.r[i].powi(3))).collect();
        let fg: Vec<C> = (0..n).map(|i| f[i] * self.jost[i] * grid.r[i].powi(3)).collect();
        let a = grid.cumulative(&fp);
        let b = grid.cumulative(&fg);
        let bt = grid.integrate(&fg);
        let u = (0..n).map(|i| (self.jost[i] * a[i] + (bt - b[i]) * self.phi[i]) / self.w).collect();
        let du = (0..n).map(|i| (self.djost[i] * a[i] + (bt - b[i]) * self.dphi[i]) / self.w).collect();
        (u, du)
    }

    /// ℓ(f) with good_inverse(f) = zero_inverse(f) + ℓ(f)φ for f supported on the grid:
    /// ℓ(f) = -⟨θ, f⟩ - iτ̂⟨φ, f⟩/|w|².
    pub fn ell(&self, grid: &PanelGrid, f: &[C]) -> C {
        let (a, b) = self.pairings(grid, f);
        -a - C::i() * b * (self.tau / self.w.norm_sqr())
    }

    /// (⟨f, θ⟩, ⟨f, φ⟩) in L²_{R³dR} over the grid.
    pub fn pairings(&self, grid: &PanelGrid, f: &[C]) -> (C, C) {
        let n = f.len();
        let ft: Vec<C> = (0..n).map(|i| f[i] * self.theta[i]).collect();
        let fp: Vec<C> = (0..n).map(|i| f[i] * self.phi[i]).collect();
        (grid.integrate_r3_below(&ft, f64::INFINITY), grid.integrate_r3_below(&fp, f64::INFINITY))
    }

    pub fn phi_c(&self) -> Vec<C> {
        real_vec(&self.phi)
    }

    /// (τ̂² + Δ + mW²)u by spectral differentiation.
    pub fn apply_operator(&self, grid: &PanelGrid, u: &[C]) -> Vec<C> {
        let lap = grid.laplacian(u);
        let m = self.kind.m();
        (0..u.len())
            .map(|i| lap[i] + u[i] * (self.tau * self.tau + m * eval_w(grid.r[i]).powi(2)))
            .collect()
    }
}

/// Sup of |residual| / sup |f| over nodes in [r_a, r_b].
pub fn relative_residual(grid: &PanelGrid, res: &[C], f: &[C], r_a: f64, r_b: f64) -> f64 {
    let sel = |x: &[C]| {
        x.iter()
            .zip(&grid.r)
            .filter(|(_, r)| **r >= r_a && **r <= r_b)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    };
    sel(res) / sel(f).max(1e-300)
}

/// Residual of (τ̂² + Δ + 2W²) applied to the good inverse of a Gaussian shell, relative to
/// the shell, on [1e-2, r_b]; the grid uses panels of 0.5 so the derivatives are resolved.
pub fn good_inverse_residual(cfg: &FredholmConfig, tau: f64, c: f64, sigma: f64, r_b: f64) -> Result<f64, FredholmError> {
    let s = Setup::new(&FredholmConfig { panel_h: 0.5, ..*cfg });
    let fs = fundamental_system(&s.grid, OpKind::LStar, tau, cfg.rtol)?;
    let f: Vec<C> = s.grid.r.iter().map(|r| C::new((-(r - c) * (r - c) / (2.0 * sigma * sigma)).exp(), 0.0)).collect();
    let (g, _) = fs.good_inverse(&s.grid, &f);
    let lg = fs.apply_operator(&s.grid, &g);
    let res: Vec<C> = (0..g.len()).map(|i| lg[i] - f[i]).collect();
    Ok(relative_residual(&s.grid, &res, &f, 1e-2, r_b))
}

/// Partial sums of a Volterra series with the norms of its terms.
#[derive(Debug, Clone, Serialize)]
pub struct VolterraSeries {
    pub tau: f64,
    #[serde(skip)]
    pub sum: Vec<C>,
    pub increments: Vec<f64>,
    pub ratios: Vec<f64>,
    pub superexponential: bool,
    /// ‖(I - Z K_main) sum - source‖ / ‖source‖
    pub telescoping_residual: f64,
}

/// Ratio test for super-exponential decay: the term ratios fall by a factor of at least
/// four from the first quarter of the series to the last, or the series ends within six
/// terms with ratios below 0.1.
pub fn is_superexponential(ratios: &[f64]) -> bool {
    let n = ratios.len();
    if n == 0 {
        return true;
    }
    if n <= 6 {
        return ratios.iter().all(|&q| q < 0.1);
    }
    let k = (n / 4).max(1);
    let first = ratios[..k].iter().cloned().fold(0.0, f64::max);
    let last = ratios[n - k..].iter().cloned().fold(0.0, f64::max);
    last < 0.25 * first && last < 1.0
}

/// Σ_j (Z K_main)^j src until the increment drops below tol relative to the sum.
pub fn volterra_series(s: &Setup, fs: &FundamentalSystem, src: &[C]) -> Result<VolterraSeries, FredholmError> {
    let d0 = s.cfg.delta0;
    let mut term = src.to_vec();
    let mut sum = src.to_vec();
    let mut inc = vec![s.grid.weighted_norm(src, d0)];
    loop {
        let k = s.apply_kmain(&term);
        term = fs.zero_inverse(&s.grid, &k).0;
        let nt = s.grid.weighted_norm(&term, d0);
        for (a, b) in sum.iter_mut().zip(&term) {
            *a += b;
        }
        inc.push(nt);
        let ns = s.grid.weighted_norm(&sum, d0).max(1e-300);
        if nt <= s.cfg.volterra_tol * ns {
            break;
        }
        if inc.len() > s.cfg.max_terms || !nt.is_finite() {
            return Err(FredholmError::Volterra {
                tau: fs.tau,
                last: nt / ns,
                terms: inc.len(),
            });
        }
    }
    let ratios: Vec<f64> = inc.windows(2).map(|w| w[1] / w[0].max(1e-300)).collect();
    let k = s.apply_kmain(&sum);
    let zk = fs.zero_inverse(&s.grid, &k).0;
    let res: Vec<C> = (0..sum.len()).map(|i| sum[i] - zk[i] - src[i]).collect();
    let telescoping_residual = s.grid.weighted_norm(&res, d0) / s.grid.weighted_norm(src, d0).max(1e-300);
    Ok(VolterraSeries {
        tau: fs.tau,
        sum,
        superexponential: is_superexponential(&ratios),
        increments: inc,
        ratios,
        telescoping_residual,
    })
}

/// v_τ̂, the θ- and φ-pairings of K_main v_τ̂ and α_τ̂.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaData {
    pub tau: f64,
    /// ⟨K_main v, θ⟩
    pub theta_pairing: f64,
    /// F_*(K_main v)(τ̂) = ⟨K_main v, φ⟩
    pub phi_pairing: f64,
    /// (I - G K_main) v = α φ with G the good inverse
    pub alpha: [f64; 2],
    pub terms: usize,
    pub superexponential: bool,
    pub max_ratio_tail: f64,
    pub telescoping_residual: f64,
    pub wronskian_residual: f64,
    pub weighted_norm_phi: f64,
    pub weighted_norm_v_minus_phi: f64,
}

pub fn alpha_tauhat(s: &Setup, tau: f64) -> Result<(AlphaData, FundamentalSystem, VolterraSeries), FredholmError> {
    let fs = fundamental_system(&s.grid, OpKind::LStar, tau, s.cfg.rtol)?;
    fs.check(s.cfg.wronskian_tol)?;
    let phi = fs.phi_c();
    let vs = volterra_series(s, &fs, &phi)?;
    let kv = s.apply_kmain(&vs.sum);
    let (a, b) = fs.pairings(&s.grid, &kv);
    let alpha = C::new(1.0, 0.0) - fs.ell(&s.grid, &kv);
    let d0 = s.cfg.delta0;
    let diff: Vec<C> = vs.sum.iter().zip(&phi).map(|(v, p)| v - p).collect();
    let n = vs.ratios.len();
    let data = AlphaData {
        tau,
        theta_pairing: a.re,
        phi_pairing: b.re,
        alpha: [alpha.re, alpha.im],
        terms: vs.increments.len(),
        superexponential: vs.superexponential,
        max_ratio_tail: vs.ratios[n.saturating_sub((n / 4).max(1))..].iter().cloned().fold(0.0, f64::max),
        telescoping_residual: vs.telescoping_residual,
        wronskian_residual: fs.wronskian_residual,
        weighted_norm_phi: s.grid.weighted_norm(&phi, d0),
        weighted_norm_v_minus_phi: s.grid.weighted_norm(&diff, d0),
    };
    Ok((data, fs, vs))
}

/// Canonical solution of (I - G K_main)u = f, with G the good inverse:
/// u = u₀ + ℓ(K_main u₀)/α · v, u₀ = (I - Z K_main)⁻¹ f.
pub fn canonical_inverse(s: &Setup, fs: &FundamentalSystem, v: &[C], alpha: C, f: &[C]) -> Result<Vec<C>, FredholmError> {
    if alpha.norm() < 1e-14 {
        return Err(FredholmError::Degenerate(fs.tau));
    }
    let u0 = volterra_series(s, fs, f)?.sum;
    let mu = fs.ell(&s.grid, &s.apply_kmain(&u0)) / alpha;
    Ok(u0.iter().zip(v).map(|(u, v)| u + v * mu).collect())
}

/// Spectral radius estimate of G K_main by power iteration.
pub fn good_kmain_spectral_radius(s: &Setup, fs: &FundamentalSystem, iters: usize) -> f64 {
    let n = s.grid.len();
    let mut u: Vec<C> = (0..n).map(|i| C::new(s.prof.chi[i] * (1.0 + 0.1 * (i % 7) as f64), 0.0)).collect();
    let d0 = s.cfg.delta0;
    let mut est = 0.0;
    for _ in 0..iters {
        let nu = s.grid.weighted_norm(&u, d0).max(1e-300);
        let next = fs.good_inverse(&s.grid, &s.apply_kmain(&u)).0;
        est = s.grid.weighted_norm(&next, d0) / nu;
        u = next.iter().map(|x| x / (est * nu).max(1e-300)).collect();
    }
    est
}

/// g(τ̂̃, ·) = G_*[Δ(W·L⁻¹[χ W · G₀(χ ΛW W)])], G_* and G₀ the good inverses of
/// τ̂̃² + Δ + 2W² and τ̂̃² + Δ.
pub fn g_function(s: &Setup, fs_star: &FundamentalSystem, fs_free: &FundamentalSystem) -> Vec<C> {
    let n = s.grid.len();
    let p = &s.prof;
    let src: Vec<C> = (0..n).map(|i| C::new(p.chi[i] * eval_lambda_w(s.grid.r[i]) * p.w[i], 0.0)).collect();
    let q = fs_free.good_inverse(&s.grid, &src).0;
    let f: Vec<C> = (0..n).map(|i| q[i] * (p.chi[i] * p.w[i])).collect();
    let (h, dh) = s.apply_linv(&f);
    // Δ(W h) = -2W³h + 2W'h' - W² (χ W q)/W... with Lh = χWq
    let lap_wh: Vec<C> = (0..n)
        .map(|i| h[i] * (-2.0 * p.w[i].powi(3)) + dh[i] * (2.0 * p.dw[i]) - f[i] * p.w[i])
        .collect();
    fs_star.good_inverse(&s.grid, &lap_wh).0
}

/// One point of the (B3) scan.
#[derive(Debug, Clone, Serialize)]
pub struct B3Point {
    pub tau: f64,
    /// ⟨τ̂̃²⟩ β_*(τ̂̃) ⟨g̃, W²⟩
    pub value: [f64; 2],
    pub beta_star: [f64; 2],
    pub pairing: [f64; 2],
    pub alpha: [f64; 2],
    pub g_weighted_norm: f64,
    pub spectral_radius: f64,
    pub tail_fraction: f64,
    pub beta_error: f64,
}

/// ⟨τ̂̃²⟩ in the κ denominator: the symbol 1 + τ̂̃² of ⟨∂²⟩.
pub fn bracket_sq(tau: f64) -> f64 {
    1.0 + tau * tau
}

pub fn b3_point(s: &Setup, tau: f64, alpha_star: f64, mcfg: &MultiplierConfig) -> Result<B3Point, FredholmError> {
    let fs = fundamental_system(&s.grid, OpKind::LStar, tau, s.cfg.rtol)?;
    fs.check(s.cfg.wronskian_tol)?;
    let f0 = fundamental_system(&s.grid, OpKind::Free, tau, s.cfg.rtol)?;
    f0.check(s.cfg.wronskian_tol)?;
    let phi = fs.phi_c();
    let vs = volterra_series(s, &fs, &phi)?;
    let alpha = C::new(1.0, 0.0) - fs.ell(&s.grid, &s.apply_kmain(&vs.sum));
    let g = g_function(s, &fs, &f0);
    let gt = canonical_inverse(s, &fs, &vs.sum, alpha, &g)?;
    let n = s.grid.len();
    let w2: Vec<C> = (0..n).map(|i| gt[i] * s.prof.w[i].powi(2)).collect();
    let body = s.grid.integrate_r3_below(&w2, f64::INFINITY);
    let gamma = gt[n - 1] / fs.jost[n - 1];
    let w2tail = w_tail().mul(&w_tail(), 40.0);
    let tail = gamma * jost_tail_pairing(OpKind::LStar, tau, s.grid.r_out(), &w2tail);
    let pairing = body + tail;
    let (bs, be) = beta_star(tau, alpha_star, mcfg)?;
    let v = bs * pairing * bracket_sq(tau);
    Ok(B3Point {
        tau,
        value: [v.re, v.im],
        beta_star: [bs.re, bs.im],
        pairing: [pairing.re, pairing.im],
        alpha: [alpha.re, alpha.im],
        g_weighted_norm: s.grid.weighted_norm(&g, s.cfg.delta0),
        spectral_radius: good_kmain_spectral_radius(s, &fs, 30),
        tail_fraction: tail.norm() / pairing.norm().max(1e-300),
        beta_error: be,
    })
}

/// Good inverse from its spectral representation: discrete term, PV continuous integral
/// and the on-shell term with η = -iπ (τ̂ > 0). Used as an oracle at a few radii.
pub fn good_inverse_spectral(f: &TransformFn, tau: f64, radii: &[f64], xi_max: f64, rtol: f64) -> Result<Vec<C>, FredholmError> {
    let kind = OpKind::LStar;
    // panels on [0, ξ_max] with τ a breakpoint; PV by subtraction of the value at τ
    let mut br: Vec<f64> = vec![0.0];
    let mut x = 0.05;
    while x < xi_max {
        br.push(x);
        x += 0.25;
    }
    br.push(xi_max);
    br.push(tau);
    br.push(0.5 * tau);
    br.push(1.5 * tau);
    br.sort_by(|a, b| a.partial_cmp(b).unwrap());
    br.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let nodes = crate::quad::NodeSet::panels(&br, 12);
    let mut xs = nodes.nodes.clone();
    xs.push(tau);
    let tr = distorted_transform(f, kind, &xs, rtol)?;
    let a = connection_coefficients(kind, &xs, rtol)?;
    let phis: Vec<Vec<(f64, f64)>> = par::map(&xs, |&x| regular_solution(kind, x, radii, rtol))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let rho: Vec<f64> = a.iter().map(|a| 1.0 / (2.0 * PI * a.norm_sqr())).collect();
    let k = xs.len() - 1;
    let bound = discrete_eigenvalue(kind, rtol)?;
    let mut out = vec![];
    for (ri, &r) in radii.iter().enumerate() {
        let gfun = |j: usize| phis[j][ri].0 * tr[j] * rho[j];
        let gt = gfun(k);
        let mut pv = 0.0;
        for j in 0..k {
            let xi = xs[j];
            pv += nodes.weights[j] * (gfun(j) - gt) / (tau * tau - xi * xi);
        }
        pv += gt * ((xi_max + tau) / (xi_max - tau)).ln() / (2.0 * tau);
        let mut u = C::new(pv, 0.0) + C::new(0.0, -PI) * gt / (2.0 * tau);
        if let Some(b) = &bound {
            let xd = b.kappa;
            u += C::new(b.pair(f) / (tau * tau + xd * xd) * b.eigenfunction.eval(r), 0.0);
        }
        out.push(u);
    }
    Ok(out)
}

/// One Carleman sample: f = bump·cos(kR + φ₀) on (a, b), weight exponent λ, frequency τ̂.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CarlemanCase {
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub phase: f64,
    pub lambda: f64,
    pub tau: f64,
}

/// (f, f', f'') of the standard bump exp(-1/(1-t²)) on (a, b) times cos(kR + φ₀).
fn carleman_f(c: &CarlemanCase, r: f64) -> (f64, f64, f64) {
    let s = 2.0 / (c.b - c.a);
    let t = (2.0 * r - c.a - c.b) / (c.b - c.a);
    if t.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 - t * t;
    let e = (-1.0 / u).exp();
    let g1 = -2.0 * t / (u * u);
    let g2 = -2.0 / (u * u) - 8.0 * t * t / (u * u * u);
    let (e0, e1, e2) = (e, e * g1 * s, e * (g2 + g1 * g1) * s * s);
    let (cs, sn) = ((c.k * r + c.phase).cos(), (c.k * r + c.phase).sin());
    let f = e0 * cs;
    let df = e1 * cs - c.k * e0 * sn;
    let ddf = e2 * cs - 2.0 * c.k * e1 * sn - c.k * c.k * e0 * cs;
    (f, df, ddf)
}

/// (lhs, rhs, pass) of 2τ̂√λ‖R^λ f‖ ≤ ‖R^(1+λ)(Δ + τ̂²)f‖ in L²_{R³dR}.
pub fn carleman_test(c: &CarlemanCase) -> (f64, f64, bool) {
    let n_pan = 400;
    let (x, w) = gauss_legendre(16);
    let (mut l, mut rr) = (0.0, 0.0);
    let h = (c.b - c.a) / n_pan as f64;
    for p in 0..n_pan {
        let m = c.a + h * (p as f64 + 0.5);
        for k in 0..16 {
            let r = m + 0.5 * h * x[k];
            let wt = 0.5 * h * w[k] * r.powi(3);
            let (f, df, ddf) = carleman_f(c, r);
            let lf = ddf + 3.0 * df / r + c.tau * c.tau * f;
            l += wt * (r.powf(c.lambda) * f).powi(2);
            rr += wt * (r.powf(1.0 + c.lambda) * lf).powi(2);
        }
    }
    let lhs = 2.0 * c.tau * c.lambda.sqrt() * l.sqrt();
    let rhs = rr.sqrt();
    (lhs, rhs, lhs <= rhs * (1.0 + 1e-8))
}

/// Seeded random Carleman cases: supports in (0.05, 20), λ ∈ (0.05, 8), τ̂ ∈ (0.05, 8) and
/// oscillation frequencies up to 2τ̂, so that near-resonant f are included.
pub fn carleman_cases(seed: u64, n: usize) -> Vec<CarlemanCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = rng.gen_range(0.05..8.0);
            let b = a + rng.gen_range(0.3..12.0);
            let tau = (rng.gen_range((0.05f64).ln()..(8.0f64).ln())).exp();
            let lambda = (rng.gen_range((0.05f64).ln()..(8.0f64).ln())).exp();
            let k = rng.gen_range(0.0..2.0 * tau);
            let phase = rng.gen_range(0.0..2.0 * PI);
            CarlemanCase { a, b, k, phase, lambda, tau }
        })
        .collect()
}

/// Summary of the Carleman property suite.
#[derive(Debug, Clone, Serialize)]
pub struct CarlemanSuite {
    pub seed: u64,
    pub count: usize,
    pub passed: usize,
    /// max lhs/rhs over the suite
    pub worst_ratio: f64,
}

pub fn carleman_suite(seed: u64, n: usize) -> CarlemanSuite {
    let cases = carleman_cases(seed, n);
    let res: Vec<(f64, f64, bool)> = par::map(&cases, carleman_test);
    CarlemanSuite {
        seed,
        count: n,
        passed: res.iter().filter(|r| r.2).count(),
        worst_ratio: res.iter().map(|r| r.0 / r.1.max(1e-300)).fold(0.0, f64::max),
    }
}

/// Values of the (A1) scan at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct A1Scan {
    pub m: f64,
    pub points: Vec<AlphaData>,
}

pub fn a1_scan(cfg: &FredholmConfig) -> Result<A1Scan, FredholmError> {
    let s = Setup::new(cfg);
    let taus = cfg.a1_taus();
    let pts: Vec<Result<AlphaData, FredholmError>> = par::map(&taus, |&t| alpha_tauhat(&s, t).map(|x| x.0));
    Ok(A1Scan {
        m: cfg.m,
        points: pts.into_iter().collect::<Result<_, _>>()?,
    })
}

/// A root of F_*(K_main v)(τ̂) located by bisection, with the pairings there.
#[derive(Debug, Clone, Serialize)]
pub struct A1Root {
    pub tau: f64,
    pub theta_pairing: f64,
    pub theta_pairing_fine: f64,
    pub alpha: [f64; 2],
}

fn bisect_phi_pairing(s: &Setup, mut lo: f64, mut hi: f64, mut flo: f64) -> Result<f64, FredholmError> {
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let fm = alpha_tauhat(s, mid)?.0.phi_pairing;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Full (A1) analysis at one truncation radius: base and refined scans and the roots.
#[derive(Debug, Clone, Serialize)]
pub struct A1Analysis {
    pub base: A1Scan,
    pub fine: A1Scan,
    pub roots: Vec<A1Root>,
    pub max_phi_pairing: f64,
    pub phi_pairing_error: f64,
    /// min over the scan of |α_τ̂| and its location
    pub min_alpha: f64,
    pub min_alpha_tau: f64,
    pub min_alpha_error: f64,
    pub near_zero_points: usize,
    pub all_superexponential: bool,
    pub max_telescoping: f64,
    pub max_wronskian: f64,
}

pub fn a1_analysis(cfg: &FredholmConfig) -> Result<A1Analysis, FredholmError> {
    let base = a1_scan(cfg)?;
    let fine = a1_scan(&cfg.refined())?;
    let s = Setup::new(cfg);
    let sf = Setup::new(&cfg.refined());
    let errs: Vec<f64> = base
        .points
        .iter()
        .zip(&fine.points)
        .map(|(a, b)| floor_error((a.phi_pairing - b.phi_pairing).abs(), a.phi_pairing))
        .collect();
    let mut roots = vec![];
    for w in base.points.windows(2) {
        if (w[0].phi_pairing > 0.0) != (w[1].phi_pairing > 0.0) {
            let t = bisect_phi_pairing(&s, w[0].tau, w[1].tau, w[0].phi_pairing)?;
            let d = alpha_tauhat(&s, t)?.0;
            let df = alpha_tauhat(&sf, t)?.0;
            roots.push(A1Root {
                tau: t,
                theta_pairing: d.theta_pairing,
                theta_pairing_fine: df.theta_pairing,
                alpha: d.alpha,
            });
        }
    }
    let near_zero_points = base
        .points
        .iter()
        .zip(&errs)
        .filter(|(p, e)| p.phi_pairing.abs() < cfg.near_zero_factor * **e)
        .count();
    let (mut min_alpha, mut min_tau, mut min_err) = (f64::INFINITY, 0.0, 0.0);
    for (a, b) in base.points.iter().zip(&fine.points) {
        let na = C::new(a.alpha[0], a.alpha[1]).norm();
        if na < min_alpha {
            min_alpha = na;
            min_tau = a.tau;
            min_err = floor_error((C::new(a.alpha[0], a.alpha[1]) - C::new(b.alpha[0], b.alpha[1])).norm(), na);
        }
    }
    Ok(A1Analysis {
        max_phi_pairing: base.points.iter().map(|p| p.phi_pairing.abs()).fold(0.0, f64::max),
        phi_pairing_error: errs.iter().cloned().fold(0.0, f64::max),
        all_superexponential: base.points.iter().all(|p| p.superexponential),
        max_telescoping: base.points.iter().map(|p| p.telescoping_residual).fold(0.0, f64::max),
        max_wronskian: base.points.iter().map(|p| p.wronskian_residual).fold(0.0, f64::max),
        base,
        fine,
        roots,
        min_alpha,
        min_alpha_tau: min_tau,
        min_alpha_error: min_err,
        near_zero_points,
    })
}

/// Certificate (A1). F_*(K_main v_τ̂)(τ̂) must not vanish identically; at each of its
/// zeros the θ-pairing must be bounded away from 0. The reported value is that pairing at
/// the binding root (or max|F_*| when there is no root), and α_τ̂ = 1 + ⟨K_main v, θ⟩ there
/// is recorded as well, since α_τ̂ ≠ 0 is what the range argument consumes.
pub fn check_a1(main: &A1Analysis, doubled: Option<&A1Analysis>, threshold: f64) -> Certificate {
    let ident = main.max_phi_pairing / main.phi_pairing_error.max(1e-300);
    let mut cert = if main.roots.is_empty() {
        Certificate::real("A1", main.max_phi_pairing, main.phi_pairing_error, 0.0, threshold)
            .note("no sign change of F_*(K_main v)(tau) on the scan; value is its max modulus")
    } else {
        let mut best: Option<Certificate> = None;
        for r in &main.roots {
            let err = floor_error((r.theta_pairing - r.theta_pairing_fine).abs(), r.theta_pairing);
            let c = Certificate::real("A1", r.theta_pairing, err, 0.0, threshold);
            if best.as_ref().map(|b| c.margin < b.margin).unwrap_or(true) {
                best = Some(c.note(format!("binding root tau={:.10} alpha=({:.6e},{:.6e})", r.tau, r.alpha[0], r.alpha[1])));
            }
        }
        best.unwrap()
    };
    cert = cert
        .note(format!("roots={} near_zero_points={}", main.roots.len(), main.near_zero_points))
        .note(format!("max|F_*(K_main v)|={:.6e} err={:.3e} ratio={:.3e}", main.max_phi_pairing, main.phi_pairing_error, ident))
        .note(format!(
            "min|alpha|={:.6e} at tau={:.4} err={:.3e}",
            main.min_alpha, main.min_alpha_tau, main.min_alpha_error
        ))
        .note(format!(
            "volterra superexponential={} max telescoping={:.3e} max wronskian={:.3e}",
            main.all_superexponential, main.max_telescoping, main.max_wronskian
        ));
    if ident <= threshold {
        cert = cert.fail_with("F_*(K_main v) indistinguishable from zero on the scan");
    }
    if main.min_alpha <= threshold * main.min_alpha_error {
        cert = cert.fail_with("alpha_tauhat not bounded away from zero");
    }
    for r in &main.roots {
        if (1.0 + r.theta_pairing).abs() <= threshold * (r.theta_pairing - r.theta_pairing_fine).abs() {
            cert = cert.fail_with(format!("1 + theta pairing vanishes at root tau={:.6}", r.tau));
        }
    }
    if !main.all_superexponential {
        cert = cert.fail_with("Volterra increments not super-exponential at some tau");
    }
    if let Some(d) = doubled {
        let dc = check_a1(d, None, threshold);
        cert = cert.note(format!("M={} verdict {:?} margin={:.3e}", d.base.m, dc.verdict, dc.margin));
        if dc.passed() != cert.passed() {
            cert = cert.fail_with("verdict changes under doubling M");
        }
    }
    cert
}

/// Full (B3) scan at one truncation radius, base and refined.
#[derive(Debug, Clone, Serialize)]
pub struct B3Analysis {
    pub m: f64,
    pub base: Vec<B3Point>,
    pub fine: Vec<B3Point>,
}

pub fn b3_analysis(cfg: &FredholmConfig, alpha_star: f64, mcfg: &MultiplierConfig) -> Result<B3Analysis, FredholmError> {
    let taus = cfg.b3_taus();
    let run = |c: &FredholmConfig| -> Result<Vec<B3Point>, FredholmError> {
        let s = Setup::new(c);
        par::map(&taus, |&t| b3_point(&s, t, alpha_star, mcfg)).into_iter().collect()
    };
    Ok(B3Analysis {
        m: cfg.m,
        base: run(cfg)?,
        fine: run(&cfg.refined())?,
    })
}

/// Certificate (B3): ⟨τ̂̃²⟩β_*⟨g̃, W²⟩ omits 1 on [γ₁, γ₁⁻¹]; value at the binding τ̂̃.
pub fn check_b3(main: &B3Analysis, doubled: Option<&B3Analysis>, threshold: f64) -> Certificate {
    let mut best: Option<(Certificate, f64)> = None;
    for (a, b) in main.base.iter().zip(&main.fine) {
        let va = C::new(a.value[0], a.value[1]);
        let vb = C::new(b.value[0], b.value[1]);
        let pair = C::new(a.pairing[0], a.pairing[1]);
        let err = floor_error((va - vb).norm() + a.beta_error * pair.norm() * bracket_sq(a.tau), va.norm());
        let c = Certificate::new("B3", CertValue::Complex(a.value), err, C::new(1.0, 0.0), threshold);
        if best.as_ref().map(|(b, _)| c.margin < b.margin).unwrap_or(true) {
            best = Some((c, a.tau));
        }
    }
    let Some((mut cert, tau)) = best else {
        return Certificate::failed("B3", "empty scan");
    };
    let max_rho = main.base.iter().map(|p| p.spectral_radius).fold(0.0, f64::max);
    let max_tail = main.base.iter().map(|p| p.tail_fraction).fold(0.0, f64::max);
    let min_alpha = main.base.iter().map(|p| C::new(p.alpha[0], p.alpha[1]).norm()).fold(f64::INFINITY, f64::min);
    let min_dist = main
        .base
        .iter()
        .map(|p| (C::new(p.value[0], p.value[1]) - 1.0).norm())
        .fold(f64::INFINITY, f64::min);
    cert = cert
        .note(format!("binding tau={tau:.6}, min|1-value| over scan={min_dist:.6e}"))
        .note(format!("spectral radius of G K_main <= {max_rho:.4e} (Neumann series {})", if max_rho < 1.0 { "converges" } else { "diverges; canonical inverse via Volterra reduction" }))
        .note(format!("min|alpha| on scan={min_alpha:.6e}; tail fraction of <g~,W^2> <= {max_tail:.3e}"));
    if let Some(d) = doubled {
        let dc = check_b3(d, None, threshold);
        cert = cert.note(format!("M={} verdict {:?} margin={:.3e}", d.m, dc.verdict, dc.margin));
        if dc.passed() != cert.passed() {
            cert = cert.fail_with("verdict changes under doubling M");
        }
    }
    cert
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_setup() -> Setup {
        Setup::new(&FredholmConfig::default())
    }

    /// Short panels, for residual checks through spectral differentiation.
    fn fine_setup() -> Setup {
        Setup::new(&FredholmConfig {
            panel_h: 0.5,
            ..FredholmConfig::default()
        })
    }

    fn bump(s: &Setup, c: f64, sig: f64) -> Vec<C> {
        s.grid.r.iter().map(|r| C::new((-(r - c) * (r - c) / (2.0 * sig * sig)).exp(), 0.0)).collect()
    }

    #[test]
    fn cumulative_integrates_polynomials_and_powers() {
        let g = PanelGrid::new(1e-6, 10.0, 1.0, 16, &[]);
        let f: Vec<C> = g.r.iter().map(|r| C::new(r.powi(3) * r.cos(), 0.0)).collect();
        let c = g.cumulative(&f);
        let n = g.len();
        let r = g.r[n - 1];
        let exact = |x: f64| (3.0 * x * x - 6.0) * x.cos() + (x * x * x - 6.0 * x) * x.sin() + 6.0;
        assert!((c[n - 1].re - exact(r)).abs() < 1e-10, "{} {}", c[n - 1].re, exact(r));
        let d = g.derivative(&f);
        let i = n / 2;
        let x = g.r[i];
        assert!((d[i].re - (3.0 * x * x * x.cos() - x.powi(3) * x.sin())).abs() < 1e-8);
    }

    #[test]
    fn linv_inverts_l_and_vanishes_quadratically() {
        let s = fine_setup();
        let f = bump(&s, 3.0, 0.7);
        let (u, _) = s.apply_linv(&f);
        let lu = s.apply_l(&u);
        let res: Vec<C> = (0..u.len()).map(|i| lu[i] - f[i]).collect();
        assert!(relative_residual(&s.grid, &res, &f, 1e-3, 30.0) < 1e-6);
        let i = s.grid.r.partition_point(|&r| r < 1e-3);
        let sup = f.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(u[i].norm() <= 1.0 * s.grid.r[i].powi(2) * sup);
    }

    #[test]
    fn kmain_matrix_matches_direct_application() {
        let cfg = FredholmConfig {
            m: 5.0,
            r_extra: 4.0,
            ..FredholmConfig::default()
        };
        let s = Setup::new(&cfg);
        let k = s.build_kmain();
        let f = bump(&s, 2.0, 0.5);
        let a = k.apply(&f);
        let b = s.apply_kmain(&f);
        let e = a.iter().zip(&b).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let sc = b.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(e < 1e-6 * sc);
        assert_eq!(k.max_row_beyond(&s.grid, 2.0 * cfg.m + 1e-9), 0.0);
        assert!(s.apply_k(&vec![ZERO; s.grid.len()]).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn fundamental_system_wronskian_and_zero_inverse() {
        let s = fine_setup();
        let fs = fundamental_system(&s.grid, OpKind::LStar, 0.7, 1e-11).unwrap();
        assert!(fs.wronskian_residual < 1e-6, "{}", fs.wronskian_residual);
        let f = bump(&s, 4.0, 0.8);
        let (u, _) = fs.zero_inverse(&s.grid, &f);
        let lu = fs.apply_operator(&s.grid, &u);
        let res: Vec<C> = (0..u.len()).map(|i| lu[i] - f[i]).collect();
        assert!(relative_residual(&s.grid, &res, &f, 1e-3, 50.0) < 1e-6);
        // good inverse = zero inverse + ℓ(f) φ
        let (g, _) = fs.good_inverse(&s.grid, &f);
        let l = fs.ell(&s.grid, &f);
        let d = (0..u.len()).map(|i| (g[i] - u[i] - l * fs.phi[i]).norm()).fold(0.0, f64::max);
        assert!(d < 1e-8 * g.iter().map(|x| x.norm()).fold(0.0, f64::max), "{d}");
        let lg = fs.apply_operator(&s.grid, &g);
        let res: Vec<C> = (0..u.len()).map(|i| lg[i] - f[i]).collect();
        assert!(relative_residual(&s.grid, &res, &f, 1e-2, 90.0) < 1e-4);
    }

    #[test]
    fn good_inverse_matches_spectral_representation() {
        let s = small_setup();
        let tau = 0.8;
        let fs = fundamental_system(&s.grid, OpKind::LStar, tau, 1e-11).unwrap();
        let tf = TransformFn::gaussian("bump", 3.0, 0.6);
        let f: Vec<C> = s.grid.r.iter().map(|&r| C::new(tf.eval(r), 0.0)).collect();
        let (g, _) = fs.good_inverse(&s.grid, &f);
        let idx: Vec<usize> = [1.5, 5.0].iter().map(|&r| s.grid.r.partition_point(|&x| x < r)).collect();
        let radii: Vec<f64> = idx.iter().map(|&i| s.grid.r[i]).collect();
        let sp = good_inverse_spectral(&tf, tau, &radii, 12.0, 1e-10).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            assert!((g[i] - sp[k]).norm() < 1e-5 * g[i].norm(), "R={} {} {}", radii[k], g[i], sp[k]);
        }
    }

    #[test]
    fn carleman_suite_passes() {
        let s = carleman_suite(7, 100);
        assert_eq!(s.passed, 100, "worst {}", s.worst_ratio);
        let z = CarlemanCase { a: 1.0, b: 2.0, k: 0.0, phase: 0.0, lambda: 1.0, tau: 1.0 };
        let (l, r, _) = carleman_test(&z);
        assert!(l > 0.0 && r > l);
    }
}
