//! Radial functions on a geometric grid with analytic power-law tails, 4D radial
//! quadrature, the radial Laplacian and its decaying inverse.

use crate::fd;
use crate::quad::gauss_legendre;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("tail decays like R^-{p} (log power {k}); integral against R^3 dR diverges")]
    DivergentTail { p: f64, k: u32 },
    #[error("function has no tail expansion and does not vanish at the grid end")]
    MissingTail,
    #[error("grids differ")]
    GridMismatch,
}

/// Geometric grid r_i = r_min * exp(i ds), i = 0..n-1, with r_{n-1} = r_max.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    pub r: Vec<f64>,
    pub s0: f64,
    pub ds: f64,
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, n: usize) -> Self {
        assert!(n >= 16 && r_min > 0.0 && r_max > r_min);
        let s0 = r_min.ln();
        let ds = (r_max.ln() - s0) / (n - 1) as f64;
        let mut r: Vec<f64> = (0..n).map(|i| (s0 + i as f64 * ds).exp()).collect();
        r[0] = r_min;
        r[n - 1] = r_max;
        LogGrid { r, s0, ds }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// Grid with the same span and twice the resolution.
    pub fn refined(&self) -> Self {
        LogGrid::new(self.r_min(), self.r_max(), 2 * self.len() - 1)
    }
}

/// One far-field term c R^-p (ln R)^k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTerm {
    pub c: f64,
    pub p: f64,
    pub k: u32,
}

impl TailTerm {
    pub fn new(c: f64, p: f64, k: u32) -> Self {
        TailTerm { c, p, k }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.c * r.powf(-self.p) * r.ln().powi(self.k as i32)
    }
}

/// Far-field expansion valid beyond the end of the grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tail {
    pub terms: Vec<TailTerm>,
}

fn factorial_ratio(k: u32, j: u32) -> f64 {
    // k! / (k-j)!
    ((k - j + 1)..=k).map(|x| x as f64).product()
}

impl Tail {
    pub fn new(terms: Vec<TailTerm>) -> Self {
        let mut t = Tail { terms };
        t.normalize();
        t
    }

    /// Merge equal (p, k) terms and drop zeros; order by decay then log power.
    fn normalize(&mut self) {
        let mut out: Vec<TailTerm> = Vec::new();
        for t in &self.terms {
            if let Some(o) = out
                .iter_mut()
                .find(|o| (o.p - t.p).abs() < 1e-12 && o.k == t.k)
            {
                o.c += t.c;
            } else {
                out.push(*t);
            }
        }
        out.retain(|t| t.c != 0.0);
        out.sort_by(|a, b| a.p.partial_cmp(&b.p).unwrap().then(b.k.cmp(&a.k)));
        self.terms = out;
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(r)).sum()
    }

    /// Coefficient of R^-p (ln R)^k.
    pub fn coeff(&self, p: f64, k: u32) -> f64 {
        self.terms
            .iter()
            .filter(|t| (t.p - p).abs() < 1e-12 && t.k == k)
            .map(|t| t.c)
            .sum()
    }

    /// The (c2, c4) pair of pure R^-2 and R^-4 coefficients.
    pub fn c2_c4(&self) -> (f64, f64) {
        (self.coeff(2.0, 0), self.coeff(4.0, 0))
    }

    pub fn scale(&self, a: f64) -> Tail {
        Tail::new(
            self.terms
                .iter()
                .map(|t| TailTerm::new(a * t.c, t.p, t.k))
                .collect(),
        )
    }

    pub fn add(&self, o: &Tail) -> Tail {
        let mut v = self.terms.clone();
        v.extend_from_slice(&o.terms);
        Tail::new(v)
    }

    /// Product truncated to terms decaying no faster than R^-p_max.
    pub fn mul(&self, o: &Tail, p_max: f64) -> Tail {
        let mut v = Vec::new();
        for a in &self.terms {
            for b in &o.terms {
                if a.p + b.p <= p_max + 1e-12 {
                    v.push(TailTerm::new(a.c * b.c, a.p + b.p, a.k + b.k));
                }
            }
        }
        Tail::new(v)
    }

    /// Multiply by R^m (m may be negative).
    pub fn shift(&self, m: f64) -> Tail {
        Tail::new(
            self.terms
                .iter()
                .map(|t| TailTerm::new(t.c, t.p - m, t.k))
                .collect(),
        )
    }

    /// R d/dR applied termwise.
    pub fn r_dr(&self) -> Tail {
        let mut v = Vec::new();
        for t in &self.terms {
            v.push(TailTerm::new(-t.p * t.c, t.p, t.k));
            if t.k > 0 {
                v.push(TailTerm::new(t.k as f64 * t.c, t.p, t.k - 1));
            }
        }
        Tail::new(v)
    }

    /// Scaling generator f + R f'.
    pub fn lambda(&self) -> Tail {
        self.add(&self.r_dr())
    }

    /// 4D radial Laplacian: R^-2 ((R d_R)^2 + 2 R d_R).
    pub fn laplacian(&self) -> Tail {
        let d = self.r_dr();
        d.r_dr().add(&d.scale(2.0)).shift(-2.0)
    }

    /// Antiderivative F with F' = tail. For p > 1 this is -∫_r^∞; for p = 1 the
    /// log powers are raised; p < 1 terms use the same closed form (growing primitive).
    pub fn antiderivative(&self) -> Tail {
        let mut v = Vec::new();
        for t in &self.terms {
            if (t.p - 1.0).abs() < 1e-12 {
                v.push(TailTerm::new(t.c / (t.k + 1) as f64, 0.0, t.k + 1));
            } else {
                let a = 1.0 - t.p;
                for j in 0..=t.k {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let coef = sign * factorial_ratio(t.k, j) / a.powi(j as i32 + 1);
                    v.push(TailTerm::new(t.c * coef, t.p - 1.0, t.k - j));
                }
            }
        }
        Tail::new(v)
    }

    /// ∫_x^∞ tail(r) r^3 dr.
    pub fn integral_r3_from(&self, x: f64) -> Result<f64, RadialError> {
        for t in &self.terms {
            if t.p <= 4.0 + 1e-12 {
                return Err(RadialError::DivergentTail { p: t.p, k: t.k });
            }
        }
        Ok(-self.shift(3.0).antiderivative().eval(x))
    }

    /// Slowest decay rate present.
    pub fn leading_p(&self) -> Option<f64> {
        self.terms.first().map(|t| t.p)
    }
}

/// Barycentric Lagrange interpolation on `m` uniform nodes at fractional position `x`.
fn lagrange_uniform(vals: &[f64], x: f64) -> f64 {
    let m = vals.len();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut w = 1.0;
    for j in 0..m {
        if j > 0 {
            w *= -((m - j) as f64) / j as f64;
        }
        let d = x - j as f64;
        if d.abs() < 1e-14 {
            return vals[j];
        }
        num += w / d * vals[j];
        den += w / d;
    }
    num / den
}

const INTERP_POINTS: usize = 8;

/// Per-interval integration weights for uniformly spaced samples (spacing 1):
/// entry `[pos][j]` integrates the degree-(m-1) interpolant over [pos, pos+1].
fn interval_weights(m: usize) -> Vec<Vec<f64>> {
    let (gx, gw) = gauss_legendre(m.div_ceil(2) + 2);
    let offs: Vec<f64> = (0..m).map(|j| j as f64).collect();
    (0..m - 1)
        .map(|pos| {
            let mut w = vec![0.0; m];
            for (x, wt) in gx.iter().zip(&gw) {
                let z = pos as f64 + 0.5 + 0.5 * x;
                let c = fd::fornberg(z, &offs, 0);
                for j in 0..m {
                    w[j] += 0.5 * wt * c[0][j];
                }
            }
            w
        })
        .collect()
}

/// Cumulative integral C_i = ∫_{x_0}^{x_i} y on a uniform grid with spacing h,
/// using m-point interpolatory stencils per interval.
pub fn cumulative_uniform(y: &[f64], h: f64, m: usize) -> Vec<f64> {
    let n = y.len();
    let w = interval_weights(m);
    let half = m / 2 - 1;
    let mut c = vec![0.0; n];
    for i in 0..n - 1 {
        let start = if i < half {
            0
        } else if i + m - half > n {
            n - m
        } else {
            i - half
        };
        let pos = i - start;
        let inc: f64 = (0..m).map(|j| w[pos][j] * y[start + j]).sum();
        c[i + 1] = c[i] + h * inc;
    }
    c
}

/// Total integral with error estimate from two stencil orders.
pub fn integrate_uniform(y: &[f64], h: f64) -> (f64, f64) {
    let hi = cumulative_uniform(y, h, 8);
    let lo = cumulative_uniform(y, h, 6);
    let n = y.len();
    (hi[n - 1], (hi[n - 1] - lo[n - 1]).abs())
}

/// Value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// A sampled radial profile with optional far-field expansion valid beyond r_max.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    pub grid: Arc<LogGrid>,
    pub values: Vec<f64>,
    pub tail: Option<Tail>,
}

impl RadialFunction {
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<LogGrid>, f: F, tail: Option<Tail>) -> Self {
        let values = grid.r.iter().map(|&r| f(r)).collect();
        RadialFunction { grid, values, tail }
    }

    pub fn r(&self) -> &[f64] {
        &self.grid.r
    }

    /// Evaluate anywhere: interpolation in ln R inside the grid, the tail beyond,
    /// and even (R^2) extrapolation towards the origin.
    pub fn eval(&self, r: f64) -> f64 {
        let g = &self.grid;
        let n = g.len();
        if r >= g.r_max() {
            return match &self.tail {
                Some(t) if r > g.r_max() => t.eval(r),
                _ => self.values[n - 1],
            };
        }
        if r <= g.r_min() {
            let (r0, r1) = (g.r[0], g.r[1]);
            let (v0, v1) = (self.values[0], self.values[1]);
            return v0 + (v1 - v0) * (r * r - r0 * r0) / (r1 * r1 - r0 * r0);
        }
        let x = (r.ln() - g.s0) / g.ds;
        let i = x.floor() as usize;
        let m = INTERP_POINTS;
        let start = (i + 1).saturating_sub(m / 2).min(n - m);
        lagrange_uniform(&self.values[start..start + m], x - start as f64)
    }

    fn check_grid(&self, o: &RadialFunction) -> Result<(), RadialError> {
        if Arc::ptr_eq(&self.grid, &o.grid) || *self.grid == *o.grid {
            Ok(())
        } else {
            Err(RadialError::GridMismatch)
        }
    }

    pub fn mul(&self, o: &RadialFunction) -> RadialFunction {
        self.check_grid(o).expect("grid mismatch");
        let values = self.values.iter().zip(&o.values).map(|(a, b)| a * b).collect();
        let tail = match (&self.tail, &o.tail) {
            (Some(a), Some(b)) => Some(a.mul(b, 24.0)),
            _ => None,
        };
        RadialFunction {
            grid: self.grid.clone(),
            values,
            tail,
        }
    }

    pub fn lin(&self, a: f64, o: &RadialFunction, b: f64) -> RadialFunction {
        self.check_grid(o).expect("grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&o.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let tail = match (&self.tail, &o.tail) {
            (Some(x), Some(y)) => Some(x.scale(a).add(&y.scale(b))),
            _ => None,
        };
        RadialFunction {
            grid: self.grid.clone(),
            values,
            tail,
        }
    }

    pub fn scale(&self, a: f64) -> RadialFunction {
        RadialFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
            tail: self.tail.as_ref().map(|t| t.scale(a)),
        }
    }

    /// Samples of f R^4, the integrand of ∫ f R^3 dR in the variable s = ln R.
    fn r4_samples(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.grid.r)
            .map(|(v, r)| v * r.powi(4))
            .collect()
    }

    fn tail_or_compact(&self) -> Result<Tail, RadialError> {
        match &self.tail {
            Some(t) => Ok(t.clone()),
            None => {
                let n = self.values.len();
                let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if self.values[n - 1].abs() <= 1e-14 * scale.max(1e-300) {
                    Ok(Tail::default())
                } else {
                    Err(RadialError::MissingTail)
                }
            }
        }
    }

    /// ∫_0^∞ f R^3 dR with far-field extrapolation.
    pub fn radial_integral(&self) -> Result<Estimate, RadialError> {
        let tail = self.tail_or_compact()?;
        let g = &self.grid;
        let tail_part = tail.integral_r3_from(g.r_max())?;
        let y = self.r4_samples();
        let (interior, quad_err) = integrate_uniform(&y, g.ds);
        let r0 = g.r_min();
        let head = self.values[0] * r0.powi(4) / 4.0;
        // last tail term as a truncation proxy
        let tail_err = tail
            .terms
            .last()
            .map(|t| (-Tail::new(vec![*t]).shift(3.0).antiderivative().eval(g.r_max())).abs())
            .unwrap_or(0.0);
        let value = head + interior + tail_part;
        let err = quad_err + tail_err + (self.values[0] * r0.powi(6)).abs() + 4.0 * f64::EPSILON * value.abs();
        Ok(Estimate {
            value,
            error: err.max(f64::MIN_POSITIVE),
        })
    }

    /// M(R) = ∫_0^R f r^3 dr on the grid.
    pub fn cumulative_r3(&self) -> Vec<f64> {
        let g = &self.grid;
        let c = cumulative_uniform(&self.r4_samples(), g.ds, 8);
        let head = self.values[0] * g.r_min().powi(4) / 4.0;
        c.iter().map(|x| x + head).collect()
    }

    /// Δf = f'' + 3 f'/R. Returns the 6th-order result and a pointwise estimate of its
    /// error: |D6 - D4| plus the rounding bound of the stencil.
    pub fn apply_delta(&self) -> (RadialFunction, Vec<f64>) {
        let g = &self.grid;
        let hi = fd::uniform_derivatives(&self.values, g.ds, 7);
        let lo = fd::uniform_derivatives(&self.values, g.ds, 5);
        let mut val = Vec::with_capacity(g.len());
        let mut est = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            let r2 = g.r[i] * g.r[i];
            let a = (hi.d2[i] + 2.0 * hi.d1[i]) / r2;
            let b = (lo.d2[i] + 2.0 * lo.d1[i]) / r2;
            let round = (hi.round2[i] + 2.0 * hi.round1[i]) / r2;
            val.push(a);
            est.push((a - b).abs() + round);
        }
        (
            RadialFunction {
                grid: g.clone(),
                values: val,
                tail: self.tail.as_ref().map(|t| t.laplacian()),
            },
            est,
        )
    }

    /// Decaying solution u of Δu = f: u(R) = -∫_R^∞ M(r) r^-3 dr with M the 4D mass.
    pub fn apply_inv_delta(&self) -> Result<RadialFunction, RadialError> {
        let tail = self.tail_or_compact()?;
        let g = &self.grid;
        let n = g.len();
        let rm = g.r_max();
        let m = self.cumulative_r3();
        // M beyond the grid: constant plus the primitive of tail * r^3
        let prim = tail.shift(3.0).antiderivative();
        let m_tail = prim.add(&Tail::new(vec![TailTerm::new(m[n - 1] - prim.eval(rm), 0.0, 0)]));
        for t in &m_tail.terms {
            if t.p < 0.0 {
                return Err(RadialError::DivergentTail { p: t.p + 4.0, k: t.k });
            }
        }
        let u_tail = m_tail.shift(-3.0).antiderivative();
        let u_end = u_tail.eval(rm);
        // interior: u(R_i) = u(R_max) - ∫_{R_i}^{R_max} M r^-3 dr, in s = ln R
        let y: Vec<f64> = m.iter().zip(&g.r).map(|(mm, r)| mm / (r * r)).collect();
        let c = cumulative_uniform(&y, g.ds, 8);
        let values = (0..n).map(|i| u_end - (c[n - 1] - c[i])).collect();
        Ok(RadialFunction {
            grid: g.clone(),
            values,
            tail: Some(u_tail),
        })
    }

    /// max_i |f_i|
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Plain-text two-column dump with a header carrying the tail.
    pub fn to_text(&self, label: &str) -> String {
        let mut s = String::new();
        s.push_str(&format!("# {label}\n"));
        match &self.tail {
            Some(t) => {
                let (c2, c4) = t.c2_c4();
                s.push_str(&format!(
                    "# tail R>{:.6e}: c2={:.12e} c4={:.12e} terms=[{}]\n",
                    self.grid.r_max(),
                    c2,
                    c4,
                    t.terms
                        .iter()
                        .map(|t| format!("{:.12e}*R^-{}*lnR^{}", t.c, t.p, t.k))
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
            }
            None => s.push_str("# tail: none\n"),
        }
        s.push_str("# R value\n");
        for (r, v) in self.grid.r.iter().zip(&self.values) {
            s.push_str(&format!("{:.12e} {:.15e}\n", r, v));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<LogGrid> {
        Arc::new(LogGrid::new(1e-4, 1e3, 4001))
    }

    #[test]
    fn antiderivative_matches_numerics() {
        let t = Tail::new(vec![TailTerm::new(2.0, 3.0, 2), TailTerm::new(1.0, 1.0, 1)]);
        let f = t.antiderivative();
        let (a, b) = (5.0, 7.0);
        let h = 1e-5;
        for x in [a, b] {
            let d = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            assert!((d - t.eval(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn divergent_tail_rejected() {
        let g = grid();
        let w2 = RadialFunction::from_fn(
            g,
            |r| (1.0 + r * r / 8.0).powi(-2),
            Some(Tail::new(vec![TailTerm::new(64.0, 4.0, 0)])),
        );
        assert!(matches!(
            w2.radial_integral(),
            Err(RadialError::DivergentTail { .. })
        ));
    }

    #[test]
    fn gaussian_moment() {
        let g = grid();
        let f = RadialFunction::from_fn(g, |r: f64| (-r * r).exp(), None);
        let e = f.radial_integral().unwrap();
        assert!((e.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_delta_of_delta_bump() {
        let g = grid();
        let bump = |r: f64| (-(r - 3.0).powi(2)).exp();
        let f = RadialFunction::from_fn(g, bump, None);
        let (d, _) = f.apply_delta();
        let d = RadialFunction {
            values: d.values,
            grid: d.grid,
            tail: Some(Tail::default()),
        };
        let u = d.apply_inv_delta().unwrap();
        let mut worst: f64 = 0.0;
        for (a, b) in u.values.iter().zip(&f.values) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn interpolation_accuracy() {
        let g = grid();
        let f = RadialFunction::from_fn(g, |r: f64| (1.0 + r * r).recip(), None);
        for r in [1e-3, 0.37, 2.2, 15.0, 333.0] {
            assert!((f.eval(r) - 1.0 / (1.0 + r * r)).abs() < 1e-12 / (1.0 + r * r).sqrt());
        }
    }
}
