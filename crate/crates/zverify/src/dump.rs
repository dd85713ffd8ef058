//! Plain-text dumps for downstream plotting.

use crate::config::NumericsConfig;
use crate::constants::compute_cstar_value;
use crate::multipliers::{beta2, beta_star, log_grid, MultiplierTable};
use crate::profiles::{lambda_w_on, solve_correctors, w_on};
use crate::propagators::propagator_residuals_with_fields;
use crate::spectral::{discrete_eigenvalue, spectral_measure, OpKind};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const WHAT: [&str; 4] = ["profiles", "spectrum", "multipliers", "propagator-residuals"];

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("unknown dump {0:?}; known: profiles, spectrum, multipliers, propagator-residuals")]
    Unknown(String),
    #[error("writing {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}")]
    Numerics(String),
}

fn num<E: ToString>(e: E) -> DumpError {
    DumpError::Numerics(e.to_string())
}

fn write(dir: &Path, name: &str, body: &str, out: &mut Vec<PathBuf>) -> Result<(), DumpError> {
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| DumpError::Io(p.display().to_string(), e))?;
    out.push(p);
    Ok(())
}

/// Write the files of one dump into `dir`; returns the paths written.
pub fn run_dump(what: &str, cfg: &NumericsConfig, dir: &Path) -> Result<Vec<PathBuf>, DumpError> {
    if !WHAT.contains(&what) {
        return Err(DumpError::Unknown(what.into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| DumpError::Io(dir.display().to_string(), e))?;
    let mut out = vec![];
    match what {
        "profiles" => {
            let g = cfg.profiles.grid();
            let w = w_on(&g);
            let lw = lambda_w_on(&g);
            write(dir, "W.txt", &w.to_text("W = (1+R^2/8)^-1"), &mut out)?;
            write(dir, "LambdaW.txt", &lw.to_text("Lambda W = (1 + R d/dR) W"), &mut out)?;
            let c = solve_correctors(&g);
            for (name, s) in [("phi", &c.phi), ("psi", &c.psi)] {
                let f = w.lin(s.a, &lw, s.b);
                let label = format!("{}; u = a W + b Lambda W with a={:.12e} b={:.12e} c={:.12e} residual={:.3e}", s.label, s.a, s.b, s.c, s.residual);
                write(dir, &format!("{name}.txt"), &f.to_text(&label), &mut out)?;
            }
        }
        "spectrum" => {
            let data = spectral_measure(OpKind::LStar, &cfg.spectral, &[]).map_err(num)?;
            write(dir, "spectrum_Lstar.txt", &data.to_text(), &mut out)?;
            let b = discrete_eigenvalue(OpKind::LStar, cfg.resonance.eigen_rtol).map_err(num)?;
            let body = match b {
                Some(b) => b.eigenfunction.to_text(&format!(
                    "eigenfunction of L*, L2(R^3 dR)-normalized: xi_d={:.15e} energy={:.15e} matching defect={:.2e}",
                    b.kappa,
                    b.energy(),
                    b.match_defect
                )),
                None => "# L* has no negative eigenvalue at this tolerance\n".into(),
            };
            write(dir, "eigenpair_Lstar.txt", &body, &mut out)?;
        }
        "multipliers" => {
            let m = cfg.multiplier;
            let taus = log_grid(1e-3, 1e3, 16);
            let b2 = MultiplierTable::build("beta2", &taus, |t| beta2(t, &m).map(|v| v.0)).map_err(num)?;
            write(dir, "beta2.txt", &b2.to_text(), &mut out)?;
            let cs = compute_cstar_value(&cfg.spectral).map_err(num)?;
            let a = -cs.estimate.value * crate::constants::refined_integrals(&cfg.profiles.grid()).map_err(num)?.k2.value;
            let bs = MultiplierTable::build("beta_star", &taus, |t| beta_star(t, a, &m).map(|v| v.0)).map_err(num)?;
            write(dir, "beta_star.txt", &bs.to_text(), &mut out)?;
        }
        _ => {
            let (res, z, x) = propagator_residuals_with_fields(&cfg.propagators).map_err(num)?;
            write(dir, "schrodinger_field.txt", &z.to_text(), &mut out)?;
            write(dir, "wave_field.txt", &x.to_text(), &mut out)?;
            let mut body = res.to_text();
            let _ = writeln!(body, "# relative residual is sup|residual| / sup|source| on the residual window");
            write(dir, "propagator_residuals.txt", &body, &mut out)?;
        }
    }
    Ok(out)
}
