//! Dependency-ordered evaluation of the certificate set.
//!
//! Each certificate names the certificates whose conclusions it relies on. A dependency that
//! does not pass blocks its dependents, which are then reported as blocked without being run.
//! Shared intermediate results (profile integrals, c_*, the τ̂_* root) are computed once.

use crate::certificate::{Certificate, IDS};
use crate::config::NumericsConfig;
use crate::constants::{
    assemble_constants, c1_scaling_estimate, check_alphastar, check_b1, check_b2, check_c1, check_c3, check_cstar,
    compute_cstar_value, refined_integrals, ConstantsReport, CstarResult, RefinedIntegrals,
};
use crate::fredholm::{a1_analysis, b3_analysis, check_a1, check_b3};
use crate::hankel::{check_tauhatstar, root_tauhat_star, RootReport};
use crate::multipliers::{beta_anchors, check_alphadstar, check_c2};
use crate::radial::Estimate;
use crate::spectral::{check_s1, check_xid, discrete_eigenvalue, zero_energy_analysis, OpKind};
use std::collections::BTreeMap;
use std::time::Instant;

/// Certificates each certificate relies on.
pub fn dependencies(id: &str) -> &'static [&'static str] {
    match id {
        "A1" => &["S1", "xid"],
        "B2" => &["C3"],
        "B3" => &["A1", "alphastar"],
        "C2" => &["tauhatstar"],
        "C3" => &["alphastar"],
        "alphastar" => &["cstar"],
        "alphadstar" => &["C1", "alphastar"],
        _ => &[],
    }
}

/// `ids` plus everything they depend on, in evaluation order.
pub fn closure(ids: &[&str]) -> Vec<&'static str> {
    fn visit(id: &'static str, out: &mut Vec<&'static str>) {
        if out.contains(&id) {
            return;
        }
        for d in dependencies(id) {
            visit(d, out);
        }
        out.push(id);
    }
    let mut out = vec![];
    for &id in IDS.iter().filter(|i| ids.contains(i)) {
        visit(id, &mut out);
    }
    out
}

pub fn parse_ids(list: &str) -> Result<Vec<&'static str>, String> {
    let mut out = vec![];
    for s in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match IDS.iter().find(|i| i.eq_ignore_ascii_case(s)) {
            Some(i) if !out.contains(i) => out.push(*i),
            Some(_) => {}
            None => return Err(format!("unknown certificate id {s:?}; known: {}", IDS.join(","))),
        }
    }
    if out.is_empty() {
        return Err("empty certificate selection".into());
    }
    Ok(out)
}

/// One evaluated certificate with its own wall-clock time, excluding its dependencies.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub cert: Certificate,
    pub seconds: f64,
}

type Stage<T> = Option<Result<T, String>>;

fn stage<T: Clone, E: ToString>(slot: &mut Stage<T>, f: impl FnOnce() -> Result<T, E>) -> Result<T, String> {
    if slot.is_none() {
        *slot = Some(f().map_err(|e| e.to_string()));
    }
    slot.clone().unwrap()
}

pub struct Runner {
    pub cfg: NumericsConfig,
    done: BTreeMap<&'static str, Evaluated>,
    order: Vec<&'static str>,
    integrals: Stage<(RefinedIntegrals, Estimate)>,
    cstar: Stage<CstarResult>,
    root: Stage<RootReport>,
}

impl Runner {
    pub fn new(cfg: NumericsConfig) -> Self {
        Runner {
            cfg,
            done: BTreeMap::new(),
            order: vec![],
            integrals: None,
            cstar: None,
            root: None,
        }
    }

    /// Evaluation order of everything run so far.
    pub fn order(&self) -> &[&'static str] {
        &self.order
    }

    pub fn evaluated(&self, id: &str) -> Option<&Evaluated> {
        self.done.get(id)
    }

    /// Evaluate `id`, running its dependencies first.
    pub fn run(&mut self, id: &'static str) -> Certificate {
        if let Some(e) = self.done.get(id) {
            return e.cert.clone();
        }
        let deps = dependencies(id);
        let mut failed = vec![];
        for &d in deps {
            if !self.run(d).passed() {
                failed.push(d);
            }
        }
        let t = Instant::now();
        let mut cert = if failed.is_empty() {
            self.compute(id)
        } else {
            Certificate::blocked(id, &failed)
        };
        if !deps.is_empty() && failed.is_empty() {
            cert.notes.push(format!("depends on {} (passed)", deps.join(",")));
        }
        let e = Evaluated {
            cert: cert.clone(),
            seconds: t.elapsed().as_secs_f64(),
        };
        self.done.insert(id, e);
        self.order.push(id);
        cert
    }

    pub fn integrals(&mut self) -> Result<(RefinedIntegrals, Estimate), String> {
        let grid = self.cfg.profiles.grid();
        stage(&mut self.integrals, || -> Result<_, String> {
            let i = refined_integrals(&grid).map_err(|e| e.to_string())?;
            let s = c1_scaling_estimate().map_err(|e| e.to_string())?;
            Ok((i, s))
        })
    }

    pub fn constants(&mut self) -> Result<ConstantsReport, String> {
        let (i, s) = self.integrals()?;
        let spec = self.cfg.spectral;
        let c = stage(&mut self.cstar, || compute_cstar_value(&spec))?;
        Ok(assemble_constants(i, s, c))
    }

    pub fn root(&mut self) -> Result<RootReport, String> {
        stage(&mut self.root, root_tauhat_star)
    }

    fn compute(&mut self, id: &str) -> Certificate {
        let thr = self.cfg.threshold;
        let r: Result<Certificate, String> = match id {
            "S1" => {
                let rc = self.cfg.resonance;
                zero_energy_analysis(OpKind::LStar, rc.r_max, rc.rtol).map(|r| check_s1(&r, thr)).map_err(|e| e.to_string())
            }
            "xid" => {
                let tol = self.cfg.resonance.eigen_rtol;
                let a = discrete_eigenvalue(OpKind::LStar, tol);
                let b = discrete_eigenvalue(OpKind::LStar, tol / 2.0);
                match (a, b) {
                    (Ok(Some(a)), Ok(Some(b))) => Ok(check_xid(&a, &b, thr)),
                    (Ok(None), _) | (_, Ok(None)) => Err("no negative eigenvalue found".into()),
                    (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
                }
            }
            "C1" => self.integrals().map(|(i, s)| check_c1(&i, s, thr)),
            "B1" => self.integrals().map(|(i, _)| check_b1(&i, thr)),
            "cstar" => self.constants().map(|c| check_cstar(&c, thr)),
            "alphastar" => self.constants().map(|c| check_alphastar(&c, thr)),
            "C3" => self.constants().map(|c| check_c3(&c, thr)),
            "B2" => self.constants().map(|c| check_b2(&c, thr)),
            "tauhatstar" => self.root().map(|r| check_tauhatstar(&r, thr)),
            "C2" => {
                let m = self.cfg.multiplier;
                self.root().map(|r| check_c2(&r, &m, thr))
            }
            "alphadstar" => self.constants().and_then(|c| {
                beta_anchors(c.integrals.i_c1.value, c.alpha_star_prod.value, &self.cfg.multiplier)
                    .map(|a| check_alphadstar(&a, c.alpha_dstar.value, thr))
                    .map_err(|e| e.to_string())
            }),
            "A1" => {
                let f = self.cfg.fredholm;
                a1_analysis(&f)
                    .and_then(|main| a1_analysis(&f.with_m(2.0 * f.m)).map(|d| check_a1(&main, Some(&d), thr)))
                    .map_err(|e| e.to_string())
            }
            "B3" => self.constants().and_then(|c| {
                let f = self.cfg.fredholm;
                let m = self.cfg.multiplier;
                let a = c.alpha_star_prod.value;
                b3_analysis(&f, a, &m)
                    .and_then(|main| b3_analysis(&f.with_m(2.0 * f.m), a, &m).map(|d| check_b3(&main, Some(&d), thr)))
                    .map_err(|e| e.to_string())
            }),
            other => Err(format!("unknown certificate {other}")),
        };
        r.unwrap_or_else(|e| Certificate::failed(id, &e))
    }
}

/// Run the selected certificates (and, silently, their dependencies); results in report order.
pub fn run_verify(ids: &[&str], cfg: &NumericsConfig) -> Vec<Evaluated> {
    let mut runner = Runner::new(cfg.clone());
    for id in closure(ids) {
        runner.run(id);
    }
    IDS.iter()
        .filter(|i| ids.contains(i))
        .map(|i| runner.evaluated(i).cloned().expect("evaluated"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_is_dependency_ordered() {
        let c = closure(&["B2", "B3"]);
        let pos = |x: &str| c.iter().position(|y| *y == x).unwrap();
        assert!(pos("cstar") < pos("alphastar") && pos("alphastar") < pos("C3") && pos("C3") < pos("B2"));
        assert!(pos("S1") < pos("A1") && pos("xid") < pos("A1") && pos("A1") < pos("B3"));
        assert_eq!(closure(&["C1"]), vec!["C1"]);
        assert_eq!(closure(&["S1"]), vec!["S1"]);
        assert_eq!(closure(&IDS).len(), 13);
    }

    #[test]
    fn parse_selection() {
        assert_eq!(parse_ids("c1, S1,C1").unwrap(), vec!["C1", "S1"]);
        assert!(parse_ids("C9").is_err());
        assert!(parse_ids(" , ").is_err());
    }

    #[test]
    fn c1_alone_does_not_touch_the_spectral_stage() {
        let mut r = Runner::new(NumericsConfig::default());
        let c = r.run("C1");
        assert!(c.passed(), "{c:?}");
        assert!(r.cstar.is_none() && r.root.is_none());
        assert_eq!(r.order(), &["C1"]);
    }

    #[test]
    fn failed_dependency_blocks() {
        let mut cfg = NumericsConfig::default();
        // an impossible pass bar fails cstar, so everything built on it is blocked
        cfg.threshold = 1e300;
        let mut r = Runner::new(cfg);
        let b2 = r.run("B2");
        assert_eq!(b2.verdict, crate::certificate::Verdict::Blocked);
        assert_eq!(r.evaluated("cstar").unwrap().cert.verdict, crate::certificate::Verdict::Fail);
        assert_eq!(r.evaluated("C3").unwrap().cert.verdict, crate::certificate::Verdict::Blocked);
    }
}
