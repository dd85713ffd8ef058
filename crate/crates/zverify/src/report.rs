//! JSON report and the plain summary table. The report holds no timing and no timestamps,
//! so identical configurations give byte-identical files.

use crate::certificate::{CertValue, Certificate, Verdict, IDS};
use crate::config::NumericsConfig;
use crate::verify::Evaluated;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    pub value: CertValue,
    pub error: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub config_hash: String,
    pub notes: Vec<String>,
}

impl Entry {
    pub fn new(c: &Certificate, config_hash: &str) -> Self {
        let mut c = c.clone();
        let finite = match c.value {
            CertValue::Real(x) => x.is_finite(),
            CertValue::Complex([a, b]) => a.is_finite() && b.is_finite(),
        } && c.error.is_finite()
            && c.margin.is_finite();
        if !finite {
            c = Certificate::failed(&c.id, "non-finite value, error or margin").note(c.notes.join("; "));
        }
        Entry {
            id: c.id,
            value: c.value,
            error: c.error,
            margin: c.margin,
            verdict: c.verdict,
            config_hash: config_hash.to_string(),
            notes: c.notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: NumericsConfig,
    pub certificates: Vec<Entry>,
    pub overall: Verdict,
}

fn overall(entries: &[Entry]) -> Verdict {
    if !entries.is_empty() && entries.iter().all(|e| e.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

impl Report {
    pub fn new(cfg: &NumericsConfig, certs: &[Certificate]) -> Self {
        let hash = cfg.hash();
        let certificates: Vec<Entry> = certs.iter().map(|c| Entry::new(c, &hash)).collect();
        Report {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: hash,
            overall: overall(&certificates),
            config: cfg.clone(),
            certificates,
        }
    }

    pub fn from_evaluated(cfg: &NumericsConfig, ev: &[Evaluated]) -> Self {
        let certs: Vec<Certificate> = ev.iter().map(|e| e.cert.clone()).collect();
        Report::new(cfg, &certs)
    }

    pub fn passed(&self) -> bool {
        self.overall == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map_err(|e| e.to_string())
    }

    /// Combine partial runs of one configuration; a later report overrides an earlier one
    /// for the same id. Reports of different configurations are refused.
    pub fn merge(parts: &[Report]) -> Result<Report, String> {
        let first = parts.first().ok_or("nothing to merge")?;
        if let Some(p) = parts.iter().find(|p| p.config_hash != first.config_hash) {
            return Err(format!("config hash mismatch: {} vs {}", first.config_hash, p.config_hash));
        }
        if let Some(p) = parts.iter().find(|p| p.version != first.version) {
            return Err(format!("tool version mismatch: {} vs {}", first.version, p.version));
        }
        let mut certificates = vec![];
        for id in IDS {
            if let Some(e) = parts.iter().rev().flat_map(|p| p.certificates.iter()).find(|e| e.id == id) {
                certificates.push(e.clone());
            }
        }
        Ok(Report {
            tool: first.tool.clone(),
            version: first.version.clone(),
            config_hash: first.config_hash.clone(),
            config: first.config.clone(),
            overall: overall(&certificates),
            certificates,
        })
    }

    /// Human-readable table; `seconds` adds a wall-clock column when given.
    pub fn summary(&self, seconds: Option<&[f64]>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<11} {:>24} {:>10} {:>10} {:>8}{}", "id", "value", "error", "margin", "verdict", if seconds.is_some() { "     time" } else { "" });
        for (k, e) in self.certificates.iter().enumerate() {
            let v = match e.value {
                CertValue::Real(x) => format!("{x:.10e}"),
                CertValue::Complex([a, b]) => format!("{a:.4e}{b:+.4e}i"),
            };
            let verdict = match e.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::Blocked => "BLOCKED",
            };
            let t = seconds.and_then(|t| t.get(k)).map(|t| format!(" {t:>7.2}s")).unwrap_or_default();
            let _ = writeln!(s, "{:<11} {:>24} {:>10.2e} {:>10.2e} {:>8}{t}", e.id, v, e.error, e.margin, verdict);
        }
        let _ = writeln!(s, "overall: {}  config {}", if self.passed() { "pass" } else { "FAIL" }, &self.config_hash[..16]);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cert(id: &str, v: f64) -> Certificate {
        Certificate::real(id, v, 1e-6, 0.0, 10.0)
    }

    #[test]
    fn overall_and_merge() {
        let cfg = NumericsConfig::default();
        let a = Report::new(&cfg, &[cert("C1", 32.0), cert("S1", 1e-7)]);
        assert!(!a.passed());
        let b = Report::new(&cfg, &[cert("S1", 0.5)]);
        let m = Report::merge(&[a.clone(), b]).unwrap();
        assert!(m.passed());
        assert_eq!(m.certificates.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(), vec!["S1", "C1"]);
        let mut other = cfg.clone();
        other.seed += 1;
        assert!(Report::merge(&[a, Report::new(&other, &[cert("C1", 32.0)])]).is_err());
    }

    #[test]
    fn json_round_trip_is_stable() {
        let cfg = NumericsConfig::default();
        let r = Report::new(&cfg, &[cert("C1", 32.0), Certificate::blocked("B2", &["C3"])]);
        let s = r.to_json();
        let back = Report::from_json(&s).unwrap();
        assert_eq!(back.to_json(), s);
        assert!(s.contains("\"verdict\": \"blocked\"") && s.contains("\"config_hash\""));
        assert!(!back.passed());
    }

    #[test]
    fn non_finite_values_fail() {
        let c = Certificate::real("C1", f64::NAN, 1e-6, 0.0, 10.0);
        let e = Entry::new(&c, "h");
        assert_eq!(e.verdict, Verdict::Fail);
        assert!(serde_json::to_string(&e).unwrap().contains("non-finite"));
    }
}
