//! Certificates: a computed quantity, its error estimate and its distance from the value
//! that would break the corresponding non-degeneracy condition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD: f64 = 10.0;

/// Certificate identifiers in report order.
pub const IDS: [&str; 13] = [
    "S1",
    "A1",
    "B1",
    "B2",
    "B3",
    "C1",
    "C2",
    "C3",
    "cstar",
    "alphastar",
    "alphadstar",
    "tauhatstar",
    "xid",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CertValue {
    Real(f64),
    Complex([f64; 2]),
}

impl CertValue {
    pub fn dist(&self, forbidden: Complex64) -> f64 {
        match *self {
            CertValue::Real(x) => (Complex64::new(x, 0.0) - forbidden).norm(),
            CertValue::Complex([a, b]) => (Complex64::new(a, b) - forbidden).norm(),
        }
    }

    pub fn re(&self) -> f64 {
        match *self {
            CertValue::Real(x) => x,
            CertValue::Complex([a, _]) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// not evaluated because a dependency did not pass
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub id: String,
    pub value: CertValue,
    pub error: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl Certificate {
    /// margin = |value - forbidden| / error; pass iff margin > threshold and error > 0.
    pub fn new(id: &str, value: CertValue, error: f64, forbidden: Complex64, threshold: f64) -> Self {
        let margin = if error > 0.0 { value.dist(forbidden) / error } else { 0.0 };
        let ok = error > 0.0 && margin.is_finite() && margin > threshold;
        Certificate {
            id: id.to_string(),
            value,
            error,
            margin,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            notes: vec![],
        }
    }

    pub fn real(id: &str, value: f64, error: f64, forbidden: f64, threshold: f64) -> Self {
        Certificate::new(id, CertValue::Real(value), error, Complex64::new(forbidden, 0.0), threshold)
    }

    /// A certificate whose computation failed.
    pub fn failed(id: &str, reason: &str) -> Self {
        Certificate {
            id: id.to_string(),
            value: CertValue::Real(0.0),
            error: 0.0,
            margin: 0.0,
            verdict: Verdict::Fail,
            notes: vec![format!("error: {reason}")],
        }
    }

    /// A certificate skipped because the listed dependencies did not pass.
    pub fn blocked(id: &str, deps: &[&str]) -> Self {
        Certificate {
            id: id.to_string(),
            value: CertValue::Real(0.0),
            error: 0.0,
            margin: 0.0,
            verdict: Verdict::Blocked,
            notes: vec![format!("blocked by {}", deps.join(","))],
        }
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    /// Fail the certificate with a reason, keeping the computed numbers.
    pub fn fail_with(mut self, s: impl Into<String>) -> Self {
        self.verdict = Verdict::Fail;
        self.notes.push(s.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Error floor so that estimates never collapse to zero on exact agreement.
pub fn floor_error(err: f64, value: f64) -> f64 {
    err.max(4.0 * f64::EPSILON * value.abs()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_and_verdict() {
        let c = Certificate::real("B2", 2.0 / 3.0, 1e-6, 1.0, 10.0);
        assert!(c.passed());
        assert!((c.margin - (1.0 / 3.0) / 1e-6).abs() < 1e-3);
        let z = Certificate::real("C1", 1e-7, 1e-6, 0.0, 10.0);
        assert!(!z.passed());
        let e = Certificate::real("C1", 1.0, 0.0, 0.0, 10.0);
        assert!(!e.passed());
    }

    #[test]
    fn json_shape() {
        let c = Certificate::new("C2", CertValue::Complex([1.0, -2.0]), 1e-3, Complex64::new(0.0, 0.0), 10.0);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"value\":[1.0,-2.0]") && s.contains("\"verdict\":\"pass\""), "{s}");
    }
}
