//! Run configuration. Every constant the analysis leaves unspecified lives here with its
//! default; the resolved configuration is echoed into each report and hashed.

use crate::fredholm::FredholmConfig;
use crate::multipliers::MultiplierConfig;
use crate::profiles::default_grid;
use crate::propagators::PropagatorConfig;
use crate::radial::LogGrid;
use crate::spectral::SpectralConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {0}: {1}")]
    Io(String, std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Geometric profile grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileGridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for ProfileGridConfig {
    fn default() -> Self {
        let g = default_grid();
        ProfileGridConfig {
            r_min: g.r_min(),
            r_max: g.r_max(),
            points: g.len(),
        }
    }
}

impl ProfileGridConfig {
    pub fn grid(&self) -> Arc<LogGrid> {
        Arc::new(LogGrid::new(self.r_min, self.r_max, self.points))
    }
}

/// Zero-energy fit of L* and the bound-state search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonanceConfig {
    /// fit window is [R_max/4, R_max]; the doubled check uses 2 R_max
    pub r_max: f64,
    pub rtol: f64,
    /// the ξ_d value is compared against a run at eigen_rtol / 2
    pub eigen_rtol: f64,
}

impl Default for ResonanceConfig {
    fn default() -> Self {
        ResonanceConfig {
            r_max: 1000.0,
            rtol: 1e-11,
            eigen_rtol: 1e-11,
        }
    }
}

/// Seeded property suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyConfig {
    pub carleman_cases: usize,
    pub hankel_bumps: usize,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        PropertyConfig {
            carleman_cases: 100,
            hankel_bumps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub report: String,
    pub dump_dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            report: "report.json".into(),
            dump_dir: "dumps".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// blow-up rate λ = t^(-1/2-ν)
    pub nu: f64,
    /// seed of every randomized suite
    pub seed: u64,
    /// pass bar: margin > threshold
    pub threshold: f64,
    pub profiles: ProfileGridConfig,
    pub resonance: ResonanceConfig,
    pub spectral: SpectralConfig,
    pub multiplier: MultiplierConfig,
    pub fredholm: FredholmConfig,
    pub propagators: PropagatorConfig,
    pub properties: PropertyConfig,
    pub output: OutputConfig,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            nu: 8.0,
            seed: 20240917,
            threshold: crate::certificate::DEFAULT_THRESHOLD,
            profiles: ProfileGridConfig::default(),
            resonance: ResonanceConfig::default(),
            spectral: SpectralConfig::default(),
            multiplier: MultiplierConfig::default(),
            fredholm: FredholmConfig::default(),
            propagators: PropagatorConfig::default(),
            properties: PropertyConfig::default(),
            output: OutputConfig::default(),
        }
        .resolved()
    }
}

impl NumericsConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        let c: NumericsConfig = toml::from_str(s)?;
        let c = c.resolved();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        NumericsConfig::from_toml(&s)
    }

    /// Propagate the shared ν into the sub-configurations.
    pub fn resolved(mut self) -> Self {
        self.multiplier.nu = self.nu;
        self.propagators.nu = self.nu;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.nu > 1.0) {
            return bad("nu must exceed 1");
        }
        if !(self.threshold > 0.0) {
            return bad("threshold must be positive");
        }
        let tols = [
            self.resonance.rtol,
            self.resonance.eigen_rtol,
            self.spectral.rtol,
            self.fredholm.rtol,
            self.fredholm.volterra_tol,
            self.fredholm.wronskian_tol,
            self.propagators.rtol,
        ];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return bad("all tolerances must be positive");
        }
        let p = &self.profiles;
        if !(p.r_min > 0.0 && p.r_max > p.r_min && p.points >= 16) {
            return bad("profile grid must satisfy 0 < r_min < r_max with at least 16 points");
        }
        let s = &self.spectral;
        if !(s.xi_min > 0.0 && s.xi_mid > s.xi_min && s.xi_max > s.xi_mid && s.per_decade > 0 && s.uniform_h > 0.0) {
            return bad("spectral scan must satisfy 0 < xi_min < xi_mid < xi_max");
        }
        let f = &self.fredholm;
        if !(f.a1_tau_max > f.a1_tau_min && f.a1_tau_min > 0.0 && f.a1_points >= 2) {
            return bad("A1 scan range is empty");
        }
        if !(f.gamma1 > 0.0 && f.gamma1 < 1.0 && f.b3_points >= 2) {
            return bad("B3 scan needs 0 < gamma1 < 1");
        }
        if !(f.m > 0.0 && f.delta0 >= 0.0) {
            return bad("truncation radius M must be positive");
        }
        if !(self.resonance.r_max > 10.0) {
            return bad("resonance R_max too small for the fit window");
        }
        Ok(())
    }

    /// Canonical TOML echo of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_toml().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = NumericsConfig::default();
        let back = NumericsConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        assert_eq!(back.multiplier.nu, 8.0);
    }

    #[test]
    fn partial_files_and_validation() {
        let c = NumericsConfig::from_toml("nu = 4.0\n[fredholm]\nm = 30.0\n").unwrap();
        assert_eq!(c.fredholm.m, 30.0);
        assert_eq!(c.propagators.nu, 4.0);
        assert_eq!(c.fredholm.delta0, 0.1);
        assert_ne!(c.hash(), NumericsConfig::default().hash());
        assert!(NumericsConfig::from_toml("nu = 1.0").is_err());
        assert!(NumericsConfig::from_toml("[spectral]\nrtol = 0.0").is_err());
        assert!(NumericsConfig::from_toml("typo = 1").is_err());
    }
}
