//! JSON system descriptions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{Domain, NsvfSystem, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// `{dimension, h, zplus, zminus, domain: {min, max}, z_bound, tolerances?}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dimension: usize,
    pub h: String,
    pub zplus: Vec<String>,
    pub zminus: Vec<String>,
    pub domain: DomainConfig,
    pub z_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Compiles the expressions and verifies the bound and regularity.
    pub fn build(&self) -> Result<NsvfSystem> {
        let n = self.dimension;
        if self.zplus.len() != n || self.zminus.len() != n || self.domain.min.len() != n {
            return Err(Error::Config(format!(
                "dimension {n} disagrees with zplus ({}), zminus ({}) or domain ({}) lengths",
                self.zplus.len(),
                self.zminus.len(),
                self.domain.min.len()
            )));
        }
        let domain = Domain::new(&self.domain.min, &self.domain.max)?;
        NsvfSystem::from_strings(
            &self.h,
            &self.zplus,
            &self.zminus,
            domain,
            self.z_bound,
            self.tolerances.clone().unwrap_or_default(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = r#"{
        "dimension": 2, "h": "y", "zplus": ["1", "1"], "zminus": ["1", "0.5"],
        "domain": {"min": [-2, -2], "max": [2, 2]}, "z_bound": 1.5
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = SystemConfig::parse(LINEAR).unwrap();
        let sys = cfg.build().unwrap();
        assert_eq!(sys.dim(), 2);
        assert_eq!(SystemConfig::parse(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn rejects_mismatched_dimension() {
        let text = LINEAR.replace("\"dimension\": 2", "\"dimension\": 3");
        let err = SystemConfig::parse(&text).unwrap().build().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_unknown_field() {
        let text = LINEAR.replace("\"z_bound\"", "\"zbound\"");
        assert!(matches!(SystemConfig::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_bound() {
        let text = LINEAR.replace("1.5", "1.0");
        assert!(matches!(
            SystemConfig::parse(&text).unwrap().build(),
            Err(Error::ZBoundViolated { .. })
        ));
    }
}
