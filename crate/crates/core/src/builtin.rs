//! Built-in desk-scale systems.
//!
//! `bean-analogue` stands in for a transitive planar system with a single
//! two-fold and global return; it is an analogue with similar qualitative
//! features, not a reproduction of any published phase portrait.

use serde::Serialize;

use crate::config::{DomainConfig, SystemConfig};
use crate::error::{Error, Result};
use crate::system::{Domain, NsvfSystem, RegionKind};
use crate::transitivity::CertificateStatus;

#[derive(Debug, Clone, Serialize)]
pub struct ExpectedFeatures {
    /// Region kinds met along the switching manifold inside the domain.
    pub regions: Vec<RegionKind>,
    pub tangencies: usize,
    pub certificate: CertificateStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedSystem {
    pub name: &'static str,
    pub description: &'static str,
    pub config: SystemConfig,
    pub expected: ExpectedFeatures,
    /// Box of seeds for recurrence checks, when it differs from the domain.
    pub seed_box: Option<DomainConfig>,
}

impl NamedSystem {
    pub fn system(&self) -> Result<NsvfSystem> {
        self.config.build()
    }

    /// Seeds for random orbits: the seed box if any, else the domain.
    pub fn seed_domain(&self) -> Result<Domain> {
        let b = self.seed_box.as_ref().unwrap_or(&self.config.domain);
        Domain::new(&b.min, &b.max)
    }
}

pub const NAMES: [&str; 5] = ["linear-crossing", "stable-slide", "escape-fold", "bean-analogue", "two-island"];

fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "linear-crossing" => include_str!("../../../systems/linear-crossing.json"),
        "stable-slide" => include_str!("../../../systems/stable-slide.json"),
        "escape-fold" => include_str!("../../../systems/escape-fold.json"),
        "bean-analogue" => include_str!("../../../systems/bean-analogue.json"),
        "two-island" => include_str!("../../../systems/two-island.json"),
        _ => return None,
    })
}

pub fn builtin(name: &str) -> Result<NamedSystem> {
    use CertificateStatus::*;
    use RegionKind::*;
    let text = source(name).ok_or_else(|| {
        Error::InvalidArgument(format!("unknown builtin {name:?}; known: {}", NAMES.join(", ")))
    })?;
    let config = SystemConfig::parse(text)?;
    let (name, description, regions, tangencies, certificate, seed_box) = match name {
        "linear-crossing" => (
            "linear-crossing",
            "constant fields crossing y = 0 upward everywhere",
            vec![CrossingPositive],
            0,
            Inconclusive,
            None,
        ),
        "stable-slide" => (
            "stable-slide",
            "both fields push into y = 0; sliding field (1, 0)",
            vec![SlidingStable],
            0,
            Inconclusive,
            None,
        ),
        "escape-fold" => (
            "escape-fold",
            "visible fold of Z+ at the origin separating crossing (x < 0) from escaping sliding (x > 0)",
            vec![CrossingNegative, Tangency, SlidingUnstable],
            1,
            CounterexampleCandidate,
            None,
        ),
        "bean-analogue" => (
            "bean-analogue",
            "rotation about (0, 1) above y = 0, cubic shear below; two-fold at the origin, \
             Z- folds at x = -1 and x = 1, every orbit in the seed annulus returns to the origin",
            vec![CrossingNegative, Tangency, SlidingStable, Tangency, SlidingUnstable, Tangency, CrossingPositive],
            3,
            CertifiedAtDeskScale,
            Some(DomainConfig { min: vec![1.05, 0.5], max: vec![1.3, 1.5] }),
        ),
        "two-island" => (
            "two-island",
            "two folds of Z+ at x = -1 and x = 1 fed by a stable slide moving away from x = 0; \
             no segment joins them",
            vec![CrossingPositive, Tangency, SlidingStable, Tangency, CrossingPositive],
            2,
            CounterexampleCandidate,
            None,
        ),
        _ => unreachable!(),
    };
    Ok(NamedSystem {
        name,
        description,
        config,
        expected: ExpectedFeatures { regions, tangencies, certificate },
        seed_box,
    })
}

pub fn all() -> Vec<NamedSystem> {
    NAMES.iter().map(|n| builtin(n).expect("builtin configs are valid")).collect()
}
