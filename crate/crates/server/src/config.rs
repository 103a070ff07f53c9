use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use cma_core::gate::ApproverEntry;
use cma_core::{EngineConfig, PrincipalId};
use serde::{Deserialize, Serialize};

use crate::ServeError;

/// Service configuration, read from TOML.
///
/// ```toml
/// data_dir = "/var/lib/cma"
/// listen_address = "127.0.0.1:7878"
/// pending_window = "72h"
/// cooling_off = "7days"
///
/// [[approver_registry]]
/// principal = "root"
/// tier_ceiling = "R4"
///
/// [tokens]
/// "s3cret-root" = "root"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub listen_address: String,
    #[serde(with = "humantime_serde")]
    pub pending_window: Duration,
    #[serde(with = "humantime_serde")]
    pub cooling_off: Duration,
    #[serde(with = "humantime_serde")]
    pub recall_half_life: Duration,
    #[serde(with = "humantime_serde")]
    pub retention_horizon: Duration,
    pub decay_floor: f64,
    pub inline_threshold: usize,
    pub max_content: usize,
    pub snapshot_interval: u64,
    pub approver_registry: Vec<ApproverEntry>,
    pub principals: Vec<PrincipalId>,
    pub constitution_authorities: Option<Vec<PrincipalId>>,
    /// Bearer token to principal.
    pub tokens: BTreeMap<String, PrincipalId>,
    /// How often the background task suspends overdue tickets and runs
    /// decay. Zero disables it.
    #[serde(with = "humantime_serde")]
    pub sweep_interval: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let e = EngineConfig::default();
        Self {
            data_dir: PathBuf::from("cma-data"),
            listen_address: "127.0.0.1:7878".into(),
            pending_window: e.pending_window,
            cooling_off: e.cooling_off,
            recall_half_life: e.recall_half_life,
            retention_horizon: e.retention_horizon,
            decay_floor: e.decay_floor,
            inline_threshold: e.inline_threshold,
            max_content: e.max_content,
            snapshot_interval: e.snapshot_interval,
            approver_registry: e.approver_registry,
            principals: e.principals,
            constitution_authorities: e.constitution_authorities,
            tokens: BTreeMap::new(),
            sweep_interval: Duration::from_secs(60),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServeError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ServeError::Config(format!("{}: {e}", path.display())))
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            pending_window: self.pending_window,
            cooling_off: self.cooling_off,
            recall_half_life: self.recall_half_life,
            retention_horizon: self.retention_horizon,
            decay_floor: self.decay_floor,
            inline_threshold: self.inline_threshold,
            max_content: self.max_content,
            snapshot_interval: self.snapshot_interval,
            approver_registry: self.approver_registry.clone(),
            principals: self.principals.clone(),
            constitution_authorities: self.constitution_authorities.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), ServeError> {
        self.engine_config().validate().map_err(ServeError::Config)?;
        if self.tokens.keys().any(|t| t.trim().is_empty()) {
            return Err(ServeError::Config("tokens must be non-empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_example() {
        let c: ServiceConfig = toml::from_str(
            r#"
            data_dir = "/tmp/x"
            pending_window = "72h"
            cooling_off = "0s"
            sweep_interval = "0s"
            [[approver_registry]]
            principal = "root"
            tier_ceiling = "R4"
            [[approver_registry]]
            principal = "alice"
            tier_ceiling = "R4"
            [tokens]
            "t-root" = "root"
            "#,
        )
        .unwrap();
        assert_eq!(c.pending_window, Duration::from_secs(72 * 3600));
        assert_eq!(c.cooling_off, Duration::ZERO);
        assert_eq!(c.listen_address, "127.0.0.1:7878");
        assert_eq!(c.tokens["t-root"].as_str(), "root");
        c.validate().unwrap();
    }

    #[test]
    fn one_r4_approver_is_refused() {
        let c: ServiceConfig = toml::from_str(
            "[[approver_registry]]\nprincipal = \"root\"\ntier_ceiling = \"R4\"\n",
        )
        .unwrap();
        assert!(matches!(c.validate(), Err(ServeError::Config(_))));
        assert!(toml::from_str::<ServiceConfig>("bogus = 1").is_err());
    }
}
