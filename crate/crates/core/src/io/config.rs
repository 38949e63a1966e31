//! Run configuration in TOML with `[tracker]`, `[motion]`, `[aggregation]`
//! and `[simulator]` sections. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::AggregationConfig;
use crate::error::{Error, Result};
use crate::motion::MotionConfig;
use crate::sim::SimConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub motion: MotionConfig,
    pub aggregation: AggregationConfig,
    pub simulator: SimConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.motion.validate()?;
        self.aggregation.validate()?;
        self.simulator.validate()
    }

    /// Parse and validate.
    pub fn from_toml(text: &str, source_name: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
            Error::parse(source_name, line, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(super::read_file(path)?)
            .map_err(|_| Error::parse(path.display().to_string(), 0, "not UTF-8"))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration is serialisable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::Method;
    use crate::taxonomy::Species;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("", "x").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
[tracker]
tau_high = 0.7
gating = false

[aggregation]
method = "hierarchical"

[simulator]
seed = 7
stop_events = [{ start = 10, duration = 5 }, { start = 40, duration = 3, reverse = true }]

[simulator.fish_count]
BET = 1
YFT = 2
"#;
        let cfg = RunConfig::from_toml(text, "x").unwrap();
        assert_eq!(cfg.tracker.tau_high, 0.7);
        assert!(!cfg.tracker.gating);
        assert_eq!(cfg.tracker.tau_low, 0.1);
        assert_eq!(cfg.aggregation.method, Method::Hierarchical);
        assert_eq!(cfg.simulator.stop_events.len(), 2);
        assert!(cfg.simulator.stop_events[1].reverse);
        assert_eq!(cfg.simulator.fish_count.get(&Species::Yft), Some(&2));
        assert_eq!(cfg.simulator.fish_count.get(&Species::Skj), None);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = RunConfig::from_toml("[tracker]\ntau_hgih = 0.5\n", "run.toml").unwrap_err();
        match err {
            Error::Parse { source_name, line, message } => {
                assert_eq!(source_name, "run.toml");
                assert_eq!(line, 2);
                assert!(message.contains("tau_hgih"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::from_toml("[trakcer]\n", "x").is_err());
    }

    #[test]
    fn invalid_values_are_contract_errors() {
        let err = RunConfig::from_toml("[tracker]\ntau_low = 0.7\ntau_high = 0.6\n", "x").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = RunConfig::from_toml("[motion]\nsmoothing_window = 2\n", "x").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml(), "x").unwrap(), cfg);
    }
}
