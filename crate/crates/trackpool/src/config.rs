//! Run configuration: one JSON document with optional sections `model`,
//! `train`, `tracker` and `sim`. Absent keys take their defaults, unknown
//! keys are reported and ignored, and every section is validated on load.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use trackpool_core::classifier::{ModelConfig, Profile};
use trackpool_core::sim::ScenarioSpec;
use trackpool_core::tracker::TrackerConfig;
use trackpool_core::training::TrainConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub tracker: TrackerConfig,
    pub sim: ScenarioSpec,
}

impl RunConfig {
    pub fn defaults(profile: Profile) -> Self {
        let model = ModelConfig::profile(profile);
        let sim = ScenarioSpec {
            embed_dim: model.embed_dim,
            ..ScenarioSpec::default()
        };
        Self {
            model,
            train: TrainConfig::default(),
            tracker: TrackerConfig::default(),
            sim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.tracker.validate()?;
        self.sim.validate()?;
        if self.sim.embed_dim != self.model.embed_dim {
            return Err(config_error(
                "sim.embed_dim",
                format!("must equal model.embed_dim ({})", self.model.embed_dim),
            ));
        }
        Ok(())
    }

    /// Seeds every random source from one value.
    pub fn reseed(&mut self, seed: u64) {
        self.model.init_seed = seed;
        self.train.seed = seed;
        self.sim.seed = seed;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn config_error(key: &str, reason: impl Into<String>) -> Error {
    Error::Core(trackpool_core::Error::Config {
        key: key.into(),
        reason: reason.into(),
    })
}

/// Overlays `user` onto `base` one key at a time so a bad value is reported
/// under its own key.
fn merge_section<T: Serialize + DeserializeOwned>(
    name: &str,
    base: &T,
    user: &Map<String, Value>,
    warnings: &mut Vec<String>,
) -> Result<T> {
    let Value::Object(mut merged) = serde_json::to_value(base)? else {
        unreachable!("sections serialize to objects")
    };
    for (key, value) in user {
        let full = format!("{name}.{key}");
        if !merged.contains_key(key) {
            log::warn!("ignoring unknown config key `{full}`");
            warnings.push(full);
            continue;
        }
        let mut trial = merged.clone();
        trial.insert(key.clone(), value.clone());
        if let Err(e) = serde_json::from_value::<T>(Value::Object(trial)) {
            return Err(config_error(&full, e.to_string()));
        }
        merged.insert(key.clone(), value.clone());
    }
    Ok(serde_json::from_value(Value::Object(merged))?)
}

/// A loaded configuration and the keys that were ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub config: RunConfig,
    pub unknown_keys: Vec<String>,
}

pub fn parse_config(text: &str, profile: Profile) -> Result<Loaded> {
    let doc: Value = serde_json::from_str(text)?;
    let Value::Object(doc) = doc else {
        return Err(config_error("<root>", "expected a JSON object"));
    };
    let empty = Map::new();
    let section = |name: &str| -> Result<&Map<String, Value>> {
        match doc.get(name) {
            None => Ok(&empty),
            Some(Value::Object(m)) => Ok(m),
            Some(_) => Err(config_error(name, "expected an object")),
        }
    };
    let mut warnings = Vec::new();
    for key in doc.keys() {
        if !["model", "train", "tracker", "sim"].contains(&key.as_str()) {
            log::warn!("ignoring unknown config section `{key}`");
            warnings.push(key.clone());
        }
    }
    let defaults = RunConfig::defaults(profile);
    let model: ModelConfig = merge_section("model", &defaults.model, section("model")?, &mut warnings)?;
    // the simulator follows the model's input width unless told otherwise
    let sim_base = ScenarioSpec {
        embed_dim: model.embed_dim,
        ..defaults.sim
    };
    let config = RunConfig {
        train: merge_section("train", &defaults.train, section("train")?, &mut warnings)?,
        tracker: merge_section("tracker", &defaults.tracker, section("tracker")?, &mut warnings)?,
        sim: merge_section("sim", &sim_base, section("sim")?, &mut warnings)?,
        model,
    };
    config.validate()?;
    Ok(Loaded {
        config,
        unknown_keys: warnings,
    })
}

pub fn load_config(path: &std::path::Path, profile: Profile) -> Result<Loaded> {
    parse_config(&crate::error::read_to_string(path)?, profile)
}
