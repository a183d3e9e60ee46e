//! Layered configuration: defaults, then environment, then a TOML file,
//! then command-line flags. Layers are merged as JSON trees before the
//! result is deserialized, so every layer may set any subset of keys.

use std::collections::BTreeMap;
use std::path::Path;

use factoid_core::forge::ForgeConfig;
use factoid_core::hvi::{StatsBasis, DEFAULT_DELTA_FLOOR};
use factoid_core::oracle::{ProviderConfig, API_BASE_ENV};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HviSettings {
    pub lambda: f64,
    pub precision: usize,
    pub delta_floor: f64,
    pub basis: StatsBasis,
}

impl Default for HviSettings {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            precision: 2,
            delta_floor: DEFAULT_DELTA_FLOOR,
            basis: StatsBasis::CategoryCounts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub jobs: usize,
    pub forge: ForgeConfig,
    pub provider: ProviderConfig,
    pub hvi: HviSettings,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            jobs: 1,
            forge: ForgeConfig::default(),
            provider: ProviderConfig::default(),
            hvi: HviSettings::default(),
        }
    }
}

impl CliConfig {
    /// The config as written into output headers. `jobs` is left out: it
    /// changes scheduling, never results.
    pub fn recorded(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("jobs");
        }
        v
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.recorded().to_string().as_bytes()))
    }
}

/// Recursively overlay `top` onto `base`. Objects merge key by key; any
/// other value replaces what was there.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// A sparse tree of overrides addressed by dotted paths.
#[derive(Debug, Default, Clone)]
pub struct Patch(Value);

impl Patch {
    pub fn new() -> Self {
        Self(Value::Object(Map::new()))
    }

    pub fn set(&mut self, path: &str, v: impl Serialize) {
        let mut cur = &mut self.0;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, p) in parts.iter().enumerate() {
            let obj = cur.as_object_mut().expect("patch nodes are objects");
            if i + 1 == parts.len() {
                obj.insert(p.to_string(), serde_json::to_value(&v).expect("patch value serializes"));
                return;
            }
            cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new()));
        }
    }

    pub fn opt<T: Serialize>(&mut self, path: &str, v: Option<T>) {
        if let Some(v) = v {
            self.set(path, v);
        }
    }

    pub fn into_value(self) -> Value {
        self.0
    }
}

pub fn env_layer(env: &BTreeMap<String, String>) -> Patch {
    let mut p = Patch::new();
    p.opt("provider.endpoint", env.get(API_BASE_ENV));
    p
}

pub fn file_layer(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path.display(), e))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::to_value(table).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Resolve defaults < env < file < flags.
pub fn resolve(env: &BTreeMap<String, String>, file: Option<&Path>, flags: Patch) -> Result<CliConfig, CliError> {
    let mut tree = serde_json::to_value(CliConfig::default()).expect("default config serializes");
    merge(&mut tree, env_layer(env).into_value());
    if let Some(f) = file {
        merge(&mut tree, file_layer(f)?);
    }
    merge(&mut tree, flags.into_value());
    let cfg: CliConfig = serde_json::from_value(tree).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    if cfg.jobs == 0 {
        return Err(CliError::Usage("jobs must be >= 1".into()));
    }
    cfg.forge.validate()?;
    cfg.provider.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}
