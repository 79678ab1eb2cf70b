use std::fs;
use std::path::Path;

use anyhow::Context;
use fairgen::pipeline::RunConfig;

use crate::UsageError;

pub const SEED_ENV: &str = "FAIRGEN_SEED";

/// A run config loaded from TOML, remembering whether the file set a seed.
pub struct Loaded {
    pub config: RunConfig,
    pub file_seed: bool,
}

pub fn load(path: Option<&Path>) -> anyhow::Result<Loaded> {
    let Some(path) = path else {
        return Ok(Loaded {
            config: RunConfig::default(),
            file_seed: false,
        });
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
    let file_seed = table.contains_key("seed");
    let config: RunConfig = toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
    Ok(Loaded { config, file_seed })
}

/// Seed precedence: flag, then config file, then `FAIRGEN_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, loaded: &Loaded) -> anyhow::Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if loaded.file_seed {
        return Ok(loaded.config.seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{SEED_ENV}={v:?} is not an unsigned integer")).into()),
        Err(_) => Ok(0),
    }
}
