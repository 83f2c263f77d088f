use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA: u32 = 1;

pub fn config_hash(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Top-level JSON document; `timestamp` is the only field that varies
/// between identical runs.
pub fn envelope(command: &str, config_hash: &str, seed: u64, budget: &str, exit_code: i32, result: Value) -> Value {
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    json!({
        "schema": SCHEMA,
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": config_hash,
        "seed": seed,
        "budget": budget,
        "exit_code": exit_code,
        "timestamp": ts,
        "result": result,
    })
}

/// The report with the timestamp removed, for reproducibility comparisons.
pub fn without_timestamp(mut v: Value) -> Value {
    if let Some(o) = v.as_object_mut() {
        o.remove("timestamp");
    }
    v
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(path)?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self) -> &Path {
        &self.0
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let p = self.0.join(name);
        std::fs::write(&p, contents)?;
        Ok(p)
    }

    pub fn write_json(&self, name: &str, v: &Value) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            config_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn timestamp_stripped() {
        let a = envelope("certify", "x", 1, "smoke", 0, json!({"v": 1}));
        let b = without_timestamp(a.clone());
        assert!(a.get("timestamp").is_some() && b.get("timestamp").is_none());
        assert_eq!(b["schema"], 1);
    }
}
