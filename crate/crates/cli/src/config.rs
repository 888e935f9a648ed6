//! JSON run configuration. Flags given on the command line override values
//! from the file; the master seed must come from one or the other.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;

/// Parse a config file, or the type's defaults when there is none.
///
/// Unknown fields are rejected; serde's message carries the field name and
/// the line and column of the problem.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!("invalid config {}: {e}", path.display()))
}

/// Overwrite `slot` with a flag value when the flag was given.
pub fn override_with<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

pub fn require_seed(from_file: Option<u64>, from_flag: Option<u64>) -> Result<u64> {
    from_flag
        .or(from_file)
        .ok_or_else(|| anyhow!("a master seed is required: pass --seed or set \"seed\" in the config"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;
    use std::io::Write;

    #[derive(Debug, Default, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        seed: Option<u64>,
        trials: usize,
    }

    #[test]
    fn malformed_config_reports_position() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{{\n  \"seed\": 1,\n  \"trails\": 5\n}}").unwrap();
        let err = load::<Demo>(Some(f.path())).unwrap_err().to_string();
        assert!(err.contains("trails") && err.contains("line 3"), "{err}");
    }

    #[test]
    fn defaults_and_overrides() {
        let d: Demo = load(None).unwrap();
        assert_eq!(d, Demo::default());
        let mut trials = 3;
        override_with(&mut trials, Some(9));
        override_with(&mut trials, None);
        assert_eq!(trials, 9);
        assert_eq!(require_seed(Some(1), Some(2)).unwrap(), 2);
        assert_eq!(require_seed(Some(1), None).unwrap(), 1);
        assert!(require_seed(None, None).is_err());
    }
}
