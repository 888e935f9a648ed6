pub mod checks;
pub mod heterodyne;
pub mod isotropic;
pub mod theory;

use anyhow::{anyhow, Result};
use serde::de::DeserializeOwned;

/// Parse a kebab-case enum value through its serde representation.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| anyhow!("{e}"))
}
