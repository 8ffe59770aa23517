//! Configurations compiled into the binary.

use crate::config::{parse, Loaded};
use crate::error::CliError;

/// Figure names accepted by `sweep --figure`.
pub const FIGURES: [&str; 7] = ["1e", "2b", "3a", "3c", "3d", "3e", "s2"];

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "reference" => include_str!("../presets/reference.toml"),
        "1e" => include_str!("../presets/1e.toml"),
        "2b" => include_str!("../presets/2b.toml"),
        "3a" => include_str!("../presets/3a.toml"),
        "3c" => include_str!("../presets/3c.toml"),
        "3d" => include_str!("../presets/3d.toml"),
        "3e" => include_str!("../presets/3e.toml"),
        "s2" => include_str!("../presets/s2.toml"),
        _ => return None,
    })
}

pub fn load(name: &str) -> Result<Loaded, CliError> {
    let text = source(name).ok_or_else(|| CliError::Config(format!("unknown preset {name}")))?;
    parse(text, &format!("preset {name}"))
}
