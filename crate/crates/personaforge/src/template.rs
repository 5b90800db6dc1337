//! Prompt templates with `{{slot}}` substitution.
//!
//! The judge prompts used for win-rate and dimensional scoring are fixed
//! instruments; golden-file tests pin their rendered form so wording drift
//! fails CI. The interview-side templates (persona preamble, suitability
//! screen, per-item trait judge) are editable defaults and can be overridden
//! from a directory of `.txt` files.

use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template `{0}`")]
    Unknown(String),
    #[error("slot `{{{{{0}}}}}` was not filled")]
    UnfilledSlot(String),
    #[error("reading template dir: {0}")]
    Io(#[from] std::io::Error),
}

/// Template names, as used by `TemplateSet::get` and override filenames.
pub mod names {
    pub const RPA_SYSTEM: &str = "rpa_system";
    pub const SUITABILITY: &str = "suitability";
    pub const ITEM_JUDGE: &str = "item_judge";
    pub const MCQ_USER: &str = "mcq_user";
    pub const WINRATE_SYSTEM: &str = "winrate_system";
    pub const WINRATE_USER: &str = "winrate_user";
    pub const DIM_MEMORIZATION: &str = "dim_memorization";
    pub const DIM_PERSONALITY: &str = "dim_personality";
    pub const DIM_VALUES: &str = "dim_values";
    pub const DIM_STABILITY: &str = "dim_stability";
    pub const DIM_HALLUCINATION: &str = "dim_hallucination";
}

const EMBEDDED: &[(&str, &str)] = &[
    (
        names::RPA_SYSTEM,
        include_str!("../templates/rpa_system.txt"),
    ),
    (
        names::SUITABILITY,
        include_str!("../templates/suitability.txt"),
    ),
    (
        names::ITEM_JUDGE,
        include_str!("../templates/item_judge.txt"),
    ),
    (names::MCQ_USER, include_str!("../templates/mcq_user.txt")),
    (
        names::WINRATE_SYSTEM,
        include_str!("../templates/winrate_system.txt"),
    ),
    (
        names::WINRATE_USER,
        include_str!("../templates/winrate_user.txt"),
    ),
    (
        names::DIM_MEMORIZATION,
        include_str!("../templates/dim_memorization.txt"),
    ),
    (
        names::DIM_PERSONALITY,
        include_str!("../templates/dim_personality.txt"),
    ),
    (
        names::DIM_VALUES,
        include_str!("../templates/dim_values.txt"),
    ),
    (
        names::DIM_STABILITY,
        include_str!("../templates/dim_stability.txt"),
    ),
    (
        names::DIM_HALLUCINATION,
        include_str!("../templates/dim_hallucination.txt"),
    ),
];

/// A named collection of templates.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    map: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::embedded()
    }
}

impl TemplateSet {
    /// The templates compiled into the library.
    pub fn embedded() -> Self {
        let map = EMBEDDED
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        TemplateSet { map }
    }

    /// Embedded templates with overrides from `dir`: any `<name>.txt` file
    /// there replaces the embedded template of the same name.
    pub fn with_overrides(dir: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let mut set = Self::embedded();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if set.map.contains_key(name) {
                set.map
                    .insert(name.to_string(), std::fs::read_to_string(&path)?);
            } else {
                log::warn!("ignoring unknown template override `{}`", path.display());
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Result<&str, TemplateError> {
        self.map
            .get(name)
            .map(|s| s.as_str())
            .ok_or_else(|| TemplateError::Unknown(name.to_string()))
    }

    /// Render template `name` with the given slot values.
    pub fn render(&self, name: &str, slots: &[(&str, &str)]) -> Result<String, TemplateError> {
        render(self.get(name)?, slots)
    }
}

/// Replace every `{{key}}` with its value; any slot left over is an error.
pub fn render(template: &str, slots: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = template.to_string();
    for (key, value) in slots {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    if let Some(start) = out.find("{{") {
        let rest = &out[start + 2..];
        let name: String = rest.chars().take_while(|c| *c != '}').collect();
        return Err(TemplateError::UnfilledSlot(name));
    }
    Ok(out)
}
