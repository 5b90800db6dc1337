//! Character profiles, memory excerpts, and annotated personality ground truth.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Value, json};

use crate::jsonv::{Cursor, SchemaError};
use crate::scales::{LabelKind, Level, ScaleBank};
use crate::util::tokenize;

/// Where a character profile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    RoleLLM,
    ChatHaruhi,
    Other,
}

/// Train/test membership. Test characters never reach dataset exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// A retrieval snippet: quoted dialogue or a scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryExcerpt {
    pub text: String,
    pub source_tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterProfile {
    pub name: String,
    pub source: Source,
    pub split: Split,
    pub description: String,
    pub memory: Vec<MemoryExcerpt>,
}

/// A human annotation: either per-dimension levels or a categorical code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelValue {
    Categorical(String),
    Levels(BTreeMap<String, Level>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub character: String,
    pub scale_id: String,
    pub label: LabelValue,
}

/// The validated registry: profiles by name plus their annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    characters: BTreeMap<String, CharacterProfile>,
    labels: Vec<GroundTruthLabel>,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("registry file not found: {path}")]
    MissingFile { path: String },
    #[error("registry file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema violation {0}")]
    Schema(SchemaError),
    #[error("label references unknown character `{character}`")]
    DanglingLabel { character: String },
    #[error("unknown character `{0}`")]
    UnknownCharacter(String),
    #[error("label for `{character}` names scale `{scale}` absent from the bank")]
    UnknownScale { character: String, scale: String },
    #[error("label for `{character}` on `{scale}` is invalid: {reason}")]
    InvalidLabel {
        character: String,
        scale: String,
        reason: String,
    },
    #[error("reading registry file: {0}")]
    Io(#[from] std::io::Error),
}

impl From<SchemaError> for RegistryError {
    fn from(e: SchemaError) -> Self {
        RegistryError::Schema(e)
    }
}

impl CharacterProfile {
    /// Lexical top-k memory retrieval: rank excerpts by word overlap with the
    /// query, highest first, ties kept in file order.
    pub fn retrieve_memory(&self, query: &str, k: usize) -> Vec<&MemoryExcerpt> {
        let query_words: std::collections::BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut scored: Vec<(usize, usize, &MemoryExcerpt)> = self
            .memory
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let words: std::collections::BTreeSet<String> =
                    tokenize(&m.text).into_iter().collect();
                (query_words.intersection(&words).count(), i, m)
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(k).map(|(_, _, m)| m).collect()
    }
}

impl Registry {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(RegistryError::MissingFile {
                path: path.display().to_string(),
            });
        }
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text)?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, RegistryError> {
        let root = Cursor::root(value);
        let mut characters = BTreeMap::new();
        for c_cur in root.field("characters")?.array()? {
            let name = c_cur.field("name")?.non_empty_str()?.to_string();
            if characters.contains_key(&name) {
                return Err(SchemaError {
                    pointer: c_cur.field("name")?.pointer().to_string(),
                    expected: "a character name not already registered".to_string(),
                }
                .into());
            }
            let source = match c_cur.field("source")?.str()? {
                "RoleLLM" => Source::RoleLLM,
                "ChatHaruhi" => Source::ChatHaruhi,
                "Other" => Source::Other,
                _ => {
                    return Err(SchemaError {
                        pointer: c_cur.field("source")?.pointer().to_string(),
                        expected: "one of `RoleLLM`, `ChatHaruhi`, `Other`".to_string(),
                    }
                    .into());
                }
            };
            let split = match c_cur.field("split")?.str()? {
                "train" => Split::Train,
                "test" => Split::Test,
                _ => {
                    return Err(SchemaError {
                        pointer: c_cur.field("split")?.pointer().to_string(),
                        expected: "`train` or `test`".to_string(),
                    }
                    .into());
                }
            };
            let mut memory = Vec::new();
            for m_cur in c_cur.field("memory")?.array()? {
                memory.push(MemoryExcerpt {
                    text: m_cur.field("text")?.non_empty_str()?.to_string(),
                    source_tag: m_cur.field("source_tag")?.str()?.to_string(),
                });
            }
            characters.insert(
                name.clone(),
                CharacterProfile {
                    name,
                    source,
                    split,
                    description: c_cur.field("description")?.non_empty_str()?.to_string(),
                    memory,
                },
            );
        }

        let mut labels = Vec::new();
        for l_cur in root.field("labels")?.array()? {
            let character = l_cur.field("character")?.non_empty_str()?.to_string();
            if !characters.contains_key(&character) {
                return Err(RegistryError::DanglingLabel { character });
            }
            let scale_id = l_cur.field("scale")?.non_empty_str()?.to_string();
            let label_cur = l_cur.field("label")?;
            let label = if let Ok(s) = label_cur.str() {
                LabelValue::Categorical(s.to_string())
            } else {
                let mut levels = BTreeMap::new();
                for (code, v) in label_cur.entries()? {
                    let level = match v.str()? {
                        "High" => Level::High,
                        "Low" => Level::Low,
                        _ => {
                            return Err(SchemaError {
                                pointer: v.pointer().to_string(),
                                expected: "`High` or `Low`".to_string(),
                            }
                            .into());
                        }
                    };
                    levels.insert(code.to_string(), level);
                }
                LabelValue::Levels(levels)
            };
            labels.push(GroundTruthLabel {
                character,
                scale_id,
                label,
            });
        }

        if characters.is_empty() {
            log::warn!("registry contains no characters");
        }
        Ok(Registry { characters, labels })
    }

    pub fn get(&self, name: &str) -> Option<&CharacterProfile> {
        self.characters.get(name)
    }

    /// Characters in name order.
    pub fn characters(&self) -> impl Iterator<Item = &CharacterProfile> {
        self.characters.values()
    }

    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characters.is_empty()
    }

    pub fn labels(&self) -> &[GroundTruthLabel] {
        &self.labels
    }

    /// Disjoint (train, test) partition of all characters.
    pub fn split(&self) -> (Vec<&CharacterProfile>, Vec<&CharacterProfile>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for c in self.characters.values() {
            match c.split {
                Split::Train => train.push(c),
                Split::Test => test.push(c),
            }
        }
        (train, test)
    }

    pub fn is_test_character(&self, name: &str) -> bool {
        self.characters
            .get(name)
            .is_some_and(|c| c.split == Split::Test)
    }

    /// The annotation for (character, scale), if one exists. Never fabricates.
    pub fn ground_truth_for(
        &self,
        character: &str,
        scale_id: &str,
    ) -> Result<Option<&GroundTruthLabel>, RegistryError> {
        if !self.characters.contains_key(character) {
            return Err(RegistryError::UnknownCharacter(character.to_string()));
        }
        Ok(self
            .labels
            .iter()
            .find(|l| l.character == character && l.scale_id == scale_id))
    }

    /// Cross-check every label against the active bank: known scale, and a
    /// label value that fits the scale's label alphabet.
    pub fn validate_labels(&self, bank: &ScaleBank) -> Result<(), RegistryError> {
        for l in &self.labels {
            let scale = bank
                .get(&l.scale_id)
                .ok_or_else(|| RegistryError::UnknownScale {
                    character: l.character.clone(),
                    scale: l.scale_id.clone(),
                })?;
            let invalid = |reason: &str| RegistryError::InvalidLabel {
                character: l.character.clone(),
                scale: l.scale_id.clone(),
                reason: reason.to_string(),
            };
            match (&l.label, scale.label_kind) {
                (LabelValue::Levels(levels), LabelKind::PerDimensionLevel) => {
                    for code in levels.keys() {
                        if scale.dimension(code).is_none() {
                            return Err(invalid(&format!("unknown dimension `{code}`")));
                        }
                    }
                }
                (LabelValue::Categorical(code), LabelKind::CategoricalType) => {
                    if scale.parse_categorical_label(code).is_none() {
                        return Err(invalid("not a valid type code for this scale"));
                    }
                }
                (LabelValue::Categorical(name), LabelKind::Quadrant) => {
                    const QUADRANTS: [&str; 4] =
                        ["Masculine", "Feminine", "Androgynous", "Undifferentiated"];
                    if !QUADRANTS.contains(&name.as_str()) {
                        return Err(invalid("not one of the four quadrant names"));
                    }
                }
                _ => return Err(invalid("label shape does not match the scale's label kind")),
            }
        }
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        let characters: Vec<Value> = self
            .characters
            .values()
            .map(|c| {
                json!({
                    "name": c.name,
                    "source": c.source,
                    "split": c.split,
                    "description": c.description,
                    "memory": c.memory.iter().map(|m| json!({"text": m.text, "source_tag": m.source_tag})).collect::<Vec<_>>(),
                })
            })
            .collect();
        let labels: Vec<Value> = self
            .labels
            .iter()
            .map(|l| {
                json!({
                    "character": l.character,
                    "scale": l.scale_id,
                    "label": match &l.label {
                        LabelValue::Categorical(s) => json!(s),
                        LabelValue::Levels(m) => json!(m),
                    },
                })
            })
            .collect();
        json!({ "characters": characters, "labels": labels })
    }
}
