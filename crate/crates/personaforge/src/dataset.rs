//! Assembling kept interviews into subsets and exporting chat JSONL.
//!
//! Three subsets mirror the corpus structure: single-turn records over the
//! full question pool, single-turn records over the Part scales, and
//! five-turn records over the Part scales. Test-split characters must never
//! appear; the system message embeds the same persona preamble the interview
//! used, so fine-tunes see identical conditioning.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::gateway::{Message, Role};
use crate::interview::{InterviewKind, InterviewRecord, MULTI_TURNS};
use crate::registry::Registry;
use crate::scales::{QuestionMode, ScaleBank};
use crate::template::{TemplateError, TemplateSet, names};
use crate::util::{sha256_hex, short_id, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetName {
    FullSingle,
    PartSingle,
    PartMulti,
}

impl SubsetName {
    pub const ALL: [SubsetName; 3] = [
        SubsetName::FullSingle,
        SubsetName::PartSingle,
        SubsetName::PartMulti,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SubsetName::FullSingle => "full_single",
            SubsetName::PartSingle => "part_single",
            SubsetName::PartMulti => "part_multi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full_single" => Some(SubsetName::FullSingle),
            "part_single" => Some(SubsetName::PartSingle),
            "part_multi" => Some(SubsetName::PartMulti),
            _ => None,
        }
    }

    fn kind(&self) -> InterviewKind {
        match self {
            SubsetName::PartMulti => InterviewKind::Multi,
            _ => InterviewKind::Single,
        }
    }

    fn question_mode(&self) -> QuestionMode {
        match self {
            SubsetName::FullSingle => QuestionMode::Full,
            _ => QuestionMode::Part,
        }
    }

    pub fn turn_count(&self) -> usize {
        match self {
            SubsetName::PartMulti => MULTI_TURNS,
            _ => 1,
        }
    }

    /// Tags recorded on each sample, e.g. {"Part", "Multi"}.
    pub fn tags(&self) -> BTreeSet<String> {
        let (pool, kind) = match self {
            SubsetName::FullSingle => ("Full", "Single"),
            SubsetName::PartSingle => ("Part", "Single"),
            SubsetName::PartMulti => ("Part", "Multi"),
        };
        [pool.to_string(), kind.to_string()].into()
    }
}

/// One fine-tuning sample: a system message then alternating user/assistant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub id: String,
    pub character: String,
    pub messages: Vec<Message>,
    pub subset_tags: BTreeSet<String>,
    pub source_record: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetManifest {
    pub name: SubsetName,
    pub sample_count: usize,
    /// Size of the subset's question pool in the bank (not questions used).
    pub question_count: usize,
    pub turn_count: usize,
    pub character_roster: Vec<String>,
    /// sha256 of the exported JSONL bytes.
    pub content_digest: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("test-split character `{character}` found in record `{record_id}`")]
    TestLeak {
        character: String,
        record_id: String,
    },
    #[error("sample `{id}` violates message structure: {reason}")]
    MalformedSample { id: String, reason: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Bank(#[from] crate::scales::BankError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("jsonl line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
}

/// Build one subset from already-filtered records. Any test-split character
/// in the input is a hard failure; an empty result is allowed with a warning.
pub fn build_subset(
    name: SubsetName,
    records: &[InterviewRecord],
    bank: &ScaleBank,
    registry: &Registry,
    templates: &TemplateSet,
    memory_k: usize,
) -> Result<(Vec<DatasetSample>, SubsetManifest), DatasetError> {
    for record in records {
        if registry.is_test_character(&record.character) {
            return Err(DatasetError::TestLeak {
                character: record.character.clone(),
                record_id: record.id.clone(),
            });
        }
    }

    let mut samples = Vec::new();
    for record in records {
        if record.kind != name.kind() {
            continue;
        }
        if name.question_mode() == QuestionMode::Part && !bank.is_part_scale(&record.scale_id) {
            continue;
        }
        let system = match registry.get(&record.character) {
            Some(profile) => {
                let query = record
                    .turns
                    .first()
                    .map(|t| t.question_text.as_str())
                    .unwrap_or("");
                let snippets: Vec<String> = profile
                    .retrieve_memory(query, memory_k)
                    .into_iter()
                    .map(|m| m.text.clone())
                    .collect();
                let memory_block = if snippets.is_empty() {
                    "(no excerpts available)".to_string()
                } else {
                    snippets
                        .iter()
                        .map(|s| format!("- {s}"))
                        .collect::<Vec<_>>()
                        .join("\n")
                };
                templates.render(
                    names::RPA_SYSTEM,
                    &[
                        ("character", record.character.as_str()),
                        ("description", profile.description.as_str()),
                        ("memory", &memory_block),
                    ],
                )?
            }
            None => {
                log::warn!(
                    "record {} names unregistered character {}",
                    record.id,
                    record.character
                );
                continue;
            }
        };

        let mut messages = vec![Message::system(system)];
        for turn in &record.turns {
            messages.push(Message::user(turn.question_text.clone()));
            messages.push(Message::assistant(turn.response_text.clone()));
        }
        let sample = DatasetSample {
            id: short_id(&["sample", name.as_str(), &record.id]),
            character: record.character.clone(),
            messages,
            subset_tags: name.tags(),
            source_record: record.id.clone(),
        };
        validate_sample(&sample, name)?;
        samples.push(sample);
    }

    samples.sort_by(|a, b| a.id.cmp(&b.id));
    if samples.is_empty() {
        log::warn!("subset {} is empty", name.as_str());
    }

    let roster: BTreeSet<String> = samples.iter().map(|s| s.character.clone()).collect();
    let manifest = SubsetManifest {
        name,
        sample_count: samples.len(),
        question_count: match bank.select_questions(name.question_mode()) {
            Ok(qs) => qs.len(),
            Err(crate::scales::BankError::EmptyPartSubset) => 0,
            Err(e) => return Err(e.into()),
        },
        turn_count: name.turn_count(),
        character_roster: roster.into_iter().collect(),
        content_digest: sha256_hex(&[&jsonl_bytes(&samples)]),
    };
    Ok((samples, manifest))
}

fn validate_sample(sample: &DatasetSample, name: SubsetName) -> Result<(), DatasetError> {
    let malformed = |reason: &str| DatasetError::MalformedSample {
        id: sample.id.clone(),
        reason: reason.to_string(),
    };
    let msgs = &sample.messages;
    if msgs.first().map(|m| m.role) != Some(Role::System) {
        return Err(malformed("first message must be system"));
    }
    if msgs.len() != 1 + 2 * name.turn_count() {
        return Err(malformed("wrong number of turns for the subset"));
    }
    for (i, m) in msgs[1..].iter().enumerate() {
        let want = if i % 2 == 0 {
            Role::User
        } else {
            Role::Assistant
        };
        if m.role != want {
            return Err(malformed("roles must alternate user/assistant"));
        }
    }
    if msgs.last().map(|m| m.role) != Some(Role::Assistant) {
        return Err(malformed("last message must be assistant"));
    }
    Ok(())
}

/// The canonical export encoding: one JSON object per line with
/// `{id, character, messages}`, samples in id order, LF separators.
pub fn jsonl_bytes(samples: &[DatasetSample]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in samples {
        let line = json!({
            "id": s.id,
            "character": s.character,
            "messages": s.messages,
        });
        out.extend_from_slice(line.to_string().as_bytes());
        out.push(b'\n');
    }
    out
}

/// Write samples as JSONL (UTF-8, sorted by id, one object per line).
pub fn export_jsonl(samples: &[DatasetSample], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut sorted: Vec<DatasetSample> = samples.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    write_atomic(path.as_ref(), &jsonl_bytes(&sorted))?;
    Ok(())
}

/// Read an exported JSONL file back into samples (tags and source ids are not
/// part of the wire format and come back empty).
pub fn import_jsonl(path: impl AsRef<Path>) -> Result<Vec<DatasetSample>, DatasetError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|source| DatasetError::Parse {
                line: i + 1,
                source,
            })?;
        let messages: Vec<Message> =
            serde_json::from_value(v["messages"].clone()).map_err(|source| {
                DatasetError::Parse {
                    line: i + 1,
                    source,
                }
            })?;
        samples.push(DatasetSample {
            id: v["id"].as_str().unwrap_or_default().to_string(),
            character: v["character"].as_str().unwrap_or_default().to_string(),
            messages,
            subset_tags: BTreeSet::new(),
            source_record: String::new(),
        });
    }
    Ok(samples)
}
