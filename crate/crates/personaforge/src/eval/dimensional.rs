//! Five-dimension judged scoring of a role-play transcript.
//!
//! Memorization, Personality, Values, Stability and Hallucination are each
//! judged independently at temperature 0 with a fixed prompt whose final
//! instruction is to repeat the chosen 1-7 score alone on the last line. A
//! dimension whose reply cannot be parsed is recorded as missing and excluded
//! from averages.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gateway::{ChatRequest, Gateway, GatewayError, Message};
use crate::jsonv::{Cursor, SchemaError};
use crate::parse::final_score_in;
use crate::template::{TemplateError, TemplateSet, names};

pub const SCORE_MIN: i64 = 1;
pub const SCORE_MAX: i64 = 7;

/// A transcript to judge: the character, the profile context shown to the
/// judge, and the rendered interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub character: String,
    pub agent_context: String,
    pub interactions: String,
    #[serde(default)]
    pub transcript_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionalScore {
    pub character: String,
    pub memorization: Option<f64>,
    pub personality: Option<f64>,
    pub values: Option<f64>,
    pub stability: Option<f64>,
    pub hallucination: Option<f64>,
    pub transcript_ref: String,
}

impl DimensionalScore {
    pub fn scores(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("memorization", self.memorization),
            ("personality", self.personality),
            ("values", self.values),
            ("stability", self.stability),
            ("hallucination", self.hallucination),
        ]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DimensionalError {
    #[error("transcripts file not found: {path}")]
    MissingFile { path: String },
    #[error("transcripts file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("transcripts schema violation {0}")]
    Schema(SchemaError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("gateway error judging {character}/{dimension}: {source}")]
    Gateway {
        character: String,
        dimension: String,
        #[source]
        source: GatewayError,
    },
}

impl From<SchemaError> for DimensionalError {
    fn from(e: SchemaError) -> Self {
        DimensionalError::Schema(e)
    }
}

pub fn load_transcripts(path: impl AsRef<Path>) -> Result<Vec<Transcript>, DimensionalError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DimensionalError::MissingFile {
            path: path.display().to_string(),
        });
    }
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let root = Cursor::root(&value);
    let mut out = Vec::new();
    for cur in root.array()? {
        out.push(Transcript {
            character: cur.field("character")?.non_empty_str()?.to_string(),
            agent_context: cur.field("agent_context")?.str()?.to_string(),
            interactions: cur.field("interactions")?.str()?.to_string(),
            transcript_ref: match cur.opt_field("transcript_ref") {
                Some(c) => c.str()?.to_string(),
                None => String::new(),
            },
        });
    }
    Ok(out)
}

const DIMENSION_TEMPLATES: [(&str, &str); 5] = [
    ("memorization", names::DIM_MEMORIZATION),
    ("personality", names::DIM_PERSONALITY),
    ("values", names::DIM_VALUES),
    ("stability", names::DIM_STABILITY),
    ("hallucination", names::DIM_HALLUCINATION),
];

/// Render the judging prompt for one dimension of a transcript.
pub fn render_dimension_prompt(
    templates: &TemplateSet,
    template_name: &str,
    transcript: &Transcript,
) -> Result<String, TemplateError> {
    templates.render(
        template_name,
        &[
            ("agent_name", transcript.character.as_str()),
            ("agent_context", transcript.agent_context.as_str()),
            ("interactions", transcript.interactions.as_str()),
        ],
    )
}

/// Judge all five dimensions of one transcript.
pub fn dimensional_scores(
    gateway: &Gateway,
    judge_model: &str,
    templates: &TemplateSet,
    transcript: &Transcript,
) -> Result<DimensionalScore, DimensionalError> {
    let mut values: [Option<f64>; 5] = [None; 5];
    for (i, (dimension, template_name)) in DIMENSION_TEMPLATES.iter().enumerate() {
        let prompt = render_dimension_prompt(templates, template_name, transcript)?;
        let req = ChatRequest::new(judge_model, vec![Message::user(prompt)]).with_temperature(0.0);
        let resp = gateway
            .chat(&req)
            .map_err(|source| DimensionalError::Gateway {
                character: transcript.character.clone(),
                dimension: dimension.to_string(),
                source,
            })?;
        match final_score_in(&resp.content, SCORE_MIN, SCORE_MAX) {
            Some(s) => values[i] = Some(s as f64),
            None => {
                log::warn!(
                    "unparseable {dimension} score for {}; recorded as missing",
                    transcript.character
                );
            }
        }
    }
    Ok(DimensionalScore {
        character: transcript.character.clone(),
        memorization: values[0],
        personality: values[1],
        values: values[2],
        stability: values[3],
        hallucination: values[4],
        transcript_ref: transcript.transcript_ref.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionalReport {
    pub scores: Vec<DimensionalScore>,
    /// Mean per dimension over transcripts where the dimension parsed.
    pub means: std::collections::BTreeMap<String, f64>,
}

pub fn dimensional_report(scores: Vec<DimensionalScore>) -> DimensionalReport {
    let mut sums: std::collections::BTreeMap<String, (f64, usize)> = Default::default();
    for score in &scores {
        for (name, v) in score.scores() {
            if let Some(v) = v {
                let entry = sums.entry(name.to_string()).or_insert((0.0, 0));
                entry.0 += v;
                entry.1 += 1;
            }
        }
    }
    let means = sums
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect();
    DimensionalReport { scores, means }
}
