//! Win-rate against a reference answer, judged pairwise.
//!
//! Both answers are shown to the judge under neutral aliases (`model_1`,
//! `model_2`); which alias the candidate gets is randomized per item under a
//! recorded seed, countering position bias on top of the prompt's own
//! warning. The judge must reply with a ranked list of dictionaries; items
//! whose reply cannot be parsed are excluded from the denominator and logged.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{ChatRequest, Gateway, GatewayError, Message};
use crate::jsonv::{Cursor, SchemaError};
use crate::template::{TemplateError, TemplateSet, names};
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateItem {
    pub id: String,
    pub question: String,
    pub candidate_answer: String,
    pub reference_answer: String,
    #[serde(default)]
    pub role_name: String,
    #[serde(default)]
    pub role_description: String,
}

#[derive(Debug, thiserror::Error)]
pub enum WinRateError {
    #[error("win-rate file not found: {path}")]
    MissingFile { path: String },
    #[error("win-rate file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("win-rate schema violation {0}")]
    Schema(SchemaError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("gateway error on item {item}: {source}")]
    Gateway {
        item: String,
        #[source]
        source: GatewayError,
    },
}

impl From<SchemaError> for WinRateError {
    fn from(e: SchemaError) -> Self {
        WinRateError::Schema(e)
    }
}

pub fn load_items(path: impl AsRef<Path>) -> Result<Vec<WinRateItem>, WinRateError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(WinRateError::MissingFile {
            path: path.display().to_string(),
        });
    }
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let root = Cursor::root(&value);
    let mut items = Vec::new();
    for cur in root.array()? {
        items.push(WinRateItem {
            id: cur.field("id")?.non_empty_str()?.to_string(),
            question: cur.field("question")?.non_empty_str()?.to_string(),
            candidate_answer: cur.field("candidate_answer")?.str()?.to_string(),
            reference_answer: cur.field("reference_answer")?.str()?.to_string(),
            role_name: match cur.opt_field("role_name") {
                Some(c) => c.str()?.to_string(),
                None => String::new(),
            },
            role_description: match cur.opt_field("role_description") {
                Some(c) => c.str()?.to_string(),
                None => String::new(),
            },
        });
    }
    Ok(items)
}

/// Whether the candidate answer is shown first (as `model_1`) for this item
/// under the given seed. Exposed so mock scripts and audits can reconstruct
/// the alias assignment.
pub fn candidate_goes_first(seed: u64, item_id: &str) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["winrate", item_id]));
    rng.random()
}

/// Extract `[{"model": ..., "rank": ...}, ...]` from a judge reply; tolerates
/// prose around the list and Python-style single quotes.
pub fn parse_rankings(reply: &str) -> Option<Vec<(String, i64)>> {
    let start = reply.find('[')?;
    let end = reply.rfind(']')?;
    if end <= start {
        return None;
    }
    let snippet = &reply[start..=end];
    let parsed: Value = serde_json::from_str(snippet)
        .or_else(|_| serde_json::from_str(&snippet.replace('\'', "\"")))
        .ok()?;
    let list = parsed.as_array()?;
    let mut out = Vec::new();
    for entry in list {
        let model = entry.get("model")?.as_str()?.to_string();
        let rank = entry.get("rank")?.as_i64()?;
        out.push((model, rank));
    }
    if out.is_empty() { None } else { Some(out) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateReport {
    pub win_rate: f64,
    pub wins: usize,
    pub judged: usize,
    pub parse_failures: Vec<String>,
    pub seed: u64,
}

/// Judge every item and count how often the candidate outranks the reference.
pub fn win_rate(
    gateway: &Gateway,
    judge_model: &str,
    items: &[WinRateItem],
    templates: &TemplateSet,
    seed: u64,
) -> Result<WinRateReport, WinRateError> {
    let mut wins = 0usize;
    let mut judged = 0usize;
    let mut parse_failures = Vec::new();

    for item in items {
        let candidate_first = candidate_goes_first(seed, &item.id);
        let (first_name, first_answer, second_name, second_answer) = if candidate_first {
            (
                "model_1",
                &item.candidate_answer,
                "model_2",
                &item.reference_answer,
            )
        } else {
            (
                "model_1",
                &item.reference_answer,
                "model_2",
                &item.candidate_answer,
            )
        };
        let candidate_alias = if candidate_first {
            "model_1"
        } else {
            "model_2"
        };

        let question_dict = serde_json::json!({"question": item.question}).to_string();
        let answers = serde_json::json!([
            {"model": first_name, "answer": first_answer},
            {"model": second_name, "answer": second_answer},
        ])
        .to_string();

        let system = templates.get(names::WINRATE_SYSTEM)?.trim_end().to_string();
        let user = templates.render(
            names::WINRATE_USER,
            &[
                ("role_name", item.role_name.as_str()),
                (
                    "role_description_and_catchphrases",
                    item.role_description.as_str(),
                ),
                ("question_dict", question_dict.as_str()),
                ("list_model_answer_dict", answers.as_str()),
            ],
        )?;
        let req = ChatRequest::new(
            judge_model,
            vec![Message::system(system), Message::user(user)],
        )
        .with_temperature(0.0);
        let resp = gateway.chat(&req).map_err(|source| WinRateError::Gateway {
            item: item.id.clone(),
            source,
        })?;

        let Some(rankings) = parse_rankings(&resp.content) else {
            log::warn!("unparseable ranking on item {}", item.id);
            parse_failures.push(item.id.clone());
            continue;
        };
        let rank_of = |name: &str| rankings.iter().find(|(m, _)| m == name).map(|(_, r)| *r);
        let (Some(candidate_rank), Some(reference_rank)) = (
            rank_of(candidate_alias),
            rank_of(if candidate_alias == "model_1" {
                "model_2"
            } else {
                "model_1"
            }),
        ) else {
            log::warn!("ranking on item {} does not name both aliases", item.id);
            parse_failures.push(item.id.clone());
            continue;
        };
        judged += 1;
        if candidate_rank < reference_rank {
            wins += 1;
        }
    }

    Ok(WinRateReport {
        win_rate: if judged == 0 {
            0.0
        } else {
            wins as f64 / judged as f64
        },
        wins,
        judged,
        parse_failures,
        seed,
    })
}
