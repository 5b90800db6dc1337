//! Motivation-recognition accuracy on multiple-choice scenarios.
//!
//! Each item shows a character's decision in a scenario with lettered
//! options. The subject model's reply is parsed for an explicit "Answer: X"
//! first, falling back to the first standalone option letter; unparseable
//! replies count as incorrect and are logged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gateway::{ChatRequest, Gateway, GatewayError, Message};
use crate::jsonv::{Cursor, SchemaError};
use crate::template::{TemplateError, TemplateSet, names};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub scenario: String,
    pub options: Vec<(String, String)>,
    pub correct: String,
}

#[derive(Debug, thiserror::Error)]
pub enum McqError {
    #[error("mcq file not found: {path}")]
    MissingFile { path: String },
    #[error("mcq file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("mcq schema violation {0}")]
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

impl From<SchemaError> for McqError {
    fn from(e: SchemaError) -> Self {
        McqError::Schema(e)
    }
}

/// Load an MCQ file: a JSON list of
/// `{id, scenario, options: [{letter, text}], correct}`.
pub fn load_mcq(path: impl AsRef<Path>) -> Result<Vec<McqItem>, McqError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(McqError::MissingFile {
            path: path.display().to_string(),
        });
    }
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let root = Cursor::root(&value);
    let mut items = Vec::new();
    for item_cur in root.array()? {
        let mut options = Vec::new();
        for opt_cur in item_cur.field("options")?.array()? {
            options.push((
                opt_cur.field("letter")?.non_empty_str()?.to_string(),
                opt_cur.field("text")?.non_empty_str()?.to_string(),
            ));
        }
        if options.len() < 2 {
            return Err(SchemaError {
                pointer: item_cur.field("options")?.pointer().to_string(),
                expected: "at least two options".to_string(),
            }
            .into());
        }
        let correct = item_cur.field("correct")?.non_empty_str()?.to_string();
        if !options.iter().any(|(l, _)| *l == correct) {
            return Err(SchemaError {
                pointer: item_cur.field("correct")?.pointer().to_string(),
                expected: "a letter present among the options".to_string(),
            }
            .into());
        }
        items.push(McqItem {
            id: item_cur.field("id")?.non_empty_str()?.to_string(),
            scenario: item_cur.field("scenario")?.non_empty_str()?.to_string(),
            options,
            correct,
        });
    }
    Ok(items)
}

/// Pull the chosen option letter out of a model reply.
/// Prefers an explicit `Answer: X`; otherwise the first token that is exactly
/// one of the option letters.
pub fn parse_answer_letter(reply: &str, options: &[(String, String)]) -> Option<String> {
    let is_option = |tok: &str| options.iter().any(|(l, _)| l.eq_ignore_ascii_case(tok));
    let canonical = |tok: &str| {
        options
            .iter()
            .find(|(l, _)| l.eq_ignore_ascii_case(tok))
            .map(|(l, _)| l.clone())
    };

    // "Answer: X" / "answer: (x)" anywhere in the reply.
    let lower = reply.to_lowercase();
    if let Some(pos) = lower.find("answer") {
        let tail = &reply[pos + "answer".len()..];
        let tail = tail.trim_start_matches([':', ' ', '\t', '(', '[', '*']);
        let tok: String = tail
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect();
        if is_option(&tok) {
            return canonical(&tok);
        }
    }

    // Fall back to the first standalone option letter.
    reply
        .split(|c: char| !c.is_ascii_alphanumeric())
        .find(|tok| !tok.is_empty() && is_option(tok))
        .and_then(canonical)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqReport {
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    pub unparsed: Vec<String>,
}

/// Ask the subject model every item and grade the replies.
pub fn mr_accuracy(
    gateway: &Gateway,
    subject_model: &str,
    items: &[McqItem],
    templates: &TemplateSet,
) -> Result<McqReport, McqError> {
    let mut n_correct = 0;
    let mut unparsed = Vec::new();
    for item in items {
        let options_block: String = item
            .options
            .iter()
            .map(|(letter, text)| format!("{letter}. {text}"))
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = templates.render(
            names::MCQ_USER,
            &[
                ("scenario", item.scenario.as_str()),
                ("options", options_block.as_str()),
            ],
        )?;
        let req =
            ChatRequest::new(subject_model, vec![Message::user(prompt)]).with_temperature(0.0);
        let resp = gateway.chat(&req).map_err(|source| McqError::Gateway {
            item: item.id.clone(),
            source,
        })?;
        match parse_answer_letter(&resp.content, &item.options) {
            Some(letter) if letter == item.correct => n_correct += 1,
            Some(_) => {}
            None => {
                log::warn!("unparseable MCQ reply on item {}", item.id);
                unparsed.push(item.id.clone());
            }
        }
    }
    let n_total = items.len();
    Ok(McqReport {
        accuracy: if n_total == 0 {
            0.0
        } else {
            n_correct as f64 / n_total as f64
        },
        n_correct,
        n_total,
        unparsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockBackend, MockRule};

    fn options() -> Vec<(String, String)> {
        vec![
            ("A".to_string(), "ambition".to_string()),
            ("B".to_string(), "loyalty".to_string()),
            ("C".to_string(), "fear".to_string()),
        ]
    }

    #[test]
    fn answer_pattern_is_preferred() {
        let opts = options();
        assert_eq!(
            parse_answer_letter("I think C... Answer: B", &opts),
            Some("B".into())
        );
        assert_eq!(parse_answer_letter("answer: (a)", &opts), Some("A".into()));
    }

    #[test]
    fn falls_back_to_first_standalone_letter() {
        let opts = options();
        assert_eq!(
            parse_answer_letter("Probably B, given the stakes.", &opts),
            Some("B".into())
        );
        // Letters inside words do not count.
        assert_eq!(parse_answer_letter("Absolutely certain!", &opts), None);
    }

    fn items(n: usize) -> Vec<McqItem> {
        (0..n)
            .map(|i| McqItem {
                id: format!("mcq-{i}"),
                scenario: format!("Scenario {i}: the character hesitates."),
                options: options(),
                correct: "B".to_string(),
            })
            .collect()
    }

    #[test]
    fn all_correct_scores_one() {
        let mock = MockBackend::new(vec![MockRule::catch_all("Answer: B")]);
        let gw = Gateway::new(Box::new(mock));
        let templates = TemplateSet::embedded();
        let report = mr_accuracy(&gw, "subject", &items(10), &templates).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.n_correct, 10);
    }

    #[test]
    fn three_of_four_scores_point_75() {
        let mock = MockBackend::new(vec![
            MockRule::substring("Scenario 0", "Answer: A"),
            MockRule::catch_all("Answer: B"),
        ]);
        let gw = Gateway::new(Box::new(mock));
        let templates = TemplateSet::embedded();
        let report = mr_accuracy(&gw, "subject", &items(4), &templates).unwrap();
        assert_eq!(report.accuracy, 0.75);
    }

    #[test]
    fn unparseable_counts_incorrect_and_is_logged() {
        let mock = MockBackend::new(vec![
            MockRule::substring("Scenario 0", "I refuse to pick."),
            MockRule::catch_all("Answer: B"),
        ]);
        let gw = Gateway::new(Box::new(mock));
        let templates = TemplateSet::embedded();
        let report = mr_accuracy(&gw, "subject", &items(2), &templates).unwrap();
        assert_eq!(report.accuracy, 0.5);
        assert_eq!(report.unparsed, vec!["mcq-0".to_string()]);
    }

    #[test]
    fn loader_validates_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mcq.json");
        std::fs::write(
            &path,
            r#"[{"id": "m1", "scenario": "s", "options": [{"letter": "A", "text": "x"}], "correct": "A"}]"#,
        )
        .unwrap();
        match load_mcq(&path) {
            Err(McqError::Schema(e)) => assert_eq!(e.pointer, "/0/options"),
            other => panic!("expected schema error, got {other:?}"),
        }

        std::fs::write(
            &path,
            r#"[{"id": "m1", "scenario": "s",
                 "options": [{"letter": "A", "text": "x"}, {"letter": "B", "text": "y"}],
                 "correct": "Z"}]"#,
        )
        .unwrap();
        match load_mcq(&path) {
            Err(McqError::Schema(e)) => assert_eq!(e.pointer, "/0/correct"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }
}
