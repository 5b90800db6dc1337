//! Interviewing role-playing agents with scale questions.
//!
//! A question is first screened for suitability (a question that violates the
//! character's background would force the agent out of role), then asked in a
//! single-turn interview or woven into a five-turn interview whose questions
//! come from five distinct dimensions of one scale.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gateway::{ChatRequest, FinishReason, Gateway, GatewayError, Message};
use crate::registry::CharacterProfile;
use crate::scales::{Question, Scale};
use crate::template::{TemplateError, TemplateSet, names};
use crate::util::{derive_seed, now_unix, short_id};

/// Multi-turn interviews ask one question from each of this many distinct
/// dimensions of a single scale.
pub const MULTI_TURNS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterviewKind {
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub question_id: String,
    pub dimension_code: String,
    pub question_text: String,
    pub response_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterviewRecord {
    pub id: String,
    pub character: String,
    pub scale_id: String,
    pub kind: InterviewKind,
    pub turns: Vec<Turn>,
    pub generator_model: String,
    pub created_at_unix: u64,
    /// Gateway request digest per turn: the cache address of each reply.
    #[serde(default)]
    pub turn_digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitabilityVerdict {
    pub question_id: String,
    pub character: String,
    pub suitable: bool,
    pub judge_rationale: String,
    /// True when the judge reply had no parseable YES/NO; the question is
    /// treated as unsuitable and flagged for review.
    pub parse_failed: bool,
}

/// Suitability verdicts for one character, keyed by question id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreenedQuestions {
    pub character: String,
    pub verdicts: BTreeMap<String, SuitabilityVerdict>,
}

impl ScreenedQuestions {
    pub fn is_suitable(&self, question_id: &str) -> bool {
        self.verdicts.get(question_id).is_some_and(|v| v.suitable)
    }

    pub fn suitable_count(&self) -> usize {
        self.verdicts.values().filter(|v| v.suitable).count()
    }
}

/// The prompt construction for one agent call: persona preamble, retrieved
/// memory, and the conversation so far.
#[derive(Debug, Clone)]
pub struct RpaPromptSpec {
    pub character: String,
    pub system_preamble: String,
    pub memory_snippets: Vec<String>,
    pub history: Vec<(String, String)>,
}

impl RpaPromptSpec {
    /// The chat messages for asking `question` now.
    pub fn messages(&self, question: &str) -> Vec<Message> {
        let mut msgs = vec![Message::system(self.system_preamble.clone())];
        for (q, a) in &self.history {
            msgs.push(Message::user(q.clone()));
            msgs.push(Message::assistant(a.clone()));
        }
        msgs.push(Message::user(question.to_string()));
        msgs
    }

    /// Every message content joined; what the invariant tests inspect.
    pub fn rendered_text(&self, question: &str) -> String {
        self.messages(question)
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InterviewError {
    #[error("gateway error interviewing `{character}` on `{question_id}`: {source}")]
    Gateway {
        character: String,
        question_id: String,
        #[source]
        source: GatewayError,
    },
    #[error("question `{question_id}` is unsuitable or unscreened for `{character}`")]
    UnsuitableQuestion {
        character: String,
        question_id: String,
    },
    #[error("agent returned an empty response for `{character}` on `{question_id}`")]
    EmptyResponse {
        character: String,
        question_id: String,
    },
    #[error(
        "scale `{scale_id}` has only {available} dimension(s) with suitable questions; 5 needed"
    )]
    InsufficientDimensions { scale_id: String, available: usize },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Runs interviews against a gateway with a fixed template set.
pub struct Interviewer<'a> {
    gateway: &'a Gateway,
    templates: &'a TemplateSet,
    generator_model: String,
    judge_model: String,
    /// How many memory excerpts to retrieve into the persona preamble.
    pub memory_k: usize,
    /// Sampling temperature for agent responses.
    pub temperature: f64,
}

impl<'a> Interviewer<'a> {
    pub fn new(
        gateway: &'a Gateway,
        templates: &'a TemplateSet,
        generator_model: impl Into<String>,
        judge_model: impl Into<String>,
    ) -> Self {
        Interviewer {
            gateway,
            templates,
            generator_model: generator_model.into(),
            judge_model: judge_model.into(),
            memory_k: 3,
            temperature: 0.7,
        }
    }

    /// Build the prompt spec for one character with the given history. Memory
    /// is retrieved against `query` (the opening question).
    pub fn prompt_spec(
        &self,
        profile: &CharacterProfile,
        query: &str,
        history: Vec<(String, String)>,
    ) -> Result<RpaPromptSpec, InterviewError> {
        assert!(
            history.len() < MULTI_TURNS,
            "history would exceed the turn budget"
        );
        let memory_snippets: Vec<String> = profile
            .retrieve_memory(query, self.memory_k)
            .into_iter()
            .map(|m| m.text.clone())
            .collect();
        let memory_block = if memory_snippets.is_empty() {
            "(no excerpts available)".to_string()
        } else {
            memory_snippets
                .iter()
                .map(|s| format!("- {s}"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let system_preamble = self.templates.render(
            names::RPA_SYSTEM,
            &[
                ("character", &profile.name),
                ("description", &profile.description),
                ("memory", &memory_block),
            ],
        )?;
        Ok(RpaPromptSpec {
            character: profile.name.clone(),
            system_preamble,
            memory_snippets,
            history,
        })
    }

    /// Ask the judge whether `question` fits the character's background.
    /// An unparseable reply yields `suitable = false` with the flag set.
    pub fn judge_suitability(
        &self,
        profile: &CharacterProfile,
        question: &Question,
    ) -> Result<SuitabilityVerdict, InterviewError> {
        let prompt = self.templates.render(
            names::SUITABILITY,
            &[
                ("character", &profile.name),
                ("description", &profile.description),
                ("question", &question.text),
            ],
        )?;
        let req = ChatRequest::new(self.judge_model.clone(), vec![Message::user(prompt)])
            .with_temperature(0.0);
        let resp = self
            .gateway
            .chat(&req)
            .map_err(|source| InterviewError::Gateway {
                character: profile.name.clone(),
                question_id: question.id.clone(),
                source,
            })?;
        let verdict = match crate::parse::first_yes_no(&resp.content) {
            Some(suitable) => SuitabilityVerdict {
                question_id: question.id.clone(),
                character: profile.name.clone(),
                suitable,
                judge_rationale: resp.content,
                parse_failed: false,
            },
            None => {
                log::warn!(
                    "unparseable suitability verdict for ({}, {}); treating as unsuitable",
                    profile.name,
                    question.id
                );
                SuitabilityVerdict {
                    question_id: question.id.clone(),
                    character: profile.name.clone(),
                    suitable: false,
                    judge_rationale: resp.content,
                    parse_failed: true,
                }
            }
        };
        Ok(verdict)
    }

    /// Screen a question list for one character. Verdicts are recorded before
    /// any interview happens.
    pub fn screen(
        &self,
        profile: &CharacterProfile,
        questions: &[&Question],
    ) -> Result<ScreenedQuestions, InterviewError> {
        let mut screened = ScreenedQuestions {
            character: profile.name.clone(),
            verdicts: BTreeMap::new(),
        };
        for q in questions {
            let verdict = self.judge_suitability(profile, q)?;
            screened.verdicts.insert(q.id.clone(), verdict);
        }
        Ok(screened)
    }

    /// Returns the agent's reply plus the request digest that produced it
    /// (the cache address, recorded per turn for auditability).
    fn ask(
        &self,
        spec: &RpaPromptSpec,
        question: &Question,
    ) -> Result<(String, String), InterviewError> {
        let req = ChatRequest::new(self.generator_model.clone(), spec.messages(&question.text))
            .with_temperature(self.temperature);
        let gateway_err = |source| InterviewError::Gateway {
            character: spec.character.clone(),
            question_id: question.id.clone(),
            source,
        };
        let resp = self.gateway.chat(&req).map_err(gateway_err)?;
        if resp.finish_reason == FinishReason::Stop && resp.content.trim().is_empty() {
            // One retry with a bumped seed, then record the failure.
            let mut retry = req.clone();
            retry.seed = Some(retry.seed.map_or(1, |s| s.wrapping_add(1)));
            let resp = self.gateway.chat(&retry).map_err(gateway_err)?;
            if resp.content.trim().is_empty() {
                return Err(InterviewError::EmptyResponse {
                    character: spec.character.clone(),
                    question_id: question.id.clone(),
                });
            }
            return Ok((resp.content, retry.cache_key().0));
        }
        Ok((resp.content, req.cache_key().0))
    }

    /// One question, one answer. The question must have passed screening.
    pub fn run_single(
        &self,
        profile: &CharacterProfile,
        question: &Question,
        screened: &ScreenedQuestions,
    ) -> Result<InterviewRecord, InterviewError> {
        if !screened.is_suitable(&question.id) {
            return Err(InterviewError::UnsuitableQuestion {
                character: profile.name.clone(),
                question_id: question.id.clone(),
            });
        }
        let spec = self.prompt_spec(profile, &question.text, Vec::new())?;
        let (response_text, digest) = self.ask(&spec, question)?;
        Ok(InterviewRecord {
            id: short_id(&[
                "interview",
                &profile.name,
                &question.scale_id,
                "single",
                &question.id,
            ]),
            character: profile.name.clone(),
            scale_id: question.scale_id.clone(),
            kind: InterviewKind::Single,
            turns: vec![Turn {
                question_id: question.id.clone(),
                dimension_code: question.dimension_code.clone(),
                question_text: question.text.clone(),
                response_text,
            }],
            generator_model: self.generator_model.clone(),
            created_at_unix: now_unix(),
            turn_digests: vec![digest],
        })
    }

    /// A five-turn interview over five distinct dimensions of `scale`.
    /// Question choice within each dimension is uniform under the run seed;
    /// (seed, character, scale, round) fully determine the selection.
    pub fn run_multi(
        &self,
        profile: &CharacterProfile,
        scale: &Scale,
        screened: &ScreenedQuestions,
        seed: u64,
        round: u32,
    ) -> Result<InterviewRecord, InterviewError> {
        let buckets: Vec<(&str, Vec<&Question>)> = scale
            .questions_by_dimension()
            .into_iter()
            .map(|(code, qs)| {
                let suitable: Vec<&Question> = qs
                    .into_iter()
                    .filter(|q| screened.is_suitable(&q.id))
                    .collect();
                (code, suitable)
            })
            .filter(|(_, qs)| !qs.is_empty())
            .collect();
        if buckets.len() < MULTI_TURNS {
            return Err(InterviewError::InsufficientDimensions {
                scale_id: scale.id.clone(),
                available: buckets.len(),
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            &["multi", &profile.name, &scale.id, &round.to_string()],
        ));
        let mut dim_indices: Vec<usize> = (0..buckets.len()).collect();
        dim_indices.shuffle(&mut rng);
        let chosen: Vec<&Question> = dim_indices[..MULTI_TURNS]
            .iter()
            .map(|&i| {
                let (_, qs) = &buckets[i];
                qs[rng.random_range(0..qs.len())]
            })
            .collect();

        let mut history: Vec<(String, String)> = Vec::new();
        let mut turns = Vec::new();
        let mut turn_digests = Vec::new();
        for question in &chosen {
            let spec = self.prompt_spec(profile, &chosen[0].text, history.clone())?;
            let (response_text, digest) = self.ask(&spec, question)?;
            history.push((question.text.clone(), response_text.clone()));
            turn_digests.push(digest);
            turns.push(Turn {
                question_id: question.id.clone(),
                dimension_code: question.dimension_code.clone(),
                question_text: question.text.clone(),
                response_text,
            });
        }

        let question_ids: Vec<&str> = turns.iter().map(|t| t.question_id.as_str()).collect();
        let mut id_parts = vec!["interview", &profile.name, &scale.id, "multi"];
        id_parts.extend(question_ids);
        let round_str = round.to_string();
        id_parts.push(&round_str);
        Ok(InterviewRecord {
            id: short_id(&id_parts),
            character: profile.name.clone(),
            scale_id: scale.id.clone(),
            kind: InterviewKind::Multi,
            turns,
            generator_model: self.generator_model.clone(),
            created_at_unix: now_unix(),
            turn_digests,
        })
    }
}

/// Structural check every multi record must satisfy: exactly five turns,
/// pairwise-distinct dimensions, all from the record's scale.
pub fn multi_record_is_wellformed(record: &InterviewRecord, scale: &Scale) -> bool {
    if record.kind != InterviewKind::Multi || record.turns.len() != MULTI_TURNS {
        return false;
    }
    let mut seen = std::collections::BTreeSet::new();
    record.turns.iter().all(|t| {
        scale.dimension(&t.dimension_code).is_some() && seen.insert(t.dimension_code.clone())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, MockBackend, MockRule};
    use crate::registry::{Registry, Source, Split};
    use crate::scales::ScaleBank;
    use serde_json::json;

    fn profile() -> CharacterProfile {
        CharacterProfile {
            name: "Ada".into(),
            source: Source::Other,
            split: Split::Train,
            description: "A methodical analyst who loves machinery.".into(),
            memory: vec![],
        }
    }

    fn bank() -> ScaleBank {
        let questions: Vec<serde_json::Value> = (0..10)
            .map(|i| {
                let dim = ["A", "B", "C", "D", "E", "F"][i % 6];
                json!({
                    "id": format!("six-{:02}", i),
                    "dimension": dim,
                    "text": format!("Question number {i}?"),
                    "reverse_scored": false,
                    "language": "en"
                })
            })
            .collect();
        let dims: Vec<serde_json::Value> = ["A", "B", "C", "D", "E", "F"]
            .iter()
            .map(|c| json!({"code": c, "name": format!("Dim {c}"), "description": ""}))
            .collect();
        ScaleBank::from_value(&json!({
            "part_subset": [],
            "scales": [{
                "id": "six", "name": "Six Dims", "label_kind": "per_dimension_level",
                "declared_count": 10, "dimensions": dims, "questions": questions
            }]
        }))
        .unwrap()
    }

    fn all_suitable(profile: &CharacterProfile, scale: &Scale) -> ScreenedQuestions {
        let verdicts = scale
            .questions
            .iter()
            .map(|q| {
                (
                    q.id.clone(),
                    SuitabilityVerdict {
                        question_id: q.id.clone(),
                        character: profile.name.clone(),
                        suitable: true,
                        judge_rationale: "YES".into(),
                        parse_failed: false,
                    },
                )
            })
            .collect();
        ScreenedQuestions {
            character: profile.name.clone(),
            verdicts,
        }
    }

    #[test]
    fn suitability_verdicts_parse_yes_no_and_gibberish() {
        let mock = MockBackend::new(vec![
            MockRule::substring(
                "Question number 0?",
                "NO - anachronistic for this character",
            ),
            MockRule::substring("Question number 1?", "YES, fits well"),
            MockRule::catch_all("@@@ unparseable @@@"),
        ]);
        let gw = Gateway::new(Box::new(mock));
        let templates = TemplateSet::embedded();
        let iv = Interviewer::new(&gw, &templates, "gen", "judge");
        let bank = bank();
        let scale = bank.get("six").unwrap();
        let p = profile();

        let v0 = iv.judge_suitability(&p, &scale.questions[0]).unwrap();
        assert!(!v0.suitable && !v0.parse_failed);
        let v1 = iv.judge_suitability(&p, &scale.questions[1]).unwrap();
        assert!(v1.suitable);
        let v2 = iv.judge_suitability(&p, &scale.questions[2]).unwrap();
        assert!(!v2.suitable && v2.parse_failed);
    }

    #[test]
    fn unsuitable_question_is_refused_without_a_call() {
        let mock = MockBackend::new(vec![MockRule::catch_all("should never fire")]);
        let gw = Gateway::new(Box::new(mock.clone()));
        let templates = TemplateSet::embedded();
        let iv = Interviewer::new(&gw, &templates, "gen", "judge");
        let bank = bank();
        let scale = bank.get("six").unwrap();
        let p = profile();
        let screened = ScreenedQuestions {
            character: p.name.clone(),
            verdicts: BTreeMap::new(),
        };

        let err = iv
            .run_single(&p, &scale.questions[0], &screened)
            .unwrap_err();
        assert!(matches!(err, InterviewError::UnsuitableQuestion { .. }));
        assert_eq!(mock.call_count(), 0);
    }

    #[test]
    fn single_interview_records_one_turn() {
        let mock = MockBackend::new(vec![MockRule::catch_all("I archive my thoughts nightly.")]);
        let gw = Gateway::new(Box::new(mock));
        let templates = TemplateSet::embedded();
        let iv = Interviewer::new(&gw, &templates, "gen", "judge");
        let bank = bank();
        let scale = bank.get("six").unwrap();
        let p = profile();
        let screened = all_suitable(&p, scale);

        let rec = iv.run_single(&p, &scale.questions[0], &screened).unwrap();
        assert_eq!(rec.kind, InterviewKind::Single);
        assert_eq!(rec.turns.len(), 1);
        assert_eq!(rec.turns[0].response_text, "I archive my thoughts nightly.");
    }

    #[test]
    fn multi_selection_is_seeded_and_dimension_distinct() {
        let templates = TemplateSet::embedded();
        let bank = bank();
        let scale = bank.get("six").unwrap();
        let p = profile();
        let screened = all_suitable(&p, scale);

        let run = |seed: u64| {
            let mock = MockBackend::new(vec![MockRule::catch_all("Indeed.")]);
            let gw = Gateway::new(Box::new(mock));
            let iv = Interviewer::new(&gw, &templates, "gen", "judge");
            iv.run_multi(&p, scale, &screened, seed, 0).unwrap()
        };

        let a = run(7);
        let b = run(7);
        assert_eq!(
            a.turns.iter().map(|t| &t.question_id).collect::<Vec<_>>(),
            b.turns.iter().map(|t| &t.question_id).collect::<Vec<_>>(),
        );
        assert!(multi_record_is_wellformed(&a, scale));

        let c = run(8);
        // Different seeds are allowed to coincide, but across the two
        // selection axes (dims and questions) seed 7 vs 8 should move.
        assert!(
            a.turns.iter().map(|t| &t.question_id).collect::<Vec<_>>()
                != c.turns.iter().map(|t| &t.question_id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn multi_requires_five_dimensions() {
        let questions: Vec<serde_json::Value> = (0..6)
            .map(|i| {
                let dim = ["X", "Y", "Z"][i % 3];
                json!({
                    "id": format!("tri-{i}"),
                    "dimension": dim,
                    "text": format!("q{i}?"),
                    "reverse_scored": false,
                    "language": "en"
                })
            })
            .collect();
        let bank = ScaleBank::from_value(&json!({
            "part_subset": [],
            "scales": [{
                "id": "tri", "name": "Three Dims", "label_kind": "per_dimension_level",
                "declared_count": 6,
                "dimensions": [
                    {"code": "X", "name": "X", "description": ""},
                    {"code": "Y", "name": "Y", "description": ""},
                    {"code": "Z", "name": "Z", "description": ""}
                ],
                "questions": questions
            }]
        }))
        .unwrap();
        let scale = bank.get("tri").unwrap();
        let p = profile();
        let screened = all_suitable(&p, scale);

        let mock = MockBackend::new(vec![MockRule::catch_all("hm")]);
        let gw = Gateway::new(Box::new(mock));
        let templates = TemplateSet::embedded();
        let iv = Interviewer::new(&gw, &templates, "gen", "judge");
        let err = iv.run_multi(&p, scale, &screened, 1, 0).unwrap_err();
        assert!(matches!(
            err,
            InterviewError::InsufficientDimensions { available: 3, .. }
        ));
    }

    /// One distinct reply per question, so history checks are meaningful.
    fn per_question_rules() -> Vec<MockRule> {
        (0..10)
            .map(|i| {
                MockRule::substring(
                    format!("Question number {i}?"),
                    format!("Reply number {i}."),
                )
            })
            .collect()
    }

    #[test]
    fn multi_prompts_carry_full_history() {
        let mock = MockBackend::new(per_question_rules());
        let gw = Gateway::new(Box::new(mock.clone()));
        let templates = TemplateSet::embedded();
        let iv = Interviewer::new(&gw, &templates, "gen", "judge");
        let bank = bank();
        let scale = bank.get("six").unwrap();
        let p = profile();
        let screened = all_suitable(&p, scale);

        let rec = iv.run_multi(&p, scale, &screened, 3, 0).unwrap();
        assert_eq!(rec.turns.len(), MULTI_TURNS);
        let calls = mock.calls();
        assert_eq!(calls.len(), MULTI_TURNS);
        for (i, call) in calls.iter().enumerate() {
            // Calls happen in turn order; each asks that turn's question last.
            assert_eq!(call.last_message, rec.turns[i].question_text);
            // Context monotonicity: turn k's prompt carries every prior
            // response verbatim.
            for prior in &rec.turns[..i] {
                assert!(
                    call.prompt_text.contains(&prior.response_text),
                    "turn {i} prompt lost the reply to {}",
                    prior.question_id
                );
            }
        }
    }

    #[test]
    fn judge_calls_are_pinned_to_temperature_zero() {
        let mock = MockBackend::new(vec![MockRule::catch_all("YES")]);
        let gw = Gateway::new(Box::new(mock.clone()));
        let templates = TemplateSet::embedded();
        let iv = Interviewer::new(&gw, &templates, "gen", "judge");
        let bank = bank();
        let scale = bank.get("six").unwrap();
        let p = profile();
        iv.judge_suitability(&p, &scale.questions[0]).unwrap();
        assert_eq!(mock.calls()[0].temperature, 0.0);
    }

    #[test]
    fn serial_gateway_transcripts_are_reproducible() {
        let templates = TemplateSet::embedded();
        let bank = bank();
        let scale = bank.get("six").unwrap();
        let p = profile();

        let transcript = || {
            let mock = MockBackend::new(per_question_rules());
            let gw = Gateway::new(Box::new(mock.clone())).with_concurrency_limit(1);
            let iv = Interviewer::new(&gw, &templates, "gen", "judge");
            let screened = all_suitable(&p, scale);
            for q in &scale.questions {
                iv.run_single(&p, q, &screened).unwrap();
            }
            iv.run_multi(&p, scale, &screened, 5, 0).unwrap();
            mock.calls()
                .into_iter()
                .map(|c| c.digest)
                .collect::<Vec<_>>()
        };

        assert_eq!(transcript(), transcript());
    }

    #[test]
    fn description_appears_exactly_once_in_rendered_prompt() {
        let mock = MockBackend::new(vec![MockRule::catch_all("x")]);
        let gw = Gateway::new(Box::new(mock));
        let templates = TemplateSet::embedded();
        let iv = Interviewer::new(&gw, &templates, "gen", "judge");
        let p = profile();
        let spec = iv
            .prompt_spec(&p, "anything", vec![("q1".into(), "a1".into())])
            .unwrap();
        let text = spec.rendered_text("next question");
        assert_eq!(text.matches(p.description.as_str()).count(), 1);
        assert!(text.contains("a1"));
    }

    #[test]
    fn registry_memory_feeds_the_preamble() {
        let reg = Registry::from_value(&json!({
            "characters": [{
                "name": "Ada", "source": "Other", "split": "train",
                "description": "A methodical analyst.",
                "memory": [
                    {"text": "Ada tunes the difference engine.", "source_tag": "ch1"},
                    {"text": "Ada avoids idle gossip.", "source_tag": "ch2"}
                ]
            }],
            "labels": []
        }))
        .unwrap();
        let mock = MockBackend::new(vec![MockRule::catch_all("x")]);
        let gw = Gateway::new(Box::new(mock));
        let templates = TemplateSet::embedded();
        let iv = Interviewer::new(&gw, &templates, "gen", "judge");
        let spec = iv
            .prompt_spec(reg.get("Ada").unwrap(), "how is the engine?", Vec::new())
            .unwrap();
        assert!(spec.system_preamble.contains("difference engine"));
    }
}
