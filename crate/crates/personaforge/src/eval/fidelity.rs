//! Personality fidelity: interview a subject model as each test character,
//! judge the answers, and compare with the annotated ground truth.
//!
//! Reported as pooled per-dimension accuracy (Single) and whole-scale
//! accuracy (Full) over every (test character, annotated scale) pair.
//! Evaluation interviews every question of the scale; the suitability screen
//! is a dataset-construction step and is not applied here.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assess::{
    AssessError, Assessor, full_accuracy, single_accuracy, single_accuracy_per_result,
};
use crate::gateway::Gateway;
use crate::interview::{
    InterviewError, InterviewRecord, Interviewer, ScreenedQuestions, SuitabilityVerdict,
};
use crate::registry::{CharacterProfile, Registry};
use crate::scales::ScaleBank;
use crate::template::TemplateSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub single_accuracy: f64,
    pub full_accuracy: f64,
    /// (character, scale) pairs assessed / pairs with ground truth.
    pub coverage: f64,
    pub pairs_assessed: usize,
    pub per_pair: Vec<FidelityPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityPair {
    pub character: String,
    pub scale_id: String,
    pub matched_dimensions: usize,
    pub compared_dimensions: usize,
    pub full_match: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum FidelityError {
    #[error("no test character has ground truth for any scale in the bank")]
    NoCoverage,
    #[error(transparent)]
    Interview(#[from] InterviewError),
    #[error(transparent)]
    Assess(#[from] AssessError),
}

/// Mark every question of a scale suitable; evaluation interviews the whole
/// scale.
fn screen_all(profile: &CharacterProfile, scale: &crate::scales::Scale) -> ScreenedQuestions {
    ScreenedQuestions {
        character: profile.name.clone(),
        verdicts: scale
            .questions
            .iter()
            .map(|q| {
                (
                    q.id.clone(),
                    SuitabilityVerdict {
                        question_id: q.id.clone(),
                        character: profile.name.clone(),
                        suitable: true,
                        judge_rationale: "evaluation interviews every question".into(),
                        parse_failed: false,
                    },
                )
            })
            .collect(),
    }
}

/// Knobs for a fidelity run.
#[derive(Debug, Clone, Copy)]
pub struct FidelityOptions {
    /// Average dimension-match ratios per result instead of pooling counts.
    pub per_result_averaging: bool,
    /// Worker threads for the (character, scale) pairs.
    pub workers: usize,
}

impl Default for FidelityOptions {
    fn default() -> Self {
        FidelityOptions {
            per_result_averaging: false,
            workers: 4,
        }
    }
}

/// Run the full fidelity protocol over the registry's test characters.
pub fn personality_fidelity_run(
    gateway: &Gateway,
    templates: &TemplateSet,
    subject_model: &str,
    judge_model: &str,
    bank: &ScaleBank,
    registry: &Registry,
    options: FidelityOptions,
) -> Result<FidelityReport, FidelityError> {
    let (_, test_characters) = registry.split();

    // Every (test character, scale) pair that has an annotation.
    let mut pairs: Vec<(&CharacterProfile, &crate::scales::Scale)> = Vec::new();
    let mut truth_pairs = 0usize;
    for profile in &test_characters {
        for label in registry
            .labels()
            .iter()
            .filter(|l| l.character == profile.name)
        {
            truth_pairs += 1;
            if let Some(scale) = bank.get(&label.scale_id) {
                pairs.push((profile, scale));
            }
        }
    }
    if pairs.is_empty() {
        return Err(FidelityError::NoCoverage);
    }

    let interviewer = Interviewer::new(gateway, templates, subject_model, judge_model);
    let assessor = Assessor::new(gateway, templates, judge_model);

    let outcomes = crate::util::par_map(pairs, options.workers, |(profile, scale)| {
        let screened = screen_all(profile, scale);
        let mut records: Vec<InterviewRecord> = Vec::new();
        for question in &scale.questions {
            match interviewer.run_single(profile, question, &screened) {
                Ok(record) => records.push(record),
                Err(e) => return Err(FidelityError::from(e)),
            }
        }
        let record_refs: Vec<&InterviewRecord> = records.iter().collect();
        let truth = registry
            .ground_truth_for(&profile.name, &scale.id)
            .ok()
            .flatten();
        assessor
            .assess(&profile.name, scale, &record_refs, truth)
            .map_err(FidelityError::from)
    });

    let mut results = Vec::new();
    for outcome in outcomes {
        results.push(outcome?);
    }

    let per_pair: Vec<FidelityPair> = results
        .iter()
        .map(|r| FidelityPair {
            character: r.character.clone(),
            scale_id: r.scale_id.clone(),
            matched_dimensions: r.per_dimension_match.values().filter(|m| **m).count(),
            compared_dimensions: r.per_dimension_match.len(),
            full_match: r.full_match,
        })
        .collect();

    let single = if options.per_result_averaging {
        single_accuracy_per_result(&results)?
    } else {
        single_accuracy(&results)?
    };
    Ok(FidelityReport {
        single_accuracy: single,
        full_accuracy: full_accuracy(&results)?,
        coverage: results.len() as f64 / truth_pairs.max(1) as f64,
        pairs_assessed: results.len(),
        per_pair,
    })
}

/// Judge one multi-turn record round by round: after each turn, every scale
/// dimension is scored on that turn's exchange, producing the per-round score
/// maps the consistency metric consumes.
pub fn per_round_dimension_scores(
    assessor: &Assessor<'_>,
    scale: &crate::scales::Scale,
    record: &InterviewRecord,
) -> Result<Vec<BTreeMap<String, f64>>, AssessError> {
    let mut rounds = Vec::new();
    for turn in &record.turns {
        let mut round = BTreeMap::new();
        for dim in &scale.dimensions {
            let score = assessor.judge_exchange(
                &record.character,
                dim,
                &turn.question_text,
                &turn.response_text,
            )?;
            round.insert(dim.code.clone(), score);
        }
        rounds.push(round);
    }
    Ok(rounds)
}
