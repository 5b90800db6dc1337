//! Judge-based personality assessment, label classification, accuracy
//! aggregation, and the filtering mechanism.
//!
//! Interview responses are scored per item on a 1-7 scale by a judge at
//! temperature 0 (reverse-scored items reflected about the midpoint), averaged
//! per dimension, classified into the scale's label, and compared with the
//! annotated ground truth. Records probing dimensions that contradict the
//! annotation are discarded from dataset exports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::gateway::{ChatRequest, Gateway, GatewayError, Message};
use crate::interview::InterviewRecord;
use crate::registry::{GroundTruthLabel, LabelValue};
use crate::scales::{Dimension, LabelKind, Level, Question, Scale};
use crate::template::{TemplateError, TemplateSet, names};

/// The judge's numeric scale for per-item assessment.
pub const JUDGE_MIN: i64 = 1;
pub const JUDGE_MAX: i64 = 7;
/// Levels split at the midpoint; a mean on the midpoint counts as High.
pub const JUDGE_MIDPOINT: f64 = 4.0;

/// Reflect a per-item score about the scale midpoint (reverse-scored items).
/// Applying it twice returns the original score.
pub fn reflect(score: f64) -> f64 {
    (JUDGE_MIN + JUDGE_MAX) as f64 - score
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub character: String,
    pub scale_id: String,
    pub dimension_code: String,
    /// Mean of per-item judged scores, reverse-scored items reflected.
    pub raw_score: f64,
    pub level: Level,
    pub n_items: usize,
}

/// A scale-level label produced by [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictedLabel {
    Levels(BTreeMap<String, Level>),
    Code(String),
    Quadrant(QuadrantLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadrantLabel {
    Masculine,
    Feminine,
    Androgynous,
    Undifferentiated,
}

impl QuadrantLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            QuadrantLabel::Masculine => "Masculine",
            QuadrantLabel::Feminine => "Feminine",
            QuadrantLabel::Androgynous => "Androgynous",
            QuadrantLabel::Undifferentiated => "Undifferentiated",
        }
    }

    /// The (M-exceeds-median, F-exceeds-median) pair this quadrant implies.
    pub fn components(&self) -> (bool, bool) {
        match self {
            QuadrantLabel::Masculine => (true, false),
            QuadrantLabel::Feminine => (false, true),
            QuadrantLabel::Androgynous => (true, true),
            QuadrantLabel::Undifferentiated => (false, false),
        }
    }

    pub fn from_components(m: bool, f: bool) -> Self {
        match (m, f) {
            (true, false) => QuadrantLabel::Masculine,
            (false, true) => QuadrantLabel::Feminine,
            (true, true) => QuadrantLabel::Androgynous,
            (false, false) => QuadrantLabel::Undifferentiated,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Masculine" => Some(QuadrantLabel::Masculine),
            "Feminine" => Some(QuadrantLabel::Feminine),
            "Androgynous" => Some(QuadrantLabel::Androgynous),
            "Undifferentiated" => Some(QuadrantLabel::Undifferentiated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub character: String,
    pub scale_id: String,
    pub dimension_scores: Vec<DimensionScore>,
    /// Dimensions where every item's judge reply was unparseable.
    pub failed_dimensions: BTreeSet<String>,
    /// Present when every scale dimension was scored.
    pub predicted_label: Option<PredictedLabel>,
    pub truth_label: Option<LabelValue>,
    /// One entry per dimension covered by both the truth label and the scores.
    pub per_dimension_match: BTreeMap<String, bool>,
    /// True iff truth exists, every truth dimension was compared, and every
    /// comparison matched — i.e. the classified label equals the annotation.
    pub full_match: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterPolicy {
    /// Discard a record iff a dimension it probes mismatches ground truth.
    PerDimension,
    /// Discard a record unless the whole-scale label matches.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterReason {
    Match,
    Mismatch,
    NoGroundTruth,
    JudgeFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub record_id: String,
    pub kept: bool,
    pub reason: FilterReason,
}

#[derive(Debug, thiserror::Error)]
pub enum AssessError {
    #[error("gateway error judging ({character}, {dimension}): {source}")]
    Gateway {
        character: String,
        dimension: String,
        #[source]
        source: GatewayError,
    },
    #[error("every item of ({character}, {dimension}) failed to parse")]
    JudgeFailure {
        character: String,
        dimension: String,
    },
    #[error("no score for dimension `{0}`")]
    MissingDimension(String),
    #[error("item {question_id} belongs to dimension `{actual}`, not `{expected}`")]
    WrongDimension {
        question_id: String,
        expected: String,
        actual: String,
    },
    #[error("no results to aggregate")]
    EmptyInput,
    #[error("scale `{0}` has no quadrant medians")]
    MissingMedians(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Judges interview items against a gateway at temperature 0.
pub struct Assessor<'a> {
    gateway: &'a Gateway,
    templates: &'a TemplateSet,
    judge_model: String,
}

impl<'a> Assessor<'a> {
    pub fn new(
        gateway: &'a Gateway,
        templates: &'a TemplateSet,
        judge_model: impl Into<String>,
    ) -> Self {
        Assessor {
            gateway,
            templates,
            judge_model: judge_model.into(),
        }
    }

    /// Score one dimension from its (question, response) items. Items whose
    /// judge reply has no parseable score are skipped; if all fail, the whole
    /// dimension is a [`AssessError::JudgeFailure`].
    pub fn judge_dimension(
        &self,
        character: &str,
        dimension: &Dimension,
        items: &[(&Question, &str)],
    ) -> Result<DimensionScore, AssessError> {
        let mut scores = Vec::new();
        for (question, response) in items {
            if question.dimension_code != dimension.code {
                return Err(AssessError::WrongDimension {
                    question_id: question.id.clone(),
                    expected: dimension.code.clone(),
                    actual: question.dimension_code.clone(),
                });
            }
            let prompt = self.templates.render(
                names::ITEM_JUDGE,
                &[
                    ("character", character),
                    ("dimension_name", &dimension.name),
                    ("dimension_description", &dimension.description),
                    ("question", &question.text),
                    ("response", response),
                ],
            )?;
            let req = ChatRequest::new(self.judge_model.clone(), vec![Message::user(prompt)])
                .with_temperature(0.0);
            let resp = self
                .gateway
                .chat(&req)
                .map_err(|source| AssessError::Gateway {
                    character: character.to_string(),
                    dimension: dimension.code.clone(),
                    source,
                })?;
            match crate::parse::final_score_in(&resp.content, JUDGE_MIN, JUDGE_MAX) {
                Some(s) => {
                    let s = s as f64;
                    scores.push(if question.reverse_scored {
                        reflect(s)
                    } else {
                        s
                    });
                }
                None => {
                    log::warn!(
                        "unparseable judge reply for ({character}, {}); item skipped",
                        question.id
                    );
                }
            }
        }
        if scores.is_empty() {
            return Err(AssessError::JudgeFailure {
                character: character.to_string(),
                dimension: dimension.code.clone(),
            });
        }
        let raw_score = scores.iter().sum::<f64>() / scores.len() as f64;
        Ok(DimensionScore {
            character: character.to_string(),
            scale_id: dimension.scale_id.clone(),
            dimension_code: dimension.code.clone(),
            raw_score,
            level: if raw_score >= JUDGE_MIDPOINT {
                Level::High
            } else {
                Level::Low
            },
            n_items: scores.len(),
        })
    }

    /// Score a single question/answer exchange against a dimension's rubric,
    /// regardless of which dimension the question was written for. Used by
    /// the multi-turn consistency protocol, which judges every dimension on
    /// each round's exchange. No reverse-score reflection applies: the judge
    /// rates expression of the target dimension directly.
    pub fn judge_exchange(
        &self,
        character: &str,
        dimension: &Dimension,
        question_text: &str,
        response: &str,
    ) -> Result<f64, AssessError> {
        let prompt = self.templates.render(
            names::ITEM_JUDGE,
            &[
                ("character", character),
                ("dimension_name", &dimension.name),
                ("dimension_description", &dimension.description),
                ("question", question_text),
                ("response", response),
            ],
        )?;
        let req = ChatRequest::new(self.judge_model.clone(), vec![Message::user(prompt)])
            .with_temperature(0.0);
        let resp = self
            .gateway
            .chat(&req)
            .map_err(|source| AssessError::Gateway {
                character: character.to_string(),
                dimension: dimension.code.clone(),
                source,
            })?;
        crate::parse::final_score_in(&resp.content, JUDGE_MIN, JUDGE_MAX)
            .map(|s| s as f64)
            .ok_or_else(|| AssessError::JudgeFailure {
                character: character.to_string(),
                dimension: dimension.code.clone(),
            })
    }

    /// Assess one (character, scale) from its interview records: judge every
    /// dimension that has responses, classify when complete, and compare with
    /// ground truth.
    pub fn assess(
        &self,
        character: &str,
        scale: &Scale,
        records: &[&InterviewRecord],
        truth: Option<&GroundTruthLabel>,
    ) -> Result<AssessmentResult, AssessError> {
        // Collect (question, response) items per dimension.
        let mut items: BTreeMap<&str, Vec<(&Question, &str)>> = BTreeMap::new();
        for record in records {
            for turn in &record.turns {
                if let Some(q) = scale.questions.iter().find(|q| q.id == turn.question_id) {
                    items
                        .entry(q.dimension_code.as_str())
                        .or_default()
                        .push((q, turn.response_text.as_str()));
                }
            }
        }

        let mut dimension_scores = Vec::new();
        let mut failed_dimensions = BTreeSet::new();
        for dim in &scale.dimensions {
            let Some(dim_items) = items.get(dim.code.as_str()) else {
                continue;
            };
            match self.judge_dimension(character, dim, dim_items) {
                Ok(score) => dimension_scores.push(score),
                Err(AssessError::JudgeFailure { .. }) => {
                    failed_dimensions.insert(dim.code.clone());
                }
                Err(e) => return Err(e),
            }
        }

        let predicted_label = classify(&dimension_scores, scale).ok();
        let truth_label = truth.map(|t| t.label.clone());
        let per_dimension_match = match &truth_label {
            Some(label) => match_dimensions(&dimension_scores, scale, label),
            None => BTreeMap::new(),
        };
        let full_match = match &truth_label {
            Some(label) => {
                let truth_dims = truth_dimension_count(scale, label);
                truth_dims > 0
                    && per_dimension_match.len() == truth_dims
                    && per_dimension_match.values().all(|m| *m)
            }
            None => false,
        };

        Ok(AssessmentResult {
            character: character.to_string(),
            scale_id: scale.id.clone(),
            dimension_scores,
            failed_dimensions,
            predicted_label,
            truth_label,
            per_dimension_match,
            full_match,
        })
    }
}

/// Number of dimensions a truth label pins down.
fn truth_dimension_count(scale: &Scale, label: &LabelValue) -> usize {
    match (label, scale.label_kind) {
        (LabelValue::Levels(levels), _) => levels.len(),
        (LabelValue::Categorical(code), LabelKind::CategoricalType) => {
            scale.parse_categorical_label(code).map_or(0, |m| m.len())
        }
        (LabelValue::Categorical(_), LabelKind::Quadrant) => 2,
        (LabelValue::Categorical(_), LabelKind::PerDimensionLevel) => 0,
    }
}

/// Per-dimension agreement between assessed levels and the truth label, for
/// the dimensions both sides cover.
fn match_dimensions(
    scores: &[DimensionScore],
    scale: &Scale,
    truth: &LabelValue,
) -> BTreeMap<String, bool> {
    let by_code: BTreeMap<&str, &DimensionScore> = scores
        .iter()
        .map(|s| (s.dimension_code.as_str(), s))
        .collect();
    let mut matches = BTreeMap::new();
    match (truth, scale.label_kind) {
        (LabelValue::Levels(levels), _) => {
            for (code, truth_level) in levels {
                if let Some(score) = by_code.get(code.as_str()) {
                    matches.insert(code.clone(), score.level == *truth_level);
                }
            }
        }
        (LabelValue::Categorical(code), LabelKind::CategoricalType) => {
            if let Some(levels) = scale.parse_categorical_label(code) {
                for (code, truth_level) in levels {
                    if let Some(score) = by_code.get(code.as_str()) {
                        matches.insert(code.clone(), score.level == truth_level);
                    }
                }
            }
        }
        (LabelValue::Categorical(name), LabelKind::Quadrant) => {
            if let (Some(truth_quadrant), Some(medians)) =
                (QuadrantLabel::parse(name), scale.quadrant_medians.as_ref())
            {
                let (truth_m, truth_f) = truth_quadrant.components();
                for (code, truth_exceeds) in [("M", truth_m), ("F", truth_f)] {
                    if let (Some(score), Some(median)) = (by_code.get(code), medians.get(code)) {
                        matches.insert(
                            code.to_string(),
                            (score.raw_score > *median) == truth_exceeds,
                        );
                    }
                }
            }
        }
        (LabelValue::Categorical(_), LabelKind::PerDimensionLevel) => {}
    }
    matches
}

/// Classify dimension scores into the scale's label. Requires one score per
/// scale dimension.
pub fn classify(scores: &[DimensionScore], scale: &Scale) -> Result<PredictedLabel, AssessError> {
    let by_code: BTreeMap<&str, &DimensionScore> = scores
        .iter()
        .map(|s| (s.dimension_code.as_str(), s))
        .collect();
    for dim in &scale.dimensions {
        if !by_code.contains_key(dim.code.as_str()) {
            return Err(AssessError::MissingDimension(dim.code.clone()));
        }
    }
    match scale.label_kind {
        LabelKind::PerDimensionLevel => Ok(PredictedLabel::Levels(
            scale
                .dimensions
                .iter()
                .map(|d| (d.code.clone(), by_code[d.code.as_str()].level))
                .collect(),
        )),
        LabelKind::CategoricalType => {
            let mut code = String::new();
            for dim in &scale.dimensions {
                let score = by_code[dim.code.as_str()];
                let letter = match score.level {
                    Level::High => dim.high_letter.as_deref(),
                    Level::Low => dim.low_letter.as_deref(),
                }
                .ok_or_else(|| AssessError::MissingDimension(dim.code.clone()))?;
                if dim.suffix {
                    code.push('-');
                }
                code.push_str(letter);
            }
            Ok(PredictedLabel::Code(code))
        }
        LabelKind::Quadrant => {
            let medians = scale
                .quadrant_medians
                .as_ref()
                .ok_or_else(|| AssessError::MissingMedians(scale.id.clone()))?;
            let exceeds = |code: &str| -> Result<bool, AssessError> {
                let score = by_code
                    .get(code)
                    .ok_or_else(|| AssessError::MissingDimension(code.to_string()))?;
                let median = medians
                    .get(code)
                    .ok_or_else(|| AssessError::MissingMedians(scale.id.clone()))?;
                Ok(score.raw_score > *median)
            };
            Ok(PredictedLabel::Quadrant(QuadrantLabel::from_components(
                exceeds("M")?,
                exceeds("F")?,
            )))
        }
    }
}

/// Pooled per-dimension accuracy: matched entries over all entries, across
/// every result. Results must carry ground truth.
pub fn single_accuracy(results: &[AssessmentResult]) -> Result<f64, AssessError> {
    let mut matched = 0usize;
    let mut total = 0usize;
    for r in results {
        if r.truth_label.is_none() {
            return Err(AssessError::EmptyInput);
        }
        matched += r.per_dimension_match.values().filter(|m| **m).count();
        total += r.per_dimension_match.len();
    }
    if total == 0 {
        return Err(AssessError::EmptyInput);
    }
    Ok(matched as f64 / total as f64)
}

/// Mean of per-result dimension-match ratios (the per-character averaging
/// variant; pooling is the default).
pub fn single_accuracy_per_result(results: &[AssessmentResult]) -> Result<f64, AssessError> {
    let mut ratios = Vec::new();
    for r in results {
        if r.truth_label.is_none() {
            return Err(AssessError::EmptyInput);
        }
        if !r.per_dimension_match.is_empty() {
            let matched = r.per_dimension_match.values().filter(|m| **m).count();
            ratios.push(matched as f64 / r.per_dimension_match.len() as f64);
        }
    }
    if ratios.is_empty() {
        return Err(AssessError::EmptyInput);
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Whole-scale accuracy: the fraction of results whose full label matched.
pub fn full_accuracy(results: &[AssessmentResult]) -> Result<f64, AssessError> {
    if results.is_empty() {
        return Err(AssessError::EmptyInput);
    }
    if results.iter().any(|r| r.truth_label.is_none()) {
        return Err(AssessError::EmptyInput);
    }
    let full = results.iter().filter(|r| r.full_match).count();
    Ok(full as f64 / results.len() as f64)
}

/// Decide keep/discard for every record. A record is kept iff the dimensions
/// its questions probe matched ground truth (per-dimension policy) or the
/// whole label matched (strict). Records without usable ground truth are kept
/// and flagged; records probing only judge-failed dimensions are discarded.
pub fn filter_records(
    records: &[InterviewRecord],
    assessments: &[AssessmentResult],
    policy: FilterPolicy,
) -> Vec<FilterOutcome> {
    let by_key: BTreeMap<(&str, &str), &AssessmentResult> = assessments
        .iter()
        .map(|a| ((a.character.as_str(), a.scale_id.as_str()), a))
        .collect();

    records
        .iter()
        .map(|record| {
            let assessment = by_key.get(&(record.character.as_str(), record.scale_id.as_str()));
            let (kept, reason) = match assessment {
                None => (true, FilterReason::NoGroundTruth),
                Some(a) if a.truth_label.is_none() => (true, FilterReason::NoGroundTruth),
                Some(a) => match policy {
                    FilterPolicy::Strict => {
                        if a.full_match {
                            (true, FilterReason::Match)
                        } else {
                            (false, FilterReason::Mismatch)
                        }
                    }
                    FilterPolicy::PerDimension => {
                        let probed: BTreeSet<&str> = record
                            .turns
                            .iter()
                            .map(|t| t.dimension_code.as_str())
                            .collect();
                        let mut compared = 0usize;
                        let mut mismatch = false;
                        let mut failed = false;
                        for dim in &probed {
                            if let Some(m) = a.per_dimension_match.get(*dim) {
                                compared += 1;
                                if !m {
                                    mismatch = true;
                                }
                            } else if a.failed_dimensions.contains(*dim) {
                                failed = true;
                            }
                        }
                        if mismatch {
                            (false, FilterReason::Mismatch)
                        } else if compared > 0 {
                            (true, FilterReason::Match)
                        } else if failed {
                            (false, FilterReason::JudgeFailure)
                        } else {
                            (true, FilterReason::NoGroundTruth)
                        }
                    }
                },
            };
            if kept && reason == FilterReason::NoGroundTruth {
                log::debug!("record {} kept without ground truth", record.id);
            }
            FilterOutcome {
                record_id: record.id.clone(),
                kept,
                reason,
            }
        })
        .collect()
}
