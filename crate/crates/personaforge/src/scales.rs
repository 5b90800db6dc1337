//! Psychological scale question banks.
//!
//! A bank file holds a set of scales (BFI, 16Personalities, EPQ-R, ...), each
//! with its trait dimensions and the rewritten open-ended interview questions.
//! Every scale declares its question count so silent truncation of the data
//! file is caught at load time, and the bank names which scales form the
//! personality-centric `Part` subset.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Value, json};

use crate::jsonv::{Cursor, SchemaError};

/// How a scale turns per-dimension levels into a reportable label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    /// One High/Low level per dimension (BFI, EPQ-R, ...).
    PerDimensionLevel,
    /// A type code assembled letter-by-letter (16Personalities).
    CategoricalType,
    /// Masculine/Feminine/Androgynous/Undifferentiated from two median splits (BSRI).
    Quadrant,
}

/// High or Low pole of a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    High,
    Low,
}

/// One trait axis of a scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub scale_id: String,
    pub code: String,
    pub name: String,
    pub description: String,
    /// Letter emitted when the assessed level is High (categorical scales only).
    pub high_letter: Option<String>,
    /// Letter emitted when the assessed level is Low (categorical scales only).
    pub low_letter: Option<String>,
    /// Rendered after a separating dash in the type code (16P identity axis).
    pub suffix: bool,
}

/// A rewritten open-ended interview question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub scale_id: String,
    pub dimension_code: String,
    pub text: String,
    pub reverse_scored: bool,
    pub language_tag: String,
}

/// A full scale: dimensions plus its question pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub id: String,
    pub name: String,
    pub label_kind: LabelKind,
    pub declared_count: usize,
    pub dimensions: Vec<Dimension>,
    pub questions: Vec<Question>,
    /// Population medians keyed by component code, for quadrant scales.
    pub quadrant_medians: Option<BTreeMap<String, f64>>,
}

/// The validated bank: scales by id plus the `Part` membership list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleBank {
    scales: BTreeMap<String, Scale>,
    part_subset: Vec<String>,
}

/// Which question pool to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionMode {
    /// Every question of every scale.
    Full,
    /// Only the scales named in the bank's `part_subset`.
    Part,
}

#[derive(Debug, thiserror::Error)]
pub enum BankError {
    #[error("bank file not found: {path}")]
    MissingFile { path: String },
    #[error("bank file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema violation {0}")]
    Schema(SchemaError),
    #[error("scale `{scale}` declares {declared} questions but contains {actual}")]
    CountMismatch {
        scale: String,
        declared: usize,
        actual: usize,
    },
    #[error("mode=Part requested but the bank's part_subset is empty")]
    EmptyPartSubset,
    #[error("reading bank file: {0}")]
    Io(#[from] std::io::Error),
}

impl From<SchemaError> for BankError {
    fn from(e: SchemaError) -> Self {
        BankError::Schema(e)
    }
}

impl Scale {
    pub fn dimension(&self, code: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.code == code)
    }

    /// Partition the question pool by dimension code. Buckets are disjoint
    /// and jointly cover every question; codes with no questions are absent.
    pub fn questions_by_dimension(&self) -> BTreeMap<&str, Vec<&Question>> {
        let mut map: BTreeMap<&str, Vec<&Question>> = BTreeMap::new();
        for q in &self.questions {
            map.entry(q.dimension_code.as_str()).or_default().push(q);
        }
        map
    }

    /// Parse a categorical type code ("INTJ" or "ESTP-A") into levels per
    /// dimension. A missing suffix part leaves the suffixed dimensions out.
    pub fn parse_categorical_label(&self, label: &str) -> Option<BTreeMap<String, Level>> {
        if self.label_kind != LabelKind::CategoricalType {
            return None;
        }
        let (base, suffix) = match label.split_once('-') {
            Some((b, s)) => (b, Some(s)),
            None => (label, None),
        };
        let mut levels = BTreeMap::new();
        let mut base_chars = base.chars();
        let mut suffix_chars = suffix.unwrap_or("").chars();
        for dim in &self.dimensions {
            let (high, low) = (dim.high_letter.as_deref()?, dim.low_letter.as_deref()?);
            let next = if dim.suffix {
                match suffix {
                    None => continue,
                    Some(_) => suffix_chars.next()?,
                }
            } else {
                base_chars.next()?
            };
            let s = next.to_string();
            if s.eq_ignore_ascii_case(high) {
                levels.insert(dim.code.clone(), Level::High);
            } else if s.eq_ignore_ascii_case(low) {
                levels.insert(dim.code.clone(), Level::Low);
            } else {
                return None;
            }
        }
        // Reject trailing junk.
        if base_chars.next().is_some() || suffix_chars.next().is_some() {
            return None;
        }
        Some(levels)
    }
}

impl ScaleBank {
    /// Load and validate a bank file. See the book's scale-banks chapter for
    /// the schema.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BankError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(BankError::MissingFile {
                path: path.display().to_string(),
            });
        }
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text)?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self, BankError> {
        let root = Cursor::root(value);
        let mut scales = BTreeMap::new();

        for scale_cur in root.field("scales")?.array()? {
            let scale = parse_scale(&scale_cur)?;
            if scales.contains_key(&scale.id) {
                return Err(SchemaError {
                    pointer: scale_cur.field("id")?.pointer().to_string(),
                    expected: "a scale id not already used".to_string(),
                }
                .into());
            }
            scales.insert(scale.id.clone(), scale);
        }

        let mut part_subset = Vec::new();
        for part_cur in root.field("part_subset")?.array()? {
            let id = part_cur.non_empty_str()?;
            if !scales.contains_key(id) {
                return Err(SchemaError {
                    pointer: part_cur.pointer().to_string(),
                    expected: "the id of a scale present in this bank".to_string(),
                }
                .into());
            }
            if !part_subset.iter().any(|p| p == id) {
                part_subset.push(id.to_string());
            }
        }

        if scales.is_empty() {
            log::warn!("scale bank contains no scales");
        }
        Ok(ScaleBank {
            scales,
            part_subset,
        })
    }

    pub fn get(&self, id: &str) -> Option<&Scale> {
        self.scales.get(id)
    }

    /// Scales in id order.
    pub fn scales(&self) -> impl Iterator<Item = &Scale> {
        self.scales.values()
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn part_subset(&self) -> &[String] {
        &self.part_subset
    }

    pub fn is_part_scale(&self, scale_id: &str) -> bool {
        self.part_subset.iter().any(|s| s == scale_id)
    }

    pub fn total_questions(&self) -> usize {
        self.scales.values().map(|s| s.questions.len()).sum()
    }

    /// Look up a question by scale and question id.
    pub fn question(&self, scale_id: &str, question_id: &str) -> Option<&Question> {
        self.scales
            .get(scale_id)?
            .questions
            .iter()
            .find(|q| q.id == question_id)
    }

    /// All questions of the chosen pool, ordered by (scale id, question id).
    pub fn select_questions(&self, mode: QuestionMode) -> Result<Vec<&Question>, BankError> {
        let scale_ids: Vec<&str> = match mode {
            QuestionMode::Full => self.scales.keys().map(|s| s.as_str()).collect(),
            QuestionMode::Part => {
                if self.part_subset.is_empty() {
                    return Err(BankError::EmptyPartSubset);
                }
                let mut ids: Vec<&str> = self.part_subset.iter().map(|s| s.as_str()).collect();
                ids.sort_unstable();
                ids
            }
        };
        let mut out = Vec::new();
        for id in scale_ids {
            let scale = &self.scales[id];
            let mut qs: Vec<&Question> = scale.questions.iter().collect();
            qs.sort_by(|a, b| a.id.cmp(&b.id));
            out.extend(qs);
        }
        Ok(out)
    }

    /// Serialize back to the bank file schema.
    pub fn to_value(&self) -> Value {
        let scales: Vec<Value> = self
            .scales
            .values()
            .map(|s| {
                let dims: Vec<Value> = s
                    .dimensions
                    .iter()
                    .map(|d| {
                        let mut o = json!({
                            "code": d.code,
                            "name": d.name,
                            "description": d.description,
                        });
                        if let Some(h) = &d.high_letter {
                            o["high_letter"] = json!(h);
                        }
                        if let Some(l) = &d.low_letter {
                            o["low_letter"] = json!(l);
                        }
                        if d.suffix {
                            o["suffix"] = json!(true);
                        }
                        o
                    })
                    .collect();
                let questions: Vec<Value> = s
                    .questions
                    .iter()
                    .map(|q| {
                        json!({
                            "id": q.id,
                            "dimension": q.dimension_code,
                            "text": q.text,
                            "reverse_scored": q.reverse_scored,
                            "language": q.language_tag,
                        })
                    })
                    .collect();
                let mut o = json!({
                    "id": s.id,
                    "name": s.name,
                    "label_kind": s.label_kind,
                    "declared_count": s.declared_count,
                    "dimensions": dims,
                    "questions": questions,
                });
                if let Some(m) = &s.quadrant_medians {
                    o["quadrant_medians"] = json!(m);
                }
                o
            })
            .collect();
        json!({ "part_subset": self.part_subset, "scales": scales })
    }
}

fn parse_label_kind(cur: &Cursor<'_>) -> Result<LabelKind, BankError> {
    match cur.str()? {
        "per_dimension_level" => Ok(LabelKind::PerDimensionLevel),
        "categorical_type" => Ok(LabelKind::CategoricalType),
        "quadrant" => Ok(LabelKind::Quadrant),
        _ => Err(SchemaError {
            pointer: cur.pointer().to_string(),
            expected: "one of `per_dimension_level`, `categorical_type`, `quadrant`".to_string(),
        }
        .into()),
    }
}

fn parse_scale(cur: &Cursor<'_>) -> Result<Scale, BankError> {
    let id = cur.field("id")?.non_empty_str()?.to_string();
    let name = cur.field("name")?.non_empty_str()?.to_string();
    let label_kind = parse_label_kind(&cur.field("label_kind")?)?;
    let declared_count = cur.field("declared_count")?.u64()? as usize;

    let mut dimensions = Vec::new();
    let mut dim_codes = BTreeSet::new();
    for dim_cur in cur.field("dimensions")?.array()? {
        let code = dim_cur.field("code")?.non_empty_str()?.to_string();
        if !dim_codes.insert(code.clone()) {
            return Err(SchemaError {
                pointer: dim_cur.field("code")?.pointer().to_string(),
                expected: "a dimension code unique within the scale".to_string(),
            }
            .into());
        }
        let high_letter = match dim_cur.opt_field("high_letter") {
            Some(c) => Some(c.non_empty_str()?.to_string()),
            None => None,
        };
        let low_letter = match dim_cur.opt_field("low_letter") {
            Some(c) => Some(c.non_empty_str()?.to_string()),
            None => None,
        };
        if label_kind == LabelKind::CategoricalType
            && (high_letter.is_none() || low_letter.is_none())
        {
            return Err(SchemaError {
                pointer: dim_cur.pointer().to_string(),
                expected: "high_letter and low_letter on every dimension of a categorical scale"
                    .to_string(),
            }
            .into());
        }
        dimensions.push(Dimension {
            scale_id: id.clone(),
            code,
            name: dim_cur.field("name")?.non_empty_str()?.to_string(),
            description: dim_cur.field("description")?.str()?.to_string(),
            high_letter,
            low_letter,
            suffix: match dim_cur.opt_field("suffix") {
                Some(c) => c.bool()?,
                None => false,
            },
        });
    }

    let mut questions = Vec::new();
    let mut question_ids = BTreeSet::new();
    for q_cur in cur.field("questions")?.array()? {
        let qid = q_cur.field("id")?.non_empty_str()?.to_string();
        if !question_ids.insert(qid.clone()) {
            return Err(SchemaError {
                pointer: q_cur.field("id")?.pointer().to_string(),
                expected: "a question id unique within the scale".to_string(),
            }
            .into());
        }
        let dimension_code = q_cur.field("dimension")?.non_empty_str()?.to_string();
        if !dim_codes.contains(&dimension_code) {
            return Err(SchemaError {
                pointer: q_cur.field("dimension")?.pointer().to_string(),
                expected: "a dimension code declared by the scale".to_string(),
            }
            .into());
        }
        questions.push(Question {
            id: qid,
            scale_id: id.clone(),
            dimension_code,
            text: q_cur.field("text")?.non_empty_str()?.to_string(),
            reverse_scored: q_cur.field("reverse_scored")?.bool()?,
            language_tag: q_cur.field("language")?.non_empty_str()?.to_string(),
        });
    }

    if questions.len() != declared_count {
        return Err(BankError::CountMismatch {
            scale: id,
            declared: declared_count,
            actual: questions.len(),
        });
    }

    let quadrant_medians = match cur.opt_field("quadrant_medians") {
        Some(m_cur) => {
            let mut medians = BTreeMap::new();
            for (k, v) in m_cur.entries()? {
                if !dim_codes.contains(k) {
                    return Err(SchemaError {
                        pointer: v.pointer().to_string(),
                        expected: "a median keyed by a dimension code of this scale".to_string(),
                    }
                    .into());
                }
                medians.insert(k.to_string(), v.f64()?);
            }
            Some(medians)
        }
        None => None,
    };
    if label_kind == LabelKind::Quadrant {
        let ok = quadrant_medians
            .as_ref()
            .is_some_and(|m| m.contains_key("M") && m.contains_key("F"));
        if !ok {
            return Err(SchemaError {
                pointer: cur.pointer().to_string(),
                expected: "quadrant_medians with `M` and `F` entries on a quadrant scale"
                    .to_string(),
            }
            .into());
        }
    }

    Ok(Scale {
        id,
        name,
        label_kind,
        declared_count,
        dimensions,
        questions,
        quadrant_medians,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tiny_bank() -> Value {
        json!({
            "part_subset": ["mini"],
            "scales": [
                {
                    "id": "mini",
                    "name": "Mini Scale",
                    "label_kind": "per_dimension_level",
                    "declared_count": 3,
                    "dimensions": [
                        {"code": "X", "name": "Xish", "description": ""},
                        {"code": "Y", "name": "Yish", "description": ""}
                    ],
                    "questions": [
                        {"id": "mini-1", "dimension": "X", "text": "How do you feel about x?", "reverse_scored": false, "language": "en"},
                        {"id": "mini-2", "dimension": "Y", "text": "How do you feel about y?", "reverse_scored": true, "language": "en"},
                        {"id": "mini-3", "dimension": "X", "text": "Tell me about x again.", "reverse_scored": false, "language": "en"}
                    ]
                },
                {
                    "id": "solo",
                    "name": "Solo Scale",
                    "label_kind": "per_dimension_level",
                    "declared_count": 1,
                    "dimensions": [{"code": "S", "name": "Solo", "description": ""}],
                    "questions": [
                        {"id": "solo-1", "dimension": "S", "text": "Anything?", "reverse_scored": false, "language": "en"}
                    ]
                }
            ]
        })
    }

    #[test]
    fn loads_and_counts() {
        let bank = ScaleBank::from_value(&tiny_bank()).unwrap();
        assert_eq!(bank.len(), 2);
        assert_eq!(bank.total_questions(), 4);
        assert_eq!(bank.part_subset(), &["mini".to_string()]);
    }

    #[test]
    fn empty_bank_is_valid() {
        let bank = ScaleBank::from_value(&json!({"part_subset": [], "scales": []})).unwrap();
        assert!(bank.is_empty());
    }

    #[test]
    fn count_mismatch_is_reported() {
        let mut v = tiny_bank();
        v["scales"][0]["declared_count"] = json!(4);
        match ScaleBank::from_value(&v) {
            Err(BankError::CountMismatch {
                scale,
                declared,
                actual,
            }) => {
                assert_eq!(scale, "mini");
                assert_eq!((declared, actual), (4, 3));
            }
            other => panic!("expected CountMismatch, got {other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let mut v = tiny_bank();
        v["scales"][0]["questions"][1]["text"] = json!("");
        match ScaleBank::from_value(&v) {
            Err(BankError::Schema(e)) => {
                assert_eq!(e.pointer, "/scales/0/questions/1/text");
            }
            other => panic!("expected Schema, got {other:?}"),
        }
    }

    #[test]
    fn unknown_dimension_is_a_schema_violation() {
        let mut v = tiny_bank();
        v["scales"][0]["questions"][2]["dimension"] = json!("Z");
        match ScaleBank::from_value(&v) {
            Err(BankError::Schema(e)) => {
                assert_eq!(e.pointer, "/scales/0/questions/2/dimension");
            }
            other => panic!("expected Schema, got {other:?}"),
        }
    }

    #[test]
    fn select_questions_full_and_part() {
        let bank = ScaleBank::from_value(&tiny_bank()).unwrap();
        let full = bank.select_questions(QuestionMode::Full).unwrap();
        assert_eq!(full.len(), 4);
        // Ordered by scale id then question id.
        let ids: Vec<&str> = full.iter().map(|q| q.id.as_str()).collect();
        assert_eq!(ids, ["mini-1", "mini-2", "mini-3", "solo-1"]);
        let part = bank.select_questions(QuestionMode::Part).unwrap();
        assert_eq!(part.len(), 3);
        assert!(part.iter().all(|q| q.scale_id == "mini"));
    }

    #[test]
    fn empty_part_subset_errors() {
        let mut v = tiny_bank();
        v["part_subset"] = json!([]);
        let bank = ScaleBank::from_value(&v).unwrap();
        assert!(matches!(
            bank.select_questions(QuestionMode::Part),
            Err(BankError::EmptyPartSubset)
        ));
    }

    #[test]
    fn questions_by_dimension_partitions() {
        let bank = ScaleBank::from_value(&tiny_bank()).unwrap();
        let scale = bank.get("mini").unwrap();
        let buckets = scale.questions_by_dimension();
        assert_eq!(buckets.len(), 2);
        assert_eq!(buckets["X"].len(), 2);
        assert_eq!(buckets["Y"].len(), 1);
        let total: usize = buckets.values().map(|b| b.len()).sum();
        assert_eq!(total, scale.questions.len());
    }

    #[test]
    fn single_dimension_scale_gets_one_bucket() {
        let bank = ScaleBank::from_value(&tiny_bank()).unwrap();
        let scale = bank.get("solo").unwrap();
        let buckets = scale.questions_by_dimension();
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets["S"].len(), scale.questions.len());
    }

    #[test]
    fn round_trips_through_value() {
        let bank = ScaleBank::from_value(&tiny_bank()).unwrap();
        let reloaded = ScaleBank::from_value(&bank.to_value()).unwrap();
        assert_eq!(bank, reloaded);
    }

    #[test]
    fn missing_file_is_distinguished() {
        assert!(matches!(
            ScaleBank::load("/definitely/not/here.json"),
            Err(BankError::MissingFile { .. })
        ));
    }

    #[test]
    fn parses_categorical_labels() {
        let v = json!({
            "part_subset": [],
            "scales": [{
                "id": "16personalities",
                "name": "16Personalities",
                "label_kind": "categorical_type",
                "declared_count": 0,
                "dimensions": [
                    {"code": "E", "name": "Mind", "description": "", "high_letter": "E", "low_letter": "I"},
                    {"code": "N", "name": "Energy", "description": "", "high_letter": "N", "low_letter": "S"},
                    {"code": "T", "name": "Nature", "description": "", "high_letter": "T", "low_letter": "F"},
                    {"code": "J", "name": "Tactics", "description": "", "high_letter": "J", "low_letter": "P"},
                    {"code": "A", "name": "Identity", "description": "", "high_letter": "A", "low_letter": "T", "suffix": true}
                ],
                "questions": []
            }]
        });
        let bank = ScaleBank::from_value(&v).unwrap();
        let scale = bank.get("16personalities").unwrap();
        let levels = scale.parse_categorical_label("INTJ").unwrap();
        assert_eq!(levels["E"], Level::Low);
        assert_eq!(levels["N"], Level::High);
        assert_eq!(levels["T"], Level::High);
        assert_eq!(levels["J"], Level::High);
        assert!(!levels.contains_key("A"));
        let full = scale.parse_categorical_label("ESTP-A").unwrap();
        assert_eq!(full["A"], Level::High);
        assert_eq!(full["N"], Level::Low);
        assert!(scale.parse_categorical_label("XXXX").is_none());
        assert!(scale.parse_categorical_label("INTJX").is_none());
    }
}
