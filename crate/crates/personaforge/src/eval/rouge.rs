//! Rouge-L over word tokens.
//!
//! Tokenization is fixed and documented so scores are reproducible:
//! lowercase, split on Unicode whitespace, strip non-alphanumeric characters,
//! drop empty tokens. With L the LCS length over the token sequences,
//! recall = L/|reference|, precision = L/|candidate|, and the reported score
//! is F1 = 2RP/(R+P), or 0 when L = 0.

use serde::{Deserialize, Serialize};

pub use crate::util::tokenize;

/// LCS length via a rolling two-row dynamic program.
fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Rouge-L F1 between a candidate and a reference text.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let reference = tokenize(reference);
    rouge_l_tokens(&cand, &reference)
}

/// Rouge-L F1 over pre-tokenized sequences.
pub fn rouge_l_tokens(candidate: &[String], reference: &[String]) -> f64 {
    let l = lcs_len(candidate, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let recall = l / reference.len() as f64;
    let precision = l / candidate.len() as f64;
    2.0 * recall * precision / (recall + precision)
}

/// One scored (candidate, reference) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougePair {
    pub id: String,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeReport {
    pub pairs: Vec<RougePair>,
    pub mean_f1: f64,
}

/// Score a batch of (id, candidate, reference) triples.
pub fn rouge_report<'a>(
    items: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>,
) -> RougeReport {
    let pairs: Vec<RougePair> = items
        .into_iter()
        .map(|(id, cand, reference)| RougePair {
            id: id.to_string(),
            f1: rouge_l(cand, reference),
        })
        .collect();
    let mean_f1 = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.f1).sum::<f64>() / pairs.len() as f64
    };
    RougeReport { pairs, mean_f1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_score_one() {
        assert_eq!(rouge_l("The cat sat.", "the cat sat"), 1.0);
    }

    #[test]
    fn disjoint_texts_score_zero() {
        assert_eq!(rouge_l("alpha beta", "gamma delta"), 0.0);
        assert_eq!(rouge_l("", "anything"), 0.0);
        assert_eq!(rouge_l("anything", ""), 0.0);
    }

    #[test]
    fn worked_example() {
        // cand "the cat sat", ref "the cat ate food": L=2, R=0.5, P=2/3,
        // F1 = 2RP/(R+P) = 4/7.
        let f1 = rouge_l("the cat sat", "the cat ate food");
        assert!((f1 - 4.0 / 7.0).abs() < 1e-9, "got {f1}");
    }

    #[test]
    fn punctuation_and_case_do_not_matter() {
        assert_eq!(rouge_l("Hello, World!", "hello world"), 1.0);
    }

    #[test]
    fn report_means_over_pairs() {
        let report = rouge_report([("a", "x", "x"), ("b", "x", "y")]);
        assert_eq!(report.pairs.len(), 2);
        assert_eq!(report.mean_f1, 0.5);
    }
}
