//! Topic reporting and UMass coherence scoring.

use crate::corpus::Corpus;
use crate::model::Model;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("topic index {0} out of range")]
    TopicOutOfRange(usize),
    #[error("reference document collection is empty")]
    EmptyDocs,
}

/// Top-N words of one topic, ordered by descending probability; ties are
/// broken by ascending word id.
#[derive(Debug, Clone)]
pub struct TopicReport {
    pub topic: usize,
    pub words: Vec<(usize, f64)>,
}

pub fn top_words(model: &Model, topic: usize, n: usize) -> Result<TopicReport, EvalError> {
    if topic >= model.phi_t.rows() {
        return Err(EvalError::TopicOutOfRange(topic));
    }
    let row = model.phi_t.row(topic);
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
    order.truncate(n);
    Ok(TopicReport {
        topic,
        words: order.into_iter().map(|w| (w, row[w])).collect(),
    })
}

/// Which unit counts as one reference document when scoring coherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocUnit {
    Message,
    Tree,
}

impl DocUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            DocUnit::Message => "message",
            DocUnit::Tree => "tree",
        }
    }
}

/// Reference collection for coherence: one word-id set per document.
pub fn reference_docs(corpus: &Corpus, unit: DocUnit) -> Vec<BTreeSet<usize>> {
    match unit {
        DocUnit::Message => corpus
            .trees
            .iter()
            .flat_map(|t| &t.messages)
            .map(|m| m.tokens.iter().map(|tok| tok.word_id).collect())
            .collect(),
        DocUnit::Tree => corpus
            .trees
            .iter()
            .map(|t| {
                t.messages
                    .iter()
                    .flat_map(|m| &m.tokens)
                    .map(|tok| tok.word_id)
                    .collect()
            })
            .collect(),
    }
}

/// UMass coherence of an ordered top-word list over a reference collection:
/// sum over ordered pairs (m, l), l < m, of
/// log((D(v_m, v_l) + 1) / D(v_l)), where D counts documents containing the
/// word(s). Pairs whose conditioning word never occurs contribute 0 and are
/// reported via the returned warning count.
pub fn umass_coherence(
    words: &[usize],
    docs: &[BTreeSet<usize>],
) -> Result<(f64, usize), EvalError> {
    if docs.is_empty() {
        return Err(EvalError::EmptyDocs);
    }
    let doc_count = |w: usize| docs.iter().filter(|d| d.contains(&w)).count();
    let co_count =
        |a: usize, b: usize| docs.iter().filter(|d| d.contains(&a) && d.contains(&b)).count();

    let mut score = 0.0;
    let mut zero_support = 0;
    for m in 1..words.len() {
        for l in 0..m {
            let dl = doc_count(words[l]);
            if dl == 0 {
                zero_support += 1;
                log::warn!("umass: word id {} occurs in no reference document", words[l]);
                continue;
            }
            let co = co_count(words[m], words[l]);
            score += ((co as f64 + 1.0) / dl as f64).ln();
        }
    }
    Ok((score, zero_support))
}

/// Per-topic UMass scores plus their arithmetic mean.
#[derive(Debug, Clone)]
pub struct CoherenceResult {
    pub per_topic: Vec<f64>,
    pub average: f64,
    pub top_n: usize,
    pub doc_unit: DocUnit,
}

pub fn model_coherence(
    model: &Model,
    docs: &[BTreeSet<usize>],
    top_n: usize,
    doc_unit: DocUnit,
) -> Result<CoherenceResult, EvalError> {
    let mut per_topic = Vec::with_capacity(model.phi_t.rows());
    for k in 0..model.phi_t.rows() {
        let report = top_words(model, k, top_n)?;
        let ids: Vec<usize> = report.words.iter().map(|&(w, _)| w).collect();
        let (score, _) = umass_coherence(&ids, docs)?;
        per_topic.push(score);
    }
    let average = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(CoherenceResult {
        per_topic,
        average,
        top_n,
        doc_unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs_from(words: &[&[usize]]) -> Vec<BTreeSet<usize>> {
        words.iter().map(|d| d.iter().copied().collect()).collect()
    }

    #[test]
    fn single_word_list_scores_zero() {
        let docs = docs_from(&[&[0, 1], &[1]]);
        let (s, _) = umass_coherence(&[0], &docs).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn hand_counted_pair() {
        // a (=0) in 2 docs, a&b co-occur in 1 -> log((1+1)/2) = 0
        let docs = docs_from(&[&[0, 1], &[0], &[2]]);
        let (s, _) = umass_coherence(&[0, 1], &docs).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn zero_cooccurrence_pair() {
        // a (=0) in 4 docs, never with b -> log(1/4)
        let docs = docs_from(&[&[0], &[0], &[0], &[0], &[1]]);
        let (s, _) = umass_coherence(&[0, 1], &docs).unwrap();
        assert!((s - (0.25f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_docs_error() {
        assert!(umass_coherence(&[0, 1], &[]).is_err());
    }

    #[test]
    fn unsupported_word_contributes_zero() {
        let docs = docs_from(&[&[0]]);
        let (s, warned) = umass_coherence(&[9, 0], &docs).unwrap();
        // pair (m=0 as l) has D(9)=0... order: l=9 (index 0), m=0 (index 1)
        assert_eq!(warned, 1);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn irrelevant_document_leaves_score_unchanged() {
        let docs1 = docs_from(&[&[0, 1], &[0]]);
        let docs2 = docs_from(&[&[0, 1], &[0], &[5, 6]]);
        let a = umass_coherence(&[0, 1], &docs1).unwrap().0;
        let b = umass_coherence(&[0, 1], &docs2).unwrap().0;
        assert_eq!(a, b);
    }
}
