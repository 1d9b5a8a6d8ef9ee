//! KL-greedy extractive summarization of a single conversation tree from a
//! trained model: the tree's content distribution is the mixture of
//! topic-word rows weighted by its topic mixture, and messages are greedily
//! added while they minimize the KL divergence from that distribution to the
//! smoothed empirical unigram of the selected set.

use crate::corpus::Corpus;
use crate::model::Model;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("unknown tree index {0}")]
    UnknownTree(usize),
    #[error("summary length must be >= 1")]
    ZeroLength,
    #[error("KL undefined: q is zero where p has mass (missing smoothing)")]
    ZeroSupport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryResult {
    pub tree_id: String,
    /// Selected message indices in pick order.
    pub selected: Vec<usize>,
    pub gamma: Vec<f64>,
    /// KL value after each addition.
    pub kl_trace: Vec<f64>,
    pub include_root: bool,
    /// Total character count of the selected surfaces, for reporting.
    pub char_len: usize,
}

/// Content word distribution of tree `c`: sum over topics of the tree's
/// topic mixture times the topic-word rows.
pub fn content_distribution(model: &Model, corpus: &Corpus, c: usize) -> Result<Vec<f64>, SummarizeError> {
    if c >= corpus.num_trees() {
        return Err(SummarizeError::UnknownTree(c));
    }
    let theta = model.tree_topic_mixture(corpus, c);
    let v = model.vocab_size;
    let mut gamma = vec![0.0; v];
    for (k, &t) in theta.iter().enumerate() {
        let row = model.phi_t.row(k);
        for (g, &p) in gamma.iter_mut().zip(row) {
            *g += t * p;
        }
    }
    Ok(gamma)
}

/// KL(p || q) = sum_w p(w) log(p(w)/q(w)); terms with p(w) = 0 contribute 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, SummarizeError> {
    let mut kl = 0.0;
    for (&pw, &qw) in p.iter().zip(q) {
        if pw > 0.0 {
            if qw <= 0.0 {
                return Err(SummarizeError::ZeroSupport);
            }
            kl += pw * (pw / qw).ln();
        }
    }
    Ok(kl)
}

/// Smoothed empirical unigram of a message set:
/// U(v) = (count(v) + beta) / (tokens + V*beta). Strictly positive; the
/// empty set yields the uniform distribution.
pub fn empirical_unigram(counts: &[u64], total: u64, beta: f64) -> Vec<f64> {
    let v = counts.len() as f64;
    let denom = total as f64 + v * beta;
    counts.iter().map(|&c| (c as f64 + beta) / denom).collect()
}

/// Token counts of one message over the vocabulary, as (counts, total).
fn message_counts(corpus: &Corpus, c: usize, m: usize, v: usize) -> (Vec<u64>, u64) {
    let mut counts = vec![0u64; v];
    let msg = &corpus.trees[c].messages[m];
    for tok in &msg.tokens {
        counts[tok.word_id] += 1;
    }
    (counts, msg.tokens.len() as u64)
}

/// Greedy KL extraction: starting from the empty set, repeatedly add the
/// not-yet-selected message minimizing KL(gamma_c || U(E + {m})), ties broken
/// by lowest message index, stopping at `length` messages or exhaustion. The
/// root is excluded from selection unless `include_root` is set.
pub fn greedy_extract(
    model: &Model,
    corpus: &Corpus,
    c: usize,
    length: usize,
    include_root: bool,
) -> Result<SummaryResult, SummarizeError> {
    if length == 0 {
        return Err(SummarizeError::ZeroLength);
    }
    let gamma = content_distribution(model, corpus, c)?;
    let tree = &corpus.trees[c];
    let v = model.vocab_size;
    let beta = model.hyper.beta;

    let candidates: Vec<usize> = (0..tree.messages.len())
        .filter(|&m| include_root || m != 0)
        .collect();

    let mut selected = Vec::new();
    let mut kl_trace = Vec::new();
    let mut acc_counts = vec![0u64; v];
    let mut acc_total = 0u64;

    while selected.len() < length {
        let mut best: Option<(usize, f64)> = None;
        for &m in &candidates {
            if selected.contains(&m) {
                continue;
            }
            let (mc, mt) = message_counts(corpus, c, m, v);
            let merged: Vec<u64> = acc_counts.iter().zip(&mc).map(|(&a, &b)| a + b).collect();
            let u = empirical_unigram(&merged, acc_total + mt, beta);
            let kl = kl_divergence(&gamma, &u)?;
            // strict less-than keeps the lowest index on ties
            if best.map_or(true, |(_, bk)| kl < bk) {
                best = Some((m, kl));
            }
        }
        let Some((m, kl)) = best else { break };
        let (mc, mt) = message_counts(corpus, c, m, v);
        for (a, b) in acc_counts.iter_mut().zip(&mc) {
            *a += b;
        }
        acc_total += mt;
        selected.push(m);
        kl_trace.push(kl);
    }

    let char_len = selected
        .iter()
        .flat_map(|&m| &tree.messages[m].tokens)
        .map(|t| t.surface.chars().count())
        .sum();
    Ok(SummaryResult {
        tree_id: tree.tree_id.clone(),
        selected,
        gamma,
        kl_trace,
        include_root,
        char_len,
    })
}

/// ROUGE-N over token lists: clipped n-gram overlap, with precision and
/// recall averaged over references and F1 the harmonic mean of the averages.
/// Internal test metric only; no claim of parity with external ROUGE tools.
pub fn rouge_n(candidate: &[String], references: &[Vec<String>], n: usize) -> (f64, f64, f64) {
    assert!(n >= 1);
    let cand_grams = ngram_counts(candidate, n);
    let cand_total: u64 = cand_grams.iter().map(|&(_, c)| c).sum();
    if cand_total == 0 || references.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    let mut scored = 0usize;
    for r in references {
        let ref_grams = ngram_counts(r, n);
        let ref_total: u64 = ref_grams.iter().map(|&(_, c)| c).sum();
        let mut overlap = 0u64;
        for (g, c) in &cand_grams {
            if let Some(&(_, rc)) = ref_grams.iter().find(|(rg, _)| rg == g) {
                overlap += (*c).min(rc);
            }
        }
        prec_sum += overlap as f64 / cand_total as f64;
        rec_sum += if ref_total > 0 {
            overlap as f64 / ref_total as f64
        } else {
            0.0
        };
        scored += 1;
    }
    let p = prec_sum / scored as f64;
    let r = rec_sum / scored as f64;
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

fn ngram_counts(tokens: &[String], n: usize) -> Vec<(Vec<&str>, u64)> {
    let mut out: Vec<(Vec<&str>, u64)> = Vec::new();
    if tokens.len() < n {
        return out;
    }
    for window in tokens.windows(n) {
        let gram: Vec<&str> = window.iter().map(|s| s.as_str()).collect();
        if let Some(e) = out.iter_mut().find(|(g, _)| *g == gram) {
            e.1 += 1;
        } else {
            out.push((gram, 1));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn kl_identities() {
        let p = vec![0.3, 0.7];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let kl = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((kl - 2.0f64.ln()).abs() < 1e-12);
        // hand computation: 0.75*ln(1.5) + 0.25*ln(0.5)
        let kl = kl_divergence(&[0.75, 0.25], &[0.5, 0.5]).unwrap();
        let expect = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((kl - expect).abs() < 1e-12);
        assert!((kl - 0.13081).abs() < 1e-4);
    }

    #[test]
    fn kl_zero_support_is_error() {
        assert!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn unigram_empty_set_is_uniform() {
        let u = empirical_unigram(&[0, 0, 0, 0], 0, 0.01);
        for &x in &u {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn unigram_hand_value() {
        // one message ["a","a","b"], V=2, beta=0.01
        let u = empirical_unigram(&[2, 1], 3, 0.01);
        assert!((u[0] - 2.01 / 3.02).abs() < 1e-12);
        assert!((u[1] - 1.01 / 3.02).abs() < 1e-12);
    }

    #[test]
    fn unigram_large_beta_approaches_uniform() {
        let u = empirical_unigram(&[10, 0], 10, 1e9);
        assert!((u[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rouge_identities() {
        let cand = toks(&["a", "b"]);
        assert_eq!(rouge_n(&cand, &[cand.clone()], 1), (1.0, 1.0, 1.0));
        let (p, r, f1) = rouge_n(&cand, &[toks(&["a", "c"])], 1);
        assert_eq!((p, r, f1), (0.5, 0.5, 0.5));
        assert_eq!(rouge_n(&cand, &[toks(&["a", "c"])], 5), (0.0, 0.0, 0.0));
        assert_eq!(rouge_n(&[], &[toks(&["a"])], 1), (0.0, 0.0, 0.0));
    }
}
