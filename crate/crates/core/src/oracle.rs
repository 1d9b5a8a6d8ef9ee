//! Brute-force reference implementations used by the test suite: exact
//! evaluation of the collapsed joint probability on tiny instances, and an
//! exhaustive single-message optimizer for the greedy summarizer.
//!
//! Everything here is deliberately naive and independent of the incremental
//! count tables: counts are re-derived from the raw assignments on every
//! call, and Dirichlet-multinomial normalizers go through a general
//! log-Gamma routine rather than the sampler's ascending-product path.

use crate::corpus::Corpus;
use crate::model::{Assignments, Hyperparams, Model, Variant, WordType, LDA_SKIP,
    TOPIC_ONLY_BETA_PRIOR};
use statrs::function::gamma::ln_gamma;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance exceeds tiny bounds: {0}")]
    Bounds(String),
}

/// A corpus + assignment bundle small enough for exact evaluation:
/// at most 4 messages per tree, 12 tokens total, and K, D <= 3.
pub struct TinyInstance {
    pub corpus: Arc<Corpus>,
    pub hyper: Hyperparams,
    pub assign: Assignments,
}

impl TinyInstance {
    pub fn new(
        corpus: Arc<Corpus>,
        hyper: Hyperparams,
        assign: Assignments,
    ) -> Result<Self, OracleError> {
        if corpus.trees.iter().any(|t| t.messages.len() > 4) {
            return Err(OracleError::Bounds("more than 4 messages in a tree".into()));
        }
        if corpus.total_tokens() > 12 {
            return Err(OracleError::Bounds("more than 12 tokens total".into()));
        }
        if hyper.topics > 3 || hyper.discourse > 3 {
            return Err(OracleError::Bounds("K or D above 3".into()));
        }
        Ok(TinyInstance {
            corpus,
            hyper,
            assign,
        })
    }
}

/// log of the Dirichlet-multinomial normalizer ratio for one count group:
/// integrates out a Dir(prior) multinomial that generated `counts`.
fn log_dir_mult(counts: &[u64], prior: f64) -> f64 {
    let dim = counts.len() as f64;
    let total: u64 = counts.iter().sum();
    let mut acc = ln_gamma(dim * prior) - ln_gamma(dim * prior + total as f64);
    for &c in counts {
        acc += ln_gamma(c as f64 + prior) - ln_gamma(prior);
    }
    acc
}

/// Exact log P(w, d, z, x | hyperparameters) with every Dirichlet (and the
/// topic-only Beta) integrated out analytically, including the pseudo-root
/// transition row.
pub fn collapsed_joint_log_prob(inst: &TinyInstance) -> f64 {
    let corpus = &inst.corpus;
    let h = &inst.hyper;
    let a = &inst.assign;
    let kk = h.topics;
    let dd = h.discourse;
    let v = corpus.vocab.size();
    let c_trees = corpus.num_trees();
    let variant = h.variant;

    // naive counting, independent of model::CountTables
    let mut trans = vec![vec![0u64; dd]; dd + 1];
    let mut doc_topic: Vec<Vec<u64>> = match variant {
        Variant::Lda => vec![vec![0; kk]; corpus.total_messages()],
        _ => vec![vec![0; kk]; c_trees],
    };
    let mut topic_word = vec![vec![0u64; v]; kk];
    let mut disc_word = vec![vec![0u64; v]; dd];
    let mut back_word = vec![0u64; v];
    let word_type_rows = match variant {
        Variant::Full => dd,
        Variant::TopicDisc | Variant::TopicOnly => c_trees,
        Variant::Lda => 0,
    };
    let mut word_type = vec![[0u64; 3]; word_type_rows];

    for (c, tree) in corpus.trees.iter().enumerate() {
        for (m, msg) in tree.messages.iter().enumerate() {
            if variant == Variant::Lda {
                for (n, tok) in msg.tokens.iter().enumerate() {
                    let k = a.zt[c][m][n];
                    if k != LDA_SKIP {
                        doc_topic[corpus.doc_index(c, m)][k] += 1;
                        topic_word[k][tok.word_id] += 1;
                    }
                }
                continue;
            }
            if variant.has_discourse() {
                let dpa = match msg.parent {
                    Some(p) => a.d[c][p],
                    None => dd,
                };
                trans[dpa][a.d[c][m]] += 1;
            }
            doc_topic[c][a.z[c][m]] += 1;
            for (n, tok) in msg.tokens.iter().enumerate() {
                let x = a.x[c][m][n];
                if !word_type.is_empty() {
                    let row = match variant {
                        Variant::Full => a.d[c][m],
                        _ => c,
                    };
                    word_type[row][x.index()] += 1;
                }
                match x {
                    WordType::Topic => topic_word[a.z[c][m]][tok.word_id] += 1,
                    WordType::Disc => disc_word[a.d[c][m]][tok.word_id] += 1,
                    WordType::Back => back_word[tok.word_id] += 1,
                }
            }
        }
    }

    let mut logp = 0.0;
    if variant.has_discourse() {
        for row in &trans {
            logp += log_dir_mult(row, h.gamma);
        }
        for row in &disc_word {
            logp += log_dir_mult(row, h.beta);
        }
    }
    for row in &doc_topic {
        logp += log_dir_mult(row, h.alpha);
    }
    for row in &topic_word {
        logp += log_dir_mult(row, h.beta);
    }
    if variant.has_word_types() {
        logp += log_dir_mult(&back_word, h.beta);
    }
    match variant {
        Variant::Full | Variant::TopicDisc => {
            for row in &word_type {
                logp += log_dir_mult(&row[..], h.delta);
            }
        }
        Variant::TopicOnly => {
            for row in &word_type {
                // binary TOPIC/BACK switcher under a symmetric Beta prior
                let pair = [row[WordType::Topic.index()], row[WordType::Back.index()]];
                debug_assert_eq!(row[WordType::Disc.index()], 0);
                logp += log_dir_mult(&pair, TOPIC_ONLY_BETA_PRIOR);
            }
        }
        Variant::Lda => {}
    }
    logp
}

/// Exhaustive argmin over single candidate messages of
/// KL(gamma_c || U({m})), lowest index on ties; the oracle for the greedy
/// summarizer's first step. Uses its own KL and unigram code.
pub fn exhaustive_best_single(
    model: &Model,
    corpus: &Corpus,
    c: usize,
    include_root: bool,
) -> usize {
    let tree = &corpus.trees[c];
    assert!(tree.messages.len() <= 200, "oracle limited to 200 messages");
    let v = corpus.vocab.size();
    let beta = model.hyper.beta;

    // gamma_c recomputed naively
    let theta = model.tree_topic_mixture(corpus, c);
    let mut gamma = vec![0.0; v];
    for (k, &t) in theta.iter().enumerate() {
        for (w, g) in gamma.iter_mut().enumerate() {
            *g += t * model.phi_t.at(k, w);
        }
    }

    let mut best = usize::MAX;
    let mut best_kl = f64::INFINITY;
    for (m, msg) in tree.messages.iter().enumerate() {
        if m == 0 && !include_root {
            continue;
        }
        let mut counts = vec![0u64; v];
        for tok in &msg.tokens {
            counts[tok.word_id] += 1;
        }
        let total: u64 = counts.iter().sum();
        let denom = total as f64 + v as f64 * beta;
        let mut kl = 0.0;
        for (w, &g) in gamma.iter().enumerate() {
            if g > 0.0 {
                let u = (counts[w] as f64 + beta) / denom;
                kl += g * (g / u).ln();
            }
        }
        if kl < best_kl {
            best_kl = kl;
            best = m;
        }
    }
    best
}
