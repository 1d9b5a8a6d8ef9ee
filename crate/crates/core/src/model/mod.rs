//! Hyperparameters, latent-assignment state, count tables, and posterior-mean
//! parameter estimates.

mod archive;
mod counts;
mod state;

pub use archive::{read_model, write_model, ArchiveError};
pub use counts::CountTables;
pub use state::{init_state, Assignments, SamplerState, LDA_SKIP};

use crate::corpus::Corpus;
use crate::mat::MatF;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Model variant selector. All variants share the sweep skeleton; they differ
/// in which latent variables exist and where the word-type switcher lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Discourse transitions over the tree, tree-level topic mixture, and a
    /// per-discourse-role ternary word-type switcher.
    Full,
    /// Like `Full` but the ternary word-type switcher is drawn from a
    /// conversation-level distribution instead of a per-role one.
    TopicDisc,
    /// No discourse at all: tree-level topic mixture plus a per-tree binary
    /// TOPIC/BACK switcher under a symmetric Beta(0.5) prior.
    TopicOnly,
    /// Plain LDA with each message as its own document and per-token topics;
    /// stopwords and punctuation are excluded from sampling entirely.
    Lda,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::TopicDisc => "topic-disc",
            Variant::TopicOnly => "topic-only",
            Variant::Lda => "lda",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "full" => Some(Variant::Full),
            "topic-disc" => Some(Variant::TopicDisc),
            "topic-only" => Some(Variant::TopicOnly),
            "lda" => Some(Variant::Lda),
            _ => None,
        }
    }

    /// Does this variant carry message-level discourse roles?
    pub fn has_discourse(self) -> bool {
        matches!(self, Variant::Full | Variant::TopicDisc)
    }

    /// Does this variant carry a per-token word-type switcher?
    pub fn has_word_types(self) -> bool {
        !matches!(self, Variant::Lda)
    }
}

/// Per-token word type: the ternary switcher routing each token to the
/// discourse, topic, or background word distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WordType {
    Disc,
    Topic,
    Back,
}

impl WordType {
    pub const COUNT: usize = 3;

    #[inline]
    pub fn index(self) -> usize {
        match self {
            WordType::Disc => 0,
            WordType::Topic => 1,
            WordType::Back => 2,
        }
    }

    pub fn from_index(i: usize) -> WordType {
        match i {
            0 => WordType::Disc,
            1 => WordType::Topic,
            2 => WordType::Back,
            _ => panic!("word type index out of range: {}", i),
        }
    }

    pub fn code(self) -> char {
        match self {
            WordType::Disc => 'D',
            WordType::Topic => 'T',
            WordType::Back => 'B',
        }
    }

    pub fn from_code(c: char) -> Option<WordType> {
        match c {
            'D' => Some(WordType::Disc),
            'T' => Some(WordType::Topic),
            'B' => Some(WordType::Back),
            _ => None,
        }
    }
}

/// Symmetric Beta concentration for the binary TOPIC/BACK switcher of the
/// topic-only variant.
pub const TOPIC_ONLY_BETA_PRIOR: f64 = 0.5;

#[derive(Debug, Error)]
pub enum HyperError {
    #[error("invalid hyperparameter: {0}")]
    Invalid(String),
}

/// Hyperparameter bundle. Defaults: alpha = 50/K, beta = 0.01, gamma = 0.5,
/// delta = 0.25, D = 10, 1000 sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub topics: usize,
    pub discourse: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub variant: Variant,
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
}

impl Hyperparams {
    pub fn new(topics: usize, variant: Variant) -> Self {
        Hyperparams {
            topics,
            discourse: 10,
            alpha: 50.0 / topics as f64,
            beta: 0.01,
            gamma: 0.5,
            delta: 0.25,
            variant,
            iters: 1000,
            burnin: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HyperError> {
        if self.topics < 1 {
            return Err(HyperError::Invalid("topics must be >= 1".into()));
        }
        if self.discourse < 1 {
            return Err(HyperError::Invalid("discourse must be >= 1".into()));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !(v > 0.0) {
                return Err(HyperError::Invalid(format!("{} must be > 0", name)));
            }
        }
        if self.iters < 1 {
            return Err(HyperError::Invalid("iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Posterior-mean estimates frozen from the final Gibbs sample.
///
/// Table shapes depend on the variant; tables that do not exist for a
/// variant are empty (0 rows). `theta` has one row per tree, except for the
/// LDA variant where each message is its own document. `tau` rows are
/// discourse roles for the full variant and trees for the topic-disc
/// (3 columns) and topic-only (2 columns: TOPIC, BACK) variants.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hyper: Hyperparams,
    pub num_trees: usize,
    pub vocab_size: usize,
    pub phi_t: MatF,
    pub phi_d: MatF,
    pub phi_b: Vec<f64>,
    pub theta: MatF,
    pub pi: MatF,
    pub tau: MatF,
    pub tree_ids: Vec<String>,
    pub vocab_words: Vec<String>,
    pub vocab_hash: String,
    pub assignments: Assignments,
}

impl Model {
    /// Topic mixture of tree `c`. For LDA this is the average of the tree's
    /// per-message document mixtures; for all other variants it is the
    /// tree-level row of theta.
    pub fn tree_topic_mixture(&self, corpus: &Corpus, c: usize) -> Vec<f64> {
        if self.hyper.variant != Variant::Lda {
            return self.theta.row(c).to_vec();
        }
        let k = self.hyper.topics;
        let mc = corpus.trees[c].messages.len();
        let mut mix = vec![0.0; k];
        for m in 0..mc {
            let row = self.theta.row(corpus.doc_index(c, m));
            for (acc, &p) in mix.iter_mut().zip(row) {
                *acc += p;
            }
        }
        for p in &mut mix {
            *p /= mc as f64;
        }
        mix
    }
}

fn dirichlet_mean_rows(counts: &crate::mat::MatU, sums: &[u32], prior: f64) -> MatF {
    let mut out = MatF::zeros(counts.rows(), counts.cols());
    let dim = counts.cols() as f64;
    for r in 0..counts.rows() {
        let denom = sums[r] as f64 + dim * prior;
        for c in 0..counts.cols() {
            *out.at_mut(r, c) = (counts.at(r, c) as f64 + prior) / denom;
        }
    }
    out
}

/// Estimate posterior means from the final sample of a trained state.
pub fn estimate(state: &SamplerState) -> Model {
    let hyper = state.hyper.clone();
    let corpus = &state.corpus;
    let v = corpus.vocab.size();
    let counts = &state.counts;

    let phi_t = dirichlet_mean_rows(&counts.tw, &counts.tw_sum, hyper.beta);
    let theta = dirichlet_mean_rows(&counts.ct, &counts.ct_sum, hyper.alpha);

    let (phi_d, pi) = if hyper.variant.has_discourse() {
        (
            dirichlet_mean_rows(&counts.dw, &counts.dw_sum, hyper.beta),
            dirichlet_mean_rows(&counts.dd, &counts.dd_sum, hyper.gamma),
        )
    } else {
        (MatF::empty(), MatF::empty())
    };

    let phi_b = if hyper.variant.has_word_types() {
        let denom = counts.bw_sum as f64 + v as f64 * hyper.beta;
        counts
            .bw
            .iter()
            .map(|&c| (c as f64 + hyper.beta) / denom)
            .collect()
    } else {
        Vec::new()
    };

    let tau = match hyper.variant {
        Variant::Full | Variant::TopicDisc => {
            dirichlet_mean_rows(&counts.dx, &counts.dx_sum, hyper.delta)
        }
        Variant::TopicOnly => {
            // 2 active columns (TOPIC, BACK) under the symmetric Beta prior.
            let mut out = MatF::zeros(counts.dx.rows(), 2);
            for r in 0..counts.dx.rows() {
                let t = counts.dx.at(r, WordType::Topic.index()) as f64;
                let b = counts.dx.at(r, WordType::Back.index()) as f64;
                let denom = t + b + 2.0 * TOPIC_ONLY_BETA_PRIOR;
                *out.at_mut(r, 0) = (t + TOPIC_ONLY_BETA_PRIOR) / denom;
                *out.at_mut(r, 1) = (b + TOPIC_ONLY_BETA_PRIOR) / denom;
            }
            out
        }
        Variant::Lda => MatF::empty(),
    };

    Model {
        num_trees: corpus.num_trees(),
        vocab_size: v,
        phi_t,
        phi_d,
        phi_b,
        theta,
        pi,
        tau,
        tree_ids: corpus.trees.iter().map(|t| t.tree_id.clone()).collect(),
        vocab_words: corpus
            .vocab
            .entries()
            .iter()
            .map(|e| e.word.clone())
            .collect(),
        vocab_hash: corpus.vocab.hash(),
        assignments: state.assignments(),
        hyper,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyper_defaults_match_reported_settings() {
        let h = Hyperparams::new(50, Variant::Full);
        assert_eq!(h.alpha, 1.0); // 50/K with K=50
        assert_eq!(h.beta, 0.01);
        assert_eq!(h.gamma, 0.5);
        assert_eq!(h.delta, 0.25);
        assert_eq!(h.discourse, 10);
        assert_eq!(h.iters, 1000);
        h.validate().unwrap();
    }

    #[test]
    fn hyper_rejects_bad_values() {
        let mut h = Hyperparams::new(2, Variant::Full);
        h.alpha = 0.0;
        assert!(h.validate().is_err());
        let mut h = Hyperparams::new(2, Variant::Full);
        h.iters = 0;
        assert!(h.validate().is_err());
    }

    #[test]
    fn word_type_round_trip() {
        for i in 0..WordType::COUNT {
            let w = WordType::from_index(i);
            assert_eq!(w.index(), i);
            assert_eq!(WordType::from_code(w.code()), Some(w));
        }
    }
}
