//! The single mutable object of inference: latent assignments plus count
//! tables, with the incremental add/remove bookkeeping the sweeps rely on.

use super::counts::CountTables;
use super::{Hyperparams, Variant, WordType};
use crate::corpus::Corpus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Marker for tokens the LDA variant does not sample (stopwords/punctuation).
pub const LDA_SKIP: usize = usize::MAX;

/// A plain copy of all latent assignments, detached from the count tables.
/// Shapes: `d[c][m]`, `z[c][m]`, `x[c][m][n]`, `zt[c][m][n]`; vectors that a
/// variant does not use are empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignments {
    pub d: Vec<Vec<usize>>,
    pub z: Vec<Vec<usize>>,
    pub x: Vec<Vec<Vec<WordType>>>,
    pub zt: Vec<Vec<Vec<usize>>>,
}

pub struct SamplerState {
    pub corpus: Arc<Corpus>,
    pub hyper: Hyperparams,
    /// Per-message discourse role in 0..D (full / topic-disc only). The
    /// pseudo root of each tree is implicit and fixed at index D.
    pub d: Vec<Vec<usize>>,
    /// Per-message topic in 0..K (all variants except LDA).
    pub z: Vec<Vec<usize>>,
    /// Per-token word type (all variants except LDA).
    pub x: Vec<Vec<Vec<WordType>>>,
    /// Per-token topic in 0..K for LDA; `LDA_SKIP` for excluded tokens.
    pub zt: Vec<Vec<Vec<usize>>>,
    pub counts: CountTables,
    pub rng: ChaCha8Rng,
}

impl SamplerState {
    /// Discourse index of `m`'s parent; the pseudo root contributes row D.
    #[inline]
    pub fn parent_discourse(&self, c: usize, m: usize) -> usize {
        match self.corpus.trees[c].messages[m].parent {
            Some(p) => self.d[c][p],
            None => self.hyper.discourse,
        }
    }

    /// Row of the word-type table that applies to message `m` of tree `c`.
    #[inline]
    pub fn word_type_row(&self, c: usize, m: usize) -> usize {
        match self.hyper.variant {
            Variant::Full => self.d[c][m],
            Variant::TopicDisc | Variant::TopicOnly => c,
            Variant::Lda => unreachable!("LDA has no word-type table"),
        }
    }

    /// Remove every contribution of message `m` (its transition from the
    /// parent, its transitions to children, its topic count, and its tokens)
    /// from the count tables. Not applicable to LDA.
    pub fn remove_message(&mut self, c: usize, m: usize) {
        let d = if self.hyper.variant.has_discourse() {
            Some(self.d[c][m])
        } else {
            None
        };
        self.apply_message(c, m, d, self.z[c][m], -1);
    }

    /// Re-add message `m` with new assignments (the mirror of
    /// [`Self::remove_message`]).
    pub fn add_message(&mut self, c: usize, m: usize, d: Option<usize>, z: usize) {
        if let Some(d) = d {
            self.d[c][m] = d;
        }
        self.z[c][m] = z;
        self.apply_message(c, m, d, z, 1);
    }

    fn apply_message(&mut self, c: usize, m: usize, d: Option<usize>, z: usize, sign: i32) {
        if let Some(d) = d {
            let dpa = self.parent_discourse(c, m);
            self.counts.add_transition(dpa, d, sign);
            // children transitions depend on m's own discourse
            let children = self.corpus.trees[c].children[m].clone();
            for ch in children {
                self.counts.add_transition(d, self.d[c][ch], sign);
            }
        }
        self.counts.add_doc_topic(c, z, sign);
        let row = match self.hyper.variant {
            Variant::Full => d.expect("full variant requires discourse"),
            _ => c,
        };
        let ntok = self.corpus.trees[c].messages[m].tokens.len();
        for n in 0..ntok {
            let x = self.x[c][m][n];
            let w = self.corpus.trees[c].messages[m].tokens[n].word_id;
            self.counts.add_word_type(row, x.index(), sign);
            match x {
                WordType::Topic => self.counts.add_topic_word(z, w, sign),
                WordType::Disc => self
                    .counts
                    .add_disc_word(d.expect("DISC token without discourse"), w, sign),
                WordType::Back => self.counts.add_back_word(w, sign),
            }
        }
    }

    /// Remove token `n`'s contribution from the word-type table and from the
    /// type-specific word table it currently occupies.
    pub fn remove_token(&mut self, c: usize, m: usize, n: usize) {
        self.apply_token(c, m, n, self.x[c][m][n], -1);
    }

    pub fn add_token(&mut self, c: usize, m: usize, n: usize, x: WordType) {
        self.x[c][m][n] = x;
        self.apply_token(c, m, n, x, 1);
    }

    fn apply_token(&mut self, c: usize, m: usize, n: usize, x: WordType, sign: i32) {
        let row = self.word_type_row(c, m);
        let w = self.corpus.trees[c].messages[m].tokens[n].word_id;
        self.counts.add_word_type(row, x.index(), sign);
        match x {
            WordType::Topic => self.counts.add_topic_word(self.z[c][m], w, sign),
            WordType::Disc => self.counts.add_disc_word(self.d[c][m], w, sign),
            WordType::Back => self.counts.add_back_word(w, sign),
        }
    }

    /// LDA-only: remove token `n`'s topic assignment.
    pub fn remove_lda_token(&mut self, c: usize, m: usize, n: usize) {
        let k = self.zt[c][m][n];
        debug_assert_ne!(k, LDA_SKIP);
        let doc = self.corpus.doc_index(c, m);
        let w = self.corpus.trees[c].messages[m].tokens[n].word_id;
        self.counts.add_doc_topic(doc, k, -1);
        self.counts.add_topic_word(k, w, -1);
    }

    pub fn add_lda_token(&mut self, c: usize, m: usize, n: usize, k: usize) {
        self.zt[c][m][n] = k;
        let doc = self.corpus.doc_index(c, m);
        let w = self.corpus.trees[c].messages[m].tokens[n].word_id;
        self.counts.add_doc_topic(doc, k, 1);
        self.counts.add_topic_word(k, w, 1);
    }

    /// Recompute all count tables from scratch from the current assignments.
    /// Used as a consistency oracle against the incremental tables.
    pub fn rebuild_counts(&self) -> CountTables {
        rebuild(
            &self.corpus,
            &self.hyper,
            &self.d,
            &self.z,
            &self.x,
            &self.zt,
        )
    }

    pub fn assignments(&self) -> Assignments {
        Assignments {
            d: self.d.clone(),
            z: self.z.clone(),
            x: self.x.clone(),
            zt: self.zt.clone(),
        }
    }

    /// Hard check of the stopword/punctuation forcing: no ineligible token
    /// may carry x = TOPIC (or an LDA topic assignment).
    pub fn assert_forcing(&self) {
        for (c, tree) in self.corpus.trees.iter().enumerate() {
            for (m, msg) in tree.messages.iter().enumerate() {
                for (n, tok) in msg.tokens.iter().enumerate() {
                    if tok.topical_eligible() {
                        continue;
                    }
                    match self.hyper.variant {
                        Variant::Lda => assert_eq!(
                            self.zt[c][m][n], LDA_SKIP,
                            "ineligible token sampled by LDA at ({},{},{})",
                            c, m, n
                        ),
                        _ => assert_ne!(
                            self.x[c][m][n],
                            WordType::Topic,
                            "ineligible token assigned TOPIC at ({},{},{})",
                            c, m, n
                        ),
                    }
                }
            }
        }
    }
}

fn rebuild(
    corpus: &Corpus,
    hyper: &Hyperparams,
    d: &[Vec<usize>],
    z: &[Vec<usize>],
    x: &[Vec<Vec<WordType>>],
    zt: &[Vec<Vec<usize>>],
) -> CountTables {
    let mut counts = CountTables::new(corpus, hyper.topics, hyper.discourse, hyper.variant);
    for (c, tree) in corpus.trees.iter().enumerate() {
        for (m, msg) in tree.messages.iter().enumerate() {
            if hyper.variant == Variant::Lda {
                let doc = corpus.doc_index(c, m);
                for (n, tok) in msg.tokens.iter().enumerate() {
                    let k = zt[c][m][n];
                    if k != LDA_SKIP {
                        counts.add_doc_topic(doc, k, 1);
                        counts.add_topic_word(k, tok.word_id, 1);
                    }
                }
                continue;
            }
            if hyper.variant.has_discourse() {
                let dpa = match msg.parent {
                    Some(p) => d[c][p],
                    None => hyper.discourse,
                };
                counts.add_transition(dpa, d[c][m], 1);
            }
            counts.add_doc_topic(c, z[c][m], 1);
            let row = match hyper.variant {
                Variant::Full => d[c][m],
                _ => c,
            };
            for (n, tok) in msg.tokens.iter().enumerate() {
                let xt = x[c][m][n];
                counts.add_word_type(row, xt.index(), 1);
                match xt {
                    WordType::Topic => counts.add_topic_word(z[c][m], tok.word_id, 1),
                    WordType::Disc => counts.add_disc_word(d[c][m], tok.word_id, 1),
                    WordType::Back => counts.add_back_word(tok.word_id, 1),
                }
            }
        }
    }
    counts
}

/// Initialize a state with uniform-random assignments. A deterministic
/// function of `seed`; TOPIC is excluded wherever a token is ineligible.
pub fn init_state(corpus: Arc<Corpus>, hyper: Hyperparams, seed: u64) -> SamplerState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kk = hyper.topics;
    let dd = hyper.discourse;
    let variant = hyper.variant;

    let mut d = Vec::new();
    let mut z = Vec::new();
    let mut x = Vec::new();
    let mut zt = Vec::new();
    for tree in &corpus.trees {
        let mc = tree.messages.len();
        if variant.has_discourse() {
            d.push((0..mc).map(|_| rng.gen_range(0..dd)).collect());
        }
        if variant != Variant::Lda {
            z.push((0..mc).map(|_| rng.gen_range(0..kk)).collect());
            let xs = tree
                .messages
                .iter()
                .map(|msg| {
                    msg.tokens
                        .iter()
                        .map(|tok| random_word_type(&mut rng, variant, tok.topical_eligible()))
                        .collect()
                })
                .collect();
            x.push(xs);
        } else {
            let zs = tree
                .messages
                .iter()
                .map(|msg| {
                    msg.tokens
                        .iter()
                        .map(|tok| {
                            if tok.topical_eligible() {
                                rng.gen_range(0..kk)
                            } else {
                                LDA_SKIP
                            }
                        })
                        .collect()
                })
                .collect();
            zt.push(zs);
        }
    }

    let counts = rebuild(&corpus, &hyper, &d, &z, &x, &zt);
    let state = SamplerState {
        corpus,
        hyper,
        d,
        z,
        x,
        zt,
        counts,
        rng,
    };
    debug_assert!(state.counts == state.rebuild_counts());
    state
}

fn random_word_type(rng: &mut ChaCha8Rng, variant: Variant, eligible: bool) -> WordType {
    let choices: &[WordType] = match (variant, eligible) {
        (Variant::TopicOnly, true) => &[WordType::Topic, WordType::Back],
        (Variant::TopicOnly, false) => &[WordType::Back],
        (_, true) => &[WordType::Disc, WordType::Topic, WordType::Back],
        (_, false) => &[WordType::Disc, WordType::Back],
    };
    choices[rng.gen_range(0..choices.len())]
}
