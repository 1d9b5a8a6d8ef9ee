//! Collapsed Gibbs sweeps: the message-level (d, z) conditional, the
//! word-level type conditional, and the training loop, for the full model
//! and its variants.
//!
//! All Gamma-function ratios in the conditionals have integer offsets, so
//! they are evaluated as ascending-factorial products in log space rather
//! than through a general log-Gamma routine.

use crate::corpus::Corpus;
use crate::mat::MatF;
use crate::model::{
    estimate, init_state, Hyperparams, Model, SamplerState, Variant, WordType, LDA_SKIP,
    TOPIC_ONLY_BETA_PRIOR,
};
use rand::Rng;
use std::sync::Arc;
use std::time::Instant;

/// Per-sweep bookkeeping for progress reporting.
#[derive(Debug, Clone)]
pub struct SweepStats {
    pub sweep: usize,
    pub seconds: f64,
    pub tokens_per_sec: f64,
}

/// log( Gamma(base + n) / Gamma(base) ) for a non-negative integer offset,
/// as a product of ascending factors.
#[inline]
fn log_ascending(base: f64, n: u32) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        acc += (base + i as f64).ln();
    }
    acc
}

/// Per-message token statistics with the message's contributions removed:
/// word-type histogram plus per-word counts of TOPIC- and DISC-typed tokens.
struct MessageTokens {
    n_dx: [u32; 3],
    n_total: u32,
    topic_words: Vec<(usize, u32)>,
    topic_total: u32,
    disc_words: Vec<(usize, u32)>,
    disc_total: u32,
}

fn collect_message_tokens(state: &SamplerState, c: usize, m: usize) -> MessageTokens {
    let mut mt = MessageTokens {
        n_dx: [0; 3],
        n_total: 0,
        topic_words: Vec::new(),
        topic_total: 0,
        disc_words: Vec::new(),
        disc_total: 0,
    };
    let msg = &state.corpus.trees[c].messages[m];
    for (n, tok) in msg.tokens.iter().enumerate() {
        let x = state.x[c][m][n];
        mt.n_dx[x.index()] += 1;
        mt.n_total += 1;
        match x {
            WordType::Topic => {
                push_count(&mut mt.topic_words, tok.word_id);
                mt.topic_total += 1;
            }
            WordType::Disc => {
                push_count(&mut mt.disc_words, tok.word_id);
                mt.disc_total += 1;
            }
            WordType::Back => {}
        }
    }
    mt
}

fn push_count(counts: &mut Vec<(usize, u32)>, w: usize) {
    // messages are short; linear scan beats hashing here
    for e in counts.iter_mut() {
        if e.0 == w {
            e.1 += 1;
            return;
        }
    }
    counts.push((w, 1));
}

impl SamplerState {
    /// Log-weights over discourse candidates d (the d-dependent factors of
    /// the message conditional). Requires m's contributions to be removed.
    fn message_log_f(&self, c: usize, m: usize, mt: &MessageTokens) -> Vec<f64> {
        let h = &self.hyper;
        let dd = h.discourse;
        let v = self.corpus.vocab.size() as f64;
        let dpa = self.parent_discourse(c, m);
        // children discourse histogram (N^DD)
        let mut n_child = vec![0u32; dd];
        let mut n_child_total = 0u32;
        for &ch in &self.corpus.trees[c].children[m] {
            n_child[self.d[c][ch]] += 1;
            n_child_total += 1;
        }

        let mut logf = vec![0.0; dd];
        for (cand, lf) in logf.iter_mut().enumerate() {
            let mut acc = 0.0;
            // (i) parent -> m transition, corrected by the indicator pair:
            // contributes only when the parent's role differs from the
            // candidate (the self-transition case folds into the child block).
            if dpa != cand {
                acc += (self.counts.dd.at(dpa, cand) as f64 + h.gamma).ln();
                acc -= (self.counts.dd_sum[dpa] as f64 + dd as f64 * h.gamma).ln();
            }
            // (ii) m -> children transition block with the self-transition
            // adjustment when the parent also holds the candidate role.
            let i_self = u32::from(dpa == cand);
            if n_child_total + i_self > 0 {
                acc -= log_ascending(
                    self.counts.dd_sum[cand] as f64 + dd as f64 * h.gamma,
                    n_child_total + i_self,
                );
                for (d2, &nc) in n_child.iter().enumerate() {
                    let extra = nc + u32::from(dpa == cand && d2 == cand);
                    if extra > 0 {
                        acc += log_ascending(self.counts.dd.at(cand, d2) as f64 + h.gamma, extra);
                    }
                }
            }
            // (v) word-type block over m's tokens given d (full variant only;
            // the tree-level switcher of topic-disc is constant in d).
            if h.variant == Variant::Full && mt.n_total > 0 {
                acc -= log_ascending(
                    self.counts.dx_sum[cand] as f64 + 3.0 * h.delta,
                    mt.n_total,
                );
                for (xi, &nx) in mt.n_dx.iter().enumerate() {
                    if nx > 0 {
                        acc += log_ascending(self.counts.dx.at(cand, xi) as f64 + h.delta, nx);
                    }
                }
            }
            // (vi) discourse-word predictive block over m's DISC-typed tokens
            if mt.disc_total > 0 {
                acc -= log_ascending(
                    self.counts.dw_sum[cand] as f64 + v * h.beta,
                    mt.disc_total,
                );
                for &(w, nw) in &mt.disc_words {
                    acc += log_ascending(self.counts.dw.at(cand, w) as f64 + h.beta, nw);
                }
            }
            *lf = acc;
        }
        logf
    }

    /// Log-weights over topic candidates k (the k-dependent factors of the
    /// message conditional). Requires m's contributions to be removed.
    fn message_log_g(&self, c: usize, mt: &MessageTokens) -> Vec<f64> {
        let h = &self.hyper;
        let v = self.corpus.vocab.size() as f64;
        let kk = h.topics;
        let mut logg = vec![0.0; kk];
        for (cand, lg) in logg.iter_mut().enumerate() {
            // (iii) tree-topic factor
            let mut acc = (self.counts.ct.at(c, cand) as f64 + h.alpha).ln()
                - (self.counts.ct_sum[c] as f64 + kk as f64 * h.alpha).ln();
            // (iv) topic-word predictive block over m's TOPIC-typed tokens
            if mt.topic_total > 0 {
                acc -= log_ascending(
                    self.counts.tw_sum[cand] as f64 + v * h.beta,
                    mt.topic_total,
                );
                for &(w, nw) in &mt.topic_words {
                    acc += log_ascending(self.counts.tw.at(cand, w) as f64 + h.beta, nw);
                }
            }
            *lg = acc;
        }
        logg
    }

    /// Unnormalized log-weight table over (d, k) for message `m` of tree `c`.
    ///
    /// Contract: the message's own contributions must already be removed from
    /// the count tables. For the topic-only variant the table is 1 x K (there
    /// is no discourse dimension). Not defined for LDA, which has no
    /// message-level block; see [`Self::lda_topic_conditional`].
    pub fn message_conditional(&self, c: usize, m: usize) -> MatF {
        let mt = collect_message_tokens(self, c, m);
        let (logf, logg) = match self.hyper.variant {
            Variant::Full | Variant::TopicDisc => {
                (self.message_log_f(c, m, &mt), self.message_log_g(c, &mt))
            }
            Variant::TopicOnly => (vec![0.0], self.message_log_g(c, &mt)),
            Variant::Lda => panic!("message_conditional is not defined for the LDA variant"),
        };
        let mut table = MatF::zeros(logf.len(), logg.len());
        for (di, &lf) in logf.iter().enumerate() {
            for (ki, &lg) in logg.iter().enumerate() {
                *table.at_mut(di, ki) = lf + lg;
            }
        }
        table
    }

    /// Unnormalized log-weights over the word types allowed for token `n`.
    /// TOPIC is absent when the token is ineligible (stopword/punctuation).
    ///
    /// Contract: the token's own contribution must already be removed.
    pub fn word_type_conditional(&self, c: usize, m: usize, n: usize) -> Vec<(WordType, f64)> {
        let h = &self.hyper;
        let v = self.corpus.vocab.size() as f64;
        let tok = &self.corpus.trees[c].messages[m].tokens[n];
        let w = tok.word_id;
        let row = self.word_type_row(c, m);

        let allowed: &[WordType] = match (h.variant, tok.topical_eligible()) {
            (Variant::TopicOnly, true) => &[WordType::Topic, WordType::Back],
            (Variant::TopicOnly, false) => &[WordType::Back],
            (Variant::Lda, _) => panic!("word_type_conditional is not defined for LDA"),
            (_, true) => &[WordType::Disc, WordType::Topic, WordType::Back],
            (_, false) => &[WordType::Disc, WordType::Back],
        };
        let (prior, n_types) = match h.variant {
            Variant::TopicOnly => (TOPIC_ONLY_BETA_PRIOR, 2.0),
            _ => (h.delta, 3.0),
        };

        allowed
            .iter()
            .map(|&x| {
                let mut lw = (self.counts.dx.at(row, x.index()) as f64 + prior).ln()
                    - (self.counts.dx_sum[row] as f64 + n_types * prior).ln();
                lw += match x {
                    WordType::Disc => {
                        let d = self.d[c][m];
                        ((self.counts.dw.at(d, w) as f64 + h.beta)
                            / (self.counts.dw_sum[d] as f64 + v * h.beta))
                            .ln()
                    }
                    WordType::Topic => {
                        let z = self.z[c][m];
                        ((self.counts.tw.at(z, w) as f64 + h.beta)
                            / (self.counts.tw_sum[z] as f64 + v * h.beta))
                            .ln()
                    }
                    WordType::Back => ((self.counts.bw[w] as f64 + h.beta)
                        / (self.counts.bw_sum as f64 + v * h.beta))
                        .ln(),
                };
                (x, lw)
            })
            .collect()
    }

    /// LDA per-token topic conditional (token `n` removed): standard
    /// collapsed doc-topic times topic-word predictive ratio, in log space.
    pub fn lda_topic_conditional(&self, c: usize, m: usize, n: usize) -> Vec<f64> {
        let h = &self.hyper;
        let v = self.corpus.vocab.size() as f64;
        let doc = self.corpus.doc_index(c, m);
        let w = self.corpus.trees[c].messages[m].tokens[n].word_id;
        (0..h.topics)
            .map(|k| {
                ((self.counts.ct.at(doc, k) as f64 + h.alpha)
                    / (self.counts.ct_sum[doc] as f64 + h.topics as f64 * h.alpha))
                    .ln()
                    + ((self.counts.tw.at(k, w) as f64 + h.beta)
                        / (self.counts.tw_sum[k] as f64 + v * h.beta))
                        .ln()
            })
            .collect()
    }

    /// One full Gibbs sweep: trees in input order, messages in topological
    /// order, (d, z) before the message's tokens. Pseudo-root discourse is
    /// fixed and never sampled.
    pub fn gibbs_sweep(&mut self, sweep_index: usize) -> SweepStats {
        let started = Instant::now();
        let num_trees = self.corpus.num_trees();
        match self.hyper.variant {
            Variant::Lda => {
                for c in 0..num_trees {
                    for m in 0..self.corpus.trees[c].messages.len() {
                        for n in 0..self.corpus.trees[c].messages[m].tokens.len() {
                            if self.zt[c][m][n] == LDA_SKIP {
                                continue;
                            }
                            self.remove_lda_token(c, m, n);
                            let logw = self.lda_topic_conditional(c, m, n);
                            let k = sample_log_weights(&mut self.rng, &logw);
                            self.add_lda_token(c, m, n, k);
                        }
                    }
                }
            }
            variant => {
                let has_disc = variant.has_discourse();
                for c in 0..num_trees {
                    for m in 0..self.corpus.trees[c].messages.len() {
                        self.remove_message(c, m);
                        let mt = collect_message_tokens(self, c, m);
                        // f(d) and g(k) factorize, so d and z are drawn from
                        // the two marginals (D + K evaluations, not D*K).
                        let d_new = if has_disc {
                            let logf = self.message_log_f(c, m, &mt);
                            Some(sample_log_weights(&mut self.rng, &logf))
                        } else {
                            None
                        };
                        let logg = self.message_log_g(c, &mt);
                        let z_new = sample_log_weights(&mut self.rng, &logg);
                        self.add_message(c, m, d_new, z_new);

                        for n in 0..self.corpus.trees[c].messages[m].tokens.len() {
                            self.remove_token(c, m, n);
                            let weights = self.word_type_conditional(c, m, n);
                            let logw: Vec<f64> = weights.iter().map(|&(_, lw)| lw).collect();
                            let pick = sample_log_weights(&mut self.rng, &logw);
                            self.add_token(c, m, n, weights[pick].0);
                        }
                    }
                }
            }
        }
        let seconds = started.elapsed().as_secs_f64();
        let tokens = self.corpus.total_tokens() as f64;
        SweepStats {
            sweep: sweep_index,
            seconds,
            tokens_per_sec: if seconds > 0.0 { tokens / seconds } else { 0.0 },
        }
    }
}

/// Draw an index proportionally to exp(logw), stably via max-shift.
fn sample_log_weights<R: Rng>(rng: &mut R, logw: &[f64]) -> usize {
    debug_assert!(!logw.is_empty());
    if logw.len() == 1 {
        return 0;
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Run `hyper.iters` sweeps from a fresh state and freeze posterior-mean
/// estimates from the final sample. Progress goes to the log at
/// `log_every`-sweep intervals.
pub fn train_with_progress(
    corpus: Arc<Corpus>,
    hyper: Hyperparams,
    log_every: usize,
) -> (Model, SamplerState, Vec<SweepStats>) {
    hyper.validate().expect("invalid hyperparameters");
    let seed = hyper.seed;
    let iters = hyper.iters;
    let mut state = init_state(corpus, hyper, seed);
    let mut stats = Vec::with_capacity(iters);
    let started = Instant::now();
    for sweep in 0..iters {
        let s = state.gibbs_sweep(sweep);
        if log_every > 0 && (sweep + 1) % log_every == 0 {
            log::info!(
                "sweep {}/{} elapsed {:.1}s {:.0} tokens/sec",
                sweep + 1,
                iters,
                started.elapsed().as_secs_f64(),
                s.tokens_per_sec
            );
        }
        stats.push(s);
    }
    let model = estimate(&state);
    (model, state, stats)
}

pub fn train(corpus: Arc<Corpus>, hyper: Hyperparams) -> (Model, SamplerState, Vec<SweepStats>) {
    train_with_progress(corpus, hyper, 100)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ConversationTree, Corpus, Message, Token, Vocab, VocabEntry};
    use crate::model::{Assignments, LDA_SKIP};
    use crate::oracle::{collapsed_joint_log_prob, TinyInstance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Random corpus within the tiny-instance bounds; the last two of six
    /// vocabulary words are stopwords.
    pub(crate) fn tiny_corpus(seed: u64) -> Arc<Corpus> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = 6usize;
        let n_stop = 2usize;
        let mut total_tokens = 0usize;
        let num_trees = rng.gen_range(1..=2);
        let mut trees = Vec::new();
        for t in 0..num_trees {
            let mc = rng.gen_range(1..=4);
            let mut messages = Vec::new();
            for m in 0..mc {
                let parent = if m == 0 { None } else { Some(rng.gen_range(0..m)) };
                let budget = 12usize.saturating_sub(total_tokens);
                let ntok = rng.gen_range(0..=3usize.min(budget));
                total_tokens += ntok;
                let tokens = (0..ntok)
                    .map(|_| {
                        let w = rng.gen_range(0..v);
                        Token {
                            word_id: w,
                            surface: format!("w{}", w),
                            stop: w >= v - n_stop,
                            punct: false,
                        }
                    })
                    .collect();
                messages.push(Message { parent, tokens });
            }
            trees.push(ConversationTree::new(format!("t{}", t), messages));
        }
        let entries = (0..v)
            .map(|w| VocabEntry {
                word: format!("w{}", w),
                freq: 1,
                stop: w >= v - n_stop,
                punct: false,
            })
            .collect();
        Arc::new(Corpus::new(trees, Vocab::from_entries(entries)))
    }

    pub(crate) fn tiny_hyper(variant: Variant, k: usize, d: usize, seed: u64) -> Hyperparams {
        let mut h = Hyperparams::new(k, variant);
        h.discourse = d;
        h.alpha = 0.7;
        h.beta = 0.3;
        h.gamma = 0.4;
        h.delta = 0.6;
        h.iters = 1;
        h.seed = seed;
        h
    }

    fn joint(corpus: &Arc<Corpus>, hyper: &Hyperparams, assign: Assignments) -> f64 {
        let inst = TinyInstance::new(corpus.clone(), hyper.clone(), assign).unwrap();
        collapsed_joint_log_prob(&inst)
    }

    /// Every entry of the message conditional must match the ratio of
    /// collapsed joints across candidate (d, z) settings.
    pub(crate) fn check_message_conditional(state: &mut SamplerState, c: usize, m: usize) {
        let variant = state.hyper.variant;
        let d_orig = variant.has_discourse().then(|| state.d[c][m]);
        let z_orig = state.z[c][m];
        state.remove_message(c, m);
        let table = state.message_conditional(c, m);

        let mut joints = MatF::zeros(table.rows(), table.cols());
        for di in 0..table.rows() {
            for ki in 0..table.cols() {
                let mut a = state.assignments();
                if variant.has_discourse() {
                    a.d[c][m] = di;
                }
                a.z[c][m] = ki;
                *joints.at_mut(di, ki) = joint(&state.corpus, &state.hyper, a);
            }
        }
        let base_w = table.at(0, 0);
        let base_j = joints.at(0, 0);
        for di in 0..table.rows() {
            for ki in 0..table.cols() {
                let dw = table.at(di, ki) - base_w;
                let dj = joints.at(di, ki) - base_j;
                assert!(
                    (dw - dj).abs() <= 1e-9,
                    "message conditional mismatch at d={} k={}: {} vs {} (variant {:?})",
                    di,
                    ki,
                    dw,
                    dj,
                    variant
                );
            }
        }
        state.add_message(c, m, d_orig, z_orig);
    }

    /// Every entry of the word-type conditional must match the joint ratios.
    pub(crate) fn check_word_type_conditional(state: &mut SamplerState, c: usize, m: usize, n: usize) {
        let x_orig = state.x[c][m][n];
        state.remove_token(c, m, n);
        let weights = state.word_type_conditional(c, m, n);

        let joints: Vec<f64> = weights
            .iter()
            .map(|&(x, _)| {
                let mut a = state.assignments();
                a.x[c][m][n] = x;
                joint(&state.corpus, &state.hyper, a)
            })
            .collect();
        for i in 1..weights.len() {
            let dw = weights[i].1 - weights[0].1;
            let dj = joints[i] - joints[0];
            assert!(
                (dw - dj).abs() <= 1e-9,
                "word type conditional mismatch: {} vs {} (variant {:?})",
                dw,
                dj,
                state.hyper.variant
            );
        }
        state.add_token(c, m, n, x_orig);
    }

    pub(crate) fn check_lda_token_conditional(state: &mut SamplerState, c: usize, m: usize, n: usize) {
        let k_orig = state.zt[c][m][n];
        if k_orig == LDA_SKIP {
            return;
        }
        state.remove_lda_token(c, m, n);
        let logw = state.lda_topic_conditional(c, m, n);
        let joints: Vec<f64> = (0..logw.len())
            .map(|k| {
                let mut a = state.assignments();
                a.zt[c][m][n] = k;
                joint(&state.corpus, &state.hyper, a)
            })
            .collect();
        for i in 1..logw.len() {
            let dw = logw[i] - logw[0];
            let dj = joints[i] - joints[0];
            assert!((dw - dj).abs() <= 1e-9, "lda conditional mismatch: {} vs {}", dw, dj);
        }
        state.add_lda_token(c, m, n, k_orig);
    }

    #[test]
    fn conditionals_match_oracle_on_random_tiny_instances() {
        for seed in 0..12u64 {
            let corpus = tiny_corpus(seed);
            for variant in [
                Variant::Full,
                Variant::TopicDisc,
                Variant::TopicOnly,
                Variant::Lda,
            ] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
                let k = rng.gen_range(1..=3);
                let d = rng.gen_range(1..=3);
                let hyper = tiny_hyper(variant, k, d, seed);
                let mut state = init_state(corpus.clone(), hyper, seed.wrapping_mul(31) + 7);
                for c in 0..state.corpus.num_trees() {
                    for m in 0..state.corpus.trees[c].messages.len() {
                        if variant != Variant::Lda {
                            check_message_conditional(&mut state, c, m);
                        }
                        for n in 0..state.corpus.trees[c].messages[m].tokens.len() {
                            if variant == Variant::Lda {
                                check_lda_token_conditional(&mut state, c, m, n);
                            } else {
                                check_word_type_conditional(&mut state, c, m, n);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_k1_d1_single_entry() {
        let corpus = tiny_corpus(3);
        let hyper = tiny_hyper(Variant::Full, 1, 1, 0);
        let mut state = init_state(corpus, hyper, 1);
        assert!(state.d.iter().flatten().all(|&d| d == 0));
        assert!(state.z.iter().flatten().all(|&z| z == 0));
        state.remove_message(0, 0);
        let table = state.message_conditional(0, 0);
        assert_eq!((table.rows(), table.cols()), (1, 1));
        assert!(table.at(0, 0).is_finite());
        state.add_message(0, 0, Some(0), 0);
    }

    #[test]
    fn empty_message_weights_depend_only_on_transitions_and_theta() {
        // tree with a zero-token message: the token blocks are empty
        // products, so the k-profile must be exactly the tree-topic factor.
        let corpus = Arc::new(Corpus::new(
            vec![ConversationTree::new(
                "t".into(),
                vec![
                    Message { parent: None, tokens: vec![] },
                    Message { parent: Some(0), tokens: vec![] },
                ],
            )],
            Vocab::from_entries(vec![VocabEntry {
                word: "a".into(),
                freq: 1,
                stop: false,
                punct: false,
            }]),
        ));
        let hyper = tiny_hyper(Variant::Full, 2, 2, 0);
        let alpha = hyper.alpha;
        let mut state = init_state(corpus, hyper, 5);
        state.remove_message(0, 1);
        let table = state.message_conditional(0, 1);
        for di in 0..table.rows() {
            let ratio = table.at(di, 1) - table.at(di, 0);
            let ct0 = state.counts.ct.at(0, 0) as f64 + alpha;
            let ct1 = state.counts.ct.at(0, 1) as f64 + alpha;
            assert!((ratio - (ct1.ln() - ct0.ln())).abs() < 1e-12);
        }
        let (d, z) = (state.d[0][1], state.z[0][1]);
        state.add_message(0, 1, Some(d), z);
    }

    #[test]
    fn punctuation_token_has_two_entries() {
        // find an ineligible token in some tiny corpus and check TOPIC is absent
        for seed in 0..20 {
            let corpus = tiny_corpus(seed);
            let hyper = tiny_hyper(Variant::Full, 2, 2, 0);
            let mut state = init_state(corpus.clone(), hyper, seed);
            for c in 0..corpus.num_trees() {
                for m in 0..corpus.trees[c].messages.len() {
                    for n in 0..corpus.trees[c].messages[m].tokens.len() {
                        if !corpus.trees[c].messages[m].tokens[n].topical_eligible() {
                            state.remove_token(c, m, n);
                            let w = state.word_type_conditional(c, m, n);
                            assert_eq!(w.len(), 2);
                            assert!(w.iter().all(|&(x, _)| x != WordType::Topic));
                            return;
                        }
                    }
                }
            }
        }
        panic!("no ineligible token found in 20 seeds");
    }

    #[test]
    fn uniform_weights_under_symmetric_empty_counts() {
        // V=1, all counts zero: allowed types get identical weights
        let corpus = Arc::new(Corpus::new(
            vec![ConversationTree::new(
                "t".into(),
                vec![Message {
                    parent: None,
                    tokens: vec![Token {
                        word_id: 0,
                        surface: "a".into(),
                        stop: false,
                        punct: false,
                    }],
                }],
            )],
            Vocab::from_entries(vec![VocabEntry {
                word: "a".into(),
                freq: 1,
                stop: false,
                punct: false,
            }]),
        ));
        let hyper = tiny_hyper(Variant::Full, 1, 1, 0);
        let mut state = init_state(corpus, hyper, 2);
        state.remove_message(0, 0);
        // with the only message removed, every table is all-zero
        state.add_message(0, 0, Some(0), 0);
        state.remove_token(0, 0, 0);
        let w = state.word_type_conditional(0, 0, 0);
        assert_eq!(w.len(), 3);
        for i in 1..w.len() {
            assert!((w[i].1 - w[0].1).abs() < 1e-12);
        }
        state.add_token(0, 0, 0, WordType::Back);
    }

    #[test]
    fn sweep_preserves_rebuild_equality_and_forcing() {
        for variant in [
            Variant::Full,
            Variant::TopicDisc,
            Variant::TopicOnly,
            Variant::Lda,
        ] {
            let corpus = tiny_corpus(9);
            let hyper = tiny_hyper(variant, 3, 2, 0);
            let mut state = init_state(corpus, hyper, 13);
            for sweep in 0..100 {
                state.gibbs_sweep(sweep);
            }
            assert!(state.counts == state.rebuild_counts(), "variant {:?}", variant);
            assert!(state.counts.check_cached_sums());
            state.assert_forcing();
        }
    }

    #[test]
    fn corrupted_count_detected_by_rebuild() {
        let corpus = tiny_corpus(4);
        let hyper = tiny_hyper(Variant::Full, 2, 2, 0);
        let mut state = init_state(corpus, hyper, 3);
        state.counts.add_doc_topic(0, 0, 1);
        assert!(state.counts != state.rebuild_counts());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let corpus = tiny_corpus(6);
        let hyper = tiny_hyper(Variant::Full, 2, 2, 0);
        let mut s1 = init_state(corpus.clone(), hyper.clone(), 99);
        let mut s2 = init_state(corpus, hyper, 99);
        assert_eq!(s1.assignments(), s2.assignments());
        for sweep in 0..20 {
            s1.gibbs_sweep(sweep);
            s2.gibbs_sweep(sweep);
        }
        assert_eq!(s1.assignments(), s2.assignments());
        assert!(s1.counts == s2.counts);
    }

    #[test]
    fn remove_add_round_trip_is_noop() {
        let corpus = tiny_corpus(8);
        let hyper = tiny_hyper(Variant::Full, 3, 3, 0);
        let mut state = init_state(corpus, hyper, 17);
        let before = state.counts.clone();
        let (d, z) = (state.d[0][0], state.z[0][0]);
        state.remove_message(0, 0);
        state.add_message(0, 0, Some(d), z);
        assert!(state.counts == before);
    }

    #[test]
    fn pseudo_root_row_sum_equals_tree_count() {
        let corpus = tiny_corpus(10);
        let hyper = tiny_hyper(Variant::Full, 2, 3, 0);
        let num_trees = corpus.num_trees() as u32;
        let mut state = init_state(corpus, hyper, 23);
        for sweep in 0..10 {
            state.gibbs_sweep(sweep);
        }
        assert_eq!(state.counts.dd_sum[3], num_trees);
    }

    #[test]
    fn token_conservation_after_sweeps() {
        let corpus = tiny_corpus(11);
        let total = corpus.total_tokens() as u64;
        let hyper = tiny_hyper(Variant::Full, 2, 2, 0);
        let mut state = init_state(corpus, hyper, 29);
        for sweep in 0..10 {
            state.gibbs_sweep(sweep);
        }
        assert_eq!(state.counts.word_table_total(), total);
    }

    #[test]
    fn train_runs_requested_sweeps() {
        let corpus = tiny_corpus(12);
        let mut hyper = tiny_hyper(Variant::Full, 2, 2, 0);
        hyper.iters = 1;
        let (_model, _state, stats) = train(corpus, hyper);
        assert_eq!(stats.len(), 1);
    }
}
