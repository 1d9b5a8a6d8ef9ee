//! Synthetic conversation corpora sampled from the generative process with
//! known ground truth, plus label-permutation-aware recovery scoring.

use crate::corpus::{ConversationTree, Corpus, Message, Token};
use crate::mat::MatF;
use crate::model::{SamplerState, Variant, WordType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label count {0} too large for exact permutation search (max 10)")]
    TooManyLabels(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub trees: usize,
    pub topics: usize,
    pub discourse: usize,
    pub vocab: usize,
    pub mean_messages: f64,
    /// Maximum children per message when attaching new messages.
    pub branching: usize,
    pub mean_tokens: f64,
    /// Generation-side Dirichlet concentrations.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Fraction of the vocabulary reserved as pseudo-stopwords (ineligible
    /// for TOPIC). Must be in [0, 1).
    pub ineligible_frac: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            trees: 100,
            topics: 5,
            discourse: 3,
            vocab: 200,
            mean_messages: 10.0,
            branching: 4,
            mean_tokens: 8.0,
            alpha: 0.5,
            beta: 0.01,
            gamma: 0.1,
            delta: 0.5,
            ineligible_frac: 0.2,
            seed: 0,
        }
    }
}

/// The true parameters and assignments behind a generated corpus. Shapes
/// match [`crate::model::Model`]; `pi` has D+1 rows (pseudo-root last).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub phi_t: MatF,
    pub phi_d: MatF,
    pub phi_b: Vec<f64>,
    pub pi: MatF,
    pub tau: MatF,
    pub theta: MatF,
    pub d: Vec<Vec<usize>>,
    pub z: Vec<Vec<usize>>,
    pub x: Vec<Vec<Vec<WordType>>>,
}

fn dirichlet<R: Rng>(rng: &mut R, conc: f64, dim: usize) -> Vec<f64> {
    let gamma = Gamma::new(conc, 1.0).expect("positive concentration");
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return draws.into_iter().map(|g| g / sum).collect();
        }
    }
}

/// Dirichlet over a support subset; zero elsewhere.
fn dirichlet_on<R: Rng>(rng: &mut R, conc: f64, dim: usize, support: &[usize]) -> Vec<f64> {
    let inner = dirichlet(rng, conc, support.len());
    let mut out = vec![0.0; dim];
    for (&w, p) in support.iter().zip(inner) {
        out[w] = p;
    }
    out
}

fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let mut u = rng.gen::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        u -= p;
        if u <= 0.0 {
            return i;
        }
    }
    probs.len() - 1
}

fn poisson_at_least<R: Rng>(rng: &mut R, mean: f64, floor: u64) -> u64 {
    if mean <= 0.0 {
        return floor;
    }
    let p = Poisson::new(mean).expect("positive mean");
    (p.sample(rng) as u64).max(floor)
}

/// Sample a corpus from the generative process: per-tree topic mixtures,
/// discourse transitions down the tree (roots from the pseudo-root row),
/// and per-token ternary word types. Topic rows place zero mass on the
/// ineligible (pseudo-stopword) slice of the vocabulary, mirroring the
/// inference-time forcing.
pub fn generate(config: &SynthConfig) -> (Corpus, GroundTruth) {
    assert!(config.ineligible_frac >= 0.0 && config.ineligible_frac < 1.0);
    assert!(config.trees > 0 && config.topics > 0 && config.discourse > 0 && config.vocab > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v = config.vocab;
    let kk = config.topics;
    let dd = config.discourse;
    let n_inelig = (config.ineligible_frac * v as f64).floor() as usize;
    let eligible: Vec<usize> = (0..v - n_inelig).collect();

    let phi_t = MatF::from_rows(
        (0..kk)
            .map(|_| dirichlet_on(&mut rng, config.beta, v, &eligible))
            .collect(),
    );
    let phi_d = MatF::from_rows(
        (0..dd)
            .map(|_| dirichlet(&mut rng, config.beta, v))
            .collect(),
    );
    let phi_b = dirichlet(&mut rng, config.beta, v);
    let pi = MatF::from_rows(
        (0..=dd)
            .map(|_| dirichlet(&mut rng, config.gamma, dd))
            .collect(),
    );
    let tau = MatF::from_rows(
        (0..dd)
            .map(|_| dirichlet(&mut rng, config.delta, 3))
            .collect(),
    );
    let theta = MatF::from_rows(
        (0..config.trees)
            .map(|_| dirichlet(&mut rng, config.alpha, kk))
            .collect(),
    );

    let mut trees = Vec::with_capacity(config.trees);
    let mut all_d = Vec::new();
    let mut all_z = Vec::new();
    let mut all_x = Vec::new();
    for c in 0..config.trees {
        let mc = poisson_at_least(&mut rng, config.mean_messages - 1.0, 0) as usize + 1;
        let mut parents: Vec<Option<usize>> = Vec::with_capacity(mc);
        let mut child_count = vec![0usize; mc];
        parents.push(None);
        for m in 1..mc {
            // uniform attachment among messages with room under the cap
            let open: Vec<usize> = (0..m).filter(|&p| child_count[p] < config.branching).collect();
            let p = if open.is_empty() {
                m - 1
            } else {
                open[rng.gen_range(0..open.len())]
            };
            child_count[p] += 1;
            parents.push(Some(p));
        }

        let mut tree_d = Vec::with_capacity(mc);
        let mut tree_z = Vec::with_capacity(mc);
        let mut tree_x = Vec::with_capacity(mc);
        let mut messages = Vec::with_capacity(mc);
        for m in 0..mc {
            let dpa = match parents[m] {
                Some(p) => tree_d[p],
                None => dd, // pseudo-root transition row
            };
            let d_m = sample_categorical(&mut rng, pi.row(dpa));
            let z_m = sample_categorical(&mut rng, theta.row(c));
            let ntok = poisson_at_least(&mut rng, config.mean_tokens, 0) as usize;
            let mut xs = Vec::with_capacity(ntok);
            let mut tokens = Vec::with_capacity(ntok);
            for _ in 0..ntok {
                let x = WordType::from_index(sample_categorical(&mut rng, tau.row(d_m)));
                let w = match x {
                    WordType::Topic => sample_categorical(&mut rng, phi_t.row(z_m)),
                    WordType::Disc => sample_categorical(&mut rng, phi_d.row(d_m)),
                    WordType::Back => sample_categorical(&mut rng, phi_b.as_slice()),
                };
                let stop = w >= v - n_inelig;
                xs.push(x);
                tokens.push(Token {
                    word_id: w,
                    surface: format!("w{}", w),
                    stop,
                    punct: false,
                });
            }
            tree_d.push(d_m);
            tree_z.push(z_m);
            tree_x.push(xs);
            messages.push(Message {
                parent: parents[m],
                tokens,
            });
        }
        trees.push(ConversationTree::new(format!("synth-{}", c), messages));
        all_d.push(tree_d);
        all_z.push(tree_z);
        all_x.push(tree_x);
    }

    // build_corpus assigns word ids by first appearance; remap so the corpus
    // keeps the generator's word ids (surfaces are "w{id}" so the map is
    // recoverable, but keeping ids aligned makes the truth tables directly
    // comparable).
    let corpus = build_with_fixed_vocab(trees, v, n_inelig);
    let truth = GroundTruth {
        config: config.clone(),
        phi_t,
        phi_d,
        phi_b,
        pi,
        tau,
        theta,
        d: all_d,
        z: all_z,
        x: all_x,
    };
    debug_assert!(corpus
        .trees
        .iter()
        .all(|t| crate::corpus::validate_tree(t).is_empty()));
    (corpus, truth)
}

fn build_with_fixed_vocab(trees: Vec<ConversationTree>, v: usize, n_inelig: usize) -> Corpus {
    use crate::corpus::{Vocab, VocabEntry};
    let mut freq = vec![0u64; v];
    for t in &trees {
        for m in &t.messages {
            for tok in &m.tokens {
                freq[tok.word_id] += 1;
            }
        }
    }
    let entries = (0..v)
        .map(|w| VocabEntry {
            word: format!("w{}", w),
            freq: freq[w],
            stop: w >= v - n_inelig,
            punct: false,
        })
        .collect();
    Corpus::new(trees, Vocab::from_entries(entries))
}

/// Message-level accuracy of predicted labels against the truth, maximized
/// over all label permutations (exact for up to 10 labels).
pub fn best_permutation_accuracy(
    truth: &[Vec<usize>],
    pred: &[Vec<usize>],
    labels: usize,
) -> Result<f64, SynthError> {
    if labels > 10 {
        return Err(SynthError::TooManyLabels(labels));
    }
    if truth.len() != pred.len() {
        return Err(SynthError::ShapeMismatch(format!(
            "{} trees vs {}",
            truth.len(),
            pred.len()
        )));
    }
    let mut confusion = vec![vec![0u64; labels]; labels];
    let mut total = 0u64;
    for (t_row, p_row) in truth.iter().zip(pred) {
        if t_row.len() != p_row.len() {
            return Err(SynthError::ShapeMismatch("message counts differ".into()));
        }
        for (&t, &p) in t_row.iter().zip(p_row) {
            confusion[t][p] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Ok(1.0);
    }
    let mut perm: Vec<usize> = (0..labels).collect();
    let mut best = 0u64;
    heap_permutations(&mut perm, labels, &mut |perm| {
        let hits: u64 = (0..labels).map(|t| confusion[t][perm[t]]).sum();
        if hits > best {
            best = hits;
        }
    });
    Ok(best as f64 / total as f64)
}

fn heap_permutations<F: FnMut(&[usize])>(arr: &mut [usize], k: usize, visit: &mut F) {
    if k <= 1 {
        visit(arr);
        return;
    }
    for i in 0..k {
        heap_permutations(arr, k - 1, visit);
        if k % 2 == 0 {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

/// Topic and discourse recovery of a trained state against the ground truth,
/// under the best label permutation. Discourse accuracy is `None` for
/// variants without discourse roles.
pub fn recovery_score(
    truth: &GroundTruth,
    state: &SamplerState,
) -> Result<(f64, Option<f64>), SynthError> {
    if state.hyper.variant == Variant::Lda {
        return Err(SynthError::ShapeMismatch(
            "LDA has per-token topics; message-level recovery undefined".into(),
        ));
    }
    let topic = best_permutation_accuracy(&truth.z, &state.z, state.hyper.topics)?;
    let disc = if state.hyper.variant.has_discourse() {
        Some(best_permutation_accuracy(
            &truth.d,
            &state.d,
            state.hyper.discourse,
        )?)
    } else {
        None
    };
    Ok((topic, disc))
}

/// Recovery from bare assignment vectors (used by the CLI on archived
/// models, where only the assignments are available).
pub fn recovery_from_assignments(
    truth: &GroundTruth,
    z: &[Vec<usize>],
    d: Option<&[Vec<usize>]>,
    topics: usize,
    discourse: usize,
) -> Result<(f64, Option<f64>), SynthError> {
    let topic = best_permutation_accuracy(&truth.z, z, topics)?;
    let disc = match d {
        Some(d) => Some(best_permutation_accuracy(&truth.d, d, discourse)?),
        None => None,
    };
    Ok((topic, disc))
}
