//! Joint modeling of conversational discourse roles and latent topics on
//! microblog conversation trees.
//!
//! The crate covers the full pipeline: loading pre-tokenized conversation-tree
//! corpora ([`corpus`]), collapsed Gibbs inference over discourse roles, topic
//! assignments, and per-token word types ([`sampler`], [`model`]), topic
//! reporting and UMass coherence ([`eval`]), KL-greedy extractive conversation
//! summarization ([`summarize`]), synthetic corpus generation with known
//! ground truth ([`synth`]), and brute-force reference implementations used by
//! the test suite ([`oracle`]).

pub mod corpus;
pub mod eval;
pub mod mat;
pub mod model;
pub mod oracle;
pub mod sampler;
pub mod summarize;
pub mod synth;

pub use corpus::{ConversationTree, Corpus, Message, Token, Vocab};
pub use model::{Assignments, CountTables, Hyperparams, Model, SamplerState, Variant, WordType};
pub use sampler::{train, SweepStats};
