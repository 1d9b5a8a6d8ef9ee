//! Loading, validation, and indexing of pre-tokenized conversation-tree
//! corpora.
//!
//! The on-disk format is JSONL, one conversation tree per line:
//!
//! ```text
//! {"tree_id": "t1", "messages": [{"id": 0, "parent": null,
//!   "tokens": [{"t": "hello", "stop": false, "punct": false}]}]}
//! ```
//!
//! `parent = null` marks the root of the tree. Tokenization, stopword
//! flagging, and punctuation flagging are assumed done upstream; the loader
//! only drops digit-only tokens, prunes low-frequency words, and re-indexes
//! messages so that parents always precede children.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("structure error in tree {tree_id}: {msg}")]
    Structure { tree_id: String, msg: String },
}

/// A single occurrence of a vocabulary word inside a message.
///
/// Tokens flagged as stopword or punctuation are never eligible to be sampled
/// as topic words; this is where that forcing is encoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub word_id: usize,
    pub surface: String,
    pub stop: bool,
    pub punct: bool,
}

impl Token {
    #[inline]
    pub fn topical_eligible(&self) -> bool {
        !(self.stop || self.punct)
    }
}

/// One microblog message. `parent` is a tree-local index; `None` means the
/// message hangs off the pseudo root of its tree. Messages may carry zero
/// tokens (the discourse structure is still meaningful).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub parent: Option<usize>,
    pub tokens: Vec<Token>,
}

/// A rooted tree of messages linked by reposting/replying relations.
/// Invariant after loading: message 0 is the unique root and every parent
/// index is smaller than its child's index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationTree {
    pub tree_id: String,
    pub messages: Vec<Message>,
    /// Child lists derived from the parent pointers.
    pub children: Vec<Vec<usize>>,
}

impl ConversationTree {
    pub fn new(tree_id: String, messages: Vec<Message>) -> Self {
        let children = derive_children(&messages);
        ConversationTree {
            tree_id,
            messages,
            children,
        }
    }
}

fn derive_children(messages: &[Message]) -> Vec<Vec<usize>> {
    let mut children = vec![Vec::new(); messages.len()];
    for (i, m) in messages.iter().enumerate() {
        if let Some(p) = m.parent {
            if p < messages.len() {
                children[p].push(i);
            }
        }
    }
    children
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub word: String,
    pub freq: u64,
    pub stop: bool,
    pub punct: bool,
}

/// Dense word <-> id map. Ids are assigned in order of first appearance in
/// the corpus, after digit removal and frequency pruning.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_entries(entries: Vec<VocabEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        Vocab { entries, index }
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.entries[id].word
    }

    pub fn entry(&self, id: usize) -> &VocabEntry {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    /// Hex SHA-256 over the newline-joined word list, used to tie model
    /// archives to the vocabulary they were trained against.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.word.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        digest.iter().map(|b| format!("{:02x}", b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub trees: Vec<ConversationTree>,
    pub vocab: Vocab,
    /// Cumulative message offsets per tree, for flat per-message document ids.
    doc_offsets: Vec<usize>,
}

impl Corpus {
    pub fn new(trees: Vec<ConversationTree>, vocab: Vocab) -> Self {
        let mut doc_offsets = Vec::with_capacity(trees.len());
        let mut off = 0;
        for t in &trees {
            doc_offsets.push(off);
            off += t.messages.len();
        }
        Corpus {
            trees,
            vocab,
            doc_offsets,
        }
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn total_messages(&self) -> usize {
        self.trees.iter().map(|t| t.messages.len()).sum()
    }

    pub fn total_tokens(&self) -> usize {
        self.trees
            .iter()
            .flat_map(|t| &t.messages)
            .map(|m| m.tokens.len())
            .sum()
    }

    /// Flat document index of message `m` in tree `c` (used when each
    /// message is treated as its own document, e.g. by the LDA variant).
    #[inline]
    pub fn doc_index(&self, c: usize, m: usize) -> usize {
        self.doc_offsets[c] + m
    }

    pub fn tree_by_id(&self, tree_id: &str) -> Option<usize> {
        self.trees.iter().position(|t| t.tree_id == tree_id)
    }
}

// ---------------------------------------------------------------------------
// JSONL schema

#[derive(Debug, Serialize, Deserialize)]
struct RawToken {
    t: String,
    #[serde(default)]
    stop: bool,
    #[serde(default)]
    punct: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawMessage {
    id: i64,
    parent: Option<i64>,
    tokens: Vec<RawToken>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTree {
    tree_id: String,
    messages: Vec<RawMessage>,
}

fn is_digit_only(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
}

/// Re-index a raw tree so parents precede children and ids are dense.
/// Detects unknown parents, duplicate ids, multiple/missing roots, and
/// cycles (nodes unreachable from the root).
fn reindex_tree(raw: RawTree) -> Result<ConversationTree, CorpusError> {
    let tree_id = raw.tree_id;
    let err = |msg: String| CorpusError::Structure {
        tree_id: tree_id.clone(),
        msg,
    };

    let mut by_id: HashMap<i64, usize> = HashMap::new();
    for (i, m) in raw.messages.iter().enumerate() {
        if by_id.insert(m.id, i).is_some() {
            return Err(err(format!("duplicate message id {}", m.id)));
        }
    }
    let mut roots = Vec::new();
    let mut child_ids: HashMap<i64, Vec<usize>> = HashMap::new();
    for (i, m) in raw.messages.iter().enumerate() {
        match m.parent {
            None => roots.push(i),
            Some(p) => {
                if !by_id.contains_key(&p) {
                    return Err(err(format!("unknown parent id {} at message {}", p, m.id)));
                }
                if p == m.id {
                    return Err(err(format!("message {} is its own parent", m.id)));
                }
                child_ids.entry(p).or_default().push(i);
            }
        }
    }
    if roots.is_empty() {
        return Err(err("no root message (parent=null)".into()));
    }
    if roots.len() > 1 {
        return Err(err("multiple roots".into()));
    }

    // BFS from the root in input order; anything unreachable sits on a cycle.
    let mut order = Vec::with_capacity(raw.messages.len());
    let mut new_idx = vec![usize::MAX; raw.messages.len()];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(roots[0]);
    while let Some(i) = queue.pop_front() {
        new_idx[i] = order.len();
        order.push(i);
        if let Some(kids) = child_ids.get(&raw.messages[i].id) {
            for &k in kids {
                queue.push_back(k);
            }
        }
    }
    if order.len() != raw.messages.len() {
        return Err(err("cycle or forward reference among parent pointers".into()));
    }

    let messages = order
        .iter()
        .map(|&i| {
            let m = &raw.messages[i];
            let parent = m.parent.map(|p| new_idx[by_id[&p]]);
            let tokens = m
                .tokens
                .iter()
                .filter(|t| !is_digit_only(&t.t))
                .map(|t| Token {
                    word_id: usize::MAX, // filled in after vocabulary pruning
                    surface: t.t.clone(),
                    stop: t.stop,
                    punct: t.punct,
                })
                .collect();
            Message { parent, tokens }
        })
        .collect();
    Ok(ConversationTree::new(tree_id, messages))
}

/// Load a JSONL corpus. Digit-only tokens are dropped, words occurring fewer
/// than `min_count` times are pruned (frequency counted after digit removal),
/// messages emptied by pruning are retained as zero-token messages, and trees
/// with no messages are removed.
pub fn load_corpus<P: AsRef<Path>>(path: P, min_count: u64) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut trees = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawTree = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        if raw.messages.is_empty() {
            continue; // empty tree
        }
        trees.push(reindex_tree(raw)?);
    }
    Ok(build_corpus(trees, min_count))
}

/// Vocabulary construction and pruning over already re-indexed trees.
pub fn build_corpus(mut trees: Vec<ConversationTree>, min_count: u64) -> Corpus {
    // Pass 1: frequencies and first-appearance order (pruning is
    // frequency-only; stopword/punctuation flags do not matter here).
    let mut freq: HashMap<String, u64> = HashMap::new();
    let mut first_seen: Vec<String> = Vec::new();
    let mut flags: HashMap<String, (bool, bool)> = HashMap::new();
    for t in &trees {
        for m in &t.messages {
            for tok in &m.tokens {
                let e = freq.entry(tok.surface.clone()).or_insert(0);
                if *e == 0 {
                    first_seen.push(tok.surface.clone());
                }
                *e += 1;
                let f = flags.entry(tok.surface.clone()).or_insert((false, false));
                f.0 |= tok.stop;
                f.1 |= tok.punct;
            }
        }
    }
    let entries: Vec<VocabEntry> = first_seen
        .into_iter()
        .filter(|w| freq[w] >= min_count)
        .map(|w| {
            let (stop, punct) = flags[&w];
            VocabEntry {
                freq: freq[&w],
                stop,
                punct,
                word: w,
            }
        })
        .collect();
    let vocab = Vocab::from_entries(entries);

    // Pass 2: drop pruned tokens and assign word ids.
    for t in &mut trees {
        for m in &mut t.messages {
            m.tokens.retain(|tok| vocab.id(&tok.surface).is_some());
            for tok in &mut m.tokens {
                tok.word_id = vocab.id(&tok.surface).unwrap();
            }
        }
    }
    trees.retain(|t| !t.messages.is_empty());
    Corpus::new(trees, vocab)
}

/// Check the message invariants of a single tree. Violations are data, not
/// errors: an empty list means the tree is well-formed.
pub fn validate_tree(tree: &ConversationTree) -> Vec<String> {
    let mut violations = Vec::new();
    let n = tree.messages.len();
    let mut roots = 0;
    for (i, m) in tree.messages.iter().enumerate() {
        match m.parent {
            None => {
                roots += 1;
                if i != 0 {
                    violations.push(format!("root at msg {} (expected msg 0)", i));
                }
            }
            Some(p) => {
                if p >= n {
                    violations.push(format!("parent {} out of range at msg {}", p, i));
                } else if p >= i {
                    violations.push(format!("parent after child at msg {}", i));
                }
            }
        }
    }
    if roots == 0 {
        violations.push("no root".into());
    } else if roots > 1 {
        violations.push("multiple roots".into());
    }
    violations
}

/// Write a corpus back to the JSONL format accepted by [`load_corpus`].
pub fn write_corpus<P: AsRef<Path>>(corpus: &Corpus, path: P) -> Result<(), CorpusError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    for t in &corpus.trees {
        let raw = RawTree {
            tree_id: t.tree_id.clone(),
            messages: t
                .messages
                .iter()
                .enumerate()
                .map(|(i, m)| RawMessage {
                    id: i as i64,
                    parent: m.parent.map(|p| p as i64),
                    tokens: m
                        .tokens
                        .iter()
                        .map(|tok| RawToken {
                            t: tok.surface.clone(),
                            stop: tok.stop,
                            punct: tok.punct,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &raw).map_err(|e| CorpusError::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Write the vocabulary sidecar TSV: word, id, frequency, stop, punct.
pub fn write_vocab_tsv<P: AsRef<Path>>(vocab: &Vocab, path: P) -> Result<(), CorpusError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "word\tid\tfreq\tstop\tpunct")?;
    for (i, e) in vocab.entries().iter().enumerate() {
        writeln!(w, "{}\t{}\t{}\t{}\t{}", e.word, i, e.freq, e.stop, e.punct)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{}", l).unwrap();
        }
        f
    }

    fn tok(t: &str) -> String {
        format!(r#"{{"t":"{}","stop":false,"punct":false}}"#, t)
    }

    #[test]
    fn minimal_single_message() {
        let line = format!(
            r#"{{"tree_id":"t","messages":[{{"id":0,"parent":null,"tokens":[{},{}]}}]}}"#,
            tok("a"),
            tok("b")
        );
        let f = write_jsonl(&[&line]);
        let c = load_corpus(f.path(), 1).unwrap();
        assert_eq!(c.vocab.size(), 2);
        assert_eq!(c.num_trees(), 1);
        assert_eq!(c.trees[0].messages.len(), 1);
    }

    #[test]
    fn low_frequency_word_pruned() {
        // "rare" appears 4 times, min_count=5 -> absent.
        let toks: Vec<String> = (0..4).map(|_| tok("rare")).collect();
        let common: Vec<String> = (0..5).map(|_| tok("common")).collect();
        let line = format!(
            r#"{{"tree_id":"t","messages":[{{"id":0,"parent":null,"tokens":[{},{}]}}]}}"#,
            toks.join(","),
            common.join(",")
        );
        let f = write_jsonl(&[&line]);
        let c = load_corpus(f.path(), 5).unwrap();
        assert!(c.vocab.id("rare").is_none());
        assert!(c.vocab.id("common").is_some());
    }

    #[test]
    fn digit_only_token_dropped() {
        let line = format!(
            r#"{{"tree_id":"t","messages":[{{"id":0,"parent":null,"tokens":[{},{}]}}]}}"#,
            tok("2016"),
            tok("word")
        );
        let f = write_jsonl(&[&line]);
        let c = load_corpus(f.path(), 1).unwrap();
        assert!(c.vocab.id("2016").is_none());
        assert!(c.vocab.id("word").is_some());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write_jsonl(&[r#"{"tree_id":"ok","messages":[{"id":0,"parent":null,"tokens":[]}]}"#, "{bad"]);
        match load_corpus(f.path(), 1) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn unknown_parent_is_structure_error() {
        let line = r#"{"tree_id":"t","messages":[{"id":0,"parent":null,"tokens":[]},{"id":1,"parent":9,"tokens":[]}]}"#;
        let f = write_jsonl(&[line]);
        match load_corpus(f.path(), 1) {
            Err(CorpusError::Structure { tree_id, .. }) => assert_eq!(tree_id, "t"),
            other => panic!("expected structure error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn cycle_is_structure_error() {
        let line = r#"{"tree_id":"t","messages":[{"id":0,"parent":null,"tokens":[]},{"id":1,"parent":2,"tokens":[]},{"id":2,"parent":1,"tokens":[]}]}"#;
        let f = write_jsonl(&[line]);
        assert!(matches!(
            load_corpus(f.path(), 1),
            Err(CorpusError::Structure { .. })
        ));
    }

    #[test]
    fn out_of_order_input_is_reindexed() {
        // Child listed before its parent; loader must topologically reorder.
        let line = r#"{"tree_id":"t","messages":[{"id":5,"parent":7,"tokens":[]},{"id":7,"parent":null,"tokens":[]}]}"#;
        let f = write_jsonl(&[line]);
        let c = load_corpus(f.path(), 1).unwrap();
        assert!(c.trees.is_empty() || validate_tree(&c.trees[0]).is_empty());
    }

    #[test]
    fn validate_tree_rules() {
        // parent index after child
        let t = ConversationTree::new(
            "t".into(),
            vec![
                Message { parent: None, tokens: vec![] },
                Message { parent: Some(0), tokens: vec![] },
                Message { parent: Some(3), tokens: vec![] },
                Message { parent: Some(0), tokens: vec![] },
            ],
        );
        let v = validate_tree(&t);
        assert!(v.iter().any(|s| s.contains("parent after child at msg 2")));

        let chain = ConversationTree::new(
            "c".into(),
            vec![
                Message { parent: None, tokens: vec![] },
                Message { parent: Some(0), tokens: vec![] },
                Message { parent: Some(1), tokens: vec![] },
            ],
        );
        assert!(validate_tree(&chain).is_empty());

        let two_roots = ConversationTree::new(
            "r".into(),
            vec![
                Message { parent: None, tokens: vec![] },
                Message { parent: None, tokens: vec![] },
            ],
        );
        assert!(validate_tree(&two_roots)
            .iter()
            .any(|s| s.contains("multiple roots")));
    }

    #[test]
    fn round_trip() {
        let line = format!(
            r#"{{"tree_id":"t","messages":[{{"id":0,"parent":null,"tokens":[{},{}]}},{{"id":1,"parent":0,"tokens":[{}]}}]}}"#,
            tok("a"),
            tok("b"),
            tok("a")
        );
        let f = write_jsonl(&[&line]);
        let c = load_corpus(f.path(), 1).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_corpus(&c, out.path()).unwrap();
        let c2 = load_corpus(out.path(), 1).unwrap();
        assert_eq!(c, c2);
    }
}
