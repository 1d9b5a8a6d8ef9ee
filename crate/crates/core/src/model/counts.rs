//! The six count tables of the collapsed model, with cached row sums and
//! exact incremental bookkeeping.

use super::Variant;
use crate::corpus::Corpus;
use crate::mat::MatU;

/// Sufficient statistics of the collapsed model.
///
/// - `dd`: (D+1) x D discourse transitions; row D is the pseudo-root row.
/// - `ct`: document-topic counts; one row per tree, or per message for LDA.
/// - `tw`: K x V topic-word counts (TOPIC-typed tokens only).
/// - `dw`: D x V discourse-word counts (DISC-typed tokens only).
/// - `bw`: V background-word counts (BACK-typed tokens).
/// - `dx`: word-type counts; rows are discourse roles for the full variant
///   and trees for topic-disc/topic-only (the topic-only variant only ever
///   touches the TOPIC and BACK columns).
///
/// Tables that do not exist for a variant are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTables {
    pub dd: MatU,
    pub dd_sum: Vec<u32>,
    pub ct: MatU,
    pub ct_sum: Vec<u32>,
    pub tw: MatU,
    pub tw_sum: Vec<u32>,
    pub dw: MatU,
    pub dw_sum: Vec<u32>,
    pub bw: Vec<u32>,
    pub bw_sum: u32,
    pub dx: MatU,
    pub dx_sum: Vec<u32>,
}

impl CountTables {
    pub fn new(corpus: &Corpus, topics: usize, discourse: usize, variant: Variant) -> Self {
        let v = corpus.vocab.size();
        let c = corpus.num_trees();
        let (dd, dw) = if variant.has_discourse() {
            (
                MatU::zeros(discourse + 1, discourse),
                MatU::zeros(discourse, v),
            )
        } else {
            (MatU::empty(), MatU::empty())
        };
        let ct = match variant {
            Variant::Lda => MatU::zeros(corpus.total_messages(), topics),
            _ => MatU::zeros(c, topics),
        };
        let dx = match variant {
            Variant::Full => MatU::zeros(discourse, 3),
            Variant::TopicDisc | Variant::TopicOnly => MatU::zeros(c, 3),
            Variant::Lda => MatU::empty(),
        };
        let bw = if variant.has_word_types() {
            vec![0; v]
        } else {
            Vec::new()
        };
        let dd_sum = vec![0; dd.rows()];
        let ct_sum = vec![0; ct.rows()];
        let dw_sum = vec![0; dw.rows()];
        let dx_sum = vec![0; dx.rows()];
        CountTables {
            dd,
            dd_sum,
            ct,
            ct_sum,
            tw: MatU::zeros(topics, v),
            tw_sum: vec![0; topics],
            dw,
            dw_sum,
            bw,
            bw_sum: 0,
            dx,
            dx_sum,
        }
    }

    #[inline]
    pub fn add_transition(&mut self, from: usize, to: usize, delta: i32) {
        bump(self.dd.at_mut(from, to), delta);
        bump(&mut self.dd_sum[from], delta);
    }

    #[inline]
    pub fn add_doc_topic(&mut self, doc: usize, k: usize, delta: i32) {
        bump(self.ct.at_mut(doc, k), delta);
        bump(&mut self.ct_sum[doc], delta);
    }

    #[inline]
    pub fn add_topic_word(&mut self, k: usize, v: usize, delta: i32) {
        bump(self.tw.at_mut(k, v), delta);
        bump(&mut self.tw_sum[k], delta);
    }

    #[inline]
    pub fn add_disc_word(&mut self, d: usize, v: usize, delta: i32) {
        bump(self.dw.at_mut(d, v), delta);
        bump(&mut self.dw_sum[d], delta);
    }

    #[inline]
    pub fn add_back_word(&mut self, v: usize, delta: i32) {
        bump(&mut self.bw[v], delta);
        bump(&mut self.bw_sum, delta);
    }

    #[inline]
    pub fn add_word_type(&mut self, row: usize, x: usize, delta: i32) {
        bump(self.dx.at_mut(row, x), delta);
        bump(&mut self.dx_sum[row], delta);
    }

    /// Total tokens accounted for across the three word tables.
    pub fn word_table_total(&self) -> u64 {
        let tw: u64 = self.tw_sum.iter().map(|&s| s as u64).sum();
        let dw: u64 = self.dw_sum.iter().map(|&s| s as u64).sum();
        tw + dw + self.bw_sum as u64
    }

    /// Cross-check the cached row sums against the tables themselves.
    pub fn check_cached_sums(&self) -> bool {
        fn rows_ok(m: &MatU, sums: &[u32]) -> bool {
            m.iter_rows()
                .zip(sums)
                .all(|(row, &s)| row.iter().sum::<u32>() == s)
        }
        rows_ok(&self.dd, &self.dd_sum)
            && rows_ok(&self.ct, &self.ct_sum)
            && rows_ok(&self.tw, &self.tw_sum)
            && rows_ok(&self.dw, &self.dw_sum)
            && rows_ok(&self.dx, &self.dx_sum)
            && self.bw.iter().sum::<u32>() == self.bw_sum
    }
}

#[inline]
fn bump(slot: &mut u32, delta: i32) {
    if delta >= 0 {
        *slot += delta as u32;
    } else {
        let dec = (-delta) as u32;
        debug_assert!(*slot >= dec, "count table underflow");
        *slot -= dec;
    }
}
