//! Whole-document query scoring with KL-divergence (Jelinek-Mercer) and BM25.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::analyze::{AnalyzerKind, TermBag};
use crate::error::{Error, Result};
use crate::index::TermIndex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub topic_id: String,
    pub terms: TermBag,
}

impl Query {
    pub fn new(topic_id: impl Into<String>, terms: TermBag) -> Self {
        Query {
            topic_id: topic_id.into(),
            terms,
        }
    }

    /// Total term count.
    pub fn size(&self) -> u64 {
        self.terms.values().map(|&c| u64::from(c)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlParams {
    pub lambda: f64,
}

impl Default for KlParams {
    fn default() -> Self {
        KlParams { lambda: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub k3: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.5,
            b: 1.5,
            k3: 3.0,
        }
    }
}

impl KlParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda > 0.0 && self.lambda < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("lambda must lie in (0,1), got {}", self.lambda)))
        }
    }
}

impl Bm25Params {
    /// Besides non-negativity, `k1·(b−1) < 1` keeps the tf denominator positive for
    /// every tf ≥ 1, which matters once b exceeds 1.
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.b >= 0.0 && self.k3 >= 0.0) {
            return Err(Error::Config(format!("BM25 parameters must be non-negative: {self:?}")));
        }
        if self.k1 * (self.b - 1.0) >= 1.0 {
            return Err(Error::Config(format!("k1·(b−1) must stay below 1: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scorer {
    Kl(KlParams),
    Bm25(Bm25Params),
}

impl Scorer {
    pub fn name(&self) -> &'static str {
        match self {
            Scorer::Kl(_) => "kl",
            Scorer::Bm25(_) => "bm25",
        }
    }
}

/// One retrieval model: a scorer over one analyzer's index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelId {
    pub scorer: ScorerKind,
    pub analyzer: AnalyzerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScorerKind {
    Kl,
    Bm25,
}

impl ModelId {
    pub fn all() -> Vec<ModelId> {
        [ScorerKind::Kl, ScorerKind::Bm25]
            .into_iter()
            .flat_map(|scorer| AnalyzerKind::ALL.map(|analyzer| ModelId { scorer, analyzer }))
            .collect()
    }

    pub fn is_phrase(&self) -> bool {
        self.analyzer == AnalyzerKind::PhraseEn
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.scorer {
            ScorerKind::Kl => "kl",
            ScorerKind::Bm25 => "bm25",
        };
        write!(f, "{s}-{}", self.analyzer)
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (scorer, analyzer) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("bad model id {s:?}")))?;
        let scorer = match scorer {
            "kl" => ScorerKind::Kl,
            "bm25" => ScorerKind::Bm25,
            _ => return Err(Error::Config(format!("bad model id {s:?}"))),
        };
        Ok(ModelId {
            scorer,
            analyzer: analyzer.parse()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub topic_id: String,
    pub model_id: String,
    /// Scores non-increasing, ids unique.
    pub entries: Vec<(String, f64)>,
}

impl RankedList {
    pub fn new(topic_id: impl Into<String>, model_id: impl Into<String>) -> Self {
        RankedList {
            topic_id: topic_id.into(),
            model_id: model_id.into(),
            entries: Vec::new(),
        }
    }

    /// Sorts `scored` descending with ascending-id tie-break and keeps `cutoff`.
    pub fn from_scores(
        topic_id: impl Into<String>,
        model_id: impl Into<String>,
        mut scored: Vec<(String, f64)>,
        cutoff: usize,
    ) -> Self {
        scored.sort_by(rank_order);
        scored.truncate(cutoff);
        RankedList {
            topic_id: topic_id.into(),
            model_id: model_id.into(),
            entries: scored,
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Descending score, then ascending id.
pub fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

fn check_query(query: &Query) -> Result<()> {
    if query.size() == 0 {
        Err(Error::EmptyQuery)
    } else {
        Ok(())
    }
}

/// `Σ_t P(t|q)·log[(1−λ)·tf/|d| + λ·ctf/|C|]` over query terms seen in the collection.
pub fn score_kl(query: &Query, doc: u32, index: &TermIndex, params: &KlParams) -> Result<f64> {
    check_query(query)?;
    let qlen = query.size() as f64;
    let dlen = index.doc_length(doc) as f64;
    let clen = index.collection_length() as f64;
    let lambda = params.lambda;
    let mut score = 0.0;
    for (term, &qtf) in &query.terms {
        let ctf = index.collection_tf(term);
        if ctf == 0 {
            continue;
        }
        let background = lambda * ctf as f64 / clen;
        let p = if dlen > 0.0 {
            (1.0 - lambda) * f64::from(index.tf(term, doc)) / dlen + background
        } else {
            background
        };
        score += f64::from(qtf) / qlen * p.ln();
    }
    Ok(score)
}

/// `ln((N−df+0.5)/(df+0.5))`, floored at zero.
pub fn bm25_idf(n_docs: u64, df: u64) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5)).ln().max(0.0)
}

fn bm25_term(tf: f64, qtf: f64, idf: f64, dlen: f64, avgdl: f64, p: &Bm25Params) -> f64 {
    if tf == 0.0 || idf == 0.0 {
        return 0.0;
    }
    let norm = 1.0 - p.b + p.b * dlen / avgdl;
    idf * tf * (p.k1 + 1.0) / (tf + p.k1 * norm) * qtf * (p.k3 + 1.0) / (p.k3 + qtf)
}

pub fn score_bm25(query: &Query, doc: u32, index: &TermIndex, params: &Bm25Params) -> Result<f64> {
    check_query(query)?;
    let n = index.num_docs() as u64;
    let dlen = index.doc_length(doc) as f64;
    let avgdl = index.avg_doc_length();
    let mut score = 0.0;
    for (term, &qtf) in &query.terms {
        let tf = index.tf(term, doc);
        if tf == 0 {
            continue;
        }
        let idf = bm25_idf(n, index.doc_freq(term));
        score += bm25_term(f64::from(tf), f64::from(qtf), idf, dlen, avgdl, params);
    }
    Ok(score)
}

/// Scores every document sharing a term with the query (restricted to
/// `working_set` when given), excluding the topic patent itself.
///
/// Accumulates term-at-a-time over postings; per-document scores agree with
/// [`score_kl`] / [`score_bm25`].
pub fn retrieve(
    query: &Query,
    index: &TermIndex,
    scorer: &Scorer,
    model_id: &str,
    working_set: Option<&HashSet<String>>,
    cutoff: usize,
) -> Result<RankedList> {
    check_query(query)?;
    if cutoff == 0 {
        return Err(Error::Config("cutoff must be at least 1".into()));
    }
    let allowed: Option<Vec<bool>> = working_set.map(|set| {
        let mut mask = vec![false; index.num_docs()];
        for id in set {
            if let Some(d) = index.doc_ordinal(id) {
                mask[d as usize] = true;
            }
        }
        mask
    });
    let excluded = index.doc_ordinal(&query.topic_id);

    // BTreeMap keeps accumulation order per document deterministic.
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    let qlen = query.size() as f64;
    let n = index.num_docs() as u64;
    let avgdl = index.avg_doc_length();
    let clen = index.collection_length() as f64;
    let mut kl_base = 0.0;

    for (term, &qtf) in &query.terms {
        let Some(t) = index.term_id(term) else { continue };
        let postings = index.postings(t);
        match scorer {
            Scorer::Kl(p) => {
                let w = f64::from(qtf) / qlen;
                let background = p.lambda * index.collection_tf(term) as f64 / clen;
                let base = w * background.ln();
                kl_base += base;
                for post in postings {
                    let dlen = index.doc_length(post.doc) as f64;
                    let full = (1.0 - p.lambda) * f64::from(post.tf) / dlen + background;
                    *acc.entry(post.doc).or_insert(0.0) += w * full.ln() - base;
                }
            }
            Scorer::Bm25(p) => {
                let idf = bm25_idf(n, postings.len() as u64);
                for post in postings {
                    let dlen = index.doc_length(post.doc) as f64;
                    *acc.entry(post.doc).or_insert(0.0) +=
                        bm25_term(f64::from(post.tf), f64::from(qtf), idf, dlen, avgdl, p);
                }
            }
        }
    }

    let scored = acc
        .into_iter()
        .filter(|&(d, _)| Some(d) != excluded)
        .filter(|&(d, _)| allowed.as_ref().is_none_or(|m| m[d as usize]))
        .map(|(d, s)| (index.doc_id(d).to_string(), s + kl_base))
        .collect();
    Ok(RankedList::from_scores(
        query.topic_id.clone(),
        model_id,
        scored,
        cutoff,
    ))
}

// ---------------------------------------------------------------------------
// TREC run files

/// `topic_id Q0 patent_id rank score model_id`, ranks from 1.
pub fn write_run(lists: &[RankedList]) -> String {
    let mut out = String::new();
    for list in lists {
        for (rank, (id, score)) in list.entries.iter().enumerate() {
            out.push_str(&format!(
                "{} Q0 {} {} {} {}\n",
                list.topic_id,
                id,
                rank + 1,
                score,
                list.model_id
            ));
        }
    }
    out
}

/// Parses a run file into one list per (topic, model) in order of first
/// appearance. Entries are ordered by the rank column.
pub fn parse_run(text: &str) -> Result<Vec<RankedList>, (usize, String)> {
    let mut order: Vec<(String, String)> = Vec::new();
    type Rows = Vec<(u64, String, f64)>;
    let mut lists: BTreeMap<(String, String), Rows> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [topic, _q0, doc, rank, score, model] = cols[..] else {
            return Err((i + 1, format!("expected 6 columns, found {}", cols.len())));
        };
        let rank: u64 = rank.parse().map_err(|e| (i + 1, format!("rank: {e}")))?;
        let score: f64 = score.parse().map_err(|e| (i + 1, format!("score: {e}")))?;
        if !score.is_finite() {
            return Err((i + 1, "score is not finite".into()));
        }
        let key = (topic.to_string(), model.to_string());
        let entries = lists.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        entries.push((rank, doc.to_string(), score));
    }
    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let mut entries = lists.remove(&key).unwrap_or_default();
        entries.sort_by_key(|e| e.0);
        let mut seen = HashSet::new();
        if let Some(dup) = entries.iter().find(|e| !seen.insert(e.1.clone())) {
            return Err((0, format!("document {} repeated for topic {}", dup.1, key.0)));
        }
        out.push(RankedList {
            topic_id: key.0,
            model_id: key.1,
            entries: entries.into_iter().map(|(_, d, s)| (d, s)).collect(),
        });
    }
    Ok(out)
}
