//! Meta-documents and the inverted term index.
//!
//! # Index file layout
//!
//! All integers little-endian, strings as `u32` byte length followed by UTF-8.
//!
//! ```text
//! magic        8 bytes  "PAIDX\0\0\0"
//! version      u32      = 1
//! analyzer     u8       AnalyzerKind tag
//! n_docs       u32
//! n_docs ×     { id: string, length: u64 }
//! n_terms      u32
//! n_terms ×    { term: string, collection_tf: u64, n_postings: u32,
//!                n_postings × { doc: u32, tf: u32 } }
//! coll_length  u64
//! ```
//!
//! Terms are strictly ascending; postings within a term strictly ascending by doc.
//! The reader re-checks every accounting identity and rejects the file otherwise.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::analyze::{Analyzer, AnalyzerKind};
use crate::corpus::{CitationEdge, LangText, Language, PatentRecord, PatentStore, VersionKind};
use crate::error::{io_err, Error, Result};

/// The merged text unit indexed for one patent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaDocument {
    pub patent_id: String,
    pub language: Language,
    /// Per language, from the latest version where that language's text is non-empty.
    pub title: LangText,
    pub abstract_text: LangText,
    pub claims: LangText,
    /// From the earliest version (A1, A2, B1, B2) carrying a description.
    pub description: String,
    /// Citation paragraphs from citing patents, tagged with the citing language.
    pub appended_citation_texts: Vec<(Language, String)>,
    /// Classes used for concept disambiguation (ECLA, or IPC when no ECLA).
    pub classes: Vec<String>,
}

impl MetaDocument {
    pub fn from_record(record: &PatentRecord) -> Self {
        let mut title = LangText::default();
        let mut abstract_text = LangText::default();
        let mut claims = LangText::default();
        for lang in Language::ALL {
            let latest = |field: fn(&crate::corpus::PublicationVersion) -> &LangText| {
                record
                    .versions
                    .iter()
                    .rev()
                    .map(|v| field(v).get(lang))
                    .find(|t| !t.is_empty())
                    .unwrap_or("")
                    .to_string()
            };
            title.set(lang, latest(|v| &v.title));
            abstract_text.set(lang, latest(|v| &v.abstract_text));
            claims.set(lang, latest(|v| &v.claims));
        }
        let description = [VersionKind::A1, VersionKind::A2, VersionKind::B1, VersionKind::B2]
            .iter()
            .filter_map(|k| record.versions.iter().find(|v| v.kind == *k))
            .map(|v| v.description.as_str())
            .find(|d| !d.is_empty())
            .unwrap_or("")
            .to_string();
        MetaDocument {
            patent_id: record.id.clone(),
            language: record.language,
            title,
            abstract_text,
            claims,
            description,
            appended_citation_texts: Vec::new(),
            classes: record.disambiguation_classes().to_vec(),
        }
    }

    /// All text written in `lang`.
    pub fn texts(&self, lang: Language) -> Vec<&str> {
        let mut out = vec![
            self.title.get(lang),
            self.abstract_text.get(lang),
            self.claims.get(lang),
        ];
        if self.language == lang {
            out.push(&self.description);
        }
        out.extend(
            self.appended_citation_texts
                .iter()
                .filter(|(l, _)| *l == lang)
                .map(|(_, t)| t.as_str()),
        );
        out.retain(|t| !t.is_empty());
        out
    }

    pub fn without_citation_texts(&self) -> Self {
        MetaDocument {
            appended_citation_texts: Vec::new(),
            ..self.clone()
        }
    }
}

pub fn build_metadocs(store: &PatentStore) -> Vec<MetaDocument> {
    store.records().iter().map(MetaDocument::from_record).collect()
}

/// Appends each citing paragraph to the cited patent's meta-document.
/// `languages` gives the description language of each citing patent.
pub fn append_citation_texts(docs: &mut [MetaDocument], edges: &[CitationEdge], languages: &HashMap<String, Language>) {
    let position: HashMap<String, usize> = docs.iter().enumerate().map(|(i, d)| (d.patent_id.clone(), i)).collect();
    let mut ordered: Vec<&CitationEdge> = edges.iter().filter(|e| e.citation_paragraph.is_some()).collect();
    ordered.sort_by(|a, b| (&a.to_id, &a.from_id).cmp(&(&b.to_id, &b.from_id)));
    for edge in ordered {
        let (Some(&target), Some(&lang)) = (position.get(&edge.to_id), languages.get(&edge.from_id)) else {
            continue;
        };
        let paragraph = edge.citation_paragraph.clone().unwrap_or_default();
        docs[target].appended_citation_texts.push((lang, paragraph));
    }
}

/// Meta-documents of a store with citation texts appended.
pub fn build_augmented_metadocs(store: &PatentStore) -> Vec<MetaDocument> {
    let mut docs = build_metadocs(store);
    let languages = store.records().iter().map(|r| (r.id.clone(), r.language)).collect();
    append_citation_texts(&mut docs, store.edges(), &languages);
    docs
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermIndex {
    analyzer: AnalyzerKind,
    doc_ids: Vec<String>,
    doc_length: Vec<u64>,
    /// Ascending.
    terms: Vec<String>,
    postings: Vec<Vec<Posting>>,
    collection_tf: Vec<u64>,
    collection_length: u64,
    term_lookup: HashMap<String, u32>,
    doc_lookup: HashMap<String, u32>,
}

/// Result of a full-scan audit of the accounting identities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexStats {
    pub analyzer: AnalyzerKind,
    pub documents: usize,
    pub empty_documents: usize,
    pub terms: usize,
    pub postings: usize,
    pub collection_length: u64,
    pub sum_doc_length: u64,
    /// Terms whose posting tf sum differs from collection_tf.
    pub ctf_mismatches: usize,
    /// Documents whose length differs from the sum of their posting tfs.
    pub length_mismatches: usize,
}

impl IndexStats {
    pub fn is_consistent(&self) -> bool {
        self.collection_length == self.sum_doc_length && self.ctf_mismatches == 0 && self.length_mismatches == 0
    }

    pub fn report(&self) -> String {
        format!(
            "analyzer            {}\n\
             documents           {}\n\
             empty documents     {}\n\
             terms               {}\n\
             postings            {}\n\
             collection length   {}\n\
             sum doc length      {}  [{}]\n\
             ctf mismatches      {}  [{}]\n\
             length mismatches   {}  [{}]\n\
             doc_freq = |postings| by construction\n",
            self.analyzer,
            self.documents,
            self.empty_documents,
            self.terms,
            self.postings,
            self.collection_length,
            self.sum_doc_length,
            ok(self.collection_length == self.sum_doc_length),
            self.ctf_mismatches,
            ok(self.ctf_mismatches == 0),
            self.length_mismatches,
            ok(self.length_mismatches == 0),
        )
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "VIOLATED"
    }
}

impl TermIndex {
    /// Analyzes every document (in parallel under the current rayon pool) and merges
    /// postings by (term, doc ordinal), so the result is independent of thread count.
    pub fn build(docs: &[MetaDocument], analyzer: &Analyzer, kind: AnalyzerKind) -> Result<Self> {
        let bags = docs
            .par_iter()
            .map(|d| analyzer.analyze_to_terms(d, kind))
            .collect::<Result<Vec<_>>>()?;
        let mut merged: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_length = Vec::with_capacity(docs.len());
        for (doc, bag) in bags.into_iter().enumerate() {
            doc_length.push(bag.values().map(|&c| u64::from(c)).sum());
            for (term, tf) in bag {
                merged.entry(term).or_default().push(Posting { doc: doc as u32, tf });
            }
        }
        let doc_ids = docs.iter().map(|d| d.patent_id.clone()).collect();
        let (terms, postings): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
        Ok(Self::assemble(kind, doc_ids, doc_length, terms, postings))
    }

    fn assemble(
        analyzer: AnalyzerKind,
        doc_ids: Vec<String>,
        doc_length: Vec<u64>,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
    ) -> Self {
        let collection_tf: Vec<u64> = postings
            .iter()
            .map(|p| p.iter().map(|x| u64::from(x.tf)).sum())
            .collect();
        let collection_length = doc_length.iter().sum();
        let term_lookup = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let doc_lookup = doc_ids.iter().enumerate().map(|(i, d)| (d.clone(), i as u32)).collect();
        TermIndex {
            analyzer,
            doc_ids,
            doc_length,
            terms,
            postings,
            collection_tf,
            collection_length,
            term_lookup,
            doc_lookup,
        }
    }

    pub fn analyzer(&self) -> AnalyzerKind {
        self.analyzer
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn collection_length(&self) -> u64 {
        self.collection_length
    }

    pub fn avg_doc_length(&self) -> f64 {
        if self.doc_ids.is_empty() {
            0.0
        } else {
            self.collection_length as f64 / self.doc_ids.len() as f64
        }
    }

    pub fn doc_id(&self, doc: u32) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn doc_ordinal(&self, id: &str) -> Option<u32> {
        self.doc_lookup.get(id).copied()
    }

    pub fn doc_length(&self, doc: u32) -> u64 {
        self.doc_length[doc as usize]
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_lookup.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn postings(&self, term: u32) -> &[Posting] {
        &self.postings[term as usize]
    }

    pub fn doc_freq(&self, term: &str) -> u64 {
        self.term_id(term).map_or(0, |t| self.postings[t as usize].len() as u64)
    }

    pub fn collection_tf(&self, term: &str) -> u64 {
        self.term_id(term).map_or(0, |t| self.collection_tf[t as usize])
    }

    pub fn tf(&self, term: &str, doc: u32) -> u32 {
        let Some(t) = self.term_id(term) else { return 0 };
        let list = &self.postings[t as usize];
        list.binary_search_by_key(&doc, |p| p.doc).map_or(0, |i| list[i].tf)
    }

    pub fn audit(&self) -> IndexStats {
        let mut per_doc = vec![0u64; self.doc_ids.len()];
        let mut ctf_mismatches = 0;
        for (t, list) in self.postings.iter().enumerate() {
            let sum: u64 = list.iter().map(|p| u64::from(p.tf)).sum();
            if sum != self.collection_tf[t] {
                ctf_mismatches += 1;
            }
            for p in list {
                per_doc[p.doc as usize] += u64::from(p.tf);
            }
        }
        let length_mismatches = per_doc.iter().zip(&self.doc_length).filter(|(a, b)| a != b).count();
        IndexStats {
            analyzer: self.analyzer,
            documents: self.doc_ids.len(),
            empty_documents: self.doc_length.iter().filter(|&&l| l == 0).count(),
            terms: self.terms.len(),
            postings: self.postings.iter().map(Vec::len).sum(),
            collection_length: self.collection_length,
            sum_doc_length: self.doc_length.iter().sum(),
            ctf_mismatches,
            length_mismatches,
        }
    }

    // -----------------------------------------------------------------------

    pub const MAGIC: [u8; 8] = *b"PAIDX\0\0\0";
    pub const VERSION: u32 = 1;

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.push(self.analyzer.tag());
        out.extend_from_slice(&(self.doc_ids.len() as u32).to_le_bytes());
        for (id, len) in self.doc_ids.iter().zip(&self.doc_length) {
            put_str(&mut out, id);
            out.extend_from_slice(&len.to_le_bytes());
        }
        out.extend_from_slice(&(self.terms.len() as u32).to_le_bytes());
        for (t, term) in self.terms.iter().enumerate() {
            put_str(&mut out, term);
            out.extend_from_slice(&self.collection_tf[t].to_le_bytes());
            out.extend_from_slice(&(self.postings[t].len() as u32).to_le_bytes());
            for p in &self.postings[t] {
                out.extend_from_slice(&p.doc.to_le_bytes());
                out.extend_from_slice(&p.tf.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.collection_length.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != Self::MAGIC {
            return Err(Error::IndexFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != Self::VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let analyzer =
            AnalyzerKind::from_tag(r.u8()?).ok_or_else(|| Error::IndexFormat("unknown analyzer tag".into()))?;

        let n_docs = r.count(12)?;
        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_length = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            doc_ids.push(r.string()?);
            doc_length.push(r.u64()?);
        }
        let n_terms = r.count(16)?;
        let mut terms: Vec<String> = Vec::with_capacity(n_terms);
        let mut postings = Vec::with_capacity(n_terms);
        let mut stored_ctf = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            let term = r.string()?;
            if terms.last().is_some_and(|prev| *prev >= term) {
                return Err(Error::IndexFormat(format!("terms out of order at {term:?}")));
            }
            stored_ctf.push(r.u64()?);
            let n = r.count(8)?;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let p = Posting {
                    doc: r.u32()?,
                    tf: r.u32()?,
                };
                if p.doc as usize >= n_docs || p.tf == 0 {
                    return Err(Error::IndexFormat(format!("bad posting for {term:?}")));
                }
                if list.last().is_some_and(|q: &Posting| q.doc >= p.doc) {
                    return Err(Error::IndexFormat(format!("postings out of order for {term:?}")));
                }
                list.push(p);
            }
            terms.push(term);
            postings.push(list);
        }
        let stored_length = r.u64()?;
        if r.pos != bytes.len() {
            return Err(Error::IndexFormat("trailing bytes".into()));
        }
        let index = Self::assemble(analyzer, doc_ids, doc_length, terms, postings);
        if index.doc_lookup.len() != index.doc_ids.len() {
            return Err(Error::IndexFormat("duplicate document id".into()));
        }
        if index.collection_tf != stored_ctf
            || index.collection_length != stored_length
            || !index.audit().is_consistent()
        {
            return Err(Error::IndexFormat("accounting identities violated".into()));
        }
        Ok(index)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(io_err(path))?)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::IndexFormat(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A count whose items need at least `min_item` bytes each; rejects counts the
    /// remaining input cannot hold so allocation stays bounded by the file size.
    fn count(&mut self, min_item: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item) > self.bytes.len() - self.pos {
            return Err(Error::IndexFormat(format!("count {n} exceeds remaining input")));
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::IndexFormat("invalid UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::TextRules;

    fn doc(id: &str, lang: Language, claims_en: &str, description: &str) -> MetaDocument {
        let mut claims = LangText::default();
        claims.set(Language::En, claims_en.into());
        MetaDocument {
            patent_id: id.into(),
            language: lang,
            title: LangText::default(),
            abstract_text: LangText::default(),
            claims,
            description: description.into(),
            appended_citation_texts: vec![],
            classes: vec![],
        }
    }

    #[test]
    fn single_doc_counts() {
        let a = Analyzer::new(TextRules::default());
        let idx = TermIndex::build(
            &[doc("d0", Language::En, "engine engine", "")],
            &a,
            AnalyzerKind::LemmaEn,
        )
        .unwrap();
        let t = idx.term_id("engine").unwrap();
        assert_eq!(idx.postings(t), &[Posting { doc: 0, tf: 2 }]);
        assert_eq!(idx.doc_length(0), 2);
        assert!(idx.audit().is_consistent());
    }

    #[test]
    fn empty_corpus_and_empty_docs() {
        let a = Analyzer::new(TextRules::default());
        let idx = TermIndex::build(&[], &a, AnalyzerKind::LemmaEn).unwrap();
        assert_eq!((idx.num_docs(), idx.num_terms(), idx.collection_length()), (0, 0, 0));
        let docs = [doc("a", Language::En, "", ""), doc("b", Language::En, "valve", "")];
        let idx = TermIndex::build(&docs, &a, AnalyzerKind::LemmaEn).unwrap();
        assert_eq!(idx.doc_length(0), 0);
        assert_eq!(
            idx.postings(idx.term_id("valve").unwrap()),
            &[Posting { doc: 1, tf: 1 }]
        );
    }

    #[test]
    fn shared_term_doc_freq() {
        let a = Analyzer::new(TextRules::default());
        let docs = [
            doc("a", Language::En, "pump valve", ""),
            doc("b", Language::En, "pump", ""),
        ];
        let idx = TermIndex::build(&docs, &a, AnalyzerKind::LemmaEn).unwrap();
        assert_eq!(idx.doc_freq("pump"), 2);
        assert_eq!(idx.collection_tf("pump"), 2);
        assert_eq!(idx.tf("valve", 1), 0);
    }

    #[test]
    fn french_analyzer_ignores_english_description() {
        let a = Analyzer::new(TextRules::default());
        let mut d = doc("a", Language::En, "", "pump pump pump");
        d.claims.set(Language::Fr, "moteur".into());
        let bag = a.analyze_to_terms(&d, AnalyzerKind::LemmaFr).unwrap();
        assert_eq!(bag.keys().collect::<Vec<_>>(), ["moteur"]);
    }

    #[test]
    fn binary_round_trip_and_corruption() {
        let a = Analyzer::new(TextRules::default());
        let docs = [
            doc("a", Language::En, "pump valve", ""),
            doc("b", Language::En, "pump", ""),
        ];
        let idx = TermIndex::build(&docs, &a, AnalyzerKind::LemmaEn).unwrap();
        let bytes = idx.to_bytes();
        assert_eq!(TermIndex::from_bytes(&bytes).unwrap(), idx);
        for cut in 0..bytes.len() {
            assert!(TermIndex::from_bytes(&bytes[..cut]).is_err());
        }
        let mut bad = bytes.clone();
        let last = bad.len() - 8;
        bad[last] ^= 1;
        assert!(TermIndex::from_bytes(&bad).is_err());
    }
}
