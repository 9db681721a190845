//! Patent records, name normalization, citation resolution and the metadata store.
//!
//! The on-disk corpus is one JSON object per line. Parsing keeps names exactly as
//! written so that serializing a parsed record reproduces the input line; the
//! [`PatentStore`] normalizes names and resolves description citations on load.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{self, Error, ParseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Fr,
    De,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::En, Language::Fr, Language::De];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Fr => "fr",
            Language::De => "de",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "fr" => Ok(Language::Fr),
            "de" => Ok(Language::De),
            other => Err(format!("unknown language {other:?}")),
        }
    }
}

/// Publication kind. The derived order is the publication order A1 < A2 < B1 < B2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VersionKind {
    A1,
    A2,
    B1,
    B2,
}

impl FromStr for VersionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A1" => Ok(VersionKind::A1),
            "A2" => Ok(VersionKind::A2),
            "B1" => Ok(VersionKind::B1),
            "B2" => Ok(VersionKind::B2),
            other => Err(format!("unknown version kind {other:?}")),
        }
    }
}

/// Text available in each of the three official languages; missing languages are empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangText {
    #[serde(default)]
    pub en: String,
    #[serde(default)]
    pub fr: String,
    #[serde(default)]
    pub de: String,
}

impl LangText {
    pub fn get(&self, lang: Language) -> &str {
        match lang {
            Language::En => &self.en,
            Language::Fr => &self.fr,
            Language::De => &self.de,
        }
    }

    pub fn set(&mut self, lang: Language, text: String) {
        match lang {
            Language::En => self.en = text,
            Language::Fr => self.fr = text,
            Language::De => self.de = text,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.en.is_empty() && self.fr.is_empty() && self.de.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationVersion {
    pub kind: VersionKind,
    pub date: NaiveDate,
    pub title: LangText,
    #[serde(rename = "abstract")]
    pub abstract_text: LangText,
    pub claims: LangText,
    /// Written in the language of proceedings.
    pub description: String,
}

impl PublicationVersion {
    fn has_text(&self) -> bool {
        !(self.title.is_empty()
            && self.abstract_text.is_empty()
            && self.claims.is_empty()
            && self.description.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatentRecord {
    pub id: String,
    /// Ordered by [`VersionKind`], no duplicate kinds.
    pub versions: Vec<PublicationVersion>,
    pub language: Language,
    pub applicants: Vec<String>,
    pub inventors: Vec<String>,
    pub ipc_classes: Vec<String>,
    pub ecla_classes: Vec<String>,
    pub priority_ids: Vec<String>,
    /// In-collection patents cited in the description, in order of first mention.
    /// Always empty straight out of [`parse_record`]; filled by the store.
    pub cited_ids: Vec<String>,
    pub priority_date: NaiveDate,
}

impl PatentRecord {
    /// Date of the first publication.
    pub fn publication_date(&self) -> NaiveDate {
        self.versions.iter().map(|v| v.date).min().unwrap_or(self.priority_date)
    }

    /// The description of the most recent version carrying one (B2, B1, A2, A1).
    pub fn latest_description(&self) -> &str {
        self.versions
            .iter()
            .rev()
            .map(|v| v.description.as_str())
            .find(|d| !d.is_empty())
            .unwrap_or("")
    }

    /// ECLA classes when present, IPC classes otherwise.
    pub fn disambiguation_classes(&self) -> &[String] {
        if self.ecla_classes.is_empty() {
            &self.ipc_classes
        } else {
            &self.ecla_classes
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CitationCategory {
    X,
    Y,
    A,
    D,
    Other,
}

impl CitationCategory {
    /// Unknown examiner codes collapse to `Other`.
    pub fn parse(code: &str) -> Self {
        match code.trim() {
            "X" => CitationCategory::X,
            "Y" => CitationCategory::Y,
            "A" => CitationCategory::A,
            "D" => CitationCategory::D,
            _ => CitationCategory::Other,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            CitationCategory::X => "X",
            CitationCategory::Y => "Y",
            CitationCategory::A => "A",
            CitationCategory::D => "D",
            CitationCategory::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationEdge {
    pub from_id: String,
    pub to_id: String,
    pub category: CitationCategory,
    pub citation_paragraph: Option<String>,
}

// ---------------------------------------------------------------------------
// Record format

#[derive(Deserialize)]
struct RawVersion {
    kind: String,
    date: NaiveDate,
    #[serde(default)]
    title: LangText,
    #[serde(default, rename = "abstract")]
    abstract_text: LangText,
    #[serde(default)]
    claims: LangText,
    #[serde(default)]
    description: String,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    lang: Language,
    versions: Vec<RawVersion>,
    #[serde(default)]
    applicants: Vec<String>,
    #[serde(default)]
    inventors: Vec<String>,
    #[serde(default)]
    ipc: Vec<String>,
    #[serde(default)]
    ecla: Vec<String>,
    #[serde(default)]
    priorities: Vec<String>,
    #[serde(default)]
    priority_date: Option<NaiveDate>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    lang: Language,
    versions: &'a [PublicationVersion],
    applicants: &'a [String],
    inventors: &'a [String],
    ipc: &'a [String],
    ecla: &'a [String],
    priorities: &'a [String],
    priority_date: NaiveDate,
}

static CLASS_PREFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-H][0-9]{2}[A-Z]?").unwrap());

fn offset_of(line: &str, needle: &str) -> usize {
    line.find(needle).unwrap_or(0)
}

/// Parses one corpus line.
pub fn parse_record(line: &str) -> Result<PatentRecord, ParseError> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| {
        let offset = line
            .split_inclusive('\n')
            .take(e.line().saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + e.column().saturating_sub(1);
        ParseError::new(offset.min(line.len()), e.to_string())
    })?;

    if raw.id.trim().is_empty() {
        return Err(ParseError::new(offset_of(line, "\"id\""), "empty patent id"));
    }
    if raw.versions.is_empty() {
        return Err(ParseError::new(
            offset_of(line, "\"versions\""),
            "record has no versions",
        ));
    }

    let mut versions = Vec::with_capacity(raw.versions.len());
    for v in raw.versions {
        let kind = VersionKind::from_str(&v.kind)
            .map_err(|m| ParseError::new(offset_of(line, &format!("\"{}\"", v.kind)), m))?;
        let version = PublicationVersion {
            kind,
            date: v.date,
            title: v.title,
            abstract_text: v.abstract_text,
            claims: v.claims,
            description: v.description,
        };
        if !version.has_text() {
            return Err(ParseError::new(
                offset_of(line, &format!("\"{}\"", v.kind)),
                format!("version {kind:?} carries no text"),
            ));
        }
        versions.push(version);
    }
    versions.sort_by_key(|v| v.kind);
    if let Some(w) = versions.windows(2).find(|w| w[0].kind == w[1].kind) {
        return Err(ParseError::new(
            offset_of(line, &format!("\"{:?}\"", w[0].kind)),
            format!("duplicate version kind {:?}", w[0].kind),
        ));
    }

    for code in raw.ipc.iter().chain(&raw.ecla) {
        if !CLASS_PREFIX.is_match(code) {
            return Err(ParseError::new(
                offset_of(line, &format!("\"{code}\"")),
                format!("malformed classification code {code:?}"),
            ));
        }
    }

    let priority_date = raw
        .priority_date
        .unwrap_or_else(|| versions.iter().map(|v| v.date).min().expect("non-empty"));

    Ok(PatentRecord {
        id: raw.id,
        versions,
        language: raw.lang,
        applicants: raw.applicants,
        inventors: raw.inventors,
        ipc_classes: raw.ipc,
        ecla_classes: raw.ecla,
        priority_ids: raw.priorities,
        cited_ids: Vec::new(),
        priority_date,
    })
}

/// Serializes a record to its one-line external form (no trailing newline).
pub fn serialize_record(record: &PatentRecord) -> String {
    let out = RecordOut {
        id: &record.id,
        lang: record.language,
        versions: &record.versions,
        applicants: &record.applicants,
        inventors: &record.inventors,
        ipc: &record.ipc_classes,
        ecla: &record.ecla_classes,
        priorities: &record.priority_ids,
        priority_date: record.priority_date,
    };
    serde_json::to_string(&out).expect("record serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Name normalization

/// A list of (possibly multi-word) entries removed from names, matched token-wise
/// and case-insensitively, longest entry first.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: Vec<Vec<String>>,
}

fn match_key(token: &str) -> String {
    token.trim_end_matches([',', ';']).to_lowercase()
}

impl Gazetteer {
    pub fn from_lines(text: &str) -> Self {
        let mut entries: Vec<Vec<String>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(match_key).collect())
            .collect();
        entries.sort_by(|a: &Vec<String>, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        entries.dedup();
        Gazetteer { entries }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_lines(&error::read_to_string(path)?))
    }

    fn remove_once<'a>(&self, tokens: &[&'a str]) -> Vec<&'a str> {
        let keys: Vec<String> = tokens.iter().map(|t| match_key(t)).collect();
        let mut kept = Vec::with_capacity(tokens.len());
        let mut i = 0;
        'outer: while i < tokens.len() {
            for entry in &self.entries {
                let n = entry.len();
                if i + n <= keys.len() && keys[i..i + n] == entry[..] {
                    i += n;
                    continue 'outer;
                }
            }
            kept.push(tokens[i]);
            i += 1;
        }
        kept
    }

    /// Strips entries until none remain. If stripping would leave nothing, the
    /// last non-empty form is returned, so the result is always a fixed point.
    pub fn strip(&self, raw: &str) -> String {
        let mut current: Vec<&str> = raw
            .split_whitespace()
            .filter(|t| t.chars().any(char::is_alphanumeric))
            .collect();
        loop {
            let next = self.remove_once(&current);
            if next.is_empty() || next.len() == current.len() {
                break;
            }
            current = next;
        }
        let joined = current.join(" ");
        let trimmed = joined.trim_end_matches([',', ';']).trim();
        if trimmed.is_empty() {
            raw.split_whitespace().collect::<Vec<_>>().join(" ")
        } else {
            trimmed.to_string()
        }
    }
}

/// Inventor and applicant name cleaning with editable token lists.
#[derive(Debug, Clone)]
pub struct NameNormalizer {
    pub person_titles: Gazetteer,
    pub applicant_marks: Gazetteer,
}

impl Default for NameNormalizer {
    fn default() -> Self {
        NameNormalizer {
            person_titles: Gazetteer::from_lines(include_str!("../data/person_titles.txt")),
            applicant_marks: Gazetteer::from_lines(include_str!("../data/applicant_marks.txt")),
        }
    }
}

impl NameNormalizer {
    pub fn normalize_person_name(&self, raw: &str) -> String {
        self.person_titles.strip(raw)
    }

    pub fn normalize_applicant_name(&self, raw: &str) -> String {
        self.applicant_marks.strip(raw)
    }
}

// ---------------------------------------------------------------------------
// Citations

static CITATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bEP[ \u{00A0}]?([0-9])[ \u{00A0}]?([0-9]{3})[ \u{00A0}]?([0-9]{3})\b").unwrap());

/// Paragraph boundaries are line breaks.
fn enclosing_paragraph(text: &str, at: usize) -> &str {
    let start = text[..at].rfind('\n').map_or(0, |p| p + 1);
    let end = text[at..].find('\n').map_or(text.len(), |p| at + p);
    text[start..end].trim()
}

/// Resolves patent mentions in `description` against `known_ids`, deduplicated in
/// order of first mention, each with the paragraph of its first mention.
pub fn extract_citations(description: &str, known_ids: &HashSet<String>) -> Vec<(String, String)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for caps in CITATION.captures_iter(description) {
        let id = format!("EP{}{}{}", &caps[1], &caps[2], &caps[3]);
        if !known_ids.contains(&id) || !seen.insert(id.clone()) {
            continue;
        }
        let at = caps.get(0).expect("whole match").start();
        out.push((id, enclosing_paragraph(description, at).to_string()));
    }
    out
}

/// Forward and inverse citation adjacency over collection ordinals.
#[derive(Debug, Clone, Default)]
pub struct CitationGraph {
    ids: Vec<String>,
    ordinal: HashMap<String, usize>,
    forward: Vec<Vec<usize>>,
    inverse: Vec<Vec<usize>>,
}

impl CitationGraph {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.forward.iter().map(Vec::len).sum()
    }

    pub fn cited_ordinals(&self, ordinal: usize) -> &[usize] {
        &self.forward[ordinal]
    }

    pub fn citer_ordinals(&self, ordinal: usize) -> &[usize] {
        &self.inverse[ordinal]
    }

    pub fn cited(&self, id: &str) -> Vec<&str> {
        self.ordinal
            .get(id)
            .map(|&o| self.forward[o].iter().map(|&c| self.ids[c].as_str()).collect())
            .unwrap_or_default()
    }

    pub fn citers(&self, id: &str) -> Vec<&str> {
        self.ordinal
            .get(id)
            .map(|&o| self.inverse[o].iter().map(|&c| self.ids[c].as_str()).collect())
            .unwrap_or_default()
    }
}

/// Builds the citation graph from records whose `cited_ids` are resolved.
/// Citations to ids outside `records` are ignored.
pub fn citation_graph(records: &[PatentRecord]) -> CitationGraph {
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let ordinal: HashMap<String, usize> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
    let mut forward = vec![Vec::new(); ids.len()];
    let mut inverse = vec![Vec::new(); ids.len()];
    for (from, record) in records.iter().enumerate() {
        for cited in &record.cited_ids {
            if let Some(&to) = ordinal.get(cited) {
                if to != from {
                    forward[from].push(to);
                    inverse[to].push(from);
                }
            }
        }
    }
    for list in forward.iter_mut().chain(inverse.iter_mut()) {
        list.sort_unstable();
        list.dedup();
    }
    CitationGraph {
        ids,
        ordinal,
        forward,
        inverse,
    }
}

// ---------------------------------------------------------------------------
// Store

/// Loaded collection with normalized names, resolved citations and metadata lookups.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct PatentStore {
    records: Vec<PatentRecord>,
    ordinal: HashMap<String, usize>,
    edges: Vec<CitationEdge>,
    graph: CitationGraph,
    by_applicant: HashMap<String, Vec<usize>>,
    by_ecla: BTreeMap<String, Vec<usize>>,
    by_ipc: BTreeMap<String, Vec<usize>>,
    by_priority: HashMap<String, Vec<usize>>,
}

fn group<M>(records: &[PatentRecord], keys: impl Fn(&PatentRecord) -> &[String]) -> M
where
    M: FromIterator<(String, Vec<usize>)>,
{
    let mut tmp: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        for k in keys(r) {
            tmp.entry(k.clone()).or_default().insert(i);
        }
    }
    tmp.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect()
}

impl PatentStore {
    /// Normalizes names and resolves citations. Duplicate ids are rejected.
    pub fn from_records(mut records: Vec<PatentRecord>, names: &NameNormalizer) -> Result<Self> {
        let mut ordinal = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if ordinal.insert(r.id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate patent id {}", r.id)));
            }
        }
        let known: HashSet<String> = ordinal.keys().cloned().collect();

        let mut edges = Vec::new();
        for r in records.iter_mut() {
            r.applicants = dedup_names(r.applicants.iter().map(|a| names.normalize_applicant_name(a)));
            r.inventors = dedup_names(r.inventors.iter().map(|a| names.normalize_person_name(a)));
            let cites: Vec<(String, String)> = extract_citations(r.latest_description(), &known)
                .into_iter()
                .filter(|(id, _)| *id != r.id)
                .collect();
            r.cited_ids = cites.iter().map(|(id, _)| id.clone()).collect();
            for (to, paragraph) in cites {
                edges.push(CitationEdge {
                    from_id: r.id.clone(),
                    to_id: to,
                    category: CitationCategory::D,
                    citation_paragraph: Some(paragraph),
                });
            }
        }

        let graph = citation_graph(&records);
        let by_applicant = group(&records, |r| &r.applicants);
        let by_ecla = group(&records, |r| &r.ecla_classes);
        let by_ipc = group(&records, |r| &r.ipc_classes);
        let by_priority = group(&records, |r| &r.priority_ids);
        Ok(PatentStore {
            records,
            ordinal,
            edges,
            graph,
            by_applicant,
            by_ecla,
            by_ipc,
            by_priority,
        })
    }

    pub fn parse(text: &str, path: &Path, names: &NameNormalizer) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = parse_record(line).map_err(|source| Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?;
            records.push(record);
        }
        Self::from_records(records, names)
    }

    pub fn load(path: &Path, names: &NameNormalizer) -> Result<Self> {
        Self::parse(&error::read_to_string(path)?, path, names)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PatentRecord] {
        &self.records
    }

    pub fn record(&self, ordinal: usize) -> &PatentRecord {
        &self.records[ordinal]
    }

    pub fn ordinal(&self, id: &str) -> Option<usize> {
        self.ordinal.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&PatentRecord> {
        self.ordinal(id).map(|o| &self.records[o])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ordinal.contains_key(id)
    }

    pub fn edges(&self) -> &[CitationEdge] {
        &self.edges
    }

    pub fn graph(&self) -> &CitationGraph {
        &self.graph
    }

    pub fn with_applicant(&self, name: &str) -> &[usize] {
        self.by_applicant.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn with_ecla(&self, class: &str) -> &[usize] {
        self.by_ecla.get(class).map_or(&[], Vec::as_slice)
    }

    pub fn with_ipc(&self, class: &str) -> &[usize] {
        self.by_ipc.get(class).map_or(&[], Vec::as_slice)
    }

    pub fn with_priority(&self, priority_id: &str) -> &[usize] {
        self.by_priority.get(priority_id).map_or(&[], Vec::as_slice)
    }

    pub fn ecla_classes(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.by_ecla.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

fn dedup_names(names: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    names.filter(|n| seen.insert(n.clone())).collect()
}
