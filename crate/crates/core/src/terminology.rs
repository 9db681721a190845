//! Multilingual concept database, IPC-to-domain map and concept tagging.
//!
//! Concepts that share a (language, lemmatized term) pair and at least one domain
//! are merged. The merge is the union-find closure of that pairwise relation, so
//! the resulting partition does not depend on input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::analyze::{TextRules, TokenStream};
use crate::corpus::Language;
use crate::error::{self, Error, Result};

pub type DomainId = u32;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConceptTerm {
    pub language: Language,
    pub term: String,
    pub preferred: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptEntry {
    pub concept_id: u32,
    pub terms: Vec<ConceptTerm>,
    pub domains: BTreeSet<DomainId>,
    pub source: String,
}

#[derive(Debug, Clone, Default)]
pub struct TermDb {
    concepts: BTreeMap<u32, ConceptEntry>,
    lookup: [HashMap<Vec<String>, Vec<u32>>; 3],
    max_len: usize,
}

fn parse_domains(field: &str) -> Result<BTreeSet<DomainId>, String> {
    let domains = field
        .split(',')
        .map(|d| d.trim().parse::<DomainId>().map_err(|e| format!("domain {d:?}: {e}")))
        .collect::<Result<BTreeSet<_>, _>>()?;
    if domains.is_empty() {
        return Err("no domains".into());
    }
    Ok(domains)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // smaller root wins so the representative is order independent
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
    }
}

fn term_key(rules: &TextRules, language: Language, term: &str) -> Vec<String> {
    rules.analyze(term, language).lemmas().map(String::from).collect()
}

impl TermDb {
    /// Parses the TSV form `concept_id, lang, term, preferred, domains, source`.
    pub fn parse(text: &str, path: &Path, rules: &TextRules) -> Result<Self> {
        let mut entries: BTreeMap<u32, ConceptEntry> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |message: String| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            let [id, lang, term, preferred, domains, source] = cols[..] else {
                return Err(fail(format!("expected 6 tab-separated columns, found {}", cols.len())));
            };
            let id: u32 = id.trim().parse().map_err(|e| fail(format!("concept id: {e}")))?;
            let language: Language = lang.parse().map_err(fail)?;
            let term = term.trim();
            if term.is_empty() {
                return Err(fail("empty term".into()));
            }
            let preferred = match preferred.trim() {
                "0" => false,
                "1" => true,
                other => return Err(fail(format!("preferred flag must be 0 or 1, found {other:?}"))),
            };
            let domains = parse_domains(domains).map_err(fail)?;
            let entry = entries.entry(id).or_insert_with(|| ConceptEntry {
                concept_id: id,
                terms: Vec::new(),
                domains: BTreeSet::new(),
                source: source.trim().to_string(),
            });
            entry.terms.push(ConceptTerm {
                language,
                term: term.to_string(),
                preferred,
            });
            entry.domains.extend(domains);
        }
        Ok(Self::from_entries(entries.into_values(), rules))
    }

    pub fn load(path: &Path, rules: &TextRules) -> Result<Self> {
        Self::parse(&error::read_to_string(path)?, path, rules)
    }

    /// Builds the database, merging concepts that share a term and a domain.
    pub fn from_entries(entries: impl IntoIterator<Item = ConceptEntry>, rules: &TextRules) -> Self {
        let mut entries: Vec<ConceptEntry> = entries.into_iter().collect();
        entries.sort_by_key(|e| e.concept_id);

        let mut uf = UnionFind((0..entries.len()).collect());
        let mut first_seen: HashMap<(Language, Vec<String>, DomainId), usize> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            for t in &e.terms {
                let key = term_key(rules, t.language, &t.term);
                if key.is_empty() {
                    continue;
                }
                for &d in &e.domains {
                    match first_seen.entry((t.language, key.clone(), d)) {
                        std::collections::hash_map::Entry::Occupied(o) => uf.union(*o.get(), i),
                        std::collections::hash_map::Entry::Vacant(v) => {
                            v.insert(i);
                        }
                    }
                }
            }
        }

        let mut merged: BTreeMap<usize, (ConceptEntry, BTreeSet<&str>)> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            let root = uf.find(i);
            let (target, sources) = merged.entry(root).or_insert_with(|| {
                let empty = ConceptEntry {
                    concept_id: entries[root].concept_id,
                    terms: Vec::new(),
                    domains: BTreeSet::new(),
                    source: String::new(),
                };
                (empty, BTreeSet::new())
            });
            target.terms.extend(e.terms.iter().cloned());
            target.domains.extend(e.domains.iter().copied());
            sources.insert(&e.source);
        }

        let mut db = TermDb::default();
        for (mut concept, sources) in merged.into_values() {
            concept.source = sources.into_iter().collect::<Vec<_>>().join("+");
            concept.terms.sort();
            concept.terms.dedup();
            for t in &concept.terms {
                let key = term_key(rules, t.language, &t.term);
                if key.is_empty() {
                    continue;
                }
                db.max_len = db.max_len.max(key.len());
                let ids = db.lookup[t.language.index()].entry(key).or_default();
                if !ids.contains(&concept.concept_id) {
                    ids.push(concept.concept_id);
                }
            }
            db.concepts.insert(concept.concept_id, concept);
        }
        db
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptEntry> {
        self.concepts.values()
    }

    pub fn concept(&self, id: u32) -> Option<&ConceptEntry> {
        self.concepts.get(&id)
    }

    pub fn candidates(&self, language: Language, lemmas: &[String]) -> &[u32] {
        self.lookup[language.index()].get(lemmas).map_or(&[], Vec::as_slice)
    }

    pub fn max_term_len(&self) -> usize {
        self.max_len
    }
}

/// IPC class prefix (3 characters) to domains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainMap {
    map: BTreeMap<String, BTreeSet<DomainId>>,
}

impl DomainMap {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut map: BTreeMap<String, BTreeSet<DomainId>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |message: String| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let Some((prefix, domains)) = line.split_once('\t') else {
                return Err(fail("expected `ipc_prefix <TAB> domains`".into()));
            };
            let prefix = prefix.trim();
            if prefix.chars().count() != 3 {
                return Err(fail(format!("IPC prefix {prefix:?} is not 3 characters")));
            }
            map.entry(prefix.to_string())
                .or_default()
                .extend(parse_domains(domains).map_err(fail)?);
        }
        Ok(DomainMap { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&error::read_to_string(path)?, path)
    }

    pub fn insert(&mut self, prefix: &str, domains: impl IntoIterator<Item = DomainId>) {
        self.map.entry(prefix.to_string()).or_default().extend(domains);
    }

    pub fn to_tsv(&self) -> String {
        self.map
            .iter()
            .map(|(p, d)| {
                let ds: Vec<String> = d.iter().map(u32::to_string).collect();
                format!("{p}\t{}\n", ds.join(","))
            })
            .collect()
    }

    /// Union of the domains of each class's 3-character prefix.
    pub fn domains_for(&self, classes: &[String]) -> BTreeSet<DomainId> {
        classes
            .iter()
            .filter_map(|c| c.get(..3))
            .filter_map(|p| self.map.get(p))
            .flatten()
            .copied()
            .collect()
    }
}

/// Longest-match concept lookup over lemmas with domain disambiguation.
/// A matched term is emitted only when exactly one candidate concept shares a
/// domain with the patent; otherwise it is skipped.
pub fn tag_concepts(stream: &TokenStream, classes: &[String], db: &TermDb, domains: &DomainMap) -> Vec<u32> {
    let patent_domains = domains.domains_for(classes);
    let lemmas: Vec<String> = stream.lemmas().map(String::from).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lemmas.len() {
        let longest = db.max_term_len().min(lemmas.len() - i);
        let hit = (1..=longest).rev().find_map(|n| {
            let ids = db.candidates(stream.language, &lemmas[i..i + n]);
            (!ids.is_empty()).then_some((n, ids))
        });
        match hit {
            Some((n, ids)) => {
                let surviving: Vec<u32> = ids
                    .iter()
                    .copied()
                    .filter(|id| db.concept(*id).is_some_and(|c| !c.domains.is_disjoint(&patent_domains)))
                    .collect();
                if let [only] = surviving[..] {
                    out.push(only);
                }
                i += n;
            }
            None => i += 1,
        }
    }
    out
}
