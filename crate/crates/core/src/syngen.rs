//! Seeded synthetic patent collections with terminology, judgments and topics.
//!
//! Patents belong to technology clusters. Each cluster owns a slice of a concept
//! vocabulary rendered through parallel EN/FR/DE pseudo-word lexicons, so the same
//! concept reads differently per language. Citations point only to earlier
//! patents, mostly within the citing patent's cluster, and the citing patent
//! inherits part of its cited patents' focus concepts. Judgments are the
//! description citations (grade 1), hidden examiner citations (X/Y grade 2, A
//! grade 1), near-duplicate sources and divisional parents (grade 2).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::analyze::LanguageRules;
use crate::corpus::{serialize_record, LangText, Language, PatentRecord, PublicationVersion, VersionKind};
use crate::error::{io_err, Error, Result};
use crate::eval::Qrels;
use crate::terminology::DomainMap;

/// Language shares of the generated collection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangMix {
    pub en: f64,
    pub de: f64,
    pub fr: f64,
}

impl Default for LangMix {
    fn default() -> Self {
        LangMix {
            en: 0.69,
            de: 0.23,
            fr: 0.07,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub n_patents: usize,
    pub n_clusters: usize,
    /// Number of concepts across all clusters.
    pub vocab_size: usize,
    pub lang_mix: LangMix,
    /// Mean description citations per patent.
    pub citation_density: f64,
    /// Mean hidden examiner citations per patent.
    pub examiner_citations: f64,
    pub ecla_per_cluster: usize,
    pub near_duplicate_rate: f64,
    pub divisional_rate: f64,
    /// Share of patents with a granted (B1) version carrying three-language
    /// title and claims.
    pub granted_rate: f64,
    pub description_units: usize,
    /// Share of concepts listed in the terminology file.
    pub termdb_coverage: f64,
    pub n_topics: usize,
    pub test_fraction: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_patents: 3000,
            n_clusters: 30,
            vocab_size: 3000,
            lang_mix: LangMix::default(),
            citation_density: 3.0,
            examiner_citations: 2.0,
            ecla_per_cluster: 4,
            near_duplicate_rate: 0.03,
            divisional_rate: 0.03,
            granted_rate: 0.5,
            description_units: 100,
            termdb_coverage: 0.8,
            n_topics: 600,
            test_fraction: 0.5,
        }
    }
}

const GENERAL_SHARE: f64 = 0.1;
const MIN_CLUSTER_CONCEPTS: usize = 10;
const FOCUS_SIZE: usize = 12;
/// Citations only reach patents published at least this long before the
/// citing patent's publication.
const PRIORITY_LAG_DAYS: u64 = 30;
const GRANT_DELAY_DAYS: u64 = 700;
const ID_BASE: usize = 1_000_000;

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_patents == 0 || self.n_clusters == 0 {
            return fail("n_patents and n_clusters must be positive".into());
        }
        if self.n_clusters > self.n_patents {
            return fail(format!(
                "{} clusters cannot be filled by {} patents",
                self.n_clusters, self.n_patents
            ));
        }
        if self.n_patents > 9_000_000 {
            return fail("at most 9,000,000 patents fit the id scheme".into());
        }
        let general = (self.vocab_size as f64 * GENERAL_SHARE).ceil() as usize;
        if self.vocab_size < general + self.n_clusters * MIN_CLUSTER_CONCEPTS {
            return fail(format!(
                "vocab_size {} leaves fewer than {MIN_CLUSTER_CONCEPTS} concepts per cluster",
                self.vocab_size
            ));
        }
        if self.ecla_per_cluster == 0 {
            return fail("ecla_per_cluster must be positive".into());
        }
        if self.n_clusters > 8 * 99 {
            return fail("at most 792 clusters are supported".into());
        }
        let mix = [self.lang_mix.en, self.lang_mix.de, self.lang_mix.fr];
        if mix.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || mix.iter().sum::<f64>() <= 0.0 {
            return fail("lang_mix shares must be non-negative with a positive sum".into());
        }
        for (name, v) in [
            ("near_duplicate_rate", self.near_duplicate_rate),
            ("divisional_rate", self.divisional_rate),
            ("granted_rate", self.granted_rate),
            ("termdb_coverage", self.termdb_coverage),
            ("test_fraction", self.test_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        if self.near_duplicate_rate + self.divisional_rate > 1.0 {
            return fail("near_duplicate_rate + divisional_rate exceeds 1".into());
        }
        for (name, v) in [
            ("citation_density", self.citation_density),
            ("examiner_citations", self.examiner_citations),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.description_units == 0 {
            return fail("description_units must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// `topic_id<TAB>train|test` lines.
pub fn parse_topics(text: &str) -> Result<Vec<(String, Split)>, (usize, String)> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, split) = line
            .split_once('\t')
            .ok_or((i + 1, "expected topic<TAB>split".to_string()))?;
        let split = match split.trim() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err((i + 1, format!("split must be train or test, got {other:?}"))),
        };
        if !seen.insert(id.to_string()) {
            return Err((i + 1, format!("topic {id} listed twice")));
        }
        out.push((id.to_string(), split));
    }
    Ok(out)
}

pub fn write_topics(topics: &[(String, Split)]) -> String {
    let mut out = String::new();
    for (id, split) in topics {
        let _ = writeln!(out, "{id}\t{}", split.name());
    }
    out
}

/// Generator output, each field holding one file's contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub corpus: String,
    pub termdb: String,
    pub domains: String,
    pub qrels: String,
    pub topics: String,
}

impl Generated {
    pub const FILES: [&'static str; 5] = ["corpus.jsonl", "termdb.tsv", "domains.tsv", "qrels.txt", "topics.tsv"];

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, body) in
            Self::FILES
                .iter()
                .zip([&self.corpus, &self.termdb, &self.domains, &self.qrels, &self.topics])
        {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

struct Concept {
    /// Words per language, indexed by [`Language::index`].
    surfaces: [Vec<String>; 3],
    cluster: Option<usize>,
}

const VOWELS: [&str; 4] = ["a", "i", "o", "u"];

fn onsets(lang: Language) -> &'static [&'static str] {
    match lang {
        Language::En => &["b", "d", "g", "k", "l", "m", "p", "t"],
        Language::Fr => &["ch", "qu", "r", "s", "v", "n", "j"],
        Language::De => &["sch", "kr", "w", "h", "z", "st", "pf"],
    }
}

/// Onset-vowel syllables; the final vowel keeps every suffix rule from firing.
fn pseudo_word(rng: &mut ChaCha8Rng, lang: Language) -> String {
    let syllables = rng.random_range(2..=3);
    (0..syllables)
        .map(|_| format!("{}{}", onsets(lang).choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
        .collect()
}

struct Lexicon {
    concepts: Vec<Concept>,
    general: Vec<usize>,
    by_cluster: Vec<Vec<usize>>,
}

fn build_lexicon(params: &GenParams, rng: &mut ChaCha8Rng) -> Lexicon {
    let rules = Language::ALL.map(LanguageRules::builtin);
    let mut used: [HashSet<String>; 3] = Default::default();
    let mut fresh = |rng: &mut ChaCha8Rng, lang: Language| loop {
        let w = pseudo_word(rng, lang);
        if !rules[lang.index()].is_stopword(&w) && used[lang.index()].insert(w.clone()) {
            return w;
        }
    };
    let n_general = (params.vocab_size as f64 * GENERAL_SHARE).ceil() as usize;
    let mut concepts: Vec<Concept> = Vec::with_capacity(params.vocab_size);
    let mut general = Vec::new();
    let mut by_cluster = vec![Vec::new(); params.n_clusters];
    for idx in 0..params.vocab_size {
        let cluster = (idx >= n_general).then(|| (idx - n_general) % params.n_clusters);
        let arity = if rng.random_bool(0.2) { 2 } else { 1 };
        let mut surfaces: [Vec<String>; 3] = Default::default();
        for lang in Language::ALL {
            surfaces[lang.index()] = (0..arity).map(|_| fresh(rng, lang)).collect();
        }
        // Occasional English homonym of a one-word concept from another cluster.
        if arity == 1 && cluster.is_some() && rng.random_bool(0.03) {
            let donors: Vec<usize> = (n_general..idx)
                .filter(|&d| concepts[d].cluster != cluster && concepts[d].surfaces[0].len() == 1)
                .collect();
            if let Some(&d) = donors.choose(rng) {
                surfaces[Language::En.index()] = concepts[d].surfaces[Language::En.index()].clone();
            }
        }
        match cluster {
            Some(c) => by_cluster[c].push(idx),
            None => general.push(idx),
        }
        concepts.push(Concept { surfaces, cluster });
    }
    Lexicon {
        concepts,
        general,
        by_cluster,
    }
}

fn function_words(lang: Language) -> &'static [&'static str] {
    match lang {
        Language::En => &["the", "of", "and", "a", "in", "with", "for", "to"],
        Language::Fr => &["le", "la", "de", "et", "du", "des", "pour", "dans"],
        Language::De => &["der", "die", "und", "das", "mit", "von", "für", "zu"],
    }
}

fn citation_lead(lang: Language) -> &'static str {
    match lang {
        Language::En => "as described in",
        Language::Fr => "comme décrit dans",
        Language::De => "wie beschrieben in",
    }
}

fn render(units: &[usize], lang: Language, lex: &Lexicon, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    let mut since_stop = 0;
    for &u in units {
        if !out.is_empty() {
            out.push(' ');
        }
        if rng.random_bool(0.4) {
            out.push_str(function_words(lang).choose(rng).unwrap());
            out.push(' ');
        }
        out.push_str(&lex.concepts[u].surfaces[lang.index()].join(" "));
        since_stop += 1;
        if since_stop >= 8 && rng.random_bool(0.25) {
            out.push('.');
            since_stop = 0;
        }
    }
    if !out.is_empty() && !out.ends_with('.') {
        out.push('.');
    }
    out
}

fn spaced_id(ordinal: usize) -> String {
    let digits = format!("{:07}", ID_BASE + ordinal);
    format!("EP {} {} {}", &digits[..1], &digits[1..4], &digits[4..])
}

pub fn patent_id(ordinal: usize) -> String {
    format!("EP{:07}", ID_BASE + ordinal)
}

#[derive(Default)]
struct Units {
    title: Vec<usize>,
    abstract_text: Vec<usize>,
    claims: Vec<usize>,
    description: Vec<usize>,
}

struct Draft {
    cluster: usize,
    language: Language,
    date: NaiveDate,
    priority_date: NaiveDate,
    priority_ids: Vec<String>,
    applicant: usize,
    inventors: Vec<usize>,
    ipc: Vec<String>,
    ecla: Vec<String>,
    focus: Vec<usize>,
    units: Units,
    desc_cites: Vec<usize>,
    judgments: Vec<(usize, u8)>,
}

fn cluster_ipc(c: usize) -> String {
    const SECTIONS: [char; 8] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H'];
    let letter = (b'B' + ((c / 8) % 24) as u8) as char;
    format!("{}{:02}{}", SECTIONS[c % 8], 1 + c / 8, letter)
}

fn cluster_ecla(c: usize, k: usize) -> String {
    format!("{}{}/00", cluster_ipc(c), k + 1)
}

/// Exact per-language counts by largest remainder, in [`Language::ALL`] order.
pub fn language_counts(n: usize, mix: &LangMix) -> [usize; 3] {
    let shares: [f64; 3] = Language::ALL.map(|l| match l {
        Language::En => mix.en,
        Language::Fr => mix.fr,
        Language::De => mix.de,
    });
    let total: f64 = shares.iter().sum();
    let exact = shares.map(|s| n as f64 * s / total);
    let mut counts = exact.map(|e| e.floor() as usize);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let missing = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    counts
}

const FIRST_NAMES: [&str; 8] = ["Anna", "Marc", "Jonas", "Claire", "Pierre", "Eva", "Tom", "Lena"];
const MARKS: [&str; 6] = ["GmbH", "Inc.", "S.A.", "Ltd.", "AG", "Corporation"];
const TITLES: [&str; 3] = ["Dr.", "Prof.", "Dipl.-Ing."];

struct People {
    applicants: Vec<String>,
    inventors: Vec<Vec<String>>,
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

fn build_people(params: &GenParams, rng: &mut ChaCha8Rng) -> People {
    let n = params.n_clusters * 5;
    let mut taken = HashSet::new();
    let mut name = |rng: &mut ChaCha8Rng| loop {
        let w = capitalize(&pseudo_word(rng, Language::En));
        if taken.insert(w.clone()) {
            return w;
        }
    };
    let applicants = (0..n).map(|_| name(rng)).collect();
    let inventors = (0..n)
        .map(|_| {
            (0..4)
                .map(|_| format!("{} {}", FIRST_NAMES.choose(rng).unwrap(), name(rng)))
                .collect()
        })
        .collect();
    People { applicants, inventors }
}

struct Generator<'a> {
    params: &'a GenParams,
    lex: Lexicon,
    rng: ChaCha8Rng,
    base: NaiveDate,
    drafts: Vec<Draft>,
    by_cluster: Vec<Vec<usize>>,
}

impl Generator<'_> {
    fn sample_units(&mut self, n: usize, focus: &[usize], cluster: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                let r: f64 = self.rng.random();
                let pool: &[usize] = if r < 0.5 && !focus.is_empty() {
                    focus
                } else if r < 0.85 {
                    &self.lex.by_cluster[cluster]
                } else {
                    &self.lex.general
                };
                *pool.choose(&mut self.rng).unwrap()
            })
            .collect()
    }

    fn document_units(&mut self, focus: &[usize], cluster: usize) -> Units {
        let title = (0..3).map(|_| *focus.choose(&mut self.rng).unwrap()).collect();
        Units {
            title,
            abstract_text: self.sample_units(15, focus, cluster),
            claims: self.sample_units(25, focus, cluster),
            description: self.sample_units(self.params.description_units, focus, cluster),
        }
    }

    /// Number of patents published on or before `date`, limited to those before `limit`.
    fn eligible(&self, date: NaiveDate, limit: usize) -> usize {
        let days = (date - self.base).num_days();
        if days < 0 {
            0
        } else {
            (days as usize + 1).min(limit)
        }
    }

    /// An earlier patent, from `cluster` with probability 0.85.
    fn pick_earlier(&mut self, cluster: usize, eligible: usize, exclude: &[usize]) -> Option<usize> {
        if eligible == 0 {
            return None;
        }
        for _ in 0..8 {
            let same = &self.by_cluster[cluster];
            let prefix = same.partition_point(|&k| k < eligible);
            let pick = if prefix > 0 && self.rng.random_bool(0.85) {
                same[self.rng.random_range(0..prefix)]
            } else {
                self.rng.random_range(0..eligible)
            };
            if !exclude.contains(&pick) {
                return Some(pick);
            }
        }
        None
    }

    fn poisson(&mut self, mean: f64) -> usize {
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).map_or(0, |p| p.sample(&mut self.rng) as usize)
    }

    fn patent(&mut self, i: usize, language: Language) {
        let date = self.base + Days::new(i as u64);
        let roll: f64 = self.rng.random();
        let eligible_now = self.eligible(date - Days::new(PRIORITY_LAG_DAYS), i);
        let near_dup = roll < self.params.near_duplicate_rate && eligible_now > 0;
        let divisional = !near_dup && roll < self.params.near_duplicate_rate + self.params.divisional_rate && i > 0;

        let (cluster, parent) = if near_dup {
            let src = self.rng.random_range(0..eligible_now);
            (self.drafts[src].cluster, Some(src))
        } else if divisional {
            let src = self.rng.random_range(0..i);
            (self.drafts[src].cluster, Some(src))
        } else if i < self.params.n_clusters {
            (i, None)
        } else {
            (self.rng.random_range(0..self.params.n_clusters), None)
        };

        let (priority_date, priority_ids) = match (divisional, parent) {
            (true, Some(p)) => {
                let mut ids = self.drafts[p].priority_ids.clone();
                ids.push(patent_id(p));
                (self.drafts[p].priority_date, ids)
            }
            _ => (date - Days::new(PRIORITY_LAG_DAYS), vec![format!("PR{:07}", i)]),
        };
        let eligible = self.eligible(priority_date, i);

        let mut judgments: Vec<(usize, u8)> = Vec::new();
        let mut desc_cites = Vec::new();
        let mut parents = Vec::new();
        if let Some(p) = parent {
            judgments.push((p, 2));
            parents.push(p);
        }
        if !near_dup {
            for _ in 0..self.poisson(self.params.citation_density) {
                let taken: Vec<usize> = desc_cites.iter().chain(&parents).copied().collect();
                if let Some(k) = self.pick_earlier(cluster, eligible, &taken) {
                    desc_cites.push(k);
                    judgments.push((k, 1));
                }
            }
            for _ in 0..self.poisson(self.params.examiner_citations) {
                let taken: Vec<usize> = judgments.iter().map(|j| j.0).collect();
                if let Some(k) = self.pick_earlier(cluster, eligible, &taken) {
                    let grade = if self.rng.random_bool(0.6) { 2 } else { 1 };
                    judgments.push((k, grade));
                    parents.push(k);
                }
            }
        }
        parents.extend(&desc_cites);

        let (applicant, inventors) = match (divisional, parent) {
            (true, Some(p)) => (self.drafts[p].applicant, self.drafts[p].inventors.clone()),
            _ => {
                let a = cluster * 5 + self.rng.random_range(0..5);
                let n = self.rng.random_range(1..=3);
                let mut inv: Vec<usize> = (0..4).collect();
                inv.shuffle(&mut self.rng);
                inv.truncate(n);
                inv.sort_unstable();
                (a, inv)
            }
        };

        let mut focus: Vec<usize> = Vec::new();
        if near_dup {
            focus = self.drafts[parent.unwrap()].focus.clone();
        } else {
            for &p in &parents {
                let mut inherited = self.drafts[p].focus.clone();
                inherited.shuffle(&mut self.rng);
                focus.extend(inherited.into_iter().take(4));
            }
            if divisional {
                focus = self.drafts[parent.unwrap()].focus.clone();
            }
            while focus.len() < FOCUS_SIZE {
                let pool = &self.lex.by_cluster[cluster];
                focus.push(*pool.choose(&mut self.rng).unwrap());
            }
            focus.truncate(FOCUS_SIZE * 2);
        }

        let units = if near_dup {
            let src = &self.drafts[parent.unwrap()].units;
            let copied = Units {
                title: src.title.clone(),
                abstract_text: src.abstract_text.clone(),
                claims: src.claims.clone(),
                description: src.description.clone(),
            };
            let mutate = |g: &mut Self, v: Vec<usize>| -> Vec<usize> {
                v.into_iter()
                    .map(|u| {
                        if g.rng.random_bool(0.15) {
                            *g.lex.by_cluster[cluster].choose(&mut g.rng).unwrap()
                        } else {
                            u
                        }
                    })
                    .collect()
            };
            Units {
                title: copied.title,
                abstract_text: mutate(self, copied.abstract_text),
                claims: mutate(self, copied.claims),
                description: mutate(self, copied.description),
            }
        } else {
            self.document_units(&focus, cluster)
        };

        let ipc_main = cluster_ipc(cluster);
        let mut ipc = vec![ipc_main];
        if self.rng.random_bool(0.2) {
            let other = self.rng.random_range(0..self.params.n_clusters);
            let code = cluster_ipc(other);
            if !ipc.contains(&code) {
                ipc.push(code);
            }
        }
        let inherited_ecla = parents
            .iter()
            .find(|&&p| self.drafts[p].cluster == cluster)
            .map(|&p| self.drafts[p].ecla[0].clone());
        let primary = match inherited_ecla {
            Some(e) if near_dup || divisional || self.rng.random_bool(0.6) => e,
            _ => cluster_ecla(cluster, self.rng.random_range(0..self.params.ecla_per_cluster)),
        };
        let mut ecla = vec![primary];
        if self.rng.random_bool(0.3) {
            let extra = cluster_ecla(cluster, self.rng.random_range(0..self.params.ecla_per_cluster));
            if !ecla.contains(&extra) {
                ecla.push(extra);
            }
        }

        self.by_cluster[cluster].push(i);
        self.drafts.push(Draft {
            cluster,
            language,
            date,
            priority_date,
            priority_ids,
            applicant,
            inventors,
            ipc,
            ecla,
            focus,
            units,
            desc_cites,
            judgments,
        });
    }

    fn record(&mut self, i: usize, people: &People) -> PatentRecord {
        let d = &self.drafts[i];
        let lang = d.language;
        let (title_units, abstract_units, claim_units) = (
            d.units.title.clone(),
            d.units.abstract_text.clone(),
            d.units.claims.clone(),
        );
        let desc_units = d.units.description.clone();
        let desc_cites = d.desc_cites.clone();

        let mut paragraphs: Vec<String> = desc_units
            .chunks(20)
            .map(|chunk| render(chunk, lang, &self.lex, &mut self.rng))
            .collect();
        for &k in &desc_cites {
            let mut cited_focus = self.drafts[k].focus.clone();
            cited_focus.shuffle(&mut self.rng);
            cited_focus.truncate(6);
            let body = render(&cited_focus, lang, &self.lex, &mut self.rng);
            let at = self.rng.random_range(0..=paragraphs.len());
            paragraphs.insert(at, format!("{} {} A1, {}", citation_lead(lang), spaced_id(k), body));
        }
        let description = paragraphs.join("\n");

        let mut a_title = LangText::default();
        a_title.set(
            lang,
            render(&title_units, lang, &self.lex, &mut self.rng)
                .trim_end_matches('.')
                .to_string(),
        );
        let mut a_abstract = LangText::default();
        a_abstract.set(lang, render(&abstract_units, lang, &self.lex, &mut self.rng));
        let mut a_claims = LangText::default();
        a_claims.set(lang, render(&claim_units, lang, &self.lex, &mut self.rng));

        let d = &self.drafts[i];
        let kind = if self.rng.random_bool(0.1) {
            VersionKind::A2
        } else {
            VersionKind::A1
        };
        let mut versions = vec![PublicationVersion {
            kind,
            date: d.date,
            title: a_title,
            abstract_text: a_abstract,
            claims: a_claims,
            description: description.clone(),
        }];
        if self.rng.random_bool(self.params.granted_rate) {
            let mut title = LangText::default();
            let mut claims = LangText::default();
            for l in Language::ALL {
                title.set(
                    l,
                    render(&title_units, l, &self.lex, &mut self.rng)
                        .trim_end_matches('.')
                        .to_string(),
                );
                claims.set(l, render(&claim_units, l, &self.lex, &mut self.rng));
            }
            versions.push(PublicationVersion {
                kind: VersionKind::B1,
                date: d.date + Days::new(GRANT_DELAY_DAYS),
                title,
                abstract_text: LangText::default(),
                claims,
                description,
            });
        }

        let d = &self.drafts[i];
        let mark = MARKS[(d.applicant + i) % MARKS.len()];
        let applicants = vec![format!("{} {}", people.applicants[d.applicant], mark)];
        let inventors = d
            .inventors
            .iter()
            .map(|&k| {
                let name = &people.inventors[d.applicant][k];
                if self.rng.random_bool(0.3) {
                    format!("{} {}", TITLES.choose(&mut self.rng).unwrap(), name)
                } else {
                    name.clone()
                }
            })
            .collect();
        let d = &self.drafts[i];
        PatentRecord {
            id: patent_id(i),
            versions,
            language: lang,
            applicants,
            inventors,
            ipc_classes: d.ipc.clone(),
            ecla_classes: d.ecla.clone(),
            priority_ids: d.priority_ids.clone(),
            cited_ids: Vec::new(),
            priority_date: d.priority_date,
        }
    }
}

/// Generates a collection deterministically from `seed`.
pub fn generate(seed: u64, params: &GenParams) -> Result<Generated> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = build_lexicon(params, &mut rng);
    let people = build_people(params, &mut rng);

    let counts = language_counts(params.n_patents, &params.lang_mix);
    let mut languages: Vec<Language> = Language::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&l, n)| std::iter::repeat_n(l, n))
        .collect();
    languages.shuffle(&mut rng);

    let mut g = Generator {
        params,
        lex,
        rng,
        base: NaiveDate::from_ymd_opt(1985, 1, 1).expect("valid date"),
        drafts: Vec::with_capacity(params.n_patents),
        by_cluster: vec![Vec::new(); params.n_clusters],
    };
    for (i, &lang) in languages.iter().enumerate() {
        g.patent(i, lang);
    }

    let mut corpus = String::new();
    for i in 0..params.n_patents {
        let record = g.record(i, &people);
        corpus.push_str(&serialize_record(&record));
        corpus.push('\n');
    }

    let mut qrels = Qrels::new();
    for (i, d) in g.drafts.iter().enumerate() {
        for &(k, grade) in &d.judgments {
            qrels.insert(&patent_id(i), &patent_id(k), grade);
        }
    }

    // Topics come from the later part of the collection, where citation history exists.
    let mut candidates: Vec<usize> = (params.n_patents / 4..params.n_patents)
        .filter(|&i| !g.drafts[i].judgments.is_empty())
        .collect();
    candidates.shuffle(&mut g.rng);
    if candidates.len() < params.n_topics {
        log::warn!(
            "only {} topic candidates for {} requested",
            candidates.len(),
            params.n_topics
        );
    }
    candidates.truncate(params.n_topics);
    let n_test = (candidates.len() as f64 * params.test_fraction).round() as usize;
    let mut topics: Vec<(String, Split)> = candidates
        .iter()
        .enumerate()
        .map(|(rank, &i)| (patent_id(i), if rank < n_test { Split::Test } else { Split::Train }))
        .collect();
    topics.sort();
    let topic_ids: BTreeSet<String> = topics.iter().map(|t| t.0.clone()).collect();

    Ok(Generated {
        corpus,
        termdb: termdb_tsv(&g.lex, params, &mut g.rng),
        domains: domains_tsv(params),
        qrels: qrels.restrict(&topic_ids).to_text(),
        topics: write_topics(&topics),
    })
}

fn termdb_tsv(lex: &Lexicon, params: &GenParams, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    let mut aliases = Vec::new();
    for (idx, c) in lex.concepts.iter().enumerate() {
        if !rng.random_bool(params.termdb_coverage) {
            continue;
        }
        let id = idx + 1;
        let domain = c.cluster.map_or(0, |k| k + 1);
        for lang in Language::ALL {
            let term = c.surfaces[lang.index()].join(" ");
            let _ = writeln!(out, "{id}\t{}\t{term}\t1\t{domain}\tsyn", lang.code());
        }
        if rng.random_bool(0.05) {
            aliases.push((c.surfaces[Language::En.index()].join(" "), domain));
        }
    }
    // Alias entries share term and domain with their concept, so they merge into it.
    for (k, (term, domain)) in aliases.into_iter().enumerate() {
        let _ = writeln!(out, "{}\ten\t{term}\t0\t{domain}\talt", params.vocab_size + 1 + k);
    }
    out
}

fn domains_tsv(params: &GenParams) -> String {
    let mut map: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    for c in 0..params.n_clusters {
        let prefix: String = cluster_ipc(c).chars().take(3).collect();
        map.entry(prefix).or_default().extend([0, c as u32 + 1]);
    }
    let mut domains = DomainMap::default();
    for (prefix, ids) in map {
        domains.insert(&prefix, ids);
    }
    domains.to_tsv()
}
