//! Tokenization, rule-based lemmatization, phrase mining and the five index analyzers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::Language;
use crate::error::{self, Error, Result};
use crate::index::MetaDocument;
use crate::terminology::{tag_concepts, DomainMap, TermDb};

/// Multiset of index terms.
pub type TermBag = BTreeMap<String, u32>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub position: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub language: Language,
    /// Positions strictly increasing.
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.lemma.as_str())
    }
}

fn is_number(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_ascii_digit())
}

/// Splits on whitespace and punctuation. Hyphens survive between alphanumerics,
/// commas and periods only between digits, so `3,5-dimethyl` stays whole.
pub fn tokenize(text: &str, language: Language) -> TokenStream {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, tokens: &mut Vec<Token>| {
        if !current.is_empty() {
            let surface = std::mem::take(current);
            tokens.push(Token {
                lemma: surface.to_lowercase(),
                surface,
                position: tokens.len() as u32,
            });
        }
    };
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
            continue;
        }
        let prev = if i > 0 { chars.get(i - 1) } else { None };
        let next = chars.get(i + 1);
        let joins = match c {
            '-' => {
                !current.is_empty()
                    && prev.is_some_and(|p| p.is_alphanumeric())
                    && next.is_some_and(|n| n.is_alphanumeric())
            }
            ',' | '.' => {
                !current.is_empty()
                    && prev.is_some_and(|p| p.is_ascii_digit())
                    && next.is_some_and(|n| n.is_ascii_digit())
            }
            _ => false,
        };
        if joins {
            current.push(c);
        } else {
            flush(&mut current, &mut tokens);
        }
    }
    flush(&mut current, &mut tokens);
    TokenStream { language, tokens }
}

/// Stopword list plus suffix-stripping table for one language.
#[derive(Debug, Clone)]
pub struct LanguageRules {
    stopwords: HashSet<String>,
    /// Longest suffix first.
    suffixes: Vec<(String, String)>,
    min_stem: usize,
}

impl LanguageRules {
    pub const MIN_STEM: usize = 3;

    pub fn parse(stopwords: &str, suffixes: &str) -> Result<Self, String> {
        let stopwords = stopwords
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        let mut rules = Vec::new();
        for (n, line) in suffixes.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let suffix = parts.next().unwrap_or("").trim();
            if suffix.is_empty() {
                return Err(format!("line {}: empty suffix", n + 1));
            }
            let replacement = parts.next().unwrap_or("").trim();
            rules.push((suffix.to_lowercase(), replacement.to_lowercase()));
        }
        rules.sort_by(|a, b| {
            b.0.chars()
                .count()
                .cmp(&a.0.chars().count())
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(LanguageRules {
            stopwords,
            suffixes: rules,
            min_stem: Self::MIN_STEM,
        })
    }

    pub fn builtin(language: Language) -> Self {
        let (stop, suffix) = match language {
            Language::En => (include_str!("../data/en.stop"), include_str!("../data/en.suffix")),
            Language::Fr => (include_str!("../data/fr.stop"), include_str!("../data/fr.suffix")),
            Language::De => (include_str!("../data/de.stop"), include_str!("../data/de.suffix")),
        };
        Self::parse(stop, suffix).expect("builtin rule files are well formed")
    }

    pub fn load(stopwords: &Path, suffixes: &Path) -> Result<Self> {
        let stop = error::read_to_string(stopwords)?;
        let suffix = error::read_to_string(suffixes)?;
        Self::parse(&stop, &suffix).map_err(|message| Error::Format {
            path: suffixes.to_path_buf(),
            line: 0,
            message,
        })
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    /// Applies the longest matching suffix rule; the word is left alone when that
    /// rule would leave a stem shorter than the minimum.
    pub fn stem(&self, word: &str) -> String {
        if is_number(word) {
            return word.to_string();
        }
        let Some((suffix, replacement)) = self.suffixes.iter().find(|(s, _)| word.ends_with(s.as_str())) else {
            return word.to_string();
        };
        let stem = &word[..word.len() - suffix.len()];
        if stem.chars().count() < self.min_stem {
            return word.to_string();
        }
        format!("{stem}{replacement}")
    }
}

#[derive(Debug, Clone)]
pub struct TextRules {
    rules: [LanguageRules; 3],
}

impl Default for TextRules {
    fn default() -> Self {
        TextRules {
            rules: Language::ALL.map(LanguageRules::builtin),
        }
    }
}

impl TextRules {
    pub fn new(en: LanguageRules, fr: LanguageRules, de: LanguageRules) -> Self {
        TextRules { rules: [en, fr, de] }
    }

    pub fn get(&self, language: Language) -> &LanguageRules {
        &self.rules[language.index()]
    }

    /// Tokenize then lemmatize.
    pub fn analyze(&self, text: &str, language: Language) -> TokenStream {
        lemmatize(tokenize(text, language), self.get(language))
    }
}

/// Lowercases, drops stopwords and stems. Numbers pass through untouched.
/// Positions of surviving tokens are kept, so gaps mark removed words.
pub fn lemmatize(stream: TokenStream, rules: &LanguageRules) -> TokenStream {
    let tokens = stream
        .tokens
        .into_iter()
        .filter_map(|t| {
            let lower = t.surface.to_lowercase();
            if is_number(&lower) {
                return Some(Token { lemma: lower, ..t });
            }
            if rules.is_stopword(&lower) {
                return None;
            }
            let lemma = rules.stem(&lower);
            if rules.is_stopword(&lemma) {
                return None;
            }
            Some(Token { lemma, ..t })
        })
        .collect();
    TokenStream {
        language: stream.language,
        tokens,
    }
}

// ---------------------------------------------------------------------------
// Phrases

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhraseParams {
    pub min_count: u32,
    pub dice_threshold: f64,
    /// Longest candidate, in words.
    pub max_len: usize,
}

impl Default for PhraseParams {
    fn default() -> Self {
        PhraseParams {
            min_count: 3,
            dice_threshold: 0.25,
            max_len: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phrase {
    pub lemmas: Vec<String>,
    pub dice: f64,
    pub count: u64,
}

impl Phrase {
    pub fn term(&self) -> String {
        self.lemmas.join("_")
    }
}

/// Generalized Dice coefficient `n·f(w1..wn) / Σ f(wi)`; for bigrams `2·f(ab)/(f(a)+f(b))`.
pub fn dice(ngram_count: u64, part_counts: &[u64]) -> f64 {
    let total: u64 = part_counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    part_counts.len() as f64 * ngram_count as f64 / total as f64
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseVocab {
    phrases: BTreeMap<Vec<String>, Phrase>,
    max_len: usize,
}

impl PhraseVocab {
    pub fn from_phrases(phrases: impl IntoIterator<Item = Phrase>) -> Self {
        let phrases: BTreeMap<_, _> = phrases.into_iter().map(|p| (p.lemmas.clone(), p)).collect();
        let max_len = phrases.keys().map(Vec::len).max().unwrap_or(0);
        PhraseVocab { phrases, max_len }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn get(&self, lemmas: &[String]) -> Option<&Phrase> {
        self.phrases.get(lemmas)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Phrase> {
        self.phrases.values()
    }

    /// Every vocabulary phrase occurring over consecutive positions; overlaps allowed.
    pub fn phrase_terms(&self, stream: &TokenStream) -> Vec<String> {
        let toks = &stream.tokens;
        let mut out = Vec::new();
        for start in 0..toks.len() {
            let mut key: Vec<String> = vec![toks[start].lemma.clone()];
            for next in start + 1..toks.len().min(start + self.max_len) {
                if toks[next].position != toks[next - 1].position + 1 {
                    break;
                }
                key.push(toks[next].lemma.clone());
                if self.phrases.contains_key(&key) {
                    out.push(key.join("_"));
                }
            }
        }
        out
    }

    /// TSV lines `lemmas(space separated) <TAB> count <TAB> dice`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for p in self.phrases.values() {
            out.push_str(&format!("{}\t{}\t{}\n", p.lemmas.join(" "), p.count, p.dice));
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self, (usize, String)> {
        let mut phrases = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [lemmas, count, dice] = cols[..] else {
                return Err((i + 1, format!("expected 3 columns, found {}", cols.len())));
            };
            let lemmas: Vec<String> = lemmas.split(' ').map(str::to_string).collect();
            if lemmas.len() < 2 || lemmas.iter().any(String::is_empty) {
                return Err((i + 1, "phrase needs at least two words".into()));
            }
            let count = count.parse().map_err(|e| (i + 1, format!("count: {e}")))?;
            let dice: f64 = dice.parse().map_err(|e| (i + 1, format!("dice: {e}")))?;
            if !(0.0..=1.0).contains(&dice) {
                return Err((i + 1, format!("dice {dice} outside [0,1]")));
            }
            phrases.push(Phrase { lemmas, dice, count });
        }
        Ok(Self::from_phrases(phrases))
    }
}

/// Mines bigram and trigram collocations of adjacent non-numeric lemmas.
pub fn extract_phrases<'a>(streams: impl IntoIterator<Item = &'a TokenStream>, params: &PhraseParams) -> PhraseVocab {
    let mut unigrams: HashMap<String, u64> = HashMap::new();
    let mut ngrams: HashMap<Vec<String>, u64> = HashMap::new();
    for stream in streams {
        let toks = &stream.tokens;
        for t in toks {
            *unigrams.entry(t.lemma.clone()).or_default() += 1;
        }
        for start in 0..toks.len() {
            if is_number(&toks[start].lemma) {
                continue;
            }
            let mut key = vec![toks[start].lemma.clone()];
            for next in start + 1..toks.len().min(start + params.max_len) {
                if toks[next].position != toks[next - 1].position + 1 || is_number(&toks[next].lemma) {
                    break;
                }
                key.push(toks[next].lemma.clone());
                *ngrams.entry(key.clone()).or_default() += 1;
            }
        }
    }
    let phrases = ngrams.into_iter().filter_map(|(lemmas, count)| {
        if count < u64::from(params.min_count) {
            return None;
        }
        let parts: Vec<u64> = lemmas.iter().map(|l| unigrams[l]).collect();
        let dice = dice(count, &parts).min(1.0);
        (dice >= params.dice_threshold).then_some(Phrase { lemmas, dice, count })
    });
    PhraseVocab::from_phrases(phrases)
}

// ---------------------------------------------------------------------------
// Analyzers

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnalyzerKind {
    LemmaEn,
    LemmaFr,
    LemmaDe,
    PhraseEn,
    Concept,
}

impl AnalyzerKind {
    pub const ALL: [AnalyzerKind; 5] = [
        AnalyzerKind::LemmaEn,
        AnalyzerKind::LemmaFr,
        AnalyzerKind::LemmaDe,
        AnalyzerKind::PhraseEn,
        AnalyzerKind::Concept,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalyzerKind::LemmaEn => "lemma-en",
            AnalyzerKind::LemmaFr => "lemma-fr",
            AnalyzerKind::LemmaDe => "lemma-de",
            AnalyzerKind::PhraseEn => "phrase-en",
            AnalyzerKind::Concept => "concept",
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn lemma(language: Language) -> Self {
        match language {
            Language::En => AnalyzerKind::LemmaEn,
            Language::Fr => AnalyzerKind::LemmaFr,
            Language::De => AnalyzerKind::LemmaDe,
        }
    }
}

impl fmt::Display for AnalyzerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnalyzerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown analyzer {s:?}")))
    }
}

/// Everything needed to turn a meta-document into index terms.
#[derive(Debug, Clone, Default)]
pub struct Analyzer {
    pub rules: TextRules,
    pub phrases: PhraseVocab,
    pub concepts: Option<(TermDb, DomainMap)>,
    /// Languages whose text feeds the concept analyzer.
    pub concept_languages: Vec<Language>,
}

impl Analyzer {
    pub fn new(rules: TextRules) -> Self {
        Analyzer {
            rules,
            phrases: PhraseVocab::default(),
            concepts: None,
            concept_languages: Language::ALL.to_vec(),
        }
    }

    pub fn analyze_to_terms(&self, doc: &MetaDocument, kind: AnalyzerKind) -> Result<TermBag> {
        let mut bag = TermBag::new();
        let mut add = |term: String| *bag.entry(term).or_insert(0) += 1;
        match kind {
            AnalyzerKind::LemmaEn | AnalyzerKind::LemmaFr | AnalyzerKind::LemmaDe => {
                let lang = match kind {
                    AnalyzerKind::LemmaEn => Language::En,
                    AnalyzerKind::LemmaFr => Language::Fr,
                    _ => Language::De,
                };
                for text in doc.texts(lang) {
                    for t in self.rules.analyze(text, lang).tokens {
                        add(t.lemma);
                    }
                }
            }
            AnalyzerKind::PhraseEn => {
                for text in doc.texts(Language::En) {
                    let stream = self.rules.analyze(text, Language::En);
                    self.phrases.phrase_terms(&stream).into_iter().for_each(&mut add);
                }
            }
            AnalyzerKind::Concept => {
                let (db, domains) = self
                    .concepts
                    .as_ref()
                    .ok_or_else(|| Error::Config("concept analyzer needs a terminology database".into()))?;
                for &lang in &self.concept_languages {
                    for text in doc.texts(lang) {
                        let stream = self.rules.analyze(text, lang);
                        for id in tag_concepts(&stream, &doc.classes, db, domains) {
                            add(concept_term(id));
                        }
                    }
                }
            }
        }
        Ok(bag)
    }
}

pub fn concept_term(id: u32) -> String {
    format!("C{id}")
}
