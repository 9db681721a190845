#![allow(dead_code)]

use chrono::NaiveDate;
use priorart::corpus::{
    LangText, Language, NameNormalizer, PatentRecord, PatentStore, PublicationVersion, VersionKind,
};

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn id(i: usize) -> String {
    format!("EP{:07}", 1_000_000 + i)
}

/// A one-version English patent whose description is `text`.
pub fn record(id: &str, text: &str, ipc: &[&str], ecla: &[&str]) -> PatentRecord {
    PatentRecord {
        id: id.to_string(),
        versions: vec![PublicationVersion {
            kind: VersionKind::A1,
            date: date(2001, 1, 1),
            title: LangText::default(),
            abstract_text: LangText::default(),
            claims: LangText::default(),
            description: text.to_string(),
        }],
        language: Language::En,
        applicants: vec![],
        inventors: vec![],
        ipc_classes: ipc.iter().map(|s| s.to_string()).collect(),
        ecla_classes: ecla.iter().map(|s| s.to_string()).collect(),
        priority_ids: vec![],
        cited_ids: vec![],
        priority_date: date(2000, 6, 1),
    }
}

pub fn store(records: Vec<PatentRecord>) -> PatentStore {
    PatentStore::from_records(records, &NameNormalizer::default()).unwrap()
}

/// Two-syllable words ending in a vowel; none is a stopword or loses a suffix.
pub fn vocabulary(n: usize) -> Vec<String> {
    const SYL: [&str; 8] = ["ba", "di", "ko", "lu", "ma", "pi", "to", "gu"];
    SYL.iter()
        .flat_map(|a| SYL.iter().map(move |b| format!("{a}{b}")))
        .take(n)
        .collect()
}
