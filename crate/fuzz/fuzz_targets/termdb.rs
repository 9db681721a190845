#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use priorart::analyze::TextRules;
use priorart::terminology::TermDb;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(db) = TermDb::parse(text, Path::new("fuzz.tsv"), &TextRules::default()) {
        for entry in db.concepts() {
            assert!(db.concept(entry.concept_id).is_some());
        }
    }
});
