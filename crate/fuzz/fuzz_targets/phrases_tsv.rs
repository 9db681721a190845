#![no_main]

use libfuzzer_sys::fuzz_target;
use priorart::analyze::PhraseVocab;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(vocab) = PhraseVocab::parse_tsv(text) {
        let rendered = vocab.to_tsv();
        assert_eq!(
            PhraseVocab::parse_tsv(&rendered)
                .expect("rendered vocabulary parses")
                .to_tsv(),
            rendered
        );
    }
});
