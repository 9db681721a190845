#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use priorart::terminology::DomainMap;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = DomainMap::parse(text, Path::new("fuzz.tsv")) {
        let back = DomainMap::parse(&map.to_tsv(), Path::new("fuzz.tsv")).expect("rendered map parses");
        assert_eq!(back.to_tsv(), map.to_tsv());
    }
});
