#![no_main]

use libfuzzer_sys::fuzz_target;
use priorart::index::TermIndex;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = TermIndex::from_bytes(data) {
        let _ = index.audit();
        assert_eq!(
            TermIndex::from_bytes(&index.to_bytes())
                .expect("re-encoded index")
                .to_bytes(),
            index.to_bytes()
        );
    }
});
