#![no_main]

use libfuzzer_sys::fuzz_target;
use priorart::eval::Qrels;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(q) = Qrels::parse(text) {
        let rendered = q.to_text();
        assert_eq!(
            Qrels::parse(&rendered).expect("rendered qrels parse").to_text(),
            rendered
        );
    }
});
