#![no_main]

use libfuzzer_sys::fuzz_target;
use priorart::retrieve::{parse_run, write_run};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lists) = parse_run(text) {
        let rendered = write_run(&lists);
        let back = parse_run(&rendered).expect("rendered run parses");
        assert_eq!(write_run(&back), rendered);
    }
});
