#![no_main]

use libfuzzer_sys::fuzz_target;
use priorart::corpus::{parse_record, serialize_record};

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(record) = parse_record(line) {
        // Accepted records reach a fixed point after one round trip.
        let once = serialize_record(&record);
        let again = parse_record(&once).expect("serialized record parses");
        assert_eq!(again, record);
        assert_eq!(serialize_record(&again), once);
    }
});
