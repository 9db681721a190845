#![no_main]

use libfuzzer_sys::fuzz_target;
use priorart::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = Config::from_toml(text, &[]) {
        assert_eq!(
            Config::from_toml(&config.to_toml(), &[]).expect("rendered config loads"),
            config
        );
    }
});
