#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The rule-file parser takes attacker-adjacent text and must never
    // panic; errors are positioned values.
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = honeynet::rulelang::parse_ruleset(text);
    }
});
