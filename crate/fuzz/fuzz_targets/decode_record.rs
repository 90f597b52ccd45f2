#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Anything that decodes must re-encode to the identical bytes.
    if let Ok(record) = honeynet::capture::decode_record(data) {
        assert_eq!(honeynet::capture::encode_record(&record), data);
    }
});
