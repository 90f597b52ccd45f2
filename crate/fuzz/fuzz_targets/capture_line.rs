#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        if let Ok(stored) = serde_json::from_str::<honeynet::capture::StoredCaptureRecord>(line) {
            if let Some(record) = stored.to_record() {
                let _ = honeynet::capture::encode_record(&record);
            }
        }
    }
});
