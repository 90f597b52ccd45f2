#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        if let Ok(packet) = serde_json::from_str::<honeynet::netmodel::Packet>(line) {
            let _ = packet.validate();
            let _ = honeynet::netmodel::verify_checksums(&packet);
        }
    }
});
