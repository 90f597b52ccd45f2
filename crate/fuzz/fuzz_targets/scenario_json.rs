#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(scenario) = serde_json::from_str::<honeynet::simnet::Scenario>(text) {
            let cfg = honeynet::netmodel::NetConfig {
                honeynet_subnet: "10.1.0.0/26".parse().unwrap(),
                collector_ip: "192.0.2.9".parse().unwrap(),
                capture_port: 1101,
                honeypot_ips: ["10.1.0.5".parse().unwrap(), "10.1.0.6".parse().unwrap()]
                    .into_iter()
                    .collect(),
            };
            let _ = scenario.validate(&cfg, &[]);
        }
    }
});
