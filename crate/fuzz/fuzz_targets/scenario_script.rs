#![no_main]

use libfuzzer_sys::fuzz_target;
use oblivion_core::services::Scenario;

fuzz_target!(|text: &str| {
    if let Ok(scenario) = Scenario::parse(text) {
        assert_eq!(Scenario::parse(&scenario.to_script()).unwrap(), scenario);
    }
});
