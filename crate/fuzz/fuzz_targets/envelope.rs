#![no_main]

use libfuzzer_sys::fuzz_target;
use oblivion_core::services::Envelope;

fuzz_target!(|data: &[u8]| {
    if let Ok(env) = Envelope::decode(data) {
        assert_eq!(Envelope::decode(&env.encode()).unwrap(), env);
    }
});
