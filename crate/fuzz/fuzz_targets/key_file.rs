#![no_main]

use libfuzzer_sys::fuzz_target;
use oblivion_core::rsa_fdh::KeyFile;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = KeyFile::decode(data) {
        assert_eq!(KeyFile::decode(&file.encode()).unwrap(), file);
        let _ = file.into_verification_key();
    }
});
