#![no_main]

use libfuzzer_sys::fuzz_target;
use oblivion_core::credentials::{decode_attribute, encode_attribute, SignedAttribute};

fuzz_target!(|data: &[u8]| {
    if let Ok(signed) = SignedAttribute::decode(data) {
        assert_eq!(SignedAttribute::decode(&signed.encode()).unwrap(), signed);
    }
    if let Ok(attr) = decode_attribute(data) {
        assert_eq!(decode_attribute(&encode_attribute(&attr)).unwrap(), attr);
    }
});
