#![no_main]

use libfuzzer_sys::fuzz_target;
use oblivion_core::credentials::{format_attribute_list, parse_attribute_list};

fuzz_target!(|text: &str| {
    if let Ok(attrs) = parse_attribute_list(text) {
        assert_eq!(parse_attribute_list(&format_attribute_list(&attrs).unwrap()).unwrap(), attrs);
    }
});
