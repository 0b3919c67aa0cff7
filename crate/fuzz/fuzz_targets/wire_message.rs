#![no_main]

use libfuzzer_sys::fuzz_target;
use oblivion_core::protocol::wire::{decode_article, decode_report, Message};

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = Message::decode(data) {
        assert_eq!(Message::decode(&msg.encode()).unwrap(), msg);
    }
    let _ = decode_article(data);
    let _ = decode_report(data);
});
