#![no_main]

use std::io::Cursor;

use libfuzzer_sys::fuzz_target;
use oblivion_core::protocol::wire::{read_frame, write_frame};

fuzz_target!(|data: &[u8]| {
    let mut cursor = Cursor::new(data);
    while let Ok(Some(frame)) = read_frame(&mut cursor) {
        let mut out = Vec::new();
        write_frame(&mut out, &frame).unwrap();
        assert_eq!(read_frame(&mut Cursor::new(&out)).unwrap(), Some(frame));
    }
});
