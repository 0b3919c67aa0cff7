#![no_main]

use libfuzzer_sys::fuzz_target;
use oblivion_core::matching::SynonymTable;

fuzz_target!(|text: &str| {
    if let Ok(table) = SynonymTable::parse(text) {
        for phrase in table.phrases() {
            let equivalents = table.equivalents(phrase);
            assert!(equivalents.contains(phrase));
            for other in &equivalents {
                assert!(table.are_synonyms(other, phrase));
            }
        }
    }
});
