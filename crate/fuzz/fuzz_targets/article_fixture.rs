#![no_main]

use libfuzzer_sys::fuzz_target;
use oblivion_core::matching::Article;
use oblivion_core::protocol::wire::{decode_article, encode_article};

fuzz_target!(|text: &str| {
    if let Ok(article) = Article::parse_fixture(text) {
        assert_eq!(Article::parse_fixture(&article.to_fixture()).unwrap(), article);
        assert_eq!(decode_article(&encode_article(&article)).unwrap(), article);
    }
});
