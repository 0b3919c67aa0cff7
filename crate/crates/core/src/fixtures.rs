//! Bundled sample data: the Alice Schmidt article and a synonym table.
//!
//! The article is authored for testing. It is a reconstruction built around
//! a few known phrases ("Alice Schmidt", "30 years old", "citizen of
//! Germany") and does not reproduce any real publication.

use crate::credentials::{Attribute, DATE_OF_BIRTH, FULL_NAME, ID_PICTURE, NATIONALITY};
use crate::matching::{Article, SynonymTable};

pub const ALICE_ARTICLE: &str = include_str!("../fixtures/alice_schmidt.txt");
pub const SYNONYMS: &str = include_str!("../fixtures/synonyms.tsv");

/// Stand-in bytes for Alice's ID card photo; no bundled article embeds it.
pub const ALICE_ID_PICTURE: &[u8] = b"\x89PNG\r\n\x1a\nalice-schmidt-id-card";

pub fn alice_article() -> Article {
    Article::parse_fixture(ALICE_ARTICLE).expect("bundled article fixture parses")
}

pub fn synonyms() -> SynonymTable {
    SynonymTable::parse(SYNONYMS).expect("bundled synonym table parses")
}

/// Alice's full credential set, including the unmatched ID picture.
pub fn alice_attributes() -> Vec<Attribute> {
    vec![
        Attribute::text(FULL_NAME, "Alice Schmidt").unwrap(),
        Attribute::text(NATIONALITY, "German").unwrap(),
        Attribute::date(DATE_OF_BIRTH, "29.07.1984").unwrap(),
        Attribute::picture(ID_PICTURE, ALICE_ID_PICTURE.to_vec()).unwrap(),
    ]
}
