//! Deterministic synthetic news corpus.
//!
//! Articles run from 1 K to 10 K words with a mean near 1.9 K and carry a
//! few dozen to several hundred named entities, so matching and signing
//! costs scale like they do on real news text.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::credentials::{Attribute, CURRENT_RESIDENCE, DATE_OF_BIRTH, FULL_NAME, NATIONALITY, PLACE_OF_BIRTH};
use crate::matching::Article;

pub const DEFAULT_ARTICLES: usize = 150;
pub const MIN_WORDS: usize = 1_000;
pub const MAX_WORDS: usize = 10_000;

const FILLER: &[&str] = &[
    "the", "council", "said", "on", "a", "plan", "to", "expand", "local", "services", "and", "residents", "were",
    "asked", "for", "their", "views", "after", "months", "of", "debate", "over", "new", "housing", "in", "district",
    "officials", "expect", "work", "begin", "next", "year", "while", "critics", "argue", "that", "costs", "have",
    "risen", "sharply", "since", "last", "spring", "according", "figures", "published", "by", "ministry", "report",
    "also", "notes", "an", "increase", "visitors", "during", "summer", "when", "market", "opens", "its", "doors",
    "weekly", "traders", "from", "surrounding", "villages", "bring", "produce", "goods", "many", "families", "rely",
    "on", "income", "with", "prices", "stable", "despite", "pressure", "regional", "economy", "which", "grew",
    "slowly", "this", "quarter", "analysts", "say", "outlook", "remains", "uncertain", "because", "demand", "abroad",
    "has", "weakened", "considerably",
];

const STARTERS: &[&str] = &["The", "In", "According", "Meanwhile", "However", "Officials", "Residents", "Critics"];

const GIVEN: &[&str] = &[
    "Anna", "Bernd", "Clara", "David", "Elena", "Felix", "Greta", "Hannes", "Ines", "Jonas", "Katrin", "Lukas",
    "Marta", "Niklas", "Olga", "Paul", "Rosa", "Stefan", "Tanja", "Uwe",
];

const FAMILY: &[&str] = &[
    "Becker", "Fischer", "Hoffmann", "Koch", "Lang", "Meier", "Neumann", "Richter", "Schulz", "Wagner", "Weber",
    "Zimmermann", "Braun", "Hartmann", "Kraus", "Vogel",
];

const PLACES: &[&str] = &[
    "Berlin", "Hamburg", "Munich", "Cologne", "Vienna", "Zurich", "Paris", "Lyon", "London", "Madrid", "Rome",
    "Brussels",
];

const ORGS: &[&str] = &["Harbour Authority", "Northern Bank", "City Council", "Rail Group", "Press Agency"];

/// Article lengths: one at the maximum, the rest `1 K + Exp(846)` words,
/// clamped to the range. The exponential mean puts the corpus mean near 1.9 K.
fn lengths(rng: &mut ChaCha20Rng, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..count)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let extra = -846.0 * u.ln();
            (MIN_WORDS + extra as usize).min(MAX_WORDS)
        })
        .collect();
    if let Some(first) = out.first_mut() {
        *first = MAX_WORDS;
    }
    if let Some(last) = out.get_mut(1) {
        *last = MIN_WORDS;
    }
    out
}

/// One sentence-sized entity mention with its word count.
fn entity(rng: &mut ChaCha20Rng) -> (String, usize) {
    let kinds = WeightedIndex::new([5, 3, 1, 1, 1]).expect("static weights");
    match kinds.sample(rng) {
        0 => (
            format!("{} {}", GIVEN.choose(rng).unwrap(), FAMILY.choose(rng).unwrap()),
            2,
        ),
        1 => ((*PLACES.choose(rng).unwrap()).to_owned(), 1),
        2 => {
            let org = ORGS.choose(rng).unwrap();
            (org.to_string(), org.split(' ').count())
        }
        3 => (
            format!(
                "{:02}.{:02}.{}",
                rng.gen_range(1..=28),
                rng.gen_range(1..=12),
                rng.gen_range(1990..=2014)
            ),
            1,
        ),
        _ => (rng.gen_range(2..=9_999).to_string(), 1),
    }
}

/// Generates a body of about `words` words. `embedded` phrases are spread
/// evenly through it, each mid-sentence.
fn body(rng: &mut ChaCha20Rng, words: usize, embedded: &[String]) -> String {
    let mut out = String::with_capacity(words * 7);
    let mut written = 0;
    let mut pending = embedded.iter().peekable();
    let per_embed = words / (embedded.len() + 1).max(1);
    let mut next_embed = per_embed;
    while written < words {
        let len = rng.gen_range(10..=22);
        out.push_str(STARTERS.choose(rng).unwrap());
        written += 1;
        for _ in 1..len {
            out.push(' ');
            if written >= next_embed && pending.peek().is_some() {
                let phrase = pending.next().unwrap();
                out.push_str("with ");
                out.push_str(phrase);
                written += 1 + phrase.split_whitespace().count();
                next_embed += per_embed;
            } else if rng.gen_bool(0.068) {
                let (text, n) = entity(rng);
                out.push_str(&text);
                written += n;
            } else {
                out.push_str(FILLER.choose(rng).unwrap());
                written += 1;
            }
        }
        out.push_str(". ");
        if rng.gen_bool(0.15) {
            out.push_str("\n\n");
        }
    }
    out.trim_end().to_owned()
}

/// `count` articles from `seed`; the same arguments give the same corpus.
pub fn generate_corpus(seed: u64, count: usize) -> Vec<Article> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    lengths(&mut rng, count)
        .into_iter()
        .enumerate()
        .map(|(i, words)| {
            let text = body(&mut rng, words, &[]);
            Article::new(format!("https://news.example.org/corpus/{i:03}"), &text, None, Vec::new())
        })
        .collect()
}

/// An article of about `words` words mentioning every text attribute value
/// of `subject`.
pub fn subject_article(seed: u64, words: usize, subject: &[Attribute]) -> Article {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let embedded: Vec<String> = subject.iter().filter_map(|a| a.value_str().map(str::to_owned)).collect();
    let text = body(&mut rng, words, &embedded);
    Article::new(format!("https://news.example.org/subject/{seed}"), &text, None, Vec::new())
}

/// A benchmark data subject with `n` text attributes, each value a phrase
/// that appears nowhere in generated filler.
pub fn bench_subject(n: usize) -> Vec<Attribute> {
    let standard = [
        (FULL_NAME, "Alice Schmidt".to_owned()),
        (NATIONALITY, "German".to_owned()),
        (DATE_OF_BIRTH, "29.07.1984".to_owned()),
        (PLACE_OF_BIRTH, "Saarbrücken".to_owned()),
        (CURRENT_RESIDENCE, "Homburg".to_owned()),
    ];
    (0..n)
        .map(|i| match standard.get(i) {
            Some((name, value)) if *name == DATE_OF_BIRTH => Attribute::date(*name, value).expect("valid date"),
            Some((name, value)) => Attribute::text(*name, value).expect("text attribute"),
            None => Attribute::text(format!("Detail {i:02}"), &format!("Marker{i:02} Quill")).expect("text attribute"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{extract_candidates, Matcher, SynonymTable};

    #[test]
    fn corpus_statistics() {
        let corpus = generate_corpus(1, DEFAULT_ARTICLES);
        assert_eq!(corpus.len(), 150);
        let words: Vec<usize> = corpus.iter().map(Article::word_count).collect();
        let mean = words.iter().sum::<usize>() as f64 / words.len() as f64;
        assert!((1_700.0..=2_100.0).contains(&mean), "mean {mean}");
        assert!(*words.iter().min().unwrap() >= 950);
        assert!(*words.iter().max().unwrap() <= 10_100);
        assert!(*words.iter().max().unwrap() >= 9_900);
        let entities: Vec<usize> = corpus.iter().map(|a| extract_candidates(a).len()).collect();
        let (lo, hi) = (*entities.iter().min().unwrap(), *entities.iter().max().unwrap());
        assert!((40..=70).contains(&lo) && (500..=650).contains(&hi), "entities {lo}..{hi}");
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = generate_corpus(9, 3);
        let b = generate_corpus(9, 3);
        assert_eq!(a, b);
        assert_ne!(a, generate_corpus(10, 3));
    }

    #[test]
    fn subject_article_matches_every_attribute() {
        let subject = bench_subject(20);
        let article = subject_article(3, 1_900, &subject);
        let report = Matcher::new(SynonymTable::new()).tag(&article, &subject);
        assert_eq!(report.matches.len(), 20, "{:?}", report.matched_names());
        assert!(report.is_consistent_with(&article));
    }
}
