//! Rule-based candidate extraction.
//!
//! Produces person/location/organization candidates from runs of
//! capitalized words, date candidates from `DD.MM.YYYY` and `N years old`
//! phrases, numeric tokens, and optional gazetteer hits for known phrases.

use std::sync::OnceLock;

use regex::Regex;

use super::{normalize, Article};
use crate::credentials::parse_date;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Person,
    Location,
    Organization,
    Date,
    Number,
    Other,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Person => "person",
            Self::Location => "location",
            Self::Organization => "organization",
            Self::Date => "date",
            Self::Number => "number",
            Self::Other => "other",
        }
    }
}

/// A span of the article body, in byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Candidate {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub category: Category,
}

pub trait EntityExtractor {
    fn extract(&self, article: &Article) -> Vec<Candidate>;
}

const SENTENCE_STARTERS: &[&str] = &[
    "A", "An", "And", "As", "At", "But", "By", "During", "For", "From", "He", "Her", "His",
    "However", "I", "If", "In", "It", "Its", "Last", "Meanwhile", "Mr", "Mrs", "Ms", "Dr", "Next",
    "Of", "On", "Our", "She", "So", "Some", "That", "The", "Their", "There", "These", "They",
    "This", "Those", "To", "Today", "We", "When", "While", "With", "Yesterday",
];

const NAME_CONNECTORS: &[&str] = &["of", "von", "van", "der", "de", "du", "da", "la", "del"];

const LOCATIONS: &[&str] = &[
    "Germany", "France", "Italy", "Spain", "Portugal", "Austria", "Switzerland", "Poland",
    "Netherlands", "Belgium", "Denmark", "Sweden", "Norway", "Finland", "Ireland", "Greece",
    "Britain", "United Kingdom", "United States", "Canada", "Mexico", "Brazil", "Argentina",
    "China", "Japan", "India", "Russia", "Turkey", "Egypt", "Kenya", "Nigeria", "Australia",
    "New Zealand", "Europe", "Asia", "Africa", "Berlin", "Munich", "Hamburg", "Cologne",
    "Frankfurt", "Saarbruecken", "Paris", "Lyon", "Rome", "Milan", "Madrid", "Lisbon", "Vienna",
    "Zurich", "Geneva", "Warsaw", "Amsterdam", "Brussels", "Copenhagen", "Stockholm", "Oslo",
    "Helsinki", "Dublin", "Athens", "London", "Manchester", "New York", "Washington", "Toronto",
    "Tokyo", "Beijing", "Shanghai", "Delhi", "Mumbai", "Moscow", "Istanbul", "Cairo", "Nairobi",
    "Lagos", "Sydney", "Auckland", "Brasilia", "Buenos Aires",
];

const ORG_MARKERS: &[&str] = &[
    "Agency", "AG", "Association", "Bank", "Commission", "Company", "Corp", "Council", "Court",
    "GmbH", "Group", "Inc", "Institute", "Ltd", "Ministry", "Parliament", "Party", "Reuters",
    "Union", "University", "Foundation", "Authority", "Police", "Hospital", "Club",
];

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{L}(?:[\p{L}\p{M}'’\-]*[\p{L}\p{M}])?").unwrap())
}

fn date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d{2}\.\d{2}\.\d{4}\b").unwrap())
}

fn age_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(\d{1,3})[ \-]years?[ \-]old\b").unwrap())
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+(?:[.,]\d+)*\b").unwrap())
}

/// Parses the age out of an `N years old` phrase.
pub fn parse_age_phrase(text: &str) -> Option<u32> {
    let caps = age_re().captures(text)?;
    if caps.get(0)?.as_str().len() != text.len() {
        return None;
    }
    caps[1].parse().ok()
}

#[derive(Debug, Clone, Default)]
pub struct RuleBasedExtractor {
    gazetteer: Vec<String>,
}

impl RuleBasedExtractor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds phrases that are reported wherever they occur, regardless of
    /// capitalization, as [`Category::Other`].
    pub fn with_gazetteer<I, S>(mut self, phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for p in phrases {
            let n = normalize(p.as_ref());
            if !n.is_empty() && !self.gazetteer.contains(&n) {
                self.gazetteer.push(n);
            }
        }
        self.gazetteer.sort();
        self
    }
}

impl EntityExtractor for RuleBasedExtractor {
    fn extract(&self, article: &Article) -> Vec<Candidate> {
        let body = article.body();
        let mut out = capitalized_runs(body);
        out.extend(dates_and_numbers(body));
        if !self.gazetteer.is_empty() {
            out.extend(gazetteer_hits(body, &self.gazetteer));
        }
        out.sort_by(|a, b| (a.start, a.category, a.end).cmp(&(b.start, b.category, b.end)));
        out
    }
}

/// Candidates from the default extractor without a gazetteer.
pub fn extract_candidates(article: &Article) -> Vec<Candidate> {
    RuleBasedExtractor::new().extract(article)
}

fn is_sentence_initial(body: &str, start: usize) -> bool {
    for c in body[..start].chars().rev() {
        match c {
            '\n' | '.' | '!' | '?' | ':' => return true,
            c if c.is_whitespace() => continue,
            '"' | '\'' | '“' | '‘' | '(' | '«' | '„' => continue,
            _ => return false,
        }
    }
    true
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

fn gap_is_inline_space(gap: &str) -> bool {
    !gap.is_empty() && gap.chars().all(|c| c == ' ' || c == '\t')
}

fn classify(words: &[&str]) -> Category {
    let phrase = words.join(" ");
    if LOCATIONS.contains(&phrase.as_str()) {
        Category::Location
    } else if words.iter().any(|w| ORG_MARKERS.contains(w)) {
        Category::Organization
    } else if (2..=4).contains(&words.len()) {
        Category::Person
    } else {
        Category::Other
    }
}

fn capitalized_runs(body: &str) -> Vec<Candidate> {
    let words: Vec<(usize, usize)> = word_re()
        .find_iter(body)
        .map(|m| (m.start(), m.end()))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let (start, end) = words[i];
        if !is_capitalized(&body[start..end]) {
            i += 1;
            continue;
        }
        // Extend across inline spaces, allowing lowercase connectors between
        // two capitalized words.
        let mut run = vec![i];
        let mut j = i + 1;
        while j < words.len() {
            let gap = &body[words[j - 1].1..words[j].0];
            if !gap_is_inline_space(gap) {
                break;
            }
            let w = &body[words[j].0..words[j].1];
            if is_capitalized(w) {
                run.push(j);
                j += 1;
            } else if NAME_CONNECTORS.contains(&w)
                && j + 1 < words.len()
                && gap_is_inline_space(&body[words[j].1..words[j + 1].0])
                && is_capitalized(&body[words[j + 1].0..words[j + 1].1])
            {
                run.push(j);
                run.push(j + 1);
                j += 2;
            } else {
                break;
            }
        }
        i = j;

        let mut first = 0;
        if is_sentence_initial(body, start) {
            let w = &body[words[run[0]].0..words[run[0]].1];
            if run.len() == 1 {
                continue;
            }
            if SENTENCE_STARTERS.contains(&w) {
                first = 1;
            }
        }
        let run = &run[first..];
        if run.is_empty() || !is_capitalized(&body[words[run[0]].0..words[run[0]].1]) {
            continue;
        }
        let s = words[run[0]].0;
        let mut e = words[*run.last().unwrap()].1;
        for suffix in ["'s", "’s"] {
            if body[s..e].ends_with(suffix) && e - suffix.len() > s {
                e -= suffix.len();
            }
        }
        let text = &body[s..e];
        let parts: Vec<&str> = text.split(' ').filter(|p| !p.is_empty()).collect();
        out.push(Candidate {
            start: s,
            end: e,
            text: text.to_owned(),
            category: classify(&parts),
        });
    }
    out
}

fn dates_and_numbers(body: &str) -> Vec<Candidate> {
    let mut taken: Vec<(usize, usize)> = Vec::new();
    let mut out = Vec::new();
    for m in date_re().find_iter(body) {
        if parse_date(m.as_str()).is_ok() {
            taken.push((m.start(), m.end()));
            out.push(Candidate {
                start: m.start(),
                end: m.end(),
                text: m.as_str().to_owned(),
                category: Category::Date,
            });
        }
    }
    for m in age_re().find_iter(body) {
        taken.push((m.start(), m.end()));
        out.push(Candidate {
            start: m.start(),
            end: m.end(),
            text: m.as_str().to_owned(),
            category: Category::Date,
        });
    }
    for m in number_re().find_iter(body) {
        if taken.iter().any(|&(s, e)| m.start() < e && s < m.end()) {
            continue;
        }
        out.push(Candidate {
            start: m.start(),
            end: m.end(),
            text: m.as_str().to_owned(),
            category: Category::Number,
        });
    }
    out
}

/// Lower-cased, whitespace-collapsed view of the body with a byte map back
/// to the original offsets.
struct SearchView {
    text: String,
    origin_start: Vec<usize>,
    origin_end: Vec<usize>,
}

impl SearchView {
    fn new(body: &str) -> Self {
        let mut text = String::with_capacity(body.len());
        let mut origin_start = Vec::with_capacity(body.len());
        let mut origin_end = Vec::with_capacity(body.len());
        let mut in_space = false;
        for (off, c) in body.char_indices() {
            if c.is_whitespace() {
                if !in_space {
                    text.push(' ');
                    origin_start.push(off);
                    origin_end.push(off + c.len_utf8());
                }
                in_space = true;
                continue;
            }
            in_space = false;
            for lc in c.to_lowercase() {
                for _ in 0..lc.len_utf8() {
                    origin_start.push(off);
                    origin_end.push(off + c.len_utf8());
                }
                text.push(lc);
            }
        }
        Self {
            text,
            origin_start,
            origin_end,
        }
    }
}

fn gazetteer_hits(body: &str, phrases: &[String]) -> Vec<Candidate> {
    let view = SearchView::new(body);
    let mut hits: Vec<(usize, usize)> = Vec::new();
    for phrase in phrases {
        for (vs, m) in view.text.match_indices(phrase.as_str()) {
            let start = view.origin_start[vs];
            let end = view.origin_end[vs + m.len() - 1];
            let before_ok = body[..start].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
            let after_ok = body[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
            if before_ok && after_ok {
                hits.push((start, end));
            }
        }
    }
    // Earliest start wins, then the longest phrase; overlaps are dropped.
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut out: Vec<Candidate> = Vec::new();
    let mut last_end = 0;
    for (s, e) in hits {
        if !out.is_empty() && s < last_end {
            continue;
        }
        last_end = e;
        out.push(Candidate {
            start: s,
            end: e,
            text: body[s..e].to_owned(),
            category: Category::Other,
        });
    }
    out
}
