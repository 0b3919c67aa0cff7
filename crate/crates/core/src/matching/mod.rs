//! Personal-information identification.
//!
//! An article is tagged in four stages: candidate extraction, attribute
//! matching (exact, synonym, age-derived), picture matching, and a
//! disambiguation decision over the resulting [`MatchReport`]. Each stage
//! sits behind a trait so a stronger extractor, picture matcher or
//! disambiguator can replace the deterministic defaults here.

mod article;
mod extract;
mod synonyms;

use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate};
use unicode_normalization::UnicodeNormalization;

pub use article::{Article, ArticleImage, FixtureError};
pub use extract::{
    extract_candidates, parse_age_phrase, Candidate, Category, EntityExtractor, RuleBasedExtractor,
};
pub use synonyms::{SynonymError, SynonymTable};

use crate::credentials::{Attribute, AttributeKind, FULL_NAME, ID_PICTURE};
use crate::hash::ContentHash;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// NFC, lower case, single spaces, trimmed. Idempotent.
pub fn normalize(s: &str) -> String {
    let lower = s.nfc().collect::<String>().to_lowercase();
    lower
        .nfc()
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whole years between `dob` and `on`. A 29 February birthday comes of age
/// on 1 March in common years.
pub fn age_on(dob: NaiveDate, on: NaiveDate) -> Option<u32> {
    if on < dob {
        return None;
    }
    let mut years = on.year() - dob.year();
    if (on.month(), on.day()) < (dob.month(), dob.day()) {
        years -= 1;
    }
    u32::try_from(years).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchKind {
    Exact = 0x01,
    Synonym = 0x02,
    AgeDerived = 0x03,
    ImageDigest = 0x04,
}

impl MatchKind {
    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0x01 => Some(Self::Exact),
            0x02 => Some(Self::Synonym),
            0x03 => Some(Self::AgeDerived),
            0x04 => Some(Self::ImageDigest),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Synonym => "synonym",
            Self::AgeDerived => "age-derived",
            Self::ImageDigest => "image-digest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchLocation {
    Body { start: usize, end: usize },
    Image(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeMatch {
    pub attribute_name: String,
    pub kind: MatchKind,
    pub location: MatchLocation,
    pub matched_text: String,
}

/// The tags that justify an ownership claim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchReport {
    pub article_digest: ContentHash,
    /// Names of the attributes the match was attempted for.
    pub claimed: Vec<String>,
    pub matches: Vec<AttributeMatch>,
    pub warnings: Vec<String>,
}

impl MatchReport {
    pub fn matched_names(&self) -> BTreeSet<&str> {
        self.matches.iter().map(|m| m.attribute_name.as_str()).collect()
    }

    pub fn match_for(&self, name: &str) -> Option<&AttributeMatch> {
        self.matches.iter().find(|m| m.attribute_name == name)
    }

    /// Checks that every span indexes `article` and reproduces its text,
    /// and that every matched name was claimed.
    pub fn is_consistent_with(&self, article: &Article) -> bool {
        if self.article_digest != article.content_digest() {
            return false;
        }
        self.matches.iter().all(|m| {
            self.claimed.contains(&m.attribute_name)
                && match &m.location {
                    MatchLocation::Body { start, end } => article
                        .body()
                        .get(*start..*end)
                        .is_some_and(|t| t == m.matched_text),
                    MatchLocation::Image(id) => article.image(id).is_some() && &m.matched_text == id,
                }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Accepted difference in years between a stated age and the age derived
    /// from date of birth and publication date.
    pub age_tolerance: u32,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { age_tolerance: 0 }
    }
}

/// Matches text and date attributes against extracted candidates.
///
/// Each attribute receives at most one match: the first exact candidate,
/// else the first synonym candidate, else (for dates) the first age phrase
/// consistent with the publication date.
pub fn match_attributes(
    article_digest: ContentHash,
    candidates: &[Candidate],
    attributes: &[Attribute],
    synonyms: &SynonymTable,
    publication_date: Option<NaiveDate>,
    config: &MatchConfig,
) -> MatchReport {
    let mut report = MatchReport {
        article_digest,
        claimed: attributes.iter().map(|a| a.name().to_owned()).collect(),
        matches: Vec::new(),
        warnings: Vec::new(),
    };
    let normalized: Vec<String> = candidates.iter().map(|c| normalize(&c.text)).collect();
    let body_match = |c: &Candidate, name: &str, kind| AttributeMatch {
        attribute_name: name.to_owned(),
        kind,
        location: MatchLocation::Body {
            start: c.start,
            end: c.end,
        },
        matched_text: c.text.clone(),
    };

    for attr in attributes {
        let Some(value) = attr.value_str() else {
            continue;
        };
        let value_norm = normalize(value);
        if let Some(i) = normalized.iter().position(|n| *n == value_norm) {
            report.matches.push(body_match(&candidates[i], attr.name(), MatchKind::Exact));
            continue;
        }
        let equivalents = synonyms.equivalents(value);
        if let Some(i) = normalized
            .iter()
            .position(|n| *n != value_norm && equivalents.contains(n))
        {
            report.matches.push(body_match(&candidates[i], attr.name(), MatchKind::Synonym));
            continue;
        }
        if attr.kind() != AttributeKind::Date {
            continue;
        }
        let Some(dob) = attr.date_value() else {
            continue;
        };
        let Some(published) = publication_date else {
            report.warnings.push(format!(
                "no publication date; age heuristic skipped for `{}`",
                attr.name()
            ));
            continue;
        };
        let Some(age) = age_on(dob, published) else {
            continue;
        };
        let hit = candidates.iter().find(|c| {
            c.category == Category::Date
                && parse_age_phrase(&c.text).is_some_and(|n| n.abs_diff(age) <= config.age_tolerance)
        });
        if let Some(c) = hit {
            report.matches.push(body_match(c, attr.name(), MatchKind::AgeDerived));
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct PictureMatch {
    pub image_id: String,
    pub confidence: f64,
}

pub trait PictureMatcher {
    fn match_picture(&self, images: &[ArticleImage], picture: &Attribute) -> Option<PictureMatch>;
}

/// Stand-in for face recognition: byte-identical images only.
#[derive(Debug, Clone, Copy, Default)]
pub struct DigestPictureMatcher;

impl PictureMatcher for DigestPictureMatcher {
    fn match_picture(&self, images: &[ArticleImage], picture: &Attribute) -> Option<PictureMatch> {
        match_picture(images, picture)
    }
}

pub fn match_picture(images: &[ArticleImage], picture: &Attribute) -> Option<PictureMatch> {
    if picture.kind() != AttributeKind::Picture {
        return None;
    }
    let wanted = ContentHash::of(picture.value());
    images
        .iter()
        .find(|img| ContentHash::of(&img.bytes) == wanted)
        .map(|img| PictureMatch {
            image_id: img.id.clone(),
            confidence: 1.0,
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Affectedness {
    Affected,
    NotAffected,
}

pub trait Disambiguator {
    fn decide(&self, report: &MatchReport) -> Affectedness;
}

/// Ratio of matched to claimed attributes, gated on an identifying attribute.
///
/// This is a simple stand-in for an entity-linking confidence score. It does
/// not look at context, so two people sharing a name and nationality are not
/// told apart. Plug a stronger model in through [`Disambiguator`].
#[derive(Debug, Clone, PartialEq)]
pub struct RatioDisambiguator {
    pub threshold: f64,
    pub identifying: Vec<String>,
}

impl Default for RatioDisambiguator {
    fn default() -> Self {
        Self::with_threshold(DEFAULT_THRESHOLD)
    }
}

impl RatioDisambiguator {
    pub fn with_threshold(threshold: f64) -> Self {
        Self {
            threshold,
            identifying: vec![FULL_NAME.to_owned(), ID_PICTURE.to_owned()],
        }
    }

    pub fn score(report: &MatchReport) -> f64 {
        let claimed: BTreeSet<&str> = report.claimed.iter().map(String::as_str).collect();
        if claimed.is_empty() {
            return 0.0;
        }
        let matched = report.matched_names().intersection(&claimed).count();
        matched as f64 / claimed.len() as f64
    }
}

impl Disambiguator for RatioDisambiguator {
    fn decide(&self, report: &MatchReport) -> Affectedness {
        let matched = report.matched_names();
        let identified = self.identifying.iter().any(|n| matched.contains(n.as_str()));
        if identified && Self::score(report) >= self.threshold {
            Affectedness::Affected
        } else {
            Affectedness::NotAffected
        }
    }
}

/// Decides with the default [`RatioDisambiguator`] at `threshold`.
pub fn disambiguate(report: &MatchReport, threshold: f64) -> Affectedness {
    RatioDisambiguator::with_threshold(threshold).decide(report)
}

/// The full tagging pipeline with pluggable stages.
pub struct Matcher {
    pub synonyms: SynonymTable,
    pub config: MatchConfig,
    pub pictures: Box<dyn PictureMatcher + Send + Sync>,
}

impl Matcher {
    pub fn new(synonyms: SynonymTable) -> Self {
        Self {
            synonyms,
            config: MatchConfig::default(),
            pictures: Box::new(DigestPictureMatcher),
        }
    }

    /// Extracts candidates (with the synonym phrases and the attribute
    /// values as gazetteer) and matches every attribute, pictures included.
    pub fn tag(&self, article: &Article, attributes: &[Attribute]) -> MatchReport {
        let extractor = RuleBasedExtractor::new()
            .with_gazetteer(self.synonyms.phrases())
            .with_gazetteer(attributes.iter().filter_map(Attribute::value_str));
        let candidates = extractor.extract(article);
        let mut report = match_attributes(
            article.content_digest(),
            &candidates,
            attributes,
            &self.synonyms,
            article.publication_date(),
            &self.config,
        );
        for attr in attributes.iter().filter(|a| a.kind() == AttributeKind::Picture) {
            if let Some(m) = self.pictures.match_picture(article.images(), attr) {
                report.matches.push(AttributeMatch {
                    attribute_name: attr.name().to_owned(),
                    kind: MatchKind::ImageDigest,
                    location: MatchLocation::Image(m.image_id.clone()),
                    matched_text: m.image_id,
                });
            }
        }
        report
    }
}
