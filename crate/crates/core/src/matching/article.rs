use base64::Engine as _;
use chrono::NaiveDate;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::codec::Encoder;
use crate::credentials::{parse_date, DATE_FORMAT};
use crate::hash::ContentHash;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("line {0}: expected `key: value` header")]
    BadHeader(usize),
    #[error("line {0}: unknown header `{1}`")]
    UnknownHeader(usize, String),
    #[error("line {0}: duplicate header `{1}`")]
    DuplicateHeader(usize, String),
    #[error("line {0}: bad date `{1}`")]
    BadDate(usize, String),
    #[error("line {0}: bad image header")]
    BadImage(usize),
    #[error("missing `url:` header")]
    MissingUrl,
    #[error("missing blank line between headers and body")]
    MissingSeparator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleImage {
    pub id: String,
    pub bytes: Vec<u8>,
}

/// A published document together with its embedded images.
///
/// The body is stored in Unicode NFC so that byte spans computed on it are
/// stable across producers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    url: String,
    body: String,
    publication_date: Option<NaiveDate>,
    images: Vec<ArticleImage>,
    content_digest: ContentHash,
}

impl Article {
    pub fn new(
        url: impl Into<String>,
        body: &str,
        publication_date: Option<NaiveDate>,
        images: Vec<ArticleImage>,
    ) -> Self {
        let body: String = body.nfc().collect();
        let content_digest = content_digest(&body, &images);
        Self {
            url: url.into(),
            body,
            publication_date,
            images,
            content_digest,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn publication_date(&self) -> Option<NaiveDate> {
        self.publication_date
    }

    pub fn images(&self) -> &[ArticleImage] {
        &self.images
    }

    pub fn content_digest(&self) -> ContentHash {
        self.content_digest
    }

    pub fn image(&self, id: &str) -> Option<&ArticleImage> {
        self.images.iter().find(|i| i.id == id)
    }

    /// Parses the fixture format: `url:`, optional `date:` (DD.MM.YYYY) and
    /// any number of `image: <id> <base64>` header lines, a blank line, then
    /// the body verbatim.
    pub fn parse_fixture(text: &str) -> Result<Self, FixtureError> {
        let mut url = None;
        let mut date = None;
        let mut images = Vec::new();
        let mut rest = text;
        let mut line_no = 0;
        loop {
            line_no += 1;
            let (line, tail) = match rest.find('\n') {
                Some(i) => (&rest[..i], &rest[i + 1..]),
                None => return Err(FixtureError::MissingSeparator),
            };
            rest = tail;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                break;
            }
            let (key, value) = line.split_once(':').ok_or(FixtureError::BadHeader(line_no))?;
            let value = value.trim();
            match key.trim() {
                "url" => {
                    if url.replace(value.to_owned()).is_some() {
                        return Err(FixtureError::DuplicateHeader(line_no, "url".into()));
                    }
                }
                "date" => {
                    let parsed = parse_date(value)
                        .map_err(|_| FixtureError::BadDate(line_no, value.to_owned()))?;
                    if date.replace(parsed).is_some() {
                        return Err(FixtureError::DuplicateHeader(line_no, "date".into()));
                    }
                }
                "image" => {
                    let (id, data) = value
                        .split_once(char::is_whitespace)
                        .ok_or(FixtureError::BadImage(line_no))?;
                    let bytes = base64::engine::general_purpose::STANDARD
                        .decode(data.trim())
                        .map_err(|_| FixtureError::BadImage(line_no))?;
                    if id.is_empty() || images.iter().any(|i: &ArticleImage| i.id == id) {
                        return Err(FixtureError::BadImage(line_no));
                    }
                    images.push(ArticleImage {
                        id: id.to_owned(),
                        bytes,
                    });
                }
                other => return Err(FixtureError::UnknownHeader(line_no, other.to_owned())),
            }
        }
        let url = url.ok_or(FixtureError::MissingUrl)?;
        Ok(Self::new(url, rest, date, images))
    }

    pub fn to_fixture(&self) -> String {
        let mut out = format!("url: {}\n", self.url);
        if let Some(d) = self.publication_date {
            out.push_str(&format!("date: {}\n", d.format(DATE_FORMAT)));
        }
        for img in &self.images {
            out.push_str(&format!(
                "image: {} {}\n",
                img.id,
                base64::engine::general_purpose::STANDARD.encode(&img.bytes)
            ));
        }
        out.push('\n');
        out.push_str(&self.body);
        out
    }

    pub fn word_count(&self) -> usize {
        self.body.split_whitespace().count()
    }
}

fn content_digest(body: &str, images: &[ArticleImage]) -> ContentHash {
    let mut enc = Encoder::new();
    enc.str(body).list(images, |img| {
        let mut e = Encoder::new();
        e.str(&img.id).field(&img.bytes);
        e.finish()
    });
    ContentHash::of(enc.as_bytes())
}
