//! `OBLV-MSG` wire format.
//!
//! ```text
//! "OBLV-MSG" | version 0x01 | type | field* | [signature]
//! ```
//!
//! Types: 0x01 request, 0x02 token, 0x03 report, 0x04 ack. Signed messages
//! carry their signature as the last field and sign every byte before it.
//! Nested structures (attributes, article, match report, token inside a
//! report) are themselves field sequences carried as a single field.

use std::io::{self, Read, Write};

use unicode_normalization::is_nfc;

use super::{Acknowledgment, AckStatus, OwnershipToken, RemovalRequest, Report};
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::credentials::{decode_attribute, decode_key, encode_attribute, encode_key, parse_date, PackedSignature, DATE_FORMAT};
use crate::hash::ContentHash;
use crate::matching::{Article, ArticleImage, AttributeMatch, MatchKind, MatchLocation, MatchReport};
use crate::rsa_fdh::Signature;

pub const MSG_MAGIC: &[u8] = b"OBLV-MSG";
/// Upper bound on a framed message accepted from a socket.
pub const MAX_FRAME: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageType {
    Request = 0x01,
    Token = 0x02,
    Report = 0x03,
    Ack = 0x04,
}

impl MessageType {
    fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        match tag {
            0x01 => Ok(Self::Request),
            0x02 => Ok(Self::Token),
            0x03 => Ok(Self::Report),
            0x04 => Ok(Self::Ack),
            other => Err(DecodeError::UnexpectedTag(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Request(RemovalRequest),
    Token(OwnershipToken),
    Report(Report),
    Ack(Acknowledgment),
}

impl Message {
    pub fn message_type(&self) -> MessageType {
        match self {
            Self::Request(_) => MessageType::Request,
            Self::Token(_) => MessageType::Token,
            Self::Report(_) => MessageType::Report,
            Self::Ack(_) => MessageType::Ack,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Self::Request(r) => r.encode(),
            Self::Token(t) => t.encode(),
            Self::Report(r) => r.encode(),
            Self::Ack(a) => a.encode(),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let dec = Decoder::with_header(bytes, MSG_MAGIC)?;
        let tag = *bytes.get(dec.position()).ok_or(DecodeError::Truncated { need: 1, have: 0 })?;
        Ok(match MessageType::from_tag(tag)? {
            MessageType::Request => Self::Request(RemovalRequest::decode(bytes)?),
            MessageType::Token => Self::Token(OwnershipToken::decode(bytes)?),
            MessageType::Report => Self::Report(Report::decode(bytes)?),
            MessageType::Ack => Self::Ack(Acknowledgment::decode(bytes)?),
        })
    }
}

fn header(ty: MessageType) -> Encoder {
    let mut enc = Encoder::with_header(MSG_MAGIC);
    enc.raw_u8(ty as u8);
    enc
}

fn open(bytes: &[u8], ty: MessageType) -> Result<Decoder<'_>, DecodeError> {
    let mut dec = Decoder::with_header(bytes, MSG_MAGIC)?;
    let tag = dec.raw_u8()?;
    if tag != ty as u8 {
        return Err(DecodeError::UnexpectedTag(tag));
    }
    Ok(dec)
}

fn digest_field(dec: &mut Decoder<'_>, name: &'static str) -> Result<ContentHash, DecodeError> {
    ContentHash::from_slice(dec.field()?).ok_or(DecodeError::InvalidField(name))
}

fn usize_field(dec: &mut Decoder<'_>, name: &'static str) -> Result<usize, DecodeError> {
    usize::try_from(dec.u64(name)?).map_err(|_| DecodeError::InvalidField(name))
}

pub fn encode_article(article: &Article) -> Vec<u8> {
    let date = article
        .publication_date()
        .map(|d| d.format(DATE_FORMAT).to_string())
        .unwrap_or_default();
    let mut enc = Encoder::new();
    enc.str(article.url()).str(&date).str(article.body()).list(article.images(), |img| {
        let mut e = Encoder::new();
        e.str(&img.id).field(&img.bytes);
        e.finish()
    });
    enc.finish()
}

pub fn decode_article(bytes: &[u8]) -> Result<Article, DecodeError> {
    let mut dec = Decoder::new(bytes);
    let url = dec.str("url")?;
    let date = dec.str("date")?;
    let date = match date.as_str() {
        "" => None,
        s => Some(parse_date(s).map_err(|_| DecodeError::InvalidField("date"))?),
    };
    let body = dec.str("body")?;
    if !is_nfc(&body) {
        return Err(DecodeError::InvalidField("body"));
    }
    let images = dec.list("images", |item| {
        let mut d = Decoder::new(item);
        let id = d.str("image id")?;
        let bytes = d.field()?.to_vec();
        d.finish()?;
        Ok(ArticleImage { id, bytes })
    })?;
    dec.finish()?;
    Ok(Article::new(url, &body, date, images))
}

pub fn encode_report(report: &MatchReport) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.field(report.article_digest.as_bytes())
        .list(&report.claimed, |n| n.as_bytes().to_vec())
        .list(&report.matches, |m| {
            let mut e = Encoder::new();
            e.str(&m.attribute_name).u8(m.kind as u8);
            match &m.location {
                MatchLocation::Body { start, end } => {
                    e.u8(0x01).u64(*start as u64).u64(*end as u64);
                }
                MatchLocation::Image(id) => {
                    e.u8(0x02).str(id);
                }
            }
            e.str(&m.matched_text);
            e.finish()
        })
        .list(&report.warnings, |w| w.as_bytes().to_vec());
    enc.finish()
}

fn utf8(bytes: &[u8], name: &'static str) -> Result<String, DecodeError> {
    String::from_utf8(bytes.to_vec()).map_err(|_| DecodeError::InvalidField(name))
}

pub fn decode_report(bytes: &[u8]) -> Result<MatchReport, DecodeError> {
    let mut dec = Decoder::new(bytes);
    let article_digest = digest_field(&mut dec, "article digest")?;
    let claimed = dec.list("claimed", |b| utf8(b, "claimed"))?;
    let matches = dec.list("matches", |item| {
        let mut d = Decoder::new(item);
        let attribute_name = d.str("attribute name")?;
        let kind = d.u8("match kind")?;
        let kind = MatchKind::from_tag(kind).ok_or(DecodeError::UnexpectedTag(kind))?;
        let location = match d.u8("location")? {
            0x01 => {
                let start = usize_field(&mut d, "start")?;
                let end = usize_field(&mut d, "end")?;
                if start > end {
                    return Err(DecodeError::InvalidField("span"));
                }
                MatchLocation::Body { start, end }
            }
            0x02 => MatchLocation::Image(d.str("image id")?),
            other => return Err(DecodeError::UnexpectedTag(other)),
        };
        let matched_text = d.str("matched text")?;
        d.finish()?;
        Ok(AttributeMatch {
            attribute_name,
            kind,
            location,
            matched_text,
        })
    })?;
    let warnings = dec.list("warnings", |b| utf8(b, "warning"))?;
    dec.finish()?;
    Ok(MatchReport {
        article_digest,
        claimed,
        matches,
        warnings,
    })
}

impl RemovalRequest {
    /// The encoded message `M`: every field except the signature.
    pub fn signed_bytes(&self) -> Vec<u8> {
        self.body_encoder().finish()
    }

    fn body_encoder(&self) -> Encoder {
        let mut enc = header(MessageType::Request);
        enc.u64(self.timestamp)
            .field(&encode_key(&self.user_key))
            .list(&self.claimed_attributes, encode_attribute)
            .uint(self.packed_signature.value())
            .u64(self.packed_signature.count() as u64)
            .field(&encode_article(&self.article))
            .field(&encode_report(&self.match_report));
        enc
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = self.body_encoder();
        enc.uint(self.signature.value());
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = open(bytes, MessageType::Request)?;
        let timestamp = dec.u64("timestamp")?;
        let user_key = decode_key(dec.field()?)?;
        let claimed_attributes = dec.list("claimed attributes", decode_attribute)?;
        let packed_value = dec.uint("packed value")?;
        let packed_count = usize_field(&mut dec, "packed count")?;
        let article = decode_article(dec.field()?)?;
        let match_report = decode_report(dec.field()?)?;
        let signature = Signature::from_value(dec.uint("signature")?);
        dec.finish()?;
        Ok(Self {
            timestamp,
            user_key,
            claimed_attributes,
            packed_signature: PackedSignature::new(packed_value, packed_count),
            article,
            match_report,
            signature,
        })
    }
}

impl OwnershipToken {
    pub fn signed_bytes(&self) -> Vec<u8> {
        self.body_encoder().finish()
    }

    fn body_encoder(&self) -> Encoder {
        let mut enc = header(MessageType::Token);
        enc.field(&encode_key(&self.user_key))
            .field(self.article_digest.as_bytes())
            .str(&self.article_url)
            .u64(self.issued_at)
            .u64(self.expiry);
        enc
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = self.body_encoder();
        enc.uint(self.ocp_signature.value());
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = open(bytes, MessageType::Token)?;
        let user_key = decode_key(dec.field()?)?;
        let article_digest = digest_field(&mut dec, "article digest")?;
        let article_url = dec.str("article url")?;
        let issued_at = dec.u64("issued at")?;
        let expiry = dec.u64("expiry")?;
        let ocp_signature = Signature::from_value(dec.uint("signature")?);
        dec.finish()?;
        Ok(Self {
            user_key,
            article_digest,
            article_url,
            issued_at,
            expiry,
            ocp_signature,
        })
    }
}

impl Report {
    pub fn signed_bytes(&self) -> Vec<u8> {
        self.body_encoder().finish()
    }

    fn body_encoder(&self) -> Encoder {
        let mut enc = header(MessageType::Report);
        enc.field(&self.token.encode())
            .str(&self.url)
            .field(&encode_key(&self.reporter_key));
        enc
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = self.body_encoder();
        enc.uint(self.signature.value());
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = open(bytes, MessageType::Report)?;
        let token = OwnershipToken::decode(dec.field()?)?;
        let url = dec.str("url")?;
        let reporter_key = decode_key(dec.field()?)?;
        let signature = Signature::from_value(dec.uint("signature")?);
        dec.finish()?;
        Ok(Self {
            token,
            url,
            reporter_key,
            signature,
        })
    }
}

impl Acknowledgment {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = header(MessageType::Ack);
        enc.u8(self.status as u8).str(&self.reason);
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = open(bytes, MessageType::Ack)?;
        let status = match dec.u8("status")? {
            0x01 => AckStatus::Success,
            0x02 => AckStatus::Failure,
            other => return Err(DecodeError::UnexpectedTag(other)),
        };
        let reason = dec.str("reason")?;
        dec.finish()?;
        if status == AckStatus::Failure && reason.is_empty() {
            return Err(DecodeError::InvalidField("reason"));
        }
        Ok(Self { status, reason })
    }
}

/// Writes a 4-byte big-endian length followed by the message bytes.
pub fn write_frame<W: Write>(w: &mut W, bytes: &[u8]) -> io::Result<()> {
    let len = u32::try_from(bytes.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    let mut frame = Vec::with_capacity(4 + bytes.len());
    frame.extend_from_slice(&len.to_be_bytes());
    frame.extend_from_slice(bytes);
    w.write_all(&frame)?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream before the header.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame exceeds limit"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

#[cfg(test)]
mod tests {
    use num_bigint::BigUint;

    use super::*;
    use crate::credentials::{Attribute, FULL_NAME};
    use crate::fixtures;
    use crate::matching::Matcher;
    use crate::protocol::RejectionCode;
    use crate::rsa_fdh::{keypair_from_primes, VerificationKey};

    fn toy_key() -> VerificationKey {
        keypair_from_primes(&61u32.into(), &53u32.into(), &17u32.into()).unwrap().1
    }

    fn token() -> OwnershipToken {
        OwnershipToken {
            user_key: toy_key(),
            article_digest: ContentHash([7; 32]),
            article_url: "https://news.example/a".into(),
            issued_at: 10,
            expiry: 20,
            ocp_signature: Signature::from_value(BigUint::from(1234u32)),
        }
    }

    fn request() -> RemovalRequest {
        let article = fixtures::alice_article();
        let attrs = fixtures::alice_attributes();
        let match_report = Matcher::new(fixtures::synonyms()).tag(&article, &attrs);
        RemovalRequest {
            timestamp: 1_413_800_000,
            user_key: toy_key(),
            claimed_attributes: vec![Attribute::text(FULL_NAME, "Alice Schmidt").unwrap()],
            packed_signature: PackedSignature::new(BigUint::from(99u32), 1),
            article,
            match_report,
            signature: Signature::from_value(BigUint::from(5u32)),
        }
    }

    fn samples() -> Vec<Message> {
        let t = token();
        vec![
            Message::Request(request()),
            Message::Token(t.clone()),
            Message::Report(Report {
                token: t,
                url: "https://news.example/a".into(),
                reporter_key: toy_key(),
                signature: Signature::from_value(BigUint::from(77u32)),
            }),
            Message::Ack(Acknowledgment::success()),
            Message::Ack(Acknowledgment::failure(RejectionCode::Replayed)),
        ]
    }

    #[test]
    fn every_message_round_trips() {
        for m in samples() {
            assert_eq!(Message::decode(&m.encode()).unwrap(), m);
        }
    }

    #[test]
    fn encodings_are_prefix_free() {
        for m in samples() {
            let bytes = m.encode();
            for cut in 0..bytes.len() {
                assert!(Message::decode(&bytes[..cut]).is_err(), "prefix of length {cut} decoded");
            }
            let mut extended = bytes.clone();
            extended.push(0);
            assert!(matches!(Message::decode(&extended), Err(DecodeError::TrailingBytes(1))));
        }
    }

    #[test]
    fn token_bytes_are_stable() {
        let bytes = token().encode();
        assert_eq!(&bytes[..10], b"OBLV-MSG\x01\x02");
        assert_eq!(bytes.len(), 10 + (4 + 11) + (4 + 32) + (4 + 22) + 2 * (4 + 8) + (4 + 2));
        assert_eq!(&bytes[bytes.len() - 6..], &[0, 0, 0, 2, 0x04, 0xd2]);
    }

    #[test]
    fn rejects_bad_type_and_reasonless_failure() {
        let mut bytes = token().encode();
        bytes[9] = 0x09;
        assert_eq!(Message::decode(&bytes), Err(DecodeError::UnexpectedTag(0x09)));
        let mut enc = header(MessageType::Ack);
        enc.u8(0x02).str("");
        assert!(Message::decode(&enc.finish()).is_err());
    }

    #[test]
    fn frames_round_trip_and_detect_truncation() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"abc").unwrap();
        write_frame(&mut buf, b"").unwrap();
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"abc");
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"");
        assert!(read_frame(&mut r).unwrap().is_none());
        let mut short = &buf[..5];
        assert!(read_frame(&mut short).is_err());
    }
}
