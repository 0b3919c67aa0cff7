//! Ownership claim, token issuance and removal reports.
//!
//! Every operation takes the current time as an explicit argument; nothing
//! here reads a clock.

mod replay;
pub mod wire;

use std::collections::BTreeMap;
use std::sync::Mutex;

use thiserror::Error;

pub use replay::{ReplayCache, ReplayKey};

use crate::credentials::{
    pack, verify_packed, Attribute, CredentialError, KeyId, PackedSignature, SignedAttribute,
};
use crate::hash::ContentHash;
use crate::matching::{disambiguate, Affectedness, Article, MatchReport, Matcher, DEFAULT_THRESHOLD};
use crate::rsa_fdh::{self, Signature, SigningKey, VerificationKey};

/// Seconds since the Unix epoch.
pub type Timestamp = u64;

pub const DEFAULT_WINDOW_SECS: u64 = 300;
pub const DEFAULT_TOKEN_VALIDITY_SECS: u64 = 30 * 24 * 60 * 60;

/// Why a party refused a message. The string form is stable and travels in
/// failure acknowledgments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Error)]
pub enum RejectionCode {
    #[error("bad-signature")]
    BadSignature,
    #[error("stale-timestamp")]
    StaleTimestamp,
    #[error("replayed")]
    Replayed,
    #[error("bad-credentials")]
    BadCredentials,
    #[error("tag-mismatch")]
    TagMismatch,
    #[error("not-affected")]
    NotAffected,
    #[error("expired")]
    Expired,
    #[error("digest-mismatch")]
    DigestMismatch,
    #[error("not indexed")]
    NotIndexed,
    #[error("key-mismatch")]
    KeyMismatch,
    #[error("malformed")]
    Malformed,
    #[error("bad-evidence")]
    BadEvidence,
}

impl RejectionCode {
    pub const ALL: [Self; 12] = [
        Self::BadSignature,
        Self::StaleTimestamp,
        Self::Replayed,
        Self::BadCredentials,
        Self::TagMismatch,
        Self::NotAffected,
        Self::Expired,
        Self::DigestMismatch,
        Self::NotIndexed,
        Self::KeyMismatch,
        Self::Malformed,
        Self::BadEvidence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BadSignature => "bad-signature",
            Self::StaleTimestamp => "stale-timestamp",
            Self::Replayed => "replayed",
            Self::BadCredentials => "bad-credentials",
            Self::TagMismatch => "tag-mismatch",
            Self::NotAffected => "not-affected",
            Self::Expired => "expired",
            Self::DigestMismatch => "digest-mismatch",
            Self::NotIndexed => "not indexed",
            Self::KeyMismatch => "key-mismatch",
            Self::Malformed => "malformed",
            Self::BadEvidence => "bad-evidence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Reasons a user client cannot assemble a claim.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClaimError {
    #[error("cannot claim: the article matches none of the attributes")]
    NoMatches,
    #[error("cannot claim: no certified signature for matched attribute `{0}`")]
    MissingSignature(String),
    #[error("cannot claim: credential for `{0}` is bound to another key")]
    ForeignCredential(String),
    #[error(transparent)]
    Credentials(#[from] CredentialError),
}

/// The signed ownership claim `(M, σ_M)` with
/// `M = (TS, vk_U, A*, P, D, report)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalRequest {
    pub timestamp: Timestamp,
    pub user_key: VerificationKey,
    pub claimed_attributes: Vec<Attribute>,
    pub packed_signature: PackedSignature,
    pub article: Article,
    pub match_report: MatchReport,
    pub signature: Signature,
}

impl RemovalRequest {
    /// Signs the given fields as-is. [`build_request`] is the checked path
    /// for honest clients.
    pub fn sign(
        sk_u: &SigningKey,
        timestamp: Timestamp,
        claimed_attributes: Vec<Attribute>,
        packed_signature: PackedSignature,
        article: Article,
        match_report: MatchReport,
    ) -> Self {
        let mut request = Self {
            timestamp,
            user_key: sk_u.verification_key().clone(),
            claimed_attributes,
            packed_signature,
            article,
            match_report,
            signature: Signature::from_value(Default::default()),
        };
        request.signature = rsa_fdh::sign(sk_u, &request.signed_bytes());
        request
    }

    /// Digest of the signed bytes; identifies the request in the replay cache.
    pub fn message_digest(&self) -> ContentHash {
        ContentHash::of(&self.signed_bytes())
    }

    pub fn verify_signature(&self) -> Result<(), rsa_fdh::RsaError> {
        rsa_fdh::verify(&self.user_key, &self.signature, &self.signed_bytes())
    }
}

/// Builds a claim that discloses only the attributes the article matched.
///
/// The match report is cut down to the claimed set, so unmatched attribute
/// names never reach the wire.
pub fn build_request(
    sk_u: &SigningKey,
    vk_ca: &VerificationKey,
    signed_attributes: &[SignedAttribute],
    article: &Article,
    match_report: &MatchReport,
    now: Timestamp,
) -> Result<RemovalRequest, ClaimError> {
    let matched = match_report.matched_names();
    if matched.is_empty() {
        return Err(ClaimError::NoMatches);
    }
    let vk_u = sk_u.verification_key();
    let mut chosen = Vec::with_capacity(matched.len());
    for name in &matched {
        let signed = signed_attributes
            .iter()
            .find(|s| s.attribute.name() == *name)
            .ok_or_else(|| ClaimError::MissingSignature((*name).to_owned()))?;
        if &signed.bound_user_key != vk_u {
            return Err(ClaimError::ForeignCredential((*name).to_owned()));
        }
        chosen.push(signed.clone());
    }
    let packed = pack(vk_ca, &chosen)?;
    let claimed: Vec<Attribute> = chosen.into_iter().map(|s| s.attribute).collect();
    let report = MatchReport {
        article_digest: match_report.article_digest,
        claimed: claimed.iter().map(|a| a.name().to_owned()).collect(),
        matches: match_report
            .matches
            .iter()
            .filter(|m| matched.contains(m.attribute_name.as_str()))
            .cloned()
            .collect(),
        warnings: match_report.warnings.clone(),
    };
    Ok(RemovalRequest::sign(sk_u, now, claimed, packed, article.clone(), report))
}

/// `D_U`: the OCP's signed statement that `user_key` owns the article with
/// `article_digest`, redeemable at any indexing system trusting the OCP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnershipToken {
    pub user_key: VerificationKey,
    pub article_digest: ContentHash,
    pub article_url: String,
    pub issued_at: Timestamp,
    pub expiry: Timestamp,
    pub ocp_signature: Signature,
}

/// The user's delisting request to an indexing system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub token: OwnershipToken,
    pub url: String,
    pub reporter_key: VerificationKey,
    pub signature: Signature,
}

impl Report {
    pub fn sign(sk_u: &SigningKey, token: OwnershipToken, url: impl Into<String>) -> Self {
        let mut report = Self {
            token,
            url: url.into(),
            reporter_key: sk_u.verification_key().clone(),
            signature: Signature::from_value(Default::default()),
        };
        report.signature = rsa_fdh::sign(sk_u, &report.signed_bytes());
        report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AckStatus {
    Success = 0x01,
    Failure = 0x02,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acknowledgment {
    pub status: AckStatus,
    pub reason: String,
}

impl Acknowledgment {
    pub fn success() -> Self {
        Self {
            status: AckStatus::Success,
            reason: String::new(),
        }
    }

    pub fn failure(code: RejectionCode) -> Self {
        Self {
            status: AckStatus::Failure,
            reason: code.as_str().to_owned(),
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == AckStatus::Success
    }

    /// The rejection code for a failure carrying one of the stable reasons.
    pub fn rejection(&self) -> Option<RejectionCode> {
        match self.status {
            AckStatus::Success => None,
            AckStatus::Failure => RejectionCode::parse(&self.reason),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcpConfig {
    pub window_secs: u64,
    pub threshold: f64,
    pub token_validity_secs: u64,
}

impl Default for OcpConfig {
    fn default() -> Self {
        Self {
            window_secs: DEFAULT_WINDOW_SECS,
            threshold: DEFAULT_THRESHOLD,
            token_validity_secs: DEFAULT_TOKEN_VALIDITY_SECS,
        }
    }
}

/// A request that passed every OCP check. Only [`OcpVerifier`] creates one,
/// so holding it is proof of verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedRequest {
    user_key: VerificationKey,
    article_digest: ContentHash,
    article_url: String,
    claimed: Vec<Attribute>,
    evidence: MatchReport,
}

impl VerifiedRequest {
    pub fn user_key(&self) -> &VerificationKey {
        &self.user_key
    }

    pub fn article_digest(&self) -> ContentHash {
        self.article_digest
    }

    pub fn article_url(&self) -> &str {
        &self.article_url
    }

    pub fn claimed(&self) -> &[Attribute] {
        &self.claimed
    }

    /// The OCP's own match report over the claimed attributes.
    pub fn evidence(&self) -> &MatchReport {
        &self.evidence
    }
}

/// The ownership certification party's verification state.
///
/// The replay cache sits behind a mutex and is touched only by the
/// freshness step, so distinct requests verify concurrently while two
/// verifications of the same message cannot both pass.
pub struct OcpVerifier {
    vk_ca: VerificationKey,
    config: OcpConfig,
    matcher: Matcher,
    cache: Mutex<ReplayCache>,
}

impl OcpVerifier {
    pub fn new(vk_ca: VerificationKey, matcher: Matcher, config: OcpConfig) -> Self {
        Self {
            vk_ca,
            config,
            matcher,
            cache: Mutex::new(ReplayCache::new(config.window_secs)),
        }
    }

    pub fn config(&self) -> &OcpConfig {
        &self.config
    }

    pub fn trusted_ca(&self) -> &VerificationKey {
        &self.vk_ca
    }

    /// Runs every check in order: message signature, freshness and replay,
    /// packed credentials, tag reproduction, disambiguation.
    pub fn verify_request(&self, request: &RemovalRequest, now: Timestamp) -> Result<VerifiedRequest, RejectionCode> {
        self.check_signature(request)?;
        self.check_fresh(request, now)?;
        self.check_credentials(request)?;
        let evidence = self.check_tags(request)?;
        self.check_affected(&evidence)?;
        Ok(VerifiedRequest {
            user_key: request.user_key.clone(),
            article_digest: request.article.content_digest(),
            article_url: request.article.url().to_owned(),
            claimed: request.claimed_attributes.clone(),
            evidence,
        })
    }

    pub fn check_signature(&self, request: &RemovalRequest) -> Result<(), RejectionCode> {
        request.verify_signature().map_err(|_| RejectionCode::BadSignature)
    }

    /// Freshness against the OCP clock, then an atomic replay-cache insert.
    pub fn check_fresh(&self, request: &RemovalRequest, now: Timestamp) -> Result<(), RejectionCode> {
        if request.timestamp.abs_diff(now) > self.config.window_secs {
            return Err(RejectionCode::StaleTimestamp);
        }
        let key = ReplayKey {
            user: KeyId::of(&request.user_key),
            timestamp: request.timestamp,
            message: request.message_digest(),
        };
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if cache.check_and_insert(key, now) {
            Ok(())
        } else {
            Err(RejectionCode::Replayed)
        }
    }

    pub fn check_credentials(&self, request: &RemovalRequest) -> Result<(), RejectionCode> {
        verify_packed(
            &self.vk_ca,
            &request.user_key,
            &request.packed_signature,
            &request.claimed_attributes,
        )
        .map_err(|_| RejectionCode::BadCredentials)
    }

    /// Re-tags the article against the claimed attributes and requires the
    /// submitted report to be reproduced exactly, with every claimed
    /// attribute matched. Returns the OCP's own report.
    pub fn check_tags(&self, request: &RemovalRequest) -> Result<MatchReport, RejectionCode> {
        let submitted = &request.match_report;
        let article = &request.article;
        if !submitted.is_consistent_with(article) {
            return Err(RejectionCode::TagMismatch);
        }
        let mut claimed: Vec<&str> = request.claimed_attributes.iter().map(Attribute::name).collect();
        let mut listed: Vec<&str> = submitted.claimed.iter().map(String::as_str).collect();
        claimed.sort_unstable();
        listed.sort_unstable();
        if claimed != listed {
            return Err(RejectionCode::TagMismatch);
        }
        let matched = submitted.matched_names();
        if claimed.iter().any(|n| !matched.contains(n)) {
            return Err(RejectionCode::TagMismatch);
        }
        let own = self.matcher.tag(article, &request.claimed_attributes);
        if submitted.matches.iter().any(|m| !own.matches.contains(m)) {
            return Err(RejectionCode::TagMismatch);
        }
        Ok(own)
    }

    pub fn check_affected(&self, evidence: &MatchReport) -> Result<(), RejectionCode> {
        match disambiguate(evidence, self.config.threshold) {
            Affectedness::Affected => Ok(()),
            Affectedness::NotAffected => Err(RejectionCode::NotAffected),
        }
    }

    pub fn replay_cache_len(&self) -> usize {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

/// Signs a token for a verified request. There is no path from an
/// unverified request to a token.
pub fn issue_token(sk_ocp: &SigningKey, verified: &VerifiedRequest, now: Timestamp, validity_secs: u64) -> OwnershipToken {
    let mut token = OwnershipToken {
        user_key: verified.user_key.clone(),
        article_digest: verified.article_digest,
        article_url: verified.article_url.clone(),
        issued_at: now,
        expiry: now.saturating_add(validity_secs.max(1)),
        ocp_signature: Signature::from_value(Default::default()),
    };
    token.ocp_signature = rsa_fdh::sign(sk_ocp, &token.signed_bytes());
    token
}

/// Checks signature, then expiry, then the article binding.
pub fn is_token_valid(
    vk_ocp: &VerificationKey,
    token: &OwnershipToken,
    article_digest: &ContentHash,
    now: Timestamp,
) -> Result<(), RejectionCode> {
    check_token(vk_ocp, token, now)?;
    if &token.article_digest != article_digest {
        return Err(RejectionCode::DigestMismatch);
    }
    Ok(())
}

fn check_token(vk_ocp: &VerificationKey, token: &OwnershipToken, now: Timestamp) -> Result<(), RejectionCode> {
    rsa_fdh::verify(vk_ocp, &token.ocp_signature, &token.signed_bytes()).map_err(|_| RejectionCode::BadSignature)?;
    if token.expiry <= token.issued_at || now >= token.expiry {
        return Err(RejectionCode::Expired);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexEntry {
    pub digest: ContentHash,
    pub listed: bool,
}

/// The indexing system's url → article mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkIndex {
    entries: BTreeMap<String, IndexEntry>,
}

impl LinkIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, url: impl Into<String>, digest: ContentHash) {
        self.entries.insert(url.into(), IndexEntry { digest, listed: true });
    }

    /// The digest behind a listed url; `None` once delisted.
    pub fn lookup(&self, url: &str) -> Option<ContentHash> {
        self.entries.get(url).filter(|e| e.listed).map(|e| e.digest)
    }

    pub fn entry(&self, url: &str) -> Option<&IndexEntry> {
        self.entries.get(url)
    }

    pub fn listed_count(&self) -> usize {
        self.entries.values().filter(|e| e.listed).count()
    }

    /// Delists `url` if it is listed and points at `digest`, as one step.
    pub fn delist(&mut self, url: &str, digest: &ContentHash) -> Result<(), RejectionCode> {
        let entry = self
            .entries
            .get_mut(url)
            .filter(|e| e.listed)
            .ok_or(RejectionCode::NotIndexed)?;
        if &entry.digest != digest {
            return Err(RejectionCode::DigestMismatch);
        }
        entry.listed = false;
        Ok(())
    }
}

/// An indexing system trusting exactly one OCP key.
pub struct IndexingSystem {
    vk_ocp: VerificationKey,
    index: Mutex<LinkIndex>,
}

impl IndexingSystem {
    pub fn new(vk_ocp: VerificationKey, index: LinkIndex) -> Self {
        Self {
            vk_ocp,
            index: Mutex::new(index),
        }
    }

    pub fn trusted_ocp(&self) -> &VerificationKey {
        &self.vk_ocp
    }

    pub fn lookup(&self, url: &str) -> Option<ContentHash> {
        self.index.lock().unwrap_or_else(|e| e.into_inner()).lookup(url)
    }

    pub fn index(&self) -> LinkIndex {
        self.index.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Verifies the report and delists the url on success.
    pub fn handle_report(&self, report: &Report, now: Timestamp) -> Result<(), RejectionCode> {
        rsa_fdh::verify(&report.reporter_key, &report.signature, &report.signed_bytes())
            .map_err(|_| RejectionCode::BadSignature)?;
        if report.reporter_key != report.token.user_key {
            return Err(RejectionCode::KeyMismatch);
        }
        check_token(&self.vk_ocp, &report.token, now)?;
        self.index
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .delist(&report.url, &report.token.article_digest)
    }

    pub fn is_report(&self, report: &Report, now: Timestamp) -> Acknowledgment {
        match self.handle_report(report, now) {
            Ok(()) => Acknowledgment::success(),
            Err(code) => Acknowledgment::failure(code),
        }
    }
}
