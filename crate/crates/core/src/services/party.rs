//! Server-side parties: the CA, the OCP and the indexing system, hosted
//! alone or together in a [`Node`].

use std::collections::BTreeMap;

use crate::codec::{DecodeError, Decoder, Encoder};
use crate::credentials::{
    ca_sign_attributes, decode_attribute, decode_key, encode_attribute, encode_key, Attribute, KeyId,
    SignedAttribute,
};
use crate::hash::ContentHash;
use crate::protocol::wire::{Message, MSG_MAGIC};
use crate::protocol::{issue_token, Acknowledgment, IndexingSystem, OcpVerifier, RejectionCode, RemovalRequest, Report};
use crate::rsa_fdh::{SigningKey, VerificationKey};

use super::{Clock, Event, Recorder, Role};

/// Service-layer type bytes, alongside the protocol's 0x01..=0x04.
const TYPE_REGISTRATION: u8 = 0x10;
const TYPE_CREDENTIALS: u8 = 0x11;

/// A user's enrollment request to the CA.
///
/// `evidence` stands for the identity document shown out of band; the CA
/// looks it up in its registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registration {
    pub user_key: VerificationKey,
    pub attributes: Vec<Attribute>,
    pub evidence: ContentHash,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Envelope {
    Register(Registration),
    Credentials(Vec<SignedAttribute>),
    Protocol(Message),
}

impl Envelope {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            Self::Protocol(m) => m.encode(),
            Self::Register(r) => {
                let mut enc = Encoder::with_header(MSG_MAGIC);
                enc.raw_u8(TYPE_REGISTRATION)
                    .field(&encode_key(&r.user_key))
                    .list(&r.attributes, encode_attribute)
                    .field(r.evidence.as_bytes());
                enc.finish()
            }
            Self::Credentials(bundle) => {
                let mut enc = Encoder::with_header(MSG_MAGIC);
                enc.raw_u8(TYPE_CREDENTIALS).list(bundle, SignedAttribute::encode);
                enc.finish()
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::with_header(bytes, MSG_MAGIC)?;
        match dec.raw_u8()? {
            TYPE_REGISTRATION => {
                let user_key = decode_key(dec.field()?)?;
                let attributes = dec.list("attributes", decode_attribute)?;
                let evidence = ContentHash::from_slice(dec.field()?).ok_or(DecodeError::InvalidField("evidence"))?;
                dec.finish()?;
                Ok(Self::Register(Registration {
                    user_key,
                    attributes,
                    evidence,
                }))
            }
            TYPE_CREDENTIALS => {
                let bundle = dec.list("credentials", SignedAttribute::decode)?;
                dec.finish()?;
                Ok(Self::Credentials(bundle))
            }
            _ => Message::decode(bytes).map(Self::Protocol),
        }
    }

    pub fn ack(code: RejectionCode) -> Self {
        Self::Protocol(Message::Ack(Acknowledgment::failure(code)))
    }
}

/// What the CA learned about a person out of band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enrollment {
    pub user: KeyId,
    pub attributes: Vec<Attribute>,
}

pub struct CaParty {
    sk: SigningKey,
    registry: BTreeMap<ContentHash, Enrollment>,
}

impl CaParty {
    pub fn new(sk: SigningKey) -> Self {
        Self {
            sk,
            registry: BTreeMap::new(),
        }
    }

    pub fn enroll(&mut self, evidence: ContentHash, user: &VerificationKey, attributes: Vec<Attribute>) {
        self.registry.insert(
            evidence,
            Enrollment {
                user: KeyId::of(user),
                attributes,
            },
        );
    }

    pub fn verification_key(&self) -> &VerificationKey {
        self.sk.verification_key()
    }

    /// Certifies the attributes if the evidence vouches for this key and
    /// for every attribute asked for.
    pub fn certify(&self, reg: &Registration) -> Result<Vec<SignedAttribute>, RejectionCode> {
        let enrollment = self.registry.get(&reg.evidence).ok_or(RejectionCode::BadEvidence)?;
        if enrollment.user != KeyId::of(&reg.user_key)
            || reg.attributes.iter().any(|a| !enrollment.attributes.contains(a))
        {
            return Err(RejectionCode::BadEvidence);
        }
        ca_sign_attributes(&self.sk, &reg.user_key, &reg.attributes).map_err(|_| RejectionCode::Malformed)
    }
}

pub struct OcpParty {
    pub verifier: OcpVerifier,
    sk: SigningKey,
}

impl OcpParty {
    pub fn new(verifier: OcpVerifier, sk: SigningKey) -> Self {
        Self { verifier, sk }
    }

    pub fn verification_key(&self) -> &VerificationKey {
        self.sk.verification_key()
    }
}

fn fingerprints(attributes: &[Attribute]) -> Vec<String> {
    attributes.iter().map(Attribute::fingerprint).collect()
}

/// One endpoint hosting any combination of the server-side parties.
///
/// The OCP and the IS share a node when they are run by one organization.
pub struct Node {
    ca: Option<CaParty>,
    ocp: Option<OcpParty>,
    is: Option<IndexingSystem>,
    recorder: Recorder,
    clock: Clock,
}

impl Node {
    pub fn new(recorder: Recorder, clock: Clock) -> Self {
        Self {
            ca: None,
            ocp: None,
            is: None,
            recorder,
            clock,
        }
    }

    pub fn with_ca(mut self, ca: CaParty) -> Self {
        self.ca = Some(ca);
        self
    }

    pub fn with_ocp(mut self, ocp: OcpParty) -> Self {
        self.ocp = Some(ocp);
        self
    }

    pub fn with_is(mut self, is: IndexingSystem) -> Self {
        self.is = Some(is);
        self
    }

    pub fn hosts(&self, role: Role) -> bool {
        match role {
            Role::Ca => self.ca.is_some(),
            Role::Ocp => self.ocp.is_some(),
            Role::Is => self.is.is_some(),
            Role::User | Role::Adversary => false,
        }
    }

    pub fn indexing_system(&self) -> Option<&IndexingSystem> {
        self.is.as_ref()
    }

    /// Processes one inbound envelope and returns the reply.
    pub fn handle(&self, envelope: Envelope) -> Envelope {
        let now = self.clock.now();
        match (envelope, &self.ca, &self.ocp, &self.is) {
            (Envelope::Register(reg), Some(ca), _, _) => self.on_register(ca, &reg),
            (Envelope::Protocol(Message::Request(req)), _, Some(ocp), _) => self.on_request(ocp, &req, now),
            (Envelope::Protocol(Message::Report(rep)), _, _, Some(is)) => self.on_report(is, &rep, now),
            _ => Envelope::ack(RejectionCode::Malformed),
        }
    }

    fn on_register(&self, ca: &CaParty, reg: &Registration) -> Envelope {
        let subject = KeyId::of(&reg.user_key);
        match ca.certify(reg) {
            Ok(bundle) => {
                self.recorder.record(
                    Role::Ca,
                    Event::Registered,
                    subject,
                    ContentHash::default(),
                    fingerprints(&reg.attributes),
                );
                Envelope::Credentials(bundle)
            }
            Err(code) => {
                self.recorder
                    .record(Role::Ca, Event::Rejected(code), subject, ContentHash::default(), Vec::new());
                Envelope::ack(code)
            }
        }
    }

    fn on_request(&self, ocp: &OcpParty, req: &RemovalRequest, now: u64) -> Envelope {
        let subject = KeyId::of(&req.user_key);
        let digest = req.article.content_digest();
        let claimed = fingerprints(&req.claimed_attributes);
        self.recorder.record(Role::Ocp, Event::Claimed, subject, digest, claimed.clone());
        match ocp.verifier.verify_request(req, now) {
            Ok(verified) => {
                self.recorder
                    .record(Role::Ocp, Event::VerifiedOwnership, subject, digest, claimed);
                let validity = ocp.verifier.config().token_validity_secs;
                let token = issue_token(&ocp.sk, &verified, now, validity);
                self.recorder
                    .record(Role::Ocp, Event::TokenIssued, subject, digest, Vec::new());
                Envelope::Protocol(Message::Token(token))
            }
            Err(code) => {
                self.recorder.record(Role::Ocp, Event::Rejected(code), subject, digest, Vec::new());
                Envelope::ack(code)
            }
        }
    }

    fn on_report(&self, is: &IndexingSystem, rep: &Report, now: u64) -> Envelope {
        let subject = KeyId::of(&rep.token.user_key);
        let digest = rep.token.article_digest;
        self.recorder.record(Role::Is, Event::Reported, subject, digest, Vec::new());
        let ack = is.is_report(rep, now);
        let event = if ack.is_success() {
            Event::Affected
        } else {
            Event::Rejected(ack.rejection().unwrap_or(RejectionCode::Malformed))
        };
        self.recorder.record(Role::Is, event, subject, digest, Vec::new());
        Envelope::Protocol(Message::Ack(ack))
    }
}
