//! Deterministic in-process execution of scenarios.
//!
//! Clients (the user and the adversary) live in the harness; services are
//! reached through a [`Network`], either by direct calls or over sockets.
//! The adversary observes every message after registration, which happens
//! out of band, and applies the scripted mutations.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::credentials::{
    Attribute, AttributeKind, KeyId, PackedSignature, SignedAttribute, DATE_FORMAT, FULL_NAME, NATIONALITY,
    PLACE_OF_BIRTH,
};
use crate::fixtures;
use crate::hash::ContentHash;
use crate::matching::{Article, Matcher, SynonymTable};
use crate::protocol::wire::Message;
use crate::protocol::{
    build_request, is_token_valid, AckStatus, Acknowledgment, IndexingSystem, LinkIndex, OcpConfig, OcpVerifier,
    OwnershipToken, RejectionCode, RemovalRequest, Report, Timestamp,
};
use crate::rsa_fdh::{keygen, RsaError, Signature, SigningKey, VerificationKey};

use super::party::{CaParty, OcpParty};
use super::{Clock, Envelope, Event, MsgType, Mutation, Node, Recorder, Registration, Role, Scenario, Step, Trace};

/// A client's long-term material.
#[derive(Debug, Clone)]
pub struct Identity {
    pub sk: SigningKey,
    pub attributes: Vec<Attribute>,
    pub evidence: ContentHash,
}

impl Identity {
    pub fn verification_key(&self) -> &VerificationKey {
        self.sk.verification_key()
    }
}

/// Keys, identities, articles and configuration shared by every run.
#[derive(Debug, Clone)]
pub struct World {
    pub ca: SigningKey,
    pub ocp: SigningKey,
    pub alice: Identity,
    pub mallory: Identity,
    /// The article about Alice that she wants delisted.
    pub article: Article,
    /// An unrelated indexed article.
    pub other_article: Article,
    pub synonyms: SynonymTable,
    pub config: OcpConfig,
    /// Run the OCP and the IS as one node.
    pub colocated: bool,
    /// Logical time of step 0.
    pub start: Timestamp,
}

impl World {
    pub fn generate(seed: u64, bits: usize) -> Result<Self, RsaError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = keygen(bits, &mut rng)?.0;
        let ocp = keygen(bits, &mut rng)?.0;
        let alice = Identity {
            sk: keygen(bits, &mut rng)?.0,
            attributes: fixtures::alice_attributes(),
            evidence: ContentHash::of(b"identity card: Alice Schmidt"),
        };
        let mallory = Identity {
            sk: keygen(bits, &mut rng)?.0,
            attributes: vec![
                Attribute::text(FULL_NAME, "Mallory Meyer").expect("text attribute"),
                Attribute::text(NATIONALITY, "German").expect("text attribute"),
            ],
            evidence: ContentHash::of(b"identity card: Mallory Meyer"),
        };
        Ok(Self {
            ca,
            ocp,
            alice,
            mallory,
            article: fixtures::alice_article(),
            other_article: Article::new(
                "https://news.example.org/2014/10/21/harbour-expansion",
                "The harbour authority approved the expansion of the northern pier on Tuesday.",
                None,
                Vec::new(),
            ),
            synonyms: fixtures::synonyms(),
            config: OcpConfig::default(),
            colocated: true,
            start: 1_413_763_200,
        })
    }

    pub fn identity(&self, role: Role) -> &Identity {
        match role {
            Role::Adversary => &self.mallory,
            _ => &self.alice,
        }
    }

    /// Fresh service state: an empty replay cache and a full link index.
    pub fn build_nodes(&self, recorder: &Recorder, clock: &Clock) -> Vec<(Vec<Role>, Node)> {
        let node = || Node::new(recorder.clone(), clock.clone());
        let mut ca = CaParty::new(self.ca.clone());
        for id in [&self.alice, &self.mallory] {
            ca.enroll(id.evidence, id.verification_key(), id.attributes.clone());
        }
        let verifier = OcpVerifier::new(
            self.ca.verification_key().clone(),
            Matcher::new(self.synonyms.clone()),
            self.config,
        );
        let ocp = OcpParty::new(verifier, self.ocp.clone());
        let mut index = LinkIndex::new();
        for a in [&self.article, &self.other_article] {
            index.insert(a.url(), a.content_digest());
        }
        let is = IndexingSystem::new(self.ocp.verification_key().clone(), index);
        let mut nodes = vec![(vec![Role::Ca], node().with_ca(ca))];
        if self.colocated {
            nodes.push((vec![Role::Ocp, Role::Is], node().with_ocp(ocp).with_is(is)));
        } else {
            nodes.push((vec![Role::Ocp], node().with_ocp(ocp)));
            nodes.push((vec![Role::Is], node().with_is(is)));
        }
        nodes
    }
}

/// Carries an envelope to a service and returns its reply.
pub trait Network {
    fn deliver(&mut self, to: Role, envelope: &Envelope) -> Envelope;
}

impl<N: Network + ?Sized> Network for &mut N {
    fn deliver(&mut self, to: Role, envelope: &Envelope) -> Envelope {
        (**self).deliver(to, envelope)
    }
}

/// Direct calls into in-memory nodes.
pub struct InProcess {
    nodes: Vec<Arc<Node>>,
    routes: BTreeMap<Role, usize>,
}

impl InProcess {
    pub fn new(nodes: Vec<(Vec<Role>, Node)>) -> Self {
        let mut routes = BTreeMap::new();
        let nodes = nodes
            .into_iter()
            .enumerate()
            .map(|(i, (roles, node))| {
                for r in roles {
                    routes.insert(r, i);
                }
                Arc::new(node)
            })
            .collect();
        Self { nodes, routes }
    }
}

impl Network for InProcess {
    fn deliver(&mut self, to: Role, envelope: &Envelope) -> Envelope {
        match self.routes.get(&to) {
            Some(&i) => self.nodes[i].handle(envelope.clone()),
            None => Envelope::ack(RejectionCode::Malformed),
        }
    }
}

#[derive(Debug, Default)]
struct ClientState {
    credentials: Vec<SignedAttribute>,
    token: Option<OwnershipToken>,
    last_ack: Option<Acknowledgment>,
}

/// Executes one scenario against fresh services.
pub struct Simulator<'w, N: Network> {
    world: &'w World,
    net: N,
    clock: Clock,
    recorder: Recorder,
    user: ClientState,
    mallory: ClientState,
    observed: BTreeMap<MsgType, Envelope>,
    outbox: BTreeMap<(Role, Role), Envelope>,
    held: Vec<(Role, Role, Envelope)>,
}

/// Runs `scenario` in process and returns its trace.
pub fn run_scenario(world: &World, scenario: &Scenario) -> Trace {
    let recorder = Recorder::new();
    let clock = Clock::logical(world.start);
    let net = InProcess::new(world.build_nodes(&recorder, &clock));
    Simulator::new(world, net, recorder, clock).run(scenario)
}

impl<'w, N: Network> Simulator<'w, N> {
    /// `recorder` and `clock` must be the ones the network's nodes use.
    pub fn new(world: &'w World, net: N, recorder: Recorder, clock: Clock) -> Self {
        Self {
            world,
            net,
            clock,
            recorder,
            user: ClientState::default(),
            mallory: ClientState::default(),
            observed: BTreeMap::new(),
            outbox: BTreeMap::new(),
            held: Vec::new(),
        }
    }

    pub fn run(mut self, scenario: &Scenario) -> Trace {
        for step in &scenario.steps {
            self.clock.set(self.world.start + step.n);
            let pending = std::mem::take(&mut self.held);
            self.execute(step);
            for (from, to, env) in pending {
                self.deliver(from, to, env);
            }
        }
        for (from, to, env) in std::mem::take(&mut self.held) {
            self.deliver(from, to, env);
        }
        self.recorder.snapshot()
    }

    /// Whether the user ended the run holding a success acknowledgment.
    pub fn user_acknowledged(&self) -> bool {
        self.user.last_ack.as_ref().is_some_and(Acknowledgment::is_success)
    }

    fn execute(&mut self, step: &Step) {
        let Some(env) = self.produce(step) else {
            return;
        };
        if step.msg != MsgType::Register {
            self.observed.insert(step.msg, env.clone());
        }
        match &step.mutation {
            None => self.deliver(step.from, step.to, env),
            Some(Mutation::Drop) => {}
            Some(Mutation::Duplicate) => {
                self.deliver(step.from, step.to, env.clone());
                self.deliver(step.from, step.to, env);
            }
            Some(Mutation::Reorder) => self.held.push((step.from, step.to, env)),
            Some(Mutation::Tamper(field)) => {
                let env = tamper(env, field);
                self.deliver(step.from, step.to, env);
            }
            Some(Mutation::Substitute) => {
                let env = self.substitute(env);
                self.deliver(step.from, step.to, env);
            }
        }
    }

    fn client(&self, role: Role) -> &ClientState {
        if role == Role::Adversary {
            &self.mallory
        } else {
            &self.user
        }
    }

    fn produce(&mut self, step: &Step) -> Option<Envelope> {
        if step.msg.is_reply() {
            return self.outbox.remove(&(step.from, step.to));
        }
        let now = self.clock.now();
        let id = self.world.identity(step.from);
        let adversary = step.from == Role::Adversary;
        match step.msg {
            MsgType::Register => Some(Envelope::Register(Registration {
                user_key: id.verification_key().clone(),
                attributes: id.attributes.clone(),
                evidence: id.evidence,
            })),
            MsgType::Claim if adversary && self.observed.contains_key(&MsgType::Claim) => {
                self.observed.get(&MsgType::Claim).cloned()
            }
            MsgType::Claim => {
                let credentials = &self.client(step.from).credentials;
                let attrs: Vec<Attribute> = credentials.iter().map(|s| s.attribute.clone()).collect();
                let article = &self.world.article;
                let report = Matcher::new(self.world.synonyms.clone()).tag(article, &attrs);
                build_request(&id.sk, self.world.ca.verification_key(), credentials, article, &report, now)
                    .ok()
                    .map(|r| Envelope::Protocol(Message::Request(r)))
            }
            MsgType::Report if adversary && self.observed.contains_key(&MsgType::Report) => {
                self.observed.get(&MsgType::Report).cloned()
            }
            MsgType::Report => {
                let token = if adversary {
                    self.mallory.token.clone().or_else(|| match self.observed.get(&MsgType::Token) {
                        Some(Envelope::Protocol(Message::Token(t))) => Some(t.clone()),
                        _ => None,
                    })
                } else {
                    self.user.token.clone()
                }?;
                let url = token.article_url.clone();
                Some(Envelope::Protocol(Message::Report(Report::sign(&id.sk, token, url))))
            }
            MsgType::Credentials | MsgType::Token | MsgType::Ack => None,
        }
    }

    fn deliver(&mut self, from: Role, to: Role, env: Envelope) {
        if to.is_service() {
            let reply = self.net.deliver(to, &env);
            self.outbox.insert((to, from), reply);
        } else {
            self.receive(to, env);
        }
    }

    fn receive(&mut self, to: Role, env: Envelope) {
        let world = self.world;
        let me = world.identity(to).verification_key();
        let subject = KeyId::of(me);
        let now = self.clock.now();
        let vk_ca = world.ca.verification_key();
        let state = if to == Role::Adversary {
            &mut self.mallory
        } else {
            &mut self.user
        };
        match env {
            Envelope::Credentials(bundle) => {
                let mut counter = crate::rsa_fdh::OpCounter::new();
                let valid = !bundle.is_empty()
                    && bundle
                        .iter()
                        .all(|s| &s.bound_user_key == me && s.verify(vk_ca, &mut counter).is_ok());
                if valid {
                    state.credentials = bundle;
                } else if to == Role::User {
                    self.recorder.record(
                        Role::User,
                        Event::Rejected(RejectionCode::BadCredentials),
                        subject,
                        ContentHash::default(),
                        Vec::new(),
                    );
                }
            }
            Envelope::Protocol(Message::Token(token)) => {
                let vk_ocp = world.ocp.verification_key();
                let check = is_token_valid(vk_ocp, &token, &token.article_digest, now).and_then(|()| {
                    if &token.user_key == me {
                        Ok(())
                    } else {
                        Err(RejectionCode::KeyMismatch)
                    }
                });
                match check {
                    Ok(()) => state.token = Some(token),
                    Err(code) if to == Role::User => {
                        self.recorder
                            .record(Role::User, Event::Rejected(code), subject, token.article_digest, Vec::new());
                    }
                    Err(_) => {}
                }
            }
            Envelope::Protocol(Message::Ack(ack)) => state.last_ack = Some(ack),
            Envelope::Register(_) | Envelope::Protocol(_) => {}
        }
    }

    fn substitute(&self, env: Envelope) -> Envelope {
        let m = &self.world.mallory;
        let vk_m = m.verification_key().clone();
        match env {
            Envelope::Register(mut reg) => {
                reg.user_key = vk_m;
                Envelope::Register(reg)
            }
            Envelope::Credentials(mut bundle) => {
                if self.mallory.credentials.is_empty() {
                    for s in &mut bundle {
                        s.bound_user_key = vk_m.clone();
                    }
                } else {
                    bundle = self.mallory.credentials.clone();
                }
                Envelope::Credentials(bundle)
            }
            Envelope::Protocol(Message::Request(r)) => Envelope::Protocol(Message::Request(RemovalRequest::sign(
                &m.sk,
                r.timestamp,
                r.claimed_attributes,
                r.packed_signature,
                r.article,
                r.match_report,
            ))),
            Envelope::Protocol(Message::Token(mut t)) => {
                t.user_key = vk_m;
                Envelope::Protocol(Message::Token(t))
            }
            Envelope::Protocol(Message::Report(r)) => {
                Envelope::Protocol(Message::Report(Report::sign(&m.sk, r.token, r.url)))
            }
            other @ Envelope::Protocol(Message::Ack(_)) => other,
        }
    }
}

fn bump(sig: &Signature) -> Signature {
    Signature::from_value(sig.value() + 1u32)
}

fn tweak_attribute(a: &Attribute) -> Attribute {
    let value = match a.kind() {
        AttributeKind::Text => format!("{}x", a.value_str().unwrap_or_default()).into_bytes(),
        AttributeKind::Date => {
            let d = a.date_value().and_then(|d| d.succ_opt()).unwrap_or_default();
            d.format(DATE_FORMAT).to_string().into_bytes()
        }
        AttributeKind::Picture => {
            let mut v = a.value().to_vec();
            v.push(0);
            v
        }
    };
    Attribute::new(a.name(), a.kind(), value).expect("tweaked attribute stays well-formed")
}

fn flip(d: ContentHash) -> ContentHash {
    let mut bytes = d.0;
    bytes[0] ^= 0x01;
    ContentHash(bytes)
}

/// Alters one field of an in-flight message without re-signing it.
fn tamper(env: Envelope, field: &str) -> Envelope {
    match env {
        Envelope::Register(mut reg) => {
            match field {
                "evidence" => reg.evidence = flip(reg.evidence),
                "extra" => reg
                    .attributes
                    .push(Attribute::text(PLACE_OF_BIRTH, "Atlantis").expect("text attribute")),
                _ => {
                    if let Some(a) = reg.attributes.first_mut() {
                        *a = tweak_attribute(a);
                    }
                }
            }
            Envelope::Register(reg)
        }
        Envelope::Credentials(mut bundle) => {
            if let Some(s) = bundle.first_mut() {
                match field {
                    "attr" => s.attribute = tweak_attribute(&s.attribute),
                    _ => s.signature = bump(&s.signature),
                }
            }
            Envelope::Credentials(bundle)
        }
        Envelope::Protocol(Message::Request(mut r)) => {
            match field {
                "attr" => {
                    if let Some(a) = r.claimed_attributes.first_mut() {
                        *a = tweak_attribute(a);
                    }
                }
                "packed" => {
                    let count = r.packed_signature.count();
                    r.packed_signature = PackedSignature::new(r.packed_signature.value() + 1u32, count);
                }
                "article" => {
                    let body = format!("{} ", r.article.body());
                    r.article = Article::new(r.article.url(), &body, r.article.publication_date(), r.article.images().to_vec());
                }
                "report" => {
                    r.match_report.matches.pop();
                }
                "sig" => r.signature = bump(&r.signature),
                _ => r.timestamp += 1,
            }
            Envelope::Protocol(Message::Request(r))
        }
        Envelope::Protocol(Message::Token(mut t)) => {
            match field {
                "digest" => t.article_digest = flip(t.article_digest),
                "sig" => t.ocp_signature = bump(&t.ocp_signature),
                _ => t.expiry += 1,
            }
            Envelope::Protocol(Message::Token(t))
        }
        Envelope::Protocol(Message::Report(mut r)) => {
            match field {
                "token" => r.token.expiry += 1,
                "sig" => r.signature = bump(&r.signature),
                _ => r.url.push_str("/x"),
            }
            Envelope::Protocol(Message::Report(r))
        }
        Envelope::Protocol(Message::Ack(mut a)) => {
            a.status = match a.status {
                AckStatus::Success => {
                    a.reason = RejectionCode::Malformed.as_str().to_owned();
                    AckStatus::Failure
                }
                AckStatus::Failure => {
                    a.reason.clear();
                    AckStatus::Success
                }
            };
            Envelope::Protocol(Message::Ack(a))
        }
    }
}
