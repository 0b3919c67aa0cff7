//! Party processes, a deterministic network simulator with an adversarial
//! scheduler, and the trace checks run over its output.

pub mod net;
pub mod party;
pub mod scenario;
pub mod sim;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::credentials::KeyId;
use crate::hash::ContentHash;
use crate::protocol::{RejectionCode, Timestamp};

pub use net::{run_over_sockets, serve, ServerHandle, SocketNetwork};
pub use party::{CaParty, Enrollment, Envelope, Node, OcpParty, Registration};
pub use scenario::{enumerate_scenarios, random_scenario, MsgType, Mutation, Scenario, ScenarioError, Step};
pub use sim::{run_scenario, InProcess, Network, Simulator, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Ca,
    Ocp,
    Is,
    User,
    Adversary,
}

impl Role {
    pub const ALL: [Self; 5] = [Self::Ca, Self::Ocp, Self::Is, Self::User, Self::Adversary];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ca => "ca",
            Self::Ocp => "ocp",
            Self::Is => "is",
            Self::User => "user",
            Self::Adversary => "mallory",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ca" => Some(Self::Ca),
            "ocp" => Some(Self::Ocp),
            "is" => Some(Self::Is),
            "user" | "alice" => Some(Self::User),
            "mallory" | "adversary" => Some(Self::Adversary),
            _ => None,
        }
    }

    /// Roles served by a [`Node`]; the others live in the harness.
    pub fn is_service(self) -> bool {
        matches!(self, Self::Ca | Self::Ocp | Self::Is)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Registered,
    Claimed,
    VerifiedOwnership,
    TokenIssued,
    Reported,
    Affected,
    Rejected(RejectionCode),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Registered => f.write_str("Registered"),
            Self::Claimed => f.write_str("Claimed"),
            Self::VerifiedOwnership => f.write_str("VerifiedOwnership"),
            Self::TokenIssued => f.write_str("TokenIssued"),
            Self::Reported => f.write_str("Reported"),
            Self::Affected => f.write_str("Affected"),
            Self::Rejected(code) => write!(f, "Rejected({code})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub seq: u64,
    pub actor: Role,
    pub event: Event,
    pub subject_key: KeyId,
    /// All zero for events not tied to an article.
    pub article_digest: ContentHash,
    /// Attribute fingerprints: certified ones for `Registered`, claimed
    /// ones for `Claimed` and `VerifiedOwnership`.
    pub attributes: Vec<String>,
}

impl TraceEvent {
    /// One tab-separated line with a fixed field order.
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.seq,
            self.actor,
            self.event,
            self.subject_key,
            self.article_digest,
            self.attributes.join(",")
        )
    }
}

pub type Trace = Vec<TraceEvent>;

pub fn trace_to_tsv(trace: &[TraceEvent]) -> String {
    let mut out = String::from("seq\tactor\tevent\tsubject_key\tarticle_digest\tattributes\n");
    for e in trace {
        out.push_str(&e.to_tsv());
        out.push('\n');
    }
    out
}

/// Appends events with consecutive sequence numbers. Cloning shares the log.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    log: Arc<Mutex<Trace>>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &self,
        actor: Role,
        event: Event,
        subject_key: KeyId,
        article_digest: ContentHash,
        attributes: Vec<String>,
    ) {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        let seq = log.len() as u64 + 1;
        log.push(TraceEvent {
            seq,
            actor,
            event,
            subject_key,
            article_digest,
            attributes,
        });
    }

    pub fn snapshot(&self) -> Trace {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// Either a settable logical clock shared by every party of a run, or the
/// system clock for long-running services.
#[derive(Debug, Clone)]
pub struct Clock(Option<Arc<AtomicU64>>);

impl Clock {
    pub fn logical(start: Timestamp) -> Self {
        Self(Some(Arc::new(AtomicU64::new(start))))
    }

    pub fn system() -> Self {
        Self(None)
    }

    pub fn now(&self) -> Timestamp {
        match &self.0 {
            Some(t) => t.load(Ordering::SeqCst),
            None => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    /// Moves a logical clock; a no-op on the system clock.
    pub fn set(&self, now: Timestamp) {
        if let Some(t) = &self.0 {
            t.store(now, Ordering::SeqCst);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub index: usize,
    pub event: TraceEvent,
    pub reason: &'static str,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {} ({}): {}", self.index, self.event.to_tsv(), self.reason)
    }
}

/// Every `Affected(k, d)` must follow a `VerifiedOwnership(k, d)`, and every
/// `VerifiedOwnership(k, d)` must follow `Registered(k)` events that
/// together certify all of its claimed attributes. Returns the first
/// violating event.
pub fn check_censorship_resistance(trace: &[TraceEvent]) -> Result<(), Counterexample> {
    let fail = |index: usize, reason| {
        Err(Counterexample {
            index,
            event: trace[index].clone(),
            reason,
        })
    };
    for (i, e) in trace.iter().enumerate() {
        if i > 0 && e.seq <= trace[i - 1].seq {
            return fail(i, "sequence numbers do not increase");
        }
        let before = &trace[..i];
        match e.event {
            Event::Affected => {
                let verified = before.iter().any(|p| {
                    p.event == Event::VerifiedOwnership
                        && p.subject_key == e.subject_key
                        && p.article_digest == e.article_digest
                });
                if !verified {
                    return fail(i, "affected without prior verified ownership");
                }
            }
            Event::VerifiedOwnership => {
                let certified: Vec<&String> = before
                    .iter()
                    .filter(|p| p.event == Event::Registered && p.subject_key == e.subject_key)
                    .flat_map(|p| &p.attributes)
                    .collect();
                if e.attributes.is_empty() || e.attributes.iter().any(|a| !certified.contains(&a)) {
                    return fail(i, "verified ownership over attributes never certified for the key");
                }
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(event: Event, key: u8, digest: u8, attrs: &[&str]) -> (Event, KeyId, ContentHash, Vec<String>) {
        (
            event,
            KeyId([key; 32]),
            ContentHash([digest; 32]),
            attrs.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn trace(events: Vec<(Event, KeyId, ContentHash, Vec<String>)>) -> Trace {
        let r = Recorder::new();
        for (event, k, d, a) in events {
            r.record(Role::Ocp, event, k, d, a);
        }
        r.snapshot()
    }

    #[test]
    fn ordered_trace_holds() {
        let t = trace(vec![
            ev(Event::Registered, 1, 0, &["a", "b", "c"]),
            ev(Event::Claimed, 1, 9, &["a", "b"]),
            ev(Event::VerifiedOwnership, 1, 9, &["a", "b"]),
            ev(Event::TokenIssued, 1, 9, &[]),
            ev(Event::Affected, 1, 9, &[]),
        ]);
        assert_eq!(check_censorship_resistance(&t), Ok(()));
    }

    #[test]
    fn hand_inserted_affected_is_a_counterexample() {
        let t = trace(vec![
            ev(Event::Registered, 1, 0, &["a"]),
            ev(Event::VerifiedOwnership, 1, 9, &["a"]),
            ev(Event::Affected, 2, 9, &[]),
        ]);
        let c = check_censorship_resistance(&t).unwrap_err();
        assert_eq!(c.index, 2);
        let t = trace(vec![ev(Event::Affected, 1, 9, &[])]);
        assert_eq!(check_censorship_resistance(&t).unwrap_err().index, 0);
    }

    #[test]
    fn verification_needs_certification_of_each_attribute() {
        let t = trace(vec![
            ev(Event::Registered, 1, 0, &["a"]),
            ev(Event::VerifiedOwnership, 1, 9, &["a", "b"]),
        ]);
        assert_eq!(check_censorship_resistance(&t).unwrap_err().index, 1);
        let t = trace(vec![
            ev(Event::Registered, 2, 0, &["a"]),
            ev(Event::VerifiedOwnership, 1, 9, &["a"]),
        ]);
        assert_eq!(check_censorship_resistance(&t).unwrap_err().index, 1);
    }

    #[test]
    fn roles_parse() {
        for r in Role::ALL {
            assert_eq!(Role::parse(r.as_str()), Some(r));
        }
        assert_eq!(Role::parse("Alice"), Some(Role::User));
        assert_eq!(Role::parse("eve"), None);
    }
}
