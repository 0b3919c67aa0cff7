//! Scripted message schedules.
//!
//! ```text
//! SEED 42
//! STEP 1 SEND user ca register
//! STEP 2 SEND ca user credentials
//! STEP 3 SEND user ocp claim
//! STEP 4 SEND mallory ocp claim MUTATE tamper:ts
//! ```

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use super::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MsgType {
    Register,
    Credentials,
    Claim,
    Token,
    Report,
    Ack,
}

impl MsgType {
    pub const ALL: [Self; 6] = [
        Self::Register,
        Self::Credentials,
        Self::Claim,
        Self::Token,
        Self::Report,
        Self::Ack,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Register => "register",
            Self::Credentials => "credentials",
            Self::Claim => "claim",
            Self::Token => "token",
            Self::Report => "report",
            Self::Ack => "ack",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// The service that receives this type, or sends it when it is a reply.
    pub fn service(self) -> Role {
        match self {
            Self::Register | Self::Credentials => Role::Ca,
            Self::Claim | Self::Token => Role::Ocp,
            Self::Report | Self::Ack => Role::Is,
        }
    }

    pub fn is_reply(self) -> bool {
        matches!(self, Self::Credentials | Self::Token | Self::Ack)
    }

    /// Fields `tamper` can alter; the first is the default.
    pub fn tamper_fields(self) -> &'static [&'static str] {
        match self {
            Self::Register => &["attr", "evidence", "extra"],
            Self::Credentials => &["sig", "attr"],
            Self::Claim => &["ts", "attr", "packed", "article", "report", "sig"],
            Self::Token => &["expiry", "digest", "sig"],
            Self::Report => &["url", "token", "sig"],
            Self::Ack => &["status"],
        }
    }

    /// Whether `from` may send this type to `to`: clients talk to the
    /// matching service and services reply to clients.
    pub fn route_ok(self, from: Role, to: Role) -> bool {
        let client = |r: Role| matches!(r, Role::User | Role::Adversary);
        if self.is_reply() {
            from == self.service() && client(to)
        } else {
            client(from) && to == self.service()
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Mutation {
    Drop,
    Duplicate,
    /// Deliver after the next step's messages.
    Reorder,
    /// Alter one field without re-signing.
    Tamper(String),
    /// Swap in the adversary's key and re-sign with it where possible.
    Substitute,
}

impl Mutation {
    fn parse(s: &str, msg: MsgType) -> Option<Self> {
        let (op, arg) = match s.split_once(':') {
            Some((op, arg)) => (op, Some(arg)),
            None => (s, None),
        };
        match (op, arg) {
            ("drop", None) => Some(Self::Drop),
            ("duplicate", None) => Some(Self::Duplicate),
            ("reorder", None) => Some(Self::Reorder),
            ("substitute", None) => Some(Self::Substitute),
            ("tamper", None) => Some(Self::Tamper(msg.tamper_fields()[0].to_owned())),
            ("tamper", Some(field)) if msg.tamper_fields().contains(&field) => Some(Self::Tamper(field.to_owned())),
            _ => None,
        }
    }

    /// Every mutation applicable to `msg`, one per tamperable field.
    pub fn all_for(msg: MsgType) -> Vec<Self> {
        let mut out = vec![Self::Drop, Self::Duplicate, Self::Reorder, Self::Substitute];
        out.extend(msg.tamper_fields().iter().map(|f| Self::Tamper((*f).to_owned())));
        out
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Drop => f.write_str("drop"),
            Self::Duplicate => f.write_str("duplicate"),
            Self::Reorder => f.write_str("reorder"),
            Self::Tamper(field) => write!(f, "tamper:{field}"),
            Self::Substitute => f.write_str("substitute"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub n: u64,
    pub from: Role,
    pub to: Role,
    pub msg: MsgType,
    pub mutation: Option<Mutation>,
}

impl Step {
    pub fn send(n: u64, from: Role, to: Role, msg: MsgType) -> Self {
        Self {
            n,
            from,
            to,
            msg,
            mutation: None,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "STEP {} SEND {} {} {}", self.n, self.from, self.to, self.msg)?;
        if let Some(m) = &self.mutation {
            write!(f, " MUTATE {m}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {0}: expected `STEP <n> SEND <from> <to> <msg-type> [MUTATE <op>]`")]
    Syntax(usize),
    #[error("line {0}: unknown party `{1}`")]
    UnknownRole(usize, String),
    #[error("line {0}: unknown message type `{1}`")]
    UnknownMessage(usize, String),
    #[error("line {0}: mutation `{1}` does not apply to this message")]
    UnknownMutation(usize, String),
    #[error("line {0}: {1} cannot be sent from {2} to {3}")]
    BadRoute(usize, MsgType, Role, Role),
    #[error("line {0}: step numbers must increase")]
    StepOrder(usize),
    #[error("line {0}: bad seed")]
    BadSeed(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Scenario {
    pub seed: u64,
    pub steps: Vec<Step>,
}

impl Scenario {
    /// Registration, credentials, claim, token, report, acknowledgment.
    pub fn honest() -> Self {
        Self::from_steps(honest_templates().into_iter().map(|(f, t, m)| (f, t, m, None)))
    }

    /// Numbers the steps from 1.
    pub fn from_steps(steps: impl IntoIterator<Item = (Role, Role, MsgType, Option<Mutation>)>) -> Self {
        Self {
            seed: 0,
            steps: steps
                .into_iter()
                .enumerate()
                .map(|(i, (from, to, msg, mutation))| Step {
                    n: i as u64 + 1,
                    from,
                    to,
                    msg,
                    mutation,
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut scenario = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            if let ["SEED", seed] = words[..] {
                scenario.seed = seed.parse().map_err(|_| ScenarioError::BadSeed(line_no))?;
                continue;
            }
            let (n, from, to, msg, mutation) = match words[..] {
                ["STEP", n, "SEND", from, to, msg] => (n, from, to, msg, None),
                ["STEP", n, "SEND", from, to, msg, "MUTATE", op] => (n, from, to, msg, Some(op)),
                _ => return Err(ScenarioError::Syntax(line_no)),
            };
            let n: u64 = n.parse().map_err(|_| ScenarioError::Syntax(line_no))?;
            let role = |s: &str| Role::parse(s).ok_or_else(|| ScenarioError::UnknownRole(line_no, s.to_owned()));
            let (from, to) = (role(from)?, role(to)?);
            let msg = MsgType::parse(msg).ok_or_else(|| ScenarioError::UnknownMessage(line_no, msg.to_owned()))?;
            if !msg.route_ok(from, to) {
                return Err(ScenarioError::BadRoute(line_no, msg, from, to));
            }
            let mutation = mutation
                .map(|op| Mutation::parse(op, msg).ok_or_else(|| ScenarioError::UnknownMutation(line_no, op.to_owned())))
                .transpose()?;
            if scenario.steps.last().is_some_and(|s| s.n >= n) {
                return Err(ScenarioError::StepOrder(line_no));
            }
            scenario.steps.push(Step {
                n,
                from,
                to,
                msg,
                mutation,
            });
        }
        Ok(scenario)
    }

    pub fn to_script(&self) -> String {
        let mut out = format!("SEED {}\n", self.seed);
        for s in &self.steps {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn mutation_count(&self) -> usize {
        self.steps.iter().filter(|s| s.mutation.is_some()).count()
    }
}

type Template = (Role, Role, MsgType);

fn honest_templates() -> [Template; 6] {
    use MsgType::*;
    use Role::*;
    [
        (User, Ca, Register),
        (Ca, User, Credentials),
        (User, Ocp, Claim),
        (Ocp, User, Token),
        (User, Is, Report),
        (Is, User, Ack),
    ]
}

/// Every valid (sender, receiver, type) triple.
pub fn step_templates() -> Vec<Template> {
    let mut out = Vec::new();
    for msg in MsgType::ALL {
        for client in [Role::User, Role::Adversary] {
            if msg.is_reply() {
                out.push((msg.service(), client, msg));
            } else {
                out.push((client, msg.service(), msg));
            }
        }
    }
    out
}

/// The honest flow with up to `max_steps - 6` extra steps inserted anywhere,
/// each schedule also taken with exactly one mutation on any one step.
pub fn enumerate_scenarios(max_steps: usize) -> impl Iterator<Item = Scenario> {
    let templates = step_templates();
    let mut schedules: Vec<Vec<Template>> = vec![honest_templates().to_vec()];
    let mut frontier = schedules.clone();
    for _ in honest_templates().len()..max_steps {
        let mut next = Vec::new();
        for base in &frontier {
            for pos in 0..=base.len() {
                for t in &templates {
                    let mut s = base.clone();
                    s.insert(pos, *t);
                    next.push(s);
                }
            }
        }
        next.sort();
        next.dedup();
        schedules.extend(next.iter().cloned());
        frontier = next;
    }
    schedules.sort();
    schedules.dedup();
    schedules.into_iter().flat_map(|schedule| {
        let plain = Scenario::from_steps(schedule.iter().map(|&(f, t, m)| (f, t, m, None)));
        let mutated = (0..schedule.len()).flat_map({
            let schedule = schedule.clone();
            move |i| {
                let schedule = schedule.clone();
                Mutation::all_for(schedule[i].2).into_iter().map(move |mutation| {
                    Scenario::from_steps(schedule.iter().enumerate().map(|(j, &(f, t, m))| {
                        (f, t, m, (i == j).then(|| mutation.clone()))
                    }))
                })
            }
        });
        std::iter::once(plain).chain(mutated)
    })
}

/// A seeded adversarial schedule: the honest flow with random insertions,
/// deletions, swaps and mutations.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let templates = step_templates();
    let mut schedule: Vec<Template> = honest_templates().to_vec();
    for _ in 0..rng.gen_range(0..=6) {
        let pos = rng.gen_range(0..=schedule.len());
        schedule.insert(pos, *templates.choose(&mut rng).expect("templates"));
    }
    if schedule.len() > 1 && rng.gen_bool(0.2) {
        schedule.remove(rng.gen_range(0..schedule.len()));
    }
    if schedule.len() > 1 && rng.gen_bool(0.2) {
        let i = rng.gen_range(0..schedule.len() - 1);
        schedule.swap(i, i + 1);
    }
    let steps: Vec<_> = schedule
        .into_iter()
        .map(|(f, t, m)| {
            let mutation = rng
                .gen_bool(0.25)
                .then(|| Mutation::all_for(m).choose(&mut rng).cloned().expect("mutations"));
            (f, t, m, mutation)
        })
        .collect();
    let mut scenario = Scenario::from_steps(steps);
    scenario.seed = seed;
    scenario
}
