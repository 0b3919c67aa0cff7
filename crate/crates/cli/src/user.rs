use std::net::TcpStream;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::Subcommand;
use oblivion_core::credentials::Attribute;
use oblivion_core::matching::{disambiguate, Affectedness, MatchLocation, MatchReport, Matcher, RatioDisambiguator};
use oblivion_core::protocol::{build_request, is_token_valid, Acknowledgment, ClaimError, Report};
use oblivion_core::protocol::wire::Message;
use oblivion_core::services::net::request;
use oblivion_core::services::Envelope;

use crate::store::{self, Home};
use crate::Outcome;

const USER_KEY: &str = "user";

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Generates the user key pair (`user.sk`, `user.vk`).
    Keygen {
        #[arg(long, default_value_t = 1024)]
        bits: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Finds the given attributes in an article and prints the match report.
    Tag {
        article: PathBuf,
        /// Attributes as `kind<TAB>name<TAB>value` lines.
        #[arg(long)]
        attrs: Option<PathBuf>,
        /// Credential files whose attributes are matched as well.
        credentials: Vec<PathBuf>,
        /// Synonym table; the bundled one by default.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        /// Fraction of claimed attributes that must match.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Builds a signed removal request from credential files and either
    /// writes it or submits it to a running server.
    Claim {
        article: PathBuf,
        #[arg(required = true)]
        credentials: Vec<PathBuf>,
        #[arg(long)]
        synonyms: Option<PathBuf>,
        /// Where to write the encoded request; `<home>/request.msg` by default.
        #[arg(long)]
        out: Option<PathBuf>,
        /// OCP address; the ownership token is then reported to `--is`.
        #[arg(long)]
        submit: Option<String>,
        /// Indexing system address; the OCP address by default.
        #[arg(long)]
        is: Option<String>,
        /// OCP verification key used to check the token; `<home>/ocp.vk` by default.
        #[arg(long)]
        ocp: Option<PathBuf>,
        /// CA verification key; `<home>/ca.vk` by default.
        #[arg(long)]
        ca: Option<PathBuf>,
    },
}

pub fn run(home: &Home, cmd: UserCommand) -> Result<Outcome> {
    match cmd {
        UserCommand::Keygen { bits, seed, force } => {
            crate::keygen(home, USER_KEY, bits, seed, force)?;
            Ok(Outcome::Success)
        }
        UserCommand::Tag {
            article,
            attrs,
            credentials,
            synonyms,
            threshold,
        } => {
            let mut attributes = match &attrs {
                Some(p) => store::load_attributes(p)?,
                None => Vec::new(),
            };
            for p in &credentials {
                attributes.push(store::load_signed_attribute(p)?.attribute);
            }
            if attributes.is_empty() {
                bail!("no attributes given (use --attrs or credential files)");
            }
            let article = store::load_article(&article)?;
            let report = Matcher::new(store::load_synonyms(synonyms.as_deref())?).tag(&article, &attributes);
            print_report(&report, threshold);
            Ok(Outcome::Success)
        }
        UserCommand::Claim {
            article,
            credentials,
            synonyms,
            out,
            submit,
            is,
            ocp,
            ca,
        } => {
            let sk = home.signing_key(USER_KEY)?;
            let vk_ca = match ca {
                Some(p) => store::load_verification_key(&p)?,
                None => home.verification_key("ca")?,
            };
            let signed = credentials
                .iter()
                .map(|p| store::load_signed_attribute(p))
                .collect::<Result<Vec<_>>>()?;
            let attributes: Vec<Attribute> = signed.iter().map(|s| s.attribute.clone()).collect();
            let article = store::load_article(&article)?;
            let report = Matcher::new(store::load_synonyms(synonyms.as_deref())?).tag(&article, &attributes);
            let req = match build_request(&sk, &vk_ca, &signed, &article, &report, unix_now()) {
                Ok(r) => r,
                Err(ClaimError::NoMatches) => {
                    eprintln!("{}", ClaimError::NoMatches);
                    return Ok(Outcome::Rejected);
                }
                Err(e) => return Err(e.into()),
            };
            let names: Vec<&str> = req.claimed_attributes.iter().map(Attribute::name).collect();
            println!("claiming {} for {}", names.join(", "), article.url());
            let Some(ocp_addr) = submit else {
                let path = out.unwrap_or_else(|| home.path("request.msg"));
                store::write(&path, &Message::Request(req).encode())?;
                println!("{}", path.display());
                return Ok(Outcome::Success);
            };
            let vk_ocp = match ocp {
                Some(p) => store::load_verification_key(&p)?,
                None => home.verification_key("ocp")?,
            };
            let digest = article.content_digest();
            let reply = exchange(&ocp_addr, Envelope::Protocol(Message::Request(req)))?;
            let token = match reply {
                Envelope::Protocol(Message::Token(t)) => t,
                Envelope::Protocol(Message::Ack(ack)) => return Ok(rejected("OCP", &ack)),
                other => bail!("unexpected reply from the OCP: {other:?}"),
            };
            if let Err(code) = is_token_valid(&vk_ocp, &token, &digest, unix_now()) {
                eprintln!("ownership token rejected: {}", code.as_str());
                return Ok(Outcome::Rejected);
            }
            println!("token issued, valid until {}", token.expiry);
            let is_addr = is.unwrap_or(ocp_addr);
            let report = Report::sign(&sk, token, article.url());
            match exchange(&is_addr, Envelope::Protocol(Message::Report(report)))? {
                Envelope::Protocol(Message::Ack(ack)) if ack.is_success() => {
                    println!("delisted {}", article.url());
                    Ok(Outcome::Success)
                }
                Envelope::Protocol(Message::Ack(ack)) => Ok(rejected("indexing system", &ack)),
                other => bail!("unexpected reply from the indexing system: {other:?}"),
            }
        }
    }
}

fn rejected(party: &str, ack: &Acknowledgment) -> Outcome {
    let reason = ack.rejection().map_or("unknown", |c| c.as_str());
    eprintln!("{party} rejected the request: {reason}");
    Outcome::Rejected
}

fn exchange(addr: &str, envelope: Envelope) -> Result<Envelope> {
    let mut stream = TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))?;
    request(&mut stream, &envelope).map_err(|e| anyhow!(e).context(format!("talking to {addr}")))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn print_report(report: &MatchReport, threshold: f64) {
    println!("digest\t{}", report.article_digest);
    for m in &report.matches {
        let at = match &m.location {
            MatchLocation::Body { start, end } => format!("{start}..{end}"),
            MatchLocation::Image(id) => format!("image {id}"),
        };
        println!("match\t{}\t{}\t{}\t{}", m.attribute_name, m.kind.as_str(), at, m.matched_text);
    }
    for w in &report.warnings {
        println!("warning\t{w}");
    }
    let decision = match disambiguate(report, threshold) {
        Affectedness::Affected => "affected",
        Affectedness::NotAffected => "not affected",
    };
    println!("score\t{:.2}\t{decision}", RatioDisambiguator::score(report));
}
