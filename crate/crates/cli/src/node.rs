use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use oblivion_core::matching::{Matcher, DEFAULT_THRESHOLD};
use oblivion_core::protocol::{
    IndexingSystem, LinkIndex, OcpConfig, OcpVerifier, DEFAULT_TOKEN_VALIDITY_SECS, DEFAULT_WINDOW_SECS,
};
use oblivion_core::services::{serve as serve_node, Clock, Node, OcpParty, Recorder};

use crate::store::{self, Home};
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Only {
    Ocp,
    Is,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    /// Host a single party; both share the listener by default.
    #[arg(long, value_enum)]
    only: Option<Only>,
    /// Article fixtures the indexing system lists.
    #[arg(long = "index")]
    index: Vec<PathBuf>,
    /// Accepted clock difference for request timestamps, in seconds.
    #[arg(long, default_value_t = DEFAULT_WINDOW_SECS)]
    window: u64,
    /// Disambiguation threshold applied by the OCP.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Ownership token lifetime in seconds.
    #[arg(long, default_value_t = DEFAULT_TOKEN_VALIDITY_SECS)]
    token_validity: u64,
    #[arg(long)]
    synonyms: Option<PathBuf>,
    /// CA verification key; `<home>/ca.vk` by default.
    #[arg(long)]
    ca: Option<PathBuf>,
    /// Name of the OCP key pair in the home directory.
    #[arg(long, default_value = "ocp")]
    ocp_key: String,
    /// OCP verification key for a stand-alone indexing system;
    /// `<home>/<ocp-key>.vk` by default.
    #[arg(long)]
    ocp_vk: Option<PathBuf>,
}

pub fn serve(home: &Home, args: ServeArgs) -> Result<Outcome> {
    let recorder = Recorder::new();
    let mut node = Node::new(recorder.clone(), Clock::system());
    let mut vk_ocp = None;
    if args.only != Some(Only::Is) {
        let vk_ca = match &args.ca {
            Some(p) => store::load_verification_key(p)?,
            None => home.verification_key("ca")?,
        };
        let sk_ocp = home
            .signing_key(&args.ocp_key)
            .with_context(|| format!("loading the OCP key (create it with `oblivion keygen {}`)", args.ocp_key))?;
        let config = OcpConfig {
            window_secs: args.window,
            threshold: args.threshold,
            token_validity_secs: args.token_validity,
        };
        let matcher = Matcher::new(store::load_synonyms(args.synonyms.as_deref())?);
        vk_ocp = Some(sk_ocp.verification_key().clone());
        node = node.with_ocp(OcpParty::new(OcpVerifier::new(vk_ca, matcher, config), sk_ocp));
    }
    if args.only != Some(Only::Ocp) {
        let vk_ocp = match (vk_ocp, &args.ocp_vk) {
            (_, Some(p)) => store::load_verification_key(p)?,
            (Some(vk), None) => vk,
            (None, None) => home.verification_key(&args.ocp_key)?,
        };
        let mut index = LinkIndex::new();
        for path in &args.index {
            let article = store::load_article(path)?;
            index.insert(article.url(), article.content_digest());
        }
        log::info!("indexing {} articles", index.listed_count());
        node = node.with_is(IndexingSystem::new(vk_ocp, index));
    }
    let listener = TcpListener::bind(&args.listen).with_context(|| format!("binding {}", args.listen))?;
    let handle = serve_node(Arc::new(node), listener).context("starting server")?;
    println!("listening on {}", handle.local_addr());
    std::io::stdout().flush()?;

    let mut seen = 0;
    loop {
        thread::sleep(Duration::from_millis(100));
        let trace = recorder.snapshot();
        for event in &trace[seen..] {
            log::info!("{}", event.to_tsv());
        }
        seen = trace.len();
    }
}
