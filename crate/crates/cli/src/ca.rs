use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Subcommand;
use oblivion_core::credentials::{ca_sign_attributes, KeyId};
use oblivion_core::rsa_fdh::OpCounter;

use crate::store::{self, Home};
use crate::Outcome;

const CA_KEY: &str = "ca";

#[derive(Debug, Subcommand)]
pub enum CaCommand {
    /// Generates the CA key pair (`ca.sk`, `ca.vk`).
    Init {
        bits: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        force: bool,
    },
    /// Certifies every attribute in a `kind<TAB>name<TAB>value` file for a
    /// user key, writing one credential file per attribute.
    Certify {
        user_key: PathBuf,
        attributes: PathBuf,
        /// Output directory; defaults to `<home>/credentials`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks credential files against the CA key.
    Verify {
        #[arg(required = true)]
        credentials: Vec<PathBuf>,
        /// CA verification key; defaults to `<home>/ca.vk`.
        #[arg(long)]
        ca: Option<PathBuf>,
    },
}

pub fn run(home: &Home, cmd: CaCommand) -> Result<Outcome> {
    match cmd {
        CaCommand::Init { bits, seed, force } => {
            crate::keygen(home, CA_KEY, bits, seed, force)?;
            Ok(Outcome::Success)
        }
        CaCommand::Certify {
            user_key,
            attributes,
            out,
        } => {
            let sk = home.signing_key(CA_KEY)?;
            let vk_u = store::load_verification_key(&user_key)?;
            let attrs = store::load_attributes(&attributes)?;
            let started = Instant::now();
            let signed = ca_sign_attributes(&sk, &vk_u, &attrs).context("certification refused")?;
            log::info!(
                "certified {} attributes at {} bits in {:.2?}",
                signed.len(),
                sk.bits(),
                started.elapsed()
            );
            let dir = out.unwrap_or_else(|| home.path("credentials"));
            for (i, s) in signed.iter().enumerate() {
                let path = dir.join(format!("{:02}-{}.attr", i + 1, store::slug(s.attribute.name())));
                store::write(&path, &s.encode())?;
                println!("{}", path.display());
            }
            Ok(Outcome::Success)
        }
        CaCommand::Verify { credentials, ca } => {
            let vk_ca = match ca {
                Some(p) => store::load_verification_key(&p)?,
                None => home.verification_key(CA_KEY)?,
            };
            let ca_id = KeyId::of(&vk_ca);
            let mut outcome = Outcome::Success;
            for path in &credentials {
                let signed = store::load_signed_attribute(path)?;
                let ok = signed.ca_key_id == ca_id && signed.verify(&vk_ca, &mut OpCounter::new()).is_ok();
                println!("{}\t{}\t{}", if ok { "ok" } else { "invalid" }, signed.attribute.name(), path.display());
                if !ok {
                    outcome = Outcome::Rejected;
                }
            }
            Ok(outcome)
        }
    }
}
