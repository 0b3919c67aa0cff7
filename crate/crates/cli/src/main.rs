//! `oblivion`: key management, claims, a local OCP/IS server and benchmarks.
//!
//! Exit status is 0 on success, 1 when a party rejects a request or there is
//! nothing to claim, and 2 for usage and I/O errors.

mod bench;
mod ca;
mod node;
mod store;
mod user;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::store::Home;

#[derive(Debug, Parser)]
#[command(name = "oblivion", version, about = "Provable link-removal requests backed by certified attributes")]
struct Cli {
    /// Directory holding key files.
    #[arg(long, global = true, env = "OBLIVION_HOME", default_value = ".oblivion")]
    home: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certification authority: key setup and attribute certification.
    #[command(subcommand)]
    Ca(ca::CaCommand),
    /// User client: keys, tagging and claims.
    #[command(subcommand)]
    User(user::UserCommand),
    /// Generates a named key pair in the home directory.
    Keygen(KeygenArgs),
    /// Runs the OCP and the indexing system, together or one of them, on a TCP listener.
    Serve(node::ServeArgs),
    /// Runs one benchmark experiment and writes CSV.
    Bench(bench::BenchArgs),
    /// Writes the synthetic article corpus as fixture files.
    Corpus(bench::CorpusArgs),
}

#[derive(Debug, Args)]
struct KeygenArgs {
    /// Key name; files are `<name>.sk` and `<name>.vk`.
    name: String,
    #[arg(long, default_value_t = 1024)]
    bits: usize,
    /// Derive the key from a seed instead of the OS generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace an existing key.
    #[arg(long)]
    force: bool,
}

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Rejected,
}

pub fn keygen(home: &Home, name: &str, bits: usize, seed: Option<u64>, force: bool) -> anyhow::Result<()> {
    use rand::SeedableRng;
    let started = std::time::Instant::now();
    let sk = match seed {
        Some(s) => oblivion_core::rsa_fdh::keygen(bits, &mut rand_chacha::ChaCha20Rng::seed_from_u64(s))?.0,
        None => oblivion_core::rsa_fdh::keygen(bits, &mut rand::rngs::OsRng)?.0,
    };
    let (sk_path, vk_path) = home.save_keypair(name, &sk, force)?;
    log::info!("generated {bits}-bit key in {:.2?}", started.elapsed());
    println!("{}\n{}", sk_path.display(), vk_path.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let home = Home::new(cli.home);
    match cli.command {
        Command::Ca(cmd) => ca::run(&home, cmd),
        Command::User(cmd) => user::run(&home, cmd),
        Command::Keygen(a) => keygen(&home, &a.name, a.bits, a.seed, a.force).map(|()| Outcome::Success),
        Command::Serve(a) => node::serve(&home, a),
        Command::Bench(a) => bench::run(a),
        Command::Corpus(a) => bench::corpus(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Rejected) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
