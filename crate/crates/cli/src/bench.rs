use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use oblivion_core::bench::{run as run_experiment, write_csv, BenchConfig, Experiment};
use oblivion_core::corpus::{generate_corpus, DEFAULT_ARTICLES};
use oblivion_core::matching::DEFAULT_THRESHOLD;
use oblivion_core::protocol::{OcpConfig, DEFAULT_WINDOW_SECS};
use oblivion_core::rsa_fdh::SUPPORTED_KEY_BITS;

use crate::store;
use crate::Outcome;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// certify, pack, sign, verify-msg, verify-attrs or throughput.
    experiment: Experiment,
    /// Key sizes, e.g. `512,1024` (experiment default when omitted).
    #[arg(long, value_parser = parse_list)]
    bits: Option<NumberList>,
    /// Attribute counts, e.g. `1-50` or `5,10,20`.
    #[arg(long, value_parser = parse_list)]
    attrs: Option<NumberList>,
    /// Request batch sizes for throughput, e.g. `2000-20000:2000`.
    #[arg(long, value_parser = parse_list)]
    requests: Option<NumberList>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV destination; standard output by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory of article fixtures for sign and verify-msg.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_WINDOW_SECS)]
    window: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Output directory for `article-NNN.txt` files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ARTICLES)]
    count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumberList(pub Vec<usize>);

/// Comma-separated items, each `n`, `a-b` or `a-b:step`.
pub fn parse_list(s: &str) -> Result<NumberList, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a number"));
        let (range, step) = match item.split_once(':') {
            Some((r, st)) => (r, num(st)?),
            None => (item, 1),
        };
        if step == 0 {
            return Err("step must be positive".into());
        }
        match range.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range `{item}`"));
                }
                out.extend((a..=b).step_by(step));
            }
            None => out.push(num(range)?),
        }
    }
    if out.contains(&0) {
        return Err("values must be positive".into());
    }
    Ok(NumberList(out))
}

fn defaults(experiment: Experiment) -> (Vec<usize>, Vec<usize>) {
    match experiment {
        Experiment::Certify | Experiment::Pack | Experiment::VerifyAttrs => {
            (SUPPORTED_KEY_BITS.to_vec(), (1..=50).collect())
        }
        Experiment::Sign | Experiment::VerifyMsg => (vec![1024], vec![3]),
        Experiment::Throughput => (vec![1024], vec![20]),
    }
}

pub fn run(args: BenchArgs) -> Result<Outcome> {
    let (bits, attrs) = defaults(args.experiment);
    let bits = args.bits.map_or(bits, |l| l.0);
    if let Some(b) = bits.iter().find(|b| !SUPPORTED_KEY_BITS.contains(b)) {
        bail!("unsupported key size {b}");
    }
    let config = BenchConfig {
        bits,
        attrs: args.attrs.map_or(attrs, |l| l.0),
        reps: args.reps,
        warmup: args.warmup,
        requests: args.requests.map_or_else(|| (2_000..=20_000).step_by(2_000).collect(), |l| l.0),
        seed: args.seed,
        corpus: match &args.corpus {
            Some(dir) => store::load_corpus(dir)?,
            None => Vec::new(),
        },
        ocp: OcpConfig {
            window_secs: args.window,
            threshold: args.threshold,
            ..OcpConfig::default()
        },
    };
    log::info!("running {} over {:?}-bit keys", args.experiment, config.bits);
    let results = run_experiment(args.experiment, &config)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    write_csv(sink, args.experiment, &results)?;
    Ok(Outcome::Success)
}

pub fn corpus(args: CorpusArgs) -> Result<Outcome> {
    for (i, article) in generate_corpus(args.seed, args.count).iter().enumerate() {
        store::write(&args.out.join(format!("article-{:03}.txt", i + 1)), article.to_fixture().as_bytes())?;
    }
    println!("wrote {} articles to {}", args.count, args.out.display());
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_lists() {
        assert_eq!(parse_list("1-3,7").unwrap().0, vec![1, 2, 3, 7]);
        assert_eq!(parse_list("2000-10000:4000").unwrap().0, vec![2000, 6000, 10000]);
        assert!(parse_list("5-1").is_err());
        assert!(parse_list("0").is_err());
        assert!(parse_list("1-4:0").is_err());
        assert!(parse_list("x").is_err());
    }
}
