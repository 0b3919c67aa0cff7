//! Timing experiments over certification, packing, signing and
//! verification, written as CSV with one row per parameter point.
//!
//! Warm-up iterations are discarded and all timings use the monotonic
//! clock. Network latency is never part of a measurement.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::corpus::{bench_subject, subject_article};
use crate::credentials::{
    ca_sign_attributes, pack, pack_counted, verify_individually, verify_packed_counted, Attribute, SignedAttribute,
};
use crate::matching::{Article, Matcher, SynonymTable};
use crate::protocol::{build_request, OcpConfig, OcpVerifier, RemovalRequest};
use crate::rsa_fdh::{keygen, OpCounter, RsaError, SigningKey};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("no articles to benchmark")]
    EmptyCorpus,
    #[error("parameter `{0}` must be positive")]
    ZeroParameter(&'static str),
    #[error(transparent)]
    Rsa(#[from] RsaError),
    #[error("benchmark setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Certify,
    Pack,
    Sign,
    VerifyMsg,
    VerifyAttrs,
    Throughput,
}

impl Experiment {
    pub const ALL: [Self; 6] = [
        Self::Certify,
        Self::Pack,
        Self::Sign,
        Self::VerifyMsg,
        Self::VerifyAttrs,
        Self::Throughput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Certify => "certify",
            Self::Pack => "pack",
            Self::Sign => "sign",
            Self::VerifyMsg => "verify-msg",
            Self::VerifyAttrs => "verify-attrs",
            Self::Throughput => "throughput",
        }
    }

    /// Experiment-specific columns, after the shared ones.
    pub fn extra_columns(self) -> &'static [&'static str] {
        match self {
            Self::Certify => &["modexp"],
            Self::Pack => &["modexp", "modmul"],
            Self::Sign => &["words", "message_bytes"],
            Self::VerifyMsg => &["total_ms"],
            Self::VerifyAttrs => &[
                "individual_mean_ms",
                "packed_modexp",
                "individual_modexp",
                "modexp_saved",
            ],
            Self::Throughput => &[
                "total_s",
                "req_per_s",
                "msg_verify_ms",
                "replay_ms",
                "attr_verify_ms",
                "attr_share",
                "full_pipeline_ms",
            ],
        }
    }

    pub fn header(self) -> Vec<&'static str> {
        let mut h = vec![
            "experiment",
            "bits",
            "attrs",
            "articles",
            "requests",
            "samples",
            "mean_ms",
            "median_ms",
            "min_ms",
            "max_ms",
        ];
        h.extend_from_slice(self.extra_columns());
        h
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| BenchError::UnknownExperiment(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BenchParams {
    pub bits: usize,
    pub attrs: usize,
    pub articles: usize,
    pub requests: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: Duration,
    pub median: Duration,
    pub min: Duration,
    pub max: Duration,
}

/// One parameter point: its samples and any experiment-specific values.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub experiment: Experiment,
    pub params: BenchParams,
    samples: Vec<Duration>,
    /// Values for [`Experiment::extra_columns`], in order.
    pub extra: Vec<f64>,
}

impl BenchResult {
    /// `samples` must not be empty.
    pub fn new(experiment: Experiment, params: BenchParams, samples: Vec<Duration>, extra: Vec<f64>) -> Self {
        assert!(!samples.is_empty(), "a bench result needs at least one sample");
        assert_eq!(extra.len(), experiment.extra_columns().len(), "extra columns for {experiment}");
        Self {
            experiment,
            params,
            samples,
            extra,
        }
    }

    pub fn samples(&self) -> &[Duration] {
        &self.samples
    }

    pub fn summary(&self) -> Summary {
        let total: Duration = self.samples.iter().sum();
        let mut sorted = self.samples.clone();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            (sorted[mid - 1] + sorted[mid]) / 2
        } else {
            sorted[mid]
        };
        Summary {
            mean: total / self.samples.len() as u32,
            median,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }

    pub fn extra_value(&self, column: &str) -> Option<f64> {
        let i = self.experiment.extra_columns().iter().position(|c| *c == column)?;
        self.extra.get(i).copied()
    }

    fn record(&self) -> Vec<String> {
        let s = self.summary();
        let p = self.params;
        let mut row = vec![
            self.experiment.to_string(),
            p.bits.to_string(),
            p.attrs.to_string(),
            p.articles.to_string(),
            p.requests.to_string(),
            self.samples.len().to_string(),
            ms(s.mean),
            ms(s.median),
            ms(s.min),
            ms(s.max),
        ];
        row.extend(self.extra.iter().map(|v| format_value(*v)));
        row
    }
}

fn ms(d: Duration) -> String {
    format!("{:.4}", d.as_secs_f64() * 1e3)
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.4}")
    }
}

pub fn write_csv<W: io::Write>(out: W, experiment: Experiment, results: &[BenchResult]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(experiment.header())?;
    for r in results {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares line through the points: `(slope, intercept, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub bits: Vec<usize>,
    pub attrs: Vec<usize>,
    pub reps: usize,
    pub warmup: usize,
    pub requests: Vec<usize>,
    pub seed: u64,
    /// Articles for `sign` and `verify-msg`; generated when empty.
    pub corpus: Vec<Article>,
    pub ocp: OcpConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            bits: vec![1024],
            attrs: (1..=50).collect(),
            reps: 100,
            warmup: 2,
            requests: vec![2_000],
            seed: 1,
            corpus: Vec::new(),
            ocp: OcpConfig::default(),
        }
    }
}

fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Parties for one key size, generated from the seed.
pub struct BenchKeys {
    pub ca: SigningKey,
    pub user: SigningKey,
}

impl BenchKeys {
    pub fn generate(bits: usize, seed: u64) -> Result<Self, RsaError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ bits as u64);
        Ok(Self {
            ca: keygen(bits, &mut rng)?.0,
            user: keygen(bits, &mut rng)?.0,
        })
    }

    pub fn certify(&self, attributes: &[Attribute]) -> Result<Vec<SignedAttribute>, BenchError> {
        ca_sign_attributes(&self.ca, self.user.verification_key(), attributes).map_err(|e| BenchError::Setup(e.to_string()))
    }
}

pub fn run(experiment: Experiment, config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    if config.reps == 0 {
        return Err(BenchError::ZeroParameter("reps"));
    }
    let mut out = Vec::new();
    for &bits in &config.bits {
        let keys = BenchKeys::generate(bits, config.seed)?;
        match experiment {
            Experiment::Certify => out.extend(certify(&keys, config)?),
            Experiment::Pack => out.extend(pack_sweep(&keys, config)?),
            Experiment::Sign => out.extend(sign(&keys, config)?),
            Experiment::VerifyMsg => out.extend(verify_msg(&keys, config)?),
            Experiment::VerifyAttrs => out.extend(verify_attrs(&keys, config)?),
            Experiment::Throughput => {
                for &requests in &config.requests {
                    out.push(throughput(&keys, config, requests)?);
                }
            }
        }
    }
    Ok(out)
}

fn params(keys: &BenchKeys) -> BenchParams {
    BenchParams {
        bits: keys.ca.bits(),
        ..BenchParams::default()
    }
}

/// CA certification time for each attribute count.
pub fn certify(keys: &BenchKeys, config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    let subjects: Vec<Vec<Attribute>> = config.attrs.iter().map(|&n| bench_subject(n)).collect();
    let samples = interleaved(config, |i| {
        let (signed, d) = time(|| keys.certify(&subjects[i]));
        signed.map(|_| d)
    })?;
    Ok(config
        .attrs
        .iter()
        .zip(samples)
        .map(|(&n, samples)| {
            let p = BenchParams { attrs: n, ..params(keys) };
            BenchResult::new(Experiment::Certify, p, samples, vec![n as f64])
        })
        .collect())
}

/// Packing time for each attribute count.
pub fn pack_sweep(keys: &BenchKeys, config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    let max = config.attrs.iter().copied().max().unwrap_or(1);
    let signed = keys.certify(&bench_subject(max))?;
    let vk_ca = keys.ca.verification_key();
    let mut counts = Vec::with_capacity(config.attrs.len());
    for &n in &config.attrs {
        let mut counter = OpCounter::new();
        pack_counted(vk_ca, &signed[..n], &mut counter).map_err(|e| BenchError::Setup(e.to_string()))?;
        counts.push(vec![counter.modexp() as f64, counter.modmul() as f64]);
    }
    let samples = interleaved(config, |i| Ok(time(|| pack(vk_ca, &signed[..config.attrs[i]])).1))?;
    Ok(config
        .attrs
        .iter()
        .zip(samples.into_iter().zip(counts))
        .map(|(&n, (samples, extra))| {
            let p = BenchParams { attrs: n, ..params(keys) };
            BenchResult::new(Experiment::Pack, p, samples, extra)
        })
        .collect())
}

/// Runs `sample(i)` for every index of `config.attrs` once per round, in a
/// freshly shuffled order each round, so that slow drift in machine speed
/// spreads over all parameter points instead of landing on a few of them.
fn interleaved(
    config: &BenchConfig,
    mut sample: impl FnMut(usize) -> Result<Duration, BenchError>,
) -> Result<Vec<Vec<Duration>>, BenchError> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..config.attrs.len()).collect();
    let mut samples = vec![Vec::with_capacity(config.reps); order.len()];
    for round in 0..config.warmup + config.reps {
        order.shuffle(&mut rng);
        for &i in &order {
            let d = sample(i)?;
            if round >= config.warmup {
                samples[i].push(d);
            }
        }
    }
    Ok(samples)
}

fn corpus(config: &BenchConfig) -> Vec<Article> {
    if config.corpus.is_empty() {
        crate::corpus::generate_corpus(config.seed, crate::corpus::DEFAULT_ARTICLES)
    } else {
        config.corpus.clone()
    }
}

/// A three-attribute claim over `article`, unsigned fields only.
fn claim_parts(keys: &BenchKeys, signed: &[SignedAttribute], article: &Article) -> Result<RemovalRequest, BenchError> {
    let attrs: Vec<Attribute> = signed.iter().map(|s| s.attribute.clone()).collect();
    let report = Matcher::new(SynonymTable::new()).tag(article, &attrs);
    let packed = pack(keys.ca.verification_key(), signed).map_err(|e| BenchError::Setup(e.to_string()))?;
    Ok(RemovalRequest::sign(&keys.user, 0, attrs, packed, article.clone(), report))
}

/// User message signing (encoding plus `SignM`) per corpus article.
pub fn sign(keys: &BenchKeys, config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    let articles = corpus(config);
    if articles.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let signed = keys.certify(&bench_subject(3))?;
    let mut out = Vec::new();
    for (i, article) in articles.iter().enumerate() {
        let template = claim_parts(keys, &signed, article)?;
        let resign = |ts| {
            RemovalRequest::sign(
                &keys.user,
                ts,
                template.claimed_attributes.clone(),
                template.packed_signature.clone(),
                template.article.clone(),
                template.match_report.clone(),
            )
        };
        for ts in 0..config.warmup {
            resign(ts as u64);
        }
        let samples = (0..config.reps).map(|ts| time(|| resign(ts as u64)).1).collect();
        let p = BenchParams {
            articles: i + 1,
            attrs: signed.len(),
            ..params(keys)
        };
        let extra = vec![article.word_count() as f64, template.signed_bytes().len() as f64];
        out.push(BenchResult::new(Experiment::Sign, p, samples, extra));
    }
    Ok(out)
}

/// OCP message-signature verification, one row per corpus article with
/// the running total of mean verification times in `total_ms`.
pub fn verify_msg(keys: &BenchKeys, config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    let articles = corpus(config);
    if articles.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let signed = keys.certify(&bench_subject(3))?;
    let verifier = OcpVerifier::new(keys.ca.verification_key().clone(), Matcher::new(SynonymTable::new()), config.ocp);
    let mut out = Vec::new();
    let mut cumulative = 0.0;
    for (i, article) in articles.iter().enumerate() {
        let request = claim_parts(keys, &signed, article)?;
        for _ in 0..config.warmup {
            let _ = verifier.check_signature(&request);
        }
        let mut samples = Vec::with_capacity(config.reps);
        for _ in 0..config.reps {
            let (ok, d) = time(|| verifier.check_signature(&request));
            ok.map_err(|e| BenchError::Setup(e.to_string()))?;
            samples.push(d);
        }
        let result = BenchResult::new(
            Experiment::VerifyMsg,
            BenchParams {
                articles: i + 1,
                attrs: signed.len(),
                ..params(keys)
            },
            samples,
            vec![0.0],
        );
        cumulative += result.summary().mean.as_secs_f64() * 1e3;
        out.push(BenchResult {
            extra: vec![cumulative],
            ..result
        });
    }
    Ok(out)
}

/// Packed verification against one-by-one verification for each count.
pub fn verify_attrs(keys: &BenchKeys, config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    let max = config.attrs.iter().copied().max().unwrap_or(1);
    let signed = keys.certify(&bench_subject(max))?;
    let vk_ca = keys.ca.verification_key();
    let vk_u = keys.user.verification_key();
    let mut out = Vec::new();
    for &n in &config.attrs {
        let subset = &signed[..n];
        let attrs: Vec<Attribute> = subset.iter().map(|s| s.attribute.clone()).collect();
        let packed = pack(vk_ca, subset).map_err(|e| BenchError::Setup(e.to_string()))?;
        let mut packed_samples = Vec::with_capacity(config.reps);
        let mut individual_total = Duration::ZERO;
        let (mut packed_ops, mut individual_ops) = (OpCounter::new(), OpCounter::new());
        for rep in 0..config.warmup + config.reps {
            let mut c1 = OpCounter::new();
            let (r, d) = time(|| verify_packed_counted(vk_ca, vk_u, &packed, &attrs, &mut c1));
            r.map_err(|e| BenchError::Setup(e.to_string()))?;
            let mut c2 = OpCounter::new();
            let (r, d2) = time(|| verify_individually(vk_ca, subset, &mut c2));
            r.map_err(|e| BenchError::Setup(e.to_string()))?;
            if rep >= config.warmup {
                packed_samples.push(d);
                individual_total += d2;
                (packed_ops, individual_ops) = (c1, c2);
            }
        }
        let individual_mean = individual_total.as_secs_f64() * 1e3 / config.reps as f64;
        let p = BenchParams { attrs: n, ..params(keys) };
        let extra = vec![
            individual_mean,
            packed_ops.modexp() as f64,
            individual_ops.modexp() as f64,
            individual_ops.modexp() as f64 - packed_ops.modexp() as f64,
        ];
        out.push(BenchResult::new(Experiment::VerifyAttrs, p, samples_or_one(packed_samples), extra));
    }
    Ok(out)
}

fn samples_or_one(samples: Vec<Duration>) -> Vec<Duration> {
    if samples.is_empty() {
        vec![Duration::ZERO]
    } else {
        samples
    }
}

/// Distinct claims by one user over articles naming all `attrs` of its
/// attributes, built outside the timed region.
pub fn throughput_requests(
    keys: &BenchKeys,
    attrs: usize,
    count: usize,
    start: u64,
) -> Result<Vec<RemovalRequest>, BenchError> {
    let subject = bench_subject(attrs);
    let signed = keys.certify(&subject)?;
    let matcher = Matcher::new(SynonymTable::new());
    let articles: Vec<(Article, _)> = (0..8u64)
        .map(|i| {
            let a = subject_article(i, 1_900, &subject);
            let r = matcher.tag(&a, &subject);
            (a, r)
        })
        .collect();
    (0..count)
        .map(|i| {
            let (article, report) = &articles[i % articles.len()];
            build_request(
                &keys.user,
                keys.ca.verification_key(),
                &signed,
                article,
                report,
                start + (i / articles.len()) as u64,
            )
            .map_err(|e| BenchError::Setup(e.to_string()))
        })
        .collect()
}

/// Requests per second through signature verification, the freshness and
/// replay check and packed credential verification.
///
/// `attr_share` is credential verification over message plus credential
/// verification. Tag reproduction is timed separately as `full_pipeline_ms` on a sample
/// of the requests and is not part of the rate.
pub fn throughput(keys: &BenchKeys, config: &BenchConfig, requests: usize) -> Result<BenchResult, BenchError> {
    if requests == 0 {
        return Err(BenchError::ZeroParameter("requests"));
    }
    let attrs = config.attrs.iter().copied().max().unwrap_or(20);
    let now = 1_413_763_200;
    let batch = throughput_requests(keys, attrs, requests, now)?;
    let verifier = OcpVerifier::new(keys.ca.verification_key().clone(), Matcher::new(SynonymTable::new()), config.ocp);
    for r in batch.iter().take(config.warmup) {
        let _ = verifier.check_signature(r);
        let _ = verifier.check_credentials(r);
    }
    let (mut msg, mut replay, mut cred) = (Duration::ZERO, Duration::ZERO, Duration::ZERO);
    let mut samples = Vec::with_capacity(requests);
    for r in &batch {
        let t0 = Instant::now();
        verifier.check_signature(r).map_err(|e| BenchError::Setup(e.to_string()))?;
        let t1 = Instant::now();
        verifier.check_fresh(r, now).map_err(|e| BenchError::Setup(e.to_string()))?;
        let t2 = Instant::now();
        verifier.check_credentials(r).map_err(|e| BenchError::Setup(e.to_string()))?;
        let t3 = Instant::now();
        msg += t1 - t0;
        replay += t2 - t1;
        cred += t3 - t2;
        samples.push(t3 - t0);
    }
    let total: Duration = samples.iter().sum();
    let sample = batch.len().min(50);
    let (_, tags) = time(|| {
        for r in &batch[..sample] {
            let _ = verifier.check_tags(r);
        }
    });
    let per = |d: Duration| d.as_secs_f64() * 1e3 / requests as f64;
    let full = per(total) + tags.as_secs_f64() * 1e3 / sample as f64;
    let p = BenchParams {
        bits: keys.ca.bits(),
        attrs,
        articles: 8,
        requests,
    };
    let extra = vec![
        total.as_secs_f64(),
        requests as f64 / total.as_secs_f64(),
        per(msg),
        per(replay),
        per(cred),
        cred.as_secs_f64() / (msg + cred).as_secs_f64(),
        full,
    ];
    Ok(BenchResult::new(Experiment::Throughput, p, samples, extra))
}
