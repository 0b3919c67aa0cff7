//! RSA full-domain-hash signatures.
//!
//! `sign` computes `H(M)^d mod N` and `verify` checks `σ^e mod N == H(M)`.
//! `H` expands SHA-256 in counter mode, `SHA256(M ‖ 0) ‖ SHA256(M ‖ 1) ‖ …`
//! with 4-byte big-endian counters, and keeps the leading
//! `bitlen(N) - 1` bits, so every digest is strictly below the modulus.
//!
//! Modular exponentiations are tallied in an [`OpCounter`] supplied by the
//! caller. The `*_counted` variants expose it; the plain variants discard it.

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::codec::{DecodeError, Decoder, Encoder};

pub const SUPPORTED_KEY_BITS: [usize; 4] = [512, 1024, 2048, 4096];
pub const PUBLIC_EXPONENT: u32 = 65_537;
pub const MIN_SECURITY_BITS: u32 = 128;
/// SHA-256 offers at most 128-bit collision resistance per 256 output bits.
pub const MAX_SECURITY_BITS: u32 = 256;

/// Miller-Rabin rounds; each round errs with probability at most 1/4, so 40
/// rounds bound the error by 2^-80.
const MILLER_RABIN_ROUNDS: usize = 40;

const KEY_MAGIC: &[u8] = b"OBLV-KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RsaError {
    #[error("unsupported key size {0} (expected one of 512, 1024, 2048, 4096)")]
    UnsupportedKeySize(usize),
    #[error("security parameter {0} outside [{MIN_SECURITY_BITS}, {MAX_SECURITY_BITS}]")]
    SecurityParameter(u32),
    #[error("invalid key: {0}")]
    InvalidKey(&'static str),
    #[error("malformed signature: value not below the modulus")]
    MalformedSignature,
    #[error("signature verification failed")]
    VerificationFailed,
}

/// Counts the expensive operations performed on behalf of one call.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    modexp: u64,
    modmul: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn modexp(&self) -> u64 {
        self.modexp
    }

    pub fn modmul(&self) -> u64 {
        self.modmul
    }

    pub(crate) fn mul_mod(&mut self, a: &BigUint, b: &BigUint, modulus: &BigUint) -> BigUint {
        self.modmul += 1;
        (a * b) % modulus
    }

    pub(crate) fn pow_mod(&mut self, base: &BigUint, exp: &BigUint, modulus: &BigUint) -> BigUint {
        self.modexp += 1;
        if exp.bits() <= SHORT_EXPONENT_BITS && !exp.is_zero() {
            square_and_multiply(base, exp, modulus)
        } else {
            base.modpow(exp, modulus)
        }
    }
}

/// Exponents up to this size skip Montgomery setup, which dominates the
/// cost of `modpow` for public exponents such as 65537.
const SHORT_EXPONENT_BITS: u64 = 64;

fn square_and_multiply(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> BigUint {
    let base = base % modulus;
    let mut acc = base.clone();
    for i in (0..exp.bits() - 1).rev() {
        acc = &acc * &acc % modulus;
        if exp.bit(i) {
            acc = acc * &base % modulus;
        }
    }
    acc
}

/// An element of `[0, N)` produced by the full-domain hash.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Digest(BigUint);

impl Digest {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }
}

/// The full-domain hash returned by system initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullDomainHash {
    security_bits: u32,
}

impl Default for FullDomainHash {
    fn default() -> Self {
        Self {
            security_bits: MIN_SECURITY_BITS,
        }
    }
}

impl FullDomainHash {
    pub fn init(security_bits: u32) -> Result<Self, RsaError> {
        if !(MIN_SECURITY_BITS..=MAX_SECURITY_BITS).contains(&security_bits) {
            return Err(RsaError::SecurityParameter(security_bits));
        }
        Ok(Self { security_bits })
    }

    pub fn security_bits(&self) -> u32 {
        self.security_bits
    }

    pub fn digest(&self, message: &[u8], modulus: &BigUint) -> Digest {
        self.digest_parts(&[message], modulus)
    }

    /// Hashes the concatenation of `parts` without materialising it.
    pub fn digest_parts(&self, parts: &[&[u8]], modulus: &BigUint) -> Digest {
        let out_bits = modulus.bits().saturating_sub(1) as usize;
        if out_bits == 0 {
            return Digest(BigUint::zero());
        }
        let out_bytes = out_bits.div_ceil(8);

        let mut prefix = Sha256::new();
        for part in parts {
            prefix.update(part);
        }
        let mut stream = Vec::with_capacity(out_bytes + 32);
        let mut counter: u32 = 0;
        while stream.len() < out_bytes {
            let mut block = prefix.clone();
            block.update(counter.to_be_bytes());
            stream.extend_from_slice(&block.finalize());
            counter += 1;
        }
        let value = BigUint::from_bytes_be(&stream[..out_bytes]) >> (8 * out_bytes - out_bits);
        Digest(value)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VerificationKey {
    e: BigUint,
    modulus: BigUint,
}

impl fmt::Debug for VerificationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VerificationKey")
            .field("e", &self.e)
            .field("bits", &self.modulus.bits())
            .finish()
    }
}

impl VerificationKey {
    pub fn new(e: BigUint, modulus: BigUint) -> Result<Self, RsaError> {
        if modulus < BigUint::from(4u32) || modulus.is_even() {
            return Err(RsaError::InvalidKey("modulus must be an odd integer above 3"));
        }
        if e < BigUint::from(3u32) || e.is_even() || e >= modulus {
            return Err(RsaError::InvalidKey("public exponent must be odd, >= 3 and below N"));
        }
        Ok(Self { e, modulus })
    }

    pub fn exponent(&self) -> &BigUint {
        &self.e
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn bits(&self) -> usize {
        self.modulus.bits() as usize
    }
}

/// `sk = (d, vk)`.
///
/// Keys built from their primes also keep the CRT decomposition, which
/// makes signing several times faster; the signatures are identical.
#[derive(Clone)]
pub struct SigningKey {
    d: BigUint,
    public: VerificationKey,
    crt: Option<Crt>,
}

#[derive(Clone)]
struct Crt {
    p: BigUint,
    q: BigUint,
    dp: BigUint,
    dq: BigUint,
    q_inv: BigUint,
}

impl PartialEq for SigningKey {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.public == other.public
    }
}

impl Eq for SigningKey {}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningKey")
            .field("bits", &self.bits())
            .finish_non_exhaustive()
    }
}

impl SigningKey {
    /// Pairs a private exponent with its verification key. The modulus
    /// cannot be factored here, so only cheap structural checks apply.
    pub fn from_parts(d: BigUint, public: VerificationKey) -> Result<Self, RsaError> {
        if d.is_zero() || d >= public.modulus {
            return Err(RsaError::InvalidKey("private exponent must lie in (0, N)"));
        }
        Ok(Self { d, public, crt: None })
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.d
    }

    pub fn modulus(&self) -> &BigUint {
        &self.public.modulus
    }

    pub fn verification_key(&self) -> &VerificationKey {
        &self.public
    }

    pub fn bits(&self) -> usize {
        self.public.bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(BigUint);

impl Signature {
    pub fn from_value(value: BigUint) -> Self {
        Self(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes_be()
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self(BigUint::from_bytes_be(bytes))
    }
}

fn check_bits(bits: usize) -> Result<(), RsaError> {
    if SUPPORTED_KEY_BITS.contains(&bits) {
        Ok(())
    } else {
        Err(RsaError::UnsupportedKeySize(bits))
    }
}

const SMALL_PRIMES: [u32; 167] = {
    let mut out = [0u32; 167];
    let mut n = 3u32;
    let mut i = 0;
    while i < out.len() {
        let mut d = 3;
        let mut prime = true;
        while d * d <= n {
            if n % d == 0 {
                prime = false;
                break;
            }
            d += 2;
        }
        if prime {
            out[i] = n;
            i += 1;
        }
        n += 2;
    }
    out
};

/// Probabilistic primality test with error at most 2^-80.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    if n.is_even() {
        return n == &two;
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let odd = &n_minus_one >> s;
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&odd, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Samples a prime of exactly `bits` bits with the top two bits set, so the
/// product of two such primes has exactly `2 * bits` bits. `p - 1` is kept
/// coprime to the public exponent.
fn random_prime<R: RngCore + CryptoRng + ?Sized>(bits: u64, e: &BigUint, rng: &mut R) -> BigUint {
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        let residues: Vec<u32> = SMALL_PRIMES
            .iter()
            .map(|&p| (&candidate % p).try_into().expect("residue below u32"))
            .collect();
        // Walk odd offsets, skipping anything with a small factor.
        let mut delta: u32 = 0;
        while delta < 1 << 20 {
            let sieved = SMALL_PRIMES
                .iter()
                .zip(&residues)
                .all(|(&p, &r)| (r as u64 + delta as u64) % p as u64 != 0);
            if sieved {
                let n = &candidate + delta;
                if n.bits() != bits {
                    break;
                }
                if (&n - 1u32).gcd(e).is_one() && is_probable_prime(&n, rng) {
                    return n;
                }
            }
            delta += 2;
        }
    }
}

/// Draws the two primes of a `bits`-bit modulus.
pub fn generate_primes<R: RngCore + CryptoRng + ?Sized>(
    bits: usize,
    rng: &mut R,
) -> Result<(BigUint, BigUint), RsaError> {
    check_bits(bits)?;
    let e = BigUint::from(PUBLIC_EXPONENT);
    let half = (bits / 2) as u64;
    let p = random_prime(half, &e, rng);
    loop {
        let q = random_prime(half, &e, rng);
        if q != p {
            return Ok((p, q));
        }
    }
}

/// Builds a key pair from explicit primes and public exponent.
///
/// Used by key generation and to inject fixed keys for reproducible vectors.
/// Any odd `e >= 3` coprime to `(p-1)(q-1)` is accepted.
pub fn keypair_from_primes(
    p: &BigUint,
    q: &BigUint,
    e: &BigUint,
) -> Result<(SigningKey, VerificationKey), RsaError> {
    let two = BigUint::from(2u32);
    if p == q || p <= &two || q <= &two || p.is_even() || q.is_even() {
        return Err(RsaError::InvalidKey("p and q must be distinct odd primes"));
    }
    let phi = (p - 1u32) * (q - 1u32);
    let d = e
        .modinv(&phi)
        .ok_or(RsaError::InvalidKey("e is not invertible modulo (p-1)(q-1)"))?;
    let vk = VerificationKey::new(e.clone(), p * q)?;
    let mut sk = SigningKey::from_parts(d, vk.clone())?;
    let q_inv = q
        .modinv(p)
        .ok_or(RsaError::InvalidKey("p and q must be coprime"))?;
    sk.crt = Some(Crt {
        dp: &sk.d % (p - 1u32),
        dq: &sk.d % (q - 1u32),
        p: p.clone(),
        q: q.clone(),
        q_inv,
    });
    Ok((sk, vk))
}

pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
    bits: usize,
    rng: &mut R,
) -> Result<(SigningKey, VerificationKey), RsaError> {
    let (p, q) = generate_primes(bits, rng)?;
    keypair_from_primes(&p, &q, &BigUint::from(PUBLIC_EXPONENT))
}

pub fn sign(sk: &SigningKey, message: &[u8]) -> Signature {
    sign_counted(sk, message, &mut OpCounter::new())
}

pub fn sign_counted(sk: &SigningKey, message: &[u8], counter: &mut OpCounter) -> Signature {
    let digest = FullDomainHash::default().digest(message, sk.modulus());
    sign_digest(sk, &digest, counter)
}

/// One private-key exponentiation, through the CRT when available.
pub(crate) fn sign_digest(sk: &SigningKey, digest: &Digest, counter: &mut OpCounter) -> Signature {
    let h = digest.value();
    let Some(c) = &sk.crt else {
        return Signature(counter.pow_mod(h, &sk.d, sk.modulus()));
    };
    counter.modexp += 1;
    let m1 = h.modpow(&c.dp, &c.p);
    let m2 = h.modpow(&c.dq, &c.q);
    let diff = (&m1 + &c.p - (&m2 % &c.p)) % &c.p;
    let h_crt = (&c.q_inv * diff) % &c.p;
    Signature(m2 + h_crt * &c.q)
}

pub fn verify(vk: &VerificationKey, sig: &Signature, message: &[u8]) -> Result<(), RsaError> {
    verify_counted(vk, sig, message, &mut OpCounter::new())
}

/// Exactly one modular exponentiation per call; a malformed signature costs none.
pub fn verify_counted(
    vk: &VerificationKey,
    sig: &Signature,
    message: &[u8],
    counter: &mut OpCounter,
) -> Result<(), RsaError> {
    let digest = FullDomainHash::default().digest(message, vk.modulus());
    verify_digest(vk, sig, &digest, counter)
}

pub(crate) fn verify_digest(
    vk: &VerificationKey,
    sig: &Signature,
    digest: &Digest,
    counter: &mut OpCounter,
) -> Result<(), RsaError> {
    if sig.value() >= vk.modulus() {
        return Err(RsaError::MalformedSignature);
    }
    if &counter.pow_mod(sig.value(), vk.exponent(), vk.modulus()) == digest.value() {
        Ok(())
    } else {
        Err(RsaError::VerificationFailed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyRole {
    Signing = 0x01,
    Verification = 0x02,
}

/// Contents of an `OBLV-KEY` file: role, modulus and the role's exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyFile {
    pub role: KeyRole,
    pub modulus: BigUint,
    pub exponent: BigUint,
}

impl KeyFile {
    pub fn for_signing(sk: &SigningKey) -> Self {
        Self {
            role: KeyRole::Signing,
            modulus: sk.modulus().clone(),
            exponent: sk.d.clone(),
        }
    }

    pub fn for_verification(vk: &VerificationKey) -> Self {
        Self {
            role: KeyRole::Verification,
            modulus: vk.modulus.clone(),
            exponent: vk.e.clone(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::with_header(KEY_MAGIC);
        enc.raw_u8(self.role as u8)
            .uint(&self.modulus)
            .uint(&self.exponent);
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::with_header(bytes, KEY_MAGIC)?;
        let role = match dec.raw_u8()? {
            0x01 => KeyRole::Signing,
            0x02 => KeyRole::Verification,
            other => return Err(DecodeError::UnexpectedTag(other)),
        };
        let modulus = dec.uint("modulus")?;
        let exponent = dec.uint("exponent")?;
        dec.finish()?;
        Ok(Self {
            role,
            modulus,
            exponent,
        })
    }

    pub fn into_verification_key(self) -> Result<VerificationKey, RsaError> {
        if self.role != KeyRole::Verification {
            return Err(RsaError::InvalidKey("not a verification key file"));
        }
        VerificationKey::new(self.exponent, self.modulus)
    }

    /// A signing key file carries only `(N, d)`; `vk` supplies `e`.
    pub fn into_signing_key(self, vk: VerificationKey) -> Result<SigningKey, RsaError> {
        if self.role != KeyRole::Signing {
            return Err(RsaError::InvalidKey("not a signing key file"));
        }
        if self.modulus != vk.modulus {
            return Err(RsaError::InvalidKey("signing and verification moduli differ"));
        }
        SigningKey::from_parts(self.exponent, vk)
    }
}
