//! CA-certified attributes and their packed verification.
//!
//! The CA signs `encode(a_i) ‖ encode(vk_U)` for every attribute. A user
//! multiplies any subset of those signatures into a single
//! [`PackedSignature`], and the verifier checks
//! `∏ H(a_i ‖ vk_U) ≡ P^e (mod N_CA)` with one exponentiation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use base64::Engine as _;
use chrono::NaiveDate;
use num_bigint::BigUint;
use num_traits::One;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::codec::{DecodeError, Decoder, Encoder};
use crate::rsa_fdh::{
    self, FullDomainHash, OpCounter, RsaError, Signature, SigningKey, VerificationKey,
};

const ATTR_MAGIC: &[u8] = b"OBLV-ATTR";
pub const DATE_FORMAT: &str = "%d.%m.%Y";

pub const FULL_NAME: &str = "Full Name";
pub const NATIONALITY: &str = "Nationality";
pub const DATE_OF_BIRTH: &str = "Date of Birth";
pub const PLACE_OF_BIRTH: &str = "Place of Birth";
pub const CURRENT_RESIDENCE: &str = "Current Residence";
pub const ID_PICTURE: &str = "ID Picture";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CredentialError {
    #[error("attribute name must not be empty")]
    EmptyName,
    #[error("attribute `{0}` is not in the registered vocabulary")]
    UnknownName(String),
    #[error("attribute `{name}` must be of kind {expected:?}")]
    KindMismatch { name: String, expected: AttributeKind },
    #[error("`{0}` is not a DD.MM.YYYY date")]
    BadDate(String),
    #[error("text attribute value is not UTF-8")]
    NotUtf8,
    #[error("attribute set is empty")]
    Empty,
    #[error("attribute `{0}` appears more than once")]
    Duplicate(String),
    #[error("signed attributes were issued by different CA keys")]
    MixedCaKeys,
    #[error("signed attributes are bound to different user keys")]
    MixedUserKeys,
    #[error("packed signature covers {packed} attributes but {claimed} were claimed")]
    CountMismatch { packed: usize, claimed: usize },
    #[error("packed signature is not below the CA modulus")]
    Malformed,
    #[error("attribute credentials rejected")]
    Rejected,
    #[error(transparent)]
    Rsa(#[from] RsaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttributeKind {
    Text = 0x01,
    Date = 0x02,
    Picture = 0x03,
}

impl AttributeKind {
    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0x01 => Some(Self::Text),
            0x02 => Some(Self::Date),
            0x03 => Some(Self::Picture),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Text => "text",
            Self::Date => "date",
            Self::Picture => "picture",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "text" => Some(Self::Text),
            "date" => Some(Self::Date),
            "picture" => Some(Self::Picture),
            _ => None,
        }
    }
}

/// A `⟨NAME, VALUE⟩` pair describing the user.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Attribute {
    name: String,
    kind: AttributeKind,
    value: Vec<u8>,
}

impl fmt::Debug for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Attribute");
        s.field("name", &self.name).field("kind", &self.kind);
        match self.kind {
            AttributeKind::Picture => s.field("value", &format_args!("<{} bytes>", self.value.len())),
            _ => s.field("value", &String::from_utf8_lossy(&self.value)),
        };
        s.finish()
    }
}

impl Attribute {
    pub fn new(
        name: impl Into<String>,
        kind: AttributeKind,
        value: impl Into<Vec<u8>>,
    ) -> Result<Self, CredentialError> {
        let name = name.into();
        let value = value.into();
        if name.is_empty() {
            return Err(CredentialError::EmptyName);
        }
        match kind {
            AttributeKind::Text => {
                std::str::from_utf8(&value).map_err(|_| CredentialError::NotUtf8)?;
            }
            AttributeKind::Date => {
                let text = std::str::from_utf8(&value).map_err(|_| CredentialError::NotUtf8)?;
                parse_date(text)?;
            }
            AttributeKind::Picture => {}
        }
        Ok(Self { name, kind, value })
    }

    pub fn text(name: impl Into<String>, value: &str) -> Result<Self, CredentialError> {
        Self::new(name, AttributeKind::Text, value.as_bytes())
    }

    pub fn date(name: impl Into<String>, value: &str) -> Result<Self, CredentialError> {
        Self::new(name, AttributeKind::Date, value.as_bytes())
    }

    pub fn picture(name: impl Into<String>, image: Vec<u8>) -> Result<Self, CredentialError> {
        Self::new(name, AttributeKind::Picture, image)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> AttributeKind {
        self.kind
    }

    pub fn value(&self) -> &[u8] {
        &self.value
    }

    /// The value as text, for text and date attributes.
    pub fn value_str(&self) -> Option<&str> {
        match self.kind {
            AttributeKind::Picture => None,
            _ => std::str::from_utf8(&self.value).ok(),
        }
    }

    pub fn date_value(&self) -> Option<NaiveDate> {
        match self.kind {
            AttributeKind::Date => self.value_str().and_then(|s| parse_date(s).ok()),
            _ => None,
        }
    }

    /// Short hex fingerprint of the canonical encoding, used in traces.
    pub fn fingerprint(&self) -> String {
        hex::encode(&Sha256::digest(encode_attribute(self))[..8])
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate, CredentialError> {
    // chrono accepts unpadded fields; the wire form is strictly DD.MM.YYYY.
    let well_formed = s.len() == 10
        && s.bytes()
            .enumerate()
            .all(|(i, b)| if i == 2 || i == 5 { b == b'.' } else { b.is_ascii_digit() });
    if !well_formed {
        return Err(CredentialError::BadDate(s.to_owned()));
    }
    NaiveDate::parse_from_str(s, DATE_FORMAT).map_err(|_| CredentialError::BadDate(s.to_owned()))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttributeListError {
    #[error("line {0}: expected `kind<TAB>name<TAB>value`")]
    Syntax(usize),
    #[error("line {0}: unknown attribute kind `{1}`")]
    UnknownKind(usize, String),
    #[error("line {0}: picture value is not base64")]
    BadPicture(usize),
    #[error("line {line}: {source}")]
    Attribute { line: usize, source: CredentialError },
    #[error("attribute `{0}` holds a tab or line break where the list format cannot carry one")]
    Unrepresentable(String),
}

/// Parses one attribute per line as `kind<TAB>name<TAB>value`.
///
/// Kinds are `text`, `date` (DD.MM.YYYY) and `picture` (base64 image
/// bytes). Blank lines and lines starting with `#` are skipped. Lines may
/// end in `\r\n`; a carriage return anywhere else is a syntax error.
pub fn parse_attribute_list(text: &str) -> Result<Vec<Attribute>, AttributeListError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if line.contains('\r') {
            return Err(AttributeListError::Syntax(line_no));
        }
        let mut fields = line.splitn(3, '\t');
        let (Some(kind), Some(name), Some(value)) = (fields.next(), fields.next(), fields.next()) else {
            return Err(AttributeListError::Syntax(line_no));
        };
        let kind = AttributeKind::parse(kind.trim())
            .ok_or_else(|| AttributeListError::UnknownKind(line_no, kind.to_owned()))?;
        let bytes = match kind {
            AttributeKind::Picture => base64::engine::general_purpose::STANDARD
                .decode(value.trim())
                .map_err(|_| AttributeListError::BadPicture(line_no))?,
            _ => value.as_bytes().to_vec(),
        };
        let attr = Attribute::new(name, kind, bytes)
            .map_err(|source| AttributeListError::Attribute { line: line_no, source })?;
        out.push(attr);
    }
    Ok(out)
}

/// Inverse of [`parse_attribute_list`]. Names may not contain tabs or line
/// breaks and text values may not contain line breaks.
pub fn format_attribute_list(attributes: &[Attribute]) -> Result<String, AttributeListError> {
    let breaks = |s: &str| s.contains(['\r', '\n']);
    let mut out = String::new();
    for a in attributes {
        let value = match a.kind() {
            AttributeKind::Picture => base64::engine::general_purpose::STANDARD.encode(a.value()),
            _ => a.value_str().unwrap_or_default().to_owned(),
        };
        if breaks(a.name()) || a.name().contains('\t') || breaks(&value) {
            return Err(AttributeListError::Unrepresentable(a.name().to_owned()));
        }
        out.push_str(&format!("{}\t{}\t{}\n", a.kind().as_str(), a.name(), value));
    }
    Ok(out)
}

/// Attribute names the CA is willing to certify, with their kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRegistry {
    names: BTreeMap<String, AttributeKind>,
}

impl Default for AttributeRegistry {
    fn default() -> Self {
        let mut reg = Self {
            names: BTreeMap::new(),
        };
        for name in [FULL_NAME, NATIONALITY, PLACE_OF_BIRTH, CURRENT_RESIDENCE] {
            reg.register(name, AttributeKind::Text);
        }
        reg.register(DATE_OF_BIRTH, AttributeKind::Date);
        reg.register(ID_PICTURE, AttributeKind::Picture);
        reg
    }
}

impl AttributeRegistry {
    pub fn empty() -> Self {
        Self {
            names: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, kind: AttributeKind) -> &mut Self {
        self.names.insert(name.to_owned(), kind);
        self
    }

    pub fn kind_of(&self, name: &str) -> Option<AttributeKind> {
        self.names.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, AttributeKind)> {
        self.names.iter().map(|(n, k)| (n.as_str(), *k))
    }

    pub fn check(&self, attribute: &Attribute) -> Result<(), CredentialError> {
        match self.kind_of(attribute.name()) {
            None => Err(CredentialError::UnknownName(attribute.name().to_owned())),
            Some(kind) if kind != attribute.kind() => Err(CredentialError::KindMismatch {
                name: attribute.name().to_owned(),
                expected: kind,
            }),
            Some(_) => Ok(()),
        }
    }
}

/// Length-prefixed `kind, name, value`; injective by construction.
pub fn encode_attribute(attribute: &Attribute) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.u8(attribute.kind as u8)
        .str(&attribute.name)
        .field(&attribute.value);
    enc.finish()
}

pub fn decode_attribute(bytes: &[u8]) -> Result<Attribute, DecodeError> {
    let mut dec = Decoder::new(bytes);
    let kind = dec.u8("kind")?;
    let kind = AttributeKind::from_tag(kind).ok_or(DecodeError::UnexpectedTag(kind))?;
    let name = dec.str("name")?;
    let value = dec.field()?.to_vec();
    dec.finish()?;
    Attribute::new(name, kind, value).map_err(|_| DecodeError::InvalidField("attribute"))
}

/// Length-prefixed `modulus, exponent`.
pub fn encode_key(vk: &VerificationKey) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.uint(vk.modulus()).uint(vk.exponent());
    enc.finish()
}

pub fn decode_key(bytes: &[u8]) -> Result<VerificationKey, DecodeError> {
    let mut dec = Decoder::new(bytes);
    let modulus = dec.uint("modulus")?;
    let e = dec.uint("exponent")?;
    dec.finish()?;
    VerificationKey::new(e, modulus).map_err(|_| DecodeError::InvalidField("key"))
}

/// SHA-256 of a verification key's canonical encoding.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeyId(pub [u8; 32]);

impl KeyId {
    pub fn of(vk: &VerificationKey) -> Self {
        Self(Sha256::digest(encode_key(vk)).into())
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..8])
    }
}

impl fmt::Debug for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyId({})", self.short())
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedAttribute {
    pub attribute: Attribute,
    pub signature: Signature,
    pub ca_key_id: KeyId,
    pub bound_user_key: VerificationKey,
}

impl SignedAttribute {
    /// `OBLV-ATTR` file contents.
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::with_header(ATTR_MAGIC);
        enc.field(&encode_attribute(&self.attribute))
            .field(&self.signature.to_bytes())
            .field(&self.ca_key_id.0)
            .field(&encode_key(&self.bound_user_key));
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::with_header(bytes, ATTR_MAGIC)?;
        let attribute = decode_attribute(dec.field()?)?;
        let signature = dec.uint("signature")?;
        let ca_key_id: [u8; 32] = dec
            .field()?
            .try_into()
            .map_err(|_| DecodeError::InvalidField("ca_key_id"))?;
        let bound_user_key = decode_key(dec.field()?)?;
        dec.finish()?;
        Ok(Self {
            attribute,
            signature: Signature::from_value(signature),
            ca_key_id: KeyId(ca_key_id),
            bound_user_key,
        })
    }

    /// Checks this one signature on its own (one exponentiation).
    pub fn verify(&self, vk_ca: &VerificationKey, counter: &mut OpCounter) -> Result<(), CredentialError> {
        if self.ca_key_id != KeyId::of(vk_ca) {
            return Err(CredentialError::MixedCaKeys);
        }
        let digest = attribute_digest(&self.attribute, &self.bound_user_key, vk_ca.modulus());
        rsa_fdh::verify_digest(vk_ca, &self.signature, &digest, counter)?;
        Ok(())
    }
}

/// `H(a ‖ vk_U)` in the CA's domain.
pub fn attribute_digest(
    attribute: &Attribute,
    vk_u: &VerificationKey,
    ca_modulus: &BigUint,
) -> rsa_fdh::Digest {
    digest_with_key_bytes(attribute, &encode_key(vk_u), ca_modulus)
}

fn digest_with_key_bytes(attribute: &Attribute, key: &[u8], ca_modulus: &BigUint) -> rsa_fdh::Digest {
    FullDomainHash::default().digest_parts(&[&encode_attribute(attribute), key], ca_modulus)
}

fn ensure_unique_names<'a>(names: impl Iterator<Item = &'a str>) -> Result<(), CredentialError> {
    let mut seen = BTreeSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(CredentialError::Duplicate(name.to_owned()));
        }
    }
    Ok(())
}

/// Certifies every attribute for `vk_u`, preserving order.
///
/// Evidence checking happens before this call; the CA signs what it is given.
pub fn ca_sign_attributes(
    sk_ca: &SigningKey,
    vk_u: &VerificationKey,
    attributes: &[Attribute],
) -> Result<Vec<SignedAttribute>, CredentialError> {
    if attributes.is_empty() {
        return Err(CredentialError::Empty);
    }
    ensure_unique_names(attributes.iter().map(Attribute::name))?;
    let ca_key_id = KeyId::of(sk_ca.verification_key());
    let key = encode_key(vk_u);
    let mut counter = OpCounter::new();
    Ok(attributes
        .iter()
        .map(|a| {
            let digest = digest_with_key_bytes(a, &key, sk_ca.modulus());
            SignedAttribute {
                attribute: a.clone(),
                signature: rsa_fdh::sign_digest(sk_ca, &digest, &mut counter),
                ca_key_id,
                bound_user_key: vk_u.clone(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedSignature {
    value: BigUint,
    count: usize,
}

impl PackedSignature {
    pub fn new(value: BigUint, count: usize) -> Self {
        Self { value, count }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

pub fn pack(vk_ca: &VerificationKey, signed: &[SignedAttribute]) -> Result<PackedSignature, CredentialError> {
    pack_counted(vk_ca, signed, &mut OpCounter::new())
}

/// Multiplies the signatures modulo `N_CA`; performs no exponentiation.
pub fn pack_counted(
    vk_ca: &VerificationKey,
    signed: &[SignedAttribute],
    counter: &mut OpCounter,
) -> Result<PackedSignature, CredentialError> {
    let first = signed.first().ok_or(CredentialError::Empty)?;
    let ca_key_id = KeyId::of(vk_ca);
    if signed.iter().any(|s| s.ca_key_id != ca_key_id) {
        return Err(CredentialError::MixedCaKeys);
    }
    if signed.iter().any(|s| s.bound_user_key != first.bound_user_key) {
        return Err(CredentialError::MixedUserKeys);
    }
    ensure_unique_names(signed.iter().map(|s| s.attribute.name()))?;
    let n = vk_ca.modulus();
    let mut value = first.signature.value() % n;
    for s in &signed[1..] {
        value = counter.mul_mod(&value, s.signature.value(), n);
    }
    Ok(PackedSignature {
        value,
        count: signed.len(),
    })
}

pub fn verify_packed(
    vk_ca: &VerificationKey,
    vk_u: &VerificationKey,
    packed: &PackedSignature,
    attributes: &[Attribute],
) -> Result<(), CredentialError> {
    verify_packed_counted(vk_ca, vk_u, packed, attributes, &mut OpCounter::new())
}

/// Checks `∏ H(a_i ‖ vk_U) ≡ P^e (mod N_CA)`: one exponentiation for any
/// number of attributes.
pub fn verify_packed_counted(
    vk_ca: &VerificationKey,
    vk_u: &VerificationKey,
    packed: &PackedSignature,
    attributes: &[Attribute],
    counter: &mut OpCounter,
) -> Result<(), CredentialError> {
    if attributes.is_empty() {
        return Err(CredentialError::Empty);
    }
    if attributes.len() != packed.count {
        return Err(CredentialError::CountMismatch {
            packed: packed.count,
            claimed: attributes.len(),
        });
    }
    ensure_unique_names(attributes.iter().map(Attribute::name))?;
    let n = vk_ca.modulus();
    if &packed.value >= n {
        return Err(CredentialError::Malformed);
    }
    let key = encode_key(vk_u);
    let mut product = BigUint::one();
    for a in attributes {
        let digest = digest_with_key_bytes(a, &key, n);
        product = counter.mul_mod(&product, digest.value(), n);
    }
    if counter.pow_mod(&packed.value, vk_ca.exponent(), n) == product {
        Ok(())
    } else {
        Err(CredentialError::Rejected)
    }
}

/// Baseline: verify each signed attribute on its own (`l` exponentiations).
pub fn verify_individually(
    vk_ca: &VerificationKey,
    signed: &[SignedAttribute],
    counter: &mut OpCounter,
) -> Result<(), CredentialError> {
    if signed.is_empty() {
        return Err(CredentialError::Empty);
    }
    signed.iter().try_for_each(|s| s.verify(vk_ca, counter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rsa_fdh::keypair_from_primes;

    fn toy(p: u32, q: u32) -> (SigningKey, VerificationKey) {
        keypair_from_primes(&p.into(), &q.into(), &17u32.into()).unwrap()
    }

    fn alice() -> Vec<Attribute> {
        vec![
            Attribute::text(FULL_NAME, "Alice Schmidt").unwrap(),
            Attribute::text(NATIONALITY, "German").unwrap(),
            Attribute::date(DATE_OF_BIRTH, "29.07.1984").unwrap(),
        ]
    }

    #[test]
    fn date_attributes_must_parse() {
        assert!(Attribute::date(DATE_OF_BIRTH, "1984-07-29").is_err());
        assert!(Attribute::date(DATE_OF_BIRTH, "31.02.1984").is_err());
        assert!(Attribute::date(DATE_OF_BIRTH, "9.7.1984").is_err());
        assert_eq!(
            Attribute::date(DATE_OF_BIRTH, "29.07.1984").unwrap().date_value(),
            NaiveDate::from_ymd_opt(1984, 7, 29)
        );
        assert_eq!(Attribute::text("", "x"), Err(CredentialError::EmptyName));
    }

    #[test]
    fn registry_checks_name_and_kind() {
        let reg = AttributeRegistry::default();
        reg.check(&alice()[0]).unwrap();
        assert!(matches!(
            reg.check(&Attribute::text("Shoe Size", "42").unwrap()),
            Err(CredentialError::UnknownName(_))
        ));
        assert!(matches!(
            reg.check(&Attribute::text(DATE_OF_BIRTH, "29.07.1984").unwrap()),
            Err(CredentialError::KindMismatch { .. })
        ));
    }

    #[test]
    fn attribute_encoding_round_trips_and_is_injective() {
        let a = Attribute::text(NATIONALITY, "German").unwrap();
        assert_eq!(decode_attribute(&encode_attribute(&a)).unwrap(), a);
        let ab = Attribute::text("AB", "C").unwrap();
        let a_bc = Attribute::text("A", "BC").unwrap();
        assert_ne!(encode_attribute(&ab), encode_attribute(&a_bc));
    }

    #[test]
    fn attribute_list_round_trip() {
        let text = "# alice\ntext\tFull Name\tAlice Schmidt\n\ndate\tDate of Birth\t29.07.1984\npicture\tID Picture\tAQID\n";
        let attrs = parse_attribute_list(text).unwrap();
        assert_eq!(attrs.len(), 3);
        assert_eq!(attrs[2].value(), &[1, 2, 3]);
        assert_eq!(parse_attribute_list(&format_attribute_list(&attrs).unwrap()).unwrap(), attrs);
        assert_eq!(parse_attribute_list("text\tName\tAlice\r\n").unwrap()[0].value(), b"Alice");
        assert_eq!(parse_attribute_list("text\tName\tAlice\r\r\n"), Err(AttributeListError::Syntax(1)));
        let broken = Attribute::text("Name", "two\nlines").unwrap();
        assert!(matches!(format_attribute_list(&[broken]), Err(AttributeListError::Unrepresentable(_))));
        assert_eq!(parse_attribute_list("text Full Name"), Err(AttributeListError::Syntax(1)));
        assert!(matches!(
            parse_attribute_list("\nblob\tx\ty"),
            Err(AttributeListError::UnknownKind(2, _))
        ));
        assert!(matches!(
            parse_attribute_list("date\tDate of Birth\t1984-07-29"),
            Err(AttributeListError::Attribute { line: 1, .. })
        ));
        assert_eq!(parse_attribute_list("picture\tP\t!!"), Err(AttributeListError::BadPicture(1)));
    }

    #[test]
    fn encode_key_golden_bytes() {
        // len=2 ‖ 0x0CA1 (3233) ‖ len=1 ‖ 0x11 (17), computed by hand.
        let (_, vk) = toy(61, 53);
        assert_eq!(
            encode_key(&vk),
            vec![0, 0, 0, 2, 0x0c, 0xa1, 0, 0, 0, 1, 0x11]
        );
        assert_eq!(decode_key(&encode_key(&vk)).unwrap(), vk);
    }

    #[test]
    fn sign_rejects_empty_and_duplicates() {
        let (sk, vk) = toy(61, 53);
        assert_eq!(ca_sign_attributes(&sk, &vk, &[]), Err(CredentialError::Empty));
        let dup = vec![
            Attribute::text(FULL_NAME, "A").unwrap(),
            Attribute::text(FULL_NAME, "B").unwrap(),
        ];
        assert_eq!(
            ca_sign_attributes(&sk, &vk, &dup),
            Err(CredentialError::Duplicate(FULL_NAME.into()))
        );
    }

    #[test]
    fn single_attribute_verifies_with_plain_rsa() {
        let (sk_ca, vk_ca) = toy(61, 53);
        let (_, vk_u) = toy(67, 71);
        let attrs = vec![Attribute::text(NATIONALITY, "German").unwrap()];
        let signed = ca_sign_attributes(&sk_ca, &vk_u, &attrs).unwrap();
        let message = [encode_attribute(&attrs[0]), encode_key(&vk_u)].concat();
        rsa_fdh::verify(&vk_ca, &signed[0].signature, &message).unwrap();
    }

    #[test]
    fn binding_to_user_key_changes_signature() {
        // Frozen from a Python FDH/modpow oracle over the same encodings.
        let (sk_ca, _) = toy(61, 53);
        let (_, vk_a) = toy(67, 71);
        let (_, vk_b) = toy(89, 97);
        let attrs = vec![Attribute::text(NATIONALITY, "German").unwrap()];
        let sa = ca_sign_attributes(&sk_ca, &vk_a, &attrs).unwrap();
        let sb = ca_sign_attributes(&sk_ca, &vk_b, &attrs).unwrap();
        assert_eq!(sa[0].signature.value(), &BigUint::from(1521u32));
        assert_eq!(sb[0].signature.value(), &BigUint::from(1067u32));
    }

    #[test]
    fn pack_product_oracle() {
        let (_, vk_ca) = toy(61, 53);
        let (_, vk_u) = toy(67, 71);
        let id = KeyId::of(&vk_ca);
        let signed: Vec<_> = [5u32, 7, 11]
            .iter()
            .enumerate()
            .map(|(i, &s)| SignedAttribute {
                attribute: Attribute::text(format!("A{i}"), "v").unwrap(),
                signature: Signature::from_value(s.into()),
                ca_key_id: id,
                bound_user_key: vk_u.clone(),
            })
            .collect();
        let mut counter = OpCounter::new();
        let packed = pack_counted(&vk_ca, &signed, &mut counter).unwrap();
        assert_eq!(packed.value(), &BigUint::from(385u32));
        assert_eq!(packed.count(), 3);
        assert_eq!(counter.modexp(), 0);
        let single = pack(&vk_ca, &signed[..1]).unwrap();
        assert_eq!((single.value(), single.count()), (&BigUint::from(5u32), 1));
    }

    #[test]
    fn pack_rejects_mixed_keys() {
        let (sk_ca, vk_ca) = toy(61, 53);
        let (sk_ca2, _) = toy(89, 97);
        let (_, vk_a) = toy(67, 71);
        let (_, vk_b) = toy(107, 109);
        let a = ca_sign_attributes(&sk_ca, &vk_a, &alice()[..1]).unwrap();
        let b = ca_sign_attributes(&sk_ca, &vk_b, &alice()[1..2]).unwrap();
        let c = ca_sign_attributes(&sk_ca2, &vk_a, &alice()[1..2]).unwrap();
        assert_eq!(pack(&vk_ca, &[]), Err(CredentialError::Empty));
        assert_eq!(
            pack(&vk_ca, &[a[0].clone(), b[0].clone()]),
            Err(CredentialError::MixedUserKeys)
        );
        assert_eq!(
            pack(&vk_ca, &[a[0].clone(), c[0].clone()]),
            Err(CredentialError::MixedCaKeys)
        );
        assert_eq!(
            pack(&vk_ca, &[a[0].clone(), a[0].clone()]),
            Err(CredentialError::Duplicate(FULL_NAME.into()))
        );
    }

    #[test]
    fn verify_packed_error_paths() {
        let (sk_ca, vk_ca) = toy(61, 53);
        let (_, vk_u) = toy(67, 71);
        let attrs = alice();
        let signed = ca_sign_attributes(&sk_ca, &vk_u, &attrs).unwrap();
        let packed = pack(&vk_ca, &signed).unwrap();
        let mut counter = OpCounter::new();
        verify_packed_counted(&vk_ca, &vk_u, &packed, &attrs, &mut counter).unwrap();
        assert_eq!(counter.modexp(), 1);

        let mut counter = OpCounter::new();
        assert_eq!(
            verify_packed_counted(&vk_ca, &vk_u, &packed, &attrs[..2], &mut counter),
            Err(CredentialError::CountMismatch { packed: 3, claimed: 2 })
        );
        assert_eq!(counter, OpCounter::new());
        let oversized = PackedSignature::new(vk_ca.modulus().clone(), 3);
        assert_eq!(
            verify_packed(&vk_ca, &vk_u, &oversized, &attrs),
            Err(CredentialError::Malformed)
        );
        assert_eq!(
            verify_packed(&vk_ca, &vk_u, &packed, &[]),
            Err(CredentialError::Empty)
        );
    }

    #[test]
    fn wrong_user_key_rejects_for_every_toy_pair() {
        let (sk_ca, vk_ca) = toy(61, 53);
        let users: Vec<_> = [(67u32, 71u32), (89, 97), (107, 109)]
            .iter()
            .map(|&(p, q)| toy(p, q).1)
            .collect();
        for (i, owner) in users.iter().enumerate() {
            let signed = ca_sign_attributes(&sk_ca, owner, &alice()).unwrap();
            let packed = pack(&vk_ca, &signed).unwrap();
            for (j, claimant) in users.iter().enumerate() {
                let res = verify_packed(&vk_ca, claimant, &packed, &alice());
                assert_eq!(res.is_ok(), i == j, "owner {i}, claimant {j}");
            }
        }
    }

    #[test]
    fn individual_verification_costs_one_exponentiation_each() {
        let (sk_ca, vk_ca) = toy(61, 53);
        let (_, vk_u) = toy(67, 71);
        let signed = ca_sign_attributes(&sk_ca, &vk_u, &alice()).unwrap();
        let mut counter = OpCounter::new();
        verify_individually(&vk_ca, &signed, &mut counter).unwrap();
        assert_eq!(counter.modexp(), 3);
    }

    #[test]
    fn signed_attribute_file_round_trip() {
        let (sk_ca, _) = toy(61, 53);
        let (_, vk_u) = toy(67, 71);
        let signed = ca_sign_attributes(&sk_ca, &vk_u, &alice()).unwrap();
        let bytes = signed[2].encode();
        assert!(bytes.starts_with(b"OBLV-ATTR\x01"));
        assert_eq!(SignedAttribute::decode(&bytes).unwrap(), signed[2]);
        assert!(SignedAttribute::decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
