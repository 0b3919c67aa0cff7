use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use oblivion_core::credentials::{
    ca_sign_attributes, decode_attribute, encode_attribute, format_attribute_list, parse_attribute_list,
    Attribute, AttributeKind, SignedAttribute,
};
use oblivion_core::matching::{Article, Matcher, SynonymTable};
use oblivion_core::protocol::build_request;
use oblivion_core::protocol::wire::Message;
use oblivion_core::rsa_fdh::{keygen, KeyFile, SigningKey};
use oblivion_core::services::{Envelope, Scenario};

struct Keys {
    ca: SigningKey,
    user: SigningKey,
}

fn keys() -> &'static Keys {
    static KEYS: OnceLock<Keys> = OnceLock::new();
    KEYS.get_or_init(|| {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        Keys {
            ca: keygen(512, &mut rng).unwrap().0,
            user: keygen(512, &mut rng).unwrap().0,
        }
    })
}

fn attribute() -> impl Strategy<Value = Attribute> {
    let name = "[A-Za-z][A-Za-z ]{0,15}";
    prop_oneof![
        (name, "[^\t\r\n]{0,30}").prop_map(|(n, v)| Attribute::text(n, &v).unwrap()),
        (name, 1u32..=28, 1u32..=12, 1900u32..2030)
            .prop_map(|(n, d, m, y)| Attribute::date(n, &format!("{d:02}.{m:02}.{y}")).unwrap()),
        (name, proptest::collection::vec(any::<u8>(), 0..64))
            .prop_map(|(n, v)| Attribute::new(n, AttributeKind::Picture, v).unwrap()),
    ]
}

fn distinct_attributes(max: usize) -> impl Strategy<Value = Vec<Attribute>> {
    proptest::collection::vec(attribute(), 1..max).prop_map(|attrs| {
        let mut seen = std::collections::BTreeSet::new();
        attrs.into_iter().filter(|a| seen.insert(a.name().to_owned())).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attribute_encoding_round_trips(a in attribute()) {
        prop_assert_eq!(decode_attribute(&encode_attribute(&a)).unwrap(), a);
    }

    #[test]
    fn attribute_lists_round_trip(attrs in proptest::collection::vec(attribute(), 0..8)) {
        let text = format_attribute_list(&attrs).unwrap();
        prop_assert_eq!(parse_attribute_list(&text).unwrap(), attrs);
    }

    #[test]
    fn signed_attributes_round_trip(attrs in distinct_attributes(6)) {
        let k = keys();
        for s in ca_sign_attributes(&k.ca, k.user.verification_key(), &attrs).unwrap() {
            prop_assert_eq!(SignedAttribute::decode(&s.encode()).unwrap(), s);
        }
    }

    #[test]
    fn decoders_reject_garbage_without_panicking(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = Message::decode(&bytes);
        let _ = Envelope::decode(&bytes);
        let _ = SignedAttribute::decode(&bytes);
        let _ = KeyFile::decode(&bytes);
        let _ = decode_attribute(&bytes);
        if let Ok(text) = std::str::from_utf8(&bytes) {
            let _ = parse_attribute_list(text);
            let _ = Article::parse_fixture(text);
            let _ = SynonymTable::parse(text);
            let _ = Scenario::parse(text);
        }
    }

    /// A request discloses only attributes that the article itself matches,
    /// and the request survives the wire unchanged.
    #[test]
    fn requests_disclose_only_matched_attributes(
        attrs in distinct_attributes(6),
        mentioned in proptest::collection::vec(any::<bool>(), 6),
        filler in "[a-z ]{0,40}",
        ts in 0u64..u64::MAX / 2,
    ) {
        let k = keys();
        let text_attrs: Vec<Attribute> = attrs.into_iter().filter(|a| a.kind() == AttributeKind::Text && !a.value().is_empty()).collect();
        prop_assume!(!text_attrs.is_empty());
        let mut body = filler.clone();
        for (a, m) in text_attrs.iter().zip(&mentioned) {
            if *m {
                body.push_str(" . ");
                body.push_str(a.value_str().unwrap());
            }
        }
        let article = Article::new("https://example.org/a", &body, None, vec![]);
        let signed = ca_sign_attributes(&k.ca, k.user.verification_key(), &text_attrs).unwrap();
        let report = Matcher::new(SynonymTable::new()).tag(&article, &text_attrs);
        match build_request(&k.user, k.ca.verification_key(), &signed, &article, &report, ts) {
            Ok(req) => {
                let matched = report.matched_names();
                prop_assert!(req.claimed_attributes.iter().all(|a| matched.contains(a.name())));
                prop_assert_eq!(req.claimed_attributes.len(), matched.len());
                prop_assert!(req.match_report.matches.iter().all(|m| matched.contains(m.attribute_name.as_str())));
                let bytes = Message::Request(req.clone()).encode();
                prop_assert_eq!(Message::decode(&bytes).unwrap(), Message::Request(req));
            }
            Err(_) => prop_assert!(report.matches.is_empty()),
        }
    }
}
