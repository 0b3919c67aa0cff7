//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p oblivion-core --test acceptance`. A criterion
//! passes only if its check holds and it finishes inside its time budget.

use std::time::{Duration, Instant};

use num_bigint::RandBigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use oblivion_core::bench::{self, linear_fit, BenchConfig, BenchKeys};
use oblivion_core::corpus::bench_subject;
use oblivion_core::credentials::{
    ca_sign_attributes, pack, verify_individually, verify_packed, verify_packed_counted, Attribute,
    AttributeKind, PackedSignature, SignedAttribute, DATE_OF_BIRTH, FULL_NAME, NATIONALITY,
};
use oblivion_core::fixtures;
use oblivion_core::matching::{age_on, disambiguate, Affectedness, MatchKind, Matcher};
use oblivion_core::protocol::{build_request, OcpConfig, OcpVerifier, RejectionCode};
use oblivion_core::rsa_fdh::{keygen, OpCounter, SigningKey};
use oblivion_core::services::{
    check_censorship_resistance, enumerate_scenarios, random_scenario, run_over_sockets, run_scenario,
    Scenario, World,
};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn keypair(bits: usize, rng: &mut ChaCha20Rng) -> SigningKey {
    keygen(bits, rng).expect("supported key size").0
}

fn random_attribute(rng: &mut ChaCha20Rng, index: usize) -> Attribute {
    let name = format!("Attribute {index:02}");
    match rng.gen_range(0..3) {
        0 => {
            let len = rng.gen_range(1..40);
            let value: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
            Attribute::text(name, &value).unwrap()
        }
        1 => {
            let value = format!(
                "{:02}.{:02}.{}",
                rng.gen_range(1..=28),
                rng.gen_range(1..=12),
                rng.gen_range(1900..2024)
            );
            Attribute::date(name, &value).unwrap()
        }
        _ => {
            let len = rng.gen_range(1..256);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            Attribute::new(name, AttributeKind::Picture, bytes).unwrap()
        }
    }
}

fn correctness() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let mut failures = 0;
    let mut draws = 0;
    for bits in [512, 1024] {
        let ca = keypair(bits, &mut rng);
        let users: Vec<SigningKey> = (0..4).map(|_| keypair(bits, &mut rng)).collect();
        let vk_ca = ca.verification_key();
        for _ in 0..1000 {
            let user = users.choose(&mut rng).unwrap().verification_key();
            let size = rng.gen_range(1..=12);
            let attrs: Vec<Attribute> = (0..size).map(|i| random_attribute(&mut rng, i)).collect();
            let signed = ca_sign_attributes(&ca, user, &attrs).unwrap();
            let mut subset: Vec<SignedAttribute> =
                signed.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
            if subset.is_empty() {
                subset.push(ca_sign_attributes(&ca, user, &attrs[..1]).unwrap().remove(0));
            }
            subset.shuffle(&mut rng);
            let claimed: Vec<Attribute> = subset.iter().map(|s| s.attribute.clone()).collect();
            let accepted = pack(vk_ca, &subset)
                .map(|p| verify_packed(vk_ca, user, &p, &claimed).is_ok())
                .unwrap_or(false);
            draws += 1;
            if !accepted {
                failures += 1;
            }
        }
    }
    verdict(failures == 0, format!("{draws} honest draws at 512 and 1024 bits, {failures} rejected"))
}

fn unforgeability() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(202);
    let ca = keypair(1024, &mut rng);
    let alice = keypair(1024, &mut rng);
    let mallory = keypair(1024, &mut rng);
    let (vk_ca, vk_a, vk_m) = (ca.verification_key(), alice.verification_key(), mallory.verification_key());
    let attrs = bench_subject(5);
    let signed = ca_sign_attributes(&ca, vk_a, &attrs).unwrap();
    let packed = pack(vk_ca, &signed).unwrap();
    assert!(verify_packed(vk_ca, vk_a, &packed, &attrs).is_ok(), "honest pack must verify");

    let mut attempts = 0;
    let mut false_accepts = 0;
    let mut check = |accepted: bool| {
        attempts += 1;
        if accepted {
            false_accepts += 1;
        }
    };
    for i in 0..attrs.len() {
        let mut fewer = attrs.clone();
        fewer.remove(i);
        check(verify_packed(vk_ca, vk_a, &packed, &fewer).is_ok());
        let recounted = PackedSignature::new(packed.value().clone(), fewer.len());
        check(verify_packed(vk_ca, vk_a, &recounted, &fewer).is_ok());
    }
    for i in 0..attrs.len() {
        let mut mutated = attrs.clone();
        let a = &attrs[i];
        let mut value = a.value().to_vec();
        value.push(b'x');
        mutated[i] = Attribute::new(a.name(), AttributeKind::Text, value).unwrap();
        check(verify_packed(vk_ca, vk_a, &packed, &mutated).is_ok());
    }
    check(verify_packed(vk_ca, vk_m, &packed, &attrs).is_ok());
    let mallory_signed = ca_sign_attributes(&ca, vk_m, &attrs).unwrap();
    let mallory_packed = pack(vk_ca, &mallory_signed).unwrap();
    check(verify_packed(vk_ca, vk_a, &mallory_packed, &attrs).is_ok());
    for _ in 0..1000 {
        let value = rng.gen_biguint_below(vk_ca.modulus());
        check(verify_packed(vk_ca, vk_a, &PackedSignature::new(value, attrs.len()), &attrs).is_ok());
    }
    verdict(
        false_accepts == 0,
        format!("{attempts} forgery attempts (deletions, mutations, key substitution, random values), {false_accepts} accepted"),
    )
}

fn single_exponentiation() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(303);
    let ca = keypair(512, &mut rng);
    let user = keypair(512, &mut rng);
    let (vk_ca, vk_u) = (ca.verification_key(), user.verification_key());
    let signed = ca_sign_attributes(&ca, vk_u, &bench_subject(50)).unwrap();
    let mut mismatches = Vec::new();
    for l in 1..=50 {
        let subset = &signed[..l];
        let attrs: Vec<Attribute> = subset.iter().map(|s| s.attribute.clone()).collect();
        let packed = pack(vk_ca, subset).unwrap();
        let (mut packed_ops, mut individual_ops) = (OpCounter::new(), OpCounter::new());
        let ok = verify_packed_counted(vk_ca, vk_u, &packed, &attrs, &mut packed_ops).is_ok()
            && verify_individually(vk_ca, subset, &mut individual_ops).is_ok();
        if !ok || packed_ops.modexp() != 1 || individual_ops.modexp() != l as u64 {
            mismatches.push(format!("l={l}: packed {} individual {}", packed_ops.modexp(), individual_ops.modexp()));
        }
    }
    if mismatches.is_empty() {
        verdict(true, "packed = 1 and individual = l exponentiations for every l in 1..=50")
    } else {
        verdict(false, mismatches.join("; "))
    }
}

fn throughput() -> Verdict {
    let keys = BenchKeys::generate(1024, 404).unwrap();
    let config = BenchConfig {
        attrs: vec![20],
        warmup: 20,
        ..BenchConfig::default()
    };
    let r = bench::throughput(&keys, &config, 2_000).unwrap();
    let rate = r.extra_value("req_per_s").unwrap();
    let msg = r.extra_value("msg_verify_ms").unwrap();
    let attr = r.extra_value("attr_verify_ms").unwrap();
    let share = r.extra_value("attr_share").unwrap();
    let rate_ok = rate >= 56.0;
    let share_ok = share <= 0.25;
    verdict(
        rate_ok && share_ok,
        format!(
            "{rate:.0} req/s (need >= 56: {}); message-verify {msg:.3} ms + attribute-verify {attr:.3} ms, \
             attribute share {:.1}% (need <= 25%: {})",
            if rate_ok { "met" } else { "missed" },
            share * 100.0,
            if share_ok { "met" } else { "missed" },
        ),
    )
}

fn linearity() -> Verdict {
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for (bits, reps) in [(512, 51), (1024, 25), (2048, 9), (4096, 5)] {
        let keys = BenchKeys::generate(bits, 505).unwrap();
        let config = BenchConfig {
            bits: vec![bits],
            attrs: (1..=50).collect(),
            reps,
            warmup: 1,
            ..BenchConfig::default()
        };
        let xs: Vec<f64> = (1..=50).map(f64::from).collect();
        let min_ms = |rows: &[bench::BenchResult]| -> Vec<f64> {
            rows.iter().map(|r| r.summary().min.as_secs_f64() * 1e3).collect()
        };
        let (_, _, r2_certify) = linear_fit(&xs, &min_ms(&bench::certify(&keys, &config).unwrap()));
        let pack_config = BenchConfig {
            reps: 201,
            ..config
        };
        let (_, _, r2_pack) = linear_fit(&xs, &min_ms(&bench::pack_sweep(&keys, &pack_config).unwrap()));
        worst = worst.min(r2_certify).min(r2_pack);
        parts.push(format!("{bits}: certify R²={r2_certify:.4} pack R²={r2_pack:.4}"));
    }
    verdict(worst >= 0.95, parts.join(", "))
}

fn matching_fixture() -> Verdict {
    let article = fixtures::alice_article();
    let report = Matcher::new(fixtures::synonyms()).tag(&article, &fixtures::alice_attributes());
    let got: Vec<(&str, MatchKind, &str)> = report
        .matches
        .iter()
        .map(|m| (m.attribute_name.as_str(), m.kind, m.matched_text.as_str()))
        .collect();
    let expected = vec![
        (FULL_NAME, MatchKind::Exact, "Alice Schmidt"),
        (NATIONALITY, MatchKind::Synonym, "citizen of Germany"),
        (DATE_OF_BIRTH, MatchKind::AgeDerived, "30 years old"),
    ];
    let dob = fixtures::alice_attributes()[2].date_value().unwrap();
    let age = age_on(dob, article.publication_date().unwrap());
    let decision = disambiguate(&report, 0.5);
    let ok = got == expected && age == Some(30) && decision == Affectedness::Affected && report.is_consistent_with(&article);
    verdict(ok, format!("matches {got:?}, derived age {age:?}, decision {decision:?}"))
}

fn replay() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(707);
    let ca = keypair(1024, &mut rng);
    let user = keypair(1024, &mut rng);
    let vk_ca = ca.verification_key().clone();
    let signed = ca_sign_attributes(&ca, user.verification_key(), &fixtures::alice_attributes()).unwrap();
    let article = fixtures::alice_article();
    let matcher = Matcher::new(fixtures::synonyms());
    let report = matcher.tag(&article, &fixtures::alice_attributes());
    let verifier = OcpVerifier::new(vk_ca.clone(), matcher, OcpConfig::default());
    let window = verifier.config().window_secs;
    let t0 = 1_413_800_000;

    let req = build_request(&user, &vk_ca, &signed, &article, &report, t0).unwrap();
    let first = verifier.verify_request(&req, t0).map(|_| ());
    let second = verifier.verify_request(&req, t0 + 10).map(|_| ());
    let later = t0 + window + 1;
    let stale = verifier.verify_request(&req, later).map(|_| ());
    let fresh = build_request(&user, &vk_ca, &signed, &article, &report, later).unwrap();
    let renewed = verifier.verify_request(&fresh, later).map(|_| ());
    let ok = first.is_ok()
        && second == Err(RejectionCode::Replayed)
        && stale == Err(RejectionCode::StaleTimestamp)
        && renewed.is_ok();
    verdict(
        ok,
        format!(
            "first {first:?}, duplicate after 10 s {second:?}, old request after {window} s {stale:?}, \
             same claim with fresh timestamp {renewed:?}"
        ),
    )
}

fn censorship_resistance() -> Verdict {
    let world = World::generate(808, 512).unwrap();
    let mut exhaustive = 0usize;
    let mut random = 0usize;
    let mut counterexamples = Vec::new();
    let mut check = |scenario: &Scenario| {
        if let Err(c) = check_censorship_resistance(&run_scenario(&world, scenario)) {
            counterexamples.push(format!("{}\n  {c}", scenario.to_script()));
        }
    };
    for scenario in enumerate_scenarios(8) {
        check(&scenario);
        exhaustive += 1;
    }
    for seed in 0..10_000 {
        check(&random_scenario(seed));
        random += 1;
    }
    let detail = format!(
        "{exhaustive} enumerated scenarios (<= 8 steps, <= 1 mutation) and {random} seeded schedules, {} counterexamples",
        counterexamples.len()
    );
    if let Some(first) = counterexamples.first() {
        return verdict(false, format!("{detail}; first:\n{first}"));
    }
    verdict(true, detail)
}

fn transport_equivalence() -> Verdict {
    let world = World::generate(909, 512).unwrap();
    let scenarios: Vec<Scenario> = std::iter::once(Scenario::honest())
        .chain((0..19).map(|s| random_scenario(9_000 + s)))
        .collect();
    let mut differing = Vec::new();
    for (i, s) in scenarios.iter().enumerate() {
        let local = run_scenario(&world, s);
        match run_over_sockets(&world, s) {
            Ok(remote) if remote == local => {}
            Ok(_) => differing.push(format!("#{i} differs")),
            Err(e) => differing.push(format!("#{i} socket error: {e}")),
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} scenarios, {} differing {differing:?}", scenarios.len(), differing.len()),
    )
}

fn main() {
    type Check = fn() -> Verdict;
    let criteria: [(u8, &str, Duration, Check); 9] = [
        (1, "correctness", Duration::from_secs(120), correctness),
        (2, "unforgeability", Duration::from_secs(60), unforgeability),
        (3, "single exponentiation", Duration::MAX, single_exponentiation),
        (4, "throughput", Duration::from_secs(300), throughput),
        (5, "linearity", Duration::from_secs(600), linearity),
        (6, "matching fixture", Duration::MAX, matching_fixture),
        (7, "replay", Duration::MAX, replay),
        (8, "censorship resistance", Duration::from_secs(600), censorship_resistance),
        (9, "transport equivalence", Duration::MAX, transport_equivalence),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == n.to_string()) {
            continue;
        }
        let started = Instant::now();
        let v = check();
        let elapsed = started.elapsed();
        let in_time = elapsed <= budget;
        let passed = v.passed && in_time;
        if !passed {
            failed += 1;
        }
        let limit = if budget == Duration::MAX {
            String::new()
        } else {
            format!(", limit {}s", budget.as_secs())
        };
        println!(
            "{} criterion {n} {name}: {} [{:.1}s{limit}]",
            if passed { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {failed} criteria failed");
}
