mod common;

use common::*;
use costa_sos::certify::{verify, CertificateIoError, ProofCertificate, VerifyFailure};
use costa_sos::rational::{frac, int};
use proptest::prelude::*;

const GOLDEN: [&str; 2] = ["c2_m3_n1", "c2_m2_generic"];

#[test]
fn golden_certificates_verify() {
    let v = verify(&fixture("c2_m3_n1")).unwrap();
    assert_eq!((v.m, v.blocks), (3, 1));
    let v = verify(&fixture("c2_m2_generic")).unwrap();
    assert_eq!((v.blocks, v.valid_from), (3, 2));
}

#[test]
fn rewrite_is_byte_identical() {
    for name in GOLDEN {
        let text = fixture_text(name);
        assert_eq!(ProofCertificate::from_text(&text).unwrap().to_canonical_string(), text);
    }
}

#[test]
fn write_then_read_round_trips() {
    let cert = fixture("c2_m2_generic");
    let path = std::env::temp_dir().join(format!("costa-sos-roundtrip-{}.json", std::process::id()));
    cert.write(&path).unwrap();
    let back = ProofCertificate::read(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(back, cert);
}

#[test]
fn zero_denominator_fails_to_parse() {
    let text = fixture_text("c2_m3_n1").replace("\"3/4\"", "\"3/0\"");
    let cert = ProofCertificate::from_text(&text).unwrap();
    assert!(matches!(verify(&cert), Err(VerifyFailure::Parse(_))));
}

#[test]
fn schema_mismatch_is_explicit() {
    let text = fixture_text("c2_m3_n1").replace("\"schema\": 1", "\"schema\": 2");
    assert!(matches!(ProofCertificate::from_text(&text), Err(CertificateIoError::Version { found: 2, expected: 1 })));
}

#[test]
fn garbage_is_a_parse_error() {
    assert!(matches!(ProofCertificate::from_text("{\"header\": {\"schema\": 1}}"), Err(CertificateIoError::Parse(_))));
    assert!(matches!(ProofCertificate::from_text("not json"), Err(CertificateIoError::Parse(_))));
}

#[test]
fn first_multiplier_set_to_one_breaks_the_identity() {
    let mut cert = fixture("c2_m3_n1");
    let t = cert.blocks[0].integral.iter_mut().find(|t| t.generator == "d[1:1]^5").unwrap();
    assert_eq!(t.coeff, "3/4");
    t.coeff = "1/1".into();
    assert!(matches!(verify(&cert), Err(VerifyFailure::Identity { .. })));
}

#[test]
fn negative_square_weight_is_rejected() {
    let mut cert = fixture("c2_m3_n1");
    cert.blocks[0].sos[0].weight = "-1/2".into();
    assert!(matches!(verify(&cert), Err(VerifyFailure::Psd(_))));
}

#[test]
fn header_tampering_is_rejected() {
    let mut cert = fixture("c2_m3_n1");
    // At n = 1 the C2 and C3 targets coincide, so only a different family breaks it.
    cert.header.conjecture = "C3".into();
    assert!(verify(&cert).is_ok());
    cert.header.conjecture = "C1".into();
    assert!(matches!(verify(&cert), Err(VerifyFailure::Identity { .. })));
    let mut cert = fixture("c2_m3_n1");
    cert.header.m = 2;
    assert!(verify(&cert).is_err());
    let mut cert = fixture("c2_m2_generic");
    cert.blocks.pop();
    assert!(matches!(verify(&cert), Err(VerifyFailure::Header(_))));
    let mut cert = fixture("c2_m2_generic");
    cert.blocks[0].prefactor = "1".into();
    assert!(matches!(verify(&cert), Err(VerifyFailure::Header(_))));
}

#[test]
fn scalar_witness_must_reproduce_its_kernel() {
    let mut cert = fixture("c2_m2_generic");
    cert.scalar_witness[1].clear();
    assert_eq!(verify(&cert).unwrap_err(), VerifyFailure::ScalarWitness(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn single_perturbations_are_rejected(which in 0usize..2, slot in 0usize..1000, num in -20i64..20, den in 1i64..9) {
        prop_assume!(num != 0);
        let cert = fixture(GOLDEN[which]);
        let slot = slot % slot_count(&cert);
        prop_assert!(verify(&perturb(&cert, slot, &frac(num, den))).is_err());
    }
}

#[test]
fn perturbing_every_slot_by_one_is_rejected() {
    for name in GOLDEN {
        let cert = fixture(name);
        for slot in 0..slot_count(&cert) {
            assert!(verify(&perturb(&cert, slot, &int(1))).is_err(), "{name} slot {slot}");
        }
    }
}
