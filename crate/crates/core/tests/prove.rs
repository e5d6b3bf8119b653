mod common;

use common::*;
use costa_sos::certify::verify;
use costa_sos::constraints::divergence_constraint;
use costa_sos::diffform::Axis;
use costa_sos::dimension::Dimension;
use costa_sos::pipeline::{prove, Conjecture, PipelineError, ProveOutcome, ProveRequest};
use costa_sos::rational::parse_rational;

fn proved(c: Conjecture, m: u32, n: Dimension, lc: bool) -> costa_sos::certify::ProofCertificate {
    match prove(&ProveRequest::new(c, m, n, lc)).unwrap() {
        ProveOutcome::Proved { certificate, .. } => *certificate,
        ProveOutcome::NoCertificate { reason, .. } => panic!("{c}({m},{n}): {reason}"),
    }
}

#[test]
fn worked_example_uses_the_printed_multipliers() {
    let cert = proved(Conjecture::C2, 3, Dimension::Concrete(1), true);
    verify(&cert).unwrap();
    let printed = worked_example_constraints();
    let multipliers = worked_example_multipliers();
    let block = &cert.blocks[0];
    assert_eq!(block.integral.len(), 6);
    for t in &block.integral {
        let g = t.generator.parse().unwrap();
        let form = divergence_constraint(3, &g, t.axis.parse::<Axis>().unwrap());
        let k = printed.iter().position(|r| *r == form).unwrap_or_else(|| panic!("{} is not one of the printed constraints", t.generator));
        assert_eq!(parse_rational(&t.coeff).unwrap(), multipliers[k], "multiplier of R{}", k + 1);
    }
    assert_eq!(block.basis, ["d[]^2*d[1:3]", "d[]*d[1:1]*d[1:2]", "d[1:1]^3"]);
    assert_eq!(block.sos.len(), 1);
    assert_eq!(block.sos[0].weight, "1/2");
    assert_eq!(block.sos[0].vector, ["1/1", "-3/1", "2/1"]);
}

#[test]
fn printed_target_matches_the_generated_one() {
    let t = costa_sos::targets::target_e(costa_sos::targets::TargetFamily::E2, 3, Dimension::Concrete(1)).unwrap();
    assert_eq!(t.concrete().unwrap(), &worked_example_target());
}

#[test]
fn smaller_instances_prove_and_verify() {
    for (c, m, n, lc) in [
        (Conjecture::C2, 2, Dimension::Concrete(1), false),
        (Conjecture::C3, 2, Dimension::Concrete(2), false),
        (Conjecture::C1, 2, Dimension::Concrete(2), false),
        (Conjecture::C3, 3, Dimension::Concrete(2), true),
        (Conjecture::C2, 2, Dimension::Generic, false),
    ] {
        let cert = proved(c, m, n, lc);
        verify(&cert).unwrap_or_else(|e| panic!("{c}({m},{n}): {e}"));
    }
}

#[test]
fn proving_is_deterministic() {
    let a = proved(Conjecture::C3, 3, Dimension::Concrete(2), true).to_canonical_string();
    let b = proved(Conjecture::C3, 3, Dimension::Concrete(2), true).to_canonical_string();
    assert_eq!(a, b);
}

#[test]
fn unsupported_requests_are_rejected() {
    let invalid = |c, m, n| matches!(prove(&ProveRequest::new(c, m, n, true)), Err(PipelineError::Invalid(_)));
    assert!(invalid(Conjecture::C2, 5, Dimension::Concrete(1)));
    assert!(invalid(Conjecture::C2, 0, Dimension::Concrete(1)));
    assert!(invalid(Conjecture::C3, 1, Dimension::Concrete(1)));
    assert!(invalid(Conjecture::C2, 2, Dimension::Concrete(5)));
    assert!(matches!(prove(&ProveRequest::new(Conjecture::C3, 3, Dimension::Generic, true)), Err(PipelineError::Unsupported(_))));
}
