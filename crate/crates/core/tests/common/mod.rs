#![allow(dead_code)]

use costa_sos::certify::ProofCertificate;
use costa_sos::diffform::{Axis, DerivSymbol, DiffMonomial, DiffPoly};
use costa_sos::rational::{format_rational, frac, int, parse_rational, Rational};

/// Also reached from the cli crate's tests, hence the fallback.
pub fn fixture_dir() -> std::path::PathBuf {
    let here = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let local = here.join("tests/fixtures");
    if local.is_dir() {
        local
    } else {
        here.join("../core/tests/fixtures")
    }
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(format!("{name}.json"))).expect("fixture exists")
}

pub fn fixture(name: &str) -> ProofCertificate {
    ProofCertificate::from_text(&fixture_text(name)).expect("fixture parses")
}

/// Mutable references to every rational coefficient in a certificate.
pub fn coefficient_slots(cert: &mut ProofCertificate) -> Vec<&mut String> {
    let mut out: Vec<&mut String> = Vec::new();
    out.extend(cert.scalars.iter_mut());
    for w in cert.scalar_witness.iter_mut() {
        out.extend(w.iter_mut().map(|t| &mut t.coeff));
    }
    for b in cert.blocks.iter_mut() {
        out.extend(b.integral.iter_mut().map(|t| &mut t.coeff));
        for f in b.families.iter_mut() {
            for g in f.gram.iter_mut() {
                out.push(&mut g.weight);
                out.extend(g.vector.iter_mut());
            }
        }
        for s in b.sos.iter_mut() {
            out.push(&mut s.weight);
            out.extend(s.vector.iter_mut());
        }
    }
    out
}

pub fn slot_count(cert: &ProofCertificate) -> usize {
    coefficient_slots(&mut cert.clone()).len()
}

/// Copy of `cert` with coefficient `slot` shifted by `delta`.
pub fn perturb(cert: &ProofCertificate, slot: usize, delta: &Rational) -> ProofCertificate {
    let mut out = cert.clone();
    let mut slots = coefficient_slots(&mut out);
    let v = parse_rational(slots[slot]).expect("certificate coefficient") + delta;
    *slots[slot] = format_rational(&v);
    out
}

/// `f_k` on a single axis; `f_0` is `p`.
pub fn f(k: u8) -> DiffPoly {
    if k == 0 {
        DiffPoly::p()
    } else {
        DiffPoly::symbol(DerivSymbol::from_orders([(Axis::Concrete(1), k)]))
    }
}

/// Single-axis monomial from `(order, exponent)` pairs.
pub fn mono(spec: &[(u8, u16)]) -> DiffMonomial {
    DiffMonomial::from_factors(spec.iter().map(|&(k, e)| {
        let s = if k == 0 { DerivSymbol::p() } else { DerivSymbol::from_orders([(Axis::Concrete(1), k)]) };
        (s, e)
    }))
}

pub fn term(c: Rational, spec: &[(u8, u16)]) -> DiffPoly {
    DiffPoly::monomial(mono(spec), c)
}

pub fn sum(terms: &[DiffPoly]) -> DiffPoly {
    terms.iter().fold(DiffPoly::zero(), |acc, t| &acc + t)
}

/// The six third-order constraints of the one-dimensional worked example, as printed.
pub fn worked_example_constraints() -> [DiffPoly; 6] {
    let t = |c: i64, s: &[(u8, u16)]| term(int(c), s);
    [
        sum(&[t(5, &[(0, 1), (1, 4), (2, 1)]), t(-4, &[(1, 6)])]),
        sum(&[t(2, &[(0, 3), (1, 1), (2, 1), (3, 1)]), t(1, &[(0, 3), (2, 3)]), t(-2, &[(0, 2), (1, 2), (2, 2)])]),
        sum(&[t(1, &[(0, 4), (1, 1), (5, 1)]), t(1, &[(0, 4), (2, 1), (4, 1)]), t(-1, &[(0, 3), (1, 2), (4, 1)])]),
        sum(&[t(1, &[(0, 3), (1, 2), (4, 1)]), t(2, &[(0, 3), (1, 1), (2, 1), (3, 1)]), t(-2, &[(0, 2), (1, 3), (3, 1)])]),
        sum(&[t(1, &[(0, 2), (1, 3), (3, 1)]), t(3, &[(0, 2), (1, 2), (2, 2)]), t(-3, &[(0, 1), (1, 4), (2, 1)])]),
        sum(&[t(1, &[(0, 4), (2, 1), (4, 1)]), t(1, &[(0, 4), (3, 2)]), t(-1, &[(0, 3), (1, 1), (2, 1), (3, 1)])]),
    ]
}

/// Multipliers of the worked example's final identity, in constraint order.
pub fn worked_example_multipliers() -> [Rational; 6] {
    [frac(3, 4), int(1), frac(1, 4), frac(1, 8), frac(-7, 4), frac(-1, 4)]
}

/// `E_{2,3,1}` as printed in the worked example.
pub fn worked_example_target() -> DiffPoly {
    sum(&[
        term(frac(1, 4), &[(0, 4), (3, 2)]),
        term(frac(-1, 2), &[(0, 3), (1, 1), (3, 1), (2, 1)]),
        term(frac(1, 4), &[(0, 4), (1, 1), (5, 1)]),
        term(frac(-11, 4), &[(0, 2), (1, 2), (2, 2)]),
        term(frac(-1, 8), &[(0, 3), (1, 2), (4, 1)]),
        term(int(1), &[(0, 3), (2, 3)]),
        term(int(3), &[(0, 1), (1, 4), (2, 1)]),
        term(int(-1), &[(1, 6)]),
    ])
}
