//! Proof certificates and their independent exact verifier.
//!
//! A certificate lists, per block, rational multipliers on regenerated
//! integral constraints, nonnegative multipliers on signed minor products
//! (each with its own Gram decomposition) and a weighted sum of squares. The
//! verifier rebuilds the target and every constraint from the header and the
//! provenance records, expands the identity and requires a zero residual.

use std::path::Path;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{divergence_constraint, pair_scalar_constraints, HessianBilinearForm};
use crate::diffform::{Axis, DiffMonomial, DiffPoly};
use crate::dimension::Dimension;
use crate::rational::{format_rational, parse_rational, Rational};
use crate::symmetry::{symmetrize, target_components, SymmetrizedTarget};
use crate::targets::{target_e, TargetFamily};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProofPath {
    /// The target over concrete axes `1..n`.
    Concrete,
    /// One-index kernels over an abstract axis.
    Singles,
    /// Two-index kernels regrouped over abstract `a < b`, with two free scalars.
    Pairs,
    /// Three-index kernels regrouped over abstract `a < b < c`.
    Triples,
}

impl ProofPath {
    pub fn arity(self) -> Option<usize> {
        match self {
            ProofPath::Concrete => None,
            ProofPath::Singles => Some(1),
            ProofPath::Pairs => Some(2),
            ProofPath::Triples => Some(3),
        }
    }

    /// Kernels of the free scalar terms carried by this path.
    pub fn scalar_kernels(self) -> Vec<DiffPoly> {
        match self {
            ProofPath::Pairs => {
                let ax = Axis::abstract_range(2);
                pair_scalar_constraints(ax[0], ax[1]).to_vec()
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema: u32,
    pub tool: String,
    /// Conjecture label, `C1`, `C2` or `C3`.
    pub conjecture: String,
    pub m: u32,
    /// Concrete dimension or `n`.
    pub n: String,
    pub log_concave: bool,
    pub path: ProofPath,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegralTerm {
    pub generator: String,
    pub axis: String,
    pub coeff: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareTerm {
    pub weight: String,
    pub vector: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyTerm {
    /// Principal minors of `p Hess p - grad p grad p^T`, as row indices into the axes.
    pub minors: Vec<Vec<usize>>,
    pub half_basis: Vec<String>,
    pub multiplier: String,
    pub gram: Vec<SquareTerm>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCertificate {
    pub label: String,
    pub prefactor: String,
    pub basis: Vec<String>,
    pub integral: Vec<IntegralTerm>,
    pub families: Vec<FamilyTerm>,
    pub sos: Vec<SquareTerm>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofCertificate {
    pub header: Header,
    pub axes: Vec<String>,
    pub scalars: Vec<String>,
    /// Each free scalar kernel as a combination of integral constraints.
    pub scalar_witness: Vec<Vec<IntegralTerm>>,
    pub blocks: Vec<BlockCertificate>,
}

#[derive(Debug, Error)]
pub enum CertificateIoError {
    #[error("reading certificate: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed certificate: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("certificate schema {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
}

impl ProofCertificate {
    /// Canonical text: pretty JSON with sorted keys and a trailing newline.
    pub fn to_canonical_string(&self) -> String {
        let value = serde_json::to_value(self).expect("certificate serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CertificateIoError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("header").and_then(|h| h.get("schema")).and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(CertificateIoError::Version { found, expected: SCHEMA_VERSION });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), CertificateIoError> {
        std::fs::write(path, self.to_canonical_string())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CertificateIoError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum VerifyFailure {
    #[error("parse: {0}")]
    Parse(String),
    #[error("header: {0}")]
    Header(String),
    #[error("identity: block {block} leaves residual term {monomial} with coefficient {coeff}")]
    Identity { block: String, monomial: String, coeff: String },
    #[error("psd: {0}")]
    Psd(String),
    #[error("multiplier: {0}")]
    Multiplier(String),
    #[error("scalar witness {0} does not reproduce its scalar term")]
    ScalarWitness(usize),
}

/// What a passing certificate proves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verified {
    pub conjecture: String,
    pub m: u32,
    pub dimension: Dimension,
    /// For a generic dimension, the statement holds for every `n` from here on.
    pub valid_from: usize,
    pub blocks: usize,
}

fn parse_q(s: &str) -> Result<Rational, VerifyFailure> {
    parse_rational(s).map_err(|e| VerifyFailure::Parse(e.0))
}

fn parse_mono(s: &str) -> Result<DiffMonomial, VerifyFailure> {
    s.parse::<DiffMonomial>().map_err(|e| VerifyFailure::Parse(format!("monomial `{s}`: {e}")))
}

fn parse_axis(s: &str) -> Result<Axis, VerifyFailure> {
    s.parse::<Axis>().map_err(|e| VerifyFailure::Parse(format!("axis `{s}`: {e}")))
}

/// `sum_i w_i (sum_j v_ij m_j)^2` over the given monomials; weights must be nonnegative.
fn expand_squares(terms: &[SquareTerm], basis: &[DiffMonomial], what: &str) -> Result<DiffPoly, VerifyFailure> {
    let mut out = DiffPoly::zero();
    for t in terms {
        let w = parse_q(&t.weight)?;
        if w.is_negative() {
            return Err(VerifyFailure::Psd(format!("{what} has negative weight {}", t.weight)));
        }
        if t.vector.len() != basis.len() {
            return Err(VerifyFailure::Parse(format!("{what}: vector length {} for a basis of {}", t.vector.len(), basis.len())));
        }
        let mut lin = DiffPoly::zero();
        for (c, m) in t.vector.iter().zip(basis) {
            lin.add_term(m.clone(), parse_q(c)?);
        }
        out.add_scaled(&(&lin * &lin), &w);
    }
    Ok(out)
}

fn integral_sum(terms: &[IntegralTerm], m: u32, axes: &[Axis]) -> Result<DiffPoly, VerifyFailure> {
    let mut out = DiffPoly::zero();
    for t in terms {
        let g = parse_mono(&t.generator)?;
        if g.degree() != 2 * m - 1 || g.total_order() != 2 * m - 1 {
            return Err(VerifyFailure::Multiplier(format!("generator {} is not of degree and total order {}", t.generator, 2 * m - 1)));
        }
        let axis = parse_axis(&t.axis)?;
        if !axes.contains(&axis) || g.axes().any(|a| !axes.contains(&a)) {
            return Err(VerifyFailure::Multiplier(format!("constraint ({}, {}) uses axes outside the certificate", t.generator, t.axis)));
        }
        out.add_scaled(&divergence_constraint(m, &g, axis), &parse_q(&t.coeff)?);
    }
    Ok(out)
}

struct RegeneratedBlock {
    label: String,
    prefactor: String,
    base: DiffPoly,
    scalar_parts: Vec<DiffPoly>,
}

fn regenerate(header: &Header, family: TargetFamily, dimension: Dimension) -> Result<(Vec<Axis>, Vec<RegeneratedBlock>, usize), VerifyFailure> {
    let target = target_e(family, header.m, dimension).map_err(|e| VerifyFailure::Header(e.to_string()))?;
    match header.path.arity() {
        None => {
            let n = dimension.concrete().ok_or_else(|| VerifyFailure::Header("concrete path needs a concrete dimension".into()))?;
            let form = target.concrete().map_err(|e| VerifyFailure::Header(e.to_string()))?.clone();
            let block = RegeneratedBlock { label: "E".into(), prefactor: "1".into(), base: form, scalar_parts: vec![] };
            Ok((Axis::concrete_range(n), vec![block], n))
        }
        Some(arity) => {
            if arity != target.kernels.arity {
                return Err(VerifyFailure::Header(format!("path arity {arity} does not match order {}", header.m)));
            }
            let scalars = header.path.scalar_kernels();
            let comps = target_components(&target.kernels, &scalars);
            let sym: SymmetrizedTarget = symmetrize(&comps, arity, dimension, scalars.len()).map_err(|e| VerifyFailure::Header(e.to_string()))?;
            let valid_from = match dimension {
                Dimension::Concrete(n) => n,
                Dimension::Generic => sym.valid_from(),
            };
            let blocks = sym
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| RegeneratedBlock {
                    label: format!("L{}", i + 1),
                    prefactor: b.prefactor_text(),
                    base: b.base.clone(),
                    scalar_parts: b.scalar_parts.clone(),
                })
                .collect();
            Ok((sym.axes, blocks, valid_from))
        }
    }
}

/// Label and prefactor text the prover writes for regenerated blocks.
pub fn block_labels(header: &Header) -> Result<Vec<(String, String)>, VerifyFailure> {
    let (family, dimension) = header_target(header)?;
    Ok(regenerate(header, family, dimension)?.1.into_iter().map(|b| (b.label, b.prefactor)).collect())
}

fn header_target(header: &Header) -> Result<(TargetFamily, Dimension), VerifyFailure> {
    if header.schema != SCHEMA_VERSION {
        return Err(VerifyFailure::Header(format!("schema {} is not supported", header.schema)));
    }
    let family: TargetFamily = header.conjecture.parse().map_err(VerifyFailure::Header)?;
    if !header.conjecture.starts_with('C') {
        return Err(VerifyFailure::Header(format!("unknown conjecture `{}`", header.conjecture)));
    }
    let dimension: Dimension = header.n.parse().map_err(VerifyFailure::Header)?;
    Ok((family, dimension))
}

fn expect_zero(block: &str, residual: &DiffPoly) -> Result<(), VerifyFailure> {
    match residual.leading() {
        None => Ok(()),
        Some((m, c)) => Err(VerifyFailure::Identity { block: block.into(), monomial: m.to_string(), coeff: format_rational(c) }),
    }
}

pub fn verify(cert: &ProofCertificate) -> Result<Verified, VerifyFailure> {
    let header = &cert.header;
    let (family, dimension) = header_target(header)?;
    let (axes, blocks, valid_from) = regenerate(header, family, dimension)?;
    let cert_axes: Vec<Axis> = cert.axes.iter().map(|a| parse_axis(a)).collect::<Result<_, _>>()?;
    if cert_axes != axes {
        return Err(VerifyFailure::Header("axes differ from the regenerated ones".into()));
    }
    if blocks.len() != cert.blocks.len() {
        return Err(VerifyFailure::Header(format!("expected {} blocks, found {}", blocks.len(), cert.blocks.len())));
    }
    let nscalars = header.path.scalar_kernels().len();
    if cert.scalars.len() != nscalars || cert.scalar_witness.len() != nscalars {
        return Err(VerifyFailure::Header(format!("expected {nscalars} scalars with witnesses")));
    }
    let scalars: Vec<Rational> = cert.scalars.iter().map(|s| parse_q(s)).collect::<Result<_, _>>()?;
    let m = header.m;
    for (s, (kernel, witness)) in header.path.scalar_kernels().iter().zip(&cert.scalar_witness).enumerate() {
        if &integral_sum(witness, m, &axes)? != kernel {
            return Err(VerifyFailure::ScalarWitness(s));
        }
    }
    let lform = HessianBilinearForm::new(&axes);
    for (regen, block) in blocks.iter().zip(&cert.blocks) {
        if regen.label != block.label || regen.prefactor != block.prefactor {
            return Err(VerifyFailure::Header(format!("block {} / {} does not match regenerated {} / {}", block.label, block.prefactor, regen.label, regen.prefactor)));
        }
        let mut residual = regen.base.clone();
        for (part, c) in regen.scalar_parts.iter().zip(&scalars) {
            residual.add_scaled(part, c);
        }
        residual = &residual - &integral_sum(&block.integral, m, &axes)?;
        if !block.families.is_empty() && !header.log_concave {
            return Err(VerifyFailure::Header("log-concave multipliers in a certificate without the log-concave flag".into()));
        }
        for (fi, fam) in block.families.iter().enumerate() {
            let mut product = DiffPoly::one();
            for rows in &fam.minors {
                let mut sorted = rows.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if rows.is_empty() || sorted.len() != rows.len() || rows.iter().any(|&r| r >= axes.len()) {
                    return Err(VerifyFailure::Multiplier(format!("family {fi}: bad minor rows {rows:?}")));
                }
                let det = lform.minor(&sorted);
                product = if sorted.len() % 2 == 1 { &product * &-&det } else { &product * &det };
            }
            let half: Vec<DiffMonomial> = fam.half_basis.iter().map(|s| parse_mono(s)).collect::<Result<_, _>>()?;
            let q: DiffPoly = fam.multiplier.parse().map_err(|e| VerifyFailure::Parse(format!("multiplier: {e}")))?;
            let gram = expand_squares(&fam.gram, &half, &format!("family {fi} Gram"))?;
            if gram != q {
                return Err(VerifyFailure::Psd(format!("family {fi} multiplier is not reproduced by its Gram decomposition")));
            }
            residual = &residual - &(&product * &q);
        }
        let basis: Vec<DiffMonomial> = block.basis.iter().map(|s| parse_mono(s)).collect::<Result<_, _>>()?;
        residual = &residual - &expand_squares(&block.sos, &basis, &format!("block {}", block.label))?;
        expect_zero(&block.label, &residual)?;
    }
    Ok(Verified { conjecture: header.conjecture.clone(), m, dimension, valid_from, blocks: blocks.len() })
}
