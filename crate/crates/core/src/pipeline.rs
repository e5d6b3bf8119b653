//! End-to-end prover: choose a path, build constraints and reductions, solve,
//! rationalize, write a certificate and verify it before returning.

use std::fmt;
use std::time::{Duration, Instant};

use num_traits::Zero;
use thiserror::Error;

use crate::certify::{
    block_labels, verify, BlockCertificate, FamilyTerm, Header, IntegralTerm, ProofCertificate, ProofPath, SquareTerm, VerifyFailure,
    SCHEMA_VERSION, TOOL_VERSION,
};
use crate::constraints::{integral_constraints, single_minor_constraints, IntegralConstraint, LogConcaveConstraint};
use crate::diffform::{Axis, DiffPoly};
use crate::dimension::Dimension;
use crate::rational::{format_rational, Rational};
use crate::reduction::{
    enumerate_basis, independent_forms, intrinsic_relations, reduce_multiplier_products, split_by_elimination_tracked, Elimination,
    IntrinsicRelations, MonomialBasis, ParametricFamily, QuadraticForm,
};
use crate::sdp::{
    assemble, rationalize_and_certify, solve_feasibility, BlockRole, ExactSolution, ExactSosDecomposition, LinearKind, RationalizeOptions,
    SdpError, SdpProblem, SolverOptions, SolverStatus, TargetBlockInput, VarRole,
};
use crate::symmetry::{symmetrize, target_components};
use crate::targets::{target_e, TargetFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Conjecture {
    C1,
    C2,
    C3,
}

impl Conjecture {
    pub fn target(self) -> TargetFamily {
        match self {
            Conjecture::C1 => TargetFamily::E1,
            Conjecture::C2 => TargetFamily::E2,
            Conjecture::C3 => TargetFamily::E3,
        }
    }
}

impl fmt::Display for Conjecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self {
            Conjecture::C1 => 1,
            Conjecture::C2 => 2,
            Conjecture::C3 => 3,
        };
        write!(f, "C{k}")
    }
}

impl std::str::FromStr for Conjecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" => Ok(Conjecture::C1),
            "C2" => Ok(Conjecture::C2),
            "C3" => Ok(Conjecture::C3),
            _ => Err(format!("unknown conjecture `{s}` (expected C1, C2 or C3)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProveRequest {
    pub conjecture: Conjecture,
    pub m: u32,
    pub dimension: Dimension,
    pub log_concave: bool,
    pub solver: SolverOptions,
    pub rational: RationalizeOptions,
}

impl ProveRequest {
    pub fn new(conjecture: Conjecture, m: u32, dimension: Dimension, log_concave: bool) -> Self {
        ProveRequest { conjecture, m, dimension, log_concave, solver: SolverOptions::default(), rational: RationalizeOptions::default() }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("the produced certificate failed verification: {0}")]
    SelfCheck(VerifyFailure),
}

/// Which concrete route handles a request.
pub fn plan(conjecture: Conjecture, m: u32, dimension: Dimension) -> Result<ProofPath, PipelineError> {
    if !(1..=4).contains(&m) {
        return Err(PipelineError::Invalid(format!("order m = {m} is outside 1..=4")));
    }
    if m == 1 && conjecture != Conjecture::C1 {
        return Err(PipelineError::Invalid(format!("{conjecture} needs m >= 2")));
    }
    match dimension {
        Dimension::Concrete(n) if n > 4 => Err(PipelineError::Invalid(format!("dimension n = {n} is outside 1..=4"))),
        Dimension::Concrete(1 | 2) => Ok(ProofPath::Concrete),
        Dimension::Concrete(_) | Dimension::Generic => match m {
            1 => Ok(ProofPath::Singles),
            2 => Ok(ProofPath::Pairs),
            3 if dimension != Dimension::Generic => Ok(ProofPath::Triples),
            _ => Err(PipelineError::Unsupported(format!("{conjecture}({m}, {dimension}) has no implemented symmetrization"))),
        },
    }
}

#[derive(Clone, Debug)]
pub struct PreparedBlock {
    pub label: String,
    pub prefactor: String,
    pub base: DiffPoly,
    pub scalar_parts: Vec<DiffPoly>,
}

/// Everything the solver needs, before any numerics.
#[derive(Clone, Debug)]
pub struct PreparedProblem {
    pub header: Header,
    pub axes: Vec<Axis>,
    pub constraints: Vec<IntegralConstraint>,
    pub elimination: Elimination,
    pub intrinsic: IntrinsicRelations,
    /// Jointly independent quadratic constraints and intrinsic relations.
    pub linear: Vec<(LinearKind, QuadraticForm)>,
    pub families: Vec<(LogConcaveConstraint, ParametricFamily)>,
    pub log_concave_offered: usize,
    pub blocks: Vec<PreparedBlock>,
    pub scalar_kernels: Vec<DiffPoly>,
}

impl PreparedProblem {
    pub fn basis(&self) -> &MonomialBasis {
        &self.elimination.basis
    }
}

/// Counts in the layout of the statistics table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProblemStats {
    pub vars: usize,
    pub integral_constraints: usize,
    pub quadratic: usize,
    pub rules: usize,
    pub intrinsic: usize,
    pub intrinsic_pairwise: usize,
    pub independent: usize,
    pub families: usize,
    pub blocks: usize,
}

impl PreparedProblem {
    pub fn stats(&self) -> ProblemStats {
        ProblemStats {
            vars: self.basis().len(),
            integral_constraints: self.constraints.len(),
            quadratic: self.elimination.quadratic.len(),
            rules: self.elimination.rules.len(),
            intrinsic: self.intrinsic.relations.len(),
            intrinsic_pairwise: self.intrinsic.pairwise_count,
            independent: self.linear.len(),
            families: self.families.len(),
            blocks: self.blocks.len(),
        }
    }
}

pub fn prepare(conjecture: Conjecture, m: u32, dimension: Dimension, log_concave: bool) -> Result<PreparedProblem, PipelineError> {
    let path = plan(conjecture, m, dimension)?;
    let family = conjecture.target();
    let header = Header {
        schema: SCHEMA_VERSION,
        tool: TOOL_VERSION.to_string(),
        conjecture: conjecture.to_string(),
        m,
        n: dimension.to_string(),
        log_concave,
        path,
    };
    let target = target_e(family, m, dimension).map_err(|e| PipelineError::Invalid(e.to_string()))?;
    let labels = block_labels(&header).map_err(|e| PipelineError::Internal(e.to_string()))?;
    let scalar_kernels = path.scalar_kernels();
    let (axes, bases): (Vec<Axis>, Vec<(DiffPoly, Vec<DiffPoly>)>) = match path.arity() {
        None => {
            let n = dimension.concrete().expect("concrete path");
            let form = target.concrete().map_err(|e| PipelineError::Internal(e.to_string()))?.clone();
            (Axis::concrete_range(n), vec![(form, vec![])])
        }
        Some(arity) => {
            let sym = symmetrize(&target_components(&target.kernels, &scalar_kernels), arity, dimension, scalar_kernels.len())
                .map_err(|e| PipelineError::Internal(e.to_string()))?;
            (sym.axes.clone(), sym.blocks.into_iter().map(|b| (b.base, b.scalar_parts)).collect())
        }
    };
    let blocks = labels
        .into_iter()
        .zip(bases)
        .map(|((label, prefactor), (base, scalar_parts))| PreparedBlock { label, prefactor, base, scalar_parts })
        .collect();
    let constraints = integral_constraints(m, &axes).map_err(|e| PipelineError::Internal(e.to_string()))?;
    let forms: Vec<DiffPoly> = constraints.iter().map(|c| c.form.clone()).collect();
    let basis = enumerate_basis(m, &axes);
    let elimination = split_by_elimination_tracked(&forms, &basis);
    let intrinsic = intrinsic_relations(&basis);
    let candidates: Vec<(LinearKind, &QuadraticForm)> = elimination
        .quadratic
        .iter()
        .map(|q| (LinearKind::Quadratic, q))
        .chain(intrinsic.relations.iter().map(|q| (LinearKind::Intrinsic, q)))
        .collect();
    let keep = independent_forms(&candidates.iter().map(|(_, q)| *q).collect::<Vec<_>>());
    let linear = candidates.into_iter().zip(keep).filter(|(_, k)| *k).map(|((kind, q), _)| (kind, q.clone())).collect();
    let mut families = Vec::new();
    let mut log_concave_offered = 0;
    if log_concave {
        let lcs = single_minor_constraints(m, &axes).map_err(|e| PipelineError::Internal(e.to_string()))?;
        log_concave_offered = lcs.len();
        for lc in lcs {
            if let Some(fam) = reduce_multiplier_products(&lc, &elimination) {
                families.push((lc, fam));
            }
        }
    }
    Ok(PreparedProblem {
        header,
        axes,
        constraints,
        elimination,
        intrinsic,
        linear,
        families,
        log_concave_offered,
        blocks,
        scalar_kernels,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum FailureReason {
    /// A target monomial is neither quadratic nor removed by a rewrite rule.
    TargetIrreducible(String),
    /// The solver found no point with nonnegative margin.
    Infeasible { margin: f64 },
    /// Numerically feasible, but no exact decomposition was recovered.
    Rationalization(String),
    SolverFailure(String),
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::TargetIrreducible(m) => write!(f, "target monomial {m} does not reduce to a quadratic form"),
            FailureReason::Infeasible { margin } => write!(f, "the semidefinite program has no feasible point (best margin {margin:.3e})"),
            FailureReason::Rationalization(e) => write!(f, "numerically feasible but rationalization failed: {e}"),
            FailureReason::SolverFailure(e) => write!(f, "solver failure: {e}"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ProveReport {
    pub stats: ProblemStats,
    /// Families whose certified multiplier is nonzero.
    pub families_used: usize,
    pub sdp_vars: usize,
    pub iterations: usize,
    pub margin: f64,
    pub solver_converged: bool,
    pub denom_bound: u64,
    pub kernel_dims: Vec<usize>,
    pub prepare_time: Duration,
    pub solve_time: Duration,
    pub exact_time: Duration,
    pub verify_time: Duration,
    pub total_time: Duration,
}

#[derive(Clone, Debug)]
pub enum ProveOutcome {
    Proved { certificate: Box<ProofCertificate>, report: ProveReport },
    NoCertificate { reason: FailureReason, report: ProveReport },
}

impl ProveOutcome {
    pub fn report(&self) -> &ProveReport {
        match self {
            ProveOutcome::Proved { report, .. } | ProveOutcome::NoCertificate { report, .. } => report,
        }
    }
}

/// Wording for a failed search; the method is incomplete, so failing is not a disproof.
pub const NOT_A_DISPROOF: &str = "no certificate found; this is not a disproof, the sum-of-squares search is incomplete";

fn square_terms(d: &ExactSosDecomposition) -> Vec<SquareTerm> {
    d.terms.iter().map(|t| SquareTerm { weight: format_rational(&t.weight), vector: t.vector.iter().map(format_rational).collect() }).collect()
}

fn integral_terms(elim: &Elimination, constraints: &[IntegralConstraint], form: &DiffPoly) -> Result<Vec<IntegralTerm>, PipelineError> {
    let combo = elim.express(form).ok_or_else(|| PipelineError::Internal("residual lies outside the integral constraint span".into()))?;
    Ok(combo
        .into_iter()
        .map(|(i, c)| IntegralTerm { generator: constraints[i].generator.to_string(), axis: constraints[i].axis.to_string(), coeff: format_rational(&c) })
        .collect())
}

fn build_inputs(prep: &PreparedProblem) -> Result<Vec<TargetBlockInput>, FailureReason> {
    let elim = &prep.elimination;
    let reduce = |p: &DiffPoly| elim.reduce_to_quadratic(p).map_err(|e| FailureReason::TargetIrreducible(e.to_string()));
    prep.blocks
        .iter()
        .map(|b| {
            Ok(TargetBlockInput {
                label: b.label.clone(),
                target: reduce(&b.base)?,
                scalar_parts: b.scalar_parts.iter().map(reduce).collect::<Result<_, _>>()?,
                linear: prep.linear.clone(),
                families: prep.families.iter().map(|(_, f)| f.clone()).collect(),
            })
        })
        .collect()
}

fn build_certificate(prep: &PreparedProblem, problem: &SdpProblem, exact: &ExactSolution) -> Result<(ProofCertificate, usize), PipelineError> {
    let basis = prep.basis();
    let mut scalars = vec![Rational::zero(); prep.scalar_kernels.len()];
    for (var, y) in problem.vars.iter().zip(&exact.y) {
        if let VarRole::Scalar(s) = var.role {
            scalars[s] = y.clone();
        }
    }
    let mut blocks = Vec::new();
    let mut used = 0;
    for (bi, block) in prep.blocks.iter().enumerate() {
        let target_idx = problem.target_blocks().nth(bi).expect("one target block per prepared block");
        let mut residual = block.base.clone();
        for (part, c) in block.scalar_parts.iter().zip(&scalars) {
            residual.add_scaled(part, c);
        }
        let mut families = Vec::new();
        for (pi, pb) in problem.blocks.iter().enumerate() {
            let BlockRole::Gram { target, family } = pb.role else { continue };
            if target != bi || exact.blocks[pi].is_zero() {
                continue;
            }
            used += 1;
            let (lc, fam) = &prep.families[family];
            let half = fam.half_basis.monomials();
            let w = &exact.blocks[pi];
            let mut q = DiffPoly::zero();
            for (&(i, j), v) in w.entries() {
                let c = if i == j { v.clone() } else { v * Rational::from_integer(2.into()) };
                q.add_term(half[i].mul(&half[j]), c);
            }
            residual = &residual - &(&lc.product * &q);
            families.push(FamilyTerm {
                minors: lc.minors.iter().map(|mi| mi.rows.clone()).collect(),
                half_basis: half.iter().map(|m| m.to_string()).collect(),
                multiplier: q.to_string(),
                gram: square_terms(&exact.decompositions[pi]),
            });
        }
        let sos = &exact.decompositions[target_idx];
        residual = &residual - &sos.reconstruct().to_poly(basis);
        blocks.push(BlockCertificate {
            label: block.label.clone(),
            prefactor: block.prefactor.clone(),
            basis: basis.monomials().iter().map(|m| m.to_string()).collect(),
            integral: integral_terms(&prep.elimination, &prep.constraints, &residual)?,
            families,
            sos: square_terms(sos),
        });
    }
    let scalar_witness =
        prep.scalar_kernels.iter().map(|k| integral_terms(&prep.elimination, &prep.constraints, k)).collect::<Result<_, _>>()?;
    let cert = ProofCertificate {
        header: prep.header.clone(),
        axes: prep.axes.iter().map(Axis::to_string).collect(),
        scalars: scalars.iter().map(format_rational).collect(),
        scalar_witness,
        blocks,
    };
    Ok((cert, used))
}

pub fn prove(req: &ProveRequest) -> Result<ProveOutcome, PipelineError> {
    let start = Instant::now();
    let prep = prepare(req.conjecture, req.m, req.dimension, req.log_concave)?;
    let mut report = ProveReport { stats: prep.stats(), prepare_time: start.elapsed(), ..Default::default() };
    let finish = |mut report: ProveReport, reason: FailureReason| {
        report.total_time = start.elapsed();
        Ok(ProveOutcome::NoCertificate { reason, report })
    };
    let inputs = match build_inputs(&prep) {
        Ok(i) => i,
        Err(reason) => return finish(report, reason),
    };
    let problem = assemble(&inputs, prep.scalar_kernels.len()).map_err(|e| PipelineError::Internal(e.to_string()))?;
    report.sdp_vars = problem.vars.len();
    let t = Instant::now();
    let sol = match solve_feasibility(&problem, &req.solver) {
        Ok(s) => s,
        Err(e) => return finish(report, FailureReason::SolverFailure(e.to_string())),
    };
    report.solve_time = t.elapsed();
    report.iterations = sol.iterations;
    report.margin = sol.margin;
    report.solver_converged = sol.converged;
    if sol.status == SolverStatus::Infeasible {
        return finish(report, FailureReason::Infeasible { margin: sol.margin });
    }
    let t = Instant::now();
    let exact = match rationalize_and_certify(&sol, &problem, &req.rational) {
        Ok(e) => e,
        Err(e @ SdpError::Rationalization { .. }) => {
            report.exact_time = t.elapsed();
            return finish(report, FailureReason::Rationalization(e.to_string()));
        }
        Err(e) => return Err(PipelineError::Internal(e.to_string())),
    };
    report.denom_bound = exact.denom_bound;
    report.kernel_dims = exact.kernel_dims.clone();
    let (certificate, used) = build_certificate(&prep, &problem, &exact)?;
    report.exact_time = t.elapsed();
    report.families_used = used;
    let t = Instant::now();
    verify(&certificate).map_err(PipelineError::SelfCheck)?;
    report.verify_time = t.elapsed();
    report.total_time = start.elapsed();
    Ok(ProveOutcome::Proved { certificate: Box::new(certificate), report })
}

/// One line of the statistics table, with reference values alongside.
#[derive(Clone, Debug)]
pub struct TableRow {
    pub problem: &'static str,
    pub request: ProveRequest,
    pub reference_vars: usize,
    pub reference_n1: usize,
    pub reference_n2: usize,
    pub reference_seconds: f64,
}

pub fn table_rows() -> Vec<TableRow> {
    let row = |problem, c, m, n, lc, vars, n1, n2, secs| TableRow {
        problem,
        request: ProveRequest::new(c, m, n, lc),
        reference_vars: vars,
        reference_n1: n1,
        reference_n2: n2,
        reference_seconds: secs,
    };
    use Conjecture::*;
    vec![
        row("C2(3,1)", C2, 3, Dimension::Concrete(1), true, 3, 6, 0, 0.18),
        row("C3(3,2)", C3, 3, Dimension::Concrete(2), true, 14, 63, 0, 0.53),
        row("C3(3,3)", C3, 3, Dimension::Concrete(3), true, 38, 512, 6, 9.00),
        row("C3(3,4)", C3, 3, Dimension::Concrete(4), true, 38, 512, 6, 9.02),
        row("C3(4,2)", C3, 4, Dimension::Concrete(2), true, 33, 417, 3, 4.49),
        row("C2(2,n)", C2, 2, Dimension::Generic, false, 6, 8, 0, 0.32),
    ]
}

#[derive(Clone, Debug)]
pub struct TableResult {
    pub row: TableRow,
    pub stats: ProblemStats,
    pub families_used: usize,
    pub seconds: f64,
    pub proved: bool,
    pub note: String,
}

pub fn run_table(rows: &[TableRow]) -> Vec<TableResult> {
    rows.iter()
        .map(|row| {
            let t = Instant::now();
            let outcome = prove(&row.request);
            let seconds = t.elapsed().as_secs_f64();
            match outcome {
                Ok(ProveOutcome::Proved { report, .. }) => TableResult {
                    row: row.clone(),
                    stats: report.stats.clone(),
                    families_used: report.families_used,
                    seconds,
                    proved: true,
                    note: String::new(),
                },
                Ok(ProveOutcome::NoCertificate { reason, report }) => TableResult {
                    row: row.clone(),
                    stats: report.stats.clone(),
                    families_used: 0,
                    seconds,
                    proved: false,
                    note: reason.to_string(),
                },
                Err(e) => TableResult { row: row.clone(), stats: ProblemStats::default(), families_used: 0, seconds, proved: false, note: e.to_string() },
            }
        })
        .collect()
}

pub fn format_table(results: &[TableResult]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<9} {:>10} {:>12} {:>12} {:>10} {:>16} {:>6}\n",
        "problem", "vars", "N1", "N2", "families", "time (s)", "proof"
    ));
    out.push_str(&format!("{:<9} {:>10} {:>12} {:>12} {:>10} {:>16} {:>6}\n", "", "ours/ref", "ours/ref", "ours/ref", "used", "ours/ref", ""));
    for r in results {
        out.push_str(&format!(
            "{:<9} {:>10} {:>12} {:>12} {:>10} {:>16} {:>6}\n",
            r.row.problem,
            format!("{}/{}", r.stats.vars, r.row.reference_vars),
            format!("{}/{}", r.stats.independent, r.row.reference_n1),
            format!("{}/{}", r.stats.families, r.row.reference_n2),
            r.families_used,
            format!("{:.2}/{:.2}", r.seconds, r.row.reference_seconds),
            if r.proved { "Yes" } else { "No" },
        ));
        if !r.note.is_empty() {
            out.push_str(&format!("          {}\n", r.note));
        }
    }
    out
}
