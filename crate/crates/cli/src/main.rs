use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use costa_sos::certify::{verify, ProofCertificate};
use costa_sos::constraints::{integral_constraints, log_concave_constraints};
use costa_sos::diffform::{Axis, LaurentForm};
use costa_sos::dimension::Dimension;
use costa_sos::oracle::{gaussian_reference, heat_residual, integrate_forms, MixtureDensity, QuadratureSpec};
use costa_sos::pipeline::{
    format_table, prepare, prove, run_table, table_rows, Conjecture, PipelineError, PreparedProblem, ProveOutcome, ProveReport, ProveRequest,
    NOT_A_DISPROOF,
};
use costa_sos::rational::{rationalize, to_f64};
use costa_sos::targets::{target_e, TargetFamily};

const EXIT_NO_CERTIFICATE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "costa-sos", version, about = "Exact sum-of-squares proofs of lower bounds on entropy derivatives under the heat flow")]
struct Cli {
    /// Seed for sampled evaluation points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver tolerance for `prove`, quadrature tolerance for `validate`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Initial denominator bound for rationalization.
    #[arg(long, global = true)]
    denom_bound: Option<u64>,
    /// Rationalization retries, each raising the bound 100-fold.
    #[arg(long, global = true)]
    max_retries: Option<usize>,
    /// Output file (certificate for `prove`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a certificate of C1, C2 or C3 at order m and dimension n.
    Prove {
        conjecture: Conjecture,
        #[arg(long)]
        m: u32,
        /// Dimension, or `generic`.
        #[arg(long)]
        n: Dimension,
        #[arg(long)]
        log_concave: bool,
        /// Print the target blocks and their reduced quadratic forms.
        #[arg(long)]
        dump_target: bool,
        /// Print the basis, quadratic constraints, rewrite rules and intrinsic relations.
        #[arg(long)]
        dump_reduction: bool,
    },
    /// Check a certificate file; exit 0 on pass, 3 on failure.
    Verify { file: PathBuf },
    /// List integral constraints and log-concave minor products.
    Constraints {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        log_concave: bool,
    },
    /// Integrate targets or constraints numerically against a Gaussian mixture.
    Validate {
        #[arg(long, value_enum)]
        target: ValidateTarget,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: usize,
        /// JSON mixture `{"dimension": n, "components": [{"weight", "mean", "variance"}]}`;
        /// defaults to a standard Gaussian for targets and a fixed two-component mixture for constraints.
        #[arg(long)]
        density: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Run the six benchmark instances and compare with reference statistics.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValidateTarget {
    E0,
    E1,
    E2,
    E3,
    Constraints,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Prove { conjecture, m, n, log_concave, dump_target, dump_reduction } => {
            run_prove(&cli, *conjecture, *m, *n, *log_concave, *dump_target, *dump_reduction)
        }
        Command::Verify { file } => run_verify(&cli, file),
        Command::Constraints { m, n, log_concave } => run_constraints(&cli, *m, *n, *log_concave),
        Command::Validate { target, m, n, density, t } => run_validate(&cli, *target, *m, *n, density.as_ref(), *t),
        Command::Report => run_report(&cli),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn report_json(r: &ProveReport) -> serde_json::Value {
    json!({
        "vars": r.stats.vars,
        "integral_constraints": r.stats.integral_constraints,
        "quadratic": r.stats.quadratic,
        "rules": r.stats.rules,
        "intrinsic": r.stats.intrinsic,
        "intrinsic_pairwise": r.stats.intrinsic_pairwise,
        "independent": r.stats.independent,
        "families": r.stats.families,
        "families_used": r.families_used,
        "blocks": r.stats.blocks,
        "sdp_vars": r.sdp_vars,
        "iterations": r.iterations,
        "margin": r.margin,
        "converged": r.solver_converged,
        "denom_bound": r.denom_bound,
        "seconds": r.total_time.as_secs_f64(),
    })
}

fn print_report(r: &ProveReport) {
    let s = &r.stats;
    println!("basis size          {}", s.vars);
    println!("integral constraints {} ({} quadratic, {} rewrite rules)", s.integral_constraints, s.quadratic, s.rules);
    println!("intrinsic relations {} ({} coinciding pairs)", s.intrinsic, s.intrinsic_pairwise);
    println!("independent linear  {}", s.independent);
    println!("log-concave families {} offered, {} used", s.families, r.families_used);
    println!("blocks              {}", s.blocks);
    println!("solver              {} iterations, margin {:.3e}, converged {}", r.iterations, r.margin, r.solver_converged);
    if r.denom_bound > 0 {
        println!("denominator bound   {}", r.denom_bound);
    }
    println!(
        "time                {:.3}s (prepare {:.3}s, solve {:.3}s, exact {:.3}s, verify {:.3}s)",
        r.total_time.as_secs_f64(),
        r.prepare_time.as_secs_f64(),
        r.solve_time.as_secs_f64(),
        r.exact_time.as_secs_f64(),
        r.verify_time.as_secs_f64()
    );
}

fn dump(prep: &PreparedProblem, target: bool, reduction: bool) {
    let elim = &prep.elimination;
    if reduction {
        println!("basis ({}):", prep.basis().len());
        for (i, m) in prep.basis().monomials().iter().enumerate() {
            println!("  m{} = {m}", i + 1);
        }
        println!("quadratic constraints ({}):", elim.quadratic.len());
        for q in &elim.quadratic {
            println!("  {q}");
        }
        println!("rewrite rules ({}):", elim.rules.len());
        for r in &elim.rules {
            println!("  {} -> {}", r.leading, -&r.tail);
        }
        println!("intrinsic relations ({}, {} coinciding pairs):", prep.intrinsic.relations.len(), prep.intrinsic.pairwise_count);
        for q in &prep.intrinsic.relations {
            println!("  {q}");
        }
    }
    if target {
        for b in &prep.blocks {
            println!("block {} (prefactor {}):", b.label, b.prefactor);
            println!("  form    {}", b.base);
            match elim.reduce_to_quadratic(&b.base) {
                Ok(q) => println!("  reduced {q}"),
                Err(e) => println!("  reduced: {e}"),
            }
        }
    }
}

fn run_prove(cli: &Cli, conjecture: Conjecture, m: u32, n: Dimension, log_concave: bool, dump_target: bool, dump_reduction: bool) -> anyhow::Result<u8> {
    let mut req = ProveRequest::new(conjecture, m, n, log_concave);
    if let Some(tol) = cli.tol {
        req.solver.tol = tol;
    }
    if let Some(b) = cli.denom_bound {
        req.rational.denom_bound = b;
    }
    if let Some(r) = cli.max_retries {
        req.rational.max_retries = r;
    }
    let invalid = |e: &PipelineError| matches!(e, PipelineError::Invalid(_) | PipelineError::Unsupported(_));
    if dump_target || dump_reduction {
        match prepare(conjecture, m, n, log_concave) {
            Ok(prep) => dump(&prep, dump_target, dump_reduction),
            Err(e) => {
                eprintln!("error: {e}");
                return Ok(if invalid(&e) { EXIT_INVALID } else { EXIT_INTERNAL });
            }
        }
    }
    let outcome = match prove(&req) {
        Ok(o) => o,
        Err(e) => {
            if cli.json {
                println!("{}", json!({ "status": if invalid(&e) { "invalid" } else { "error" }, "message": e.to_string() }));
            } else {
                eprintln!("error: {e}");
            }
            return Ok(if invalid(&e) { EXIT_INVALID } else { EXIT_INTERNAL });
        }
    };
    let instance = format!("{conjecture}({m}, {n}){}", if log_concave { " with log-concavity" } else { "" });
    match outcome {
        ProveOutcome::Proved { certificate, report } => {
            let path = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("{conjecture}-m{m}-n{n}.json")));
            certificate.write(&path).with_context(|| format!("writing {}", path.display()))?;
            if cli.json {
                println!("{}", json!({ "status": "proved", "instance": instance, "certificate": path.display().to_string(), "report": report_json(&report) }));
            } else {
                println!("status: proved {instance}");
                println!("certificate: {} (verified)", path.display());
                print_report(&report);
            }
            Ok(0)
        }
        ProveOutcome::NoCertificate { reason, report } => {
            if cli.json {
                println!(
                    "{}",
                    json!({ "status": "no-certificate", "instance": instance, "reason": reason.to_string(), "note": NOT_A_DISPROOF, "report": report_json(&report) })
                );
            } else {
                println!("status: no certificate found for {instance}");
                println!("reason: {reason}");
                println!("note: {NOT_A_DISPROOF}");
                print_report(&report);
            }
            Ok(EXIT_NO_CERTIFICATE)
        }
    }
}

fn run_verify(cli: &Cli, file: &Path) -> anyhow::Result<u8> {
    let verdict = ProofCertificate::read(file).map_err(|e| e.to_string()).and_then(|c| verify(&c).map_err(|e| e.to_string()));
    match verdict {
        Ok(v) => {
            let statement = match v.dimension {
                Dimension::Generic => format!("{}({}, n) for every n >= {}", v.conjecture, v.m, v.valid_from),
                d => format!("{}({}, {d})", v.conjecture, v.m),
            };
            if cli.json {
                println!("{}", json!({ "verdict": "pass", "statement": statement, "blocks": v.blocks }));
            } else {
                println!("verdict: pass");
                println!("proves: {statement} ({} blocks)", v.blocks);
            }
            Ok(0)
        }
        Err(reason) => {
            if cli.json {
                println!("{}", json!({ "verdict": "fail", "reason": reason }));
            } else {
                println!("verdict: fail");
                println!("reason: {reason}");
            }
            Ok(EXIT_VERIFY_FAILED)
        }
    }
}

fn run_constraints(cli: &Cli, m: u32, n: usize, log_concave: bool) -> anyhow::Result<u8> {
    let axes = Axis::concrete_range(n);
    let integral = integral_constraints(m, &axes)?;
    let minors = if log_concave { log_concave_constraints(m, &axes)? } else { Vec::new() };
    if cli.json {
        let ints: Vec<_> = integral.iter().map(|c| json!({ "generator": c.generator.to_string(), "axis": c.axis.to_string(), "form": c.form.to_string() })).collect();
        let lcs: Vec<_> = minors
            .iter()
            .map(|c| json!({ "minors": c.label(), "product": c.product.to_string(), "multiplier_basis": c.multiplier_basis.iter().map(|m| m.to_string()).collect::<Vec<_>>() }))
            .collect();
        println!("{}", json!({ "m": m, "n": n, "integral": ints, "log_concave": lcs }));
        return Ok(0);
    }
    println!("integral constraints ({}):", integral.len());
    for c in &integral {
        println!("  G = {}, axis {}: {}", c.generator, c.axis, c.form);
    }
    if log_concave {
        println!("log-concave products ({}):", minors.len());
        for c in &minors {
            println!("  {} times a multiplier over {} monomials", c.label(), c.multiplier_basis.len());
        }
    }
    Ok(0)
}

fn run_validate(cli: &Cli, target: ValidateTarget, m: u32, n: usize, density: Option<&PathBuf>, t: f64) -> anyhow::Result<u8> {
    let d = match density {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let raw: MixtureDensity = serde_json::from_str(&text).context("parsing density")?;
            MixtureDensity::new(raw.dimension, raw.components)?
        }
        None if matches!(target, ValidateTarget::Constraints) => MixtureDensity::test_mixture(n),
        None => MixtureDensity::standard_gaussian(n),
    };
    anyhow::ensure!(d.dimension == n, "density has dimension {}, expected {n}", d.dimension);
    let mut q = QuadratureSpec::default_for(n);
    if let Some(tol) = cli.tol {
        q.tolerance = tol;
    }
    let power = 2 * m - 1;
    let (labels, forms): (Vec<String>, Vec<LaurentForm>) = match target {
        ValidateTarget::Constraints => integral_constraints(m, &Axis::concrete_range(n))?
            .into_iter()
            .map(|c| (format!("G = {}, axis {}", c.generator, c.axis), LaurentForm::new(c.form, power)))
            .unzip(),
        t => {
            let family = match t {
                ValidateTarget::E0 => TargetFamily::E0,
                ValidateTarget::E1 => TargetFamily::E1,
                ValidateTarget::E2 => TargetFamily::E2,
                _ => TargetFamily::E3,
            };
            let e = target_e(family, m, Dimension::Concrete(n))?;
            (vec![format!("{family}({m}, {n})")], vec![LaurentForm::new(e.concrete()?.clone(), power)])
        }
    };
    let results = integrate_forms(&forms, &d, t, &q)?;
    // Constraints must integrate to zero; targets are compared with the Gaussian value when one applies.
    let single = d.components.len() == 1;
    let reference = match target {
        ValidateTarget::Constraints => Some(0.0),
        ValidateTarget::E1 if single => {
            let s = rationalize(d.components[0].variance, 1_000_000);
            Some(to_f64(&gaussian_reference(m, n, &s, &rationalize(t, 1_000_000))))
        }
        _ => None,
    };
    let mut rng = StdRng::seed_from_u64(cli.seed);
    let reach = 3.0 * d.evolved(t).max_std();
    let heat: f64 = (0..10)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-reach..reach)).collect();
            heat_residual(&d, &x, t, 1e-4).abs()
        })
        .fold(0.0, f64::max);
    let mut failures = 0;
    let mut rows = Vec::new();
    for (label, r) in labels.iter().zip(&results) {
        let ok = !r.flagged && reference.is_none_or(|v| (r.value - v).abs() <= q.tolerance * v.abs().max(1.0));
        if !ok {
            failures += 1;
        }
        rows.push((label, r, ok));
    }
    let heat_ok = heat < 1e-6;
    if cli.json {
        let items: Vec<_> = rows.iter().map(|(l, r, ok)| json!({ "form": l, "value": r.value, "error": r.error, "ok": ok })).collect();
        println!("{}", json!({ "t": t, "reference": reference, "integrals": items, "heat_residual": heat, "failures": failures }));
    } else {
        for (l, r, ok) in &rows {
            println!("{} {l}: {:.3e} (error {:.1e})", if *ok { "ok  " } else { "FAIL" }, r.value, r.error);
        }
        if let Some(v) = reference {
            println!("reference value {v:.9}");
        }
        println!("{} heat equation residual {heat:.1e} at 10 sampled points", if heat_ok { "ok  " } else { "FAIL" });
        println!("{} of {} integrals within tolerance {:.0e}", rows.len() - failures, rows.len(), q.tolerance);
    }
    Ok(if failures == 0 && heat_ok { 0 } else { EXIT_NO_CERTIFICATE })
}

fn run_report(cli: &Cli) -> anyhow::Result<u8> {
    let results = run_table(&table_rows());
    if cli.json {
        let rows: Vec<_> = results
            .iter()
            .map(|r| {
                json!({
                    "problem": r.row.problem,
                    "vars": [r.stats.vars, r.row.reference_vars],
                    "independent": [r.stats.independent, r.row.reference_n1],
                    "families": [r.stats.families, r.row.reference_n2],
                    "families_used": r.families_used,
                    "seconds": [r.seconds, r.row.reference_seconds],
                    "proved": r.proved,
                })
            })
            .collect();
        println!("{}", serde_json::Value::Array(rows));
    } else {
        print!("{}", format_table(&results));
    }
    Ok(if results.iter().all(|r| r.proved) { 0 } else { EXIT_NO_CERTIFICATE })
}
