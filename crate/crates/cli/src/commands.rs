//! Subcommand implementations. Each returns the full output as a string.

use crate::render::{self, json, no_csv, opt, opt_short, short, table, yes_no};
use crate::search;
use crate::{
    CheckArgs, CmdResult, ConstructArgs, DefectArgs, ExpectArgs, Failure, Format, MatrixInput, Model, PhiArgs,
    Rescale, ScanArgs, SearchArgs, SpectrumArgs,
};
use ahm_core::constructors::{
    circulant_from_eigenphases, circulant_spec, design_by_key, fourier, fourier_group, incidence_fano,
    incidence_paley_biplane, incidence_projective_plane, kn, pattern_unitary, Branch, PatternABC,
};
use ahm_core::criticality::{critical_report, is_balanced, BalanceReport};
use ahm_core::hessian::{hessian_spectrum, phi as phi_value};
use ahm_core::io::{parse_matrix, MatrixJson};
use ahm_core::matrix::{all_ones, hermitian_residual, identity, max_abs_diff, max_imag};
use ahm_core::probes::{
    conjecture_scan, defect as defect_spaces, exclusion_pipeline, expected_phi_circulant_selfadjoint,
    expected_phi_circulant_symmetric, expected_phi_gaussian, CirculantFamily, Enumeration, ExclusionCriterion,
    ExpectationOptions, ExpectationReport, PipelineOptions, ScanReport,
};
use ahm_core::{ComplexMatrix, Tolerances, UnitaryCandidate};
use num_complex::Complex64;
use serde::Serialize;
use std::io::Read;
use std::path::{Path, PathBuf};

pub struct Context {
    pub seed: u64,
    pub format: Option<Format>,
    pub tol: Tolerances,
}

impl Context {
    fn format(&self) -> Format {
        self.format.unwrap_or(Format::Text)
    }
}

fn read_source(path: &Option<PathBuf>) -> CmdResult<String> {
    match path.as_deref() {
        None => read_stdin(),
        Some(p) if p == Path::new("-") => read_stdin(),
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::input(format!("cannot read {}: {e}", p.display()))),
    }
}

fn read_stdin() -> CmdResult<String> {
    let mut s = String::new();
    std::io::stdin()
        .read_to_string(&mut s)
        .map_err(|e| Failure::input(format!("cannot read stdin: {e}")))?;
    Ok(s)
}

fn load_matrix(path: &Option<PathBuf>, rescale: Option<Rescale>) -> CmdResult<ComplexMatrix> {
    let m = parse_matrix(&read_source(path)?)?;
    Ok(match rescale {
        Some(Rescale::SqrtN) => m.scale(1.0 / (m.nrows() as f64).sqrt()),
        None => m,
    })
}

fn load_unitary(input: &MatrixInput, tol: &Tolerances) -> CmdResult<UnitaryCandidate> {
    let m = load_matrix(&input.matrix, input.rescale)?;
    Ok(UnitaryCandidate::new(m, tol.unitary)?)
}

/// Parses `5` or an inclusive range `3..7`.
pub fn parse_range(s: &str) -> CmdResult<Vec<usize>> {
    let bad = || Failure::input(format!("expected N or A..B, got '{s}'"));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![parse(s)?]),
    }
}

/// Construction failures all stem from the parameters, so they are input errors.
pub fn construct(ctx: &Context, a: &ConstructArgs) -> CmdResult<String> {
    build(ctx, a).map_err(|f| if f.code == 3 { Failure { code: 2, ..f } } else { f })
}

fn build(ctx: &Context, a: &ConstructArgs) -> CmdResult<String> {
    let family = a.family.replace('-', "_");
    let need_n = || match a.n {
        Some(n) if n >= 1 => Ok(n),
        Some(_) => Err(Failure::input("--n must be positive")),
        None => Err(Failure::input(format!("{family} needs --n"))),
    };
    let branch: Branch = a.branch.parse()?;
    let from_pattern = |p: PatternABC| -> CmdResult<ComplexMatrix> {
        Ok(pattern_unitary(&p, branch, ctx.tol.unitary)?.matrix.into_matrix())
    };
    let m = match family.as_str() {
        "fourier" => fourier(need_n()?),
        "fourier_group" => fourier_group(&a.sizes)?,
        "kn" => kn(need_n()?).into_matrix(),
        "pattern" => {
            let key = a.design.as_deref().ok_or_else(|| Failure::input("pattern needs --design"))?;
            from_pattern(design_by_key(key)?)?
        }
        "fano" => from_pattern(incidence_fano())?,
        "paley11" => from_pattern(incidence_paley_biplane())?,
        "pg2" => {
            let q = a.q.ok_or_else(|| Failure::input("pg2 needs --q"))?;
            from_pattern(incidence_projective_plane(q)?)?
        }
        "circulant" => {
            let q: Vec<Complex64> = match (a.signs.is_empty(), a.phases.is_empty()) {
                (false, true) => a.signs.iter().map(|&s| Complex64::new(s, 0.0)).collect(),
                (true, false) => a.phases.iter().map(|&t| Complex64::from_polar(1.0, t)).collect(),
                _ => return Err(Failure::input("circulant needs exactly one of --signs, --phases")),
            };
            circulant_from_eigenphases(&q)?.1.into_matrix()
        }
        other => {
            return Err(Failure::input(format!(
                "unknown family '{other}' (fourier, fourier_group, kn, pattern, fano, paley11, pg2, circulant)"
            )))
        }
    };
    match ctx.format.unwrap_or(Format::Json) {
        Format::Json => Ok(ahm_core::io::to_json(&m) + "\n"),
        Format::Text => Ok(render::matrix_text(&m)),
        Format::Csv => Err(no_csv("construct")),
    }
}

#[derive(Serialize)]
struct CriticalJson {
    residual: f64,
    is_critical: bool,
    psd_min_eig: f64,
    psd_violated: bool,
}

#[derive(Serialize)]
struct EvaluatedJson {
    criterion: ExclusionCriterion,
    value: f64,
}

#[derive(Serialize)]
struct VerdictJson {
    excluded: bool,
    criterion: ExclusionCriterion,
    value: f64,
    evaluated: Vec<EvaluatedJson>,
    witness: Option<MatrixJson>,
}

#[derive(Serialize)]
struct CheckReport {
    n: usize,
    unitarity_residual: f64,
    criticality: CriticalJson,
    balance: Option<BalanceReport>,
    balance_error: Option<String>,
    exclusion: Option<VerdictJson>,
}

pub fn check(ctx: &Context, a: &CheckArgs) -> CmdResult<String> {
    let u = load_unitary(&a.input, &ctx.tol)?;
    let crit = critical_report(&u, &ctx.tol)?;
    let (balance, balance_error) = match is_balanced(&u, ctx.tol.crit, ctx.tol.cluster) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let exclusion = if crit.is_critical {
        let opts = PipelineOptions {
            tol: ctx.tol,
            expectation: ExpectationOptions { seed: ctx.seed, ..ExpectationOptions::default() },
        };
        let v = exclusion_pipeline(&u, &opts)?;
        Some(VerdictJson {
            excluded: v.excluded,
            criterion: v.criterion,
            value: v.value,
            evaluated: v.evaluated.iter().map(|&(criterion, value)| EvaluatedJson { criterion, value }).collect(),
            witness: v.witness.as_ref().map(MatrixJson::from),
        })
    } else {
        None
    };
    let report = CheckReport {
        n: u.n(),
        unitarity_residual: u.unitarity_residual(),
        criticality: CriticalJson {
            residual: crit.residual,
            is_critical: crit.is_critical,
            psd_min_eig: crit.psd_min_eig,
            psd_violated: crit.psd_violated,
        },
        balance,
        balance_error,
        exclusion,
    };
    match ctx.format() {
        Format::Json => json(&report),
        Format::Csv => Err(no_csv("check")),
        Format::Text => Ok(check_text(&report, &u)),
    }
}

fn check_text(r: &CheckReport, u: &UnitaryCandidate) -> String {
    let mut s = format!("n: {}\nunitarity residual: {:.3e}\n", r.n, r.unitarity_residual);
    let c = &r.criticality;
    s += &format!(
        "critical: {} (residual {:.3e})\nsmallest eigenvalue of X: {}{}\n",
        yes_no(c.is_critical),
        c.residual,
        short(c.psd_min_eig),
        if c.psd_violated { " (X is not positive semidefinite)" } else { "" }
    );
    match (&r.balance, &r.balance_error) {
        (Some(b), _) => {
            s += &format!("semi-balanced: {}, balanced: {}\n", yes_no(b.semi_balanced), yes_no(b.balanced))
        }
        (None, Some(e)) => s += &format!("balance: not determined ({e})\n"),
        _ => {}
    }
    match &r.exclusion {
        None => s += "exclusion: skipped, not critical\n",
        Some(v) => {
            if v.excluded {
                s += &format!("verdict: excluded by {}, value {}\n", v.criterion.name(), short(v.value));
            } else {
                s += &format!("verdict: none, smallest Hessian eigenvalue {}\n", short(v.value));
            }
            for e in &v.evaluated {
                s += &format!("  {} = {}\n", e.criterion.name(), short(e.value));
            }
            if let Some(w) = &v.witness {
                let m = ComplexMatrix::try_from(w.clone()).expect("witness round trip");
                let check = phi_value(u, &m, &Tolerances::default()).map(|p| p.value).unwrap_or(f64::NAN);
                s += &format!("witness (Φ = {}):\n{}", short(check), render::matrix_text(&m));
            }
        }
    }
    s
}

fn direction(spec: &str, u: &UnitaryCandidate) -> CmdResult<ComplexMatrix> {
    let n = u.n();
    Ok(match spec {
        "all-ones" | "all_ones" | "j" => all_ones(n),
        "identity" | "i" => identity(n),
        "u" => u.matrix().clone(),
        "one-minus-u" | "one_minus_u" => identity(n) - u.matrix(),
        path => load_matrix(&Some(PathBuf::from(path)), None)?,
    })
}

#[derive(Serialize)]
struct PhiJson {
    n: usize,
    direction: String,
    #[serde(flatten)]
    report: ahm_core::hessian::PhiReport,
}

pub fn phi(ctx: &Context, a: &PhiArgs) -> CmdResult<String> {
    let u = load_unitary(&a.input, &ctx.tol)?;
    let b = direction(&a.direction, &u)?;
    let report = phi_value(&u, &b, &ctx.tol)?;
    let out = PhiJson { n: u.n(), direction: a.direction.clone(), report };
    match ctx.format() {
        Format::Json => json(&out),
        Format::Csv => Err(no_csv("phi")),
        Format::Text => Ok(format!(
            "Φ(U,{}) = {}\ntrace term: {}\nsum term: {}\n‖B‖_F: {}\n{}",
            a.direction,
            out.report.value,
            out.report.trace_term,
            out.report.sum_term,
            out.report.direction_norm,
            if out.report.not_critical_warning { "warning: U is not critical\n" } else { "" }
        )),
    }
}

#[derive(Serialize)]
struct SpectrumJson {
    n: usize,
    critical: bool,
    dim: usize,
    min_eigenvalue: f64,
    kernel_dim: usize,
    kernel_threshold: f64,
    eigenvalues: Vec<f64>,
    min_direction: MatrixJson,
}

pub fn spectrum(ctx: &Context, a: &SpectrumArgs) -> CmdResult<String> {
    let u = load_unitary(&a.input, &ctx.tol)?;
    let critical = critical_report(&u, &ctx.tol)?.is_critical;
    let spec = hessian_spectrum(&u, &ctx.tol)?;
    let out = SpectrumJson {
        n: u.n(),
        critical,
        dim: spec.dim,
        min_eigenvalue: spec.eigenvalues[0],
        kernel_dim: spec.kernel_dim(a.kernel_threshold),
        kernel_threshold: a.kernel_threshold,
        eigenvalues: spec.eigenvalues.clone(),
        min_direction: MatrixJson::from(&spec.min_direction),
    };
    match ctx.format() {
        Format::Json => json(&out),
        Format::Csv => {
            let rows: Vec<Vec<String>> =
                spec.eigenvalues.iter().enumerate().map(|(k, l)| vec![k.to_string(), render::full(*l)]).collect();
            render::csv("spectrum", &["index", "eigenvalue"], &rows)
        }
        Format::Text => {
            let eig: Vec<String> = spec.eigenvalues.iter().map(|&l| short(l)).collect();
            Ok(format!(
                "n: {}\ncritical: {}\nsmallest eigenvalue: {}\nkernel dimension (|λ| ≤ {:e}): {}\neigenvalues: {}\nminimizing direction:\n{}",
                out.n,
                yes_no(critical),
                short(out.min_eigenvalue),
                a.kernel_threshold,
                out.kernel_dim,
                eig.join(" "),
                render::matrix_text(&spec.min_direction)
            ))
        }
    }
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::Symmetric => "circulant_symmetric",
        Model::Selfadjoint => "circulant_selfadjoint",
        Model::Gaussian => "gaussian",
    }
}

fn infer_model(u: &UnitaryCandidate, tol: &Tolerances) -> Model {
    let m = u.matrix();
    if circulant_spec(m, tol.cluster).is_none() {
        return Model::Gaussian;
    }
    if max_imag(m) <= 1e-12 && max_abs_diff(m, &m.transpose()) <= 1e-12 {
        Model::Symmetric
    } else if hermitian_residual(m) <= 1e-10 {
        Model::Selfadjoint
    } else {
        Model::Gaussian
    }
}

fn verdict(r: &ExpectationReport, tol: &Tolerances) -> String {
    let c = r.closed_form.unwrap_or(f64::NAN);
    let mut v = if c < -tol.neg {
        "negative"
    } else if c.abs() <= 1e-9 {
        "zero"
    } else {
        "positive"
    }
    .to_string();
    if r.mc_outlier {
        v.push_str("+mc_outlier");
    }
    v
}

#[derive(Serialize)]
struct ExpectRow {
    family: String,
    n: usize,
    #[serde(flatten)]
    report: ExpectationReport,
    verdict: String,
}

#[derive(Serialize)]
struct ExpectJson {
    seed: u64,
    model: &'static str,
    rows: Vec<ExpectRow>,
}

pub fn expect(ctx: &Context, a: &ExpectArgs) -> CmdResult<String> {
    let mut cases: Vec<(String, UnitaryCandidate)> = Vec::new();
    match (&a.family, &a.matrix) {
        (Some(f), None) => {
            if f != "kn" {
                return Err(Failure::input(format!("unknown family '{f}' (kn)")));
            }
            let ns = parse_range(a.n.as_deref().ok_or_else(|| Failure::input("--family needs --n"))?)?;
            for n in ns {
                if n < 3 {
                    return Err(Failure::input("kn expectations need N ≥ 3"));
                }
                cases.push(("kn".into(), kn(n)));
            }
        }
        (None, Some(p)) => {
            let input = MatrixInput { matrix: Some(p.clone()), rescale: a.rescale };
            let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "matrix".into());
            cases.push((label, load_unitary(&input, &ctx.tol)?));
        }
        _ => return Err(Failure::input("give --family or --matrix")),
    }
    let model = match a.model {
        Some(m) => m,
        None if a.family.is_some() => Model::Symmetric,
        None => infer_model(&cases[0].1, &ctx.tol),
    };
    let enumeration = if a.exact {
        Enumeration::Always
    } else if a.no_exact {
        Enumeration::Never
    } else {
        Enumeration::Auto
    };
    let opts = ExpectationOptions { enumeration, mc_samples: a.mc, seed: ctx.seed };
    let mut rows = Vec::new();
    for (family, u) in cases {
        let report = match model {
            Model::Symmetric => expected_phi_circulant_symmetric(&u, &opts, &ctx.tol)?,
            Model::Selfadjoint => expected_phi_circulant_selfadjoint(&u, &opts, &ctx.tol)?,
            Model::Gaussian => expected_phi_gaussian(&u, &opts, &ctx.tol)?,
        };
        let verdict = verdict(&report, &ctx.tol);
        rows.push(ExpectRow { family, n: u.n(), report, verdict });
    }
    let out = ExpectJson { seed: ctx.seed, model: model_name(model), rows };
    let columns = ["family", "N", "seed", "closed_form", "enum", "mc", "stderr", "verdict"];
    match ctx.format() {
        Format::Json => json(&out),
        Format::Csv => {
            let rows: Vec<Vec<String>> = out
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.family.clone(),
                        r.n.to_string(),
                        out.seed.to_string(),
                        opt(r.report.closed_form),
                        opt(r.report.exact_enumeration),
                        opt(r.report.mc_estimate),
                        opt(r.report.mc_stderr),
                        r.verdict.clone(),
                    ]
                })
                .collect();
            render::csv(&format!("expect model={}", out.model), &columns, &rows)
        }
        Format::Text => {
            let rows: Vec<Vec<String>> = out
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.family.clone(),
                        r.n.to_string(),
                        out.seed.to_string(),
                        opt_short(r.report.closed_form),
                        opt_short(r.report.exact_enumeration),
                        opt_short(r.report.mc_estimate),
                        opt_short(r.report.mc_stderr),
                        r.verdict.clone(),
                    ]
                })
                .collect();
            Ok(format!("# model {} seed {}\n{}", out.model, out.seed, table(&columns, &rows)))
        }
    }
}

#[derive(Serialize)]
struct FindingJson {
    trial: usize,
    value: f64,
    q: Vec<f64>,
    matrix: MatrixJson,
}

#[derive(Serialize)]
struct ScanJson {
    #[serde(flatten)]
    report: ScanReport,
    counterexamples: usize,
    finding_matrices: Vec<FindingJson>,
}

pub fn scan(ctx: &Context, a: &ScanArgs) -> CmdResult<String> {
    let family: CirculantFamily = a.family.parse()?;
    let mut reports = Vec::new();
    for n in parse_range(&a.n)? {
        reports.push(conjecture_scan(family, n, a.trials, ctx.seed, &ctx.tol)?);
    }
    match ctx.format() {
        Format::Json => {
            let out: Vec<ScanJson> = reports
                .into_iter()
                .map(|r| {
                    let finding_matrices = r
                        .findings
                        .iter()
                        .map(|f| FindingJson { trial: f.trial, value: f.value, q: f.q.clone(), matrix: (&f.matrix).into() })
                        .collect();
                    ScanJson { counterexamples: r.findings.len(), report: r, finding_matrices }
                })
                .collect();
            json(&out)
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        family.name().into(),
                        r.n.to_string(),
                        r.seed.to_string(),
                        opt(r.max_value),
                        String::new(),
                        String::new(),
                        String::new(),
                        format!("counterexamples={}", r.findings.len()),
                    ]
                })
                .collect();
            render::csv(
                &format!("scan trials={}", a.trials),
                &["family", "N", "seed", "closed_form", "enum", "mc", "stderr", "verdict"],
                &rows,
            )
        }
        Format::Text => {
            let mut s = String::new();
            for r in &reports {
                s += &format!(
                    "{} N={} seed={} trials={} evaluated={} rejected_zero={} boundary={} max={} counterexamples={}\n",
                    family.name(),
                    r.n,
                    r.seed,
                    r.trials,
                    r.evaluated,
                    r.rejected_zero,
                    r.boundary_cases,
                    opt_short(r.max_value),
                    r.findings.len()
                );
                for f in &r.findings {
                    s += &format!("FINDING trial={} value={:e}\nq: {:?}\n", f.trial, f.value, f.q);
                    s += &render::matrix_text(&f.matrix);
                }
            }
            Ok(s)
        }
    }
}

#[derive(Serialize)]
struct LimitJson {
    start: usize,
    one_norm: f64,
    converged: bool,
    iterations: usize,
    stalled: bool,
    class: Option<usize>,
}

#[derive(Serialize)]
struct ClassJson {
    class: usize,
    count: usize,
    representative: MatrixJson,
}

#[derive(Serialize)]
struct SearchJson {
    n: usize,
    starts: usize,
    seed: u64,
    converged: usize,
    limits: Vec<LimitJson>,
    classes: Vec<ClassJson>,
}

pub fn search(ctx: &Context, a: &SearchArgs) -> CmdResult<String> {
    if a.n < 2 {
        return Err(Failure::input("search needs N ≥ 2"));
    }
    let outcome = search::run(a.n, a.starts, ctx.seed, a.max_iters, a.dedup_tol, &ctx.tol);
    let converged = outcome.limits.iter().filter(|l| l.converged).count();
    let cells = |l: &search::Limit, full: bool| {
        vec![
            l.start.to_string(),
            if full { render::full(l.one_norm) } else { format!("{:.9}", l.one_norm) },
            l.converged.to_string(),
            l.iterations.to_string(),
            l.class.map(|c| c.to_string()).unwrap_or_default(),
        ]
    };
    let columns = ["start", "one_norm", "converged", "iterations", "class"];
    match ctx.format() {
        Format::Json => {
            let out = SearchJson {
                n: a.n,
                starts: a.starts,
                seed: ctx.seed,
                converged,
                limits: outcome
                    .limits
                    .iter()
                    .map(|l| LimitJson {
                        start: l.start,
                        one_norm: l.one_norm,
                        converged: l.converged,
                        iterations: l.iterations,
                        stalled: l.stalled,
                        class: l.class,
                    })
                    .collect(),
                classes: outcome
                    .classes
                    .iter()
                    .enumerate()
                    .map(|(k, c)| ClassJson { class: k, count: c.count, representative: (&c.representative).into() })
                    .collect(),
            };
            json(&out)
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = outcome.limits.iter().map(|l| cells(l, true)).collect();
            render::csv(&format!("search n={} seed={}", a.n, ctx.seed), &columns, &rows)
        }
        Format::Text => {
            let rows: Vec<Vec<String>> = outcome.limits.iter().map(|l| cells(l, false)).collect();
            let mut s = format!("# search N={} starts={} seed={}\n", a.n, a.starts, ctx.seed);
            s += &table(&columns, &rows);
            s += &format!(
                "converged to Hadamard: {}/{}, inequivalent limits: {}\n",
                converged,
                a.starts,
                outcome.classes.len()
            );
            for (k, c) in outcome.classes.iter().enumerate() {
                s += &format!("class {k} ({} starts), dephased:\n", c.count);
                s += &render::matrix_text(&c.representative);
            }
            Ok(s)
        }
    }
}

#[derive(Serialize)]
struct DefectJson {
    n: usize,
    dim_du: usize,
    dim_eu: usize,
    basis_size: usize,
    residual: f64,
    /// `2N − 1` directions present for every Hadamard matrix.
    generic_floor: usize,
}

pub fn defect(ctx: &Context, a: &DefectArgs) -> CmdResult<String> {
    let h = load_matrix(&a.matrix, None)?;
    let r = defect_spaces(&h, a.scaled, &ctx.tol)?;
    let n = h.nrows();
    let out = DefectJson {
        n,
        dim_du: r.dim_du,
        dim_eu: r.dim_eu,
        basis_size: r.basis_du.len(),
        residual: r.residual,
        generic_floor: 2 * n - 1,
    };
    match ctx.format() {
        Format::Json => json(&out),
        Format::Csv => Err(no_csv("defect")),
        Format::Text => Ok(format!(
            "n: {}\ndim D_U = {}\ndim E_U = {}\nbasis size: {}\nresidual: {:.3e}\ngeneric floor 2N-1: {}\n",
            n, out.dim_du, out.dim_eu, out.basis_size, out.residual, out.generic_floor
        )),
    }
}
