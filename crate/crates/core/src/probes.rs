//! Exclusion criteria for critical points: closed-form values of `Φ` on
//! pattern and circulant matrices, expectations of `Φ` over random
//! directions (closed form, exhaustive enumeration, Monte Carlo), the real
//! orthogonal second-order test, defect spaces of Hadamard matrices, and a
//! pipeline running the criteria from cheapest to most expensive.

use crate::constructors::{
    circulant_matrix, circulant_spec, gamma_from_q, recognize_pattern_unitary, root_of_unity,
    CirculantSpec, PatternUnitary, Branch,
};
use crate::criticality::critical_report;
use crate::error::{Error, Result};
use crate::hessian::{descent_direction, hermitian_basis, phi, PhiContext};
use crate::matrix::{
    all_ones, c64, hermitian_residual, identity, is_hadamard, max_abs_diff, max_imag,
    ComplexMatrix, UnitaryCandidate,
};
use crate::rng::{gaussian_hermitian, stream_rng};
use crate::tolerance::Tolerances;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative agreement test used for every closed-form cross-check.
fn agrees(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn cross_check(what: &str, closed: f64, direct: f64) -> Result<()> {
    if agrees(closed, direct, 1e-8) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what}: closed form {closed} but direct evaluation {direct}")))
    }
}

fn real_values(pu: &PatternUnitary) -> Result<(f64, f64)> {
    let (x, y) = (pu.x, pu.y);
    if !pu.branch.is_real() || x.im != 0.0 || y.im != 0.0 || !(x.re < 0.0 && y.re > 0.0) {
        return Err(Error::ComplexBranch);
    }
    Ok((x.re, y.re))
}

/// `Φ(U,J) = Nλ(a+b)(b+c)(y/x − x/y)` for a real pattern unitary, where
/// `λ` is its row sum. Checked against the direct evaluation.
pub fn phi_identity_pattern(pu: &PatternUnitary, tol: &Tolerances) -> Result<f64> {
    let (x, y) = real_values(pu)?;
    let p = &pu.pattern;
    let lambda = pu.row_sum().re;
    let n = p.n as f64;
    let value = n * lambda * (p.a + p.b) as f64 * (p.b + p.c) as f64 * (y / x - x / y);
    let direct = phi(&pu.matrix, &all_ones(p.n), tol)?.value;
    cross_check("Φ(U,J) on a pattern", value, direct)?;
    Ok(value)
}

/// A direction `B` with `PB = αB` and `QB = βB`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternEigendirection {
    pub label: &'static str,
    pub b: ComplexMatrix,
    pub alpha: f64,
    pub beta: f64,
}

/// Common eigendirections of `P` and `Q` for a symmetric pattern: `J` with
/// `(a+b, b+c)`, `I − U_−` with `(√b, −√b)` and `I + U_+` with `(−√b, √b)`.
/// A direction is omitted when its branch does not exist or it vanishes.
pub fn pattern_eigendirections(pu: &PatternUnitary, tol: &Tolerances) -> Result<Vec<PatternEigendirection>> {
    let pat = &pu.pattern;
    if !pat.is_symmetric() {
        return Err(Error::NotSymmetricPattern);
    }
    let n = pat.n;
    let sb = (pat.b as f64).sqrt();
    let mut out = vec![PatternEigendirection {
        label: "all_ones",
        b: all_ones(n),
        alpha: (pat.a + pat.b) as f64,
        beta: (pat.b + pat.c) as f64,
    }];
    if let Ok(um) = crate::constructors::pattern_unitary(pat, Branch::RealMinus, tol.unitary) {
        out.push(PatternEigendirection {
            label: "one_minus_u_minus",
            b: identity(n) - um.matrix.matrix(),
            alpha: sb,
            beta: -sb,
        });
    }
    if let Ok(up) = crate::constructors::pattern_unitary(pat, Branch::RealPlus, tol.unitary) {
        out.push(PatternEigendirection {
            label: "one_plus_u_plus",
            b: identity(n) + up.matrix.matrix(),
            alpha: -sb,
            beta: sb,
        });
    }
    let (p, q) = (pat.p_complex(), pat.q_complex());
    for d in &out {
        let scale = crate::matrix::frobenius(&d.b).max(1.0);
        let rp = crate::matrix::frobenius(&(&p * &d.b - d.b.scale(d.alpha)));
        let rq = crate::matrix::frobenius(&(&q * &d.b - d.b.scale(d.beta)));
        if rp.max(rq) > 1e-9 * scale {
            return Err(Error::Numerical(format!("{} is not a common eigendirection", d.label)));
        }
    }
    Ok(out)
}

/// `Φ(U, I − U) = b(y² − x²)[N(λ − 2) + Tr(P)/x + Tr(Q)/y]` for `U_−` on a
/// symmetric pattern. Checked against the direct evaluation.
pub fn phi_one_minus_u(pu: &PatternUnitary, tol: &Tolerances) -> Result<f64> {
    let pat = &pu.pattern;
    if !pat.is_symmetric() {
        return Err(Error::NotSymmetricPattern);
    }
    if pu.branch != Branch::RealMinus {
        return Err(Error::WrongBranch("real_minus"));
    }
    if !pat.satisfies_relation() {
        return Err(Error::InvalidInput("pattern violates b² − b = ac".into()));
    }
    let (x, y) = real_values(pu)?;
    let n = pat.n as f64;
    let lambda = pu.row_sum().re;
    let tr_p = pat.p.trace() as f64;
    let tr_q = pat.q.trace() as f64;
    let value = pat.b as f64 * (y * y - x * x) * (n * (lambda - 2.0) + tr_p / x + tr_q / y);
    let direct = phi(&pu.matrix, &(identity(pat.n) - pu.matrix.matrix()), tol)?.value;
    cross_check("Φ(U,I−U) on a pattern", value, direct)?;
    Ok(value)
}

fn circulant_of(u: &UnitaryCandidate, tol: &Tolerances) -> Result<CirculantSpec> {
    circulant_spec(u.matrix(), tol.cluster.max(1e-12)).ok_or(Error::NotCirculant)
}

fn check_nonzero(spec: &CirculantSpec, tol: &Tolerances) -> Result<()> {
    match spec.gamma.iter().position(|g| !(g.norm() > tol.zero)) {
        Some(j) => Err(Error::ZeroEntry(0, j)),
        None => Ok(()),
    }
}

/// `Φ(U,J) = Nu(Ns − uw)` for a real circulant `U`, with `u`, `s`, `w` the
/// row sums of `U`, `sgn(U)` and `1/|U|`. Checked against direct evaluation.
pub fn phi_identity_circulant(u: &UnitaryCandidate, tol: &Tolerances) -> Result<f64> {
    let spec = circulant_of(u, tol)?;
    if max_imag(u.matrix()) > 1e-12 {
        return Err(Error::NotReal);
    }
    check_nonzero(&spec, tol)?;
    let n = spec.n as f64;
    let us: f64 = spec.gamma.iter().map(|g| g.re).sum();
    let s: f64 = spec.gamma.iter().map(|g| g.re.signum()).sum();
    let w: f64 = spec.gamma.iter().map(|g| 1.0 / g.re.abs()).sum();
    let value = n * us * (n * s - us * w);
    cross_check("Φ(U,J) on a circulant", value, phi(u, &all_ones(spec.n), tol)?.value)?;
    Ok(value)
}

/// `Φ(U,U) = N(−1/|γ_0| + Σ|γ_i|)` for a self-adjoint circulant `U`.
/// Checked against direct evaluation.
pub fn phi_self_circulant(u: &UnitaryCandidate, tol: &Tolerances) -> Result<f64> {
    let spec = circulant_of(u, tol)?;
    if hermitian_residual(u.matrix()) > 1e-10 {
        return Err(Error::NotSelfAdjoint);
    }
    check_nonzero(&spec, tol)?;
    let n = spec.n as f64;
    let value = n * (-1.0 / spec.gamma[0].norm() + spec.gamma.iter().map(|g| g.norm()).sum::<f64>());
    cross_check("Φ(U,U) on a circulant", value, phi(u, u.matrix(), tol)?.value)?;
    Ok(value)
}

/// Random model for circulant directions `B = F diag(β) F*` with `β ∈ {±1}^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CirculantFamily {
    /// `β_k` i.i.d. uniform signs: self-adjoint circulant unitaries.
    SelfAdjoint,
    /// `β_k = β_{−k}`, free signs otherwise: symmetric circulant orthogonals.
    Symmetric,
}

impl CirculantFamily {
    pub fn name(self) -> &'static str {
        match self {
            CirculantFamily::SelfAdjoint => "circulant_selfadjoint",
            CirculantFamily::Symmetric => "circulant_symmetric",
        }
    }

    /// Eigenvalue indices controlled by each free sign.
    fn free_groups(self, n: usize) -> Vec<Vec<usize>> {
        match self {
            CirculantFamily::SelfAdjoint => (0..n).map(|k| vec![k]).collect(),
            CirculantFamily::Symmetric => (0..=n / 2)
                .map(|k| if k == 0 || 2 * k == n { vec![k] } else { vec![k, n - k] })
                .collect(),
        }
    }

    /// Expands free signs into a full eigenvalue vector.
    pub fn expand(self, n: usize, free: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; n];
        for (g, &s) in self.free_groups(n).iter().zip(free) {
            for &k in g {
                beta[k] = s;
            }
        }
        beta
    }

    pub fn free_count(self, n: usize) -> usize {
        self.free_groups(n).len()
    }
}

impl std::str::FromStr for CirculantFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "circulant_selfadjoint" | "selfadjoint" | "self_adjoint" => Ok(CirculantFamily::SelfAdjoint),
            "circulant_symmetric" | "symmetric" => Ok(CirculantFamily::Symmetric),
            _ => Err(Error::InvalidInput(format!("unknown family '{s}'"))),
        }
    }
}

/// `Φ(U, B_β)` for circulant `U` and `B_β = F diag(β) F*` with `β` real
/// signs. Since `B² = I` the trace term is `‖U‖₁`, and `Re[(UB)_ij S̄_ij]`
/// depends linearly on `β`, so each evaluation costs `O(N·m)` for `m` free
/// signs.
#[derive(Debug, Clone)]
pub struct CirculantPhi {
    n: usize,
    family: CirculantFamily,
    trace_term: f64,
    /// Row `r`, column `f`: contribution of free sign `f` to `Re[g_r ε̄_r]`,
    /// where `g` is the first row of `UB`.
    coeff: DMatrix<f64>,
    /// `N/|γ_r|`.
    weight: Vec<f64>,
}

impl CirculantPhi {
    pub fn new(spec: &CirculantSpec, family: CirculantFamily, tol: &Tolerances) -> Result<Self> {
        check_nonzero(spec, tol)?;
        let n = spec.n;
        let nf = n as f64;
        let groups = family.free_groups(n);
        let mut coeff = DMatrix::zeros(n, groups.len());
        for r in 0..n {
            let eps_bar = (spec.gamma[r] / spec.gamma[r].norm()).conj();
            for (f, g) in groups.iter().enumerate() {
                // g_r = (1/N) Σ_k w^{−rk} q_k β_k.
                let s: Complex64 = g.iter().map(|&k| root_of_unity(n, (n - r) * k % n) * spec.q[k]).sum();
                coeff[(r, f)] = (s * eps_bar).re / nf;
            }
        }
        Ok(CirculantPhi {
            n,
            family,
            trace_term: nf * spec.gamma.iter().map(|g| g.norm()).sum::<f64>(),
            coeff,
            weight: spec.gamma.iter().map(|g| nf / g.norm()).collect(),
        })
    }

    pub fn free_count(&self) -> usize {
        self.coeff.ncols()
    }

    fn value_of(&self, v: &[f64]) -> f64 {
        self.trace_term - v.iter().zip(&self.weight).map(|(x, w)| x * x * w).sum::<f64>()
    }

    /// `Φ` at the given free signs.
    pub fn eval(&self, free: &[f64]) -> f64 {
        let v: Vec<f64> = (0..self.n).map(|r| (0..free.len()).map(|f| self.coeff[(r, f)] * free[f]).sum()).collect();
        self.value_of(&v)
    }

    /// Dense `B_β` for the given free signs.
    pub fn direction(&self, free: &[f64]) -> ComplexMatrix {
        let beta: Vec<Complex64> = self.family.expand(self.n, free).into_iter().map(|b| c64(b, 0.0)).collect();
        let b = circulant_matrix(&gamma_from_q(&beta));
        crate::matrix::hermitian_part(&b)
    }

    /// Mean of `Φ` over all sign choices, with the minimizing signs.
    /// Signs are walked in Gray-code order inside fixed chunks.
    pub fn enumerate(&self) -> (f64, f64, Vec<f64>) {
        let m = self.free_count();
        let top = m.min(6);
        let low = m - top;
        let chunks: Vec<(f64, f64, Vec<f64>)> = (0..1usize << top)
            .into_par_iter()
            .map(|c| {
                let mut free = vec![1.0; m];
                for t in 0..top {
                    if c >> t & 1 == 1 {
                        free[low + t] = -1.0;
                    }
                }
                let mut v: Vec<f64> =
                    (0..self.n).map(|r| (0..m).map(|f| self.coeff[(r, f)] * free[f]).sum()).collect();
                let mut val = self.value_of(&v);
                let (mut sum, mut best, mut arg) = (val, val, free.clone());
                for i in 1..(1usize << low) {
                    let f = i.trailing_zeros() as usize;
                    let delta = -2.0 * free[f];
                    free[f] = -free[f];
                    for (r, x) in v.iter_mut().enumerate() {
                        *x += delta * self.coeff[(r, f)];
                    }
                    val = self.value_of(&v);
                    sum += val;
                    if val < best {
                        best = val;
                        arg.copy_from_slice(&free);
                    }
                }
                (sum, best, arg)
            })
            .collect();
        let total: f64 = chunks.iter().map(|c| c.0).sum();
        let (_, best, arg) = chunks
            .into_iter()
            .reduce(|a, b| if b.1 < a.1 { b } else { a })
            .expect("at least one chunk");
        (total / (1u64 << m) as f64, best, arg)
    }

    /// Monte Carlo mean and standard error over `samples` uniform sign
    /// draws, with the most negative draw.
    pub fn monte_carlo(&self, samples: usize, seed: u64) -> McOutcome {
        let m = self.free_count();
        run_blocks(samples, seed, |rng| {
            let free: Vec<f64> = (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            (self.eval(&free), free)
        })
    }
}

/// Aggregated Monte Carlo draws.
#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome<T = Vec<f64>> {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub best: f64,
    pub best_sample: Option<T>,
}

const MC_BLOCK: usize = 4096;

/// Draws `samples` values in fixed-size blocks, block `b` using stream `b`
/// of `seed`, and combines block sums in order.
fn run_blocks<T, F>(samples: usize, seed: u64, draw: F) -> McOutcome<T>
where
    T: Send,
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> (f64, T) + Sync,
{
    let blocks = samples.div_ceil(MC_BLOCK);
    let parts: Vec<(f64, f64, f64, Option<T>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let (mut s, mut s2, mut best, mut arg) = (0.0, 0.0, f64::INFINITY, None);
            for _ in 0..count {
                let (v, t) = draw(&mut rng);
                s += v;
                s2 += v * v;
                if v < best {
                    best = v;
                    arg = Some(t);
                }
            }
            (s, s2, best, arg)
        })
        .collect();
    let n = samples as f64;
    let (mut s, mut s2, mut best, mut arg) = (0.0, 0.0, f64::INFINITY, None);
    for (ps, ps2, pb, pa) in parts {
        s += ps;
        s2 += ps2;
        if pb < best {
            best = pb;
            arg = pa;
        }
    }
    let mean = if samples > 0 { s / n } else { f64::NAN };
    let var = if samples > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { f64::NAN };
    McOutcome { mean, stderr: (var / n).sqrt(), samples, best, best_sample: arg }
}

/// Whether to enumerate all sign vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enumeration {
    /// Enumerate up to the family's size cutoff.
    Auto,
    Always,
    Never,
}

/// Settings for the expectation routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationOptions {
    pub enumeration: Enumeration,
    /// `None`: sample only when no enumeration ran. `Some(0)`: never sample.
    pub mc_samples: Option<usize>,
    pub seed: u64,
}

impl Default for ExpectationOptions {
    fn default() -> Self {
        ExpectationOptions { enumeration: Enumeration::Auto, mc_samples: None, seed: 0 }
    }
}

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
/// Largest `N` enumerated automatically for i.i.d. signs.
pub const SELF_ADJOINT_ENUM_MAX: usize = 20;
/// Largest `N` enumerated automatically for mirrored signs.
pub const SYMMETRIC_ENUM_MAX: usize = 24;

/// Expectation of `Φ(U,B)` over a random direction model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationReport {
    pub closed_form: Option<f64>,
    pub exact_enumeration: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub samples: usize,
    /// `|mc − closed_form| > 4·stderr`, ignoring deviations at roundoff level.
    pub mc_outlier: bool,
    /// Most negative `Φ` met while enumerating or sampling.
    pub min_observed: Option<f64>,
    #[serde(skip)]
    pub min_direction: Option<ComplexMatrix>,
}

fn finish_report(
    closed: f64,
    exact: Option<(f64, f64, ComplexMatrix)>,
    mc: Option<(McOutcome<ComplexMatrix>,)>,
) -> Result<ExpectationReport> {
    if let Some((e, _, _)) = &exact {
        if !agrees(*e, closed, 1e-9) {
            return Err(Error::Numerical(format!("enumeration {e} disagrees with closed form {closed}")));
        }
    }
    let mut rep = ExpectationReport {
        closed_form: Some(closed),
        exact_enumeration: exact.as_ref().map(|e| e.0),
        mc_estimate: None,
        mc_stderr: None,
        samples: 0,
        mc_outlier: false,
        min_observed: None,
        min_direction: None,
    };
    if let Some((_, best, dir)) = exact {
        rep.min_observed = Some(best);
        rep.min_direction = Some(dir);
    }
    if let Some((m,)) = mc {
        rep.mc_estimate = Some(m.mean);
        rep.mc_stderr = Some(m.stderr);
        rep.samples = m.samples;
        let dev = (m.mean - closed).abs();
        rep.mc_outlier = dev > 4.0 * m.stderr && dev > 1e-9 * closed.abs().max(1.0);
        if rep.min_observed.is_none_or(|b| m.best < b) {
            rep.min_observed = Some(m.best);
            rep.min_direction = m.best_sample;
        }
    }
    Ok(rep)
}

fn circulant_expectation(
    spec: &CirculantSpec,
    family: CirculantFamily,
    closed: f64,
    opts: &ExpectationOptions,
    tol: &Tolerances,
) -> Result<ExpectationReport> {
    let cp = CirculantPhi::new(spec, family, tol)?;
    let cutoff = match family {
        CirculantFamily::SelfAdjoint => SELF_ADJOINT_ENUM_MAX,
        CirculantFamily::Symmetric => SYMMETRIC_ENUM_MAX,
    };
    let run_enum = match opts.enumeration {
        Enumeration::Auto => spec.n <= cutoff,
        Enumeration::Always => cp.free_count() <= 40,
        Enumeration::Never => false,
    };
    let exact = run_enum.then(|| {
        let (mean, best, arg) = cp.enumerate();
        (mean, best, cp.direction(&arg))
    });
    let samples = opts.mc_samples.unwrap_or(if run_enum { 0 } else { DEFAULT_MC_SAMPLES });
    let mc = (samples > 0).then(|| {
        let m = cp.monte_carlo(samples, opts.seed);
        let dir = m.best_sample.as_ref().map(|s| cp.direction(s));
        (McOutcome { mean: m.mean, stderr: m.stderr, samples: m.samples, best: m.best, best_sample: dir },)
    });
    finish_report(closed, exact, mc)
}

fn parity(n: usize) -> f64 {
    (n % 2) as f64
}

/// `N Σ|γ_i| − ½(1/|γ_0| + (1−e)/|γ_{N/2}| + Σ 1/|γ_i|)`, `e = N mod 2`.
pub fn closed_form_selfadjoint(gamma: &[Complex64]) -> f64 {
    let n = gamma.len();
    let e = parity(n);
    let half = if n % 2 == 0 { (1.0 - e) / gamma[n / 2].norm() } else { 0.0 };
    let inv: f64 = gamma.iter().map(|g| 1.0 / g.norm()).sum();
    n as f64 * gamma.iter().map(|g| g.norm()).sum::<f64>() - 0.5 * (1.0 / gamma[0].norm() + half + inv)
}

/// `N Σ|γ_i| − (1/|γ_0| + (1−e)/|γ_{N/2}| + (N−2+e)/N · Σ 1/|γ_i|)`.
pub fn closed_form_symmetric(gamma: &[Complex64]) -> f64 {
    let n = gamma.len();
    let nf = n as f64;
    let e = parity(n);
    let half = if n % 2 == 0 { (1.0 - e) / gamma[n / 2].norm() } else { 0.0 };
    let inv: f64 = gamma.iter().map(|g| 1.0 / g.norm()).sum();
    nf * gamma.iter().map(|g| g.norm()).sum::<f64>() - (1.0 / gamma[0].norm() + half + (nf - 2.0 + e) / nf * inv)
}

/// Expectation of `Φ(U,B)` for self-adjoint circulant `U` over
/// `B = F diag(β) F*` with i.i.d. uniform signs `β`.
pub fn expected_phi_circulant_selfadjoint(
    u: &UnitaryCandidate,
    opts: &ExpectationOptions,
    tol: &Tolerances,
) -> Result<ExpectationReport> {
    let spec = circulant_of(u, tol)?;
    if hermitian_residual(u.matrix()) > 1e-10 {
        return Err(Error::NotSelfAdjoint);
    }
    check_nonzero(&spec, tol)?;
    let closed = closed_form_selfadjoint(&spec.gamma);
    circulant_expectation(&spec, CirculantFamily::SelfAdjoint, closed, opts, tol)
}

/// Expectation of `Φ(U,B)` for real symmetric circulant `U` over symmetric
/// circulant orthogonal `B`, i.e. signs with `β_k = β_{−k}`.
pub fn expected_phi_circulant_symmetric(
    u: &UnitaryCandidate,
    opts: &ExpectationOptions,
    tol: &Tolerances,
) -> Result<ExpectationReport> {
    let spec = circulant_of(u, tol)?;
    let m = u.matrix();
    if max_imag(m) > 1e-12 || max_abs_diff(m, &m.transpose()) > 1e-12 {
        return Err(Error::NotSymmetric);
    }
    check_nonzero(&spec, tol)?;
    let closed = closed_form_symmetric(&spec.gamma);
    circulant_expectation(&spec, CirculantFamily::Symmetric, closed, opts, tol)
}

/// `(2N − 1) Σ|U_ij| − Σ 1/|U_ij|`.
pub fn closed_form_gaussian(m: &ComplexMatrix) -> f64 {
    let n = m.nrows() as f64;
    (2.0 * n - 1.0) * m.iter().map(|z| z.norm()).sum::<f64>() - m.iter().map(|z| 1.0 / z.norm()).sum::<f64>()
}

/// Expectation of `Φ(U,B)` for `B = G + G*`, `G` with i.i.d. standard
/// complex Gaussian entries. Sampling uses `opts.mc_samples` (default
/// 100 000); there is no enumeration.
pub fn expected_phi_gaussian(
    u: &UnitaryCandidate,
    opts: &ExpectationOptions,
    tol: &Tolerances,
) -> Result<ExpectationReport> {
    let ctx = PhiContext::new(u, tol)?;
    let closed = closed_form_gaussian(u.matrix());
    let samples = opts.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let n = u.n();
    let mc = (samples > 0).then(|| {
        (run_blocks(samples, opts.seed, |rng| {
            let b = gaussian_hermitian(n, rng);
            (ctx.eval_unchecked(&b).value, b)
        }),)
    });
    finish_report(closed, None, mc)
}

/// Second-order test on `O(N)`: with `X = SᵗU` symmetrized, a real critical
/// `U` can be a local maximum only if the two smallest eigenvalues of `X`
/// have nonnegative sum. Returns the sum and whether it passes.
pub fn real_second_order_test(u: &UnitaryCandidate, tol: &Tolerances) -> Result<(f64, bool)> {
    if max_imag(u.matrix()) > 1e-12 {
        return Err(Error::NotReal);
    }
    if u.n() < 2 {
        return Err(Error::InvalidInput("need N ≥ 2".into()));
    }
    let rep = critical_report(u, tol)?;
    if !rep.is_critical {
        return Err(Error::NotCritical(rep.residual));
    }
    let x = rep.x.map(|z| z.re);
    let xs = (&x + x.transpose()).scale(0.5);
    let mut ev: Vec<f64> = xs.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let sum = ev[0] + ev[1];
    Ok((sum, sum >= -tol.neg))
}

/// Real dimensions of the saturation space `E_U` and the linearized
/// constraint space `D_U` at `U = H/√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectResult {
    pub dim_du: usize,
    pub dim_eu: usize,
    /// Orthonormal basis of `D_U` (as real `N×N` matrices).
    pub basis_du: Vec<DMatrix<f64>>,
    /// Largest constraint violation over the returned bases.
    pub residual: f64,
}

/// Null space of a real matrix by SVD, with rank threshold `1e-8·σ_max`.
/// Rows are zero-padded so the SVD returns a full right factor.
fn null_space(a: &DMatrix<f64>) -> (usize, Vec<Vec<f64>>, f64) {
    let cols = a.ncols();
    let mut m = DMatrix::zeros(a.nrows().max(cols), cols);
    m.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thr = 1e-8 * smax.max(f64::MIN_POSITIVE);
    let null: Vec<Vec<f64>> = (0..cols)
        .filter(|&k| svd.singular_values[k] <= thr)
        .map(|k| vt.row(k).iter().copied().collect())
        .collect();
    let residual = null
        .iter()
        .map(|v| (&m * nalgebra::DVector::from_column_slice(v)).amax())
        .fold(0.0, f64::max);
    (null.len(), null, residual)
}

/// Defect spaces of a complex Hadamard matrix. `D_U` is solved over real
/// `A` from `Σ_k Ū_ki U_kj (A_ki − A_kj) = 0` (`i < j`, real and imaginary
/// parts); `E_U` over hermitian `B` from `Im[(UB)_ij Ū_ij] = 0`. Both are
/// raw dimensions, including the `2N − 1` directions present for every
/// Hadamard matrix.
pub fn defect(h: &ComplexMatrix, scaled: bool, tol: &Tolerances) -> Result<DefectResult> {
    crate::matrix::validate(h)?;
    let n = h.nrows();
    let rt = (n as f64).sqrt();
    let u = if scaled { h.clone() } else { h.scale(1.0 / rt) };
    if !is_hadamard(&u.scale(rt), tol.unitary.max(1e-8)) {
        return Err(Error::NotHadamard);
    }

    let mut d = DMatrix::<f64>::zeros(n * (n - 1), n * n);
    let mut row = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                let coef = u[(k, i)].conj() * u[(k, j)];
                for (part, val) in [(0, coef.re), (1, coef.im)] {
                    d[(row + part, k * n + i)] += val;
                    d[(row + part, k * n + j)] -= val;
                }
            }
            row += 2;
        }
    }

    let basis = hermitian_basis(n);
    let mut e = DMatrix::<f64>::zeros(n * n, n * n);
    for (k, el) in basis.iter().enumerate() {
        let ub = &u * el.to_dense(n);
        for j in 0..n {
            for i in 0..n {
                e[(i * n + j, k)] = (ub[(i, j)] * u[(i, j)].conj()).im;
            }
        }
    }

    let (dim_du, vecs, r1) = null_space(&d);
    let (dim_eu, _, r2) = null_space(&e);
    if dim_du != dim_eu {
        return Err(Error::Numerical(format!("dim D_U = {dim_du} but dim E_U = {dim_eu}")));
    }
    let basis_du = vecs.iter().map(|v| DMatrix::from_fn(n, n, |a, b| v[a * n + b])).collect();
    Ok(DefectResult { dim_du, dim_eu, basis_du, residual: r1.max(r2) })
}

/// Which criterion excluded a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionCriterion {
    PhiIdentityPattern,
    PhiOneMinusU,
    PhiIdentityCirculant,
    PhiSelfCirculant,
    ExpectationNegative,
    HessianNegativeDirection,
    None,
}

impl ExclusionCriterion {
    pub fn name(self) -> &'static str {
        match self {
            ExclusionCriterion::PhiIdentityPattern => "phi_identity_pattern",
            ExclusionCriterion::PhiOneMinusU => "phi_one_minus_u",
            ExclusionCriterion::PhiIdentityCirculant => "phi_identity_circulant",
            ExclusionCriterion::PhiSelfCirculant => "phi_self_circulant",
            ExclusionCriterion::ExpectationNegative => "expectation_negative",
            ExclusionCriterion::HessianNegativeDirection => "hessian_negative_direction",
            ExclusionCriterion::None => "none",
        }
    }
}

/// Result of [`exclusion_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExclusionVerdict {
    pub excluded: bool,
    pub criterion: ExclusionCriterion,
    /// Negative value that fired, or the smallest Hessian eigenvalue when
    /// nothing fired.
    pub value: f64,
    /// Hermitian direction with `Φ(U, witness) < 0`.
    pub witness: Option<ComplexMatrix>,
    /// Every criterion evaluated, in order, with its value.
    pub evaluated: Vec<(ExclusionCriterion, f64)>,
}

/// Settings for [`exclusion_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineOptions {
    pub tol: Tolerances,
    pub expectation: ExpectationOptions,
}

fn verdict(
    criterion: ExclusionCriterion,
    value: f64,
    witness: Option<ComplexMatrix>,
    evaluated: Vec<(ExclusionCriterion, f64)>,
    u: &UnitaryCandidate,
    tol: &Tolerances,
) -> Result<ExclusionVerdict> {
    if let Some(w) = &witness {
        let v = phi(u, w, tol)?.value;
        if !(v < 0.0) {
            return Err(Error::Numerical(format!("witness for {} has Φ = {v}", criterion.name())));
        }
    }
    Ok(ExclusionVerdict { excluded: true, criterion, value, witness, evaluated })
}

/// Runs the exclusion criteria on a critical `U`: pattern closed forms,
/// circulant closed forms, circulant expectations, and finally the Hessian
/// spectrum. Returns the first criterion whose value is below `−tol.neg`.
/// Witnesses are re-verified by direct evaluation of `Φ`.
pub fn exclusion_pipeline(u: &UnitaryCandidate, opts: &PipelineOptions) -> Result<ExclusionVerdict> {
    let tol = &opts.tol;
    let rep = critical_report(u, tol)?;
    if !rep.is_critical {
        return Err(Error::NotCritical(rep.residual));
    }
    let n = u.n();
    let neg = |v: f64| v < -tol.neg;
    let mut evaluated = Vec::new();
    use ExclusionCriterion as C;

    if let Some(pu) = recognize_pattern_unitary(u, tol.cluster) {
        if pu.branch.is_real() {
            let v = phi_identity_pattern(&pu, tol)?;
            evaluated.push((C::PhiIdentityPattern, v));
            if neg(v) {
                return verdict(C::PhiIdentityPattern, v, Some(all_ones(n)), evaluated, u, tol);
            }
            if pu.branch == Branch::RealMinus && pu.pattern.is_symmetric() {
                let v = phi_one_minus_u(&pu, tol)?;
                evaluated.push((C::PhiOneMinusU, v));
                if neg(v) {
                    return verdict(C::PhiOneMinusU, v, Some(identity(n) - u.matrix()), evaluated, u, tol);
                }
            }
        }
    }

    if circulant_spec(u.matrix(), tol.cluster).is_some() {
        let real = max_imag(u.matrix()) <= 1e-12;
        let self_adjoint = hermitian_residual(u.matrix()) <= 1e-10;
        if real {
            let v = phi_identity_circulant(u, tol)?;
            evaluated.push((C::PhiIdentityCirculant, v));
            if neg(v) {
                return verdict(C::PhiIdentityCirculant, v, Some(all_ones(n)), evaluated, u, tol);
            }
        }
        if self_adjoint {
            let v = phi_self_circulant(u, tol)?;
            evaluated.push((C::PhiSelfCirculant, v));
            if neg(v) {
                return verdict(C::PhiSelfCirculant, v, Some(u.matrix().clone()), evaluated, u, tol);
            }
        }
        let symmetric = real && max_abs_diff(u.matrix(), &u.matrix().transpose()) <= 1e-12;
        let report = if symmetric {
            Some(expected_phi_circulant_symmetric(u, &opts.expectation, tol)?)
        } else if self_adjoint {
            Some(expected_phi_circulant_selfadjoint(u, &opts.expectation, tol)?)
        } else {
            None
        };
        if let Some(r) = report {
            let v = r.closed_form.expect("closed form always present");
            evaluated.push((C::ExpectationNegative, v));
            if neg(v) {
                let w = r.min_direction.filter(|_| r.min_observed.is_some_and(|b| b < 0.0));
                return verdict(C::ExpectationNegative, v, w, evaluated, u, tol);
            }
        }
    }

    match descent_direction(u, tol)? {
        Some((lambda, b)) => {
            evaluated.push((C::HessianNegativeDirection, lambda));
            verdict(C::HessianNegativeDirection, lambda, Some(b), evaluated, u, tol)
        }
        None => {
            let lambda = crate::hessian::hessian_spectrum(u, tol)?.eigenvalues[0];
            evaluated.push((C::HessianNegativeDirection, lambda));
            Ok(ExclusionVerdict { excluded: false, criterion: C::None, value: lambda, witness: None, evaluated })
        }
    }
}

/// A random critical circulant whose expectation came out positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanFinding {
    pub trial: usize,
    /// Eigenvalues of `U`.
    pub q: Vec<f64>,
    pub gamma: Vec<Complex64>,
    pub value: f64,
    #[serde(skip)]
    pub matrix: ComplexMatrix,
}

/// Summary of [`conjecture_scan`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub family: CirculantFamily,
    pub n: usize,
    pub seed: u64,
    pub trials: usize,
    /// Trials with all `γ_i` nonzero, for which the expectation was evaluated.
    pub evaluated: usize,
    /// Trials rejected because some `γ_i` vanished.
    pub rejected_zero: usize,
    pub max_value: Option<f64>,
    /// Trials with `|value| ≤ 1e-9`.
    pub boundary_cases: usize,
    /// Trials with `value > 1e-9`.
    pub findings: Vec<ScanFinding>,
}

/// Value, eigenvalues and first row of one scan trial.
type Trial = (f64, Vec<f64>, Vec<Complex64>);

/// Threshold separating a positive expectation from rounding noise.
pub const SCAN_THRESHOLD: f64 = 1e-9;

/// Draws `trials` random critical circulants in `family` (random sign
/// eigenvalue vectors, mirrored for the symmetric family) and evaluates the
/// closed-form expectation of `Φ`. Positive values are collected as
/// findings. Trial `k` uses stream `k` of `seed`.
pub fn conjecture_scan(family: CirculantFamily, n: usize, trials: usize, seed: u64, tol: &Tolerances) -> Result<ScanReport> {
    if n < 3 {
        return Err(Error::InvalidInput("scan needs N ≥ 3".into()));
    }
    let m = family.free_count(n);
    let results: Vec<Option<Trial>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let free: Vec<f64> = (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let q = family.expand(n, &free);
            let qc: Vec<Complex64> = q.iter().map(|&b| c64(b, 0.0)).collect();
            let gamma = gamma_from_q(&qc);
            if gamma.iter().any(|g| !(g.norm() > tol.zero)) {
                return None;
            }
            let v = match family {
                CirculantFamily::SelfAdjoint => closed_form_selfadjoint(&gamma),
                CirculantFamily::Symmetric => closed_form_symmetric(&gamma),
            };
            Some((v, q, gamma))
        })
        .collect();
    let mut report = ScanReport {
        family,
        n,
        seed,
        trials,
        evaluated: 0,
        rejected_zero: 0,
        max_value: None,
        boundary_cases: 0,
        findings: Vec::new(),
    };
    for (trial, r) in results.into_iter().enumerate() {
        let Some((v, q, gamma)) = r else {
            report.rejected_zero += 1;
            continue;
        };
        report.evaluated += 1;
        report.max_value = Some(report.max_value.map_or(v, |mx: f64| mx.max(v)));
        if v.abs() <= SCAN_THRESHOLD {
            report.boundary_cases += 1;
        } else if v > SCAN_THRESHOLD {
            let matrix = circulant_matrix(&gamma);
            report.findings.push(ScanFinding { trial, q, gamma, value: v, matrix });
        }
    }
    Ok(report)
}

/// Builds `U = F diag(q) F*` for a real sign vector, for use with the
/// expectation routines.
pub fn circulant_from_signs(q: &[f64]) -> Result<UnitaryCandidate> {
    let qc: Vec<Complex64> = q.iter().map(|&b| c64(b, 0.0)).collect();
    Ok(crate::constructors::circulant_from_eigenphases(&qc)?.1)
}
