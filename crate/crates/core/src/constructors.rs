//! Builders for the matrix families under study: Fourier matrices, the
//! two-entry matrices `K_N/√N`, two-valued unitaries attached to
//! `(a,b,c)` patterns, block design incidence matrices and circulant
//! unitaries given by their Fourier eigenvalues.

use crate::error::{Error, Result};
use crate::matrix::{c64, kron, ComplexMatrix, UnitaryCandidate};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Unnormalized Fourier matrix `(w^{jk})` with `w = e^{2πi/N}`.
pub fn fourier(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |j, k| root_of_unity(n, j * k))
}

/// `e^{2πi k/n}`, reducing `k` first so large exponents stay accurate.
pub fn root_of_unity(n: usize, k: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (k % n) as f64 / n as f64)
}

/// Kronecker product `F_{N_1} ⊗ … ⊗ F_{N_K}`.
pub fn fourier_group(sizes: &[usize]) -> Result<ComplexMatrix> {
    let (&first, rest) = sizes
        .split_first()
        .ok_or_else(|| Error::InvalidInput("fourier_group needs at least one factor".into()))?;
    if sizes.contains(&0) {
        return Err(Error::InvalidInput("factor sizes must be positive".into()));
    }
    Ok(rest.iter().fold(fourier(first), |acc, &n| kron(&acc, &fourier(n))))
}

/// `U_N = (2J − N·I)/N`: diagonal `(2−N)/N`, off-diagonal `2/N`.
pub fn kn(n: usize) -> UnitaryCandidate {
    let nf = n as f64;
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c64((2.0 - nf) / nf, 0.0)
        } else {
            c64(2.0 / nf, 0.0)
        }
    });
    UnitaryCandidate::new(m, 1e-10).expect("kn is orthogonal")
}

/// A two-symbol square matrix split as `P + Q = J`, where any two rows,
/// after permuting columns, read
///
/// ```text
/// P…P P…P Q…Q Q…Q
/// P…P Q…Q P…P Q…Q
///  a   b   b   c
/// ```
///
/// and likewise for columns. `P` marks the entries that take the value `x`
/// in a pattern unitary and `Q` those taking `y`. For the block-design
/// families `P` is the incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternABC {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub n: usize,
    pub p: DMatrix<u8>,
    pub q: DMatrix<u8>,
}

impl PatternABC {
    /// Builds the pattern whose `P` is `p`, if `p` has the pattern structure.
    pub fn from_p(p: &DMatrix<u8>) -> Option<Self> {
        detect_pattern(&p.map(|v| 1 - v.min(1)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.p == self.p.transpose()
    }

    pub fn p_complex(&self) -> ComplexMatrix {
        self.p.map(|v| c64(v as f64, 0.0))
    }

    pub fn q_complex(&self) -> ComplexMatrix {
        self.q.map(|v| c64(v as f64, 0.0))
    }

    /// `b² − b = ac`, the relation forced by orthogonality of two-valued rows.
    pub fn satisfies_relation(&self) -> bool {
        self.b * self.b == self.b + self.a * self.c
    }
}

/// Recognizes an `(a,b,c)` pattern in a 0/1 matrix, reading 0 as `P` and
/// 1 as `Q`. Returns `None` when row sums, pairwise row or column profiles
/// are not constant, or when `b² − b ≠ ac`.
pub fn detect_pattern(m01: &DMatrix<u8>) -> Option<PatternABC> {
    let n = m01.nrows();
    if n < 2 || m01.ncols() != n || m01.iter().any(|&v| v > 1) {
        return None;
    }
    let q = m01.clone();
    let p = q.map(|v| 1 - v);
    let rows = profile(&q)?;
    let cols = profile(&q.transpose())?;
    if rows != cols {
        return None;
    }
    let (a, b, c) = rows;
    let pat = PatternABC { a, b, c, n, p, q };
    pat.satisfies_relation().then_some(pat)
}

/// Common `(a, b, c)` profile of every pair of rows of a 0/1 matrix.
fn profile(q: &DMatrix<u8>) -> Option<(usize, usize, usize)> {
    let n = q.nrows();
    let mut seen = None;
    for i in 0..n {
        for k in (i + 1)..n {
            let mut counts = [0usize; 4];
            for j in 0..n {
                counts[(2 * q[(i, j)] + q[(k, j)]) as usize] += 1;
            }
            let [pp, pq, qp, qq] = counts;
            if pq != qp {
                return None;
            }
            let prof = (pp, pq, qq);
            match seen {
                None => seen = Some(prof),
                Some(s) if s != prof => return None,
                _ => {}
            }
        }
    }
    seen
}

/// Solution branch of a two-valued unitary on a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Smaller root of `at² − 2bt + c = 0`.
    RealMinus,
    /// Larger root of `at² − 2bt + c = 0`.
    RealPlus,
    /// `x = −εy` with `Im ε ≥ 0`.
    ComplexEps,
    /// `x = −εy` with `Im ε < 0`.
    ComplexEpsConj,
}

impl Branch {
    pub const ALL: [Branch; 4] =
        [Branch::RealMinus, Branch::RealPlus, Branch::ComplexEps, Branch::ComplexEpsConj];

    pub fn is_real(self) -> bool {
        matches!(self, Branch::RealMinus | Branch::RealPlus)
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::RealMinus => "real_minus",
            Branch::RealPlus => "real_plus",
            Branch::ComplexEps => "complex_eps",
            Branch::ComplexEpsConj => "complex_eps_conj",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.replace('-', "_");
        Branch::ALL
            .into_iter()
            .find(|b| b.name() == k)
            .ok_or_else(|| Error::InvalidInput(format!("unknown branch '{s}'")))
    }
}

/// The unitary `xP + yQ` on a pattern, normalized with `y > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternUnitary {
    pub pattern: PatternABC,
    pub branch: Branch,
    pub x: Complex64,
    pub y: Complex64,
    pub t: Option<f64>,
    pub eps: Option<Complex64>,
    pub matrix: UnitaryCandidate,
}

impl PatternUnitary {
    /// Common row sum `λ = (a+b)x + (b+c)y`, so that `UJ = λJ`.
    pub fn row_sum(&self) -> Complex64 {
        let p = &self.pattern;
        self.x * (p.a + p.b) as f64 + self.y * (p.b + p.c) as f64
    }
}

/// Roots `t_∓ = (b ∓ √(b² − ac))/a`, or the single root `c/(2b)` when `a = 0`.
fn real_root(pat: &PatternABC, branch: Branch) -> Result<f64> {
    let (a, b, c) = (pat.a as f64, pat.b as f64, pat.c as f64);
    if pat.b == 0 {
        return Err(Error::BranchUnavailable("b = 0 leaves y undefined".into()));
    }
    let t = if pat.a == 0 {
        if branch == Branch::RealPlus {
            return Err(Error::BranchUnavailable("a = 0 has the single root c/(2b)".into()));
        }
        c / (2.0 * b)
    } else {
        let disc = b * b - a * c;
        if disc < 0.0 {
            return Err(Error::BranchUnavailable(format!("b² − ac = {disc} < 0")));
        }
        let s = disc.sqrt();
        if branch == Branch::RealMinus {
            // Written as c/(b + s) to avoid cancellation in b − s.
            c / (b + s)
        } else {
            (b + s) / a
        }
    };
    if !(t > 0.0) {
        return Err(Error::BranchUnavailable(format!("root t = {t} is not positive")));
    }
    Ok(t)
}

/// Builds `xP + yQ` on the requested branch and certifies unitarity.
///
/// Real branches: `t` solves `at² − 2bt + c = 0`, `y = 1/(√b(t+1))`,
/// `x = −ty`. Complex branches: `y = 1/√N`, `x = −εy` with
/// `Re ε = (a+c)/(2b)`.
pub fn pattern_unitary(pat: &PatternABC, branch: Branch, tol_unitary: f64) -> Result<PatternUnitary> {
    let b = pat.b as f64;
    let (x, y, t, eps) = if branch.is_real() {
        let t = real_root(pat, branch)?;
        let y = 1.0 / (b.sqrt() * (t + 1.0));
        (c64(-t * y, 0.0), c64(y, 0.0), Some(t), None)
    } else {
        if pat.b == 0 {
            return Err(Error::BranchUnavailable("b = 0 leaves ε undefined".into()));
        }
        let re = (pat.a + pat.c) as f64 / (2.0 * b);
        if re.abs() > 1.0 {
            return Err(Error::BranchUnavailable(format!("|Re ε| = {re} > 1")));
        }
        let im = (1.0 - re * re).max(0.0).sqrt();
        let eps = if branch == Branch::ComplexEps { c64(re, im) } else { c64(re, -im) };
        let y = 1.0 / (pat.n as f64).sqrt();
        (-eps * y, c64(y, 0.0), None, Some(eps))
    };
    let m = pat.p_complex().map(|v| v * x) + pat.q_complex().map(|v| v * y);
    let matrix = UnitaryCandidate::new(m, tol_unitary)?;
    Ok(PatternUnitary { pattern: pat.clone(), branch, x, y, t, eps, matrix })
}

/// Recognizes a unitary of the form `xP + yQ` with `y > 0` on some pattern
/// and classifies its branch. Values within `tol` are identified.
pub fn recognize_pattern_unitary(u: &UnitaryCandidate, tol: f64) -> Option<PatternUnitary> {
    let m = u.matrix();
    let n = m.nrows();
    let mut values: Vec<Complex64> = Vec::new();
    for z in m.iter() {
        if !values.iter().any(|v| (v - z).norm() <= tol) {
            values.push(*z);
            if values.len() > 2 {
                return None;
            }
        }
    }
    if values.len() != 2 {
        return None;
    }
    let positive_real = |z: &Complex64| z.im.abs() <= tol && z.re > tol;
    let (x, y) = match (positive_real(&values[0]), positive_real(&values[1])) {
        (true, false) => (values[1], values[0]),
        (false, true) => (values[0], values[1]),
        _ => return None,
    };
    let q01 = m.map(|z| u8::from((z - y).norm() <= tol));
    let pattern = detect_pattern(&q01)?;
    let y = c64(y.re, 0.0);
    let nf = n as f64;

    if x.im.abs() <= tol {
        let x = c64(x.re, 0.0);
        let t = -x.re / y.re;
        let branch = [Branch::RealMinus, Branch::RealPlus]
            .into_iter()
            .filter_map(|b| real_root(&pattern, b).ok().map(|r| (b, (r - t).abs())))
            .min_by(|l, r| l.1.total_cmp(&r.1))
            .filter(|(_, d)| *d <= 1e-8 * t.abs().max(1.0))?
            .0;
        return Some(PatternUnitary { pattern, branch, x, y, t: Some(t), eps: None, matrix: u.clone() });
    }
    let eps = -x / y;
    let ok = (x.norm() - 1.0 / nf.sqrt()).abs() <= tol
        && (y.re - 1.0 / nf.sqrt()).abs() <= tol
        && (2.0 * pattern.b as f64 * eps.re - (pattern.a + pattern.c) as f64).abs() <= 1e-8 * nf;
    if !ok {
        return None;
    }
    let branch = if eps.im >= 0.0 { Branch::ComplexEps } else { Branch::ComplexEpsConj };
    Some(PatternUnitary { pattern, branch, x, y, t: None, eps: Some(eps), matrix: u.clone() })
}

/// Circulant development of a difference set: `M_ij = 1` iff `j − i ∈ D`.
fn circulant_development(n: usize, diffs: &[usize]) -> DMatrix<u8> {
    DMatrix::from_fn(n, n, |i, j| u8::from(diffs.contains(&((j + n - i) % n))))
}

/// Incidence matrix of the Fano plane, developed from `{1,2,4} mod 7`.
pub fn incidence_fano() -> PatternABC {
    PatternABC::from_p(&circulant_development(7, &[1, 2, 4])).expect("Fano plane is a (1,2,2) pattern")
}

/// Incidence matrix of the Paley biplane, developed from the quadratic
/// residues `{1,3,4,5,9} mod 11`.
pub fn incidence_paley_biplane() -> PatternABC {
    PatternABC::from_p(&circulant_development(11, &[1, 3, 4, 5, 9]))
        .expect("Paley biplane is a (2,3,3) pattern")
}

pub fn is_prime(q: u64) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| q % d != 0)
}

/// Point-line incidence matrix of the projective plane over `F_q`, `q` prime.
///
/// Points and lines are both indexed by nonzero vectors of `F_q³` whose
/// first nonzero coordinate is 1, in lexicographic order; point `v` lies on
/// line `w` iff `v·w = 0`. The matrix is symmetric.
pub fn incidence_projective_plane(q: u64) -> Result<PatternABC> {
    if !is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    if q > 100 {
        return Err(Error::InvalidInput(format!("q = {q} is too large for dense analysis")));
    }
    let q = q as usize;
    let mut pts: Vec<[usize; 3]> = Vec::new();
    for v0 in 0..q {
        for v1 in 0..q {
            for v2 in 0..q {
                let v = [v0, v1, v2];
                if v.iter().find(|&&x| x != 0) == Some(&1) {
                    pts.push(v);
                }
            }
        }
    }
    let n = pts.len();
    let p = DMatrix::from_fn(n, n, |i, j| {
        let dot: usize = (0..3).map(|k| pts[i][k] * pts[j][k]).sum();
        u8::from(dot % q == 0)
    });
    PatternABC::from_p(&p).ok_or_else(|| Error::Numerical("projective plane failed pattern check".into()))
}

/// The pattern of `kn(N)`: `P = I`, parameters `(0, 1, N−2)`.
pub fn kn_pattern(n: usize) -> Option<PatternABC> {
    PatternABC::from_p(&DMatrix::identity(n, n))
}

/// `(a, b, c, N)` of the Grassmannian pattern at `(q, d)`:
/// `a = (q^d − 1)/(q − 1)`, `b = q^d`, `c = q^d(q − 1)`.
pub fn grassmannian_params(q: u64, d: u32) -> Result<(u64, u64, u64, u64)> {
    if q < 2 || d < 1 {
        return Err(Error::InvalidInput("need q ≥ 2 and d ≥ 1".into()));
    }
    let qd = q.checked_pow(d).ok_or_else(|| Error::InvalidInput("q^d overflows".into()))?;
    let (a, b, c) = ((qd - 1) / (q - 1), qd, qd * (q - 1));
    Ok((a, b, c, a + 2 * b + c))
}

/// Looks up a built-in design by key: `fano`, `paley11`, `pg2_<q>`, `kn_<N>`.
pub fn design_by_key(key: &str) -> Result<PatternABC> {
    let bad = || Error::InvalidInput(format!("unknown design '{key}' (fano, paley11, pg2_<q>, kn_<N>)"));
    match key {
        "fano" => Ok(incidence_fano()),
        "paley11" => Ok(incidence_paley_biplane()),
        _ => {
            if let Some(q) = key.strip_prefix("pg2_") {
                incidence_projective_plane(q.parse().map_err(|_| bad())?)
            } else if let Some(n) = key.strip_prefix("kn_") {
                let n: usize = n.parse().map_err(|_| bad())?;
                if !(3..=512).contains(&n) {
                    return Err(Error::InvalidInput("kn pattern needs 3 ≤ N ≤ 512".into()));
                }
                kn_pattern(n).ok_or_else(bad)
            } else {
                Err(bad())
            }
        }
    }
}

/// A circulant matrix `U_ij = γ_{j−i}` together with its Fourier
/// eigenvalues `q_k = Σ_r w^{kr} γ_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculantSpec {
    pub n: usize,
    pub gamma: Vec<Complex64>,
    pub q: Vec<Complex64>,
    /// `q` real.
    pub self_adjoint: bool,
    /// `q̄_k = q_{−k}`.
    pub real: bool,
}

/// `γ_j = (1/N) Σ_k w^{−jk} q_k`.
pub fn gamma_from_q(q: &[Complex64]) -> Vec<Complex64> {
    let n = q.len();
    (0..n)
        .map(|j| {
            let s: Complex64 = (0..n).map(|k| root_of_unity(n, (n - j % n) * k) * q[k]).sum();
            s / n as f64
        })
        .collect()
}

/// `q_k = Σ_r w^{kr} γ_r`.
pub fn q_from_gamma(gamma: &[Complex64]) -> Vec<Complex64> {
    let n = gamma.len();
    (0..n).map(|k| (0..n).map(|r| root_of_unity(n, k * r) * gamma[r]).sum()).collect()
}

/// Dense circulant matrix with first row `γ`.
pub fn circulant_matrix(gamma: &[Complex64]) -> ComplexMatrix {
    let n = gamma.len();
    ComplexMatrix::from_fn(n, n, |i, j| gamma[(j + n - i) % n])
}

fn spec_from(gamma: Vec<Complex64>, q: Vec<Complex64>, tol: f64) -> CirculantSpec {
    let n = q.len();
    let self_adjoint = q.iter().all(|z| z.im.abs() <= tol);
    let real = (0..n).all(|k| (q[k].conj() - q[(n - k) % n]).norm() <= tol);
    CirculantSpec { n, gamma, q, self_adjoint, real }
}

/// Builds the circulant unitary `F diag(q) F*` from unimodular eigenvalues.
pub fn circulant_from_eigenphases(q: &[Complex64]) -> Result<(CirculantSpec, UnitaryCandidate)> {
    if q.is_empty() {
        return Err(Error::InvalidInput("empty eigenphase vector".into()));
    }
    if let Some((index, z)) = q.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > 1e-10) {
        return Err(Error::NotUnimodular { index, modulus: z.norm() });
    }
    let gamma = gamma_from_q(q);
    let u = UnitaryCandidate::new(circulant_matrix(&gamma), 1e-10)?;
    Ok((spec_from(gamma, q.to_vec(), 1e-10), u))
}

/// Reads off `γ` and `q` when `m` is circulant within `tol`.
pub fn circulant_spec(m: &ComplexMatrix, tol: f64) -> Option<CirculantSpec> {
    let n = m.nrows();
    let gamma: Vec<Complex64> = (0..n).map(|j| m[(0, j)]).collect();
    for i in 1..n {
        for j in 0..n {
            if (m[(i, j)] - gamma[(j + n - i) % n]).norm() > tol {
                return None;
            }
        }
    }
    let q = q_from_gamma(&gamma);
    Some(spec_from(gamma, q, tol.max(1e-10)))
}
