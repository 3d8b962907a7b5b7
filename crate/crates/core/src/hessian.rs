//! Second-order analysis of `F(U) = Σ ψ(|U_ij|²)` along geodesics
//! `t ↦ U e^{tA}`, with `ψ(x) = x^{p/2}`; the 1-norm is `p = 1`.
//!
//! For hermitian `B` and `A = iB`, the second derivative of the 1-norm at a
//! critical point is `−Φ(U,B)`, so a negative `Φ` is a direction along
//! which the 1-norm increases to second order.

use crate::error::{Error, Result};
use crate::matrix::{
    c64, expm_skew, frobenius, hermitian_part, hermitian_residual, min_modulus, one_norm,
    sign_matrix, skew_residual, unitarity_residual, ComplexMatrix, UnitaryCandidate,
};
use crate::rng::{gaussian_skew, haar_unitary, stream_rng};
use crate::tolerance::Tolerances;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// `Φ(U,B)` with its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiReport {
    pub value: f64,
    /// `Tr(X_h B²)` with `X_h` the hermitian part of `S*U`.
    pub trace_term: f64,
    /// `Σ Re[(UB)_ij S̄_ij]² / |U_ij|`.
    pub sum_term: f64,
    /// `‖B‖_F`.
    pub direction_norm: f64,
    /// Set when `U` is not critical; the value is then only a diagnostic.
    pub not_critical_warning: bool,
}

/// Data of `U` reused across many evaluations of `Φ(U, ·)`.
#[derive(Debug, Clone)]
pub struct PhiContext {
    u: ComplexMatrix,
    s: ComplexMatrix,
    xh: ComplexMatrix,
    inv_mod: DMatrix<f64>,
    critical: bool,
}

impl PhiContext {
    pub fn new(u: &UnitaryCandidate, tol: &Tolerances) -> Result<Self> {
        let m = u.matrix();
        let s = sign_matrix(m, tol.zero)?.into_matrix();
        let x = s.adjoint() * m;
        let critical = hermitian_residual(&x) <= tol.crit;
        Ok(PhiContext {
            u: m.clone(),
            inv_mod: m.map(|z| 1.0 / z.norm()),
            xh: hermitian_part(&x),
            s,
            critical,
        })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn sign(&self) -> &ComplexMatrix {
        &self.s
    }

    pub fn is_critical(&self) -> bool {
        self.critical
    }

    /// Evaluates `Φ(U,B)` for hermitian `B`.
    pub fn eval(&self, b: &ComplexMatrix) -> Result<PhiReport> {
        let r = hermitian_residual(b);
        if r > 1e-10 {
            return Err(Error::NotHermitian(r));
        }
        Ok(self.eval_unchecked(b))
    }

    pub(crate) fn eval_unchecked(&self, b: &ComplexMatrix) -> PhiReport {
        let n = self.n();
        let trace_term = (&self.xh * (b * b)).trace().re;
        let ub = &self.u * b;
        let mut sum_term = 0.0;
        for j in 0..n {
            for i in 0..n {
                let re = (ub[(i, j)] * self.s[(i, j)].conj()).re;
                sum_term += re * re * self.inv_mod[(i, j)];
            }
        }
        PhiReport {
            value: trace_term - sum_term,
            trace_term,
            sum_term,
            direction_norm: frobenius(b),
            not_critical_warning: !self.critical,
        }
    }
}

/// `Φ(U,B) = Tr(X_h B²) − Σ Re[(UB)_ij S̄_ij]² / |U_ij|`.
pub fn phi(u: &UnitaryCandidate, b: &ComplexMatrix, tol: &Tolerances) -> Result<PhiReport> {
    if b.shape() != u.matrix().shape() {
        return Err(Error::InvalidInput("direction has the wrong size".into()));
    }
    PhiContext::new(u, tol)?.eval(b)
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) || p == 2.0 {
        return Err(Error::InvalidInput(format!("exponent p = {p} must lie in [1,2) ∪ (2,∞)")));
    }
    Ok(())
}

fn check_direction(u: &UnitaryCandidate, a: &ComplexMatrix) -> Result<()> {
    if a.shape() != u.matrix().shape() {
        return Err(Error::InvalidInput("direction has the wrong size".into()));
    }
    let r = skew_residual(a);
    if r > 1e-10 {
        return Err(Error::NotSkew(r));
    }
    Ok(())
}

/// `f′(0) = 2 Σ ψ′(|U_ij|²) Re[(UA)_ij Ū_ij]` for `f(t) = Σ|(Ue^{tA})_ij|^p`.
pub fn derivative_first(u: &UnitaryCandidate, a: &ComplexMatrix, p: f64, tol: &Tolerances) -> Result<f64> {
    check_exponent(p)?;
    check_direction(u, a)?;
    let m = u.matrix();
    sign_matrix(m, tol.zero)?;
    let ua = m * a;
    let h = p / 2.0;
    Ok(m.iter()
        .zip(ua.iter())
        .map(|(z, w)| {
            let x = z.norm_sqr();
            2.0 * h * x.powf(h - 1.0) * (w * z.conj()).re
        })
        .sum())
}

/// `f″(0) = 4Σψ″Re[(UA)Ū]² + 2Σψ′Re[(UA²)Ū] + 2Σψ′|(UA)|²`, entrywise,
/// with `ψ` evaluated at `|U_ij|²`.
pub fn derivative_second(u: &UnitaryCandidate, a: &ComplexMatrix, p: f64, tol: &Tolerances) -> Result<f64> {
    check_exponent(p)?;
    check_direction(u, a)?;
    let m = u.matrix();
    sign_matrix(m, tol.zero)?;
    let ua = m * a;
    let ua2 = &ua * a;
    let h = p / 2.0;
    let mut total = 0.0;
    for k in 0..m.len() {
        let (z, w, w2) = (m[k], ua[k], ua2[k]);
        let x = z.norm_sqr();
        let d1 = h * x.powf(h - 1.0);
        let d2 = h * (h - 1.0) * x.powf(h - 2.0);
        let r = (w * z.conj()).re;
        total += 4.0 * d2 * r * r + 2.0 * d1 * (w2 * z.conj()).re + 2.0 * d1 * w.norm_sqr();
    }
    Ok(total)
}

/// The 1-norm specialization `f″(0) = Re Tr(S*UA²) + Σ Im[(UA)_ij S̄_ij]² / |U_ij|`.
pub fn derivative_second_one_norm(u: &UnitaryCandidate, a: &ComplexMatrix, tol: &Tolerances) -> Result<f64> {
    check_direction(u, a)?;
    let m = u.matrix();
    let s = sign_matrix(m, tol.zero)?.into_matrix();
    let ua = m * a;
    let first = (s.adjoint() * &ua * a).trace().re;
    let second: f64 = ua
        .iter()
        .zip(s.iter())
        .zip(m.iter())
        .map(|((w, s), z)| (w * s.conj()).im.powi(2) / z.norm())
        .sum();
    Ok(first + second)
}

/// Euclidean gradient of the 1-norm and its tangent pull-back.
#[derive(Debug, Clone, PartialEq)]
pub struct OneNormGradient {
    /// `G = ½(S − U S* U)`.
    pub g: ComplexMatrix,
    /// `A = ½(U*S − S*U)`, the skew part of `U*G`; the ascent direction
    /// in the Lie algebra, with `f′(0) = ‖A‖²_F` along it.
    pub tangent: ComplexMatrix,
}

pub fn gradient_one_norm(u: &UnitaryCandidate, tol: &Tolerances) -> Result<OneNormGradient> {
    let m = u.matrix();
    let s = sign_matrix(m, tol.zero)?.into_matrix();
    let g = (&s - m * s.adjoint() * m).scale(0.5);
    let ug = m.adjoint() * &g;
    let tangent = (&ug - ug.adjoint()).scale(0.5);
    Ok(OneNormGradient { g, tangent })
}

/// One element of the orthonormal basis of hermitian matrices, stored by
/// its nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl BasisElement {
    pub fn to_dense(&self, n: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

/// Basis `{e_ii} ∪ {(e_ij+e_ji)/√2} ∪ {i(e_ij−e_ji)/√2}` (`i < j`), in this
/// order, orthonormal for `⟨A,B⟩ = Tr(AB)`.
pub fn hermitian_basis(n: usize) -> Vec<BasisElement> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out: Vec<BasisElement> =
        (0..n).map(|i| BasisElement { entries: vec![(i, i, c64(1.0, 0.0))] }).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(BasisElement { entries: vec![(i, j, c64(r, 0.0)), (j, i, c64(r, 0.0))] });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(BasisElement { entries: vec![(i, j, c64(0.0, r)), (j, i, c64(0.0, -r))] });
        }
    }
    out
}

/// Expands real coordinates in [`hermitian_basis`] into a matrix.
pub fn combine_basis(basis: &[BasisElement], coeffs: &[f64], n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for (e, &w) in basis.iter().zip(coeffs) {
        for &(i, j, v) in &e.entries {
            m[(i, j)] += v * w;
        }
    }
    m
}

/// Symmetric bilinear form `Q` with `Q(B,B) = Φ(U,B)`:
/// `Q(B,C) = Re Tr(X_h BC) − Σ Re[(UB)S̄]_ij Re[(UC)S̄]_ij / |U_ij|`.
pub fn hessian_form(ctx: &PhiContext, b: &ComplexMatrix, c: &ComplexMatrix) -> f64 {
    let n = ctx.n();
    let trace = (&ctx.xh * b * c).trace().re;
    let ub = &ctx.u * b;
    let uc = &ctx.u * c;
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            let s = ctx.s[(i, j)].conj();
            sum += (ub[(i, j)] * s).re * (uc[(i, j)] * s).re * ctx.inv_mod[(i, j)];
        }
    }
    trace - sum
}

/// Matrix of [`hessian_form`] on [`hermitian_basis`] (`N² × N²`, real symmetric).
pub fn hessian_matrix(u: &UnitaryCandidate, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let ctx = PhiContext::new(u, tol)?;
    let n = ctx.n();
    let basis = hermitian_basis(n);
    let dim = basis.len();

    // Linear images L_k(i,j) = Re[(U E_k)_ij S̄_ij] / √|U_ij|, one column per k.
    let columns: Vec<Vec<f64>> = basis
        .par_iter()
        .map(|e| {
            let mut col = vec![0.0; n * n];
            for &(a, b, v) in &e.entries {
                for i in 0..n {
                    let w = ctx.u[(i, a)] * v;
                    col[b * n + i] += (w * ctx.s[(i, b)].conj()).re;
                }
            }
            for j in 0..n {
                for i in 0..n {
                    col[j * n + i] *= ctx.inv_mod[(i, j)].sqrt();
                }
            }
            col
        })
        .collect();
    let l = DMatrix::from_fn(n * n, dim, |r, k| columns[k][r]);
    let gram = l.tr_mul(&l);

    // Trace part Re Tr(X_h E_k E_l) from the sparse entries.
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|k| {
            (0..dim)
                .map(|m| {
                    let mut acc = c64(0.0, 0.0);
                    for &(a, b, v) in &basis[k].entries {
                        for &(c, d, w) in &basis[m].entries {
                            if b == c {
                                acc += ctx.xh[(d, a)] * v * w;
                            }
                        }
                    }
                    acc.re
                })
                .collect()
        })
        .collect();
    let h = DMatrix::from_fn(dim, dim, |k, m| rows[k][m] - gram[(k, m)]);
    Ok((&h + h.transpose()).scale(0.5))
}

/// Spectrum of the Hessian form on hermitian directions.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianSpectrum {
    /// `N²`, the real dimension of the hermitian matrices.
    pub dim: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit-norm hermitian direction attaining `eigenvalues[0]`.
    pub min_direction: ComplexMatrix,
}

impl HessianSpectrum {
    /// Number of eigenvalues with `|λ| ≤ threshold`.
    pub fn kernel_dim(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() <= threshold).count()
    }
}

pub fn hessian_spectrum(u: &UnitaryCandidate, tol: &Tolerances) -> Result<HessianSpectrum> {
    let h = hessian_matrix(u, tol)?;
    let n = u.n();
    let dim = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let v: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let min_direction = combine_basis(&hermitian_basis(n), &v, n);
    Ok(HessianSpectrum { dim, eigenvalues, min_direction })
}

/// Returns the most negative Hessian eigenpair `(λ, B)` with `‖B‖_F = 1`
/// when `λ < −tol.neg`, after re-checking `Φ(U,B) = λ`.
pub fn descent_direction(u: &UnitaryCandidate, tol: &Tolerances) -> Result<Option<(f64, ComplexMatrix)>> {
    let rep = crate::criticality::critical_report(u, tol)?;
    if !rep.is_critical {
        return Err(Error::NotCritical(rep.residual));
    }
    let spec = hessian_spectrum(u, tol)?;
    let lambda = spec.eigenvalues[0];
    if lambda >= -tol.neg {
        return Ok(None);
    }
    let b = spec.min_direction;
    let check = phi(u, &b, tol)?.value;
    if (check - lambda).abs() > 1e-8 * lambda.abs().max(1.0) {
        return Err(Error::Numerical(format!("Φ(U,B) = {check} disagrees with eigenvalue {lambda}")));
    }
    Ok(Some((lambda, b)))
}

/// Symmetric direction with zero diagonal and zero row sums, supported on
/// the leading 4×4 block `[[0,x,y,z],[x,0,z,y],[y,z,0,x],[z,y,x,0]]` with
/// `z = −x − y`. At `kn(N)` it gives `Φ = (2 − N/2)·Tr(B²)`.
pub fn kn_block_direction(n: usize, x: f64, y: f64) -> Result<ComplexMatrix> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("block direction needs N ≥ 4, got {n}")));
    }
    let z = -x - y;
    let block = [[0.0, x, y, z], [x, 0.0, z, y], [y, z, 0.0, x], [z, y, x, 0.0]];
    let mut b = ComplexMatrix::zeros(n, n);
    for (i, row) in block.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            b[(i, j)] = c64(v, 0.0);
        }
    }
    Ok(b)
}

/// Settings for [`ascend`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AscentOptions {
    pub max_iters: usize,
    /// Stop once `‖A‖_F` falls to this value.
    pub tol_grad: f64,
    /// Seed and stream of the generator used for perturbations.
    pub seed: u64,
    pub stream: u64,
    /// Sufficient-increase constant of the Armijo rule.
    pub armijo: f64,
    /// Step length below which the line search gives up.
    pub min_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions { max_iters: 10_000, tol_grad: 1e-10, seed: 0, stream: 0, armijo: 1e-4, min_step: 1e-14 }
    }
}

/// Record of one ascent run.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentTrace {
    /// Accepted steps.
    pub iterates: usize,
    pub final_matrix: UnitaryCandidate,
    /// `‖U‖₁` at the start and after every accepted step.
    pub one_norm_history: Vec<f64>,
    pub step_sizes: Vec<f64>,
    /// `max |U_ij| − 1/√N| ≤ 1e-6` at the end.
    pub converged_to_chm: bool,
    /// `‖A‖_F` at the last iterate.
    pub final_grad_norm: f64,
    /// Indices into `one_norm_history` reached right after a perturbation
    /// away from near-zero entries. Monotonicity holds between them.
    pub perturbed_at: Vec<usize>,
    /// The line search failed before the gradient test was met.
    pub stalled: bool,
}

/// Largest deviation of the entry moduli from `1/√N`.
pub fn chm_deviation(m: &ComplexMatrix) -> f64 {
    let r = 1.0 / (m.nrows() as f64).sqrt();
    m.iter().map(|z| (z.norm() - r).abs()).fold(0.0, f64::max)
}

/// Nearest unitary (polar factor) through the SVD.
fn reunitarize(m: &ComplexMatrix) -> ComplexMatrix {
    let svd = m.clone().svd(true, true);
    svd.u.expect("requested") * svd.v_t.expect("requested")
}

/// Riemannian gradient ascent of the 1-norm: `U ← U e^{tA}` with
/// `A = ½(U*S − S*U)` and backtracking from `t = 1` by halving until
/// `‖U e^{tA}‖₁ ≥ ‖U‖₁ + c·t·‖A‖²`.
pub fn ascend(u0: &UnitaryCandidate, opts: &AscentOptions, tol: &Tolerances) -> AscentTrace {
    let mut rng = stream_rng(opts.seed, opts.stream);
    let mut u = u0.matrix().clone();
    let mut f = one_norm(&u);
    let mut history = vec![f];
    let mut steps = Vec::new();
    let mut perturbed_at = Vec::new();
    let mut grad_norm = f64::INFINITY;
    let mut stalled = false;
    let n = u.nrows();

    for _ in 0..opts.max_iters {
        if min_modulus(&u) < 10.0 * tol.zero {
            let a = gaussian_skew(n, &mut rng);
            let a = a.scale(1e-6 / frobenius(&a).max(f64::MIN_POSITIVE));
            u = &u * expm_skew(&a, 1.0).expect("skew by construction").into_matrix();
            f = one_norm(&u);
            history.push(f);
            perturbed_at.push(history.len() - 1);
            continue;
        }
        let s = u.map(|z| z / z.norm());
        let m = s.adjoint() * &u;
        let a = (m.adjoint() - &m).scale(0.5);
        let g2 = a.iter().map(|z| z.norm_sqr()).sum::<f64>();
        grad_norm = g2.sqrt();
        if grad_norm <= opts.tol_grad {
            break;
        }
        let eig = hermitian_part(&a.map(|z| z * Complex64::i())).symmetric_eigen();
        let mut t = 1.0;
        let accepted = loop {
            let mut vd = eig.eigenvectors.clone();
            for k in 0..n {
                let ph = Complex64::from_polar(1.0, -t * eig.eigenvalues[k]);
                vd.column_mut(k).apply(|z| *z *= ph);
            }
            let v = &u * (vd * eig.eigenvectors.adjoint());
            let fv = one_norm(&v);
            if fv >= f + opts.armijo * t * g2 {
                break Some((v, fv));
            }
            t *= 0.5;
            if t < opts.min_step {
                break None;
            }
        };
        match accepted {
            Some((v, fv)) => {
                // Products of exponentials drift off U(N) slowly; project back
                // only when the drift becomes visible.
                if unitarity_residual(&v) > 1e-12 {
                    u = reunitarize(&v);
                    f = one_norm(&u);
                } else {
                    u = v;
                    f = fv;
                }
                history.push(f);
                steps.push(t);
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    let converged_to_chm = chm_deviation(&u) <= 1e-6;
    let final_matrix = UnitaryCandidate::new(u.clone(), tol.unitary.max(1e-9))
        .or_else(|_| UnitaryCandidate::new(reunitarize(&u), tol.unitary.max(1e-9)))
        .expect("ascent iterates stay unitary");
    AscentTrace {
        iterates: steps.len(),
        final_matrix,
        one_norm_history: history,
        step_sizes: steps,
        converged_to_chm,
        final_grad_norm: grad_norm,
        perturbed_at,
        stalled,
    }
}

/// Runs [`ascend`] from `starts` Haar-random unitaries. Start `k` draws its
/// initial matrix from stream `2k` and its perturbations from stream
/// `2k + 1` of `seed`, so the output does not depend on thread count.
pub fn multi_start(n: usize, starts: usize, seed: u64, opts: &AscentOptions, tol: &Tolerances) -> Vec<AscentTrace> {
    (0..starts)
        .into_par_iter()
        .map(|k| {
            let u0 = haar_unitary(n, &mut stream_rng(seed, 2 * k as u64));
            let o = AscentOptions { seed, stream: 2 * k as u64 + 1, ..*opts };
            ascend(&u0, &o, tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructors::{fourier, kn};
    use crate::matrix::{all_ones, identity, max_abs_diff};
    use crate::rng::{gaussian_hermitian, haar_orthogonal};
    use proptest::prelude::*;
    use rand::Rng;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn chm(n: usize) -> UnitaryCandidate {
        UnitaryCandidate::certify(fourier(n).scale(1.0 / (n as f64).sqrt())).unwrap()
    }

    fn real_diagonal(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |i, j| if i == j { c64(rng.gen_range(-2.0..2.0), 0.0) } else { c64(0.0, 0.0) })
    }

    fn f_of_t(u: &UnitaryCandidate, a: &ComplexMatrix, t: f64, p: f64) -> f64 {
        let v = u.matrix() * expm_skew(a, t).unwrap().into_matrix();
        v.iter().map(|z| z.norm().powf(p)).sum()
    }

    #[test]
    fn phi_of_kn_against_all_ones() {
        for n in 3..=12usize {
            let nf = n as f64;
            let want = nf * nf * (nf - 1.0) * (nf - 4.0) / (2.0 * (nf - 2.0));
            let r = phi(&kn(n), &all_ones(n), &tol()).unwrap();
            assert!((r.value - want).abs() <= 1e-8, "n = {n}: {} vs {want}", r.value);
            assert!((r.value - (r.trace_term - r.sum_term)).abs() <= 1e-10);
        }
        assert!((phi(&kn(3), &all_ones(3), &tol()).unwrap().value + 9.0).abs() < 1e-12);
    }

    #[test]
    fn kn_block_direction_gives_the_predicted_value() {
        for n in 5..=12 {
            let b = kn_block_direction(n, 0.3, -1.1).unwrap();
            assert!(b.row_sum().iter().all(|z| z.norm() < 1e-15));
            let tr = (&b * &b).trace().re;
            let v = phi(&kn(n), &b, &tol()).unwrap().value;
            assert!((v - (2.0 - n as f64 / 2.0) * tr).abs() < 1e-8, "N={n}");
        }
        assert!(kn_block_direction(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn phi_vanishes_on_real_diagonals() {
        let mut rng = stream_rng(5, 0);
        for u in [kn(3), kn(7), chm(4), haar_unitary(4, &mut rng)] {
            let d = real_diagonal(u.n(), &mut rng);
            assert!(phi(&u, &d, &tol()).unwrap().value.abs() <= 1e-12);
        }
    }

    #[test]
    fn phi_f2_offdiagonal_is_zero() {
        let b = ComplexMatrix::from_fn(2, 2, |i, j| c64(if i == j { 0.0 } else { 1.0 }, 0.0));
        assert!(phi(&chm(2), &b, &tol()).unwrap().value.abs() < 1e-14);
    }

    #[test]
    fn phi_rejects_bad_input() {
        let mut b = identity(3);
        b[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(phi(&kn(3), &b, &tol()), Err(Error::NotHermitian(_))));
        let id = UnitaryCandidate::certify(identity(3)).unwrap();
        assert!(matches!(phi(&id, &identity(3), &tol()), Err(Error::ZeroEntry(..))));
    }

    #[test]
    fn phi_flags_non_critical_input() {
        let u = haar_unitary(3, &mut stream_rng(1, 1));
        assert!(phi(&u, &identity(3), &tol()).unwrap().not_critical_warning);
        assert!(!phi(&kn(3), &identity(3), &tol()).unwrap().not_critical_warning);
    }

    #[test]
    fn hadamard_matrices_have_zero_first_derivative() {
        let mut rng = stream_rng(2, 0);
        for n in 2..6 {
            let a = gaussian_skew(n, &mut rng);
            assert!(derivative_first(&chm(n), &a, 1.0, &tol()).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_of_zero_direction() {
        let z = ComplexMatrix::zeros(3, 3);
        assert_eq!(derivative_second(&kn(3), &z, 1.0, &tol()).unwrap(), 0.0);
        assert_eq!(derivative_second(&kn(3), &z, 3.0, &tol()).unwrap(), 0.0);
    }

    #[test]
    fn exponent_validation() {
        let a = ComplexMatrix::zeros(3, 3);
        for p in [0.5, 2.0, f64::NAN] {
            assert!(derivative_first(&kn(3), &a, p, &tol()).is_err());
        }
        assert!(matches!(derivative_first(&kn(3), &identity(3), 1.0, &tol()), Err(Error::NotSkew(_))));
    }

    #[test]
    fn p1_second_derivative_reduces() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..20 {
            let u = haar_unitary(4, &mut rng);
            let a = gaussian_skew(4, &mut rng);
            let general = derivative_second(&u, &a, 1.0, &tol()).unwrap();
            let special = derivative_second_one_norm(&u, &a, &tol()).unwrap();
            assert!((general - special).abs() <= 1e-10 * general.abs().max(1.0));
        }
    }

    #[test]
    fn second_derivative_is_minus_phi_at_critical_points() {
        let mut rng = stream_rng(4, 0);
        for u in [kn(3), kn(5), chm(3)] {
            let b = gaussian_hermitian(u.n(), &mut rng);
            let a = b.map(|z| z * Complex64::i());
            let f2 = derivative_second(&u, &a, 1.0, &tol()).unwrap();
            let v = phi(&u, &b, &tol()).unwrap().value;
            assert!((f2 + v).abs() <= 1e-10 * v.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_examples() {
        for n in 2..6 {
            let g = gradient_one_norm(&chm(n), &tol()).unwrap();
            assert!(g.g.iter().all(|z| z.norm() <= 1e-12));
        }
        let g = gradient_one_norm(&kn(3), &tol()).unwrap();
        assert!(frobenius(&g.tangent) <= 1e-10);
        let mut rng = stream_rng(6, 0);
        for _ in 0..10 {
            let u = haar_unitary(4, &mut rng);
            let a = gaussian_skew(4, &mut rng);
            let g = gradient_one_norm(&u, &tol()).unwrap();
            let s = sign_matrix(u.matrix(), 1e-12).unwrap().into_matrix();
            let direct = (s.adjoint() * u.matrix() * &a).trace().re;
            let d1 = derivative_first(&u, &a, 1.0, &tol()).unwrap();
            assert!((d1 - direct).abs() <= 1e-10);
            // Riemannian gradient in the Lie algebra: f'(0) = Re Tr(A_grad* A).
            let via_grad = (g.tangent.adjoint() * &a).trace().re;
            assert!((d1 - via_grad).abs() <= 1e-10);
            let along = derivative_first(&u, &g.tangent, 1.0, &tol()).unwrap();
            assert!((along - frobenius(&g.tangent).powi(2)).abs() <= 1e-10);
        }
    }

    #[test]
    fn basis_is_orthonormal_and_hermitian() {
        let n = 4;
        let basis: Vec<ComplexMatrix> = hermitian_basis(n).iter().map(|e| e.to_dense(n)).collect();
        assert_eq!(basis.len(), n * n);
        for (k, a) in basis.iter().enumerate() {
            assert_eq!(hermitian_residual(a), 0.0);
            for (l, b) in basis.iter().enumerate() {
                let ip = (a * b).trace();
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((ip - c64(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn form_is_the_polarization_of_phi() {
        let mut rng = stream_rng(7, 0);
        for u in [kn(4), haar_unitary(3, &mut rng), chm(3)] {
            let ctx = PhiContext::new(&u, &tol()).unwrap();
            let n = u.n();
            let b = gaussian_hermitian(n, &mut rng);
            let c = gaussian_hermitian(n, &mut rng);
            let pol = 0.25 * (ctx.eval(&(&b + &c)).unwrap().value - ctx.eval(&(&b - &c)).unwrap().value);
            assert!((hessian_form(&ctx, &b, &c) - pol).abs() <= 1e-10 * pol.abs().max(1.0));

            let h = hessian_matrix(&u, &tol()).unwrap();
            let basis = hermitian_basis(n);
            let e: Vec<ComplexMatrix> = basis.iter().map(|e| e.to_dense(n)).collect();
            for k in 0..n * n {
                for l in 0..n * n {
                    let q = hessian_form(&ctx, &e[k], &e[l]);
                    let q = 0.5 * (q + hessian_form(&ctx, &e[l], &e[k]));
                    assert!((h[(k, l)] - q).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn kn3_has_negative_curvature() {
        let s = hessian_spectrum(&kn(3), &tol()).unwrap();
        assert_eq!(s.dim, 9);
        // J/3 has unit norm and Φ(U, J/3) = −9/9 = −1.
        assert!(s.eigenvalues[0] <= -1.0);
        assert!((s.eigenvalues[0] + 1.5).abs() < 1e-10);
        let v = phi(&kn(3), &s.min_direction, &tol()).unwrap();
        assert!((v.value - s.eigenvalues[0]).abs() <= 1e-8);
        assert!((v.direction_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kn5_has_negative_curvature() {
        let s = hessian_spectrum(&kn(5), &tol()).unwrap();
        assert!(s.eigenvalues[0] <= -0.5 + 1e-10);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hadamard_hessians_are_positive_semidefinite() {
        for n in 2..=6 {
            let s = hessian_spectrum(&chm(n), &tol()).unwrap();
            assert!(s.eigenvalues[0] >= -1e-8, "n = {n}");
            assert!(s.kernel_dim(1e-9) >= n);
        }
        let f4 = hessian_spectrum(&UnitaryCandidate::certify(fourier(4).scale(0.5)).unwrap(), &tol()).unwrap();
        assert!(f4.eigenvalues[0] >= -1e-8);
    }

    #[test]
    fn diagonal_subspace_is_in_the_kernel_at_critical_points() {
        for u in [kn(3), kn(6), chm(5)] {
            let n = u.n();
            let h = hessian_matrix(&u, &tol()).unwrap();
            for k in 0..n {
                for l in 0..n * n {
                    assert!(h[(k, l)].abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn spectrum_is_basis_independent() {
        let u = kn(4);
        let h = hessian_matrix(&u, &tol()).unwrap();
        let q = haar_orthogonal(16, &mut stream_rng(8, 0)).matrix().map(|z| z.re);
        let rotated = q.transpose() * &h * &q;
        let mut a: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut b: Vec<f64> = rotated.symmetric_eigen().eigenvalues.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn descent_direction_examples() {
        let (lam, b) = descent_direction(&kn(3), &tol()).unwrap().unwrap();
        assert!(lam <= -1.0);
        assert!((phi(&kn(3), &b, &tol()).unwrap().value - lam).abs() <= 1e-8);
        assert!(descent_direction(&chm(3), &tol()).unwrap().is_none());
        let u = haar_unitary(3, &mut stream_rng(9, 0));
        assert!(matches!(descent_direction(&u, &tol()), Err(Error::NotCritical(_))));
    }

    #[test]
    fn ascent_from_a_hadamard_matrix_does_nothing() {
        let tr = ascend(&chm(3), &AscentOptions::default(), &tol());
        assert_eq!(tr.iterates, 0);
        assert!(tr.converged_to_chm);
        assert!(max_abs_diff(tr.final_matrix.matrix(), chm(3).matrix()) == 0.0);
    }

    #[test]
    fn ascent_in_dimension_two_reaches_the_bound() {
        for k in 0..5 {
            let u0 = haar_unitary(2, &mut stream_rng(10, k));
            let tr = ascend(&u0, &AscentOptions::default(), &tol());
            assert!(tr.converged_to_chm);
            assert!((one_norm(tr.final_matrix.matrix()) - 2.0 * 2f64.sqrt()).abs() <= 1e-6);
            assert!(tr.one_norm_history.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn ascent_escapes_kn3() {
        let u = kn(3);
        let (_, b) = descent_direction(&u, &tol()).unwrap().unwrap();
        let a = b.map(|z| z * Complex64::i());
        let pushed = UnitaryCandidate::certify(u.matrix() * expm_skew(&a, 1e-3).unwrap().into_matrix()).unwrap();
        assert!(one_norm(pushed.matrix()) > 5.0);
        let tr = ascend(&pushed, &AscentOptions::default(), &tol());
        assert!(one_norm(tr.final_matrix.matrix()) > 5.0 + 1e-3);
    }

    #[test]
    fn multi_start_is_deterministic() {
        let opts = AscentOptions { max_iters: 50, ..Default::default() };
        let a = multi_start(3, 4, 42, &opts, &tol());
        let b = multi_start(3, 4, 42, &opts, &tol());
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn phi_is_invariant_under_diagonal_shifts(seed in 0u64..100_000, which in 0usize..4) {
            let u = [kn(3), kn(5), chm(4), kn(8)][which].clone();
            let mut rng = stream_rng(seed, 0);
            let b = gaussian_hermitian(u.n(), &mut rng);
            let d = real_diagonal(u.n(), &mut rng);
            let lhs = phi(&u, &(&b + &d), &tol()).unwrap().value;
            let rhs = phi(&u, &b, &tol()).unwrap().value;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }

        #[test]
        fn hadamard_saturation(seed in 0u64..100_000, n in 2usize..7) {
            let u = chm(n);
            let b = gaussian_hermitian(n, &mut stream_rng(seed, 0));
            prop_assert!(phi(&u, &b, &tol()).unwrap().value >= -1e-9);
            let ub = u.matrix() * &b;
            let strong = (&b * &b).trace().re - ub.iter().map(|z| z.norm_sqr()).sum::<f64>();
            prop_assert!(strong.abs() <= 1e-9 * frobenius(&b).powi(2).max(1.0));
        }

        #[test]
        fn derivatives_match_finite_differences(seed in 0u64..100_000, pi in 0usize..3) {
            let p = [1.0, 1.5, 3.0][pi];
            let mut rng = stream_rng(seed, 0);
            let u = loop {
                let u = haar_unitary(3, &mut rng);
                if min_modulus(u.matrix()) >= 0.05 { break u; }
            };
            let a = gaussian_skew(3, &mut rng);
            let h = 1e-6;
            let fd1 = (f_of_t(&u, &a, h, p) - f_of_t(&u, &a, -h, p)) / (2.0 * h);
            prop_assert!((derivative_first(&u, &a, p, &tol()).unwrap() - fd1).abs() <= 1e-5);
            let h = 1e-4;
            let fd2 = (f_of_t(&u, &a, h, p) - 2.0 * f_of_t(&u, &a, 0.0, p) + f_of_t(&u, &a, -h, p)) / (h * h);
            let d2 = derivative_second(&u, &a, p, &tol()).unwrap();
            prop_assert!((d2 - fd2).abs() <= 1e-4 * fd2.abs().max(1.0));
        }
    }
}
