//! First-order certification. `U` is a critical point of the 1-norm on
//! `U(N)` exactly when `X = S*U` is self-adjoint, where `S = sgn(U)`.
//! Criticality for every function `Σ ψ(|U_ij|²)` at once is the
//! semi-balanced condition, and balanced matrices are semi-balanced.

use crate::constructors::{circulant_spec, CirculantSpec};
use crate::error::Result;
use crate::matrix::{
    color_decomposition, frobenius, hermitian_part, hermitian_residual, sign_matrix, ComplexMatrix,
    UnitaryCandidate,
};
use crate::tolerance::Tolerances;
use num_complex::Complex64;
use serde::Serialize;

/// Outcome of the first-order test.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalityReport {
    /// `‖X − X*‖_F`.
    pub residual: f64,
    pub x: ComplexMatrix,
    pub is_critical: bool,
    /// Smallest eigenvalue of `(X + X*)/2`.
    pub psd_min_eig: f64,
    /// `psd_min_eig < −tol_crit`: the necessary condition `X ⪰ 0` for a
    /// local maximum fails.
    pub psd_violated: bool,
}

/// Outcome of the semi-balanced and balanced tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub semi_balanced: bool,
    pub balanced: bool,
    pub worst_residual: f64,
    /// Color indices `(r, s)` of the first failing product, ordered by modulus.
    pub offending_pair: Option<(usize, usize)>,
}

/// `ρ_m = Σ_r ε̄_r γ_{m+r}` where `ε = sgn(γ)`: the first row of `S*U` for
/// circulant `U`.
pub fn circulant_gram_row(spec: &CirculantSpec, tol_zero: f64) -> Result<Vec<Complex64>> {
    let n = spec.n;
    let mut eps = Vec::with_capacity(n);
    for (j, g) in spec.gamma.iter().enumerate() {
        if !(g.norm() > tol_zero) {
            return Err(crate::Error::ZeroEntry(0, j));
        }
        eps.push(g / g.norm());
    }
    Ok((0..n)
        .map(|m| (0..n).map(|r| eps[r].conj() * spec.gamma[(m + r) % n]).sum())
        .collect())
}

/// Eigenvalues `λ_k = Σ_r w^{kr} ρ_r` of `S*U` for circulant `U`.
pub fn circulant_gram_eigenvalues(spec: &CirculantSpec, tol_zero: f64) -> Result<Vec<Complex64>> {
    Ok(crate::constructors::q_from_gamma(&circulant_gram_row(spec, tol_zero)?))
}

/// `X = S*U` by dense multiplication.
pub fn gram_sign_dense(u: &ComplexMatrix, tol_zero: f64) -> Result<ComplexMatrix> {
    let s = sign_matrix(u, tol_zero)?.into_matrix();
    Ok(s.adjoint() * u)
}

/// `X = S*U`. Circulant inputs take the `O(N²)` first-row route, since
/// `X` is then circulant with first row `ρ`.
pub fn gram_sign(u: &UnitaryCandidate, tol: &Tolerances) -> Result<ComplexMatrix> {
    let m = u.matrix();
    match circulant_spec(m, 0.0) {
        Some(spec) => {
            let rho = circulant_gram_row(&spec, tol.zero)?;
            Ok(crate::constructors::circulant_matrix(&rho))
        }
        None => gram_sign_dense(m, tol.zero),
    }
}

/// Smallest eigenvalue of a hermitian matrix.
pub(crate) fn min_eigenvalue(h: &ComplexMatrix) -> f64 {
    h.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// First-order report for the 1-norm.
pub fn critical_report(u: &UnitaryCandidate, tol: &Tolerances) -> Result<CriticalityReport> {
    let x = gram_sign(u, tol)?;
    let residual = hermitian_residual(&x);
    let psd_min_eig = min_eigenvalue(&hermitian_part(&x));
    Ok(CriticalityReport {
        residual,
        is_critical: residual <= tol.crit,
        psd_min_eig,
        psd_violated: psd_min_eig < -tol.crit,
        x,
    })
}

fn self_adjoint_defect(m: &ComplexMatrix) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// Color supports `U_r`, ordered by increasing modulus.
fn supports(u: &UnitaryCandidate, tol_cluster: f64) -> Result<Vec<ComplexMatrix>> {
    Ok(color_decomposition(u.matrix(), tol_cluster)?.colors.into_iter().map(|c| c.support).collect())
}

/// Checks that `U_r U*` and `U* U_r` are self-adjoint for every color `r`.
///
/// The `balanced` field of the report is always false here since the
/// cross-color products are not examined; use [`is_balanced`] for those.
pub fn is_semi_balanced(u: &UnitaryCandidate, tol_check: f64, tol_cluster: f64) -> Result<BalanceReport> {
    let m = u.matrix();
    let us = m.adjoint();
    let mut worst: f64 = 0.0;
    let mut offending = None;
    for (r, ur) in supports(u, tol_cluster)?.iter().enumerate() {
        let d = self_adjoint_defect(&(ur * &us)).max(self_adjoint_defect(&(&us * ur)));
        if d > tol_check && offending.is_none() {
            offending = Some((r, r));
        }
        worst = worst.max(d);
    }
    let ok = offending.is_none();
    Ok(BalanceReport { semi_balanced: ok, balanced: false, worst_residual: worst, offending_pair: offending })
}

/// Checks that `U_r U_s*` and `U_r* U_s` are self-adjoint for every pair of
/// colors, and separately the semi-balanced condition.
pub fn is_balanced(u: &UnitaryCandidate, tol_check: f64, tol_cluster: f64) -> Result<BalanceReport> {
    let semi = is_semi_balanced(u, tol_check, tol_cluster)?;
    let sup = supports(u, tol_cluster)?;
    let mut worst = semi.worst_residual;
    let mut offending = None;
    for r in 0..sup.len() {
        for s in r..sup.len() {
            let d = self_adjoint_defect(&(&sup[r] * sup[s].adjoint()))
                .max(self_adjoint_defect(&(sup[r].adjoint() * &sup[s])));
            if d > tol_check && offending.is_none() {
                offending = Some((r, s));
            }
            worst = worst.max(d);
        }
    }
    let balanced = offending.is_none() && semi.semi_balanced;
    Ok(BalanceReport {
        semi_balanced: semi.semi_balanced,
        balanced,
        worst_residual: worst,
        offending_pair: offending.or(semi.offending_pair),
    })
}
