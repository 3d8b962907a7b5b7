//! Complex matrix kernel: entrywise sign and color structure, norms,
//! unitarity certification, the geodesic exponential and dephasing.

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense square complex matrix.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Shorthand for a complex number.
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Embeds a real matrix.
pub fn from_real(m: &DMatrix<f64>) -> ComplexMatrix {
    m.map(|v| c64(v, 0.0))
}

/// `n×n` all-ones matrix.
pub fn all_ones(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_element(n, n, c64(1.0, 0.0))
}

/// `n×n` identity.
pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Checks the `ComplexMatrix` invariants: square with finite entries.
pub fn validate(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite(i, j));
            }
        }
    }
    Ok(())
}

/// Frobenius norm.
pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖M − M*‖_F`.
pub fn hermitian_residual(m: &ComplexMatrix) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// `‖M + M*‖_F`.
pub fn skew_residual(m: &ComplexMatrix) -> f64 {
    frobenius(&(m + m.adjoint()))
}

/// `(M + M*)/2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `‖UU* − I‖_F`.
pub fn unitarity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    frobenius(&(m * m.adjoint() - identity(n)))
}

/// Largest entrywise modulus of `A − B`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest imaginary part in absolute value.
pub fn max_imag(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// Smallest entry modulus.
pub fn min_modulus(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// A square matrix with a certified unitarity residual.
///
/// The residual is always recomputed from the entries.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryCandidate {
    matrix: ComplexMatrix,
    unitarity_residual: f64,
}

impl UnitaryCandidate {
    /// Certifies `m` as unitary with `‖mm* − I‖_F ≤ tol_unitary`.
    pub fn new(m: ComplexMatrix, tol_unitary: f64) -> Result<Self> {
        validate(&m)?;
        let r = unitarity_residual(&m);
        if r > tol_unitary {
            return Err(Error::NotUnitary(r));
        }
        Ok(UnitaryCandidate { matrix: m, unitarity_residual: r })
    }

    /// Certifies with the default unitarity tolerance.
    pub fn certify(m: ComplexMatrix) -> Result<Self> {
        Self::new(m, Tolerances::default().unitary)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.unitarity_residual
    }

    /// Side length `N`.
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Entrywise phase matrix `S_ij = U_ij/|U_ij|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMatrix(ComplexMatrix);

impl SignMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

/// Computes `sgn(M)`, failing on entries with modulus `≤ tol_zero`.
pub fn sign_matrix(m: &ComplexMatrix, tol_zero: f64) -> Result<SignMatrix> {
    let n = m.nrows();
    let mut s = ComplexMatrix::zeros(n, m.ncols());
    for j in 0..m.ncols() {
        for i in 0..n {
            let z = m[(i, j)];
            let r = z.norm();
            if !(r > tol_zero) {
                return Err(Error::ZeroEntry(i, j));
            }
            s[(i, j)] = z / r;
        }
    }
    Ok(SignMatrix(s))
}

/// One modulus class of a matrix: the positions where `|M_ij| ≈ r`,
/// carrying the phases of those entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Color {
    pub r: f64,
    pub support: ComplexMatrix,
}

/// Decomposition `M = Σ r·support_r` with disjoint supports.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorDecomposition {
    pub colors: Vec<Color>,
    pub tol_cluster: f64,
}

impl ColorDecomposition {
    /// Rebuilds `Σ r·support_r`.
    pub fn reconstruct(&self) -> Option<ComplexMatrix> {
        let first = self.colors.first()?;
        let n = first.support.nrows();
        let mut m = ComplexMatrix::zeros(n, n);
        for c in &self.colors {
            m += c.support.scale(c.r);
        }
        Some(m)
    }
}

/// Groups the entries of `m` by modulus using single-linkage clustering on
/// the sorted moduli. Exactly zero entries belong to no color.
pub fn color_decomposition(m: &ComplexMatrix, tol_cluster: f64) -> Result<ColorDecomposition> {
    validate(m)?;
    if !(tol_cluster >= 0.0) {
        return Err(Error::InvalidInput("cluster tolerance must be nonnegative".into()));
    }
    let n = m.nrows();
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let r = m[(i, j)].norm();
            if r == 0.0 {
                continue;
            }
            if r <= tol_cluster {
                return Err(Error::AmbiguousClustering { lo: 0.0, hi: r });
            }
            entries.push((r, i, j));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut groups: Vec<Vec<(f64, usize, usize)>> = Vec::new();
    for e in entries {
        match groups.last_mut() {
            Some(g) if e.0 - g.last().unwrap().0 <= tol_cluster => g.push(e),
            _ => groups.push(vec![e]),
        }
    }

    let mut colors = Vec::with_capacity(groups.len());
    for g in &groups {
        let mean = g.iter().map(|e| e.0).sum::<f64>() / g.len() as f64;
        let spread = g.iter().map(|e| (e.0 - mean).abs()).fold(0.0, f64::max);
        if spread > tol_cluster {
            return Err(Error::AmbiguousClustering { lo: g[0].0, hi: g[g.len() - 1].0 });
        }
        let mut support = ComplexMatrix::zeros(n, n);
        for &(r, i, j) in g {
            support[(i, j)] = m[(i, j)] / r;
        }
        colors.push(Color { r: mean, support });
    }
    for w in colors.windows(2) {
        if w[1].r - w[0].r < 2.0 * tol_cluster {
            return Err(Error::AmbiguousClustering { lo: w[0].r, hi: w[1].r });
        }
    }
    Ok(ColorDecomposition { colors, tol_cluster })
}

/// Computes `e^{tA}` for anti-hermitian `A` through the eigendecomposition
/// of the hermitian matrix `iA`, so the result is unitary to rounding.
pub fn expm_skew(a: &ComplexMatrix, t: f64) -> Result<UnitaryCandidate> {
    validate(a)?;
    let r = skew_residual(a);
    if r > 1e-10 {
        return Err(Error::NotSkew(r));
    }
    let n = a.nrows();
    // iA = V diag(μ) V*, so e^{tA} = e^{-it(iA)} = V diag(e^{-itμ}) V*.
    let h = hermitian_part(&a.map(|z| z * Complex64::i()));
    let eig = h.symmetric_eigen();
    let v = eig.eigenvectors;
    let mut vd = v.clone();
    for k in 0..n {
        let phase = Complex64::from_polar(1.0, -t * eig.eigenvalues[k]);
        for i in 0..n {
            vd[(i, k)] *= phase;
        }
    }
    let e = &vd * v.adjoint();
    let res = unitarity_residual(&e);
    Ok(UnitaryCandidate { matrix: e, unitarity_residual: res })
}

/// `Σ_ij |M_ij|`.
pub fn one_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

/// True iff every entry is unimodular within `tol` and `‖HH* − N·I‖_F ≤ N·tol`.
pub fn is_hadamard(h: &ComplexMatrix, tol: f64) -> bool {
    if validate(h).is_err() {
        return false;
    }
    let n = h.nrows();
    if h.iter().any(|z| (z.norm() - 1.0).abs() > tol) {
        return false;
    }
    let g = h * h.adjoint() - identity(n).scale(n as f64);
    frobenius(&g) <= n as f64 * tol
}

/// Multiplies rows and columns by phases so the first row and column become
/// positive real.
pub fn dephase(h: &ComplexMatrix, tol_zero: f64) -> Result<ComplexMatrix> {
    validate(h)?;
    let s = sign_matrix(h, tol_zero)?.into_matrix();
    let n = h.nrows();
    let mut d = h.clone();
    for i in 0..n {
        let p = s[(i, 0)].conj();
        for j in 0..n {
            d[(i, j)] *= p;
        }
    }
    for j in 0..n {
        let p = d[(0, j)].conj() / d[(0, j)].norm();
        for i in 0..n {
            d[(i, j)] *= p;
        }
    }
    // Clear rounding residue on the normalized border.
    for k in 0..n {
        d[(k, 0)] = c64(d[(k, 0)].norm(), 0.0);
        d[(0, k)] = c64(d[(0, k)].norm(), 0.0);
    }
    Ok(d)
}
