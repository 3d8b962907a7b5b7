//! Seeded random streams and random matrix samplers.
//!
//! Every unit of parallel work draws from its own stream derived from
//! `(seed, index)`, so results do not depend on the number of threads.

use crate::matrix::{c64, ComplexMatrix, UnitaryCandidate};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent generator for work unit `index` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard complex normal: real and imaginary parts `N(0, 1/2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    c64(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex normal entries.
pub fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary from the QR factorization of a Ginibre matrix,
/// with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryCandidate {
    let g = ginibre(n, rng);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..n {
        let d = r[(k, k)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..n {
            q[(i, k)] *= ph;
        }
    }
    UnitaryCandidate::new(q, 1e-10).expect("QR factor of a Gaussian matrix is unitary")
}

/// Haar-distributed real orthogonal matrix.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryCandidate {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let (mut q, r) = g.qr().unpack();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            for i in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    UnitaryCandidate::new(crate::matrix::from_real(&q), 1e-10)
        .expect("QR factor of a Gaussian matrix is orthogonal")
}

/// `G + G*` for a Ginibre `G`.
pub fn gaussian_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, rng);
    &g + g.adjoint()
}

/// `(G − G*)/2` for a Ginibre `G`.
pub fn gaussian_skew<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, rng);
    (&g - g.adjoint()).scale(0.5)
}
