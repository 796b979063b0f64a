//! Seeded random generators for states and operators.
//!
//! Used by the property suites; every caller supplies its own RNG so runs are
//! reproducible from a seed.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::tensor::{norm, ComplexMatrix};

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim).map(|_| complex_normal(rng)).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|z| *z /= n);
    v
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phase fix).
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = ginibre(rng, dim, dim).to_faer();
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        q[(i, j)] * phase
    })
}

/// Random density matrix of exactly the given rank, with eigenvalues bounded
/// away from zero (each at least a tenth of the uniform weight).
pub fn density_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> ComplexMatrix {
    assert!(rank >= 1 && rank <= dim);
    let u = unitary(rng, dim);
    let weights: Vec<f64> = (0..rank).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut rho = ComplexMatrix::zeros(dim, dim);
    for (k, w) in weights.iter().enumerate() {
        rho = &rho + &ComplexMatrix::projector(&u.column(k)).scale_real(w / total);
    }
    rho.hermitian_part()
}

/// Invertible contraction with singular values drawn from `[min_singular, 1]`.
pub fn invertible_contraction<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    min_singular: f64,
) -> ComplexMatrix {
    let singulars: Vec<f64> = (0..dim)
        .map(|_| rng.random_range(min_singular..=1.0))
        .collect();
    with_singulars(rng, &singulars)
}

/// Contraction whose rank is exactly `rank` (nonzero singular values in
/// `[0.05, 1]`).
pub fn contraction_of_rank<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> ComplexMatrix {
    let singulars: Vec<f64> = (0..dim)
        .map(|k| {
            if k < rank {
                rng.random_range(0.05..=1.0)
            } else {
                0.0
            }
        })
        .collect();
    with_singulars(rng, &singulars)
}

/// Invertible diagonal factor with entries of modulus in `[min_abs, 1]`.
pub fn invertible_diagonal<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    min_abs: f64,
) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        let r = rng.random_range(min_abs..=1.0);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        m[(i, i)] = C64::from_polar(r, phase);
    }
    m
}

fn with_singulars<R: Rng + ?Sized>(rng: &mut R, singulars: &[f64]) -> ComplexMatrix {
    let dim = singulars.len();
    let u = unitary(rng, dim);
    let v = unitary(rng, dim);
    let scaled = ComplexMatrix::from_fn(dim, dim, |r, c| u[(r, c)] * singulars[c]);
    &scaled * &v.adjoint()
}
