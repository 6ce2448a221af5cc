//! Random state generators for the empirical hypothesis checks.
//!
//! Near-target quantum states are built as direct sums
//! ρ = (1−s)·ρ_S ⊕ s·ρ_R with Haar-random blocks and s log-uniform in
//! [1e-6, l]; that construction covers the d0 → 0 limit regime the
//! certificate consistency checks care about.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::{c64, ComplexMatrix};
use crate::operator::{subspace_distance, DensityMatrix};

/// Standard normal via Box-Muller; keeps the draw sequence independent of
/// the platform's library internals.
pub fn normal(rng: &mut impl Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

fn ginibre(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut g = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            g.set(i, j, c64(normal(rng), normal(rng)));
        }
    }
    g
}

/// Haar-measure induced random density matrix: GG†/Tr(GG†).
pub fn haar_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = ginibre(dim, rng);
    let gg = &g * &g.adjoint();
    let tr = gg.trace_re();
    DensityMatrix::new(gg.scale_re(1.0 / tr).hermitize()).expect("Ginibre state is valid")
}

/// Haar-random pure state |ψ⟩⟨ψ|.
pub fn haar_pure(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let ket: Vec<Complex64> = (0..dim).map(|_| c64(normal(rng), normal(rng))).collect();
    DensityMatrix::pure(&ket).expect("random ket is valid")
}

/// Random complex matrix with unit Frobenius norm.
pub fn random_operator(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(dim, rng);
    let n = g.frobenius_norm();
    g.scale_re(1.0 / n)
}

/// Random Hermitian matrix with unit Frobenius norm.
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let h = ginibre(dim, rng).hermitize();
    let n = h.frobenius_norm();
    h.scale_re(1.0 / n)
}

/// Random Hermitian positive definite matrix (GG† + εI, normalized).
pub fn random_positive_definite(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(dim, rng);
    let gg = &(&g * &g.adjoint()).hermitize() + &ComplexMatrix::identity(dim).scale_re(0.1);
    let n = gg.frobenius_norm();
    gg.scale_re(1.0 / n)
}

/// Block state (1−s)·ρ_S ⊕ s·ρ_R with s log-uniform in [1e-6, l].
/// Its distance to the target subspace is s·‖ρ_R‖_F ≤ l.
pub fn near_target_state(ds: usize, dim: usize, l: f64, rng: &mut impl Rng) -> DensityMatrix {
    let lo: f64 = 1e-6_f64.min(l * 0.5);
    let s = (lo.ln() + rng.gen::<f64>() * (l.ln() - lo.ln())).exp();
    block_mixture(ds, dim, s, rng)
}

/// Block state with a fixed R-weight s.
pub fn block_mixture(ds: usize, dim: usize, s: f64, rng: &mut impl Rng) -> DensityMatrix {
    let dr = dim - ds;
    let rho_s = haar_density(ds, rng);
    let rho_r = haar_density(dr, rng);
    let mut m = ComplexMatrix::zeros(dim, dim);
    m.set_block(0, 0, &rho_s.matrix().scale_re(1.0 - s));
    m.set_block(ds, ds, &rho_r.matrix().scale_re(s));
    DensityMatrix::new(m).expect("block mixture is valid")
}

/// State with subspace distance at least `min_d0`: Haar draws mixed with
/// boundary-weight block states, rejected until the distance clears the bar.
pub fn state_outside(
    ds: usize,
    dim: usize,
    min_d0: f64,
    rng: &mut ChaCha8Rng,
) -> Option<DensityMatrix> {
    for attempt in 0..256 {
        let cand = if attempt % 2 == 0 {
            haar_density(dim, rng)
        } else {
            let s = min_d0 + rng.gen::<f64>() * (1.0 - min_d0);
            block_mixture(ds, dim, s.min(1.0), rng)
        };
        if subspace_distance(cand.matrix(), ds).unwrap() >= min_d0 {
            return Some(cand);
        }
    }
    None
}

/// Uniform point in the d-ball of radius r.
pub fn ball(dim: usize, r: f64, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = x.iter().map(|v| v * v).sum();
        if n2 <= 1.0 && n2 > 0.0 {
            return x.iter().map(|v| v * r).collect();
        }
    }
}

/// Uniform-direction point with radius uniform in [r_lo, r_hi].
pub fn annulus(dim: usize, r_lo: f64, r_hi: f64, rng: &mut impl Rng) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let n: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = rng.gen_range(r_lo..r_hi);
    dir.iter().map(|v| v / n * r).collect()
}
