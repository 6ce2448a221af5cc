//! Quantum operator vocabulary: density matrices, the dissipator and jump
//! maps, the measurement drift/diffusion terms, block decomposition against
//! a target subspace, and numerical positivity repair.
//!
//! Conventions: the target subspace is always spanned by the first `ds`
//! canonical basis vectors, so every operator X splits as
//!
//! ```text
//! X = [ X_S  X_P ]      S: ds×ds,   P: ds×dr,
//!     [ X_Q  X_R ]      Q: dr×ds,   R: dr×dr.
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MatrixError, StateError};
use crate::matrix::{anticommutator, c64, commutator, eigh, ComplexMatrix};

/// Hermiticity tolerance for validated operators and states.
pub const TOL_HERM: f64 = 1e-10;
/// Allowed negative-eigenvalue slack when validating a density matrix.
pub const TOL_POS: f64 = 1e-9;
/// Allowed trace deviation for a density matrix.
pub const TOL_TRACE: f64 = 1e-9;
/// Jump rates at or below this are treated as zero.
pub const TOL_RATE: f64 = 1e-12;
/// Positivity repair refuses eigenvalues below minus this.
pub const TOL_REPAIR: f64 = 1e-7;

/// A validated quantum state: Hermitian, positive semidefinite, unit trace
/// (all within the module tolerances).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self, StateError> {
        let _ = m.require_square()?;
        let defect = m.hermiticity_defect();
        if defect > TOL_HERM {
            return Err(StateError::Matrix(MatrixError::NotHermitian {
                defect,
                tol: TOL_HERM,
            }));
        }
        let tr = m.trace_re();
        if (tr - 1.0).abs() > TOL_TRACE {
            return Err(StateError::TraceDeviation {
                trace: tr,
                tol: TOL_TRACE,
            });
        }
        let min = eigh(&m)?.min();
        if min < -TOL_POS {
            return Err(StateError::NotPositive {
                eig: min,
                tol: TOL_POS,
            });
        }
        Ok(Self { m })
    }

    /// Diagonal state from classical populations (must sum to 1).
    pub fn from_populations(pops: &[f64]) -> Result<Self, StateError> {
        Self::new(ComplexMatrix::from_real_diag(pops))
    }

    /// Pure state |ψ⟩⟨ψ| from an (unnormalized) ket.
    pub fn pure(ket: &[Complex64]) -> Result<Self, StateError> {
        let norm2: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        let n = ket.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, ket[i] * ket[j].conj() / norm2);
            }
        }
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: ComplexMatrix::identity(dim).scale_re(1.0 / dim as f64),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }
}

/// Block split of an operator against ℍ_S ⊕ ℍ_R.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub s: ComplexMatrix,
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
}

impl BlockDecomposition {
    pub fn reassemble(&self) -> ComplexMatrix {
        let ds = self.s.rows();
        let dr = self.r.rows();
        let mut m = ComplexMatrix::zeros(ds + dr, ds + dr);
        m.set_block(0, 0, &self.s);
        m.set_block(0, ds, &self.p);
        m.set_block(ds, 0, &self.q);
        m.set_block(ds, ds, &self.r);
        m
    }
}

/// Split a square matrix at `ds` (the target-subspace dimension).
pub fn block_decompose(a: &ComplexMatrix, ds: usize) -> Result<BlockDecomposition, MatrixError> {
    let dim = a.require_square()?;
    if ds == 0 || ds >= dim {
        return Err(MatrixError::BadBlockSplit { ds, dim });
    }
    Ok(BlockDecomposition {
        s: a.block(0, ds, 0, ds),
        p: a.block(0, ds, ds, dim),
        q: a.block(ds, dim, 0, ds),
        r: a.block(ds, dim, ds, dim),
    })
}

/// One switched mode of the controlled master equation: free and control
/// Hamiltonians plus the unmonitored, diffusive and counting noise operators.
#[derive(Clone, Debug)]
pub struct QuantumSubsystemSpec {
    pub h0: ComplexMatrix,
    pub hk: ComplexMatrix,
    pub lk: ComplexMatrix,
    pub ck: ComplexMatrix,
    pub dk: ComplexMatrix,
}

impl QuantumSubsystemSpec {
    pub fn new(
        h0: ComplexMatrix,
        hk: ComplexMatrix,
        lk: ComplexMatrix,
        ck: ComplexMatrix,
        dk: ComplexMatrix,
    ) -> Result<Self, MatrixError> {
        let dim = h0.require_square()?;
        for (name, m) in [("hk", &hk), ("lk", &lk), ("ck", &ck), ("dk", &dk)] {
            if m.require_square()? != dim {
                return Err(MatrixError::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        for (name, m) in [("h0", &h0), ("hk", &hk)] {
            let defect = m.hermiticity_defect();
            if defect > TOL_HERM {
                return Err(MatrixError::BadData(format!(
                    "{name} not Hermitian: asymmetry norm {defect:.3e}"
                )));
            }
        }
        Ok(Self { h0, hk, lk, ck, dk })
    }

    /// All-zero mode of the given dimension (frozen dynamics).
    pub fn zero(dim: usize) -> Self {
        let z = ComplexMatrix::zeros(dim, dim);
        Self {
            h0: z.clone(),
            hk: z.clone(),
            lk: z.clone(),
            ck: z.clone(),
            dk: z,
        }
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    /// Total Hamiltonian H0 + Hk.
    pub fn hamiltonian(&self) -> ComplexMatrix {
        &self.h0 + &self.hk
    }
}

/// Dissipator C A C† − ½{C†C, A}. Trace-free by construction.
pub fn dissipator(c: &ComplexMatrix, a: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    let dc = c.require_square()?;
    let da = a.require_square()?;
    if dc != da {
        return Err(MatrixError::DimensionMismatch(format!(
            "dissipator: C is {dc}x{dc}, A is {da}x{da}"
        )));
    }
    let cac = &(c * a) * &c.adjoint();
    let ctc = &c.adjoint() * c;
    Ok(&cac - &anticommutator(&ctc, a).scale_re(0.5))
}

/// Detection intensity Tr(D A D†); real and nonnegative on states.
pub fn jump_rate(d: &ComplexMatrix, a: &ComplexMatrix) -> f64 {
    (&(d * a) * &d.adjoint()).trace_re()
}

/// Post-detection state D ρ D†/Tr(D ρ D†) together with the rate.
///
/// Signals `ZeroJumpRate` when the rate is at or below `TOL_RATE`; firing a
/// jump there is undefined and the caller must not do it.
pub fn jump_map(
    d: &ComplexMatrix,
    rho: &DensityMatrix,
) -> Result<(DensityMatrix, f64), StateError> {
    let drd = &(d * rho.matrix()) * &d.adjoint();
    let rate = drd.trace_re();
    if rate <= TOL_RATE {
        return Err(StateError::ZeroJumpRate { rate });
    }
    let state = DensityMatrix::new(drd.scale_re(1.0 / rate).hermitize())?;
    Ok((state, rate))
}

/// Unnormalized jump image D A D† and its trace, for hot paths that manage
/// validation themselves.
pub fn jump_image(d: &ComplexMatrix, a: &ComplexMatrix) -> (ComplexMatrix, f64) {
    let drd = &(d * a) * &d.adjoint();
    let rate = drd.trace_re();
    (drd, rate)
}

/// Deterministic generator part of one mode:
/// −i[H0+Hk, A] + I_L(A) + I_C(A) + I_D(A).
pub fn drift(spec: &QuantumSubsystemSpec, a: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    let h = spec.hamiltonian();
    let mut out = commutator(&h, a).scale(c64(0.0, -1.0));
    for op in [&spec.lk, &spec.ck, &spec.dk] {
        out = &out + &dissipator(op, a)?;
    }
    Ok(out)
}

/// Adjoint of `drift` with respect to the Hilbert-Schmidt inner product:
/// i[H0+Hk, X] + Σ_A (A† X A − ½{A†A, X}).
///
/// Satisfies Tr(X·drift(ρ)) = Tr(adjoint_drift(X)·ρ); precomputing it for a
/// fixed X turns every switching-region evaluation into a single trace.
pub fn adjoint_drift(
    spec: &QuantumSubsystemSpec,
    x: &ComplexMatrix,
) -> Result<ComplexMatrix, MatrixError> {
    let h = spec.hamiltonian();
    let mut out = commutator(&h, x).scale(c64(0.0, 1.0));
    for op in [&spec.lk, &spec.ck, &spec.dk] {
        let axa = &(&op.adjoint() * x) * op;
        let ata = &op.adjoint() * op;
        out = &(&out + &axa) - &anticommutator(&ata, x).scale_re(0.5);
    }
    Ok(out)
}

/// Diffusive (measurement back-action) term:
/// C A + A C† − Tr[(C+C†)A]·A.
pub fn diffusion(c: &ComplexMatrix, a: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    let dc = c.require_square()?;
    if dc != a.require_square()? {
        return Err(MatrixError::DimensionMismatch("diffusion".into()));
    }
    let ca = c * a;
    let ac = a * &c.adjoint();
    let lin = &ca + &ac;
    let w = lin.trace_re();
    Ok(&lin - &a.scale_re(w))
}

/// Hilbert-Schmidt distance from the target subspace: ‖ρ − Π0 ρ Π0‖_F.
pub fn subspace_distance(rho: &ComplexMatrix, ds: usize) -> Result<f64, MatrixError> {
    let b = block_decompose(rho, ds)?;
    let mut acc = b.r.frobenius_norm().powi(2);
    acc += b.p.frobenius_norm().powi(2);
    acc += b.q.frobenius_norm().powi(2);
    Ok(acc.sqrt())
}

/// Clip tiny negative eigenvalues and renormalize the trace.
///
/// Hard failure when the most negative eigenvalue is below −`TOL_REPAIR`:
/// silently repairing a violation that large would mask an integrator bug,
/// so the caller is told to reduce dt instead.
pub fn project_density(a: &ComplexMatrix) -> Result<DensityMatrix, StateError> {
    let defect = a.hermiticity_defect();
    if defect > TOL_HERM {
        return Err(StateError::Matrix(MatrixError::NotHermitian {
            defect,
            tol: TOL_HERM,
        }));
    }
    let e = eigh(&a.hermitize())?;
    if e.min() < -TOL_REPAIR {
        return Err(StateError::RepairTooLarge {
            eig: e.min(),
            tol: TOL_REPAIR,
        });
    }
    let clipped: Vec<f64> = e.values.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(StateError::TraceDeviation {
            trace: total,
            tol: TOL_TRACE,
        });
    }
    let n = e.values.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let w = clipped[k] / total;
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = e.vectors.at(i, k);
            for j in 0..n {
                let v = m.at(i, j) + vik * e.vectors.at(j, k).conj() * c64(w, 0.0);
                m.set(i, j, v);
            }
        }
    }
    DensityMatrix::new(m.hermitize())
}

/// Pauli matrices and friends, used all over the tests and built-in systems.
pub mod paulis {
    use super::*;

    pub fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[
            vec![c64(0.0, 0.0), c64(1.0, 0.0)],
            vec![c64(1.0, 0.0), c64(0.0, 0.0)],
        ])
        .unwrap()
    }

    pub fn sigma_y() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[
            vec![c64(0.0, 0.0), c64(0.0, -1.0)],
            vec![c64(0.0, 1.0), c64(0.0, 0.0)],
        ])
        .unwrap()
    }

    pub fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, -1.0])
    }

    /// Lowering operator |0⟩⟨1| (sends the excited level to the ground one).
    pub fn sigma_minus() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[
            vec![c64(0.0, 0.0), c64(1.0, 0.0)],
            vec![c64(0.0, 0.0), c64(0.0, 0.0)],
        ])
        .unwrap()
    }
}

/// Serializable wire form of a complex matrix: nested `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixData(pub Vec<Vec<[f64; 2]>>);

impl MatrixData {
    pub fn to_matrix(&self) -> Result<ComplexMatrix, MatrixError> {
        ComplexMatrix::from_nested(&self.0)
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self(m.to_nested())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qubit_rho_plus() -> ComplexMatrix {
        // ½(I + σx)
        ComplexMatrix::from_rows(&[
            vec![c64(0.5, 0.0), c64(0.5, 0.0)],
            vec![c64(0.5, 0.0), c64(0.5, 0.0)],
        ])
        .unwrap()
    }

    #[test]
    fn dissipator_identity_is_zero() {
        let id = ComplexMatrix::identity(3);
        let a = ComplexMatrix::from_real_diag(&[0.2, 0.3, 0.5]);
        let out = dissipator(&id, &a).unwrap();
        assert!(out.frobenius_norm() < 1e-15);
    }

    #[test]
    fn dissipator_projector_on_mixed() {
        let c = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let a = ComplexMatrix::identity(2).scale_re(0.5);
        assert!(dissipator(&c, &a).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn dissipator_sigma_x_flips_projector() {
        let out = dissipator(&paulis::sigma_x(), &ComplexMatrix::from_real_diag(&[1.0, 0.0]))
            .unwrap();
        let expected = ComplexMatrix::from_real_diag(&[-1.0, 1.0]);
        assert!((&out - &expected).frobenius_norm() < 1e-15);
    }

    #[test]
    fn dissipator_traceless_on_hermitian() {
        let c = ComplexMatrix::from_rows(&[
            vec![c64(0.3, 0.1), c64(0.2, -0.4)],
            vec![c64(0.0, 0.7), c64(-0.5, 0.2)],
        ])
        .unwrap();
        let out = dissipator(&c, &qubit_rho_plus()).unwrap();
        assert!(out.trace().norm() < 1e-12);
    }

    #[test]
    fn jump_map_identity() {
        let rho = DensityMatrix::from_populations(&[0.3, 0.7]).unwrap();
        let (state, rate) = jump_map(&ComplexMatrix::identity(2), &rho).unwrap();
        assert!((rate - 1.0).abs() < 1e-12);
        assert!((state.matrix() - rho.matrix()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn jump_map_sigma_x() {
        let rho = DensityMatrix::from_populations(&[1.0, 0.0]).unwrap();
        let (state, rate) = jump_map(&paulis::sigma_x(), &rho).unwrap();
        assert!((rate - 1.0).abs() < 1e-12);
        let expected = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        assert!((state.matrix() - &expected).frobenius_norm() < 1e-12);
    }

    #[test]
    fn jump_map_diagonal_rates() {
        let rho = DensityMatrix::from_populations(&[0.5, 0.5]).unwrap();
        let d = ComplexMatrix::from_real_diag(&[1.0, 2.0]);
        let (state, rate) = jump_map(&d, &rho).unwrap();
        assert!((rate - 2.5).abs() < 1e-12);
        let expected = ComplexMatrix::from_real_diag(&[0.2, 0.8]);
        assert!((state.matrix() - &expected).frobenius_norm() < 1e-12);
    }

    #[test]
    fn jump_map_zero_rate_flagged() {
        let rho = DensityMatrix::from_populations(&[1.0, 0.0]).unwrap();
        let d = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        assert!(matches!(
            jump_map(&d, &rho),
            Err(StateError::ZeroJumpRate { .. })
        ));
    }

    #[test]
    fn drift_zero_spec() {
        let spec = QuantumSubsystemSpec::zero(2);
        let out = drift(&spec, &qubit_rho_plus()).unwrap();
        assert!(out.frobenius_norm() < 1e-15);
    }

    #[test]
    fn drift_commuting_hamiltonian() {
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.h0 = paulis::sigma_z();
        let rho = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        assert!(drift(&spec, &rho).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn drift_dissipator_only() {
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.ck = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let rho = qubit_rho_plus();
        let out = drift(&spec, &rho).unwrap();
        let oracle = dissipator(&spec.ck, &rho).unwrap();
        assert!((&out - &oracle).frobenius_norm() < 1e-15);
        // full value from the dense oracle: [[0, -1/4],[-1/4, 0]]
        assert!((out.at(0, 1) - c64(-0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn drift_hermitian_traceless() {
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.h0 = paulis::sigma_z().scale_re(0.5);
        spec.ck = paulis::sigma_z().scale_re(0.5);
        spec.dk = paulis::sigma_minus().scale_re(0.4);
        let out = drift(&spec, &qubit_rho_plus()).unwrap();
        assert!(out.hermiticity_defect() < 1e-12);
        assert!(out.trace().norm() < 1e-12);
    }

    #[test]
    fn diffusion_identity_and_projector() {
        let rho = qubit_rho_plus();
        assert!(diffusion(&ComplexMatrix::identity(2), &rho).unwrap().frobenius_norm() < 1e-15);
        let c = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let ground = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        assert!(diffusion(&c, &ground).unwrap().frobenius_norm() < 1e-15);
        let mixed = ComplexMatrix::from_real_diag(&[0.5, 0.5]);
        let out = diffusion(&c, &mixed).unwrap();
        let expected = ComplexMatrix::from_real_diag(&[-0.5, 0.5]);
        assert!((&out - &expected).frobenius_norm() < 1e-15);
    }

    #[test]
    fn block_roundtrip_exact() {
        let m = ComplexMatrix::from_rows(&[
            vec![c64(1.0, 2.0), c64(3.0, -1.0), c64(0.5, 0.0)],
            vec![c64(-2.0, 0.1), c64(0.0, 0.0), c64(1.5, 2.5)],
            vec![c64(0.3, -0.3), c64(4.0, 4.0), c64(-1.0, 1.0)],
        ])
        .unwrap();
        for ds in [1usize, 2] {
            let b = block_decompose(&m, ds).unwrap();
            assert_eq!(b.reassemble(), m);
        }
        let b = block_decompose(&ComplexMatrix::from_real_diag(&[1.0, 2.0, 3.0]), 2).unwrap();
        assert_eq!(b.s, ComplexMatrix::from_real_diag(&[1.0, 2.0]));
        assert_eq!(b.r, ComplexMatrix::from_real_diag(&[3.0]));
        assert!(block_decompose(&m, 3).is_err());
        assert!(block_decompose(&m, 0).is_err());
    }

    #[test]
    fn subspace_distance_values() {
        let rho = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        assert!(subspace_distance(&rho, 1).unwrap() < 1e-15);
        let rho = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        assert!((subspace_distance(&rho, 1).unwrap() - 1.0).abs() < 1e-15);
        let rho = ComplexMatrix::from_real_diag(&[0.5, 0.5]);
        assert!((subspace_distance(&rho, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn project_density_idempotent() {
        let rho = DensityMatrix::pure(&[c64(0.6, 0.0), c64(0.0, 0.8)]).unwrap();
        let repaired = project_density(rho.matrix()).unwrap();
        assert!((repaired.matrix() - rho.matrix()).frobenius_norm() < 1e-14);
    }

    #[test]
    fn project_density_clips_and_renormalizes() {
        let m = ComplexMatrix::from_real_diag(&[1.0 + 1e-9, -1e-9]);
        let out = project_density(&m).unwrap();
        assert!((out.matrix() - &ComplexMatrix::from_real_diag(&[1.0, 0.0])).frobenius_norm() < 1e-9);

        let m = ComplexMatrix::from_real_diag(&[0.6, 0.6]);
        let out = project_density(&m).unwrap();
        assert!((out.matrix() - &ComplexMatrix::from_real_diag(&[0.5, 0.5])).frobenius_norm() < 1e-14);
    }

    #[test]
    fn project_density_hard_fails_on_big_violation() {
        let m = ComplexMatrix::from_real_diag(&[1.001, -1e-3]);
        assert!(matches!(
            project_density(&m),
            Err(StateError::RepairTooLarge { .. })
        ));
    }
}
