//! Analytic stability certificates and empirical hypothesis checks.
//!
//! All scalar certificates are exact functions of eigenvalues of small
//! Hermitian blocks:
//!
//! * the invariance residuals of the target subspace,
//! * the growth bound λ̄(X_R) = inf{λ : F*_R(X_R) ≤ λ X_R} of the reduced
//!   adjoint generator, computed by symmetric whitening,
//! * the diffusion lower bound Γ(X,C) and its projector special case,
//! * the jump bound Φ_δ(X,D) and the jump log-correction Ψ_δ(X,D),
//! * the combined local decay margin E_δ = −δλ̄ + δ(1−δ)/2·Γ² − Φ_δ,
//! * QND coefficient gaps and the exponent bounds they imply.
//!
//! The H-type hypotheses are verified empirically by sampling; those checks
//! are necessary-condition tests, not proofs, and their sample counts and
//! tolerances travel with the report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::CertificateError;
use crate::lyapunov::StateFunctional;
use crate::matrix::{anticommutator, c64, commutator, eigh, ComplexMatrix};
use crate::operator::{block_decompose, subspace_distance, QuantumSubsystemSpec};
use crate::sampler::{haar_density, near_target_state, state_outside};

/// Tolerance for declaring an off-diagonal block zero.
const TOL_BLOCK: f64 = 1e-12;
/// Invariance residuals must fall below this to pass.
pub const TOL_INVARIANCE: f64 = 1e-9;
/// Default clamp for the diverging jump log-correction.
pub const PSI_FLOOR_DEFAULT: f64 = -1e3;

/// Hermitian operator supported on the complement block: its extension to
/// the full space is [0 0; 0 X_R].
#[derive(Clone, Debug)]
pub struct ExtensionOperator {
    xr: ComplexMatrix,
    ds: usize,
}

impl ExtensionOperator {
    /// Validates Hermiticity and positive semidefiniteness (within 1e-10).
    pub fn new(xr: ComplexMatrix, ds: usize) -> Result<Self, CertificateError> {
        let defect = xr.hermiticity_defect();
        if defect > 1e-10 {
            return Err(CertificateError::Matrix(
                crate::error::MatrixError::NotHermitian { defect, tol: 1e-10 },
            ));
        }
        let min = eigh(&xr)?.min();
        if min < -1e-10 {
            return Err(CertificateError::NotPositiveDefinite(min));
        }
        Ok(Self { xr, ds })
    }

    pub fn xr(&self) -> &ComplexMatrix {
        &self.xr
    }

    pub fn ds(&self) -> usize {
        self.ds
    }

    /// The extension [0 0; 0 X_R] on the full space.
    pub fn full(&self) -> ComplexMatrix {
        let dim = self.ds + self.xr.dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        m.set_block(self.ds, self.ds, &self.xr);
        m
    }

    /// Identity on the complement: the projector Π0⊥ as an extension.
    pub fn projector_complement(ds: usize, dim: usize) -> Self {
        Self {
            xr: ComplexMatrix::identity(dim - ds),
            ds,
        }
    }

    fn require_positive_definite(&self) -> Result<(), CertificateError> {
        let min = eigh(&self.xr).map_err(CertificateError::Matrix)?.min();
        if min <= 1e-10 {
            return Err(CertificateError::NotPositiveDefinite(min));
        }
        Ok(())
    }
}

/// Residuals of the almost-sure invariance conditions for one mode: the
/// three lower-left noise blocks and the Hamiltonian compensation identity
/// i(H0+Hk)_P = ½(L_S†L_P + C_S†C_P + D_S†D_P).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InvarianceReport {
    pub residuals: BTreeMap<String, f64>,
    pub pass: bool,
}

pub fn check_invariance(
    spec: &QuantumSubsystemSpec,
    ds: usize,
) -> Result<InvarianceReport, CertificateError> {
    let l = block_decompose(&spec.lk, ds)?;
    let c = block_decompose(&spec.ck, ds)?;
    let d = block_decompose(&spec.dk, ds)?;
    let h = block_decompose(&spec.hamiltonian(), ds)?;

    let mut residuals = BTreeMap::new();
    residuals.insert("l_q_norm".to_string(), l.q.frobenius_norm());
    residuals.insert("c_q_norm".to_string(), c.q.frobenius_norm());
    residuals.insert("d_q_norm".to_string(), d.q.frobenius_norm());
    let lhs = h.p.scale(c64(0.0, 1.0));
    let rhs = &(&(&l.s.adjoint() * &l.p) + &(&c.s.adjoint() * &c.p))
        + &(&d.s.adjoint() * &d.p);
    residuals.insert(
        "hamiltonian_compensation".to_string(),
        (&lhs - &rhs.scale_re(0.5)).frobenius_norm(),
    );
    let pass = residuals.values().all(|&r| r <= TOL_INVARIANCE);
    Ok(InvarianceReport { residuals, pass })
}

/// Reduced generator on the complement block:
/// F_R(ϱ) = −i[H_R, ϱ] + Σ_A (A_R ϱ A_R† − ½{A_P†A_P + A_R†A_R, ϱ}).
pub fn reduced_generator(
    spec: &QuantumSubsystemSpec,
    ds: usize,
    varrho: &ComplexMatrix,
) -> Result<ComplexMatrix, CertificateError> {
    let h = block_decompose(&spec.hamiltonian(), ds)?;
    let mut out = commutator(&h.r, varrho).scale(c64(0.0, -1.0));
    for op in [&spec.lk, &spec.ck, &spec.dk] {
        let b = block_decompose(op, ds)?;
        let ara = &(&b.r * varrho) * &b.r.adjoint();
        let weight = &(&b.p.adjoint() * &b.p) + &(&b.r.adjoint() * &b.r);
        out = &(&out + &ara) - &anticommutator(&weight, varrho).scale_re(0.5);
    }
    Ok(out)
}

/// Hilbert-Schmidt adjoint of `reduced_generator`:
/// F*_R(X) = i[H_R, X] + Σ_A (A_R† X A_R − ½{A_P†A_P + A_R†A_R, X}).
pub fn adjoint_reduced_generator(
    spec: &QuantumSubsystemSpec,
    ds: usize,
    xr: &ComplexMatrix,
) -> Result<ComplexMatrix, CertificateError> {
    let h = block_decompose(&spec.hamiltonian(), ds)?;
    let mut out = commutator(&h.r, xr).scale(c64(0.0, 1.0));
    for op in [&spec.lk, &spec.ck, &spec.dk] {
        let b = block_decompose(op, ds)?;
        let axa = &(&b.r.adjoint() * xr) * &b.r;
        let weight = &(&b.p.adjoint() * &b.p) + &(&b.r.adjoint() * &b.r);
        out = &(&out + &axa) - &anticommutator(&weight, xr).scale_re(0.5);
    }
    Ok(out)
}

/// λ̄(X_R) = inf{λ ∈ ℝ : F*_R(X_R) ≤ λ X_R} for positive definite X_R.
///
/// Whitening with X_R^{-1/2} turns the operator inequality into a plain
/// Hermitian eigenvalue problem: λ̄ is the top eigenvalue of
/// X_R^{-1/2} F*_R(X_R) X_R^{-1/2}.
pub fn growth_bound(
    spec: &QuantumSubsystemSpec,
    x: &ExtensionOperator,
) -> Result<f64, CertificateError> {
    x.require_positive_definite()?;
    let e = eigh(&x.xr)?;
    let w = e.apply(|v| 1.0 / v.sqrt());
    let fstar = adjoint_reduced_generator(spec, x.ds, &x.xr)?;
    let m = (&(&w * &fstar) * &w).hermitize();
    Ok(eigh(&m)?.max())
}

/// Three-case diffusion lower bound Γ(X, C); requires C_Q = 0.
///
/// With Z_R = X_R C_R + C_R† X_R:
/// case (i)  max{0, λ̄(Z_R)/λ̲(X_R)} < λ̲(C_S+C_S†):  difference of the two;
/// case (ii) min{0, λ̲(Z_R)/λ̲(X_R)} > λ̄(C_S+C_S†):  difference of the two;
/// otherwise zero.
pub fn diffusion_bound(
    x: &ExtensionOperator,
    c: &ComplexMatrix,
) -> Result<f64, CertificateError> {
    x.require_positive_definite()?;
    let b = block_decompose(c, x.ds)?;
    let qn = b.q.frobenius_norm();
    if qn > TOL_BLOCK {
        return Err(CertificateError::NonzeroQBlock(qn));
    }
    let cs = (&b.s + &b.s.adjoint()).hermitize();
    let cs_eig = eigh(&cs)?;
    let zr = (&(&x.xr * &b.r) + &(&b.r.adjoint() * &x.xr)).hermitize();
    let zr_eig = eigh(&zr)?;
    let xr_min = eigh(&x.xr)?.min();

    let upper = (zr_eig.max() / xr_min).max(0.0);
    if upper < cs_eig.min() {
        return Ok(cs_eig.min() - upper);
    }
    let lower = (zr_eig.min() / xr_min).min(0.0);
    if lower > cs_eig.max() {
        return Ok(lower - cs_eig.max());
    }
    Ok(0.0)
}

/// Projector special case Γ(C): λ̲(C_S+C_S†) when positive definite,
/// λ̄(C_S+C_S†) when negative definite, zero otherwise. Requires C_Q = 0.
pub fn diffusion_bound_projector(
    c: &ComplexMatrix,
    ds: usize,
) -> Result<f64, CertificateError> {
    let b = block_decompose(c, ds)?;
    let qn = b.q.frobenius_norm();
    if qn > TOL_BLOCK {
        return Err(CertificateError::NonzeroQBlock(qn));
    }
    let cs = (&b.s + &b.s.adjoint()).hermitize();
    let e = eigh(&cs)?;
    if e.min() > 0.0 {
        Ok(e.min())
    } else if e.max() < 0.0 {
        Ok(e.max())
    } else {
        Ok(0.0)
    }
}

/// Jump bound
/// Φ_δ(X,D) = (λ̄(D_R†X_R D_R)/λ̲(X_R))^δ · λ̄(D_S†D_S)^{1−δ}
///            − (1−δ)·λ̲(D_S†D_S) − δ·λ̲(D_R†X_R D_R)/λ̄(X_R).
/// Requires D_Q = 0 and δ ∈ (0,1).
pub fn jump_bound(
    x: &ExtensionOperator,
    d: &ComplexMatrix,
    delta: f64,
) -> Result<f64, CertificateError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CertificateError::DeltaOutOfRange(delta));
    }
    x.require_positive_definite()?;
    let b = block_decompose(d, x.ds)?;
    let qn = b.q.frobenius_norm();
    if qn > TOL_BLOCK {
        return Err(CertificateError::NonzeroQBlock(qn));
    }
    let dxd = (&(&b.r.adjoint() * &x.xr) * &b.r).hermitize();
    let dxd_eig = eigh(&dxd)?;
    let dss = (&b.s.adjoint() * &b.s).hermitize();
    let dss_eig = eigh(&dss)?;
    let xr_eig = eigh(&x.xr)?;

    Ok(
        (dxd_eig.max() / xr_eig.min()).max(0.0).powf(delta)
            * dss_eig.max().max(0.0).powf(1.0 - delta)
            - (1.0 - delta) * dss_eig.min()
            - delta * dxd_eig.min() / xr_eig.max(),
    )
}

/// Combined local decay margin E_δ(X) = −δλ̄ + δ(1−δ)/2·Γ(X,C)² − Φ_δ(X,D).
/// A positive value certifies a local exponential Lyapunov function
/// V(ρ) = Tr(Xρ)^δ near the target subspace.
pub fn local_decay_margin(
    spec: &QuantumSubsystemSpec,
    x: &ExtensionOperator,
    delta: f64,
) -> Result<f64, CertificateError> {
    let lbar = growth_bound(spec, x)?;
    let gamma = diffusion_bound(x, &spec.ck)?;
    let phi = jump_bound(x, &spec.dk, delta)?;
    Ok(-delta * lbar + 0.5 * delta * (1.0 - delta) * gamma * gamma - phi)
}

/// The nonpositive jump log-correction Ψ_δ(X,D), possibly clamped.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct JumpLogCorrection {
    pub value: f64,
    /// Set when g_δ diverged to −∞ and the configurable floor was applied;
    /// the exponent bound only improves in that case.
    pub clamped: bool,
}

/// Ψ_δ(X,D) from the ratio window
/// r̲ = λ̲(D_R†X_R D_R)/(λ̄(D_S†D_S)·λ̄(X_R)),
/// r̄ = λ̄(D_R†X_R D_R)/(λ̲(D_S†D_S)·λ̲(X_R)),
/// with g_δ(x) = δ·ln x + 1 − x^δ:
/// g_δ(r̄)·λ̲(D_S†D_S) when r̄ < 1, g_δ(r̲)·λ̲(D_S†D_S) when r̲ > 1, else 0.
/// Requires D_S†D_S positive definite.
pub fn jump_log_correction(
    x: &ExtensionOperator,
    d: &ComplexMatrix,
    delta: f64,
    floor: f64,
) -> Result<JumpLogCorrection, CertificateError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CertificateError::DeltaOutOfRange(delta));
    }
    x.require_positive_definite()?;
    let b = block_decompose(d, x.ds)?;
    let qn = b.q.frobenius_norm();
    if qn > TOL_BLOCK {
        return Err(CertificateError::NonzeroQBlock(qn));
    }
    let dss = (&b.s.adjoint() * &b.s).hermitize();
    let dss_eig = eigh(&dss)?;
    if dss_eig.min() <= 1e-12 {
        return Err(CertificateError::SingularSBlock(dss_eig.min()));
    }
    let dxd = (&(&b.r.adjoint() * &x.xr) * &b.r).hermitize();
    let dxd_eig = eigh(&dxd)?;
    let xr_eig = eigh(&x.xr)?;

    let r_lo = dxd_eig.min() / (dss_eig.max() * xr_eig.max());
    let r_hi = dxd_eig.max() / (dss_eig.min() * xr_eig.min());
    let g = |r: f64| delta * r.ln() + 1.0 - r.powf(delta);

    let raw = if r_hi < 1.0 {
        if r_hi <= 0.0 {
            f64::NEG_INFINITY
        } else {
            g(r_hi) * dss_eig.min()
        }
    } else if r_lo > 1.0 {
        g(r_lo) * dss_eig.min()
    } else {
        0.0
    };
    if raw < floor {
        Ok(JumpLogCorrection {
            value: floor,
            clamped: true,
        })
    } else {
        Ok(JumpLogCorrection {
            value: raw,
            clamped: false,
        })
    }
}

/// QND structure: orthogonal projections Π_0..Π_d with per-block diffusive
/// and counting coefficients C = Σ c_iΠ_i, D = Σ a_iΠ_i.
#[derive(Clone, Debug)]
pub struct QndSpec {
    pub projections: Vec<ComplexMatrix>,
    pub c_coeffs: Vec<num_complex::Complex64>,
    pub a_coeffs: Vec<num_complex::Complex64>,
}

impl QndSpec {
    pub fn new(
        projections: Vec<ComplexMatrix>,
        c_coeffs: Vec<num_complex::Complex64>,
        a_coeffs: Vec<num_complex::Complex64>,
    ) -> Result<Self, CertificateError> {
        if projections.len() < 2
            || projections.len() != c_coeffs.len()
            || projections.len() != a_coeffs.len()
        {
            return Err(CertificateError::Matrix(
                crate::error::MatrixError::DimensionMismatch(
                    "need >= 2 projections with matching coefficient lists".into(),
                ),
            ));
        }
        let dim = projections[0].dim();
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for (i, p) in projections.iter().enumerate() {
            let idem = (&(p * p) - p).frobenius_norm();
            if idem > 1e-10 || p.hermiticity_defect() > 1e-10 {
                return Err(CertificateError::Matrix(
                    crate::error::MatrixError::BadData(format!(
                        "projection {i} not an orthogonal projector"
                    )),
                ));
            }
            for (jj, q) in projections.iter().enumerate() {
                if i != jj && (p * q).frobenius_norm() > 1e-10 {
                    return Err(CertificateError::Matrix(
                        crate::error::MatrixError::BadData(format!(
                            "projections {i} and {jj} not orthogonal"
                        )),
                    ));
                }
            }
            sum = &sum + p;
        }
        if (&sum - &ComplexMatrix::identity(dim)).frobenius_norm() > 1e-10 {
            return Err(CertificateError::Matrix(
                crate::error::MatrixError::BadData("projections do not sum to identity".into()),
            ));
        }
        Ok(Self {
            projections,
            c_coeffs,
            a_coeffs,
        })
    }

    pub fn c_operator(&self) -> ComplexMatrix {
        self.weighted(&self.c_coeffs)
    }

    pub fn d_operator(&self) -> ComplexMatrix {
        self.weighted(&self.a_coeffs)
    }

    fn weighted(&self, coeffs: &[num_complex::Complex64]) -> ComplexMatrix {
        let dim = self.projections[0].dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (p, &w) in self.projections.iter().zip(coeffs) {
            m = &m + &p.scale(w);
        }
        m
    }
}

/// Recognize a QND mode against the decomposition Π0 ⊕ e_ds ⊕ … ⊕ e_{d−1}:
/// C and D diagonal with one common coefficient on the target block, and
/// H0, Hk, L block-diagonal in the same decomposition.
pub fn detect_qnd(spec: &QuantumSubsystemSpec, ds: usize) -> Option<QndSpec> {
    let dim = spec.dim();
    if ds >= dim {
        return None;
    }
    let is_diag = |m: &ComplexMatrix| -> bool {
        for i in 0..dim {
            for j in 0..dim {
                if i != j && m.at(i, j).norm() > 1e-12 {
                    return false;
                }
            }
        }
        true
    };
    if !is_diag(&spec.ck) || !is_diag(&spec.dk) {
        return None;
    }
    // H and L may act inside the target block but must not couple blocks.
    let blocky = |m: &ComplexMatrix| -> bool {
        for i in 0..dim {
            for j in 0..dim {
                let same_block = (i < ds && j < ds) || i == j;
                if !same_block && m.at(i, j).norm() > 1e-12 {
                    return false;
                }
            }
        }
        true
    };
    if !blocky(&spec.h0) || !blocky(&spec.hk) || !blocky(&spec.lk) {
        return None;
    }
    let c0 = spec.ck.at(0, 0);
    let a0 = spec.dk.at(0, 0);
    for i in 1..ds {
        if (spec.ck.at(i, i) - c0).norm() > 1e-12 || (spec.dk.at(i, i) - a0).norm() > 1e-12 {
            return None;
        }
    }
    let mut projections = Vec::new();
    let mut pi0 = ComplexMatrix::zeros(dim, dim);
    for i in 0..ds {
        pi0.set(i, i, c64(1.0, 0.0));
    }
    projections.push(pi0);
    let mut c_coeffs = vec![c0];
    let mut a_coeffs = vec![a0];
    for i in ds..dim {
        let mut p = ComplexMatrix::zeros(dim, dim);
        p.set(i, i, c64(1.0, 0.0));
        projections.push(p);
        c_coeffs.push(spec.ck.at(i, i));
        a_coeffs.push(spec.dk.at(i, i));
    }
    QndSpec::new(projections, c_coeffs, a_coeffs).ok()
}

/// Coefficient gaps of a QND mode and the exponent estimate −(c̲+a̲)/2.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct QndConstants {
    pub c_lower: f64,
    pub a_lower: f64,
    pub exponent_estimate: f64,
}

pub fn qnd_constants(q: &QndSpec) -> QndConstants {
    let c0 = q.c_coeffs[0].re;
    let a0 = q.a_coeffs[0].norm();
    let c_lower = q.c_coeffs[1..]
        .iter()
        .map(|c| (c.re - c0).powi(2))
        .fold(f64::INFINITY, f64::min);
    let a_lower = q.a_coeffs[1..]
        .iter()
        .map(|a| (a.norm() - a0).powi(2))
        .fold(f64::INFINITY, f64::min);
    QndConstants {
        c_lower,
        a_lower,
        exponent_estimate: -(c_lower + a_lower) / 2.0,
    }
}

/// Sample Lyapunov exponent bound −(2c3 + c4 + 2c5)/(2c2) for the classical
/// switched system.
pub fn exponent_bound_classical(
    c2: f64,
    c3: f64,
    c4: f64,
    c5: f64,
) -> Result<f64, CertificateError> {
    if c2 <= 0.0 {
        return Err(CertificateError::NonpositiveC2(c2));
    }
    Ok(-(2.0 * c3 + c4 + 2.0 * c5) / (2.0 * c2))
}

/// Sample Lyapunov exponent bound
/// (2δλ̄ − δΓ² + 2(Φ_δ + Ψ_δ)) / (2δ) for the quantum switched system.
pub fn exponent_bound_quantum(
    lbar: f64,
    gamma: f64,
    phi: f64,
    psi: f64,
    delta: f64,
) -> Result<f64, CertificateError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CertificateError::DeltaOutOfRange(delta));
    }
    Ok((2.0 * delta * lbar - delta * gamma * gamma + 2.0 * (phi + psi)) / (2.0 * delta))
}

/// Result of an empirical hypothesis check over sampled states.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HypothesisCheck {
    pub samples: usize,
    /// Worst (largest) generator value seen, normalized where applicable.
    pub worst: f64,
    /// Empirical margin: minus the worst value; positive means pass.
    pub margin: f64,
    pub pass: bool,
    /// States skipped because the functional vanished there.
    pub skipped: usize,
}

/// Empirical local Lyapunov check: samples states with d0 ≤ l and reports
/// the empirical decay margin c(l) = −max A_jV/V.
pub fn verify_local_lyapunov_quantum(
    spec: &QuantumSubsystemSpec,
    v: &dyn StateFunctional,
    ds: usize,
    l: f64,
    n: usize,
    seed: u64,
) -> Result<HypothesisCheck, CertificateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.dim();
    let mut worst = f64::NEG_INFINITY;
    let mut used = 0;
    let mut skipped = 0;
    for _ in 0..n {
        let rho = near_target_state(ds, dim, l, &mut rng);
        let val = v.value(rho.matrix());
        if val <= 1e-300 {
            skipped += 1;
            continue;
        }
        let gen = crate::quantum::generator_value(spec, v, rho.matrix())
            .map_err(|_| CertificateError::DegenerateSampler)?;
        worst = worst.max(gen / val);
        used += 1;
    }
    if used == 0 {
        return Err(CertificateError::DegenerateSampler);
    }
    Ok(HypothesisCheck {
        samples: used,
        worst,
        margin: -worst,
        pass: worst < 0.0,
        skipped,
    })
}

/// Classical counterpart over states with |x| ≤ l.
pub fn verify_local_lyapunov_classical(
    sub: &crate::classical::ClassicalSubsystem,
    v: &dyn crate::lyapunov::LyapunovFunction,
    dim: usize,
    l: f64,
    n: usize,
    seed: u64,
) -> Result<HypothesisCheck, CertificateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut used = 0;
    let mut skipped = 0;
    for _ in 0..n {
        let x = crate::sampler::ball(dim, l, &mut rng);
        let val = v.value(&x);
        if val <= 1e-300 {
            skipped += 1;
            continue;
        }
        let gen = crate::classical::generator_value(sub, v, &x)
            .map_err(|_| CertificateError::DegenerateSampler)?;
        worst = worst.max(gen / val);
        used += 1;
    }
    if used == 0 {
        return Err(CertificateError::DegenerateSampler);
    }
    Ok(HypothesisCheck {
        samples: used,
        worst,
        margin: -worst,
        pass: worst < 0.0,
        skipped,
    })
}

/// Result of the attractivity check outside the inner region.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AttractivityCheck {
    pub samples: usize,
    /// Empirical margin δ = −max over samples of min_k generator value.
    pub margin: f64,
    pub pass: bool,
    /// Sampled states not covered by any strict-improvement region.
    pub coverage_violations: usize,
}

/// Empirical attractivity check for the quantum system: over states with
/// d0 ≥ l* − ε, the minimum of Tr(K F_k(ρ)) must be strictly negative.
pub fn verify_attractivity_quantum(
    sys: &crate::quantum::PreparedSystem,
    n: usize,
    seed: u64,
) -> Result<AttractivityCheck, CertificateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = sys.mode_spec(0).dim();
    let mut worst = f64::NEG_INFINITY;
    let mut coverage_violations = 0;
    let mut used = 0;
    for _ in 0..n {
        let Some(rho) = state_outside(sys.ds, dim, sys.params.inner_radius(), &mut rng) else {
            continue;
        };
        let verdicts = crate::quantum::region_verdicts(sys, rho.matrix());
        worst = worst.max(verdicts.min_value);
        if !verdicts.theta.iter().any(|&t| t) {
            coverage_violations += 1;
        }
        used += 1;
    }
    if used == 0 {
        return Err(CertificateError::DegenerateSampler);
    }
    Ok(AttractivityCheck {
        samples: used,
        margin: -worst,
        pass: worst < 0.0,
        coverage_violations,
    })
}

/// Classical attractivity check over |x| ∈ [l*−ε, sample_radius].
pub fn verify_attractivity_classical(
    sys: &crate::classical::ClassicalSwitchedSystem,
    sample_radius: f64,
    n: usize,
    seed: u64,
) -> Result<AttractivityCheck, CertificateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = sys.params.inner_radius();
    let mut worst = f64::NEG_INFINITY;
    let mut coverage_violations = 0;
    for _ in 0..n {
        let x = crate::sampler::annulus(sys.dim(), lo, sample_radius.max(lo * 2.0), &mut rng);
        let mut min_val = f64::INFINITY;
        for sub in &sys.subsystems {
            let av = crate::classical::generator_value(sub, sys.v.as_ref(), &x)
                .map_err(|_| CertificateError::DegenerateSampler)?;
            min_val = min_val.min(av);
        }
        worst = worst.max(min_val);
        if min_val >= 0.0 {
            coverage_violations += 1;
        }
    }
    Ok(AttractivityCheck {
        samples: n,
        margin: -worst,
        pass: worst < 0.0,
        coverage_violations,
    })
}

/// Empirical bracketing constants of the distance/linear-functional
/// inequality c1·Tr(Xρ) ≤ d0(ρ) ≤ c2·√Tr(Xρ).
pub fn estimate_distance_constants(
    x: &ExtensionOperator,
    dim: usize,
    n: usize,
    seed: u64,
) -> Result<(f64, f64), CertificateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = x.full();
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let mut used = 0;
    for i in 0..n {
        let rho = if i % 2 == 0 {
            haar_density(dim, &mut rng)
        } else {
            near_target_state(x.ds, dim, 0.5, &mut rng)
        };
        let w = (&full * rho.matrix()).trace_re();
        if w <= 1e-14 {
            continue;
        }
        let d0 = subspace_distance(rho.matrix(), x.ds)?;
        c1 = c1.min(d0 / w);
        c2 = c2.max(d0 / w.sqrt());
        used += 1;
    }
    if used == 0 {
        return Err(CertificateError::DegenerateSampler);
    }
    Ok((c1, c2))
}

/// Computed certificate scalars with verdicts, serialized into reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
pub struct CertificateReport {
    pub invariance_residuals: BTreeMap<String, f64>,
    /// λ̄ per subsystem, keyed "mode_<k>" (1-based).
    pub lbar: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_delta_bound: Option<f64>,
    #[serde(default)]
    pub psi_clamped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qnd_c_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qnd_a_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent_bound: Option<f64>,
    pub verdicts: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1_est: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2_est: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h2_delta_est: Option<f64>,
}
