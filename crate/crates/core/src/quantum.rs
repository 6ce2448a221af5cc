//! Switched jump-diffusion master-equation simulation.
//!
//! One mode evolves the filtered state by
//!
//! ```text
//! dρ = F(ρ)dt + G(ρ)dW + (J_D(ρ) − ρ) dN
//! ```
//!
//! with the counting process compensated: between detections the effective
//! drift is F(ρ) − v_D(ρ)(J_D(ρ) − ρ), and a detection fires with probability
//! 1 − exp(−v_D dt) per step (state-dependent thinning), replacing the state
//! by J_D(ρ). Every step ends with a positivity repair that hard-fails when
//! the violation indicates the step size is too coarse.
//!
//! The switching controller mirrors the hysteresis construction: an INNER
//! regime runs the designated stabilizing mode until the subspace distance
//! exceeds the outer radius l, and an OUTER regime runs the mode minimizing
//! Tr(K F_k(ρ)) until its strict-improvement region fails, with the inner
//! band re-entered below l* − ε.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimulationError;
use crate::lyapunov::StateFunctional;
use crate::matrix::{c64, ComplexMatrix};
use crate::operator::{
    adjoint_drift, diffusion, drift, jump_image, project_density, subspace_distance,
    DensityMatrix, QuantumSubsystemSpec, TOL_RATE,
};
use crate::sampler::{haar_density, normal};

/// Controller regime: inside the hysteresis band running the stabilizing
/// mode, or outside running the generator-minimizing mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Inner,
    Outer,
}

/// Hysteresis radii and switching parameters shared by σ1 and σ2.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct HysteresisParams {
    /// Outer exit radius l.
    pub l: f64,
    /// Declared l* = μ2⁻¹∘μ1(l).
    pub l_star: f64,
    /// Inner entry margin ε ∈ (0, l*).
    pub epsilon: f64,
    /// Strict-improvement ratio r ∈ (0, 1).
    pub r: f64,
    /// Stabilizing mode index (zero-based).
    pub j: usize,
}

impl HysteresisParams {
    pub fn validate(&self, m: usize) -> Result<(), SimulationError> {
        if !(self.l > 0.0 && self.l_star > 0.0 && self.l_star <= self.l) {
            return Err(SimulationError::BadParameter(format!(
                "radii must satisfy 0 < l* <= l, got l*={}, l={}",
                self.l_star, self.l
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.l_star) {
            return Err(SimulationError::BadParameter(format!(
                "epsilon must lie in (0, l*), got {}",
                self.epsilon
            )));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(SimulationError::BadParameter(format!(
                "r must lie in (0,1), got {}",
                self.r
            )));
        }
        if self.j >= m {
            return Err(SimulationError::BadParameter(format!(
                "stabilizing index {} out of range for {} modes",
                self.j + 1,
                m
            )));
        }
        Ok(())
    }

    /// Inner entry threshold l* − ε.
    pub fn inner_radius(&self) -> f64 {
        self.l_star - self.epsilon
    }
}

/// The switched quantum system: the modes, the linear functional operator K
/// (an extension supported on the R block), and the hysteresis parameters.
pub struct QuantumSwitchedSystem {
    pub subsystems: Vec<QuantumSubsystemSpec>,
    /// Full-space extension of K_R; zero S/P/Q blocks.
    pub k_op: ComplexMatrix,
    /// Target subspace dimension.
    pub ds: usize,
    pub params: HysteresisParams,
}

/// Per-mode precomputation for the hot loop.
struct PreparedMode {
    spec: QuantumSubsystemSpec,
    /// adjoint_drift(K): Tr(K F_k(ρ)) = Tr(prepared·ρ).
    k_pullback: ComplexMatrix,
}

/// Validated, precomputed system ready to simulate.
pub struct PreparedSystem {
    modes: Vec<PreparedMode>,
    pub k_op: ComplexMatrix,
    pub ds: usize,
    pub params: HysteresisParams,
    /// Upper bound on any mode's jump rate over states (clock bound).
    pub rate_bound: f64,
}

impl PreparedSystem {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_spec(&self, k: usize) -> &QuantumSubsystemSpec {
        &self.modes[k].spec
    }

    /// Tr(K F_k(ρ)) via the precomputed pullback.
    pub fn drift_functional(&self, k: usize, rho: &ComplexMatrix) -> f64 {
        (&self.modes[k].k_pullback * rho).trace_re()
    }
}

impl QuantumSwitchedSystem {
    pub fn prepare(&self) -> Result<PreparedSystem, SimulationError> {
        self.params.validate(self.subsystems.len())?;
        if self.subsystems.is_empty() {
            return Err(SimulationError::BadParameter("no subsystems".into()));
        }
        let dim = self.subsystems[0].dim();
        if self.ds == 0 || self.ds >= dim {
            return Err(SimulationError::BadParameter(format!(
                "ds={} out of range for dim={}",
                self.ds, dim
            )));
        }
        let mut modes = Vec::new();
        let mut rate_bound: f64 = 0.0;
        for spec in &self.subsystems {
            if spec.dim() != dim {
                return Err(SimulationError::BadParameter(
                    "subsystem dimensions disagree".into(),
                ));
            }
            let k_pullback = adjoint_drift(spec, &self.k_op)?;
            // Tr(DρD†) ≤ ‖D‖²_F on states.
            rate_bound = rate_bound.max(spec.dk.frobenius_norm().powi(2));
            modes.push(PreparedMode {
                k_pullback,
                spec: spec.clone(),
            });
        }
        Ok(PreparedSystem {
            modes,
            k_op: self.k_op.clone(),
            ds: self.ds,
            params: self.params,
            rate_bound,
        })
    }
}

/// Largest dt·sup(v_D) product allowed by the per-step thinning scheme.
pub const MAX_RATE_DT: f64 = 0.1;

/// Event annotations on a quantum trajectory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmeEvent {
    QuantumJump {
        t: f64,
        mode: usize,
        rate: f64,
    },
    Switch {
        t: f64,
        from_mode: usize,
        to_mode: usize,
        from_regime: Regime,
        to_regime: Regime,
        d0: f64,
    },
}

/// Sampled and annotated path of the switched master equation.
#[derive(Clone, Debug)]
pub struct QuantumTrajectory {
    /// Strided sample times.
    pub times: Vec<f64>,
    /// States at the strided sample times.
    pub states: Vec<ComplexMatrix>,
    /// Active mode at each sample.
    pub modes: Vec<usize>,
    /// Subspace distance at each sample.
    pub d0: Vec<f64>,
    /// Tr(Kρ) at each sample.
    pub tr_k: Vec<f64>,
    pub events: Vec<SmeEvent>,
    /// (time, new mode) entries; strictly increasing times.
    pub switch_log: Vec<(f64, usize)>,
    /// Final active mode.
    pub final_mode: usize,
    /// Largest subspace distance seen at any step (not just stored samples).
    pub max_d0: f64,
    /// Set when the minimizing-mode functional was nonnegative outside the
    /// inner band, i.e. the attractivity hypothesis failed at some state.
    pub coverage_violation: bool,
    /// Number of index-changing switches.
    pub switch_count: usize,
}

fn trace_k(prepared: &PreparedMode, rho: &ComplexMatrix) -> f64 {
    (&prepared.k_pullback * rho).trace_re()
}

/// min_k Tr(K F_k(ρ)) with the lowest-index argmin.
pub fn min_drift_functional(sys: &PreparedSystem, rho: &ComplexMatrix) -> (f64, usize) {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for (k, mode) in sys.modes.iter().enumerate() {
        let v = trace_k(mode, rho);
        if v < best {
            best = v;
            arg = k;
        }
    }
    (best, arg)
}

/// Region membership verdicts for the σ2 controller at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionVerdicts {
    pub d0: f64,
    /// d0 < l* − ε.
    pub inner_entry: bool,
    /// d0 ≥ l.
    pub inner_exit: bool,
    /// Per-mode Θ membership: Tr(K F_k(ρ)) < r·min and outside the inner set.
    pub theta: Vec<bool>,
    /// min_k Tr(K F_k(ρ)).
    pub min_value: f64,
    pub argmin: usize,
}

pub fn region_verdicts(sys: &PreparedSystem, rho: &ComplexMatrix) -> RegionVerdicts {
    let d0 = subspace_distance(rho, sys.ds).expect("dimension checked at prepare");
    let (min_value, argmin) = min_drift_functional(sys, rho);
    let outside = d0 >= sys.params.inner_radius();
    let theta = sys
        .modes
        .iter()
        .map(|m| outside && trace_k(m, rho) < sys.params.r * min_value)
        .collect();
    RegionVerdicts {
        d0,
        inner_entry: d0 < sys.params.inner_radius(),
        inner_exit: d0 >= sys.params.l,
        theta,
        min_value,
        argmin,
    }
}

/// One step of a single mode, with thinned detections.
///
/// Between detections the state advances by the positivity-preserving
/// factorization of the first-order step, driven by the measurement record
/// dy = Tr((C+C†)ρ)dt + ΔW:
///
/// ```text
/// M  = I − (iH + ½(L†L + C†C + D†D))·dt + C·dy,
/// ρ' = (M ρ M† + L ρ L† dt) / Tr(·).
/// ```
///
/// Expanding M ρ M† and the normalization reproduces the compensated drift
/// F(ρ) − v_D(ρ)(J_D(ρ) − ρ) plus the diffusion G(ρ)ΔW to first order, so
/// the scheme agrees with the plain Euler-Maruyama update in law at the
/// same order while keeping the state positive by construction; the repair
/// stage then only ever clips rounding dust. A raw Euler update would
/// violate positivity at O(dt·ξ²) whenever the state is nearly pure, far
/// beyond the 1e-7 repair threshold. Driving with the record rather than
/// the bare increment is what keeps the normalized mean unbiased.
///
/// Detections fire with probability 1 − exp(−v_D dt) per step and replace
/// the state by the normalized jump image.
pub fn sme_step(
    spec: &QuantumSubsystemSpec,
    rho: &ComplexMatrix,
    dt: f64,
    rate_bound: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(DensityMatrix, Option<f64>), SimulationError> {
    let xi = normal(rng);
    let u: f64 = rng.gen();
    let dim = rho.dim();

    let has_jumps = spec.dk.frobenius_norm() > 0.0;
    let (jump_img, rate) = if has_jumps {
        jump_image(&spec.dk, rho)
    } else {
        (ComplexMatrix::zeros(dim, dim), 0.0)
    };
    if rate > rate_bound + 1e-9 {
        return Err(SimulationError::RateAboveClockBound {
            rate,
            bound: rate_bound,
        });
    }

    if rate > TOL_RATE && u < 1.0 - (-rate * dt).exp() {
        let state = project_density(&jump_img.scale_re(1.0 / rate).hermitize())?;
        return Ok((state, Some(rate)));
    }

    // M = I − (iH + ½ ΣA†A) dt + C·dy
    let h = spec.hamiltonian();
    let mut decay = ComplexMatrix::zeros(dim, dim);
    for op in [&spec.lk, &spec.ck, &spec.dk] {
        decay = &decay + &(&op.adjoint() * op);
    }
    let mut m = &ComplexMatrix::identity(dim)
        - &(&h.scale(c64(0.0, 1.0)) + &decay.scale_re(0.5)).scale_re(dt);
    if spec.ck.frobenius_norm() > 0.0 {
        let record_mean = (&(&spec.ck + &spec.ck.adjoint()) * rho).trace_re();
        m = &m + &spec.ck.scale_re(record_mean * dt + dt.sqrt() * xi);
    }
    let mut next = &(&m * rho) * &m.adjoint();
    if spec.lk.frobenius_norm() > 0.0 {
        next = &next + &(&(&spec.lk * rho) * &spec.lk.adjoint()).scale_re(dt);
    }
    let tr = next.trace_re();
    if !(tr.is_finite() && tr > 0.0) || !next.is_finite() {
        return Err(SimulationError::NonFiniteState {
            t: f64::NAN,
            what: "state after factored step".into(),
        });
    }
    Ok((project_density(&next.scale_re(1.0 / tr).hermitize())?, None))
}


/// Simulate the σ2-controlled system from ρ0 over [0, T].
///
/// Samples are stored every `stride` steps (plus the initial and final
/// states); events and the switch log are exact.
pub fn simulate_switched(
    sys: &PreparedSystem,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
    stride: usize,
    rng: &mut ChaCha8Rng,
) -> Result<QuantumTrajectory, SimulationError> {
    if dt <= 0.0 || t_final <= dt {
        return Err(SimulationError::BadParameter("need 0 < dt < T".into()));
    }
    if sys.rate_bound * dt > MAX_RATE_DT {
        return Err(SimulationError::BadParameter(format!(
            "dt too large for jump thinning: sup v_D * dt = {:.3} > {MAX_RATE_DT}",
            sys.rate_bound * dt
        )));
    }
    let stride = stride.max(1);
    let n_steps = (t_final / dt).round() as usize;

    let mut rho = rho0.matrix().clone();
    let verdicts = region_verdicts(sys, &rho);
    let (mut regime, mut active) = if verdicts.inner_entry {
        (Regime::Inner, sys.params.j)
    } else {
        (Regime::Outer, verdicts.argmin)
    };
    let mut coverage_violation = verdicts.min_value >= 0.0 && !verdicts.inner_entry;

    let mut traj = QuantumTrajectory {
        times: Vec::with_capacity(n_steps / stride + 2),
        states: Vec::with_capacity(n_steps / stride + 2),
        modes: Vec::new(),
        d0: Vec::new(),
        tr_k: Vec::new(),
        events: Vec::new(),
        switch_log: vec![(0.0, active)],
        final_mode: active,
        max_d0: verdicts.d0,
        coverage_violation: false,
        switch_count: 0,
    };

    fn record(
        traj: &mut QuantumTrajectory,
        k_op: &ComplexMatrix,
        t: f64,
        rho: &ComplexMatrix,
        mode: usize,
        d0: f64,
    ) {
        traj.times.push(t);
        traj.states.push(rho.clone());
        traj.modes.push(mode);
        traj.d0.push(d0);
        traj.tr_k.push((k_op * rho).trace_re());
    }

    record(&mut traj, &sys.k_op, 0.0, &rho, active, verdicts.d0);

    for step in 1..=n_steps {
        let t = step as f64 * dt;
        let (next, jump) = sme_step(&sys.modes[active].spec, &rho, dt, sys.rate_bound, rng)
            .map_err(|e| match e {
                SimulationError::NonFiniteState { what, .. } => {
                    SimulationError::NonFiniteState { t, what }
                }
                other => other,
            })?;
        rho = next.into_matrix();
        if let Some(rate) = jump {
            traj.events.push(SmeEvent::QuantumJump {
                t,
                mode: active,
                rate,
            });
        }

        let verdicts = region_verdicts(sys, &rho);
        traj.max_d0 = traj.max_d0.max(verdicts.d0);

        let mut new_regime = regime;
        let mut new_active = active;
        match regime {
            Regime::Inner => {
                if verdicts.inner_exit {
                    new_regime = Regime::Outer;
                    new_active = verdicts.argmin;
                }
            }
            Regime::Outer => {
                if verdicts.inner_entry {
                    new_regime = Regime::Inner;
                    new_active = sys.params.j;
                } else if !verdicts.theta[active] {
                    // The active region failed; re-select the minimizer. A
                    // nonnegative minimum means no region covers this state.
                    new_active = verdicts.argmin;
                    if verdicts.min_value >= 0.0 {
                        coverage_violation = true;
                    }
                }
            }
        }
        if new_active != active || new_regime != regime {
            traj.events.push(SmeEvent::Switch {
                t,
                from_mode: active,
                to_mode: new_active,
                from_regime: regime,
                to_regime: new_regime,
                d0: verdicts.d0,
            });
            if new_active != active {
                traj.switch_log.push((t, new_active));
                traj.switch_count += 1;
            }
            active = new_active;
            regime = new_regime;
        }

        if step % stride == 0 || step == n_steps {
            record(&mut traj, &sys.k_op, t, &rho, active, verdicts.d0);
        }
    }

    traj.final_mode = active;
    traj.coverage_violation = coverage_violation;
    Ok(traj)
}

/// Deterministic mean-evolution oracle: classical RK4 on dρ/dt = F(ρ).
///
/// The martingale parts of the master equation vanish in expectation, so the
/// ensemble mean of fixed-mode trajectories must track this flow.
pub fn lindblad_mean_ode(
    spec: &QuantumSubsystemSpec,
    rho0: &DensityMatrix,
    t_final: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<ComplexMatrix>), SimulationError> {
    let n_steps = (t_final / dt).round() as usize;
    let mut rho = rho0.matrix().clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(rho.clone());
    for step in 1..=n_steps {
        let k1 = drift(spec, &rho)?;
        let k2 = drift(spec, &(&rho + &k1.scale_re(dt / 2.0)))?;
        let k3 = drift(spec, &(&rho + &k2.scale_re(dt / 2.0)))?;
        let k4 = drift(spec, &(&rho + &k3.scale_re(dt)))?;
        let incr = &(&(&k1 + &k4) + &(&k2 + &k3).scale_re(2.0)).scale_re(dt / 6.0) + &rho;
        rho = incr;
        let drift_tr = (rho.trace_re() - 1.0).abs();
        if drift_tr > 1e-10 {
            return Err(SimulationError::BadParameter(format!(
                "trace drift {drift_tr:.3e} in mean ODE"
            )));
        }
        times.push(step as f64 * dt);
        states.push(rho.clone());
    }
    Ok((times, states))
}

/// Infinitesimal generator of V along one mode:
/// Tr(∇V·F) + ½⟨G, ∇²V G⟩ + [V(J_D(ρ)) − V(ρ) − Tr(∇V·(J_D−ρ))]·v_D.
///
/// The jump bracket is omitted below the rate threshold, where the
/// normalized jump image is undefined.
pub fn generator_value(
    spec: &QuantumSubsystemSpec,
    v: &dyn StateFunctional,
    rho: &ComplexMatrix,
) -> Result<f64, SimulationError> {
    let f = drift(spec, rho)?;
    let mut out = v.dderiv(rho, &f);
    let g = diffusion(&spec.ck, rho)?;
    out += 0.5 * v.d2quad(rho, &g);
    let (jump_img, rate) = jump_image(&spec.dk, rho);
    if rate > TOL_RATE {
        let post = jump_img.scale_re(1.0 / rate);
        let h_dir = &post - rho;
        out += (v.value(&post) - v.value(rho) - v.dderiv(rho, &h_dir)) * rate;
    }
    Ok(out)
}

/// Report from the jump-direction check (Assumption on no-crossing jumps in
/// the quantum regions).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct JumpDirectionReport {
    pub samples: usize,
    /// ρ ∈ Θ_k but J_{D_k}(ρ) ∉ Θ_k.
    pub theta_violations: usize,
    /// ρ ∈ Λ_{l*−ε} but J_{D_j}(ρ) ∉ Λ_l.
    pub inner_violations: usize,
    pub pass: bool,
}

/// Sample states and count how often jumps cross the switching regions.
pub fn check_jump_direction(
    sys: &PreparedSystem,
    n: usize,
    seed: u64,
) -> Result<JumpDirectionReport, SimulationError> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = sys.modes[0].spec.dim();
    let mut theta_violations = 0;
    let mut inner_violations = 0;
    let mut used = 0;
    for _ in 0..n {
        let rho = haar_density(dim, &mut rng);
        let verdicts = region_verdicts(sys, rho.matrix());
        used += 1;
        for (k, mode) in sys.modes.iter().enumerate() {
            if mode.spec.dk.frobenius_norm() == 0.0 {
                continue;
            }
            let (img, rate) = jump_image(&mode.spec.dk, rho.matrix());
            if rate <= TOL_RATE {
                continue;
            }
            let post = img.scale_re(1.0 / rate).hermitize();
            if k == sys.params.j && verdicts.inner_entry {
                if subspace_distance(&post, sys.ds)? >= sys.params.l {
                    inner_violations += 1;
                }
            } else if verdicts.theta[k] {
                let post_verdicts = region_verdicts(sys, &post);
                if !post_verdicts.theta[k] {
                    theta_violations += 1;
                }
            }
        }
    }
    Ok(JumpDirectionReport {
        samples: used,
        theta_violations,
        inner_violations,
        pass: theta_violations == 0 && inner_violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::ExtensionOperator;
    use crate::lyapunov::{BlockSqrtFunctional, LinearFunctional, PowerTraceFunctional};

    use crate::operator::paulis;
    use rand::SeedableRng;

    fn qnd_qubit_mode() -> QuantumSubsystemSpec {
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.ck = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        spec.dk = ComplexMatrix::from_real_diag(&[1.0, 2.0]);
        spec
    }

    fn escape_mode() -> QuantumSubsystemSpec {
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.hk = paulis::sigma_x();
        spec
    }

    fn two_mode_system() -> QuantumSwitchedSystem {
        QuantumSwitchedSystem {
            subsystems: vec![escape_mode(), qnd_qubit_mode()],
            k_op: ExtensionOperator::projector_complement(1, 2).full(),
            ds: 1,
            params: HysteresisParams {
                l: 0.3,
                l_star: 0.3,
                epsilon: 0.1,
                r: 0.5,
                j: 1,
            },
        }
    }

    #[test]
    fn frozen_dynamics_fixed_point() {
        let spec = QuantumSubsystemSpec::zero(2);
        let rho = ComplexMatrix::from_real_diag(&[0.3, 0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (next, jump) = sme_step(&spec, &rho, 1e-3, 1.0, &mut rng).unwrap();
        assert!(jump.is_none());
        assert!((next.matrix() - &rho).frobenius_norm() < 1e-12);
    }

    #[test]
    fn jump_replaces_state_with_normalized_image() {
        // D = σ₋ on the excited state: rate 1, post-jump state is ground.
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.dk = paulis::sigma_minus();
        let rho = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let (img, rate) = crate::operator::jump_image(&spec.dk, &rho);
        assert!((rate - 1.0).abs() < 1e-14);
        let post = img.scale_re(1.0 / rate);
        assert!((&post - &ComplexMatrix::from_real_diag(&[1.0, 0.0])).frobenius_norm() < 1e-14);
        // Force a step where the thinning draw fires: rate*dt = 0.1 gives
        // firing probability ~0.095; scan seeds for one that fires.
        let mut fired = false;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (next, jump) = sme_step(&spec, &rho, 0.09, 1.0, &mut rng).unwrap();
            if jump.is_some() {
                fired = true;
                assert!(
                    (next.matrix() - &ComplexMatrix::from_real_diag(&[1.0, 0.0]))
                        .frobenius_norm()
                        < 1e-12
                );
                break;
            }
        }
        assert!(fired, "no jump fired over 200 seeds");
    }

    #[test]
    fn step_preserves_state_invariants() {
        let spec = qnd_qubit_mode();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rho = crate::sampler::haar_density(2, &mut rng).into_matrix();
        for _ in 0..2000 {
            let (next, _) = sme_step(&spec, &rho, 1e-3, 5.0, &mut rng).unwrap();
            rho = next.into_matrix();
        }
        assert!((rho.trace_re() - 1.0).abs() < 1e-9);
        assert!(crate::matrix::eigh(&rho).unwrap().min() >= -1e-9);
    }

    #[test]
    fn mean_ode_constant_under_zero_drift() {
        let spec = QuantumSubsystemSpec::zero(2);
        let rho0 = DensityMatrix::from_populations(&[0.4, 0.6]).unwrap();
        let (_, states) = lindblad_mean_ode(&spec, &rho0, 1.0, 1e-2).unwrap();
        assert!((states.last().unwrap() - rho0.matrix()).frobenius_norm() < 1e-14);
    }

    #[test]
    fn mean_ode_coherence_rotation() {
        // H = σz/2: the coherence phase advances at unit frequency.
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.h0 = paulis::sigma_z().scale_re(0.5);
        let rho0 = DensityMatrix::new(
            ComplexMatrix::from_rows(&[
                vec![c64(0.5, 0.0), c64(0.5, 0.0)],
                vec![c64(0.5, 0.0), c64(0.5, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let t = 1.3;
        let (times, states) = lindblad_mean_ode(&spec, &rho0, t, 1e-3).unwrap();
        let last = states.last().unwrap();
        let expected = c64(0.5 * t.cos(), -0.5 * t.sin());
        assert!((times.last().unwrap() - t).abs() < 1e-12);
        assert!(
            (last.at(0, 1) - expected).norm() < 1e-9,
            "coherence {:?} vs {:?}",
            last.at(0, 1),
            expected
        );
    }

    #[test]
    fn mean_ode_spontaneous_decay() {
        // D = σ₋: excited population decays as e^{−t}.
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.dk = paulis::sigma_minus();
        let rho0 = DensityMatrix::from_populations(&[0.0, 1.0]).unwrap();
        let (_, states) = lindblad_mean_ode(&spec, &rho0, 2.0, 1e-3).unwrap();
        let p_excited = states.last().unwrap().at(1, 1).re;
        assert!((p_excited - (-2.0_f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn generator_power_trace_matches_closed_form() {
        // V = Tr(Xρ)^δ: the generator must equal the chain-rule display
        // V·[δ·TrXF/w − δ(1−δ)/2·(TrXG/w)² + ((TrXJ/w)^δ − (1−δ) − δTrXJ/w)·v].
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut spec = QuantumSubsystemSpec::zero(3);
            spec.h0 = crate::sampler::random_hermitian(3, &mut rng);
            spec.lk = crate::sampler::random_operator(3, &mut rng);
            spec.ck = crate::sampler::random_operator(3, &mut rng);
            spec.dk = crate::sampler::random_operator(3, &mut rng);
            let x = ExtensionOperator::new(
                crate::sampler::random_positive_definite(2, &mut rng),
                1,
            )
            .unwrap()
            .full();
            let delta = 0.3 + 0.4 * (rand::Rng::gen::<f64>(&mut rng));
            let rho = crate::sampler::haar_density(3, &mut rng);
            let v = PowerTraceFunctional { x: x.clone(), delta };
            let gen = generator_value(&spec, &v, rho.matrix()).unwrap();

            let w = (&x * rho.matrix()).trace_re();
            let f = crate::operator::drift(&spec, rho.matrix()).unwrap();
            let g = crate::operator::diffusion(&spec.ck, rho.matrix()).unwrap();
            let (img, rate) = crate::operator::jump_image(&spec.dk, rho.matrix());
            let mut expected = delta * (&x * &f).trace_re() / w
                - 0.5 * delta * (1.0 - delta) * ((&x * &g).trace_re() / w).powi(2);
            if rate > crate::operator::TOL_RATE {
                let ratio = (&x * &img).trace_re() / rate / w;
                expected += (ratio.powf(delta) - (1.0 - delta) - delta * ratio) * rate;
            }
            expected *= w.powf(delta);
            assert!(
                (gen - expected).abs() < 1e-10 * (1.0 + expected.abs()),
                "{gen} vs {expected}"
            );
        }
    }

    #[test]
    fn generator_qnd_sqrt_matches_closed_form() {
        // V = Σ_{i≥1} √p_i on a QND mode:
        // A V = −½ Σ √p_i [(Re c_i − ReTr(Cρ))² + (|a_i| − √v_D)²].
        let spec = qnd_qubit_mode();
        let proj1 = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let v = BlockSqrtFunctional {
            projections: vec![proj1.clone()],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let rho = crate::sampler::haar_density(2, &mut rng);
            let gen = generator_value(&spec, &v, rho.matrix()).unwrap();
            let p1 = (&proj1 * rho.matrix()).trace_re();
            let m_c = (&spec.ck * rho.matrix()).trace_re(); // Re Tr(Cρ), C real diag
            let v_d = crate::operator::jump_rate(&spec.dk, rho.matrix());
            let expected =
                -0.5 * p1.sqrt() * ((1.0 - m_c).powi(2) + (2.0 - v_d.sqrt()).powi(2));
            assert!(
                (gen - expected).abs() < 1e-8,
                "QND generator {gen} vs closed form {expected}"
            );
        }
    }

    #[test]
    fn generator_linear_is_drift_trace() {
        let spec = qnd_qubit_mode();
        let k = ExtensionOperator::projector_complement(1, 2).full();
        let v = LinearFunctional { k: k.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let rho = crate::sampler::haar_density(2, &mut rng);
            let gen = generator_value(&spec, &v, rho.matrix()).unwrap();
            let direct = (&k * &crate::operator::drift(&spec, rho.matrix()).unwrap()).trace_re();
            assert!((gen - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn region_verdicts_structure() {
        let sys = two_mode_system().prepare().unwrap();
        // Target-supported state: inner entry.
        let rho = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        let verdicts = region_verdicts(&sys, &rho);
        assert!(verdicts.inner_entry);
        assert!(!verdicts.inner_exit);
        // Excited state: outside, both functionals vanish there, so no
        // strict-improvement region contains it.
        let rho = ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        let verdicts = region_verdicts(&sys, &rho);
        assert!(verdicts.inner_exit);
        assert_eq!(verdicts.argmin, 0);
        assert!(!verdicts.theta[0] && !verdicts.theta[1]);
        // A state with negative mode-1 functional lies in Θ_1.
        let rho = ComplexMatrix::from_rows(&[
            vec![c64(0.5, 0.0), c64(0.0, -0.25)],
            vec![c64(0.0, 0.25), c64(0.5, 0.0)],
        ])
        .unwrap();
        let v1 = sys.drift_functional(0, &rho);
        assert!(v1 < 0.0);
        let verdicts = region_verdicts(&sys, &rho);
        assert!(verdicts.theta[0]);
    }

    #[test]
    fn drift_functional_matches_direct_trace() {
        let sys = two_mode_system().prepare().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let rho = crate::sampler::haar_density(2, &mut rng);
            for k in 0..2 {
                let fast = sys.drift_functional(k, rho.matrix());
                let f = crate::operator::drift(sys.mode_spec(k), rho.matrix()).unwrap();
                let direct = (&sys.k_op * &f).trace_re();
                assert!((fast - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invariant_mode_keeps_target_supported_states() {
        // Block-diagonal mode from a target-supported start: d0 stays at
        // rounding level over the whole horizon.
        let sys = QuantumSwitchedSystem {
            subsystems: vec![qnd_qubit_mode()],
            k_op: ExtensionOperator::projector_complement(1, 2).full(),
            ds: 1,
            params: HysteresisParams {
                l: 0.3,
                l_star: 0.3,
                epsilon: 0.1,
                r: 0.5,
                j: 0,
            },
        };
        let prepared = sys.prepare().unwrap();
        let rho0 = DensityMatrix::from_populations(&[1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let traj = simulate_switched(&prepared, &rho0, 2.0, 1e-3, 10, &mut rng).unwrap();
        assert!(traj.max_d0 <= 1e-9, "max d0 = {}", traj.max_d0);
        assert_eq!(traj.switch_count, 0);
    }

    #[test]
    fn single_mode_never_switches() {
        let sys = QuantumSwitchedSystem {
            subsystems: vec![qnd_qubit_mode()],
            k_op: ExtensionOperator::projector_complement(1, 2).full(),
            ds: 1,
            params: HysteresisParams {
                l: 0.3,
                l_star: 0.3,
                epsilon: 0.1,
                r: 0.5,
                j: 0,
            },
        };
        let prepared = sys.prepare().unwrap();
        let rho0 = DensityMatrix::from_populations(&[0.5, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let traj = simulate_switched(&prepared, &rho0, 2.0, 1e-3, 10, &mut rng).unwrap();
        assert_eq!(traj.switch_count, 0);
        assert_eq!(traj.final_mode, 0);
        // Exactly one active mode per sample, by representation.
        assert!(traj.modes.iter().all(|&m| m == 0));
    }

    #[test]
    fn dt_validation_against_rate_bound() {
        let sys = two_mode_system().prepare().unwrap();
        let rho0 = DensityMatrix::from_populations(&[0.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        // rate bound is ‖D‖²_F = 5, so dt = 0.05 exceeds the 0.1 product cap.
        let err = simulate_switched(&sys, &rho0, 1.0, 0.05, 1, &mut rng);
        assert!(matches!(err, Err(SimulationError::BadParameter(_))));
    }

    #[test]
    fn jump_direction_identity_always_passes() {
        let mut m1 = QuantumSubsystemSpec::zero(2);
        m1.dk = ComplexMatrix::identity(2);
        let sys = QuantumSwitchedSystem {
            subsystems: vec![m1],
            k_op: ExtensionOperator::projector_complement(1, 2).full(),
            ds: 1,
            params: HysteresisParams {
                l: 0.3,
                l_star: 0.3,
                epsilon: 0.1,
                r: 0.5,
                j: 0,
            },
        };
        let prepared = sys.prepare().unwrap();
        let rep = check_jump_direction(&prepared, 500, 31).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn jump_direction_adversarial_fails() {
        // Mode j's jump maps inner states to the excited projector, clear
        // across the outer radius.
        let mut m1 = QuantumSubsystemSpec::zero(2);
        m1.dk = ComplexMatrix::from_rows(&[
            vec![c64(0.0, 0.0), c64(0.0, 0.0)],
            vec![c64(1.0, 0.0), c64(0.0, 0.0)],
        ])
        .unwrap();
        // This D has a nonzero Q block, so it cannot be the invariant mode;
        // the check still counts the inner-region violations it causes.
        let sys = QuantumSwitchedSystem {
            subsystems: vec![m1],
            k_op: ExtensionOperator::projector_complement(1, 2).full(),
            ds: 1,
            params: HysteresisParams {
                l: 0.3,
                l_star: 0.3,
                epsilon: 0.1,
                r: 0.5,
                j: 0,
            },
        };
        let prepared = sys.prepare().unwrap();
        let rep = check_jump_direction(&prepared, 500, 37).unwrap();
        assert!(!rep.pass);
        assert!(rep.inner_violations > 0);
    }
}
