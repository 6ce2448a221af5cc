//! Classical switched jump-diffusion simulation.
//!
//! Each mode is
//!
//! ```text
//! dX = f(X)dt + g(X)dW + ∫_{|z|≤c} h(X,z) Ñ(dt,dz)
//! ```
//!
//! driven by one Wiener channel and a compensated Poisson random measure
//! with Lebesgue mark intensity on [−c, c]. Simulation uses the raw measure:
//! jumps arrive on a homogeneous rate-2c clock with uniform marks, and the
//! compensator ∫ h(x,z)dz is folded into the drift. Coordinates are
//! translated so the target sits at the origin.
//!
//! The switching controller is the same two-regime hysteresis construction
//! as the quantum side, with regions built from the generator values A_k V.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimulationError;
use crate::lyapunov::LyapunovFunction;
use crate::quad::gl64;
use crate::quantum::{HysteresisParams, Regime};
use crate::sampler::normal;

/// State-to-vector map (drift or diffusion coefficient).
pub type StateMap = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Jump kernel: (state, mark) to state increment.
pub type JumpKernel = Box<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// One switched mode: drift, scalar-channel diffusion, jump kernel, and the
/// mark bound c (marks are Lebesgue-distributed on [−c, c]).
pub struct ClassicalSubsystem {
    pub drift: StateMap,
    pub diffusion: StateMap,
    pub jump: JumpKernel,
    pub mark_bound: f64,
    /// False skips the jump clock and the compensator entirely.
    pub has_jumps: bool,
}

impl ClassicalSubsystem {
    /// Scalar linear mode dx = a·x dt + b·x dW + ∫ γ·x·z Ñ(dt,dz).
    pub fn linear1d(a: f64, b: f64, gamma: f64, c: f64) -> Self {
        Self {
            drift: Box::new(move |x| vec![a * x[0]]),
            diffusion: Box::new(move |x| vec![b * x[0]]),
            jump: Box::new(move |x, z| vec![gamma * x[0] * z]),
            mark_bound: c,
            has_jumps: gamma != 0.0,
        }
    }

    /// Planar bistable mode: drift −a(|x|²−1)x (ring attractor at |x|=1),
    /// multiplicative noise b·x, and jump kernel γ·x·z.
    pub fn doublewell2d(a: f64, b: f64, gamma: f64, c: f64) -> Self {
        Self {
            drift: Box::new(move |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                vec![-a * (r2 - 1.0) * x[0], -a * (r2 - 1.0) * x[1]]
            }),
            diffusion: Box::new(move |x| vec![b * x[0], b * x[1]]),
            jump: Box::new(move |x, z| vec![gamma * x[0] * z, gamma * x[1] * z]),
            mark_bound: c,
            has_jumps: gamma != 0.0,
        }
    }

    /// Linear contraction toward the origin in any dimension.
    pub fn linear_contraction(a: f64, b: f64) -> Self {
        Self {
            drift: Box::new(move |x| x.iter().map(|v| a * v).collect()),
            diffusion: Box::new(move |x| x.iter().map(|v| b * v).collect()),
            jump: Box::new(move |x, _z| vec![0.0; x.len()]),
            mark_bound: 1.0,
            has_jumps: false,
        }
    }

    /// Compensator ∫_{|z|≤c} h(x,z) dz by Gauss-Legendre.
    pub fn jump_compensator(&self, x: &[f64]) -> Vec<f64> {
        if !self.has_jumps {
            return vec![0.0; x.len()];
        }
        let gl = gl64();
        let c = self.mark_bound;
        let mut acc = vec![0.0; x.len()];
        for (&node, &w) in gl.nodes.iter().zip(&gl.weights) {
            let z = node * c;
            let h = (self.jump)(x, z);
            for (a, hv) in acc.iter_mut().zip(h) {
                *a += w * c * hv;
            }
        }
        acc
    }
}

/// The switched classical system with its Lyapunov handle and hysteresis
/// parameters. `target` is subtracted from every state internally, so the
/// region logic always runs in origin-centered coordinates.
pub struct ClassicalSwitchedSystem {
    pub subsystems: Vec<ClassicalSubsystem>,
    pub v: Box<dyn LyapunovFunction>,
    pub target: Vec<f64>,
    pub params: HysteresisParams,
}

impl ClassicalSwitchedSystem {
    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        self.params.validate(self.subsystems.len())
    }
}

/// Infinitesimal generator value A V(x) for one mode:
/// ∇V·f + ½ gᵀ∇²V g + ∫_{|z|≤c} [V(x+h(x,z)) − V(x) − ∇V·h(x,z)] dz.
///
/// The jump integral uses the shared 64-node Gauss-Legendre rule; the
/// integrand is smooth at desk dimensions.
pub fn generator_value(
    sub: &ClassicalSubsystem,
    v: &dyn LyapunovFunction,
    x: &[f64],
) -> Result<f64, SimulationError> {
    let f = (sub.drift)(x);
    let g = (sub.diffusion)(x);
    let mut out = v.dderiv(x, &f) + 0.5 * v.d2quad(x, &g);
    if sub.has_jumps {
        let gl = gl64();
        let c = sub.mark_bound;
        let vx = v.value(x);
        for (&node, &w) in gl.nodes.iter().zip(&gl.weights) {
            let z = node * c;
            let h = (sub.jump)(x, z);
            let shifted: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
            let vs = v.value(&shifted);
            if !vs.is_finite() {
                return Err(SimulationError::NonFiniteState {
                    t: f64::NAN,
                    what: "V non-finite in jump integral".into(),
                });
            }
            out += w * c * (vs - vx - v.dderiv(x, &h));
        }
    }
    if !out.is_finite() {
        return Err(SimulationError::NonFiniteState {
            t: f64::NAN,
            what: "generator value non-finite".into(),
        });
    }
    Ok(out)
}

/// Outcome of the mode-selection rule outside the inner set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub min_value: f64,
    /// True when no generator value was negative: the attractivity
    /// hypothesis fails at this state.
    pub coverage_violation: bool,
}

/// σ1 selection at a state (origin-centered): the stabilizing mode inside
/// Λ_{l*−ε}, otherwise the lowest-index minimizer of A_k V.
pub fn select_mode(
    sys: &ClassicalSwitchedSystem,
    x: &[f64],
) -> Result<Selection, SimulationError> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < sys.params.inner_radius() {
        return Ok(Selection {
            index: sys.params.j,
            min_value: f64::NAN,
            coverage_violation: false,
        });
    }
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for (k, sub) in sys.subsystems.iter().enumerate() {
        let av = generator_value(sub, sys.v.as_ref(), x)?;
        if av < best {
            best = av;
            arg = k;
        }
    }
    Ok(Selection {
        index: arg,
        min_value: best,
        coverage_violation: best >= 0.0,
    })
}

/// Events on a classical trajectory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalEvent {
    Jump {
        t: f64,
        mode: usize,
        mark: f64,
    },
    Switch {
        t: f64,
        from_mode: usize,
        to_mode: usize,
        from_regime: Regime,
        to_regime: Regime,
        dist: f64,
    },
}

/// Sampled and annotated path of the switched SDE (origin-centered states).
#[derive(Clone, Debug)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub modes: Vec<usize>,
    pub v_values: Vec<f64>,
    /// |x − x̄| at each sample.
    pub dist: Vec<f64>,
    pub events: Vec<ClassicalEvent>,
    pub switch_log: Vec<(f64, usize)>,
    pub final_mode: usize,
    pub max_dist: f64,
    pub coverage_violation: bool,
    pub switch_count: usize,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn poisson(lambda: f64, rng: &mut impl Rng) -> usize {
    // Knuth inversion; fine for the small per-step intensities used here.
    let limit = (-lambda).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

/// One Euler-Maruyama step of a single mode with raw-measure jumps.
///
/// The compensator of active jumps is subtracted from the drift; jump
/// counts follow the rate-2c clock with Uniform[−c, c] marks. Returns the
/// new state and the marks that fired.
pub fn step_jump_diffusion(
    sub: &ClassicalSubsystem,
    x: &[f64],
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>), SimulationError> {
    let xi = normal(rng);
    let f = (sub.drift)(x);
    let g = (sub.diffusion)(x);
    let comp = sub.jump_compensator(x);
    let sqdt = dt.sqrt();
    let mut next: Vec<f64> = x
        .iter()
        .zip(f.iter().zip(comp.iter().zip(&g)))
        .map(|(xv, (fv, (cv, gv)))| xv + (fv - cv) * dt + gv * sqdt * xi)
        .collect();
    let mut marks = Vec::new();
    if sub.has_jumps {
        let n_jumps = poisson(2.0 * sub.mark_bound * dt, rng);
        for _ in 0..n_jumps {
            let z = rng.gen_range(-sub.mark_bound..sub.mark_bound);
            let h = (sub.jump)(&next, z);
            for (v, hv) in next.iter_mut().zip(h) {
                *v += hv;
            }
            marks.push(z);
        }
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(SimulationError::NonFiniteState {
            t: f64::NAN,
            what: "state after jump-diffusion step".into(),
        });
    }
    Ok((next, marks))
}

/// Simulate the σ1-controlled system from x0 over [0, T].
pub fn simulate_switched(
    sys: &ClassicalSwitchedSystem,
    x0: &[f64],
    t_final: f64,
    dt: f64,
    stride: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ClassicalTrajectory, SimulationError> {
    sys.validate()?;
    if dt <= 0.0 || t_final <= dt {
        return Err(SimulationError::BadParameter("need 0 < dt < T".into()));
    }
    let stride = stride.max(1);
    let n_steps = (t_final / dt).round() as usize;

    // Internal coordinates: y = x − x̄.
    let mut y: Vec<f64> = x0.iter().zip(&sys.target).map(|(a, b)| a - b).collect();
    let sel = select_mode(sys, &y)?;
    let d = norm(&y);
    let (mut regime, mut active) = if d < sys.params.inner_radius() {
        (Regime::Inner, sys.params.j)
    } else {
        (Regime::Outer, sel.index)
    };
    let mut coverage_violation = regime == Regime::Outer && sel.coverage_violation;

    let mut traj = ClassicalTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        modes: Vec::new(),
        v_values: Vec::new(),
        dist: Vec::new(),
        events: Vec::new(),
        switch_log: vec![(0.0, active)],
        final_mode: active,
        max_dist: d,
        coverage_violation: false,
        switch_count: 0,
    };

    fn record(
        traj: &mut ClassicalTrajectory,
        sys: &ClassicalSwitchedSystem,
        t: f64,
        y: &[f64],
        mode: usize,
        d: f64,
    ) {
        traj.times.push(t);
        traj.states.push(y.to_vec());
        traj.modes.push(mode);
        traj.v_values.push(sys.v.value(y));
        traj.dist.push(d);
    }
    record(&mut traj, sys, 0.0, &y, active, d);

    for step in 1..=n_steps {
        let t = step as f64 * dt;
        let (next, marks) = step_jump_diffusion(&sys.subsystems[active], &y, dt, rng)
            .map_err(|e| match e {
                SimulationError::NonFiniteState { what, .. } => {
                    SimulationError::NonFiniteState { t, what }
                }
                other => other,
            })?;
        y = next;
        for mark in marks {
            traj.events.push(ClassicalEvent::Jump {
                t,
                mode: active,
                mark,
            });
        }

        let d = norm(&y);
        traj.max_dist = traj.max_dist.max(d);

        let mut new_regime = regime;
        let mut new_active = active;
        match regime {
            Regime::Inner => {
                if d >= sys.params.l {
                    new_regime = Regime::Outer;
                    let sel = select_mode(sys, &y)?;
                    new_active = sel.index;
                    coverage_violation |= sel.coverage_violation;
                }
            }
            Regime::Outer => {
                if d < sys.params.inner_radius() {
                    new_regime = Regime::Inner;
                    new_active = sys.params.j;
                } else if sys.subsystems.len() > 1 {
                    // Still outside: check the active strict-improvement
                    // region A_p V < r·min_k A_k V. With a single mode a
                    // re-selection can never change anything, so skip.
                    let mut min_val = f64::INFINITY;
                    let mut arg = 0;
                    let mut active_val = f64::INFINITY;
                    for (k, sub) in sys.subsystems.iter().enumerate() {
                        let av = generator_value(sub, sys.v.as_ref(), &y)?;
                        if av < min_val {
                            min_val = av;
                            arg = k;
                        }
                        if k == active {
                            active_val = av;
                        }
                    }
                    if !(active_val < sys.params.r * min_val) {
                        new_active = arg;
                        if min_val >= 0.0 {
                            coverage_violation = true;
                        }
                    }
                }
            }
        }
        if new_active != active || new_regime != regime {
            traj.events.push(ClassicalEvent::Switch {
                t,
                from_mode: active,
                to_mode: new_active,
                from_regime: regime,
                to_regime: new_regime,
                dist: d,
            });
            if new_active != active {
                traj.switch_log.push((t, new_active));
                traj.switch_count += 1;
            }
            active = new_active;
            regime = new_regime;
        }

        if step % stride == 0 || step == n_steps {
            record(&mut traj, sys, t, &y, active, d);
        }
    }

    traj.final_mode = active;
    traj.coverage_violation = coverage_violation;
    Ok(traj)
}

/// Exact sample Lyapunov exponent of the scalar linear mode:
/// a − b²/2 + ∫_{−c}^{c} (ln(1+γz) − γz) dz, by quadrature.
///
/// Requires 1 + γz > 0 on the mark interval.
pub fn linear1d_exact_exponent(
    a: f64,
    b: f64,
    gamma: f64,
    c: f64,
) -> Result<f64, SimulationError> {
    if gamma.abs() * c >= 1.0 {
        return Err(SimulationError::BadParameter(format!(
            "log(1+gamma z) undefined on marks: |gamma|*c = {}",
            gamma.abs() * c
        )));
    }
    let mut out = a - b * b / 2.0;
    if gamma != 0.0 {
        out += gl64().integrate(-c, c, |z| (1.0 + gamma * z).ln() - gamma * z);
    }
    Ok(out)
}

/// Membership-region handle for the partition checks: a containment
/// predicate plus a distance to the boundary.
pub struct Region {
    pub contains: StatePredicate,
    pub boundary_dist: StateToScalar,
}

/// State-membership predicate used by region handles.
pub type StatePredicate = Box<dyn Fn(&[f64]) -> bool + Send + Sync>;
/// State-to-scalar map used by region handles.
pub type StateToScalar = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

impl Region {
    /// Annulus r_lo < |x| < r_hi (pass r_lo = 0 for a ball).
    pub fn annulus(r_lo: f64, r_hi: f64) -> Self {
        Self {
            contains: Box::new(move |x| {
                let n = norm(x);
                n > r_lo && n < r_hi
            }),
            boundary_dist: Box::new(move |x| {
                let n = norm(x);
                (n - r_lo).min(r_hi - n).max(0.0)
            }),
        }
    }
}

/// Violation counts from the partition / jump-direction assumptions.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PartitionReport {
    pub samples: usize,
    /// Exact-invariance failures: x + h(x,z) left the region for some mark.
    pub invariance_violations: usize,
    /// Metric-test failures: dist(x, ∂Θ) ≤ sup_z |h(x,z)|.
    pub metric_violations: usize,
    /// Non-attainability failures: |x + h(x,z)| < δ|x| for some mark.
    pub nonattain_violations: usize,
    pub pass: bool,
}

/// Sample the region and check both forms of the no-crossing-jumps
/// assumption, plus the non-attainability margin |x+h(x,z)| ≥ δ|x|.
/// Marks are scanned on a uniform 64-point grid.
pub fn check_partition_assumption(
    sub: &ClassicalSubsystem,
    region: &Region,
    nonattain_delta: f64,
    sampler: impl Fn(&mut ChaCha8Rng) -> Vec<f64>,
    n: usize,
    seed: u64,
) -> PartitionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = sub.mark_bound;
    let marks: Vec<f64> = (0..64).map(|i| -c + 2.0 * c * (i as f64 + 0.5) / 64.0).collect();
    let mut invariance_violations = 0;
    let mut metric_violations = 0;
    let mut nonattain_violations = 0;
    for _ in 0..n {
        let x = sampler(&mut rng);
        let mut sup_h: f64 = 0.0;
        let mut crossed = false;
        let mut attain = false;
        for &z in &marks {
            let h = (sub.jump)(&x, z);
            let hn = norm(&h);
            sup_h = sup_h.max(hn);
            let shifted: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
            if !(region.contains)(&shifted) {
                crossed = true;
            }
            if norm(&shifted) < nonattain_delta * norm(&x) {
                attain = true;
            }
        }
        if crossed {
            invariance_violations += 1;
        }
        if (region.boundary_dist)(&x) <= sup_h {
            metric_violations += 1;
        }
        if attain {
            nonattain_violations += 1;
        }
    }
    PartitionReport {
        samples: n,
        invariance_violations,
        metric_violations,
        nonattain_violations,
        pass: invariance_violations == 0 && nonattain_violations == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::SquaredNorm;

    fn two_mode_linear() -> ClassicalSwitchedSystem {
        ClassicalSwitchedSystem {
            subsystems: vec![
                ClassicalSubsystem::linear1d(-0.5, 0.0, 0.0, 1.0),
                ClassicalSubsystem::linear1d(-1.0, 0.0, 0.0, 1.0),
            ],
            v: Box::new(SquaredNorm),
            target: vec![0.0],
            params: HysteresisParams {
                l: 1.0,
                l_star: 1.0,
                epsilon: 0.5,
                r: 0.5,
                j: 1,
            },
        }
    }

    #[test]
    fn generator_zero_dynamics() {
        let sub = ClassicalSubsystem::linear1d(0.0, 0.0, 0.0, 1.0);
        let v = SquaredNorm;
        assert_eq!(generator_value(&sub, &v, &[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn generator_linear_ito_formula() {
        // V = x² on dx = ax dt + bx dW: A V = (2a + b²)x².
        let (a, b) = (-1.0, 0.5);
        let sub = ClassicalSubsystem::linear1d(a, b, 0.0, 1.0);
        let v = SquaredNorm;
        for &x in &[0.3, -1.2, 2.0] {
            let got = generator_value(&sub, &v, &[x]).unwrap();
            let expected = (2.0 * a + b * b) * x * x;
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        }
    }

    #[test]
    fn generator_jump_integral_analytic() {
        // h = γxz on |z| ≤ 1 adds γ²x²∫z²dz = 2γ²x²/3 to A(x²).
        let (a, b, gamma) = (-1.0, 0.5, 0.3);
        let sub = ClassicalSubsystem::linear1d(a, b, gamma, 1.0);
        let v = SquaredNorm;
        let x = 1.7;
        let got = generator_value(&sub, &v, &[x]).unwrap();
        let expected = (2.0 * a + b * b + 2.0 * gamma * gamma / 3.0) * x * x;
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }

    #[test]
    fn selection_rules() {
        let sys = two_mode_linear();
        // Inside the inner set: the stabilizing index, regardless of values.
        let sel = select_mode(&sys, &[0.1]).unwrap();
        assert_eq!(sel.index, 1);
        // Outside: mode 2 has A₂V = −2x² < A₁V = −x²; pick it.
        let sel = select_mode(&sys, &[2.0]).unwrap();
        assert_eq!(sel.index, 1);
        assert!(!sel.coverage_violation);
        // Exact tie goes to the lowest index.
        let sys_tie = ClassicalSwitchedSystem {
            subsystems: vec![
                ClassicalSubsystem::linear1d(-1.0, 0.0, 0.0, 1.0),
                ClassicalSubsystem::linear1d(-1.0, 0.0, 0.0, 1.0),
            ],
            ..two_mode_linear()
        };
        let sel = select_mode(&sys_tie, &[2.0]).unwrap();
        assert_eq!(sel.index, 0);
    }

    #[test]
    fn selection_steeper_mode_wins() {
        let sys = ClassicalSwitchedSystem {
            subsystems: vec![
                ClassicalSubsystem::linear1d(-0.5, 0.0, 0.0, 1.0),
                ClassicalSubsystem::linear1d(-1.0, 0.0, 0.0, 1.0),
            ],
            v: Box::new(SquaredNorm),
            target: vec![0.0],
            params: HysteresisParams {
                l: 1.0,
                l_star: 1.0,
                epsilon: 0.5,
                r: 0.5,
                j: 0,
            },
        };
        // A₁V = −x², A₂V = −2x² at large |x|: argmin is mode 2 (index 1).
        let sel = select_mode(&sys, &[3.0]).unwrap();
        assert_eq!(sel.index, 1);
    }

    #[test]
    fn step_frozen_and_forced_euler() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sub = ClassicalSubsystem::linear1d(0.0, 0.0, 0.0, 1.0);
        let (next, marks) = step_jump_diffusion(&sub, &[0.4], 0.1, &mut rng).unwrap();
        assert_eq!(next, vec![0.4]);
        assert!(marks.is_empty());
        // dx = −x dt from x=1 with dt=0.1: forced Euler step to 0.9.
        let sub = ClassicalSubsystem::linear1d(-1.0, 0.0, 0.0, 1.0);
        let (next, _) = step_jump_diffusion(&sub, &[1.0], 0.1, &mut rng).unwrap();
        assert!((next[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn deterministic_reduction_matches_ode() {
        // b = γ = 0: the path must track the exact flow e^{at} within O(dt).
        let a = -1.0;
        let sub = ClassicalSubsystem::linear1d(a, 0.0, 0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &dt in &[1e-2, 1e-3] {
            let mut x = vec![1.0];
            let steps = (2.0 / dt) as usize;
            for _ in 0..steps {
                x = step_jump_diffusion(&sub, &x, dt, &mut rng).unwrap().0;
            }
            let exact = (-2.0_f64).exp();
            let err = (x[0] - exact).abs();
            assert!(err <= 2.0 * dt, "global error {err} at dt={dt}");
        }
    }

    #[test]
    fn single_mode_stable_system_decays_without_switching() {
        let sys = ClassicalSwitchedSystem {
            subsystems: vec![ClassicalSubsystem::linear1d(-1.0, 0.2, 0.0, 1.0)],
            v: Box::new(SquaredNorm),
            target: vec![0.0],
            params: HysteresisParams {
                l: 1.0,
                l_star: 1.0,
                epsilon: 0.5,
                r: 0.5,
                j: 0,
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = simulate_switched(&sys, &[2.0], 10.0, 1e-3, 10, &mut rng).unwrap();
        assert_eq!(traj.switch_count, 0);
        assert!(traj.dist.last().unwrap() < &0.1);
        assert!(traj.modes.iter().all(|&m| m == 0));
    }

    #[test]
    fn two_mode_system_settles_in_stabilizing_mode() {
        // Unstable mode 1, contracting mode 2 = j: paths started outside
        // pick mode 2, enter the band, and never switch again.
        let sys = ClassicalSwitchedSystem {
            subsystems: vec![
                ClassicalSubsystem::linear1d(0.5, 0.3, 0.0, 1.0),
                ClassicalSubsystem::linear1d(-1.0, 0.3, 0.0, 1.0),
            ],
            v: Box::new(SquaredNorm),
            target: vec![0.0],
            params: HysteresisParams {
                l: 1.0,
                l_star: 1.0,
                epsilon: 0.5,
                r: 0.5,
                j: 1,
            },
        };
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let traj = simulate_switched(&sys, &[2.0], 8.0, 1e-3, 10, &mut rng).unwrap();
            assert_eq!(traj.final_mode, 1);
            assert!(traj.switch_count < 10, "switch count {}", traj.switch_count);
            assert!(traj.dist.last().unwrap() < &0.5);
            assert!(!traj.coverage_violation);
        }
    }

    #[test]
    fn target_translation_is_internal() {
        // Same dynamics, target at 3: trajectory states are centered.
        let sys = ClassicalSwitchedSystem {
            subsystems: vec![ClassicalSubsystem::linear1d(-1.0, 0.0, 0.0, 1.0)],
            v: Box::new(SquaredNorm),
            target: vec![3.0],
            params: HysteresisParams {
                l: 1.0,
                l_star: 1.0,
                epsilon: 0.5,
                r: 0.5,
                j: 0,
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let traj = simulate_switched(&sys, &[4.0], 5.0, 1e-3, 10, &mut rng).unwrap();
        // Internal state starts at 1.0 and contracts toward 0.
        assert!((traj.states[0][0] - 1.0).abs() < 1e-12);
        assert!(traj.dist.last().unwrap() < &0.1);
    }

    #[test]
    fn exact_exponent_values() {
        // a − b²/2 with no jumps.
        let e = linear1d_exact_exponent(-1.0, 0.5, 0.0, 1.0).unwrap();
        assert!((e + 1.125).abs() < 1e-15);
        assert_eq!(linear1d_exact_exponent(0.0, 0.0, 0.0, 1.0).unwrap(), 0.0);
        // Quadrature against the series −Σ_{m≥1} γ^{2m}/(2m) · 2c^{2m+1}/(2m+1).
        let (gamma, c) = (0.3, 1.0);
        let e = linear1d_exact_exponent(0.0, 0.0, gamma, c).unwrap();
        let mut series = 0.0;
        for m in 1..40i32 {
            let k = 2 * m;
            series -= gamma.powi(k) / f64::from(k) * 2.0 * c.powi(k + 1) / f64::from(k + 1);
        }
        assert!((e - series).abs() < 1e-12, "{e} vs {series}");
        // Marks reaching log's pole are rejected.
        assert!(linear1d_exact_exponent(0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn partition_check_zero_jumps_pass() {
        let sub = ClassicalSubsystem::linear1d(-1.0, 0.0, 0.0, 1.0);
        let region = Region::annulus(0.5, 2.0);
        let rep = check_partition_assumption(
            &sub,
            &region,
            0.5,
            |rng| crate::sampler::annulus(1, 0.6, 1.9, rng),
            200,
            5,
        );
        assert!(rep.pass);
        assert_eq!(rep.invariance_violations, 0);
    }

    #[test]
    fn partition_check_scaled_jumps() {
        // h(x,z) = xz with small c inside a wide annulus: jumps of size
        // ≤ 0.05|x| cannot cross from the sampled band.
        let sub = ClassicalSubsystem::linear1d(-1.0, 0.0, 0.05, 1.0);
        let region = Region::annulus(0.5, 2.0);
        let rep = check_partition_assumption(
            &sub,
            &region,
            0.5,
            |rng| crate::sampler::annulus(1, 0.7, 1.5, rng),
            200,
            7,
        );
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.metric_violations, 0);
    }

    #[test]
    fn partition_check_forced_violation() {
        // Jumps of size up to 2|x| cross the annulus from anywhere inside.
        let sub = ClassicalSubsystem::linear1d(-1.0, 0.0, 2.0, 1.0);
        let region = Region::annulus(0.5, 2.0);
        let rep = check_partition_assumption(
            &sub,
            &region,
            0.9,
            |rng| crate::sampler::annulus(1, 0.7, 1.5, rng),
            200,
            9,
        );
        assert!(!rep.pass);
        assert!(rep.invariance_violations > 0);
        assert!(rep.nonattain_violations > 0);
    }

    #[test]
    fn jump_compensator_is_exact_for_linear_kernels() {
        // ∫ γxz dz over [−c, c] = 0 by symmetry.
        let sub = ClassicalSubsystem::linear1d(0.0, 0.0, 0.7, 1.0);
        let comp = sub.jump_compensator(&[2.0]);
        assert!(comp[0].abs() < 1e-15);
    }

    #[test]
    fn doublewell_drift_shape() {
        let sub = ClassicalSubsystem::doublewell2d(1.0, 0.0, 0.0, 1.0);
        // On the unit ring the radial drift vanishes.
        let f = (sub.drift)(&[1.0, 0.0]);
        assert!(f[0].abs() < 1e-15 && f[1].abs() < 1e-15);
        // Inside the ring the drift pushes outward (away from the origin).
        let f = (sub.drift)(&[0.5, 0.0]);
        assert!(f[0] > 0.0);
    }

    #[test]
    fn poisson_counts_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lambda = 0.8;
        let n = 200_000;
        let total: usize = (0..n).map(|_| poisson(lambda, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - lambda).abs() < 0.01, "mean {mean}");
    }
}
