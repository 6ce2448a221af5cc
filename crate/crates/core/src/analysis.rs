//! Ensemble orchestration and statistical post-processing.
//!
//! Trajectories are embarrassingly parallel: each index gets its own
//! counter-derived seed, workers shard the index range, and results are
//! merged back in index order, so every aggregate is bit-identical no
//! matter how many workers ran. The worker count comes from the
//! `HYSWITCH_WORKERS` environment variable (default: available
//! parallelism).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::classical::{ClassicalSwitchedSystem, ClassicalTrajectory};
use crate::error::{AnalysisError, SimulationError};
use crate::matrix::ComplexMatrix;
use crate::operator::DensityMatrix;
use crate::quantum::{PreparedSystem, QuantumTrajectory, Regime, SmeEvent};

/// Environment variable controlling the worker count.
pub const WORKERS_ENV: &str = "HYSWITCH_WORKERS";

/// Ensemble run parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub t_final: f64,
    pub dt: f64,
    pub base_seed: u64,
    /// Fraction of the horizon discarded before slope fitting.
    pub burn_in: f64,
    /// Keep every `stride`-th sample.
    pub stride: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.n_traj == 0 {
            return Err(SimulationError::BadParameter("n_traj must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.t_final > self.dt) {
            return Err(SimulationError::BadParameter("need 0 < dt < T".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(SimulationError::BadParameter(
                "burn_in must lie in [0,1)".into(),
            ));
        }
        Ok(())
    }
}

/// SplitMix64 mixing step, used to derive per-trajectory seeds.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for trajectory `index` under `base_seed`; stable contract so runs
/// can be reproduced one trajectory at a time.
pub fn trajectory_seed(base_seed: u64, index: usize) -> u64 {
    splitmix64(base_seed ^ splitmix64(index as u64 + 1))
}

fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Run `n` independent jobs over sharded workers; results return in index
/// order regardless of scheduling.
fn parallel_map<T: Send>(
    n: usize,
    job: impl Fn(usize) -> Result<T, SimulationError> + Sync,
) -> Result<Vec<T>, SimulationError> {
    let workers = worker_count().min(n).max(1);
    let slots: Vec<Mutex<Option<Result<T, SimulationError>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for w in 0..workers {
            let job = &job;
            let slots = &slots;
            scope.spawn(move || {
                let mut idx = w;
                while idx < n {
                    let out = job(idx);
                    *slots[idx].lock().unwrap() = Some(out);
                    idx += workers;
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("job ran"))
        .collect()
}

/// Simulate a quantum ensemble; trajectory i uses `trajectory_seed(seed, i)`.
pub fn run_quantum_ensemble(
    sys: &PreparedSystem,
    rho0: &DensityMatrix,
    cfg: &EnsembleConfig,
) -> Result<Vec<QuantumTrajectory>, SimulationError> {
    cfg.validate()?;
    parallel_map(cfg.n_traj, |i| {
        let seed = trajectory_seed(cfg.base_seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        crate::quantum::simulate_switched(sys, rho0, cfg.t_final, cfg.dt, cfg.stride, &mut rng)
            .map_err(|e| {
            SimulationError::TrajectoryFailed {
                index: i,
                seed,
                source: Box::new(e),
            }
        })
    })
}

/// Simulate a classical ensemble with the same seeding contract.
pub fn run_classical_ensemble(
    sys: &ClassicalSwitchedSystem,
    x0: &[f64],
    cfg: &EnsembleConfig,
) -> Result<Vec<ClassicalTrajectory>, SimulationError> {
    cfg.validate()?;
    parallel_map(cfg.n_traj, |i| {
        let seed = trajectory_seed(cfg.base_seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        crate::classical::simulate_switched(sys, x0, cfg.t_final, cfg.dt, cfg.stride, &mut rng)
            .map_err(|e| {
            SimulationError::TrajectoryFailed {
                index: i,
                seed,
                source: Box::new(e),
            }
        })
    })
}

/// Distance floor: paths that numerically attain the target are excluded
/// from slope averaging and counted separately, since exact attainment has
/// probability zero and only discretization can produce it.
pub const DISTANCE_FLOOR: f64 = 1e-300;

/// Sample Lyapunov exponent estimate from tail regression.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExponentEstimate {
    /// Ensemble mean slope of log-distance vs t (units 1/time).
    pub slope: f64,
    /// 95% normal-approximation half-width over trajectories.
    pub ci_halfwidth: f64,
    pub per_traj_slopes: Vec<f64>,
    /// Trajectories dropped because their distance hit the numerical floor.
    pub floored_paths: usize,
    /// Certificate bound the estimate is compared against, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_used: Option<f64>,
}

/// Least-squares slope of y against t.
fn ols_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in ts.iter().zip(ys) {
        num += (t - tm) * (y - ym);
        den += (t - tm) * (t - tm);
    }
    num / den
}

/// Per-trajectory regression of log-distance on the post-burn-in segment,
/// averaged over the ensemble.
pub fn estimate_lyapunov_exponent(
    series: &[(&[f64], &[f64])],
    t_final: f64,
    burn_in: f64,
) -> Result<ExponentEstimate, AnalysisError> {
    let t_start = burn_in * t_final;
    let mut slopes = Vec::new();
    let mut floored_paths = 0;
    for (times, dists) in series {
        let mut ts = Vec::new();
        let mut ys = Vec::new();
        let mut floored = false;
        for (&t, &d) in times.iter().zip(dists.iter()) {
            if t < t_start {
                continue;
            }
            if d <= DISTANCE_FLOOR {
                floored = true;
                break;
            }
            ts.push(t);
            ys.push(d.ln());
        }
        if floored {
            floored_paths += 1;
            continue;
        }
        if ts.len() < 100 {
            return Err(AnalysisError::SegmentTooShort {
                have: ts.len(),
                need: 100,
            });
        }
        slopes.push(ols_slope(&ts, &ys));
    }
    if slopes.is_empty() {
        return Err(AnalysisError::NoTrajectories(
            "all paths hit the distance floor".into(),
        ));
    }
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let var = if slopes.len() > 1 {
        slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let ci = 1.96 * (var / n).sqrt();
    Ok(ExponentEstimate {
        slope: mean,
        ci_halfwidth: ci,
        per_traj_slopes: slopes,
        floored_paths,
        bound_used: None,
    })
}

/// Switch-count and settling statistics over an ensemble.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SwitchStats {
    /// Histogram of index-changing switch counts.
    pub counts: BTreeMap<usize, usize>,
    pub median_count: f64,
    pub last_switch_times: Vec<f64>,
    /// Fraction of paths ending in the stabilizing mode with no switch in
    /// the last fifth of the horizon.
    pub settled_fraction: f64,
    pub final_mode_distribution: BTreeMap<usize, f64>,
}

/// Per-trajectory inputs for `switch_statistics`.
pub struct SwitchSummary {
    pub switch_times: Vec<f64>,
    pub final_mode: usize,
}

impl From<&QuantumTrajectory> for SwitchSummary {
    fn from(t: &QuantumTrajectory) -> Self {
        Self {
            switch_times: t.switch_log.iter().skip(1).map(|&(tt, _)| tt).collect(),
            final_mode: t.final_mode,
        }
    }
}

impl From<&ClassicalTrajectory> for SwitchSummary {
    fn from(t: &ClassicalTrajectory) -> Self {
        Self {
            switch_times: t.switch_log.iter().skip(1).map(|&(tt, _)| tt).collect(),
            final_mode: t.final_mode,
        }
    }
}

pub fn switch_statistics(
    summaries: &[SwitchSummary],
    stabilizing_mode: usize,
    t_final: f64,
) -> SwitchStats {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut last_switch_times = Vec::new();
    let mut settled = 0usize;
    let mut final_modes: BTreeMap<usize, usize> = BTreeMap::new();
    let tail_start = 0.8 * t_final;
    for s in summaries {
        *counts.entry(s.switch_times.len()).or_default() += 1;
        let last = s.switch_times.last().copied().unwrap_or(0.0);
        last_switch_times.push(last);
        if s.final_mode == stabilizing_mode && last < tail_start {
            settled += 1;
        }
        *final_modes.entry(s.final_mode).or_default() += 1;
    }
    let n = summaries.len().max(1) as f64;
    let mut all_counts: Vec<usize> = summaries.iter().map(|s| s.switch_times.len()).collect();
    all_counts.sort_unstable();
    let median_count = if all_counts.is_empty() {
        0.0
    } else if all_counts.len() % 2 == 1 {
        all_counts[all_counts.len() / 2] as f64
    } else {
        (all_counts[all_counts.len() / 2 - 1] + all_counts[all_counts.len() / 2]) as f64 / 2.0
    };
    SwitchStats {
        counts,
        median_count,
        last_switch_times,
        settled_fraction: settled as f64 / n,
        final_mode_distribution: final_modes
            .into_iter()
            .map(|(k, v)| (k, v as f64 / n))
            .collect(),
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Exit-probability estimate against the declared hysteresis bound
/// α = μ2(l*−ε)/μ1(l).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExitProbabilityReport {
    pub n: usize,
    pub exits: usize,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// fraction ≤ α + 3σ.
    pub pass: bool,
    /// α ≥ 1 makes the bound vacuous; flagged, never failed.
    pub vacuous: bool,
}

/// Empirical exit check: `exited` flags paths that left Λ_l by the horizon;
/// they must have started inside Λ_{l*−ε} with the stabilizing mode pinned.
pub fn exit_probability(
    exited: &[bool],
    mu1_of_l: f64,
    mu2_of_lstar_eps: f64,
) -> Result<ExitProbabilityReport, AnalysisError> {
    if exited.is_empty() {
        return Err(AnalysisError::NoTrajectories("no exit flags".into()));
    }
    let n = exited.len();
    let exits = exited.iter().filter(|&&e| e).count();
    let fraction = exits as f64 / n as f64;
    let alpha = mu2_of_lstar_eps / mu1_of_l;
    let (lo, hi) = wilson_interval(exits, n, 1.96);
    let sigma = (fraction * (1.0 - fraction) / n as f64).sqrt();
    let vacuous = alpha >= 1.0;
    Ok(ExitProbabilityReport {
        n,
        exits,
        fraction,
        wilson_low: lo,
        wilson_high: hi,
        sigma,
        alpha,
        pass: vacuous || fraction <= alpha + 3.0 * sigma,
        vacuous,
    })
}

/// Max deviation of a fixed-mode ensemble mean from the deterministic
/// mean-flow oracle.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeanComparison {
    pub max_deviation: f64,
    pub bound: f64,
    pub pass: bool,
    pub n_traj: usize,
}

/// Compare the ensemble mean of stored samples against the mean ODE states
/// at the same times. Errors if any trajectory switched modes.
pub fn mean_vs_ode(
    trajs: &[QuantumTrajectory],
    ode_times: &[f64],
    ode_states: &[ComplexMatrix],
    dt: f64,
) -> Result<MeanComparison, AnalysisError> {
    if trajs.is_empty() {
        return Err(AnalysisError::NoTrajectories("empty ensemble".into()));
    }
    if trajs.iter().any(|t| t.switch_count > 0) {
        return Err(AnalysisError::ConfigMismatch(
            "switching was active in the ensemble".into(),
        ));
    }
    let n = trajs.len();
    let n_samples = trajs[0].times.len();
    if trajs.iter().any(|t| t.times.len() != n_samples) {
        return Err(AnalysisError::ConfigMismatch(
            "trajectories disagree on sample grid".into(),
        ));
    }
    let dim = trajs[0].states[0].dim();
    let mut max_dev: f64 = 0.0;
    for s in 0..n_samples {
        let mut mean = ComplexMatrix::zeros(dim, dim);
        for t in trajs {
            mean = &mean + &t.states[s];
        }
        mean = mean.scale_re(1.0 / n as f64);
        let t = trajs[0].times[s];
        let idx = ode_times
            .iter()
            .position(|&ot| (ot - t).abs() < dt / 2.0)
            .ok_or_else(|| AnalysisError::ConfigMismatch(format!("no oracle state at t={t}")))?;
        let dev = (&mean - &ode_states[idx]).frobenius_norm();
        max_dev = max_dev.max(dev);
    }
    let bound = 3.0 / (n as f64).sqrt() + 5.0 * dt;
    Ok(MeanComparison {
        max_deviation: max_dev,
        bound,
        pass: max_dev <= bound,
        n_traj: n,
    })
}

/// A hysteresis-consistency violation found by the auditor.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AuditViolation {
    pub trajectory: usize,
    pub what: String,
}

struct Transition {
    t: f64,
    to_regime: Regime,
    dist: f64,
}

fn audit_transitions(
    idx: usize,
    switch_times: &[f64],
    transitions: &[Transition],
    l: f64,
    inner_radius: f64,
) -> Vec<AuditViolation> {
    let mut violations = Vec::new();
    for w in switch_times.windows(2) {
        if w[1] <= w[0] {
            violations.push(AuditViolation {
                trajectory: idx,
                what: format!(
                    "switch times not strictly increasing: {} then {}",
                    w[0], w[1]
                ),
            });
        }
    }
    for tr in transitions {
        match tr.to_regime {
            Regime::Inner => {
                if tr.dist >= inner_radius {
                    violations.push(AuditViolation {
                        trajectory: idx,
                        what: format!(
                            "inner entry at t={} with distance {:.6} >= band floor {:.6}",
                            tr.t, tr.dist, inner_radius
                        ),
                    });
                }
            }
            Regime::Outer => {
                if tr.dist < l {
                    violations.push(AuditViolation {
                        trajectory: idx,
                        what: format!(
                            "inner exit at t={} with distance {:.6} < l={:.6} (chatter)",
                            tr.t, tr.dist, l
                        ),
                    });
                }
            }
        }
    }
    // Anti-chattering: regime entries must alternate; re-entering the same
    // regime means the band was not actually traversed.
    for w in transitions.windows(2) {
        if w[0].to_regime == w[1].to_regime {
            violations.push(AuditViolation {
                trajectory: idx,
                what: format!(
                    "repeated {:?} regime entry at t={} without leaving it",
                    w[1].to_regime, w[1].t
                ),
            });
        }
        if w[1].t <= w[0].t {
            violations.push(AuditViolation {
                trajectory: idx,
                what: "regime transitions not strictly increasing in time".into(),
            });
        }
    }
    violations
}

/// Audit a quantum trajectory against the hysteresis contract: strictly
/// increasing switch times, band-consistent regime entries, no chattering.
pub fn audit_quantum(
    idx: usize,
    traj: &QuantumTrajectory,
    l: f64,
    inner_radius: f64,
) -> Vec<AuditViolation> {
    let switch_times: Vec<f64> = traj.switch_log.iter().skip(1).map(|&(t, _)| t).collect();
    let mut transitions = Vec::new();
    for e in &traj.events {
        if let SmeEvent::Switch {
            t,
            to_regime,
            from_regime,
            d0,
            ..
        } = e
        {
            if to_regime != from_regime {
                transitions.push(Transition {
                    t: *t,
                    to_regime: *to_regime,
                    dist: *d0,
                });
            }
        }
    }
    audit_transitions(idx, &switch_times, &transitions, l, inner_radius)
}

/// Audit a classical trajectory against the same contract.
pub fn audit_classical(
    idx: usize,
    traj: &ClassicalTrajectory,
    l: f64,
    inner_radius: f64,
) -> Vec<AuditViolation> {
    use crate::classical::ClassicalEvent;
    let switch_times: Vec<f64> = traj.switch_log.iter().skip(1).map(|&(t, _)| t).collect();
    let mut transitions = Vec::new();
    for e in &traj.events {
        if let ClassicalEvent::Switch {
            t,
            to_regime,
            from_regime,
            dist,
            ..
        } = e
        {
            if to_regime != from_regime {
                transitions.push(Transition {
                    t: *t,
                    to_regime: *to_regime,
                    dist: *dist,
                });
            }
        }
    }
    audit_transitions(idx, &switch_times, &transitions, l, inner_radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        let s0 = trajectory_seed(42, 0);
        let s1 = trajectory_seed(42, 1);
        assert_ne!(s0, s1);
        assert_eq!(s0, trajectory_seed(42, 0));
        assert_ne!(trajectory_seed(43, 0), s0);
    }

    #[test]
    fn ols_slope_exact_on_line() {
        let ts: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| -2.0 * t + 3.0).collect();
        assert!((ols_slope(&ts, &ys) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_estimator_on_synthetic_paths() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t_final = 10.0;
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        let mut series_data = Vec::new();
        for _ in 0..50 {
            let dists: Vec<f64> = times
                .iter()
                .map(|&t| (-2.0 * t + 0.05 * rng.gen_range(-1.0..1.0)).exp())
                .collect();
            series_data.push((times.clone(), dists));
        }
        let series: Vec<(&[f64], &[f64])> = series_data
            .iter()
            .map(|(t, d)| (t.as_slice(), d.as_slice()))
            .collect();
        let est = estimate_lyapunov_exponent(&series, t_final, 0.5).unwrap();
        assert!(
            (est.slope + 2.0).abs() < est.ci_halfwidth.max(0.01),
            "slope {} ci {}",
            est.slope,
            est.ci_halfwidth
        );
    }

    #[test]
    fn constant_distance_gives_zero_slope() {
        let times: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
        let dists = vec![0.25; times.len()];
        let series: Vec<(&[f64], &[f64])> = vec![(times.as_slice(), dists.as_slice())];
        let est = estimate_lyapunov_exponent(&series, 5.0, 0.2).unwrap();
        assert!(est.slope.abs() < 1e-12);
    }

    #[test]
    fn floored_paths_are_excluded_and_counted() {
        let times: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
        let good = vec![0.5; times.len()];
        let dead = vec![0.0; times.len()];
        let series: Vec<(&[f64], &[f64])> = vec![
            (times.as_slice(), good.as_slice()),
            (times.as_slice(), dead.as_slice()),
        ];
        let est = estimate_lyapunov_exponent(&series, 5.0, 0.0).unwrap();
        assert_eq!(est.floored_paths, 1);
        assert_eq!(est.per_traj_slopes.len(), 1);
    }

    #[test]
    fn wilson_matches_closed_form() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        let z: f64 = 1.96;
        let z2 = z * z;
        let n = 100.0;
        let denom = 1.0 + z2 / n;
        let center = (0.5 + z2 / (2.0 * n)) / denom;
        let half = z * (0.25 / n + z2 / (4.0 * n * n)).sqrt() / denom;
        assert!((lo - (center - half)).abs() < 1e-15);
        assert!((hi - (center + half)).abs() < 1e-15);
        let (lo, hi) = wilson_interval(0, 10, 1.96);
        assert!(lo >= 0.0 && hi < 0.4);
        let (lo, hi) = wilson_interval(10, 10, 1.96);
        assert!(hi <= 1.0 && lo > 0.6);
    }

    #[test]
    fn switch_stats_single_mode() {
        let summaries: Vec<SwitchSummary> = (0..10)
            .map(|_| SwitchSummary {
                switch_times: vec![],
                final_mode: 0,
            })
            .collect();
        let stats = switch_statistics(&summaries, 0, 10.0);
        assert_eq!(stats.counts.get(&0), Some(&10));
        assert_eq!(stats.settled_fraction, 1.0);
        assert_eq!(stats.median_count, 0.0);
        let stats_wrong_j = switch_statistics(&summaries, 1, 10.0);
        assert_eq!(stats_wrong_j.settled_fraction, 0.0);
    }

    #[test]
    fn exit_probability_bound_and_vacuous_flag() {
        let exited = vec![false; 90]
            .into_iter()
            .chain(vec![true; 10])
            .collect::<Vec<_>>();
        let rep = exit_probability(&exited, 0.3_f64.sqrt(), 0.2_f64.sqrt()).unwrap();
        assert!((rep.fraction - 0.1).abs() < 1e-12);
        assert!(rep.pass);
        assert!(!rep.vacuous);
        let rep = exit_probability(&exited, 1.0, 2.0).unwrap();
        assert!(rep.vacuous && rep.pass);
    }

    #[test]
    fn parallel_map_order_is_deterministic() {
        let out = parallel_map(100, |i| Ok(i * i)).unwrap();
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn estimator_ci_covers_truth_in_repeated_syntheses() {
        // On synthetic geometric-decay paths with iid noise the CI must
        // contain the true slope in at least 90 of 100 repetitions.
        use rand::Rng;
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let mut hits = 0;
        for rep in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + rep);
            let mut series_data = Vec::new();
            for _ in 0..20 {
                let offset: f64 = rng.gen_range(-0.5..0.5);
                let dists: Vec<f64> = times
                    .iter()
                    .map(|&t| (-2.0 * t + offset + 0.1 * rng.gen_range(-1.0..1.0)).exp())
                    .collect();
                series_data.push(dists);
            }
            let series: Vec<(&[f64], &[f64])> = series_data
                .iter()
                .map(|d| (times.as_slice(), d.as_slice()))
                .collect();
            let est = estimate_lyapunov_exponent(&series, 10.0, 0.3).unwrap();
            if (est.slope + 2.0).abs() <= est.ci_halfwidth {
                hits += 1;
            }
        }
        assert!(hits >= 90, "CI covered the truth in only {hits}/100 repetitions");
    }

    #[test]
    fn singleton_ensemble_matches_direct_simulation() {
        use crate::certificates::ExtensionOperator;
        use crate::operator::QuantumSubsystemSpec;
        use crate::quantum::{HysteresisParams, QuantumSwitchedSystem};
        let mut spec = QuantumSubsystemSpec::zero(2);
        spec.ck = crate::matrix::ComplexMatrix::from_real_diag(&[0.0, 1.0]);
        spec.dk = crate::matrix::ComplexMatrix::from_real_diag(&[1.0, 2.0]);
        let sys = QuantumSwitchedSystem {
            subsystems: vec![spec],
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
        let rho0 = DensityMatrix::from_populations(&[0.6, 0.4]).unwrap();
        let cfg = EnsembleConfig {
            n_traj: 1,
            t_final: 1.0,
            dt: 1e-3,
            base_seed: 99,
            burn_in: 0.0,
            stride: 10,
        };
        let ens = run_quantum_ensemble(&prepared, &rho0, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(trajectory_seed(99, 0));
        let direct =
            crate::quantum::simulate_switched(&prepared, &rho0, 1.0, 1e-3, 10, &mut rng).unwrap();
        assert_eq!(ens[0].times, direct.times);
        assert_eq!(ens[0].d0, direct.d0);
        assert_eq!(ens[0].states, direct.states);
    }
}
