//! Report documents and trajectory/plot-data persistence.
//!
//! Trajectory files are line-delimited JSON: one record per stored sample
//! ({t, rho or x, mode, distance, functional value}) with event records
//! interleaved at their times, trajectory by trajectory in index order, so
//! repeated runs under the same seed produce byte-identical files.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use crate::analysis::{ExponentEstimate, MeanComparison, SwitchStats};
use crate::analysis::ExitProbabilityReport;
use crate::certificates::CertificateReport;
use crate::classical::{ClassicalEvent, ClassicalTrajectory};
use crate::config::{content_hash, RunConfig};
use crate::operator::MatrixData;
use crate::quantum::{QuantumTrajectory, SmeEvent};

/// Self-contained run summary: embeds the config and seed needed to
/// reproduce it exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool_version: String,
    pub config: RunConfig,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<ExponentEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_stats: Option<SwitchStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit_probability: Option<ExitProbabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_check: Option<MeanComparison>,
    pub verdicts: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn new(config: RunConfig) -> Self {
        let config_hash = content_hash(&config);
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            config_hash,
            certificate: None,
            exponent: None,
            switch_stats: None,
            exit_probability: None,
            mean_check: None,
            verdicts: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Serialize)]
struct QuantumSampleRecord<'a> {
    traj: usize,
    t: f64,
    rho: &'a MatrixData,
    mode: usize,
    d0: f64,
    tr_k: f64,
}

#[derive(Serialize)]
struct EventRecord<'a, E: Serialize> {
    traj: usize,
    event: &'a E,
}

/// Write a quantum ensemble as line-delimited records, samples and events
/// interleaved by time within each trajectory.
pub fn write_quantum_trajectories(
    out: &mut impl Write,
    trajs: &[QuantumTrajectory],
) -> std::io::Result<()> {
    for (i, traj) in trajs.iter().enumerate() {
        let mut ev = traj.events.iter().peekable();
        for (s, &t) in traj.times.iter().enumerate() {
            while let Some(e) = ev.peek() {
                let et = match e {
                    SmeEvent::QuantumJump { t, .. } => *t,
                    SmeEvent::Switch { t, .. } => *t,
                };
                if et <= t {
                    let rec = EventRecord { traj: i, event: *e };
                    writeln!(out, "{}", serde_json::to_string(&rec)?)?;
                    ev.next();
                } else {
                    break;
                }
            }
            let rho = MatrixData::from_matrix(&traj.states[s]);
            let rec = QuantumSampleRecord {
                traj: i,
                t,
                rho: &rho,
                mode: traj.modes[s],
                d0: traj.d0[s],
                tr_k: traj.tr_k[s],
            };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
        for e in ev {
            let rec = EventRecord { traj: i, event: e };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassicalSampleRecord<'a> {
    traj: usize,
    t: f64,
    x: &'a [f64],
    mode: usize,
    dist: f64,
    v: f64,
}

/// Classical counterpart of `write_quantum_trajectories`.
pub fn write_classical_trajectories(
    out: &mut impl Write,
    trajs: &[ClassicalTrajectory],
) -> std::io::Result<()> {
    for (i, traj) in trajs.iter().enumerate() {
        let mut ev = traj.events.iter().peekable();
        for (s, &t) in traj.times.iter().enumerate() {
            while let Some(e) = ev.peek() {
                let et = match e {
                    ClassicalEvent::Jump { t, .. } => *t,
                    ClassicalEvent::Switch { t, .. } => *t,
                };
                if et <= t {
                    let rec = EventRecord { traj: i, event: *e };
                    writeln!(out, "{}", serde_json::to_string(&rec)?)?;
                    ev.next();
                } else {
                    break;
                }
            }
            let rec = ClassicalSampleRecord {
                traj: i,
                t,
                x: &traj.states[s],
                mode: traj.modes[s],
                dist: traj.dist[s],
                v: traj.v_values[s],
            };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
        for e in ev {
            let rec = EventRecord { traj: i, event: e };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
    }
    Ok(())
}

/// Fields the plot-data emitter understands.
pub const QUANTUM_PLOT_FIELDS: &[&str] = &["d0", "log_d0", "tr_k", "mode"];
pub const CLASSICAL_PLOT_FIELDS: &[&str] = &["dist", "log_dist", "v", "mode", "x0", "x1"];

/// Tidy columnar plot data: `t<TAB>field<TAB>value<TAB>traj_id` rows.
pub fn emit_quantum_plotdata(
    out: &mut impl Write,
    trajs: &[QuantumTrajectory],
    fields: &[&str],
) -> Result<(), String> {
    for f in fields {
        if !QUANTUM_PLOT_FIELDS.contains(f) {
            return Err(format!("unknown field '{f}'; known: {QUANTUM_PLOT_FIELDS:?}"));
        }
    }
    writeln!(out, "t\tfield\tvalue\ttraj_id").map_err(|e| e.to_string())?;
    for (i, traj) in trajs.iter().enumerate() {
        for (s, &t) in traj.times.iter().enumerate() {
            for f in fields {
                let value = match *f {
                    "d0" => traj.d0[s],
                    "log_d0" => traj.d0[s].max(f64::MIN_POSITIVE).ln(),
                    "tr_k" => traj.tr_k[s],
                    "mode" => traj.modes[s] as f64 + 1.0,
                    _ => unreachable!(),
                };
                writeln!(out, "{t}\t{f}\t{value}\t{i}").map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(())
}

pub fn emit_classical_plotdata(
    out: &mut impl Write,
    trajs: &[ClassicalTrajectory],
    fields: &[&str],
) -> Result<(), String> {
    for f in fields {
        if !CLASSICAL_PLOT_FIELDS.contains(f) {
            return Err(format!("unknown field '{f}'; known: {CLASSICAL_PLOT_FIELDS:?}"));
        }
    }
    writeln!(out, "t\tfield\tvalue\ttraj_id").map_err(|e| e.to_string())?;
    for (i, traj) in trajs.iter().enumerate() {
        for (s, &t) in traj.times.iter().enumerate() {
            for f in fields {
                let value = match *f {
                    "dist" => traj.dist[s],
                    "log_dist" => traj.dist[s].max(f64::MIN_POSITIVE).ln(),
                    "v" => traj.v_values[s],
                    "mode" => traj.modes[s] as f64 + 1.0,
                    "x0" => traj.states[s][0],
                    "x1" => *traj.states[s].get(1).unwrap_or(&f64::NAN),
                    _ => unreachable!(),
                };
                writeln!(out, "{t}\t{f}\t{value}\t{i}").map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(())
}
