//! Declarative run configuration: JSON schema, strict validation, and
//! construction of the simulable systems.
//!
//! Parsing is strict by default: unknown keys anywhere in the document are
//! errors, since a silently ignored typo in an operator name would
//! invalidate a physics run. Semantic validation collects *all* problems
//! with their field paths instead of stopping at the first.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certificates::ExtensionOperator;
use crate::classical::{ClassicalSubsystem, ClassicalSwitchedSystem};
use crate::lyapunov::SquaredNorm;
use crate::matrix::ComplexMatrix;
use crate::operator::{MatrixData, QuantumSubsystemSpec};
use crate::quantum::{HysteresisParams, QuantumSwitchedSystem, MAX_RATE_DT};

/// One schema or semantic problem, with the path that caused it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    Classical {
        builtin: BuiltinClassical,
    },
    Quantum {
        dim: usize,
        subsystems: Vec<SubsystemConfig>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuiltinClassical {
    /// `linear1d` or `doublewell2d`.
    pub family: String,
    pub modes: Vec<ModeParams>,
    pub mark_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

/// Operators of one quantum mode; omitted operators default to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct SubsystemConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<MatrixData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hk: Option<MatrixData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lk: Option<MatrixData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ck: Option<MatrixData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dk: Option<MatrixData>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub l: f64,
    pub l_star: f64,
    pub epsilon: f64,
    pub r: f64,
    /// Stabilizing mode, 1-based.
    pub j: usize,
    /// Target subspace dimension (quantum only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds: Option<usize>,
    /// K_R block of the linear functional operator (quantum only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_r: Option<MatrixData>,
    /// Target state (classical only; defaults to the origin).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub t_final: f64,
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Initial classical state (classical systems).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Initial density matrix (quantum systems).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho0: Option<MatrixData>,
}

fn default_burn_in() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            stride: 1,
        }
    }
}

/// How the exponent command obtains its certificate bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundConfig {
    /// Quadrature oracle for the scalar linear family (mode j's parameters).
    Linear1dExact,
    /// −(c̲ + a̲)/2 from the QND coefficients of mode j.
    Qnd,
    /// −(2c3 + c4 + 2c5)/(2c2) with caller-supplied constants.
    Classical { c2: f64, c3: f64, c4: f64, c5: f64 },
    /// The λ̄/Γ/Φ/Ψ combination at the given δ, with X_R = K_R.
    Quantum { delta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentConfig {
    pub bound: BoundConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    0.15
}

/// The full declarative run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub controller: ControllerConfig,
    pub run: RunParams,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<ExponentConfig>,
}

// ---------------------------------------------------------------------------
// Strict schema walk
// ---------------------------------------------------------------------------

enum Schema {
    Object(&'static [(&'static str, Schema)]),
    Array(&'static Schema),
    Leaf,
}

static MODE_SCHEMA: Schema = Schema::Object(&[
    ("a", Schema::Leaf),
    ("b", Schema::Leaf),
    ("gamma", Schema::Leaf),
]);

static SUBSYSTEM_SCHEMA: Schema = Schema::Object(&[
    ("h0", Schema::Leaf),
    ("hk", Schema::Leaf),
    ("lk", Schema::Leaf),
    ("ck", Schema::Leaf),
    ("dk", Schema::Leaf),
]);

static ROOT_SCHEMA: Schema = Schema::Object(&[
    (
        "system",
        Schema::Object(&[
            ("kind", Schema::Leaf),
            (
                "builtin",
                Schema::Object(&[
                    ("family", Schema::Leaf),
                    ("modes", Schema::Array(&MODE_SCHEMA)),
                    ("mark_bound", Schema::Leaf),
                ]),
            ),
            ("dim", Schema::Leaf),
            ("subsystems", Schema::Array(&SUBSYSTEM_SCHEMA)),
        ]),
    ),
    (
        "controller",
        Schema::Object(&[
            ("l", Schema::Leaf),
            ("l_star", Schema::Leaf),
            ("epsilon", Schema::Leaf),
            ("r", Schema::Leaf),
            ("j", Schema::Leaf),
            ("ds", Schema::Leaf),
            ("k_r", Schema::Leaf),
            ("target", Schema::Leaf),
        ]),
    ),
    (
        "run",
        Schema::Object(&[
            ("t_final", Schema::Leaf),
            ("dt", Schema::Leaf),
            ("n_traj", Schema::Leaf),
            ("seed", Schema::Leaf),
            ("burn_in", Schema::Leaf),
            ("x0", Schema::Leaf),
            ("rho0", Schema::Leaf),
        ]),
    ),
    (
        "output",
        Schema::Object(&[("dir", Schema::Leaf), ("stride", Schema::Leaf)]),
    ),
    (
        "exponent",
        Schema::Object(&[
            (
                "bound",
                Schema::Object(&[
                    ("kind", Schema::Leaf),
                    ("c2", Schema::Leaf),
                    ("c3", Schema::Leaf),
                    ("c4", Schema::Leaf),
                    ("c5", Schema::Leaf),
                    ("delta", Schema::Leaf),
                ]),
            ),
            ("tol", Schema::Leaf),
        ]),
    ),
]);

fn walk_schema(value: &serde_json::Value, schema: &Schema, path: &str, out: &mut Vec<ConfigError>) {
    match schema {
        Schema::Leaf => {}
        Schema::Array(inner) => {
            if let serde_json::Value::Array(items) = value {
                for (i, item) in items.iter().enumerate() {
                    walk_schema(item, inner, &format!("{path}[{i}]"), out);
                }
            }
        }
        Schema::Object(fields) => {
            if let serde_json::Value::Object(map) = value {
                for (key, val) in map {
                    match fields.iter().find(|(name, _)| name == key) {
                        Some((_, child)) => {
                            walk_schema(val, child, &format!("{path}.{key}"), out)
                        }
                        None => out.push(ConfigError {
                            path: format!("{path}.{key}"),
                            message: "unknown key".into(),
                        }),
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parse + validate
// ---------------------------------------------------------------------------

/// Parse a configuration document. In strict mode (the default for every
/// command) unknown keys are errors; otherwise they are returned as
/// warnings alongside the parsed config.
pub fn parse_config(text: &str, strict: bool) -> Result<(RunConfig, Vec<ConfigError>), Vec<ConfigError>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
        vec![ConfigError {
            path: "$".into(),
            message: format!("invalid JSON: {e}"),
        }]
    })?;
    let mut unknown = Vec::new();
    walk_schema(&value, &ROOT_SCHEMA, "$", &mut unknown);
    if strict && !unknown.is_empty() {
        return Err(unknown);
    }
    let config: RunConfig = serde_json::from_value(value).map_err(|e| {
        vec![ConfigError {
            path: "$".into(),
            message: format!("{e}"),
        }]
    })?;
    let errors = validate(&config);
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok((config, unknown))
}

/// All semantic problems in a structurally valid config.
pub fn validate(cfg: &RunConfig) -> Vec<ConfigError> {
    let mut errors = Vec::new();
    let mut err = |path: &str, message: String| {
        errors.push(ConfigError {
            path: path.to_string(),
            message,
        })
    };

    let c = &cfg.controller;
    if !(c.l > 0.0) {
        err("$.controller.l", "l must be positive".into());
    }
    if !(c.l_star > 0.0 && c.l_star <= c.l) {
        err("$.controller.l_star", format!("l_star must lie in (0, l], got {}", c.l_star));
    }
    if !(c.epsilon > 0.0 && c.epsilon < c.l_star) {
        err(
            "$.controller.epsilon",
            format!("epsilon must lie in (0, l_star), got {}", c.epsilon),
        );
    }
    if !(c.r > 0.0 && c.r < 1.0) {
        err("$.controller.r", format!("r must lie in (0,1), got {}", c.r));
    }

    if !(cfg.run.dt > 0.0) {
        err("$.run.dt", "dt must be positive".into());
    }
    if !(cfg.run.t_final > cfg.run.dt) {
        err("$.run.t_final", "t_final must exceed dt".into());
    }
    if cfg.run.n_traj == 0 {
        err("$.run.n_traj", "n_traj must be >= 1".into());
    }
    if !(0.0..1.0).contains(&cfg.run.burn_in) {
        err("$.run.burn_in", format!("burn_in must lie in [0,1), got {}", cfg.run.burn_in));
    }
    if cfg.output.stride == 0 {
        err("$.output.stride", "stride must be >= 1".into());
    }

    match &cfg.system {
        SystemConfig::Classical { builtin } => {
            let dim = if builtin.family == "doublewell2d" { 2 } else { 1 };
            match &cfg.run.x0 {
                None => err("$.run.x0", "classical systems require x0".into()),
                Some(x0) if x0.len() != dim => {
                    err("$.run.x0", format!("x0 must have dimension {dim}"))
                }
                _ => {}
            }
            if !matches!(builtin.family.as_str(), "linear1d" | "doublewell2d") {
                err(
                    "$.system.builtin.family",
                    format!("unknown family '{}'; known: linear1d, doublewell2d", builtin.family),
                );
            }
            if builtin.modes.is_empty() {
                err("$.system.builtin.modes", "need at least one mode".into());
            }
            if !(builtin.mark_bound > 0.0) {
                err("$.system.builtin.mark_bound", "mark_bound must be positive".into());
            }
            if c.j == 0 || c.j > builtin.modes.len() {
                err(
                    "$.controller.j",
                    format!("j={} out of range for {} modes", c.j, builtin.modes.len()),
                );
            }
            if let Some(target) = &c.target {
                let expect = if builtin.family == "doublewell2d" { 2 } else { 1 };
                if target.len() != expect {
                    err("$.controller.target", format!("target must have dimension {expect}"));
                }
            }
        }
        SystemConfig::Quantum { dim, subsystems } => {
            if *dim < 2 {
                err("$.system.dim", "dim must be >= 2".into());
            }
            if subsystems.is_empty() {
                err("$.system.subsystems", "need at least one subsystem".into());
            }
            if c.j == 0 || c.j > subsystems.len() {
                err(
                    "$.controller.j",
                    format!("j={} out of range for {} modes", c.j, subsystems.len()),
                );
            }
            let ds = c.ds.unwrap_or(0);
            if ds == 0 || ds >= *dim {
                err("$.controller.ds", format!("ds must lie in [1, dim-1], got {ds}"));
            }
            match &c.k_r {
                None => err("$.controller.k_r", "quantum systems require k_r".into()),
                Some(data) => match data.to_matrix() {
                    Err(e) => err("$.controller.k_r", format!("{e}")),
                    Ok(m) => {
                        if ds > 0 && ds < *dim && m.rows() != dim - ds {
                            err(
                                "$.controller.k_r",
                                format!("k_r must be {}x{0}, got {}x{}", dim - ds, m.rows(), m.cols()),
                            );
                        } else if m.hermiticity_defect() > 1e-10 {
                            err(
                                "$.controller.k_r",
                                format!("k_r not Hermitian: asymmetry norm {:.3e}", m.hermiticity_defect()),
                            );
                        }
                    }
                },
            }
            match &cfg.run.rho0 {
                None => err("$.run.rho0", "quantum systems require rho0".into()),
                Some(data) => match data.to_matrix() {
                    Err(e) => err("$.run.rho0", format!("{e}")),
                    Ok(m) => {
                        if m.rows() != *dim || m.cols() != *dim {
                            err("$.run.rho0", format!("expected {dim}x{dim}"));
                        } else if crate::operator::DensityMatrix::new(m).is_err() {
                            err("$.run.rho0", "not a valid density matrix".into());
                        }
                    }
                },
            }
            let mut rate_bound: f64 = 0.0;
            for (i, sub) in subsystems.iter().enumerate() {
                for (name, data) in [
                    ("h0", &sub.h0),
                    ("hk", &sub.hk),
                    ("lk", &sub.lk),
                    ("ck", &sub.ck),
                    ("dk", &sub.dk),
                ] {
                    let Some(data) = data else { continue };
                    let path = format!("$.system.subsystems[{i}].{name}");
                    match data.to_matrix() {
                        Err(e) => err(&path, format!("{e}")),
                        Ok(m) => {
                            if m.rows() != *dim || m.cols() != *dim {
                                err(&path, format!("expected {dim}x{dim}, got {}x{}", m.rows(), m.cols()));
                            } else if matches!(name, "h0" | "hk")
                                && m.hermiticity_defect() > 1e-10
                            {
                                err(
                                    &path,
                                    format!("not Hermitian: asymmetry norm {:.3e}", m.hermiticity_defect()),
                                );
                            } else if name == "dk" {
                                rate_bound = rate_bound.max(m.frobenius_norm().powi(2));
                            }
                        }
                    }
                }
            }
            if rate_bound * cfg.run.dt > MAX_RATE_DT {
                err(
                    "$.run.dt",
                    format!(
                        "dt too large for jump thinning: sup v_D * dt = {:.3} > {MAX_RATE_DT}",
                        rate_bound * cfg.run.dt
                    ),
                );
            }
        }
    }
    errors
}

/// Canonical serialization: pretty JSON with the struct field order.
/// `parse_config(emit_config(c))` returns `c` for every valid config.
pub fn emit_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

/// SHA-256 of the canonical serialization, hex-encoded.
pub fn content_hash(cfg: &RunConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(emit_config(cfg).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// System construction
// ---------------------------------------------------------------------------

fn matrix_or_zero(data: &Option<MatrixData>, dim: usize) -> Result<ComplexMatrix, ConfigError> {
    match data {
        None => Ok(ComplexMatrix::zeros(dim, dim)),
        Some(d) => d.to_matrix().map_err(|e| ConfigError {
            path: "$".into(),
            message: format!("{e}"),
        }),
    }
}

/// Build the quantum switched system described by a validated config.
pub fn build_quantum_system(cfg: &RunConfig) -> Result<QuantumSwitchedSystem, ConfigError> {
    let SystemConfig::Quantum { dim, subsystems } = &cfg.system else {
        return Err(ConfigError {
            path: "$.system".into(),
            message: "not a quantum system".into(),
        });
    };
    let ds = cfg.controller.ds.unwrap_or(1);
    let mut specs = Vec::new();
    for sub in subsystems {
        let spec = QuantumSubsystemSpec::new(
            matrix_or_zero(&sub.h0, *dim)?,
            matrix_or_zero(&sub.hk, *dim)?,
            matrix_or_zero(&sub.lk, *dim)?,
            matrix_or_zero(&sub.ck, *dim)?,
            matrix_or_zero(&sub.dk, *dim)?,
        )
        .map_err(|e| ConfigError {
            path: "$.system.subsystems".into(),
            message: format!("{e}"),
        })?;
        specs.push(spec);
    }
    let kr = cfg
        .controller
        .k_r
        .as_ref()
        .ok_or_else(|| ConfigError {
            path: "$.controller.k_r".into(),
            message: "quantum systems require k_r".into(),
        })?
        .to_matrix()
        .map_err(|e| ConfigError {
            path: "$.controller.k_r".into(),
            message: format!("{e}"),
        })?;
    let ext = ExtensionOperator::new(kr, ds).map_err(|e| ConfigError {
        path: "$.controller.k_r".into(),
        message: format!("{e}"),
    })?;
    Ok(QuantumSwitchedSystem {
        subsystems: specs,
        k_op: ext.full(),
        ds,
        params: HysteresisParams {
            l: cfg.controller.l,
            l_star: cfg.controller.l_star,
            epsilon: cfg.controller.epsilon,
            r: cfg.controller.r,
            j: cfg.controller.j - 1,
        },
    })
}

/// Build the classical switched system described by a validated config.
pub fn build_classical_system(cfg: &RunConfig) -> Result<ClassicalSwitchedSystem, ConfigError> {
    let SystemConfig::Classical { builtin } = &cfg.system else {
        return Err(ConfigError {
            path: "$.system".into(),
            message: "not a classical system".into(),
        });
    };
    let subsystems: Vec<ClassicalSubsystem> = builtin
        .modes
        .iter()
        .map(|m| match builtin.family.as_str() {
            "doublewell2d" => {
                ClassicalSubsystem::doublewell2d(m.a, m.b, m.gamma, builtin.mark_bound)
            }
            _ => ClassicalSubsystem::linear1d(m.a, m.b, m.gamma, builtin.mark_bound),
        })
        .collect();
    let dim = if builtin.family == "doublewell2d" { 2 } else { 1 };
    let target = cfg.controller.target.clone().unwrap_or_else(|| vec![0.0; dim]);
    Ok(ClassicalSwitchedSystem {
        subsystems,
        v: Box::new(SquaredNorm),
        target,
        params: HysteresisParams {
            l: cfg.controller.l,
            l_star: cfg.controller.l_star,
            epsilon: cfg.controller.epsilon,
            r: cfg.controller.r,
            j: cfg.controller.j - 1,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_quantum() -> String {
        serde_json::json!({
            "system": {
                "kind": "quantum",
                "dim": 2,
                "subsystems": [
                    {"ck": [[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]],
                     "dk": [[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[2.0,0.0]]]}
                ]
            },
            "controller": {"l": 0.3, "l_star": 0.3, "epsilon": 0.1, "r": 0.5, "j": 1,
                            "ds": 1, "k_r": [[[1.0,0.0]]]},
            "run": {"t_final": 1.0, "dt": 0.001, "n_traj": 2, "seed": 7,
                     "rho0": [[[0.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]}
        })
        .to_string()
    }

    #[test]
    fn minimal_quantum_parses() {
        let (cfg, warnings) = parse_config(&minimal_quantum(), true).unwrap();
        assert!(warnings.is_empty());
        assert!(matches!(cfg.system, SystemConfig::Quantum { dim: 2, .. }));
        build_quantum_system(&cfg).unwrap();
    }

    #[test]
    fn r_out_of_range_is_reported() {
        let text = minimal_quantum().replace("\"r\":0.5", "\"r\":1.2");
        let errs = parse_config(&text, true).unwrap_err();
        assert!(
            errs.iter().any(|e| e.path.contains("controller.r") && e.message.contains("(0,1)")),
            "{errs:?}"
        );
    }

    #[test]
    fn non_hermitian_hamiltonian_reports_asymmetry() {
        let text = minimal_quantum().replace(
            "\"subsystems\":[{",
            "\"subsystems\":[{\"h0\":[[[0.0,0.0],[1.0,0.0]],[[0.0,0.0],[0.0,0.0]]],",
        );
        let errs = parse_config(&text, true).unwrap_err();
        assert!(
            errs.iter().any(|e| e.message.contains("asymmetry norm")),
            "{errs:?}"
        );
    }

    #[test]
    fn unknown_keys_rejected_in_strict_mode() {
        let text = minimal_quantum().replace("\"seed\":7", "\"seed\":7,\"sede\":8");
        let errs = parse_config(&text, true).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "$.run.sede"), "{errs:?}");
        // Lenient mode downgrades to warnings.
        let (_, warnings) = parse_config(&text, false).unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn multiple_errors_all_reported() {
        let text = minimal_quantum()
            .replace("\"r\":0.5", "\"r\":1.2")
            .replace("\"epsilon\":0.1", "\"epsilon\":0.9");
        let errs = parse_config(&text, true).unwrap_err();
        assert!(errs.len() >= 2, "{errs:?}");
    }

    #[test]
    fn roundtrip_canonical() {
        let (cfg, _) = parse_config(&minimal_quantum(), true).unwrap();
        let emitted = emit_config(&cfg);
        let (back, _) = parse_config(&emitted, true).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(content_hash(&cfg), content_hash(&back));
    }

    #[test]
    fn classical_config_builds() {
        let text = serde_json::json!({
            "system": {"kind": "classical",
                        "builtin": {"family": "linear1d", "mark_bound": 1.0,
                                    "modes": [{"a": -1.0, "b": 0.5, "gamma": 0.0}]}},
            "controller": {"l": 1.0, "l_star": 1.0, "epsilon": 0.5, "r": 0.5, "j": 1},
            "run": {"t_final": 5.0, "dt": 0.001, "n_traj": 3, "seed": 1, "x0": [2.0]}
        })
        .to_string();
        let (cfg, _) = parse_config(&text, true).unwrap();
        let sys = build_classical_system(&cfg).unwrap();
        assert_eq!(sys.subsystems.len(), 1);
        assert_eq!(sys.dim(), 1);
    }

    #[test]
    fn missing_k_r_is_config_error() {
        let text = minimal_quantum().replace(",\"k_r\":[[[1.0,0.0]]]", "");
        let errs = parse_config(&text, true).unwrap_err();
        assert!(errs.iter().any(|e| e.path.contains("k_r")), "{errs:?}");
    }
}
