//! Stabilization of jump-diffusion stochastic systems by hysteresis
//! switching: simulators for switched classical SDEs and for measurement-
//! driven quantum master equations, the analytic certificates that predict
//! when the switching law stabilizes a target, and the ensemble statistics
//! used to test those predictions against sampled paths.

pub mod analysis;
pub mod certificates;
pub mod classical;
pub mod config;
pub mod error;
pub mod lyapunov;
pub mod matrix;
pub mod operator;
pub mod quad;
pub mod quantum;
pub mod report;
pub mod sampler;
