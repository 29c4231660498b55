//! Long latency periods in a cloud server whose customer population grows
//! like `t^alpha`.
//!
//! The crate covers the whole pipeline:
//!
//! * [`model`]: workload model description and population arithmetic;
//! * [`innovations`]: innovation and noise laws (log-MGFs, samplers);
//! * [`rate`]: limit and segment log-MGFs, Legendre transforms, Lorenz
//!   curves and capacity inversion;
//! * [`simulator`]: reproducible workload-deviation paths;
//! * [`segments`]: `R_t(A)` and `T_r(A)` detectors with brute-force oracles;
//! * [`experiments`]: Monte Carlo checks of the strong law and the uniform
//!   large deviation bounds, and the SLA planner.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod innovations;
pub mod model;
pub mod quadrature;
pub mod rate;
pub mod rng;
pub mod segments;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use experiments::{run_strong_law, run_uldp, sla_plan, SlaPlan, StrongLawConfig, UldpConfig};
pub use model::{CustomerGroup, MACoefficients, ModelDocument, ModelSpec};
pub use rate::{lorenz, LegendreResult, RateConfig, RateFunctionCtx, Transform};
pub use segments::{r_stat, t_stat, SegmentReport, ThresholdSet};
pub use simulator::{simulate, NoiseMode, PathConfig, WorkloadPath};
