//! Secure ISAC waveform design for cell-free MIMO networks.
//!
//! The crate computes transmit precoders and artificial-noise (AN) covariances
//! for a set of ISAC access points that serve single-antenna users while
//! sensing a target that is also treated as an eavesdropper. The design
//! minimizes the trace of the inverse Fisher information of the multistatic
//! radar observation subject to per-user SINR floors, a ceiling on the
//! eavesdropper SNR and per-AP power budgets, using a semidefinite relaxation.
//!
//! Module map:
//!
//! * [`scenario`]: geometry, steering vectors, channel generation.
//! * [`sigmodel`]: lifted variables, beamformers and closed-form metrics.
//! * [`fim`]: the Fisher information as a linear operator of the lifted variables.
//! * [`solver`]: a standard-form conic program and a primal-dual interior-point backend.
//! * [`sdp`]: the relaxed design problem expressed as a conic program.
//! * [`extract`]: rank diagnostics, beamformer recovery and tightness checks.
//! * [`experiments`]: sweep runner and the validation suite.
//!
//! Angles follow one convention throughout: measured from array broadside,
//! with every ULA axis parallel to the x-axis and broadside pointing to +y.

pub mod error;
pub mod experiments;
pub mod extract;
pub mod fim;
pub mod linalg;
pub mod oracle;
pub mod scenario;
pub mod sdp;
pub mod sigmodel;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use extract::{DesignSolution, TightnessThresholds};
pub use fim::{EtaLayout, FimOperator};
pub use linalg::{CMat, CVec, C64};
pub use scenario::{Scenario, ScenarioConfig};
pub use sdp::{DesignProblem, SolveReport, SolveStatus};
pub use sigmodel::{BeamformerSet, LiftedVariables};
