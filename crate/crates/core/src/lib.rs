//! Simulator of a plug-and-play phase-coding QKD link with an active
//! global-phase randomizer.
//!
//! * [`optics`]: coherent-state polarization optics and threshold detection.
//! * [`randomizer`]: functional generator pattern and double-pass modulator.
//! * [`protocol`]: the BB84 round trip, sifting and QBER estimation.
//! * [`experiments`]: delay scan, phase-uniformity audit, Fock-basis density
//!   matrices.

// `!(x >= 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod optics;
pub mod protocol;
pub mod randomizer;
pub mod rng;

pub use error::{Error, Result};
pub use experiments::{
    delay_scan, export_csv, fock_density_matrix, offdiag_norm, uniformity_chisq, ChiSquareAudit,
    DelayScanResult, FockDensityMatrix, PhaseDistribution, ScanPoint,
};
pub use optics::{DetectorConfig, PolarizedAmplitude, Pulse, PulsePair};
pub use protocol::{
    estimate_qber, run_session, sift, Basis, BasisBit, DetectionRecord, DoubleClickPolicy,
    OpticsConfig, PhotonBudget, Polarization, QberEstimate, SessionConfig, SessionOutput,
};
pub use randomizer::{PhasePattern, RandomizerTiming};
