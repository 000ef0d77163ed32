//! Certified randomness from Leggett-Garg inequality violation on a single
//! qubit.
//!
//! A qubit is measured in the computational basis at up to three instants
//! `t1 < t2 < t3`, with rotations `U(θ₁)` and `U(θ₂)` in between. Five
//! circuits estimate the correlators `c12`, `c23`, `c13` and the marginals
//! needed for the no-signalling-in-time (NSIT) checks. An LGI value
//! `c12 + c23 − c13 > 1` with NSIT satisfied certifies a lower bound on the
//! min-entropy of the outcomes.
//!
//! Modules:
//! - [`qcore`]: density matrices, gates, projective measurement, `ZXZXZ` decomposition.
//! - [`protocol`]: the five settings, exact distributions and [`LgiReport`].
//! - [`solver`]: angles for a target LGI value.
//! - [`sampler`]: seeded shots, bit extraction, min-entropy and certificates.
//! - [`noise`]: channels, noise models, noisy experiments and layout scoring.
//! - [`mitigation`]: calibration matrices and readout correction.
//! - [`bell`]: the CHSH contrast experiment.
//! - [`stats`]: monobit and runs tests.

pub mod bell;
pub mod circuit;
pub mod error;
pub mod mitigation;
pub mod noise;
pub mod protocol;
pub mod qcore;
pub mod reference;
pub mod rng;
pub mod sampler;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use noise::{ConfusionMatrix, NoiseModel};
pub use protocol::{CircuitSetting, JointDistribution, LgiReport, Marginal, ProtocolParams};
pub use qcore::{Outcome, QubitState};
pub use reference::AngleUnit;
pub use sampler::{BitStream, DiscardPolicy, ExperimentRun, RandomnessCertificate, ShotRecord};
pub use solver::{InitialStateSpec, SolveRequest, SolveResult};
