//! Joint hybrid beamforming and constant-modulus waveform design for
//! over-the-air aggregation with integrated sensing signals.
//!
//! The hybrid design alternates between per-UE precoders (Riemannian
//! conjugate gradient on the oblique manifold), the analog phase combiner
//! (successive convex approximation over phases) and the closed-form digital
//! combiner. The waveform design lifts the constant-modulus, similarity
//! constrained least-squares problem to an SDP and recovers waveforms by
//! Gaussian randomization.

pub mod ao_driver;
pub mod digital_combiner;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oblique_rcg;
pub mod procrustes;
pub mod sca_analog;
pub mod sdr_waveform;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use model::{ChannelSet, LfmParams, SystemConfig};
