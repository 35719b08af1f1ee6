//! MIMO-OTFS integrated sensing and communication.
//!
//! The crate covers the full signal chain of a multi-antenna OTFS transceiver
//! that serves a monostatic radar receiver and a remote single-antenna
//! communication receiver with the same frame:
//!
//! - [`frame`]: delay-Doppler symbol grids, per-antenna DD windows, ISFFT,
//!   Heisenberg transform and the sampled waveform matrix `S`.
//! - [`channel`]: steering vectors, compact radar/communication observation
//!   models with explicit ISI/ICI structure, a continuous-time reference
//!   model, and the DD-domain channel matrix.
//! - [`comm_rx`]: DD demodulation, LMMSE estimation and the log-det
//!   achievable rate.
//! - [`radar`]: the reduced-complexity GLRT delay-Doppler map, CA-CFAR,
//!   angle spectrum with interference subtraction, and a 2-D FFT benchmark.
//! - [`designer`]: track-mode trade-off design (Rayleigh-quotient beamformer
//!   plus DD-domain water-filling).
//!
//! Matrices are dense and column-major; `vec(X)` stacks columns, so sample
//! `l = m*N + n` of a time signal is fast-time index `n` of symbol `m`.

pub mod channel;
pub mod comm_rx;
pub mod designer;
mod error;
pub mod frame;
pub mod params;
pub mod radar;
pub mod rng;
#[cfg(test)]
mod testutil;
pub mod transforms;

pub use error::{OtfsError, Result};
pub use num_complex::Complex64;
pub use params::{AmbiguityLimits, OtfsParams, SPEED_OF_LIGHT};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
