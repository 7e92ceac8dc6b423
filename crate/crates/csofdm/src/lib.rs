//! Compressed-sensing channel estimation for OFDM over sparse multipath
//! channels with non-Gaussian path-amplitude statistics.
//!
//! The library covers the full simulation chain:
//!
//! - [`multipath`]: clustered random channel generation (lognormal or
//!   Rayleigh path amplitudes, with or without delay decay) and its FIR
//!   tap image through a configurable pulse shape.
//! - [`ofdm`]: partial-DFT operators for the pilot comb and the synthesis
//!   of noisy pilot observations.
//! - [`estimators`]: a non-sparse LS/ML benchmark, a genie-aided sparse LS
//!   benchmark, greedy OMP with optional binary-search delay refinement
//!   (OMPBR), BPDN via accelerated proximal gradient, and the matching
//!   error-covariance models.
//! - [`compressibility`]: the compressibility index (a Jain-fairness ratio
//!   of tap powers, reciprocal of an empirical fourth moment), oracle
//!   residual profiles and their CI-based lower bounds.
//! - [`receiver`]: MMSE equalization under imperfect CSI, Gray-mapped
//!   QPSK/16-QAM, and BER measurement.
//! - [`harness`]: declarative, seeded, bit-reproducible Monte Carlo sweeps
//!   with CSV output, plus presets for the standard figures.
//!
//! Conventions: the DFT operators are normalized (`F_{K,M}ᴴF_{K,M} = I`),
//! channel power is normalized to the configured receive power, and the
//! per-subcarrier SNR maps to a noise variance `σ² = 10^(−snr/10)/K`.

pub mod compressibility;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod multipath;
pub mod ofdm;
pub mod receiver;
pub mod rng;

pub use error::{Error, Result};
