//! Link-level MIMO-OFDM jamming and anti-jamming simulator.
//!
//! The library simulates the uplink of a multiuser MIMO-OFDM system under a
//! jamming attack and provides the machinery to *learn* a jammer's
//! per-OFDM-symbol power allocation by stochastic gradient descent:
//!
//! * [`grid`] — resource-grid layout (silent / pilot / data symbols),
//!   constellations, bit mapping and soft demapping
//! * [`channel`] — flat Rayleigh and tapped-delay-line channels, Gauss-Markov
//!   channel aging, AWGN
//! * [`ofdm`] — cyclic-prefix OFDM modulation between grids and sample streams
//! * [`jammer`] — barrage / pilot / data / sparse / time-domain jammers with a
//!   per-symbol power allocation
//! * [`rx`] — LS channel estimation, jammer-subspace estimation, orthogonal
//!   projection (POS), LMMSE and IAN-LMMSE equalization
//! * [`fec`] — alist-defined LDPC codes with flooding min-sum decoding and
//!   per-iteration soft outputs
//! * [`learn`] — jammer loss functions, budget reparameterization,
//!   finite-difference gradients with common random numbers, Adam, training
//! * [`harness`] — configuration, BER/BLER sweeps, interference-rank
//!   histograms, effectiveness-gain search, result serialization

pub mod channel;
pub mod fec;
pub mod grid;
pub mod harness;
pub mod jammer;
pub mod learn;
pub mod linalg;
pub mod ofdm;
pub mod rx;
pub mod seeds;
pub mod sim;

mod error;

pub use error::{Error, Result};

/// Complex baseband sample type used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Bit log-likelihood ratios are clipped to this magnitude before conversion
/// to probabilities, which keeps every probability strictly inside (0, 1) and
/// every loss value finite.
pub const LLR_CLIP: f64 = 30.0;

/// logistic(x) = 1 / (1 + exp(-x))
pub(crate) fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
