//! Random channel generation, temporal evolution, signal application, and
//! additive noise.

use crate::seeds;
use crate::{C64, Error, Result};
use nalgebra::DMatrix;
use ndarray::{Array, Array2, Array3, Array4, Dimension};

/// Frequency-flat per-RE MIMO channel.
///
/// `h[(t, f, i, j)]` is the gain from transmit antenna `j` to receive antenna
/// `i` on OFDM symbol `t`, subcarrier `f`.
#[derive(Debug, Clone)]
pub struct FlatChannel {
    pub h: Array4<C64>,
}

impl FlatChannel {
    pub fn n_symbols(&self) -> usize {
        self.h.dim().0
    }

    pub fn n_subcarriers(&self) -> usize {
        self.h.dim().1
    }

    pub fn n_rx(&self) -> usize {
        self.h.dim().2
    }

    pub fn n_tx(&self) -> usize {
        self.h.dim().3
    }

    /// The B×U matrix at one resource element.
    pub fn at(&self, t: usize, f: usize) -> DMatrix<C64> {
        let (_, _, b, u) = self.h.dim();
        DMatrix::from_fn(b, u, |i, j| self.h[(t, f, i, j)])
    }

    /// Repeats a single-symbol channel across `n_symbols` OFDM symbols.
    pub fn tile_symbols(&self, n_symbols: usize) -> FlatChannel {
        let (_, nsc, b, u) = self.h.dim();
        let h = Array4::from_shape_fn((n_symbols, nsc, b, u), |(_, f, i, j)| self.h[(0, f, i, j)]);
        FlatChannel { h }
    }

    /// Keeps only the first `n_subcarriers` subcarriers.
    pub fn truncate_subcarriers(&self, n_subcarriers: usize) -> Result<FlatChannel> {
        let (ns, nsc, b, u) = self.h.dim();
        if n_subcarriers > nsc {
            return Err(Error::ShapeMismatch(format!(
                "cannot keep {n_subcarriers} of {nsc} subcarriers"
            )));
        }
        let h = Array4::from_shape_fn((ns, n_subcarriers, b, u), |idx| self.h[idx]);
        Ok(FlatChannel { h })
    }
}

/// Tapped-delay-line MIMO channel, static over a frame.
///
/// `taps[(i, j, l)]` is tap `l` from transmit antenna `j` to receive antenna
/// `i`; the mean tap powers `pdp` sum to one.
#[derive(Debug, Clone)]
pub struct TdlChannel {
    pub taps: Array3<C64>,
    pub pdp: Vec<f64>,
}

impl TdlChannel {
    pub fn n_rx(&self) -> usize {
        self.taps.dim().0
    }

    pub fn n_tx(&self) -> usize {
        self.taps.dim().1
    }

    pub fn n_taps(&self) -> usize {
        self.taps.dim().2
    }
}

/// Per-RE complex noise variance derived from an Eb/N0 operating point.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    /// Complex noise variance per receive antenna per resource element.
    pub n0: f64,
    pub ebn0_db: f64,
}

impl NoiseSpec {
    /// n0 = 1 / (k · R · 10^(Eb/N0 / 10)) for `k` bits per symbol and code
    /// rate `R`, with unit per-RE transmit power per stream.
    pub fn from_ebn0(ebn0_db: f64, bits_per_symbol: usize, code_rate: f64) -> Self {
        let n0 = 1.0 / (bits_per_symbol as f64 * code_rate * 10f64.powf(ebn0_db / 10.0));
        NoiseSpec { n0, ebn0_db }
    }

    pub fn noiseless() -> Self {
        NoiseSpec {
            n0: 0.0,
            ebn0_db: f64::INFINITY,
        }
    }
}

/// Draws an i.i.d. CN(0, 1) channel for every resource element.
pub fn draw_flat_rayleigh(
    b: usize,
    u: usize,
    n_symbols: usize,
    n_subcarriers: usize,
    seed: u64,
) -> Result<FlatChannel> {
    if b == 0 || u == 0 || n_symbols == 0 || n_subcarriers == 0 {
        return Err(Error::InvalidParameter(
            "all channel dimensions must be at least 1".into(),
        ));
    }
    let mut rng = seeds::rng(seed, &[]);
    let mut h = Array4::zeros((n_symbols, n_subcarriers, b, u));
    for elem in h.iter_mut() {
        *elem = seeds::standard_cn(&mut rng);
    }
    Ok(FlatChannel { h })
}

/// First-order Gauss-Markov evolution across OFDM symbols:
/// `H[t+1] = α·H[t] + √(1−α²)·ΔH` with ΔH i.i.d. CN(0, 1).
///
/// Symbol 0 is taken from `ch` unchanged; later symbols are replaced. The
/// marginal per-entry variance stays 1 for any α. α = 1 yields block fading,
/// α = 0 independent symbols.
pub fn evolve_gauss_markov(ch: &FlatChannel, alpha: f64, seed: u64) -> Result<FlatChannel> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "aging coefficient must lie in [0, 1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        // zero innovation: every symbol equals symbol 0 exactly
        return Ok(ch.tile_symbols(ch.n_symbols()));
    }
    let (ns, nsc, b, u) = ch.h.dim();
    let mut rng = seeds::rng(seed, &[]);
    let innov = (1.0 - alpha * alpha).sqrt();
    let mut h = ch.h.clone();
    for t in 1..ns {
        for f in 0..nsc {
            for i in 0..b {
                for j in 0..u {
                    let delta = seeds::standard_cn(&mut rng);
                    h[(t, f, i, j)] = alpha * h[(t - 1, f, i, j)] + innov * delta;
                }
            }
        }
    }
    Ok(FlatChannel { h })
}

/// Draws a tapped-delay-line channel with exponential power-delay profile
/// `pdp[l] ∝ exp(−l / decay)`, normalized to sum 1.
pub fn tdl_from_exponential_pdp(
    b: usize,
    u: usize,
    l: usize,
    decay: f64,
    seed: u64,
) -> Result<TdlChannel> {
    if b == 0 || u == 0 || l == 0 {
        return Err(Error::InvalidParameter(
            "all channel dimensions must be at least 1".into(),
        ));
    }
    if !(decay > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "PDP decay must be positive, got {decay}"
        )));
    }
    let raw: Vec<f64> = (0..l).map(|i| (-(i as f64) / decay).exp()).collect();
    let total: f64 = raw.iter().sum();
    let pdp: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let mut rng = seeds::rng(seed, &[]);
    let mut taps = Array3::zeros((b, u, l));
    for i in 0..b {
        for j in 0..u {
            for (li, &p) in pdp.iter().enumerate() {
                taps[(i, j, li)] = seeds::standard_cn(&mut rng) * p.sqrt();
            }
        }
    }
    Ok(TdlChannel { taps, pdp })
}

/// Time-domain convolution `y[k] = Σ_l H[l] · x[k−l]` with `x[k] = 0` for
/// `k < 0`. Input and output have one row per antenna.
pub fn apply_time(ch: &TdlChannel, x: &Array2<C64>) -> Result<Array2<C64>> {
    let (b, u, l) = ch.taps.dim();
    let (xu, k) = x.dim();
    if xu != u {
        return Err(Error::ShapeMismatch(format!(
            "channel expects {u} transmit streams, signal has {xu}"
        )));
    }
    let mut y = Array2::zeros((b, k));
    for i in 0..b {
        for j in 0..u {
            for li in 0..l {
                let tap = ch.taps[(i, j, li)];
                if tap == C64::new(0.0, 0.0) {
                    continue;
                }
                for t in li..k {
                    y[(i, t)] += tap * x[(j, t - li)];
                }
            }
        }
    }
    Ok(y)
}

/// Per-RE matrix-vector product `Y[:, t, f] = H[t, f] · X[:, t, f]`.
pub fn apply_freq(ch: &FlatChannel, x: &Array3<C64>) -> Result<Array3<C64>> {
    let (ns, nsc, b, u) = ch.h.dim();
    let (xu, xns, xnsc) = x.dim();
    if xu != u || xns != ns || xnsc != nsc {
        return Err(Error::ShapeMismatch(format!(
            "channel is ({ns}, {nsc}, {b}, {u}) but grid is ({xu}, {xns}, {xnsc})"
        )));
    }
    let mut y = Array3::zeros((b, ns, nsc));
    for t in 0..ns {
        for f in 0..nsc {
            for i in 0..b {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..u {
                    acc += ch.h[(t, f, i, j)] * x[(j, t, f)];
                }
                y[(i, t, f)] = acc;
            }
        }
    }
    Ok(y)
}

/// Per-subcarrier frequency response of a tapped-delay-line channel: the
/// unnormalized `n_fft`-point DFT of each tap sequence. The result has a
/// single OFDM symbol and `n_fft` subcarriers; Parseval gives
/// `Σ_f |Ĥ(f)|² = n_fft · Σ_l |h_l|²`.
pub fn freq_response(ch: &TdlChannel, n_fft: usize) -> Result<FlatChannel> {
    let (b, u, l) = ch.taps.dim();
    if n_fft < l {
        return Err(Error::InvalidParameter(format!(
            "FFT size {n_fft} is shorter than the {l}-tap impulse response"
        )));
    }
    let mut h = Array4::zeros((1, n_fft, b, u));
    for i in 0..b {
        for j in 0..u {
            for f in 0..n_fft {
                let mut acc = C64::new(0.0, 0.0);
                for li in 0..l {
                    let phase = -2.0 * std::f64::consts::PI * (f * li) as f64 / n_fft as f64;
                    acc += ch.taps[(i, j, li)] * C64::from_polar(1.0, phase);
                }
                h[(0, f, i, j)] = acc;
            }
        }
    }
    Ok(FlatChannel { h })
}

/// Adds i.i.d. CN(0, n0) noise to every entry. With `n0 = 0` the input is
/// returned unchanged.
pub fn add_awgn<D: Dimension>(y: &Array<C64, D>, noise: &NoiseSpec, seed: u64) -> Array<C64, D> {
    let mut rng = seeds::rng(seed, &[]);
    let sigma = noise.n0.sqrt();
    let mut out = y.clone();
    for elem in out.iter_mut() {
        *elem += seeds::standard_cn(&mut rng) * sigma;
    }
    out
}
