//! Cyclic-prefix OFDM modulation between resource grids and sample streams.
//!
//! Subcarriers occupy a contiguous block starting at DFT bin 0; both
//! directions use unitary scaling (1/√n_fft) so that power conventions match
//! between domains.

use crate::{C64, Error, Result};
use ndarray::{Array2, Array3};
use rustfft::FftPlanner;

/// OFDM numerology for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmParams {
    pub n_fft: usize,
    /// Cyclic-prefix length in samples.
    pub cp_len: usize,
    /// OFDM symbols per frame.
    pub n_symbols: usize,
}

impl OfdmParams {
    pub fn new(n_fft: usize, cp_len: usize, n_symbols: usize) -> Result<Self> {
        if n_fft == 0 || n_symbols == 0 {
            return Err(Error::InvalidParameter(
                "FFT size and symbol count must be at least 1".into(),
            ));
        }
        if cp_len >= n_fft {
            return Err(Error::InvalidParameter(format!(
                "cyclic prefix of {cp_len} samples must be shorter than the FFT size {n_fft}"
            )));
        }
        Ok(OfdmParams { n_fft, cp_len, n_symbols })
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.cp_len
    }

    /// Samples per frame.
    pub fn frame_len(&self) -> usize {
        self.n_symbols * self.symbol_len()
    }
}

/// Modulates one antenna's grid (`n_symbols × n_subcarriers`) to time samples.
///
/// Per symbol: the subcarriers fill bins `0..n_subcarriers` of an `n_fft` bin
/// vector, the rest stay zero; a unitary inverse DFT produces `n_fft` samples
/// and the last `cp_len` of them are prepended as the cyclic prefix.
pub fn modulate(grid: &ndarray::ArrayView2<C64>, p: &OfdmParams) -> Result<Vec<C64>> {
    let (ns, nsc) = grid.dim();
    if ns != p.n_symbols {
        return Err(Error::ShapeMismatch(format!(
            "grid has {ns} symbols, params expect {}",
            p.n_symbols
        )));
    }
    if nsc > p.n_fft {
        return Err(Error::ShapeMismatch(format!(
            "{nsc} subcarriers exceed the FFT size {}",
            p.n_fft
        )));
    }
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(p.n_fft);
    let scale = 1.0 / (p.n_fft as f64).sqrt();
    let mut out = Vec::with_capacity(p.frame_len());
    let mut bins = vec![C64::new(0.0, 0.0); p.n_fft];
    for t in 0..ns {
        bins.fill(C64::new(0.0, 0.0));
        for f in 0..nsc {
            bins[f] = grid[(t, f)];
        }
        ifft.process(&mut bins);
        for b in bins.iter_mut() {
            *b *= scale;
        }
        out.extend_from_slice(&bins[p.n_fft - p.cp_len..]);
        out.extend_from_slice(&bins);
    }
    Ok(out)
}

/// Demodulates time samples back to a grid: per symbol drop the cyclic
/// prefix, apply a unitary DFT, and keep bins `0..n_subcarriers`.
pub fn demodulate(samples: &[C64], p: &OfdmParams, n_subcarriers: usize) -> Result<Array2<C64>> {
    if samples.len() != p.frame_len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} samples, got {}",
            p.frame_len(),
            samples.len()
        )));
    }
    if n_subcarriers > p.n_fft {
        return Err(Error::ShapeMismatch(format!(
            "{n_subcarriers} subcarriers exceed the FFT size {}",
            p.n_fft
        )));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(p.n_fft);
    let scale = 1.0 / (p.n_fft as f64).sqrt();
    let mut grid = Array2::zeros((p.n_symbols, n_subcarriers));
    let mut bins = vec![C64::new(0.0, 0.0); p.n_fft];
    for t in 0..p.n_symbols {
        let start = t * p.symbol_len() + p.cp_len;
        bins.copy_from_slice(&samples[start..start + p.n_fft]);
        fft.process(&mut bins);
        for f in 0..n_subcarriers {
            grid[(t, f)] = bins[f] * scale;
        }
    }
    Ok(grid)
}

/// [`modulate`] applied per antenna: (antennas, n_symbols, n_subcarriers) to
/// (antennas, frame samples).
pub fn modulate_streams(grid: &Array3<C64>, p: &OfdmParams) -> Result<Array2<C64>> {
    let (ants, _, _) = grid.dim();
    let mut out = Array2::zeros((ants, p.frame_len()));
    for a in 0..ants {
        let samples = modulate(&grid.index_axis(ndarray::Axis(0), a), p)?;
        for (k, s) in samples.into_iter().enumerate() {
            out[(a, k)] = s;
        }
    }
    Ok(out)
}

/// [`demodulate`] applied per antenna.
pub fn demodulate_streams(
    samples: &Array2<C64>,
    p: &OfdmParams,
    n_subcarriers: usize,
) -> Result<Array3<C64>> {
    let (ants, len) = samples.dim();
    if len != p.frame_len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} samples per antenna, got {len}",
            p.frame_len()
        )));
    }
    let mut out = Array3::zeros((ants, p.n_symbols, n_subcarriers));
    for a in 0..ants {
        let row: Vec<C64> = samples.row(a).to_vec();
        let grid = demodulate(&row, p, n_subcarriers)?;
        for t in 0..p.n_symbols {
            for f in 0..n_subcarriers {
                out[(a, t, f)] = grid[(t, f)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{TdlChannel, apply_time, freq_response, tdl_from_exponential_pdp};
    use crate::seeds;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn random_grid(ns: usize, nsc: usize, seed: u64) -> Array2<C64> {
        let mut rng = seeds::rng(seed, &[]);
        Array2::from_shape_fn((ns, nsc), |_| seeds::standard_cn(&mut rng))
    }

    #[test]
    fn round_trip_without_cp() {
        let p = OfdmParams::new(16, 0, 3).unwrap();
        let grid = random_grid(3, 16, 1);
        let samples = modulate(&grid.view(), &p).unwrap();
        assert_eq!(samples.len(), 3 * 16);
        let back = demodulate(&samples, &p, 16).unwrap();
        for (a, b) in grid.iter().zip(back.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-10);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-10);
        }
    }

    #[test]
    fn round_trip_with_cp_and_partial_band() {
        let p = OfdmParams::new(32, 8, 4).unwrap();
        let grid = random_grid(4, 20, 2);
        let samples = modulate(&grid.view(), &p).unwrap();
        assert_eq!(samples.len(), 4 * 40);
        let back = demodulate(&samples, &p, 20).unwrap();
        for (a, b) in grid.iter().zip(back.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-10);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_subcarrier_is_complex_exponential() {
        let p = OfdmParams::new(8, 0, 1).unwrap();
        let mut grid = Array2::zeros((1, 8));
        grid[(0, 2)] = C64::new(1.0, 0.0);
        let samples = modulate(&grid.view(), &p).unwrap();
        let scale = 1.0 / (8.0f64).sqrt();
        for (k, s) in samples.iter().enumerate() {
            let want = C64::from_polar(scale, 2.0 * std::f64::consts::PI * 2.0 * k as f64 / 8.0);
            assert_abs_diff_eq!(s.re, want.re, epsilon = 1e-12);
            assert_abs_diff_eq!(s.im, want.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn parseval_without_cp() {
        let p = OfdmParams::new(64, 0, 2).unwrap();
        let grid = random_grid(2, 64, 3);
        let samples = modulate(&grid.view(), &p).unwrap();
        let e_time: f64 = samples.iter().map(|s| s.norm_sqr()).sum();
        let e_grid: f64 = grid.iter().map(|s| s.norm_sqr()).sum();
        assert_abs_diff_eq!(e_time, e_grid, epsilon = 1e-10);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(OfdmParams::new(16, 16, 1).is_err());
        let p = OfdmParams::new(8, 2, 2).unwrap();
        assert!(modulate(&random_grid(2, 9, 0).view(), &p).is_err());
        assert!(demodulate(&vec![C64::new(0.0, 0.0); 7], &p, 8).is_err());
    }

    /// With enough cyclic prefix the end-to-end channel is diagonal per
    /// subcarrier and equals the DFT of the taps; with a short prefix the
    /// equality must break.
    #[test]
    fn cp_makes_channel_diagonal_per_subcarrier() {
        let l = 5;
        let ch = tdl_from_exponential_pdp(1, 1, l, 3.0, 11).unwrap();

        let run = |cp_len: usize| -> f64 {
            let p = OfdmParams::new(32, cp_len, 4).unwrap();
            let grid = random_grid(4, 32, 12);
            let tx = modulate(&grid.view(), &p).unwrap();
            let x = Array2::from_shape_fn((1, tx.len()), |(_, k)| tx[k]);
            let rx = apply_time(&ch, &x).unwrap();
            let rx_samples: Vec<C64> = rx.row(0).to_vec();
            let got = demodulate(&rx_samples, &p, 32).unwrap();
            let fr = freq_response(&ch, 32).unwrap();
            let mut worst = 0.0f64;
            // skip symbol 0: with x[k] = 0 for k < 0 its CP sees no ISI by construction
            for t in 1..4 {
                for f in 0..32 {
                    let want = fr.h[(0, f, 0, 0)] * grid[(t, f)];
                    worst = worst.max((got[(t, f)] - want).norm());
                }
            }
            worst
        };

        assert!(run(l - 1) < 1e-8, "CP of L-1 samples must be circular");
        assert!(run(l - 2) > 1e-4, "short CP must leak between subcarriers");
    }

    #[test]
    fn stream_helpers_round_trip() {
        let p = OfdmParams::new(16, 4, 2).unwrap();
        let mut rng = seeds::rng(8, &[]);
        let grid = ndarray::Array3::from_shape_fn((3, 2, 10), |_| seeds::standard_cn(&mut rng));
        let samples = modulate_streams(&grid, &p).unwrap();
        let back = demodulate_streams(&samples, &p, 10).unwrap();
        for (a, b) in grid.iter().zip(back.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-10);
        }
    }

    #[test]
    fn identity_tap_channel_keeps_grid() {
        let taps = ndarray::Array3::from_shape_fn((1, 1, 1), |_| C64::new(1.0, 0.0));
        let ch = TdlChannel { taps, pdp: vec![1.0] };
        let p = OfdmParams::new(16, 3, 2).unwrap();
        let grid = random_grid(2, 16, 5);
        let tx = modulate(&grid.view(), &p).unwrap();
        let x = Array2::from_shape_fn((1, tx.len()), |(_, k)| tx[k]);
        let rx = apply_time(&ch, &x).unwrap();
        let back = demodulate(&rx.row(0).to_vec(), &p, 16).unwrap();
        for (a, b) in grid.iter().zip(back.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-10);
        }
    }
}
