//! Scenario assembly and single-frame simulation, shared by the Monte-Carlo
//! harness and the jammer-learning loop.

use crate::channel::{
    FlatChannel, NoiseSpec, add_awgn, apply_freq, apply_time, draw_flat_rayleigh,
    evolve_gauss_markov, freq_response, tdl_from_exponential_pdp,
};
use crate::fec::{CodeSpec, IterationOutputs, decode_bp, probabilities_to_llrs};
use crate::grid::{Constellation, GridSpec, SoftBits, map_bits, scatter_frame};
use crate::jammer::{JammerConfig, PowerAllocation, draw_jammer_grid, jam_time, superimpose_freq};
use crate::ofdm::{OfdmParams, demodulate_streams, modulate_streams};
use crate::rx::{CsiMode, Mitigation, PerfectCsi, ReceiverConfig, receive_frame};
use crate::seeds::{self, stream};
use crate::{C64, Error, Result};
use rand::Rng;

/// Channel model for the UE and jammer links.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Frequency-flat i.i.d. Rayleigh per resource element with per-symbol
    /// Gauss-Markov aging (α = 1 is block fading).
    Flat { alpha_ue: f64, alpha_jammer: f64 },
    /// Tapped-delay-line channels with exponential power-delay profile,
    /// simulated through OFDM in the time domain.
    Tdl { n_taps: usize, decay: f64, ofdm: OfdmParams },
}

/// Jammer attached to a scenario: targeting/distribution plus the power
/// allocation in effect.
#[derive(Debug, Clone)]
pub struct JammerScenario {
    pub config: JammerConfig,
    pub power: PowerAllocation,
}

/// Forward error correction attached to a scenario.
#[derive(Debug, Clone)]
pub struct FecScenario {
    pub code: CodeSpec,
    pub n_iters: usize,
}

/// A fully specified simulation scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: GridSpec,
    pub constellation: Constellation,
    /// Receive antennas at the base station.
    pub n_rx: usize,
    pub channel: ChannelModel,
    pub jammer: Option<JammerScenario>,
    pub receiver: ReceiverConfig,
    pub fec: Option<FecScenario>,
    pub seed: u64,
}

/// Pilot amplitude: per-RE power 1, so LS estimation divides by a constant.
pub const PILOT_VALUE: C64 = C64::new(1.0, 0.0);

impl Scenario {
    /// Code rate in effect (1 when uncoded).
    pub fn code_rate(&self) -> f64 {
        self.fec.as_ref().map_or(1.0, |f| f.code.rate())
    }

    /// Noise spec for an Eb/N0 operating point under this scenario's
    /// modulation and code rate.
    pub fn noise_for_ebn0(&self, ebn0_db: f64) -> NoiseSpec {
        NoiseSpec::from_ebn0(ebn0_db, self.constellation.bits_per_symbol, self.code_rate())
    }

    /// Cross-module consistency checks; call once before simulating.
    pub fn validate(&self) -> Result<()> {
        if self.n_rx == 0 {
            return Err(Error::InvalidConfig("n_rx_antennas must be at least 1".into()));
        }
        match (&self.channel, &self.jammer) {
            (ChannelModel::Flat { alpha_ue, alpha_jammer }, jam) => {
                for a in [alpha_ue, alpha_jammer] {
                    if !(0.0..=1.0).contains(a) {
                        return Err(Error::InvalidConfig(format!(
                            "aging coefficient {a} outside [0, 1]"
                        )));
                    }
                }
                if let Some(j) = jam {
                    if j.config.kind.is_time_domain() {
                        return Err(Error::InvalidConfig(
                            "a time-domain jammer needs a TDL channel and OFDM parameters".into(),
                        ));
                    }
                }
            }
            (ChannelModel::Tdl { n_taps, ofdm, .. }, _) => {
                if *n_taps == 0 {
                    return Err(Error::InvalidConfig("TDL channel needs at least one tap".into()));
                }
                if ofdm.n_symbols != self.grid.n_symbols() {
                    return Err(Error::InvalidConfig(format!(
                        "OFDM frame has {} symbols but the grid has {}",
                        ofdm.n_symbols,
                        self.grid.n_symbols()
                    )));
                }
                if self.grid.n_subcarriers() > ofdm.n_fft {
                    return Err(Error::InvalidConfig(format!(
                        "{} subcarriers exceed the FFT size {}",
                        self.grid.n_subcarriers(),
                        ofdm.n_fft
                    )));
                }
            }
        }
        if let Some(j) = &self.jammer {
            if j.power.n_symbols() != self.grid.n_symbols() {
                return Err(Error::InvalidConfig(format!(
                    "power allocation covers {} symbols, grid has {}",
                    j.power.n_symbols(),
                    self.grid.n_symbols()
                )));
            }
            if j.config.n_antennas == 0 {
                return Err(Error::InvalidConfig("jammer needs at least one antenna".into()));
            }
        }
        if self.receiver.csi == CsiMode::Estimated
            && matches!(self.receiver.mitigation, Mitigation::Pos | Mitigation::Ian)
            && self.grid.n_silent() == 0
        {
            return Err(Error::InvalidConfig(
                "estimated-CSI mitigation needs silent symbols for jammer estimation".into(),
            ));
        }
        if self.receiver.csi == CsiMode::Perfect
            && matches!(self.receiver.mitigation, Mitigation::Pos | Mitigation::Ian)
            && self.jammer.is_none()
        {
            return Err(Error::InvalidConfig(
                "perfect-CSI mitigation without a jammer has no jammer channel to use".into(),
            ));
        }
        if let Some(fec) = &self.fec {
            let bits = self.grid.n_data_bits(self.constellation.bits_per_symbol);
            if !bits.is_multiple_of(fec.code.n()) {
                return Err(Error::InvalidConfig(format!(
                    "{bits} data bits per frame do not divide into {}-bit codewords",
                    fec.code.n()
                )));
            }
            if fec.n_iters == 0 {
                return Err(Error::InvalidConfig("decoder needs at least one iteration".into()));
            }
        }
        Ok(())
    }

    /// Returns a copy with the jammer power allocation replaced.
    pub fn with_jammer_power(&self, power: PowerAllocation) -> Result<Scenario> {
        let mut out = self.clone();
        let jam = out
            .jammer
            .as_mut()
            .ok_or_else(|| Error::InvalidConfig("scenario has no jammer to re-power".into()))?;
        jam.power = power;
        Ok(out)
    }
}

/// Transmitted reference data and receiver soft outputs for one frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    /// Bits carried on the data REs in (ue, symbol, subcarrier, bit) order;
    /// coded bits when FEC is enabled.
    pub tx_data_bits: Vec<u8>,
    /// Demapper output, same order as `tx_data_bits`.
    pub soft: SoftBits,
    /// Transmitted information bits, concatenated per codeword (coded only).
    pub info_bits: Option<Vec<u8>>,
    /// Per-iteration decoder outputs, concatenated across the frame's
    /// codewords (coded only).
    pub decoder_iterations: Option<IterationOutputs>,
    /// Error-rate blocks in this frame: codewords when coded, 1 when uncoded.
    pub n_blocks: usize,
}

impl FrameOutput {
    /// (bit errors, bits, block errors, blocks) — counted on information bits
    /// after decoding when coded, on raw data bits per frame when uncoded.
    pub fn error_counts(&self) -> (u64, u64, u64, u64) {
        match (&self.info_bits, &self.decoder_iterations) {
            (Some(info), Some(iters)) => {
                let k = info.len() / self.n_blocks;
                let hard = iters.last().hard();
                let mut bit_errors = 0u64;
                let mut block_errors = 0u64;
                for cw in 0..self.n_blocks {
                    let errs = (cw * k..(cw + 1) * k).filter(|&i| hard[i] != info[i]).count();
                    bit_errors += errs as u64;
                    block_errors += u64::from(errs > 0);
                }
                (bit_errors, info.len() as u64, block_errors, self.n_blocks as u64)
            }
            _ => {
                let hard = self.soft.hard();
                let errs = hard
                    .iter()
                    .zip(&self.tx_data_bits)
                    .filter(|(a, b)| a != b)
                    .count() as u64;
                (errs, self.tx_data_bits.len() as u64, u64::from(errs > 0), 1)
            }
        }
    }
}

fn draw_bits(n: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Flat channel draw plus Gauss-Markov aging. Block fading (α = 1) draws a
/// single symbol and tiles it, which leaves the realization unchanged (the
/// evolved symbols would all equal symbol 0) while skipping the unused draws.
fn draw_aged_flat(
    b: usize,
    u: usize,
    spec: &GridSpec,
    alpha: f64,
    channel_seed: u64,
    aging_seed: u64,
) -> Result<FlatChannel> {
    if alpha == 1.0 {
        let base = draw_flat_rayleigh(b, u, 1, spec.n_subcarriers(), channel_seed)?;
        Ok(base.tile_symbols(spec.n_symbols()))
    } else {
        let full =
            draw_flat_rayleigh(b, u, spec.n_symbols(), spec.n_subcarriers(), channel_seed)?;
        evolve_gauss_markov(&full, alpha, aging_seed)
    }
}

/// Builds a per-symbol flat channel from a TDL realization's frequency
/// response, truncated to the grid width and repeated across symbols.
fn flat_from_tdl(
    tdl: &crate::channel::TdlChannel,
    n_fft: usize,
    n_subcarriers: usize,
    n_symbols: usize,
) -> Result<FlatChannel> {
    Ok(freq_response(tdl, n_fft)?
        .truncate_subcarriers(n_subcarriers)?
        .tile_symbols(n_symbols))
}

/// Simulates one frame end to end and runs the receiver.
///
/// `frame_seed` must already identify the frame within its batch; purpose
/// streams (bits, channels, jammer symbols, noise) are split off internally.
pub fn simulate_frame(scn: &Scenario, noise: &NoiseSpec, frame_seed: u64) -> Result<FrameOutput> {
    let spec = &scn.grid;
    let c = &scn.constellation;
    let n_bits = spec.n_data_bits(c.bits_per_symbol);
    let mut bits_rng = seeds::rng(frame_seed, &[stream::BITS]);

    // transmit bits (encode when coded)
    let (tx_data_bits, info_bits) = match &scn.fec {
        Some(fec) => {
            let n_cw = n_bits / fec.code.n();
            let mut info = Vec::with_capacity(n_cw * fec.code.k());
            let mut coded = Vec::with_capacity(n_bits);
            for _ in 0..n_cw {
                let msg = draw_bits(fec.code.k(), &mut bits_rng);
                coded.extend(fec.code.encode(&msg)?);
                info.extend(msg);
            }
            (coded, Some(info))
        }
        None => (draw_bits(n_bits, &mut bits_rng), None),
    };
    let syms = map_bits(&tx_data_bits, c)?;
    let x = scatter_frame(&syms, PILOT_VALUE, spec)?;

    let (y, h_genie, g_genie): (ndarray::Array3<C64>, FlatChannel, Option<FlatChannel>) =
        match &scn.channel {
            ChannelModel::Flat { alpha_ue, alpha_jammer } => {
                let h = draw_aged_flat(
                    scn.n_rx,
                    spec.n_ue(),
                    spec,
                    *alpha_ue,
                    seeds::derive(frame_seed, &[stream::UE_CHANNEL]),
                    seeds::derive(frame_seed, &[stream::UE_AGING]),
                )?;
                let mut y = apply_freq(&h, &x)?;
                let mut g = None;
                if let Some(jam) = &scn.jammer {
                    let g_ch = draw_aged_flat(
                        scn.n_rx,
                        jam.config.n_antennas,
                        spec,
                        *alpha_jammer,
                        seeds::derive(frame_seed, &[stream::JAM_CHANNEL]),
                        seeds::derive(frame_seed, &[stream::JAM_AGING]),
                    )?;
                    let w = draw_jammer_grid(
                        &jam.config,
                        &jam.power,
                        spec,
                        seeds::derive(frame_seed, &[stream::JAM_SYMBOLS]),
                    )?;
                    y = superimpose_freq(&y, &g_ch, &w)?;
                    g = Some(g_ch);
                }
                let y = add_awgn(&y, noise, seeds::derive(frame_seed, &[stream::NOISE]));
                (y, h, g)
            }
            ChannelModel::Tdl { n_taps, decay, ofdm } => {
                let h_tdl = tdl_from_exponential_pdp(
                    scn.n_rx,
                    spec.n_ue(),
                    *n_taps,
                    *decay,
                    seeds::derive(frame_seed, &[stream::UE_CHANNEL]),
                )?;
                let tx = modulate_streams(&x, ofdm)?;
                let mut y_time = apply_time(&h_tdl, &tx)?;
                let mut g = None;
                if let Some(jam) = &scn.jammer {
                    let j_tdl = tdl_from_exponential_pdp(
                        scn.n_rx,
                        jam.config.n_antennas,
                        *n_taps,
                        *decay,
                        seeds::derive(frame_seed, &[stream::JAM_CHANNEL]),
                    )?;
                    if jam.config.kind.is_time_domain() {
                        let interference = jam_time(
                            &jam.config,
                            &j_tdl,
                            &jam.power,
                            ofdm,
                            spec.n_subcarriers(),
                            seeds::derive(frame_seed, &[stream::JAM_SYMBOLS]),
                        )?;
                        y_time = y_time + interference;
                    }
                    g = Some(flat_from_tdl(
                        &j_tdl,
                        ofdm.n_fft,
                        spec.n_subcarriers(),
                        spec.n_symbols(),
                    )?);
                }
                let y_time = add_awgn(&y_time, noise, seeds::derive(frame_seed, &[stream::NOISE]));
                let mut y = demodulate_streams(&y_time, ofdm, spec.n_subcarriers())?;
                // frequency-domain jammer kinds superimpose after demodulation
                if let Some(jam) = &scn.jammer {
                    if !jam.config.kind.is_time_domain() {
                        let w = draw_jammer_grid(
                            &jam.config,
                            &jam.power,
                            spec,
                            seeds::derive(frame_seed, &[stream::JAM_SYMBOLS]),
                        )?;
                        y = superimpose_freq(&y, g.as_ref().unwrap(), &w)?;
                    }
                }
                let h = flat_from_tdl(&h_tdl, ofdm.n_fft, spec.n_subcarriers(), spec.n_symbols())?;
                (y, h, g)
            }
        };

    let genie = PerfectCsi {
        h: &h_genie,
        g: g_genie.as_ref(),
        rho: scn.jammer.as_ref().map(|j| &j.power),
    };
    let soft = receive_frame(
        &y,
        spec,
        &scn.receiver,
        Some(&genie),
        noise.n0,
        c,
        PILOT_VALUE,
    )?;

    // decode per codeword when coded
    let decoder_iterations = match &scn.fec {
        Some(fec) => {
            let n_cw = n_bits / fec.code.n();
            let mut per_iter: Vec<Vec<f64>> = vec![Vec::with_capacity(n_cw * fec.code.k()); fec.n_iters];
            for cw in 0..n_cw {
                let slice = SoftBits {
                    values: soft.values[cw * fec.code.n()..(cw + 1) * fec.code.n()].to_vec(),
                };
                let llrs = probabilities_to_llrs(&slice);
                let outs = decode_bp(&llrs, &fec.code, fec.n_iters)?;
                for (it, out) in outs.iterations.into_iter().enumerate() {
                    per_iter[it].extend(out.values);
                }
            }
            Some(IterationOutputs {
                iterations: per_iter.into_iter().map(|values| SoftBits { values }).collect(),
            })
        }
        None => None,
    };

    let n_blocks = scn.fec.as_ref().map_or(1, |fec| n_bits / fec.code.n());
    Ok(FrameOutput {
        tx_data_bits,
        soft,
        info_bits,
        decoder_iterations,
        n_blocks,
    })
}
