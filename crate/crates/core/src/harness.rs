//! Configuration, Monte-Carlo BER/BLER sweeps, interference-rank histograms,
//! effectiveness-gain search, and result serialization.
//!
//! Every entry point is a pure function of (config, seed): identical inputs
//! produce byte-identical output files.

use crate::channel::NoiseSpec;
use crate::fec::systematize;
use crate::grid::{Constellation, Modulation, build_grid_spec};
use crate::jammer::{
    JammerConfig, JammerKind, PowerAllocation, RankStats, SymbolDist, draw_jammer_grid,
    interference_rank_stats, jam_time,
};
use crate::learn::{LossKind, TrainConfig, train};
use crate::ofdm::{OfdmParams, demodulate_streams};
use crate::rx::ReceiverConfig;
use crate::seeds;
use crate::sim::{ChannelModel, FecScenario, JammerScenario, Scenario, simulate_frame};
use crate::{C64, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

/// Frames simulated per parallel batch; accumulation happens between batches
/// so the stopping rule is independent of thread scheduling.
const FRAME_CHUNK: usize = 32;

/// Seed-path tags for the harness entry points.
mod tag {
    pub const SWEEP: u64 = 0x42455253; // BER sweep frames
    pub const RANK_CHANNEL: u64 = 0x524b4348;
    pub const RANK_SYMBOLS: u64 = 0x524b5359;
    pub const GAIN: u64 = 0x4741494e;
}

// ---------------------------------------------------------------------------
// configuration schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SimBer,
    RankHist,
    Train,
    Gain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_ue: usize,
    #[serde(default)]
    pub n_silent: usize,
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    #[serde(default = "default_modulation")]
    pub modulation: Modulation,
}

fn default_modulation() -> Modulation {
    Modulation::Qpsk
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(rename = "type", default = "default_channel_type")]
    pub kind: ChannelKind,
    /// TDL tap count.
    #[serde(default = "default_taps", alias = "L")]
    pub l: usize,
    /// TDL exponential PDP decay constant, in taps.
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_alpha")]
    pub alpha_ue: f64,
    #[serde(default = "default_alpha")]
    pub alpha_jammer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Flat,
    Tdl,
}

fn default_channel_type() -> ChannelKind {
    ChannelKind::Flat
}
fn default_taps() -> usize {
    8
}
fn default_decay() -> f64 {
    4.0
}
fn default_alpha() -> f64 {
    1.0
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            kind: ChannelKind::Flat,
            l: default_taps(),
            decay: default_decay(),
            alpha_ue: 1.0,
            alpha_jammer: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfig {
    pub n_fft: usize,
    #[serde(default)]
    pub cp_len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerSection {
    pub kind: JammerKindConfig,
    #[serde(default = "default_dist")]
    pub dist: DistConfig,
    #[serde(default = "default_qam_order")]
    pub qam_order: usize,
    #[serde(default = "default_one")]
    pub n_antennas: usize,
    pub rho_max_db: f64,
    /// Optional explicit per-symbol allocation (linear); uniform at the
    /// budget otherwise.
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    pub cp_compliant: bool,
    /// Explicit symbol / subcarrier sets for the sparse kinds.
    #[serde(default)]
    pub symbols: Option<BTreeSet<usize>>,
    #[serde(default)]
    pub subcarriers: Option<BTreeSet<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JammerKindConfig {
    Barrage,
    Pilot,
    Data,
    SparseSymbols,
    SparseSubcarriers,
    TimeBarrage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistConfig {
    UniformDisk,
    Gaussian,
    Qam,
}

fn default_dist() -> DistConfig {
    DistConfig::UniformDisk
}
fn default_qam_order() -> usize {
    4
}
fn default_one() -> usize {
    1
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FecConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub alist_path: String,
    #[serde(default = "default_iters")]
    pub n_iters: usize,
}

fn default_iters() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub snr_dbs: Vec<f64>,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
}

fn default_min_errors() -> u64 {
    100
}
fn default_max_frames() -> u64 {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default)]
    pub snr_db: f64,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_steps() -> usize {
    500
}
fn default_batch() -> usize {
    32
}
fn default_loss() -> LossKind {
    LossKind::L1
}
fn default_fd_step() -> f64 {
    1e-2
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            steps: default_steps(),
            batch: default_batch(),
            snr_db: 0.0,
            loss: default_loss(),
            fd_step: default_fd_step(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankConfig {
    /// Independent channel realizations (covariance blocks).
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    /// Relative singular-value threshold for the numerical rank.
    #[serde(default = "default_rank_threshold")]
    pub threshold: f64,
}

fn default_realizations() -> usize {
    50
}
fn default_rank_threshold() -> f64 {
    1e-3
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            n_realizations: default_realizations(),
            threshold: default_rank_threshold(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    #[serde(default = "default_gain_snr")]
    pub target_snr_db: f64,
    pub search_lo_db: f64,
    pub search_hi_db: f64,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
}

fn default_gain_snr() -> f64 {
    5.0
}

/// Top-level experiment configuration (one JSON file).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    pub n_rx_antennas: usize,
    pub grid: GridConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub ofdm: Option<OfdmConfig>,
    #[serde(default)]
    pub jammer: Option<JammerSection>,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub fec: Option<FecConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub train: Option<TrainSection>,
    #[serde(default)]
    pub rank: Option<RankConfig>,
    #[serde(default)]
    pub gain: Option<GainConfig>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        let cfg: Config = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Builds the simulation scenario, resolving defaults and loading the
    /// FEC code from disk. `base_dir` anchors relative alist paths.
    pub fn scenario(&self, base_dir: &Path) -> Result<Scenario> {
        let grid = build_grid_spec(
            self.grid.n_ue,
            self.grid.n_silent,
            self.grid.n_symbols,
            self.grid.n_subcarriers,
        )?;
        let channel = match self.channel.kind {
            ChannelKind::Flat => ChannelModel::Flat {
                alpha_ue: self.channel.alpha_ue,
                alpha_jammer: self.channel.alpha_jammer,
            },
            ChannelKind::Tdl => {
                let ofdm = self.ofdm.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("channel type \"tdl\" requires the `ofdm` section".into())
                })?;
                ChannelModel::Tdl {
                    n_taps: self.channel.l,
                    decay: self.channel.decay,
                    ofdm: OfdmParams::new(ofdm.n_fft, ofdm.cp_len, self.grid.n_symbols)?,
                }
            }
        };
        let jammer = self.jammer.as_ref().map(|j| self.jammer_scenario(j)).transpose()?;
        let fec = match &self.fec {
            Some(f) if f.enabled => {
                let path = base_dir.join(&f.alist_path);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::InvalidConfig(format!("cannot read alist {}: {e}", path.display()))
                })?;
                let h = crate::fec::load_alist(&text)?;
                Some(FecScenario { code: systematize(&h)?, n_iters: f.n_iters })
            }
            _ => None,
        };
        let scenario = Scenario {
            grid,
            constellation: Constellation::new(self.grid.modulation),
            n_rx: self.n_rx_antennas,
            channel,
            jammer,
            receiver: self.receiver,
            fec,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn jammer_scenario(&self, j: &JammerSection) -> Result<JammerScenario> {
        let kind = match j.kind {
            JammerKindConfig::Barrage => JammerKind::Barrage,
            JammerKindConfig::Pilot => JammerKind::Pilot,
            JammerKindConfig::Data => JammerKind::Data,
            JammerKindConfig::SparseSymbols => JammerKind::SparseSymbols(
                j.symbols.clone().ok_or_else(|| {
                    Error::InvalidConfig("sparse-symbols jammer needs `symbols`".into())
                })?,
            ),
            JammerKindConfig::SparseSubcarriers => JammerKind::SparseSubcarriers(
                j.subcarriers.clone().ok_or_else(|| {
                    Error::InvalidConfig("sparse-subcarriers jammer needs `subcarriers`".into())
                })?,
            ),
            JammerKindConfig::TimeBarrage => JammerKind::TimeBarrage { cp_compliant: j.cp_compliant },
        };
        let dist = match j.dist {
            DistConfig::UniformDisk => SymbolDist::UniformDisk,
            DistConfig::Gaussian => SymbolDist::Gaussian,
            DistConfig::Qam => SymbolDist::Qam(j.qam_order),
        };
        let rho_max = 10f64.powf(j.rho_max_db / 10.0);
        let power = match &j.rho {
            Some(rho) => PowerAllocation::new(rho.clone(), rho_max)?,
            None => PowerAllocation::uniform(rho_max, self.grid.n_symbols)?,
        };
        Ok(JammerScenario {
            config: JammerConfig { kind, dist, n_antennas: j.n_antennas },
            power,
        })
    }
}

// ---------------------------------------------------------------------------
// BER/BLER sweeps
// ---------------------------------------------------------------------------

/// One Monte-Carlo operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub n_bits: u64,
    pub n_bit_errors: u64,
    pub ber: f64,
    pub n_blocks: u64,
    pub n_block_errors: u64,
    pub bler: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Fixed-column CSV rendering.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,n_bits,n_bit_errors,ber,n_blocks,n_block_errors,bler\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.snr_db, r.n_bits, r.n_bit_errors, r.ber, r.n_blocks, r.n_block_errors, r.bler
            ));
        }
        out
    }
}

fn run_snr_point(
    scn: &Scenario,
    noise: &NoiseSpec,
    snr_db: f64,
    seed_tags: &[u64],
    min_errors: u64,
    max_frames: u64,
) -> Result<SweepRow> {
    let (mut bits, mut bit_errors, mut blocks, mut block_errors) = (0u64, 0u64, 0u64, 0u64);
    let mut frame = 0u64;
    while bit_errors < min_errors && frame < max_frames {
        let chunk = FRAME_CHUNK.min((max_frames - frame) as usize);
        let counts: Vec<(u64, u64, u64, u64)> = (frame..frame + chunk as u64)
            .into_par_iter()
            .map(|fi| {
                let mut tags = seed_tags.to_vec();
                tags.push(fi);
                let out = simulate_frame(scn, noise, seeds::derive(scn.seed, &tags))?;
                Ok(out.error_counts())
            })
            .collect::<Result<_>>()?;
        for (be, b, ble, bl) in counts {
            bit_errors += be;
            bits += b;
            block_errors += ble;
            blocks += bl;
        }
        frame += chunk as u64;
    }
    Ok(SweepRow {
        snr_db,
        n_bits: bits,
        n_bit_errors: bit_errors,
        ber: bit_errors as f64 / bits as f64,
        n_blocks: blocks,
        n_block_errors: block_errors,
        bler: block_errors as f64 / blocks as f64,
    })
}

/// Simulates frames per SNR point until `min_errors` bit errors accumulate or
/// `max_frames` frames have been spent.
pub fn run_ber_sweep(
    scn: &Scenario,
    snr_dbs: &[f64],
    min_errors: u64,
    max_frames: u64,
) -> Result<SweepResult> {
    if snr_dbs.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one SNR point".into()));
    }
    if min_errors == 0 {
        return Err(Error::InvalidConfig("min_errors must be at least 1".into()));
    }
    scn.validate()?;
    let rows = snr_dbs
        .iter()
        .enumerate()
        .map(|(si, &snr_db)| {
            let noise = scn.noise_for_ebn0(snr_db);
            run_snr_point(scn, &noise, snr_db, &[tag::SWEEP, si as u64], min_errors, max_frames)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

// ---------------------------------------------------------------------------
// interference-rank histograms
// ---------------------------------------------------------------------------

/// Pooled interference-rank data over channel realizations and subcarriers.
#[derive(Debug, Clone, Serialize)]
pub struct RankHistResult {
    pub threshold: f64,
    pub n_realizations: usize,
    /// Mean fraction of interference power per ordered dimension.
    pub mean_fractions: Vec<f64>,
    /// Median numerical rank over realizations and subcarriers.
    pub median_rank: usize,
    /// Mean residual power fraction after nulling the strongest dimension.
    pub mean_residual_after_top_dim: f64,
    /// Largest fraction observed in any dimension beyond the strongest.
    pub max_fraction_beyond_dim1: f64,
    /// Histogram of per-(realization, subcarrier) fractions per dimension:
    /// 20 bins over [0, 1].
    pub histogram_bin_edges: Vec<f64>,
    pub histogram_counts: Vec<Vec<u64>>,
    /// True when every realization produced zero interference.
    pub zero_power: bool,
}

/// Jammer-only, noise-free interference statistics: per channel realization a
/// block of frames shares the channel while the jammer symbols vary, and the
/// per-subcarrier singular-value fractions are pooled over realizations.
pub fn run_rank_hist(scn: &Scenario, n_realizations: usize, threshold: f64) -> Result<RankHistResult> {
    scn.validate()?;
    let jam = scn
        .jammer
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("rank analysis needs a jammer".into()))?;
    if n_realizations == 0 {
        return Err(Error::InvalidConfig("need at least one realization".into()));
    }
    let spec = &scn.grid;
    let b = scn.n_rx;
    // enough symbol samples per covariance block to resolve all B dimensions
    let frames_per_block = (2 * b).div_ceil(spec.n_symbols()).max(2);

    let per_block: Vec<RankStats> = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let r = r as u64;
            let samples: Vec<ndarray::Array3<C64>> = match &scn.channel {
                ChannelModel::Flat { .. } => {
                    let g = crate::channel::draw_flat_rayleigh(
                        b,
                        jam.config.n_antennas,
                        1,
                        spec.n_subcarriers(),
                        seeds::derive(scn.seed, &[tag::RANK_CHANNEL, r]),
                    )?
                    .tile_symbols(spec.n_symbols());
                    (0..frames_per_block)
                        .map(|s| {
                            let w = draw_jammer_grid(
                                &jam.config,
                                &jam.power,
                                spec,
                                seeds::derive(scn.seed, &[tag::RANK_SYMBOLS, r, s as u64]),
                            )?;
                            crate::channel::apply_freq(&g, &w)
                        })
                        .collect::<Result<_>>()?
                }
                ChannelModel::Tdl { n_taps, decay, ofdm } => {
                    let j_ch = crate::channel::tdl_from_exponential_pdp(
                        b,
                        jam.config.n_antennas,
                        *n_taps,
                        *decay,
                        seeds::derive(scn.seed, &[tag::RANK_CHANNEL, r]),
                    )?;
                    (0..frames_per_block)
                        .map(|s| {
                            let seed = seeds::derive(scn.seed, &[tag::RANK_SYMBOLS, r, s as u64]);
                            let y = if jam.config.kind.is_time_domain() {
                                jam_time(&jam.config, &j_ch, &jam.power, ofdm, spec.n_subcarriers(), seed)?
                            } else {
                                let w = draw_jammer_grid(&jam.config, &jam.power, spec, seed)?;
                                let g = crate::channel::freq_response(&j_ch, ofdm.n_fft)?
                                    .truncate_subcarriers(spec.n_subcarriers())?
                                    .tile_symbols(spec.n_symbols());
                                return crate::channel::apply_freq(&g, &w);
                            };
                            demodulate_streams(&y, ofdm, spec.n_subcarriers())
                        })
                        .collect::<Result<_>>()?
                }
            };
            interference_rank_stats(&samples, threshold)
        })
        .collect::<Result<_>>()?;

    // pool fractions and ranks
    let dims = b;
    let n_bins = 20;
    let mut counts = vec![vec![0u64; n_bins]; dims];
    let mut sums = vec![0.0f64; dims];
    let mut ranks: Vec<usize> = Vec::new();
    let mut total = 0usize;
    let mut residual_sum = 0.0f64;
    let mut max_beyond = 0.0f64;
    for stats in &per_block {
        for fr in &stats.fractions {
            for d in 0..dims {
                sums[d] += fr[d];
                let bin = ((fr[d] * n_bins as f64) as usize).min(n_bins - 1);
                counts[d][bin] += 1;
                if d > 0 {
                    max_beyond = max_beyond.max(fr[d]);
                }
            }
            residual_sum += 1.0 - fr[0];
            total += 1;
        }
        ranks.extend(&stats.ranks);
    }
    ranks.sort_unstable();
    let zero_power = per_block.iter().all(|s| s.zero_power);
    Ok(RankHistResult {
        threshold,
        n_realizations,
        mean_fractions: sums.iter().map(|s| s / total as f64).collect(),
        median_rank: ranks[ranks.len() / 2],
        mean_residual_after_top_dim: residual_sum / total as f64,
        max_fraction_beyond_dim1: max_beyond,
        histogram_bin_edges: (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect(),
        histogram_counts: counts,
        zero_power,
    })
}

// ---------------------------------------------------------------------------
// effectiveness gain
// ---------------------------------------------------------------------------

/// Result of the barrage-equivalent-power search.
#[derive(Debug, Clone, Serialize)]
pub struct GainResult {
    /// Uniform-barrage power (dB) matching the learned jammer's BER.
    pub equivalent_db: f64,
    /// `equivalent_db` minus the learned jammer's budget (dB).
    pub gain_db: f64,
    pub ber_learned: f64,
    pub ber_at_equivalent: f64,
    pub bisection_steps: usize,
}

/// Power half-width (dB) at which the bisection stops.
const GAIN_TOL_DB: f64 = 0.25;
const GAIN_MAX_ITERS: usize = 20;

fn ber_at(scn: &Scenario, power: PowerAllocation, snr_db: f64, min_errors: u64, max_frames: u64, salt: u64) -> Result<(f64, f64)> {
    let scn = scn.with_jammer_power(power)?;
    let noise = scn.noise_for_ebn0(snr_db);
    let row = run_snr_point(&scn, &noise, snr_db, &[tag::GAIN, salt], min_errors, max_frames)?;
    let se = (row.ber * (1.0 - row.ber) / row.n_bits as f64).sqrt();
    Ok((row.ber, se))
}

/// Bisection on uniform-barrage power until its BER matches the learned
/// allocation's BER at `target_snr_db`. The search range must bracket the
/// answer; BER is monotone in barrage power.
pub fn effectiveness_gain(
    learned: &PowerAllocation,
    scn: &Scenario,
    target_snr_db: f64,
    search_lo_db: f64,
    search_hi_db: f64,
    min_errors: u64,
    max_frames: u64,
) -> Result<GainResult> {
    scn.validate()?;
    if search_lo_db >= search_hi_db {
        return Err(Error::InvalidConfig("empty search range".into()));
    }
    let n_symbols = scn.grid.n_symbols();
    let uniform = |db: f64| PowerAllocation::uniform(10f64.powf(db / 10.0), n_symbols);

    let (ber_learned, se_learned) =
        ber_at(scn, learned.clone(), target_snr_db, min_errors, max_frames, 0)?;
    let (ber_lo, _) = ber_at(scn, uniform(search_lo_db)?, target_snr_db, min_errors, max_frames, 1)?;
    let (ber_hi, _) = ber_at(scn, uniform(search_hi_db)?, target_snr_db, min_errors, max_frames, 2)?;
    if ber_learned < ber_lo || ber_learned > ber_hi {
        return Err(Error::Bracket(format!(
            "BER(learned) = {ber_learned} outside [BER({search_lo_db} dB) = {ber_lo}, BER({search_hi_db} dB) = {ber_hi}]"
        )));
    }

    let (mut lo, mut hi) = (search_lo_db, search_hi_db);
    let mut steps = 0;
    let mut mid = 0.5 * (lo + hi);
    let mut ber_mid = f64::NAN;
    while steps < GAIN_MAX_ITERS {
        mid = 0.5 * (lo + hi);
        let (ber, se) = ber_at(scn, uniform(mid)?, target_snr_db, min_errors, max_frames, 3 + steps as u64)?;
        ber_mid = ber;
        steps += 1;
        let tol = 3.0 * (se * se + se_learned * se_learned).sqrt();
        if (ber - ber_learned).abs() <= tol || (hi - lo) * 0.5 <= GAIN_TOL_DB {
            break;
        }
        if ber < ber_learned {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let budget_db = 10.0 * learned.mean().log10();
    Ok(GainResult {
        equivalent_db: mid,
        gain_db: mid - budget_db,
        ber_learned,
        ber_at_equivalent: ber_mid,
        bisection_steps: steps,
    })
}

// ---------------------------------------------------------------------------
// experiment dispatch
// ---------------------------------------------------------------------------

/// Options controlling [`run_experiment`] beyond the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Must match the config `mode` when both are present.
    pub mode: Option<Mode>,
    /// Learned allocation (JSON) for gain mode.
    pub learned_path: Option<std::path::PathBuf>,
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    rho: &'a [f64],
    rho_max: f64,
    final_objective: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LearnedRhoFile {
    Bare(Vec<f64>),
    Object { rho: Vec<f64> },
}

/// Reads the config, dispatches on the mode, writes the result file and a
/// `<out>.resolved.json` echo of the fully resolved configuration.
pub fn run_experiment(config_path: &Path, out_path: &Path, opts: &RunOptions) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let mut cfg = Config::from_json(&text)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let mode = match (cfg.mode, opts.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::InvalidConfig(
                "config `mode` disagrees with the requested subcommand".into(),
            ));
        }
        (a, b) => a.or(b).ok_or_else(|| Error::InvalidConfig("missing field `mode`".into()))?,
    };
    cfg.mode = Some(mode);
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let scenario = cfg.scenario(base_dir)?;

    match mode {
        Mode::SimBer => {
            let sweep = cfg
                .sweep
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("missing field `sweep`".into()))?;
            let result = run_ber_sweep(&scenario, &sweep.snr_dbs, sweep.min_errors, sweep.max_frames)?;
            std::fs::write(out_path, result.to_csv())?;
        }
        Mode::RankHist => {
            let rank = cfg.rank.clone().unwrap_or_default();
            let result = run_rank_hist(&scenario, rank.n_realizations, rank.threshold)?;
            std::fs::write(out_path, serde_json::to_string_pretty(&result)?)?;
        }
        Mode::Train => {
            let section = cfg.train.clone().unwrap_or_default();
            let tc = TrainConfig {
                steps: section.steps,
                batch: section.batch,
                snr_db: section.snr_db,
                loss: section.loss,
                fd_step: section.fd_step,
                seed: cfg.seed,
            };
            let result = train(&tc, &scenario)?;
            let out = TrainOutput {
                rho: result.power.rho(),
                rho_max: result.power.rho_max(),
                final_objective: *result.history.last().unwrap(),
            };
            std::fs::write(out_path, serde_json::to_string_pretty(&out)?)?;
            let mut csv = String::from("step,objective\n");
            for (i, obj) in result.history.iter().enumerate() {
                csv.push_str(&format!("{i},{obj}\n"));
            }
            std::fs::write(history_path(out_path), csv)?;
        }
        Mode::Gain => {
            let gain = cfg
                .gain
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("missing field `gain`".into()))?;
            let learned_path = opts
                .learned_path
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("gain mode needs --learned".into()))?;
            let learned_text = std::fs::read_to_string(learned_path)?;
            let rho = match serde_json::from_str::<LearnedRhoFile>(&learned_text)? {
                LearnedRhoFile::Bare(v) => v,
                LearnedRhoFile::Object { rho } => rho,
            };
            let jam = scenario.jammer.as_ref().ok_or_else(|| {
                Error::InvalidConfig("gain mode needs a jammer in the scenario".into())
            })?;
            let learned = PowerAllocation::new(rho, jam.power.rho_max())?;
            let result = effectiveness_gain(
                &learned,
                &scenario,
                gain.target_snr_db,
                gain.search_lo_db,
                gain.search_hi_db,
                gain.min_errors,
                gain.max_frames,
            )?;
            std::fs::write(out_path, serde_json::to_string_pretty(&result)?)?;
        }
    }

    // echo the resolved config for reproducibility
    let resolved = serde_json::to_string_pretty(&cfg)?;
    std::fs::write(resolved_path(out_path), resolved)?;
    Ok(())
}

/// Path of the resolved-config echo written next to a result file.
pub fn resolved_path(out_path: &Path) -> std::path::PathBuf {
    let mut s = out_path.as_os_str().to_os_string();
    s.push(".resolved.json");
    std::path::PathBuf::from(s)
}

/// Path of the per-step objective CSV written next to a training result.
pub fn history_path(out_path: &Path) -> std::path::PathBuf {
    let mut s = out_path.as_os_str().to_os_string();
    s.push(".history.csv");
    std::path::PathBuf::from(s)
}
