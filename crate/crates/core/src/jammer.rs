//! Jamming signal generation in frequency and time domain, with configurable
//! symbol distribution, resource-element targeting, and a per-OFDM-symbol
//! power allocation.

use crate::channel::{FlatChannel, TdlChannel, apply_freq, apply_time};
use crate::grid::{GridSpec, ReKind};
use crate::ofdm::{OfdmParams, modulate_streams};
use crate::seeds;
use crate::{C64, Error, Result};
use nalgebra::DMatrix;
use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Budget slack when validating a power allocation.
const BUDGET_TOL: f64 = 1e-9;

/// Per-OFDM-symbol jammer transmit powers with an average-power budget.
///
/// Powers are linear and relative to the average per-RE UE transmit power;
/// the budget constrains the mean: `mean(rho) ≤ rho_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    rho: Vec<f64>,
    rho_max: f64,
}

impl PowerAllocation {
    pub fn new(rho: Vec<f64>, rho_max: f64) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::InvalidParameter("empty power allocation".into()));
        }
        if !(rho_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "power budget must be positive, got {rho_max}"
            )));
        }
        if let Some(bad) = rho.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "per-symbol powers must be non-negative, got {bad}"
            )));
        }
        let mean = rho.iter().sum::<f64>() / rho.len() as f64;
        if mean > rho_max + BUDGET_TOL {
            return Err(Error::InvalidParameter(format!(
                "mean power {mean} exceeds the budget {rho_max}"
            )));
        }
        Ok(PowerAllocation { rho, rho_max })
    }

    /// Budget-saturating uniform allocation: every symbol at `rho_max`.
    pub fn uniform(rho_max: f64, n_symbols: usize) -> Result<Self> {
        Self::new(vec![rho_max; n_symbols], rho_max)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn n_symbols(&self) -> usize {
        self.rho.len()
    }

    pub fn mean(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }
}

/// Which resource elements the jammer targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JammerKind {
    /// All resource elements.
    Barrage,
    /// Pilot and silent resource elements (the CSI-acquisition phase).
    Pilot,
    /// Data resource elements only.
    Data,
    /// An explicit set of OFDM symbol indices.
    SparseSymbols(BTreeSet<usize>),
    /// An explicit set of subcarrier indices.
    SparseSubcarriers(BTreeSet<usize>),
    /// Time-domain barrage jammer; `cp_compliant = false` transmits a plain
    /// sample stream without OFDM structure.
    TimeBarrage { cp_compliant: bool },
}

impl JammerKind {
    pub fn is_time_domain(&self) -> bool {
        matches!(self, JammerKind::TimeBarrage { .. })
    }
}

/// Distribution of the jammer transmit symbols; all have unit average power
/// before the per-symbol power scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolDist {
    /// Uniform on the complex disk of radius √2.
    UniformDisk,
    /// CN(0, 1).
    Gaussian,
    /// Uniform over a unit-energy QAM constellation of the given order.
    Qam(usize),
}

/// Jammer configuration: targeting, symbol distribution, antenna count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JammerConfig {
    pub kind: JammerKind,
    pub dist: SymbolDist,
    pub n_antennas: usize,
}

fn draw_unit_symbol<R: Rng + ?Sized>(dist: SymbolDist, rng: &mut R) -> Result<C64> {
    Ok(match dist {
        SymbolDist::UniformDisk => {
            // radius √2 gives E|w|² = 1
            let r = std::f64::consts::SQRT_2 * rng.random::<f64>().sqrt();
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            C64::from_polar(r, phi)
        }
        SymbolDist::Gaussian => seeds::standard_cn(rng),
        SymbolDist::Qam(order) => {
            let c = match order {
                4 => crate::grid::Constellation::qpsk(),
                16 => crate::grid::Constellation::qam16(),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "unsupported jammer QAM order {order}"
                    )));
                }
            };
            c.points[rng.random_range(0..c.points.len())]
        }
    })
}

fn validate_sparse(kind: &JammerKind, spec: &GridSpec) -> Result<()> {
    match kind {
        JammerKind::SparseSymbols(set) => {
            if set.is_empty() {
                return Err(Error::InvalidParameter("empty sparse symbol set".into()));
            }
            if let Some(&bad) = set.iter().find(|&&t| t >= spec.n_symbols()) {
                return Err(Error::InvalidParameter(format!(
                    "sparse symbol index {bad} out of range for {} symbols",
                    spec.n_symbols()
                )));
            }
        }
        JammerKind::SparseSubcarriers(set) => {
            if set.is_empty() {
                return Err(Error::InvalidParameter("empty sparse subcarrier set".into()));
            }
            if let Some(&bad) = set.iter().find(|&&f| f >= spec.n_subcarriers()) {
                return Err(Error::InvalidParameter(format!(
                    "sparse subcarrier index {bad} out of range for {} subcarriers",
                    spec.n_subcarriers()
                )));
            }
        }
        _ => {}
    }
    Ok(())
}

fn in_mask(kind: &JammerKind, spec: &GridSpec, t: usize, f: usize) -> bool {
    match kind {
        JammerKind::Barrage => true,
        JammerKind::Pilot => matches!(spec.kinds()[t], ReKind::Pilot(_) | ReKind::Silent),
        JammerKind::Data => spec.kinds()[t] == ReKind::Data,
        JammerKind::SparseSymbols(set) => set.contains(&t),
        JammerKind::SparseSubcarriers(set) => set.contains(&f),
        JammerKind::TimeBarrage { .. } => false,
    }
}

/// Draws the frequency-domain jammer transmit grid (`n_antennas × n_symbols ×
/// n_subcarriers`).
///
/// Entries in the kind's target mask carry unit-power symbols scaled by
/// `√rho[t]`; entries outside the mask are zero. The unit symbols are drawn
/// regardless of mask and power, so two calls with the same seed differ only
/// by the power scaling.
pub fn draw_jammer_grid(
    cfg: &JammerConfig,
    pa: &PowerAllocation,
    spec: &GridSpec,
    seed: u64,
) -> Result<Array3<C64>> {
    if cfg.kind.is_time_domain() {
        return Err(Error::WrongDomain(
            "draw_jammer_grid requires a frequency-domain jammer kind".into(),
        ));
    }
    if cfg.n_antennas == 0 {
        return Err(Error::InvalidParameter("jammer needs at least one antenna".into()));
    }
    if pa.n_symbols() != spec.n_symbols() {
        return Err(Error::ShapeMismatch(format!(
            "power allocation covers {} symbols, grid has {}",
            pa.n_symbols(),
            spec.n_symbols()
        )));
    }
    validate_sparse(&cfg.kind, spec)?;
    let (i_ant, ns, nsc) = (cfg.n_antennas, spec.n_symbols(), spec.n_subcarriers());
    let mut rng = seeds::rng(seed, &[]);
    let mut w = Array3::zeros((i_ant, ns, nsc));
    for i in 0..i_ant {
        for t in 0..ns {
            let amp = pa.rho()[t].sqrt();
            for f in 0..nsc {
                let unit = draw_unit_symbol(cfg.dist, &mut rng)?;
                if in_mask(&cfg.kind, spec, t, f) {
                    w[(i, t, f)] = unit * amp;
                }
            }
        }
    }
    Ok(w)
}

/// Adds the jammer interference to a receive grid: `y' = y + G·w` per RE,
/// using the jammer's own channel realization.
pub fn superimpose_freq(
    y: &Array3<C64>,
    g_jam: &FlatChannel,
    w: &Array3<C64>,
) -> Result<Array3<C64>> {
    let jam = apply_freq(g_jam, w)?;
    if y.dim() != jam.dim() {
        return Err(Error::ShapeMismatch(format!(
            "receive grid is {:?} but jammer contribution is {:?}",
            y.dim(),
            jam.dim()
        )));
    }
    Ok(y + &jam)
}

/// Generates the time-domain jammer interference at the receiver, aligned
/// with the frame's sample timeline (`n_rx × frame samples`).
///
/// With `cp_compliant = true` the jammer OFDM-modulates a barrage grid (with
/// cyclic prefix) before the channel; with `cp_compliant = false` it sends a
/// continuous i.i.d. sample stream with power `rho[t]` during symbol `t`'s
/// span.
pub fn jam_time(
    cfg: &JammerConfig,
    j_ch: &TdlChannel,
    pa: &PowerAllocation,
    p: &OfdmParams,
    n_subcarriers: usize,
    seed: u64,
) -> Result<Array2<C64>> {
    let JammerKind::TimeBarrage { cp_compliant } = cfg.kind else {
        return Err(Error::WrongDomain(
            "jam_time requires a time-domain jammer kind".into(),
        ));
    };
    if cfg.n_antennas != j_ch.n_tx() {
        return Err(Error::ShapeMismatch(format!(
            "jammer has {} antennas but its channel expects {}",
            cfg.n_antennas,
            j_ch.n_tx()
        )));
    }
    if pa.n_symbols() != p.n_symbols {
        return Err(Error::ShapeMismatch(format!(
            "power allocation covers {} symbols, frame has {}",
            pa.n_symbols(),
            p.n_symbols
        )));
    }
    let mut rng = seeds::rng(seed, &[]);
    let x = if cp_compliant {
        let mut grid = Array3::zeros((cfg.n_antennas, p.n_symbols, n_subcarriers));
        for i in 0..cfg.n_antennas {
            for t in 0..p.n_symbols {
                let amp = pa.rho()[t].sqrt();
                for f in 0..n_subcarriers {
                    grid[(i, t, f)] = draw_unit_symbol(cfg.dist, &mut rng)? * amp;
                }
            }
        }
        modulate_streams(&grid, p)?
    } else {
        let mut x = Array2::zeros((cfg.n_antennas, p.frame_len()));
        for i in 0..cfg.n_antennas {
            for k in 0..p.frame_len() {
                let t = k / p.symbol_len();
                x[(i, k)] = draw_unit_symbol(cfg.dist, &mut rng)? * pa.rho()[t].sqrt();
            }
        }
        x
    };
    apply_time(j_ch, &x)
}

/// Per-subcarrier fractions of receive interference per spatial dimension.
#[derive(Debug, Clone, Serialize)]
pub struct RankStats {
    /// `fractions[f][d]`: fraction σ_d²/Σσ² of interference power in the
    /// d-th strongest dimension at subcarrier `f` (all zero when flagged).
    pub fractions: Vec<Vec<f64>>,
    /// Numerical rank per subcarrier: singular values above
    /// `threshold · σ_1`.
    pub ranks: Vec<usize>,
    /// True when the interference was identically zero on every subcarrier.
    pub zero_power: bool,
}

impl RankStats {
    /// Median of the per-subcarrier numerical ranks.
    pub fn median_rank(&self) -> usize {
        let mut sorted = self.ranks.clone();
        sorted.sort_unstable();
        sorted[sorted.len() / 2]
    }

    /// Fractions averaged over subcarriers, one entry per dimension.
    pub fn mean_fractions(&self) -> Vec<f64> {
        let n = self.fractions.len();
        let dims = self.fractions[0].len();
        (0..dims)
            .map(|d| self.fractions.iter().map(|f| f[d]).sum::<f64>() / n as f64)
            .collect()
    }
}

/// Ordered singular-value fractions of demodulated interference.
///
/// `samples` are noise-free receive grids (`n_rx × n_symbols ×
/// n_subcarriers`) sharing one channel realization. Per subcarrier the
/// receive vectors of all grids and symbols form a B×n sample matrix whose
/// ordered squared singular values, normalized by their sum, give the
/// fraction of interference per spatial dimension. Zero-power interference is
/// returned as an all-zero flagged result rather than an error.
pub fn interference_rank_stats(samples: &[Array3<C64>], threshold: f64) -> Result<RankStats> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidParameter("no interference samples".into()))?;
    let (b, ns, nsc) = first.dim();
    if samples.iter().any(|s| s.dim() != (b, ns, nsc)) {
        return Err(Error::ShapeMismatch("interference samples differ in shape".into()));
    }
    let n = samples.len() * ns;
    if n < b {
        return Err(Error::InvalidParameter(format!(
            "need at least {b} samples per subcarrier, got {n}"
        )));
    }
    let mut fractions = Vec::with_capacity(nsc);
    let mut ranks = Vec::with_capacity(nsc);
    let mut zero_power = true;
    for f in 0..nsc {
        // Gram matrix of the B×n sample matrix; eigenvalues are σ_d².
        let mut gram = DMatrix::<C64>::zeros(b, b);
        for s in samples {
            for t in 0..ns {
                for r in 0..b {
                    for c in 0..b {
                        gram[(r, c)] += s[(r, t, f)] * s[(c, t, f)].conj();
                    }
                }
            }
        }
        let eig = crate::linalg::hermitian_eigvals_desc(&gram);
        let total: f64 = eig.iter().sum();
        if total <= 0.0 {
            fractions.push(vec![0.0; b]);
            ranks.push(0);
            continue;
        }
        zero_power = false;
        let sigma1 = eig[0].sqrt();
        ranks.push(eig.iter().filter(|&&l| l.sqrt() > threshold * sigma1).count());
        fractions.push(eig.iter().map(|&l| l / total).collect());
    }
    Ok(RankStats { fractions, ranks, zero_power })
}
