//! OFDM resource-grid layout, constellations, bit mapping, and soft demapping.

use crate::{C64, Error, LLR_CLIP, Result, logistic};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

/// Role of one OFDM symbol. The role is identical across all subcarriers of
/// that symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReKind {
    /// All transmitters idle (used by the receiver to observe the jammer).
    Silent,
    /// One-hot pilot owned by the given UE index.
    Pilot(usize),
    /// Payload symbols for all UEs.
    Data,
}

/// Layout of an OFDM resource grid: which symbols are silent, pilot, or data.
///
/// Construction through [`build_grid_spec`] guarantees the layout invariants:
/// silence first, then one one-hot pilot symbol per UE in UE order, then at
/// least one data symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    n_symbols: usize,
    n_subcarriers: usize,
    n_ue: usize,
    kinds: Vec<ReKind>,
}

impl GridSpec {
    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_ue(&self) -> usize {
        self.n_ue
    }

    /// Per-symbol kinds, length `n_symbols`.
    pub fn kinds(&self) -> &[ReKind] {
        &self.kinds
    }

    pub fn n_silent(&self) -> usize {
        self.kinds.iter().filter(|k| **k == ReKind::Silent).count()
    }

    pub fn n_data_symbols(&self) -> usize {
        self.kinds.iter().filter(|k| **k == ReKind::Data).count()
    }

    /// Symbol index of the pilot owned by `ue`.
    pub fn pilot_symbol(&self, ue: usize) -> usize {
        self.kinds
            .iter()
            .position(|k| *k == ReKind::Pilot(ue))
            .expect("each UE owns exactly one pilot symbol")
    }

    pub fn silent_symbols(&self) -> Vec<usize> {
        self.positions(|k| k == ReKind::Silent)
    }

    pub fn data_symbols(&self) -> Vec<usize> {
        self.positions(|k| k == ReKind::Data)
    }

    fn positions(&self, pred: impl Fn(ReKind) -> bool) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| pred(**k))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of data bits carried by one frame at `bits_per_symbol` bits per
    /// data resource element.
    pub fn n_data_bits(&self, bits_per_symbol: usize) -> usize {
        self.n_ue * self.n_data_symbols() * self.n_subcarriers * bits_per_symbol
    }
}

/// Builds the silent-then-pilot-then-data grid layout.
///
/// The first `n_silent` symbols are [`ReKind::Silent`], the next `n_ue`
/// symbols carry one-hot pilots in UE order, and the remainder are data.
pub fn build_grid_spec(
    n_ue: usize,
    n_silent: usize,
    n_symbols: usize,
    n_subcarriers: usize,
) -> Result<GridSpec> {
    if n_ue == 0 {
        return Err(Error::InvalidSpec("at least one UE is required".into()));
    }
    if n_subcarriers == 0 {
        return Err(Error::InvalidSpec("at least one subcarrier is required".into()));
    }
    if n_silent + n_ue >= n_symbols {
        return Err(Error::InvalidSpec(format!(
            "{n_silent} silent + {n_ue} pilot symbols leave no data symbols in a {n_symbols}-symbol frame"
        )));
    }
    let mut kinds = Vec::with_capacity(n_symbols);
    kinds.extend(std::iter::repeat_n(ReKind::Silent, n_silent));
    kinds.extend((0..n_ue).map(ReKind::Pilot));
    kinds.extend(std::iter::repeat_n(ReKind::Data, n_symbols - n_silent - n_ue));
    Ok(GridSpec {
        n_symbols,
        n_subcarriers,
        n_ue,
        kinds,
    })
}

/// Supported modulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

/// A Gray-labeled constellation with unit average energy.
///
/// `points[idx]` is the symbol for the bit pattern `idx` read MSB-first, i.e.
/// bits `(b0, .., b_{k-1})` map to index `b0·2^{k-1} + .. + b_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub modulation: Modulation,
    pub bits_per_symbol: usize,
    pub points: Vec<C64>,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        match modulation {
            Modulation::Qpsk => Self::qpsk(),
            Modulation::Qam16 => Self::qam16(),
        }
    }

    /// QPSK with bit pair (b0, b1): b0 drives the in-phase component, b1 the
    /// quadrature component; bit 0 maps to +1/√2 and bit 1 to −1/√2.
    pub fn qpsk() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let level = |b: usize| if b == 0 { a } else { -a };
        let points = (0..4)
            .map(|idx| C64::new(level((idx >> 1) & 1), level(idx & 1)))
            .collect();
        Constellation {
            modulation: Modulation::Qpsk,
            bits_per_symbol: 2,
            points,
        }
    }

    /// 16-QAM with bits (b0, b1, b2, b3): b0/b2 drive the in-phase component
    /// and b1/b3 the quadrature component, Gray-coded per axis.
    pub fn qam16() -> Self {
        let s = 1.0 / 10.0f64.sqrt();
        let axis = |sign_bit: usize, mag_bit: usize| {
            let sign = 1.0 - 2.0 * sign_bit as f64;
            sign * (2.0 - (1.0 - 2.0 * mag_bit as f64)) * s
        };
        let points = (0..16)
            .map(|idx| {
                let (b0, b1, b2, b3) = ((idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1);
                C64::new(axis(b0, b2), axis(b1, b3))
            })
            .collect();
        Constellation {
            modulation: Modulation::Qam16,
            bits_per_symbol: 4,
            points,
        }
    }

    /// Bits for point index `idx`, MSB-first.
    pub fn index_bits(&self, idx: usize) -> Vec<u8> {
        (0..self.bits_per_symbol)
            .map(|i| ((idx >> (self.bits_per_symbol - 1 - i)) & 1) as u8)
            .collect()
    }

    /// Nearest-point hard demapping back to bits.
    pub fn hard_demap(&self, symbols: &[C64]) -> Vec<u8> {
        let mut bits = Vec::with_capacity(symbols.len() * self.bits_per_symbol);
        for y in symbols {
            let best = self
                .points
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| (*y - **a).norm_sqr().partial_cmp(&(*y - **b).norm_sqr()).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            bits.extend(self.index_bits(best));
        }
        bits
    }
}

/// Bit estimates in the probability domain: `values[n]` estimates P(b_n = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBits {
    pub values: Vec<f64>,
}

impl SoftBits {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Hard decisions: 1 where P(b=1) > 1/2.
    pub fn hard(&self) -> Vec<u8> {
        self.values.iter().map(|&p| u8::from(p > 0.5)).collect()
    }
}

/// Maps a bit vector onto constellation symbols.
pub fn map_bits(bits: &[u8], c: &Constellation) -> Result<Vec<C64>> {
    let k = c.bits_per_symbol;
    if !bits.len().is_multiple_of(k) {
        return Err(Error::ShapeMismatch(format!(
            "{} bits do not divide into {}-bit symbols",
            bits.len(),
            k
        )));
    }
    Ok(bits
        .chunks_exact(k)
        .map(|chunk| {
            let idx = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            c.points[idx]
        })
        .collect())
}

/// Posterior bit probabilities for equalized symbols observed through
/// `y = s + CN(0, sigma²)`.
///
/// For QPSK this reduces to P(b0=1) = logistic(−2√2·Re(y)/σ²) and the same
/// for b1 with Im(y); other constellations enumerate the points. LLRs are
/// clipped at ±[`LLR_CLIP`], so outputs stay strictly inside (0, 1).
pub fn demap_soft(eq_symbols: &[C64], eff_noise_var: &[f64], c: &Constellation) -> Result<SoftBits> {
    if eq_symbols.len() != eff_noise_var.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} symbols but {} noise variances",
            eq_symbols.len(),
            eff_noise_var.len()
        )));
    }
    if let Some(bad) = eff_noise_var.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "effective noise variance must be positive, got {bad}"
        )));
    }
    let k = c.bits_per_symbol;
    let mut values = Vec::with_capacity(eq_symbols.len() * k);
    match c.modulation {
        Modulation::Qpsk => {
            let two_sqrt2 = 2.0 * std::f64::consts::SQRT_2;
            for (y, &var) in eq_symbols.iter().zip(eff_noise_var) {
                for comp in [y.re, y.im] {
                    let llr = (two_sqrt2 * comp / var).clamp(-LLR_CLIP, LLR_CLIP);
                    values.push(logistic(-llr));
                }
            }
        }
        _ => {
            for (y, &var) in eq_symbols.iter().zip(eff_noise_var) {
                values.extend(demap_enumerate(*y, var, c));
            }
        }
    }
    Ok(SoftBits { values })
}

/// Exact per-bit posteriors by enumerating all constellation points.
fn demap_enumerate(y: C64, var: f64, c: &Constellation) -> Vec<f64> {
    let k = c.bits_per_symbol;
    let metrics: Vec<f64> = c.points.iter().map(|p| -(y - p).norm_sqr() / var).collect();
    let max_metric = metrics.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..k)
        .map(|bit| {
            let (mut num1, mut num0) = (0.0, 0.0);
            for (idx, m) in metrics.iter().enumerate() {
                let w = (m - max_metric).exp();
                if (idx >> (k - 1 - bit)) & 1 == 1 {
                    num1 += w;
                } else {
                    num0 += w;
                }
            }
            // llr > 0 means bit = 0 more likely
            let llr = (num0.ln() - num1.ln()).clamp(-LLR_CLIP, LLR_CLIP);
            logistic(-llr)
        })
        .collect()
}

/// Places data symbols, pilots, and silence into the per-UE transmit grid
/// (`n_ue × n_symbols × n_subcarriers`).
///
/// `data_syms` must hold `n_ue · n_data_symbols · n_subcarriers` symbols in
/// (ue, data symbol, subcarrier) order. UE `u` transmits `pilot_value` on all
/// subcarriers of its own pilot symbol and nothing during silence or other
/// UEs' pilots.
pub fn scatter_frame(data_syms: &[C64], pilot_value: C64, spec: &GridSpec) -> Result<Array3<C64>> {
    let expected = spec.n_ue() * spec.n_data_symbols() * spec.n_subcarriers();
    if data_syms.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "expected {expected} data symbols, got {}",
            data_syms.len()
        )));
    }
    let (u, ns, nsc) = (spec.n_ue(), spec.n_symbols(), spec.n_subcarriers());
    let mut grid = Array3::<C64>::zeros((u, ns, nsc));
    let data_ts = spec.data_symbols();
    let mut next = 0;
    for ue in 0..u {
        for f in 0..nsc {
            grid[(ue, spec.pilot_symbol(ue), f)] = pilot_value;
        }
        for &t in &data_ts {
            for f in 0..nsc {
                grid[(ue, t, f)] = data_syms[next];
                next += 1;
            }
        }
    }
    Ok(grid)
}
