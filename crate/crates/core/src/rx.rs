//! Receiver chain: LS channel estimation from one-hot pilots,
//! jammer-subspace estimation from silent resource elements, projection onto
//! the orthogonal complement of the jammer subspace (POS), LMMSE and
//! IAN-LMMSE equalization, and frame-level soft demapping.

use crate::channel::FlatChannel;
use crate::grid::{Constellation, GridSpec, SoftBits, demap_soft};
use crate::jammer::PowerAllocation;
use crate::linalg::complement_projector;
use crate::{C64, Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Relative singular-value cutoff for the POS pseudoinverse.
pub const POS_SVD_CUTOFF: f64 = 1e-10;

/// Diagonal regularizer added to every equalizer Gram matrix.
const EQ_EPS: f64 = 1e-12;

/// Floor for the LMMSE bias factor; keeps nulled streams finite.
const MU_FLOOR: f64 = 1e-12;

/// Jammer mitigation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mitigation {
    None,
    Pos,
    Ian,
}

/// Channel-state information source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    Perfect,
    Estimated,
}

/// Receiver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub mitigation: Mitigation,
    pub csi: CsiMode,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig { mitigation: Mitigation::None, csi: CsiMode::Estimated }
    }
}

/// Estimated channel state: per-subcarrier UE channel estimates and,
/// optionally, raw jammer-direction observations from silent REs.
#[derive(Debug, Clone)]
pub struct CsiEstimate {
    /// One B×U matrix per subcarrier.
    pub h_hat: Vec<DMatrix<C64>>,
    /// One B×n_silent matrix per subcarrier, when silent REs exist.
    pub j_basis: Option<Vec<DMatrix<C64>>>,
}

/// Genie channel state handed to the receiver under perfect-CSI operation.
#[derive(Debug, Clone, Copy)]
pub struct PerfectCsi<'a> {
    pub h: &'a FlatChannel,
    /// Jammer channel, required for POS and IAN mitigation.
    pub g: Option<&'a FlatChannel>,
    /// Per-symbol jammer power, required for IAN.
    pub rho: Option<&'a PowerAllocation>,
}

/// Per-RE equalizer output: unbiased symbol estimates and the per-stream
/// effective noise variance used for demapping.
#[derive(Debug, Clone)]
pub struct EqualizerOutput {
    pub s_hat: Vec<C64>,
    pub eff_noise_var: Vec<f64>,
}

/// Least-squares UE channel estimation from the one-hot pilots: column `u` of
/// the estimate at subcarrier `f` is `y(pilot_symbol(u), f) / pilot_value`.
pub fn ls_estimate_ue(
    y: &ndarray::Array3<C64>,
    spec: &GridSpec,
    pilot_value: C64,
) -> Result<Vec<DMatrix<C64>>> {
    let (b, ns, nsc) = y.dim();
    if ns != spec.n_symbols() || nsc != spec.n_subcarriers() {
        return Err(Error::ShapeMismatch(format!(
            "receive grid ({ns} symbols, {nsc} subcarriers) does not match the grid spec"
        )));
    }
    if pilot_value.norm() == 0.0 {
        return Err(Error::InvalidParameter("pilot value must be nonzero".into()));
    }
    let u = spec.n_ue();
    let pilot_ts: Vec<usize> = (0..u).map(|ue| spec.pilot_symbol(ue)).collect();
    Ok((0..nsc)
        .map(|f| {
            DMatrix::from_fn(b, u, |i, ue| y[(i, pilot_ts[ue], f)] / pilot_value)
        })
        .collect())
}

/// Collects the raw receive vectors observed during silent REs; per
/// subcarrier the columns span the jammer's spatial directions up to scale,
/// plus noise.
pub fn estimate_jammer_basis(
    y: &ndarray::Array3<C64>,
    spec: &GridSpec,
) -> Result<Vec<DMatrix<C64>>> {
    let silent = spec.silent_symbols();
    if silent.is_empty() {
        return Err(Error::InvalidSpec(
            "jammer-subspace estimation needs at least one silent symbol".into(),
        ));
    }
    let (b, ns, nsc) = y.dim();
    if ns != spec.n_symbols() || nsc != spec.n_subcarriers() {
        return Err(Error::ShapeMismatch(format!(
            "receive grid ({ns} symbols, {nsc} subcarriers) does not match the grid spec"
        )));
    }
    Ok((0..nsc)
        .map(|f| DMatrix::from_fn(b, silent.len(), |i, s| y[(i, silent[s], f)]))
        .collect())
}

/// Projector onto the orthogonal complement of the (estimated) jammer
/// subspace: `P = I − Ĵ Ĵ⁺`. Apply the same projector to channel estimates
/// before equalizing.
pub fn pos_projector(j_basis_sc: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    complement_projector(j_basis_sc, POS_SVD_CUTOFF)
}

/// Convenience wrapper: projects one receive vector.
pub fn pos_project(y: &DVector<C64>, j_basis_sc: &DMatrix<C64>) -> Result<DVector<C64>> {
    Ok(pos_projector(j_basis_sc)? * y)
}

/// Prefactored LMMSE equalizer: `ŝ = Hᴴ (H Hᴴ + C + n0·I + ε·I)⁻¹ y`,
/// de-biased per stream, with the effective noise variance taken as the
/// diagonal of the posterior error covariance divided by the squared bias
/// factor.
///
/// The Cholesky factor and per-stream bias depend only on (H, C, n0), so one
/// equalizer serves every resource element that shares a channel estimate.
#[derive(Debug, Clone)]
pub struct Equalizer {
    chol: nalgebra::Cholesky<C64, nalgebra::Dyn>,
    h: DMatrix<C64>,
    mu: Vec<f64>,
    eff_noise_var: Vec<f64>,
}

impl Equalizer {
    pub fn new(h: &DMatrix<C64>, extra_cov: Option<&DMatrix<C64>>, n0: f64) -> Result<Self> {
        let (b, u) = h.shape();
        if !(n0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise variance {n0} must be >= 0")));
        }
        let mut gram = h * h.adjoint();
        if let Some(c) = extra_cov {
            if c.shape() != (b, b) {
                return Err(Error::ShapeMismatch(format!(
                    "interference covariance is {:?}, expected ({b}, {b})",
                    c.shape()
                )));
            }
            gram += c;
        }
        let diag = C64::new(n0 + EQ_EPS, 0.0);
        for i in 0..b {
            gram[(i, i)] += diag;
        }
        let chol = gram.cholesky().ok_or_else(|| {
            Error::Numerical("equalizer Gram matrix is not positive definite".into())
        })?;
        let f = h.adjoint() * chol.solve(h); // U×U bias matrix F = Hᴴ G⁻¹ H
        let mut mu = Vec::with_capacity(u);
        let mut eff = Vec::with_capacity(u);
        for s in 0..u {
            let m = f[(s, s)].re.clamp(MU_FLOOR, 1.0 - 1e-15);
            mu.push(m);
            eff.push((1.0 - m) / (m * m));
        }
        Ok(Equalizer { chol, h: h.clone(), mu, eff_noise_var: eff })
    }

    pub fn apply(&self, y: &DVector<C64>) -> Result<EqualizerOutput> {
        let b = self.h.nrows();
        if y.len() != b {
            return Err(Error::ShapeMismatch(format!(
                "receive vector has {} entries, channel has {b} rows",
                y.len()
            )));
        }
        let s_biased = self.h.adjoint() * self.chol.solve(y);
        let s_hat = (0..self.h.ncols()).map(|s| s_biased[s] / self.mu[s]).collect();
        Ok(EqualizerOutput { s_hat, eff_noise_var: self.eff_noise_var.clone() })
    }
}

/// LMMSE equalization treating only thermal noise: `ŝ = Hᴴ(HHᴴ + n0·I)⁻¹ y`.
pub fn lmmse_equalize(y: &DVector<C64>, h: &DMatrix<C64>, n0: f64) -> Result<EqualizerOutput> {
    Equalizer::new(h, None, n0)?.apply(y)
}

/// Jammer knowledge used by IAN-LMMSE.
#[derive(Debug, Clone, Copy)]
pub enum JamCsi<'a> {
    /// True jammer channel columns and their per-RE transmit power.
    Perfect { g: &'a DMatrix<C64>, jam_power: f64 },
    /// Raw silent-RE observations; the covariance estimate (1/m)·Ĵ Ĵᴴ then
    /// includes the thermal noise seen during silence.
    Estimated { j_basis: &'a DMatrix<C64> },
}

/// LMMSE equalization that treats the jammer as spatially correlated noise:
/// `ŝ = Hᴴ(HHᴴ + C_jam + n0·I)⁻¹ y`.
pub fn ian_lmmse_equalize(
    y: &DVector<C64>,
    h: &DMatrix<C64>,
    jam: JamCsi<'_>,
    n0: f64,
) -> Result<EqualizerOutput> {
    let c_jam = jam_covariance(jam)?;
    Equalizer::new(h, Some(&c_jam), n0)?.apply(y)
}

/// Spatial covariance of the jammer interference under the given knowledge.
fn jam_covariance(jam: JamCsi<'_>) -> Result<DMatrix<C64>> {
    Ok(match jam {
        JamCsi::Perfect { g, jam_power } => {
            if !(jam_power >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "jammer power {jam_power} must be >= 0"
                )));
            }
            g * g.adjoint() * C64::new(jam_power, 0.0)
        }
        JamCsi::Estimated { j_basis } => {
            let m = j_basis.ncols().max(1) as f64;
            j_basis * j_basis.adjoint() / C64::new(m, 0.0)
        }
    })
}

/// Full receive pipeline over one frame: channel estimation (or genie CSI),
/// optional mitigation, per-RE equalization, and soft demapping.
///
/// Output probabilities are concatenated in (ue, data symbol, subcarrier,
/// bit) order, so the result has `n_ue · n_data_symbols · n_subcarriers ·
/// bits_per_symbol` entries.
pub fn receive_frame(
    y: &ndarray::Array3<C64>,
    spec: &GridSpec,
    rc: &ReceiverConfig,
    perfect: Option<&PerfectCsi<'_>>,
    n0: f64,
    c: &Constellation,
    pilot_value: C64,
) -> Result<SoftBits> {
    let (b, ns, nsc) = y.dim();
    if ns != spec.n_symbols() || nsc != spec.n_subcarriers() {
        return Err(Error::ShapeMismatch(format!(
            "receive grid ({ns} symbols, {nsc} subcarriers) does not match the grid spec"
        )));
    }
    let u = spec.n_ue();
    let k = c.bits_per_symbol;
    let data_ts = spec.data_symbols();
    let mut values = vec![0.0; u * data_ts.len() * nsc * k];

    let estimate = match rc.csi {
        CsiMode::Estimated => {
            let h_hat = ls_estimate_ue(y, spec, pilot_value)?;
            let j_basis = match rc.mitigation {
                Mitigation::Pos | Mitigation::Ian => Some(estimate_jammer_basis(y, spec)?),
                Mitigation::None => None,
            };
            Some(CsiEstimate { h_hat, j_basis })
        }
        CsiMode::Perfect => None,
    };
    let genie = match rc.csi {
        CsiMode::Perfect => {
            let p = perfect.ok_or_else(|| {
                Error::InvalidParameter("perfect-CSI receiver needs genie channel state".into())
            })?;
            if p.h.n_rx() != b || p.h.n_tx() != u
                || p.h.n_symbols() != ns
                || p.h.n_subcarriers() != nsc
            {
                return Err(Error::ShapeMismatch("genie UE channel does not match the frame".into()));
            }
            if matches!(rc.mitigation, Mitigation::Pos | Mitigation::Ian) && p.g.is_none() {
                return Err(Error::InvalidParameter(
                    "perfect-CSI mitigation needs the jammer channel".into(),
                ));
            }
            Some(p)
        }
        CsiMode::Estimated => None,
    };

    for f in 0..nsc {
        // Per-subcarrier receiver state under estimated CSI: projector and
        // prefactored equalizer, constant across the data symbols.
        let (est_eq, est_proj): (Option<Equalizer>, Option<DMatrix<C64>>) = match &estimate {
            Some(est) => match rc.mitigation {
                Mitigation::None => (Some(Equalizer::new(&est.h_hat[f], None, n0)?), None),
                Mitigation::Pos => {
                    let p = pos_projector(&est.j_basis.as_ref().unwrap()[f])?;
                    let eq = Equalizer::new(&(&p * &est.h_hat[f]), None, n0)?;
                    (Some(eq), Some(p))
                }
                Mitigation::Ian => {
                    let c_jam = jam_covariance(JamCsi::Estimated {
                        j_basis: &est.j_basis.as_ref().unwrap()[f],
                    })?;
                    (Some(Equalizer::new(&est.h_hat[f], Some(&c_jam), n0)?), None)
                }
            },
            None => (None, None),
        };

        for (dt, &t) in data_ts.iter().enumerate() {
            let y_vec = DVector::from_fn(b, |i, _| y[(i, t, f)]);
            let eq = match (&est_eq, genie) {
                (Some(eq), _) => match &est_proj {
                    Some(proj) => eq.apply(&(proj * &y_vec))?,
                    None => eq.apply(&y_vec)?,
                },
                (None, Some(p)) => {
                    let h_tf = p.h.at(t, f);
                    match rc.mitigation {
                        Mitigation::None => lmmse_equalize(&y_vec, &h_tf, n0)?,
                        Mitigation::Pos => {
                            let g_tf = p.g.unwrap().at(t, f);
                            let proj = pos_projector(&g_tf)?;
                            lmmse_equalize(&(&proj * &y_vec), &(&proj * &h_tf), n0)?
                        }
                        Mitigation::Ian => {
                            let g_tf = p.g.unwrap().at(t, f);
                            let jam_power = p
                                .rho
                                .map(|pa| pa.rho()[t])
                                .ok_or_else(|| {
                                    Error::InvalidParameter(
                                        "perfect-CSI IAN needs the jammer power allocation".into(),
                                    )
                                })?;
                            ian_lmmse_equalize(
                                &y_vec,
                                &h_tf,
                                JamCsi::Perfect { g: &g_tf, jam_power },
                                n0,
                            )?
                        }
                    }
                }
                (None, None) => unreachable!("one CSI source is always selected"),
            };
            for ue in 0..u {
                let soft = demap_soft(&[eq.s_hat[ue]], &[eq.eff_noise_var[ue]], c)?;
                let base = ((ue * data_ts.len() + dt) * nsc + f) * k;
                values[base..base + k].copy_from_slice(&soft.values);
            }
        }
    }
    Ok(SoftBits { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_awgn, apply_freq, draw_flat_rayleigh, NoiseSpec};
    use crate::grid::{build_grid_spec, map_bits, scatter_frame};
    use crate::jammer::{JammerConfig, JammerKind, SymbolDist, draw_jammer_grid, superimpose_freq};
    use crate::linalg::numerical_rank;
    use crate::seeds;
    use approx::assert_abs_diff_eq;
    use ndarray::Array3;
    use proptest::prelude::*;

    const PILOT: C64 = C64::new(1.0, 0.0);

    #[test]
    fn ls_recovers_channel_exactly_without_noise() {
        let spec = build_grid_spec(2, 1, 6, 4).unwrap();
        let h = draw_flat_rayleigh(3, 2, 1, 4, 1).unwrap().tile_symbols(6);
        let syms = map_bits(
            &vec![0u8; spec.n_data_bits(2)],
            &Constellation::qpsk(),
        )
        .unwrap();
        let x = scatter_frame(&syms, PILOT, &spec).unwrap();
        let y = apply_freq(&h, &x).unwrap();
        let h_hat = ls_estimate_ue(&y, &spec, PILOT).unwrap();
        for f in 0..4 {
            assert!((&h_hat[f] - h.at(0, f)).norm() < 1e-12);
        }
    }

    #[test]
    fn ls_estimate_scales_with_pilot_value() {
        let spec = build_grid_spec(1, 0, 3, 2).unwrap();
        let mut y = Array3::zeros((2, 3, 2));
        y[(0, 0, 0)] = C64::new(4.0, 2.0);
        let h1 = ls_estimate_ue(&y, &spec, C64::new(1.0, 0.0)).unwrap();
        let h2 = ls_estimate_ue(&y, &spec, C64::new(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(h2[0][(0, 0)].re, h1[0][(0, 0)].re / 2.0, epsilon = 1e-15);
        assert!(ls_estimate_ue(&y, &spec, C64::new(0.0, 0.0)).is_err());
    }

    /// Jamming the pilot biases the LS estimate by exactly G·w / pilot_value.
    #[test]
    fn pilot_jamming_bias_is_g_w_over_pilot() {
        let spec = build_grid_spec(1, 0, 3, 2).unwrap();
        let h = draw_flat_rayleigh(4, 1, 1, 2, 3).unwrap().tile_symbols(3);
        let g = draw_flat_rayleigh(4, 1, 1, 2, 4).unwrap().tile_symbols(3);
        let syms = map_bits(&vec![0u8; spec.n_data_bits(2)], &Constellation::qpsk()).unwrap();
        let x = scatter_frame(&syms, PILOT, &spec).unwrap();
        let pa = crate::jammer::PowerAllocation::uniform(2.0, 3).unwrap();
        let cfg = JammerConfig {
            kind: JammerKind::Barrage,
            dist: SymbolDist::Gaussian,
            n_antennas: 1,
        };
        let w = draw_jammer_grid(&cfg, &pa, &spec, 5).unwrap();
        let y = superimpose_freq(&apply_freq(&h, &x).unwrap(), &g, &w).unwrap();
        let h_hat = ls_estimate_ue(&y, &spec, PILOT).unwrap();
        for f in 0..2 {
            let expected = h.at(0, f).column(0) + g.at(0, f).column(0) * (w[(0, 0, f)] / PILOT);
            assert!((h_hat[f].column(0) - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn jammer_basis_columns_are_collinear_for_rank_one_jammer() {
        let spec = build_grid_spec(1, 4, 8, 2).unwrap();
        let g = draw_flat_rayleigh(6, 1, 1, 2, 7).unwrap().tile_symbols(8);
        let pa = crate::jammer::PowerAllocation::uniform(1.0, 8).unwrap();
        let cfg = JammerConfig {
            kind: JammerKind::Barrage,
            dist: SymbolDist::UniformDisk,
            n_antennas: 1,
        };
        let w = draw_jammer_grid(&cfg, &pa, &spec, 8).unwrap();
        let y = apply_freq(&g, &w).unwrap();
        let basis = estimate_jammer_basis(&y, &spec).unwrap();
        for f in 0..2 {
            assert_eq!(basis[f].ncols(), 4);
            assert_eq!(numerical_rank(&basis[f], 1e-8), 1);
        }
        // without jammer or noise the columns are zero
        let quiet = Array3::zeros((6, 8, 2));
        let basis = estimate_jammer_basis(&quiet, &spec).unwrap();
        assert!(basis[0].norm() == 0.0);
        // no silent symbols -> error
        let no_silence = build_grid_spec(1, 0, 8, 2).unwrap();
        assert!(estimate_jammer_basis(&quiet, &no_silence).is_err());
    }

    #[test]
    fn projector_zeroes_exactly_the_basis_direction() {
        let mut e1 = DMatrix::<C64>::zeros(4, 1);
        e1[(0, 0)] = C64::new(1.0, 0.0);
        let y = DVector::from_fn(4, |i, _| C64::new(i as f64 + 1.0, 0.0));
        let out = pos_project(&y, &e1).unwrap();
        assert_abs_diff_eq!(out[0].norm(), 0.0, epsilon = 1e-14);
        for i in 1..4 {
            assert_abs_diff_eq!(out[i].re, (i + 1) as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn projector_algebra() {
        let mut rng = seeds::rng(17, &[]);
        for m in 1..4 {
            let j = DMatrix::from_fn(6, m, |_, _| seeds::standard_cn(&mut rng));
            let p = pos_projector(&j).unwrap();
            assert!((&p * &j).norm() < 1e-12, "P J = 0");
            assert!((&p * &p - &p).norm() < 1e-12, "P² = P");
            assert!((p.adjoint() - &p).norm() < 1e-12, "Pᴴ = P");
            assert_eq!(numerical_rank(&p, 1e-10), 6 - m);
        }
        let j = DMatrix::from_fn(4, 4, |_, _| seeds::standard_cn(&mut rng));
        assert!(pos_projector(&j).is_err());
    }

    /// Simulate a noise-free jammer-only frame: projection with perfect CSI
    /// removes effectively all rank-one jammer power.
    #[test]
    fn pos_removes_rank_one_jammer_power() {
        let spec = build_grid_spec(1, 0, 4, 8).unwrap();
        let g = draw_flat_rayleigh(8, 1, 1, 8, 21).unwrap().tile_symbols(4);
        let pa = crate::jammer::PowerAllocation::uniform(100.0, 4).unwrap();
        let cfg = JammerConfig {
            kind: JammerKind::Barrage,
            dist: SymbolDist::Gaussian,
            n_antennas: 1,
        };
        let w = draw_jammer_grid(&cfg, &pa, &spec, 22).unwrap();
        let y = apply_freq(&g, &w).unwrap();
        let (mut pre, mut post) = (0.0, 0.0);
        for f in 0..8 {
            let p = pos_projector(&g.at(0, f)).unwrap();
            for t in 0..4 {
                let y_vec = DVector::from_fn(8, |i, _| y[(i, t, f)]);
                pre += y_vec.norm_squared();
                post += (&p * y_vec).norm_squared();
            }
        }
        assert!(post / pre <= 1e-10, "residual fraction {}", post / pre);
    }

    #[test]
    fn lmmse_identity_limits() {
        // B = U, H = I, n0 -> 0: estimate approaches y
        let h = DMatrix::<C64>::identity(3, 3);
        let y = DVector::from_fn(3, |i, _| C64::new(0.5 + i as f64, -0.25));
        let eq = lmmse_equalize(&y, &h, 1e-12).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(eq.s_hat[i].re, y[i].re, epsilon = 1e-9);
            assert_abs_diff_eq!(eq.s_hat[i].im, y[i].im, epsilon = 1e-9);
        }
        assert!(eq.eff_noise_var.iter().all(|&v| v > 0.0));

        // H = 2I (scalar), n0 -> 0: estimate approaches y / 2
        let h = DMatrix::from_element(1, 1, C64::new(2.0, 0.0));
        let y = DVector::from_element(1, C64::new(1.0, 1.0));
        let eq = lmmse_equalize(&y, &h, 1e-12).unwrap();
        assert_abs_diff_eq!(eq.s_hat[0].re, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(eq.s_hat[0].im, 0.5, epsilon = 1e-9);
    }

    /// Independent oracle: the same estimator computed through an explicit
    /// dense inverse instead of the Cholesky solve path.
    #[test]
    fn lmmse_matches_direct_inverse_oracle() {
        let mut rng = seeds::rng(31, &[]);
        let h = DMatrix::from_fn(4, 2, |_, _| seeds::standard_cn(&mut rng));
        let y = DVector::from_fn(4, |_, _| seeds::standard_cn(&mut rng));
        let n0 = 0.3;
        let eq = lmmse_equalize(&y, &h, n0).unwrap();

        let mut gram = &h * h.adjoint();
        for i in 0..4 {
            gram[(i, i)] += C64::new(n0 + 1e-12, 0.0);
        }
        let inv = gram.try_inverse().unwrap();
        let f = h.adjoint() * &inv * &h;
        let s = h.adjoint() * &inv * &y;
        for stream in 0..2 {
            let mu = f[(stream, stream)].re;
            let want = s[stream] / mu;
            assert_abs_diff_eq!(eq.s_hat[stream].re, want.re, epsilon = 1e-10);
            assert_abs_diff_eq!(eq.s_hat[stream].im, want.im, epsilon = 1e-10);
            let want_var = (1.0 - mu) / (mu * mu);
            assert_abs_diff_eq!(eq.eff_noise_var[stream], want_var, epsilon = 1e-10);
        }
    }

    #[test]
    fn ian_with_zero_power_is_plain_lmmse() {
        let mut rng = seeds::rng(33, &[]);
        let h = DMatrix::from_fn(4, 2, |_, _| seeds::standard_cn(&mut rng));
        let g = DMatrix::from_fn(4, 1, |_, _| seeds::standard_cn(&mut rng));
        let y = DVector::from_fn(4, |_, _| seeds::standard_cn(&mut rng));
        let plain = lmmse_equalize(&y, &h, 0.2).unwrap();
        let ian = ian_lmmse_equalize(&y, &h, JamCsi::Perfect { g: &g, jam_power: 0.0 }, 0.2).unwrap();
        for s in 0..2 {
            assert!((plain.s_hat[s] - ian.s_hat[s]).norm() < 1e-12);
            assert_abs_diff_eq!(plain.eff_noise_var[s], ian.eff_noise_var[s], epsilon = 1e-12);
        }
    }

    /// As the jammer power grows, IAN-LMMSE converges to projecting the
    /// jammer out: compare output SINR against POS-then-LMMSE.
    #[test]
    fn ian_high_power_limit_approaches_pos() {
        let mut rng = seeds::rng(35, &[]);
        let h = DMatrix::from_fn(6, 2, |_, _| seeds::standard_cn(&mut rng));
        let g = DMatrix::from_fn(6, 1, |_, _| seeds::standard_cn(&mut rng));
        let n0 = 0.1;

        let sinr = |eq: &EqualizerOutput| -> Vec<f64> {
            eq.eff_noise_var.iter().map(|v| 1.0 / v).collect()
        };

        let y = DVector::from_fn(6, |_, _| seeds::standard_cn(&mut rng));
        let ian = ian_lmmse_equalize(&y, &h, JamCsi::Perfect { g: &g, jam_power: 1e8 }, n0).unwrap();
        let p = pos_projector(&g).unwrap();
        let pos = lmmse_equalize(&(&p * &y), &(&p * &h), n0).unwrap();
        for (a, b) in sinr(&ian).iter().zip(sinr(&pos).iter()) {
            assert!((a - b).abs() / b < 0.01, "SINR {a} vs {b}");
        }
    }

    #[test]
    fn ian_matches_direct_formula_oracle() {
        let mut rng = seeds::rng(37, &[]);
        let h = DMatrix::from_fn(3, 2, |_, _| seeds::standard_cn(&mut rng));
        let jb = DMatrix::from_fn(3, 2, |_, _| seeds::standard_cn(&mut rng));
        let y = DVector::from_fn(3, |_, _| seeds::standard_cn(&mut rng));
        let n0 = 0.4;
        let eq = ian_lmmse_equalize(&y, &h, JamCsi::Estimated { j_basis: &jb }, n0).unwrap();

        let mut gram = &h * h.adjoint() + (&jb * jb.adjoint()) / C64::new(2.0, 0.0);
        for i in 0..3 {
            gram[(i, i)] += C64::new(n0 + 1e-12, 0.0);
        }
        let inv = gram.try_inverse().unwrap();
        let f = h.adjoint() * &inv * &h;
        let s = h.adjoint() * &inv * &y;
        for stream in 0..2 {
            let mu = f[(stream, stream)].re;
            assert!((eq.s_hat[stream] - s[stream] / mu).norm() < 1e-10);
        }
    }

    #[test]
    fn equalizer_rejects_mismatched_shapes() {
        let h = DMatrix::<C64>::identity(3, 2);
        let y = DVector::from_element(2, C64::new(1.0, 0.0));
        assert!(lmmse_equalize(&y, &h, 0.1).is_err());
    }

    fn run_frame(
        spec: &GridSpec,
        b: usize,
        rc: &ReceiverConfig,
        noise: &NoiseSpec,
        jam_power: Option<f64>,
        seed: u64,
    ) -> (Vec<u8>, SoftBits) {
        let c = Constellation::qpsk();
        let mut rng = seeds::rng(seed, &[1]);
        let bits: Vec<u8> = (0..spec.n_data_bits(2)).map(|_| rng.random_range(0..2) as u8).collect();
        let syms = map_bits(&bits, &c).unwrap();
        let x = scatter_frame(&syms, PILOT, spec).unwrap();
        let h = draw_flat_rayleigh(b, spec.n_ue(), 1, spec.n_subcarriers(), seeds::derive(seed, &[2]))
            .unwrap()
            .tile_symbols(spec.n_symbols());
        let mut y = apply_freq(&h, &x).unwrap();
        let g = draw_flat_rayleigh(b, 1, 1, spec.n_subcarriers(), seeds::derive(seed, &[3]))
            .unwrap()
            .tile_symbols(spec.n_symbols());
        let pa = jam_power
            .map(|p| crate::jammer::PowerAllocation::uniform(p, spec.n_symbols()).unwrap());
        if let Some(pa) = &pa {
            let cfg = JammerConfig {
                kind: JammerKind::Barrage,
                dist: SymbolDist::UniformDisk,
                n_antennas: 1,
            };
            let w = draw_jammer_grid(&cfg, pa, spec, seeds::derive(seed, &[4])).unwrap();
            y = superimpose_freq(&y, &g, &w).unwrap();
        }
        let y = add_awgn(&y, noise, seeds::derive(seed, &[5]));
        let genie = PerfectCsi { h: &h, g: Some(&g), rho: pa.as_ref() };
        let soft = receive_frame(&y, spec, rc, Some(&genie), noise.n0, &c, PILOT).unwrap();
        (bits, soft)
    }

    #[test]
    fn clean_high_snr_frame_decodes_perfectly() {
        let spec = build_grid_spec(2, 0, 6, 8).unwrap();
        let rc = ReceiverConfig { mitigation: Mitigation::None, csi: CsiMode::Perfect };
        let noise = NoiseSpec::from_ebn0(30.0, 2, 1.0);
        for seed in 0..5 {
            let (bits, soft) = run_frame(&spec, 4, &rc, &noise, None, seed);
            assert_eq!(soft.len(), spec.n_data_bits(2));
            assert_eq!(soft.hard(), bits, "seed {seed}");
        }
    }

    #[test]
    fn unmitigated_strong_jammer_causes_heavy_errors() {
        let spec = build_grid_spec(2, 2, 14, 8).unwrap();
        let noise = NoiseSpec::from_ebn0(10.0, 2, 1.0);
        let mut unmitigated = 0usize;
        let mut mitigated = 0usize;
        let mut total = 0usize;
        for seed in 0..20 {
            let rc = ReceiverConfig { mitigation: Mitigation::None, csi: CsiMode::Perfect };
            let (bits, soft) = run_frame(&spec, 8, &rc, &noise, Some(100.0), seed);
            unmitigated += soft
                .hard()
                .iter()
                .zip(&bits)
                .filter(|(a, b)| a != b)
                .count();
            let rc = ReceiverConfig { mitigation: Mitigation::Pos, csi: CsiMode::Perfect };
            let (bits, soft) = run_frame(&spec, 8, &rc, &noise, Some(100.0), seed);
            mitigated += soft.hard().iter().zip(&bits).filter(|(a, b)| a != b).count();
            total += bits.len();
        }
        let ber_unmitigated = unmitigated as f64 / total as f64;
        let ber_mitigated = mitigated as f64 / total as f64;
        assert!(ber_unmitigated > 0.1, "unmitigated BER {ber_unmitigated}");
        assert!(ber_mitigated < 0.02, "POS BER {ber_mitigated}");
    }

    #[test]
    fn estimated_pos_mitigates_through_silent_symbols() {
        let spec = build_grid_spec(2, 4, 14, 8).unwrap();
        let noise = NoiseSpec::from_ebn0(15.0, 2, 1.0);
        let rc = ReceiverConfig { mitigation: Mitigation::Pos, csi: CsiMode::Estimated };
        let mut errors = 0usize;
        let mut total = 0usize;
        for seed in 100..120 {
            let (bits, soft) = run_frame(&spec, 8, &rc, &noise, Some(100.0), seed);
            errors += soft.hard().iter().zip(&bits).filter(|(a, b)| a != b).count();
            total += bits.len();
        }
        let ber = errors as f64 / total as f64;
        assert!(ber < 0.05, "estimated-CSI POS BER {ber}");
    }

    /// POS with perfect CSI against a rank-one jammer reproduces the
    /// unjammed system on the projected channel: with identical seeds, the
    /// jammed and unjammed frames yield the same soft bits because the
    /// projector removes exactly the jammer contribution.
    #[test]
    fn pos_perfect_equals_unjammed_projected_system() {
        let spec = build_grid_spec(2, 0, 8, 8).unwrap();
        let c = Constellation::qpsk();
        let rc = ReceiverConfig { mitigation: Mitigation::Pos, csi: CsiMode::Perfect };
        let noise = NoiseSpec::from_ebn0(8.0, 2, 1.0);
        for seed in 0..5 {
            let mut rng = seeds::rng(seed, &[1]);
            let bits: Vec<u8> =
                (0..spec.n_data_bits(2)).map(|_| rng.random_range(0..2) as u8).collect();
            let x = scatter_frame(&map_bits(&bits, &c).unwrap(), PILOT, &spec).unwrap();
            let h = draw_flat_rayleigh(6, 2, 1, 8, seeds::derive(seed, &[2]))
                .unwrap()
                .tile_symbols(8);
            let g = draw_flat_rayleigh(6, 1, 1, 8, seeds::derive(seed, &[3]))
                .unwrap()
                .tile_symbols(8);
            let pa = crate::jammer::PowerAllocation::uniform(50.0, 8).unwrap();
            let cfg = JammerConfig {
                kind: JammerKind::Barrage,
                dist: SymbolDist::Gaussian,
                n_antennas: 1,
            };
            let w = draw_jammer_grid(&cfg, &pa, &spec, seeds::derive(seed, &[4])).unwrap();
            let clean = apply_freq(&h, &x).unwrap();
            let jammed = superimpose_freq(&clean, &g, &w).unwrap();
            // identical noise realization on both paths
            let y_jam = add_awgn(&jammed, &noise, seeds::derive(seed, &[5]));
            let y_clean = add_awgn(&clean, &noise, seeds::derive(seed, &[5]));
            let genie = PerfectCsi { h: &h, g: Some(&g), rho: Some(&pa) };
            let soft_jam = receive_frame(&y_jam, &spec, &rc, Some(&genie), noise.n0, &c, PILOT).unwrap();
            let soft_clean =
                receive_frame(&y_clean, &spec, &rc, Some(&genie), noise.n0, &c, PILOT).unwrap();
            for (a, b) in soft_jam.values.iter().zip(&soft_clean.values) {
                assert!((a - b).abs() < 1e-6, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn receive_frame_output_length_and_errors() {
        let spec = build_grid_spec(2, 1, 6, 4).unwrap();
        let rc = ReceiverConfig { mitigation: Mitigation::Pos, csi: CsiMode::Perfect };
        // missing genie state is an error
        let y = Array3::zeros((4, 6, 4));
        assert!(receive_frame(&y, &spec, &rc, None, 0.1, &Constellation::qpsk(), PILOT).is_err());
    }

    proptest! {
        /// Effective noise variances are positive and estimates finite for
        /// random well-posed problems.
        #[test]
        fn equalizer_outputs_are_finite(seed in 0u64..200, n0 in 0.0f64..2.0) {
            let mut rng = seeds::rng(seed, &[]);
            let h = DMatrix::from_fn(4, 2, |_, _| seeds::standard_cn(&mut rng));
            let y = DVector::from_fn(4, |_, _| seeds::standard_cn(&mut rng));
            let eq = lmmse_equalize(&y, &h, n0).unwrap();
            for s in 0..2 {
                prop_assert!(eq.eff_noise_var[s] > 0.0);
                prop_assert!(eq.s_hat[s].re.is_finite() && eq.s_hat[s].im.is_finite());
            }
        }
    }
}
