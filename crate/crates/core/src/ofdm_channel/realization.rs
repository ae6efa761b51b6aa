use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::config::SystemConfig;
use super::dft::UnitaryDft;
use super::fading::{generate_fading, FadingSpec, TapGains};
use super::profile::DelayProfile;
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;

pub type CMatrix = DMatrix<Complex64>;

/// Tap gains as seen by each OFDM symbol after CP removal, plus the true
/// per-subcarrier channel (diagonal of each symbol's CFR matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    num_subcarriers: usize,
    num_symbols: usize,
    delays: Vec<usize>,
    /// Indexed `(t, i, j)`: symbol, post-CP sample instant, tap.
    tap_gains: Vec<Complex64>,
    pub true_cfr: ComplexGrid,
}

impl ChannelRealization {
    pub fn generate(spec: &FadingSpec, profile: &DelayProfile, config: &SystemConfig) -> Result<Self> {
        profile.validate(config)?;
        let gains = generate_fading(spec, profile, config, config.subframe_len())?;
        Self::from_tap_gains(&gains, profile, config)
    }

    /// Reads the post-CP samples of each symbol out of a sample-rate process.
    pub fn from_tap_gains(gains: &TapGains, profile: &DelayProfile, config: &SystemConfig) -> Result<Self> {
        if gains.num_taps() != profile.num_taps() {
            return Err(Error::invalid("tap count of gains and profile differ"));
        }
        if gains.len() < config.subframe_len() {
            return Err(Error::invalid("tap gain sequence shorter than one subframe"));
        }
        let (k_len, t_len, n_l) = (config.num_subcarriers, config.num_symbols, profile.num_taps());
        let mut tap_gains = Vec::with_capacity(t_len * k_len * n_l);
        for t in 0..t_len {
            for i in 0..k_len {
                let n = config.sample_index(t, i);
                for j in 0..n_l {
                    tap_gains.push(gains.tap(j)[n]);
                }
            }
        }
        Ok(Self::from_parts(k_len, t_len, profile.tap_delays.clone(), tap_gains))
    }

    /// Time-invariant channel with the given tap values.
    pub fn static_taps(config: &SystemConfig, delays: &[usize], taps: &[Complex64]) -> Result<Self> {
        if delays.len() != taps.len() || delays.is_empty() {
            return Err(Error::invalid("delays and taps must be nonempty and equal length"));
        }
        if delays.iter().any(|&d| d >= config.num_subcarriers) {
            return Err(Error::invalid("tap delay must be shorter than the symbol"));
        }
        let (k_len, t_len) = (config.num_subcarriers, config.num_symbols);
        let mut tap_gains = Vec::with_capacity(t_len * k_len * taps.len());
        for _ in 0..t_len * k_len {
            tap_gains.extend_from_slice(taps);
        }
        Ok(Self::from_parts(k_len, t_len, delays.to_vec(), tap_gains))
    }

    fn from_parts(k_len: usize, t_len: usize, delays: Vec<usize>, tap_gains: Vec<Complex64>) -> Self {
        let n_l = delays.len();
        // H_kk = sum_j mean_i(g_ij) exp(-j 2 pi k d_j / K)
        let mut true_cfr = ComplexGrid::zeros(k_len, t_len);
        for t in 0..t_len {
            let mut mean = vec![Complex64::new(0.0, 0.0); n_l];
            for i in 0..k_len {
                let row = &tap_gains[(t * k_len + i) * n_l..][..n_l];
                for (m, g) in mean.iter_mut().zip(row) {
                    *m += g;
                }
            }
            mean.iter_mut().for_each(|m| *m /= k_len as f64);
            for k in 0..k_len {
                let h: Complex64 = mean
                    .iter()
                    .zip(&delays)
                    .map(|(g, &d)| g * Complex64::from_polar(1.0, -2.0 * PI * ((k * d) % k_len) as f64 / k_len as f64))
                    .sum();
                true_cfr.set(k, t, h);
            }
        }
        Self {
            num_subcarriers: k_len,
            num_symbols: t_len,
            delays,
            tap_gains,
            true_cfr,
        }
    }

    pub fn num_taps(&self) -> usize {
        self.delays.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    /// Gain of tap `j` at post-CP sample `i` of symbol `t` (all 0-based).
    #[inline]
    pub fn gain(&self, t: usize, i: usize, j: usize) -> Complex64 {
        self.tap_gains[(t * self.num_subcarriers + i) * self.delays.len() + j]
    }

    /// Gains of all taps at sample `i` of symbol `t`.
    #[inline]
    pub fn gains_at(&self, t: usize, i: usize) -> &[Complex64] {
        let n_l = self.delays.len();
        &self.tap_gains[(t * self.num_subcarriers + i) * n_l..][..n_l]
    }

    fn check_symbol(&self, t: usize) -> Result<()> {
        if t >= self.num_symbols {
            return Err(Error::Index {
                index: t,
                len: self.num_symbols,
            });
        }
        Ok(())
    }

    pub fn cir_matrix(&self, t: usize) -> Result<CMatrix> {
        self.check_symbol(t)?;
        let k_len = self.num_subcarriers;
        let mut g = CMatrix::zeros(k_len, k_len);
        for i in 0..k_len {
            for (j, &d) in self.delays.iter().enumerate() {
                g[(i, (i + k_len - d) % k_len)] = self.gain(t, i, j);
            }
        }
        Ok(g)
    }

    pub fn cfr_matrix(&self, t: usize) -> Result<CMatrix> {
        cfr_from_cir(&self.cir_matrix(t)?)
    }
}

/// Banded CIR matrix of symbol `t` (0-based): row `i` holds tap `j` at
/// column `(i - d_j) mod K`.
pub fn build_cir_matrix(realization: &ChannelRealization, t: usize, config: &SystemConfig) -> Result<CMatrix> {
    if realization.num_subcarriers() != config.num_subcarriers {
        return Err(Error::invalid("realization and config disagree on K"));
    }
    realization.cir_matrix(t)
}

/// `F G F^H` with the unitary DFT matrix `F`.
pub fn cfr_from_cir(g: &CMatrix) -> Result<CMatrix> {
    if g.nrows() != g.ncols() || g.nrows() == 0 {
        return Err(Error::invalid(format!("CIR matrix must be square, got {}x{}", g.nrows(), g.ncols())));
    }
    let k_len = g.nrows();
    let dft = UnitaryDft::new(k_len);
    let mut h = g.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); k_len];
    // F G: transform every column.
    for c in 0..k_len {
        buf.copy_from_slice(h.column(c).as_slice());
        dft.forward(&mut buf);
        h.column_mut(c).copy_from_slice(&buf);
    }
    // (F G) F^H: row i times F^H is the unitary inverse DFT of row i.
    for r in 0..k_len {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = h[(r, c)];
        }
        dft.inverse(&mut buf);
        for (c, b) in buf.iter().enumerate() {
            h[(r, c)] = *b;
        }
    }
    Ok(h)
}

/// `|H_km| / max |H_km|` for symbol `t`.
pub fn dump_cfr_magnitude(realization: &ChannelRealization, t: usize, config: &SystemConfig) -> Result<DMatrix<f64>> {
    let h = cfr_from_cir(&build_cir_matrix(realization, t, config)?)?;
    let mag = h.map(|c| c.norm());
    let max = mag.max();
    if max > 0.0 {
        Ok(mag / max)
    } else {
        Ok(mag)
    }
}

/// One row per line, comma separated, shortest round-trip float formatting.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 12);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(r, c)]));
        }
        out.push('\n');
    }
    out
}
