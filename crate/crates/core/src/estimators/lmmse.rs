//! Full 2D LMMSE interpolation from pilot LS estimates, with channel
//! correlations estimated empirically from simulated realizations.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::ls::PilotEstimates;
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::ofdm_channel::{ChannelRealization, DelayProfile, FadingSpec, PilotPattern, SystemConfig};
use crate::rng::{derive_seed, tag};

pub const DIAGONAL_LOADING: f64 = 1e-10;

/// `r_hp = E[h p^H]` (grid x pilots) and `r_pp = E[p p^H]` (pilots x pilots),
/// with `h` the vectorized true channel grid and `p` its pilot entries.
#[derive(Clone, Debug)]
pub struct ChannelStats {
    pub r_hp: DMatrix<Complex64>,
    pub r_pp: DMatrix<Complex64>,
    pub num_subcarriers: usize,
    pub num_symbols: usize,
    pub num_samples: usize,
}

impl ChannelStats {
    pub fn new(r_hp: DMatrix<Complex64>, r_pp: DMatrix<Complex64>, num_subcarriers: usize, num_symbols: usize) -> Result<Self> {
        let p = r_pp.nrows();
        if r_pp.ncols() != p || r_hp.ncols() != p || r_hp.nrows() != num_subcarriers * num_symbols {
            return Err(Error::invalid("inconsistent correlation matrix shapes"));
        }
        Ok(Self {
            r_hp,
            r_pp,
            num_subcarriers,
            num_symbols,
            num_samples: 0,
        })
    }

    /// Sample correlations over a set of true channel grids.
    pub fn from_channels<'a>(channels: impl IntoIterator<Item = &'a ComplexGrid>, pattern: &PilotPattern) -> Result<Self> {
        let mut iter = channels.into_iter().peekable();
        let first = iter.peek().ok_or_else(|| Error::invalid("need at least one channel sample"))?;
        let (k_len, t_len) = first.shape();
        pattern.check_fits(k_len, t_len)?;
        let n_grid = k_len * t_len;
        let n_p = pattern.len();
        let idx: Vec<usize> = pattern.positions().map(|(k, t, _)| k * t_len + t).collect();
        let mut r_hp = DMatrix::<Complex64>::zeros(n_grid, n_p);
        let mut r_pp = DMatrix::<Complex64>::zeros(n_p, n_p);
        let mut count = 0usize;
        let mut pc = vec![Complex64::new(0.0, 0.0); n_p];
        for h in iter {
            if h.shape() != (k_len, t_len) {
                return Err(Error::invalid("channel samples differ in shape"));
            }
            let h = h.as_slice();
            for (c, &i) in pc.iter_mut().zip(&idx) {
                *c = h[i].conj();
            }
            // column-major storage: accumulate column by column
            for (col, &p) in pc.iter().enumerate() {
                let dst = r_hp.column_mut(col);
                for (d, hv) in dst.into_iter().zip(h) {
                    *d += hv * p;
                }
                for (row, &i) in idx.iter().enumerate() {
                    r_pp[(row, col)] += h[i] * p;
                }
            }
            count += 1;
        }
        let scale = 1.0 / count as f64;
        r_hp *= Complex64::new(scale, 0.0);
        r_pp *= Complex64::new(scale, 0.0);
        Ok(Self {
            r_hp,
            r_pp,
            num_subcarriers: k_len,
            num_symbols: t_len,
            num_samples: count,
        })
    }

    /// Draws `count` channels from the given model and estimates their correlations.
    pub fn calibrate(
        config: &SystemConfig,
        profile: &DelayProfile,
        doppler_hz: f64,
        pattern: &PilotPattern,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        let channels = (0..count)
            .map(|i| {
                let spec = FadingSpec::new(doppler_hz, derive_seed(seed, &[tag::CALIBRATION, i as u64]));
                ChannelRealization::generate(&spec, profile, config).map(|r| r.true_cfr)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_channels(&channels, pattern)
    }
}

/// Precomputed LMMSE interpolation matrix for one noise level.
#[derive(Clone, Debug)]
pub struct LmmseEstimator {
    weights: DMatrix<Complex64>,
    num_subcarriers: usize,
    num_symbols: usize,
}

impl LmmseEstimator {
    /// `W = R_hp (R_pp + noise_var D + loading I)^-1` with `D = diag(1/|pilot|^2)`.
    pub fn new(stats: &ChannelStats, pattern: &PilotPattern, noise_var: f64) -> Result<Self> {
        let n_p = pattern.len();
        if stats.r_pp.nrows() != n_p {
            return Err(Error::invalid("stats were computed for a different pilot pattern"));
        }
        let mut a = stats.r_pp.clone();
        for (i, (_, _, p)) in pattern.positions().enumerate() {
            let energy = p.norm_sqr();
            if energy == 0.0 {
                return Err(Error::invalid("zero-energy pilot"));
            }
            a[(i, i)] += Complex64::new(noise_var / energy + DIAGONAL_LOADING, 0.0);
        }
        // Enforce exact Hermitian symmetry before factoring.
        let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let not_pd = || Error::Numerical("LMMSE system is not positive definite".into());
        let chol = Cholesky::new(a).ok_or_else(not_pd)?;
        // The complex factorization takes square roots of non-positive pivots
        // without failing, so check the factor's diagonal explicitly.
        let l = chol.l_dirty();
        if (0..n_p).any(|i| !(l[(i, i)].re > 0.0) || l[(i, i)].im.abs() > 1e-12 * l[(i, i)].re) {
            return Err(not_pd());
        }
        // W^H = A^-1 R_hp^H
        let w_h = chol.solve(&stats.r_hp.adjoint());
        let weights = w_h.adjoint();
        if weights.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("LMMSE weights are not finite".into()));
        }
        Ok(Self {
            weights,
            num_subcarriers: stats.num_subcarriers,
            num_symbols: stats.num_symbols,
        })
    }

    pub fn estimate(&self, pilots: &PilotEstimates) -> Result<ComplexGrid> {
        if pilots.values.len() != self.weights.ncols() {
            return Err(Error::invalid("pilot count does not match the LMMSE weights"));
        }
        let h = &self.weights * DVector::from_column_slice(&pilots.values);
        ComplexGrid::from_vec(self.num_subcarriers, self.num_symbols, h.as_slice().to_vec())
    }
}

pub fn lmmse_estimate(
    pilots: &PilotEstimates,
    pattern: &PilotPattern,
    noise_var: f64,
    stats: &ChannelStats,
) -> Result<ComplexGrid> {
    LmmseEstimator::new(stats, pattern, noise_var)?.estimate(pilots)
}
