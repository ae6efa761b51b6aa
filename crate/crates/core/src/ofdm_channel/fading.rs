//! Jakes-spectrum Rayleigh fading by a sum of sinusoids.
//!
//! Each tap is an independent process
//!
//!   g(n) = sqrt(p / N) * sum_s exp(j (2 pi f_D cos(a_s) n / fs + phi_s))
//!
//! with the arrival angles stratified over `N` equal sectors,
//! `a_s = (2 pi s - pi + theta_s) / N`, and `theta_s`, `phi_s` uniform. Averaging
//! over the random sector offsets gives the ensemble autocorrelation
//! `p J0(2 pi f_D tau)` exactly, while the stratification keeps the Doppler
//! frequencies of a single realization spread over the whole spectrum.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::SystemConfig;
use super::profile::DelayProfile;
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingSpec {
    pub doppler_max_hz: f64,
    pub num_sinusoids: usize,
    pub seed: u64,
}

pub const DEFAULT_SINUSOIDS: usize = 32;

impl FadingSpec {
    pub fn new(doppler_max_hz: f64, seed: u64) -> Self {
        Self {
            doppler_max_hz,
            num_sinusoids: DEFAULT_SINUSOIDS,
            seed,
        }
    }

    /// Doppler given as a fraction of the subcarrier spacing.
    pub fn from_normalized(normalized_doppler: f64, config: &SystemConfig, seed: u64) -> Self {
        Self::new(normalized_doppler * config.subcarrier_spacing_hz, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.doppler_max_hz >= 0.0) || !self.doppler_max_hz.is_finite() {
            return Err(Error::invalid("maximum Doppler must be finite and >= 0"));
        }
        if self.num_sinusoids < 8 {
            return Err(Error::invalid("sum-of-sinusoids needs at least 8 sinusoids"));
        }
        Ok(())
    }
}

/// Per-tap complex gains at the sample rate, tap-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TapGains {
    num_taps: usize,
    len: usize,
    data: Vec<Complex64>,
}

impl TapGains {
    pub fn num_taps(&self) -> usize {
        self.num_taps
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn tap(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.len..(j + 1) * self.len]
    }
}

struct Sinusoid {
    omega: f64,
    phase: f64,
}

fn tap_sinusoids(spec: &FadingSpec, tap: usize) -> Vec<Sinusoid> {
    let mut rng = stream(spec.seed, &[tag::CHANNEL, tap as u64]);
    let n = spec.num_sinusoids as f64;
    (0..spec.num_sinusoids)
        .map(|s| {
            let theta: f64 = rng.gen_range(-PI..PI);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let angle = (2.0 * PI * s as f64 - PI + theta) / n;
            Sinusoid {
                omega: 2.0 * PI * spec.doppler_max_hz * angle.cos(),
                phase,
            }
        })
        .collect()
}

// Phasors are advanced by complex rotation and re-anchored with an exact
// sin/cos evaluation every block to bound drift.
const ANCHOR_BLOCK: usize = 256;

fn fill_tap(out: &mut [Complex64], sinusoids: &[Sinusoid], amplitude: f64, sample_rate: f64) {
    out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    for s in sinusoids {
        let step = Complex64::from_polar(1.0, s.omega / sample_rate);
        for (block, chunk) in out.chunks_mut(ANCHOR_BLOCK).enumerate() {
            let n0 = (block * ANCHOR_BLOCK) as f64;
            let mut ph = Complex64::from_polar(1.0, s.omega * n0 / sample_rate + s.phase);
            for v in chunk.iter_mut() {
                *v += ph;
                ph *= step;
            }
        }
    }
    out.iter_mut().for_each(|v| *v *= amplitude);
}

/// Generates `duration` samples of every tap in `profile`.
pub fn generate_fading(
    spec: &FadingSpec,
    profile: &DelayProfile,
    config: &SystemConfig,
    duration: usize,
) -> Result<TapGains> {
    spec.validate()?;
    if duration == 0 {
        return Err(Error::invalid("fading duration must be nonzero"));
    }
    if duration < config.subframe_len() {
        return Err(Error::invalid(format!(
            "fading duration {duration} shorter than one subframe ({})",
            config.subframe_len()
        )));
    }
    let num_taps = profile.num_taps();
    let mut data = vec![Complex64::new(0.0, 0.0); num_taps * duration];
    let fs = config.sample_rate();
    for (j, chunk) in data.chunks_mut(duration).enumerate() {
        let sinusoids = tap_sinusoids(spec, j);
        let amplitude = (profile.tap_powers[j] / spec.num_sinusoids as f64).sqrt();
        fill_tap(chunk, &sinusoids, amplitude, fs);
    }
    Ok(TapGains {
        num_taps,
        len: duration,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_tap() -> DelayProfile {
        DelayProfile::custom(&[0], &[1.0]).unwrap()
    }

    #[test]
    fn zero_doppler_is_constant() {
        let cfg = SystemConfig::default();
        let g = generate_fading(&FadingSpec::new(0.0, 3), &single_tap(), &cfg, cfg.subframe_len()).unwrap();
        let first = g.tap(0)[0];
        assert!(g.tap(0).iter().all(|v| (v - first).norm() < 1e-12));
    }

    #[test]
    fn rotation_matches_direct_evaluation() {
        let cfg = SystemConfig::default();
        let spec = FadingSpec::new(926.0, 11);
        let p = single_tap();
        let g = generate_fading(&spec, &p, &cfg, 5000).unwrap();
        let sins = tap_sinusoids(&spec, 0);
        let amp = (1.0 / spec.num_sinusoids as f64).sqrt();
        for n in [0usize, 1, 255, 256, 3999, 4999] {
            let direct: Complex64 = sins
                .iter()
                .map(|s| Complex64::from_polar(1.0, s.omega * n as f64 / cfg.sample_rate() + s.phase))
                .sum::<Complex64>()
                * amp;
            assert!((direct - g.tap(0)[n]).norm() < 1e-11);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let cfg = SystemConfig::default();
        assert!(generate_fading(&FadingSpec::new(100.0, 0), &single_tap(), &cfg, 0).is_err());
        assert!(generate_fading(&FadingSpec::new(-1.0, 0), &single_tap(), &cfg, 5000).is_err());
        let mut few = FadingSpec::new(10.0, 0);
        few.num_sinusoids = 4;
        assert!(generate_fading(&few, &single_tap(), &cfg, 5000).is_err());
    }

    #[test]
    fn same_seed_same_process() {
        let cfg = SystemConfig::default();
        let p = DelayProfile::linear_attenuation(4).unwrap();
        let a = generate_fading(&FadingSpec::new(500.0, 9), &p, &cfg, cfg.subframe_len()).unwrap();
        let b = generate_fading(&FadingSpec::new(500.0, 9), &p, &cfg, cfg.subframe_len()).unwrap();
        assert_eq!(a, b);
    }
}
