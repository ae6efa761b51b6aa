use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::SystemConfig;
use super::dft::UnitaryDft;
use super::fading::FadingSpec;
use super::pilots::PilotPattern;
use super::profile::DelayProfile;
use super::realization::ChannelRealization;
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::modulation::QPSK;
use crate::rng::{derive_seed, stream, tag};

/// One simulated subframe with its ground truth.
#[derive(Clone, Debug)]
pub struct Subframe {
    pub x: ComplexGrid,
    pub y: ComplexGrid,
    pub pattern: PilotPattern,
    pub channel: ChannelRealization,
    pub snr_db: f64,
    pub noise_var: f64,
}

/// Noise variance for unit-energy symbols through a unit-power channel.
pub fn noise_var_from_snr(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// `Y_t = F G_t F^H X_t + W_t` for every symbol, with circular Gaussian noise of
/// variance `noise_var` per entry drawn from `noise_seed`.
pub fn apply_channel(
    x: &ComplexGrid,
    realization: &ChannelRealization,
    noise_var: f64,
    config: &SystemConfig,
    noise_seed: u64,
) -> Result<ComplexGrid> {
    let (k_len, t_len) = (config.num_subcarriers, config.num_symbols);
    if x.shape() != (k_len, t_len) {
        return Err(Error::invalid(format!("X is {:?}, expected ({k_len}, {t_len})", x.shape())));
    }
    if realization.num_subcarriers() != k_len || realization.num_symbols() != t_len {
        return Err(Error::invalid("realization does not cover the grid"));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::invalid("noise variance must be >= 0"));
    }
    let dft = UnitaryDft::new(k_len);
    let delays = realization.delays();
    let mut y = ComplexGrid::zeros(k_len, t_len);
    let mut s = vec![Complex64::new(0.0, 0.0); k_len];
    let mut r = vec![Complex64::new(0.0, 0.0); k_len];
    for t in 0..t_len {
        for (k, v) in s.iter_mut().enumerate() {
            *v = *x.get(k, t);
        }
        dft.inverse(&mut s);
        // r = G s, the banded CIR applied without materializing G.
        for (i, out) in r.iter_mut().enumerate() {
            *out = realization
                .gains_at(t, i)
                .iter()
                .zip(delays)
                .map(|(g, &d)| g * s[(i + k_len - d) % k_len])
                .sum();
        }
        dft.forward(&mut r);
        y.set_symbol(t, &r);
    }
    if noise_var > 0.0 {
        let mut rng = stream(noise_seed, &[tag::NOISE]);
        let sd = (noise_var / 2.0).sqrt();
        for v in y.as_mut_slice() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re * sd, im * sd);
        }
    }
    Ok(y)
}

/// Random QPSK data with the pattern's pilots inserted.
pub fn random_symbols(config: &SystemConfig, pattern: &PilotPattern, data_seed: u64) -> Result<ComplexGrid> {
    pattern.check_fits(config.num_subcarriers, config.num_symbols)?;
    let mut rng = stream(data_seed, &[tag::DATA]);
    Ok(ComplexGrid::from_fn(config.num_subcarriers, config.num_symbols, |k, t| {
        let data = QPSK[rng.gen_range(0..QPSK.len())];
        pattern.value_at(k, t).unwrap_or(data)
    }))
}

/// Subframe over a given channel realization with explicit data/noise seeds.
pub fn simulate_subframe(
    config: &SystemConfig,
    channel: ChannelRealization,
    pattern: &PilotPattern,
    snr_db: f64,
    data_seed: u64,
    noise_seed: u64,
) -> Result<Subframe> {
    let x = random_symbols(config, pattern, data_seed)?;
    let noise_var = noise_var_from_snr(snr_db);
    let y = apply_channel(&x, &channel, noise_var, config, noise_seed)?;
    Ok(Subframe {
        x,
        y,
        pattern: pattern.clone(),
        channel,
        snr_db,
        noise_var,
    })
}

/// Draws a channel, data and noise, all keyed by `seed` (and the fading
/// spec's own seed, which selects the channel stream).
pub fn generate_subframe(
    config: &SystemConfig,
    profile: &DelayProfile,
    fading: &FadingSpec,
    pattern: &PilotPattern,
    snr_db: f64,
    seed: u64,
) -> Result<Subframe> {
    let spec = FadingSpec {
        seed: derive_seed(seed, &[tag::CHANNEL, fading.seed]),
        ..fading.clone()
    };
    let channel = ChannelRealization::generate(&spec, profile, config)?;
    simulate_subframe(
        config,
        channel,
        pattern,
        snr_db,
        derive_seed(seed, &[tag::DATA]),
        derive_seed(seed, &[tag::NOISE]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::is_member;
    use crate::ofdm_channel::pilots::PilotPreset;

    #[test]
    fn identity_channel_noiseless_is_passthrough() {
        let cfg = SystemConfig::new(16, 3, 2).unwrap();
        let r = ChannelRealization::static_taps(&cfg, &[0], &[Complex64::new(1.0, 0.0)]).unwrap();
        let pattern = PilotPattern::new(vec![0, 8], vec![0, 2], vec![QPSK[0]; 4]).unwrap();
        let x = random_symbols(&cfg, &pattern, 3).unwrap();
        let y = apply_channel(&x, &r, 0.0, &cfg, 0).unwrap();
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_explicit_cfr_product() {
        let cfg = SystemConfig::new(16, 2, 4).unwrap();
        let p = DelayProfile::linear_attenuation(4).unwrap();
        let r = ChannelRealization::generate(&FadingSpec::new(3000.0, 8), &p, &cfg).unwrap();
        let pattern = PilotPattern::new(vec![0, 8], vec![0], vec![QPSK[1]; 2]).unwrap();
        let x = random_symbols(&cfg, &pattern, 4).unwrap();
        let y = apply_channel(&x, &r, 0.0, &cfg, 0).unwrap();
        for t in 0..2 {
            let h = r.cfr_matrix(t).unwrap();
            let xt = nalgebra::DVector::from_vec(x.symbol(t));
            let yt = h * xt;
            for k in 0..16 {
                assert!((yt[k] - y.get(k, t)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let cfg = SystemConfig::new(16, 2, 4).unwrap();
        let r = ChannelRealization::static_taps(&cfg, &[0], &[Complex64::new(1.0, 0.0)]).unwrap();
        let x = ComplexGrid::zeros(8, 2);
        assert!(apply_channel(&x, &r, 0.0, &cfg, 0).is_err());
    }

    #[test]
    fn subframe_contract() {
        let cfg = SystemConfig::default();
        let pattern = PilotPattern::preset(PilotPreset::P84, &cfg, 1).unwrap();
        let profile = DelayProfile::eva(cfg.sample_rate(), 6).unwrap();
        let fading = FadingSpec::new(926.0, 0);
        let a = generate_subframe(&cfg, &profile, &fading, &pattern, 10.0, 42).unwrap();
        let b = generate_subframe(&cfg, &profile, &fading, &pattern, 10.0, 42).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.channel, b.channel);
        assert!((a.noise_var - 0.1).abs() < 1e-15);
        for (k, t, v) in pattern.positions() {
            assert_eq!(*a.x.get(k, t), v);
        }
        assert!(a.x.as_slice().iter().all(|&v| is_member(&QPSK, v) && (v.norm_sqr() - 1.0).abs() < 1e-12));
        let c = generate_subframe(&cfg, &profile, &fading, &pattern, 10.0, 43).unwrap();
        assert_ne!(a.y, c.y);
    }
}
