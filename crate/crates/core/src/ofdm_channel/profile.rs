use serde::{Deserialize, Serialize};

use super::config::SystemConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    LinearAttenuation,
    Eva,
    Custom,
}

/// Tapped-delay-line power profile on the sample grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayProfile {
    pub kind: ProfileKind,
    pub tap_delays: Vec<usize>,
    pub tap_powers: Vec<f64>,
}

/// 3GPP Extended Vehicular A: (delay ns, relative power dB).
pub const EVA_TAPS: [(f64, f64); 9] = [
    (0.0, 0.0),
    (30.0, -1.5),
    (150.0, -1.4),
    (310.0, -3.6),
    (370.0, -0.6),
    (710.0, -9.1),
    (1090.0, -7.0),
    (1730.0, -12.0),
    (2510.0, -16.9),
];

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl DelayProfile {
    /// `num_taps` taps at consecutive sample delays with power falling
    /// linearly in dB from 0 to -20 dB, normalized to unit total power.
    pub fn linear_attenuation(num_taps: usize) -> Result<Self> {
        if num_taps == 0 {
            return Err(Error::invalid("linear attenuation profile needs >= 1 tap"));
        }
        let powers: Vec<f64> = (0..num_taps)
            .map(|j| {
                if num_taps == 1 {
                    1.0
                } else {
                    db_to_linear(-20.0 * j as f64 / (num_taps - 1) as f64)
                }
            })
            .collect();
        let mut p = Self {
            kind: ProfileKind::LinearAttenuation,
            tap_delays: (0..num_taps).collect(),
            tap_powers: powers,
        };
        p.normalize();
        Ok(p)
    }

    /// EVA rounded onto the sample grid at `sample_rate`. Taps that land on
    /// the same sample are power-summed, then the `max_paths` strongest
    /// merged taps are kept and renormalized.
    pub fn eva(sample_rate: f64, max_paths: usize) -> Result<Self> {
        let delays: Vec<usize> = EVA_TAPS
            .iter()
            .map(|&(ns, _)| (ns * 1e-9 * sample_rate).round() as usize)
            .collect();
        let powers: Vec<f64> = EVA_TAPS.iter().map(|&(_, db)| db_to_linear(db)).collect();
        let mut p = Self::merged(ProfileKind::Eva, &delays, &powers)?;
        if p.tap_delays.len() > max_paths {
            let mut order: Vec<usize> = (0..p.tap_delays.len()).collect();
            order.sort_by(|&a, &b| p.tap_powers[b].total_cmp(&p.tap_powers[a]));
            let mut keep = order[..max_paths].to_vec();
            keep.sort_unstable();
            p.tap_delays = keep.iter().map(|&i| p.tap_delays[i]).collect();
            p.tap_powers = keep.iter().map(|&i| p.tap_powers[i]).collect();
        }
        p.normalize();
        Ok(p)
    }

    /// Arbitrary sample delays and linear powers; coincident delays are merged.
    pub fn custom(delays: &[usize], powers: &[f64]) -> Result<Self> {
        Self::merged(ProfileKind::Custom, delays, powers)
    }

    fn merged(kind: ProfileKind, delays: &[usize], powers: &[f64]) -> Result<Self> {
        if delays.is_empty() || delays.len() != powers.len() {
            return Err(Error::invalid("delay/power lists must be nonempty and equal length"));
        }
        if powers.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("tap powers must be finite and nonnegative"));
        }
        let mut pairs: Vec<(usize, f64)> = delays.iter().copied().zip(powers.iter().copied()).collect();
        pairs.sort_by_key(|&(d, _)| d);
        let mut tap_delays: Vec<usize> = Vec::new();
        let mut tap_powers: Vec<f64> = Vec::new();
        for (d, p) in pairs {
            if tap_delays.last() == Some(&d) {
                *tap_powers.last_mut().unwrap() += p;
            } else {
                tap_delays.push(d);
                tap_powers.push(p);
            }
        }
        if tap_delays[0] != 0 {
            let shift = tap_delays[0];
            tap_delays.iter_mut().for_each(|d| *d -= shift);
        }
        let mut p = Self {
            kind,
            tap_delays,
            tap_powers,
        };
        if p.tap_powers.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("total tap power must be positive"));
        }
        p.normalize();
        Ok(p)
    }

    fn normalize(&mut self) {
        let total: f64 = self.tap_powers.iter().sum();
        self.tap_powers.iter_mut().for_each(|p| *p /= total);
    }

    pub fn num_taps(&self) -> usize {
        self.tap_delays.len()
    }

    pub fn max_delay(&self) -> usize {
        *self.tap_delays.last().unwrap_or(&0)
    }

    /// Checks the profile against the ISI-free cyclic-prefix condition.
    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        if self.tap_delays.is_empty() || self.tap_delays.len() != self.tap_powers.len() {
            return Err(Error::invalid("malformed delay profile"));
        }
        if self.tap_delays[0] != 0 || self.tap_delays.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("tap delays must start at 0 and be strictly ascending"));
        }
        let total: f64 = self.tap_powers.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("tap powers sum to {total}, expected 1")));
        }
        if self.max_delay() > config.cp_len {
            return Err(Error::invalid(format!(
                "max tap delay {} exceeds cyclic prefix {}",
                self.max_delay(),
                config.cp_len
            )));
        }
        if self.max_delay() >= config.num_subcarriers {
            return Err(Error::invalid("tap delay must be shorter than the symbol"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_attenuation_spans_twenty_db() {
        for n in 1..=9 {
            let p = DelayProfile::linear_attenuation(n).unwrap();
            assert_eq!(p.tap_delays, (0..n).collect::<Vec<_>>());
            assert!((p.tap_powers.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if n > 1 {
                let ratio_db = 10.0 * (p.tap_powers[n - 1] / p.tap_powers[0]).log10();
                assert!((ratio_db + 20.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eva_on_lte_grid_merges_to_distinct_taps() {
        let p = DelayProfile::eva(1.92e6, 6).unwrap();
        // 0/30/150 ns -> 0, 310/370/710 -> 1, 1090 -> 2, 1730 -> 3, 2510 -> 5.
        assert_eq!(p.tap_delays, vec![0, 1, 2, 3, 5]);
        assert!((p.tap_powers.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let expected0 = 1.0 + db_to_linear(-1.5) + db_to_linear(-1.4);
        let total: f64 = EVA_TAPS.iter().map(|&(_, db)| db_to_linear(db)).sum();
        assert!((p.tap_powers[0] - expected0 / total).abs() < 1e-12);
        p.validate(&SystemConfig::default()).unwrap();
    }

    #[test]
    fn eva_at_higher_rate_keeps_six_strongest() {
        let p = DelayProfile::eva(30.72e6, 6).unwrap();
        assert_eq!(p.num_taps(), 6);
        assert!(p.tap_delays.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn delay_beyond_cp_is_rejected() {
        let cfg = SystemConfig::new(16, 2, 2).unwrap();
        let p = DelayProfile::linear_attenuation(4).unwrap();
        assert!(p.validate(&cfg).is_err());
    }

    #[test]
    fn custom_merges_duplicates() {
        let p = DelayProfile::custom(&[0, 2, 2], &[1.0, 0.5, 0.5]).unwrap();
        assert_eq!(p.tap_delays, vec![0, 2]);
        assert!((p.tap_powers[0] - 0.5).abs() < 1e-15);
    }
}
