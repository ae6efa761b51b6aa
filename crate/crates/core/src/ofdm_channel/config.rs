use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// OFDM numerology. The sample rate is always `num_subcarriers * subcarrier_spacing_hz`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub num_subcarriers: usize,
    pub num_symbols: usize,
    pub cp_len: usize,
    pub subcarrier_spacing_hz: f64,
    pub carrier_hz: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_subcarriers: 128,
            num_symbols: 14,
            cp_len: 16,
            subcarrier_spacing_hz: 15_000.0,
            carrier_hz: 2e9,
        }
    }
}

impl SystemConfig {
    pub fn new(num_subcarriers: usize, num_symbols: usize, cp_len: usize) -> Result<Self> {
        let cfg = Self {
            num_subcarriers,
            num_symbols,
            cp_len,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_subcarriers < 2 {
            return Err(Error::invalid("need at least 2 subcarriers"));
        }
        if self.num_symbols < 1 {
            return Err(Error::invalid("need at least 1 OFDM symbol"));
        }
        if !(self.subcarrier_spacing_hz > 0.0) || !self.subcarrier_spacing_hz.is_finite() {
            return Err(Error::invalid("subcarrier spacing must be positive"));
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing_hz
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.num_subcarriers + self.cp_len
    }

    pub fn subframe_len(&self) -> usize {
        self.num_symbols * self.symbol_len()
    }

    /// Absolute sample index of post-CP sample `i` in symbol `t`.
    #[inline]
    pub fn sample_index(&self, t: usize, i: usize) -> usize {
        t * self.symbol_len() + self.cp_len + i
    }

    pub fn grid_len(&self) -> usize {
        self.num_subcarriers * self.num_symbols
    }
}

/// Maximum Doppler shift for speed `v` (m/s) at carrier `f_c`: `v f_c / c`.
pub fn doppler_from_speed(speed_mps: f64, carrier_hz: f64) -> f64 {
    speed_mps * carrier_hz / 299_792_458.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_lte_like_numerology() {
        let c = SystemConfig::default();
        assert_eq!(c.sample_rate(), 1.92e6);
        assert_eq!(c.subframe_len(), 14 * 144);
        assert_eq!(c.sample_index(1, 0), 144 + 16);
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(SystemConfig::new(1, 14, 16).is_err());
        assert!(SystemConfig::new(8, 0, 2).is_err());
        assert!(SystemConfig::new(8, 1, 0).is_ok());
    }

    #[test]
    fn five_hundred_kmh_at_2ghz_is_about_926hz() {
        let fd = doppler_from_speed(500.0 / 3.6, 2e9);
        assert!((fd - 926.0).abs() < 1.0, "{fd}");
    }
}
