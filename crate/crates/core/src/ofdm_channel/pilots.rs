use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::SystemConfig;
use crate::error::{Error, Result};
use crate::modulation::QPSK;
use crate::rng::{stream, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PilotPreset {
    /// 21 subcarriers x 4 symbols.
    P84,
    /// 16 subcarriers x 3 symbols.
    P48,
}

impl std::str::FromStr for PilotPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p84" | "84" => Ok(Self::P84),
            "p48" | "48" => Ok(Self::P48),
            other => Err(Error::invalid(format!("unknown pilot preset `{other}`"))),
        }
    }
}

/// Grid pilot layout. Indices are 0-based; `values` is indexed
/// `[subcarrier_slot * num_pilot_symbols + symbol_slot]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotPattern {
    subcarriers: Vec<usize>,
    symbols: Vec<usize>,
    values: Vec<Complex64>,
}

impl PilotPattern {
    pub fn new(subcarriers: Vec<usize>, symbols: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        if subcarriers.is_empty() || symbols.is_empty() {
            return Err(Error::invalid("pilot pattern needs at least one subcarrier and one symbol"));
        }
        if values.len() != subcarriers.len() * symbols.len() {
            return Err(Error::invalid("pilot values must cover every pilot position"));
        }
        if subcarriers.windows(2).any(|w| w[0] >= w[1]) || symbols.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("pilot indices must be strictly ascending"));
        }
        if subcarriers.len() > 2 {
            let step = subcarriers[1] - subcarriers[0];
            if subcarriers.windows(2).any(|w| w[1] - w[0] != step) {
                return Err(Error::invalid("pilot subcarriers must be evenly spaced"));
            }
        }
        if symbols.windows(2).any(|w| w[1] - w[0] < 2) {
            return Err(Error::invalid("pilot symbols must be nonconsecutive"));
        }
        Ok(Self {
            subcarriers,
            symbols,
            values,
        })
    }

    /// Preset layouts for the 128 x 14 grid, with seed-deterministic QPSK pilots.
    pub fn preset(preset: PilotPreset, config: &SystemConfig, seed: u64) -> Result<Self> {
        if config.num_subcarriers != 128 || config.num_symbols != 14 {
            return Err(Error::invalid(format!(
                "preset {preset:?} requires a 128x14 grid, got {}x{}",
                config.num_subcarriers, config.num_symbols
            )));
        }
        let (spacing, count, symbols) = match preset {
            PilotPreset::P84 => (6, 21, vec![1, 5, 9, 13]),
            PilotPreset::P48 => (8, 16, vec![1, 7, 13]),
        };
        let subcarriers: Vec<usize> = (0..count).map(|i| i * spacing).collect();
        let mut rng = stream(seed, &[tag::PILOTS]);
        let values = (0..count * symbols.len())
            .map(|_| QPSK[rng.gen_range(0..QPSK.len())])
            .collect();
        Self::new(subcarriers, symbols, values)
    }

    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn num_pilot_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn num_pilot_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(k, t, value)` for every pilot, subcarrier-major.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let tp = self.symbols.len();
        self.subcarriers.iter().enumerate().flat_map(move |(a, &k)| {
            self.symbols
                .iter()
                .enumerate()
                .map(move |(b, &t)| (k, t, self.values[a * tp + b]))
        })
    }

    /// Position in `positions()` order of the pilot at `(k, t)`, if any.
    pub fn slot(&self, k: usize, t: usize) -> Option<usize> {
        let a = self.subcarriers.binary_search(&k).ok()?;
        let b = self.symbols.binary_search(&t).ok()?;
        Some(a * self.symbols.len() + b)
    }

    pub fn value_at(&self, k: usize, t: usize) -> Option<Complex64> {
        self.slot(k, t).map(|i| self.values[i])
    }

    pub fn is_pilot(&self, k: usize, t: usize) -> bool {
        self.slot(k, t).is_some()
    }

    pub fn check_fits(&self, num_subcarriers: usize, num_symbols: usize) -> Result<()> {
        let k_max = *self.subcarriers.last().unwrap();
        let t_max = *self.symbols.last().unwrap();
        if k_max >= num_subcarriers || t_max >= num_symbols {
            return Err(Error::invalid(format!(
                "pilot pattern reaches ({k_max}, {t_max}) outside {num_subcarriers}x{num_symbols} grid"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p84_layout() {
        let p = PilotPattern::preset(PilotPreset::P84, &SystemConfig::default(), 1).unwrap();
        assert_eq!(p.len(), 84);
        assert_eq!(p.num_pilot_subcarriers(), 21);
        // 1-based 1 and 121
        assert_eq!(p.subcarriers()[0] + 1, 1);
        assert_eq!(*p.subcarriers().last().unwrap() + 1, 121);
        assert_eq!(p.symbols().iter().map(|t| t + 1).collect::<Vec<_>>(), vec![2, 6, 10, 14]);
        assert!(p.values().iter().all(|v| (v.norm_sqr() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn p48_layout() {
        let p = PilotPattern::preset(PilotPreset::P48, &SystemConfig::default(), 1).unwrap();
        assert_eq!(p.len(), 48);
        assert_eq!(p.subcarriers().iter().map(|k| k + 1).collect::<Vec<_>>(), (0..16).map(|i| 1 + 8 * i).collect::<Vec<_>>());
        assert_eq!(p.symbols().iter().map(|t| t + 1).collect::<Vec<_>>(), vec![2, 8, 14]);
    }

    #[test]
    fn preset_needs_128_by_14() {
        let cfg = SystemConfig::new(64, 14, 16).unwrap();
        assert!(PilotPattern::preset(PilotPreset::P84, &cfg, 0).is_err());
    }

    #[test]
    fn pilot_values_depend_on_seed_only() {
        let cfg = SystemConfig::default();
        let a = PilotPattern::preset(PilotPreset::P84, &cfg, 5).unwrap();
        let b = PilotPattern::preset(PilotPreset::P84, &cfg, 5).unwrap();
        let c = PilotPattern::preset(PilotPreset::P84, &cfg, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn consecutive_symbols_rejected() {
        let one = Complex64::new(1.0, 0.0);
        assert!(PilotPattern::new(vec![0, 4], vec![1, 2], vec![one; 4]).is_err());
        assert!(PilotPattern::new(vec![0, 4, 9], vec![1], vec![one; 3]).is_err());
        assert!(PilotPattern::new(vec![0, 4, 8], vec![1, 3], vec![one; 6]).is_ok());
    }

    #[test]
    fn slot_lookup() {
        let p = PilotPattern::preset(PilotPreset::P84, &SystemConfig::default(), 2).unwrap();
        for (i, (k, t, v)) in p.positions().enumerate() {
            assert_eq!(p.slot(k, t), Some(i));
            assert_eq!(p.value_at(k, t), Some(v));
        }
        assert!(!p.is_pilot(1, 1));
        assert!(!p.is_pilot(0, 0));
    }
}
