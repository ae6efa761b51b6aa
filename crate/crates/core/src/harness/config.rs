//! Experiment configuration and presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icinet::{CasResNetConfig, PreDnnConfig, TrainConfig};
use crate::nn::AdamConfig;
use crate::ofdm_channel::{DelayProfile, PilotPattern, PilotPreset, SystemConfig};

/// Training and validation channels: linear-attenuation profile with a random
/// tap count and maximum Doppler per subframe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainChannel {
    pub min_taps: usize,
    pub max_taps: usize,
    pub doppler_min_hz: f64,
    pub doppler_max_hz: f64,
    pub snr_db: f64,
}

impl Default for TrainChannel {
    fn default() -> Self {
        Self {
            min_taps: 3,
            max_taps: 9,
            doppler_min_hz: 800.0,
            doppler_max_hz: 1200.0,
            snr_db: 10.0,
        }
    }
}

/// Test channel: EVA with a fixed maximum Doppler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestChannel {
    pub max_paths: usize,
    pub doppler_hz: f64,
    /// Informational only; 926 Hz is 500 km/h at 2 GHz.
    pub speed_kmh: f64,
}

impl Default for TestChannel {
    fn default() -> Self {
        Self {
            max_paths: 6,
            doppler_hz: 926.0,
            speed_kmh: 500.0,
        }
    }
}

impl TestChannel {
    pub fn profile(&self, system: &SystemConfig) -> Result<DelayProfile> {
        DelayProfile::eva(system.sample_rate(), self.max_paths)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSizes {
    pub train: usize,
    pub val: usize,
    /// Test subframes at each SNR point.
    pub test_per_snr: usize,
    /// Channel draws used to estimate the LMMSE correlations.
    pub lmmse_calibration: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        Self {
            train: 10_000,
            val: 2_000,
            test_per_snr: 2_000,
            lmmse_calibration: 4_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            _ => Err(Error::invalid(format!("unknown preset `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub pilot_preset: PilotPreset,
    pub pilot_seed: u64,
    pub snr_grid_db: Vec<f64>,
    pub train_channel: TrainChannel,
    pub test_channel: TestChannel,
    pub sizes: DatasetSizes,
    pub training: TrainConfig,
    pub predn: PreDnnConfig,
    pub casres: CasResNetConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let (sizes, training) = match preset {
            Preset::Paper => (DatasetSizes::default(), TrainConfig::default()),
            Preset::Desk => (
                DatasetSizes {
                    train: 2_000,
                    val: 400,
                    test_per_snr: 200,
                    lmmse_calibration: 1_000,
                },
                TrainConfig {
                    epochs: 20,
                    batch_size: DESK_BATCH,
                    adam: AdamConfig::default(),
                    seed: 0,
                    verbose: false,
                },
            ),
        };
        Self {
            system: SystemConfig::default(),
            pilot_preset: PilotPreset::P84,
            pilot_seed: 0,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            train_channel: TrainChannel::default(),
            test_channel: TestChannel::default(),
            sizes,
            training,
            predn: PreDnnConfig::default(),
            casres: CasResNetConfig::default(),
            seed: 0,
        }
    }

    /// Parses a JSON config on top of the desk preset.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_over(Self::default(), text)
    }

    /// Parses a JSON config; fields it leaves out keep the values of `base`.
    pub fn from_json_over(base: Self, text: &str) -> Result<Self> {
        let patch: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut value = serde_json::to_value(&base)?;
        merge(&mut value, patch);
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sets the master seed; training and shuffling follow it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.training.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.system.validate()?;
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid_db must be a nonempty list of finite values".into());
        }
        let s = &self.sizes;
        if s.train == 0 || s.val == 0 || s.test_per_snr == 0 {
            return bad("dataset sizes must be positive".into());
        }
        let tc = &self.train_channel;
        if tc.min_taps == 0 || tc.min_taps > tc.max_taps {
            return bad(format!("bad tap range {}..={}", tc.min_taps, tc.max_taps));
        }
        if tc.max_taps > self.system.cp_len + 1 {
            return bad(format!(
                "{} taps exceed the cyclic prefix of {} samples",
                tc.max_taps, self.system.cp_len
            ));
        }
        if !(0.0 <= tc.doppler_min_hz && tc.doppler_min_hz <= tc.doppler_max_hz) {
            return bad("bad training Doppler range".into());
        }
        self.test_channel.profile(&self.system)?.validate(&self.system)?;
        self.training.validate()?;
        self.predn.validate(self.system.num_subcarriers)?;
        self.casres.validate()?;
        self.pilot_pattern().map(|_| ())
    }

    pub fn pilot_pattern(&self) -> Result<PilotPattern> {
        PilotPattern::preset(self.pilot_preset, &self.system, self.pilot_seed)
    }

    /// Stable 64-bit FNV-1a fingerprint of the JSON form.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in serde_json::to_vec(self).expect("config serializes") {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Mini-batch size of the desk preset. Smaller than the full preset's 200 so that
/// the reduced dataset still gets a useful number of optimizer steps.
pub const DESK_BATCH: usize = 10;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in [Preset::Paper, Preset::Desk] {
            ExperimentConfig::preset(p).validate().unwrap();
        }
        let paper = ExperimentConfig::preset(Preset::Paper);
        assert_eq!((paper.sizes.train, paper.sizes.val), (10_000, 2_000));
        assert_eq!((paper.training.epochs, paper.training.batch_size), (100, 200));
        assert_eq!(paper.training.adam.lr, 1e-3);
    }

    #[test]
    fn json_round_trip_and_partial_configs() {
        let c = ExperimentConfig::preset(Preset::Paper).with_seed(4);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let partial = ExperimentConfig::from_json(r#"{"seed": 9, "sizes": {"train": 5}}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.sizes.train, 5);
        assert_eq!(partial.sizes.val, 400);
        let over = ExperimentConfig::from_json_over(ExperimentConfig::preset(Preset::Paper), r#"{"seed": 2}"#).unwrap();
        assert_eq!(over.sizes.train, 10_000);
        assert!(ExperimentConfig::from_json(r#"{"sizes": {"trian": 5}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"snr_grid_db": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"train_channel": {"max_taps": 40}}"#).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ExperimentConfig::default();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), a.with_seed(1).fingerprint());
    }
}
