//! Subframe datasets and the `ICIN` file format.
//!
//! Layout (little endian): magic `ICIN`, version `u32`, K `u32`, T `u32`,
//! record count `u32`; the pilot pattern as Kp `u32`, Tp `u32`, subcarrier
//! indices, symbol indices (`u32` each) and Kp*Tp values as `(re, im)` `f64`
//! pairs. Each record is a header of SNR (dB, `f32`), noise variance (`f32`),
//! tap count (`u32`) and maximum Doppler (Hz, `f32`), followed by the X, Y and
//! true CFR grids as `(re, im)` `f32` pairs in row-major `k*T + t` order.

use std::path::Path;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fsutil::{put_f32, put_u32, write_atomic, Reader};
use crate::grid::{ComplexGrid, Grid};
use crate::icinet::Sample;
use crate::ofdm_channel::{
    generate_subframe, simulate_subframe, ChannelRealization, DelayProfile, FadingSpec, PilotPattern,
};
use crate::rng::{derive_seed, stream, tag};

pub const DATASET_MAGIC: &[u8; 4] = b"ICIN";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Self::Train),
            "val" | "validation" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            _ => Err(Error::invalid(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub snr_db: f32,
    pub noise_var: f32,
    pub num_taps: u32,
    pub doppler_hz: f32,
    pub x: Grid<Complex32>,
    pub y: Grid<Complex32>,
    pub h_bar: Grid<Complex32>,
}

fn widen(g: &Grid<Complex32>) -> ComplexGrid {
    g.map(|z| Complex64::new(z.re as f64, z.im as f64))
}

impl Record {
    pub fn y_f64(&self) -> ComplexGrid {
        widen(&self.y)
    }

    pub fn h_bar_f64(&self) -> ComplexGrid {
        widen(&self.h_bar)
    }

    pub fn x_f64(&self) -> ComplexGrid {
        widen(&self.x)
    }

    /// Network inputs: interpolated LS and hard decisions from the stored Y.
    pub fn to_sample(&self, pattern: &PilotPattern) -> Result<Sample> {
        Sample::prepare(&self.y_f64(), pattern, &self.h_bar_f64())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub num_subcarriers: usize,
    pub num_symbols: usize,
    pub pattern: PilotPattern,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn samples(&self) -> Result<Vec<Sample>> {
        self.records.par_iter().map(|r| r.to_sample(&self.pattern)).collect()
    }

    /// Distinct SNR values in first-seen order.
    pub fn snr_points(&self) -> Vec<f32> {
        let mut out: Vec<f32> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.snr_db) {
                out.push(r.snr_db);
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cells = self.num_subcarriers * self.num_symbols;
        let mut out = Vec::with_capacity(64 + self.records.len() * (16 + cells * 24));
        out.extend_from_slice(DATASET_MAGIC);
        for v in [DATASET_VERSION, self.num_subcarriers as u32, self.num_symbols as u32, self.records.len() as u32] {
            put_u32(&mut out, v);
        }
        let p = &self.pattern;
        put_u32(&mut out, p.subcarriers().len() as u32);
        put_u32(&mut out, p.symbols().len() as u32);
        for i in p.subcarriers().iter().chain(p.symbols()) {
            put_u32(&mut out, *i as u32);
        }
        for v in p.values() {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        for r in &self.records {
            put_f32(&mut out, r.snr_db);
            put_f32(&mut out, r.noise_var);
            put_u32(&mut out, r.num_taps);
            put_f32(&mut out, r.doppler_hz);
            for g in [&r.x, &r.y, &r.h_bar] {
                for z in g.as_slice() {
                    put_f32(&mut out, z.re);
                    put_f32(&mut out, z.im);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "dataset file");
        if r.take(4)? != DATASET_MAGIC {
            return Err(Error::Format("not a dataset file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let (kk, tt, n) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let (kp, tp) = (r.u32()? as usize, r.u32()? as usize);
        let mut idx = |count: usize| -> Result<Vec<usize>> { (0..count).map(|_| Ok(r.u32()? as usize)).collect() };
        let subcarriers = idx(kp)?;
        let symbols = idx(tp)?;
        let values = (0..kp * tp)
            .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
            .collect::<Result<Vec<_>>>()?;
        let pattern = PilotPattern::new(subcarriers, symbols, values).map_err(|e| Error::Format(e.to_string()))?;
        pattern.check_fits(kk, tt).map_err(|e| Error::Format(e.to_string()))?;
        let cells = kk * tt;
        let mut records = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let (snr_db, noise_var, num_taps, doppler_hz) = (r.f32()?, r.f32()?, r.u32()?, r.f32()?);
            let mut grid = || -> Result<Grid<Complex32>> {
                let v = r.f32_vec(2 * cells)?;
                Grid::from_vec(kk, tt, v.chunks_exact(2).map(|c| Complex32::new(c[0], c[1])).collect())
            };
            let (x, y, h_bar) = (grid()?, grid()?, grid()?);
            records.push(Record {
                snr_db,
                noise_var,
                num_taps,
                doppler_hz,
                x,
                y,
                h_bar,
            });
        }
        if !r.is_done() {
            return Err(Error::Format("dataset file: trailing bytes".into()));
        }
        Ok(Self {
            num_subcarriers: kk,
            num_symbols: tt,
            pattern,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn record_from(sub: crate::ofdm_channel::Subframe, num_taps: usize, doppler_hz: f64) -> Record {
    Record {
        snr_db: sub.snr_db as f32,
        noise_var: sub.noise_var as f32,
        num_taps: num_taps as u32,
        doppler_hz: doppler_hz as f32,
        x: sub.x.to_f32(),
        y: sub.y.to_f32(),
        h_bar: sub.channel.true_cfr.to_f32(),
    }
}

/// Draws a split. Train and validation subframes use the linear-attenuation
/// model with a random tap count and Doppler at the training SNR. The test
/// split uses EVA at a fixed Doppler: `test_per_snr` channel draws, each
/// reused at every SNR of the grid with the same data and fresh noise.
pub fn generate_dataset(config: &ExperimentConfig, split: Split, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let sys = &config.system;
    let pattern = config.pilot_pattern()?;
    let base = derive_seed(seed, &[tag::SPLIT, split.tag()]);
    let records = match split {
        Split::Train | Split::Val => {
            let n = if split == Split::Train { config.sizes.train } else { config.sizes.val };
            let tc = &config.train_channel;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let s = derive_seed(base, &[i as u64]);
                    let mut rng = stream(s, &[tag::TAPS]);
                    let taps = rng.gen_range(tc.min_taps..=tc.max_taps);
                    let doppler = stream(s, &[tag::DOPPLER]).gen_range(tc.doppler_min_hz..=tc.doppler_max_hz);
                    let profile = DelayProfile::linear_attenuation(taps)?;
                    let sub = generate_subframe(sys, &profile, &FadingSpec::new(doppler, 0), &pattern, tc.snr_db, s)?;
                    Ok(record_from(sub, taps, doppler))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Split::Test => {
            let tc = &config.test_channel;
            let profile = tc.profile(sys)?;
            let snrs = &config.snr_grid_db;
            let per_channel = (0..config.sizes.test_per_snr)
                .into_par_iter()
                .map(|i| {
                    let s = derive_seed(base, &[i as u64]);
                    let spec = FadingSpec::new(tc.doppler_hz, derive_seed(s, &[tag::CHANNEL]));
                    let channel = ChannelRealization::generate(&spec, &profile, sys)?;
                    snrs.iter()
                        .enumerate()
                        .map(|(j, snr)| {
                            let sub = simulate_subframe(
                                sys,
                                channel.clone(),
                                &pattern,
                                *snr,
                                derive_seed(s, &[tag::DATA]),
                                derive_seed(s, &[tag::NOISE, j as u64]),
                            )?;
                            Ok(record_from(sub, profile.num_taps(), tc.doppler_hz))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            // SNR-major order: all subframes of the first SNR, then the next.
            let mut out = Vec::with_capacity(per_channel.len() * snrs.len());
            for j in 0..snrs.len() {
                out.extend(per_channel.iter().map(|v| v[j].clone()));
            }
            out
        }
    };
    Ok(Dataset {
        num_subcarriers: sys.num_subcarriers,
        num_symbols: sys.num_symbols,
        pattern,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.sizes.train = 6;
        c.sizes.val = 3;
        c.sizes.test_per_snr = 2;
        c.snr_grid_db = vec![0.0, 20.0];
        c
    }

    #[test]
    fn splits_have_expected_sizes_and_snrs() {
        let c = small();
        let train = generate_dataset(&c, Split::Train, 1).unwrap();
        assert_eq!(train.len(), 6);
        assert!(train.records.iter().all(|r| r.snr_db == 10.0 && (3..=9).contains(&r.num_taps)));
        assert!(train
            .records
            .iter()
            .all(|r| (800.0..=1200.0).contains(&r.doppler_hz)));
        let test = generate_dataset(&c, Split::Test, 1).unwrap();
        assert_eq!(test.len(), 4);
        assert_eq!(test.snr_points(), vec![0.0, 20.0]);
        // Same channel at both SNRs.
        assert_eq!(test.records[0].h_bar, test.records[2].h_bar);
        assert_eq!(test.records[0].x, test.records[2].x);
        assert_ne!(test.records[0].y, test.records[2].y);
    }

    #[test]
    fn generation_is_deterministic_and_split_dependent() {
        let c = small();
        let a = generate_dataset(&c, Split::Train, 5).unwrap();
        assert_eq!(a.to_bytes(), generate_dataset(&c, Split::Train, 5).unwrap().to_bytes());
        let v = generate_dataset(&c, Split::Val, 5).unwrap();
        assert_ne!(a.records[0].h_bar, v.records[0].h_bar);
    }

    #[test]
    fn bytes_round_trip() {
        let d = generate_dataset(&small(), Split::Test, 2).unwrap();
        let bytes = d.to_bytes();
        let back = Dataset::from_bytes(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_bytes(), bytes);
        assert!(matches!(Dataset::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
    }
}
