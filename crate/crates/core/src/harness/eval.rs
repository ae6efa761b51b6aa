//! MSE-versus-SNR evaluation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Record};
use crate::error::{Error, Result};
use crate::estimators::{ls_at_pilots, ls_interpolated, ChannelStats, LmmseEstimator};
use crate::grid::ComplexGrid;
use crate::icinet::IciNet;
use crate::ofdm_channel::PilotPattern;

/// Anything that maps a received subframe to a channel grid.
pub trait ChannelEstimator: Sync {
    fn estimate(&self, record: &Record, pattern: &PilotPattern) -> Result<ComplexGrid>;
}

/// Interpolated LS.
pub struct LsEstimator;

impl ChannelEstimator for LsEstimator {
    fn estimate(&self, record: &Record, pattern: &PilotPattern) -> Result<ComplexGrid> {
        Ok(ls_interpolated(&record.y_f64(), pattern)?.h_hat)
    }
}

/// Returns the ground truth.
pub struct OracleEstimator;

impl ChannelEstimator for OracleEstimator {
    fn estimate(&self, record: &Record, _: &PilotPattern) -> Result<ComplexGrid> {
        Ok(record.h_bar_f64())
    }
}

/// Returns zeros.
pub struct ZeroEstimator;

impl ChannelEstimator for ZeroEstimator {
    fn estimate(&self, record: &Record, _: &PilotPattern) -> Result<ComplexGrid> {
        let (k, t) = record.y.shape();
        Ok(ComplexGrid::zeros(k, t))
    }
}

/// LMMSE with one precomputed weight matrix per noise level.
pub struct LmmseBaseline {
    stats: ChannelStats,
    by_noise: BTreeMap<u32, LmmseEstimator>,
}

impl LmmseBaseline {
    pub fn new(stats: ChannelStats, pattern: &PilotPattern, noise_vars: &[f32]) -> Result<Self> {
        let by_noise = noise_vars
            .iter()
            .map(|v| Ok((v.to_bits(), LmmseEstimator::new(&stats, pattern, *v as f64)?)))
            .collect::<Result<_>>()?;
        Ok(Self { stats, by_noise })
    }

    pub fn for_dataset(stats: ChannelStats, data: &Dataset) -> Result<Self> {
        let mut vars: Vec<f32> = data.records.iter().map(|r| r.noise_var).collect();
        vars.sort_by(f32::total_cmp);
        vars.dedup();
        Self::new(stats, &data.pattern, &vars)
    }
}

impl ChannelEstimator for LmmseBaseline {
    fn estimate(&self, record: &Record, pattern: &PilotPattern) -> Result<ComplexGrid> {
        let pilots = ls_at_pilots(&record.y_f64(), pattern)?;
        match self.by_noise.get(&record.noise_var.to_bits()) {
            Some(est) => est.estimate(&pilots),
            None => LmmseEstimator::new(&self.stats, pattern, record.noise_var as f64)?.estimate(&pilots),
        }
    }
}

/// A trained network run on the interpolated LS estimate and hard decisions.
pub struct NetworkEstimator<'a>(pub &'a IciNet<f32>);

impl ChannelEstimator for NetworkEstimator<'_> {
    fn estimate(&self, record: &Record, pattern: &PilotPattern) -> Result<ComplexGrid> {
        let s = record.to_sample(pattern)?;
        self.0.refine(&s.y, &s.x_hat, &s.h_hat)
    }
}

/// Report columns in their canonical order.
pub const COLUMNS: [&str; 6] = [
    "mse_ls",
    "mse_predn",
    "mse_casres",
    "mse_icinet_seq",
    "mse_icinet_e2e",
    "mse_lmmse",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub snr_db: f64,
    pub num_subframes: usize,
    /// Aligned with `EvalReport::columns`.
    pub mse: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config_fingerprint: String,
    pub seed: u64,
    pub dataset: String,
    pub subframes_per_snr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub columns: Vec<String>,
    pub rows: Vec<EvalRow>,
    pub metadata: ReportMetadata,
}

impl EvalReport {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r.mse[c]).collect())
    }

    /// MSE of `name` at `snr_db`.
    pub fn value(&self, name: &str, snr_db: f64) -> Option<f64> {
        let c = self.columns.iter().position(|n| n == name)?;
        self.rows.iter().find(|r| (r.snr_db - snr_db).abs() < 1e-6).map(|r| r.mse[c])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{}", r.snr_db));
            for v in &r.mse {
                out.push_str(&format!(",{v:.9e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-SNR mean over subframes and grid cells of `|H_est - H|^2`. Estimators
/// are `(column name, estimator)` pairs; rows follow ascending SNR, and every
/// SNR of `snr_grid` must be present in the data.
pub fn evaluate_mse(
    estimators: &[(&str, &dyn ChannelEstimator)],
    data: &Dataset,
    snr_grid: &[f64],
) -> Result<EvalReport> {
    if estimators.is_empty() {
        return Err(Error::invalid("no estimators to evaluate"));
    }
    let mut grid = snr_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut rows = Vec::with_capacity(grid.len());
    for snr in &grid {
        let subset: Vec<&Record> = data
            .records
            .iter()
            .filter(|r| (r.snr_db as f64 - snr).abs() < 1e-3)
            .collect();
        if subset.is_empty() {
            return Err(Error::invalid(format!("dataset has no subframes at {snr} dB")));
        }
        let per_record = subset
            .par_iter()
            .map(|r| {
                let truth = r.h_bar_f64();
                estimators
                    .iter()
                    .map(|(name, e)| {
                        let est = e.estimate(r, &data.pattern)?;
                        if est.shape() != truth.shape() {
                            return Err(Error::invalid(format!("{name} returned a grid of the wrong shape")));
                        }
                        Ok(est.mse(&truth))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mse = vec![0.0; estimators.len()];
        for v in &per_record {
            mse.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        mse.iter_mut().for_each(|m| *m /= subset.len() as f64);
        if let Some((i, _)) = mse.iter().enumerate().find(|(_, m)| !m.is_finite()) {
            return Err(Error::NonFinite(format!("{} at {snr} dB", estimators[i].0)));
        }
        rows.push(EvalRow {
            snr_db: *snr,
            num_subframes: subset.len(),
            mse,
        });
    }
    let counts: Vec<String> = rows.iter().map(|r| r.num_subframes.to_string()).collect();
    Ok(EvalReport {
        columns: estimators.iter().map(|(n, _)| n.to_string()).collect(),
        rows,
        metadata: ReportMetadata {
            subframes_per_snr: counts.join(","),
            ..ReportMetadata::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::harness::dataset::{generate_dataset, Split};

    fn data() -> (ExperimentConfig, Dataset) {
        let mut c = ExperimentConfig::default();
        c.sizes.test_per_snr = 3;
        c.snr_grid_db = vec![0.0, 10.0];
        let d = generate_dataset(&c, Split::Test, 3).unwrap();
        (c, d)
    }

    #[test]
    fn oracle_is_zero_and_rows_sorted() {
        let (c, d) = data();
        let r = evaluate_mse(&[("oracle", &OracleEstimator)], &d, &[10.0, 0.0]).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.snr_db).collect::<Vec<_>>(), vec![0.0, 10.0]);
        assert!(r.column("oracle").unwrap().iter().all(|v| *v == 0.0));
        assert!(evaluate_mse(&[("oracle", &OracleEstimator)], &d, &[5.0]).is_err());
        let _ = c;
    }

    #[test]
    fn single_subframe_matches_hand_computation() {
        let (_, mut d) = data();
        d.records.truncate(1);
        let r = evaluate_mse(&[("mse_ls", &LsEstimator)], &d, &[0.0]).unwrap();
        let rec = &d.records[0];
        let est = ls_interpolated(&rec.y_f64(), &d.pattern).unwrap().h_hat;
        let truth = rec.h_bar_f64();
        let mut sum = 0.0;
        for (a, b) in est.as_slice().iter().zip(truth.as_slice()) {
            sum += (a - b).norm_sqr();
        }
        assert_eq!(r.rows[0].mse[0], sum / 1792.0);
    }

    #[test]
    fn csv_layout() {
        let (_, d) = data();
        let r = evaluate_mse(&[("mse_ls", &LsEstimator), ("mse_zero", &ZeroEstimator)], &d, &[0.0, 10.0]).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "snr_db,mse_ls,mse_zero");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,"));
    }
}
