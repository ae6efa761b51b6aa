//! Complexity table, N_ICI sweep and helpers shared by the CLI and tests.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::dataset::Dataset;
use super::eval::{evaluate_mse, NetworkEstimator};
use crate::error::Result;
use crate::estimators::ChannelStats;
use crate::icinet::{train_predn, CasResNetConfig, IciNet, PreDnnConfig, Sample};
use crate::nn::{count_macs, count_params};
use crate::ofdm_channel::SystemConfig;
use crate::rng::{derive_seed, tag};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub name: String,
    pub macs: u64,
    pub params: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityTable {
    pub rows: Vec<ComplexityRow>,
}

impl ComplexityTable {
    pub fn row(&self, name: &str) -> Option<&ComplexityRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<10} {:>12} {:>10} {:>8}\n", "network", "macs", "macs", "params");
        for r in &self.rows {
            out.push_str(&format!("{:<10} {:>12} {:>10.2e} {:>8}\n", r.name, r.macs, r.macs as f64, r.params));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("network,macs,params\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.name, r.macs, r.params));
        }
        out
    }
}

/// PreDNN, CasResNet and ICINet counts for one pass over the full grid. The
/// PreDNN runs once per grid position.
pub fn emit_complexity_table(
    system: &SystemConfig,
    predn: &PreDnnConfig,
    casres: &CasResNetConfig,
) -> Result<ComplexityTable> {
    let (k, t) = (system.num_subcarriers, system.num_symbols);
    let pa = predn.architecture();
    let ca = casres.architecture();
    let pre = ComplexityRow {
        name: "PreDNN".into(),
        macs: count_macs(&pa, &[1, k, t, predn.input_width()])?,
        params: count_params(&pa),
    };
    let cas = ComplexityRow {
        name: "CasResNet".into(),
        macs: count_macs(&ca, &[1, k, t, 2])?,
        params: count_params(&ca),
    };
    let full = ComplexityRow {
        name: "ICINet".into(),
        macs: pre.macs + cas.macs,
        params: pre.params + cas.params,
    };
    Ok(ComplexityTable {
        rows: vec![pre, cas, full],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_ici: usize,
    /// Per-cell validation MSE.
    pub val_mse: f64,
    /// Per-cell test MSE at each SNR of `SweepTable::snr_db`.
    pub test_mse: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub snr_db: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, n_ici: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.n_ici == n_ici)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_ici,val_mse");
        for s in &self.snr_db {
            out.push_str(&format!(",test_mse_{s}db"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{:.9e}", r.n_ici, r.val_mse));
            for v in &r.test_mse {
                out.push_str(&format!(",{v:.9e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Trains one PreDNN per `N_ICI` value on the same data and seed and reports
/// its validation and test MSE.
pub fn sweep_n_ici(
    values: &[usize],
    config: &ExperimentConfig,
    train: &[Sample],
    val: &[Sample],
    test: &Dataset,
) -> Result<SweepTable> {
    let cells = (config.system.num_subcarriers * config.system.num_symbols) as f64;
    let mut rows = Vec::with_capacity(values.len());
    for &n in values {
        let pc = PreDnnConfig {
            n_ici: n,
            ..config.predn
        };
        let (net, trace) = train_predn(train, val, &pc, &config.training)?;
        let model = IciNet {
            predn_config: pc,
            casres_config: config.casres,
            predn: Some(net),
            casres: None,
        };
        let report = evaluate_mse(&[("mse_predn", &NetworkEstimator(&model))], test, &config.snr_grid_db)?;
        rows.push(SweepRow {
            n_ici: n,
            val_mse: trace.final_val_loss() / cells,
            test_mse: report.column("mse_predn").unwrap_or_default(),
        });
    }
    let mut snr_db = config.snr_grid_db.clone();
    snr_db.sort_by(f64::total_cmp);
    snr_db.dedup();
    Ok(SweepTable { snr_db, rows })
}

/// Channel correlations of the test-channel model for the LMMSE baseline,
/// from draws independent of every dataset.
pub fn calibrate_lmmse(config: &ExperimentConfig, seed: u64) -> Result<ChannelStats> {
    let sys = &config.system;
    ChannelStats::calibrate(
        sys,
        &config.test_channel.profile(sys)?,
        config.test_channel.doppler_hz,
        &config.pilot_pattern()?,
        config.sizes.lmmse_calibration.max(1),
        derive_seed(seed, &[tag::CALIBRATION]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_two_counts() {
        let t = emit_complexity_table(&SystemConfig::default(), &PreDnnConfig::default(), &CasResNetConfig::default()).unwrap();
        let cas = t.row("CasResNet").unwrap();
        let full = t.row("ICINet").unwrap();
        assert_eq!((cas.macs, cas.params), (4_530_176, 2562));
        assert_eq!((full.macs, full.params), (5_906_432, 3364));
        assert_eq!(full.params - cas.params, 802);
        assert!(t.to_text().contains("4.53e6"));
        assert!(t.to_csv().contains("ICINet,5906432,3364"));
    }
}
