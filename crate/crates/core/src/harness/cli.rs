//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{ExperimentConfig, Preset};
use super::dataset::{generate_dataset, Dataset, Split};
use super::eval::{evaluate_mse, ChannelEstimator, LmmseBaseline, LsEstimator, NetworkEstimator};
use super::experiments::{calibrate_lmmse, emit_complexity_table, sweep_n_ici};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::icinet::{train_mode, IciNet, Sample, TrainMode};
use crate::ofdm_channel::{dump_cfr_magnitude, matrix_to_csv, ChannelRealization, DelayProfile, FadingSpec};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "ICINET_THREADS";

#[derive(Parser, Debug)]
#[command(name = "icinet-lab", version, about = "ICI-aware OFDM channel estimation experiments")]
pub struct Cli {
    /// JSON experiment config; fields it omits come from the preset.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Base preset for datasets and training.
    #[arg(long, global = true, value_enum, default_value_t = PresetArg::Desk)]
    pub preset: PresetArg,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sequential,
    E2e,
    Predn,
    Casres,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Eva,
    La,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Training dataset (generated from the config when omitted).
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// Validation dataset (generated from the config when omitted).
    #[arg(long, value_name = "FILE")]
    pub val: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a dataset split and write it in the ICIN format.
    GenerateDataset {
        #[arg(long, value_enum)]
        split: SplitArg,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Train a model and write an ICIW checkpoint.
    Train {
        #[arg(long, value_enum, default_value_t = ModeArg::Sequential)]
        mode: ModeArg,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write the per-epoch loss traces as JSON.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Print one line per epoch.
        #[arg(long)]
        verbose: bool,
    },
    /// MSE versus SNR of interpolated LS and any given models.
    Evaluate {
        /// Test dataset (generated from the config when omitted).
        #[arg(long, value_name = "FILE")]
        test: Option<PathBuf>,
        #[arg(long, value_name = "CKPT")]
        predn: Option<PathBuf>,
        #[arg(long, value_name = "CKPT")]
        casres: Option<PathBuf>,
        #[arg(long, value_name = "CKPT")]
        icinet_seq: Option<PathBuf>,
        #[arg(long, value_name = "CKPT")]
        icinet_e2e: Option<PathBuf>,
        /// Include the LMMSE baseline.
        #[arg(long)]
        lmmse: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
        out: ReportFormat,
        /// Report file (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Train one PreDNN per neighbor radius and tabulate its MSE.
    SweepNici {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0usize, 1, 2, 3])]
        values: Vec<usize>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        test: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Parameter and MAC counts of the networks.
    CountComplexity {
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
    },
    /// Normalized |H| of one symbol's full CFR matrix as CSV.
    DumpCfr {
        #[arg(long, value_enum, default_value_t = ProfileArg::Eva)]
        profile: ProfileArg,
        /// Tap count of the linear-attenuation profile.
        #[arg(long, default_value_t = 6)]
        taps: usize,
        /// Maximum Doppler in Hz (the test-channel value when omitted).
        #[arg(long)]
        doppler: Option<f64>,
        #[arg(long, default_value_t = 0)]
        symbol: usize,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 on usage
/// errors, 2 on runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::preset(match cli.preset {
        PresetArg::Paper => Preset::Paper,
        PresetArg::Desk => Preset::Desk,
    });
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_json_over(base, &std::fs::read_to_string(path)?)?,
        None => base,
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn dataset(path: Option<&Path>, cfg: &ExperimentConfig, split: Split) -> Result<Dataset> {
    match path {
        Some(p) => Dataset::load(p),
        None => generate_dataset(cfg, split, cfg.seed),
    }
}

fn samples(data: &DataArgs, cfg: &ExperimentConfig) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let train = dataset(data.train.as_deref(), cfg, Split::Train)?.samples()?;
    let val = dataset(data.val.as_deref(), cfg, Split::Val)?.samples()?;
    Ok((train, val))
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::GenerateDataset { split, out } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
                SplitArg::Test => Split::Test,
            };
            let d = generate_dataset(&cfg, split, cfg.seed)?;
            d.save(out)?;
            eprintln!("wrote {} subframes to {}", d.len(), out.display());
        }
        Command::Train {
            mode,
            data,
            out,
            trace,
            verbose,
        } => {
            let mode = match mode {
                ModeArg::Sequential => TrainMode::Sequential,
                ModeArg::E2e => TrainMode::E2e,
                ModeArg::Predn => TrainMode::Predn,
                ModeArg::Casres => TrainMode::Casres,
            };
            let (train, val) = samples(data, &cfg)?;
            let mut tc = cfg.training;
            tc.verbose = *verbose;
            let (model, traces) = train_mode(mode, &train, &val, &cfg.predn, &cfg.casres, &tc)?;
            model.save(out)?;
            if let Some(p) = trace {
                write_atomic(p, serde_json::to_string_pretty(&traces)?.as_bytes())?;
            }
            for t in &traces {
                eprintln!("{}: final validation loss {:.6e}", t.phase, t.final_val_loss());
            }
        }
        Command::Evaluate {
            test,
            predn,
            casres,
            icinet_seq,
            icinet_e2e,
            lmmse,
            out,
            output,
        } => {
            let data = dataset(test.as_deref(), &cfg, Split::Test)?;
            let load = |p: &Option<PathBuf>| p.as_deref().map(IciNet::<f32>::load).transpose();
            let models = [load(predn)?, load(casres)?, load(icinet_seq)?, load(icinet_e2e)?];
            let nets: Vec<Option<NetworkEstimator>> = models.iter().map(|m| m.as_ref().map(NetworkEstimator)).collect();
            let baseline = if *lmmse {
                Some(LmmseBaseline::for_dataset(calibrate_lmmse(&cfg, cfg.seed)?, &data)?)
            } else {
                None
            };
            let mut estimators: Vec<(&str, &dyn ChannelEstimator)> = vec![("mse_ls", &LsEstimator)];
            for (name, net) in ["mse_predn", "mse_casres", "mse_icinet_seq", "mse_icinet_e2e"].iter().zip(&nets) {
                if let Some(n) = net {
                    estimators.push((name, n));
                }
            }
            if let Some(b) = &baseline {
                estimators.push(("mse_lmmse", b));
            }
            let mut snrs: Vec<f64> = data.snr_points().iter().map(|v| *v as f64).collect();
            snrs.sort_by(f64::total_cmp);
            let mut report = evaluate_mse(&estimators, &data, &snrs)?;
            report.metadata.config_fingerprint = cfg.fingerprint();
            report.metadata.seed = cfg.seed;
            report.metadata.dataset = match test {
                Some(p) => p.display().to_string(),
                None => format!("generated test split, seed {}", cfg.seed),
            };
            let text = match out {
                ReportFormat::Csv => report.to_csv(),
                ReportFormat::Json => report.to_json() + "\n",
            };
            emit(output.as_deref(), &text)?;
        }
        Command::SweepNici {
            values,
            data,
            test,
            output,
        } => {
            let (train, val) = samples(data, &cfg)?;
            let test = dataset(test.as_deref(), &cfg, Split::Test)?;
            let table = sweep_n_ici(values, &cfg, &train, &val, &test)?;
            emit(output.as_deref(), &table.to_csv())?;
        }
        Command::CountComplexity { format } => {
            let t = emit_complexity_table(&cfg.system, &cfg.predn, &cfg.casres)?;
            let text = match format {
                TableFormat::Text => t.to_text(),
                TableFormat::Csv => t.to_csv(),
            };
            emit(None, &text)?;
        }
        Command::DumpCfr {
            profile,
            taps,
            doppler,
            symbol,
            output,
        } => {
            let sys = &cfg.system;
            let prof = match profile {
                ProfileArg::Eva => cfg.test_channel.profile(sys)?,
                ProfileArg::La => DelayProfile::linear_attenuation(*taps)?,
            };
            let spec = FadingSpec::new(doppler.unwrap_or(cfg.test_channel.doppler_hz), cfg.seed);
            let r = ChannelRealization::generate(&spec, &prof, sys)?;
            emit(output.as_deref(), &matrix_to_csv(&dump_cfr_magnitude(&r, *symbol, sys)?))?;
        }
    }
    Ok(())
}

/// Applies the thread-count environment variable to the global pool.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
