//! Sequential, end-to-end and single-stage training.

use num_complex::{Complex32, Complex64};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::casresnet::CasResNetConfig;
use super::model::IciNet;
use super::predn::{grid_to_tensor, predn_features, PreDnnConfig};
use crate::error::{Error, Result};
use crate::estimators::{equalize_hard, ls_interpolated};
use crate::grid::{ComplexGrid, Grid};
use crate::nn::{adam_step, mse_loss, AdamConfig, AdamState, Cache, Network, Real, Tensor};
use crate::ofdm_channel::PilotPattern;
use crate::rng::{derive_seed, stream, tag};

/// Network inputs and ground truth of one subframe, in single precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub y: Grid<Complex32>,
    pub x_hat: Grid<Complex32>,
    pub h_hat: Grid<Complex32>,
    /// Ground-truth CFR as a `[1, K, T, 2]` tensor.
    pub target: Tensor<f32>,
}

impl Sample {
    pub fn new(y: &ComplexGrid, x_hat: &ComplexGrid, h_hat: &ComplexGrid, h_bar: &ComplexGrid) -> Result<Self> {
        if [x_hat.shape(), h_hat.shape(), h_bar.shape()].iter().any(|s| *s != y.shape()) {
            return Err(Error::invalid("sample grids differ in shape"));
        }
        Ok(Self {
            y: y.to_f32(),
            x_hat: x_hat.to_f32(),
            h_hat: h_hat.to_f32(),
            target: grid_to_tensor(&h_bar.to_f32()),
        })
    }

    /// Interpolated LS estimate and hard decisions from `Y`, then packs the sample.
    pub fn prepare(y: &ComplexGrid, pattern: &PilotPattern, h_bar: &ComplexGrid) -> Result<Self> {
        let h_hat = ls_interpolated(y, pattern)?.h_hat;
        let x_hat = equalize_hard(y, &h_hat, pattern)?.x_hat;
        Self::new(y, &x_hat, &h_hat, h_bar)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.y.shape()
    }

    pub fn h_hat_f64(&self) -> ComplexGrid {
        self.h_hat.map(|z| Complex64::new(z.re as f64, z.im as f64))
    }

    pub fn h_bar(&self) -> ComplexGrid {
        let (kk, tt) = self.shape();
        let v = self
            .target
            .data()
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0] as f64, c[1] as f64))
            .collect();
        Grid::from_vec(kk, tt, v).expect("target matches grid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Print one line per epoch to stderr.
    #[serde(skip)]
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 200,
            adam: AdamConfig::default(),
            seed: 0,
            verbose: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        self.adam.validate()
    }

    /// Optimizer steps per epoch for `n` training samples.
    pub fn updates_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Losses are mean per-subframe squared Frobenius errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub phase: String,
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
}

impl LossTrace {
    pub fn final_val_loss(&self) -> f64 {
        self.epochs.last().map_or(self.initial_val_loss, |e| e.val_loss)
    }

    /// Validation loss after `epoch` epochs (1-based).
    pub fn val_loss_at(&self, epoch: usize) -> Option<f64> {
        self.epochs.iter().find(|e| e.epoch == epoch).map(|e| e.val_loss)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// PreDNN first, then CasResNet on the frozen PreDNN output.
    Sequential,
    /// Both stages jointly through the composition.
    E2e,
    /// PreDNN alone.
    Predn,
    /// CasResNet alone on the initial estimate.
    Casres,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" | "seq" => Ok(Self::Sequential),
            "e2e" | "end-to-end" => Ok(Self::E2e),
            "predn" => Ok(Self::Predn),
            "casres" | "casresnet" => Ok(Self::Casres),
            _ => Err(Error::invalid(format!("unknown training mode `{s}`"))),
        }
    }
}

type SampleGrads = (f64, Vec<Vec<Vec<f32>>>);

/// Mini-batch Adam over `nets`. `sample_grad(nets, i)` returns the loss of
/// training sample `i` and per-network parameter gradients; `val_loss(nets, i)`
/// the loss of validation sample `i`. Per-sample work runs in parallel and is
/// reduced in batch order.
#[allow(clippy::too_many_arguments)]
fn run_phase<G, V>(
    phase: &str,
    phase_tag: u64,
    nets: &mut [Network<f32>],
    n_train: usize,
    n_val: usize,
    cfg: &TrainConfig,
    sample_grad: G,
    val_loss: V,
) -> Result<LossTrace>
where
    G: Fn(&[Network<f32>], usize) -> Result<SampleGrads> + Sync,
    V: Fn(&[Network<f32>], usize) -> Result<f64> + Sync,
{
    cfg.validate()?;
    if n_train == 0 || n_val == 0 {
        return Err(Error::invalid("training and validation sets must be nonempty"));
    }
    let validate = |nets: &[Network<f32>]| -> Result<f64> {
        let losses = (0..n_val)
            .into_par_iter()
            .map(|i| val_loss(nets, i))
            .collect::<Result<Vec<f64>>>()?;
        Ok(losses.iter().sum::<f64>() / n_val as f64)
    };
    let mut states: Vec<AdamState<f32>> = nets.iter().map(|n| AdamState::new(cfg.adam, n.params())).collect();
    let initial_val_loss = validate(nets)?;
    let mut trace = LossTrace {
        phase: phase.to_string(),
        initial_val_loss,
        epochs: Vec::with_capacity(cfg.epochs),
    };
    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream(cfg.seed, &[tag::SHUFFLE, phase_tag, epoch as u64]));
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let nets_ref: &[Network<f32>] = nets;
            let results = batch
                .par_iter()
                .map(|&i| sample_grad(nets_ref, i))
                .collect::<Result<Vec<SampleGrads>>>()?;
            let scale = 1.0 / batch.len() as f32;
            let mut iter = results.into_iter();
            let (mut loss, mut sum) = iter.next().expect("nonempty batch");
            for (l, g) in iter {
                loss += l;
                for (acc, add) in sum.iter_mut().zip(&g) {
                    for (a, b) in acc.iter_mut().zip(add) {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
                    }
                }
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("{phase}: loss at epoch {epoch}, batch {b}")));
            }
            total += loss;
            for ((net, state), mut grads) in nets.iter_mut().zip(&mut states).zip(sum) {
                grads.iter_mut().flatten().for_each(|v| *v *= scale);
                net.params_mut().accumulate_grads(&grads)?;
                adam_step(net.params_mut(), state).map_err(|e| match e {
                    Error::NonFinite(m) => Error::NonFinite(format!("{phase}: {m} at epoch {epoch}, batch {b}")),
                    other => other,
                })?;
            }
        }
        let record = EpochRecord {
            epoch,
            train_loss: total / n_train as f64,
            val_loss: validate(nets)?,
        };
        if cfg.verbose {
            eprintln!(
                "[{phase}] epoch {epoch:>3}: train {:.5e}  val {:.5e}",
                record.train_loss, record.val_loss
            );
        }
        trace.epochs.push(record);
    }
    Ok(trace)
}

fn per_sample_loss(pred: &Tensor<f32>, target: &Tensor<f32>) -> Result<(f64, Tensor<f32>)> {
    let (l, g) = mse_loss(pred, target)?;
    Ok((l as f64, g))
}

fn predn_grad(net: &Network<f32>, s: &Sample, cfg: &PreDnnConfig) -> Result<SampleGrads> {
    let mut cache = Cache::new();
    let out = net.forward_cached(predn_features(&s.y, &s.x_hat, &s.h_hat, cfg)?, &mut cache)?;
    let (loss, up) = per_sample_loss(out, &s.target)?;
    Ok((loss, vec![net.backward(&cache, &up, false)?.params]))
}

fn predn_loss(net: &Network<f32>, s: &Sample, cfg: &PreDnnConfig) -> Result<f64> {
    let out = net.forward(&predn_features(&s.y, &s.x_hat, &s.h_hat, cfg)?)?;
    Ok(per_sample_loss(&out, &s.target)?.0)
}

fn image_grad(net: &Network<f32>, input: &Tensor<f32>, target: &Tensor<f32>) -> Result<SampleGrads> {
    let mut cache = Cache::new();
    let out = net.forward_cached(input.clone(), &mut cache)?;
    let (loss, up) = per_sample_loss(out, target)?;
    Ok((loss, vec![net.backward(&cache, &up, false)?.params]))
}

fn image_loss(net: &Network<f32>, input: &Tensor<f32>, target: &Tensor<f32>) -> Result<f64> {
    Ok(per_sample_loss(&net.forward(input)?, target)?.0)
}

/// Loss `|F_Cas(F_Pre(features)) - target|^2` and its gradients with respect
/// to the PreDNN and CasResNet parameters, back-propagated through both stages.
pub fn composed_backward<F: Real>(
    pre: &Network<F>,
    cas: &Network<F>,
    features: Tensor<F>,
    target: &Tensor<F>,
) -> Result<(F, Vec<Vec<F>>, Vec<Vec<F>>)> {
    let mut pre_cache = Cache::new();
    let h_tilde = pre.forward_cached(features, &mut pre_cache)?.clone();
    let mut cas_cache = Cache::new();
    let out = cas.forward_cached(h_tilde, &mut cas_cache)?;
    let (loss, up) = mse_loss(out, target)?;
    let cas_grads = cas.backward(&cas_cache, &up, true)?;
    let shape = pre_cache.output().expect("forward ran").shape().to_vec();
    let mid = Tensor::from_vec(&shape, cas_grads.input.expect("input gradient requested"))?;
    let pre_grads = pre.backward(&pre_cache, &mid, false)?;
    Ok((loss, pre_grads.params, cas_grads.params))
}

fn composed_grad(pre: &Network<f32>, cas: &Network<f32>, s: &Sample, cfg: &PreDnnConfig) -> Result<SampleGrads> {
    let features = predn_features(&s.y, &s.x_hat, &s.h_hat, cfg)?;
    let (loss, g_pre, g_cas) = composed_backward(pre, cas, features, &s.target)?;
    Ok((loss as f64, vec![g_pre, g_cas]))
}

fn check_samples(samples: &[Sample], other: &[Sample]) -> Result<()> {
    let shape = samples.first().map(Sample::shape);
    if samples.iter().chain(other).any(|s| Some(s.shape()) != shape) {
        return Err(Error::invalid("all samples must share one grid shape"));
    }
    Ok(())
}

/// Trains a PreDNN alone against the ground truth.
pub fn train_predn(
    train: &[Sample],
    val: &[Sample],
    predn_config: &PreDnnConfig,
    cfg: &TrainConfig,
) -> Result<(Network<f32>, LossTrace)> {
    check_samples(train, val)?;
    if let Some(s) = train.first() {
        predn_config.validate(s.shape().0)?;
    }
    let seed = derive_seed(cfg.seed, &[tag::INIT, 1]);
    let mut nets = vec![Network::initialized(predn_config.architecture(), seed)];
    let trace = run_phase(
        "predn",
        1,
        &mut nets,
        train.len(),
        val.len(),
        cfg,
        |n, i| predn_grad(&n[0], &train[i], predn_config),
        |n, i| predn_loss(&n[0], &val[i], predn_config),
    )?;
    Ok((nets.pop().unwrap(), trace))
}

/// Trains a CasResNet mapping `inputs[i]` to `targets[i]`.
fn train_image(
    phase: &str,
    phase_tag: u64,
    train: (&[Tensor<f32>], &[Sample]),
    val: (&[Tensor<f32>], &[Sample]),
    casres_config: &CasResNetConfig,
    cfg: &TrainConfig,
) -> Result<(Network<f32>, LossTrace)> {
    casres_config.validate()?;
    let seed = derive_seed(cfg.seed, &[tag::INIT, 2]);
    let mut nets = vec![Network::initialized(casres_config.architecture(), seed)];
    let trace = run_phase(
        phase,
        phase_tag,
        &mut nets,
        train.0.len(),
        val.0.len(),
        cfg,
        |n, i| image_grad(&n[0], &train.0[i], &train.1[i].target),
        |n, i| image_loss(&n[0], &val.0[i], &val.1[i].target),
    )?;
    Ok((nets.pop().unwrap(), trace))
}

fn predn_outputs(net: &Network<f32>, samples: &[Sample], cfg: &PreDnnConfig) -> Result<Vec<Tensor<f32>>> {
    samples
        .par_iter()
        .map(|s| net.forward(&predn_features(&s.y, &s.x_hat, &s.h_hat, cfg)?))
        .collect()
}

/// PreDNN against the truth, then CasResNet on the frozen PreDNN outputs,
/// which are computed once per dataset.
pub fn train_sequential(
    train: &[Sample],
    val: &[Sample],
    predn_config: &PreDnnConfig,
    casres_config: &CasResNetConfig,
    cfg: &TrainConfig,
) -> Result<(IciNet<f32>, Vec<LossTrace>)> {
    let (predn, phase1) = train_predn(train, val, predn_config, cfg)?;
    let train_in = predn_outputs(&predn, train, predn_config)?;
    let val_in = predn_outputs(&predn, val, predn_config)?;
    let (casres, phase2) = train_image("casres", 2, (&train_in, train), (&val_in, val), casres_config, cfg)?;
    let model = IciNet {
        predn_config: *predn_config,
        casres_config: *casres_config,
        predn: Some(predn),
        casres: Some(casres),
    };
    Ok((model, vec![phase1, phase2]))
}

/// Both stages trained jointly against the final-output loss.
pub fn train_end_to_end(
    train: &[Sample],
    val: &[Sample],
    predn_config: &PreDnnConfig,
    casres_config: &CasResNetConfig,
    cfg: &TrainConfig,
) -> Result<(IciNet<f32>, LossTrace)> {
    check_samples(train, val)?;
    if let Some(s) = train.first() {
        predn_config.validate(s.shape().0)?;
    }
    casres_config.validate()?;
    let model = IciNet::<f32>::initialized(*predn_config, *casres_config, cfg.seed);
    let mut nets = vec![model.predn.unwrap(), model.casres.unwrap()];
    let trace = run_phase(
        "e2e",
        3,
        &mut nets,
        train.len(),
        val.len(),
        cfg,
        |n, i| composed_grad(&n[0], &n[1], &train[i], predn_config),
        |n, i| {
            let s = &val[i];
            let mid = n[0].forward(&predn_features(&s.y, &s.x_hat, &s.h_hat, predn_config)?)?;
            image_loss(&n[1], &mid, &s.target)
        },
    )?;
    let casres = nets.pop();
    let predn = nets.pop();
    Ok((
        IciNet {
            predn_config: *predn_config,
            casres_config: *casres_config,
            predn,
            casres,
        },
        trace,
    ))
}

/// CasResNet alone, refining the initial estimate directly.
pub fn train_casres_only(
    train: &[Sample],
    val: &[Sample],
    casres_config: &CasResNetConfig,
    cfg: &TrainConfig,
) -> Result<(IciNet<f32>, LossTrace)> {
    check_samples(train, val)?;
    let inputs = |s: &[Sample]| s.iter().map(|x| grid_to_tensor(&x.h_hat)).collect::<Vec<_>>();
    let (train_in, val_in) = (inputs(train), inputs(val));
    let (casres, trace) = train_image("casres_only", 4, (&train_in, train), (&val_in, val), casres_config, cfg)?;
    Ok((
        IciNet {
            predn_config: PreDnnConfig::default(),
            casres_config: *casres_config,
            predn: None,
            casres: Some(casres),
        },
        trace,
    ))
}

/// Dispatches on `mode`; returns the model and its loss traces.
pub fn train_mode(
    mode: TrainMode,
    train: &[Sample],
    val: &[Sample],
    predn_config: &PreDnnConfig,
    casres_config: &CasResNetConfig,
    cfg: &TrainConfig,
) -> Result<(IciNet<f32>, Vec<LossTrace>)> {
    match mode {
        TrainMode::Sequential => train_sequential(train, val, predn_config, casres_config, cfg),
        TrainMode::E2e => train_end_to_end(train, val, predn_config, casres_config, cfg).map(|(m, t)| (m, vec![t])),
        TrainMode::Predn => train_predn(train, val, predn_config, cfg).map(|(n, t)| {
            let model = IciNet {
                predn_config: *predn_config,
                casres_config: *casres_config,
                predn: Some(n),
                casres: None,
            };
            (model, vec![t])
        }),
        TrainMode::Casres => train_casres_only(train, val, casres_config, cfg).map(|(m, t)| (m, vec![t])),
    }
}
