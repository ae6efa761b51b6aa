//! The composed estimator and its checkpoint files.

use std::path::Path;

use super::casresnet::{casresnet_refine, CasResNetConfig};
use super::predn::{predn_refine, PreDnnConfig};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::grid::{ComplexGrid, Grid};
use crate::rng::{derive_seed, tag};
use crate::nn::{decode_weights, encode_weights, ModelParams, Network, Real, Tensor};
use num_complex::Complex;

const DESCRIPTOR: &str = "arch.descriptor";
const DESCRIPTOR_VERSION: f32 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct RefinedEstimate {
    /// PreDNN output.
    pub h_tilde: ComplexGrid,
    /// CasResNet output.
    pub h_breve: ComplexGrid,
}

/// `F_Cas(F_Pre(Y, X, H))`.
pub fn icinet_forward<T, F>(
    y: &Grid<Complex<T>>,
    x_hat: &Grid<Complex<T>>,
    h_hat: &Grid<Complex<T>>,
    predn: &Network<F>,
    casres: &Network<F>,
    predn_config: &PreDnnConfig,
    casres_config: &CasResNetConfig,
) -> Result<RefinedEstimate>
where
    T: Copy + Into<f64>,
    F: Real,
{
    let h_tilde = predn_refine(y, x_hat, h_hat, predn, predn_config)?;
    let h_breve = casresnet_refine(&h_tilde, casres, casres_config)?;
    Ok(RefinedEstimate { h_tilde, h_breve })
}

/// PreDNN and/or CasResNet. A missing stage is skipped, so the same type
/// covers PreDNN-only, CasResNet-only and the full network.
#[derive(Clone, Debug, PartialEq)]
pub struct IciNet<F> {
    pub predn_config: PreDnnConfig,
    pub casres_config: CasResNetConfig,
    pub predn: Option<Network<F>>,
    pub casres: Option<Network<F>>,
}

impl<F: Real> IciNet<F> {
    pub fn initialized(predn_config: PreDnnConfig, casres_config: CasResNetConfig, seed: u64) -> Self {
        Self {
            predn: Some(Network::initialized(predn_config.architecture(), derive_seed(seed, &[tag::INIT, 1]))),
            casres: Some(Network::initialized(casres_config.architecture(), derive_seed(seed, &[tag::INIT, 2]))),
            predn_config,
            casres_config,
        }
    }

    /// Final estimate from `(Y, X, H)`; the initial estimate passes through
    /// absent stages unchanged.
    pub fn refine<T>(&self, y: &Grid<Complex<T>>, x_hat: &Grid<Complex<T>>, h_hat: &Grid<Complex<T>>) -> Result<ComplexGrid>
    where
        T: Copy + Into<f64>,
    {
        let h = match &self.predn {
            Some(net) => predn_refine(y, x_hat, h_hat, net, &self.predn_config)?,
            None => h_hat.map(|z| num_complex::Complex64::new(z.re.into(), z.im.into())),
        };
        match &self.casres {
            Some(net) => casresnet_refine(&h, net, &self.casres_config),
            None => Ok(h),
        }
    }

    pub fn cast<G: Real>(&self) -> IciNet<G> {
        IciNet {
            predn_config: self.predn_config,
            casres_config: self.casres_config,
            predn: self.predn.as_ref().map(|n| n.cast()),
            casres: self.casres.as_ref().map(|n| n.cast()),
        }
    }

    pub fn to_params(&self) -> ModelParams<F> {
        let p = &self.predn_config;
        let c = &self.casres_config;
        let descriptor = [
            DESCRIPTOR_VERSION,
            self.predn.is_some() as u8 as f32,
            self.casres.is_some() as u8 as f32,
            p.n_ici as f32,
            p.hidden_units as f32,
            c.filters as f32,
            c.outer_kernel as f32,
            c.inner_kernel as f32,
        ];
        let mut entries = vec![(
            DESCRIPTOR.to_string(),
            Tensor::from_vec(&[descriptor.len()], descriptor.iter().map(|v| F::of(*v as f64)).collect()).unwrap(),
        )];
        for (prefix, net) in [("predn", &self.predn), ("casres", &self.casres)] {
            if let Some(net) = net {
                for (name, t) in net.params().entries() {
                    entries.push((format!("{prefix}.{name}"), t.clone()));
                }
            }
        }
        ModelParams::new(entries)
    }

    pub fn from_params(params: ModelParams<F>) -> Result<Self> {
        let mut entries = params.into_entries().into_iter();
        let (name, desc) = entries
            .next()
            .ok_or_else(|| Error::Format("empty checkpoint".into()))?;
        if name != DESCRIPTOR {
            return Err(Error::Format(format!("checkpoint starts with `{name}`, expected `{DESCRIPTOR}`")));
        }
        let d: Vec<usize> = desc.data().iter().map(|v| v.as_f64() as usize).collect();
        if d.len() != 8 || desc.data()[0].as_f64() as f32 != DESCRIPTOR_VERSION {
            return Err(Error::Format("unsupported architecture descriptor".into()));
        }
        let predn_config = PreDnnConfig {
            n_ici: d[3],
            hidden_units: d[4],
        };
        let casres_config = CasResNetConfig {
            filters: d[5],
            outer_kernel: d[6],
            inner_kernel: d[7],
        };
        let (mut pre, mut cas) = (Vec::new(), Vec::new());
        for (name, t) in entries {
            if let Some(n) = name.strip_prefix("predn.") {
                pre.push((n.to_string(), t));
            } else if let Some(n) = name.strip_prefix("casres.") {
                cas.push((n.to_string(), t));
            } else {
                return Err(Error::Format(format!("unexpected tensor `{name}` in checkpoint")));
            }
        }
        let build = |present: usize, entries: Vec<(String, Tensor<F>)>, arch| -> Result<Option<Network<F>>> {
            match (present, entries.is_empty()) {
                (0, true) => Ok(None),
                (1, false) => Network::new(arch, ModelParams::new(entries))
                    .map(Some)
                    .map_err(|e| Error::Format(format!("checkpoint does not match its descriptor: {e}"))),
                _ => Err(Error::Format("checkpoint descriptor disagrees with its tensors".into())),
            }
        };
        Ok(Self {
            predn: build(d[1], pre, predn_config.architecture())?,
            casres: build(d[2], cas, casres_config.architecture())?,
            predn_config,
            casres_config,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_weights(&self.to_params())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_params(decode_weights(bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
