//! Convolutional refinement of the whole channel image with two nested
//! residual connections.

use serde::{Deserialize, Serialize};

use super::predn::{grid_to_tensor, tensor_to_grid};
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::nn::{Architecture, Network, Real, Source};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CasResNetConfig {
    pub filters: usize,
    pub outer_kernel: usize,
    pub inner_kernel: usize,
}

impl Default for CasResNetConfig {
    fn default() -> Self {
        Self {
            filters: 8,
            outer_kernel: 5,
            inner_kernel: 3,
        }
    }
}

impl CasResNetConfig {
    /// conv1 (a) -> conv2 -> ReLU -> conv3 -> ReLU -> conv4 (b) -> a + b ->
    /// conv5 -> + input.
    pub fn architecture(&self) -> Architecture {
        let (f, o, i) = (self.filters, self.outer_kernel, self.inner_kernel);
        let mut a = Architecture::new();
        let head = a.conv2d("conv1", o, o, 2, f);
        a.conv2d("conv2", i, i, f, f);
        a.relu("relu2");
        a.conv2d("conv3", i, i, f, f);
        a.relu("relu3");
        let body = a.conv2d("conv4", i, i, f, f);
        a.add("inner_skip", head, body);
        let tail = a.conv2d("conv5", o, o, f, 2);
        a.add("outer_skip", tail, Source::Input);
        a
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters == 0 || self.outer_kernel % 2 == 0 || self.inner_kernel % 2 == 0 {
            return Err(Error::invalid(format!("bad CasResNet settings {self:?}")));
        }
        Ok(())
    }
}

pub fn casresnet_refine<F: Real>(h_tilde: &ComplexGrid, net: &Network<F>, config: &CasResNetConfig) -> Result<ComplexGrid> {
    if net.architecture() != &config.architecture() {
        return Err(Error::invalid("CasResNet parameters do not match the configuration"));
    }
    let out = net.forward(&grid_to_tensor(h_tilde))?;
    tensor_to_grid(&out)
}
