//! Parameter and multiply-accumulate counts.

use super::network::{Architecture, LayerKind};
use crate::error::Result;

pub fn count_params(arch: &Architecture) -> usize {
    arch.param_layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
}

/// Multiply-accumulates of one forward pass over `input_shape`. Dense layers
/// cost `rows * in * out`, convolutions `n h w * kh kw cin * cout`; bias adds,
/// activations and additions are free.
pub fn count_macs(arch: &Architecture, input_shape: &[usize]) -> Result<u64> {
    let shapes = arch.infer_shapes(input_shape)?;
    let mut total = 0u64;
    for (layer, out) in arch.layers().iter().zip(&shapes) {
        let positions = out.iter().take(out.len().saturating_sub(1)).product::<usize>() as u64;
        total += match layer.kind {
            LayerKind::Dense { inputs, outputs } => positions * (inputs * outputs) as u64,
            LayerKind::Conv2d { kh, kw, cin, cout } => positions * (kh * kw * cin * cout) as u64,
            LayerKind::Relu | LayerKind::Add => 0,
        };
    }
    Ok(total)
}
