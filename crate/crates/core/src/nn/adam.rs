//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::network::ModelParams;
use super::tensor::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad Adam settings {self:?}")))
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> AdamState<F> {
    pub fn new(config: AdamConfig, params: &ModelParams<F>) -> Self {
        let zeros: Vec<Vec<F>> = params
            .entries()
            .iter()
            .map(|(_, t)| vec![F::zero(); t.len()])
            .collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One update using the gradients stored on `params`, which are then cleared.
/// Non-finite gradients abort without touching parameters or moments.
pub fn adam_step<F: Real>(params: &mut ModelParams<F>, state: &mut AdamState<F>) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::invalid("optimizer state does not match parameters"));
    }
    for (name, t) in params.entries() {
        if let Some(g) = t.grad() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of `{name}`")));
            }
        }
    }
    state.step += 1;
    let c = state.config;
    let bc1 = 1.0 - c.beta1.powi(state.step as i32);
    let bc2 = 1.0 - c.beta2.powi(state.step as i32);
    let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
    let (one_b1, one_b2) = (F::of(1.0 - c.beta1), F::of(1.0 - c.beta2));
    let step_size = F::of(c.lr / bc1);
    let inv_sqrt_bc2 = F::of(1.0 / bc2.sqrt());
    let eps = F::of(c.eps);
    for (i, (_, t)) in params.entries_mut().iter_mut().enumerate() {
        let Some(g) = t.take_grad() else { continue };
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (((p, g), m), v) in t.data_mut().iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + one_b1 * *g;
            *v = b2 * *v + one_b2 * *g * *g;
            *p -= step_size * *m / ((*v).sqrt() * inv_sqrt_bc2 + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn single(value: f64) -> ModelParams<f64> {
        ModelParams::new(vec![("p".into(), Tensor::from_vec(&[1], vec![value]).unwrap())])
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = single(1.0);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        p.accumulate_grads(&[vec![0.37]]).unwrap();
        adam_step(&mut p, &mut s).unwrap();
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let expect = 1.0 - 1e-3 * 0.37 / (0.37 + 1e-8);
        assert!((p.get("p").unwrap().data()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn two_steps_match_closed_form() {
        let mut p = single(0.0);
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(cfg, &p);
        let gs = [1.0, -2.0];
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.0f64);
        for (t, g) in gs.iter().enumerate() {
            p.accumulate_grads(&[vec![*g]]).unwrap();
            adam_step(&mut p, &mut s).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let n = (t + 1) as i32;
            let mh = m / (1.0 - 0.9f64.powi(n));
            let vh = v / (1.0 - 0.999f64.powi(n));
            x -= 1e-3 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p.get("p").unwrap().data()[0] - x).abs() < 1e-12);
        assert_eq!(s.step, 2);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = single(1.0);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        p.accumulate_grads(&[vec![f64::NAN]]).unwrap();
        assert!(matches!(adam_step(&mut p, &mut s), Err(Error::NonFinite(_))));
        assert_eq!(p.get("p").unwrap().data()[0], 1.0);
        assert_eq!(s.step, 0);
    }
}
