//! Per-subcarrier refinement network with neighbor inputs.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, Grid};
use crate::nn::{Architecture, Network, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreDnnConfig {
    /// Number of neighbor subcarriers on each side.
    pub n_ici: usize,
    pub hidden_units: usize,
}

impl Default for PreDnnConfig {
    fn default() -> Self {
        Self {
            n_ici: 2,
            hidden_units: 32,
        }
    }
}

impl PreDnnConfig {
    pub fn with_n_ici(n_ici: usize) -> Self {
        Self {
            n_ici,
            ..Self::default()
        }
    }

    /// `8 N + 6`: `2N+1` values each of Y and X, one of H, as (re, im) pairs.
    pub fn input_width(&self) -> usize {
        8 * self.n_ici + 6
    }

    pub fn validate(&self, num_subcarriers: usize) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::invalid("hidden_units must be positive"));
        }
        if 2 * self.n_ici + 1 > num_subcarriers {
            return Err(Error::invalid(format!(
                "n_ici = {} needs at least {} subcarriers",
                self.n_ici,
                2 * self.n_ici + 1
            )));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        let mut a = Architecture::new();
        a.dense("fc1", self.input_width(), self.hidden_units);
        a.relu("relu");
        a.dense("fc2", self.hidden_units, 2);
        a
    }
}

/// Writes the input vector of position `(k, t)` into `out`. Subcarrier
/// indices wrap modulo K; `k` is 0-based.
pub(crate) fn assemble_into<T, F>(
    y: &Grid<Complex<T>>,
    x_hat: &Grid<Complex<T>>,
    h_hat: &Grid<Complex<T>>,
    k: usize,
    t: usize,
    n_ici: usize,
    out: &mut [F],
) where
    T: Copy + Into<f64>,
    F: Real,
{
    let kk = y.num_subcarriers();
    let mut o = 0;
    let mut put = |z: Complex<T>| {
        out[o] = F::of(z.re.into());
        out[o + 1] = F::of(z.im.into());
        o += 2;
    };
    for grid in [y, x_hat] {
        for d in 0..=2 * n_ici {
            let m = (k + kk * (n_ici + 1) + d - n_ici) % kk;
            put(*grid.get(m, t));
        }
    }
    put(*h_hat.get(k, t));
}

/// Input vector of PreDNN at subcarrier `k` (0-based) of symbol `t`:
/// `[Y_{k-N..k+N}, X_{k-N..k+N}, H_k]` with each complex value expanded as
/// `(re, im)`.
pub fn assemble_predn_input(
    y: &ComplexGrid,
    x_hat: &ComplexGrid,
    h_hat: &ComplexGrid,
    k: usize,
    t: usize,
    n_ici: usize,
) -> Result<Vec<f64>> {
    check_grids(y, x_hat, h_hat)?;
    let (kk, tt) = y.shape();
    if k >= kk || t >= tt {
        return Err(Error::Index {
            index: k.max(t),
            len: if k >= kk { kk } else { tt },
        });
    }
    let mut out = vec![0.0; 8 * n_ici + 6];
    assemble_into(y, x_hat, h_hat, k, t, n_ici, &mut out);
    Ok(out)
}

fn check_grids<T>(y: &Grid<T>, x_hat: &Grid<T>, h_hat: &Grid<T>) -> Result<()> {
    if y.shape() != x_hat.shape() || y.shape() != h_hat.shape() {
        return Err(Error::invalid("Y, X and H grids differ in shape"));
    }
    Ok(())
}

/// `[1, K, T, 8N+6]` input tensor covering every grid position.
pub fn predn_features<T, F>(
    y: &Grid<Complex<T>>,
    x_hat: &Grid<Complex<T>>,
    h_hat: &Grid<Complex<T>>,
    config: &PreDnnConfig,
) -> Result<Tensor<F>>
where
    T: Copy + Into<f64>,
    F: Real,
{
    check_grids(y, x_hat, h_hat)?;
    let (kk, tt) = y.shape();
    config.validate(kk)?;
    let w = config.input_width();
    let mut data = vec![F::zero(); kk * tt * w];
    for k in 0..kk {
        for t in 0..tt {
            assemble_into(y, x_hat, h_hat, k, t, config.n_ici, &mut data[(k * tt + t) * w..][..w]);
        }
    }
    Tensor::from_vec(&[1, kk, tt, w], data)
}

/// Converts a `[1, K, T, 2]` tensor to a complex grid.
pub fn tensor_to_grid<F: Real>(t: &Tensor<F>) -> Result<ComplexGrid> {
    let s = t.shape();
    if s.len() != 4 || s[0] != 1 || s[3] != 2 {
        return Err(Error::invalid(format!("expected [1, K, T, 2], got {s:?}")));
    }
    let values = t
        .data()
        .chunks_exact(2)
        .map(|c| num_complex::Complex64::new(c[0].as_f64(), c[1].as_f64()))
        .collect();
    Grid::from_vec(s[1], s[2], values)
}

/// `[1, K, T, 2]` tensor of a complex grid.
pub fn grid_to_tensor<T: Copy + Into<f64>, F: Real>(g: &Grid<Complex<T>>) -> Tensor<F> {
    let (kk, tt) = g.shape();
    let data = g
        .as_slice()
        .iter()
        .flat_map(|z| [F::of(z.re.into()), F::of(z.im.into())])
        .collect();
    Tensor::from_vec(&[1, kk, tt, 2], data).expect("2 values per cell")
}

fn check_network<F: Real>(net: &Network<F>, config: &PreDnnConfig) -> Result<()> {
    if net.architecture() != &config.architecture() {
        return Err(Error::invalid(format!(
            "PreDNN parameters do not match n_ici = {}, hidden_units = {}",
            config.n_ici, config.hidden_units
        )));
    }
    Ok(())
}

/// Applies the shared PreDNN at every grid position.
pub fn predn_refine<T, F>(
    y: &Grid<Complex<T>>,
    x_hat: &Grid<Complex<T>>,
    h_hat: &Grid<Complex<T>>,
    net: &Network<F>,
    config: &PreDnnConfig,
) -> Result<ComplexGrid>
where
    T: Copy + Into<f64>,
    F: Real,
{
    check_network(net, config)?;
    let out = net.forward(&predn_features(y, x_hat, h_hat, config)?)?;
    tensor_to_grid(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelParams;
    use num_complex::Complex64;

    fn tagged(kk: usize, tt: usize, base: f64) -> ComplexGrid {
        Grid::from_fn(kk, tt, |k, t| Complex64::new(base + k as f64, -(t as f64) - base))
    }

    #[test]
    fn width_law() {
        for n in 0..=4 {
            assert_eq!(PreDnnConfig::with_n_ici(n).input_width(), 8 * n + 6);
            let g = tagged(16, 2, 0.0);
            assert_eq!(assemble_predn_input(&g, &g, &g, 3, 1, n).unwrap().len(), 8 * n + 6);
        }
    }

    #[test]
    fn last_subcarrier_wraps_right_neighbors() {
        let (y, x, h) = (tagged(8, 1, 0.0), tagged(8, 1, 100.0), tagged(8, 1, 1000.0));
        let v = assemble_predn_input(&y, &x, &h, 7, 0, 2).unwrap();
        let res: Vec<f64> = v.iter().step_by(2).copied().collect();
        assert_eq!(res, vec![5.0, 6.0, 7.0, 0.0, 1.0, 105.0, 106.0, 107.0, 100.0, 101.0, 1007.0]);
    }

    #[test]
    fn zero_network_gives_zero_grid() {
        let cfg = PreDnnConfig::default();
        let net = Network::new(cfg.architecture(), ModelParams::<f32>::zeros(&cfg.architecture())).unwrap();
        let g = tagged(8, 3, 0.5);
        let h = predn_refine(&g, &g, &g, &net, &cfg).unwrap();
        assert!(h.as_slice().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn mismatched_params_are_rejected() {
        let net = Network::<f32>::initialized(PreDnnConfig::with_n_ici(1).architecture(), 0);
        let g = tagged(8, 3, 0.5);
        assert!(predn_refine(&g, &g, &g, &net, &PreDnnConfig::default()).is_err());
    }
}
