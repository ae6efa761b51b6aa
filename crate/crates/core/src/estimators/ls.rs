use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::ofdm_channel::PilotPattern;

/// LS estimates at the pilot positions, in `PilotPattern::positions()` order.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotEstimates {
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialEstimate {
    pub h_hat: ComplexGrid,
    pub source_pattern: PilotPattern,
}

pub fn ls_at_pilots(y: &ComplexGrid, pattern: &PilotPattern) -> Result<PilotEstimates> {
    pattern.check_fits(y.num_subcarriers(), y.num_symbols())?;
    let values = pattern
        .positions()
        .map(|(k, t, p)| {
            if p.norm_sqr() == 0.0 {
                Err(Error::invalid(format!("pilot at ({k}, {t}) has zero magnitude")))
            } else {
                Ok(y.get(k, t) / p)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PilotEstimates { values })
}

/// Piecewise-linear interpolation of samples at ascending integer abscissae
/// onto `0..len`, holding the nearest sample outside the sampled span.
fn interp_linear(xs: &[usize], ys: &[Complex64], len: usize) -> Vec<Complex64> {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() == 1 {
        return vec![ys[0]; len];
    }
    let mut out = Vec::with_capacity(len);
    let mut seg = 0;
    for n in 0..len {
        if n <= xs[0] {
            out.push(ys[0]);
        } else if n >= xs[xs.len() - 1] {
            out.push(ys[ys.len() - 1]);
        } else {
            while xs[seg + 1] < n {
                seg += 1;
            }
            let (x0, x1) = (xs[seg] as f64, xs[seg + 1] as f64);
            let w = (n as f64 - x0) / (x1 - x0);
            out.push(ys[seg] * (1.0 - w) + ys[seg + 1] * w);
        }
    }
    out
}

/// Frequency-then-time linear interpolation of pilot estimates to the full grid.
pub fn interpolate_grid(
    estimates: &PilotEstimates,
    pattern: &PilotPattern,
    num_subcarriers: usize,
    num_symbols: usize,
) -> Result<InitialEstimate> {
    if estimates.values.is_empty() || pattern.is_empty() {
        return Err(Error::invalid("no pilot estimates to interpolate"));
    }
    if estimates.values.len() != pattern.len() {
        return Err(Error::invalid("pilot estimates do not match the pattern"));
    }
    pattern.check_fits(num_subcarriers, num_symbols)?;
    let (ks, ts) = (pattern.subcarriers(), pattern.symbols());
    let tp = ts.len();
    // along_freq[b][k]: pilot symbol b interpolated over all subcarriers
    let along_freq: Vec<Vec<Complex64>> = (0..tp)
        .map(|b| {
            let col: Vec<Complex64> = (0..ks.len()).map(|a| estimates.values[a * tp + b]).collect();
            interp_linear(ks, &col, num_subcarriers)
        })
        .collect();
    let mut h_hat = ComplexGrid::zeros(num_subcarriers, num_symbols);
    let mut row = vec![Complex64::new(0.0, 0.0); tp];
    for k in 0..num_subcarriers {
        for (b, r) in row.iter_mut().enumerate() {
            *r = along_freq[b][k];
        }
        for (t, v) in interp_linear(ts, &row, num_symbols).into_iter().enumerate() {
            h_hat.set(k, t, v);
        }
    }
    // Pilot cells keep their raw LS value (interpolation passes through them).
    for ((k, t, _), v) in pattern.positions().zip(&estimates.values) {
        h_hat.set(k, t, *v);
    }
    Ok(InitialEstimate {
        h_hat,
        source_pattern: pattern.clone(),
    })
}

/// LS at the pilots followed by grid interpolation.
pub fn ls_interpolated(y: &ComplexGrid, pattern: &PilotPattern) -> Result<InitialEstimate> {
    let est = ls_at_pilots(y, pattern)?;
    interpolate_grid(&est, pattern, y.num_subcarriers(), y.num_symbols())
}
