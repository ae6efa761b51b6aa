use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, Grid};
use crate::modulation::{nearest_index, QPSK};
use crate::ofdm_channel::PilotPattern;

/// Below this magnitude a channel estimate is treated as unusable.
pub const MIN_CHANNEL_MAGNITUDE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolDecisions {
    pub x_hat: ComplexGrid,
    /// Alphabet index of each decision.
    pub indices: Grid<u8>,
    pub alphabet: Vec<Complex64>,
    /// Positions whose channel estimate was too small to divide by.
    pub flagged: Vec<(usize, usize)>,
}

/// Single-tap equalization and nearest-point QPSK decisions. Pilot cells take
/// the known pilot symbol.
pub fn equalize_hard(y: &ComplexGrid, h_hat: &ComplexGrid, pattern: &PilotPattern) -> Result<SymbolDecisions> {
    equalize_hard_with(y, h_hat, pattern, &QPSK)
}

pub fn equalize_hard_with(
    y: &ComplexGrid,
    h_hat: &ComplexGrid,
    pattern: &PilotPattern,
    alphabet: &[Complex64],
) -> Result<SymbolDecisions> {
    if y.shape() != h_hat.shape() {
        return Err(Error::invalid("Y and channel estimate shapes differ"));
    }
    if alphabet.is_empty() || alphabet.len() > u8::MAX as usize {
        return Err(Error::invalid("alphabet size must be in 1..=255"));
    }
    pattern.check_fits(y.num_subcarriers(), y.num_symbols())?;
    let (k_len, t_len) = y.shape();
    let mut x_hat = ComplexGrid::zeros(k_len, t_len);
    let mut indices = Grid::<u8>::zeros(k_len, t_len);
    let mut flagged = Vec::new();
    for k in 0..k_len {
        for t in 0..t_len {
            if let Some(p) = pattern.value_at(k, t) {
                x_hat.set(k, t, p);
                indices.set(k, t, nearest_index(alphabet, p) as u8);
                continue;
            }
            let h = *h_hat.get(k, t);
            let idx = if h.norm() < MIN_CHANNEL_MAGNITUDE {
                flagged.push((k, t));
                0
            } else {
                nearest_index(alphabet, y.get(k, t) / h)
            };
            x_hat.set(k, t, alphabet[idx]);
            indices.set(k, t, idx as u8);
        }
    }
    Ok(SymbolDecisions {
        x_hat,
        indices,
        alphabet: alphabet.to_vec(),
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::is_member;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn far_pilot() -> PilotPattern {
        PilotPattern::new(vec![3], vec![0], vec![QPSK[3]]).unwrap()
    }

    #[test]
    fn nearest_point() {
        let y = ComplexGrid::filled(4, 1, c(1.0, 1.0));
        let h = ComplexGrid::filled(4, 1, c(1.0, 0.0));
        let d = equalize_hard(&y, &h, &far_pilot()).unwrap();
        assert_eq!(*d.x_hat.get(0, 0), QPSK[0]);
        assert_eq!(*d.x_hat.get(3, 0), QPSK[3]);
    }

    #[test]
    fn exact_symbols_recovered() {
        let h = ComplexGrid::from_fn(4, 2, |k, t| c(0.3 + k as f64, -0.2 * t as f64 + 0.1));
        let idx = [0usize, 1, 2, 3];
        let y = ComplexGrid::from_fn(4, 2, |k, t| h.get(k, t) * QPSK[idx[(k + t) % 4]]);
        let p = PilotPattern::new(vec![0], vec![0], vec![QPSK[0]]).unwrap();
        let d = equalize_hard(&y, &h, &p).unwrap();
        for k in 0..4 {
            for t in 0..2 {
                assert_eq!(*d.x_hat.get(k, t), QPSK[idx[(k + t) % 4]]);
                assert!(is_member(&QPSK, *d.x_hat.get(k, t)));
            }
        }
    }

    #[test]
    fn origin_tie_takes_lowest_index() {
        let y = ComplexGrid::zeros(4, 1);
        let h = ComplexGrid::filled(4, 1, c(0.5, 0.5));
        let d = equalize_hard(&y, &h, &far_pilot()).unwrap();
        assert_eq!(d.indices.get(0, 0), &0);
        assert!(d.flagged.is_empty());
    }

    #[test]
    fn vanishing_channel_is_flagged() {
        let y = ComplexGrid::filled(4, 1, c(1.0, -1.0));
        let mut h = ComplexGrid::filled(4, 1, c(1.0, 0.0));
        h.set(1, 0, c(1e-13, 0.0));
        let d = equalize_hard(&y, &h, &far_pilot()).unwrap();
        assert_eq!(d.flagged, vec![(1, 0)]);
        assert_eq!(*d.x_hat.get(1, 0), QPSK[0]);
        assert_eq!(*d.x_hat.get(0, 0), QPSK[1]);
    }
}
