//! Dense time-frequency grids.
//!
//! A grid has `num_subcarriers` rows and `num_symbols` columns and is stored
//! row-major, so entry `(k, t)` lives at `k * num_symbols + t`. This is the
//! same memory order the networks use for their `K x T x C` images.

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    num_subcarriers: usize,
    num_symbols: usize,
    data: Vec<T>,
}

pub type ComplexGrid = Grid<Complex64>;

impl<T: Clone + Default> Grid<T> {
    pub fn zeros(num_subcarriers: usize, num_symbols: usize) -> Self {
        Self {
            num_subcarriers,
            num_symbols,
            data: vec![T::default(); num_subcarriers * num_symbols],
        }
    }

    pub fn filled(num_subcarriers: usize, num_symbols: usize, value: T) -> Self {
        Self {
            num_subcarriers,
            num_symbols,
            data: vec![value; num_subcarriers * num_symbols],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(num_subcarriers: usize, num_symbols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != num_subcarriers * num_symbols {
            return Err(Error::invalid(format!(
                "grid data has {} entries, expected {}x{}",
                data.len(),
                num_subcarriers,
                num_symbols
            )));
        }
        Ok(Self {
            num_subcarriers,
            num_symbols,
            data,
        })
    }

    pub fn from_fn(
        num_subcarriers: usize,
        num_symbols: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(num_subcarriers * num_symbols);
        for k in 0..num_subcarriers {
            for t in 0..num_symbols {
                data.push(f(k, t));
            }
        }
        Self {
            num_subcarriers,
            num_symbols,
            data,
        }
    }

    #[inline]
    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    #[inline]
    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_subcarriers, self.num_symbols)
    }

    #[inline]
    pub fn get(&self, k: usize, t: usize) -> &T {
        &self.data[k * self.num_symbols + t]
    }

    #[inline]
    pub fn get_mut(&mut self, k: usize, t: usize) -> &mut T {
        &mut self.data[k * self.num_symbols + t]
    }

    #[inline]
    pub fn set(&mut self, k: usize, t: usize, value: T) {
        self.data[k * self.num_symbols + t] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            num_subcarriers: self.num_subcarriers,
            num_symbols: self.num_symbols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Column `t` (one OFDM symbol across all subcarriers).
    pub fn symbol(&self, t: usize) -> Vec<T>
    where
        T: Clone,
    {
        (0..self.num_subcarriers)
            .map(|k| self.get(k, t).clone())
            .collect()
    }

    pub fn set_symbol(&mut self, t: usize, values: &[T])
    where
        T: Clone,
    {
        for (k, v) in values.iter().enumerate() {
            self.set(k, t, v.clone());
        }
    }
}

impl ComplexGrid {
    pub fn to_f32(&self) -> Grid<Complex32> {
        self.map(|c| Complex32::new(c.re as f32, c.im as f32))
    }

    /// Mean of `|a - b|^2` over all entries.
    pub fn mse(&self, other: &ComplexGrid) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        sum / self.data.len() as f64
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

impl Grid<Complex32> {
    pub fn to_f64(&self) -> ComplexGrid {
        self.map(|c| Complex64::new(c.re as f64, c.im as f64))
    }
}
