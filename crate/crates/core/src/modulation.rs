//! Gray-mapped QPSK with unit average energy.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

/// Alphabet order is the Gray label `b1 b0`: b1 selects the sign of the
/// in-phase part, b0 the sign of the quadrature part.
pub const QPSK: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Index of the alphabet point closest to `z`. Ties go to the lowest index.
pub fn nearest_index(alphabet: &[Complex64], z: Complex64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, a) in alphabet.iter().enumerate() {
        let d = (z - a).norm_sqr();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

pub fn is_member(alphabet: &[Complex64], z: Complex64) -> bool {
    alphabet.iter().any(|a| (a - z).norm() < 1e-12)
}
