use icinet_lab::estimators::equalize_hard;
use icinet_lab::icinet::{assemble_predn_input, predn_refine, PreDnnConfig};
use icinet_lab::modulation::{is_member, nearest_index, QPSK};
use icinet_lab::nn::{mse_loss, Network, Tensor};
use icinet_lab::ofdm_channel::{PilotPattern, SystemConfig, UnitaryDft};
use icinet_lab::{ComplexGrid, Grid};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid_strategy(k: usize, t: usize) -> impl Strategy<Value = ComplexGrid> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), k * t)
        .prop_map(move |v| Grid::from_vec(k, t, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap())
}

fn shift(g: &ComplexGrid, s: usize) -> ComplexGrid {
    let k = g.num_subcarriers();
    Grid::from_fn(k, g.num_symbols(), |i, t| *g.get((i + k - s) % k, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn predn_is_cyclically_equivariant(
        y in grid_strategy(12, 3),
        x in grid_strategy(12, 3),
        h in grid_strategy(12, 3),
        s in 0usize..12,
        n_ici in 0usize..=3,
        seed in 0u64..1000,
    ) {
        let cfg = PreDnnConfig::with_n_ici(n_ici);
        let net = Network::<f64>::initialized(cfg.architecture(), seed);
        let base = predn_refine(&y, &x, &h, &net, &cfg).unwrap();
        let moved = predn_refine(&shift(&y, s), &shift(&x, s), &shift(&h, s), &net, &cfg).unwrap();
        prop_assert_eq!(moved, shift(&base, s));
    }

    #[test]
    fn input_width_law(n_ici in 0usize..=4, k in 0usize..16, t in 0usize..2, g in grid_strategy(16, 2)) {
        let v = assemble_predn_input(&g, &g, &g, k, t, n_ici).unwrap();
        prop_assert_eq!(v.len(), 8 * n_ici + 6);
        // The centre entries of the Y and X blocks and the final H entry are cell (k, t).
        let c = *g.get(k, t);
        prop_assert_eq!((v[2 * n_ici], v[2 * n_ici + 1]), (c.re, c.im));
        prop_assert_eq!((v[v.len() - 2], v[v.len() - 1]), (c.re, c.im));
    }

    #[test]
    fn mse_loss_is_nonnegative_and_zero_iff_equal(
        a in prop::collection::vec(-5.0f64..5.0, 12),
        b in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let ta = Tensor::from_vec(&[3, 4], a.clone()).unwrap();
        let tb = Tensor::from_vec(&[3, 4], b.clone()).unwrap();
        let (l, _) = mse_loss(&ta, &tb).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, a == b);
        prop_assert_eq!(mse_loss(&ta, &ta).unwrap().0, 0.0);
    }

    #[test]
    fn dft_round_trip_and_parseval(v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..64)) {
        let x: Vec<Complex64> = v.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
        let dft = UnitaryDft::new(x.len());
        let mut y = x.clone();
        dft.forward(&mut y);
        let e1: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let e2: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((e1 - e2).abs() < 1e-9 * (1.0 + e1));
        dft.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn hard_decisions_are_constellation_points(y in grid_strategy(8, 3), h in grid_strategy(8, 3)) {
        let pattern = PilotPattern::new(vec![0, 4], vec![1], vec![QPSK[2], QPSK[3]]).unwrap();
        let d = equalize_hard(&y, &h, &pattern).unwrap();
        for k in 0..8 {
            for t in 0..3 {
                let v = *d.x_hat.get(k, t);
                prop_assert!(is_member(&QPSK, v));
                if let Some(p) = pattern.value_at(k, t) {
                    prop_assert_eq!(v, p);
                } else if h.get(k, t).norm() >= 1e-12 {
                    let z = y.get(k, t) / h.get(k, t);
                    prop_assert_eq!(v, QPSK[nearest_index(&QPSK, z)]);
                }
            }
        }
    }

    #[test]
    fn system_config_sample_indexing(t in 0usize..14, i in 0usize..128) {
        let c = SystemConfig::default();
        let n = c.sample_index(t, i);
        prop_assert_eq!(n, t * 144 + 16 + i);
        prop_assert!(n < c.subframe_len());
    }
}
