//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use icinet_lab::nn::{Network, Tensor};
use icinet_lab::ofdm_channel::{
    apply_channel, random_symbols, ChannelRealization, DelayProfile, FadingSpec, PilotPattern, SystemConfig,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use icinet_lab::ComplexGrid;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Unitary DFT by direct summation; `sign = -1` forward, `+1` inverse.
pub fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(m, v)| v * Complex64::from_polar(1.0, sign * 2.0 * PI * (k * m) as f64 / n as f64))
                .sum::<Complex64>()
                * scale
        })
        .collect()
}

/// Received grid by explicit time-domain processing: IDFT, cyclic-prefix
/// insertion, a linear time-varying tapped-delay-line convolution over the
/// whole transmitted stream, CP removal and DFT.
pub fn cp_convolution_oracle(x: &ComplexGrid, channel: &ChannelRealization, config: &SystemConfig) -> ComplexGrid {
    let (k_len, t_len) = x.shape();
    let cp = config.cp_len;
    let sym = k_len + cp;
    let mut stream = Vec::with_capacity(sym * t_len);
    for t in 0..t_len {
        let s = naive_dft(&x.symbol(t), 1.0);
        stream.extend_from_slice(&s[k_len - cp..]);
        stream.extend_from_slice(&s);
    }
    let mut y = ComplexGrid::zeros(k_len, t_len);
    for t in 0..t_len {
        let mut r = vec![Complex64::new(0.0, 0.0); k_len];
        for (i, out) in r.iter_mut().enumerate() {
            let n = t * sym + cp + i;
            for (j, &d) in channel.delays().iter().enumerate() {
                // Samples before the first symbol are silent.
                if n >= d {
                    *out += channel.gain(t, i, j) * stream[n - d];
                }
            }
        }
        y.set_symbol(t, &naive_dft(&r, -1.0));
    }
    y
}

/// Bessel J0 by its power series, accurate to ~1e-15 for |x| <= 10.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for m in 1..60 {
        term *= q / (m * m) as f64;
        sum += term;
    }
    sum
}

/// Largest relative error between two gradient vectors, with a small absolute
/// floor so entries that are zero in both do not divide by zero.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Central-difference gradient of `f` with respect to `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut v = x.to_vec();
    (0..x.len())
        .map(|i| {
            v[i] = x[i] + h;
            let p = f(&v);
            v[i] = x[i] - h;
            let m = f(&v);
            v[i] = x[i];
            (p - m) / (2.0 * h)
        })
        .collect()
}

/// `sum(probe * net(x))` as a scalar test loss.
pub fn probe_loss(net: &Network<f64>, x: &Tensor<f64>, probe: &[f64]) -> f64 {
    net.forward(x).unwrap().data().iter().zip(probe).map(|(a, b)| a * b).sum()
}

/// Parameter and input finite-difference check of one network; returns the
/// worst relative error.
pub fn check_network(net: &Network<f64>, x: &Tensor<f64>, probe: &[f64], h: f64) -> f64 {
    use icinet_lab::nn::Cache;
    let mut cache = Cache::new();
    net.forward_cached(x.clone(), &mut cache).unwrap();
    let shape = cache.output().unwrap().shape().to_vec();
    let up = Tensor::from_vec(&shape, probe.to_vec()).unwrap();
    let g = net.backward(&cache, &up, true).unwrap();
    let flat = net.params().flatten();
    let mut work = net.clone();
    let num_p = numeric_gradient(&flat, h, |v| {
        work.params_mut().unflatten(v).unwrap();
        probe_loss(&work, x, probe)
    });
    let num_x = numeric_gradient(x.data(), h, |v| {
        probe_loss(net, &Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), probe)
    });
    max_rel_error(&g.params.concat(), &num_p).max(max_rel_error(g.input.as_ref().unwrap(), &num_x))
}

/// Random noiseless case: K in {8, 16, 64}, up to 5 taps within the CP,
/// normalized Doppler up to 0.1. Returns the system, channel, X and Y.
pub fn random_case(rng: &mut ChaCha8Rng, i: u64) -> (SystemConfig, ChannelRealization, (ComplexGrid, ComplexGrid)) {
    let k = [8, 16, 64][rng.gen_range(0..3)];
    let cp = (k / 4).max(4);
    let cfg = SystemConfig::new(k, rng.gen_range(2..=4), cp).unwrap();
    let n_taps = rng.gen_range(1..=5usize);
    let mut delays: Vec<usize> = (0..=cp).collect();
    for j in 0..delays.len() {
        let s = rng.gen_range(j..delays.len());
        delays.swap(j, s);
    }
    let mut delays: Vec<usize> = delays[..n_taps].to_vec();
    delays.sort_unstable();
    delays[0] = 0;
    delays.dedup();
    let powers: Vec<f64> = delays.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
    let sum: f64 = powers.iter().sum();
    let powers: Vec<f64> = powers.iter().map(|p| p / sum).collect();
    let profile = DelayProfile::custom(&delays, &powers).unwrap();
    let fd = rng.gen_range(0.0..=0.1);
    let spec = FadingSpec::from_normalized(fd, &cfg, 1000 + i);
    let channel = ChannelRealization::generate(&spec, &profile, &cfg).unwrap();
    let pattern = PilotPattern::new(vec![0], vec![0], vec![Complex64::new(1.0, 0.0)]).unwrap();
    let x = random_symbols(&cfg, &pattern, i).unwrap();
    let y = apply_channel(&x, &channel, 0.0, &cfg, 0).unwrap();
    (cfg, channel, (x, y))
}

