//! Dense and same-padded NHWC convolution kernels.
//!
//! The innermost loops run over output channels, which are contiguous in
//! memory, and are monomorphized for the channel counts the estimator uses.

use super::tensor::Real;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
}

#[inline(always)]
fn axpy_rows<F: Real, const N: usize>(acc: &mut [F; N], xs: &[F], ws: &[F]) {
    for (v, row) in xs.iter().zip(ws.chunks_exact(N)) {
        let row: &[F; N] = row.try_into().unwrap();
        for c in 0..N {
            acc[c] += *v * row[c];
        }
    }
}

#[inline(always)]
fn axpy_rows_dyn<F: Real>(acc: &mut [F], xs: &[F], ws: &[F]) {
    let n = acc.len();
    for (v, row) in xs.iter().zip(ws.chunks_exact(n)) {
        for (a, w) in acc.iter_mut().zip(row) {
            *a += *v * *w;
        }
    }
}

#[inline(always)]
fn outer_rows<F: Real, const N: usize>(gws: &mut [F], xs: &[F], g: &[F]) {
    let g: &[F; N] = g.try_into().unwrap();
    for (v, row) in xs.iter().zip(gws.chunks_exact_mut(N)) {
        for c in 0..N {
            row[c] += *v * g[c];
        }
    }
}

#[inline(always)]
fn outer_rows_dyn<F: Real>(gws: &mut [F], xs: &[F], g: &[F]) {
    for (v, row) in xs.iter().zip(gws.chunks_exact_mut(g.len())) {
        for (r, gv) in row.iter_mut().zip(g) {
            *r += *v * *gv;
        }
    }
}

/// Valid kernel-offset range along one axis for output position `pos`.
#[inline(always)]
fn tap_range(pos: usize, len: usize, k: usize) -> (usize, usize) {
    let pad = k / 2;
    (pad.saturating_sub(pos), k.min(len + pad - pos))
}

fn conv_forward_n<F: Real, const N: usize>(x: &[F], d: ConvDims, weight: &[F], bias: &[F], out: &mut [F]) {
    let ConvDims { n, h, w, cin, kh, kw, .. } = d;
    let (ph, pw) = (kh / 2, kw / 2);
    for img in 0..n {
        let xi = &x[img * h * w * cin..][..h * w * cin];
        let oi = &mut out[img * h * w * N..][..h * w * N];
        for y in 0..h {
            let (dy_lo, dy_hi) = tap_range(y, h, kh);
            for xx in 0..w {
                let (dx_lo, dx_hi) = tap_range(xx, w, kw);
                let run = (dx_hi - dx_lo) * cin;
                let mut acc: [F; N] = bias.try_into().unwrap();
                for dy in dy_lo..dy_hi {
                    let iy = y + dy - ph;
                    let xs = &xi[(iy * w + xx + dx_lo - pw) * cin..][..run];
                    let ws = &weight[(dy * kw + dx_lo) * cin * N..][..run * N];
                    axpy_rows::<F, N>(&mut acc, xs, ws);
                }
                oi[(y * w + xx) * N..][..N].copy_from_slice(&acc);
            }
        }
    }
}

fn conv_forward_dyn<F: Real>(x: &[F], d: ConvDims, weight: &[F], bias: &[F], out: &mut [F]) {
    let ConvDims { n, h, w, cin, cout, kh, kw } = d;
    let (ph, pw) = (kh / 2, kw / 2);
    for img in 0..n {
        let xi = &x[img * h * w * cin..][..h * w * cin];
        let oi = &mut out[img * h * w * cout..][..h * w * cout];
        for y in 0..h {
            let (dy_lo, dy_hi) = tap_range(y, h, kh);
            for xx in 0..w {
                let (dx_lo, dx_hi) = tap_range(xx, w, kw);
                let run = (dx_hi - dx_lo) * cin;
                let acc = &mut oi[(y * w + xx) * cout..][..cout];
                acc.copy_from_slice(bias);
                for dy in dy_lo..dy_hi {
                    let iy = y + dy - ph;
                    let xs = &xi[(iy * w + xx + dx_lo - pw) * cin..][..run];
                    let ws = &weight[(dy * kw + dx_lo) * cin * cout..][..run * cout];
                    axpy_rows_dyn(acc, xs, ws);
                }
            }
        }
    }
}

/// `out[n,y,x,co] = bias[co] + sum w[dy,dx,ci,co] * x[n, y+dy-kh/2, x+dx-kw/2, ci]`
/// with zero padding outside the image.
pub(crate) fn conv2d_forward<F: Real>(x: &[F], d: ConvDims, weight: &[F], bias: &[F], out: &mut [F]) {
    match d.cout {
        2 => conv_forward_n::<F, 2>(x, d, weight, bias, out),
        8 => conv_forward_n::<F, 8>(x, d, weight, bias, out),
        _ => conv_forward_dyn(x, d, weight, bias, out),
    }
}

fn conv_weight_grad_n<F: Real, const N: usize>(x: &[F], d: ConvDims, g: &[F], gw: &mut [F], gb: &mut [F]) {
    let ConvDims { n, h, w, cin, kh, kw, .. } = d;
    let (ph, pw) = (kh / 2, kw / 2);
    for img in 0..n {
        let xi = &x[img * h * w * cin..][..h * w * cin];
        let gi = &g[img * h * w * N..][..h * w * N];
        for y in 0..h {
            let (dy_lo, dy_hi) = tap_range(y, h, kh);
            for xx in 0..w {
                let (dx_lo, dx_hi) = tap_range(xx, w, kw);
                let run = (dx_hi - dx_lo) * cin;
                let gp = &gi[(y * w + xx) * N..][..N];
                for (b, v) in gb.iter_mut().zip(gp) {
                    *b += *v;
                }
                for dy in dy_lo..dy_hi {
                    let iy = y + dy - ph;
                    let xs = &xi[(iy * w + xx + dx_lo - pw) * cin..][..run];
                    let gws = &mut gw[(dy * kw + dx_lo) * cin * N..][..run * N];
                    outer_rows::<F, N>(gws, xs, gp);
                }
            }
        }
    }
}

fn conv_weight_grad_dyn<F: Real>(x: &[F], d: ConvDims, g: &[F], gw: &mut [F], gb: &mut [F]) {
    let ConvDims { n, h, w, cin, cout, kh, kw } = d;
    let (ph, pw) = (kh / 2, kw / 2);
    for img in 0..n {
        let xi = &x[img * h * w * cin..][..h * w * cin];
        let gi = &g[img * h * w * cout..][..h * w * cout];
        for y in 0..h {
            let (dy_lo, dy_hi) = tap_range(y, h, kh);
            for xx in 0..w {
                let (dx_lo, dx_hi) = tap_range(xx, w, kw);
                let run = (dx_hi - dx_lo) * cin;
                let gp = &gi[(y * w + xx) * cout..][..cout];
                for (b, v) in gb.iter_mut().zip(gp) {
                    *b += *v;
                }
                for dy in dy_lo..dy_hi {
                    let iy = y + dy - ph;
                    let xs = &xi[(iy * w + xx + dx_lo - pw) * cin..][..run];
                    let gws = &mut gw[(dy * kw + dx_lo) * cin * cout..][..run * cout];
                    outer_rows_dyn(gws, xs, gp);
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients for upstream gradient `g`.
pub(crate) fn conv2d_weight_grad<F: Real>(x: &[F], d: ConvDims, g: &[F], gw: &mut [F], gb: &mut [F]) {
    match d.cout {
        2 => conv_weight_grad_n::<F, 2>(x, d, g, gw, gb),
        8 => conv_weight_grad_n::<F, 8>(x, d, g, gw, gb),
        _ => conv_weight_grad_dyn(x, d, g, gw, gb),
    }
}

/// Gradient with respect to the input: a same-padded convolution of `g`
/// with the spatially flipped, channel-transposed kernel.
pub(crate) fn conv2d_input_grad<F: Real>(d: ConvDims, weight: &[F], g: &[F], gx: &mut [F]) {
    let ConvDims { cin, cout, kh, kw, .. } = d;
    let mut flipped = vec![F::zero(); weight.len()];
    for dy in 0..kh {
        for dx in 0..kw {
            for ci in 0..cin {
                for co in 0..cout {
                    let src = ((dy * kw + dx) * cin + ci) * cout + co;
                    let dst = (((kh - 1 - dy) * kw + (kw - 1 - dx)) * cout + co) * cin + ci;
                    flipped[dst] = weight[src];
                }
            }
        }
    }
    let zero_bias = vec![F::zero(); cin];
    let td = ConvDims { cin: cout, cout: cin, ..d };
    conv2d_forward(g, td, &flipped, &zero_bias, gx);
}

#[inline(always)]
fn dense_rows_n<F: Real, const N: usize>(x: &[F], rows: usize, inputs: usize, w: &[F], b: &[F], out: &mut [F]) {
    for r in 0..rows {
        let xs = &x[r * inputs..][..inputs];
        let mut acc: [F; N] = b.try_into().unwrap();
        axpy_rows::<F, N>(&mut acc, xs, w);
        out[r * N..][..N].copy_from_slice(&acc);
    }
}

/// `out[r, o] = b[o] + sum_i x[r, i] w[i, o]`
pub(crate) fn dense_forward<F: Real>(x: &[F], rows: usize, inputs: usize, outputs: usize, w: &[F], b: &[F], out: &mut [F]) {
    match outputs {
        2 => dense_rows_n::<F, 2>(x, rows, inputs, w, b, out),
        32 => dense_rows_n::<F, 32>(x, rows, inputs, w, b, out),
        _ => {
            for r in 0..rows {
                let xs = &x[r * inputs..][..inputs];
                let acc = &mut out[r * outputs..][..outputs];
                acc.copy_from_slice(b);
                axpy_rows_dyn(acc, xs, w);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward<F: Real>(
    x: &[F],
    g: &[F],
    rows: usize,
    inputs: usize,
    outputs: usize,
    w: &[F],
    gw: &mut [F],
    gb: &mut [F],
    mut gx: Option<&mut [F]>,
) {
    for r in 0..rows {
        let xs = &x[r * inputs..][..inputs];
        let gr = &g[r * outputs..][..outputs];
        for (b, v) in gb.iter_mut().zip(gr) {
            *b += *v;
        }
        match outputs {
            2 => outer_rows::<F, 2>(gw, xs, gr),
            32 => outer_rows::<F, 32>(gw, xs, gr),
            _ => outer_rows_dyn(gw, xs, gr),
        }
        if let Some(gx) = gx.as_deref_mut() {
            let gxr = &mut gx[r * inputs..][..inputs];
            for (gi, wrow) in gxr.iter_mut().zip(w.chunks_exact(outputs)) {
                let mut s = F::zero();
                for (a, b) in wrow.iter().zip(gr) {
                    s += *a * *b;
                }
                *gi += s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], d: ConvDims, w: &[f64], b: &[f64]) -> Vec<f64> {
        let ConvDims { n, h, w: wd, cin, cout, kh, kw } = d;
        let mut out = vec![0.0; n * h * wd * cout];
        for img in 0..n {
            for y in 0..h as isize {
                for xx in 0..wd as isize {
                    for co in 0..cout {
                        let mut s = b[co];
                        for dy in 0..kh as isize {
                            for dx in 0..kw as isize {
                                let iy = y + dy - (kh / 2) as isize;
                                let ix = xx + dx - (kw / 2) as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                for ci in 0..cin {
                                    let xv = x[((img * h + iy as usize) * wd + ix as usize) * cin + ci];
                                    let wv = w[(((dy as usize) * kw + dx as usize) * cin + ci) * cout + co];
                                    s += xv * wv;
                                }
                            }
                        }
                        out[((img * h + y as usize) * wd + xx as usize) * cout + co] = s;
                    }
                }
            }
        }
        out
    }

    fn pseudo(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn conv_matches_naive_for_all_specializations() {
        for &(cin, cout, kh, kw) in &[(2, 8, 5, 5), (8, 8, 3, 3), (8, 2, 5, 5), (3, 5, 3, 5), (1, 1, 5, 3)] {
            let d = ConvDims { n: 2, h: 6, w: 4, cin, cout, kh, kw };
            let x = pseudo(2 * 6 * 4 * cin, 1);
            let w = pseudo(kh * kw * cin * cout, 2);
            let b = pseudo(cout, 3);
            let mut out = vec![0.0; 2 * 6 * 4 * cout];
            conv2d_forward(&x, d, &w, &b, &mut out);
            let reference = naive_conv(&x, d, &w, &b);
            for (a, r) in out.iter().zip(&reference) {
                assert!((a - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_matches_naive() {
        for &(i, o) in &[(22, 32), (32, 2), (3, 5)] {
            let x = pseudo(4 * i, 4);
            let w = pseudo(i * o, 5);
            let b = pseudo(o, 6);
            let mut out = vec![0.0; 4 * o];
            dense_forward(&x, 4, i, o, &w, &b, &mut out);
            for r in 0..4 {
                for c in 0..o {
                    let s: f64 = b[c] + (0..i).map(|k| x[r * i + k] * w[k * o + c]).sum::<f64>();
                    assert!((out[r * o + c] - s).abs() < 1e-12);
                }
            }
        }
    }
}
