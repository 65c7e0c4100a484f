//! Direct-sum convolution and index-formula shuffles, written independently
//! of the engine's kernels.

use hlfsr_core::tensor::Conv2dParams;
use hlfsr_core::{Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cross-correlation by its defining sum, zero padding outside the input.
pub fn direct_conv2d(x: &Tensor<f64>, wt: &Tensor<f64>, bias: &[f64], p: Conv2dParams) -> Tensor<f64> {
    let (b, cin, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (cout, kh, kw) = (wt.shape()[0], wt.shape()[2], wt.shape()[3]);
    let (sh, sw) = p.stride;
    let (ph, pw) = p.padding;
    let (dh, dw) = p.dilation;
    let oh = (h + 2 * ph - dh * (kh - 1) - 1) / sh + 1;
    let ow = (w + 2 * pw - dw * (kw - 1) - 1) / sw + 1;
    let xs = x.data();
    let ws = wt.data();
    let mut out = vec![0.0; b * cout * oh * ow];
    for n in 0..b {
        for o in 0..cout {
            for y in 0..oh {
                for z in 0..ow {
                    let mut acc = bias[o];
                    for c in 0..cin {
                        for i in 0..kh {
                            for j in 0..kw {
                                let sy = (y * sh + i * dh) as i64 - ph as i64;
                                let sx = (z * sw + j * dw) as i64 - pw as i64;
                                if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                                    continue;
                                }
                                let xv = xs[((n * cin + c) * h + sy as usize) * w + sx as usize];
                                acc += xv * ws[((o * cin + c) * kh + i) * kw + j];
                            }
                        }
                    }
                    out[((n * cout + o) * oh + y) * ow + z] = acc;
                }
            }
        }
    }
    Tensor::new([b, cout, oh, ow], out).unwrap()
}

/// Compares the engine's conv2d with the direct sum over every combination of
/// stride, padding and dilation in `{1, 2, 3}`. Returns the case count and
/// the largest absolute difference.
pub fn conv_suite(seed: u64) -> Result<(usize, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for s in 1..=3 {
        for pad in 1..=3 {
            for d in 1..=3 {
                for _ in 0..2 {
                    let r = &mut rng;
                    let (kh, kw) = (r.gen_range(1..=3), r.gen_range(1..=4));
                    let (b, cin, cout) = (r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=5));
                    let h = r.gen_range(1..=9) + d * (kh - 1);
                    let w = r.gen_range(1..=9) + d * (kw - 1);
                    let p = Conv2dParams {
                        stride: (s, r.gen_range(1..=3)),
                        padding: (pad, r.gen_range(1..=3)),
                        dilation: (d, r.gen_range(1..=3)),
                    };
                    let x = Tensor::from_fn([b, cin, h, w], |_| r.gen_range(-1.0..1.0));
                    let wt = Tensor::from_fn([cout, cin, kh, kw], |_| r.gen_range(-1.0..1.0));
                    let bias: Vec<f64> = (0..cout).map(|_| r.gen_range(-1.0..1.0)).collect();
                    let want = direct_conv2d(&x, &wt, &bias, p);
                    let got = Var::constant(x)
                        .conv2d(
                            &Var::constant(wt),
                            Some(&Var::constant(Tensor::new([cout], bias).unwrap())),
                            p,
                        )
                        .map_err(|e| format!("{p:?}: {e}"))?;
                    if got.shape() != want.shape() {
                        return Err(format!("{p:?}: shape {:?} vs {:?}", got.shape(), want.shape()));
                    }
                    worst = worst.max(got.value().max_abs_diff(&want).unwrap());
                    cases += 1;
                }
            }
        }
    }
    Ok((cases, worst))
}

/// Inverse of pixel shuffle by its index formula: output channel
/// `c·r² + i·r + j` at `(y, x)` reads input `(c, y·r + i, x·r + j)`.
pub fn pixel_unshuffle(x: &Tensor<f64>, r: usize) -> Tensor<f64> {
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2] / r, x.shape()[3] / r);
    let mut out = vec![0.0; x.numel()];
    for n in 0..b {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    for y in 0..h {
                        for z in 0..w {
                            let oc = ch * r * r + i * r + j;
                            out[((n * c * r * r + oc) * h + y) * w + z] =
                                x.data()[((n * c + ch) * h * r + y * r + i) * w * r + z * r + j];
                        }
                    }
                }
            }
        }
    }
    Tensor::new([b, c * r * r, h, w], out).unwrap()
}

/// Inverse of the one-dimensional shuffle along width.
pub fn pixel_unshuffle_1d(x: &Tensor<f64>, r: usize) -> Tensor<f64> {
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3] / r);
    let mut out = vec![0.0; x.numel()];
    for n in 0..b {
        for ch in 0..c {
            for j in 0..r {
                for y in 0..h {
                    for z in 0..w {
                        out[((n * c * r + ch * r + j) * h + y) * w + z] =
                            x.data()[((n * c + ch) * h + y) * w * r + z * r + j];
                    }
                }
            }
        }
    }
    Tensor::new([b, c * r, h, w], out).unwrap()
}

/// Shuffles random tensors and checks that the formula inverses restore them
/// bit for bit. Returns the number of round trips.
pub fn shuffle_round_trips(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = 0;
    for r in 1..=4 {
        for _ in 0..4 {
            let (b, c, h, w) = (
                rng.gen_range(1..=2),
                rng.gen_range(1..=3),
                rng.gen_range(1..=5),
                rng.gen_range(1..=5),
            );
            let x = Tensor::from_fn([b, c * r * r, h, w], |_| rng.gen_range(-1.0..1.0));
            let y = Var::constant(x.clone()).pixel_shuffle(r).map_err(|e| e.to_string())?;
            if y.shape() != [b, c, h * r, w * r] || pixel_unshuffle(y.value(), r) != x {
                return Err(format!("pixel_shuffle r={r} on {:?}", x.shape()));
            }
            let x1 = Tensor::from_fn([b, c * r, h, w], |_| rng.gen_range(-1.0..1.0));
            let y1 = Var::constant(x1.clone())
                .pixel_shuffle_1d(r)
                .map_err(|e| e.to_string())?;
            if y1.shape() != [b, c, h, w * r] || pixel_unshuffle_1d(y1.value(), r) != x1 {
                return Err(format!("pixel_shuffle_1d r={r} on {:?}", x1.shape()));
            }
            n += 2;
        }
    }
    Ok(n)
}
