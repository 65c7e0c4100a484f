//! Bicubic resampling with the Keys kernel (`a = −0.5`).
//!
//! Sample centres follow the half-pixel convention: output pixel `i` reads
//! source coordinate `(i + 0.5) / scale − 0.5`. Reads outside the image are
//! clamped to the nearest edge pixel.

use crate::error::{Error, Result};
use crate::tensor::kernels::{self, AxisTaps};
use crate::tensor::{Element, Tensor, Var};

const KEYS_A: f64 = -0.5;

/// Keys cubic convolution kernel.
pub fn keys_kernel(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// A positive rational resize factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub num: usize,
    pub den: usize,
}

impl Scale {
    pub fn new(num: usize, den: usize) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::dim("resize scale must be positive"));
        }
        Ok(Self { num, den })
    }

    pub fn up(factor: usize) -> Self {
        Self {
            num: factor.max(1),
            den: 1,
        }
    }

    pub fn down(factor: usize) -> Self {
        Self {
            num: 1,
            den: factor.max(1),
        }
    }

    pub fn apply(&self, len: usize) -> usize {
        len * self.num / self.den
    }
}

/// Cubic weights `(left-1, left, left+1, left+2)` for fractional offset `t ∈ [0, 1)`.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        keys_kernel(t + 1.0),
        keys_kernel(t),
        keys_kernel(1.0 - t),
        keys_kernel(2.0 - t),
    ]
}

fn clamp_index(i: i64, len: usize) -> usize {
    i.clamp(0, len as i64 - 1) as usize
}

/// Taps resizing an axis of length `in_len` by `scale`.
pub fn axis_taps(in_len: usize, scale: Scale) -> Result<AxisTaps> {
    let out_len = scale.apply(in_len);
    if in_len == 0 || out_len == 0 {
        return Err(Error::dim(format!(
            "resize of length {in_len} by {}/{} gives an empty axis",
            scale.num, scale.den
        )));
    }
    // src = ((2i + 1)·den − num) / (2·num), evaluated exactly in integers.
    let denom = 2 * scale.num as i64;
    let taps = (0..out_len)
        .map(|i| {
            let numer = (2 * i as i64 + 1) * scale.den as i64 - scale.num as i64;
            let left = numer.div_euclid(denom);
            let t = numer.rem_euclid(denom) as f64 / denom as f64;
            cubic_weights(t)
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(k, &w)| (clamp_index(left - 1 + k as i64, in_len), w))
                .collect()
        })
        .collect();
    Ok(AxisTaps { in_len, out_len, taps })
}

fn hw_taps(shape: &[usize], scale: Scale) -> Result<(AxisTaps, AxisTaps)> {
    let nd = shape.len();
    if nd < 2 {
        return Err(Error::dim(format!("resize needs at least 2 axes, got {shape:?}")));
    }
    Ok((axis_taps(shape[nd - 2], scale)?, axis_taps(shape[nd - 1], scale)?))
}

/// Bicubic resize of the last two axes of `x`.
pub fn bicubic_resize<T: Element>(x: &Tensor<T>, scale: Scale) -> Result<Tensor<T>> {
    let (rows, cols) = hw_taps(x.shape(), scale)?;
    kernels::resample_hw(x, &rows, &cols)
}

/// Differentiable form of [`bicubic_resize`] (the map is linear, so its
/// adjoint is exact).
pub fn bicubic_resize_var<T: Element>(x: &Var<T>, scale: Scale) -> Result<Var<T>> {
    let (rows, cols) = hw_taps(x.shape(), scale)?;
    x.resample_hw(rows, cols)
}

/// Bicubic sample of a single `h × w` plane at fractional `(y, x)`.
pub fn sample_bicubic(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (wy, wx) = (cubic_weights(y - y0), cubic_weights(x - x0));
    let (y0, x0) = (y0 as i64, x0 as i64);
    let mut acc = 0.0;
    for (dy, &ky) in wy.iter().enumerate() {
        if ky == 0.0 {
            continue;
        }
        let row = clamp_index(y0 - 1 + dy as i64, h) * w;
        for (dx, &kx) in wx.iter().enumerate() {
            if kx != 0.0 {
                acc += ky * kx * plane[row + clamp_index(x0 - 1 + dx as i64, w)];
            }
        }
    }
    acc
}
