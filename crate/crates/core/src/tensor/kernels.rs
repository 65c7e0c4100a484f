//! Forward and adjoint kernels on plain tensors.
//!
//! Nothing here records gradients; [`Var`](super::Var) wires these kernels
//! into the autodiff graph.

use crate::error::{Error, Result};

use super::{Element, Tensor};

/// Stride, zero padding and dilation of a 2D convolution, as `(rows, cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dParams {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
}

impl Default for Conv2dParams {
    fn default() -> Self {
        Self {
            stride: (1, 1),
            padding: (0, 0),
            dilation: (1, 1),
        }
    }
}

impl Conv2dParams {
    /// Padding that keeps the spatial size of a `k×k` kernel with dilation `d`.
    pub fn same(k: usize, d: usize) -> Self {
        let pad = d * (k - 1) / 2;
        Self {
            stride: (1, 1),
            padding: (pad, pad),
            dilation: (d, d),
        }
    }

    pub fn strided(stride: (usize, usize), padding: (usize, usize)) -> Self {
        Self {
            stride,
            padding,
            dilation: (1, 1),
        }
    }

    pub fn output_size(&self, h: usize, w: usize, kh: usize, kw: usize) -> Result<(usize, usize)> {
        let (sh, sw) = self.stride;
        let (dh, dw) = self.dilation;
        if sh == 0 || sw == 0 || dh == 0 || dw == 0 {
            return Err(Error::dim("conv2d strides and dilations must be >= 1"));
        }
        if kh == 0 || kw == 0 {
            return Err(Error::dim("conv2d kernel extents must be >= 1"));
        }
        let eff_h = dh * (kh - 1) + 1;
        let eff_w = dw * (kw - 1) + 1;
        let ph = h + 2 * self.padding.0;
        let pw = w + 2 * self.padding.1;
        if eff_h > ph || eff_w > pw {
            return Err(Error::dim(format!(
                "kernel {kh}x{kw} (dilation {dh}x{dw}) does not fit padded input {ph}x{pw}"
            )));
        }
        Ok(((ph - eff_h) / sh + 1, (pw - eff_w) / sw + 1))
    }

    fn is_pointwise(&self, kh: usize, kw: usize) -> bool {
        kh == 1 && kw == 1 && self.stride == (1, 1) && self.padding == (0, 0)
    }
}

struct ConvGeom {
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new<T: Element>(x: &Tensor<T>, weight: &Tensor<T>, p: &Conv2dParams) -> Result<Self> {
        let [batch, c_in, h, w] = x.dims()?;
        let [c_out, wc_in, kh, kw] = weight.dims()?;
        if wc_in != c_in {
            return Err(Error::dim(format!(
                "conv2d weight expects {wc_in} input channels, input has {c_in}"
            )));
        }
        let (oh, ow) = p.output_size(h, w, kh, kw)?;
        Ok(Self {
            batch,
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            oh,
            ow,
        })
    }

    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn pix(&self) -> usize {
        self.oh * self.ow
    }
}

fn im2col<T: Element>(x: &[T], g: &ConvGeom, p: &Conv2dParams, cols: &mut [T]) {
    let pix = g.pix();
    for ci in 0..g.c_in {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * pix..(row + 1) * pix];
                for oy in 0..g.oh {
                    let drow = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    let iy = (oy * p.stride.0 + ki * p.dilation.0) as isize - p.padding.0 as isize;
                    if iy < 0 || iy >= g.h as isize {
                        drow.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = (ox * p.stride.1 + kj * p.dilation.1) as isize - p.padding.1 as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Element>(cols: &[T], g: &ConvGeom, p: &Conv2dParams, dx: &mut [T]) {
    let pix = g.pix();
    for ci in 0..g.c_in {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &cols[row * pix..(row + 1) * pix];
                for oy in 0..g.oh {
                    let iy = (oy * p.stride.0 + ki * p.dilation.0) as isize - p.padding.0 as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let drow = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * p.stride.1 + kj * p.dilation.1) as isize - p.padding.1 as isize;
                        if ix >= 0 && ix < g.w as isize {
                            drow[ix as usize] = drow[ix as usize] + src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Zero-padded 2D cross-correlation of `[b, c_in, h, w]` with `[c_out, c_in, kh, kw]`.
pub fn conv2d<T: Element>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    p: &Conv2dParams,
) -> Result<Tensor<T>> {
    let g = ConvGeom::new(x, weight, p)?;
    if let Some(b) = bias {
        if b.shape() != [g.c_out] {
            return Err(Error::dim(format!(
                "conv2d bias must have shape [{}], got {:?}",
                g.c_out,
                b.shape()
            )));
        }
    }
    let (k, pix) = (g.k(), g.pix());
    let in_len = g.c_in * g.h * g.w;
    let pointwise = p.is_pointwise(g.kh, g.kw);
    let mut out = vec![T::zero(); g.batch * g.c_out * pix];
    let mut cols = if pointwise {
        Vec::new()
    } else {
        vec![T::zero(); k * pix]
    };
    for n in 0..g.batch {
        let xin = &x.data()[n * in_len..(n + 1) * in_len];
        let src: &[T] = if pointwise {
            xin
        } else {
            im2col(xin, &g, p, &mut cols);
            &cols
        };
        let o = &mut out[n * g.c_out * pix..(n + 1) * g.c_out * pix];
        let beta = match bias {
            Some(b) => {
                for (row, &bv) in o.chunks_mut(pix).zip(b.data()) {
                    row.fill(bv);
                }
                T::one()
            }
            None => T::zero(),
        };
        T::gemm(g.c_out, k, pix, weight.data(), (k, 1), src, (pix, 1), beta, o, (pix, 1));
    }
    let out = Tensor::new([g.batch, g.c_out, g.oh, g.ow], out)?;
    out.check_finite("conv2d")?;
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, weight and bias; only the
/// entries flagged in `needs` are computed.
pub fn conv2d_backward<T: Element>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    p: &Conv2dParams,
    needs: [bool; 3],
) -> Result<[Option<Tensor<T>>; 3]> {
    let g = ConvGeom::new(x, weight, p)?;
    let (k, pix) = (g.k(), g.pix());
    let in_len = g.c_in * g.h * g.w;
    let out_len = g.c_out * pix;
    let pointwise = p.is_pointwise(g.kh, g.kw);
    let mut cols = if pointwise {
        Vec::new()
    } else {
        vec![T::zero(); k * pix]
    };

    let mut dx = needs[0].then(|| vec![T::zero(); x.numel()]);
    let mut dw = needs[1].then(|| vec![T::zero(); weight.numel()]);
    for n in 0..g.batch {
        let go = &grad_out.data()[n * out_len..(n + 1) * out_len];
        if let Some(dx) = dx.as_mut() {
            let dxn = &mut dx[n * in_len..(n + 1) * in_len];
            if pointwise {
                T::gemm(
                    k,
                    g.c_out,
                    pix,
                    weight.data(),
                    (1, k),
                    go,
                    (pix, 1),
                    T::zero(),
                    dxn,
                    (pix, 1),
                );
            } else {
                T::gemm(
                    k,
                    g.c_out,
                    pix,
                    weight.data(),
                    (1, k),
                    go,
                    (pix, 1),
                    T::zero(),
                    &mut cols,
                    (pix, 1),
                );
                col2im(&cols, &g, p, dxn);
            }
        }
        if let Some(dw) = dw.as_mut() {
            let xin = &x.data()[n * in_len..(n + 1) * in_len];
            let src: &[T] = if pointwise {
                xin
            } else {
                im2col(xin, &g, p, &mut cols);
                &cols
            };
            T::gemm(g.c_out, pix, k, go, (pix, 1), src, (1, pix), T::one(), dw, (k, 1));
        }
    }
    let db = needs[2].then(|| {
        let mut db = vec![T::zero(); g.c_out];
        for n in 0..g.batch {
            for (co, d) in db.iter_mut().enumerate() {
                let start = n * out_len + co * pix;
                *d = grad_out.data()[start..start + pix].iter().fold(*d, |acc, &v| acc + v);
            }
        }
        db
    });
    Ok([
        dx.map(|d| Tensor::new(x.shape().to_vec(), d)).transpose()?,
        dw.map(|d| Tensor::new(weight.shape().to_vec(), d)).transpose()?,
        db.map(|d| Tensor::new([g.c_out], d)).transpose()?,
    ])
}

pub fn leaky_relu<T: Element>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    x.map(|v| if v >= T::zero() { v } else { slope * v })
}

pub fn leaky_relu_backward<T: Element>(x: &Tensor<T>, grad: &Tensor<T>, slope: T) -> Result<Tensor<T>> {
    x.zip_map(grad, |v, g| if v >= T::zero() { g } else { slope * g })
}

/// Output index → input index of a pure rearrangement or selection.
///
/// `out[i] = in[map[i]]`; the adjoint scatters (and accumulates) back.
#[derive(Debug, Clone)]
pub struct IndexMap {
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub map: Vec<usize>,
}

impl IndexMap {
    pub fn gather<T: Element>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.shape() != self.in_shape.as_slice() {
            return Err(Error::dim(format!(
                "rearrangement expects {:?}, got {:?}",
                self.in_shape,
                x.shape()
            )));
        }
        let d = x.data();
        Tensor::new(self.out_shape.clone(), self.map.iter().map(|&i| d[i]).collect())
    }

    pub fn scatter_add<T: Element>(&self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        if grad.shape() != self.out_shape.as_slice() {
            return Err(Error::dim(format!(
                "rearrangement adjoint expects {:?}, got {:?}",
                self.out_shape,
                grad.shape()
            )));
        }
        let mut out = Tensor::zeros(self.in_shape.clone());
        let o = out.data_mut();
        for (&i, &g) in self.map.iter().zip(grad.data()) {
            o[i] = o[i] + g;
        }
        Ok(out)
    }

    /// `[b, c·r², h, w] → [b, c, h·r, w·r]`.
    pub fn pixel_shuffle(shape: &[usize], r: usize) -> Result<Self> {
        let [b, cr2, h, w] = dims4(shape)?;
        if r == 0 || cr2 % (r * r) != 0 {
            return Err(Error::dim(format!(
                "pixel_shuffle: {cr2} channels not divisible by r²={}",
                r * r
            )));
        }
        let c = cr2 / (r * r);
        let (oh, ow) = (h * r, w * r);
        let mut map = Vec::with_capacity(b * cr2 * h * w);
        for n in 0..b {
            for ch in 0..c {
                for y in 0..oh {
                    for x in 0..ow {
                        let (hy, i) = (y / r, y % r);
                        let (wx, j) = (x / r, x % r);
                        let ic = ch * r * r + i * r + j;
                        map.push(((n * cr2 + ic) * h + hy) * w + wx);
                    }
                }
            }
        }
        Ok(Self {
            in_shape: shape.to_vec(),
            out_shape: vec![b, c, oh, ow],
            map,
        })
    }

    /// `[b, c·r, h, w] → [b, c, h, w·r]`.
    pub fn pixel_shuffle_1d(shape: &[usize], r: usize) -> Result<Self> {
        let [b, cr, h, w] = dims4(shape)?;
        if r == 0 || cr % r != 0 {
            return Err(Error::dim(format!(
                "pixel_shuffle_1d: {cr} channels not divisible by r={r}"
            )));
        }
        let c = cr / r;
        let ow = w * r;
        let mut map = Vec::with_capacity(b * cr * h * w);
        for n in 0..b {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..ow {
                        let ic = ch * r + x % r;
                        map.push(((n * cr + ic) * h + y) * w + x / r);
                    }
                }
            }
        }
        Ok(Self {
            in_shape: shape.to_vec(),
            out_shape: vec![b, c, h, ow],
            map,
        })
    }

    /// Views-as-channels `[b, a², h, w]` → macro-pixel image `[b, 1, a·h, a·w]`.
    ///
    /// View `(u, v)` (channel `u·a + v`) of pixel `(y, x)` lands at `(y·a + u, x·a + v)`.
    pub fn views_to_macpi(shape: &[usize], a: usize) -> Result<Self> {
        let [b, n, h, w] = dims4(shape)?;
        if a == 0 || n != a * a {
            return Err(Error::dim(format!(
                "views_to_macpi: {n} views do not form an {a}x{a} grid"
            )));
        }
        let (oh, ow) = (a * h, a * w);
        let mut map = Vec::with_capacity(b * n * h * w);
        for bi in 0..b {
            for my in 0..oh {
                for mx in 0..ow {
                    let (y, u) = (my / a, my % a);
                    let (x, v) = (mx / a, mx % a);
                    map.push(((bi * n + u * a + v) * h + y) * w + x);
                }
            }
        }
        Ok(Self {
            in_shape: shape.to_vec(),
            out_shape: vec![b, 1, oh, ow],
            map,
        })
    }

    /// Inverse of [`IndexMap::views_to_macpi`].
    pub fn macpi_to_views(shape: &[usize], a: usize) -> Result<Self> {
        let [b, c, mh, mw] = dims4(shape)?;
        if c != 1 || a == 0 || mh % a != 0 || mw % a != 0 {
            return Err(Error::dim(format!(
                "macpi_to_views: {shape:?} is not a single-channel MacPI divisible by {a}"
            )));
        }
        let (h, w) = (mh / a, mw / a);
        let n = a * a;
        let mut map = Vec::with_capacity(b * mh * mw);
        for bi in 0..b {
            for k in 0..n {
                let (u, v) = (k / a, k % a);
                for y in 0..h {
                    for x in 0..w {
                        map.push((bi * mh + y * a + u) * mw + x * a + v);
                    }
                }
            }
        }
        Ok(Self {
            in_shape: shape.to_vec(),
            out_shape: vec![b, n, h, w],
            map,
        })
    }

    /// MacPI features `[b, c, a·h, a·w]` → sub-aperture mosaic of the same shape,
    /// where view `(u, v)` occupies the block at rows `u·h..`, cols `v·w..`.
    pub fn macpi_to_mosaic(shape: &[usize], a: usize) -> Result<Self> {
        let [b, c, mh, mw] = dims4(shape)?;
        if a == 0 || mh % a != 0 || mw % a != 0 {
            return Err(Error::dim(format!("macpi_to_mosaic: {mh}x{mw} not divisible by {a}")));
        }
        let (h, w) = (mh / a, mw / a);
        let mut map = Vec::with_capacity(b * c * mh * mw);
        for plane in 0..b * c {
            for sy in 0..mh {
                for sx in 0..mw {
                    let (u, y) = (sy / h, sy % h);
                    let (v, x) = (sx / w, sx % w);
                    map.push((plane * mh + y * a + u) * mw + x * a + v);
                }
            }
        }
        Ok(Self {
            in_shape: shape.to_vec(),
            out_shape: shape.to_vec(),
            map,
        })
    }

    /// Inverse of [`IndexMap::macpi_to_mosaic`].
    pub fn mosaic_to_macpi(shape: &[usize], a: usize) -> Result<Self> {
        let fwd = Self::macpi_to_mosaic(shape, a)?;
        let mut map = vec![0; fwd.map.len()];
        for (o, &i) in fwd.map.iter().enumerate() {
            map[i] = o;
        }
        Ok(Self {
            in_shape: shape.to_vec(),
            out_shape: shape.to_vec(),
            map,
        })
    }

    /// Swaps the last two axes of a 4-d tensor.
    pub fn transpose_hw(shape: &[usize]) -> Result<Self> {
        let [b, c, h, w] = dims4(shape)?;
        let mut map = Vec::with_capacity(b * c * h * w);
        for plane in 0..b * c {
            for x in 0..w {
                for y in 0..h {
                    map.push((plane * h + y) * w + x);
                }
            }
        }
        Ok(Self {
            in_shape: shape.to_vec(),
            out_shape: vec![b, c, w, h],
            map,
        })
    }

    /// Picks `indices` along `axis` (repeats allowed).
    pub fn select(shape: &[usize], axis: usize, indices: &[usize]) -> Result<Self> {
        if axis >= shape.len() {
            return Err(Error::dim(format!("axis {axis} out of range for {shape:?}")));
        }
        let extent = shape[axis];
        if let Some(&bad) = indices.iter().find(|&&i| i >= extent) {
            return Err(Error::dim(format!(
                "index {bad} out of range for axis {axis} of extent {extent}"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut map = Vec::with_capacity(outer * indices.len() * inner);
        for o in 0..outer {
            for &i in indices {
                let base = (o * extent + i) * inner;
                map.extend(base..base + inner);
            }
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = indices.len();
        Ok(Self {
            in_shape: shape.to_vec(),
            out_shape,
            map,
        })
    }

    pub fn narrow(shape: &[usize], axis: usize, start: usize, len: usize) -> Result<Self> {
        if axis < shape.len() && start + len > shape[axis] {
            return Err(Error::dim(format!(
                "narrow {start}..{} exceeds extent {} of axis {axis}",
                start + len,
                shape[axis]
            )));
        }
        let indices: Vec<usize> = (start..start + len).collect();
        Self::select(shape, axis, &indices)
    }
}

fn dims4(shape: &[usize]) -> Result<[usize; 4]> {
    shape
        .try_into()
        .map_err(|_| Error::dim(format!("expected a 4-d tensor, got shape {shape:?}")))
}

/// Concatenates tensors whose shapes agree on every axis but `axis`.
pub fn concat<T: Element>(xs: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = xs.first().ok_or_else(|| Error::dim("concat of zero tensors"))?;
    let nd = first.ndim();
    if axis >= nd {
        return Err(Error::dim(format!(
            "concat axis {axis} out of range for {nd}-d tensors"
        )));
    }
    let mut out_shape = first.shape().to_vec();
    out_shape[axis] = 0;
    for x in xs {
        let s = x.shape();
        if s.len() != nd || s.iter().enumerate().any(|(i, &e)| i != axis && e != first.shape()[i]) {
            return Err(Error::dim(format!(
                "concat along axis {axis}: {:?} incompatible with {:?}",
                s,
                first.shape()
            )));
        }
        out_shape[axis] += s[axis];
    }
    let outer: usize = out_shape[..axis].iter().product();
    let inner: usize = out_shape[axis + 1..].iter().product();
    let mut data = Vec::with_capacity(out_shape.iter().product());
    for o in 0..outer {
        for x in xs {
            let chunk = x.shape()[axis] * inner;
            data.extend_from_slice(&x.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    Tensor::new(out_shape, data)
}

/// Splits the adjoint of [`concat`] back into per-input pieces.
pub fn split<T: Element>(grad: &Tensor<T>, axis: usize, extents: &[usize]) -> Result<Vec<Tensor<T>>> {
    let shape = grad.shape();
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let total: usize = extents.iter().sum();
    if total != shape[axis] {
        return Err(Error::dim("split extents do not sum to the axis extent"));
    }
    let mut parts: Vec<Vec<T>> = extents.iter().map(|e| Vec::with_capacity(outer * e * inner)).collect();
    let d = grad.data();
    for o in 0..outer {
        let mut offset = o * total * inner;
        for (part, &e) in parts.iter_mut().zip(extents) {
            part.extend_from_slice(&d[offset..offset + e * inner]);
            offset += e * inner;
        }
    }
    parts
        .into_iter()
        .zip(extents)
        .map(|(p, &e)| {
            let mut s = shape.to_vec();
            s[axis] = e;
            Tensor::new(s, p)
        })
        .collect()
}

/// Forward difference `x[i+1] − x[i]` along `axis`.
pub fn diff<T: Element>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let shape = x.shape();
    if axis >= shape.len() || shape[axis] < 2 {
        return Err(Error::dim(format!(
            "diff along axis {axis} needs extent >= 2, shape {shape:?}"
        )));
    }
    let n = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let d = x.data();
    let mut out = Vec::with_capacity(outer * (n - 1) * inner);
    for o in 0..outer {
        for i in 0..n - 1 {
            let a = (o * n + i) * inner;
            let b = a + inner;
            out.extend((0..inner).map(|j| d[b + j] - d[a + j]));
        }
    }
    let mut out_shape = shape.to_vec();
    out_shape[axis] = n - 1;
    Tensor::new(out_shape, out)
}

pub fn diff_backward<T: Element>(grad: &Tensor<T>, in_shape: &[usize], axis: usize) -> Result<Tensor<T>> {
    let n = in_shape[axis];
    let outer: usize = in_shape[..axis].iter().product();
    let inner: usize = in_shape[axis + 1..].iter().product();
    let mut out = Tensor::zeros(in_shape.to_vec());
    let o_data = out.data_mut();
    let g = grad.data();
    for o in 0..outer {
        for i in 0..n - 1 {
            let gi = (o * (n - 1) + i) * inner;
            let a = (o * n + i) * inner;
            let b = a + inner;
            for j in 0..inner {
                o_data[b + j] = o_data[b + j] + g[gi + j];
                o_data[a + j] = o_data[a + j] - g[gi + j];
            }
        }
    }
    Ok(out)
}

/// Linear resampling along one axis: `out[i] = Σ weight·in[src]`.
#[derive(Debug, Clone)]
pub struct AxisTaps {
    pub in_len: usize,
    pub out_len: usize,
    /// Per output sample, `(source index, weight)` pairs.
    pub taps: Vec<Vec<(usize, f64)>>,
}

/// Applies `rows` along the second-to-last axis and `cols` along the last.
pub fn resample_hw<T: Element>(x: &Tensor<T>, rows: &AxisTaps, cols: &AxisTaps) -> Result<Tensor<T>> {
    let shape = x.shape();
    let nd = shape.len();
    if nd < 2 || shape[nd - 2] != rows.in_len || shape[nd - 1] != cols.in_len {
        return Err(Error::dim(format!(
            "resample expects trailing extents {}x{}, got {shape:?}",
            rows.in_len, cols.in_len
        )));
    }
    let planes: usize = shape[..nd - 2].iter().product();
    let (h, w, oh, ow) = (rows.in_len, cols.in_len, rows.out_len, cols.out_len);
    let row_w: Vec<Vec<(usize, T)>> = cast_taps(rows);
    let col_w: Vec<Vec<(usize, T)>> = cast_taps(cols);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut tmp = vec![T::zero(); oh * w];
    for p in 0..planes {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        for (oy, taps) in row_w.iter().enumerate() {
            let dst = &mut tmp[oy * w..(oy + 1) * w];
            dst.fill(T::zero());
            for &(iy, wt) in taps {
                let srow = &src[iy * w..(iy + 1) * w];
                for (d, &s) in dst.iter_mut().zip(srow) {
                    *d = *d + wt * s;
                }
            }
        }
        for oy in 0..oh {
            let trow = &tmp[oy * w..(oy + 1) * w];
            out.extend(
                col_w
                    .iter()
                    .map(|taps| taps.iter().fold(T::zero(), |acc, &(ix, wt)| acc + wt * trow[ix])),
            );
        }
    }
    let mut out_shape = shape.to_vec();
    out_shape[nd - 2] = oh;
    out_shape[nd - 1] = ow;
    Tensor::new(out_shape, out)
}

pub fn resample_hw_backward<T: Element>(
    grad: &Tensor<T>,
    in_shape: &[usize],
    rows: &AxisTaps,
    cols: &AxisTaps,
) -> Result<Tensor<T>> {
    let nd = in_shape.len();
    let planes: usize = in_shape[..nd - 2].iter().product();
    let (h, w, oh, ow) = (rows.in_len, cols.in_len, rows.out_len, cols.out_len);
    let row_w: Vec<Vec<(usize, T)>> = cast_taps(rows);
    let col_w: Vec<Vec<(usize, T)>> = cast_taps(cols);
    let mut out = Tensor::zeros(in_shape.to_vec());
    let mut tmp = vec![T::zero(); oh * w];
    for p in 0..planes {
        let g = &grad.data()[p * oh * ow..(p + 1) * oh * ow];
        tmp.fill(T::zero());
        for oy in 0..oh {
            let trow = &mut tmp[oy * w..(oy + 1) * w];
            for (ox, taps) in col_w.iter().enumerate() {
                let gv = g[oy * ow + ox];
                for &(ix, wt) in taps {
                    trow[ix] = trow[ix] + wt * gv;
                }
            }
        }
        let dst = &mut out.data_mut()[p * h * w..(p + 1) * h * w];
        for (oy, taps) in row_w.iter().enumerate() {
            let trow = &tmp[oy * w..(oy + 1) * w];
            for &(iy, wt) in taps {
                let drow = &mut dst[iy * w..(iy + 1) * w];
                for (d, &t) in drow.iter_mut().zip(trow) {
                    *d = *d + wt * t;
                }
            }
        }
    }
    Ok(out)
}

fn cast_taps<T: Element>(t: &AxisTaps) -> Vec<Vec<(usize, T)>> {
    t.taps
        .iter()
        .map(|v| v.iter().map(|&(i, w)| (i, T::from_f64(w))).collect())
        .collect()
}
