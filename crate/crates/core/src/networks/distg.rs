//! Disentangling feature extractors on macro-pixel features.
//!
//! For angular factor `a` and `C` channels, a block runs four branches on a
//! MacPI feature map `[b, C, a·h, a·w]`:
//!
//! * SFE: two `3×3` convs with dilation `a`, so each tap reads the same view;
//! * AFE: an `a×a` stride-`a` conv (one output per macro-pixel) to `C/4`,
//!   a `1×1` conv to `(C/4)·a²` and a pixel shuffle back to full size;
//! * EFE-H: a `1×a²` conv with stride `(1, a)` to `C/2`, a `1×1` conv to
//!   `(C/2)·a` and a 1D pixel shuffle along the width;
//! * EFE-V: the same on the transposed map.
//!
//! The `2.25·C` concatenation is fused by a `1×1` and a dilated `3×3` conv
//! and added to the block input.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Conv2dParams, Element, ParamStore, Var};

use super::layers::{Conv, Ctx, RowKind};

#[derive(Debug, Clone)]
struct Efe {
    reduce: Conv,
    expand: Conv,
    a: usize,
}

impl Efe {
    fn new<T: Element>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, c: usize, a: usize) -> Result<Self> {
        let half = c / 2;
        let p = Conv2dParams::strided((1, a), (0, (a * a - a) / 2));
        Ok(Self {
            reduce: Conv::new(store, rng, &format!("{name}.reduce"), c, half, (1, a * a), p)?,
            expand: Conv::new(
                store,
                rng,
                &format!("{name}.expand"),
                half,
                half * a,
                (1, 1),
                Conv2dParams::default(),
            )?,
            a,
        })
    }

    fn forward<T: Element>(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        let y = ctx.lrelu(&self.reduce.forward(ctx, x)?)?;
        let y = ctx.lrelu(&self.expand.forward(ctx, &y)?)?;
        let a = self.a;
        ctx.rearrange("PixelShuffle1D", RowKind::PixelShuffle1d, &y, |v| v.pixel_shuffle_1d(a))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DistgBlock {
    a: usize,
    sfe: [Conv; 2],
    afe: [Conv; 2],
    efe_h: Efe,
    efe_v: Efe,
    fuse: [Conv; 2],
}

impl DistgBlock {
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        c: usize,
        a: usize,
    ) -> Result<Self> {
        if c < 4 || !c.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "block channels must be a positive multiple of 4, got {c}"
            )));
        }
        if a == 0 {
            return Err(Error::Config("angular factor must be positive".into()));
        }
        let q = c / 4;
        let cat = c + q + c / 2 + c / 2;
        Ok(Self {
            a,
            sfe: [
                Conv::same(store, rng, &format!("{name}.sfe0"), c, c, 3, a)?,
                Conv::same(store, rng, &format!("{name}.sfe1"), c, c, 3, a)?,
            ],
            afe: [
                Conv::new(
                    store,
                    rng,
                    &format!("{name}.afe0"),
                    c,
                    q,
                    (a, a),
                    Conv2dParams::strided((a, a), (0, 0)),
                )?,
                Conv::new(
                    store,
                    rng,
                    &format!("{name}.afe1"),
                    q,
                    q * a * a,
                    (1, 1),
                    Conv2dParams::default(),
                )?,
            ],
            efe_h: Efe::new(store, rng, &format!("{name}.efeh"), c, a)?,
            efe_v: Efe::new(store, rng, &format!("{name}.efev"), c, a)?,
            fuse: [
                Conv::new(
                    store,
                    rng,
                    &format!("{name}.fuse0"),
                    cat,
                    c,
                    (1, 1),
                    Conv2dParams::default(),
                )?,
                Conv::same(store, rng, &format!("{name}.fuse1"), c, c, 3, a)?,
            ],
        })
    }

    pub fn forward<T: Element>(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        let a = self.a;
        let s = x.shape();
        if s.len() != 4 || !s[2].is_multiple_of(a) || !s[3].is_multiple_of(a) {
            return Err(Error::dim(format!(
                "Distg-Block input {s:?} is not divisible by angular factor {a}"
            )));
        }
        ctx.span("Distg-Block", &[x], || {
            let sfe = ctx.span("SFE", &[x], || {
                let y = ctx.lrelu(&self.sfe[0].forward(ctx, x)?)?;
                ctx.lrelu(&self.sfe[1].forward(ctx, &y)?)
            })?;
            let afe = ctx.span("AFE", &[x], || {
                let y = ctx.lrelu(&self.afe[0].forward(ctx, x)?)?;
                let y = ctx.lrelu(&self.afe[1].forward(ctx, &y)?)?;
                ctx.rearrange("PixelShuffle", RowKind::PixelShuffle, &y, |v| v.pixel_shuffle(a))
            })?;
            let efe_h = ctx.span("EFE-H", &[x], || self.efe_h.forward(ctx, x))?;
            let efe_v = ctx.span("EFE-V", &[x], || {
                let xt = ctx.rearrange("Transpose", RowKind::Rearrange, x, Var::transpose_hw)?;
                let y = self.efe_v.forward(ctx, &xt)?;
                ctx.rearrange("Transpose", RowKind::Rearrange, &y, Var::transpose_hw)
            })?;
            let cat = ctx.cat(&[sfe, afe, efe_h, efe_v])?;
            let fused = ctx.span("Fusion", &[&cat], || {
                let y = ctx.lrelu(&self.fuse[0].forward(ctx, &cat)?)?;
                self.fuse[1].forward(ctx, &y)
            })?;
            ctx.add(&fused, x)
        })
    }
}

/// Cascade of Distg-Blocks with an outer residual connection.
#[derive(Debug, Clone)]
pub(crate) struct DistgGroup {
    blocks: Vec<DistgBlock>,
}

impl DistgGroup {
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        c: usize,
        a: usize,
        blocks: usize,
    ) -> Result<Self> {
        let blocks = (0..blocks)
            .map(|i| DistgBlock::new(store, rng, &format!("{name}.block{i}"), c, a))
            .collect::<Result<_>>()?;
        Ok(Self { blocks })
    }

    pub fn forward<T: Element>(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        ctx.span("Distg-Group", &[x], || {
            let mut y = x.clone();
            for b in &self.blocks {
                y = b.forward(ctx, &y)?;
            }
            ctx.add(&y, x)
        })
    }
}

/// Squeeze-excitation channel attention with reduction 4.
#[derive(Debug, Clone)]
pub(crate) struct ChannelAttention {
    squeeze: Conv,
    excite: Conv,
}

impl ChannelAttention {
    pub fn new<T: Element>(store: &mut ParamStore<T>, rng: &mut impl Rng, name: &str, c: usize) -> Result<Self> {
        let r = (c / 4).max(1);
        Ok(Self {
            squeeze: Conv::new(
                store,
                rng,
                &format!("{name}.squeeze"),
                c,
                r,
                (1, 1),
                Conv2dParams::default(),
            )?,
            excite: Conv::new(
                store,
                rng,
                &format!("{name}.excite"),
                r,
                c,
                (1, 1),
                Conv2dParams::default(),
            )?,
        })
    }

    pub fn forward<T: Element>(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        ctx.span("Attention", &[x], || {
            let g = ctx.rearrange("GlobalAvgPool", RowKind::Pool, x, Var::global_avg_pool)?;
            let g = ctx.lrelu(&self.squeeze.forward(ctx, &g)?)?;
            let g = self.excite.forward(ctx, &g)?;
            let g = ctx.rearrange("Sigmoid", RowKind::Sigmoid, &g, Var::sigmoid)?;
            let y = x.scale_channels(&g)?;
            ctx.record(RowKind::Rearrange, "Scale", &[x, &g], None, &y);
            Ok(y)
        })
    }
}

/// Distg-Blocks followed by channel attention, wrapped in a residual.
#[derive(Debug, Clone)]
pub(crate) struct DdGroup {
    blocks: Vec<DistgBlock>,
    attention: ChannelAttention,
}

impl DdGroup {
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        c: usize,
        a: usize,
        blocks: usize,
    ) -> Result<Self> {
        let blocks = (0..blocks)
            .map(|i| DistgBlock::new(store, rng, &format!("{name}.block{i}"), c, a))
            .collect::<Result<_>>()?;
        Ok(Self {
            blocks,
            attention: ChannelAttention::new(store, rng, &format!("{name}.attn"), c)?,
        })
    }

    pub fn forward<T: Element>(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        ctx.span("DD-Group", &[x], || {
            let mut y = x.clone();
            for b in &self.blocks {
                y = b.forward(ctx, &y)?;
            }
            let y = self.attention.forward(ctx, &y)?;
            ctx.add(&y, x)
        })
    }
}

/// Standalone Distg-Block with its own parameter store, for tests and tracing.
#[derive(Debug, Clone)]
pub struct DistgBlockNet<T: Element> {
    pub store: ParamStore<T>,
    block: DistgBlock,
}

impl<T: Element> DistgBlockNet<T> {
    pub fn new(c: usize, a: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut store = ParamStore::new();
        let block = DistgBlock::new(&mut store, rng, "block", c, a)?;
        Ok(Self { store, block })
    }

    pub fn forward(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        self.block.forward(ctx, x)
    }
}
