use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::resample::{bicubic_resize, Scale};
use crate::tensor::kernels::IndexMap;
use crate::tensor::{Element, ParamStore, Tensor, Var};

use super::distg::DistgGroup;
use super::layers::{Conv, Ctx, RowKind, Trace};
use super::{NetKind, Network, NetworkConfig};

/// Hybrid super-resolution: LR light field + HR central view → HR light field.
#[derive(Debug, Clone)]
pub struct HlfssrNet<T: Element> {
    config: NetworkConfig,
    store: ParamStore<T>,
    // 2D branch
    replicate: Conv,
    init_2d: Conv,
    group_2d: DistgGroup,
    out_2d: Conv,
    // 4D branch
    init_4d: Conv,
    groups_4d: Vec<DistgGroup>,
    up_expand: Conv,
    up_reduce: Conv,
    // fusion
    init_fuse: Conv,
    group_fuse: DistgGroup,
    fuse_mid: Conv,
    fuse_out: Conv,
}

impl<T: Element> HlfssrNet<T> {
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let r = &mut rng;
        let (a, al, c) = (config.angular, config.alpha, config.channels);
        let n = a * a;
        let blocks = config.blocks_per_group;
        let replicate = Conv::same(&mut s, r, "hlfssr.b2d.replicate", 1, n, 3, 1)?;
        let init_2d = Conv::same(&mut s, r, "hlfssr.b2d.init", 1, c, 3, a)?;
        let group_2d = DistgGroup::new(&mut s, r, "hlfssr.b2d.group", c, a, blocks)?;
        let out_2d = Conv::same(&mut s, r, "hlfssr.b2d.out", c, 1, 3, a)?;
        let init_4d = Conv::same(&mut s, r, "hlfssr.b4d.init", 1, c, 3, a)?;
        let groups_4d = (0..config.groups_4d)
            .map(|g| DistgGroup::new(&mut s, r, &format!("hlfssr.b4d.group{g}"), c, a, blocks))
            .collect::<Result<_>>()?;
        let up_expand = Conv::same(&mut s, r, "hlfssr.b4d.up_expand", c, c * al * al, 1, 1)?;
        let up_reduce = Conv::same(&mut s, r, "hlfssr.b4d.up_reduce", c, 1, 1, 1)?;
        let init_fuse = Conv::same(&mut s, r, "hlfssr.fuse.init", 2, c, 3, a)?;
        let group_fuse = DistgGroup::new(&mut s, r, "hlfssr.fuse.group", c, a, blocks)?;
        let fuse_mid = Conv::same(&mut s, r, "hlfssr.fuse.mid", c, config.fusion_channels, 3, a)?;
        let fuse_out = Conv::same(&mut s, r, "hlfssr.fuse.out", config.fusion_channels, 1, 3, a)?;
        if config.zero_init_output {
            s.get_mut(fuse_out.weight()).value.data_mut().fill(T::zero());
        }
        let net = Self {
            config: config.clone(),
            store: s,
            replicate,
            init_2d,
            group_2d,
            out_2d,
            init_4d,
            groups_4d,
            up_expand,
            up_reduce,
            init_fuse,
            group_fuse,
            fuse_mid,
            fuse_out,
        };
        let lf = Var::constant(Tensor::zeros([1, n, 1, 1]));
        let hr = Var::constant(Tensor::zeros([1, 1, al, al]));
        let y = net.forward(&Ctx::new(&net.store.bind()), &lf, &hr)?;
        if y.shape() != [1, n, al, al] {
            return Err(Error::Contract(format!("HLFSSR shape check produced {:?}", y.shape())));
        }
        Ok(net)
    }

    /// `lf: [b, A², H, W]`, `hr: [b, 1, α·H, α·W]` → `[b, A², α·H, α·W]`.
    pub fn forward(&self, ctx: &Ctx<T>, lf: &Var<T>, hr: &Var<T>) -> Result<Var<T>> {
        let (a, al) = (self.config.angular, self.config.alpha);
        let n = a * a;
        let [b, vn, h, w] = lf.value().dims()?;
        if vn != n {
            return Err(Error::dim(format!("expected {n} views, got {vn}")));
        }
        if hr.shape() != [b, 1, al * h, al * w] {
            return Err(Error::dim(format!(
                "HR input {:?} does not match LR views {h}x{w} at scale {al}",
                hr.shape()
            )));
        }
        let feat_2d = ctx.span("2D Branch", &[hr], || {
            let y = ctx.span("Spatial-Conv", &[hr], || ctx.lrelu(&self.replicate.forward(ctx, hr)?))?;
            let m = ctx.rearrange("LF2MacPI", RowKind::Lf2MacPi, &y, |v| {
                v.rearrange(IndexMap::views_to_macpi(v.shape(), a)?)
            })?;
            let f = ctx.span("Spatial-Conv", &[&m], || self.init_2d.forward(ctx, &m))?;
            let f = self.group_2d.forward(ctx, &f)?;
            ctx.span("Spatial-Conv", &[&f], || self.out_2d.forward(ctx, &f))
        })?;
        let feat_4d = ctx.span("4D Branch", &[lf], || {
            let m = ctx.rearrange("LF2MacPI", RowKind::Rearrange, lf, |v| {
                v.rearrange(IndexMap::views_to_macpi(v.shape(), a)?)
            })?;
            let mut f = ctx.span("Spatial-Conv", &[&m], || self.init_4d.forward(ctx, &m))?;
            for g in &self.groups_4d {
                f = g.forward(ctx, &f)?;
            }
            ctx.span("Up-sampling", &[&f], || {
                // Per-view upsampling on the sub-aperture mosaic so that the
                // shuffle never mixes neighbouring views.
                let y = ctx.rearrange("MacPI2SAI", RowKind::Rearrange, &f, |v| {
                    v.rearrange(IndexMap::macpi_to_mosaic(v.shape(), a)?)
                })?;
                let y = self.up_expand.forward(ctx, &y)?;
                let y = ctx.rearrange("PixelShuffle", RowKind::PixelShuffle, &y, |v| v.pixel_shuffle(al))?;
                let y = self.up_reduce.forward(ctx, &y)?;
                ctx.rearrange("SAI2MacPI", RowKind::Rearrange, &y, |v| {
                    v.rearrange(IndexMap::mosaic_to_macpi(v.shape(), a)?)
                })
            })
        })?;
        let residual = ctx.span("Hybrid Features Fusion", &[&feat_2d, &feat_4d], || {
            let x = ctx.cat(&[feat_2d.clone(), feat_4d.clone()])?;
            let f = ctx.span("Spatial-Conv", &[&x], || self.init_fuse.forward(ctx, &x))?;
            let f = self.group_fuse.forward(ctx, &f)?;
            ctx.span("Fusion-Conv", &[&f], || {
                let y = ctx.lrelu(&self.fuse_mid.forward(ctx, &f)?)?;
                self.fuse_out.forward(ctx, &y)
            })
        })?;
        let views = ctx.rearrange("MacPI2LF", RowKind::Rearrange, &residual, |v| {
            v.rearrange(IndexMap::macpi_to_views(v.shape(), a)?)
        })?;
        // The bicubic base carries no gradient.
        let base = Var::constant(bicubic_resize(lf.value(), Scale::up(al))?);
        ctx.record(RowKind::Resample, "Bicubic", &[lf], None, &base);
        ctx.add(&views, &base)
    }

    pub fn trace(&self, b: usize, h: usize, w: usize) -> Result<Trace> {
        let (n, al) = (self.config.angular.pow(2), self.config.alpha);
        let bound = self.store.bind();
        let ctx = Ctx::traced(&bound);
        let lf = Var::constant(Tensor::zeros([b, n, h, w]));
        let hr = Var::constant(Tensor::zeros([b, 1, al * h, al * w]));
        self.forward(&ctx, &lf, &hr)?;
        Ok(ctx.into_trace().unwrap_or_default())
    }
}

impl<T: Element> Network<T> for HlfssrNet<T> {
    fn kind(&self) -> NetKind {
        NetKind::Hlfssr
    }

    fn config(&self) -> &NetworkConfig {
        &self.config
    }

    fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }
}
