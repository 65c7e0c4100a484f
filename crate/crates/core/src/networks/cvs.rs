use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lightfield::ViewGrouping;
use crate::tensor::{Conv2dParams, Element, ParamStore, Tensor, Var};

use super::distg::DdGroup;
use super::layers::{Conv, Ctx, RowKind, Trace};
use super::{NetKind, Network, NetworkConfig};

/// Which reorganised groups feed the central-view synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMode {
    /// Every group, predictions averaged.
    All,
    /// One group only.
    Single(usize),
}

/// Central-view synthesis from 2×2 pseudo light fields of side views.
#[derive(Debug, Clone)]
pub struct CvsNet<T: Element> {
    config: NetworkConfig,
    store: ParamStore<T>,
    lift: Conv,
    init: Conv,
    groups: Vec<DdGroup>,
    down: Conv,
    out: Conv,
}

impl<T: Element> CvsNet<T> {
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let c = config.cvs_channels;
        let lift = Conv::same(&mut store, &mut rng, "cvs.lift", 4, 4, 3, 1)?;
        let init = Conv::same(&mut store, &mut rng, "cvs.init", 1, c, 3, 2)?;
        let groups = (0..config.cvs_groups)
            .map(|g| DdGroup::new(&mut store, &mut rng, &format!("cvs.group{g}"), c, 2, config.cvs_blocks))
            .collect::<Result<_>>()?;
        let down = Conv::new(
            &mut store,
            &mut rng,
            "cvs.down",
            c,
            c,
            (2, 2),
            Conv2dParams::strided((2, 2), (0, 0)),
        )?;
        let out = Conv::same(&mut store, &mut rng, "cvs.out", c, 1, 3, 1)?;
        let net = Self {
            config: config.clone(),
            store,
            lift,
            init,
            groups,
            down,
            out,
        };
        let y = net.forward_groups(
            &Ctx::new(&net.store.bind()),
            &Var::constant(Tensor::zeros([1, 4, 1, 1])),
        )?;
        if y.shape() != [1, 1, 1, 1] {
            return Err(Error::Contract(format!("CVS shape check produced {:?}", y.shape())));
        }
        Ok(net)
    }

    /// `[n, 4, H, W]` pseudo light fields (views in 2×2 row-major order) →
    /// `[n, 1, H, W]` central-view estimates.
    pub fn forward_groups(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        if x.shape().len() != 4 || x.shape()[1] != 4 {
            return Err(Error::dim(format!(
                "CVS expects [n, 4, H, W] groups, got {:?}",
                x.shape()
            )));
        }
        ctx.span("CVS", &[x], || {
            let y = ctx.span("Spatial-Conv", &[x], || ctx.lrelu(&self.lift.forward(ctx, x)?))?;
            let m = ctx.rearrange("LF2MacPI", RowKind::Lf2MacPi, &y, |v| {
                v.rearrange(crate::tensor::kernels::IndexMap::views_to_macpi(v.shape(), 2)?)
            })?;
            let mut f = self.init.forward(ctx, &m)?;
            for g in &self.groups {
                f = g.forward(ctx, &f)?;
            }
            let y = ctx.span("Angular-Down", &[&f], || {
                let y = ctx.lrelu(&self.down.forward(ctx, &f)?)?;
                self.out.forward(ctx, &y)
            })?;
            if !self.config.cvs_mean_skip {
                return Ok(y);
            }
            let mean = x.conv2d(
                &Var::constant(Tensor::full([1, 4, 1, 1], T::from_f64(0.25))),
                None,
                Conv2dParams::same(1, 1),
            )?;
            ctx.record(RowKind::Pool, "GroupMean", &[x], None, &mean);
            ctx.add(&y, &mean)
        })
    }

    /// Central view `[b, 1, H, W]` from a view stack `[b, A², H, W]`.
    pub fn forward(&self, ctx: &Ctx<T>, views: &Var<T>, grouping: &ViewGrouping, mode: GroupMode) -> Result<Var<T>> {
        let s = views.shape();
        let a = grouping.angular;
        if s.len() != 4 || s[1] != a * a {
            return Err(Error::dim(format!("CVS expects [b, {}, H, W] views, got {s:?}", a * a)));
        }
        let b = s[0];
        let groups = grouping.flat_indices();
        let chosen: Vec<[usize; 4]> = match mode {
            GroupMode::All => groups,
            GroupMode::Single(g) => vec![*groups
                .get(g)
                .ok_or_else(|| Error::dim(format!("group {g} of {} requested", groups.len())))?],
        };
        let stacked: Vec<Var<T>> = chosen.iter().map(|idx| views.select(1, idx)).collect::<Result<_>>()?;
        let n = stacked.len();
        let batch = if n == 1 {
            stacked[0].clone()
        } else {
            Var::concat(&stacked, 0)?
        };
        let est = self.forward_groups(ctx, &batch)?;
        if n == 1 {
            return Ok(est);
        }
        let parts: Vec<Var<T>> = (0..n).map(|g| est.narrow(0, g * b, b)).collect::<Result<_>>()?;
        Var::sum_of(&parts)?.scale(1.0 / n as f64)
    }

    pub fn trace(&self, b: usize, h: usize, w: usize) -> Result<Trace> {
        let bound = self.store.bind();
        let ctx = Ctx::traced(&bound);
        self.forward_groups(&ctx, &Var::constant(Tensor::zeros([b, 4, h, w])))?;
        Ok(ctx.into_trace().unwrap_or_default())
    }
}

impl<T: Element> Network<T> for CvsNet<T> {
    fn kind(&self) -> NetKind {
        NetKind::Cvs
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
