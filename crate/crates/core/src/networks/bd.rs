use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::resample::{bicubic_resize_var, Scale};
use crate::tensor::{Element, ParamStore, Tensor, Var};

use super::layers::{Conv, Ctx, RowKind, Trace};
use super::{NetKind, Network, NetworkConfig};

/// Backward degradation: bicubic downsampling plus a learned residual
/// (plain stack of `3×3` convs).
#[derive(Debug, Clone)]
pub struct BdNet<T: Element> {
    config: NetworkConfig,
    store: ParamStore<T>,
    layers: Vec<Conv>,
}

impl<T: Element> BdNet<T> {
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let c = config.bd_channels;
        let mut layers = Vec::with_capacity(config.bd_layers + 1);
        for i in 0..config.bd_layers {
            let c_in = if i == 0 { 1 } else { c };
            layers.push(Conv::same(&mut store, &mut rng, &format!("bd.conv{i}"), c_in, c, 3, 1)?);
        }
        layers.push(Conv::same(&mut store, &mut rng, "bd.out", c, 1, 3, 1)?);
        let net = Self {
            config: config.clone(),
            store,
            layers,
        };
        let a = config.alpha;
        let y = net.forward(
            &Ctx::new(&net.store.bind()),
            &Var::constant(Tensor::zeros([1, 1, a, a])),
        )?;
        if y.shape() != [1, 1, 1, 1] {
            return Err(Error::Contract(format!("BD shape check produced {:?}", y.shape())));
        }
        Ok(net)
    }

    /// `[n, 1, α·H, α·W]` → `[n, 1, H, W]`.
    pub fn forward(&self, ctx: &Ctx<T>, x: &Var<T>) -> Result<Var<T>> {
        let a = self.config.alpha;
        let s = x.shape();
        if s.len() != 4 || s[1] != 1 || !s[2].is_multiple_of(a) || !s[3].is_multiple_of(a) {
            return Err(Error::dim(format!(
                "BD expects [n, 1, H, W] divisible by {a}, got {s:?}"
            )));
        }
        ctx.span("BD", &[x], || {
            let base = ctx.rearrange("Bicubic", RowKind::Resample, x, |v| {
                bicubic_resize_var(v, Scale::down(a))
            })?;
            let mut y = base.clone();
            let last = self.layers.len() - 1;
            for (i, l) in self.layers.iter().enumerate() {
                y = l.forward(ctx, &y)?;
                if i < last {
                    y = ctx.lrelu(&y)?;
                }
            }
            ctx.add(&y, &base)
        })
    }

    /// Applies [`BdNet::forward`] to every view of `[b, n, α·H, α·W]`.
    pub fn forward_views(&self, ctx: &Ctx<T>, views: &Var<T>) -> Result<Var<T>> {
        let [b, n, h, w] = views.value().dims()?;
        let a = self.config.alpha;
        let y = self.forward(ctx, &views.reshape([b * n, 1, h, w])?)?;
        y.reshape([b, n, h / a, w / a])
    }

    pub fn trace(&self, b: usize, h: usize, w: usize) -> Result<Trace> {
        let bound = self.store.bind();
        let ctx = Ctx::traced(&bound);
        self.forward(&ctx, &Var::constant(Tensor::zeros([b, 1, h, w])))?;
        Ok(ctx.into_trace().unwrap_or_default())
    }
}

impl<T: Element> Network<T> for BdNet<T> {
    fn kind(&self) -> NetKind {
        NetKind::Bd
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
