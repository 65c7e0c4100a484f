//! Central-view synthesis (CVS), backward degradation (BD) and hybrid
//! super-resolution (HLFSSR) networks.
//!
//! Every network owns a [`ParamStore`]; a forward pass binds it to graph
//! leaves through a [`Ctx`], which can also record a layer [`Trace`].
//! Constructors run a forward pass on a minimal input to check the shape
//! contract before returning.

mod bd;
mod cvs;
mod distg;
mod hlfssr;
mod layers;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bd::BdNet;
pub use cvs::{CvsNet, GroupMode};
pub use distg::DistgBlockNet;
pub use hlfssr::HlfssrNet;
pub use layers::{Ctx, RowKind, Trace, TraceRow, LRELU_SLOPE};

use crate::error::{Error, Result};
use crate::tensor::{Checkpoint, Element, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Cvs,
    Bd,
    Hlfssr,
}

impl std::fmt::Display for NetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NetKind::Cvs => "cvs",
            NetKind::Bd => "bd",
            NetKind::Hlfssr => "hlfssr",
        })
    }
}

/// Architecture hyper-parameters shared by the three networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Angular extent `A` of the light field.
    pub angular: usize,
    /// Spatial scale factor `α`.
    pub alpha: usize,
    /// HLFSSR feature channels.
    pub channels: usize,
    /// Distg-Blocks per Distg-Group.
    pub blocks_per_group: usize,
    /// Distg-Groups in the 4D branch.
    pub groups_4d: usize,
    /// Hidden channels of the final fusion conv pair.
    pub fusion_channels: usize,
    pub cvs_channels: usize,
    pub cvs_groups: usize,
    pub cvs_blocks: usize,
    pub bd_channels: usize,
    /// Number of `C`-channel conv layers before the output conv.
    pub bd_layers: usize,
    /// Start HLFSSR from a zero residual (output = bicubic upsampling).
    pub zero_init_output: bool,
    /// CVS predicts a residual over the mean of each 2×2 group.
    pub cvs_mean_skip: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            angular: 3,
            alpha: 2,
            channels: 64,
            blocks_per_group: 4,
            groups_4d: 4,
            fusion_channels: 16,
            cvs_channels: 64,
            cvs_groups: 4,
            cvs_blocks: 3,
            bd_channels: 64,
            bd_layers: 10,
            zero_init_output: true,
            cvs_mean_skip: true,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.angular.is_multiple_of(2) || !(3..=9).contains(&self.angular) {
            return bad(format!("angular extent {} must be odd, 3..=9", self.angular));
        }
        if !(1..=8).contains(&self.alpha) {
            return bad(format!("scale {} out of range 1..=8", self.alpha));
        }
        for (name, c) in [("channels", self.channels), ("cvs_channels", self.cvs_channels)] {
            if c < 4 || c % 4 != 0 || c > 1024 {
                return bad(format!("{name} = {c} must be a multiple of 4 in 4..=1024"));
            }
        }
        if self.fusion_channels == 0 || self.bd_channels == 0 || self.fusion_channels > 1024 || self.bd_channels > 1024
        {
            return bad("fusion_channels and bd_channels must be in 1..=1024".into());
        }
        if self.blocks_per_group > 64
            || self.groups_4d > 64
            || self.cvs_groups > 64
            || self.cvs_blocks > 64
            || self.bd_layers > 64
        {
            return bad("layer counts must not exceed 64".into());
        }
        if self.bd_layers == 0 {
            return bad("bd_layers must be at least 1".into());
        }
        Ok(())
    }
}

/// Checkpoint metadata, stored as TOML in the checkpoint header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkMeta {
    pub network: NetKind,
    pub epoch: usize,
    pub lr: f64,
    pub seed: u64,
    /// SHA-256 of the resolved run configuration.
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    pub config: NetworkConfig,
}

impl NetworkMeta {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Checkpoint(format!("metadata: {}", e.message())))
    }
}

pub trait Network<T: Element> {
    fn kind(&self) -> NetKind;
    fn config(&self) -> &NetworkConfig;
    fn store(&self) -> &ParamStore<T>;
    fn store_mut(&mut self) -> &mut ParamStore<T>;

    /// Marks every parameter frozen: forward is unchanged, backward treats
    /// the parameters as constants and the optimizer skips them.
    fn freeze(&mut self) {
        self.store_mut().freeze_all();
    }

    fn save(&self, meta: &NetworkMeta, path: &Path) -> Result<()> {
        if meta.network != self.kind() || &meta.config != self.config() {
            return Err(Error::Contract(
                "checkpoint metadata does not describe this network".into(),
            ));
        }
        Checkpoint::new(meta.to_toml()?, self.store().clone()).save(path)
    }
}

/// Reads a checkpoint and checks that it holds a `kind` network.
pub fn read_checkpoint<T: Element>(path: &Path, kind: NetKind) -> Result<(NetworkMeta, ParamStore<T>)> {
    let ck = Checkpoint::<T>::load(path)?;
    let meta = NetworkMeta::parse(&ck.metadata)?;
    if meta.network != kind {
        return Err(Error::Checkpoint(format!(
            "{} holds a {} network, expected {kind}",
            path.display(),
            meta.network
        )));
    }
    Ok((meta, ck.params))
}

macro_rules! impl_load {
    ($net:ident, $kind:expr) => {
        impl<T: Element> $net<T> {
            /// Rebuilds the network described by a checkpoint and restores its parameters.
            pub fn load(path: &Path) -> Result<(Self, NetworkMeta)> {
                let (meta, params) = read_checkpoint::<T>(path, $kind)?;
                let mut net = Self::new(&meta.config, 0)?;
                net.store_mut().load_values(&params)?;
                Ok((net, meta))
            }
        }
    };
}

impl_load!(CvsNet, NetKind::Cvs);
impl_load!(BdNet, NetKind::Bd);
impl_load!(HlfssrNet, NetKind::Hlfssr);
