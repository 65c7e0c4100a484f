use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::HybridSample;
use crate::error::{Error, Result};
use crate::networks::{Ctx, Network, NetworkMeta};
use crate::tensor::{backward, Adam, AdamConfig, Checkpoint, Element, ParamStore, Tensor};

use super::log::{read_loss_log, write_loss_log, LossRecord};
use super::stages::StepLoss;
use super::{crop_patch_pair, random_augment, Batch, Stage, TrainConfig};

/// Where a stage writes its artifacts. Without a directory the stage runs in
/// memory only.
#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub dir: Option<PathBuf>,
    /// Recorded in checkpoint metadata; resuming requires a match.
    pub config_hash: String,
    /// Continue from the stage's state file when one exists.
    pub resume: bool,
}

impl StageOutput {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_dir(dir: impl Into<PathBuf>, config_hash: impl Into<String>) -> Self {
        Self {
            dir: Some(dir.into()),
            config_hash: config_hash.into(),
            resume: false,
        }
    }

    /// Best-epoch network checkpoint.
    pub fn checkpoint_path(dir: &Path, stage: Stage) -> PathBuf {
        dir.join(format!("{stage}.ckpt"))
    }

    /// Resumable optimiser state.
    pub fn state_path(dir: &Path, stage: Stage) -> PathBuf {
        dir.join(format!("{stage}.state"))
    }

    pub fn log_path(dir: &Path, stage: Stage) -> PathBuf {
        dir.join(format!("{stage}_loss.csv"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub records: Vec<LossRecord>,
    /// Mean total loss of every epoch run so far, resumed epochs included.
    pub epoch_means: Vec<f64>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageState {
    stage: Stage,
    next_epoch: usize,
    global_step: u64,
    adam_step: u64,
    best_epoch: usize,
    best_loss: f64,
    epoch_means: Vec<f64>,
    config_hash: String,
}

const PARAM: &str = "param/";
const FIRST: &str = "adam.m/";
const SECOND: &str = "adam.v/";
const BEST: &str = "best/";

fn save_state<T: Element>(
    path: &Path,
    state: &StageState,
    params: &ParamStore<T>,
    adam: &Adam<T>,
    best: &ParamStore<T>,
) -> Result<()> {
    let (_, first, second) = adam.state();
    let mut store = ParamStore::new();
    for (i, p) in params.iter().enumerate() {
        store.add(format!("{PARAM}{}", p.name), p.value.clone())?;
        store.add(format!("{FIRST}{}", p.name), first[i].clone())?;
        store.add(format!("{SECOND}{}", p.name), second[i].clone())?;
    }
    for p in best.iter() {
        store.add(format!("{BEST}{}", p.name), p.value.clone())?;
    }
    let meta = toml::to_string(state).map_err(|e| Error::Checkpoint(format!("stage state: {e}")))?;
    Checkpoint::new(meta, store).save(path)
}

struct Restored<T: Element> {
    state: StageState,
    best: ParamStore<T>,
}

fn load_state<T: Element>(
    path: &Path,
    stage: Stage,
    hash: &str,
    params: &mut ParamStore<T>,
    adam: &mut Adam<T>,
) -> Result<Restored<T>> {
    let ck = Checkpoint::<T>::load(path)?;
    let state: StageState =
        toml::from_str(&ck.metadata).map_err(|e| Error::Checkpoint(format!("stage state: {}", e.message())))?;
    if state.stage != stage {
        return Err(Error::Checkpoint(format!(
            "{} holds {} state, expected {stage}",
            path.display(),
            state.stage
        )));
    }
    if state.config_hash != hash {
        return Err(Error::Checkpoint(format!(
            "{} was written by a different configuration",
            path.display()
        )));
    }
    let get = |prefix: &str, name: &str| -> Result<Tensor<T>> {
        ck.params
            .by_name(&format!("{prefix}{name}"))
            .map(|p| p.value.clone())
            .ok_or_else(|| Error::Checkpoint(format!("state is missing {prefix}{name}")))
    };
    let (mut first, mut second) = (Vec::new(), Vec::new());
    let mut best = params.clone();
    for (p, b) in params.iter_mut().zip(best.iter_mut()) {
        let value = get(PARAM, &p.name)?;
        let best_value = get(BEST, &p.name)?;
        if value.shape() != p.value.shape() || best_value.shape() != p.value.shape() {
            return Err(Error::Checkpoint(format!("state shape mismatch for {}", p.name)));
        }
        p.value = value;
        b.value = best_value;
        first.push(get(FIRST, &p.name)?);
        second.push(get(SECOND, &p.name)?);
    }
    adam.restore(state.adam_step, first, second)?;
    Ok(Restored { state, best })
}

/// Counter-based RNG for one step: independent of how many values earlier
/// steps consumed, so resumed runs replay the same stream.
pub(crate) fn step_rng(seed: u64, stage: Stage, epoch: usize, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stage.salt());
    rng.set_stream(((epoch as u64) << 32) | step);
    rng
}

fn epoch_order(seed: u64, stage: Stage, epoch: usize, items: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items).collect();
    let mut rng = step_rng(seed, stage, epoch, u32::MAX as u64);
    order.shuffle(&mut rng);
    order
}

/// Generic epoch loop shared by the three stages: patch sampling,
/// optimisation of `net`'s unfrozen parameters, logging, best-epoch
/// tracking and checkpointing. On return `net` holds its best-epoch
/// parameters.
pub(crate) fn run_stage<T: Element, N: Network<T>>(
    net: &mut N,
    stage: Stage,
    samples: &[HybridSample],
    cfg: &TrainConfig,
    out: &StageOutput,
    mut step: impl FnMut(&N, &Ctx<T>, &Batch<T>) -> Result<StepLoss<T>>,
) -> Result<StageReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Dataset("the training set is empty".into()));
    }
    let sc = *cfg.stage(stage);
    if sc.epochs == 0 {
        return Err(Error::Config(format!("{stage} stage needs at least one epoch")));
    }
    let adam_cfg = AdamConfig {
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.eps,
        schedule: sc.lr,
    };
    let seed = cfg.seed;
    let mut adam = Adam::new(adam_cfg, net.store());
    let items = samples.len() * cfg.patches_per_scene;
    let steps_per_epoch = items.div_ceil(cfg.batch_size);

    let mut state = StageState {
        stage,
        next_epoch: 0,
        global_step: 0,
        adam_step: 0,
        best_epoch: 0,
        best_loss: f64::INFINITY,
        epoch_means: Vec::new(),
        config_hash: out.config_hash.clone(),
    };
    let mut best = net.store().clone();
    let mut records = Vec::new();
    if let (Some(dir), true) = (&out.dir, out.resume) {
        let path = StageOutput::state_path(dir, stage);
        if path.exists() {
            let r = load_state(&path, stage, &out.config_hash, net.store_mut(), &mut adam)?;
            state = r.state;
            best = r.best;
            records = read_loss_log(&StageOutput::log_path(dir, stage))?;
            records.retain(|r| r.epoch < state.next_epoch);
            log::info!("{stage}: resuming at epoch {}", state.next_epoch);
        }
    }
    if let Some(dir) = &out.dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    for epoch in state.next_epoch..sc.epochs {
        let order = epoch_order(seed, stage, epoch, items);
        let mut sum = 0.0;
        for s in 0..steps_per_epoch {
            let mut rng = step_rng(seed, stage, epoch, s as u64);
            let chunk = &order[s * cfg.batch_size..((s + 1) * cfg.batch_size).min(items)];
            let patches = chunk
                .iter()
                .map(|&i| {
                    let p = crop_patch_pair(&samples[i / cfg.patches_per_scene], cfg.patch, &mut rng)?;
                    if cfg.augment {
                        random_augment(p, &mut rng)
                    } else {
                        Ok(p)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let batch = Batch::from_samples(&patches)?;
            let bound = net.store().bind();
            let loss = {
                let ctx = Ctx::new(&bound);
                step(net, &ctx, &batch)?
            };
            let total = loss.total.value().item()?.as_f64();
            if !total.is_finite() {
                return Err(Error::Numeric(format!(
                    "{stage} loss became {total} at epoch {epoch}, step {s} (l_hr {:?}, l_epi {:?}, lr {})",
                    loss.l_hr,
                    loss.l_epi,
                    sc.lr.lr_at(epoch)
                )));
            }
            let mut grads = backward(&loss.total)?;
            net.store_mut().collect_grads(&bound, &mut grads);
            adam.step(net.store_mut(), epoch)?;
            records.push(LossRecord {
                step: state.global_step,
                epoch,
                l_hr: loss.l_hr,
                l_epi: loss.l_epi,
                total,
                lr: adam.lr(),
            });
            state.global_step += 1;
            sum += total;
        }
        let mean = sum / steps_per_epoch as f64;
        state.epoch_means.push(mean);
        if mean < state.best_loss {
            state.best_loss = mean;
            state.best_epoch = epoch;
            best = net.store().clone();
        }
        state.next_epoch = epoch + 1;
        state.adam_step = adam.steps();
        log::info!("{stage}: epoch {epoch} mean loss {mean:.6}");
        if let Some(dir) = &out.dir {
            write_loss_log(&StageOutput::log_path(dir, stage), &records)?;
            save_state(&StageOutput::state_path(dir, stage), &state, net.store(), &adam, &best)?;
        }
    }

    net.store_mut().load_values(&best)?;
    let checkpoint = match &out.dir {
        Some(dir) => {
            let path = StageOutput::checkpoint_path(dir, stage);
            let meta = NetworkMeta {
                network: net.kind(),
                epoch: state.best_epoch,
                lr: sc.lr.lr_at(state.best_epoch),
                seed,
                config_hash: out.config_hash.clone(),
                loss: Some(state.best_loss),
                config: net.config().clone(),
            };
            net.save(&meta, &path)?;
            Some(path)
        }
        None => None,
    };
    Ok(StageReport {
        stage,
        records,
        epoch_means: state.epoch_means,
        best_epoch: state.best_epoch,
        best_loss: state.best_loss,
        checkpoint,
    })
}
