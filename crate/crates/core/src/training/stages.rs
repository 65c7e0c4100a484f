use crate::datagen::HybridSample;
use crate::error::{Error, Result};
use crate::lightfield::{AngularPos, LightField, ViewGrouping};
use crate::networks::{BdNet, Ctx, CvsNet, GroupMode, HlfssrNet, Network};
use crate::tensor::{Element, Tensor, Var};

use super::losses::{loss_bd, loss_cvs, loss_epi, loss_hr, EpiSelection};
use super::runner::{run_stage, StageOutput, StageReport};
use super::{Batch, Stage, TrainConfig};

/// Objective of one step. Terms a stage does not use are `None`.
#[derive(Debug, Clone)]
pub struct StepLoss<T: Element> {
    pub total: Var<T>,
    pub l_hr: Option<f64>,
    pub l_epi: Option<f64>,
}

impl<T: Element> StepLoss<T> {
    fn single(total: Var<T>) -> Self {
        Self {
            total,
            l_hr: None,
            l_epi: None,
        }
    }
}

fn center_index(a: usize) -> usize {
    (a * a) / 2
}

fn dataset_geometry(samples: &[HybridSample]) -> Result<(usize, usize)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Dataset("the training set is empty".into()))?;
    let (a, al) = (first.lf.angular(), first.alpha);
    if samples.iter().any(|s| s.lf.angular() != a || s.alpha != al) {
        return Err(Error::Dataset("samples differ in angular size or scale".into()));
    }
    Ok((a, al))
}

/// Pre-trains the central-view synthesis network on LR light fields: side
/// views in, LR central view out.
pub fn pretrain_cvs<T: Element>(
    net: &mut CvsNet<T>,
    samples: &[HybridSample],
    cfg: &TrainConfig,
    out: &StageOutput,
) -> Result<StageReport> {
    let (a, _) = dataset_geometry(samples)?;
    let grouping = cfg.view_grouping(a)?;
    let c = center_index(a);
    run_stage(net, Stage::Cvs, samples, cfg, out, |net, ctx, batch| {
        let views = Var::constant(batch.lf.clone());
        let target = views.select(1, &[c])?;
        let pred = net.forward(ctx, &views, &grouping, GroupMode::All)?;
        Ok(StepLoss::single(loss_cvs(&pred, &target)?))
    })
}

/// Pre-trains the backward degradation network: HR central image in, LR
/// central view out.
pub fn pretrain_bd<T: Element>(
    net: &mut BdNet<T>,
    samples: &[HybridSample],
    cfg: &TrainConfig,
    out: &StageOutput,
) -> Result<StageReport> {
    let (a, al) = dataset_geometry(samples)?;
    if al != net.config().alpha {
        return Err(Error::Config(format!(
            "BD network is built for scale {}, the data has scale {al}",
            net.config().alpha
        )));
    }
    let c = center_index(a);
    run_stage(net, Stage::Bd, samples, cfg, out, |net, ctx, batch| {
        let target = Var::constant(batch.lf.clone()).select(1, &[c])?;
        let pred = net.forward(ctx, &Var::constant(batch.hr.clone()))?;
        Ok(StepLoss::single(loss_bd(&pred, &target)?))
    })
}

/// Forward pass and objective of the unsupervised stage for one batch.
///
/// The super-resolved views feed the frozen CVS network (HR-aware loss
/// against the HR image) and the frozen BD network (EPI-gradient loss
/// against the LR input). Disabled terms are neither computed nor logged.
pub fn hlfssr_losses<T: Element>(
    net: &HlfssrNet<T>,
    ctx: &Ctx<T>,
    cvs: &CvsNet<T>,
    bd: &BdNet<T>,
    grouping: &ViewGrouping,
    batch: &Batch<T>,
    cfg: &TrainConfig,
) -> Result<StepLoss<T>> {
    let a = net.config().angular;
    let lf = Var::constant(batch.lf.clone());
    let hr = Var::constant(batch.hr.clone());
    let sr = net.forward(ctx, &lf, &hr)?;
    let mut terms = Vec::new();
    let mut l_hr = None;
    let mut l_epi = None;
    if cfg.ablation.use_hr_loss {
        let bound = cvs.store().bind();
        let central = cvs.forward(&Ctx::new(&bound), &sr, grouping, GroupMode::All)?;
        let l = loss_hr(&hr, &central)?;
        l_hr = Some(l.value().item()?.as_f64());
        terms.push(l);
    }
    if cfg.ablation.use_epi_loss {
        let bound = bd.store().bind();
        let degraded = bd.forward_views(&Ctx::new(&bound), &sr)?;
        let sel = EpiSelection {
            include_center: cfg.epi_include_center,
        };
        let l = loss_epi(&degraded, &lf, a, sel)?;
        l_epi = Some(l.value().item()?.as_f64());
        terms.push(l);
    }
    if cfg.central_weight > 0.0 {
        let central = sr.select(1, &[center_index(a)])?;
        terms.push(central.l1_mean(&hr)?.scale(cfg.central_weight)?);
    }
    let total = match terms.len() {
        0 => return Err(Error::Config("every loss term is disabled".into())),
        1 => terms.pop().expect("one term"),
        _ => Var::sum_of(&terms)?,
    };
    Ok(StepLoss { total, l_hr, l_epi })
}

/// Trains the hybrid super-resolution network against frozen copies of the
/// pre-trained CVS and BD networks.
pub fn train_hlfssr<T: Element>(
    net: &mut HlfssrNet<T>,
    cvs: &CvsNet<T>,
    bd: &BdNet<T>,
    samples: &[HybridSample],
    cfg: &TrainConfig,
    out: &StageOutput,
) -> Result<StageReport> {
    let (a, al) = dataset_geometry(samples)?;
    let nc = net.config();
    if a != nc.angular || al != nc.alpha {
        return Err(Error::Config(format!(
            "network is built for {}x{} views at scale {}, the data has {a}x{a} at scale {al}",
            nc.angular, nc.angular, nc.alpha
        )));
    }
    if bd.config().alpha != al {
        return Err(Error::Checkpoint(format!(
            "BD checkpoint is for scale {}, training uses {al}",
            bd.config().alpha
        )));
    }
    if !cfg.ablation.use_hr_loss && !cfg.ablation.use_epi_loss && cfg.central_weight == 0.0 {
        return Err(Error::Config("every loss term is disabled".into()));
    }
    let grouping = cfg.view_grouping(a)?;
    let mut cvs = cvs.clone();
    let mut bd = bd.clone();
    cvs.freeze();
    bd.freeze();
    run_stage(net, Stage::Hlfssr, samples, cfg, out, |net, ctx, batch| {
        hlfssr_losses(net, ctx, &cvs, &bd, &grouping, batch, cfg)
    })
}

/// Super-resolves the luma of a whole sample: `[A, A, 1, α·H, α·W]`.
pub fn infer_views<T: Element>(net: &HlfssrNet<T>, sample: &HybridSample) -> Result<LightField<f64>> {
    let luma = sample.to_luma()?;
    let (a, al) = (luma.lf.angular(), luma.alpha);
    let nc = net.config();
    if a != nc.angular || al != nc.alpha {
        return Err(Error::Config(format!(
            "network is built for {}x{} views at scale {}, the sample has {a}x{a} at scale {al}",
            nc.angular, nc.angular, nc.alpha
        )));
    }
    let lf = Var::constant(luma.lf.to_batch()?.cast::<T>());
    let [c, hh, hw] = luma.hr_central.dims()?;
    let hr = Var::constant(luma.hr_central.cast::<T>().reshape([1, c, hh, hw])?);
    let bound = net.store().bind();
    let sr = net.forward(&Ctx::new(&bound), &lf, &hr)?;
    let sr: Tensor<f64> = sr.value().cast();
    let lf = LightField::from_batch(&sr, 0)?;
    debug_assert_eq!(lf.view(AngularPos::center(a))?.shape(), &[1, hh, hw]);
    Ok(lf)
}
