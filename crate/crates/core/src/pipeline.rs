//! End-to-end runs: the three training stages in order, evaluation against
//! ground truth and the ablation matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::datagen::{Dataset, HybridSample};
use crate::error::{Error, Result};
use crate::lightfield::{rgb_to_ycbcr, ycbcr_to_rgb, LightField};
use crate::metrics::{bicubic_baseline, evaluate_scene, EvalReport, MethodSummary, MetricsConfig, PerViewPsnr};
use crate::networks::{BdNet, CvsNet, HlfssrNet};
use crate::tensor::{Element, Tensor};
use crate::training::{infer_views, pretrain_bd, pretrain_cvs, train_hlfssr, Ablation, StageOutput, StageReport};

pub const BICUBIC: &str = "bicubic";
pub const MODEL: &str = "hlfssr";

/// Seeds of the three networks, derived from the training seed.
fn net_seeds(cfg: &RunConfig) -> (u64, u64, u64) {
    let s = cfg.train.seed;
    (s, s.wrapping_add(1), s.wrapping_add(2))
}

fn check_dataset(cfg: &RunConfig, dataset: &Dataset) -> Result<()> {
    let m = &dataset.manifest;
    if m.angular != cfg.network.angular || m.alpha != cfg.network.alpha {
        return Err(Error::Dataset(format!(
            "dataset holds {}x{} views at scale {}, the network expects {}x{} at scale {}",
            m.angular, m.angular, m.alpha, cfg.network.angular, cfg.network.angular, cfg.network.alpha
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Dataset("the dataset has no scenes".into()));
    }
    Ok(())
}

pub fn run_pretrain_cvs<T: Element>(
    cfg: &RunConfig,
    dataset: &Dataset,
    out: &StageOutput,
) -> Result<(CvsNet<T>, StageReport)> {
    check_dataset(cfg, dataset)?;
    let mut net = CvsNet::new(&cfg.network, net_seeds(cfg).0)?;
    let report = pretrain_cvs(&mut net, &dataset.samples, &cfg.train, out)?;
    Ok((net, report))
}

pub fn run_pretrain_bd<T: Element>(
    cfg: &RunConfig,
    dataset: &Dataset,
    out: &StageOutput,
) -> Result<(BdNet<T>, StageReport)> {
    check_dataset(cfg, dataset)?;
    let mut net = BdNet::new(&cfg.network, net_seeds(cfg).1)?;
    let report = pretrain_bd(&mut net, &dataset.samples, &cfg.train, out)?;
    Ok((net, report))
}

pub fn run_train<T: Element>(
    cfg: &RunConfig,
    dataset: &Dataset,
    cvs: &CvsNet<T>,
    bd: &BdNet<T>,
    out: &StageOutput,
) -> Result<(HlfssrNet<T>, StageReport)> {
    check_dataset(cfg, dataset)?;
    let mut net = HlfssrNet::new(&cfg.network, net_seeds(cfg).2)?;
    let report = train_hlfssr(&mut net, cvs, bd, &dataset.samples, &cfg.train, out)?;
    Ok((net, report))
}

/// Scores of one method over a dataset, with the per-view grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub per_view: Vec<(String, String, PerViewPsnr)>,
    pub metrics: MetricsConfig,
}

impl Evaluation {
    pub fn new(metrics: MetricsConfig) -> Self {
        Self {
            report: EvalReport::default(),
            per_view: Vec::new(),
            metrics,
        }
    }

    /// Scores `pred` against `gt` under `method`.
    pub fn push(&mut self, scene: &str, method: &str, pred: &LightField<f64>, gt: &LightField<f64>) -> Result<()> {
        let (scores, pv) = evaluate_scene(scene, method, pred, gt, &self.metrics)?;
        self.report.scenes.push(scores);
        self.per_view.push((scene.to_string(), method.to_string(), pv));
        Ok(())
    }

    pub fn summary(&self, method: &str) -> Result<MethodSummary> {
        self.report
            .summary(method)
            .ok_or_else(|| Error::Contract(format!("no scores for method {method}")))
    }
}

/// Evaluates the bicubic baseline and, when given, the network on every
/// scene's luma against its ground truth.
pub fn evaluate<T: Element>(
    net: Option<&HlfssrNet<T>>,
    dataset: &Dataset,
    metrics: &MetricsConfig,
) -> Result<Evaluation> {
    let mut ev = Evaluation::new(*metrics);
    for (entry, sample) in dataset.manifest.scenes.iter().zip(&dataset.samples) {
        let luma = sample.to_luma()?;
        let gt = luma
            .gt
            .as_ref()
            .ok_or_else(|| Error::Dataset(format!("scene {} has no ground truth", entry.name)))?;
        ev.push(&entry.name, BICUBIC, &bicubic_baseline(&luma.lf, luma.alpha)?, gt)?;
        if let Some(net) = net {
            ev.push(&entry.name, MODEL, &infer_views(net, &luma)?, gt)?;
        }
    }
    Ok(ev)
}

/// Super-resolves every view of `sample` at its native colour. The network
/// restores luma; the chroma of colour samples is bicubic-upsampled.
pub fn super_resolve<T: Element>(net: &HlfssrNet<T>, sample: &HybridSample) -> Result<LightField<f64>> {
    let y = infer_views(net, sample)?;
    if sample.lf.channels() == 1 {
        return Ok(y);
    }
    let chroma = bicubic_baseline(&sample.lf.map_views(rgb_to_ycbcr)?, sample.alpha)?;
    let ys = y.views();
    let mut views = Vec::with_capacity(ys.len());
    for (luma, cc) in ys.iter().zip(chroma.views()) {
        let n = luma.numel();
        let mut ycc = cc.into_data();
        ycc[..n].copy_from_slice(luma.data());
        let [_, h, w] = luma.dims()?;
        views.push(ycbcr_to_rgb(&Tensor::new([3, h, w], ycc)?)?);
    }
    LightField::from_views(y.angular(), &views)
}

/// The four flag combinations of the ablation study, full model last.
pub const ABLATION_MATRIX: [Ablation; 4] = [
    Ablation {
        use_epi_loss: true,
        use_hr_loss: true,
        use_reorg: false,
    },
    Ablation {
        use_epi_loss: false,
        use_hr_loss: true,
        use_reorg: true,
    },
    Ablation {
        use_epi_loss: true,
        use_hr_loss: false,
        use_reorg: false,
    },
    Ablation {
        use_epi_loss: true,
        use_hr_loss: true,
        use_reorg: true,
    },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub use_epi_loss: bool,
    pub use_hr_loss: bool,
    pub use_reorg: bool,
    pub psnr: f64,
    pub ssim: f64,
    pub epi_ssim: f64,
    /// Mean over scenes of the per-view PSNR variance.
    pub psnr_variance: f64,
}

impl AblationRow {
    pub fn flags(&self) -> Ablation {
        Ablation {
            use_epi_loss: self.use_epi_loss,
            use_hr_loss: self.use_hr_loss,
            use_reorg: self.use_reorg,
        }
    }
}

/// Results of the ablation matrix plus the bicubic reference.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationStudy {
    pub bicubic: MethodSummary,
    pub rows: Vec<AblationRow>,
}

impl AblationStudy {
    pub fn row(&self, flags: Ablation) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.flags() == flags)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for r in &self.rows {
            w.serialize(r)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs the ablation matrix. The guide networks are pre-trained once per
/// grouping (CVS with and without reorganisation, BD once) and shared by the
/// rows that use them. With `out`, each row writes its stage artifacts to
/// its own sub-directory.
pub fn run_ablation<T: Element>(
    cfg: &RunConfig,
    dataset: &Dataset,
    out: Option<&Path>,
    hash: &str,
) -> Result<AblationStudy> {
    check_dataset(cfg, dataset)?;
    let stage_out = |name: &str| match out {
        Some(dir) => StageOutput::to_dir(dir.join(name), hash),
        None => StageOutput::in_memory(),
    };
    let (bd, _) = run_pretrain_bd::<T>(cfg, dataset, &stage_out("guides"))?;
    let mut cvs_by_reorg: Vec<(bool, CvsNet<T>)> = Vec::new();
    let mut bicubic = None;
    let mut rows = Vec::new();
    for flags in ABLATION_MATRIX {
        let mut row_cfg = cfg.clone();
        row_cfg.train.ablation = flags;
        let cvs = match cvs_by_reorg.iter().find(|(r, _)| *r == flags.use_reorg) {
            Some((_, c)) => c.clone(),
            None => {
                let dir = if flags.use_reorg { "guides" } else { "guides_no_reorg" };
                let (c, _) = run_pretrain_cvs::<T>(&row_cfg, dataset, &stage_out(dir))?;
                cvs_by_reorg.push((flags.use_reorg, c.clone()));
                c
            }
        };
        let name = format!(
            "epi{}_hr{}_reorg{}",
            u8::from(flags.use_epi_loss),
            u8::from(flags.use_hr_loss),
            u8::from(flags.use_reorg)
        );
        let (net, _) = run_train(&row_cfg, dataset, &cvs, &bd, &stage_out(&name))?;
        let ev = evaluate(Some(&net), dataset, &MetricsConfig::default())?;
        let s = ev.summary(MODEL)?;
        if bicubic.is_none() {
            bicubic = Some(ev.summary(BICUBIC)?);
        }
        let (ssim, epi_ssim) = match (s.ssim, s.epi_ssim) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Contract("ablation scores are incomplete".into())),
        };
        log::info!("ablation {name}: PSNR {:.3} EPI-SSIM {epi_ssim:.4}", s.psnr);
        rows.push(AblationRow {
            use_epi_loss: flags.use_epi_loss,
            use_hr_loss: flags.use_hr_loss,
            use_reorg: flags.use_reorg,
            psnr: s.psnr,
            ssim,
            epi_ssim,
            psnr_variance: s.psnr_variance,
        });
    }
    Ok(AblationStudy {
        bicubic: bicubic.expect("matrix is not empty"),
        rows,
    })
}
