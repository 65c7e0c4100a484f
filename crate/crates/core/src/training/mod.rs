//! The three training stages: CVS pre-training, BD pre-training and the
//! unsupervised HLFSSR stage, plus patch sampling and the loss log.

mod log;
pub mod losses;
mod runner;
mod stages;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::HybridSample;
use crate::error::{Error, Result};
use crate::lightfield::{crop_image, AngularPos, Augment, GroupingPattern, ViewGrouping};
use crate::tensor::{Element, StepDecay, Tensor};

pub use self::log::{read_loss_log, LossRecord};
pub use losses::{loss_bd, loss_cvs, loss_epi, loss_hr, EpiSelection};
pub use runner::{StageOutput, StageReport};
pub use stages::{hlfssr_losses, infer_views, pretrain_bd, pretrain_cvs, train_hlfssr, StepLoss};

/// Which network a stage optimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Cvs,
    Bd,
    Hlfssr,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Cvs => "cvs",
            Stage::Bd => "bd",
            Stage::Hlfssr => "hlfssr",
        }
    }

    /// Separates the RNG streams of the stages.
    fn salt(self) -> u64 {
        match self {
            Stage::Cvs => 0x6376_7300,
            Stage::Bd => 0x6264_0000,
            Stage::Hlfssr => 0x686c_6600,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Loss terms and structure toggles for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub use_epi_loss: bool,
    pub use_hr_loss: bool,
    /// Ring reorganisation of side views; off means index-order groups.
    pub use_reorg: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            use_epi_loss: true,
            use_hr_loss: true,
            use_reorg: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageConfig {
    pub epochs: usize,
    pub lr: StepDecay,
}

impl StageConfig {
    fn with_epochs(epochs: usize) -> Self {
        Self {
            epochs,
            lr: StepDecay::default(),
        }
    }
}

impl Default for StageConfig {
    fn default() -> Self {
        Self::with_epochs(50)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    /// LR patch side; the HR patch is `alpha` times larger.
    pub patch: usize,
    /// Patches drawn from every scene per epoch.
    pub patches_per_scene: usize,
    /// Random joint spatial and angular flips and quarter turns.
    pub augment: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub ablation: Ablation,
    /// Include the EPIs through the central angular row and column.
    pub epi_include_center: bool,
    /// Weight of an optional L1 term between the super-resolved central view
    /// and the HR image. Zero disables it.
    pub central_weight: f64,
    /// Explicit side-view groups, overriding the ring pattern.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grouping: Option<Vec<[AngularPos; 4]>>,
    pub cvs: StageConfig,
    pub bd: StageConfig,
    pub hlfssr: StageConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            batch_size: 4,
            patch: 32,
            patches_per_scene: 4,
            augment: true,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            ablation: Ablation::default(),
            epi_include_center: false,
            central_weight: 0.0,
            grouping: None,
            cvs: StageConfig::with_epochs(50),
            bd: StageConfig::with_epochs(50),
            hlfssr: StageConfig::with_epochs(100),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 || self.patches_per_scene == 0 {
            return bad("batch_size and patches_per_scene must be positive");
        }
        if self.patch < 2 {
            return bad("patch must be at least 2");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("Adam needs 0 <= beta < 1 and eps > 0");
        }
        if !(self.central_weight >= 0.0 && self.central_weight.is_finite()) {
            return bad("central_weight must be finite and non-negative");
        }
        for (name, s) in [("cvs", &self.cvs), ("bd", &self.bd), ("hlfssr", &self.hlfssr)] {
            if !(s.lr.initial > 0.0 && s.lr.initial.is_finite() && s.lr.factor > 0.0) {
                return Err(Error::Config(format!("{name} learning-rate schedule must be positive")));
            }
        }
        Ok(())
    }

    pub fn stage(&self, stage: Stage) -> &StageConfig {
        match stage {
            Stage::Cvs => &self.cvs,
            Stage::Bd => &self.bd,
            Stage::Hlfssr => &self.hlfssr,
        }
    }

    /// Side-view grouping implied by the ablation flags and overrides.
    pub fn view_grouping(&self, angular: usize) -> Result<ViewGrouping> {
        let pattern = match (&self.grouping, self.ablation.use_reorg) {
            (Some(g), _) => GroupingPattern::Explicit(g.clone()),
            (None, true) => GroupingPattern::Rings,
            (None, false) => GroupingPattern::IndexOrder,
        };
        ViewGrouping::new(angular, pattern)
    }
}

/// Crops a co-located LR/HR patch pair: an `patch × patch` window shared by
/// every view, and the `alpha`-scaled window of the HR image. Colour samples
/// are reduced to luma and ground truth is dropped.
pub fn crop_patch_pair(sample: &HybridSample, patch: usize, rng: &mut impl Rng) -> Result<HybridSample> {
    let (h, w) = (sample.lf.height(), sample.lf.width());
    if h < patch || w < patch {
        return Err(Error::dim(format!(
            "scene of {h}x{w} is smaller than the {patch}x{patch} patch"
        )));
    }
    let y0 = rng.gen_range(0..=h - patch);
    let x0 = rng.gen_range(0..=w - patch);
    crop_patch_at(sample, patch, y0, x0)
}

/// [`crop_patch_pair`] at a fixed LR origin.
pub fn crop_patch_at(sample: &HybridSample, patch: usize, y0: usize, x0: usize) -> Result<HybridSample> {
    let al = sample.alpha;
    let lf = sample.lf.crop(y0, x0, patch, patch)?;
    let hr = crop_image(&sample.hr_central, y0 * al, x0 * al, patch * al, patch * al)?;
    HybridSample::new(lf, hr, al, None)?.to_luma()
}

/// A training batch in network layout.
#[derive(Debug, Clone)]
pub struct Batch<T: Element> {
    /// `[b, A², p, p]`.
    pub lf: Tensor<T>,
    /// `[b, 1, α·p, α·p]`.
    pub hr: Tensor<T>,
}

impl<T: Element> Batch<T> {
    /// Stacks luma patch pairs of identical size.
    pub fn from_samples(samples: &[HybridSample]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Contract("empty batch".into()))?;
        let lf_shape = [first.lf.angular().pow(2), first.lf.height(), first.lf.width()];
        let hr_shape = first.hr_central.shape().to_vec();
        let (mut lf, mut hr) = (Vec::new(), Vec::new());
        for s in samples {
            if s.lf.channels() != 1 || s.hr_central.shape()[0] != 1 {
                return Err(Error::dim("training batches are single-channel"));
            }
            let views = s.lf.to_batch()?;
            if views.shape()[1..] != lf_shape || s.hr_central.shape() != hr_shape.as_slice() {
                return Err(Error::dim("batch samples differ in size"));
            }
            lf.extend(views.data().iter().map(|&v| T::from_f64(v)));
            hr.extend(s.hr_central.data().iter().map(|&v| T::from_f64(v)));
        }
        let b = samples.len();
        Ok(Self {
            lf: Tensor::new([b, lf_shape[0], lf_shape[1], lf_shape[2]], lf)?,
            hr: Tensor::new([b, 1, hr_shape[1], hr_shape[2]], hr)?,
        })
    }
}

/// Draws a random subset of the augmentation ops, applied in a fixed order.
pub(crate) fn random_augment(sample: HybridSample, rng: &mut impl Rng) -> Result<HybridSample> {
    let mut s = sample;
    for op in [Augment::HFlip, Augment::VFlip, Augment::Rot90] {
        if rng.gen_bool(0.5) {
            s = s.augment(op)?;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{degrade_to_hybrid, procedural_texture, synthesize_lf, SceneSpec};
    use crate::lightfield::LightField;
    use crate::resample::{bicubic_resize, Scale};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(h: usize) -> HybridSample {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = procedural_texture(2 * h + 8, 2 * h + 8, 1, &mut rng);
        let gt = synthesize_lf(&SceneSpec {
            source: src,
            disparity: 1.0,
            angular: 3,
            crop: (2 * h, 2 * h),
        })
        .unwrap();
        degrade_to_hybrid(&gt, 2, 0.0, &mut rng).unwrap()
    }

    #[test]
    fn origin_window_is_colocated() {
        let s = sample(40);
        let p = crop_patch_at(&s, 32, 0, 0).unwrap();
        assert_eq!(p.lf.height(), 32);
        assert_eq!(p.hr_central.shape(), &[1, 64, 64]);
        let luma = s.to_luma().unwrap();
        assert_eq!(p.hr_central, crop_image(&luma.hr_central, 0, 0, 64, 64).unwrap());
        assert!(p.gt.is_none());
    }

    #[test]
    fn random_windows_align_across_views_and_scales() {
        let s = sample(40);
        let luma = s.to_luma().unwrap();
        let gt = luma.gt.clone().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let p = crop_patch_pair(&s, 16, &mut rng).unwrap();
            // Find the window by matching the central LR view.
            let c = crate::lightfield::AngularPos::center(3);
            let pc = p.lf.view(c).unwrap();
            let full = luma.lf.view(c).unwrap();
            let (y0, x0) = (0..=24)
                .flat_map(|y| (0..=24).map(move |x| (y, x)))
                .find(|&(y, x)| crop_image(&full, y, x, 16, 16).unwrap() == pc)
                .unwrap();
            assert_eq!(p.lf, luma.lf.crop(y0, x0, 16, 16).unwrap());
            assert_eq!(
                p.hr_central,
                crop_image(&luma.hr_central, 2 * y0, 2 * x0, 32, 32).unwrap()
            );
            // Degrading the cropped GT central view gives the cropped LR view
            // away from the resampling border.
            let gtc = crop_image(&gt.view(c).unwrap(), 2 * y0, 2 * x0, 32, 32).unwrap();
            let down = bicubic_resize(&gtc.reshape([1, 1, 32, 32]).unwrap(), Scale::down(2)).unwrap();
            let down = down.reshape([1, 16, 16]).unwrap();
            let inner = |t: &Tensor<f64>| crop_image(t, 3, 3, 10, 10).unwrap();
            assert!(inner(&down).max_abs_diff(&inner(&pc)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn undersized_scene_is_rejected() {
        let lf = LightField::new(Tensor::<f64>::zeros([3, 3, 1, 31, 31])).unwrap();
        let s = HybridSample::new(lf, Tensor::zeros([1, 62, 62]), 2, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(crop_patch_pair(&s, 32, &mut rng), Err(Error::Dimension(_))));
    }

    #[test]
    fn batches_stack_views() {
        let s = sample(20);
        let p = crop_patch_at(&s, 8, 1, 2).unwrap();
        let b = Batch::<f32>::from_samples(&[p.clone(), p.clone()]).unwrap();
        assert_eq!(b.lf.shape(), &[2, 9, 8, 8]);
        assert_eq!(b.hr.shape(), &[2, 1, 16, 16]);
        assert_eq!(b.lf.data()[9 * 64 + 5], p.lf.to_batch().unwrap().data()[5] as f32);
    }

    #[test]
    fn grouping_follows_flags() {
        let mut cfg = TrainConfig::default();
        assert_eq!(cfg.view_grouping(3).unwrap().pattern, GroupingPattern::Rings);
        cfg.ablation.use_reorg = false;
        assert_eq!(cfg.view_grouping(3).unwrap().pattern, GroupingPattern::IndexOrder);
    }
}
