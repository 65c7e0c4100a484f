//! Synthetic hybrid light fields, dataset I/O and calibration fits.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use nalgebra::{DMatrix, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lightfield::{augment_image, luma, AngularPos, Augment, LightField};
use crate::resample::{bicubic_resize, sample_bicubic, Scale};
use crate::tensor::Tensor;

/// One training/evaluation unit: LR light field plus the HR central view.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSample {
    pub lf: LightField<f64>,
    /// `[C, α·H, α·W]`.
    pub hr_central: Tensor<f64>,
    pub alpha: usize,
    /// HR ground truth, for evaluation only.
    pub gt: Option<LightField<f64>>,
}

impl HybridSample {
    pub fn new(
        lf: LightField<f64>,
        hr_central: Tensor<f64>,
        alpha: usize,
        gt: Option<LightField<f64>>,
    ) -> Result<Self> {
        let [c, hh, hw] = hr_central.dims()?;
        if c != lf.channels() || hh != alpha * lf.height() || hw != alpha * lf.width() {
            return Err(Error::dim(format!(
                "HR image {:?} does not match LR views {}x{} at scale {alpha}",
                hr_central.shape(),
                lf.height(),
                lf.width()
            )));
        }
        if let Some(g) = &gt {
            if g.angular() != lf.angular() || g.height() != hh || g.width() != hw || g.channels() != c {
                return Err(Error::dim("ground truth does not match the hybrid sample"));
            }
        }
        Ok(Self {
            lf,
            hr_central,
            alpha,
            gt,
        })
    }

    pub fn augment(&self, op: Augment) -> Result<Self> {
        Ok(Self {
            lf: self.lf.augment(op)?,
            hr_central: augment_image(&self.hr_central, op)?,
            alpha: self.alpha,
            gt: self.gt.as_ref().map(|g| g.augment(op)).transpose()?,
        })
    }

    /// Luma-only copy; single-channel samples are returned unchanged.
    pub fn to_luma(&self) -> Result<Self> {
        if self.lf.channels() == 1 {
            return Ok(self.clone());
        }
        let lf_luma = |lf: &LightField<f64>| lf.map_views(luma);
        Ok(Self {
            lf: lf_luma(&self.lf)?,
            hr_central: luma(&self.hr_central)?,
            alpha: self.alpha,
            gt: self.gt.as_ref().map(lf_luma).transpose()?,
        })
    }
}

/// Parameters of one synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Source image `[C, Hs, Ws]` larger than the crop by the parallax margin.
    pub source: Tensor<f64>,
    /// Pixels of shift per angular step at HR scale.
    pub disparity: f64,
    pub angular: usize,
    /// Output HR view extent `(H, W)`.
    pub crop: (usize, usize),
}

/// Border needed around a crop for views shifted by up to `(A/2)·|d|` pixels.
pub fn required_margin(angular: usize, disparity: f64) -> usize {
    let shift = (angular / 2) as f64 * disparity.abs();
    let frac = shift.fract() != 0.0;
    shift.ceil() as usize + if frac { 2 } else { 0 }
}

/// Renders the HR light field: view `(u, v)` samples the source at the centred
/// crop translated by `((u − u0)·d, (v − v0)·d)`.
pub fn synthesize_lf(spec: &SceneSpec) -> Result<LightField<f64>> {
    let [c, sh, sw] = spec.source.dims()?;
    let (h, w) = spec.crop;
    let a = spec.angular;
    if a.is_multiple_of(2) || a == 0 {
        return Err(Error::dim(format!("angular extent must be odd, got {a}")));
    }
    if h == 0 || w == 0 || h > sh || w > sw {
        return Err(Error::dim(format!("crop {h}x{w} does not fit source {sh}x{sw}")));
    }
    let (y0, x0) = ((sh - h) / 2, (sw - w) / 2);
    let margin = required_margin(a, spec.disparity);
    if y0.min(x0).min(sh - h - y0).min(sw - w - x0) < margin {
        return Err(Error::dim(format!(
            "source {sh}x{sw} leaves less than the {margin}-pixel margin around a {h}x{w} crop"
        )));
    }
    let center = (a / 2) as i64;
    let mut views = Vec::with_capacity(a * a);
    for u in 0..a as i64 {
        for v in 0..a as i64 {
            let dy = (u - center) as f64 * spec.disparity;
            let dx = (v - center) as f64 * spec.disparity;
            let mut data = Vec::with_capacity(c * h * w);
            for ch in 0..c {
                let plane = &spec.source.data()[ch * sh * sw..(ch + 1) * sh * sw];
                for y in 0..h {
                    for x in 0..w {
                        let sy = (y0 + y) as f64 + dy;
                        let sx = (x0 + x) as f64 + dx;
                        data.push(sample_bicubic(plane, sh, sw, sy, sx).clamp(0.0, 1.0));
                    }
                }
            }
            views.push(Tensor::new([c, h, w], data)?);
        }
    }
    LightField::from_views(a, &views)
}

/// Bicubic-downsamples every view by `alpha`, keeps the HR central view, and
/// adds Gaussian noise of standard deviation `sigma` to the LR views.
pub fn degrade_to_hybrid(gt: &LightField<f64>, alpha: usize, sigma: f64, rng: &mut impl Rng) -> Result<HybridSample> {
    if alpha == 0 || !gt.height().is_multiple_of(alpha) || !gt.width().is_multiple_of(alpha) {
        return Err(Error::dim(format!(
            "HR extents {}x{} are not divisible by {alpha}",
            gt.height(),
            gt.width()
        )));
    }
    let noise = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("noise level: {e}")))?)
    } else {
        None
    };
    let lf = gt.map_views(|v| {
        let mut lr = bicubic_resize(v, Scale::down(alpha))?;
        if let Some(n) = &noise {
            for p in lr.data_mut() {
                *p += n.sample(rng);
            }
        }
        Ok(lr.map(|p| p.clamp(0.0, 1.0)))
    })?;
    let hr_central = gt.view(AngularPos::center(gt.angular()))?;
    HybridSample::new(lf, hr_central, alpha, Some(gt.clone()))
}

/// Procedural texture `[channels, h, w]` in `[0, 1]`: oriented sinusoids with
/// energy up to 0.45 cycles/pixel, plus soft-edged discs and bars.
pub fn procedural_texture(h: usize, w: usize, channels: usize, rng: &mut impl Rng) -> Tensor<f64> {
    struct Wave {
        fy: f64,
        fx: f64,
        phase: f64,
        amp: f64,
    }
    struct Blob {
        cy: f64,
        cx: f64,
        r: f64,
        bar: bool,
        amp: f64,
    }
    let waves: Vec<Wave> = (0..8)
        .map(|_| {
            let f = rng.gen_range(0.03..0.45);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            Wave {
                fy: f * theta.sin(),
                fx: f * theta.cos(),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                amp: rng.gen_range(0.3..1.0),
            }
        })
        .collect();
    let blobs: Vec<Blob> = (0..10)
        .map(|_| Blob {
            cy: rng.gen_range(0.0..h as f64),
            cx: rng.gen_range(0.0..w as f64),
            r: rng.gen_range(3.0..(h.min(w) as f64 / 4.0).max(4.0)),
            bar: rng.gen_bool(0.3),
            amp: rng.gen_range(-1.0..1.0),
        })
        .collect();
    let tints: Vec<f64> = (0..channels).map(|_| rng.gen_range(0.7..1.0)).collect();
    let mut base = vec![0.0; h * w];
    for (i, b) in base.iter_mut().enumerate() {
        let (y, x) = ((i / w) as f64, (i % w) as f64);
        let mut s = 0.0;
        for wv in &waves {
            s += wv.amp * (std::f64::consts::TAU * (wv.fy * y + wv.fx * x) + wv.phase).sin();
        }
        for bl in &blobs {
            let d = if bl.bar {
                (x - bl.cx).abs() - bl.r * 0.3
            } else {
                ((y - bl.cy).powi(2) + (x - bl.cx).powi(2)).sqrt() - bl.r
            };
            s += 1.5 * bl.amp / (1.0 + (d / 0.7).exp());
        }
        *b = s;
    }
    let (lo, hi) = base
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-12);
    Tensor::from_fn([channels, h, w], |i| {
        let (c, p) = (i / (h * w), i % (h * w));
        0.05 + 0.9 * ((base[p] - lo) / span) * tints[c]
    })
}

/// Settings shared by every scene of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub scenes: usize,
    pub angular: usize,
    pub alpha: usize,
    /// HR view extent.
    pub hr_size: (usize, usize),
    /// Cycled over scenes.
    pub disparities: Vec<f64>,
    pub channels: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scenes: 8,
            angular: 3,
            alpha: 2,
            hr_size: (128, 128),
            disparities: vec![0.5, 1.0],
            channels: 3,
            sigma: 0.0,
            seed: 7,
        }
    }
}

pub fn scene_rng(seed: u64, scene: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scene as u64 + 1);
    rng
}

/// Generates `cfg.scenes` hybrid samples with ground truth.
pub fn synthesize_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.disparities.is_empty() {
        return Err(Error::Config("at least one disparity is required".into()));
    }
    if cfg.channels != 1 && cfg.channels != 3 {
        return Err(Error::Config(format!("channels must be 1 or 3, got {}", cfg.channels)));
    }
    let mut samples = Vec::with_capacity(cfg.scenes);
    let mut disparities = Vec::with_capacity(cfg.scenes);
    for k in 0..cfg.scenes {
        let mut rng = scene_rng(cfg.seed, k);
        let d = cfg.disparities[k % cfg.disparities.len()];
        let m = required_margin(cfg.angular, d) + 2;
        let (h, w) = cfg.hr_size;
        let source = procedural_texture(h + 2 * m, w + 2 * m, cfg.channels, &mut rng);
        let gt = synthesize_lf(&SceneSpec {
            source,
            disparity: d,
            angular: cfg.angular,
            crop: (h, w),
        })?;
        samples.push(degrade_to_hybrid(&gt, cfg.alpha, cfg.sigma, &mut rng)?);
        disparities.push(d);
    }
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        angular: cfg.angular,
        height: cfg.hr_size.0 / cfg.alpha,
        width: cfg.hr_size.1 / cfg.alpha,
        alpha: cfg.alpha,
        color_space: if cfg.channels == 3 {
            ColorSpace::Rgb
        } else {
            ColorSpace::Y
        },
        sigma: cfg.sigma,
        seed: cfg.seed,
        bit_depth: 16,
        scenes: disparities
            .into_iter()
            .enumerate()
            .map(|(k, d)| SceneEntry {
                name: format!("scene_{k}"),
                disparity: Some(d),
                has_gt: true,
            })
            .collect(),
    };
    Ok(Dataset { manifest, samples })
}

/// Least-squares `3×4` colour transform: `ref ≈ M · [src; 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorCorrection {
    pub matrix: [[f64; 4]; 3],
    pub rms: f64,
}

impl ColorCorrection {
    pub fn apply(&self, rgb: [f64; 3]) -> [f64; 3] {
        self.matrix
            .map(|r| r[0] * rgb[0] + r[1] * rgb[1] + r[2] * rgb[2] + r[3])
    }
}

/// Least-squares `2×3` point transform: `dst ≈ M · [x, y, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineAlignment {
    pub matrix: [[f64; 3]; 2],
    pub rms: f64,
}

impl AffineAlignment {
    pub fn identity() -> Self {
        Self {
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            rms: 0.0,
        }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        self.matrix.map(|r| r[0] * p[0] + r[1] * p[1] + r[2])
    }

    fn inverse(&self) -> Result<[[f64; 3]; 2]> {
        let [[a, b, tx], [c, d, ty]] = self.matrix;
        let det = a * d - b * c;
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateFit("affine transform is singular".into()));
        }
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        Ok([[ia, ib, -(ia * tx + ib * ty)], [ic, id, -(ic * tx + id * ty)]])
    }
}

/// Solves `design · X ≈ rhs` by SVD, rejecting rank-deficient designs.
fn least_squares(design: DMatrix<f64>, rhs: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (n, k) = design.shape();
    if n < k {
        return Err(Error::DegenerateFit(format!(
            "{n} samples cannot determine {k} unknowns"
        )));
    }
    let svd = SVD::new(design.clone(), true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 || smin / smax < 1e-10 {
        return Err(Error::DegenerateFit(format!(
            "design matrix is rank deficient (condition {:.3e})",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let x = svd.solve(&rhs, 0.0).map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let resid = &design * &x - rhs;
    let rms = (resid.norm_squared() / resid.len() as f64).sqrt();
    Ok((x, rms))
}

/// Fits the colour transform from paired samples (`n ≥ 4`, full-rank design).
pub fn fit_color_lsa(src: &[[f64; 3]], reference: &[[f64; 3]]) -> Result<ColorCorrection> {
    if src.len() != reference.len() {
        return Err(Error::dim("colour sample lists differ in length"));
    }
    let n = src.len();
    let design = DMatrix::from_fn(n, 4, |i, j| if j < 3 { src[i][j] } else { 1.0 });
    let rhs = DMatrix::from_fn(n, 3, |i, j| reference[i][j]);
    let (x, rms) = least_squares(design, rhs)?;
    let mut matrix = [[0.0; 4]; 3];
    for (r, row) in matrix.iter_mut().enumerate() {
        for (c, m) in row.iter_mut().enumerate() {
            *m = x[(c, r)];
        }
    }
    Ok(ColorCorrection { matrix, rms })
}

/// Fits the point transform from `n ≥ 3` non-collinear correspondences `[x, y]`.
pub fn fit_affine(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<AffineAlignment> {
    if src.len() != dst.len() {
        return Err(Error::dim("point lists differ in length"));
    }
    let n = src.len();
    let design = DMatrix::from_fn(n, 3, |i, j| if j < 2 { src[i][j] } else { 1.0 });
    let rhs = DMatrix::from_fn(n, 2, |i, j| dst[i][j]);
    let (x, rms) = least_squares(design, rhs)?;
    let mut matrix = [[0.0; 3]; 2];
    for (r, row) in matrix.iter_mut().enumerate() {
        for (c, m) in row.iter_mut().enumerate() {
            *m = x[(c, r)];
        }
    }
    Ok(AffineAlignment { matrix, rms })
}

/// Resamples `[C, H, W]` so that output pixel `q` reads input at `M⁻¹ q`
/// (pixel centres at integer `(x, y)`), bicubic with edge clamp.
pub fn warp_affine(img: &Tensor<f64>, align: &AffineAlignment, out_size: (usize, usize)) -> Result<Tensor<f64>> {
    let [c, h, w] = img.dims()?;
    let inv = AffineAlignment {
        matrix: align.inverse()?,
        rms: 0.0,
    };
    let (oh, ow) = out_size;
    Ok(Tensor::from_fn([c, oh, ow], |i| {
        let ch = i / (oh * ow);
        let (y, x) = ((i / ow) % oh, i % ow);
        let [sx, sy] = inv.apply([x as f64, y as f64]);
        sample_bicubic(&img.data()[ch * h * w..(ch + 1) * h * w], h, w, sy, sx)
    }))
}

pub const MANIFEST_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Y,
    Rgb,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Y => 1,
            ColorSpace::Rgb => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disparity: Option<f64>,
    pub has_gt: bool,
}

/// Top-level dataset description; `height`/`width` are LR view extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub angular: usize,
    pub height: usize,
    pub width: usize,
    pub alpha: usize,
    pub color_space: ColorSpace,
    pub sigma: f64,
    pub seed: u64,
    pub bit_depth: u8,
    #[serde(default, rename = "scene")]
    pub scenes: Vec<SceneEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Dataset(format!("manifest: {}", e.message())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Dataset(format!("manifest: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(Error::Dataset(format!(
                "unsupported manifest format version {}",
                self.format_version
            )));
        }
        if self.angular.is_multiple_of(2) || !(3..=9).contains(&self.angular) {
            return Err(Error::Dataset(format!(
                "angular extent {} must be odd, 3..=9",
                self.angular
            )));
        }
        if self.alpha == 0 || self.alpha > 8 {
            return Err(Error::Dataset(format!("scale {} out of range 1..=8", self.alpha)));
        }
        if self.height == 0 || self.width == 0 || self.height > 1 << 14 || self.width > 1 << 14 {
            return Err(Error::Dataset(format!(
                "view extent {}x{} out of range",
                self.height, self.width
            )));
        }
        if self.bit_depth != 8 && self.bit_depth != 16 {
            return Err(Error::Dataset(format!("bit depth {} must be 8 or 16", self.bit_depth)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Dataset("noise level must be finite and non-negative".into()));
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.scenes {
            if s.name.is_empty() || s.name.contains(['/', '\\']) || s.name.starts_with('.') {
                return Err(Error::Dataset(format!("invalid scene name {:?}", s.name)));
            }
            if !names.insert(s.name.as_str()) {
                return Err(Error::Dataset(format!("scene name {:?} appears twice", s.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Vec<HybridSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Luma-only copy of every sample.
    pub fn to_luma(&self) -> Result<Self> {
        let mut manifest = self.manifest.clone();
        manifest.color_space = ColorSpace::Y;
        Ok(Self {
            manifest,
            samples: self.samples.iter().map(HybridSample::to_luma).collect::<Result<_>>()?,
        })
    }
}

fn view_name(p: AngularPos) -> String {
    format!("view_{}_{}.png", p.u, p.v)
}

pub fn write_png(path: &Path, img: &Tensor<f64>, bit_depth: u8) -> Result<()> {
    let [c, h, w] = img.dims()?;
    let (h32, w32) = (h as u32, w as u32);
    let img_err = |e: image::ImageError| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let interleave = |scale: f64| -> Vec<f64> {
        let d = img.data();
        (0..h * w)
            .flat_map(|p| (0..c).map(move |ch| (d[ch * h * w + p].clamp(0.0, 1.0) * scale).round()))
            .collect()
    };
    let wide = || -> Vec<u16> { interleave(65535.0).into_iter().map(|v| v as u16).collect() };
    let narrow = || -> Vec<u8> { interleave(255.0).into_iter().map(|v| v as u8).collect() };
    let res = match (c, bit_depth) {
        (1, 16) => ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w32, h32, wide()).map(|b| b.save(path)),
        (3, 16) => ImageBuffer::<Rgb<u16>, Vec<u16>>::from_raw(w32, h32, wide()).map(|b| b.save(path)),
        (1, 8) => ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(w32, h32, narrow()).map(|b| b.save(path)),
        (3, 8) => ImageBuffer::<Rgb<u8>, Vec<u8>>::from_raw(w32, h32, narrow()).map(|b| b.save(path)),
        _ => {
            return Err(Error::Format(format!(
                "cannot write {c}-channel image at {bit_depth} bits"
            )))
        }
    };
    res.expect("buffer size matches extents").map_err(img_err)
}

/// Reads an 8- or 16-bit PNG as `[channels, H, W]` in `[0, 1]`.
pub fn read_png(path: &Path, channels: usize) -> Result<Tensor<f64>> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw: Vec<u16> = match channels {
        1 => img.into_luma16().into_raw(),
        3 => img.into_rgb16().into_raw(),
        _ => return Err(Error::Format(format!("unsupported channel count {channels}"))),
    };
    Ok(Tensor::from_fn([channels, h, w], |i| {
        let (ch, p) = (i / (h * w), i % (h * w));
        raw[p * channels + ch] as f64 / 65535.0
    }))
}

/// Writes every view as `view_u_v.png` (1-based angular indices) into `dir`.
pub fn write_light_field(dir: &Path, lf: &LightField<f64>, bit_depth: u8) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (p, v) in lf.positions().into_iter().zip(lf.views()) {
        write_png(&dir.join(view_name(p)), &v, bit_depth)?;
    }
    Ok(())
}

/// Reads the `a × a` views written by [`write_light_field`].
pub fn read_light_field(dir: &Path, a: usize, channels: usize, size: (usize, usize)) -> Result<LightField<f64>> {
    let mut views = Vec::with_capacity(a * a);
    for u in 1..=a {
        for v in 1..=a {
            let path = dir.join(view_name(AngularPos::new(u, v)));
            let img = read_png(&path, channels)?;
            check_size(&path, &img, size)?;
            views.push(img);
        }
    }
    LightField::from_views(a, &views)
}

fn check_size(path: &Path, img: &Tensor<f64>, (h, w): (usize, usize)) -> Result<()> {
    let s = img.shape();
    if s[1] != h || s[2] != w {
        return Err(Error::Dataset(format!(
            "{} is {}x{}, manifest expects {h}x{w}",
            path.display(),
            s[1],
            s[2]
        )));
    }
    Ok(())
}

/// Writes `manifest.toml` plus `scene_k/` directories of PNG views.
pub fn save_dataset(dataset: &Dataset, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    let m = &dataset.manifest;
    m.validate()?;
    if m.scenes.len() != dataset.samples.len() {
        return Err(Error::Dataset("manifest scene list does not match the samples".into()));
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for (entry, s) in m.scenes.iter().zip(&dataset.samples) {
        if s.lf.angular() != m.angular
            || s.lf.height() != m.height
            || s.lf.width() != m.width
            || s.alpha != m.alpha
            || s.lf.channels() != m.color_space.channels()
        {
            return Err(Error::Dataset(format!("{} does not match the manifest", entry.name)));
        }
        let dir = root.join(&entry.name);
        write_light_field(&dir, &s.lf, m.bit_depth)?;
        write_png(&dir.join("hr_central.png"), &s.hr_central, m.bit_depth)?;
        if let Some(gt) = &s.gt {
            write_light_field(&dir.join("gt"), gt, m.bit_depth)?;
        }
    }
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, m.to_toml()?).map_err(|e| Error::io(path, e))
}

pub fn manifest_path(root: &Path) -> PathBuf {
    root.join(MANIFEST_FILE)
}

pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let path = manifest_path(root);
    if !path.is_file() {
        return Err(Error::Dataset(format!("missing manifest at {}", path.display())));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = Manifest::parse(&text)?;
    if manifest.scenes.is_empty() {
        return Err(Error::Dataset("dataset has no scenes".into()));
    }
    let (a, c, al) = (manifest.angular, manifest.color_space.channels(), manifest.alpha);
    let lr = (manifest.height, manifest.width);
    let hr = (lr.0 * al, lr.1 * al);
    let mut samples = Vec::with_capacity(manifest.scenes.len());
    for entry in &manifest.scenes {
        let dir = root.join(&entry.name);
        let lf = read_light_field(&dir, a, c, lr)?;
        let hr_path = dir.join("hr_central.png");
        let hr_central = read_png(&hr_path, c)?;
        check_size(&hr_path, &hr_central, hr)?;
        let gt = if entry.has_gt {
            Some(read_light_field(&dir.join("gt"), a, c, hr)?)
        } else {
            None
        };
        samples.push(HybridSample::new(lf, hr_central, al, gt)?);
    }
    Ok(Dataset { manifest, samples })
}
