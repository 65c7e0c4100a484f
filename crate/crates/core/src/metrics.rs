//! Image and light-field quality metrics.
//!
//! All scores are computed on single-channel (luma) data in `[0, 1]`. Side
//! views are every view except the centre, which the hybrid input already
//! provides at full resolution.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::write_png;
use crate::error::{Error, Result};
use crate::lightfield::{extract_epi, AngularPos, EpiOrientation, LightField};
use crate::resample::{bicubic_resize, Scale};
use crate::tensor::Tensor;

/// Which optional scores and artifacts an evaluation produces. PSNR is
/// always computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub ssim: bool,
    pub epi_ssim: bool,
    /// Per-view PSNR CSV and heatmap for every scene.
    pub per_view: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            ssim: true,
            epi_ssim: true,
            per_view: true,
        }
    }
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Peak signal-to-noise ratio in dB; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Tensor<f64>, b: &Tensor<f64>, peak: f64) -> Result<f64> {
    a.expect_same_shape(b)?;
    if a.numel() == 0 {
        return Err(Error::dim("PSNR of an empty image"));
    }
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.numel() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian(n: usize) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..n)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

fn plane(img: &Tensor<f64>) -> Result<(usize, usize)> {
    match img.shape() {
        [h, w] => Ok((*h, *w)),
        [1, h, w] => Ok((*h, *w)),
        s => Err(Error::dim(format!("SSIM needs a single-channel image, got {s:?}"))),
    }
}

/// Mean SSIM with a separable Gaussian window of `win = (rows, cols)` taps,
/// averaged over every window position fully inside the image.
pub fn ssim_windowed(a: &Tensor<f64>, b: &Tensor<f64>, win: (usize, usize)) -> Result<f64> {
    a.expect_same_shape(b)?;
    let (h, w) = plane(a)?;
    let (wh, ww) = win;
    if wh == 0 || ww == 0 || h < wh || w < ww {
        return Err(Error::dim(format!(
            "{h}x{w} image is smaller than the {wh}x{ww} SSIM window"
        )));
    }
    let (gy, gx) = (gaussian(wh), gaussian(ww));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (da, db) = (a.data(), b.data());
    let mut total = 0.0;
    for y0 in 0..=h - wh {
        for x0 in 0..=w - ww {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, &wy) in gy.iter().enumerate() {
                for (j, &wx) in gx.iter().enumerate() {
                    let k = (y0 + i) * w + x0 + j;
                    let g = wy * wx;
                    let (pa, pb) = (da[k], db[k]);
                    ma += g * pa;
                    mb += g * pb;
                    saa += g * (pa * pa);
                    sbb += g * (pb * pb);
                    sab += g * (pa * pb);
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * (ma * mb) + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / ((h - wh + 1) * (w - ww + 1)) as f64)
}

/// Mean SSIM with the standard 11×11 Gaussian window (σ = 1.5).
pub fn ssim(a: &Tensor<f64>, b: &Tensor<f64>) -> Result<f64> {
    ssim_windowed(a, b, (SSIM_WINDOW, SSIM_WINDOW))
}

fn single_channel_pair(a: &LightField<f64>, b: &LightField<f64>) -> Result<()> {
    if a.data().shape() != b.data().shape() {
        return Err(Error::dim(format!(
            "light fields differ in shape: {:?} vs {:?}",
            a.data().shape(),
            b.data().shape()
        )));
    }
    if a.channels() != 1 {
        return Err(Error::dim("metrics need single-channel light fields"));
    }
    Ok(())
}

/// SSIM of every side-view EPI: horizontal EPIs of the angular rows and
/// vertical EPIs of the angular columns that avoid the centre. Windows are
/// clipped to the EPI extent along each axis.
pub fn epi_ssim_values(a: &LightField<f64>, b: &LightField<f64>) -> Result<Vec<f64>> {
    single_channel_pair(a, b)?;
    let n = a.angular();
    let c = AngularPos::center(n);
    let mut out = Vec::new();
    for (orientation, spatial, skip) in [
        (EpiOrientation::Horizontal, a.height(), c.u),
        (EpiOrientation::Vertical, a.width(), c.v),
    ] {
        for ang in (1..=n).filter(|&k| k != skip || n == 1) {
            for s in 0..spatial {
                let ea = extract_epi(a, orientation, s, ang, 0)?;
                let eb = extract_epi(b, orientation, s, ang, 0)?;
                let [rows, cols] = ea.data.dims()?;
                let win = (rows.min(SSIM_WINDOW), cols.min(SSIM_WINDOW));
                out.push(ssim_windowed(&ea.data, &eb.data, win)?);
            }
        }
    }
    Ok(out)
}

/// Mean of [`epi_ssim_values`].
pub fn epi_ssim(a: &LightField<f64>, b: &LightField<f64>) -> Result<f64> {
    let v = epi_ssim_values(a, b)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// PSNR of every view on the angular grid; the centre cell is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerViewPsnr {
    pub angular: usize,
    pub grid: Vec<Vec<Option<f64>>>,
    /// Population variance over the finite side-view entries, 0 when none are finite.
    pub variance: f64,
}

impl PerViewPsnr {
    /// Side-view scores in row-major order.
    pub fn side_values(&self) -> Vec<f64> {
        self.grid.iter().flatten().filter_map(|v| *v).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
        w.write_record(["u", "v", "psnr"]).map_err(err)?;
        for (u, row) in self.grid.iter().enumerate() {
            for (v, cell) in row.iter().enumerate() {
                let value = cell.map(format_score).unwrap_or_default();
                w.write_record([(u + 1).to_string(), (v + 1).to_string(), value])
                    .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Grey-level heatmap, `cell` pixels per view: the lowest side-view
    /// score is black, the highest white, the centre cell mid-grey.
    pub fn heatmap(&self, cell: usize) -> Tensor<f64> {
        let values = self.side_values();
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n = self.angular;
        let side = n * cell;
        Tensor::from_fn([1, side, side], |i| {
            let (y, x) = (i / side, i % side);
            match self.grid[y / cell][x / cell] {
                None => 0.5,
                Some(v) if !v.is_finite() => 1.0,
                Some(_) if hi <= lo => 1.0,
                Some(v) => (v - lo) / (hi - lo),
            }
        })
    }

    pub fn write_heatmap(&self, path: &Path) -> Result<()> {
        write_png(path, &self.heatmap(16), 8)
    }
}

pub fn per_view_psnr(pred: &LightField<f64>, gt: &LightField<f64>) -> Result<PerViewPsnr> {
    single_channel_pair(pred, gt)?;
    let n = pred.angular();
    let c = AngularPos::center(n);
    let mut grid = vec![vec![None; n]; n];
    for p in pred.positions() {
        if p != c {
            grid[p.u - 1][p.v - 1] = Some(psnr(&pred.view(p)?, &gt.view(p)?, 1.0)?);
        }
    }
    let finite: Vec<f64> = grid
        .iter()
        .flatten()
        .filter_map(|v| *v)
        .filter(|v| v.is_finite())
        .collect();
    let variance = if finite.is_empty() {
        0.0
    } else {
        let m = finite.iter().sum::<f64>() / finite.len() as f64;
        finite.iter().map(|v| (v - m).powi(2)).sum::<f64>() / finite.len() as f64
    };
    Ok(PerViewPsnr {
        angular: n,
        grid,
        variance,
    })
}

/// Bicubic upsampling of every view, the reference baseline.
pub fn bicubic_baseline(lf: &LightField<f64>, alpha: usize) -> Result<LightField<f64>> {
    lf.map_views(|v| {
        let [c, h, w] = v.dims()?;
        let up = bicubic_resize(&v.clone().reshape([1, c, h, w])?, Scale::up(alpha))?;
        up.reshape([c, alpha * h, alpha * w])
    })
}

/// Scores of one light field against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScores {
    pub scene: String,
    pub method: String,
    /// Mean over side views with finite PSNR.
    pub psnr: f64,
    /// Side views whose PSNR is infinite (exact reconstructions), excluded from `psnr`.
    pub infinite_views: usize,
    /// Mean over side views; `None` when disabled.
    pub ssim: Option<f64>,
    pub epi_ssim: Option<f64>,
    pub psnr_variance: f64,
}

/// Full per-scene evaluation. `psnr` is infinite when every side view is exact.
pub fn evaluate_scene(
    scene: &str,
    method: &str,
    pred: &LightField<f64>,
    gt: &LightField<f64>,
    metrics: &MetricsConfig,
) -> Result<(SceneScores, PerViewPsnr)> {
    let pv = per_view_psnr(pred, gt)?;
    let values = pv.side_values();
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let psnr = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    let c = AngularPos::center(pred.angular());
    let mean_ssim = if metrics.ssim {
        let mut ssims = Vec::new();
        for p in pred.positions().into_iter().filter(|&p| p != c) {
            ssims.push(ssim(&pred.view(p)?, &gt.view(p)?)?);
        }
        Some(ssims.iter().sum::<f64>() / ssims.len() as f64)
    } else {
        None
    };
    let scores = SceneScores {
        scene: scene.to_string(),
        method: method.to_string(),
        psnr,
        infinite_views: values.len() - finite.len(),
        ssim: mean_ssim,
        epi_ssim: if metrics.epi_ssim {
            Some(epi_ssim(pred, gt)?)
        } else {
            None
        },
        psnr_variance: pv.variance,
    };
    Ok((scores, pv))
}

/// Per-scene scores of one or more methods plus per-method means.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenes: Vec<SceneScores>,
}

/// Arithmetic means of one method over its scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub scenes: usize,
    /// Mean over scenes with finite PSNR.
    pub psnr: f64,
    /// Scenes left out of `psnr` because every side view was exact.
    pub infinite_scenes: usize,
    /// `None` unless every scene has the score.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epi_ssim: Option<f64>,
    pub psnr_variance: f64,
}

fn format_score(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

impl EvalReport {
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.scenes {
            if !out.contains(&s.method) {
                out.push(s.method.clone());
            }
        }
        out
    }

    pub fn summary(&self, method: &str) -> Option<MethodSummary> {
        let rows: Vec<&SceneScores> = self.scenes.iter().filter(|s| s.method == method).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean = |f: fn(&SceneScores) -> f64| rows.iter().map(|s| f(s)).sum::<f64>() / n;
        let mean_opt = |f: fn(&SceneScores) -> Option<f64>| -> Option<f64> {
            rows.iter().map(|s| f(s)).sum::<Option<f64>>().map(|t| t / n)
        };
        let finite: Vec<f64> = rows.iter().map(|s| s.psnr).filter(|v| v.is_finite()).collect();
        Some(MethodSummary {
            method: method.to_string(),
            scenes: rows.len(),
            psnr: if finite.is_empty() {
                f64::INFINITY
            } else {
                finite.iter().sum::<f64>() / finite.len() as f64
            },
            infinite_scenes: rows.len() - finite.len(),
            ssim: mean_opt(|s| s.ssim),
            epi_ssim: mean_opt(|s| s.epi_ssim),
            psnr_variance: mean(|s| s.psnr_variance),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
        w.write_record([
            "scene",
            "method",
            "psnr",
            "infinite_views",
            "ssim",
            "epi_ssim",
            "psnr_variance",
        ])
        .map_err(err)?;
        for s in &self.scenes {
            w.write_record([
                s.scene.clone(),
                s.method.clone(),
                format_score(s.psnr),
                s.infinite_views.to_string(),
                s.ssim.map(|v| v.to_string()).unwrap_or_default(),
                s.epi_ssim.map(|v| v.to_string()).unwrap_or_default(),
                s.psnr_variance.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// TOML summary with one table per method. Infinite PSNR is written as `inf`.
    pub fn summary_toml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc {
            method: Vec<MethodSummary>,
        }
        let doc = Doc {
            method: self.methods().iter().filter_map(|m| self.summary(m)).collect(),
        };
        toml::to_string(&doc).map_err(|e| Error::Format(format!("summary: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{procedural_texture, scene_rng, synthesize_lf, SceneSpec};
    use proptest::prelude::*;

    fn img(h: usize, w: usize, seed: u64) -> Tensor<f64> {
        procedural_texture(h, w, 1, &mut scene_rng(seed, 0))
    }

    fn lf(disparity: f64, seed: u64) -> LightField<f64> {
        synthesize_lf(&SceneSpec {
            source: img(40, 40, seed),
            disparity,
            angular: 3,
            crop: (24, 24),
        })
        .unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = Tensor::full([1, 8, 8], 0.5);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let c = a.map(|v| v - 0.01);
        assert!((psnr(&a, &c, 1.0).unwrap() - 40.0).abs() < 1e-9);
        assert!(psnr(&a, &Tensor::zeros([1, 4, 4]), 1.0).is_err());
    }

    #[test]
    fn ssim_identity_and_window_error() {
        let a = img(16, 16, 1);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let small = Tensor::<f64>::zeros([1, 8, 8]);
        assert!(matches!(ssim(&small, &small), Err(Error::Dimension(_))));
    }

    #[test]
    fn ssim_of_constants_matches_the_closed_form() {
        let (c, d) = (0.3, 0.2);
        let a = Tensor::full([1, 12, 13], c);
        let b = Tensor::full([1, 12, 13], c + d);
        let c1 = (SSIM_K1 * 1.0f64).powi(2);
        let c2 = (SSIM_K2 * 1.0f64).powi(2);
        // Zero variance and covariance leave only the luminance term.
        let expect = (2.0 * c * (c + d) + c1) / (c * c + (c + d) * (c + d) + c1) * (c2 / c2);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn epi_ssim_definitions() {
        let a = lf(0.0, 2);
        assert_eq!(epi_ssim(&a, &a).unwrap(), 1.0);
        let b = lf(1.0, 2);
        let values = epi_ssim_values(&a, &b).unwrap();
        // Two rows of horizontal EPIs and two columns of vertical EPIs.
        assert_eq!(values.len(), 2 * 24 + 2 * 24);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert_eq!(epi_ssim(&a, &b).unwrap(), mean);
        // Explicit recomputation of one constituent.
        let ea = extract_epi(&a, EpiOrientation::Horizontal, 5, 1, 0).unwrap();
        let eb = extract_epi(&b, EpiOrientation::Horizontal, 5, 1, 0).unwrap();
        assert_eq!(ssim_windowed(&ea.data, &eb.data, (3, 11)).unwrap(), values[5]);
    }

    #[test]
    fn parallax_error_scores_below_a_mild_blur() {
        let a = lf(0.0, 4);
        let shifted = lf(1.0, 4);
        let blurred = a
            .map_views(|v| {
                let [c, h, w] = v.dims()?;
                let k = [0.25, 0.5, 0.25];
                Ok(Tensor::from_fn([c, h, w], |i| {
                    let (y, x) = ((i / w) % h, i % w);
                    let mut s = 0.0;
                    for (j, kw) in k.iter().enumerate() {
                        let xx = (x + j).saturating_sub(1).min(w - 1);
                        s += kw * v.data()[y * w + xx];
                    }
                    s
                }))
            })
            .unwrap();
        let e_shift = epi_ssim(&a, &shifted).unwrap();
        let e_blur = epi_ssim(&a, &blurred).unwrap();
        assert!(e_shift < 1.0);
        assert!(e_shift < e_blur, "{e_shift} vs {e_blur}");
    }

    #[test]
    fn per_view_grid_and_variance() {
        let gt = lf(1.0, 5);
        let exact = per_view_psnr(&gt, &gt).unwrap();
        assert_eq!(exact.variance, 0.0);
        assert!(exact.grid[1][1].is_none());
        assert!(exact.side_values().iter().all(|v| v.is_infinite()));

        let mut views = gt.views();
        for v in views.iter_mut() {
            *v = v.map(|p| (p + 0.01).min(1.0));
        }
        views[2] = views[2].map(|p| 1.0 - p);
        let pred = LightField::from_views(3, &views).unwrap();
        let pv = per_view_psnr(&pred, &gt).unwrap();
        let side = pv.side_values();
        let min = side.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(pv.grid[0][2], Some(min));
        assert!(pv.variance > 0.0);
        for p in pred.positions() {
            if p != AngularPos::center(3) {
                let direct = psnr(&pred.view(p).unwrap(), &gt.view(p).unwrap(), 1.0).unwrap();
                assert_eq!(pv.grid[p.u - 1][p.v - 1], Some(direct));
            }
        }
        let heat = pv.heatmap(4);
        assert_eq!(heat.shape(), &[1, 12, 12]);
        assert_eq!(heat.data()[2 * 4], 0.0);
    }

    #[test]
    fn report_means_and_files() {
        let gt = lf(0.5, 6);
        let base = lf(0.5, 7);
        let all = MetricsConfig::default();
        let (s1, _) = evaluate_scene("a", "bicubic", &base, &gt, &all).unwrap();
        let (s2, pv) = evaluate_scene("a", "ours", &gt, &gt, &all).unwrap();
        assert_eq!(s2.psnr, f64::INFINITY);
        assert_eq!(s2.infinite_views, 8);
        assert_eq!(s2.epi_ssim, Some(1.0));
        let (s3, _) = evaluate_scene("b", "bicubic", &gt, &base, &all).unwrap();
        let report = EvalReport {
            scenes: vec![s1.clone(), s2, s3.clone()],
        };
        let m = report.summary("bicubic").unwrap();
        assert_eq!(m.psnr, (s1.psnr + s3.psnr) / 2.0);
        assert_eq!(m.ssim, Some((s1.ssim.unwrap() + s3.ssim.unwrap()) / 2.0));
        let ours = report.summary("ours").unwrap();
        assert_eq!((ours.infinite_scenes, ours.psnr), (1, f64::INFINITY));
        let dir = tempfile::tempdir().unwrap();
        report.write_csv(&dir.path().join("r.csv")).unwrap();
        pv.write_csv(&dir.path().join("pv.csv")).unwrap();
        pv.write_heatmap(&dir.path().join("pv.png")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert!(text.contains("a,ours,inf,8,1,1,0"));
        let summary = report.summary_toml().unwrap();
        assert!(summary.contains("psnr = inf"));
    }

    #[test]
    fn disabled_scores_are_absent() {
        let gt = lf(0.5, 6);
        let base = lf(0.5, 7);
        let off = MetricsConfig {
            ssim: false,
            epi_ssim: false,
            per_view: false,
        };
        let (s, _) = evaluate_scene("a", "bicubic", &base, &gt, &off).unwrap();
        let (full, _) = evaluate_scene("a", "bicubic", &base, &gt, &MetricsConfig::default()).unwrap();
        assert_eq!((s.ssim, s.epi_ssim), (None, None));
        assert_eq!(s.psnr, full.psnr);
        let report = EvalReport { scenes: vec![s, full] };
        let m = report.summary("bicubic").unwrap();
        assert_eq!((m.ssim, m.epi_ssim), (None, None));
        assert!(!report.summary_toml().unwrap().contains("ssim"));
    }

    #[test]
    fn bicubic_baseline_matches_resize() {
        let gt = lf(0.5, 8);
        let up = bicubic_baseline(&gt, 2).unwrap();
        assert_eq!((up.height(), up.width()), (48, 48));
        let v = gt.view(AngularPos::center(3)).unwrap();
        let direct = bicubic_resize(&v.reshape([1, 1, 24, 24]).unwrap(), Scale::up(2)).unwrap();
        assert_eq!(up.view(AngularPos::center(3)).unwrap().data(), direct.data());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn psnr_falls_as_noise_grows(seed in 0u64..1000, a1 in 0.01f64..0.1, step in 0.005f64..0.1) {
            let a2 = (a1 + step).min(0.2);
            prop_assume!(a2 > a1);
            let base = img(12, 12, seed).map(|v| v * 0.5 + 0.25);
            let mut rng = scene_rng(seed, 1);
            let pattern: Vec<f64> = (0..144).map(|_| if rand::Rng::gen_bool(&mut rng, 0.5) { 1.0 } else { -1.0 }).collect();
            let noisy = |amp: f64| Tensor::new([1, 12, 12], base.data().iter().zip(&pattern).map(|(v, s)| v + amp * s).collect()).unwrap();
            let p1 = psnr(&base, &noisy(a1), 1.0).unwrap();
            let p2 = psnr(&base, &noisy(a2), 1.0).unwrap();
            prop_assert!(p2 < p1);
        }

        #[test]
        fn ssim_is_symmetric(s1 in 0u64..1000, s2 in 0u64..1000) {
            let a = img(14, 13, s1);
            let b = img(14, 13, s2);
            prop_assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
            prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        }
    }
}
