//! Loss identities, the bicubic starting point and the calibration fits,
//! each checked against a direct computation.

use hlfsr_core::datagen::{fit_affine, fit_color_lsa, HybridSample};
use hlfsr_core::lightfield::LightField;
use hlfsr_core::networks::{BdNet, Ctx, CvsNet, HlfssrNet, Network, NetworkConfig};
use hlfsr_core::resample::{bicubic_resize, keys_kernel, Scale};
use hlfsr_core::training::{hlfssr_losses, loss_epi, Batch, EpiSelection, TrainConfig};
use hlfsr_core::{Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// EPI-gradient loss from its definition on `[b, A², H, W]` stacks: mean
/// absolute difference of forward differences along `x` and `v` on
/// horizontal EPIs and along `y` and `u` on vertical EPIs.
pub fn epi_loss_direct(p: &Tensor<f64>, q: &Tensor<f64>, a: usize, include_center: bool) -> f64 {
    let (b, h, w) = (p.shape()[0], p.shape()[2], p.shape()[3]);
    let at = |t: &Tensor<f64>, n: usize, u: usize, v: usize, y: usize, x: usize| {
        t.data()[(((n * a + u) * a + v) * h + y) * w + x]
    };
    let keep = |i: usize| include_center || i != a / 2;
    // (d_u, d_v, d_y, d_x) offsets; the first two difference horizontal EPIs.
    let steps = [
        (0, 0, 0, 1, true),
        (0, 1, 0, 0, true),
        (0, 0, 1, 0, false),
        (1, 0, 0, 0, false),
    ];
    let mut total = 0.0;
    for (du, dv, dy, dx, horizontal) in steps {
        let (mut sum, mut count) = (0.0, 0usize);
        for n in 0..b {
            for u in 0..a - du {
                for v in 0..a - dv {
                    // Horizontal EPIs are indexed by u, vertical ones by v.
                    if (horizontal && !keep(u)) || (!horizontal && !keep(v)) {
                        continue;
                    }
                    for y in 0..h - dy {
                        for x in 0..w - dx {
                            let gp = at(p, n, u + du, v + dv, y + dy, x + dx) - at(p, n, u, v, y, x);
                            let gq = at(q, n, u + du, v + dv, y + dy, x + dx) - at(q, n, u, v, y, x);
                            sum += (gp - gq).abs();
                            count += 1;
                        }
                    }
                }
            }
        }
        total += sum / count as f64;
    }
    total
}

/// Bicubic upsampling of one plane by the Keys kernel with half-pixel centres
/// and edge clamping, evaluated per output pixel.
pub fn bicubic_direct(plane: &[f64], h: usize, w: usize, s: usize) -> Vec<f64> {
    let (oh, ow) = (h * s, w * s);
    let mut out = vec![0.0; oh * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            let sy = (oy as f64 + 0.5) / s as f64 - 0.5;
            let sx = (ox as f64 + 0.5) / s as f64 - 0.5;
            let (fy, fx) = (sy.floor(), sx.floor());
            let mut acc = 0.0;
            for i in -1..=2 {
                for j in -1..=2 {
                    let yy = (fy as i64 + i).clamp(0, h as i64 - 1) as usize;
                    let xx = (fx as i64 + j).clamp(0, w as i64 - 1) as usize;
                    let k = keys_kernel(sy - (fy + i as f64)) * keys_kernel(sx - (fx + j as f64));
                    acc += k * plane[yy * w + xx];
                }
            }
            out[oy * ow + ox] = acc;
        }
    }
    out
}

/// Values on a 1/256 grid, so adding 0.5 and subtracting are exact.
fn dyadic(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(0..256) as f64 / 256.0)
}

fn small_config() -> NetworkConfig {
    NetworkConfig {
        channels: 8,
        blocks_per_group: 1,
        groups_4d: 1,
        fusion_channels: 4,
        cvs_channels: 8,
        cvs_groups: 1,
        cvs_blocks: 1,
        bd_channels: 8,
        bd_layers: 2,
        zero_init_output: false,
        ..NetworkConfig::default()
    }
}

/// Checks the loss identities; returns a one-line summary.
pub fn check_losses(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = |e: hlfsr_core::Error| e.to_string();
    let mut worst_oracle = 0.0f64;
    for a in [3, 5] {
        for include_center in [false, true] {
            let sel = EpiSelection { include_center };
            let shape = [2, a * a, 5, 6];
            let l = dyadic(&mut rng, &shape);
            let m = dyadic(&mut rng, &shape);
            let lv = Var::constant(l.clone());
            let mv = Var::constant(m.clone());
            let same = loss_epi(&lv, &lv, a, sel).map_err(e)?.value().item().map_err(e)?;
            if same != 0.0 {
                return Err(format!("loss_epi(L, L) = {same:e} at a={a}"));
            }
            let base = loss_epi(&lv, &mv, a, sel).map_err(e)?.value().item().map_err(e)?;
            let shifted = Var::constant(l.map(|v| v + 0.5));
            let off = loss_epi(&shifted, &mv, a, sel).map_err(e)?.value().item().map_err(e)?;
            if off != base {
                return Err(format!("offset changes loss_epi: {base} vs {off}"));
            }
            worst_oracle = worst_oracle.max((base - epi_loss_direct(&l, &m, a, include_center)).abs());
        }
    }
    if worst_oracle > 1e-12 {
        return Err(format!("loss_epi differs from its definition by {worst_oracle:e}"));
    }

    // The logged terms add up to the optimised total.
    let cfg = small_config();
    let net = HlfssrNet::<f64>::new(&cfg, seed).map_err(e)?;
    let cvs = CvsNet::<f64>::new(&cfg, seed + 1).map_err(e)?;
    let bd = BdNet::<f64>::new(&cfg, seed + 2).map_err(e)?;
    let samples: Vec<HybridSample> = (0..2)
        .map(|_| {
            let lf = LightField::new(Tensor::from_fn([3, 3, 1, 6, 6], |_| rng.gen_range(0.0..1.0))).unwrap();
            let hr = Tensor::from_fn([1, 12, 12], |_| rng.gen_range(0.0..1.0));
            HybridSample::new(lf, hr, 2, None).unwrap()
        })
        .collect();
    let batch = Batch::<f64>::from_samples(&samples).map_err(e)?;
    let train = TrainConfig::default();
    let grouping = train.view_grouping(3).map_err(e)?;
    let bound = net.store().bind();
    let step = hlfssr_losses(&net, &Ctx::new(&bound), &cvs, &bd, &grouping, &batch, &train).map_err(e)?;
    let (l_hr, l_epi) = (step.l_hr.ok_or("no l_hr")?, step.l_epi.ok_or("no l_epi")?);
    let total = step.total.value().item().map_err(e)?;
    let gap = (total - (l_hr + l_epi)).abs();
    if gap > 1e-12 {
        return Err(format!("total {total} != l_hr {l_hr} + l_epi {l_epi}"));
    }

    // A zero-parameter network is exactly the bicubic upsampling.
    let mut zero = HlfssrNet::<f64>::new(&cfg, seed).map_err(e)?;
    zero.store_mut().zero_values();
    let bound = zero.store().bind();
    let lf = Var::constant(batch.lf.clone());
    let out = zero
        .forward(&Ctx::new(&bound), &lf, &Var::constant(batch.hr.clone()))
        .map_err(e)?;
    let bicubic = bicubic_resize(&batch.lf, Scale::up(2)).map_err(e)?;
    if out.value() != &bicubic {
        return Err("zero-parameter network differs from bicubic".into());
    }
    let plane: Vec<f64> = batch.lf.data()[..36].to_vec();
    let direct = bicubic_direct(&plane, 6, 6, 2);
    let bicubic_err = direct
        .iter()
        .zip(&bicubic.data()[..144])
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    if bicubic_err > 1e-12 {
        return Err(format!("bicubic differs from the direct Keys sum by {bicubic_err:e}"));
    }
    Ok(format!(
        "epi oracle err {worst_oracle:.1e}, decomposition gap {gap:.1e}, bicubic oracle err {bicubic_err:.1e}"
    ))
}

/// Recovers known colour and point transforms; returns the largest
/// coefficient errors.
pub fn check_fits(seed: u64) -> Result<(f64, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut color_err = 0.0f64;
    let mut affine_err = 0.0f64;
    for _ in 0..20 {
        let m: [[f64; 4]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let src: Vec<[f64; 3]> = (0..24)
            .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..1.0)))
            .collect();
        let dst: Vec<[f64; 3]> = src
            .iter()
            .map(|p| m.map(|r| r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + r[3]))
            .collect();
        let fit = fit_color_lsa(&src, &dst).map_err(|e| e.to_string())?;
        for (fr, mr) in fit.matrix.iter().zip(&m) {
            for (f, t) in fr.iter().zip(mr) {
                color_err = color_err.max((f - t).abs());
            }
        }

        let t: [[f64; 3]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-2.0..2.0)));
        for n in [3, 4, 10] {
            let src: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(0.0..64.0), rng.gen_range(0.0..64.0)])
                .collect();
            let dst: Vec<[f64; 2]> = src
                .iter()
                .map(|p| t.map(|r| r[0] * p[0] + r[1] * p[1] + r[2]))
                .collect();
            let fit = fit_affine(&src, &dst).map_err(|e| e.to_string())?;
            for (fr, tr) in fit.matrix.iter().zip(&t) {
                for (f, w) in fr.iter().zip(tr) {
                    affine_err = affine_err.max((f - w).abs());
                }
            }
        }
    }
    if color_err >= 1e-9 || affine_err >= 1e-8 {
        return Err(format!("colour err {color_err:e}, affine err {affine_err:e}"));
    }
    Ok((color_err, affine_err))
}
