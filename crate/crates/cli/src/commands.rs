use std::fs;
use std::path::{Path, PathBuf};

use hlfsr_core::config::RunConfig;
use hlfsr_core::datagen::{
    load_dataset, read_light_field, save_dataset, synthesize_dataset, write_light_field, Dataset,
};
use hlfsr_core::lightfield::luma;
use hlfsr_core::metrics::bicubic_baseline;
use hlfsr_core::networks::{BdNet, CvsNet, HlfssrNet};
use hlfsr_core::pipeline::{
    evaluate, run_ablation, run_pretrain_bd, run_pretrain_cvs, run_train, super_resolve, Evaluation, BICUBIC,
};
use hlfsr_core::tensor::{Element, Precision};
use hlfsr_core::training::{Stage, StageOutput};
use hlfsr_core::{Error, Result};

use crate::args::{Command, EvalArgs, InferArgs, StageArgs, TrainArgs};

/// Resolves defaults, then the config file, then flags.
fn resolve(cmd: &Command) -> Result<RunConfig> {
    let common = cmd.common();
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cmd {
        Command::Datagen(a) => a.apply(&mut cfg),
        _ => common.apply(&mut cfg),
    }
    let epochs = match cmd {
        Command::PretrainCvs(a) | Command::PretrainBd(a) | Command::Ablate(a) => a.epochs,
        Command::Train(a) => a.stage.epochs,
        _ => None,
    };
    if let Some(n) = epochs {
        let t = &mut cfg.train;
        match cmd {
            Command::PretrainCvs(_) => t.cvs.epochs = n,
            Command::PretrainBd(_) => t.bd.epochs = n,
            Command::Train(_) => t.hlfssr.epochs = n,
            _ => {
                t.cvs.epochs = n;
                t.bd.epochs = n;
                t.hlfssr.epochs = n;
            }
        }
    }
    if cfg.dataset.is_none() {
        cfg.dataset = Some(cfg.out.join("dataset"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn dataset_dir(cfg: &RunConfig) -> &Path {
    cfg.dataset.as_deref().expect("resolve fills the dataset path")
}

fn checkpoint_arg(given: &Option<PathBuf>, cfg: &RunConfig, stage: Stage) -> Result<PathBuf> {
    let path = given
        .clone()
        .unwrap_or_else(|| StageOutput::checkpoint_path(&cfg.out, stage));
    if !path.is_file() {
        return Err(Error::Checkpoint(format!(
            "missing {stage} checkpoint {}",
            path.display()
        )));
    }
    Ok(path)
}

fn stage_output(cfg: &RunConfig, args: &StageArgs) -> Result<StageOutput> {
    let mut out = StageOutput::to_dir(&cfg.out, cfg.hash()?);
    out.resume = args.resume;
    Ok(out)
}

pub fn run(cmd: &Command) -> Result<()> {
    let cfg = resolve(cmd)?;
    create_dir(&cfg.out)?;
    // Snapshot of the resolved configuration, enough to rerun the command.
    write_text(&cfg.out.join(format!("{}.config.toml", cmd.name())), &cfg.to_toml()?)?;
    match cfg.precision {
        Precision::F32 => dispatch::<f32>(cmd, &cfg),
        Precision::F64 => dispatch::<f64>(cmd, &cfg),
    }
}

fn dispatch<T: Element>(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    match cmd {
        Command::Datagen(_) => datagen(cfg),
        Command::PretrainCvs(a) => {
            let ds = load_dataset(dataset_dir(cfg))?;
            let (_, report) = run_pretrain_cvs::<T>(cfg, &ds, &stage_output(cfg, a)?)?;
            println!("cvs best_epoch={} best_loss={}", report.best_epoch, report.best_loss);
            Ok(())
        }
        Command::PretrainBd(a) => {
            let ds = load_dataset(dataset_dir(cfg))?;
            let (_, report) = run_pretrain_bd::<T>(cfg, &ds, &stage_output(cfg, a)?)?;
            println!("bd best_epoch={} best_loss={}", report.best_epoch, report.best_loss);
            Ok(())
        }
        Command::Train(a) => train::<T>(cfg, a),
        Command::Eval(a) => eval::<T>(cfg, a),
        Command::Infer(a) => infer::<T>(cfg, a),
        Command::Ablate(_) => ablate::<T>(cfg),
    }
}

fn datagen(cfg: &RunConfig) -> Result<()> {
    let ds = synthesize_dataset(&cfg.data)?;
    let dir = dataset_dir(cfg);
    save_dataset(&ds, dir)?;
    println!("dataset {} scenes={}", dir.display(), ds.len());
    Ok(())
}

fn train<T: Element>(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    let (cvs, _) = CvsNet::<T>::load(&checkpoint_arg(&args.cvs, cfg, Stage::Cvs)?)?;
    let (bd, _) = BdNet::<T>::load(&checkpoint_arg(&args.bd, cfg, Stage::Bd)?)?;
    let ds = load_dataset(dataset_dir(cfg))?;
    let (_, report) = run_train(cfg, &ds, &cvs, &bd, &stage_output(cfg, &args.stage)?)?;
    println!("hlfssr best_epoch={} best_loss={}", report.best_epoch, report.best_loss);
    Ok(())
}

/// Reads `<dir>/<scene>/view_u_v.png` predictions, reduced to luma.
fn read_predictions(dir: &Path, ds: &Dataset, ev: &mut Evaluation) -> Result<()> {
    let m = &ds.manifest;
    let size = (m.height * m.alpha, m.width * m.alpha);
    for (entry, sample) in m.scenes.iter().zip(&ds.samples) {
        let pred = read_light_field(&dir.join(&entry.name), m.angular, m.color_space.channels(), size)?;
        let pred = if pred.channels() == 1 {
            pred
        } else {
            pred.map_views(luma)?
        };
        let luma_sample = sample.to_luma()?;
        let gt = luma_sample
            .gt
            .as_ref()
            .ok_or_else(|| Error::Dataset(format!("scene {} has no ground truth", entry.name)))?;
        ev.push(&entry.name, BICUBIC, &bicubic_baseline(&luma_sample.lf, m.alpha)?, gt)?;
        ev.push(&entry.name, "prediction", &pred, gt)?;
    }
    Ok(())
}

fn eval<T: Element>(cfg: &RunConfig, args: &EvalArgs) -> Result<()> {
    let ds = load_dataset(dataset_dir(cfg))?;
    let ev = if let Some(pred) = &args.pred {
        let mut ev = Evaluation::new(cfg.metrics);
        read_predictions(pred, &ds, &mut ev)?;
        ev
    } else if args.baseline_only {
        evaluate::<T>(None, &ds, &cfg.metrics)?
    } else {
        let (net, _) = HlfssrNet::<T>::load(&checkpoint_arg(&args.checkpoint, cfg, Stage::Hlfssr)?)?;
        evaluate(Some(&net), &ds, &cfg.metrics)?
    };
    let dir = cfg.out.join("eval");
    create_dir(&dir)?;
    ev.report.write_csv(&dir.join("scores.csv"))?;
    let summary = ev.report.summary_toml()?;
    write_text(&dir.join("summary.toml"), &summary)?;
    if cfg.metrics.per_view {
        let pv_dir = dir.join("per_view");
        create_dir(&pv_dir)?;
        for (scene, method, pv) in &ev.per_view {
            pv.write_csv(&pv_dir.join(format!("{scene}_{method}.csv")))?;
            pv.write_heatmap(&pv_dir.join(format!("{scene}_{method}.png")))?;
        }
    }
    print!("{summary}");
    Ok(())
}

fn infer<T: Element>(cfg: &RunConfig, args: &InferArgs) -> Result<()> {
    let (net, _) = HlfssrNet::<T>::load(&checkpoint_arg(&args.checkpoint, cfg, Stage::Hlfssr)?)?;
    let ds = load_dataset(dataset_dir(cfg))?;
    let root = cfg.out.join("infer");
    for (entry, sample) in ds.manifest.scenes.iter().zip(&ds.samples) {
        let lf = super_resolve(&net, sample)?;
        write_light_field(&root.join(&entry.name), &lf, ds.manifest.bit_depth)?;
        log::info!(
            "{}: {}x{} views of {}x{}",
            entry.name,
            lf.angular(),
            lf.angular(),
            lf.height(),
            lf.width()
        );
    }
    println!("infer {} scenes={}", root.display(), ds.len());
    Ok(())
}

fn ablate<T: Element>(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(dataset_dir(cfg))?;
    let dir = cfg.out.join("ablation");
    let study = run_ablation::<T>(cfg, &ds, Some(&dir), &cfg.hash()?)?;
    study.write_csv(&dir.join("ablation.csv"))?;
    let bicubic = toml::to_string(&study.bicubic).map_err(|e| Error::Format(format!("bicubic summary: {e}")))?;
    write_text(&dir.join("bicubic.toml"), &bicubic)?;
    println!("use_epi_loss,use_hr_loss,use_reorg,psnr,ssim,epi_ssim,psnr_variance");
    for r in &study.rows {
        println!(
            "{},{},{},{},{},{},{}",
            r.use_epi_loss, r.use_hr_loss, r.use_reorg, r.psnr, r.ssim, r.epi_ssim, r.psnr_variance
        );
    }
    Ok(())
}
