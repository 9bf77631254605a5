use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use uplift_core::datagen::{generate, read_csv, write_csv, ScenarioKind, ScenarioSpec};
use uplift_core::eval::{mqini_from_predictions, shuffle_rows, QiniReport, TieMode};
use uplift_core::exec::Exec;
use uplift_core::heads::HeadKind;
use uplift_core::model::{train, Backbone, DiscKind, ModelSpec, Preset, TrainConfig, TrainHistory, UpliftModel};

use crate::artifact::ModelArtifact;
use crate::bench::{self, ExperimentConfig, ModelEntry, ScenarioEntry};
use crate::cli::{BenchArgs, Cli, Command, EvalArgs, GenArgs, ModelArgs, TrainArgs};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    spec: &'a ScenarioSpec,
    train_file: &'a str,
    test_file: &'a str,
    train_rows: usize,
    test_rows: usize,
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let kind: ScenarioKind = a.kind.parse()?;
    let spec = ScenarioSpec::new(kind, a.with_iv, a.seed).with_sizes(a.n_train, a.n_test);
    let (train_set, test_set) = generate(&spec)?;
    create_dir(&a.out)?;
    write_csv(&train_set, a.out.join("train.csv"))?;
    write_csv(&test_set, a.out.join("test.csv"))?;
    let sidecar = Sidecar {
        spec: &spec,
        train_file: "train.csv",
        test_file: "test.csv",
        train_rows: train_set.len(),
        test_rows: test_set.len(),
    };
    let path = a.out.join("spec.json");
    fs::write(&path, serde_json::to_string_pretty(&sidecar)?).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "{}: {} train / {} test rows in {}",
        spec.label(),
        train_set.len(),
        test_set.len(),
        a.out.display()
    );
    Ok(())
}

pub fn model_spec(a: &ModelArgs, seed: u64) -> Result<ModelSpec> {
    let backbone: Backbone = a.backbone.parse()?;
    let head: HeadKind = a.head.parse()?;
    let disc: DiscKind = a.disc.parse()?;
    let mut spec = ModelSpec::preset(backbone, head, disc, Preset::Synthetic).with_seed(seed);
    if let Some(l) = a.lambda2 {
        spec.lambda2 = l;
    }
    spec.degree = a.degree;
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct HistoryFile<'a> {
    model: String,
    param_count: usize,
    wall_clock_secs: f64,
    history: &'a TrainHistory,
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let data = read_csv(&a.data, None).with_context(|| format!("loading {}", a.data.display()))?;
    let spec = model_spec(&a.model, a.seed)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        lr: a.lr,
        ..TrainConfig::default()
    };
    let mut model = UpliftModel::build(&spec, data.covariates(), data.arms)?;
    log::info!(
        "training {} ({} parameters) on {} rows",
        spec.label(),
        model.param_count(),
        data.len()
    );
    let start = Instant::now();
    let history = train(&mut model, &data, &cfg)?;
    let secs = start.elapsed().as_secs_f64();

    create_dir(&a.out)?;
    let param_count = model.param_count();
    ModelArtifact::new(model, cfg, data.len()).save(&a.out.join("model.json"))?;
    let hist = HistoryFile {
        model: spec.label(),
        param_count,
        wall_clock_secs: secs,
        history: &history,
    };
    let path = a.out.join("history.json");
    fs::write(&path, serde_json::to_string_pretty(&hist)?).with_context(|| format!("writing {}", path.display()))?;
    let last = history.epochs.last();
    println!(
        "{}: {} epochs, best {:?}, final train bce {}, {:.1}s",
        spec.label(),
        history.epochs.len(),
        history.best_epoch,
        last.map_or("-".into(), |e| format!("{:.4}", e.bce)),
        secs
    );
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<QiniReport> {
    let (data, preds) = if a.use_truth {
        let data = read_csv(&a.data, None).with_context(|| format!("loading {}", a.data.display()))?;
        let truth = data
            .truth
            .clone()
            .with_context(|| format!("{} has no truth columns", a.data.display()))?;
        (data, truth)
    } else {
        let path = a.model.as_ref().context("--model is required without --use-truth")?;
        let artifact = ModelArtifact::load(path)?;
        let model = &artifact.model;
        let data = read_csv(&a.data, Some(model.arms())).with_context(|| format!("loading {}", a.data.display()))?;
        if data.covariates() != model.covariates() {
            bail!(
                "model expects {} covariates but {} has {}",
                model.covariates(),
                a.data.display(),
                data.covariates()
            );
        }
        let preds = model.predict_all(&data.x)?;
        (data, preds)
    };
    let preds = if a.shuffle_scores {
        shuffle_rows(&preds, a.seed)
    } else {
        preds
    };
    let report = mqini_from_predictions(&preds, &data.t, &data.y, a.control, TieMode::Stable, Exec::default())?;

    create_dir(&a.out)?;
    let path = a.out.join("report.json");
    fs::write(&path, report.summary_json()).with_context(|| format!("writing {}", path.display()))?;
    for arm in &report.arms {
        let path = a.out.join(format!("curve_arm{}.csv", arm.arm));
        fs::write(&path, arm.curve.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("mqini {:.6}", report.mqini);
    for arm in &report.arms {
        println!("  arm {}: {:.6}", arm.arm, arm.qini);
    }
    Ok(report)
}

/// Applies command-line overrides to a config.
pub fn bench_config(a: &BenchArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = &a.kind {
        cfg.scenarios = vec![ScenarioEntry::new(k.parse()?, a.with_iv)];
    } else if a.with_iv {
        cfg.scenarios.iter_mut().for_each(|s| s.with_iv = true);
    }
    if !a.seed.is_empty() {
        cfg.seeds = a.seed.clone();
    }
    if let (Some(b), Some(h)) = (&a.backbone, &a.head) {
        let disc = a.disc.as_deref().unwrap_or("none").parse()?;
        cfg.models = vec![ModelEntry::new(b.parse()?, h.parse()?, disc)];
    } else if let Some(d) = &a.disc {
        let disc: DiscKind = d.parse()?;
        cfg.models
            .iter_mut()
            .filter(|m| m.backbone != Backbone::Slearner)
            .for_each(|m| m.disc = disc);
    }
    if let Some(l) = a.lambda2 {
        cfg.lambda_grid = vec![l];
    }
    if let Some(p) = a.degree {
        cfg.models
            .iter_mut()
            .filter(|m| m.head == HeadKind::Ofa)
            .for_each(|m| m.degree = Some(p));
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = a.batch {
        cfg.batch_size = b;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    if let Some(n) = a.n_train {
        cfg.n_train = n;
    }
    if let Some(n) = a.n_test {
        cfg.n_test = n;
    }
    if let Some(o) = &a.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let cfg = bench_config(a)?;
    let (counts, cells) = bench::run_bench(&cfg, a.workers)?;
    print!("{}", bench::markdown_table(&cfg, &cells));
    println!(
        "ran {}, reused {}, failed {}; tables in {}",
        counts.ran,
        counts.skipped,
        counts.failed,
        cfg.out_dir.display()
    );
    Ok(())
}
