//! Command-line front end. Subcommands cover the whole workflow: synthetic
//! data generation, detector and regressor training, transfer fine-tuning,
//! single-image prediction, batch evaluation, and matrix reporting.
//!
//! Settings resolve in order: built-in default, then the `--config` file
//! (plain `key=value` lines, `#` comments, dotted section prefixes such as
//! `train.epochs=200`), then explicit flags.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 stage failure (a line
//! naming the failed stage goes to stderr), 5 internal error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{evaluate_manifest, published_matrix, ConfusionMatrix, MetricsReport};
use crate::geom::LandmarkRole;
use crate::hogdet::{
    load_detector, save_detector, train_detector, DetectorClass, HogParams, PositiveSet,
    TrainOptions,
};
use crate::ingest::{augment_with_flips, load_manifest, split, Manifest};
use crate::nnet::{
    io::{load_weights, save_weights},
    landmark_specs, train, CnnModel, TrainConfig, CNN_INPUT, COIN_FEATURE_MAPS, NOSE_FEATURE_MAPS,
};
use crate::pipeline::{
    build_cnn_dataset, ground_truth_box, run_pipeline, transfer_train, StageModels,
};
use crate::raster::Raster;
use crate::rng::SeededRng;
use crate::sizing::SizeChart;
use crate::synthgen::{generate_dataset, procedural_asset, CoinAsset, CoinSide, ScaleMode, SynthConfig};

#[derive(Parser)]
#[command(name = "masksize", version, about = "Nasal mask sizing from a single photo with a coin fiducial")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// key=value settings file; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// rng seed; required for commands that draw random numbers
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// cap the worker thread count
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Composite coin fiducials onto annotated face images
    Synth(SynthArgs),
    /// Train a sliding-window detector for one stage
    TrainDetector(TrainDetectorArgs),
    /// Train a landmark regressor from scratch
    TrainCnn(TrainCnnArgs),
    /// Resume training from saved weights on a small dataset
    Finetune(FinetuneArgs),
    /// Size a single image
    Predict(PredictArgs),
    /// Run the pipeline over a labelled manifest and report metrics
    Evaluate(EvaluateArgs),
    /// Compute metrics from a stored confusion matrix
    ReportMatrix(ReportMatrixArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ScaleModeArg {
    Ipd,
    Inner,
}

#[derive(Args)]
pub struct SynthArgs {
    /// anchor-role manifest of clean face images
    #[arg(long)]
    pub faces: PathBuf,
    /// coin asset list: image,center_x,center_y,radius,side
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// generate N procedural coin assets instead of loading any
    #[arg(long)]
    pub procedural: Option<usize>,
    /// which eye distance the coin is scaled against
    #[arg(long, value_enum, default_value = "ipd")]
    pub mode: ScaleModeArg,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ClassArg {
    Face,
    Nose,
    Coin,
}

#[derive(Args)]
pub struct TrainDetectorArgs {
    #[arg(long, value_enum)]
    pub class: ClassArg,
    /// manifest of positive examples (anchors role for face)
    #[arg(long)]
    pub manifest: PathBuf,
    /// directory of object-free images for negative sampling
    #[arg(long)]
    pub negatives: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mining_rounds: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StageArg {
    Nose,
    Coin,
}

#[derive(Args)]
pub struct TrainCnnArgs {
    #[arg(long, value_enum)]
    pub stage: StageArg,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// write horizontally flipped copies here and train on both
    #[arg(long)]
    pub augment_flips: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// training fraction of the shuffled manifest (rest validates)
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// random crop-box perturbation as a fraction of box width
    #[arg(long)]
    pub box_jitter: Option<f64>,
}

#[derive(Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// landmark role of the manifest (nose or coin)
    #[arg(long, value_enum)]
    pub stage: StageArg,
    #[arg(long)]
    pub augment_flips: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// directory holding face.hogd nose.hogd coin.hogd nose.papw coin.papw
    #[arg(long)]
    pub models: PathBuf,
    /// write the result line here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// also write one CSV row per sample
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportMatrixArgs {
    /// 4x4 confusion matrix CSV (rows actual S,M,L,TL)
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// use the built-in published reference matrix
    #[arg(long)]
    pub published: bool,
}

/// Flat key=value settings parsed from `--config`.
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn empty() -> Self {
        Config { values: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key=value", path.display(), i + 1))
            })?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("config key {key}: cannot parse {v:?}"))),
        }
    }
}

/// flag, then config key, then default
fn resolve<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    cfg: &Config,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(cfg.parsed(key)?.unwrap_or(default))
}

fn require_seed(cli_seed: Option<u64>, cfg: &Config) -> Result<u64> {
    if let Some(s) = cli_seed {
        return Ok(s);
    }
    cfg.parsed("seed")?
        .ok_or_else(|| Error::InvalidArgument("--seed is required (no wall-clock default)".into()))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 2,
        Error::StageFailure { .. } => 4,
        Error::InvalidMeasurement(_)
        | Error::Manifest { .. }
        | Error::ManifestRow { .. }
        | Error::Image { .. }
        | Error::Io { .. }
        | Error::ModelFormat { .. }
        | Error::Config(_)
        | Error::DegenerateData(_)
        | Error::AllSamplesSkipped(_) => 3,
        Error::ShapeMismatch(_) | Error::Diverged { .. } => 5,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::empty(),
    };
    if let Some(n) = cli.threads.or(cfg.parsed("threads")?) {
        crate::par::limit_threads(n.max(1));
    }
    match cli.command {
        Command::Synth(a) => cmd_synth(a, cli.seed, &cfg),
        Command::TrainDetector(a) => cmd_train_detector(a, cli.seed, &cfg),
        Command::TrainCnn(a) => cmd_train_cnn(a, cli.seed, &cfg),
        Command::Finetune(a) => cmd_finetune(a, cli.seed, &cfg),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::ReportMatrix(a) => cmd_report_matrix(a),
    }
}

fn load_assets(path: &Path) -> Result<Vec<CoinAsset>> {
    let err = |message: String| Error::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let mut assets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        if record.len() != 5 {
            return Err(err(format!("row {}: expected 5 fields", i + 2)));
        }
        let num = |j: usize| -> Result<f64> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| err(format!("row {}: bad number {:?}", i + 2, &record[j])))
        };
        let side = match record[4].trim() {
            "heads" => CoinSide::Heads,
            "tails" => CoinSide::Tails,
            other => return Err(err(format!("row {}: side must be heads|tails, got {other:?}", i + 2))),
        };
        let image_path = base.join(record[0].trim());
        let asset = CoinAsset {
            id: record[0].trim().to_string(),
            image: Raster::load(&image_path)?,
            center: crate::geom::Point2::new(num(1)?, num(2)?),
            radius: num(3)?,
            side,
        };
        asset.validate()?;
        assets.push(asset);
    }
    if assets.is_empty() {
        return Err(err("no coin assets".into()));
    }
    Ok(assets)
}

fn cmd_synth(a: SynthArgs, seed: Option<u64>, cfg: &Config) -> Result<()> {
    let seed = require_seed(seed, cfg)?;
    let faces = load_manifest(&a.faces)?;
    let assets = match (&a.assets, a.procedural) {
        (Some(p), None) => load_assets(p)?,
        (None, Some(n)) if n > 0 => (0..n)
            .map(|i| {
                let side = if i % 2 == 0 { CoinSide::Heads } else { CoinSide::Tails };
                procedural_asset(&format!("proc_{i}"), side, 96)
            })
            .collect(),
        _ => {
            return Err(Error::InvalidArgument(
                "exactly one of --assets or --procedural N is required".into(),
            ))
        }
    };
    let mode = match a.mode {
        ScaleModeArg::Ipd => ScaleMode::Ipd,
        ScaleModeArg::Inner => ScaleMode::InnerCorner,
    };
    let mut sc = SynthConfig::default();
    sc.jitter = resolve(a.jitter, cfg, "synth.jitter", sc.jitter)?;
    sc.rotation_deg.0 = resolve(None, cfg, "synth.rotation_min", sc.rotation_deg.0)?;
    sc.rotation_deg.1 = resolve(None, cfg, "synth.rotation_max", sc.rotation_deg.1)?;
    sc.blur_sigma.0 = resolve(None, cfg, "synth.blur_min", sc.blur_sigma.0)?;
    sc.blur_sigma.1 = resolve(None, cfg, "synth.blur_max", sc.blur_sigma.1)?;

    std::fs::create_dir_all(&a.out_dir).map_err(|source| Error::Io {
        path: a.out_dir.clone(),
        source,
    })?;
    let rng = SeededRng::new(seed);
    let out = generate_dataset(&faces, &assets, mode, &sc, &rng, &a.out_dir)?;
    let skipped = faces.len() - out.manifest.len();
    eprintln!(
        "synth: {} composites written to {}, {} faces skipped",
        out.manifest.len(),
        a.out_dir.display(),
        skipped
    );
    println!("generated:{} skipped:{}", out.manifest.len(), skipped);
    Ok(())
}

fn load_negatives(dir: &Path) -> Result<Vec<Raster>> {
    let rd = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png" | "jpg" | "jpeg")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no negative images in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| Raster::load(p)).collect()
}

fn class_setup(class: ClassArg) -> (DetectorClass, LandmarkRole, HogParams) {
    match class {
        ClassArg::Face => (DetectorClass::Face, LandmarkRole::Anchors, HogParams::face()),
        ClassArg::Nose => (DetectorClass::Nose, LandmarkRole::Nose, HogParams::nose()),
        ClassArg::Coin => (DetectorClass::Coin, LandmarkRole::Coin, HogParams::coin()),
    }
}

fn cmd_train_detector(a: TrainDetectorArgs, seed: Option<u64>, cfg: &Config) -> Result<()> {
    let seed = require_seed(seed, cfg)?;
    let (class, role, mut params) = class_setup(a.class);
    params.decision_threshold = resolve(a.threshold, cfg, "hog.threshold", params.decision_threshold)?;
    let manifest = load_manifest(&a.manifest)?;
    if manifest.role != role {
        return Err(Error::Manifest {
            path: a.manifest.clone(),
            message: format!("expected a {role:?}-role manifest for this detector class"),
        });
    }
    let boxes: Vec<Vec<_>> = manifest
        .records
        .iter()
        .map(|r| ground_truth_box(&r.landmarks, role, params.window_w, params.window_h).map(|b| vec![b]))
        .collect::<Result<_>>()?;
    let negatives = load_negatives(&a.negatives)?;

    let defaults = TrainOptions::default();
    let opts = TrainOptions {
        lambda: resolve(a.lambda, cfg, "hog.lambda", defaults.lambda)?,
        epochs: resolve(a.epochs, cfg, "hog.epochs", defaults.epochs)?,
        mining_rounds: resolve(a.mining_rounds, cfg, "hog.mining_rounds", defaults.mining_rounds)?,
        negatives_per_round: resolve(None, cfg, "hog.negatives_per_round", defaults.negatives_per_round)?,
    };
    eprintln!(
        "train-detector: {:?}, {} positives, {} negative images, {} epochs",
        class,
        manifest.len(),
        negatives.len(),
        opts.epochs
    );
    let positives = PositiveSet { manifest: &manifest, boxes };
    let rng = SeededRng::new(seed);
    let model = train_detector(&positives, &negatives, class, params, &rng, &opts)?;
    save_detector(&model, &a.out)?;
    eprintln!("train-detector: saved {}", a.out.display());
    println!("detector:{} positives:{}", a.out.display(), manifest.len());
    Ok(())
}

fn stage_setup(stage: StageArg) -> (LandmarkRole, usize, &'static str) {
    match stage {
        StageArg::Nose => (LandmarkRole::Nose, NOSE_FEATURE_MAPS, "nose"),
        StageArg::Coin => (LandmarkRole::Coin, COIN_FEATURE_MAPS, "coin"),
    }
}

fn window_for(role: LandmarkRole) -> (usize, usize) {
    match role {
        LandmarkRole::Nose => (HogParams::nose().window_w, HogParams::nose().window_h),
        LandmarkRole::Coin => (HogParams::coin().window_w, HogParams::coin().window_h),
        LandmarkRole::Anchors => (HogParams::face().window_w, HogParams::face().window_h),
    }
}

fn boxes_for(manifest: &Manifest, role: LandmarkRole) -> Result<Vec<crate::geom::BBox>> {
    let (w, h) = window_for(role);
    manifest
        .records
        .iter()
        .map(|r| ground_truth_box(&r.landmarks, role, w, h))
        .collect()
}

fn stage_params(role: LandmarkRole) -> HogParams {
    match role {
        LandmarkRole::Nose => HogParams::nose(),
        LandmarkRole::Coin => HogParams::coin(),
        LandmarkRole::Anchors => HogParams::face(),
    }
}

fn cmd_train_cnn(a: TrainCnnArgs, seed: Option<u64>, cfg: &Config) -> Result<()> {
    let seed = require_seed(seed, cfg)?;
    let (role, maps, name) = stage_setup(a.stage);
    let mut manifest = load_manifest(&a.manifest)?;
    if manifest.role != role {
        return Err(Error::Manifest {
            path: a.manifest.clone(),
            message: format!("expected a {role:?}-role manifest for the {name} stage"),
        });
    }
    if let Some(dir) = &a.augment_flips {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        manifest = augment_with_flips(&manifest, dir)?;
    }

    let defaults = TrainConfig::default();
    let tcfg = TrainConfig {
        learning_rate: resolve(a.lr, cfg, "train.lr", defaults.learning_rate)?,
        momentum: resolve(a.momentum, cfg, "train.momentum", defaults.momentum)?,
        batch_size: resolve(a.batch, cfg, "train.batch", defaults.batch_size)?,
        patience: resolve(a.patience, cfg, "train.patience", defaults.patience)?,
        max_epochs: resolve(a.epochs, cfg, "train.epochs", defaults.max_epochs)?,
        seed,
    };
    let fraction = resolve(a.train_fraction, cfg, "train.fraction", 0.7)?;

    let jitter = resolve(a.box_jitter, cfg, "train.box_jitter", 0.1)?;

    let rng = SeededRng::new(seed);
    let (train_m, val_m) = split(&manifest, fraction, &rng)?;
    let params = stage_params(role);
    let mut jrng = rng.child("boxjitter");
    let train_boxes =
        crate::pipeline::training_boxes(&train_m, role, &params, jitter, &mut jrng)?;
    let val_boxes = crate::pipeline::training_boxes(&val_m, role, &params, jitter, &mut jrng)?;
    let (train_set, stats) = build_cnn_dataset(&train_m, &train_boxes, None)?;
    let (val_set, _) = build_cnn_dataset(&val_m, &val_boxes, Some(stats))?;
    eprintln!(
        "train-cnn: {name}, {} train / {} val samples, batch {}, up to {} epochs",
        train_set.len(),
        val_set.len(),
        tcfg.batch_size,
        tcfg.max_epochs
    );

    let model = CnnModel::init(CNN_INPUT, landmark_specs(maps), stats, &rng.child("init"))?;
    let (trained, history) = train(&model, &train_set, &val_set, &tcfg)?;
    save_weights(&trained, &a.out)?;
    let best = history.best_epoch;
    eprintln!(
        "train-cnn: best epoch {best}, val {:.6}, saved {}",
        history.val_loss[best],
        a.out.display()
    );
    println!(
        "weights:{} best_epoch:{} val_loss:{:.6}",
        a.out.display(),
        best,
        history.val_loss[best]
    );
    Ok(())
}

fn cmd_finetune(a: FinetuneArgs, seed: Option<u64>, cfg: &Config) -> Result<()> {
    let seed = require_seed(seed, cfg)?;
    let (role, _, name) = stage_setup(a.stage);
    let base = load_weights(&a.base)?;
    let mut manifest = load_manifest(&a.manifest)?;
    if manifest.role != role {
        return Err(Error::Manifest {
            path: a.manifest.clone(),
            message: format!("expected a {role:?}-role manifest for the {name} stage"),
        });
    }
    if let Some(dir) = &a.augment_flips {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        manifest = augment_with_flips(&manifest, dir)?;
    }

    let defaults = TrainConfig::default();
    let tcfg = TrainConfig {
        learning_rate: resolve(a.lr, cfg, "finetune.lr", defaults.learning_rate)?,
        patience: resolve(a.patience, cfg, "finetune.patience", defaults.patience)?,
        max_epochs: resolve(a.epochs, cfg, "finetune.epochs", defaults.max_epochs)?,
        batch_size: 1,
        momentum: defaults.momentum,
        seed,
    };
    let boxes = boxes_for(&manifest, role)?;
    let rng = SeededRng::new(seed);
    eprintln!("finetune: {name}, {} samples, up to {} epochs", manifest.len(), tcfg.max_epochs);
    let (tuned, history) = transfer_train(&base, &manifest, &boxes, &tcfg, &rng)?;
    save_weights(&tuned, &a.out)?;
    let best = history.best_epoch;
    eprintln!(
        "finetune: best epoch {best}, val {:.6}, saved {}",
        history.val_loss[best],
        a.out.display()
    );
    println!(
        "weights:{} best_epoch:{} val_loss:{:.6}",
        a.out.display(),
        best,
        history.val_loss[best]
    );
    Ok(())
}

/// Load the five stage models from a directory laid out as written by the
/// training commands: face.hogd, nose.hogd, coin.hogd, nose.papw, coin.papw.
pub fn load_stage_models(dir: &Path) -> Result<StageModels> {
    Ok(StageModels {
        face: load_detector(&dir.join("face.hogd"))?,
        nose: load_detector(&dir.join("nose.hogd"))?,
        coin: load_detector(&dir.join("coin.hogd"))?,
        nose_cnn: load_weights(&dir.join("nose.papw"))?,
        coin_cnn: load_weights(&dir.join("coin.papw"))?,
        chart: SizeChart::default(),
    })
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io { path: p.clone(), source }),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let models = load_stage_models(&a.models)?;
    let image = Raster::load(&a.image)?;
    let result = run_pipeline(&image, &models)?;
    let line = result.to_record_line(&a.image.to_string_lossy());
    write_or_print(&a.out, &line)?;
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let models = load_stage_models(&a.models)?;
    let manifest = load_manifest(&a.manifest)?;
    eprintln!("evaluate: {} samples", manifest.len());
    let (report, outcomes) = evaluate_manifest(&manifest, &models)?;
    if let Some(p) = &a.outcomes {
        let mut text = String::from("image,actual,predicted,predicted_width_mm,tolerant,failure\n");
        for o in &outcomes {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                o.image,
                o.actual,
                o.predicted.map(|s| s.to_string()).unwrap_or_default(),
                o.predicted_width_mm.map(|w| format!("{w:.3}")).unwrap_or_default(),
                o.tolerant.map(|t| t.to_string()).unwrap_or_default(),
                o.failure.clone().unwrap_or_default(),
            ));
        }
        std::fs::write(p, text).map_err(|source| Error::Io { path: p.clone(), source })?;
    }
    write_or_print(&a.out, &report.render())?;
    Ok(())
}

fn cmd_report_matrix(a: ReportMatrixArgs) -> Result<()> {
    let matrix = match (&a.csv, a.published) {
        (Some(p), false) => ConfusionMatrix::from_csv(p)?,
        (None, true) => published_matrix(),
        _ => {
            return Err(Error::InvalidArgument(
                "exactly one of --csv or --published is required".into(),
            ))
        }
    };
    let report = MetricsReport::from_matrix(matrix)?;
    print!("{}", report.render());
    Ok(())
}
