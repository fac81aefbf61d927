use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use viewfuse::fusion_eval::{evaluate, fuse as fuse_scores, FusionMode, Side, SplitProtocol};
use viewfuse::imgproc::{SilhouetteConfig, SsimParams};
use viewfuse::keyframe::{extract_keyframes, KeyframeConfig, PairFrame, SsiiInput};
use viewfuse::learn::{load_model, save_model, train as train_model, AdamConfig};
use viewfuse::pipeline::{manifest_features, predict_all, FeatureConfig, KeyframePooling, Stream};
use viewfuse::rankpool::{dynamic_image, exact_rank_pool, RankPoolConfig};
use viewfuse::synthgen::{generate, write_corpus, Manifest, ManifestEntry, SynthConfig};
use viewfuse::tensorio::{read_tensor, write_frame, write_tensor, PnmFormat, Tensor};
use viewfuse::{Error, Result};

use crate::io::{
    config_path, invalid, labels_from_manifest, load_video, read_aligned_scores, write_json, write_scores, write_text,
    ScoreRow,
};

/// What every subcommand records beside its outputs.
#[derive(Serialize)]
struct ResolvedConfig<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    settings: &'a T,
}

fn record<T: Serialize>(out: &Path, command: &str, seed: u64, settings: &T) -> Result<()> {
    write_json(
        &config_path(out),
        &ResolvedConfig {
            command,
            seed,
            settings,
        },
    )
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for frames and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub num_classes: usize,
    #[arg(long, default_value_t = 8)]
    pub subjects: usize,
    #[arg(long, default_value_t = 3)]
    pub views: usize,
    #[arg(long, default_value_t = 16)]
    pub frames_per_video: usize,
    #[arg(long, default_value_t = 64)]
    pub frame_side: usize,
    #[arg(long, default_value_t = 0.02)]
    pub noise_sigma: f64,
}

pub fn synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let cfg = SynthConfig {
        num_classes: a.num_classes,
        subjects: a.subjects,
        views: a.views,
        frames_per_video: a.frames_per_video,
        frame_side: a.frame_side,
        noise_sigma: a.noise_sigma,
        seed,
    };
    let corpus = generate(&cfg)?;
    let manifest = write_corpus(&corpus, &a.out)?;
    log::info!("wrote {} sequences to {}", manifest.sequences.len(), a.out.display());
    #[derive(Serialize)]
    struct Settings<'a> {
        synth: &'a SynthConfig,
        warnings: &'a [String],
    }
    record(
        &a.out,
        "synth",
        seed,
        &Settings {
            synth: &cfg,
            warnings: &corpus.warnings,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairFrameArg {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SsiiInputArg {
    Raw,
    Silhouette,
}

/// Key-frame and SSIM settings shared by `keyframes`, `train` and `predict`.
#[derive(Debug, Clone, Args)]
pub struct KeyframeFlags {
    /// Number of key frames to keep.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Which frame of a selected pair is kept.
    #[arg(long, value_enum, default_value = "first")]
    pub pair_frame: PairFrameArg,
    /// Compare raw depth frames or their ROI'd silhouettes.
    #[arg(long, value_enum, default_value = "silhouette")]
    pub ssii_input: SsiiInputArg,
    /// Luminance exponent.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Contrast exponent.
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Structure exponent.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub k1: f64,
    #[arg(long, default_value_t = 9e-4)]
    pub k2: f64,
    /// Defaults to k2 / 2.
    #[arg(long)]
    pub k3: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub window_radius: usize,
    #[arg(long, default_value_t = 1.5)]
    pub window_sigma: f64,
    /// Depth values above this count as foreground.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
}

impl KeyframeFlags {
    fn config(&self, side: usize) -> KeyframeConfig {
        KeyframeConfig {
            k: self.k,
            ssim: SsimParams {
                alpha: self.alpha,
                beta: self.beta,
                gamma_exp: self.gamma,
                k1: self.k1,
                k2: self.k2,
                k3: self.k3.unwrap_or(self.k2 / 2.0),
                window_radius: self.window_radius,
                window_sigma: self.window_sigma,
            },
            pair_frame: match self.pair_frame {
                PairFrameArg::First => PairFrame::First,
                PairFrameArg::Second => PairFrame::Second,
            },
            input: match self.ssii_input {
                SsiiInputArg::Raw => SsiiInput::Raw,
                SsiiInputArg::Silhouette => SsiiInput::Silhouette,
            },
            side,
            silhouette: SilhouetteConfig {
                threshold: self.threshold,
                ..SilhouetteConfig::default()
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct KeyframesArgs {
    /// Depth video: a directory of PGM frames or an RPT1 tensor.
    #[arg(long)]
    pub video: PathBuf,
    /// Output directory for ssii.csv, keyframes.json and keyframes.rpt.
    #[arg(long)]
    pub out: PathBuf,
    /// Side of the square ROI frames.
    #[arg(long, default_value_t = 227)]
    pub side: usize,
    #[command(flatten)]
    pub keyframes: KeyframeFlags,
}

pub fn keyframes(a: &KeyframesArgs, seed: u64) -> Result<()> {
    let video = load_video(&a.video)?;
    let cfg = a.keyframes.config(a.side);
    let (ssii, selection, stack) = extract_keyframes(&video, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    let mut csv = String::from("rank,pair_index,ssii\n");
    for (rank, e) in ssii.entries.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{}", rank + 1, e.pair_index, e.ssii);
    }
    write_text(&a.out.join("ssii.csv"), &csv)?;
    #[derive(Serialize)]
    struct Selection<'a> {
        frame_indices: &'a [usize],
        k_requested: usize,
        kept: &'a [usize],
        dropped: &'a [(usize, String)],
    }
    write_json(
        &a.out.join("keyframes.json"),
        &Selection {
            frame_indices: &selection.frame_indices,
            k_requested: selection.k_requested,
            kept: &stack.kept,
            dropped: &stack.dropped,
        },
    )?;
    write_tensor(
        &stack.to_tensor()?.with_sequence_meta(&video.meta)?,
        a.out.join("keyframes.rpt"),
    )?;
    record(&a.out, "keyframes", seed, &cfg)
}

#[derive(Debug, Args)]
pub struct EncodeDiArgs {
    /// RGB or depth video: a directory of PGM/PPM frames or an RPT1 tensor.
    #[arg(long)]
    pub video: PathBuf,
    /// Output directory for di_raw.rpt and the normalized display image.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn encode_di(a: &EncodeDiArgs, seed: u64) -> Result<()> {
    let video = load_video(&a.video)?;
    let di = dynamic_image(&video)?;
    std::fs::create_dir_all(&a.out)?;
    write_tensor(
        &Tensor::from_frames(std::slice::from_ref(&di.raw))?,
        a.out.join("di_raw.rpt"),
    )?;
    let fmt = PnmFormat::for_channels(di.display.channels()).ok_or(Error::ChannelMismatch {
        expected: 3,
        actual: di.display.channels(),
    })?;
    write_frame(&di.display, a.out.join(format!("di_display.{}", fmt.extension())), fmt)?;
    #[derive(Serialize)]
    struct Settings<'a> {
        video: &'a Path,
        frames: usize,
    }
    record(
        &a.out,
        "encode-di",
        seed,
        &Settings {
            video: &a.video,
            frames: video.len(),
        },
    )
}

#[derive(Debug, Args)]
pub struct RankpoolArgs {
    /// RPT1 tensor of shape [frames, dim].
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Initial step size.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn rankpool_exact(a: &RankpoolArgs, seed: u64) -> Result<()> {
    let seq = read_tensor(&a.features)?.to_feature_sequence()?;
    let cfg = RankPoolConfig {
        lambda: a.lambda,
        step: a.step,
        max_iter: a.max_iter,
        tol: a.tol,
    };
    let rv = exact_rank_pool(&seq, &cfg)?;
    if !rv.converged {
        log::warn!("rank pooling stopped at max_iter={} before converging", a.max_iter);
    }
    write_json(&a.out, &rv)?;
    record(&a.out, "rankpool-exact", seed, &cfg)
}

/// Train/test split flags. Without any, views 1 and 2 train and view 3 tests.
#[derive(Debug, Clone, Args)]
pub struct SplitFlags {
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["train_subjects", "test_subjects"])]
    pub train_views: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub test_views: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub train_subjects: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub test_subjects: Vec<u32>,
}

impl SplitFlags {
    fn protocol(&self) -> Result<SplitProtocol> {
        let views = !self.train_views.is_empty() || !self.test_views.is_empty();
        let subjects = !self.train_subjects.is_empty() || !self.test_subjects.is_empty();
        match (views, subjects) {
            (true, true) => Err(invalid("give either view or subject split flags, not both")),
            (false, true) => SplitProtocol::cross_subject(self.train_subjects.clone(), self.test_subjects.clone()),
            (true, false) => SplitProtocol::cross_view(self.train_views.clone(), self.test_views.clone()),
            (false, false) => SplitProtocol::cross_view([1, 2], [3]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StreamArg {
    Motion,
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    Mean,
    Concatenate,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus manifest.json.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub stream: StreamArg,
    /// Output model directory.
    #[arg(long)]
    pub model_out: PathBuf,
    #[command(flatten)]
    pub split: SplitFlags,
    #[arg(long, default_value_t = 80)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Share of each training class held out for model selection.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Side the dynamic image is shrunk to (motion stream).
    #[arg(long, default_value_t = 8)]
    pub motion_side: usize,
    /// Side of the ROI key frames (STD stream).
    #[arg(long, default_value_t = 32)]
    pub std_side: usize,
    /// How key frames combine into one STD feature.
    #[arg(long, value_enum, default_value = "mean")]
    pub pooling: PoolingArg,
    #[command(flatten)]
    pub keyframes: KeyframeFlags,
}

/// Settings stored with a model so `predict` extracts matching features.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelExtra {
    stream: Stream,
    features: FeatureConfig,
    protocol: SplitProtocol,
    val_fraction: f64,
    manifest: PathBuf,
}

fn manifest_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn entries_on<'a>(manifest: &'a Manifest, protocol: &SplitProtocol, side: Side) -> Vec<&'a ManifestEntry> {
    let mut out: Vec<&ManifestEntry> = manifest
        .sequences
        .iter()
        .filter(|e| protocol.side(&e.meta()) == Some(side))
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

pub fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    let manifest = Manifest::read(&a.manifest)?;
    let protocol = a.split.protocol()?;
    let stream = match a.stream {
        StreamArg::Motion => Stream::Motion,
        StreamArg::Std => Stream::Std,
    };
    let features = FeatureConfig {
        motion_side: a.motion_side,
        keyframes: a.keyframes.config(a.std_side),
        pooling: match a.pooling {
            PoolingArg::Mean => KeyframePooling::Mean,
            PoolingArg::Concatenate => KeyframePooling::Concatenate,
        },
    };
    let adam = AdamConfig {
        learning_rate: a.learning_rate,
        beta1: a.beta1,
        beta2: a.beta2,
        epsilon: a.epsilon,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed,
    };
    let entries = entries_on(&manifest, &protocol, Side::Train);
    if entries.is_empty() {
        return Err(invalid("the split leaves no training sequences"));
    }
    let x = manifest_features(manifest_dir(&a.manifest), &entries, stream, &features)?;
    let samples: Vec<(Vec<f64>, usize)> = x
        .into_iter()
        .zip(&entries)
        .map(|(f, e)| (f, e.class_id as usize))
        .collect();
    let (model, log) = train_model(&samples, manifest.num_classes, &adam, a.val_fraction)?;
    log::info!(
        "{stream}: {} training / {} validation samples, kept epoch {}",
        log.n_train,
        log.n_val,
        log.best_epoch
    );
    let extra = ModelExtra {
        stream,
        features,
        protocol,
        val_fraction: a.val_fraction,
        manifest: a.manifest.clone(),
    };
    save_model(&model, &adam, serde_json::to_value(&extra)?, &a.model_out)?;
    write_json(&a.model_out.join("training_log.json"), &log)?;
    #[derive(Serialize)]
    struct Settings<'a> {
        model: &'a ModelExtra,
        adam: &'a AdamConfig,
    }
    record(
        &a.model_out,
        "train",
        seed,
        &Settings {
            model: &extra,
            adam: &adam,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus manifest; defaults to the one the model was trained on.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Which side of the model's split to score.
    #[arg(long, value_enum, default_value = "test")]
    pub subset: SubsetArg,
    /// Output scores CSV (seq_id,label,p0,...).
    #[arg(long)]
    pub scores_out: PathBuf,
}

pub fn predict(a: &PredictArgs, seed: u64) -> Result<()> {
    let (model, sidecar) = load_model(&a.model)?;
    let extra: ModelExtra = serde_json::from_value(sidecar.extra.clone())
        .map_err(|e| invalid(format!("model sidecar lacks feature settings: {e}")))?;
    let manifest_path = a.manifest.clone().unwrap_or_else(|| extra.manifest.clone());
    let manifest = Manifest::read(&manifest_path)?;
    if manifest.num_classes != model.num_classes {
        return Err(Error::Shape(format!(
            "manifest has {} classes, model {}",
            manifest.num_classes, model.num_classes
        )));
    }
    let entries = match a.subset {
        SubsetArg::Train => entries_on(&manifest, &extra.protocol, Side::Train),
        SubsetArg::Test => entries_on(&manifest, &extra.protocol, Side::Test),
        SubsetArg::All => {
            let mut all: Vec<&ManifestEntry> = manifest.sequences.iter().collect();
            all.sort_by(|a, b| a.id.cmp(&b.id));
            all
        }
    };
    if entries.is_empty() {
        return Err(invalid("no sequences to score"));
    }
    let x = manifest_features(manifest_dir(&manifest_path), &entries, extra.stream, &extra.features)?;
    let rows: Vec<ScoreRow> = predict_all(&model, &x)?
        .into_iter()
        .zip(&entries)
        .map(|(scores, e)| ScoreRow {
            seq_id: e.id.clone(),
            label: e.class_id as usize,
            scores,
        })
        .collect();
    write_scores(&a.scores_out, &rows)?;
    #[derive(Serialize)]
    struct Settings<'a> {
        model: &'a Path,
        manifest: &'a Path,
        subset: &'a str,
        stream: Stream,
    }
    record(
        &a.scores_out,
        "predict",
        seed,
        &Settings {
            model: &a.model,
            manifest: &manifest_path,
            subset: match a.subset {
                SubsetArg::Train => "train",
                SubsetArg::Test => "test",
                SubsetArg::All => "all",
            },
            stream: extra.stream,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Maximum,
    Average,
    Product,
}

impl From<ModeArg> for FusionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Maximum => FusionMode::Maximum,
            ModeArg::Average => FusionMode::Average,
            ModeArg::Product => FusionMode::Product,
        }
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Score CSVs to fuse; repeat the flag for each stream.
    #[arg(long = "scores", required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Output fused scores CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn fuse(a: &FuseArgs, seed: u64) -> Result<()> {
    let tables = read_aligned_scores(&a.scores)?;
    let mode = FusionMode::from(a.mode);
    let rows = (0..tables[0].len())
        .map(|i| {
            let row: Vec<_> = tables.iter().map(|t| t[i].scores.clone()).collect();
            Ok(ScoreRow {
                seq_id: tables[0][i].seq_id.clone(),
                label: tables[0][i].label,
                scores: fuse_scores(&row, mode)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_scores(&a.out, &rows)?;
    #[derive(Serialize)]
    struct Settings<'a> {
        scores: &'a [PathBuf],
        mode: FusionMode,
    }
    record(
        &a.out,
        "fuse",
        seed,
        &Settings {
            scores: &a.scores,
            mode,
        },
    )
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Per-stream score CSVs, aligned by row; repeat the flag for each stream.
    #[arg(long = "scores", required = true)]
    pub scores: Vec<PathBuf>,
    /// Stream names, comma separated; defaults to the file stems.
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
    /// Manifest whose class ids replace the label column.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Fusion modes to report, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "maximum,average,product")]
    pub modes: Vec<ModeArg>,
    /// Output report JSON.
    #[arg(long)]
    pub report_out: PathBuf,
    /// ROC curve CSV; defaults to `<report stem>.roc.csv`.
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
}

pub fn eval(a: &EvalArgs, seed: u64) -> Result<()> {
    let tables = read_aligned_scores(&a.scores)?;
    let names: Vec<String> = if a.names.is_empty() {
        a.scores
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect()
    } else if a.names.len() == a.scores.len() {
        a.names.clone()
    } else {
        return Err(invalid(format!(
            "{} names for {} score files",
            a.names.len(),
            a.scores.len()
        )));
    };
    let labels = match &a.labels {
        Some(path) => {
            let m = Manifest::read(path)?;
            let classes: BTreeMap<String, usize> = m
                .sequences
                .iter()
                .map(|e| (e.id.clone(), e.class_id as usize))
                .collect();
            labels_from_manifest(&tables[0], &classes)?
        }
        None => tables[0].iter().map(|r| r.label).collect(),
    };
    let streams: Vec<(String, Vec<_>)> = names
        .iter()
        .cloned()
        .zip(tables.iter().map(|t| t.iter().map(|r| r.scores.clone()).collect()))
        .collect();
    let modes: Vec<FusionMode> = a.modes.iter().map(|&m| m.into()).collect();
    let evaluation = evaluate(&streams, &labels, &modes)?;
    write_text(&a.report_out, &evaluation.to_json()?)?;
    let roc_out = a.roc_out.clone().unwrap_or_else(|| {
        let stem = a
            .report_out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        a.report_out.with_file_name(format!("{stem}.roc.csv"))
    });
    write_text(&roc_out, &evaluation.roc_csv())?;
    for r in &evaluation.reports {
        log::info!("{}: accuracy {:.4}", r.name, r.report.accuracy);
    }
    #[derive(Serialize)]
    struct Settings<'a> {
        scores: &'a [PathBuf],
        names: &'a [String],
        labels: Option<&'a Path>,
        modes: &'a [FusionMode],
        roc_out: &'a Path,
    }
    record(
        &a.report_out,
        "eval",
        seed,
        &Settings {
            scores: &a.scores,
            names: &names,
            labels: a.labels.as_deref(),
            modes: &modes,
            roc_out: &roc_out,
        },
    )
}
