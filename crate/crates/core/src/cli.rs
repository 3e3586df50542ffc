//! The `imsat` command-line tool.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 class-prior constraint unsatisfied (the best model is still written).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::augment::affine_distort;
use crate::config::{DataFormat, ExperimentConfig};
use crate::data::{gen_blobs, gen_glyphs, gen_spiral, load_csv, load_idx, BlobParams, Dataset, SpiralParams};
use crate::error::{Error, Result};
use crate::eval::{
    clustering_accuracy, retrieval_metrics, CodeBook, LabelSet, MetricsReport, RetrievalOptions,
};
use crate::matrix::Matrix;
use crate::nn::{checkpoint, MlpClassifier};
use crate::trainer::{encode, train_clustering, train_hashing, Task, TrainReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONSTRAINT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "imsat", version, about = "Clustering and hashing by information maximization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a clustering model and write assignments.
    Cluster(RunArgs),
    /// Train a hashing model and write binary codes.
    Hash(RunArgs),
    /// Score assignments or codes against labels.
    Eval(EvalArgs),
    /// Write a synthetic dataset in the native format.
    GenData(GenArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: `output.dir` from the config, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed and `IMSAT_SEED`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTask {
    Cluster,
    Hash,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One cluster id (decimal) or hash code (hex) per line.
    #[arg(long)]
    pub codes: PathBuf,
    /// One class id per line.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum, default_value = "cluster")]
    pub task: EvalTask,
    /// Code length; defaults to 4 × the hex width of the codes.
    #[arg(long)]
    pub bits: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub top_n: usize,
    #[arg(long, default_value_t = 2)]
    pub radius: u32,
    #[arg(long, default_value_t = 100)]
    pub queries_per_class: usize,
    /// Seed of the query sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metrics file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Spiral,
    Blobs,
    Glyphs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: DataKind,
    /// Destination file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    pub arcs: usize,
    #[arg(long, default_value_t = 300)]
    pub per_arc: usize,
    /// Gaussian noise std (spiral default 0.05, blobs default 0.5).
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub per_blob: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 100)]
    pub per_template: usize,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }

    /// Configuration problems map to 1, everything about the inputs to 2.
    fn classify(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::InvalidDistribution(_) | Error::InvalidState(_) => Self::config(e),
            Error::ConstraintUnsatisfied { .. } => Self {
                code: EXIT_CONSTRAINT,
                message: e.to_string(),
            },
            _ => Self::data(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub outputs: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub fingerprint: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Cluster(a) => cmd_train(a, Task::Cluster),
        Command::Hash(a) => cmd_train(a, Task::Hash),
        Command::Eval(a) => cmd_eval(a),
        Command::GenData(a) => cmd_gen_data(a),
    }
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("IMSAT_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::config(format!("IMSAT_SEED must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::data(Error::io(path, e)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).map_err(Failure::config)?;
    write_text(path, &(s + "\n"))
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let src = &cfg.data;
    if !src.path.exists() {
        return Err(Error::io(
            &src.path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
        ));
    }
    let mut ds = match src.format {
        DataFormat::Native => Dataset::load(&src.path)?,
        DataFormat::Csv => load_csv(&src.path, src.label_column)?,
        DataFormat::Idx => load_idx(&src.path, src.labels.as_deref())?,
    };
    if let Some(limit) = src.limit {
        let idx: Vec<usize> = (0..limit.min(ds.len())).collect();
        ds = ds.subset(&idx);
    }
    if let Some((h, w)) = src.image_shape {
        ds = ds.with_image_shape(h, w)?;
    }
    if src.expand > 0 {
        ds = expand_affine(&ds, src.expand, cfg)?;
    }
    Ok(ds)
}

/// Appends `copies` affine-distorted versions of every image.
fn expand_affine(ds: &Dataset, copies: usize, cfg: &ExperimentConfig) -> Result<Dataset> {
    let (h, w) = ds
        .image_shape
        .ok_or_else(|| Error::InvalidConfig("data.expand needs an image shape".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_e8a4);
    let n = ds.len();
    let mut data = ds.features.as_slice().to_vec();
    let mut labels = ds.labels.as_ref().map(|l| l.labels.clone());
    for _ in 0..copies {
        for r in 0..n {
            let img = Matrix::from_vec(h, w, ds.features.row(r).to_vec())?;
            data.extend_from_slice(affine_distort(&img, &cfg.train.affine, &mut rng)?.as_slice());
            if let (Some(out), Some(src)) = (labels.as_mut(), ds.labels.as_ref()) {
                out.push(src.labels[r]);
            }
        }
    }
    let features = Matrix::from_vec(n * (copies + 1), ds.dim(), data)?;
    let classes = ds.labels.as_ref().map_or(0, |l| l.classes);
    let labels = labels.map(|l| LabelSet::with_classes(l, classes)).transpose()?;
    Dataset::new(features, labels, ds.name.clone())?.with_image_shape(h, w)
}

fn cmd_train(args: &RunArgs, task: Task) -> CliResult<()> {
    let mut cfg = ExperimentConfig::load(&args.config, task).map_err(Failure::config)?;
    if let Some(s) = args.seed.or(env_seed()?) {
        cfg.set_seed(s);
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ds = load_dataset(&cfg).map_err(|e| match e {
        Error::InvalidConfig(_) => Failure::config(e),
        e => Failure::data(e),
    })?;
    if cfg.train.image_shape.is_none() {
        cfg.train.image_shape = ds.image_shape;
    }
    // Catch unusable retrieval settings before spending time on training.
    if let (Task::Hash, Some(labels)) = (task, &ds.labels) {
        let blank = CodeBook::hash(vec![0; ds.len()], cfg.train.n_out.min(64)).map_err(Failure::config)?;
        retrieval_metrics(&blank, labels, &cfg.retrieval).map_err(Failure::classify)?;
    }
    fs::create_dir_all(&out).map_err(|e| Failure::data(Error::io(&out, e)))?;

    let trained = match task {
        Task::Cluster => train_clustering(&ds.features, &cfg.train),
        Task::Hash => train_hashing(&ds.features, &cfg.train),
    };
    let (model, report, failure) = match trained {
        Ok((m, r)) => (m, r, None),
        Err(Error::ConstraintUnsatisfied {
            best_kl,
            delta,
            model,
            report,
        }) => {
            let f = Failure {
                code: EXIT_CONSTRAINT,
                message: format!(
                    "no penalty weight met the class-prior constraint (best KL {best_kl:.6} > delta {delta:.6}); best model written"
                ),
            };
            (*model, *report, Some(f))
        }
        Err(e) => return Err(Failure::classify(e)),
    };

    let outputs = write_artifacts(&out, task, &model, &report, &ds, &cfg)?;
    let manifest = RunManifest {
        tool: "imsat".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: match task {
            Task::Cluster => "cluster".into(),
            Task::Hash => "hash".into(),
        },
        seed: cfg.seed,
        dataset: DatasetInfo {
            name: ds.name.clone(),
            n: ds.len(),
            d: ds.dim(),
            fingerprint: ds.fingerprint(),
        },
        config: cfg,
        outputs,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    match failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn write_artifacts(
    out: &Path,
    task: Task,
    model: &MlpClassifier,
    report: &TrainReport,
    ds: &Dataset,
    cfg: &ExperimentConfig,
) -> CliResult<BTreeMap<String, PathBuf>> {
    let mut outputs = BTreeMap::new();
    let ckpt = out.join("model.ckpt");
    checkpoint::save(model, &ckpt).map_err(Failure::data)?;
    outputs.insert("checkpoint".into(), ckpt);

    let report_path = out.join("report.json");
    write_json(&report_path, report)?;
    outputs.insert("report".into(), report_path);

    let codes = encode(model, &ds.features).map_err(Failure::classify)?;
    let (name, file) = match task {
        Task::Cluster => ("assignments", "assignments.txt"),
        Task::Hash => ("codes", "codes.txt"),
    };
    let codes_path = out.join(file);
    write_text(&codes_path, &(codes.to_lines().join("\n") + "\n"))?;
    outputs.insert(name.into(), codes_path);

    if let Some(labels) = &ds.labels {
        let metrics = match task {
            Task::Cluster => MetricsReport::from_accuracy(&clustering_accuracy(&codes, labels).map_err(Failure::classify)?),
            Task::Hash => retrieval_metrics(&codes, labels, &cfg.retrieval).map_err(Failure::classify)?,
        };
        let metrics_path = out.join("metrics.json");
        write_json(&metrics_path, &metrics)?;
        outputs.insert("metrics".into(), metrics_path);
    }
    Ok(outputs)
}

fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(Error::io(path, e)))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn parse_codes(path: &Path, task: EvalTask, bits: Option<usize>) -> CliResult<CodeBook> {
    let lines = read_lines(path)?;
    let origin = path.display().to_string();
    let bad = |i: usize, m: String| Failure::data(Error::format(&origin, format!("line {}", i + 1), m));
    match task {
        EvalTask::Cluster => {
            let ids = lines
                .iter()
                .enumerate()
                .map(|(i, l)| l.parse::<usize>().map_err(|_| bad(i, format!("{l:?} is not a cluster id"))))
                .collect::<CliResult<Vec<_>>>()?;
            let k = ids.iter().copied().max().map_or(0, |m| m + 1);
            CodeBook::clusters(ids, k).map_err(Failure::data)
        }
        EvalTask::Hash => {
            let width = lines.first().map_or(0, String::len);
            let bits = bits.unwrap_or(4 * width);
            let codes = lines
                .iter()
                .enumerate()
                .map(|(i, l)| u64::from_str_radix(l, 16).map_err(|_| bad(i, format!("{l:?} is not a hex code"))))
                .collect::<CliResult<Vec<_>>>()?;
            CodeBook::hash(codes, bits).map_err(Failure::data)
        }
    }
}

fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    let codes = parse_codes(&a.codes, a.task, a.bits)?;
    let origin = a.labels.display().to_string();
    let labels = read_lines(&a.labels)?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.parse::<usize>()
                .map_err(|_| Failure::data(Error::format(&origin, format!("line {}", i + 1), format!("{l:?} is not a class id"))))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let labels = LabelSet::new(labels);
    if labels.len() != codes.len() {
        return Err(Failure::data(format!(
            "{} codes but {} labels",
            codes.len(),
            labels.len()
        )));
    }
    let metrics = match a.task {
        EvalTask::Cluster => MetricsReport::from_accuracy(&clustering_accuracy(&codes, &labels).map_err(Failure::classify)?),
        EvalTask::Hash => {
            let opts = RetrievalOptions {
                top_n: a.top_n,
                radius: a.radius,
                queries_per_class: a.queries_per_class,
                seed: match a.seed {
                    Some(s) => s,
                    None => env_seed()?.unwrap_or(0),
                },
            };
            retrieval_metrics(&codes, &labels, &opts).map_err(Failure::classify)?
        }
    };
    match &a.out {
        Some(p) => write_json(p, &metrics),
        None => {
            println!("{}", serde_json::to_string_pretty(&metrics).map_err(Failure::config)?);
            Ok(())
        }
    }
}

fn cmd_gen_data(a: &GenArgs) -> CliResult<()> {
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let ds = match a.kind {
        DataKind::Spiral => gen_spiral(&SpiralParams {
            arcs: a.arcs,
            per_arc: a.per_arc,
            noise_std: a.noise.unwrap_or(0.05),
            seed,
        }),
        DataKind::Blobs => gen_blobs(&BlobParams {
            k: a.k,
            per_blob: a.per_blob,
            dim: a.dim,
            separation: a.separation,
            noise_std: a.noise.unwrap_or(0.5),
            seed,
        }),
        DataKind::Glyphs => gen_glyphs(a.per_template, &crate::augment::AffineRanges::default(), seed),
    }
    .map_err(Failure::config)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::data(Error::io(dir, e)))?;
    }
    ds.save(&a.out).map_err(Failure::data)?;
    Ok(())
}
