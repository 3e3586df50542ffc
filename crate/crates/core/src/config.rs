//! Experiment configuration files.
//!
//! ```text
//! # comment
//! seed = 7
//!
//! [data]
//! path = blobs.bin
//!
//! [model]
//! variant = imsat_vat
//! clusters = 4
//! hidden = 10, 10
//! ```
//!
//! One `key = value` per line. `[name]` starts a section; keys before the
//! first section belong to the top level. Lists are comma separated, pairs
//! are written `a:b`. Relative paths are resolved against the directory of
//! the config file. Unknown sections or keys and repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::augment::PerturbKind;
use crate::error::{Error, Result};
use crate::eval::RetrievalOptions;
use crate::objectives::PairCounting;
use crate::trainer::{Task, TrainConfig, Variant};

/// Parsed `section -> key -> (value, line number)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RawConfig {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(skip)]
    lines: BTreeMap<(String, String), usize>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RawConfig::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
                    .ok_or_else(|| Error::InvalidConfig(format!("line {lineno}: malformed section header {line:?}")))?;
                section = name.to_string();
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {lineno}: expected `key = value`, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::InvalidConfig(format!("line {lineno}: empty key")));
            }
            let prev = cfg
                .sections
                .entry(section.clone())
                .or_default()
                .insert(k.to_string(), v.to_string());
            if prev.is_some() {
                return Err(Error::InvalidConfig(format!("line {lineno}: key {k:?} repeated")));
            }
            cfg.lines.insert((section.clone(), k.to_string()), lineno);
        }
        Ok(cfg)
    }

    fn where_(&self, section: &str, key: &str) -> String {
        let name = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        match self.lines.get(&(section.to_string(), key.to_string())) {
            Some(l) => format!("{name} (line {l})"),
            None => name,
        }
    }
}

/// Typed access that records which keys were consumed.
struct Reader<'a> {
    raw: &'a RawConfig,
    used: std::cell::RefCell<Vec<(String, String)>>,
}

impl<'a> Reader<'a> {
    fn str(&self, section: &str, key: &str) -> Option<&'a str> {
        let v = self.raw.sections.get(section)?.get(key)?;
        self.used.borrow_mut().push((section.to_string(), key.to_string()));
        Some(v.as_str())
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.str(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("{}: cannot parse {v:?}", self.raw.where_(section, key)))
            }),
        }
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.str(section, key) {
            None => Ok(None),
            Some("") => Ok(Some(Vec::new())),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("{}: cannot parse list {v:?}", self.raw.where_(section, key)))),
        }
    }

    fn range(&self, section: &str, key: &str) -> Result<Option<(f64, f64)>> {
        match self.list::<f64>(section, key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 && v[0] <= v[1] => Ok(Some((v[0], v[1]))),
            Some(_) => Err(Error::InvalidConfig(format!(
                "{}: expected `low, high`",
                self.raw.where_(section, key)
            ))),
        }
    }

    fn reject_unknown(&self) -> Result<()> {
        let used = self.used.borrow();
        for (section, keys) in &self.raw.sections {
            for key in keys.keys() {
                if !used.iter().any(|(s, k)| s == section && k == key) {
                    return Err(Error::InvalidConfig(format!(
                        "unknown key {}",
                        self.raw.where_(section, key)
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Native,
    Csv,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSource {
    pub path: PathBuf,
    pub format: DataFormat,
    /// IDX label file.
    pub labels: Option<PathBuf>,
    /// CSV label column (0-based).
    pub label_column: Option<usize>,
    pub image_shape: Option<(usize, usize)>,
    /// Keep only the first `limit` rows.
    pub limit: Option<usize>,
    /// Affine-distorted copies appended per point before training.
    pub expand: usize,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSource,
    pub train: TrainConfig,
    #[serde(skip)]
    pub retrieval: RetrievalOptions,
    pub out_dir: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Option<(usize, usize)> {
    let (h, w) = s.split_once(['x', 'X'])?;
    Some((h.trim().parse().ok()?, w.trim().parse().ok()?))
}

impl ExperimentConfig {
    pub fn load(path: &Path, task: Task) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_text(&text, base, task)
    }

    /// Builds the experiment for `task` from config text; relative paths are
    /// joined to `base`.
    pub fn parse_text(text: &str, base: &Path, task: Task) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        for s in raw.sections.keys() {
            if !["", "data", "model", "train", "affine", "eval", "output"].contains(&s.as_str()) {
                return Err(Error::InvalidConfig(format!("unknown section [{s}]")));
            }
        }
        let r = Reader {
            raw: &raw,
            used: Default::default(),
        };
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let seed = r.parse::<u64>("", "seed")?.unwrap_or(0);

        let path = r
            .str("data", "path")
            .map(resolve)
            .ok_or_else(|| Error::InvalidConfig("missing data.path".into()))?;
        let format = match r.str("data", "format") {
            Some("native") => DataFormat::Native,
            Some("csv") => DataFormat::Csv,
            Some("idx") => DataFormat::Idx,
            Some(other) => return Err(Error::InvalidConfig(format!("unknown data.format {other:?}"))),
            None => match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => DataFormat::Csv,
                Some("idx") | Some("idx3-ubyte") => DataFormat::Idx,
                _ => DataFormat::Native,
            },
        };
        let image_shape = match r.str("data", "image_shape") {
            None => None,
            Some(s) => Some(parse_shape(s).ok_or_else(|| {
                Error::InvalidConfig(format!("{}: expected HxW", raw.where_("data", "image_shape")))
            })?),
        };
        let data = DataSource {
            path,
            format,
            labels: r.str("data", "labels").map(resolve),
            label_column: r.parse("data", "label_column")?,
            image_shape,
            limit: r.parse("data", "limit")?,
            expand: r.parse("data", "expand")?.unwrap_or(0),
        };

        let n_out = match task {
            Task::Cluster => r.parse::<usize>("model", "clusters")?,
            Task::Hash => r.parse::<usize>("model", "bits")?,
        }
        .ok_or_else(|| {
            Error::InvalidConfig(match task {
                Task::Cluster => "missing model.clusters".into(),
                Task::Hash => "missing model.bits".into(),
            })
        })?;
        let mut t = match task {
            Task::Cluster => TrainConfig::clustering(n_out),
            Task::Hash => TrainConfig::hashing(n_out),
        };
        if let Some(h) = r.list("model", "hidden")? {
            t.hidden = h;
        }
        if let Some(v) = r.parse::<Variant>("model", "variant")? {
            t = t.with_variant(v);
        }
        t.init_scales = r.list("model", "init_scales")?;
        t.seed = seed;

        macro_rules! set {
            ($field:ident, $key:literal) => {
                if let Some(v) = r.parse("train", $key)? {
                    t.$field = v;
                }
            };
        }
        set!(lambda, "lambda");
        set!(regularizer, "regularizer");
        set!(alpha, "alpha");
        set!(t_neighbor, "t_neighbor");
        set!(xi, "xi");
        set!(power_iters, "power_iters");
        set!(weight_decay_rate, "weight_decay");
        set!(delta_frac, "delta_frac");
        set!(warm_start, "warm_start");
        set!(batch_size, "batch_size");
        set!(epochs, "epochs");
        set!(step_size, "step_size");
        set!(beta1, "beta1");
        set!(beta2, "beta2");
        set!(adam_eps, "adam_eps");
        t.fixed_eps = r.parse("train", "fixed_eps")?;
        t.prior_q = r.list("train", "prior")?;
        t.mu_schedule = r.list("train", "mu_schedule")?;
        if let Some(p) = r.str("train", "pairs") {
            t.pairs = match p {
                "ordered" => PairCounting::Ordered,
                "unordered" => PairCounting::Unordered,
                _ => return Err(Error::InvalidConfig(format!("train.pairs must be ordered|unordered, got {p:?}"))),
            };
        }
        if let Some(m) = r.list::<String>("train", "mixture")? {
            t.mixture = m
                .iter()
                .map(|item| {
                    let (k, w) = item.split_once(':').ok_or_else(|| {
                        Error::InvalidConfig(format!("train.mixture entry {item:?} must be kind:weight"))
                    })?;
                    let w: f64 = w
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad mixture weight in {item:?}")))?;
                    Ok((PerturbKind::from_str(k.trim())?, w))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = r.range("affine", "scale")? {
            t.affine.scale = v;
        }
        if let Some(v) = r.range("affine", "translate")? {
            t.affine.translate = v;
        }
        if let Some(v) = r.range("affine", "rotate")? {
            t.affine.rotate_deg = v;
        }
        if let Some(v) = r.range("affine", "shear")? {
            t.affine.shear = v;
        }

        let mut retrieval = RetrievalOptions {
            seed,
            ..RetrievalOptions::default()
        };
        if let Some(v) = r.parse("eval", "top_n")? {
            retrieval.top_n = v;
        }
        if let Some(v) = r.parse("eval", "radius")? {
            retrieval.radius = v;
        }
        if let Some(v) = r.parse("eval", "queries_per_class")? {
            retrieval.queries_per_class = v;
        }
        let out_dir = r.str("output", "dir").map(resolve);
        r.reject_unknown()?;

        Ok(Self {
            seed,
            data,
            train: t,
            retrieval,
            out_dir,
        })
    }

    /// Replaces the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.retrieval.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::Regularizer;

    const TEXT: &str = "
# blobs
seed = 3

[data]
path = d/blobs.bin
image_shape = 2x1

[model]
clusters = 4
hidden = 10, 10

[train]
regularizer = composite
mixture = vat:0.25, affine:0.75
mu_schedule = 0.1, 0.5
epochs = 5  # short
batch_size = 100

[affine]
rotate = -5, 5
";

    #[test]
    fn parses_sections() {
        let c = ExperimentConfig::parse_text(TEXT, Path::new("/cfg"), Task::Cluster).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.train.seed, 3);
        assert_eq!(c.data.path, PathBuf::from("/cfg/d/blobs.bin"));
        assert_eq!(c.data.format, DataFormat::Native);
        assert_eq!(c.data.image_shape, Some((2, 1)));
        assert_eq!(c.train.hidden, vec![10, 10]);
        assert_eq!(c.train.regularizer, Regularizer::Composite);
        assert_eq!(c.train.mixture, vec![(PerturbKind::Vat, 0.25), (PerturbKind::Affine, 0.75)]);
        assert_eq!(c.train.mu_schedule, Some(vec![0.1, 0.5]));
        assert_eq!((c.train.epochs, c.train.batch_size), (5, 100));
        assert_eq!(c.train.affine.rotate_deg, (-5.0, 5.0));
        assert_eq!(c.train.affine.scale, (0.8, 1.2));
    }

    #[test]
    fn errors() {
        let bad = |t: &str| ExperimentConfig::parse_text(t, Path::new("."), Task::Cluster).unwrap_err();
        assert!(matches!(bad("[data]\npath = x\n"), Error::InvalidConfig(m) if m.contains("clusters")));
        assert!(matches!(bad("[data]\npath = x\n[model]\nclusters = 2\nfoo = 1\n"), Error::InvalidConfig(m) if m.contains("model.foo")));
        assert!(matches!(bad("[nope]\n"), Error::InvalidConfig(_)));
        assert!(matches!(bad("seed = 1\nseed = 2\n"), Error::InvalidConfig(m) if m.contains("line 2")));
        assert!(matches!(bad("just words\n"), Error::InvalidConfig(_)));
        assert!(matches!(
            bad("[data]\npath = x\n[model]\nclusters = 2\n[train]\nepochs = many\n"),
            Error::InvalidConfig(m) if m.contains("train.epochs (line 6)")
        ));
    }

    #[test]
    fn variant_then_overrides() {
        let t = "[data]\npath=x\n[model]\nclusters=3\nvariant=deep_rim\n[train]\nweight_decay=0.01\n";
        let c = ExperimentConfig::parse_text(t, Path::new("."), Task::Cluster).unwrap();
        assert_eq!(c.train.regularizer, Regularizer::WeightDecay);
        assert_eq!(c.train.adam().weight_decay, 0.01);
    }
}
