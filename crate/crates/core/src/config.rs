//! Run configuration files.
//!
//! Line-based: `[section]` headers, `key = value` pairs, `#` comments and
//! blank lines. Every key is optional except `run.seed`; unknown sections and
//! keys are errors. Relative paths resolve against the config file's
//! directory.
//!
//! ```text
//! [run]        seed (required), threads
//! [network]    input_height, input_width, channels (comma list), lstm_hidden,
//!              projection_units, output_units, scale (decimal or a/b),
//!              extractor (residual|identity)
//! [optimizer]  rho, epsilon, batch_size, epochs, clip, reduction (sum|mean)
//! [data]       train_manifest, test_manifest
//! [gen]        out_dir, train_lengths, test_lengths (len:count,…), noise,
//!              jitter, spacing (min,max), scale (min,max), height, width
//! [decode]     decoder (greedy|beam), beam_width, prune_threshold
//! [train]      checkpoint_dir, log, train_eval_samples
//! ```
//!
//! A run takes its data either from `[data]` manifests or from the `[gen]`
//! dataset, never both.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ctc::Reduction;
use crate::decode::{BeamConfig, Decoder};
use crate::error::{Error, Result};
use crate::net::NetworkConfig;
use crate::optim::{DEFAULT_EPSILON, DEFAULT_RHO};
use crate::synth::{GenSpec, MANIFEST_FILE};
use crate::train::TrainOptions;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: u64,
    pub clip: Option<f64>,
    pub reduction: Reduction,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            rho: DEFAULT_RHO,
            epsilon: DEFAULT_EPSILON,
            batch_size: 32,
            epochs: 50,
            clip: None,
            reduction: Reduction::Sum,
        }
    }
}

impl OptimizerConfig {
    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            batch_size: self.batch_size,
            reduction: self.reduction,
            clip: self.clip,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub out_dir: PathBuf,
    pub train: GenSpec,
    pub test: GenSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Manifests {
        train: Option<PathBuf>,
        test: Option<PathBuf>,
    },
    Generated(GenConfig),
}

impl DataSource {
    pub fn train_manifest(&self) -> Option<PathBuf> {
        match self {
            DataSource::Manifests { train, .. } => train.clone(),
            DataSource::Generated(g) => Some(g.out_dir.join("train").join(MANIFEST_FILE)),
        }
    }

    pub fn test_manifest(&self) -> Option<PathBuf> {
        match self {
            DataSource::Manifests { test, .. } => test.clone(),
            DataSource::Generated(g) => Some(g.out_dir.join("test").join(MANIFEST_FILE)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub checkpoint_dir: PathBuf,
    /// Per-epoch log file.
    pub log: PathBuf,
    /// How many leading training samples are decoded for the logged rate.
    pub train_eval_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub network: NetworkConfig,
    pub optimizer: OptimizerConfig,
    pub data: Option<DataSource>,
    pub decoder: Decoder,
    pub train: TrainConfig,
}

fn parse_pair<T: std::str::FromStr>(v: &str) -> Option<(T, T)> {
    let (a, b) = v.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_lengths(v: &str) -> Option<BTreeMap<usize, usize>> {
    let mut out = BTreeMap::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (len, count) = item.split_once(':')?;
        let len = len.trim().parse().ok()?;
        let count = count.trim().parse().ok()?;
        if out.insert(len, count).is_some() {
            return None;
        }
    }
    Some(out)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn parse(text: &str, base: &Path, source: &str) -> Result<Self> {
        let mut seed = None;
        let mut threads = None;
        let mut network = NetworkConfig::default();
        let mut opt = OptimizerConfig::default();
        let (mut train_manifest, mut test_manifest) = (None, None);
        let mut gen_seen = false;
        let mut gen_dir = None;
        let mut gen_train = GenSpec::default();
        let (mut train_lengths, mut test_lengths) = (BTreeMap::new(), BTreeMap::new());
        let mut decoder_name = "greedy".to_string();
        let mut beam = BeamConfig::default();
        let mut train = TrainConfig {
            checkpoint_dir: base.join("checkpoints"),
            log: base.join("train.log"),
            train_eval_samples: 200,
        };

        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |m: String| Error::Parse {
                file: source.to_string(),
                line: line_no,
                message: m,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !["run", "network", "optimizer", "data", "gen", "decode", "train"].contains(&name) {
                    return Err(err(format!("unknown section [{name}]")));
                }
                gen_seen |= name == "gen";
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected 'key = value'".into()))?;
            let bad = || err(format!("bad value '{value}' for {section}.{key}"));
            macro_rules! num {
                () => {
                    value.parse().map_err(|_| bad())?
                };
            }
            match (section.as_str(), key) {
                ("", _) => return Err(err(format!("key '{key}' outside any section"))),
                ("run", "seed") => seed = Some(num!()),
                ("run", "threads") => threads = Some(num!()),
                ("network", _) => network.set(key, value).map_err(|e| err(e.to_string()))?,
                ("optimizer", "rho") => opt.rho = num!(),
                ("optimizer", "epsilon") => opt.epsilon = num!(),
                ("optimizer", "batch_size") => opt.batch_size = num!(),
                ("optimizer", "epochs") => opt.epochs = num!(),
                ("optimizer", "clip") => {
                    opt.clip = if value == "none" { None } else { Some(num!()) }
                }
                ("optimizer", "reduction") => {
                    opt.reduction = match value {
                        "sum" => Reduction::Sum,
                        "mean" => Reduction::Mean,
                        _ => return Err(bad()),
                    }
                }
                ("data", "train_manifest") => train_manifest = Some(base.join(value)),
                ("data", "test_manifest") => test_manifest = Some(base.join(value)),
                ("gen", "out_dir") => gen_dir = Some(base.join(value)),
                ("gen", "train_lengths") => train_lengths = parse_lengths(value).ok_or_else(bad)?,
                ("gen", "test_lengths") => test_lengths = parse_lengths(value).ok_or_else(bad)?,
                ("gen", "noise") => gen_train.noise = num!(),
                ("gen", "jitter") => gen_train.jitter = num!(),
                ("gen", "spacing") => gen_train.spacing = parse_pair(value).ok_or_else(bad)?,
                ("gen", "scale") => gen_train.scale = parse_pair(value).ok_or_else(bad)?,
                ("gen", "height") => gen_train.height = num!(),
                ("gen", "width") => gen_train.width = num!(),
                ("decode", "decoder") => decoder_name = value.to_string(),
                ("decode", "beam_width") => beam.width = num!(),
                ("decode", "prune_threshold") => beam.prune_threshold = num!(),
                ("train", "checkpoint_dir") => train.checkpoint_dir = base.join(value),
                ("train", "log") => train.log = base.join(value),
                ("train", "train_eval_samples") => train.train_eval_samples = num!(),
                _ => return Err(err(format!("unknown key {section}.{key}"))),
            }
        }

        let seed = seed.ok_or_else(|| Error::Config(format!("{source}: run.seed is required")))?;
        if threads == Some(0) {
            return Err(Error::Config("run.threads must be at least 1".into()));
        }
        network.validate()?;
        if opt.batch_size == 0 {
            return Err(Error::Config("optimizer.batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&opt.rho) || !(opt.epsilon > 0.0) {
            return Err(Error::Config("optimizer needs rho in [0, 1) and epsilon > 0".into()));
        }
        if opt.clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("optimizer.clip must be positive".into()));
        }
        let decoder = match decoder_name.as_str() {
            "greedy" => Decoder::Greedy,
            "beam" => {
                beam.validate()?;
                Decoder::Beam(beam)
            }
            other => return Err(Error::Config(format!("unknown decoder '{other}'"))),
        };
        let has_manifests = train_manifest.is_some() || test_manifest.is_some();
        let data = match (has_manifests, gen_seen) {
            (true, true) => {
                return Err(Error::Config(
                    "give either [data] manifests or a [gen] dataset, not both".into(),
                ))
            }
            (true, false) => Some(DataSource::Manifests {
                train: train_manifest,
                test: test_manifest,
            }),
            (false, true) => {
                gen_train.seed = seed;
                let mut test = gen_train.clone();
                gen_train.lengths = train_lengths;
                test.lengths = test_lengths;
                test.split = "test".into();
                gen_train.validate()?;
                test.validate()?;
                Some(DataSource::Generated(GenConfig {
                    out_dir: gen_dir.unwrap_or_else(|| base.join("data")),
                    train: gen_train,
                    test,
                }))
            }
            (false, false) => None,
        };
        Ok(RunConfig {
            seed,
            threads,
            network,
            optimizer: opt,
            data,
            decoder,
            train,
        })
    }
}
