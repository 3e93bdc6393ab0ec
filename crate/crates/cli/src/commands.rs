use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use seqctc::checkpoint::Checkpoint;
use seqctc::config::{DataSource, RunConfig};
use seqctc::decode::{BeamConfig, Decoder};
use seqctc::net::{Init, Network};
use seqctc::optim::AdadeltaState;
use seqctc::synth::{generate, length_histogram, load_dataset, load_manifest, prepare_image, GrayImage};
use seqctc::train::{evaluate_samples, is_feasible, train_epoch};
use seqctc::{Error, Result};

use crate::{DecodeFlags, DecoderArg};

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        // only the first call in a process can size the global pool
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            warn!("thread pool already initialised; ignoring threads = {n}");
        }
    }
    Ok(())
}

fn resolve_decoder(flags: &DecodeFlags, configured: Option<Decoder>) -> Result<Decoder> {
    let base = configured.unwrap_or(Decoder::Greedy);
    let beam = |width: Option<usize>| -> Result<Decoder> {
        let mut cfg = match base {
            Decoder::Beam(b) => b,
            Decoder::Greedy => BeamConfig::default(),
        };
        if let Some(w) = width {
            cfg.width = w;
        }
        cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(Decoder::Beam(cfg))
    };
    match (flags.decoder, flags.beam_width) {
        (Some(DecoderArg::Greedy), Some(_)) => Err(Error::Usage("--beam-width needs --decoder beam".into())),
        (Some(DecoderArg::Greedy), None) => Ok(Decoder::Greedy),
        (Some(DecoderArg::Beam), w) | (None, w @ Some(_)) => beam(w),
        (None, None) => Ok(base),
    }
}

pub fn gen(config: &Path, threads: Option<usize>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    set_threads(threads.or(cfg.threads))?;
    let Some(DataSource::Generated(g)) = &cfg.data else {
        return Err(Error::Config(format!("{}: gen needs a [gen] section", config.display())));
    };
    for (name, spec) in [("train", &g.train), ("test", &g.test)] {
        let dir = g.out_dir.join(name);
        let manifest = generate(spec, &dir)?;
        if manifest.is_empty() {
            warn!("{name} split has no samples");
        }
        println!("{}", dir.join(seqctc::synth::MANIFEST_FILE).display());
        for (len, count) in length_histogram(&manifest) {
            println!("  length {len}: {count}");
        }
    }
    Ok(())
}

fn ensure_generated(data: &DataSource, split: &str) -> Result<()> {
    let DataSource::Generated(g) = data else {
        return Ok(());
    };
    let (spec, dir) = match split {
        "train" => (&g.train, g.out_dir.join("train")),
        _ => (&g.test, g.out_dir.join("test")),
    };
    if !dir.join(seqctc::synth::MANIFEST_FILE).exists() {
        info!("generating {split} set in {}", dir.display());
        generate(spec, &dir)?;
    }
    Ok(())
}

fn epoch_of(line: &str) -> Option<u64> {
    line.strip_prefix("epoch=")?.split_whitespace().next()?.parse().ok()
}

pub fn train(config: &Path, resume: Option<&Path>, threads: Option<usize>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    set_threads(threads.or(cfg.threads))?;
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("no data source: add [data] or [gen]".into()))?;
    let manifest_path = data
        .train_manifest()
        .ok_or_else(|| Error::Config("data.train_manifest is not set".into()))?;
    ensure_generated(data, "train")?;
    let manifest = load_manifest(&manifest_path)?;

    let mut net = Network::build(cfg.network.clone(), Init::Seeded(cfg.seed))?;
    let mut state = AdadeltaState::new(net.params(), cfg.optimizer.rho, cfg.optimizer.epsilon)?;
    let mut start = 0;
    if let Some(path) = resume {
        let ck = Checkpoint::load(path)?;
        ck.check_compatible(&net)?;
        net.params_mut().load_from(&ck.params)?;
        state = ck
            .optimizer
            .ok_or_else(|| Error::Compatibility(format!("{} has no optimizer state", path.display())))?;
        start = ck.epoch;
        info!("resuming after epoch {start}");
    }

    let [_, h, w] = net.input_shape();
    let samples = load_dataset(&manifest, h, w)?;
    let skipped = samples.iter().filter(|s| !is_feasible(&net, s)).count();
    if skipped > 0 {
        warn!(
            "{skipped} of {} training labels need more than {} frames and are skipped",
            samples.len(),
            net.plan().steps
        );
    }
    let eval_set = &samples[..cfg.train.train_eval_samples.min(samples.len())];

    let ck_dir = &cfg.train.checkpoint_dir;
    fs::create_dir_all(ck_dir).map_err(|e| Error::io(ck_dir, e))?;
    let log_path = &cfg.train.log;
    let mut kept = String::new();
    if start > 0 {
        if let Ok(old) = fs::read_to_string(log_path) {
            for line in old.lines().filter(|l| epoch_of(l).is_some_and(|e| e <= start)) {
                kept.push_str(line);
                kept.push('\n');
            }
        }
    }
    let mut log = fs::File::create(log_path).map_err(|e| Error::io(log_path, e))?;
    log.write_all(kept.as_bytes()).map_err(|e| Error::io(log_path, e))?;

    let opts = cfg.optimizer.train_options();
    for epoch in start..cfg.optimizer.epochs {
        let t0 = Instant::now();
        let stats = train_epoch(&mut net, &samples, &opts, &mut state, cfg.seed, epoch)?;
        let rate = if eval_set.is_empty() {
            0.0
        } else {
            evaluate_samples(&net, eval_set, &cfg.decoder)?.rate
        };
        let line = format!(
            "epoch={} loss={} train_rate={} infeasible={} steps={}",
            epoch + 1,
            stats.mean_loss,
            rate,
            stats.infeasible,
            stats.steps
        );
        writeln!(log, "{line}")
            .and_then(|_| log.flush())
            .map_err(|e| Error::io(log_path, e))?;
        println!("{line} wall={:.2}s", t0.elapsed().as_secs_f64());
        let ck = Checkpoint::from_network(&net, epoch + 1, Some(&state));
        ck.save(&ck_dir.join(format!("epoch-{:04}.ckpt", epoch + 1)))?;
        ck.save(&ck_dir.join("last.ckpt"))?;
    }
    Ok(())
}

pub fn eval(
    config: Option<&Path>,
    checkpoint: &Path,
    manifest: Option<&Path>,
    report: Option<&Path>,
    flags: &DecodeFlags,
    threads: Option<usize>,
) -> Result<()> {
    let cfg = config.map(RunConfig::load).transpose()?;
    set_threads(threads.or(cfg.as_ref().and_then(|c| c.threads)))?;
    let ck = Checkpoint::load(checkpoint)?;
    let net = ck.to_network()?;
    if let Some(c) = &cfg {
        ck.check_compatible(&Network::build(c.network.clone(), Init::Zeros)?)?;
    }
    let manifest_path = match (manifest, cfg.as_ref().and_then(|c| c.data.as_ref())) {
        (Some(m), _) => m.to_path_buf(),
        (None, Some(data)) if data.test_manifest().is_some() => {
            ensure_generated(data, "test")?;
            data.test_manifest().unwrap_or_default()
        }
        _ => return Err(Error::Usage("no manifest: pass --manifest or a config with one".into())),
    };
    let decoder = resolve_decoder(flags, cfg.as_ref().map(|c| c.decoder))?;
    let m = load_manifest(&manifest_path)?;
    if m.is_empty() {
        return Err(Error::Usage(format!("{} has no samples", manifest_path.display())));
    }
    let [_, h, w] = net.input_shape();
    let samples = load_dataset(&m, h, w)?;
    let result = evaluate_samples(&net, &samples, &decoder)?;
    let out: PathBuf = match report {
        Some(p) => p.to_path_buf(),
        None => {
            let mut s = checkpoint.as_os_str().to_owned();
            s.push(".report.txt");
            s.into()
        }
    };
    fs::write(&out, result.to_key_values()?).map_err(|e| Error::io(&out, e))?;
    print!("{}", result.table());
    println!("report: {}", out.display());
    Ok(())
}

pub fn decode(
    checkpoint: &Path,
    image: &Path,
    config: Option<&Path>,
    emit_posteriors: Option<&Path>,
    flags: &DecodeFlags,
) -> Result<()> {
    let cfg = config.map(RunConfig::load).transpose()?;
    let decoder = resolve_decoder(flags, cfg.as_ref().map(|c| c.decoder))?;
    let net = Checkpoint::load(checkpoint)?.to_network()?;
    let [_, h, w] = net.input_shape();
    let img = GrayImage::load(image)?;
    let (decoding, posteriors) = net.predict(&prepare_image(&img, h, w)?, &decoder)?;
    println!("{}\t{}", net.alphabet().format_label(&decoding.label), decoding.score);
    if let Some(p) = emit_posteriors {
        fs::write(p, posteriors.to_text()).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}
