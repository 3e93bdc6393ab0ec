//! The training loop.
//!
//! A batch is cut into fixed chunks of [`CHUNK`] samples. Chunks run in
//! parallel, each into its own gradient buffer, and the buffers are summed in
//! chunk order, so the result does not depend on the number of threads.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::ctc::Reduction;
use crate::decode::Decoder;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport};
use crate::net::Network;
use crate::optim::{clip_by_norm, AdadeltaState};
use crate::params::Gradients;
use crate::rng;
use crate::synth::Sample;

pub const CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub reduction: Reduction,
    /// Maximum global gradient norm; `None` disables clipping.
    pub clip: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            batch_size: 32,
            reduction: Reduction::Sum,
            clip: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// Mean per-sample loss over the samples that were trained on.
    pub mean_loss: f64,
    /// Samples skipped because their label needs more frames than the
    /// network produces.
    pub infeasible: usize,
    pub steps: usize,
}

/// Whether `net` can emit `sample`'s label at all.
pub fn is_feasible(net: &Network, sample: &Sample) -> bool {
    sample.label.min_frames() <= net.plan().steps
}

fn batch_gradient(net: &Network, data: &[Sample], batch: &[usize], weight: f64) -> Result<(Gradients, f64)> {
    let parts = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = net.zero_grads();
            let mut loss = 0.0;
            for &i in chunk {
                let s = &data[i];
                loss += net
                    .loss_and_grad(&s.image, &s.label, weight, &mut g)
                    .map_err(|e| Error::Sample {
                        index: i,
                        source: Box::new(e),
                    })?;
            }
            Ok((g, loss))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut grads, mut loss) = iter.next().expect("batches are non-empty");
    for (g, l) in iter {
        grads.add_assign(&g);
        loss += l;
    }
    Ok((grads, loss))
}

/// One pass over `data` in the order drawn from stream `shuffle`/`epoch`,
/// with one optimizer step per batch.
pub fn train_epoch(
    net: &mut Network,
    data: &[Sample],
    opts: &TrainOptions,
    state: &mut AdadeltaState,
    seed: u64,
    epoch: u64,
) -> Result<EpochStats> {
    if data.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    if opts.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).filter(|&i| is_feasible(net, &data[i])).collect();
    let infeasible = data.len() - order.len();
    if order.is_empty() {
        return Err(Error::Training(format!(
            "all {} samples need more than {} frames",
            data.len(),
            net.plan().steps
        )));
    }
    order.shuffle(&mut rng::stream(seed, "shuffle", epoch));

    let mut total_loss = 0.0;
    let mut steps = 0;
    for batch in order.chunks(opts.batch_size) {
        let weight = opts.reduction.weight(batch.len());
        let (mut grads, loss) = batch_gradient(net, data, batch, weight)?;
        total_loss += loss;
        if let Some(max) = opts.clip {
            clip_by_norm(&mut grads, max);
        }
        state.step(net.params_mut(), &grads)?;
        steps += 1;
    }
    Ok(EpochStats {
        mean_loss: total_loss / order.len() as f64,
        infeasible,
        steps,
    })
}

/// Decoded strings for every sample, in order.
pub fn recognize(net: &Network, data: &[Sample], decoder: &Decoder) -> Result<Vec<String>> {
    let alphabet = net.alphabet();
    data.par_iter()
        .enumerate()
        .map(|(i, s)| {
            net.predict(&s.image, decoder)
                .map(|(d, _)| alphabet.format_label(&d.label))
                .map_err(|e| Error::Sample {
                    index: i,
                    source: Box::new(e),
                })
        })
        .collect()
}

pub fn evaluate_samples(net: &Network, data: &[Sample], decoder: &Decoder) -> Result<EvalReport> {
    let predictions = recognize(net, data, decoder)?;
    let alphabet = net.alphabet();
    let truths: Vec<String> = data.iter().map(|s| alphabet.format_label(&s.label)).collect();
    let ids: Vec<&str> = data.iter().map(|s| s.id.as_str()).collect();
    evaluate(&ids, &predictions, &truths)
}
