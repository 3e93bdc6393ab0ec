use rayon::prelude::*;

use super::logspace::{log_add, LOG_ZERO};
use super::{FramePosteriors, LabelSequence};
use crate::error::{Error, Result};

/// Loss and gradients for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct CtcResult {
    /// `-ln p(I|y)` in nats.
    pub loss: f64,
    pub steps: usize,
    pub classes: usize,
    /// `∂loss/∂y`, row-major `T × |A′|`.
    pub grad_posteriors: Vec<f64>,
    /// `∂loss/∂a` where `y = softmax(a)` row-wise, row-major `T × |A′|`.
    pub grad_logits: Vec<f64>,
}

/// Log-domain forward and backward variables over the extended label.
///
/// `log_alpha[t][s]` includes the emission at frame `t`; `log_beta[t][s]`
/// covers frames `t+1..T` only, so `Σ_s α_t(s)·β_t(s) = p(I|y)` for every `t`.
#[derive(Clone, Debug)]
pub struct CtcLattice {
    pub extended: Vec<usize>,
    pub steps: usize,
    /// Row-major `T × |l′|`.
    pub log_alpha: Vec<f64>,
    /// `α_t(s)` before multiplying in `y[t][l′_s]`.
    pub log_alpha_pre: Vec<f64>,
    pub log_beta: Vec<f64>,
    pub log_likelihood: f64,
}

impl CtcLattice {
    pub fn width(&self) -> usize {
        self.extended.len()
    }

    pub fn alpha(&self, t: usize, s: usize) -> f64 {
        self.log_alpha[t * self.width() + s]
    }

    pub fn beta(&self, t: usize, s: usize) -> f64 {
        self.log_beta[t * self.width() + s]
    }
}

fn validate_log_probs(
    label: &LabelSequence,
    log_y: &[f64],
    steps: usize,
    classes: usize,
) -> Result<()> {
    if steps == 0 || classes < 2 {
        return Err(Error::shape(format!("{steps}x{classes} posterior matrix")));
    }
    if log_y.len() != steps * classes {
        return Err(Error::shape(format!(
            "{} values for a {steps}x{classes} matrix",
            log_y.len()
        )));
    }
    let blank = classes - 1;
    if let Some(&symbol) = label.0.iter().find(|&&s| s >= blank) {
        return Err(Error::InvalidSymbol {
            symbol,
            size: blank,
        });
    }
    if let Some(v) = log_y.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
        return Err(Error::InvalidInput(format!("non-finite log-probability {v}")));
    }
    Ok(())
}

/// Runs both recursions. Rows of `log_y` are per-frame log-probabilities with
/// the blank in the last column.
pub(crate) fn lattice_from_log_probs(
    label: &LabelSequence,
    log_y: &[f64],
    steps: usize,
    classes: usize,
) -> Result<CtcLattice> {
    validate_log_probs(label, log_y, steps, classes)?;
    let blank = classes - 1;
    let ext = label.extended(blank);
    let width = ext.len();
    // s → s+2 is allowed when l′_{s+2} is a label different from l′_s.
    let skip_into: Vec<bool> = (0..width)
        .map(|s| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2])
        .collect();

    let mut log_alpha = vec![LOG_ZERO; steps * width];
    let mut log_alpha_pre = vec![LOG_ZERO; steps * width];
    log_alpha_pre[0] = 0.0;
    if width > 1 {
        log_alpha_pre[1] = 0.0;
    }
    for t in 0..steps {
        if t > 0 {
            let prev = &log_alpha[(t - 1) * width..t * width];
            for s in 0..width {
                let mut acc = prev[s];
                if s >= 1 {
                    acc = log_add(acc, prev[s - 1]);
                }
                if skip_into[s] {
                    acc = log_add(acc, prev[s - 2]);
                }
                log_alpha_pre[t * width + s] = acc;
            }
        }
        let row = &log_y[t * classes..(t + 1) * classes];
        for s in 0..width {
            let pre = log_alpha_pre[t * width + s];
            log_alpha[t * width + s] = if pre == LOG_ZERO || row[ext[s]] == LOG_ZERO {
                LOG_ZERO
            } else {
                pre + row[ext[s]]
            };
        }
    }

    let mut log_beta = vec![LOG_ZERO; steps * width];
    let last = (steps - 1) * width;
    log_beta[last + width - 1] = 0.0;
    if width > 1 {
        log_beta[last + width - 2] = 0.0;
    }
    for t in (0..steps - 1).rev() {
        let next_row = &log_y[(t + 1) * classes..(t + 2) * classes];
        for s in 0..width {
            let mut acc = LOG_ZERO;
            let push = |acc: &mut f64, target: usize| {
                let b = log_beta[(t + 1) * width + target];
                let e = next_row[ext[target]];
                if b != LOG_ZERO && e != LOG_ZERO {
                    *acc = log_add(*acc, b + e);
                }
            };
            push(&mut acc, s);
            if s + 1 < width {
                push(&mut acc, s + 1);
            }
            if s + 2 < width && skip_into[s + 2] {
                push(&mut acc, s + 2);
            }
            log_beta[t * width + s] = acc;
        }
    }

    let final_row = &log_alpha[last..];
    let mut log_likelihood = final_row[width - 1];
    if width > 1 {
        log_likelihood = log_add(log_likelihood, final_row[width - 2]);
    }

    Ok(CtcLattice {
        extended: ext,
        steps,
        log_alpha,
        log_alpha_pre,
        log_beta,
        log_likelihood,
    })
}

fn check_feasible(label: &LabelSequence, steps: usize) -> Result<()> {
    if label.min_frames() > steps {
        return Err(Error::Infeasible(format!(
            "label of length {} with {} repeats needs {} frames, only {steps} available",
            label.len(),
            label.repeats(),
            label.min_frames()
        )));
    }
    Ok(())
}

/// Loss and both gradients from per-frame log-probabilities.
///
/// This is the entry point the network uses: its output layer produces
/// `log_softmax(logits)` and consumes `grad_logits` directly.
pub fn ctc_from_log_probs(
    label: &LabelSequence,
    log_y: &[f64],
    steps: usize,
    classes: usize,
) -> Result<CtcResult> {
    validate_log_probs(label, log_y, steps, classes)?;
    check_feasible(label, steps)?;
    let lattice = lattice_from_log_probs(label, log_y, steps, classes)?;
    let lp = lattice.log_likelihood;
    if lp == LOG_ZERO {
        return Err(Error::Infeasible(
            "every path onto the label has probability zero".into(),
        ));
    }
    if !lp.is_finite() {
        return Err(Error::Numeric(format!("log-likelihood is {lp}")));
    }

    let width = lattice.width();
    let mut grad_posteriors = vec![0.0; steps * classes];
    let mut grad_logits = vec![0.0; steps * classes];
    let mut occupancy = vec![LOG_ZERO; classes];
    let mut occupancy_pre = vec![LOG_ZERO; classes];
    for t in 0..steps {
        occupancy.fill(LOG_ZERO);
        occupancy_pre.fill(LOG_ZERO);
        for s in 0..width {
            let k = lattice.extended[s];
            let b = lattice.log_beta[t * width + s];
            if b == LOG_ZERO {
                continue;
            }
            let a = lattice.log_alpha[t * width + s];
            if a != LOG_ZERO {
                occupancy[k] = log_add(occupancy[k], a + b);
            }
            let a_pre = lattice.log_alpha_pre[t * width + s];
            if a_pre != LOG_ZERO {
                occupancy_pre[k] = log_add(occupancy_pre[k], a_pre + b);
            }
        }
        let row = &log_y[t * classes..(t + 1) * classes];
        for k in 0..classes {
            let i = t * classes + k;
            let gamma = if occupancy[k] == LOG_ZERO {
                0.0
            } else {
                (occupancy[k] - lp).exp()
            };
            grad_logits[i] = row[k].exp() - gamma;
            grad_posteriors[i] = if occupancy_pre[k] == LOG_ZERO {
                0.0
            } else {
                -(occupancy_pre[k] - lp).exp()
            };
        }
    }
    if grad_posteriors
        .iter()
        .chain(&grad_logits)
        .any(|g| !g.is_finite())
    {
        return Err(Error::Numeric("non-finite CTC gradient".into()));
    }

    Ok(CtcResult {
        loss: -lp,
        steps,
        classes,
        grad_posteriors,
        grad_logits,
    })
}

fn log_of(y: &FramePosteriors) -> Vec<f64> {
    y.values().iter().map(|v| v.ln()).collect()
}

/// Exact CTC loss `-ln p(I|y)` with gradients, computed in log space.
pub fn ctc_forward_backward(label: &LabelSequence, y: &FramePosteriors) -> Result<CtcResult> {
    ctc_from_log_probs(label, &log_of(y), y.steps(), y.classes())
}

/// The forward/backward variables themselves, for inspection and tests.
pub fn ctc_lattice(label: &LabelSequence, y: &FramePosteriors) -> Result<CtcLattice> {
    lattice_from_log_probs(label, &log_of(y), y.steps(), y.classes())
}

/// `ln p(I|y)` by dynamic programming; `-inf` when no path reaches the label.
pub fn log_marginal(label: &LabelSequence, y: &FramePosteriors) -> Result<f64> {
    if label.min_frames() > y.steps() {
        validate_log_probs(label, y.values(), y.steps(), y.classes())?;
        return Ok(LOG_ZERO);
    }
    Ok(ctc_lattice(label, y)?.log_likelihood)
}

/// `p(I|y)` by dynamic programming.
pub fn marginal_probability(label: &LabelSequence, y: &FramePosteriors) -> Result<f64> {
    log_marginal(label, y).map(f64::exp)
}

/// How per-sample losses combine over a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Plain sum over samples, the definitional objective.
    #[default]
    Sum,
    /// Sum divided by the number of samples.
    Mean,
}

impl Reduction {
    /// Factor applied to each per-sample loss and gradient.
    pub fn weight(self, count: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean if count == 0 => 0.0,
            Reduction::Mean => 1.0 / count as f64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatchLoss {
    pub total: f64,
    pub per_sample: Vec<CtcResult>,
}

/// CTC objective over a batch. Per-sample results are unscaled; only `total`
/// reflects the reduction.
pub fn ctc_batch_loss(
    samples: &[(FramePosteriors, LabelSequence)],
    reduction: Reduction,
) -> Result<BatchLoss> {
    let per_sample = samples
        .par_iter()
        .enumerate()
        .map(|(index, (y, label))| {
            ctc_forward_backward(label, y).map_err(|e| Error::Sample {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = per_sample.iter().map(|r| r.loss).sum();
    Ok(BatchLoss {
        total: sum * reduction.weight(samples.len()),
        per_sample,
    })
}
