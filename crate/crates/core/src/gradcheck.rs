//! Central finite-difference checks of the analytic gradients.
//!
//! Every check builds a random instance from a seed, computes the analytic
//! gradient of a scalar loss and compares it against
//! `(L(x+h) − L(x−h)) / 2h` element by element. The loss for a layer with
//! output `y` is `Σ r⊙y` for a fixed random `r`, so the upstream gradient is
//! `r`.

use rand::Rng;

use crate::ctc::logspace::log_softmax_rows;
use crate::ctc::{ctc_from_log_probs, LabelSequence};
use crate::error::Result;
use crate::layers::{self, Conv2d, InnerProduct, Lstm, MaxPool};
use crate::net::{Init, Network, NetworkConfig};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::rng::{self, StreamRng};
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-4;
/// Smallest denominator of the relative error, so two vanishing gradients
/// compare as equal.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub name: String,
    /// Number of gradient entries compared.
    pub checked: usize,
    pub max_rel_error: f64,
    /// Description of the entry with the largest error.
    pub worst: String,
}

impl GradCheck {
    fn new(name: &str) -> Self {
        GradCheck {
            name: name.to_string(),
            checked: 0,
            max_rel_error: 0.0,
            worst: String::new(),
        }
    }

    fn record(&mut self, what: &str, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        self.checked += 1;
        if e > self.max_rel_error || self.worst.is_empty() {
            self.max_rel_error = self.max_rel_error.max(e);
            self.worst = format!("{what}: analytic {analytic:e} numeric {numeric:e}");
        }
    }

    fn merge(&mut self, other: GradCheck) {
        self.checked += other.checked;
        if other.max_rel_error >= self.max_rel_error {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
    }
}

/// Compares `analytic[i]` with the central difference of `f` at `x` for
/// every `i` in `indices`.
pub fn compare_at(
    check: &mut GradCheck,
    what: &str,
    analytic: &[f64],
    x: &[f64],
    indices: impl IntoIterator<Item = usize>,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<()> {
    let mut probe = x.to_vec();
    for i in indices {
        probe[i] = x[i] + STEP;
        let up = f(&probe)?;
        probe[i] = x[i] - STEP;
        let down = f(&probe)?;
        probe[i] = x[i];
        check.record(&format!("{what}[{i}]"), analytic[i], (up - down) / (2.0 * STEP));
    }
    Ok(())
}

fn random_vec(r: &mut StreamRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

fn random_tensor(r: &mut StreamRng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, random_vec(r, n, scale)).expect("shape matches")
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn randomize(params: &mut ParamStore, r: &mut StreamRng) {
    for b in params.blocks_mut() {
        for v in b.values.iter_mut() {
            *v = r.random_range(-0.5..0.5);
        }
    }
}

/// Checks input and parameter gradients of one layer. `forward` returns the
/// output and whatever `backward` needs.
fn check_layer<C>(
    name: &str,
    params: &ParamStore,
    x: &Tensor,
    r: &mut StreamRng,
    forward: impl Fn(&ParamStore, &Tensor) -> Result<(Tensor, C)>,
    backward: impl Fn(&ParamStore, &C, &Tensor, &mut Gradients) -> Result<Tensor>,
) -> Result<GradCheck> {
    let (y, cache) = forward(params, x)?;
    let upstream = random_tensor(r, y.shape(), 1.0);
    let mut grads = params.zero_grads();
    let dx = backward(params, &cache, &upstream, &mut grads)?;
    let mut check = GradCheck::new(name);
    let shape = x.shape().to_vec();
    compare_at(&mut check, "input", dx.data(), x.data(), 0..x.len(), |v| {
        let xt = Tensor::from_vec(&shape, v.to_vec())?;
        Ok(dot(&forward(params, &xt)?.0, &upstream))
    })?;
    for (b, block) in params.blocks().iter().enumerate() {
        let id = ParamId(b);
        compare_at(&mut check, &block.name, grads.get(id), &block.values, 0..block.values.len(), |v| {
            let mut p = params.clone();
            p.get_mut(id).copy_from_slice(v);
            Ok(dot(&forward(&p, x)?.0, &upstream))
        })?;
    }
    Ok(check)
}

/// CTC loss gradient with respect to the logits on random instances with
/// `T ≤ 8`, `|I| ≤ 4` and up to three labels.
pub fn ctc_logits(seed: u64, instances: usize) -> Result<GradCheck> {
    let mut check = GradCheck::new("ctc grad_logits");
    for n in 0..instances {
        let mut r = rng::stream(seed, "gradcheck.ctc", n as u64);
        let labels = r.random_range(1..=3usize);
        let classes = labels + 1;
        let (label, steps) = loop {
            let len = r.random_range(0..=4usize);
            let l = LabelSequence((0..len).map(|_| r.random_range(0..labels)).collect());
            let steps = r.random_range(1..=8usize);
            if l.min_frames() <= steps {
                break (l, steps);
            }
        };
        let logits = random_vec(&mut r, steps * classes, 2.0);
        let loss = |z: &[f64]| {
            let mut lp = vec![0.0; z.len()];
            log_softmax_rows(z, classes, &mut lp);
            Ok(ctc_from_log_probs(&label, &lp, steps, classes)?.loss)
        };
        let mut lp = vec![0.0; logits.len()];
        log_softmax_rows(&logits, classes, &mut lp);
        let analytic = ctc_from_log_probs(&label, &lp, steps, classes)?.grad_logits;
        compare_at(&mut check, &format!("instance {n}"), &analytic, &logits, 0..logits.len(), loss)?;
    }
    Ok(check)
}

pub fn conv2d(seed: u64) -> Result<GradCheck> {
    let mut check = GradCheck::new("conv2d");
    for (i, &(k, s, p)) in [(3, 1, 1), (3, 2, 1), (1, 2, 0), (5, 1, 1)].iter().enumerate() {
        let mut r = rng::stream(seed, "gradcheck.conv", i as u64);
        let mut params = ParamStore::new();
        let conv = Conv2d::new(&mut params, "conv", 2, 3, k, s, p);
        randomize(&mut params, &mut r);
        let x = random_tensor(&mut r, &[2, 6, 7], 1.0);
        check.merge(check_layer(
            &format!("conv {k}x{k} s{s} p{p}"),
            &params,
            &x,
            &mut r,
            |p, x| conv.forward(p, x),
            |p, c, g, grads| conv.backward(p, c, g, grads),
        )?);
    }
    Ok(check)
}

pub fn maxpool(seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, "gradcheck.pool", 0);
    let pool = MaxPool { kernel: 3, stride: 1 };
    // continuous random inputs have no ties
    let x = random_tensor(&mut r, &[2, 5, 6], 1.0);
    check_layer(
        "maxpool",
        &ParamStore::new(),
        &x,
        &mut r,
        |_, x| pool.forward(x),
        |_, c, g, _| pool.backward(c, g),
    )
}

pub fn inner_product(seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, "gradcheck.ip", 0);
    let mut params = ParamStore::new();
    let ip = InnerProduct::new(&mut params, "ip", 6, 4);
    randomize(&mut params, &mut r);
    let x = random_tensor(&mut r, &[5, 6], 1.0);
    check_layer(
        "inner product",
        &params,
        &x,
        &mut r,
        |p, x| ip.forward(p, x),
        |p, c, g, grads| ip.backward(p, c, g, grads),
    )
}

pub fn lstm(seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, "gradcheck.lstm", 0);
    let mut params = ParamStore::new();
    let lstm = Lstm::new(&mut params, "lstm", 3, 4);
    randomize(&mut params, &mut r);
    let x = random_tensor(&mut r, &[5, 3], 1.0);
    check_layer(
        "lstm",
        &params,
        &x,
        &mut r,
        |p, x| lstm.forward(p, x),
        |p, c, g, grads| lstm.backward(p, c, g, grads),
    )
}

pub fn relu(seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, "gradcheck.relu", 0);
    // keep every input well away from the kink
    let mut x = random_tensor(&mut r, &[2, 3, 4], 1.0);
    for v in x.data_mut() {
        *v += 0.1 * v.signum();
    }
    check_layer(
        "relu",
        &ParamStore::new(),
        &x,
        &mut r,
        |_, x| {
            let y = layers::relu(x);
            Ok((y.clone(), y))
        },
        |_, y, g, _| layers::relu_backward(y, g),
    )
}

/// Reverse, permute and elementwise sum.
pub fn sequence_ops(seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, "gradcheck.seq", 0);
    let empty = ParamStore::new();
    let mut check = GradCheck::new("reverse/permute/eltwise");
    let x = random_tensor(&mut r, &[4, 3], 1.0);
    check.merge(check_layer(
        "reverse",
        &empty,
        &x,
        &mut r,
        |_, x| Ok((layers::reverse(x)?, ())),
        |_, _, g, _| layers::reverse_backward(g),
    )?);
    let fm = random_tensor(&mut r, &[2, 3, 4], 1.0);
    check.merge(check_layer(
        "permute",
        &empty,
        &fm,
        &mut r,
        |_, x| Ok((layers::permute_to_sequence(x)?, ())),
        |_, _, g, _| layers::sequence_to_feature_map(g, 2, 3),
    )?);
    let other = random_tensor(&mut r, &[4, 3], 1.0);
    check.merge(check_layer(
        "eltwise sum (first)",
        &empty,
        &x,
        &mut r,
        |_, x| Ok((layers::eltwise_sum(x, &other)?, ())),
        |_, _, g, _| Ok(layers::eltwise_sum_backward(g).0),
    )?);
    check.merge(check_layer(
        "eltwise sum (second)",
        &empty,
        &x,
        &mut r,
        |_, x| Ok((layers::eltwise_sum(&other, x)?, ())),
        |_, _, g, _| Ok(layers::eltwise_sum_backward(g).1),
    )?);
    Ok(check)
}

/// Every layer check, in a fixed order.
pub fn all_layers(seed: u64) -> Result<Vec<GradCheck>> {
    Ok(vec![
        conv2d(seed)?,
        maxpool(seed)?,
        inner_product(seed)?,
        lstm(seed)?,
        relu(seed)?,
        sequence_ops(seed)?,
    ])
}

/// End-to-end CTC loss gradient of a randomly initialised network on a
/// random image, at `samples` parameter entries drawn uniformly over all
/// parameters.
pub fn network(config: NetworkConfig, label: &LabelSequence, seed: u64, samples: usize) -> Result<GradCheck> {
    let net = Network::build(config, Init::Seeded(seed))?;
    let mut r = rng::stream(seed, "gradcheck.net", 0);
    let [c, h, w] = net.input_shape();
    let image = Tensor::from_vec(&[c, h, w], (0..c * h * w).map(|_| r.random::<f64>()).collect())?;
    let mut grads = net.zero_grads();
    net.loss_and_grad(&image, label, 1.0, &mut grads)?;

    let sizes: Vec<usize> = net.params().blocks().iter().map(|b| b.values.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut check = GradCheck::new("network");
    for _ in 0..samples {
        let mut k = r.random_range(0..total);
        let b = sizes
            .iter()
            .position(|&n| {
                if k < n {
                    true
                } else {
                    k -= n;
                    false
                }
            })
            .expect("index within total");
        let id = ParamId(b);
        let block = &net.params().blocks()[b];
        compare_at(&mut check, &block.name, grads.get(id), &block.values, [k], |v| {
            let mut probe = net.clone();
            probe.params_mut().get_mut(id).copy_from_slice(v);
            probe.loss(&image, label)
        })?;
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!(relative_error(1e-9, 0.0) < 1e-2);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let mut c = GradCheck::new("x²");
        compare_at(&mut c, "x", &[2.0 * 3.0 + 0.01], &[3.0], [0], |v| Ok(v[0] * v[0])).unwrap();
        assert!(c.max_rel_error > 1e-3);
    }
}
