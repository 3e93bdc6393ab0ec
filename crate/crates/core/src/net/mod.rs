//! The full recognition network.
//!
//! ```text
//! image 1×H×W
//!   conv 5×5 s1 p1 → relu → maxpool 3×3 s1
//!   stage 0: conv 3×3 → relu → conv 3×3, + identity shortcut → relu
//!   stage i: conv 3×3 s2 → relu → conv 3×3, + conv 1×1 s2 shortcut → relu
//!   permute C×H×W → W×(C·H)
//!   forward branch:  lstm → lstm → inner product → inner product(11)
//!   backward branch: reverse → lstm → lstm → inner product → inner product(11) → reverse
//!   sum of both branches → logits T×11 → softmax → CTC
//! ```

mod config;

use rand::Rng;
use sha2::{Digest, Sha256};

pub use config::{ExtractorKind, NetworkConfig, ShapePlan};

use crate::ctc::{ctc_from_log_probs, Alphabet, FramePosteriors, LabelSequence};
use crate::decode::{Decoder, Decoding};
use crate::error::{Error, Result};
use crate::layers::{
    self, init, Conv2d, ConvCache, InnerProduct, InnerProductCache, Lstm, LstmCache, MaxPool,
    PoolCache,
};
use crate::params::{Gradients, ParamStore};
use crate::rng;
use crate::tensor::Tensor;

/// Bound multiplier for the last convolution of each residual branch, so a
/// fresh network starts close to its shortcut path.
const BRANCH_OUT_INIT_SCALE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Every parameter zero.
    Zeros,
    /// Random weights from the `"init"` stream of the seed.
    Seeded(u64),
}

#[derive(Clone, Debug)]
struct Stage {
    conv_a: Conv2d,
    conv_b: Conv2d,
    shortcut: Option<Conv2d>,
}

#[derive(Clone, Debug)]
struct ResidualExtractor {
    stem: Conv2d,
    pool: MaxPool,
    stages: Vec<Stage>,
}

#[derive(Clone, Debug)]
struct Branch {
    lstm1: Lstm,
    lstm2: Lstm,
    projection: InnerProduct,
    output: InnerProduct,
}

#[derive(Clone, Debug)]
pub struct Network {
    config: NetworkConfig,
    plan: ShapePlan,
    params: ParamStore,
    extractor: Option<ResidualExtractor>,
    forward_branch: Branch,
    backward_branch: Branch,
    fingerprint: String,
}

struct StageCache {
    a: ConvCache,
    a_out: Tensor,
    b: ConvCache,
    shortcut: Option<ConvCache>,
    out: Tensor,
}

struct ExtractorCache {
    stem: ConvCache,
    stem_out: Tensor,
    pool: PoolCache,
    stages: Vec<StageCache>,
}

struct BranchCache {
    lstm1: LstmCache,
    lstm2: LstmCache,
    projection: InnerProductCache,
    output: InnerProductCache,
}

/// Intermediates of one forward evaluation, needed by the backward pass.
pub struct ForwardPass {
    extractor: Option<ExtractorCache>,
    forward_branch: BranchCache,
    backward_branch: BranchCache,
    /// Pre-softmax outputs, `T × 11`.
    pub logits: Tensor,
    /// Row-wise log-softmax of `logits`.
    pub log_probs: Tensor,
}

impl ForwardPass {
    pub fn posteriors(&self) -> Result<FramePosteriors> {
        layers::softmax_per_frame(&self.logits)
    }
}

fn debug_check(t: &Tensor, what: &str) -> Result<()> {
    if cfg!(debug_assertions) {
        t.check_finite(what)?;
    }
    Ok(())
}

impl Branch {
    fn new(params: &mut ParamStore, name: &str, plan: &ShapePlan) -> Self {
        Branch {
            lstm1: Lstm::new(params, &format!("{name}.lstm1"), plan.frame_features, plan.hidden),
            lstm2: Lstm::new(params, &format!("{name}.lstm2"), plan.hidden, plan.hidden),
            projection: InnerProduct::new(params, &format!("{name}.proj"), plan.hidden, plan.projection),
            output: InnerProduct::new(params, &format!("{name}.out"), plan.projection, plan.output),
        }
    }

    fn init(&self, params: &mut ParamStore, rng: &mut impl Rng) {
        init::init_lstm(params, &self.lstm1, rng);
        init::init_lstm(params, &self.lstm2, rng);
        init::init_inner_product(params, &self.projection, rng);
        init::init_inner_product(params, &self.output, rng);
    }

    fn forward(&self, params: &ParamStore, seq: &Tensor) -> Result<(Tensor, BranchCache)> {
        let (h1, lstm1) = self.lstm1.forward(params, seq)?;
        let (h2, lstm2) = self.lstm2.forward(params, &h1)?;
        let (p, projection) = self.projection.forward(params, &h2)?;
        debug_check(&p, "projection")?;
        let (o, output) = self.output.forward(params, &p)?;
        Ok((
            o,
            BranchCache {
                lstm1,
                lstm2,
                projection,
                output,
            },
        ))
    }

    fn backward(
        &self,
        params: &ParamStore,
        cache: &BranchCache,
        grad: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor> {
        let g = self.output.backward(params, &cache.output, grad, grads)?;
        let g = self.projection.backward(params, &cache.projection, &g, grads)?;
        let g = self.lstm2.backward(params, &cache.lstm2, &g, grads)?;
        self.lstm1.backward(params, &cache.lstm1, &g, grads)
    }
}

impl ResidualExtractor {
    fn new(params: &mut ParamStore, plan: &ShapePlan, channels: &[usize]) -> Self {
        let stem = Conv2d::new(params, "stem.conv", 1, channels[0], config::STEM_KERNEL, 1, config::STEM_PADDING);
        let pool = MaxPool {
            kernel: config::POOL_KERNEL,
            stride: config::POOL_STRIDE,
        };
        let mut stages = vec![Stage {
            conv_a: Conv2d::new(params, "stage0.conv_a", channels[0], channels[1], 3, 1, 1),
            conv_b: Conv2d::new(params, "stage0.conv_b", channels[1], channels[2], 3, 1, 1),
            shortcut: None,
        }];
        let mut c_in = channels[2];
        for (i, &c) in channels[3..].iter().enumerate() {
            let name = format!("stage{}", i + 1);
            stages.push(Stage {
                conv_a: Conv2d::new(params, &format!("{name}.conv_a"), c_in, c, 3, 2, 1),
                conv_b: Conv2d::new(params, &format!("{name}.conv_b"), c, c, 3, 1, 1),
                shortcut: Some(Conv2d::new(params, &format!("{name}.shortcut"), c_in, c, 1, 2, 0)),
            });
            c_in = c;
        }
        debug_assert_eq!(stages.len(), plan.stages.len());
        ResidualExtractor { stem, pool, stages }
    }

    fn init(&self, params: &mut ParamStore, rng: &mut impl Rng) {
        init::init_conv(params, &self.stem, 1.0, rng);
        for st in &self.stages {
            init::init_conv(params, &st.conv_a, 1.0, rng);
            init::init_conv(params, &st.conv_b, BRANCH_OUT_INIT_SCALE, rng);
            if let Some(sc) = &st.shortcut {
                init::init_conv(params, sc, 1.0, rng);
            }
        }
    }

    fn forward(&self, params: &ParamStore, image: &Tensor) -> Result<(Tensor, ExtractorCache)> {
        let (s, stem) = self.stem.forward(params, image)?;
        let stem_out = layers::relu(&s);
        let (mut x, pool) = self.pool.forward(&stem_out)?;
        let mut stages = Vec::with_capacity(self.stages.len());
        for st in &self.stages {
            let (a, a_cache) = st.conv_a.forward(params, &x)?;
            let a_out = layers::relu(&a);
            let (b, b_cache) = st.conv_b.forward(params, &a_out)?;
            let (sum, shortcut) = match &st.shortcut {
                Some(conv) => {
                    let (sc, cache) = conv.forward(params, &x)?;
                    (layers::eltwise_sum(&b, &sc)?, Some(cache))
                }
                None => (layers::eltwise_sum(&b, &x)?, None),
            };
            let out = layers::relu(&sum);
            debug_check(&out, "residual stage")?;
            stages.push(StageCache {
                a: a_cache,
                a_out,
                b: b_cache,
                shortcut,
                out: out.clone(),
            });
            x = out;
        }
        Ok((
            x,
            ExtractorCache {
                stem,
                stem_out,
                pool,
                stages,
            },
        ))
    }

    fn backward(
        &self,
        params: &ParamStore,
        cache: &ExtractorCache,
        grad: Tensor,
        grads: &mut Gradients,
    ) -> Result<()> {
        let mut g = grad;
        for (st, sc) in self.stages.iter().zip(&cache.stages).rev() {
            let g_sum = layers::relu_backward(&sc.out, &g)?;
            let (g_branch, g_short) = layers::eltwise_sum_backward(&g_sum);
            let g_a = st.conv_b.backward(params, &sc.b, &g_branch, grads)?;
            let g_a = layers::relu_backward(&sc.a_out, &g_a)?;
            let g_in = st.conv_a.backward(params, &sc.a, &g_a, grads)?;
            let g_short = match (&st.shortcut, &sc.shortcut) {
                (Some(conv), Some(c)) => conv.backward(params, c, &g_short, grads)?,
                _ => g_short,
            };
            g = layers::eltwise_sum(&g_in, &g_short)?;
        }
        let g = self.pool.backward(&cache.pool, &g)?;
        let g = layers::relu_backward(&cache.stem_out, &g)?;
        self.stem.backward(params, &cache.stem, &g, grads)?;
        Ok(())
    }
}

impl Network {
    pub fn build(config: NetworkConfig, init: Init) -> Result<Self> {
        let plan = config.plan()?;
        let mut params = ParamStore::new();
        let extractor = match config.extractor {
            ExtractorKind::Residual => Some(ResidualExtractor::new(&mut params, &plan, &config.scaled_channels())),
            ExtractorKind::Identity => None,
        };
        let forward_branch = Branch::new(&mut params, "fwd", &plan);
        let backward_branch = Branch::new(&mut params, "bwd", &plan);
        if let Init::Seeded(seed) = init {
            let mut r = rng::stream(seed, "init", 0);
            if let Some(ex) = &extractor {
                ex.init(&mut params, &mut r);
            }
            forward_branch.init(&mut params, &mut r);
            backward_branch.init(&mut params, &mut r);
        }
        let fingerprint = topology_fingerprint(&config, &params);
        Ok(Network {
            config,
            plan,
            params,
            extractor,
            forward_branch,
            backward_branch,
            fingerprint,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn plan(&self) -> &ShapePlan {
        &self.plan
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn alphabet(&self) -> Alphabet {
        self.config.alphabet()
    }

    /// Hex digest of layer kinds, parameter names and shapes.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn zero_grads(&self) -> Gradients {
        self.params.zero_grads()
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [1, self.config.input_height, self.config.input_width]
    }

    pub fn forward(&self, image: &Tensor) -> Result<ForwardPass> {
        image.expect_shape(&self.input_shape(), "network input")?;
        let (features, extractor) = match &self.extractor {
            Some(ex) => {
                let (f, cache) = ex.forward(&self.params, image)?;
                (f, Some(cache))
            }
            None => (image.clone(), None),
        };
        let seq = layers::permute_to_sequence(&features)?;
        let (f_out, forward_branch) = self.forward_branch.forward(&self.params, &seq)?;
        let rev = layers::reverse(&seq)?;
        let (b_out, backward_branch) = self.backward_branch.forward(&self.params, &rev)?;
        let logits = layers::eltwise_sum(&f_out, &layers::reverse(&b_out)?)?;
        if !logits.all_finite() {
            return Err(Error::Numeric("non-finite logits".into()));
        }
        let log_probs = layers::log_softmax_per_frame(&logits)?;
        Ok(ForwardPass {
            extractor,
            forward_branch,
            backward_branch,
            logits,
            log_probs,
        })
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂logits`.
    pub fn backward(&self, pass: &ForwardPass, grad_logits: &Tensor, grads: &mut Gradients) -> Result<()> {
        grad_logits.expect_shape(pass.logits.shape(), "logit gradient")?;
        let (g_f, g_b) = layers::eltwise_sum_backward(grad_logits);
        let d_seq_f = self
            .forward_branch
            .backward(&self.params, &pass.forward_branch, &g_f, grads)?;
        let g_b = layers::reverse_backward(&g_b)?;
        let d_rev = self
            .backward_branch
            .backward(&self.params, &pass.backward_branch, &g_b, grads)?;
        let d_seq = layers::eltwise_sum(&d_seq_f, &layers::reverse_backward(&d_rev)?)?;
        if let (Some(ex), Some(cache)) = (&self.extractor, &pass.extractor) {
            let (c, h, _) = self.plan.features;
            let d_features = layers::sequence_to_feature_map(&d_seq, c, h)?;
            ex.backward(&self.params, cache, d_features, grads)?;
        }
        Ok(())
    }

    /// CTC loss for one sample; accumulates its parameter gradient scaled by
    /// `weight` into `grads`.
    pub fn loss_and_grad(
        &self,
        image: &Tensor,
        label: &LabelSequence,
        weight: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        let pass = self.forward(image)?;
        let (steps, classes) = pass.log_probs.dims2("log-probabilities")?;
        let ctc = ctc_from_log_probs(label, pass.log_probs.data(), steps, classes)?;
        let mut g = ctc.grad_logits;
        if weight != 1.0 {
            g.iter_mut().for_each(|v| *v *= weight);
        }
        self.backward(&pass, &Tensor::from_vec(&[steps, classes], g)?, grads)?;
        Ok(ctc.loss)
    }

    /// CTC loss for one sample without gradients.
    pub fn loss(&self, image: &Tensor, label: &LabelSequence) -> Result<f64> {
        let pass = self.forward(image)?;
        let (steps, classes) = pass.log_probs.dims2("log-probabilities")?;
        Ok(ctc_from_log_probs(label, pass.log_probs.data(), steps, classes)?.loss)
    }

    pub fn predict(&self, image: &Tensor, decoder: &Decoder) -> Result<(Decoding, FramePosteriors)> {
        let posteriors = self.forward(image)?.posteriors()?;
        let decoding = decoder.decode(&posteriors, &self.alphabet())?;
        Ok((decoding, posteriors))
    }

    /// A fresh evaluation context bound to this network.
    pub fn context(&self) -> EvalContext {
        EvalContext { pass: None }
    }
}

/// Holds the most recent forward pass so a later backward call can use it.
pub struct EvalContext {
    pass: Option<ForwardPass>,
}

impl EvalContext {
    pub fn forward(&mut self, net: &Network, image: &Tensor) -> Result<&ForwardPass> {
        self.pass = Some(net.forward(image)?);
        Ok(self.pass.as_ref().expect("just stored"))
    }

    pub fn backward(&mut self, net: &Network, grad_logits: &Tensor, grads: &mut Gradients) -> Result<()> {
        let pass = self
            .pass
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        net.backward(pass, grad_logits, grads)
    }

    pub fn clear(&mut self) {
        self.pass = None;
    }
}

fn topology_fingerprint(config: &NetworkConfig, params: &ParamStore) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "extractor={} input={}x{}\n",
        config.extractor.name(),
        config.input_height,
        config.input_width
    ));
    for b in params.blocks() {
        h.update(format!("{} {:?}\n", b.name, b.shape));
    }
    h.finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}
