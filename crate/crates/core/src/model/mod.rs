//! LFLB / ResLFLB blocks, the DeepResLFLB network and the plain-LFLB baseline.
//!
//! A network is an MFL stack of LFLBs, an SFL stack of ResLFLBs and an ERFD
//! head (ReLU, max over time, flatten, dropout, dense). Softmax is fused into
//! the loss during training and applied explicitly by [`Model::predict_proba`].

mod config;

pub use config::{
    Architecture, BaselineConfig, ErfdConfig, LflbConfig, ModelConfig, ResLflbConfig,
};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nn::{
    self, Activation, ActivationKind, BatchNorm2d, Conv2d, Dense, Dropout, Flatten, Layer, Mode,
    NnError, Param, Pool2d, PoolKind, Scalar, Sequential, StateEntry, Tensor, TimeMaxPool,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("bad model config: {0}")]
    BadConfig(String),
    #[error("input shrinks to nothing: {0}")]
    ShapeUnderflow(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// One stage of the network.
#[derive(Debug, Clone)]
pub enum Block<T> {
    Plain(Sequential<T>),
    /// `y = s + F(s)` with `s = pre(x)`.
    Residual {
        pre: Sequential<T>,
        branch: Sequential<T>,
    },
}

impl<T: Scalar> Block<T> {
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        match self {
            Block::Plain(s) => s.forward(x, mode),
            Block::Residual { pre, branch } => {
                let s = pre.forward(x, mode)?;
                let f = branch.forward(&s, mode)?;
                s.add(&f)
            }
        }
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        match self {
            Block::Plain(s) => s.backward(dy),
            Block::Residual { pre, branch } => {
                let df = branch.backward(dy)?;
                let ds = dy.add(&df)?;
                pre.backward(&ds)
            }
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        match self {
            Block::Plain(s) => s.output_shape(input),
            Block::Residual { pre, branch } => {
                let s = pre.output_shape(input)?;
                let f = branch.output_shape(&s)?;
                if f != s {
                    return Err(NnError::ShapeMismatch(format!(
                        "residual branch maps {s:?} to {f:?}"
                    )));
                }
                Ok(s)
            }
        }
    }

    pub fn sequences(&self) -> Vec<&Sequential<T>> {
        match self {
            Block::Plain(s) => vec![s],
            Block::Residual { pre, branch } => vec![pre, branch],
        }
    }

    pub fn sequences_mut(&mut self) -> Vec<&mut Sequential<T>> {
        match self {
            Block::Plain(s) => vec![s],
            Block::Residual { pre, branch } => vec![pre, branch],
        }
    }
}

/// A built network. `T` is `f32` for training and `f64` for gradient checks.
#[derive(Debug, Clone)]
pub struct Model<T = f32> {
    pub architecture: Architecture,
    /// Per-sample `[C, H, W]`.
    pub input_shape: [usize; 3],
    pub n_classes: usize,
    pub blocks: Vec<Block<T>>,
}

fn lflb_layers<T: Scalar>(
    in_channels: usize,
    cfg: &LflbConfig,
    activation: ActivationKind,
    rng: &mut ChaCha8Rng,
) -> Vec<Layer<T>> {
    vec![
        Layer::Conv(Conv2d::new(
            in_channels,
            cfg.out_channels,
            cfg.kernel,
            cfg.stride,
            cfg.padding(),
            rng,
        )),
        Layer::BatchNorm(BatchNorm2d::new(cfg.out_channels)),
        Layer::Activation(Activation::new(activation)),
        Layer::Pool(Pool2d::new(PoolKind::Max, cfg.pool_window, cfg.pool_stride)),
    ]
}

/// `[conv, batchnorm, activation, maxpool]`.
pub fn build_lflb<T: Scalar>(
    in_channels: usize,
    cfg: &LflbConfig,
    activation: ActivationKind,
    rng: &mut ChaCha8Rng,
) -> Result<Sequential<T>, ModelError> {
    cfg.validate()?;
    if in_channels == 0 {
        return Err(ModelError::BadConfig("LFLB in_channels must be >= 1".into()));
    }
    Ok(Sequential::new(lflb_layers(in_channels, cfg, activation, rng)))
}

fn nac<T: Scalar>(
    c_in: usize,
    c_out: usize,
    kernel: (usize, usize),
    activation: ActivationKind,
    rng: &mut ChaCha8Rng,
) -> [Layer<T>; 3] {
    let pad = ((kernel.0 - 1) / 2, (kernel.1 - 1) / 2);
    [
        Layer::BatchNorm(BatchNorm2d::new(c_in)),
        Layer::Activation(Activation::new(activation)),
        Layer::Conv(Conv2d::new(c_in, c_out, kernel, (1, 1), pad, rng)),
    ]
}

/// LFLB preprocessor plus a NAC bottleneck branch (1x1 compress, mid layers,
/// 1x1 expand) summed onto the preprocessor output.
pub fn build_reslflb<T: Scalar>(
    in_channels: usize,
    cfg: &ResLflbConfig,
    activation: ActivationKind,
    rng: &mut ChaCha8Rng,
) -> Result<Block<T>, ModelError> {
    cfg.validate()?;
    let pre = build_lflb(in_channels, &cfg.preproc, activation, rng)?;
    let mut branch = Sequential::default();
    let trace = cfg.branch_channels();
    let last = trace.len() - 2;
    for (i, pair) in trace.windows(2).enumerate() {
        let kernel = if i == 0 || i == last { (1, 1) } else { cfg.mid_kernel };
        for l in nac(pair[0], pair[1], kernel, activation, rng) {
            branch.push(l);
        }
    }
    Ok(Block::Residual { pre, branch })
}

fn erfd_head<T: Scalar>(
    features: &[usize],
    cfg: &ErfdConfig,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Sequential<T>, ModelError> {
    let (c, h) = match features {
        [c, h, w] if *w >= 1 => (*c, *h),
        _ => {
            return Err(ModelError::ShapeUnderflow(format!(
                "head input shape {features:?}"
            )))
        }
    };
    let drop_seed = seed ^ 0x5eed_d509;
    let mut head = Sequential::new(vec![
        Layer::Activation(Activation::new(ActivationKind::Relu)),
        Layer::TimeMaxPool(TimeMaxPool::new()),
        Layer::Flatten(Flatten::new()),
        Layer::Dropout(Dropout::new(cfg.dropout, drop_seed)?),
    ]);
    let mut width = c * h;
    if let Some(hidden) = cfg.hidden {
        head.push(Layer::Dense(Dense::new(width, hidden, rng)));
        head.push(Layer::Activation(Activation::new(ActivationKind::Relu)));
        head.push(Layer::Dropout(Dropout::new(cfg.dropout, drop_seed + 1)?));
        width = hidden;
    }
    head.push(Layer::Dense(Dense::new(width, cfg.n_classes, rng)));
    Ok(head)
}

fn shape_of<T: Scalar>(block: &Block<T>, input: &[usize], what: &str) -> Result<Vec<usize>, ModelError> {
    let out = block
        .output_shape(input)
        .map_err(|e| ModelError::ShapeUnderflow(format!("{what} on {input:?}: {e}")))?;
    if out.contains(&0) {
        return Err(ModelError::ShapeUnderflow(format!("{what} produces {out:?}")));
    }
    Ok(out)
}

fn check_input(input: (usize, usize, usize)) -> Result<[usize; 3], ModelError> {
    let (c, h, w) = input;
    if c == 0 || h == 0 || w == 0 {
        return Err(ModelError::BadConfig(format!("input {c}x{h}x{w}")));
    }
    Ok([c, h, w])
}

pub fn build_deepreslflb<T: Scalar>(cfg: &ModelConfig) -> Result<Model<T>, ModelError> {
    cfg.validate()?;
    let input_shape = check_input(cfg.input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut blocks = Vec::new();
    let mut shape = input_shape.to_vec();
    for (i, l) in cfg.mfl.iter().enumerate() {
        let b = Block::Plain(build_lflb(shape[0], l, cfg.activation, &mut rng)?);
        shape = shape_of(&b, &shape, &format!("MFL block {i}"))?;
        blocks.push(b);
    }
    for (i, r) in cfg.sfl.iter().enumerate() {
        let b = build_reslflb(shape[0], r, cfg.activation, &mut rng)?;
        shape = shape_of(&b, &shape, &format!("SFL block {i}"))?;
        blocks.push(b);
    }
    blocks.push(Block::Plain(erfd_head(&shape, &cfg.erfd, cfg.seed, &mut rng)?));
    Ok(Model {
        architecture: Architecture::DeepResLflb,
        input_shape,
        n_classes: cfg.erfd.n_classes,
        blocks,
    })
}

pub fn build_2dlflb_baseline<T: Scalar>(cfg: &BaselineConfig) -> Result<Model<T>, ModelError> {
    let input_shape = check_input(cfg.input)?;
    if cfg.erfd.n_classes < 2 {
        return Err(ModelError::BadConfig("n_classes must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut blocks = Vec::new();
    let mut shape = input_shape.to_vec();
    for (i, l) in cfg.blocks.iter().enumerate() {
        let b = Block::Plain(build_lflb(shape[0], l, cfg.activation, &mut rng)?);
        shape = shape_of(&b, &shape, &format!("LFLB block {i}"))?;
        blocks.push(b);
    }
    blocks.push(Block::Plain(erfd_head(&shape, &cfg.erfd, cfg.seed, &mut rng)?));
    Ok(Model {
        architecture: Architecture::Baseline,
        input_shape,
        n_classes: cfg.erfd.n_classes,
        blocks,
    })
}

/// Builds whichever architecture `cfg.architecture` names.
pub fn build_model<T: Scalar>(cfg: &ModelConfig) -> Result<Model<T>, ModelError> {
    match cfg.architecture {
        Architecture::DeepResLflb => build_deepreslflb(cfg),
        Architecture::Baseline => {
            cfg.validate()?;
            build_2dlflb_baseline(&BaselineConfig::matched(cfg))
        }
    }
}

pub fn count_parameters<T: Scalar>(model: &Model<T>) -> usize {
    nn::param_count(model.params())
}

impl<T: Scalar> Model<T> {
    /// Logits `[N, n_classes]` for input `[N, C, H, W]`.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, ModelError> {
        let [_, c, h, w] = x.dims4("model")?;
        if [c, h, w] != self.input_shape {
            return Err(NnError::ShapeMismatch(format!(
                "model expects [N, {}, {}, {}], got {:?}",
                self.input_shape[0],
                self.input_shape[1],
                self.input_shape[2],
                x.shape()
            ))
            .into());
        }
        let mut cur = x.clone();
        for b in &mut self.blocks {
            cur = b.forward(&cur, mode)?;
        }
        Ok(cur)
    }

    /// Back-propagates `d loss / d logits`; returns `d loss / d input`.
    pub fn backward(&mut self, dlogits: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let mut cur = dlogits.clone();
        for b in self.blocks.iter_mut().rev() {
            cur = b.backward(&cur)?;
        }
        Ok(cur)
    }

    /// Class probabilities in inference mode, evaluated in chunks of `chunk` samples.
    pub fn predict_proba(&mut self, x: &Tensor<T>, chunk: usize) -> Result<Tensor<T>, ModelError> {
        let [n, c, h, w] = x.dims4("model")?;
        let per = c * h * w;
        let chunk = chunk.max(1);
        let mut out = Vec::with_capacity(n * self.n_classes);
        let mut start = 0;
        while start < n {
            let end = (start + chunk).min(n);
            let part = Tensor::from_vec(&[end - start, c, h, w], x.data()[start * per..end * per].to_vec())?;
            let logits = self.forward(&part, Mode::Infer)?;
            out.extend_from_slice(nn::softmax(&logits)?.data());
            start = end;
        }
        self.clear_cache();
        Ok(Tensor::from_vec(&[n, self.n_classes], out)?)
    }

    pub fn predict(&mut self, x: &Tensor<T>, chunk: usize) -> Result<Vec<usize>, ModelError> {
        let probs = self.predict_proba(x, chunk)?;
        Ok(argmax_rows(&probs))
    }

    pub fn sequences(&self) -> Vec<&Sequential<T>> {
        self.blocks.iter().flat_map(|b| b.sequences()).collect()
    }

    pub fn sequences_mut(&mut self) -> Vec<&mut Sequential<T>> {
        self.blocks.iter_mut().flat_map(|b| b.sequences_mut()).collect()
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.sequences().into_iter().flat_map(|s| s.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.sequences_mut()
            .into_iter()
            .flat_map(|s| s.params_mut())
            .collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn clear_cache(&mut self) {
        for s in self.sequences_mut() {
            s.clear_cache();
        }
    }

    /// Reseeds every dropout layer (layer `i` gets `seed + i`).
    pub fn reseed_dropout(&mut self, seed: u64) {
        let mut i = 0u64;
        for s in self.sequences_mut() {
            for l in &mut s.layers {
                if let Layer::Dropout(d) = l {
                    d.reseed(seed.wrapping_add(i));
                    i += 1;
                }
            }
        }
    }

    pub fn state(&self) -> Vec<StateEntry<T>> {
        self.sequences().into_iter().flat_map(|s| s.state()).collect()
    }

    pub fn load_state(&mut self, entries: &[StateEntry<T>]) -> Result<(), ModelError> {
        let slots = self
            .sequences_mut()
            .into_iter()
            .flat_map(|s| s.state_mut())
            .collect();
        Ok(nn::load_state(slots, entries)?)
    }

    pub fn save_weights(&self, path: &Path) -> Result<(), ModelError> {
        Ok(nn::checkpoint::write_state_file(path, &self.state())?)
    }

    pub fn load_weights(&mut self, path: &Path) -> Result<(), ModelError> {
        let entries = nn::checkpoint::read_state_file(path)?;
        self.load_state(&entries)
    }

    /// Human-readable layer listing with per-block output shapes.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let mut shape = self.input_shape.to_vec();
        for (i, b) in self.blocks.iter().enumerate() {
            let kind = match b {
                Block::Plain(_) if i + 1 == self.blocks.len() => "head",
                Block::Plain(_) => "lflb",
                Block::Residual { .. } => "reslflb",
            };
            let names: Vec<&str> = b
                .sequences()
                .iter()
                .flat_map(|s| s.layers.iter().map(|l| l.name()))
                .collect();
            shape = b.output_shape(&shape).unwrap_or_default();
            let params: usize = b.sequences().iter().map(|s| s.param_count()).sum();
            out.push_str(&format!(
                "{i:>2} {kind:<8} {shape:?} params={params} [{}]\n",
                names.join(", ")
            ));
        }
        out
    }
}

pub fn argmax_rows<T: Scalar>(m: &Tensor<T>) -> Vec<usize> {
    let c = m.shape().get(1).copied().unwrap_or(1).max(1);
    m.data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
