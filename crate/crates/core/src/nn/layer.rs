use super::{
    Activation, BatchNorm2d, Conv2d, Dense, Dropout, Flatten, Mode, NnError, Param, Pool2d,
    Scalar, Tensor, TimeMaxPool,
};

/// Layer kind tag stored in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum LayerTag {
    Conv = 1,
    BatchNorm = 2,
    Dense = 3,
}

impl LayerTag {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(LayerTag::Conv),
            2 => Some(LayerTag::BatchNorm),
            3 => Some(LayerTag::Dense),
            _ => None,
        }
    }
}

/// Which tensor of a layer a state entry holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Weight = 0,
    Bias = 1,
    Gamma = 2,
    Beta = 3,
    RunningMean = 4,
    RunningVar = 5,
}

impl Role {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => Role::Weight,
            1 => Role::Bias,
            2 => Role::Gamma,
            3 => Role::Beta,
            4 => Role::RunningMean,
            5 => Role::RunningVar,
            _ => return None,
        })
    }
}

/// One persisted tensor: trainable values plus batchnorm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEntry<T> {
    pub tag: LayerTag,
    pub role: Role,
    pub tensor: Tensor<T>,
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    BatchNorm(BatchNorm2d<T>),
    Activation(Activation<T>),
    Pool(Pool2d),
    TimeMaxPool(TimeMaxPool),
    Dropout(Dropout<T>),
    Flatten(Flatten),
    Dense(Dense<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv2d",
            Layer::BatchNorm(_) => "batchnorm2d",
            Layer::Activation(_) => "activation",
            Layer::Pool(_) => "pool2d",
            Layer::TimeMaxPool(_) => "time_maxpool",
            Layer::Dropout(_) => "dropout",
            Layer::Flatten(_) => "flatten",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        match self {
            Layer::Conv(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Activation(l) => Ok(l.forward(x)),
            Layer::Pool(l) => l.forward(x),
            Layer::TimeMaxPool(l) => l.forward(x),
            Layer::Dropout(l) => Ok(l.forward(x, mode)),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
        }
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        match self {
            Layer::Conv(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Activation(l) => l.backward(dy),
            Layer::Pool(l) => l.backward(dy),
            Layer::TimeMaxPool(l) => l.backward(dy),
            Layer::Dropout(l) => l.backward(dy),
            Layer::Flatten(l) => l.backward(dy),
            Layer::Dense(l) => l.backward(dy),
        }
    }

    pub fn clear_cache(&mut self) {
        match self {
            Layer::Conv(l) => l.clear_cache(),
            Layer::BatchNorm(l) => l.clear_cache(),
            Layer::Activation(l) => l.clear_cache(),
            Layer::Pool(l) => l.clear_cache(),
            Layer::TimeMaxPool(l) => l.clear_cache(),
            Layer::Dropout(l) => l.clear_cache(),
            Layer::Flatten(l) => l.clear_cache(),
            Layer::Dense(l) => l.clear_cache(),
        }
    }

    /// Shape of the output for a given `[C, H, W]` or `[D]` per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let chw = |what: &str| match input {
            [c, h, w] => Ok((*c, *h, *w)),
            _ => Err(NnError::ShapeMismatch(format!("{what} expects [C, H, W], got {input:?}"))),
        };
        match self {
            Layer::Conv(l) => {
                let (c, h, w) = chw("conv2d")?;
                if c != l.in_channels {
                    return Err(NnError::ShapeMismatch(format!(
                        "conv2d expects {} channels, got {c}",
                        l.in_channels
                    )));
                }
                let (oh, ow) = l.output_hw(h, w)?;
                Ok(vec![l.out_channels, oh, ow])
            }
            Layer::BatchNorm(l) => {
                let (c, _, _) = chw("batchnorm2d")?;
                if c != l.channels {
                    return Err(NnError::ShapeMismatch("batchnorm2d channels".into()));
                }
                Ok(input.to_vec())
            }
            Layer::Activation(_) | Layer::Dropout(_) => Ok(input.to_vec()),
            Layer::Pool(l) => {
                let (c, h, w) = chw("pool2d")?;
                let (oh, ow) = l.output_hw(h, w)?;
                Ok(vec![c, oh, ow])
            }
            Layer::TimeMaxPool(_) => {
                let (c, h, w) = chw("time_maxpool")?;
                if w == 0 {
                    return Err(NnError::ShapeMismatch("time max pool over empty axis".into()));
                }
                Ok(vec![c, h, 1])
            }
            Layer::Flatten(_) => Ok(vec![input.iter().product()]),
            Layer::Dense(l) => match input {
                [d] if *d == l.in_features => Ok(vec![l.out_features]),
                _ => Err(NnError::ShapeMismatch(format!(
                    "dense expects [{}], got {input:?}",
                    l.in_features
                ))),
            },
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn state(&self) -> Vec<StateEntry<T>> {
        let e = |tag, role, t: &Tensor<T>| StateEntry {
            tag,
            role,
            tensor: t.clone(),
        };
        match self {
            Layer::Conv(l) => vec![
                e(LayerTag::Conv, Role::Weight, &l.weight.value),
                e(LayerTag::Conv, Role::Bias, &l.bias.value),
            ],
            Layer::BatchNorm(l) => vec![
                e(LayerTag::BatchNorm, Role::Gamma, &l.gamma.value),
                e(LayerTag::BatchNorm, Role::Beta, &l.beta.value),
                e(LayerTag::BatchNorm, Role::RunningMean, &l.running_mean),
                e(LayerTag::BatchNorm, Role::RunningVar, &l.running_var),
            ],
            Layer::Dense(l) => vec![
                e(LayerTag::Dense, Role::Weight, &l.weight.value),
                e(LayerTag::Dense, Role::Bias, &l.bias.value),
            ],
            _ => Vec::new(),
        }
    }

    pub fn state_mut(&mut self) -> Vec<(LayerTag, Role, &mut Tensor<T>)> {
        match self {
            Layer::Conv(l) => vec![
                (LayerTag::Conv, Role::Weight, &mut l.weight.value),
                (LayerTag::Conv, Role::Bias, &mut l.bias.value),
            ],
            Layer::BatchNorm(l) => vec![
                (LayerTag::BatchNorm, Role::Gamma, &mut l.gamma.value),
                (LayerTag::BatchNorm, Role::Beta, &mut l.beta.value),
                (LayerTag::BatchNorm, Role::RunningMean, &mut l.running_mean),
                (LayerTag::BatchNorm, Role::RunningVar, &mut l.running_var),
            ],
            Layer::Dense(l) => vec![
                (LayerTag::Dense, Role::Weight, &mut l.weight.value),
                (LayerTag::Dense, Role::Bias, &mut l.bias.value),
            ],
            _ => Vec::new(),
        }
    }
}

/// Ordered list of layers run front to back.
#[derive(Debug, Clone, Default)]
pub struct Sequential<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self { layers }
    }

    pub fn push(&mut self, layer: Layer<T>) {
        self.layers.push(layer);
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, mode)?;
        }
        Ok(cur)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut cur = dy.clone();
        for layer in self.layers.iter_mut().rev() {
            cur = layer.backward(&cur)?;
        }
        Ok(cur)
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mut cur = input.to_vec();
        for layer in &self.layers {
            cur = layer.output_shape(&cur)?;
        }
        Ok(cur)
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        param_count(self.params())
    }

    pub fn state(&self) -> Vec<StateEntry<T>> {
        self.layers.iter().flat_map(|l| l.state()).collect()
    }

    pub fn state_mut(&mut self) -> Vec<(LayerTag, Role, &mut Tensor<T>)> {
        self.layers.iter_mut().flat_map(|l| l.state_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn clear_cache(&mut self) {
        for l in &mut self.layers {
            l.clear_cache();
        }
    }
}

/// Total trainable element count.
pub fn param_count<'a, T: Scalar>(params: impl IntoIterator<Item = &'a Param<T>>) -> usize {
    params.into_iter().map(|p| p.len()).sum()
}

/// Copies `entries` into `slots` after checking kind, role and shape of each pair.
pub fn load_state<T: Scalar>(
    slots: Vec<(LayerTag, Role, &mut Tensor<T>)>,
    entries: &[StateEntry<T>],
) -> Result<(), NnError> {
    if slots.len() != entries.len() {
        return Err(NnError::StateMismatch(format!(
            "model has {} state tensors, checkpoint has {}",
            slots.len(),
            entries.len()
        )));
    }
    for (i, ((tag, role, dst), src)) in slots.into_iter().zip(entries).enumerate() {
        if tag != src.tag || role != src.role || dst.shape() != src.tensor.shape() {
            return Err(NnError::StateMismatch(format!(
                "entry {i}: model has {tag:?}/{role:?} {:?}, checkpoint has {:?}/{:?} {:?}",
                dst.shape(),
                src.tag,
                src.role,
                src.tensor.shape()
            )));
        }
        *dst = src.tensor.clone();
    }
    Ok(())
}
