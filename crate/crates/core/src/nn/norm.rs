use super::{Mode, NnError, Param, Scalar, Tensor};

/// Per-channel batch normalization over `(N, H, W)`.
///
/// Running statistics follow `running = momentum * running + (1 - momentum) * batch`
/// (unbiased variance for the running estimate).
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    pub channels: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: T,
    pub epsilon: T,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    shape: [usize; 4],
    x_hat: Vec<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(Tensor::filled(&[channels], T::one())),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
            momentum: T::lit(0.9),
            epsilon: T::lit(1e-5),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        let [n, c, h, w] = x.dims4("batchnorm2d")?;
        if c != self.channels {
            return Err(NnError::ShapeMismatch(format!(
                "batchnorm2d over {} channels got {c}",
                self.channels
            )));
        }
        if mode == Mode::Train && n < 2 {
            return Err(NnError::BatchTooSmall(n));
        }
        let plane = h * w;
        let m = n * plane;
        let xd = x.data();
        let mut out = vec![T::zero(); xd.len()];
        let mut x_hat = vec![T::zero(); xd.len()];
        let mut inv_std = vec![T::zero(); c];
        for ch in 0..c {
            let idx = |i: usize, j: usize| (i * c + ch) * plane + j;
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut sum = T::zero();
                    for i in 0..n {
                        for j in 0..plane {
                            sum += xd[idx(i, j)];
                        }
                    }
                    let mean = sum / T::lit(m as f64);
                    let mut sq = T::zero();
                    for i in 0..n {
                        for j in 0..plane {
                            let d = xd[idx(i, j)] - mean;
                            sq += d * d;
                        }
                    }
                    let var = sq / T::lit(m as f64);
                    let unbiased = if m > 1 { sq / T::lit((m - 1) as f64) } else { var };
                    let mom = self.momentum;
                    let rm = &mut self.running_mean.data_mut()[ch];
                    *rm = mom * *rm + (T::one() - mom) * mean;
                    let rv = &mut self.running_var.data_mut()[ch];
                    *rv = mom * *rv + (T::one() - mom) * unbiased;
                    (mean, var)
                }
                Mode::Infer => (self.running_mean.data()[ch], self.running_var.data()[ch]),
            };
            let is = T::one() / (var + self.epsilon).sqrt();
            inv_std[ch] = is;
            let (g, b) = (self.gamma.value.data()[ch], self.beta.value.data()[ch]);
            for i in 0..n {
                for j in 0..plane {
                    let k = idx(i, j);
                    let xh = (xd[k] - mean) * is;
                    x_hat[k] = xh;
                    out[k] = g * xh + b;
                }
            }
        }
        self.cache = Some(BnCache {
            shape: [n, c, h, w],
            x_hat,
            inv_std,
            mode,
        });
        Tensor::from_vec(&[n, c, h, w], out)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| NnError::NoForwardCache("batchnorm2d".into()))?;
        let [n, c, h, w] = cache.shape;
        if dy.shape() != cache.shape {
            return Err(NnError::ShapeMismatch(format!(
                "batchnorm2d backward got {:?}",
                dy.shape()
            )));
        }
        let plane = h * w;
        let m = T::lit((n * plane) as f64);
        let g = dy.data();
        let mut dx = vec![T::zero(); g.len()];
        for ch in 0..c {
            let idx = |i: usize, j: usize| (i * c + ch) * plane + j;
            let gamma = self.gamma.value.data()[ch];
            let mut sum_dy = T::zero();
            let mut sum_dy_xh = T::zero();
            for i in 0..n {
                for j in 0..plane {
                    let k = idx(i, j);
                    sum_dy += g[k];
                    sum_dy_xh += g[k] * cache.x_hat[k];
                }
            }
            self.gamma.grad.data_mut()[ch] += sum_dy_xh;
            self.beta.grad.data_mut()[ch] += sum_dy;
            let is = cache.inv_std[ch];
            match cache.mode {
                Mode::Train => {
                    // dx = gamma*inv_std/m * (m*dy - sum(dy) - x_hat*sum(dy*x_hat))
                    let scale = gamma * is / m;
                    for i in 0..n {
                        for j in 0..plane {
                            let k = idx(i, j);
                            dx[k] = scale * (m * g[k] - sum_dy - cache.x_hat[k] * sum_dy_xh);
                        }
                    }
                }
                Mode::Infer => {
                    for i in 0..n {
                        for j in 0..plane {
                            let k = idx(i, j);
                            dx[k] = g[k] * gamma * is;
                        }
                    }
                }
            }
        }
        Tensor::from_vec(&[n, c, h, w], dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
