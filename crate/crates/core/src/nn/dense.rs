use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{he_uniform, matmul, MatRef, Mode, NnError, Param, Scalar, Tensor};

/// Fully connected layer `y = x W + b` with `W: [D, M]`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_features: usize, out_features: usize, rng: &mut impl Rng) -> Self {
        Self {
            in_features,
            out_features,
            weight: Param::new(he_uniform(&[in_features, out_features], in_features, rng)),
            bias: Param::new(Tensor::zeros(&[out_features])),
            input: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let [n, d] = x.dims2("dense")?;
        if d != self.in_features {
            return Err(NnError::ShapeMismatch(format!(
                "dense expects {} features, got {d}",
                self.in_features
            )));
        }
        let m = self.out_features;
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(self.bias.value.data());
        }
        matmul(
            MatRef::new(x.data(), n, d),
            MatRef::new(self.weight.value.data(), d, m),
            &mut out,
            true,
        );
        self.input = Some(x.clone());
        Tensor::from_vec(&[n, m], out)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = self
            .input
            .take()
            .ok_or_else(|| NnError::NoForwardCache("dense".into()))?;
        let [n, d] = x.dims2("dense")?;
        let m = self.out_features;
        if dy.shape() != [n, m] {
            return Err(NnError::ShapeMismatch(format!("dense backward got {:?}", dy.shape())));
        }
        matmul(
            MatRef::new(x.data(), n, d).t(),
            MatRef::new(dy.data(), n, m),
            self.weight.grad.data_mut(),
            true,
        );
        let db = self.bias.grad.data_mut();
        for row in dy.data().chunks(m) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }
        let mut dx = vec![T::zero(); n * d];
        matmul(
            MatRef::new(dy.data(), n, m),
            MatRef::new(self.weight.value.data(), d, m).t(),
            &mut dx,
            false,
        );
        Tensor::from_vec(&[n, d], dx)
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}

/// Inverted dropout driven by its own seeded stream.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub rate: f64,
    rng: ChaCha8Rng,
    mask: Option<Vec<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64, seed: u64) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::BadParameter(format!("dropout rate {rate} not in [0, 1)")));
        }
        Ok(Self {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
        })
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = Some(vec![T::one(); x.len()]);
            return x.clone();
        }
        let keep = T::lit(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.len())
            .map(|_| {
                if self.rng.random::<f64>() < self.rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let mut y = x.clone();
        for (v, &m) in y.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        y
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mask = self
            .mask
            .take()
            .ok_or_else(|| NnError::NoForwardCache("dropout".into()))?;
        if mask.len() != dy.len() {
            return Err(NnError::ShapeMismatch("dropout backward".into()));
        }
        let mut dx = dy.clone();
        for (v, &m) in dx.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.mask = None;
    }
}

/// `[N, ...] -> [N, prod(...)]`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let n = *x
            .shape()
            .first()
            .ok_or_else(|| NnError::ShapeMismatch("flatten of a 0-d tensor".into()))?;
        let rest = x.shape()[1..].iter().product();
        self.shape = Some(x.shape().to_vec());
        x.clone().reshape(&[n, rest])
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let shape = self
            .shape
            .take()
            .ok_or_else(|| NnError::NoForwardCache("flatten".into()))?;
        dy.clone().reshape(&shape)
    }

    pub fn clear_cache(&mut self) {
        self.shape = None;
    }
}
