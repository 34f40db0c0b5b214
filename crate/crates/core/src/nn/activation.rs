use std::fmt;
use std::str::FromStr;

use super::{NnError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Relu,
    Elu { alpha: f64 },
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Relu => f.write_str("relu"),
            ActivationKind::Elu { alpha } if *alpha == 1.0 => f.write_str("elu"),
            ActivationKind::Elu { alpha } => write!(f, "elu({alpha})"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "relu" {
            return Ok(ActivationKind::Relu);
        }
        if s == "elu" {
            return Ok(ActivationKind::Elu { alpha: 1.0 });
        }
        if let Some(inner) = s.strip_prefix("elu(").and_then(|r| r.strip_suffix(')')) {
            let alpha: f64 = inner.parse().map_err(|_| format!("bad elu alpha '{inner}'"))?;
            return Ok(ActivationKind::Elu { alpha });
        }
        Err(format!("unknown activation '{s}' (expected relu or elu)"))
    }
}

pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

pub fn elu<T: Scalar>(x: T, alpha: T) -> T {
    if x > T::zero() {
        x
    } else {
        alpha * (x.exp() - T::one())
    }
}

#[derive(Debug, Clone)]
pub struct Activation<T> {
    pub kind: ActivationKind,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Activation<T> {
    pub fn new(kind: ActivationKind) -> Self {
        Self { kind, input: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let y = match self.kind {
            ActivationKind::Relu => x.map(relu),
            ActivationKind::Elu { alpha } => {
                let a = T::lit(alpha);
                x.map(|v| elu(v, a))
            }
        };
        self.input = Some(x.clone());
        y
    }

    /// ReLU uses subgradient 0 at the origin.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = self
            .input
            .take()
            .ok_or_else(|| NnError::NoForwardCache("activation".into()))?;
        if x.shape() != dy.shape() {
            return Err(NnError::ShapeMismatch("activation backward".into()));
        }
        let data = match self.kind {
            ActivationKind::Relu => x
                .data()
                .iter()
                .zip(dy.data())
                .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                .collect(),
            ActivationKind::Elu { alpha } => {
                let a = T::lit(alpha);
                x.data()
                    .iter()
                    .zip(dy.data())
                    .map(|(&v, &g)| if v > T::zero() { g } else { g * a * v.exp() })
                    .collect()
            }
        };
        Tensor::from_vec(x.shape(), data)
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}
