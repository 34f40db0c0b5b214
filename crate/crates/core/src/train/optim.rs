use crate::nn::{NnError, Param, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    /// Number of steps taken so far.
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `theta` in place.
pub fn adam_step<T: Scalar>(
    theta: &mut [T],
    grad: &[T],
    state: &mut AdamState<T>,
    lr: f64,
    hp: AdamHyper,
) -> Result<(), NnError> {
    if theta.len() != grad.len() || theta.len() != state.m.len() || theta.len() != state.v.len() {
        return Err(NnError::ShapeMismatch(format!(
            "adam: {} params, {} grads, state {}",
            theta.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::lit(hp.beta1), T::lit(hp.beta2));
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let (lr, eps) = (T::lit(lr), T::lit(hp.epsilon));
    for i in 0..theta.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam over a fixed, ordered list of parameters.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub hyper: AdamHyper,
    states: Vec<AdamState<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(hyper: AdamHyper) -> Self {
        Self {
            hyper,
            states: Vec::new(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Param<T>>, lr: f64) -> Result<(), NnError> {
        if self.states.is_empty() {
            self.states = params.iter().map(|p| AdamState::new(p.len())).collect();
        }
        if self.states.len() != params.len() {
            return Err(NnError::ShapeMismatch("adam parameter list changed".into()));
        }
        for (p, st) in params.into_iter().zip(&mut self.states) {
            let Param { value, grad } = p;
            adam_step(value.data_mut(), grad.data(), st, lr, self.hyper)?;
        }
        Ok(())
    }
}

/// Scales all gradients so their global L2 norm is at most `max_norm`.
pub fn clip_grad_norm<T: Scalar>(params: Vec<&mut Param<T>>, max_norm: f64) -> f64 {
    let sq: f64 = params
        .iter()
        .flat_map(|p| p.grad.data().iter())
        .map(|g| {
            let g = g.to_f64_lossy();
            g * g
        })
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = T::lit(max_norm / norm);
        for p in params {
            for g in p.grad.data_mut() {
                *g *= s;
            }
        }
    }
    norm
}
