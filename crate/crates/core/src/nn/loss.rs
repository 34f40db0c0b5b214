use super::{NnError, Scalar, Tensor};

/// Result of a fused softmax + cross-entropy evaluation.
#[derive(Debug, Clone)]
pub struct CrossEntropy<T> {
    /// Mean negative log-likelihood over the batch.
    pub loss: T,
    pub probs: Tensor<T>,
    /// d loss / d logits, `(probs - onehot) / N`.
    pub grad: Tensor<T>,
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let [_, c] = logits.dims2("softmax")?;
    let mut out = logits.clone();
    if c == 0 {
        return Ok(out);
    }
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<CrossEntropy<T>, NnError> {
    let [n, c] = logits.dims2("softmax_cross_entropy")?;
    if labels.len() != n {
        return Err(NnError::ShapeMismatch(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(NnError::LabelOutOfRange { label: bad, classes: c });
    }
    let probs = softmax(logits)?;
    let mut loss = T::zero();
    let inv_n = T::one() / T::lit(n.max(1) as f64);
    let mut grad = probs.clone();
    for (i, &label) in labels.iter().enumerate() {
        // log p computed from the shifted logits so huge margins stay finite
        let row = &logits.data()[i * c..(i + 1) * c];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        loss += lse - row[label];
        let g = &mut grad.data_mut()[i * c..(i + 1) * c];
        g[label] -= T::one();
        for v in g.iter_mut() {
            *v *= inv_n;
        }
    }
    Ok(CrossEntropy {
        loss: loss * inv_n,
        probs,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let logits = Tensor::<f64>::zeros(&[3, 7]);
        let ce = softmax_cross_entropy(&logits, &[0, 3, 6]).unwrap();
        assert!(ce.probs.data().iter().all(|&p| (p - 1.0 / 7.0).abs() < 1e-15));
        assert!((ce.loss - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn huge_logit_is_stable() {
        let mut v = vec![0.0f32; 7];
        v[2] = 1000.0;
        let ce = softmax_cross_entropy(&Tensor::from_vec(&[1, 7], v).unwrap(), &[2]).unwrap();
        assert!(ce.loss.is_finite() && ce.loss.abs() < 1e-6);
        assert!(ce.probs.all_finite());
    }

    #[test]
    fn label_out_of_range() {
        let err = softmax_cross_entropy(&Tensor::<f64>::zeros(&[1, 3]), &[3]).unwrap_err();
        assert_eq!(err, NnError::LabelOutOfRange { label: 3, classes: 3 });
    }
}
