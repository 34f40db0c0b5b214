use rand::Rng;
use rayon::prelude::*;

use super::{he_uniform, matmul, MatRef, NnError, Param, Scalar, Tensor};

/// 2-D cross-correlation with bias, computed as im2col + GEMM per sample.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    /// `[out, in, kh, kw]`
    pub weight: Param<T>,
    /// `[out]`
    pub bias: Param<T>,
    cache: Option<ConvCache<T>>,
}

#[derive(Debug, Clone)]
struct ConvCache<T> {
    input_shape: [usize; 4],
    out_hw: (usize, usize),
    cols: Vec<Vec<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * kernel.0 * kernel.1;
        let shape = [out_channels, in_channels, kernel.0, kernel.1];
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: Param::new(he_uniform(&shape, fan_in, rng)),
            bias: Param::new(Tensor::zeros(&[out_channels])),
            cache: None,
        }
    }

    /// Output spatial size for an `h x w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize), NnError> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        if sh == 0 || sw == 0 {
            return Err(NnError::ShapeMismatch("conv stride must be >= 1".into()));
        }
        if h + 2 * ph < kh || w + 2 * pw < kw {
            return Err(NnError::ShapeMismatch(format!(
                "kernel {kh}x{kw} does not fit padded input {}x{}",
                h + 2 * ph,
                w + 2 * pw
            )));
        }
        Ok(((h + 2 * ph - kh) / sh + 1, (w + 2 * pw - kw) / sw + 1))
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.0 * self.kernel.1
    }

    fn im2col(&self, x: &[T], h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = (self.padding.0 as isize, self.padding.1 as isize);
        let p = oh * ow;
        let mut cols = vec![T::zero(); self.patch_len() * p];
        for c in 0..self.in_channels {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (c * kh + ki) * kw + kj;
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for oy in 0..oh {
                        let iy = (oy * sh + ki) as isize - ph;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = (ox * sw + kj) as isize - pw;
                            if ix >= 0 && ix < w as isize {
                                dst[oy * ow + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[T], h: usize, w: usize, oh: usize, ow: usize) -> Vec<T> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = (self.padding.0 as isize, self.padding.1 as isize);
        let p = oh * ow;
        let mut x = vec![T::zero(); self.in_channels * h * w];
        for c in 0..self.in_channels {
            let plane = &mut x[c * h * w..(c + 1) * h * w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (c * kh + ki) * kw + kj;
                    let src = &cols[row * p..(row + 1) * p];
                    for oy in 0..oh {
                        let iy = (oy * sh + ki) as isize - ph;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = (ox * sw + kj) as isize - pw;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += src[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        x
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let [n, c, h, w] = x.dims4("conv2d")?;
        if c != self.in_channels {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        let (oh, ow) = self.output_hw(h, w)?;
        let k = self.out_channels;
        let p = oh * ow;
        let sample = c * h * w;
        let weight = self.weight.value.data();
        let bias = self.bias.value.data();
        let results: Vec<(Vec<T>, Vec<T>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let cols = self.im2col(&x.data()[i * sample..(i + 1) * sample], h, w, oh, ow);
                let mut out = vec![T::zero(); k * p];
                for (kk, b) in bias.iter().enumerate() {
                    out[kk * p..(kk + 1) * p].fill(*b);
                }
                matmul(
                    MatRef::new(weight, k, self.patch_len()),
                    MatRef::new(&cols, self.patch_len(), p),
                    &mut out,
                    true,
                );
                (cols, out)
            })
            .collect();
        let mut data = Vec::with_capacity(n * k * p);
        let mut cols_cache = Vec::with_capacity(n);
        for (cols, out) in results {
            data.extend_from_slice(&out);
            cols_cache.push(cols);
        }
        self.cache = Some(ConvCache {
            input_shape: [n, c, h, w],
            out_hw: (oh, ow),
            cols: cols_cache,
        });
        Tensor::from_vec(&[n, k, oh, ow], data)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| NnError::NoForwardCache("conv2d".into()))?;
        let [n, c, h, w] = cache.input_shape;
        let (oh, ow) = cache.out_hw;
        let k = self.out_channels;
        let p = oh * ow;
        if dy.shape() != [n, k, oh, ow] {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d backward got {:?}, expected {:?}",
                dy.shape(),
                [n, k, oh, ow]
            )));
        }
        let patch = self.patch_len();
        let weight = self.weight.value.data();
        let parts: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let g = &dy.data()[i * k * p..(i + 1) * k * p];
                let cols = &cache.cols[i];
                let mut dw = vec![T::zero(); k * patch];
                matmul(MatRef::new(g, k, p), MatRef::new(cols, patch, p).t(), &mut dw, false);
                let db: Vec<T> = (0..k).map(|kk| g[kk * p..(kk + 1) * p].iter().copied().sum()).collect();
                let mut dcols = vec![T::zero(); patch * p];
                matmul(MatRef::new(weight, k, patch).t(), MatRef::new(g, k, p), &mut dcols, false);
                (dw, db, self.col2im(&dcols, h, w, oh, ow))
            })
            .collect();
        let mut dx = Vec::with_capacity(n * c * h * w);
        for (dw, db, dxi) in parts {
            for (acc, v) in self.weight.grad.data_mut().iter_mut().zip(dw) {
                *acc += v;
            }
            for (acc, v) in self.bias.grad.data_mut().iter_mut().zip(db) {
                *acc += v;
            }
            dx.extend_from_slice(&dxi);
        }
        Tensor::from_vec(&[n, c, h, w], dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
