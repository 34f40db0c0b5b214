use super::{NnError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

/// Windowed max/average pooling without padding.
///
/// Max-pool ties route the gradient to the first element of the window in
/// row-major order.
#[derive(Debug, Clone)]
pub struct Pool2d {
    pub kind: PoolKind,
    pub window: (usize, usize),
    pub stride: (usize, usize),
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    input_shape: [usize; 4],
    out_hw: (usize, usize),
    argmax: Vec<usize>,
}

impl Pool2d {
    pub fn new(kind: PoolKind, window: (usize, usize), stride: (usize, usize)) -> Self {
        Self {
            kind,
            window,
            stride,
            cache: None,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize), NnError> {
        let (wh, ww) = self.window;
        let (sh, sw) = self.stride;
        if wh == 0 || ww == 0 || sh == 0 || sw == 0 {
            return Err(NnError::ShapeMismatch("pool window and stride must be >= 1".into()));
        }
        if wh > h || ww > w {
            return Err(NnError::ShapeMismatch(format!(
                "pool window {wh}x{ww} does not fit input {h}x{w}"
            )));
        }
        Ok(((h - wh) / sh + 1, (w - ww) / sw + 1))
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let [n, c, h, w] = x.dims4("pool2d")?;
        let (oh, ow) = self.output_hw(h, w)?;
        let (wh, ww) = self.window;
        let (sh, sw) = self.stride;
        let xd = x.data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::new();
        let area = T::lit((wh * ww) as f64);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let (y0, x0) = (oy * sh, ox * sw);
                    match self.kind {
                        PoolKind::Max => {
                            let mut best = base + y0 * w + x0;
                            for dy in 0..wh {
                                for dx in 0..ww {
                                    let k = base + (y0 + dy) * w + x0 + dx;
                                    if xd[k] > xd[best] {
                                        best = k;
                                    }
                                }
                            }
                            argmax.push(best);
                            out.push(xd[best]);
                        }
                        PoolKind::Avg => {
                            let mut s = T::zero();
                            for dy in 0..wh {
                                for dx in 0..ww {
                                    s += xd[base + (y0 + dy) * w + x0 + dx];
                                }
                            }
                            out.push(s / area);
                        }
                    }
                }
            }
        }
        self.cache = Some(PoolCache {
            input_shape: [n, c, h, w],
            out_hw: (oh, ow),
            argmax,
        });
        Tensor::from_vec(&[n, c, oh, ow], out)
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| NnError::NoForwardCache("pool2d".into()))?;
        let [n, c, h, w] = cache.input_shape;
        let (oh, ow) = cache.out_hw;
        if dy.shape() != [n, c, oh, ow] {
            return Err(NnError::ShapeMismatch("pool2d backward".into()));
        }
        let mut dx = vec![T::zero(); n * c * h * w];
        let g = dy.data();
        match self.kind {
            PoolKind::Max => {
                for (o, &src) in cache.argmax.iter().enumerate() {
                    dx[src] += g[o];
                }
            }
            PoolKind::Avg => {
                let (wh, ww) = self.window;
                let (sh, sw) = self.stride;
                let area = T::lit((wh * ww) as f64);
                for plane in 0..n * c {
                    let base = plane * h * w;
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let share = g[(plane * oh + oy) * ow + ox] / area;
                            for dyy in 0..wh {
                                for dxx in 0..ww {
                                    dx[base + (oy * sh + dyy) * w + ox * sw + dxx] += share;
                                }
                            }
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

/// Max over the whole time (last) axis: `[N, C, H, W] -> [N, C, H, 1]`.
#[derive(Debug, Clone, Default)]
pub struct TimeMaxPool {
    cache: Option<([usize; 4], Vec<usize>)>,
}

impl TimeMaxPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let [n, c, h, w] = x.dims4("time max pool")?;
        if w == 0 {
            return Err(NnError::ShapeMismatch("time max pool over empty axis".into()));
        }
        let xd = x.data();
        let mut out = Vec::with_capacity(n * c * h);
        let mut argmax = Vec::with_capacity(n * c * h);
        for row in 0..n * c * h {
            let base = row * w;
            let mut best = base;
            for k in base + 1..base + w {
                if xd[k] > xd[best] {
                    best = k;
                }
            }
            argmax.push(best);
            out.push(xd[best]);
        }
        self.cache = Some(([n, c, h, w], argmax));
        Tensor::from_vec(&[n, c, h, 1], out)
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (shape, argmax) = self
            .cache
            .take()
            .ok_or_else(|| NnError::NoForwardCache("time max pool".into()))?;
        let [n, c, h, w] = shape;
        if dy.len() != n * c * h {
            return Err(NnError::ShapeMismatch("time max pool backward".into()));
        }
        let mut dx = vec![T::zero(); n * c * h * w];
        for (o, &src) in argmax.iter().enumerate() {
            dx[src] += dy.data()[o];
        }
        Tensor::from_vec(&shape, dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
