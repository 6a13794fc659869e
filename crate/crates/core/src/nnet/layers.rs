//! Layer forward/backward kernels. Four layer types only: 3x3 valid
//! convolution (stride 1, relu), 2x2 max pool (stride 2), dense with relu,
//! and a linear dense output.

use crate::error::{Error, Result};

/// Per-item spatial shape (channels, height, width); dense layers flatten.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ItemShape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl ItemShape {
    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn flat(n: usize) -> ItemShape {
        ItemShape { c: n, h: 1, w: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    /// 3x3 filters, stride 1, no padding, relu activation.
    Conv { out_maps: usize },
    /// 2x2 window, stride 2.
    MaxPool,
    /// Fully connected with relu.
    Dense { units: usize },
    /// Fully connected, linear (output layer).
    DenseLinear { units: usize },
}

impl LayerSpec {
    pub fn output_shape(&self, input: ItemShape) -> Result<ItemShape> {
        match *self {
            LayerSpec::Conv { out_maps } => {
                if input.h < 3 || input.w < 3 {
                    return Err(Error::ShapeMismatch(format!(
                        "conv input {}x{} smaller than 3x3 filter",
                        input.h, input.w
                    )));
                }
                Ok(ItemShape {
                    c: out_maps,
                    h: input.h - 2,
                    w: input.w - 2,
                })
            }
            LayerSpec::MaxPool => {
                if input.h % 2 != 0 || input.w % 2 != 0 {
                    return Err(Error::ShapeMismatch(format!(
                        "max pool requires even input, got {}x{}",
                        input.h, input.w
                    )));
                }
                Ok(ItemShape {
                    c: input.c,
                    h: input.h / 2,
                    w: input.w / 2,
                })
            }
            LayerSpec::Dense { units } | LayerSpec::DenseLinear { units } => {
                Ok(ItemShape::flat(units))
            }
        }
    }

    /// (fan_in, fan_out) for the uniform initialization bound.
    pub fn fans(&self, input: ItemShape) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Conv { out_maps } => Some((9 * input.c, 9 * out_maps)),
            LayerSpec::MaxPool => None,
            LayerSpec::Dense { units } | LayerSpec::DenseLinear { units } => {
                Some((input.len(), units))
            }
        }
    }

    /// (weight count, bias count); zero for pooling.
    pub fn param_counts(&self, input: ItemShape) -> (usize, usize) {
        match *self {
            LayerSpec::Conv { out_maps } => (out_maps * input.c * 9, out_maps),
            LayerSpec::MaxPool => (0, 0),
            LayerSpec::Dense { units } | LayerSpec::DenseLinear { units } => {
                (units * input.len(), units)
            }
        }
    }

    pub fn has_relu(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }
}

/// Weights for one parametric layer (empty for pooling).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros_like(spec: &LayerSpec, input: ItemShape) -> LayerParams {
        let (nw, nb) = spec.param_counts(input);
        LayerParams {
            weights: vec![0.0; nw],
            bias: vec![0.0; nb],
        }
    }
}

/// Forward state cached per item for the backward pass.
pub struct LayerCache {
    /// layer input (flattened)
    pub input: Vec<f64>,
    /// pre-activation values (conv/dense); winner indices for pooling
    pub pre: Vec<f64>,
    pub argmax: Vec<usize>,
}

pub fn forward_layer(
    spec: &LayerSpec,
    params: &LayerParams,
    input: &[f64],
    in_shape: ItemShape,
    cache: Option<&mut LayerCache>,
) -> Vec<f64> {
    match *spec {
        LayerSpec::Conv { out_maps } => {
            let (oh, ow) = (in_shape.h - 2, in_shape.w - 2);
            let mut pre = vec![0.0; out_maps * oh * ow];
            for m in 0..out_maps {
                let wbase = m * in_shape.c * 9;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = params.bias[m];
                        for c in 0..in_shape.c {
                            let wk = &params.weights[wbase + c * 9..wbase + c * 9 + 9];
                            let ibase = c * in_shape.h * in_shape.w;
                            for ky in 0..3 {
                                let row = ibase + (oy + ky) * in_shape.w + ox;
                                acc += wk[ky * 3] * input[row]
                                    + wk[ky * 3 + 1] * input[row + 1]
                                    + wk[ky * 3 + 2] * input[row + 2];
                            }
                        }
                        pre[m * oh * ow + oy * ow + ox] = acc;
                    }
                }
            }
            let out: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
            if let Some(c) = cache {
                c.input = input.to_vec();
                c.pre = pre;
            }
            out
        }
        LayerSpec::MaxPool => {
            let (oh, ow) = (in_shape.h / 2, in_shape.w / 2);
            let mut out = vec![0.0; in_shape.c * oh * ow];
            let mut argmax = vec![0usize; out.len()];
            for c in 0..in_shape.c {
                let ibase = c * in_shape.h * in_shape.w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        // first maximal element in row-major order wins
                        let mut best_idx = ibase + (2 * oy) * in_shape.w + 2 * ox;
                        let mut best = input[best_idx];
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = ibase + (2 * oy + dy) * in_shape.w + 2 * ox + dx;
                            if input[idx] > best {
                                best = input[idx];
                                best_idx = idx;
                            }
                        }
                        let o = c * oh * ow + oy * ow + ox;
                        out[o] = best;
                        argmax[o] = best_idx;
                    }
                }
            }
            if let Some(cch) = cache {
                cch.input = input.to_vec();
                cch.argmax = argmax;
            }
            out
        }
        LayerSpec::Dense { units } | LayerSpec::DenseLinear { units } => {
            let n_in = in_shape.len();
            let mut pre = params.bias.clone();
            for (u, p) in pre.iter_mut().enumerate().take(units) {
                let row = &params.weights[u * n_in..(u + 1) * n_in];
                *p += dot(row, input);
            }
            let out: Vec<f64> = if spec.has_relu() {
                pre.iter().map(|&v| v.max(0.0)).collect()
            } else {
                pre.clone()
            };
            if let Some(c) = cache {
                c.input = input.to_vec();
                c.pre = pre;
            }
            out
        }
    }
}

/// Backward through one layer. `grad_out` is d(loss)/d(layer output).
/// Accumulates parameter gradients into `grads` and returns
/// d(loss)/d(layer input).
pub fn backward_layer(
    spec: &LayerSpec,
    params: &LayerParams,
    cache: &LayerCache,
    in_shape: ItemShape,
    grad_out: &[f64],
    grads: &mut LayerParams,
) -> Vec<f64> {
    match *spec {
        LayerSpec::Conv { out_maps } => {
            let (oh, ow) = (in_shape.h - 2, in_shape.w - 2);
            let mut grad_in = vec![0.0; in_shape.len()];
            for m in 0..out_maps {
                let wbase = m * in_shape.c * 9;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let o = m * oh * ow + oy * ow + ox;
                        if cache.pre[o] <= 0.0 {
                            continue;
                        }
                        let g = grad_out[o];
                        grads.bias[m] += g;
                        for c in 0..in_shape.c {
                            let ibase = c * in_shape.h * in_shape.w;
                            for ky in 0..3 {
                                let row = ibase + (oy + ky) * in_shape.w + ox;
                                let wk = wbase + c * 9 + ky * 3;
                                for kx in 0..3 {
                                    grads.weights[wk + kx] += g * cache.input[row + kx];
                                    grad_in[row + kx] += g * params.weights[wk + kx];
                                }
                            }
                        }
                    }
                }
            }
            grad_in
        }
        LayerSpec::MaxPool => {
            let mut grad_in = vec![0.0; in_shape.len()];
            for (o, &src) in cache.argmax.iter().enumerate() {
                grad_in[src] += grad_out[o];
            }
            grad_in
        }
        LayerSpec::Dense { units } | LayerSpec::DenseLinear { units } => {
            let n_in = in_shape.len();
            let mut grad_in = vec![0.0; n_in];
            for u in 0..units {
                let g = if spec.has_relu() && cache.pre[u] <= 0.0 {
                    0.0
                } else {
                    grad_out[u]
                };
                if g == 0.0 {
                    continue;
                }
                grads.bias[u] += g;
                let wrow = &params.weights[u * n_in..(u + 1) * n_in];
                let grow = &mut grads.weights[u * n_in..(u + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += g * cache.input[i];
                    grad_in[i] += g * wrow[i];
                }
            }
            grad_in
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_shape_and_identity_filter() {
        let spec = LayerSpec::Conv { out_maps: 1 };
        let in_shape = ItemShape { c: 1, h: 4, w: 4 };
        assert_eq!(spec.output_shape(in_shape).unwrap(), ItemShape { c: 1, h: 2, w: 2 });
        // center-tap filter reproduces the interior
        let mut params = LayerParams::zeros_like(&spec, in_shape);
        params.weights[4] = 1.0;
        let input: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let out = forward_layer(&spec, &params, &input, in_shape, None);
        assert_eq!(out, vec![5.0, 6.0, 9.0, 10.0]);
    }

    #[test]
    fn pool_picks_first_max_on_ties() {
        let spec = LayerSpec::MaxPool;
        let in_shape = ItemShape { c: 1, h: 2, w: 2 };
        let mut cache = LayerCache {
            input: vec![],
            pre: vec![],
            argmax: vec![],
        };
        let out = forward_layer(&spec, &LayerParams { weights: vec![], bias: vec![] }, &[7.0, 7.0, 7.0, 7.0], in_shape, Some(&mut cache));
        assert_eq!(out, vec![7.0]);
        assert_eq!(cache.argmax, vec![0]); // row-major first
    }

    #[test]
    fn dense_linear_matches_matvec() {
        let spec = LayerSpec::DenseLinear { units: 2 };
        let in_shape = ItemShape::flat(3);
        let params = LayerParams {
            weights: vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5],
            bias: vec![1.0, 0.0],
        };
        let out = forward_layer(&spec, &params, &[2.0, 3.0, 4.0], in_shape, None);
        assert_eq!(out, vec![2.0 - 4.0 + 1.0, 0.5 * 9.0]);
    }

    #[test]
    fn pool_rejects_odd_input() {
        let spec = LayerSpec::MaxPool;
        assert!(spec.output_shape(ItemShape { c: 1, h: 3, w: 4 }).is_err());
    }
}
