//! Minimal CNN engine: the exact layer set, initialization, RMSE objective
//! and momentum-SGD optimizer the landmark regressors need, with f64
//! weights so gradient checking can use tight tolerances.

pub mod io;
pub mod layers;
pub mod tensor;
pub mod train;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::SeededRng;

pub use layers::{ItemShape, LayerParams, LayerSpec};
pub use tensor::Tensor;
pub use train::{train, Dataset, History, TrainConfig};

/// Dataset-level normalization statistics persisted with the weights.
/// Pixels map as v/pixel_divisor - pixel_mean; coordinates as
/// c/coord_divisor - coord_mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormStats {
    pub pixel_divisor: f64,
    pub pixel_mean: f64,
    pub coord_divisor: f64,
    pub coord_mean: f64,
}

impl Default for NormStats {
    fn default() -> Self {
        NormStats {
            pixel_divisor: 255.0,
            pixel_mean: 0.0,
            coord_divisor: 41.0,
            coord_mean: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel {
    input_shape: ItemShape,
    specs: Vec<LayerSpec>,
    layers: Vec<LayerParams>,
    pub stats: NormStats,
}

/// The landmark-regressor layer stack: one 3x3 convolution, max pooling,
/// an 800-unit hidden layer and a 4-unit linear output.
pub fn landmark_specs(feature_maps: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv { out_maps: feature_maps },
        LayerSpec::MaxPool,
        LayerSpec::Dense { units: 800 },
        LayerSpec::DenseLinear { units: 4 },
    ]
}

pub const NOSE_FEATURE_MAPS: usize = 32;
pub const COIN_FEATURE_MAPS: usize = 24;
pub const CNN_INPUT: ItemShape = ItemShape { c: 3, h: 42, w: 42 };

impl CnnModel {
    /// Validate the spec chain and initialize every weight and bias
    /// uniformly in +/- sqrt(6 / (fan_in + fan_out)).
    pub fn init(input_shape: ItemShape, specs: Vec<LayerSpec>, stats: NormStats, rng: &SeededRng) -> Result<Self> {
        let mut init_rng = rng.child("init");
        let mut shape = input_shape;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in &specs {
            let out = spec.output_shape(shape)?;
            let mut params = LayerParams::zeros_like(spec, shape);
            if let Some((fan_in, fan_out)) = spec.fans(shape) {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for w in params.weights.iter_mut().chain(params.bias.iter_mut()) {
                    *w = init_rng.gen_range_f64(-bound, bound);
                }
            }
            layers.push(params);
            shape = out;
        }
        Ok(CnnModel {
            input_shape,
            specs,
            layers,
            stats,
        })
    }

    pub fn from_parts(
        input_shape: ItemShape,
        specs: Vec<LayerSpec>,
        layers: Vec<LayerParams>,
        stats: NormStats,
    ) -> Result<Self> {
        let mut shape = input_shape;
        if specs.len() != layers.len() {
            return Err(Error::ShapeMismatch("spec/layer count mismatch".into()));
        }
        for (spec, params) in specs.iter().zip(&layers) {
            let (nw, nb) = spec.param_counts(shape);
            if params.weights.len() != nw || params.bias.len() != nb {
                return Err(Error::ShapeMismatch(format!(
                    "layer {spec:?} expects {nw} weights / {nb} biases, got {} / {}",
                    params.weights.len(),
                    params.bias.len()
                )));
            }
            shape = spec.output_shape(shape)?;
        }
        Ok(CnnModel {
            input_shape,
            specs,
            layers,
            stats,
        })
    }

    pub fn input_shape(&self) -> ItemShape {
        self.input_shape
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    /// Output item shape after each layer, in order.
    pub fn shape_chain(&self) -> Vec<ItemShape> {
        let mut shape = self.input_shape;
        self.specs
            .iter()
            .map(|s| {
                shape = s.output_shape(shape).expect("validated at construction");
                shape
            })
            .collect()
    }

    pub fn output_len(&self) -> usize {
        self.shape_chain().last().map(|s| s.len()).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let s = self.input_shape;
        let want = [s.c, s.h, s.w];
        if batch.shape().len() != 4 || batch.shape()[1..] != want {
            return Err(Error::ShapeMismatch(format!(
                "batch shape {:?} != [b, {}, {}, {}]",
                batch.shape(),
                s.c,
                s.h,
                s.w
            )));
        }
        Ok(batch.batch())
    }

    fn forward_item(&self, input: &[f64]) -> Vec<f64> {
        let mut shape = self.input_shape;
        let mut x = input.to_vec();
        for (spec, params) in self.specs.iter().zip(&self.layers) {
            x = layers::forward_layer(spec, params, &x, shape, None);
            shape = spec.output_shape(shape).expect("validated");
        }
        x
    }

    /// Forward pass over a whole batch; rows are per-item outputs.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let b = self.check_batch(batch)?;
        let items: Vec<&[f64]> = (0..b).map(|i| batch.item(i)).collect();
        let outs = par::map_slice(&items, |item| self.forward_item(item));
        let out_len = self.output_len();
        let mut data = Vec::with_capacity(b * out_len);
        for o in outs {
            data.extend_from_slice(&o);
        }
        Tensor::from_vec(&[b, out_len], data)
    }

    /// Sequential forward for the bench comparison.
    pub fn forward_seq(&self, batch: &Tensor) -> Result<Tensor> {
        let b = self.check_batch(batch)?;
        let out_len = self.output_len();
        let mut data = Vec::with_capacity(b * out_len);
        for i in 0..b {
            data.extend_from_slice(&self.forward_item(batch.item(i)));
        }
        Tensor::from_vec(&[b, out_len], data)
    }

    fn forward_cached(&self, input: &[f64]) -> (Vec<f64>, Vec<layers::LayerCache>) {
        let mut shape = self.input_shape;
        let mut x = input.to_vec();
        let mut caches = Vec::with_capacity(self.specs.len());
        for (spec, params) in self.specs.iter().zip(&self.layers) {
            let mut cache = layers::LayerCache {
                input: vec![],
                pre: vec![],
                argmax: vec![],
            };
            x = layers::forward_layer(spec, params, &x, shape, Some(&mut cache));
            caches.push(cache);
            shape = spec.output_shape(shape).expect("validated");
        }
        (x, caches)
    }

    fn zero_grads(&self) -> Vec<LayerParams> {
        self.specs
            .iter()
            .zip(std::iter::once(self.input_shape).chain(self.shape_chain()))
            .map(|(spec, shape)| LayerParams::zeros_like(spec, shape))
            .collect()
    }

    /// Backward for one item, accumulating into shared gradient buffers;
    /// per-item buffers would dominate the runtime for the large dense layer.
    fn backward_item_into(
        &self,
        caches: &[layers::LayerCache],
        grad_out: &[f64],
        grads: &mut [LayerParams],
    ) {
        let shapes: Vec<ItemShape> = std::iter::once(self.input_shape)
            .chain(self.shape_chain())
            .collect();
        let mut g = grad_out.to_vec();
        for li in (0..self.specs.len()).rev() {
            g = layers::backward_layer(
                &self.specs[li],
                &self.layers[li],
                &caches[li],
                shapes[li],
                &g,
                &mut grads[li],
            );
        }
    }

    /// Batch forward + backward under the RMSE objective. Returns the loss
    /// and per-layer parameter gradients summed over the batch.
    pub fn loss_and_gradients(&self, batch: &Tensor, targets: &Tensor) -> Result<(f64, Vec<LayerParams>)> {
        let b = self.check_batch(batch)?;
        let out_len = self.output_len();
        if targets.shape() != [b, out_len] {
            return Err(Error::ShapeMismatch(format!(
                "targets shape {:?} != [{b}, {out_len}]",
                targets.shape()
            )));
        }
        let items: Vec<usize> = (0..b).collect();
        let per_item: Vec<(Vec<f64>, Vec<layers::LayerCache>)> =
            par::map_slice(&items, |&i| self.forward_cached(batch.item(i)));

        let mut preds = Vec::with_capacity(b * out_len);
        for (out, _) in &per_item {
            preds.extend_from_slice(out);
        }
        let pred_t = Tensor::from_vec(&[b, out_len], preds)?;
        let (loss, grad) = rmse_loss(&pred_t, targets)?;

        // fixed chunk size keeps the summation order (and hence the exact
        // floating-point result) independent of the thread count
        let chunks: Vec<&[usize]> = items.chunks(8).collect();
        let grad_sets: Vec<Vec<LayerParams>> = par::map_slice(&chunks, |chunk| {
            let mut grads = self.zero_grads();
            for &i in *chunk {
                self.backward_item_into(&per_item[i].1, grad.item(i), &mut grads);
            }
            grads
        });
        let mut sets = grad_sets.into_iter();
        let mut total = sets.next().expect("at least one chunk");
        for set in sets {
            for (acc, g) in total.iter_mut().zip(&set) {
                for (a, v) in acc.weights.iter_mut().zip(&g.weights) {
                    *a += v;
                }
                for (a, v) in acc.bias.iter_mut().zip(&g.bias) {
                    *a += v;
                }
            }
        }
        Ok((loss, total))
    }
}

/// Root-mean-square error over all elements, with its gradient w.r.t. the
/// predictions: (pred - target) / (n * loss), defined as zero at loss 0.
pub fn rmse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "rmse shapes {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len() as f64;
    let sq_sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    let loss = (sq_sum / n).sqrt();
    let grad = if loss == 0.0 {
        Tensor::zeros(pred.shape())
    } else {
        let data = pred
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) / (n * loss))
            .collect();
        Tensor::from_vec(pred.shape(), data)?
    };
    Ok((loss, grad))
}

/// Compare analytic gradients to central finite differences (h = 1e-5)
/// over every parameter; returns the maximum relative error
/// |a - n| / max(1e-8, |a| + |n|).
pub fn gradient_check(model: &CnnModel, batch: &Tensor, targets: &Tensor) -> Result<f64> {
    const H: f64 = 1e-5;
    let (_, analytic) = model.loss_and_gradients(batch, targets)?;
    let mut probe = model.clone();
    let mut max_err: f64 = 0.0;
    for li in 0..model.layers().len() {
        for which in 0..2 {
            let count = if which == 0 {
                model.layers()[li].weights.len()
            } else {
                model.layers()[li].bias.len()
            };
            for pi in 0..count {
                fn slot<'a>(m: &'a mut CnnModel, li: usize, which: usize, pi: usize) -> &'a mut f64 {
                    let l = &mut m.layers_mut()[li];
                    if which == 0 {
                        &mut l.weights[pi]
                    } else {
                        &mut l.bias[pi]
                    }
                }
                let orig = *slot(&mut probe, li, which, pi);
                *slot(&mut probe, li, which, pi) = orig + H;
                let plus = eval_loss(&probe, batch, targets)?;
                *slot(&mut probe, li, which, pi) = orig - H;
                let minus = eval_loss(&probe, batch, targets)?;
                *slot(&mut probe, li, which, pi) = orig;
                let numeric = (plus - minus) / (2.0 * H);
                let a = if which == 0 {
                    analytic[li].weights[pi]
                } else {
                    analytic[li].bias[pi]
                };
                let err = (a - numeric).abs() / (1e-8f64).max(a.abs() + numeric.abs());
                max_err = max_err.max(err);
            }
        }
    }
    Ok(max_err)
}

fn eval_loss(model: &CnnModel, batch: &Tensor, targets: &Tensor) -> Result<f64> {
    let pred = model.forward(batch)?;
    Ok(rmse_loss(&pred, targets)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_model(seed: u64) -> CnnModel {
        // conv 4 maps, pool, dense 16, linear 4 on a 10x10x3 input
        CnnModel::init(
            ItemShape { c: 3, h: 10, w: 10 },
            vec![
                LayerSpec::Conv { out_maps: 4 },
                LayerSpec::MaxPool,
                LayerSpec::Dense { units: 16 },
                LayerSpec::DenseLinear { units: 4 },
            ],
            NormStats::default(),
            &SeededRng::new(seed),
        )
        .unwrap()
    }

    #[test]
    fn init_bounds() {
        // dense 12800 -> 800: bound sqrt(6/13600) ~= 0.02100
        let bound = (6.0f64 / 13600.0).sqrt();
        assert_relative_eq!(bound, 0.021004, epsilon = 1e-5);
        // dense 4 -> 4: bound sqrt(6/8)
        assert_relative_eq!((6.0f64 / 8.0).sqrt(), 0.8660, epsilon = 1e-4);

        let model = tiny_model(11);
        let shapes: Vec<ItemShape> = std::iter::once(model.input_shape())
            .chain(model.shape_chain())
            .collect();
        for (li, (spec, params)) in model.specs().iter().zip(model.layers()).enumerate() {
            if let Some((fi, fo)) = spec.fans(shapes[li]) {
                let b = (6.0 / (fi + fo) as f64).sqrt();
                for w in params.weights.iter().chain(&params.bias) {
                    assert!(w.abs() <= b, "layer {li} weight {w} outside +/-{b}");
                }
            }
        }
    }

    #[test]
    fn init_deterministic() {
        assert_eq!(tiny_model(5), tiny_model(5));
        assert_ne!(tiny_model(5), tiny_model(6));
    }

    #[test]
    fn glorot_mean_near_zero() {
        let model = CnnModel::init(
            ItemShape::flat(100),
            vec![LayerSpec::DenseLinear { units: 100 }],
            NormStats::default(),
            &SeededRng::new(3),
        )
        .unwrap();
        let w = &model.layers()[0].weights;
        assert!(w.len() >= 10_000);
        let bound = (6.0 / 200.0f64).sqrt();
        let mean: f64 = w.iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < bound / 10.0, "mean {mean} vs bound {bound}");
    }

    #[test]
    fn nose_architecture_shapes() {
        let model = CnnModel::init(
            CNN_INPUT,
            landmark_specs(NOSE_FEATURE_MAPS),
            NormStats::default(),
            &SeededRng::new(1),
        )
        .unwrap();
        let chain = model.shape_chain();
        assert_eq!(chain[0], ItemShape { c: 32, h: 40, w: 40 });
        assert_eq!(chain[1], ItemShape { c: 32, h: 20, w: 20 });
        assert_eq!(chain[2], ItemShape::flat(800));
        assert_eq!(chain[3], ItemShape::flat(4));
    }

    #[test]
    fn zero_model_outputs_zero() {
        let mut model = tiny_model(2);
        for l in model.layers_mut() {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let batch = Tensor::from_vec(&[1, 3, 10, 10], vec![0.3; 300]).unwrap();
        let out = model.forward(&batch).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_pure_and_batch_consistent() {
        let model = tiny_model(4);
        let item: Vec<f64> = (0..300).map(|i| (i % 17) as f64 / 17.0).collect();
        let mut two = item.clone();
        two.extend_from_slice(&item);
        let batch = Tensor::from_vec(&[2, 3, 10, 10], two).unwrap();
        let out = model.forward(&batch).unwrap();
        assert_eq!(out.item(0), out.item(1));
        let again = model.forward(&batch).unwrap();
        assert_eq!(out, again);
        assert_eq!(model.forward_seq(&batch).unwrap(), out);
    }

    #[test]
    fn rmse_values() {
        let p = Tensor::from_vec(&[1, 2], vec![1.0, 0.0]).unwrap();
        let t = Tensor::zeros(&[1, 2]);
        let (loss, _) = rmse_loss(&p, &t).unwrap();
        assert_relative_eq!(loss, (0.5f64).sqrt(), epsilon = 1e-12);

        let p = Tensor::from_vec(&[1, 3], vec![2.0, 2.0, 2.0]).unwrap();
        let t = Tensor::zeros(&[1, 3]);
        assert_relative_eq!(rmse_loss(&p, &t).unwrap().0, 2.0, epsilon = 1e-12);

        let (loss, grad) = rmse_loss(&t, &t).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_check_tiny_model() {
        let model = CnnModel::init(
            ItemShape { c: 1, h: 6, w: 6 },
            vec![
                LayerSpec::Conv { out_maps: 2 },
                LayerSpec::MaxPool,
                LayerSpec::Dense { units: 5 },
                LayerSpec::DenseLinear { units: 4 },
            ],
            NormStats::default(),
            &SeededRng::new(77),
        )
        .unwrap();
        let mut rng = SeededRng::new(9);
        let batch = Tensor::from_vec(
            &[2, 1, 6, 6],
            (0..72).map(|_| rng.gen_range_f64(-1.0, 1.0)).collect(),
        )
        .unwrap();
        let targets = Tensor::from_vec(
            &[2, 4],
            (0..8).map(|_| rng.gen_range_f64(-1.0, 1.0)).collect(),
        )
        .unwrap();
        let err = gradient_check(&model, &batch, &targets).unwrap();
        assert!(err < 1e-4, "gradient check error {err}");
    }

    #[test]
    fn scaled_gradient_is_flagged() {
        // doubling the analytic gradient should produce ~(2g-g)/(3g) = 1/3
        let p = Tensor::from_vec(&[1, 2], vec![1.0, -0.5]).unwrap();
        let t = Tensor::zeros(&[1, 2]);
        let (_, grad) = rmse_loss(&p, &t).unwrap();
        for (a, n) in grad.data().iter().map(|g| (2.0 * g, *g)) {
            let err = (a - n).abs() / (a.abs() + n.abs());
            assert_relative_eq!(err, 1.0 / 3.0, epsilon = 1e-12);
        }
    }
}
