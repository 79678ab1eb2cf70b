//! Mixture density network: a tanh MLP mapping a property vector to a
//! diagonal Gaussian mixture over shape vectors.
//!
//! The output head produces, per input row, `G` mixture logits, `G x d`
//! means and `G x d` log-variances. Weights come from a softmax of the
//! logits; variances are `exp(log_var)` clamped at `variance_floor`.

mod backprop;
mod checkpoint;
mod sample;
mod train;

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::Checkpoint;
pub use sample::sample_shapes;
pub use train::{train, TrainOutcome};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdnConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Number of mixture components `G`.
    pub components: usize,
    /// Full-batch Adam steps.
    pub epochs: usize,
    pub learning_rate: f64,
    pub variance_floor: f64,
    pub seed: u64,
}

impl Default for MdnConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 6,
            hidden_width: 64,
            components: 10,
            epochs: 3000,
            learning_rate: 1e-3,
            variance_floor: 1e-6,
            seed: 0,
        }
    }
}

impl MdnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::InvalidConfig("MDN needs at least one component".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("MDN epochs must be >= 1".into()));
        }
        if self.variance_floor.is_nan() || self.variance_floor <= 0.0 {
            return Err(Error::InvalidConfig("variance floor must be > 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be > 0".into()));
        }
        if self.hidden_layers > 0 && self.hidden_width == 0 {
            return Err(Error::InvalidConfig("hidden width must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-row mixture parameters for `n` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    /// `n x G`, rows sum to one.
    pub weights: Array2<f64>,
    /// `n x G x d`.
    pub means: Array3<f64>,
    /// `n x G x d`, every entry at least the variance floor.
    pub variances: Array3<f64>,
}

impl MixtureParams {
    pub fn rows(&self) -> usize {
        self.weights.nrows()
    }

    pub fn components(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.means.len_of(Axis(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    /// Offset of the row-major `inputs x outputs` weight block; the bias
    /// follows it.
    pub offset: usize,
}

impl LayerShape {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }
}

/// A dense tanh network with a mixture head. Immutable once trained.
#[derive(Debug, Clone, PartialEq)]
pub struct MdnModel {
    config: MdnConfig,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Activations kept for backpropagation: `activations[0]` is the input,
/// `activations[l]` the output of hidden layer `l`.
pub(crate) struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
    pub head: Array2<f64>,
}

fn layer_shapes(config: &MdnConfig, input_dim: usize, output_dim: usize) -> Vec<LayerShape> {
    let head_width = config.components * (1 + 2 * output_dim);
    let mut widths = vec![input_dim];
    widths.extend(std::iter::repeat_n(config.hidden_width, config.hidden_layers));
    widths.push(head_width);
    let mut offset = 0;
    widths
        .windows(2)
        .map(|w| {
            let shape = LayerShape {
                inputs: w[0],
                outputs: w[1],
                offset,
            };
            offset += shape.len();
            shape
        })
        .collect()
}

impl MdnModel {
    /// Glorot-uniform weights and zero biases drawn from `config.seed`.
    pub fn new(config: MdnConfig, input_dim: usize, output_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidConfig("MDN input and output dims must be >= 1".into()));
        }
        let layers = layer_shapes(&config, input_dim, output_dim);
        let total = layers.iter().map(LayerShape::len).sum();
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for layer in &layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut params[layer.weight_range()] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(Self {
            config,
            input_dim,
            output_dim,
            layers,
            params,
        })
    }

    /// Rebuilds a model from a flat parameter vector in layer order
    /// (weights row-major, then bias, per layer).
    pub fn from_params(config: MdnConfig, input_dim: usize, output_dim: usize, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layers = layer_shapes(&config, input_dim, output_dim);
        let total: usize = layers.iter().map(LayerShape::len).sum();
        if params.len() != total {
            return Err(Error::InvalidConfig(format!(
                "expected {total} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            config,
            input_dim,
            output_dim,
            layers,
            params,
        })
    }

    pub fn config(&self) -> &MdnConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn components(&self) -> usize {
        self.config.components
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn weight(&self, layer: &LayerShape) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((layer.inputs, layer.outputs), &self.params[layer.weight_range()])
            .expect("layer layout matches parameter vector")
    }

    fn bias(&self, layer: &LayerShape) -> &[f64] {
        &self.params[layer.bias_range()]
    }

    fn check_inputs(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::Domain(format!(
                "expected {} input columns, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite MDN input".into()));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, x: ArrayView2<f64>) -> ForwardCache {
        let (hidden, head) = self.layers.split_at(self.layers.len() - 1);
        let mut activations = Vec::with_capacity(hidden.len() + 1);
        activations.push(x.to_owned());
        for layer in hidden {
            let mut z = activations.last().expect("input present").dot(&self.weight(layer));
            z += &ndarray::ArrayView1::from(self.bias(layer));
            z.mapv_inplace(f64::tanh);
            activations.push(z);
        }
        let mut out = activations.last().expect("input present").dot(&self.weight(&head[0]));
        out += &ndarray::ArrayView1::from(self.bias(&head[0]));
        ForwardCache { activations, head: out }
    }

    pub(crate) fn mixture_from_head(&self, head: &Array2<f64>) -> MixtureParams {
        let n = head.nrows();
        let g = self.config.components;
        let d = self.output_dim;
        let floor = self.config.variance_floor;
        let mut weights = Array2::zeros((n, g));
        let mut means = Array3::zeros((n, g, d));
        let mut variances = Array3::zeros((n, g, d));
        for i in 0..n {
            let row = head.row(i);
            let logits = row.slice(s![..g]);
            let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let total: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
            for c in 0..g {
                weights[[i, c]] = (logits[c] - max).exp() / total;
                for j in 0..d {
                    means[[i, c, j]] = row[g + c * d + j];
                    variances[[i, c, j]] = row[g + g * d + c * d + j].exp().max(floor);
                }
            }
        }
        MixtureParams {
            weights,
            means,
            variances,
        }
    }

    /// Mixture parameters for each row of `x` (`n x p`).
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<MixtureParams> {
        self.check_inputs(x)?;
        let cache = self.forward_cached(x);
        Ok(self.mixture_from_head(&cache.head))
    }

    /// Mixture parameters for a single property vector.
    pub fn forward_one(&self, x: &[f64]) -> Result<MixtureParams> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Domain(e.to_string()))?;
        self.forward(view)
    }

    /// The same network with mixture components relabeled: component `c` of
    /// the result is component `order[c]` of `self`.
    pub fn permute_components(&self, order: &[usize]) -> Result<MdnModel> {
        let g = self.config.components;
        let mut seen = vec![false; g];
        if order.len() != g || order.iter().any(|&c| c >= g || std::mem::replace(&mut seen[c], true)) {
            return Err(Error::InvalidConfig(format!(
                "{order:?} is not a permutation of 0..{g}"
            )));
        }
        self.select_components(order)
    }

    /// A network whose head emits components `order[0], order[1], ...` of
    /// `self`. Indices may repeat, so the component count can change.
    pub fn select_components(&self, order: &[usize]) -> Result<MdnModel> {
        let g = self.config.components;
        if order.is_empty() || order.iter().any(|&c| c >= g) {
            return Err(Error::InvalidConfig(format!("{order:?} does not select from 0..{g}")));
        }
        let d = self.output_dim;
        let new_g = order.len();
        let head = *self.layers.last().expect("head layer");
        // Source column in the old head for each column of the new head.
        let mut column_map = vec![0; new_g * (1 + 2 * d)];
        for (c, &src) in order.iter().enumerate() {
            column_map[c] = src;
            for j in 0..d {
                column_map[new_g + c * d + j] = g + src * d + j;
                column_map[new_g + new_g * d + c * d + j] = g + g * d + src * d + j;
            }
        }
        let config = MdnConfig {
            components: new_g,
            ..self.config.clone()
        };
        let mut params = self.params[..head.offset].to_vec();
        let w = head.weight_range();
        for r in 0..head.inputs {
            params.extend(
                column_map
                    .iter()
                    .map(|&src| self.params[w.start + r * head.outputs + src]),
            );
        }
        let b = head.bias_range();
        params.extend(column_map.iter().map(|&src| self.params[b.start + src]));
        MdnModel::from_params(config, self.input_dim, self.output_dim, params)
    }
}

/// Log density of each row of `y` under its mixture, `log sum_g pi_g N(y)`.
fn row_log_likelihoods(params: &MixtureParams, y: ArrayView2<f64>) -> Vec<f64> {
    let (n, g, d) = params.means.dim();
    (0..n)
        .map(|i| {
            let terms: Vec<f64> = (0..g)
                .map(|c| {
                    let mut lp = params.weights[[i, c]].ln();
                    for j in 0..d {
                        let var = params.variances[[i, c, j]];
                        let diff = y[[i, j]] - params.means[[i, c, j]];
                        lp -= 0.5 * (LN_2PI + var.ln() + diff * diff / var);
                    }
                    lp
                })
                .collect();
            log_sum_exp(&terms)
        })
        .collect()
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Mean negative log-likelihood of shapes `y` (`n x d`).
pub fn nll(params: &MixtureParams, y: ArrayView2<f64>) -> Result<f64> {
    if y.nrows() != params.rows() || y.ncols() != params.output_dim() {
        return Err(Error::Domain(format!(
            "targets are {:?}, mixture expects {} x {}",
            y.dim(),
            params.rows(),
            params.output_dim()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite MDN target".into()));
    }
    let ll = row_log_likelihoods(params, y);
    Ok(-ll.iter().sum::<f64>() / ll.len().max(1) as f64)
}

/// Analytic gradient of the mean NLL with respect to the flat parameter
/// vector (same layout as [`MdnModel::params`]).
pub fn gradients(model: &MdnModel, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Vec<f64>> {
    model.check_inputs(x)?;
    backprop::loss_and_gradient(model, x, y).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn single(mean: f64, var: f64) -> MixtureParams {
        MixtureParams {
            weights: array![[1.0]],
            means: Array3::from_elem((1, 1, 1), mean),
            variances: Array3::from_elem((1, 1, 1), var),
        }
    }

    #[test]
    fn nll_of_standard_normal() {
        let y = array![[0.3]];
        let at_mean = nll(&single(0.3, 1.0), y.view()).unwrap();
        assert!((at_mean - 0.918_938_533_204_672_7).abs() < 1e-12);
        let shifted = nll(&single(1.3, 1.0), y.view()).unwrap();
        assert!((shifted - 1.418_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn identical_components_collapse() {
        let y = array![[0.1, -0.4]];
        let one = MixtureParams {
            weights: array![[1.0]],
            means: Array3::from_shape_vec((1, 1, 2), vec![0.5, 0.2]).unwrap(),
            variances: Array3::from_shape_vec((1, 1, 2), vec![0.3, 2.0]).unwrap(),
        };
        let two = MixtureParams {
            weights: array![[0.25, 0.75]],
            means: Array3::from_shape_vec((1, 2, 2), vec![0.5, 0.2, 0.5, 0.2]).unwrap(),
            variances: Array3::from_shape_vec((1, 2, 2), vec![0.3, 2.0, 0.3, 2.0]).unwrap(),
        };
        let a = nll(&one, y.view()).unwrap();
        let b = nll(&two, y.view()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    fn random_inputs(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn forward_invariants() {
        let cfg = MdnConfig {
            hidden_layers: 3,
            hidden_width: 16,
            components: 5,
            ..MdnConfig::default()
        };
        let model = MdnModel::new(cfg, 2, 4).unwrap();
        let mut x = random_inputs(50, 2, 1) * 10.0;
        let dup = x.row(3).to_owned();
        x.row_mut(7).assign(&dup);
        let mp = model.forward(x.view()).unwrap();
        for row in mp.weights.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&w| w > 0.0));
        }
        assert!(mp.variances.iter().all(|&v| v >= 1e-6));
        assert_eq!(mp.weights.row(7), mp.weights.row(3));
        assert_eq!(mp.means.slice(s![7, .., ..]), mp.means.slice(s![3, .., ..]));
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let model = MdnModel::new(
            MdnConfig {
                hidden_layers: 1,
                hidden_width: 4,
                components: 2,
                ..MdnConfig::default()
            },
            2,
            1,
        )
        .unwrap();
        assert!(model.forward(array![[1.0, f64::NAN]].view()).is_err());
        assert!(model.forward(array![[1.0, 2.0, 3.0]].view()).is_err());
    }

    #[test]
    fn nll_is_invariant_to_component_relabeling() {
        let cfg = MdnConfig {
            hidden_layers: 2,
            hidden_width: 8,
            components: 4,
            ..MdnConfig::default()
        };
        let model = MdnModel::new(cfg, 2, 3).unwrap();
        let permuted = model.permute_components(&[2, 0, 3, 1]).unwrap();
        let x = random_inputs(20, 2, 5);
        let y = random_inputs(20, 3, 6);
        let a = nll(&model.forward(x.view()).unwrap(), y.view()).unwrap();
        let b = nll(&permuted.forward(x.view()).unwrap(), y.view()).unwrap();
        assert!((a - b).abs() < 1e-12);
        let mp = model.forward(x.view()).unwrap();
        let pp = permuted.forward(x.view()).unwrap();
        assert_eq!(pp.means.slice(s![.., 0, ..]), mp.means.slice(s![.., 2, ..]));
    }

    #[test]
    fn from_params_checks_length() {
        let cfg = MdnConfig {
            hidden_layers: 1,
            hidden_width: 3,
            components: 2,
            ..MdnConfig::default()
        };
        let m = MdnModel::new(cfg.clone(), 2, 2).unwrap();
        // (2+1)*3 + (3+1)*(2*(1+4)) = 9 + 40
        assert_eq!(m.param_count(), 49);
        assert!(MdnModel::from_params(cfg, 2, 2, vec![0.0; 48]).is_err());
    }
}
