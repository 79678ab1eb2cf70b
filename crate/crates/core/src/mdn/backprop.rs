use ndarray::{Array2, ArrayView2, Axis};

use super::{log_sum_exp, MdnModel, LN_2PI};
use crate::error::{Error, Result};

/// Mean NLL and its gradient with respect to every parameter.
pub(crate) fn loss_and_gradient(model: &MdnModel, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
    let n = x.nrows();
    let g = model.config.components;
    let d = model.output_dim;
    if y.nrows() != n || y.ncols() != d {
        return Err(Error::Domain(format!("targets are {:?}, expected {n} x {d}", y.dim())));
    }
    if n == 0 {
        return Err(Error::Domain("empty batch".into()));
    }
    let floor = model.config.variance_floor;
    let cache = model.forward_cached(x);
    let head = &cache.head;
    let inv_n = 1.0 / n as f64;

    let mut d_head = Array2::<f64>::zeros(head.raw_dim());
    let mut loss = 0.0;
    let mut log_comp = vec![0.0; g];
    let mut pi = vec![0.0; g];
    for i in 0..n {
        let row = head.row(i);
        let max_logit = (0..g).map(|c| row[c]).fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max_logit + (0..g).map(|c| (row[c] - max_logit).exp()).sum::<f64>().ln();
        for c in 0..g {
            let log_pi = row[c] - log_norm;
            pi[c] = log_pi.exp();
            let mut lc = log_pi;
            for j in 0..d {
                let log_var = row[g + g * d + c * d + j];
                let var = log_var.exp().max(floor);
                let diff = y[[i, j]] - row[g + c * d + j];
                lc -= 0.5 * (LN_2PI + var.ln() + diff * diff / var);
            }
            log_comp[c] = lc;
        }
        let ll = log_sum_exp(&log_comp);
        loss -= ll;
        let mut grad = d_head.row_mut(i);
        for c in 0..g {
            let resp = (log_comp[c] - ll).exp();
            grad[c] = (pi[c] - resp) * inv_n;
            for j in 0..d {
                let log_var = row[g + g * d + c * d + j];
                let raw_var = log_var.exp();
                let var = raw_var.max(floor);
                let diff = y[[i, j]] - row[g + c * d + j];
                grad[g + c * d + j] = -resp * diff / var * inv_n;
                grad[g + g * d + c * d + j] = if raw_var >= floor {
                    -resp * (0.5 * diff * diff / var - 0.5) * inv_n
                } else {
                    0.0
                };
            }
        }
    }
    loss *= inv_n;

    let mut grad = vec![0.0; model.params.len()];
    let mut upstream = d_head;
    for (l, layer) in model.layers.iter().enumerate().rev() {
        let input = &cache.activations[l];
        let dw = input.t().dot(&upstream);
        let db = upstream.sum_axis(Axis(0));
        grad[layer.weight_range()].copy_from_slice(dw.as_slice().expect("standard layout"));
        grad[layer.bias_range()].copy_from_slice(db.as_slice().expect("standard layout"));
        if l == 0 {
            break;
        }
        let mut d_input = upstream.dot(&model.weight(layer).t());
        // tanh'(z) = 1 - tanh(z)^2, with tanh(z) the cached activation.
        d_input.zip_mut_with(input, |dv, &a| *dv *= 1.0 - a * a);
        upstream = d_input;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdn::{gradients, nll, MdnConfig};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loss_matches_nll() {
        let cfg = MdnConfig {
            hidden_layers: 2,
            hidden_width: 6,
            components: 3,
            ..MdnConfig::default()
        };
        let model = MdnModel::new(cfg, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((5, 2), |_| rng.random_range(0.0..1.0));
        let (loss, _) = loss_and_gradient(&model, x.view(), y.view()).unwrap();
        let direct = nll(&model.forward(x.view()).unwrap(), y.view()).unwrap();
        assert!((loss - direct).abs() < 1e-12);
    }

    #[test]
    fn duplicated_batch_has_the_same_gradient() {
        let cfg = MdnConfig {
            hidden_layers: 2,
            hidden_width: 5,
            components: 2,
            ..MdnConfig::default()
        };
        let model = MdnModel::new(cfg, 1, 2).unwrap();
        let x = array![[0.2], [-0.7], [1.1]];
        let y = array![[0.1, 0.9], [0.5, 0.5], [0.3, 0.0]];
        let x2 = ndarray::concatenate![Axis(0), x, x];
        let y2 = ndarray::concatenate![Axis(0), y, y];
        let g1 = gradients(&model, x.view(), y.view()).unwrap();
        let g2 = gradients(&model, x2.view(), y2.view()).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-14 + 1e-12 * a.abs());
        }
    }

    #[test]
    fn mean_head_is_stationary_at_the_datum() {
        // No hidden layers, one component, zero weights: the mean is the
        // bias. With the mean at y and the variance at its optimum
        // ((y - mu)^2 = 0 makes any variance stationary in the mean), the
        // mean-head gradient vanishes.
        let cfg = MdnConfig {
            hidden_layers: 0,
            hidden_width: 0,
            components: 1,
            ..MdnConfig::default()
        };
        let mut params = vec![0.0; MdnModel::new(cfg.clone(), 1, 1).unwrap().param_count()];
        // Layout: W (1 x 3) then bias [logit, mean, log_var].
        params[4] = 0.42;
        params[5] = (0.05f64).ln();
        let model = MdnModel::from_params(cfg, 1, 1, params).unwrap();
        let g = gradients(&model, array![[0.3]].view(), array![[0.42]].view()).unwrap();
        assert!(g[1].abs() < 1e-8, "mean weight gradient {}", g[1]);
        assert!(g[4].abs() < 1e-8, "mean bias gradient {}", g[4]);
    }
}
