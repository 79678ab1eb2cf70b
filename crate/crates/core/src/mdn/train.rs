use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backprop::loss_and_gradient;
use super::{nll, MdnConfig, MdnModel};
use crate::derive_seed;
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MdnModel,
    /// Training NLL before each step, followed by the final NLL
    /// (`epochs + 1` entries).
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history is never empty")
    }
}

struct Adam {
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(lr: f64, len: usize) -> Self {
        Self {
            lr,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
        }
    }
}

/// Trains an MDN mapping rows of `x` (properties) to rows of `y` (shapes)
/// with full-batch Adam for `config.epochs` steps.
///
/// The seed drives both weight initialization and the order in which rows
/// are presented. Needs at least `2 G` rows.
pub fn train(x: ArrayView2<f64>, y: ArrayView2<f64>, config: &MdnConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Training(format!("{n} inputs but {} targets", y.nrows())));
    }
    if n < 2 * config.components {
        return Err(Error::Training(format!(
            "{n} training rows is below the minimum of {} for {} components",
            2 * config.components,
            config.components
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite training data".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1)));
    let xs = Array2::from_shape_fn((n, x.ncols()), |(i, j)| x[[order[i], j]]);
    let ys = Array2::from_shape_fn((n, y.ncols()), |(i, j)| y[[order[i], j]]);

    let mut model = MdnModel::new(config.clone(), x.ncols(), y.ncols())?;
    let mut adam = Adam::new(config.learning_rate, model.param_count());
    let mut loss_history = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..config.epochs {
        let (loss, grad) = loss_and_gradient(&model, xs.view(), ys.view())?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training(format!("loss diverged at epoch {epoch}")));
        }
        loss_history.push(loss);
        adam.update(model.params_mut(), &grad);
    }
    let final_loss = nll(&model.forward(xs.view())?, ys.view())?;
    if !final_loss.is_finite() {
        return Err(Error::Training("final loss is not finite".into()));
    }
    loss_history.push(final_loss);
    Ok(TrainOutcome { model, loss_history })
}
