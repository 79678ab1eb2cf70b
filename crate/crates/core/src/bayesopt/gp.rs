//! Zero-mean Gaussian-process regression with a squared-exponential kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Diagonal jitter added to the kernel matrix.
pub const JITTER: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GpSurrogate {
    inputs: Vec<Vec<f64>>,
    length_scale: f64,
    signal_variance: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

impl GpSurrogate {
    /// Fits the surrogate. The length scale is the median pairwise input
    /// distance and the signal variance the sample variance of `values`;
    /// both fall back to 1 when degenerate.
    pub fn fit(inputs: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        let n = inputs.len();
        if n < 2 || values.len() != n {
            return Err(Error::Numeric(format!(
                "GP fit needs >= 2 observations with matching values (got {n} inputs, {} values)",
                values.len()
            )));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != dim) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "GP inputs must share a dimension and values be finite".into(),
            ));
        }
        let mut pairwise = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairwise.push(dist2(&inputs[i], &inputs[j]).sqrt());
            }
        }
        let length_scale = match median(pairwise) {
            Some(m) if m > 0.0 && m.is_finite() => m,
            _ => 1.0,
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let signal_variance = if var > 0.0 && var.is_finite() { var } else { 1.0 };

        let mut gp = Self {
            inputs: inputs.to_vec(),
            length_scale,
            signal_variance,
            chol: Cholesky::new(DMatrix::identity(1, 1)).expect("identity is positive definite"),
            alpha: DVector::zeros(n),
        };
        let k = DMatrix::from_fn(n, n, |i, j| {
            gp.kernel(&inputs[i], &inputs[j]) + if i == j { JITTER } else { 0.0 }
        });
        gp.chol = Cholesky::new(k).ok_or_else(|| Error::Numeric("kernel matrix is not positive definite".into()))?;
        gp.alpha = gp.chol.solve(&DVector::from_column_slice(values));
        Ok(gp)
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance * (-0.5 * dist2(a, b) / (self.length_scale * self.length_scale)).exp()
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Posterior mean and variance (variance clamped at 0).
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let k_star = DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| self.kernel(xi, x)));
        let mean = k_star.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&k_star)
            .expect("Cholesky factor has a nonzero diagonal");
        let var = (self.signal_variance - v.norm_squared()).max(0.0);
        (mean, var)
    }
}

/// Closed-form expected improvement over `best` for maximization.
pub fn expected_improvement_at(mean: f64, std: f64, best: f64) -> f64 {
    let gap = mean - best;
    if std <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / std;
    let normal = Normal::standard();
    (gap * normal.cdf(z) + std * normal.pdf(z)).max(0.0)
}

pub fn expected_improvement(gp: &GpSurrogate, x: &[f64], best: f64) -> f64 {
    let (mean, var) = gp.predict(x);
    expected_improvement_at(mean, var.sqrt(), best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ei_reference_values() {
        assert_eq!(expected_improvement_at(1.0, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement_at(3.0, 0.0, 1.0), 2.0);
        assert!((expected_improvement_at(0.5, 1.0, 0.5) - 0.398_942_280_4).abs() < 1e-9);
    }

    #[test]
    fn interpolates_two_points() {
        let gp = GpSurrogate::fit(&[vec![0.0, 0.0], vec![1.0, 0.5]], &[0.3, -1.2]).unwrap();
        assert!((gp.predict(&[0.0, 0.0]).0 - 0.3).abs() < 1e-4);
        assert!((gp.predict(&[1.0, 0.5]).0 + 1.2).abs() < 1e-4);
        assert!(gp.predict(&[1.0, 0.5]).1 <= 2.0 * JITTER);
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let inputs = vec![vec![0.0], vec![1.0], vec![2.0]];
        let gp = GpSurrogate::fit(&inputs, &[1.0, 2.0, 0.5]).unwrap();
        let far = [10.0 * gp.length_scale() + 2.0];
        let (m, v) = gp.predict(&far);
        assert!(m.abs() < 1e-6);
        assert!((v - gp.signal_variance()).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs_fall_back() {
        let gp = GpSurrogate::fit(&[vec![1.0], vec![1.0]], &[2.0, 2.0]).unwrap();
        assert_eq!(gp.length_scale(), 1.0);
        assert_eq!(gp.signal_variance(), 1.0);
        assert!(GpSurrogate::fit(&[vec![1.0]], &[2.0]).is_err());
    }
}
