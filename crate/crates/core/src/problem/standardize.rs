use serde::{Deserialize, Serialize};

use super::PropertyVector;
use crate::error::{Error, Result};

/// Per-axis z-score transform of raw properties.
///
/// Fitted once on the initial dataset and then frozen, so that coverage
/// scores stay comparable across iterations and samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(Error::InvalidConfig(
                "standardizer mean/std must be non-empty and of equal length".into(),
            ));
        }
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::DegenerateData(
                "standardizer needs finite means and positive deviations".into(),
            ));
        }
        Ok(Self { mean, std })
    }

    /// Fits per-axis mean and population standard deviation.
    pub fn fit(raw: &[PropertyVector]) -> Result<Self> {
        let first = raw
            .first()
            .ok_or_else(|| Error::DegenerateData("cannot standardize an empty set".into()))?;
        let p = first.len();
        if raw.iter().any(|v| v.len() != p) {
            return Err(Error::Domain("property vectors differ in length".into()));
        }
        let n = raw.len() as f64;
        let mut mean = vec![0.0; p];
        for v in raw {
            for (m, x) in mean.iter_mut().zip(v.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for v in raw {
            for ((s, x), m) in var.iter_mut().zip(v.iter()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std: Vec<f64> = var.into_iter().map(|s| (s / n).sqrt()).collect();
        if let Some(axis) = std.iter().position(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::DegenerateData(format!(
                "property axis {} has zero variance",
                axis + 1
            )));
        }
        Self::new(mean, std)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, raw: &[f64]) -> PropertyVector {
        PropertyVector::new(
            raw.iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(x, (m, s))| (x - m) / s)
                .collect(),
        )
    }

    pub fn invert(&self, standardized: &[f64]) -> PropertyVector {
        PropertyVector::new(
            standardized
                .iter()
                .zip(self.mean.iter().zip(&self.std))
                .map(|(z, (m, s))| z * s + m)
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(v: &[f64]) -> PropertyVector {
        PropertyVector::from(v)
    }

    #[test]
    fn two_point_axis() {
        let s = Standardizer::fit(&[pv(&[0.0]), pv(&[2.0])]).unwrap();
        assert_eq!(s.mean, vec![1.0]);
        assert_eq!(s.std, vec![1.0]);
        assert_eq!(s.apply(&[2.0]).as_slice(), &[1.0]);
    }

    #[test]
    fn constant_axis_is_degenerate() {
        let err = Standardizer::fit(&[pv(&[5.0, 1.0]), pv(&[5.0, 2.0])]);
        assert!(matches!(err, Err(Error::DegenerateData(_))));
    }

    #[test]
    fn fitted_data_has_zero_mean_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw: Vec<PropertyVector> = (0..500)
            .map(|_| pv(&[rng.random::<f64>().exp(), 3.0 * rng.random::<f64>() - 7.0]))
            .collect();
        let s = Standardizer::fit(&raw).unwrap();
        let z: Vec<PropertyVector> = raw.iter().map(|v| s.apply(v)).collect();
        for axis in 0..2 {
            let mean = z.iter().map(|v| v[axis]).sum::<f64>() / 500.0;
            let var = z.iter().map(|v| (v[axis] - mean).powi(2)).sum::<f64>() / 500.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Standardizer::new(vec![1.3, -0.2], vec![0.7, 2.9]).unwrap();
        for _ in 0..1000 {
            let v = [rng.random_range(-50.0..50.0), rng.random_range(-1e3..1e3)];
            let back = s.invert(&s.apply(&v));
            for (a, b) in back.iter().zip(v) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
