use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::MdnModel;
use crate::error::{Error, Result};
use crate::problem::{AxisBounds, ShapeVector};

const MAX_ATTEMPTS: usize = 20;

/// Draws `count` shapes for one property vector by ancestral sampling:
/// a component from the mixture weights, then a diagonal Gaussian draw.
///
/// Draws outside `bounds` are redrawn up to 20 times; the last draw is then
/// clamped coordinate-wise.
pub fn sample_shapes(
    model: &MdnModel,
    property: &[f64],
    count: usize,
    bounds: &[AxisBounds],
    seed: u64,
) -> Result<Vec<ShapeVector>> {
    if bounds.len() != model.output_dim() {
        return Err(Error::Domain(format!(
            "{} shape bounds for a {}-dimensional output",
            bounds.len(),
            model.output_dim()
        )));
    }
    let mix = model.forward_one(property)?;
    let g = mix.components();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut draw = vec![0.0; bounds.len()];
        for _ in 0..MAX_ATTEMPTS {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut component = g - 1;
            for c in 0..g {
                acc += mix.weights[[0, c]];
                if u < acc {
                    component = c;
                    break;
                }
            }
            for (j, v) in draw.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v = mix.means[[0, component, j]] + mix.variances[[0, component, j]].sqrt() * z;
            }
            if draw.iter().zip(bounds).all(|(&v, b)| b.contains(v)) {
                break;
            }
        }
        for (v, b) in draw.iter_mut().zip(bounds) {
            *v = b.clamp(*v);
        }
        out.push(ShapeVector::new(draw));
    }
    Ok(out)
}
