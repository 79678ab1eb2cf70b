//! Shape-space designs of experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DesignProblem, ShapeVector};
use crate::error::{Error, Result};

/// Shape-space sampler used to build an initial dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitSampler {
    Grid,
    Lhs,
}

impl InitSampler {
    pub fn label(&self) -> &'static str {
        match self {
            InitSampler::Grid => "grid",
            InitSampler::Lhs => "lhs",
        }
    }
}

impl std::str::FromStr for InitSampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(InitSampler::Grid),
            "lhs" => Ok(InitSampler::Lhs),
            other => Err(Error::InvalidConfig(format!("unknown sampler '{other}'"))),
        }
    }
}

fn level_value(index: usize, levels: usize) -> f64 {
    if levels == 1 {
        0.5
    } else {
        index as f64 / (levels - 1) as f64
    }
}

/// Full factorial over the unit cube with per-axis level counts, in
/// lexicographic order (last axis fastest).
fn factorial(levels: &[usize]) -> Vec<ShapeVector> {
    let total: usize = levels.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; levels.len()];
    for _ in 0..total {
        out.push(ShapeVector::new(
            idx.iter().zip(levels).map(|(&i, &l)| level_value(i, l)).collect(),
        ));
        for axis in (0..levels.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < levels[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    out
}

/// Equally spaced grid with `levels` points per axis over `[0, 1]^dim`.
///
/// A single level places the point at the axis midpoint.
pub fn grid_sample(levels: usize, dim: usize) -> Result<Vec<ShapeVector>> {
    if levels == 0 {
        return Err(Error::InvalidConfig("grid needs at least one level".into()));
    }
    Ok(factorial(&vec![levels; dim]))
}

/// Grid design with exactly `n` points.
///
/// Uses the smallest balanced mixed-level factorial (levels differ by at most
/// one across axes) holding at least `n` points, then keeps `n` of them at
/// evenly spaced positions in enumeration order.
pub fn grid_design(n: usize, dim: usize) -> Result<Vec<ShapeVector>> {
    if n == 0 {
        return Err(Error::InvalidConfig("grid design needs n >= 1".into()));
    }
    let mut base = (n as f64).powf(1.0 / dim as f64).floor().max(1.0) as usize;
    while base.pow(dim as u32) > n {
        base -= 1;
    }
    while (base + 1).pow(dim as u32) <= n {
        base += 1;
    }
    let mut levels = vec![base; dim];
    for axis in 0..dim {
        if levels.iter().product::<usize>() >= n {
            break;
        }
        levels[axis] += 1;
    }
    Ok(evenly_spaced(factorial(&levels), n))
}

fn evenly_spaced<T>(items: Vec<T>, n: usize) -> Vec<T> {
    let total = items.len();
    if total <= n {
        return items;
    }
    let mut keep = vec![false; total];
    for j in 0..n {
        keep[j * total / n] = true;
    }
    items
        .into_iter()
        .zip(keep)
        .filter_map(|(item, k)| k.then_some(item))
        .collect()
}

/// Latin hypercube sample of `n` points in `[0, 1]^dim`: on every axis each of
/// the `n` equal-width strata holds exactly one point.
pub fn lhs_sample(n: usize, dim: usize, seed: u64) -> Result<Vec<ShapeVector>> {
    if n == 0 {
        return Err(Error::InvalidConfig("LHS needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let column: Vec<f64> = strata
            .into_iter()
            .map(|s| (s as f64 + rng.random::<f64>()) / n as f64)
            .collect();
        columns.push(column);
    }
    Ok((0..n)
        .map(|i| ShapeVector::new(columns.iter().map(|c| c[i]).collect()))
        .collect())
}

/// Exactly `n` feasible shapes from the given sampler, scaled to the problem's
/// shape bounds.
///
/// The underlying design is grown until enough of its points pass the
/// feasibility check. Grid designs keep an evenly spaced subset of their
/// feasible points; LHS designs keep the first `n` feasible rows.
pub fn feasible_design(
    problem: &dyn DesignProblem,
    sampler: InitSampler,
    n: usize,
    seed: u64,
) -> Result<Vec<ShapeVector>> {
    if n == 0 {
        return Err(Error::InvalidConfig("design size must be >= 1".into()));
    }
    let dim = problem.shape_dim();
    let bounds = problem.shape_bounds();
    let mut size = n;
    loop {
        let unit = match sampler {
            InitSampler::Grid => grid_design(size, dim)?,
            InitSampler::Lhs => lhs_sample(size, dim, seed)?,
        };
        let feasible: Vec<ShapeVector> = unit
            .into_iter()
            .map(|u| ShapeVector::new(u.iter().zip(bounds).map(|(&v, b)| b.from_unit(v)).collect()))
            .filter(|s| problem.is_feasible(s))
            .collect();
        if feasible.len() >= n {
            return Ok(match sampler {
                InitSampler::Grid => evenly_spaced(feasible, n),
                InitSampler::Lhs => feasible.into_iter().take(n).collect(),
            });
        }
        if size > 100 * n {
            return Err(Error::DegenerateData(format!(
                "fewer than {n} feasible shapes in a {size}-point {} design",
                sampler.label()
            )));
        }
        size += n - feasible.len();
    }
}
