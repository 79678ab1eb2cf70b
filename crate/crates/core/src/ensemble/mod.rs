//! Deep-ensemble uncertainty for mixture density networks.
//!
//! `M` independently seeded MDNs are trained on the same data. Their mixture
//! components come out in arbitrary order, so components are first aligned
//! to member 0 by an optimal assignment on mean-matrix distance over the
//! training inputs. Aligned components are then collapsed into one Gaussian
//! per component by moment matching, and the summed variances give the
//! uncertainty score `S_U(x)`.

mod assignment;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::coverage::{Point, Rect};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::mdn::{self, MdnConfig, MdnModel, MixtureParams};

pub use assignment::{solve as solve_assignment, total_cost as assignment_cost};

/// Trained ensemble members sharing `(p, d, G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<MdnModel>,
}

impl Ensemble {
    pub fn from_members(members: Vec<MdnModel>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidConfig("an ensemble needs at least one member".into()))?;
        let shape = (first.input_dim(), first.output_dim(), first.components());
        if members
            .iter()
            .any(|m| (m.input_dim(), m.output_dim(), m.components()) != shape)
        {
            return Err(Error::InvalidConfig("ensemble members differ in (p, d, G)".into()));
        }
        Ok(Self { members })
    }

    /// Trains `size` members; member `m` uses seed `base_seed + m`.
    pub fn train(
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        config: &MdnConfig,
        size: usize,
        base_seed: u64,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidConfig("ensemble size must be >= 1".into()));
        }
        let members = (0..size as u64)
            .into_par_iter()
            .map(|m| {
                let cfg = MdnConfig {
                    seed: base_seed.wrapping_add(m),
                    ..config.clone()
                };
                mdn::train(x, y, &cfg).map(|out| out.model)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_members(members)
    }

    pub fn members(&self) -> &[MdnModel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn components(&self) -> usize {
        self.members[0].components()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.members[0].output_dim()
    }

    fn forward_all(&self, x: ArrayView2<f64>) -> Result<Vec<MixtureParams>> {
        self.members.iter().map(|m| m.forward(x)).collect()
    }
}

/// Per-member component alignment onto member 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    /// `maps[m][g]` is the component of member `m` aligned with component
    /// `g` of member 0. `maps[0]` is the identity.
    pub maps: Vec<Vec<usize>>,
    /// Total assignment cost per member (0 for member 0).
    pub costs: Vec<f64>,
}

impl Correspondence {
    pub fn identity(members: usize, components: usize) -> Self {
        Self {
            maps: vec![(0..components).collect(); members],
            costs: vec![0.0; members],
        }
    }

    fn check(&self, ensemble: &Ensemble) -> Result<()> {
        let g = ensemble.components();
        let ok = self.maps.len() == ensemble.len()
            && self.maps.iter().all(|map| {
                let mut seen = vec![false; g];
                map.len() == g && map.iter().all(|&c| c < g && !std::mem::replace(&mut seen[c], true))
            });
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "correspondence is not a set of bijections for this ensemble".into(),
            ))
        }
    }
}

/// Aligns every member's components with member 0's by minimizing the summed
/// mean-squared difference of their mean matrices over `x_train`.
pub fn match_components(ensemble: &Ensemble, x_train: ArrayView2<f64>) -> Result<Correspondence> {
    if x_train.nrows() == 0 {
        return Err(Error::Domain("component matching needs training inputs".into()));
    }
    let mixes = ensemble.forward_all(x_train)?;
    let g = ensemble.components();
    let reference = &mixes[0].means;
    let (n, _, d) = reference.dim();
    let scale = 1.0 / (n * d) as f64;
    let mut corr = Correspondence::identity(ensemble.len(), g);
    for (m, mix) in mixes.iter().enumerate().skip(1) {
        let cost: Vec<Vec<f64>> = (0..g)
            .map(|a| {
                (0..g)
                    .map(|b| {
                        let diff = &reference.index_axis(Axis(1), a) - &mix.means.index_axis(Axis(1), b);
                        diff.iter().map(|v| v * v).sum::<f64>() * scale
                    })
                    .collect()
            })
            .collect();
        let assign = assignment::solve(&cost);
        corr.costs[m] = assignment::total_cost(&cost, &assign);
        corr.maps[m] = assign;
    }
    Ok(corr)
}

/// One Gaussian per aligned component.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedMixture {
    /// `G x d`.
    pub means: Array2<f64>,
    /// `G x d`, nonnegative.
    pub variances: Array2<f64>,
}

impl AggregatedMixture {
    pub fn total_variance(&self) -> f64 {
        self.variances.sum()
    }
}

/// Aggregates row `row` of per-member mixture outputs, `mixes[m]` being
/// member `m`'s forward pass.
pub fn aggregate_params(mixes: &[MixtureParams], corr: &Correspondence, row: usize) -> AggregatedMixture {
    let m_count = mixes.len() as f64;
    let (_, g, d) = mixes[0].means.dim();
    let mut means = Array2::zeros((g, d));
    let mut variances = Array2::zeros((g, d));
    for c in 0..g {
        for j in 0..d {
            let mu_star = mixes
                .iter()
                .zip(&corr.maps)
                .map(|(mix, map)| mix.means[[row, map[c], j]])
                .sum::<f64>()
                / m_count;
            // M^-1 sum (var + mu^2) - mu*^2, written as mean variance plus
            // spread of the means so it cannot go negative by round-off.
            let var_star = mixes
                .iter()
                .zip(&corr.maps)
                .map(|(mix, map)| {
                    let dev = mix.means[[row, map[c], j]] - mu_star;
                    mix.variances[[row, map[c], j]] + dev * dev
                })
                .sum::<f64>()
                / m_count;
            means[[c, j]] = mu_star;
            variances[[c, j]] = var_star;
        }
    }
    AggregatedMixture { means, variances }
}

/// Aggregated mixture for every row of `x`.
pub fn aggregate_rows(
    ensemble: &Ensemble,
    corr: &Correspondence,
    x: ArrayView2<f64>,
) -> Result<Vec<AggregatedMixture>> {
    corr.check(ensemble)?;
    let mixes = ensemble.forward_all(x)?;
    Ok((0..x.nrows()).map(|i| aggregate_params(&mixes, corr, i)).collect())
}

pub fn aggregate(ensemble: &Ensemble, corr: &Correspondence, x: &[f64]) -> Result<AggregatedMixture> {
    let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(aggregate_rows(ensemble, corr, view)?.remove(0))
}

/// `S_U(x)`: aggregated variances summed over components and dimensions.
pub fn uncertainty_score(ensemble: &Ensemble, corr: &Correspondence, x: &[f64]) -> Result<f64> {
    aggregate(ensemble, corr, x).map(|a| a.total_variance())
}

/// `S_U` for each row of `x`.
pub fn uncertainty_scores(ensemble: &Ensemble, corr: &Correspondence, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    Ok(aggregate_rows(ensemble, corr, x)?
        .iter()
        .map(AggregatedMixture::total_variance)
        .collect())
}

/// Sum of `S_U` over a batch of target points.
pub fn batch_uncertainty(ensemble: &Ensemble, corr: &Correspondence, batch: &[Point]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Domain("empty target batch".into()));
    }
    let x = Array2::from_shape_fn((batch.len(), 2), |(i, j)| if j == 0 { batch[i].x } else { batch[i].y });
    Ok(uncertainty_scores(ensemble, corr, x.view())?.iter().sum())
}

/// Anything that can score the predictive uncertainty of target properties.
pub trait UncertaintySource: Sync {
    /// `S_U` summed over the batch.
    fn batch_uncertainty(&self, batch: &[Point]) -> Result<f64>;
}

/// A trained ensemble together with its component alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyModule {
    pub ensemble: Ensemble,
    pub correspondence: Correspondence,
}

impl UncertaintyModule {
    /// Trains the ensemble on `(x, y)` and aligns its components on `x`.
    pub fn build(
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        config: &MdnConfig,
        size: usize,
        base_seed: u64,
    ) -> Result<Self> {
        let ensemble = Ensemble::train(x, y, config, size, base_seed)?;
        let correspondence = match_components(&ensemble, x)?;
        Ok(Self {
            ensemble,
            correspondence,
        })
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        uncertainty_score(&self.ensemble, &self.correspondence, x)
    }

    pub fn heatmap(&self, bounds: Rect, resolution: usize) -> Result<UncertaintyField> {
        heatmap(&self.ensemble, &self.correspondence, bounds, resolution)
    }
}

impl UncertaintySource for UncertaintyModule {
    fn batch_uncertainty(&self, batch: &[Point]) -> Result<f64> {
        batch_uncertainty(&self.ensemble, &self.correspondence, batch)
    }
}

/// `S_U` sampled on a `resolution x resolution` lattice spanning a box
/// (edges included), row-major with `y` as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyField {
    pub bounds: Rect,
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl UncertaintyField {
    pub fn coordinate(&self, ix: usize, iy: usize) -> Point {
        let step = |extent: f64| extent / (self.resolution - 1) as f64;
        Point::new(
            self.bounds.x_min + ix as f64 * step(self.bounds.width()),
            self.bounds.y_min + iy as f64 * step(self.bounds.height()),
        )
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.resolution + ix]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with a `#` metadata line carrying the box and resolution.
    pub fn to_csv(&self) -> String {
        let b = self.bounds;
        let mut out = format!(
            "# box={},{},{},{} resolution={}\niy,ix,x,y,s_u\n",
            b.x_min, b.y_min, b.x_max, b.y_max, self.resolution
        );
        for iy in 0..self.resolution {
            for ix in 0..self.resolution {
                let p = self.coordinate(ix, iy);
                out.push_str(&format!(
                    "{iy},{ix},{},{},{}\n",
                    fmt_f64(p.x),
                    fmt_f64(p.y),
                    fmt_f64(self.value(ix, iy))
                ));
            }
        }
        out
    }
}

pub fn heatmap(
    ensemble: &Ensemble,
    corr: &Correspondence,
    bounds: Rect,
    resolution: usize,
) -> Result<UncertaintyField> {
    if resolution < 2 {
        return Err(Error::InvalidConfig("heatmap resolution must be >= 2 per axis".into()));
    }
    let mut field = UncertaintyField {
        bounds,
        resolution,
        values: Vec::new(),
    };
    let x = Array2::from_shape_fn((resolution * resolution, 2), |(k, j)| {
        let p = field.coordinate(k % resolution, k / resolution);
        if j == 0 {
            p.x
        } else {
            p.y
        }
    });
    field.values = uncertainty_scores(ensemble, corr, x.view())?;
    Ok(field)
}
