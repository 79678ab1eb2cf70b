//! Bayesian optimization of the target-property batch.
//!
//! A batch of `n_p` 2-D property points is flattened to a `2 n_p` vector and
//! scored by `f = S_C(D ∪ batch) - psi * S_U(batch)`. The loop evaluates a
//! Latin hypercube of initial batches, runs expected-improvement rounds on a
//! GP surrogate, appends a few uniform random batches and returns the best
//! batch seen.

mod gp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gp::{expected_improvement, expected_improvement_at, GpSurrogate, JITTER};

use crate::coverage::{coverage_report, CoverageConfig, Point, Rect};
use crate::ensemble::UncertaintySource;
use crate::error::{Error, Result};
use crate::problem::{lhs_sample, Dataset};
use crate::{derive_seed, fmt_f64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoConfig {
    /// Target points per batch.
    pub n_p: usize,
    /// Expected-improvement rounds.
    pub iterations: usize,
    /// Uniform random batches evaluated after the EI rounds.
    pub random_walks: usize,
    /// Latin hypercube batches evaluated before the first EI round.
    pub init_batches: usize,
    /// Uncertainty penalty.
    pub psi: f64,
    /// Random candidates scored per EI round before local refinement.
    pub candidates: usize,
    /// Per-point search box; defaults to the coverage box shrunk by `rho`.
    pub search_bounds: Option<Rect>,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_p: 3,
            iterations: 50,
            random_walks: 10,
            init_batches: 10,
            psi: 0.1,
            candidates: 1000,
            search_bounds: None,
            seed: 0,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_p == 0 || self.init_batches == 0 || self.candidates == 0 {
            return Err(Error::InvalidConfig(
                "n_p, init_batches and candidates must all be >= 1".into(),
            ));
        }
        if self.init_batches + self.iterations + self.random_walks < 2 {
            return Err(Error::InvalidConfig("BO needs at least 2 evaluations".into()));
        }
        if !(self.psi >= 0.0 && self.psi.is_finite()) {
            return Err(Error::InvalidConfig(format!("psi must be >= 0, got {}", self.psi)));
        }
        if let Some(b) = self.search_bounds {
            if !b.is_valid() {
                return Err(Error::InvalidConfig(format!(
                    "search bounds must have positive area: {b:?}"
                )));
            }
        }
        Ok(())
    }

    /// The box every target point is drawn from.
    pub fn bounds(&self, coverage: &CoverageConfig) -> Result<Rect> {
        let b = self
            .search_bounds
            .unwrap_or_else(|| coverage.bounds.inset(coverage.rho));
        if !b.is_valid() {
            return Err(Error::InvalidConfig(format!("search box is empty: {b:?}")));
        }
        if !(coverage.bounds.contains(Point::new(b.x_min, b.y_min))
            && coverage.bounds.contains(Point::new(b.x_max, b.y_max)))
        {
            return Err(Error::InvalidConfig(
                "search box must lie inside the coverage box".into(),
            ));
        }
        Ok(b)
    }
}

/// `n_p` target points in standardized property space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBatch {
    pub points: Vec<Point>,
}

impl TargetBatch {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self {
            points: flat.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    /// Coverage score of the dataset with the batch added.
    pub s_c: f64,
    /// Summed uncertainty of the batch.
    pub s_u: f64,
    pub f: f64,
}

/// The batch objective with the dataset's property points cached.
pub struct Objective<'a> {
    base: Vec<Point>,
    coverage: CoverageConfig,
    source: &'a dyn UncertaintySource,
    psi: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        dataset: &Dataset,
        source: &'a dyn UncertaintySource,
        coverage: &CoverageConfig,
        psi: f64,
    ) -> Result<Self> {
        coverage.validate()?;
        let base = dataset.property_points()?.into_iter().map(Point::from).collect();
        Ok(Self {
            base,
            coverage: *coverage,
            source,
            psi,
        })
    }

    pub fn evaluate(&self, batch: &TargetBatch) -> Result<ObjectiveValue> {
        if batch.is_empty() {
            return Err(Error::Domain("empty target batch".into()));
        }
        if let Some(p) = batch.points.iter().find(|p| !self.coverage.bounds.contains(**p)) {
            return Err(Error::Domain(format!("target {p:?} lies outside the coverage box")));
        }
        let mut points = self.base.clone();
        points.extend_from_slice(&batch.points);
        let s_c = coverage_report(&points, &self.coverage)?.score;
        let s_u = self.source.batch_uncertainty(&batch.points)?;
        Ok(ObjectiveValue {
            s_c,
            s_u,
            f: s_c - self.psi * s_u,
        })
    }
}

/// `S_C(D ∪ batch) - psi * S_U(batch)`.
pub fn objective(
    dataset: &Dataset,
    batch: &TargetBatch,
    source: &dyn UncertaintySource,
    coverage: &CoverageConfig,
    psi: f64,
) -> Result<ObjectiveValue> {
    Objective::new(dataset, source, coverage, psi)?.evaluate(batch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Ei,
    Random,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Ei => "ei",
            Phase::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: usize,
    pub phase: Phase,
    pub batch: TargetBatch,
    pub value: ObjectiveValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoOutcome {
    pub best: TargetBatch,
    pub best_value: ObjectiveValue,
    pub trace: Vec<TraceEntry>,
}

impl BoOutcome {
    /// Best objective value among the evaluations of one phase.
    pub fn best_in_phase(&self, phase: Phase) -> Option<f64> {
        self.trace
            .iter()
            .filter(|e| e.phase == phase)
            .map(|e| e.value.f)
            .max_by(f64::total_cmp)
    }

    /// Running maximum of `f` over the trace.
    pub fn running_best(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::NEG_INFINITY, |best, e| {
                *best = best.max(e.value.f);
                Some(*best)
            })
            .collect()
    }

    pub fn trace_csv(&self) -> String {
        let n_p = self.best.len();
        let mut out = String::from("index,phase");
        for i in 0..n_p {
            out.push_str(&format!(",t{i}_x,t{i}_y"));
        }
        out.push_str(",s_c,s_u,f\n");
        for e in &self.trace {
            out.push_str(&format!("{},{}", e.index, e.phase.label()));
            for v in e.batch.flatten() {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
            out.push_str(&format!(
                ",{},{},{}\n",
                fmt_f64(e.value.s_c),
                fmt_f64(e.value.s_u),
                fmt_f64(e.value.f)
            ));
        }
        out
    }
}

struct SearchSpace {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SearchSpace {
    fn new(bounds: Rect, n_p: usize) -> Self {
        let lo = (0..n_p).flat_map(|_| [bounds.x_min, bounds.y_min]).collect();
        let hi = (0..n_p).flat_map(|_| [bounds.x_max, bounds.y_max]).collect();
        Self { lo, hi }
    }

    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn scale_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(j, &v)| self.lo[j] + v * (self.hi[j] - self.lo[j]))
            .collect()
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
        self.scale_unit(&u)
    }
}

/// Maximizes EI: best of `candidates` uniform draws, then coordinate descent
/// with a shrinking step.
fn maximize_ei(gp: &GpSurrogate, best: f64, space: &SearchSpace, candidates: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = space.uniform(rng);
    let mut ei = expected_improvement(gp, &x, best);
    for _ in 1..candidates {
        let c = space.uniform(rng);
        let e = expected_improvement(gp, &c, best);
        if e > ei {
            x = c;
            ei = e;
        }
    }
    let mut frac = 0.05;
    while frac > 1e-4 {
        let mut improved = false;
        for j in 0..space.dim() {
            let step = frac * (space.hi[j] - space.lo[j]);
            for dir in [1.0, -1.0] {
                let mut c = x.clone();
                c[j] = (c[j] + dir * step).clamp(space.lo[j], space.hi[j]);
                let e = expected_improvement(gp, &c, best);
                if e > ei {
                    x = c;
                    ei = e;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            frac *= 0.5;
        }
    }
    x
}

/// Finds the target batch maximizing the objective. Deterministic for a fixed
/// `config.seed`.
pub fn optimize_targets(
    dataset: &Dataset,
    source: &dyn UncertaintySource,
    config: &BoConfig,
    coverage: &CoverageConfig,
) -> Result<BoOutcome> {
    config.validate()?;
    let bounds = config.bounds(coverage)?;
    let objective = Objective::new(dataset, source, coverage, config.psi)?;
    let space = SearchSpace::new(bounds, config.n_p);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2));

    let mut trace: Vec<TraceEntry> = Vec::new();
    let record = |trace: &mut Vec<TraceEntry>, phase: Phase, flat: Vec<f64>| -> Result<()> {
        let batch = TargetBatch::from_flat(&flat);
        let value = objective.evaluate(&batch)?;
        trace.push(TraceEntry {
            index: trace.len(),
            phase,
            batch,
            value,
        });
        Ok(())
    };

    for u in lhs_sample(config.init_batches, space.dim(), derive_seed(config.seed, 1))? {
        record(&mut trace, Phase::Init, space.scale_unit(&u))?;
    }
    for _ in 0..config.iterations {
        let inputs: Vec<Vec<f64>> = trace.iter().map(|e| e.batch.flatten()).collect();
        let raw: Vec<f64> = trace.iter().map(|e| e.value.f).collect();
        let next = if raw.len() < 2 {
            space.uniform(&mut rng)
        } else {
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            let sd = (raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (raw.len() - 1) as f64).sqrt();
            let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
            let values: Vec<f64> = raw.iter().map(|v| (v - mean) / sd).collect();
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let gp = GpSurrogate::fit(&inputs, &values)?;
            maximize_ei(&gp, best, &space, config.candidates, &mut rng)
        };
        record(&mut trace, Phase::Ei, next)?;
    }
    for _ in 0..config.random_walks {
        let flat = space.uniform(&mut rng);
        record(&mut trace, Phase::Random, flat)?;
    }

    let best = trace
        .iter()
        .fold(&trace[0], |acc, e| if e.value.f > acc.value.f { e } else { acc });
    Ok(BoOutcome {
        best: best.batch.clone(),
        best_value: best.value,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{InitSampler, SyntheticProblem};

    struct Flat(f64);

    impl UncertaintySource for Flat {
        fn batch_uncertainty(&self, batch: &[Point]) -> Result<f64> {
            Ok(self.0 * batch.len() as f64)
        }
    }

    fn small_dataset() -> Dataset {
        Dataset::initialize(&SyntheticProblem::new(), InitSampler::Lhs, 30, 4).unwrap()
    }

    #[test]
    fn psi_zero_is_pure_coverage() {
        let ds = small_dataset();
        let batch = TargetBatch::new(vec![Point::new(3.0, 3.0), Point::new(-1.5, 3.5)]);
        let cov = CoverageConfig::default();
        let v = objective(&ds, &batch, &Flat(7.0), &cov, 0.0).unwrap();
        let mut pts: Vec<Point> = ds.property_points().unwrap().into_iter().map(Point::from).collect();
        pts.extend_from_slice(&batch.points);
        assert_eq!(v.f, coverage_report(&pts, &cov).unwrap().score);
        assert_eq!(v.s_u, 14.0);
    }

    #[test]
    fn objective_is_order_free() {
        let ds = small_dataset();
        let cov = CoverageConfig::default();
        let a = TargetBatch::new(vec![Point::new(3.0, 3.0), Point::new(0.1, 0.2), Point::new(-1.0, 1.0)]);
        let mut rev = a.clone();
        rev.points.reverse();
        let fa = objective(&ds, &a, &Flat(0.5), &cov, 0.1).unwrap();
        let fb = objective(&ds, &rev, &Flat(0.5), &cov, 0.1).unwrap();
        assert!((fa.f - fb.f).abs() < 1e-12);
    }

    #[test]
    fn batch_outside_box_is_rejected() {
        let ds = small_dataset();
        let batch = TargetBatch::new(vec![Point::new(5.0, 0.0)]);
        assert!(objective(&ds, &batch, &Flat(0.0), &CoverageConfig::default(), 0.1).is_err());
    }

    #[test]
    fn optimizer_contract() {
        let ds = small_dataset();
        let cov = CoverageConfig::default();
        let cfg = BoConfig {
            iterations: 8,
            random_walks: 3,
            candidates: 200,
            seed: 9,
            ..BoConfig::default()
        };
        let out = optimize_targets(&ds, &Flat(0.0), &cfg, &cov).unwrap();
        assert_eq!(out.trace.len(), 21);
        assert!(out.best_value.f >= out.best_in_phase(Phase::Init).unwrap());
        let bounds = cfg.bounds(&cov).unwrap();
        assert!(out.best.points.iter().all(|p| bounds.contains(*p)));
        let running = out.running_best();
        assert!(running.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*running.last().unwrap(), out.best_value.f);
        let again = optimize_targets(&ds, &Flat(0.0), &cfg, &cov).unwrap();
        assert_eq!(out, again);
        assert_eq!(out.trace_csv().lines().count(), 22);
    }

    #[test]
    fn flat_roundtrip() {
        let b = TargetBatch::new(vec![Point::new(1.0, 2.0), Point::new(3.0, 4.0)]);
        assert_eq!(TargetBatch::from_flat(&b.flatten()), b);
    }
}
