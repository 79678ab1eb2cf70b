use std::fmt;

use serde::{Deserialize, Serialize};

use super::{run_iteration, IterationRecord, RunConfig};
use crate::coverage::{coverage_report, coverage_score, Point};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::problem::{feasible_design, Dataset, InitSampler, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    FairGen,
    Grid,
    Lhs,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [SamplerKind::FairGen, SamplerKind::Grid, SamplerKind::Lhs];

    pub fn label(&self) -> &'static str {
        match self {
            SamplerKind::FairGen => "fairgen",
            SamplerKind::Grid => "grid",
            SamplerKind::Lhs => "lhs",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sample_count: usize,
    pub method: SamplerKind,
    pub score: f64,
}

/// Coverage-versus-sample-count curves at matched counts.
#[derive(Debug, Clone)]
pub struct CoverageCurves {
    pub points: Vec<CurvePoint>,
    /// The dataset FairGen grew, reusable by later experiments.
    pub fairgen_dataset: Dataset,
    pub records: Vec<IterationRecord>,
}

impl CoverageCurves {
    pub fn series(&self, method: SamplerKind) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.method == method)
            .map(|p| (p.sample_count, p.score))
            .collect()
    }

    pub fn final_score(&self, method: SamplerKind) -> Option<f64> {
        self.series(method).last().map(|&(_, s)| s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_count,method,score\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.sample_count, p.method, fmt_f64(p.score)));
        }
        out
    }
}

/// Grows a dataset with FairGen and scores grid and LHS designs of the same
/// sizes.
///
/// FairGen runs up to `config.iterations` iterations, stopping early once it
/// holds `budget` feasible designs. Every curve is standardized with the
/// FairGen initial dataset's transform and scored with the same coverage
/// config. Grid points are independent balanced designs of each size; LHS
/// points are prefixes of one feasible LHS stream.
pub fn compare_samplers(config: &RunConfig, budget: usize) -> Result<CoverageCurves> {
    config.validate()?;
    if budget < config.init_size {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} is below the initial dataset size {}",
            config.init_size
        )));
    }
    let problem = config.problem()?;
    let problem = problem.as_ref();
    let mut dataset = Dataset::initialize(problem, config.init_sampler, config.init_size, config.seed)?;
    let standardizer = dataset.standardizer().clone();

    let mut fairgen = vec![(dataset.active_len(), coverage_score(&dataset, &config.coverage)?)];
    let mut records = Vec::new();
    for i in 1..=config.iterations as u32 {
        if dataset.active_len() >= budget {
            break;
        }
        let out = run_iteration(problem, &dataset, config, i, config.iteration_seed(i))?;
        dataset = out.dataset;
        fairgen.push((dataset.active_len(), out.record.s_c_after));
        records.push(out.record);
    }

    let score_shapes = |shapes, provenance| -> Result<f64> {
        let ds = Dataset::from_shapes_with(problem, shapes, provenance, standardizer.clone(), config.seed)?;
        coverage_score(&ds, &config.coverage)
    };
    let max_count = fairgen.last().map_or(0, |&(n, _)| n);
    let lhs_stream = Dataset::from_shapes_with(
        problem,
        feasible_design(problem, InitSampler::Lhs, max_count, derive_seed(config.seed, 3))?,
        Provenance::InitLhs,
        standardizer.clone(),
        config.seed,
    )?;
    let lhs_points: Vec<Point> = lhs_stream.property_points()?.into_iter().map(Point::from).collect();

    let mut points = Vec::new();
    for &(n, fairgen_score) in &fairgen {
        points.push(CurvePoint {
            sample_count: n,
            method: SamplerKind::FairGen,
            score: fairgen_score,
        });
        points.push(CurvePoint {
            sample_count: n,
            method: SamplerKind::Grid,
            score: score_shapes(
                feasible_design(problem, InitSampler::Grid, n, config.seed)?,
                Provenance::InitGrid,
            )?,
        });
        points.push(CurvePoint {
            sample_count: n,
            method: SamplerKind::Lhs,
            score: coverage_report(&lhs_points[..n], &config.coverage)?.score,
        });
    }
    Ok(CoverageCurves {
        points,
        fairgen_dataset: dataset,
        records,
    })
}
