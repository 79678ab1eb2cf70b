//! The FairGen loop and the experiments built on it.
//!
//! One iteration trains an MDN ensemble on the current dataset, picks a
//! batch of target properties by Bayesian optimization, samples candidate
//! shapes for every target from every member, filters and simulates them and
//! appends the survivors.

mod compare;
mod evaluate;
mod run;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compare::{compare_samplers, CoverageCurves, CurvePoint, SamplerKind};
pub use evaluate::{evaluate_generative, EvalConfig, EvalReport, EvalRow, PairError};
pub use run::{run, run_from_dataset, RunLedger, RunOutput, DATASET_FILE, LEDGER_FILE, STATE_FILE, TIMINGS_FILE};

use crate::bayesopt::{optimize_targets, BoConfig, BoOutcome, TargetBatch};
use crate::coverage::{coverage_score, CoverageConfig, Point};
use crate::derive_seed;
use crate::ensemble::UncertaintyModule;
use crate::error::{Error, Result};
use crate::mdn::{sample_shapes, MdnConfig};
use crate::problem::{problem_by_name, Dataset, DesignProblem, InitSampler, Provenance, ShapeVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: String,
    pub init_sampler: InitSampler,
    pub init_size: usize,
    pub iterations: usize,
    pub ensemble_size: usize,
    pub samples_per_target_per_model: usize,
    pub seed: u64,
    pub mdn: MdnConfig,
    pub bo: BoConfig,
    pub coverage: CoverageConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "synthetic".into(),
            init_sampler: InitSampler::Grid,
            init_size: 1000,
            iterations: 20,
            ensemble_size: 5,
            samples_per_target_per_model: 3,
            seed: 0,
            mdn: MdnConfig::default(),
            bo: BoConfig::default(),
            coverage: CoverageConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.init_size == 0 || self.ensemble_size == 0 || self.samples_per_target_per_model == 0 {
            return Err(Error::InvalidConfig(
                "init_size, ensemble_size and samples_per_target_per_model must be >= 1".into(),
            ));
        }
        problem_by_name(&self.problem)?;
        self.mdn.validate()?;
        self.bo.validate()?;
        self.coverage.validate()?;
        self.bo.bounds(&self.coverage)?;
        Ok(())
    }

    pub fn problem(&self) -> Result<Box<dyn DesignProblem>> {
        problem_by_name(&self.problem)
    }

    /// Candidates generated per iteration before any filtering.
    pub fn candidates_per_iteration(&self) -> usize {
        self.bo.n_p * self.samples_per_target_per_model * self.ensemble_size
    }

    /// Seed of iteration `i` (1-based).
    pub fn iteration_seed(&self, i: u32) -> u64 {
        self.seed ^ u64::from(i)
    }
}

/// What one FairGen iteration did. Wall-clock timings are kept apart in
/// [`PhaseTimings`] so records stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub seed: u64,
    pub s_c_before: f64,
    pub s_c_after: f64,
    pub targets: Vec<[f64; 2]>,
    pub s_u: f64,
    pub objective: f64,
    pub generated: usize,
    pub infeasible: usize,
    pub outliers: usize,
    pub appended: usize,
}

impl IterationRecord {
    /// `generated = appended + infeasible + outliers`.
    pub fn accounting_holds(&self) -> bool {
        self.generated == self.appended + self.infeasible + self.outliers
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub iteration: u32,
    pub train_s: f64,
    pub optimize_s: f64,
    pub generate_s: f64,
    pub simulate_s: f64,
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub dataset: Dataset,
    pub record: IterationRecord,
    pub timings: PhaseTimings,
    pub bo: BoOutcome,
}

/// Runs iteration `iteration` on `dataset`. The input dataset is untouched;
/// on error nothing is appended anywhere.
pub fn run_iteration(
    problem: &dyn DesignProblem,
    dataset: &Dataset,
    config: &RunConfig,
    iteration: u32,
    seed: u64,
) -> Result<IterationOutcome> {
    if dataset.active_len() == 0 {
        return Err(Error::Domain("dataset has no feasible records".into()));
    }
    let s_c_before = coverage_score(dataset, &config.coverage)?;

    let clock = Instant::now();
    let (x, y) = dataset.training_matrices();
    let module = UncertaintyModule::build(
        x.view(),
        y.view(),
        &config.mdn,
        config.ensemble_size,
        derive_seed(seed, 1),
    )?;
    let train_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let bo_config = BoConfig {
        seed: derive_seed(seed, 2),
        ..config.bo.clone()
    };
    let bo = optimize_targets(dataset, &module, &bo_config, &config.coverage)?;
    let optimize_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let candidates = generate_candidates(problem, &module, &bo.best, config, seed)?;
    let generate_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let generated = candidates.len();
    let feasible: Vec<ShapeVector> = candidates.into_iter().filter(|s| problem.is_feasible(s)).collect();
    let infeasible = generated - feasible.len();
    let provenance = Provenance::Iteration(iteration);
    let records = feasible
        .into_par_iter()
        .map(|s| dataset.make_record(problem, s, provenance))
        .collect::<Result<Vec<_>>>()?;
    let simulate_s = clock.elapsed().as_secs_f64();

    let mut next = dataset.clone();
    let mut outliers = 0;
    for r in records {
        let p = Point::new(r.std_properties[0], r.std_properties[1]);
        if config.coverage.bounds.contains(p) {
            next.push(r)?;
        } else {
            outliers += 1;
        }
    }
    let appended = generated - infeasible - outliers;
    let s_c_after = coverage_score(&next, &config.coverage)?;

    Ok(IterationOutcome {
        record: IterationRecord {
            iteration,
            seed,
            s_c_before,
            s_c_after,
            targets: bo.best.points.iter().map(|&p| p.into()).collect(),
            s_u: bo.best_value.s_u,
            objective: bo.best_value.f,
            generated,
            infeasible,
            outliers,
            appended,
        },
        timings: PhaseTimings {
            iteration,
            train_s,
            optimize_s,
            generate_s,
            simulate_s,
        },
        dataset: next,
        bo,
    })
}

/// Shapes sampled for every (target, member) pair, target-major.
fn generate_candidates(
    problem: &dyn DesignProblem,
    module: &UncertaintyModule,
    targets: &TargetBatch,
    config: &RunConfig,
    seed: u64,
) -> Result<Vec<ShapeVector>> {
    let members = module.ensemble.members();
    let mut out = Vec::with_capacity(config.candidates_per_iteration());
    for (t, target) in targets.points.iter().enumerate() {
        for (m, model) in members.iter().enumerate() {
            let stream = 1000 + (t * members.len() + m) as u64;
            out.extend(sample_shapes(
                model,
                &[target.x, target.y],
                config.samples_per_target_per_model,
                problem.shape_bounds(),
                derive_seed(seed, stream),
            )?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SyntheticProblem;

    pub(crate) fn tiny_config() -> RunConfig {
        RunConfig {
            init_sampler: InitSampler::Lhs,
            init_size: 60,
            iterations: 2,
            ensemble_size: 2,
            mdn: MdnConfig {
                hidden_layers: 2,
                hidden_width: 8,
                components: 3,
                epochs: 30,
                ..MdnConfig::default()
            },
            bo: BoConfig {
                iterations: 3,
                random_walks: 2,
                init_batches: 3,
                candidates: 50,
                ..BoConfig::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig {
            iterations: 0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(RunConfig::default().candidates_per_iteration(), 45);
    }

    #[test]
    fn iteration_accounting() {
        let problem = SyntheticProblem::new();
        let cfg = tiny_config();
        let ds = Dataset::initialize(&problem, cfg.init_sampler, cfg.init_size, 1).unwrap();
        let out = run_iteration(&problem, &ds, &cfg, 1, 5).unwrap();
        let r = &out.record;
        assert_eq!(r.generated, cfg.candidates_per_iteration());
        assert!(r.accounting_holds());
        assert!(r.s_c_after >= r.s_c_before);
        assert_eq!(out.dataset.len(), ds.len() + r.appended);
        assert!(out.dataset.records()[ds.len()..]
            .iter()
            .all(|rec| rec.provenance == Provenance::Iteration(1)));
    }
}
