use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{run_iteration, IterationRecord, PhaseTimings, RunConfig};
use crate::error::{Error, Result};
use crate::problem::Dataset;
use crate::write_atomic;

pub const DATASET_FILE: &str = "dataset.csv";
pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const STATE_FILE: &str = "state.json";

/// Ordered iteration records of a run plus the config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub config: RunConfig,
    pub records: Vec<IterationRecord>,
    pub dataset_path: Option<PathBuf>,
}

impl RunLedger {
    /// One JSON object per line, one line per iteration.
    pub fn to_jsonl(&self) -> Result<String> {
        jsonl(&self.records)
    }

    /// Iteration indices run 1, 2, ... without gaps.
    pub fn is_contiguous(&self) -> bool {
        self.records
            .iter()
            .enumerate()
            .all(|(i, r)| r.iteration as usize == i + 1)
    }

    pub fn coverage_sequence(&self) -> Vec<f64> {
        let mut seq: Vec<f64> = self.records.first().map(|r| r.s_c_before).into_iter().collect();
        seq.extend(self.records.iter().map(|r| r.s_c_after));
        seq
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: RunLedger,
    pub dataset: Dataset,
    pub timings: Vec<PhaseTimings>,
    /// Iterations already complete when this call started.
    pub resumed_from: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunState {
    config: RunConfig,
    initial_len: usize,
    completed: u32,
    records: Vec<IterationRecord>,
    timings: Vec<PhaseTimings>,
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

fn same_run(a: &RunConfig, b: &RunConfig) -> bool {
    let mut a = a.clone();
    a.iterations = b.iterations;
    a == *b
}

struct Store<'a> {
    dir: &'a Path,
}

impl Store<'_> {
    fn load(&self) -> Result<Option<(RunState, Dataset)>> {
        let path = self.dir.join(STATE_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let state: RunState = serde_json::from_str(&text)?;
        let mut dataset = Dataset::load(&self.dir.join(DATASET_FILE))?;
        // The dataset is written before the state, so it may hold one
        // iteration the state never recorded.
        dataset.drop_iterations_after(state.completed);
        Ok(Some((state, dataset)))
    }

    fn save(&self, state: &RunState, dataset: &Dataset) -> Result<()> {
        dataset.save(&self.dir.join(DATASET_FILE))?;
        write_atomic(&self.dir.join(LEDGER_FILE), jsonl(&state.records)?.as_bytes())?;
        write_atomic(&self.dir.join(TIMINGS_FILE), jsonl(&state.timings)?.as_bytes())?;
        write_atomic(
            &self.dir.join(STATE_FILE),
            serde_json::to_string_pretty(state)?.as_bytes(),
        )
    }

    fn save_trace(&self, iteration: u32, csv: &str) -> Result<()> {
        write_atomic(&self.dir.join(format!("bo_trace_{iteration:03}.csv")), csv.as_bytes())
    }
}

/// Initializes a dataset per the config and runs the FairGen loop on it.
pub fn run(config: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    config.validate()?;
    let problem = config.problem()?;
    let initial = Dataset::initialize(problem.as_ref(), config.init_sampler, config.init_size, config.seed)?;
    run_from_dataset(initial, config, out_dir)
}

/// Runs `config.iterations` FairGen iterations starting from `initial`.
///
/// With an output directory the dataset, ledger and run state are persisted
/// after every iteration, and a directory that already holds a run of the same
/// config is resumed from its last completed iteration.
pub fn run_from_dataset(initial: Dataset, config: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    config.validate()?;
    let problem = config.problem()?;
    if initial.problem_id() != problem.name() {
        return Err(Error::InvalidConfig(format!(
            "dataset was built for problem '{}', config names '{}'",
            initial.problem_id(),
            problem.name()
        )));
    }
    let store = out_dir.map(|dir| Store { dir });

    let resumed = match &store {
        Some(s) => s.load()?,
        None => None,
    };
    let (mut state, mut dataset) = match resumed {
        Some((state, dataset)) => {
            if !same_run(&state.config, config) || dataset.records().get(..state.initial_len) != Some(initial.records())
            {
                return Err(Error::InvalidConfig(
                    "output directory holds a run with a different config or initial dataset".into(),
                ));
            }
            (state, dataset)
        }
        None => {
            let state = RunState {
                config: config.clone(),
                initial_len: initial.len(),
                completed: 0,
                records: Vec::new(),
                timings: Vec::new(),
            };
            if let Some(s) = &store {
                s.save(&state, &initial)?;
            }
            (state, initial)
        }
    };
    let resumed_from = state.completed;
    state.config = config.clone();
    state.records.truncate(state.completed as usize);
    state.timings.truncate(state.completed as usize);

    for i in state.completed + 1..=config.iterations as u32 {
        let outcome = run_iteration(problem.as_ref(), &dataset, config, i, config.iteration_seed(i))?;
        dataset = outcome.dataset;
        state.records.push(outcome.record);
        state.timings.push(outcome.timings);
        state.completed = i;
        if let Some(s) = &store {
            s.save_trace(i, &outcome.bo.trace_csv())?;
            s.save(&state, &dataset)?;
        }
    }

    Ok(RunOutput {
        ledger: RunLedger {
            config: config.clone(),
            records: state.records,
            dataset_path: out_dir.map(|d| d.join(DATASET_FILE)),
        },
        dataset,
        timings: state.timings,
        resumed_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::tests::tiny_config;

    #[test]
    fn resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let full_cfg = RunConfig {
            iterations: 3,
            ..tiny_config()
        };
        let full = run(&full_cfg, None).unwrap();

        let first = RunConfig {
            iterations: 1,
            ..full_cfg.clone()
        };
        run(&first, Some(dir.path())).unwrap();
        let resumed = run(&full_cfg, Some(dir.path())).unwrap();
        assert_eq!(resumed.resumed_from, 1);
        assert_eq!(resumed.ledger.records, full.ledger.records);
        assert_eq!(
            resumed.dataset.to_csv_string().unwrap(),
            full.dataset.to_csv_string().unwrap()
        );
        assert!(resumed.ledger.is_contiguous());

        let on_disk = fs::read_to_string(dir.path().join(LEDGER_FILE)).unwrap();
        assert_eq!(on_disk, full.ledger.to_jsonl().unwrap());
        assert_eq!(on_disk.lines().count(), 3);
    }

    #[test]
    fn foreign_directory_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        run(&tiny_config(), Some(dir.path())).unwrap();
        let other = RunConfig {
            seed: 99,
            ..tiny_config()
        };
        assert!(matches!(run(&other, Some(dir.path())), Err(Error::InvalidConfig(_))));
    }
}
