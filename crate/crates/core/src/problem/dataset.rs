use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::sampling::{feasible_design, InitSampler};
use super::{DesignProblem, PropertyVector, ShapeVector, Standardizer};
use crate::error::{Error, Result};
use crate::fmt_f64;

/// Where a design came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    InitGrid,
    InitLhs,
    /// Generated in the given (1-based) generation iteration.
    Iteration(u32),
}

impl Provenance {
    pub fn init(sampler: InitSampler) -> Self {
        match sampler {
            InitSampler::Grid => Provenance::InitGrid,
            InitSampler::Lhs => Provenance::InitLhs,
        }
    }

    pub fn iteration(&self) -> Option<u32> {
        match self {
            Provenance::Iteration(i) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::InitGrid => f.write_str("init-grid"),
            Provenance::InitLhs => f.write_str("init-lhs"),
            Provenance::Iteration(i) => write!(f, "fairgen-iter-{i}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "init-grid" => Ok(Provenance::InitGrid),
            "init-lhs" => Ok(Provenance::InitLhs),
            _ => s
                .strip_prefix("fairgen-iter-")
                .and_then(|i| i.parse::<u32>().ok())
                .filter(|&i| i >= 1)
                .map(Provenance::Iteration)
                .ok_or_else(|| format!("unknown provenance '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRecord {
    pub shape: ShapeVector,
    pub raw_properties: PropertyVector,
    pub std_properties: PropertyVector,
    pub provenance: Provenance,
    pub feasible: bool,
}

/// JSON sidecar stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub problem: String,
    pub d: usize,
    pub p: usize,
    pub seed: u64,
    pub standardizer: Standardizer,
}

/// The growing design dataset.
///
/// Infeasible records may be stored (for example from a plain grid export)
/// but never take part in coverage, training or evaluation; see
/// [`Dataset::active`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<DesignRecord>,
    standardizer: Standardizer,
    problem_id: String,
    d: usize,
    p: usize,
    seed: u64,
}

impl Dataset {
    pub fn empty(problem: &dyn DesignProblem, standardizer: Standardizer, seed: u64) -> Self {
        Self {
            records: Vec::new(),
            standardizer,
            problem_id: problem.name().to_string(),
            d: problem.shape_dim(),
            p: problem.property_dim(),
            seed,
        }
    }

    /// Evaluates `shapes`, fits the standardizer on the feasible ones and
    /// returns the dataset holding every shape (infeasible ones flagged).
    pub fn from_shapes(
        problem: &dyn DesignProblem,
        shapes: Vec<ShapeVector>,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self> {
        let evaluated = shapes
            .into_iter()
            .map(|s| {
                let raw = problem.evaluate(&s)?;
                let feasible = problem.is_feasible(&s);
                Ok((s, raw, feasible))
            })
            .collect::<Result<Vec<_>>>()?;
        let feasible_raw: Vec<PropertyVector> = evaluated
            .iter()
            .filter(|(_, _, f)| *f)
            .map(|(_, r, _)| r.clone())
            .collect();
        let standardizer = Standardizer::fit(&feasible_raw)?;
        let mut ds = Self::empty(problem, standardizer, seed);
        for (shape, raw, feasible) in evaluated {
            let std_properties = ds.standardizer.apply(&raw);
            ds.records.push(DesignRecord {
                shape,
                raw_properties: raw,
                std_properties,
                provenance,
                feasible,
            });
        }
        Ok(ds)
    }

    /// Like [`Dataset::from_shapes`] but standardizes with a given transform
    /// instead of fitting one.
    pub fn from_shapes_with(
        problem: &dyn DesignProblem,
        shapes: Vec<ShapeVector>,
        provenance: Provenance,
        standardizer: Standardizer,
        seed: u64,
    ) -> Result<Self> {
        let mut ds = Self::empty(problem, standardizer, seed);
        for shape in shapes {
            let record = ds.make_record(problem, shape, provenance)?;
            ds.records.push(record);
        }
        Ok(ds)
    }

    /// Initial dataset of exactly `n` feasible designs.
    pub fn initialize(problem: &dyn DesignProblem, sampler: InitSampler, n: usize, seed: u64) -> Result<Self> {
        let shapes = feasible_design(problem, sampler, n, seed)?;
        Self::from_shapes(problem, shapes, Provenance::init(sampler), seed)
    }

    /// Simulates a shape and standardizes it with the frozen transform.
    pub fn make_record(
        &self,
        problem: &dyn DesignProblem,
        shape: ShapeVector,
        provenance: Provenance,
    ) -> Result<DesignRecord> {
        let raw = problem.evaluate(&shape)?;
        Ok(DesignRecord {
            feasible: problem.is_feasible(&shape),
            std_properties: self.standardizer.apply(&raw),
            raw_properties: raw,
            shape,
            provenance,
        })
    }

    pub fn push(&mut self, record: DesignRecord) -> Result<()> {
        if record.shape.len() != self.d || record.raw_properties.len() != self.p {
            return Err(Error::Domain(format!(
                "record dimensions ({}, {}) do not match dataset ({}, {})",
                record.shape.len(),
                record.raw_properties.len(),
                self.d,
                self.p
            )));
        }
        self.records.push(record);
        Ok(())
    }

    /// Drops records generated by iterations after `last`.
    pub fn drop_iterations_after(&mut self, last: u32) {
        self.records
            .retain(|r| r.provenance.iteration().is_none_or(|i| i <= last));
    }

    pub fn records(&self) -> &[DesignRecord] {
        &self.records
    }

    /// Feasible records, the ones every consumer works with.
    pub fn active(&self) -> impl Iterator<Item = &DesignRecord> + '_ {
        self.records.iter().filter(|r| r.feasible)
    }

    pub fn active_len(&self) -> usize {
        self.active().count()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn problem_id(&self) -> &str {
        &self.problem_id
    }

    pub fn shape_dim(&self) -> usize {
        self.d
    }

    pub fn property_dim(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Standardized properties of the active records as 2-D points.
    pub fn property_points(&self) -> Result<Vec<[f64; 2]>> {
        if self.p != 2 {
            return Err(Error::Domain(format!(
                "coverage is defined on 2-D property spaces, dataset has p = {}",
                self.p
            )));
        }
        Ok(self
            .active()
            .map(|r| [r.std_properties[0], r.std_properties[1]])
            .collect())
    }

    /// Active standardized properties (`n x p`) and shapes (`n x d`), the
    /// inverse model's inputs and targets.
    pub fn training_matrices(&self) -> (Array2<f64>, Array2<f64>) {
        let active: Vec<&DesignRecord> = self.active().collect();
        let n = active.len();
        let x = Array2::from_shape_fn((n, self.p), |(i, j)| active[i].std_properties[j]);
        let y = Array2::from_shape_fn((n, self.d), |(i, j)| active[i].shape[j]);
        (x, y)
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            problem: self.problem_id.clone(),
            d: self.d,
            p: self.p,
            seed: self.seed,
            standardizer: self.standardizer.clone(),
        }
    }

    /// Sidecar path used for a dataset CSV (`data.csv` -> `data.json`).
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    pub fn header(d: usize, p: usize) -> Vec<String> {
        let mut h: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        h.extend((1..=p).map(|i| format!("p{i}_raw")));
        h.extend((1..=p).map(|i| format!("p{i}")));
        h.push("provenance".into());
        h.push("feasible".into());
        h
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::header(self.d, self.p))?;
        for r in &self.records {
            let mut row: Vec<String> = r.shape.iter().map(|&v| fmt_f64(v)).collect();
            row.extend(r.raw_properties.iter().map(|&v| fmt_f64(v)));
            row.extend(r.std_properties.iter().map(|&v| fmt_f64(v)));
            row.push(r.provenance.to_string());
            row.push(r.feasible.to_string());
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numeric(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes the CSV and its JSON sidecar. Both files are replaced
    /// atomically.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        crate::write_atomic(csv_path, self.to_csv_string()?.as_bytes())?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        crate::write_atomic(&Self::sidecar_path(csv_path), meta.as_bytes())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let sidecar = Self::sidecar_path(csv_path);
        let meta_text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
            path: sidecar.clone(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        let text = fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        Self::parse_csv(&text, meta, csv_path)
    }

    pub fn parse_csv(text: &str, meta: DatasetMeta, path: &Path) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let DatasetMeta {
            problem,
            d,
            p,
            seed,
            standardizer,
        } = meta;
        if standardizer.dim() != p {
            return Err(parse_err(0, "sidecar standardizer dimension differs from p".into()));
        }
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != Self::header(d, p) {
            return Err(parse_err(1, format!("unexpected header {header:?}")));
        }
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                parse_err(line, e.to_string())
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let float = |i: usize| -> Result<f64> {
                let field = row.get(i).unwrap_or("");
                field
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("column {}: bad number '{field}'", i + 1)))
            };
            let shape = (0..d).map(&float).collect::<Result<Vec<_>>>()?;
            let raw = (d..d + p).map(&float).collect::<Result<Vec<_>>>()?;
            let std = (d + p..d + 2 * p).map(&float).collect::<Result<Vec<_>>>()?;
            let provenance = row
                .get(d + 2 * p)
                .unwrap_or("")
                .parse::<Provenance>()
                .map_err(|m| parse_err(line, m))?;
            let feasible = match row.get(d + 2 * p + 1).unwrap_or("") {
                "true" => true,
                "false" => false,
                other => return Err(parse_err(line, format!("bad feasible flag '{other}'"))),
            };
            records.push(DesignRecord {
                shape: shape.into(),
                raw_properties: raw.into(),
                std_properties: std.into(),
                provenance,
                feasible,
            });
        }
        Ok(Self {
            records,
            standardizer,
            problem_id: problem,
            d,
            p,
            seed,
        })
    }
}
