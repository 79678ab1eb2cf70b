use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{is_covered, CoverageConfig, Point, Rect};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::mdn::{sample_shapes, train, MdnConfig};
use crate::problem::{Dataset, DesignProblem};

/// Rejection sampling gives up below this acceptance rate.
const MIN_ACCEPTANCE: f64 = 1e-3;
/// Proposals drawn before the acceptance rate is judged.
const MIN_PROPOSALS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_test: usize,
    pub shapes_per_test: usize,
    pub mdn: MdnConfig,
    pub coverage: CoverageConfig,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_test: 50,
            shapes_per_test: 10,
            mdn: MdnConfig::default(),
            coverage: CoverageConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub label: String,
    pub n: usize,
    pub mae: f64,
}

/// Per-axis absolute error of one generated shape against its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub label: String,
    pub test_index: usize,
    pub abs_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub test_properties: Vec<[f64; 2]>,
    pub pairs: Vec<PairError>,
}

impl EvalReport {
    pub fn mae(&self, label: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.label == label).map(|r| r.mae)
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("label,n,mae\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.label, r.n, fmt_f64(r.mae)));
        }
        out
    }

    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("label,test_index,abs_err_p1,abs_err_p2\n");
        for p in &self.pairs {
            out.push_str(&format!("{},{}", p.label, p.test_index));
            for e in &p.abs_error {
                out.push(',');
                out.push_str(&fmt_f64(*e));
            }
            out.push('\n');
        }
        out
    }
}

/// Test properties drawn uniformly from the union of the datasets' covered
/// regions, in the first dataset's standardized space.
fn sample_test_properties(covered: &[Point], config: &EvalConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
    let rho = config.coverage.rho;
    let b = config.coverage.bounds;
    let (mut lo, mut hi) = (
        Point::new(f64::INFINITY, f64::INFINITY),
        Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in covered {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let proposal = Rect::new(
        (lo.x - rho).max(b.x_min),
        (lo.y - rho).max(b.y_min),
        (hi.x + rho).min(b.x_max),
        (hi.y + rho).min(b.y_max),
    );
    if !proposal.is_valid() {
        return Err(Error::Evaluation("no data inside the coverage box".into()));
    }
    let mut out = Vec::with_capacity(config.n_test);
    let mut proposals = 0usize;
    while out.len() < config.n_test {
        let q = Point::new(
            rng.random_range(proposal.x_min..proposal.x_max),
            rng.random_range(proposal.y_min..proposal.y_max),
        );
        proposals += 1;
        if is_covered(q, covered, rho, 1) {
            out.push(q);
        }
        if proposals >= MIN_PROPOSALS && (out.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(Error::Evaluation(format!(
                "covered region too small to sample: {} of {proposals} proposals accepted",
                out.len()
            )));
        }
    }
    Ok(out)
}

/// Trains one MDN per dataset and measures how closely the shapes it
/// generates for common test properties reproduce those properties.
///
/// Errors are mean absolute differences in the first dataset's standardized
/// property space, averaged over every (shape, target) pair.
pub fn evaluate_generative(
    problem: &dyn DesignProblem,
    datasets: &[(String, Dataset)],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let (_, reference) = datasets
        .first()
        .ok_or_else(|| Error::InvalidConfig("evaluation needs at least one dataset".into()))?;
    if config.n_test == 0 || config.shapes_per_test == 0 {
        return Err(Error::InvalidConfig("n_test and shapes_per_test must be >= 1".into()));
    }
    config.coverage.validate()?;
    let ref_std = reference.standardizer();
    let to_reference = |ds: &Dataset, std_props: &[f64]| ref_std.apply(&ds.standardizer().invert(std_props));

    let mut covered = Vec::new();
    for (_, ds) in datasets {
        if ds.property_dim() != 2 || ds.problem_id() != problem.name() {
            return Err(Error::InvalidConfig(format!(
                "dataset for '{}' with p = {} cannot be evaluated on '{}'",
                ds.problem_id(),
                ds.property_dim(),
                problem.name()
            )));
        }
        covered.extend(ds.active().map(|r| {
            let p = to_reference(ds, &r.std_properties);
            Point::new(p[0], p[1])
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let tests = sample_test_properties(&covered, config, &mut rng)?;

    let mdn_config = MdnConfig {
        seed: derive_seed(config.seed, 2),
        ..config.mdn.clone()
    };
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (label, ds) in datasets {
        let (x, y) = ds.training_matrices();
        let model = train(x.view(), y.view(), &mdn_config)?.model;
        let mut total = 0.0;
        let mut count = 0usize;
        for (t, target) in tests.iter().enumerate() {
            let query = ds.standardizer().apply(&ref_std.invert(&[target.x, target.y]));
            let shapes = sample_shapes(
                &model,
                &query,
                config.shapes_per_test,
                problem.shape_bounds(),
                derive_seed(config.seed, 100 + t as u64),
            )?;
            for shape in shapes {
                let got = ref_std.apply(&problem.evaluate(&shape)?);
                let abs_error = vec![(got[0] - target.x).abs(), (got[1] - target.y).abs()];
                total += abs_error.iter().sum::<f64>() / 2.0;
                count += 1;
                pairs.push(PairError {
                    label: label.clone(),
                    test_index: t,
                    abs_error,
                });
            }
        }
        let mae = total / count as f64;
        if !mae.is_finite() {
            return Err(Error::Evaluation(format!("MAE for '{label}' is not finite")));
        }
        rows.push(EvalRow {
            label: label.clone(),
            n: ds.active_len(),
            mae,
        });
    }
    Ok(EvalReport {
        rows,
        test_properties: tests.iter().map(|&p| p.into()).collect(),
        pairs,
    })
}
