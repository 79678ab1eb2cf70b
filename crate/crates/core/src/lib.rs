//! Coverage- and uncertainty-aware adaptive data generation.
//!
//! The crate grows a design dataset so that its standardized property space
//! is covered evenly. Each iteration scores coverage with a Voronoi-based
//! covered-area computation, estimates inverse-model uncertainty with an
//! ensemble of mixture density networks, picks target properties with
//! Bayesian optimization and generates new shapes for them.

pub mod bayesopt;
pub mod coverage;
pub mod ensemble;
pub mod error;
pub mod mdn;
pub mod pipeline;
pub mod problem;
pub mod svg;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use bayesopt::{BoConfig, TargetBatch};
pub use coverage::{CoverageConfig, CoverageMethod, CoverageReport, Point, Rect, VoronoiDiagram};
pub use ensemble::{Correspondence, Ensemble, UncertaintyModule, UncertaintySource};
pub use error::{Error, Result};
pub use mdn::{MdnConfig, MdnModel, MixtureParams};

pub use problem::{
    AxisBounds, Dataset, DesignProblem, DesignRecord, InitSampler, PropertyVector, Provenance, ShapeVector,
    Standardizer, SyntheticProblem,
};

/// Formats a float with 17 significant digits, enough to round-trip any
/// `f64` bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
