use std::path::{Path, PathBuf};

use anyhow::Context;
use fairgen::coverage::{build_voronoi, coverage_report, CoverageMethod, Point};
use fairgen::pipeline::{
    compare_samplers, evaluate_generative, run, run_from_dataset, EvalConfig, SamplerKind, LEDGER_FILE,
};
use fairgen::problem::{grid_sample, lhs_sample, problem_by_name};
use fairgen::svg::{self, Marker, PointLayer, Series};
use fairgen::{
    derive_seed, write_atomic, CoverageConfig, Dataset, InitSampler, Provenance, ShapeVector, UncertaintyModule,
};

use crate::config::{self, Loaded};
use crate::{
    Command, CompareArgs, CoverageArgs, EvaluateArgs, InitArgs, RunArgs, SamplerArg, UncertaintyArgs, UsageError,
};

pub fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Init(a) => init(a),
        Command::Run(a) => run_cmd(a),
        Command::Coverage(a) => coverage(a),
        Command::Uncertainty(a) => uncertainty(a),
        Command::Compare(a) => compare(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn points(ds: &Dataset) -> anyhow::Result<Vec<Point>> {
    Ok(ds.property_points()?.into_iter().map(Point::from).collect())
}

fn init(a: InitArgs) -> anyhow::Result<()> {
    let problem = problem_by_name(&a.problem)?;
    let seed = config::resolve_seed(a.seed, &config::load(None)?)?;
    let d = problem.shape_dim();
    let n = a.n as usize;
    let (sampler, unit) = match a.sampler {
        SamplerArg::Grid => {
            let levels = ((n as f64).powf(1.0 / d as f64).round() as usize).max(1);
            (InitSampler::Grid, grid_sample(levels, d)?)
        }
        SamplerArg::Lhs => (InitSampler::Lhs, lhs_sample(n, d, seed)?),
    };
    let bounds = problem.shape_bounds();
    let shapes: Vec<ShapeVector> = unit
        .iter()
        .map(|u| ShapeVector::new(u.iter().zip(bounds).map(|(&v, b)| b.from_unit(v)).collect()))
        .collect();
    let ds = Dataset::from_shapes(problem.as_ref(), shapes, Provenance::init(sampler), seed)?;
    ds.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let report = coverage_report(&points(&ds)?, &CoverageConfig::default())?;
    println!("n = {}", ds.len());
    println!("feasible = {}", ds.active_len());
    println!("S_C = {:.7}", report.score);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn run_config(path: Option<&Path>, seed: Option<u64>) -> anyhow::Result<fairgen::pipeline::RunConfig> {
    let loaded: Loaded = config::load(path)?;
    let seed = config::resolve_seed(seed, &loaded)?;
    let mut cfg = loaded.config;
    cfg.seed = seed;
    Ok(cfg)
}

fn run_cmd(a: RunArgs) -> anyhow::Result<()> {
    let mut cfg = run_config(a.config.as_deref(), a.seed)?;
    if let Some(iters) = a.iters {
        cfg.iterations = iters;
    }
    cfg.validate()?;
    let out = match &a.data {
        Some(path) => run_from_dataset(load_dataset(path)?, &cfg, Some(&a.out_dir))?,
        None => run(&cfg, Some(&a.out_dir))?,
    };
    if out.resumed_from > 0 {
        println!("resumed after iteration {}", out.resumed_from);
    }
    println!("iter  S_C_before  S_C_after  S_U          generated  infeasible  outliers  appended");
    for r in &out.ledger.records {
        println!(
            "{:>4}  {:>10.5}  {:>9.5}  {:>11.4e}  {:>9}  {:>10}  {:>8}  {:>8}",
            r.iteration, r.s_c_before, r.s_c_after, r.s_u, r.generated, r.infeasible, r.outliers, r.appended
        );
    }
    for r in &out.ledger.records {
        let mut existing = Vec::new();
        let mut generated = Vec::new();
        for rec in out.dataset.active() {
            let p = Point::new(rec.std_properties[0], rec.std_properties[1]);
            match rec.provenance.iteration() {
                Some(i) if i == r.iteration => generated.push(p),
                Some(i) if i > r.iteration => {}
                _ => existing.push(p),
            }
        }
        let all: Vec<Point> = existing.iter().chain(&generated).copied().collect();
        let diagram = build_voronoi(&all, cfg.coverage.bounds)?;
        let layers = [
            PointLayer {
                label: "existing".into(),
                points: existing,
                marker: Marker::Dot,
                color: "#444444",
            },
            PointLayer {
                label: "generated".into(),
                points: generated,
                marker: Marker::Ring,
                color: "#1f77b4",
            },
            PointLayer {
                label: "targets".into(),
                points: r.targets.iter().map(|&t| Point::from(t)).collect(),
                marker: Marker::Cross,
                color: "#d62728",
            },
        ];
        let title = format!(
            "Iteration {}: S_C {:.3} -> {:.3}",
            r.iteration, r.s_c_before, r.s_c_after
        );
        write(
            &a.out_dir.join(format!("coverage_iter_{:03}.svg", r.iteration)),
            &svg::coverage_map(&diagram, cfg.coverage.rho, &layers, &title),
        )?;
    }
    println!("ledger: {}", a.out_dir.join(LEDGER_FILE).display());
    Ok(())
}

fn coverage(a: CoverageArgs) -> anyhow::Result<()> {
    let mut cov = config::load(a.config.as_deref())?.config.coverage;
    if let Some(rho) = a.rho {
        cov.rho = rho;
    }
    if let Some(k) = a.k {
        cov.k = k;
    }
    cov.validate()?;
    let ds = load_dataset(&a.data)?;
    let pts = points(&ds)?;
    if pts.is_empty() {
        anyhow::bail!("dataset {} has no feasible records", a.data.display());
    }
    let report = coverage_report(&pts, &cov)?;
    println!("n = {}", pts.len());
    println!("S_C = {:.7}", report.score);
    println!("method = {}", report.method.label());
    if let Some(path) = &a.svg {
        let layer = PointLayer {
            label: "data".into(),
            points: pts.clone(),
            marker: Marker::Dot,
            color: "#444444",
        };
        let title = format!("S_C = {:.4} (rho {}, k {})", report.score, cov.rho, cov.k);
        let text = if report.method == CoverageMethod::Exact {
            svg::coverage_map(&build_voronoi(&pts, cov.bounds)?, cov.rho, &[layer], &title)
        } else {
            svg::raster_coverage_map(&pts, &cov, &[layer], &title)
        };
        write(path, &text)?;
    }
    Ok(())
}

fn uncertainty(a: UncertaintyArgs) -> anyhow::Result<()> {
    if a.resolution < 2 {
        return Err(UsageError(format!("--resolution must be >= 2, got {}", a.resolution)).into());
    }
    let cfg = run_config(a.config.as_deref(), a.seed)?;
    cfg.validate()?;
    let ds = load_dataset(&a.data)?;
    let (x, y) = ds.training_matrices();
    let module = UncertaintyModule::build(
        x.view(),
        y.view(),
        &cfg.mdn,
        cfg.ensemble_size,
        derive_seed(cfg.seed, 1),
    )?;
    let field = module.heatmap(cfg.coverage.bounds, a.resolution)?;
    println!("resolution = {}", field.resolution);
    println!("S_U min = {:.6e}", field.min());
    println!("S_U max = {:.6e}", field.max());
    if let Some(path) = &a.csv {
        write(path, &field.to_csv())?;
    }
    if let Some(path) = &a.svg {
        write(path, &svg::heatmap(&field, "Predictive uncertainty S_U"))?;
    }
    Ok(())
}

fn compare(a: CompareArgs) -> anyhow::Result<()> {
    let cfg = run_config(a.config.as_deref(), a.seed)?;
    let curves = compare_samplers(&cfg, a.budget)?;
    write(&a.out_dir.join("curves.csv"), &curves.to_csv())?;
    let series: Vec<Series> = SamplerKind::ALL
        .iter()
        .map(|&k| Series {
            label: k.label().to_string(),
            points: curves.series(k).into_iter().map(|(n, s)| (n as f64, s)).collect(),
        })
        .collect();
    write(
        &a.out_dir.join("curves.svg"),
        &svg::line_plot(&series, "Coverage versus sample count", "samples", "coverage score S_C"),
    )?;
    println!("method   samples  S_C");
    for k in SamplerKind::ALL {
        if let Some(&(n, s)) = curves.series(k).last() {
            println!("{:<8} {:>7}  {:.5}", k.label(), n, s);
        }
    }
    println!("curves: {}", a.out_dir.join("curves.csv").display());
    Ok(())
}

fn parse_data_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| arg.to_string());
            (label, path)
        }
    }
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let cfg = run_config(a.config.as_deref(), a.seed)?;
    let mut datasets = Vec::new();
    for arg in &a.data {
        let (label, path) = parse_data_arg(arg);
        datasets.push((label, load_dataset(&path)?));
    }
    let problem = problem_by_name(datasets[0].1.problem_id())?;
    let eval = EvalConfig {
        n_test: a.n_test,
        shapes_per_test: a.shapes_per_test,
        mdn: cfg.mdn.clone(),
        coverage: cfg.coverage,
        seed: cfg.seed,
    };
    let report = evaluate_generative(problem.as_ref(), &datasets, &eval)?;
    println!("label                n      MAE");
    for r in &report.rows {
        println!("{:<16} {:>5}  {:.4}", r.label, r.n, r.mae);
    }
    if let Some(path) = &a.csv {
        write(path, &report.table_csv())?;
    }
    if let Some(path) = &a.svg {
        let series: Vec<Series> = report
            .rows
            .iter()
            .map(|row| Series {
                label: row.label.clone(),
                points: report
                    .pairs
                    .iter()
                    .filter(|p| p.label == row.label)
                    .map(|p| (p.abs_error[0], p.abs_error[1]))
                    .collect(),
            })
            .collect();
        write(
            path,
            &svg::scatter(
                &series,
                "Absolute prediction errors",
                "|error| property 1",
                "|error| property 2",
            ),
        )?;
    }
    Ok(())
}
