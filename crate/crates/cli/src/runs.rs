//! Subcommand implementations: each loads the validated config, drives
//! the library, writes hashed artifacts plus a manifest, and reports a
//! pass/fail outcome (exit 2) separate from hard errors (exit 1).

use std::path::{Path, PathBuf};
use std::time::Instant;

use idos_core::dos::animals::cluster_atom_oracle;
use idos_core::dos::{
    self, abstract_dos, boundary_independence, default_lambda_grid, dichotomy_check,
    empirical_ids, ids_jump_compare, laplace_route_check, self_averaging_report,
    spectrum_constancy_report, trace_formula_check, uniform_grid, DosParams, IdsParams, IdsRun,
};
use idos_core::delone::{
    fibonacci_chain, perturbed_lattice, point_density, validate_delone, voronoi_adjacency,
    DeloneSet,
};
use idos_core::lattice::{FolnerSequence, LatticeBox};
use idos_core::operators::{
    delone_operator, DeloneSiteMode, EnsembleSpec, RangeMetric, SiteLabel, SymmetricOperator,
};
use idos_core::rng;
use serde::Serialize;

use crate::artifacts::{report_bytes, Manifest, RunDir, Table, TableFormat, ARTIFACT_VERSION};
use crate::config::{load_config_value, DeloneSection, ExperimentConfig, LoadedConfig};
use crate::svg;

/// Result of a run that completed without a hard error.
pub enum Outcome {
    Pass,
    /// Names of the checks that failed; maps to exit code 2.
    FailedChecks(Vec<String>),
}

/// Everything a subcommand needs besides its name.
pub struct RunContext {
    pub loaded: LoadedConfig,
    pub out: PathBuf,
    pub workers: usize,
    pub format: TableFormat,
}

fn core_err(e: idos_core::Error) -> String {
    e.to_string()
}

/// Følner boxes for the config: centered cubes for lattice models,
/// origin-anchored for point-set models (their generator grid starts at
/// the origin, so boxes are expressed in generator coordinates).
fn boxes_for(config: &ExperimentConfig, sides: &[i64]) -> Result<FolnerSequence, String> {
    let dim = config.dimension;
    let boxes: Result<Vec<LatticeBox>, idos_core::Error> = sides
        .iter()
        .map(|&s| {
            if matches!(config.model, EnsembleSpec::DeloneVoronoi { .. }) {
                LatticeBox::new(vec![s; dim], vec![0; dim])
            } else {
                LatticeBox::centered(dim, s)
            }
        })
        .collect();
    FolnerSequence::from_boxes(boxes.map_err(core_err)?).map_err(core_err)
}

fn lambda_grid_for(config: &ExperimentConfig) -> Result<Vec<f64>, String> {
    match &config.lambda {
        Some(g) => uniform_grid(g.low, g.high, g.points).map_err(core_err),
        None => default_lambda_grid(&config.model, config.dimension).map_err(core_err),
    }
}

fn ids_params(config: &ExperimentConfig) -> IdsParams {
    IdsParams {
        realizations: config.realizations,
        base_seed: config.base_seed,
        boundary: config.boundary,
        mode: config.mode,
    }
}

fn run_empirical_ids(config: &ExperimentConfig, grid: &[f64]) -> Result<IdsRun, String> {
    let folner = boxes_for(config, &config.sides)?;
    empirical_ids(&config.model, &folner, &ids_params(config), grid).map_err(core_err)
}

/// Rows of the `lambda,value,std,scale` table for an IDS run: one block
/// per scale, tagged by the scale's box side.
fn ids_table(run: &IdsRun) -> Table {
    let mut rows = Vec::new();
    for scale in &run.scales {
        let side = scale.domain.sides()[0] as f64;
        for (i, &lambda) in run.lambda_grid.iter().enumerate() {
            rows.push(vec![lambda, scale.grid_mean[i], scale.grid_std[i], side]);
        }
    }
    Table {
        columns: vec!["lambda", "value", "std", "scale"],
        rows,
    }
}

fn finish(
    dir: RunDir,
    ctx: &RunContext,
    subcommand: &str,
) -> Result<Manifest, String> {
    dir.finish(
        subcommand,
        &ctx.loaded.value,
        &ctx.loaded.hash,
        ctx.loaded.config.base_seed,
        ctx.workers,
        Table::extension(&ctx.format),
    )
}

/// `ids`: empirical IDS along the exhaustion plus the spread report.
pub fn run_ids(ctx: &RunContext) -> Result<Outcome, String> {
    let config = &ctx.loaded.config;
    let grid = lambda_grid_for(config)?;
    let mut dir = RunDir::create(&ctx.out)?;

    let t0 = Instant::now();
    let run = run_empirical_ids(config, &grid)?;
    dir.record_timing("empirical_ids", t0.elapsed().as_secs_f64());

    let ext = Table::extension(&ctx.format);
    dir.write(
        &format!("ids.{ext}"),
        &ids_table(&run).render(&ctx.format, &ctx.loaded.hash),
    )?;

    let t1 = Instant::now();
    let spread = if config.realizations >= 20 {
        let report = self_averaging_report(&run, &grid).map_err(core_err)?;
        report_bytes(&report, &ctx.loaded.hash)?
    } else {
        #[derive(Serialize)]
        struct Skipped<'a> {
            skipped: &'a str,
        }
        report_bytes(
            &Skipped {
                skipped: "spread estimation needs at least 20 realizations",
            },
            &ctx.loaded.hash,
        )?
    };
    dir.write("self_averaging.json", &spread)?;
    dir.record_timing("self_averaging", t1.elapsed().as_secs_f64());

    finish(dir, ctx, "ids")?;
    Ok(Outcome::Pass)
}

fn dos_block(config: &ExperimentConfig) -> Result<LatticeBox, String> {
    let section = config
        .dos
        .as_ref()
        .ok_or_else(|| "config: this subcommand needs a `dos` section".to_string())?;
    let sides = section.block_sides.clone();
    let offsets: Vec<i64> = if matches!(config.model, EnsembleSpec::DeloneVoronoi { .. }) {
        vec![0; sides.len()]
    } else {
        sides.iter().map(|&s| -(s / 2)).collect()
    };
    LatticeBox::new(sides, offsets).map_err(core_err)
}

fn run_abstract_dos(
    config: &ExperimentConfig,
    grid: &[f64],
) -> Result<dos::DosEstimate, String> {
    let section = config.dos.as_ref().expect("checked by dos_block");
    let block = dos_block(config)?;
    let params = DosParams {
        realizations: section.realizations.unwrap_or(config.realizations),
        base_seed: config.base_seed,
        boundary: config.boundary,
        padding: section.padding,
    };
    abstract_dos(&config.model, &block, &params, grid).map_err(core_err)
}

/// `dos`: localized-trace density-of-states estimate on the padded block.
pub fn run_dos(ctx: &RunContext) -> Result<Outcome, String> {
    let config = &ctx.loaded.config;
    let grid = lambda_grid_for(config)?;
    let mut dir = RunDir::create(&ctx.out)?;

    let t0 = Instant::now();
    let estimate = run_abstract_dos(config, &grid)?;
    dir.record_timing("abstract_dos", t0.elapsed().as_secs_f64());

    let side = estimate.domain.sides()[0] as f64;
    let rows: Vec<Vec<f64>> = estimate
        .lambda_grid
        .iter()
        .enumerate()
        .map(|(i, &lambda)| vec![lambda, estimate.values[i], estimate.std_errors[i], side])
        .collect();
    let table = Table {
        columns: vec!["lambda", "value", "std", "scale"],
        rows,
    };
    let ext = Table::extension(&ctx.format);
    dir.write(&format!("dos.{ext}"), &table.render(&ctx.format, &ctx.loaded.hash))?;

    #[derive(Serialize)]
    struct DosSummary {
        tau_identity: f64,
        tau_identity_stderr: f64,
        realizations: usize,
        padding: i64,
    }
    let summary = DosSummary {
        tau_identity: estimate.tau_identity,
        tau_identity_stderr: estimate.tau_identity_stderr,
        realizations: estimate.params.realizations,
        padding: estimate.params.padding,
    };
    dir.write("dos_summary.json", &report_bytes(&summary, &ctx.loaded.hash)?)?;

    finish(dir, ctx, "dos")?;
    Ok(Outcome::Pass)
}

/// Feasible side schedule for the boundary-independence diagnostic: the
/// configured one, or dyadic scales below the largest side whose padded
/// box stays within the dense eigensolver limit.
fn boundary_schedule(config: &ExperimentConfig, padding: i64) -> Result<Vec<i64>, String> {
    if let Some(sides) = config
        .checks
        .as_ref()
        .and_then(|c| c.boundary_sides.clone())
    {
        return Ok(sides);
    }
    let dim = config.dimension as i32;
    let limit = idos_core::DENSE_DIMENSION_LIMIT as f64;
    let mut s = *config.sides.last().unwrap();
    while s > 4 && ((s + 2 * padding) as f64).powi(dim) > limit {
        s /= 2;
    }
    if ((s + 2 * padding) as f64).powi(dim) > limit {
        return Err(format!(
            "checks.boundary_padding {padding} leaves no feasible scale; set `checks.boundary_sides`"
        ));
    }
    let schedule: Vec<i64> = [s / 4, s / 2, s]
        .into_iter()
        .filter(|&v| v >= 2)
        .collect();
    let mut dedup = schedule.clone();
    dedup.dedup();
    if dedup.len() < 2 {
        return Err(
            "could not derive a boundary-independence schedule; set `checks.boundary_sides`"
                .to_string(),
        );
    }
    Ok(dedup)
}

#[derive(Serialize)]
struct BoundaryCheckReport {
    #[serde(flatten)]
    report: dos::BoundaryIndependenceReport,
    /// Consecutive deviation ratios (earlier scale over later).
    ratios: Vec<f64>,
    min_ratio: f64,
    pass: bool,
}

#[derive(Serialize)]
struct LaplaceCheckReport {
    #[serde(flatten)]
    report: dos::LaplaceRouteReport,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct DichotomyCheckReport {
    reports: Vec<dos::DichotomyReport>,
    pass: bool,
}

#[derive(Serialize)]
#[serde(untagged)]
enum MaybeReport<T: Serialize> {
    Ready(T),
    Skipped { skipped: String },
}

#[derive(Serialize)]
struct CheckReport {
    trace_formula: dos::TraceFormulaReport,
    laplace_route: LaplaceCheckReport,
    boundary_independence: BoundaryCheckReport,
    dichotomy: DichotomyCheckReport,
    spectrum_constancy: MaybeReport<dos::SpectrumConstancyReport>,
    pass: bool,
}

/// Default dichotomy sweep: twelve equal intervals across the inner 87.5%
/// of the spectral band plus one tail interval beyond each band edge.
fn default_intervals(grid: &[f64]) -> Vec<(f64, f64)> {
    let (g0, g1) = (grid[0], grid[grid.len() - 1]);
    let (lo, hi) = (0.875 * g0, 0.875 * g1);
    let mut intervals = Vec::new();
    for k in 0..12 {
        let a = lo + (hi - lo) * k as f64 / 12.0;
        let b = lo + (hi - lo) * (k + 1) as f64 / 12.0;
        intervals.push((a, b));
    }
    let upper = (0.95 * g1, 1.125 * g1);
    if upper.0 < upper.1 {
        intervals.push(upper);
    }
    let lower = (1.125 * g0, 0.95 * g0);
    if lower.0 < lower.1 {
        intervals.push(lower);
    }
    intervals
}

/// `check`: the full verification battery on one configuration.
pub fn run_check(ctx: &RunContext) -> Result<Outcome, String> {
    let config = &ctx.loaded.config;
    let checks = config.checks.clone().unwrap_or_default();
    let grid = lambda_grid_for(config)?;
    dos_block(config)?; // fail early if the dos section is missing
    let mut dir = RunDir::create(&ctx.out)?;

    let t0 = Instant::now();
    let ids = run_empirical_ids(config, &grid)?;
    dir.record_timing("empirical_ids", t0.elapsed().as_secs_f64());
    let t1 = Instant::now();
    let estimate = run_abstract_dos(config, &grid)?;
    dir.record_timing("abstract_dos", t1.elapsed().as_secs_f64());

    let t2 = Instant::now();
    let trace = trace_formula_check(&ids, &estimate, &grid, checks.trace_tolerance, checks.jump_floor)
        .map_err(core_err)?;

    let times = config.times.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let shift = (-grid[0]).max(0.0);
    let laplace = laplace_route_check(&ids, &estimate, &times, shift).map_err(core_err)?;
    let laplace_pass = laplace.max_gap <= checks.laplace_tolerance;
    let laplace_report = LaplaceCheckReport {
        report: laplace,
        tolerance: checks.laplace_tolerance,
        pass: laplace_pass,
    };

    let schedule = boundary_schedule(config, checks.boundary_padding)?;
    let boundary_folner = boxes_for(config, &schedule)?;
    let boundary = boundary_independence(
        &config.model,
        &boundary_folner,
        checks.heat_time,
        checks.boundary_padding,
        config.realizations.min(8),
        config.base_seed,
    )
    .map_err(core_err)?;
    let deviations: Vec<f64> = boundary.scales.iter().map(|s| s.deviation).collect();
    let floor = 1e-12;
    let mut ratios = Vec::new();
    let mut boundary_pass = true;
    for pair in deviations.windows(2) {
        let ratio = if pair[1] > 0.0 { pair[0] / pair[1] } else { f64::INFINITY };
        ratios.push(ratio);
        if pair[1] > floor && ratio < checks.min_boundary_ratio {
            boundary_pass = false;
        }
    }
    let boundary_report = BoundaryCheckReport {
        report: boundary,
        ratios,
        min_ratio: checks.min_boundary_ratio,
        pass: boundary_pass,
    };

    let intervals = checks
        .intervals
        .clone()
        .unwrap_or_else(|| default_intervals(&grid));
    let mut dich_reports = Vec::new();
    let mut dich_pass = true;
    for interval in intervals {
        let report = dichotomy_check(&ids, interval).map_err(core_err)?;
        dich_pass &= !report.violation;
        dich_reports.push(report);
    }
    let dichotomy = DichotomyCheckReport {
        reports: dich_reports,
        pass: dich_pass,
    };

    let populated = ids.largest().dims.iter().any(|&d| d > 0);
    let constancy = if config.realizations >= 10 && populated {
        MaybeReport::Ready(
            spectrum_constancy_report(&ids, Some(&estimate)).map_err(core_err)?,
        )
    } else if !populated {
        MaybeReport::Skipped {
            skipped: "every realization is empty; spectra carry no information".to_string(),
        }
    } else {
        MaybeReport::Skipped {
            skipped: "spectrum constancy needs at least 10 realizations".to_string(),
        }
    };
    dir.record_timing("checks", t2.elapsed().as_secs_f64());

    let pass = trace.pass && laplace_report.pass && boundary_report.pass && dichotomy.pass;
    let mut failed = Vec::new();
    if !trace.pass {
        failed.push("trace_formula".to_string());
    }
    if !laplace_report.pass {
        failed.push("laplace_route".to_string());
    }
    if !boundary_report.pass {
        failed.push("boundary_independence".to_string());
    }
    if !dichotomy.pass {
        failed.push("dichotomy".to_string());
    }

    let report = CheckReport {
        trace_formula: trace,
        laplace_route: laplace_report,
        boundary_independence: boundary_report,
        dichotomy,
        spectrum_constancy: constancy,
        pass,
    };
    dir.write("check.json", &report_bytes(&report, &ctx.loaded.hash)?)?;

    // The curves both estimators produced, for plotting and inspection.
    let ext = Table::extension(&ctx.format);
    dir.write(
        &format!("ids.{ext}"),
        &ids_table(&ids).render(&ctx.format, &ctx.loaded.hash),
    )?;
    let side = estimate.domain.sides()[0] as f64;
    let divisor = match config.mode {
        dos::NormalizationMode::Volume => 1.0,
        dos::NormalizationMode::OccupiedCount => {
            if estimate.tau_identity > 0.0 {
                estimate.tau_identity
            } else {
                1.0
            }
        }
    };
    let dos_rows: Vec<Vec<f64>> = estimate
        .lambda_grid
        .iter()
        .enumerate()
        .map(|(i, &l)| vec![l, estimate.values[i] / divisor, estimate.std_errors[i] / divisor, side])
        .collect();
    dir.write(
        &format!("dos.{ext}"),
        &Table {
            columns: vec!["lambda", "value", "std", "scale"],
            rows: dos_rows,
        }
        .render(&ctx.format, &ctx.loaded.hash),
    )?;

    finish(dir, ctx, "check")?;
    if pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::FailedChecks(failed))
    }
}

/// `atoms`: finite-cluster atom oracle plus the empirical jump match.
pub fn run_atoms(ctx: &RunContext) -> Result<Outcome, String> {
    let config = &ctx.loaded.config;
    let section = config
        .atoms
        .clone()
        .ok_or_else(|| "config: `atoms` needs an `atoms` section".to_string())?;
    let p = match config.model {
        EnsembleSpec::PercolationAdjacency { p } => p,
        _ => {
            return Err(
                "config field `model`: the atom comparison needs the percolation-adjacency model"
                    .to_string(),
            )
        }
    };
    let grid = lambda_grid_for(config)?;
    let mut dir = RunDir::create(&ctx.out)?;

    let t0 = Instant::now();
    let oracle = cluster_atom_oracle(section.max_cells, p).map_err(core_err)?;
    dir.record_timing("cluster_atom_oracle", t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let ids = run_empirical_ids(config, &grid)?;
    dir.record_timing("empirical_ids", t1.elapsed().as_secs_f64());

    let t2 = Instant::now();
    let compare = ids_jump_compare(&ids, &oracle, section.location_radius, section.atom_floor)
        .map_err(core_err)?;
    dir.record_timing("ids_jump_compare", t2.elapsed().as_secs_f64());

    let table = Table {
        columns: vec!["location", "weight"],
        rows: oracle.atoms.iter().map(|&(l, w)| vec![l, w]).collect(),
    };
    let ext = Table::extension(&ctx.format);
    dir.write(&format!("atoms.{ext}"), &table.render(&ctx.format, &ctx.loaded.hash))?;

    #[derive(Serialize)]
    struct AtomsReport {
        #[serde(flatten)]
        compare: dos::JumpCompareReport,
        size_budget: f64,
        pass: bool,
    }
    let pass = compare.all_rows_matched;
    let report = AtomsReport {
        size_budget: oracle.size_budget(),
        compare,
        pass,
    };
    dir.write("jump_compare.json", &report_bytes(&report, &ctx.loaded.hash)?)?;

    finish(dir, ctx, "atoms")?;
    if pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::FailedChecks(vec!["jump_compare".to_string()]))
    }
}

/// Nearest-neighbour operator of a point set: Voronoi adjacency in 2d,
/// consecutive-cell adjacency (the same notion) in 1d.
fn point_set_operator(set: &DeloneSet) -> Result<SymmetricOperator, String> {
    if set.dim() == 2 {
        let adjacency = voronoi_adjacency(set).map_err(core_err)?;
        Ok(delone_operator(&adjacency, DeloneSiteMode::KeepAll))
    } else {
        let labels: Vec<SiteLabel> = (0..set.len()).map(SiteLabel::Point).collect();
        let entries: Vec<(usize, usize, f64)> =
            (0..set.len().saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
        SymmetricOperator::from_triplets(labels, &entries, 1, RangeMetric::Unchecked)
            .map_err(core_err)
    }
}

/// `delone`: generate a point set, validate its separation constants,
/// and export points plus the nearest-neighbour operator.
pub fn run_delone(ctx: &RunContext) -> Result<Outcome, String> {
    let config = &ctx.loaded.config;
    let section = config
        .delone
        .clone()
        .ok_or_else(|| "config: `delone` needs a `delone` section".to_string())?;
    let mut dir = RunDir::create(&ctx.out)?;

    let t0 = Instant::now();
    let set = match &section {
        DeloneSection::Square { nx, ny } => {
            perturbed_lattice(*nx, *ny, 0.0, rng::realization_seed(config.base_seed, 0))
                .map_err(core_err)?
        }
        DeloneSection::Perturbed { nx, ny } => {
            let amplitude = match config.model {
                EnsembleSpec::DeloneVoronoi { amplitude } => amplitude,
                _ => {
                    return Err(
                        "config field `model`: perturbed generation reads the displacement amplitude from the delone-voronoi model"
                            .to_string(),
                    )
                }
            };
            perturbed_lattice(*nx, *ny, amplitude, rng::realization_seed(config.base_seed, 0))
                .map_err(core_err)?
        }
        DeloneSection::Fibonacci { count, phase } => {
            fibonacci_chain(*count, *phase).map_err(core_err)?
        }
    };
    dir.record_timing("generation", t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let (r_packing, r_covering) =
        validate_delone(set.dim(), set.points(), &set.window()).map_err(core_err)?;
    let density = point_density(&set).map_err(core_err)?;
    dir.record_timing("validation", t1.elapsed().as_secs_f64());

    let t2 = Instant::now();
    let operator = point_set_operator(&set)?;
    let interior: Vec<usize> = if set.dim() == 2 {
        let adjacency = voronoi_adjacency(&set).map_err(core_err)?;
        adjacency.interior_indices()
    } else {
        (1..set.len().saturating_sub(1)).collect()
    };
    let mean_interior_degree = if interior.is_empty() {
        0.0
    } else {
        let degree_of = |i: usize| {
            operator
                .entries()
                .iter()
                .filter(|&&(a, b, _)| a as usize == i || b as usize == i)
                .count()
        };
        interior.iter().map(|&i| degree_of(i)).sum::<usize>() as f64 / interior.len() as f64
    };
    dir.record_timing("operator", t2.elapsed().as_secs_f64());

    // Points table.
    let mut points_text = format!("# config_hash {}\n", ctx.loaded.hash);
    if set.dim() == 2 {
        points_text.push_str("x,y\n");
        for p in set.points() {
            points_text.push_str(&format!(
                "{},{}\n",
                crate::artifacts::fmt_f64(p[0]),
                crate::artifacts::fmt_f64(p[1])
            ));
        }
    } else {
        points_text.push_str("x\n");
        for p in set.points() {
            points_text.push_str(&format!("{}\n", crate::artifacts::fmt_f64(p[0])));
        }
    }
    dir.write("points.csv", points_text.as_bytes())?;

    // Operator export: header line first, hash comment second (the
    // coordinate-text parser skips later comment lines).
    let text = operator.to_coordinate_text();
    let mut lines = text.splitn(2, '\n');
    let header = lines.next().unwrap_or_default();
    let rest = lines.next().unwrap_or_default();
    let operator_text = format!("{header}\n# config_hash {}\n{rest}", ctx.loaded.hash);
    dir.write("operator.txt", operator_text.as_bytes())?;

    #[derive(Serialize)]
    struct DeloneSummary {
        count: usize,
        dimension: usize,
        density: f64,
        r_packing: f64,
        r_covering: f64,
        edges: usize,
        mean_interior_degree: f64,
    }
    let summary = DeloneSummary {
        count: set.len(),
        dimension: set.dim(),
        density,
        r_packing,
        r_covering,
        edges: operator.entries().len(),
        mean_interior_degree,
    };
    dir.write("delone.json", &report_bytes(&summary, &ctx.loaded.hash)?)?;

    finish(dir, ctx, "delone")?;
    Ok(Outcome::Pass)
}

/// `plot`: render the CSV curves in a run directory to SVG. Pure
/// function of the CSV bytes; nothing is recomputed.
pub fn run_plot(out: &Path) -> Result<Outcome, String> {
    let ids_path = out.join("ids.csv");
    let dos_path = out.join("dos.csv");
    let ids = match std::fs::read_to_string(&ids_path) {
        Ok(text) => Some(svg::parse_curve_csv(&text).map_err(|e| format!("{}: {e}", ids_path.display()))?),
        Err(_) => None,
    };
    let dos_curve = match std::fs::read_to_string(&dos_path) {
        Ok(text) => Some(svg::parse_curve_csv(&text).map_err(|e| format!("{}: {e}", dos_path.display()))?),
        Err(_) => None,
    };
    let (primary, overlay) = match (&ids, &dos_curve) {
        (Some(i), d) => (i, d.as_ref()),
        (None, Some(d)) => (d, None),
        (None, None) => {
            return Err(format!(
                "no curve CSVs found in {} (run `ids`, `dos`, or `check` with --format csv first)",
                out.display()
            ))
        }
    };
    let rendered = svg::render_curves(primary, overlay)?;
    let path = out.join("plot.svg");
    std::fs::write(&path, rendered.as_bytes())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(Outcome::Pass)
}

/// Dispatch a run subcommand by name (shared by main and `replay`).
pub fn run_subcommand(name: &str, ctx: &RunContext) -> Result<Outcome, String> {
    match name {
        "ids" => run_ids(ctx),
        "dos" => run_dos(ctx),
        "check" => run_check(ctx),
        "atoms" => run_atoms(ctx),
        "delone" => run_delone(ctx),
        other => Err(format!("manifest names unknown subcommand `{other}`")),
    }
}

/// `replay`: re-run a manifest's recorded configuration and verify the
/// artifacts byte for byte.
pub fn run_replay(
    manifest_path: &Path,
    out_override: Option<&Path>,
    workers: usize,
) -> Result<Outcome, String> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| format!("cannot read manifest {}: {e}", manifest_path.display()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| format!("manifest: {e}"))?;
    if manifest.artifact_version != ARTIFACT_VERSION {
        return Err(format!(
            "replay refused: manifest artifact_version {} does not match this binary's version {ARTIFACT_VERSION}; \
             rerun the original binary or regenerate the run",
            manifest.artifact_version
        ));
    }
    let recomputed_hash = crate::config::hash_value(&manifest.config);
    let config_edited = recomputed_hash != manifest.config_hash;

    let loaded = load_config_value(&manifest.config)?;
    let staging: PathBuf = match out_override {
        Some(p) => p.to_path_buf(),
        None => manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("replay"),
    };
    let format = match manifest.output_format.as_str() {
        "json" => TableFormat::Json,
        _ => TableFormat::Csv,
    };
    let ctx = RunContext {
        loaded,
        out: staging.clone(),
        workers,
        format,
    };
    // Check outcomes (exit 2) do not matter here; replay judges bytes.
    run_subcommand(&manifest.subcommand, &ctx)?;

    let mut mismatched = Vec::new();
    for record in &manifest.artifacts {
        let path = staging.join(&record.name);
        let bytes = std::fs::read(&path)
            .map_err(|e| format!("replay produced no {}: {e}", path.display()))?;
        let mut hasher = <sha2::Sha256 as sha2::Digest>::new();
        sha2::Digest::update(&mut hasher, &bytes);
        let hash = crate::config::hex(sha2::Digest::finalize(hasher).as_slice());
        if hash != record.sha256 {
            mismatched.push(record.name.clone());
        }
    }

    if mismatched.is_empty() {
        if config_edited {
            println!(
                "replay: {} artifacts byte-identical (note: the manifest config hash {} does not match its recorded value {}, yet outputs agree)",
                manifest.artifacts.len(),
                recomputed_hash,
                manifest.config_hash
            );
        } else {
            println!(
                "replay: {} artifacts byte-identical",
                manifest.artifacts.len()
            );
        }
        Ok(Outcome::Pass)
    } else if config_edited {
        println!(
            "replay: expected divergence in {:?} — the manifest's config no longer matches its recorded hash ({} != {}), so the run legitimately differs",
            mismatched, recomputed_hash, manifest.config_hash
        );
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::FailedChecks(vec![format!(
            "determinism violation: artifacts {mismatched:?} differ from the recorded bytes under an unchanged config"
        )]))
    }
}
