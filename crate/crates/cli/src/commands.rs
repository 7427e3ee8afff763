use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use degenspec::asymptotics::{sweep, RowStatus, SweepOptions, SweepReport};
use degenspec::io;
use degenspec::potentials::{hypothesis_report, HypothesisReport};
use degenspec::surface_ops::{eigenspace_groups, surface_eigenvalues};
use degenspec::{build_momentum_grid, build_surface_quadrature, BsContext, SolveRecord, SurfaceOperatorSet};
use serde::Serialize;

use crate::config::{self, Format, Resolved, RunConfig};
use crate::manifest::{grid_fingerprint, prepare_dir, short_id, surface_fingerprint, Outputs, RunManifest};
use crate::{exit, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Surface,
    Solve,
    Sweep,
    CheckHypotheses,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Surface => "surface",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::CheckHypotheses => "check-hypotheses",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub index: Option<usize>,
    pub force: bool,
}

#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub written: Vec<PathBuf>,
    pub summary: String,
}

struct Run {
    outputs: Outputs,
    fingerprints: BTreeMap<String, String>,
    tolerances: BTreeMap<String, f64>,
    code: i32,
    summary: String,
}

impl Run {
    fn new() -> Self {
        Run { outputs: Outputs::default(), fingerprints: BTreeMap::new(), tolerances: BTreeMap::new(), code: exit::PASS, summary: String::new() }
    }

    fn csv<F>(&mut self, r: &Resolved, name: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> degenspec::Result<()>,
    {
        if r.wants(Format::Csv) {
            let mut buf = Vec::new();
            write(&mut buf)?;
            self.outputs.add(name, buf);
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, r: &Resolved, name: &str, value: &T) -> Result<(), CliError> {
        if r.wants(Format::Json) {
            let mut buf = serde_json::to_vec_pretty(value)?;
            buf.push(b'\n');
            self.outputs.add(name, buf);
        }
        Ok(())
    }
}

pub fn run(cmd: Command, opts: &RunOptions) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (cfg, resolved) = config::load(&opts.config)?;
    let dir = opts.out.clone().or_else(|| resolved.directory.clone());
    if cmd != Command::CheckHypotheses && dir.is_none() {
        return Err(CliError::Usage("no output directory: pass --out or set output.directory".into()));
    }
    if let Some(d) = &dir {
        prepare_dir(d, opts.force)?;
    }
    let mut run = Run::new();
    match cmd {
        Command::Surface => surface(&resolved, &mut run)?,
        Command::Solve => solve(&resolved, opts, &mut run)?,
        Command::Sweep => sweep_cmd(&resolved, &mut run)?,
        Command::CheckHypotheses => check_hypotheses(&resolved, &mut run)?,
    }
    let Some(dir) = dir else {
        return Ok(Outcome { code: run.code, written: Vec::new(), summary: run.summary });
    };
    write_manifest(cmd, &cfg, &resolved, &mut run, started.elapsed().as_secs_f64())?;
    let written = run.outputs.commit(&dir)?;
    Ok(Outcome { code: run.code, written, summary: run.summary })
}

fn write_manifest(cmd: Command, cfg: &RunConfig, resolved: &Resolved, run: &mut Run, secs: f64) -> Result<(), CliError> {
    let mut outputs = run.outputs.names();
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name(),
        config: cfg,
        resolved,
        fingerprints: run.fingerprints.clone(),
        wall_clock_seconds: secs,
        tolerances: run.tolerances.clone(),
        outputs,
        passed: run.code == exit::PASS,
    };
    let mut buf = serde_json::to_vec_pretty(&manifest)?;
    buf.push(b'\n');
    run.outputs.add("manifest.json", buf);
    Ok(())
}

#[derive(Serialize)]
struct SurfaceDiagnostics {
    nodes: usize,
    total_measure: f64,
    vs_symmetry_residual: f64,
    /// Sizes of the leading eigenspaces.
    multiplets: Vec<usize>,
    ws_symmetry_residual: Option<f64>,
    ws_e_sequence: Option<Vec<f64>>,
    ws_cauchy_residuals: Option<Vec<f64>>,
    ws_residuals_decrease: Option<bool>,
}

fn surface(r: &Resolved, run: &mut Run) -> Result<(), CliError> {
    let quad = build_surface_quadrature(&r.symbol, 0.0, r.surface_resolution)?;
    run.fingerprints.insert("surface".into(), surface_fingerprint(&quad));
    let mut set = SurfaceOperatorSet::new(quad.clone(), &r.potential, r.eigen_count.min(quad.len()))?;
    let vs_vals = surface_eigenvalues(&set.vs)?;
    if r.second_order {
        let grid = build_momentum_grid(&r.symbol, &r.grid)?;
        run.fingerprints.insert("momentum".into(), grid_fingerprint(&grid));
        set = set.with_ws(&r.potential, &r.symbol, &r.e_sequence, &grid)?;
    }
    let leading: Vec<f64> = set.eigs_vs.iter().map(|p| p.value).collect();
    let ws = set.ws.as_ref();
    let diag = SurfaceDiagnostics {
        nodes: quad.len(),
        total_measure: quad.total_measure(),
        vs_symmetry_residual: set.vs.symmetry_residual(),
        multiplets: eigenspace_groups(&leading, 1e-8).iter().map(|g| g.len()).collect(),
        ws_symmetry_residual: ws.map(|w| w.matrix.symmetry_residual()),
        ws_e_sequence: ws.map(|w| w.e_sequence.clone()),
        ws_cauchy_residuals: ws.map(|w| w.cauchy_residuals.clone()),
        ws_residuals_decrease: ws.map(|w| w.residuals_decrease()),
    };
    run.tolerances.insert("vs_symmetry_residual".into(), diag.vs_symmetry_residual);
    if let Some(w) = ws {
        if let Some(last) = w.cauchy_residuals.last() {
            run.tolerances.insert("ws_last_cauchy_residual".into(), *last);
        }
        if !w.residuals_decrease() {
            run.code = exit::GATE;
        }
    }
    run.csv(r, "vs_spectrum.csv", |b| io::write_spectrum_csv(b, &vs_vals))?;
    run.csv(r, "vs_eigenvectors.csv", |b| io::write_eigenvectors_csv(b, &set.eigs_vs, &quad.weights))?;
    if let Some(w) = ws {
        let vals = surface_eigenvalues(&w.matrix)?;
        run.csv(r, "ws_spectrum.csv", |b| io::write_spectrum_csv(b, &vals))?;
    }
    run.json(r, "diagnostics.json", &diag)?;
    run.summary = format!("a_S^1 = {}", vs_vals.first().copied().unwrap_or(0.0));
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    record: &'a SolveRecord,
    grid_id: &'a str,
    eigenvector_identity_residual: f64,
    refined_e: f64,
    certificate_relative_change: f64,
    direct_e: Option<f64>,
}

fn solve(r: &Resolved, opts: &RunOptions, run: &mut Run) -> Result<(), CliError> {
    let lambda = opts
        .lambda
        .or_else(|| r.lambdas.first().copied())
        .ok_or_else(|| CliError::Usage("no coupling: pass --lambda or set solve.lambda_list".into()))?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CliError::Config(format!("the coupling must be positive, got {lambda}")));
    }
    let index = opts.index.unwrap_or(r.index);
    if index == 0 {
        return Err(CliError::Usage("--index starts at 1".into()));
    }
    let ctx = BsContext::build(r.symbol.clone(), r.potential.clone(), &r.grid, lambda)?;
    let fp = grid_fingerprint(&ctx.grid);
    let rec = ctx.solve_e(index, None)?;
    if rec.residual > r.bisection_tol {
        return Err(degenspec::Error::Resolution(format!(
            "root residual {:e} above solve.bisection_tol {:e}",
            rec.residual, r.bisection_tol
        ))
        .into());
    }
    let identity = ctx.eigenvector_identity_residual(&rec)?;
    let cert = ctx.certify(&rec)?;
    let direct_e = if r.direct_check { Some(direct_energy(&ctx, index, true)?) } else { None };
    run.tolerances.insert("root_residual".into(), rec.residual);
    run.tolerances.insert("eigenvector_identity_residual".into(), identity);
    run.tolerances.insert("refinement_relative_change".into(), cert.relative_change);
    if !cert.passes || identity > 1e-6 {
        run.code = exit::GATE;
    }
    let id = short_id(&fp).to_string();
    run.fingerprints.insert("momentum".into(), fp);
    let direct = direct_e.map(|d| vec![d]);
    run.csv(r, "solve.csv", |b| io::write_solve_records(b, std::slice::from_ref(&rec), &id, direct.as_deref()))?;
    let summary = SolveSummary {
        record: &rec,
        grid_id: &id,
        eigenvector_identity_residual: identity,
        refined_e: cert.e_refined,
        certificate_relative_change: cert.relative_change,
        direct_e,
    };
    run.json(r, "solve.json", &summary)?;
    run.summary = format!("e = {} (energy {})", rec.e, rec.energy);
    Ok(())
}

/// `e` of the `index`-th negative eigenvalue of the discretised
/// Hamiltonian, optionally on the once-refined grid.
pub fn direct_energy(ctx: &BsContext, index: usize, refined: bool) -> Result<f64, CliError> {
    let c = if refined {
        BsContext::build(ctx.sym.clone(), ctx.potential.clone(), &ctx.grid.spec.refined(), ctx.lambda)?
    } else {
        ctx.clone()
    };
    let vals = c.direct_spectrum(index)?;
    match vals.get(index - 1) {
        Some(&v) if v < 0.0 => Ok(-v),
        _ => Err(degenspec::Error::NoBoundState { lambda: ctx.lambda, index }.into()),
    }
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    report: &'a SweepReport,
    hypotheses: HypothesisReport,
    grid_id: &'a str,
}

fn sweep_cmd(r: &Resolved, run: &mut Run) -> Result<(), CliError> {
    if r.lambdas.is_empty() {
        return Err(CliError::Config("sweep needs solve.lambda_list or solve.geometric".into()));
    }
    let ctx = BsContext::build(r.symbol.clone(), r.potential.clone(), &r.grid, r.lambdas[0])?;
    let fp = grid_fingerprint(&ctx.grid);
    let opts = SweepOptions { second_order: r.second_order, eigenvectors: r.eigenvectors, e_sequence: r.e_sequence.clone() };
    let report = sweep(&ctx, &r.lambdas, r.index, &opts)?;
    let hypotheses = hypothesis_report(&r.potential, &r.symbol);
    if let Some(x) = report.extrapolated {
        run.tolerances.insert("extrapolated_lambda_f_times_a".into(), x);
    }
    let worst = report.ok_rows().map(|row| row.solve_residual).fold(0.0, f64::max);
    run.tolerances.insert("max_root_residual".into(), worst);
    run.code = if report.rows.iter().any(|row| row.status == RowStatus::Resolution) {
        exit::RESOLUTION
    } else if report.rows.iter().any(|row| row.status == RowStatus::NoBoundState) {
        exit::NO_BOUND_STATE
    } else if !report.gates.passes() || !hypotheses.passes || worst > r.bisection_tol {
        exit::GATE
    } else {
        exit::PASS
    };
    let id = short_id(&fp).to_string();
    run.fingerprints.insert("momentum".into(), fp);
    run.csv(r, "sweep.csv", |b| io::write_sweep_csv(b, &report))?;
    run.csv(r, "plot.csv", |b| io::write_plot_csv(b, &report))?;
    run.json(r, "sweep.json", &SweepDocument { report: &report, hypotheses, grid_id: &id })?;
    run.summary = format!(
        "{} rows, extrapolated lambda f |a| = {}",
        report.rows.len(),
        report.extrapolated.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

fn check_hypotheses(r: &Resolved, run: &mut Run) -> Result<(), CliError> {
    let rep = hypothesis_report(&r.potential, &r.symbol);
    if !rep.passes {
        run.code = exit::GATE;
    }
    run.summary = serde_json::to_string_pretty(&rep)?;
    run.json(r, "hypotheses.json", &rep)?;
    Ok(())
}

/// Reads a config without running anything, for `--check`-style callers
/// and tests.
pub fn validate_config(path: &Path) -> Result<Resolved, CliError> {
    config::load(path).map(|(_, r)| r)
}
