//! Executes a validated [`RunConfig`] and writes its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use cornerflow_core::conformal::{map_for_shape, probe_corner_exponent, running_fits, ConformalError, ConformalMap};
use cornerflow_core::corrector::{CorrectorError, CorrectorSpec};
use cornerflow_core::euler_sim::{stability_report, ReflectionSpec, SimError, SimSpec};
use cornerflow_core::experiments::{
    corrector_at, default_rules, fit_rate, prepare, CellRecord, ExperimentError, RateRecord, DEFAULT_EPS,
};
use cornerflow_core::fields::{FieldError, VorticityField};
use cornerflow_core::geometry::ObstacleShape;
use cornerflow_core::quadrature::{pairwise_sum, FiberSpec};

use crate::config::{Command, ConfigError, RunConfig, Sweep};
use crate::shapes::{resolve_shape, ShapeError};

pub const RATES_HEADER: &str = "epsilon,d_eps,n_holes,residual_l2,bound,ratio,f_l1linf,wall_ms";
pub const SIM_HEADER: &str = "t,seed_id,x_plane,y_plane,x_perf,y_perf,gap";
pub const PROBE_HEADER: &str = "r,|T'|,predicted,fitted_running";
pub const CELL_HEADER: &str = "hole,epsilon,d_eps,sup_w1,sup_w2,l4_w3,l4_w4,w1_ratio,w2_ratio,w3_ratio,w4_ratio";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{}", join_config(.0))]
    Config(Vec<ConfigError>),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Corrector(#[from] CorrectorError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("sweep file {path}, line {line}: expected `eps d_eps` with both positive")]
    SweepLine { path: String, line: usize },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("thread pool: {0}")]
    Threads(String),
}

fn join_config(errs: &[ConfigError]) -> String {
    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

impl RunError {
    pub fn category(&self) -> &'static str {
        match self {
            RunError::Config(_) | RunError::SweepLine { .. } => "config",
            RunError::Shape(_) | RunError::Conformal(_) => "geometry",
            RunError::Field(_) | RunError::Experiment(_) | RunError::Corrector(_) => "numerics",
            RunError::Simulation(_) => "simulation",
            RunError::Io { .. } | RunError::Threads(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "geometry" => 3,
            "numerics" => 4,
            "simulation" => 5,
            _ => 6,
        }
    }
}

/// Wall times and summary values gathered during a run.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub stages: Vec<(String, f64)>,
    pub results: Vec<(String, String)>,
    pub rows: usize,
}

impl Report {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.push((stage.to_string(), t0.elapsed().as_secs_f64() * 1e3));
        out
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_file_name("manifest.txt")
}

/// Runs `cfg` on its own thread pool and always writes the manifest.
pub fn run(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut report = Report::default();
    let result = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunError::Threads(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(cfg, &mut report))),
        None => dispatch(cfg, &mut report),
    };
    write_manifest(&manifest_path(&cfg.out), Some(cfg), &report, result.as_ref().err())?;
    result.map(|_| report)
}

/// Manifest for input that never became a valid config.
pub fn write_failure_manifest(path: &Path, source: &str, err: &RunError) -> Result<(), RunError> {
    let mut report = Report::default();
    report.note("input_lines", source.lines().count());
    let mut text = String::new();
    for line in source.lines().filter(|l| !l.trim().is_empty()) {
        let _ = writeln!(text, "# {}", line.trim());
    }
    write_manifest_text(path, &text, &report, Some(err))
}

fn write_manifest(path: &Path, cfg: Option<&RunConfig>, report: &Report, err: Option<&RunError>) -> Result<(), RunError> {
    let echo = cfg.map(|c| c.echo()).unwrap_or_default();
    write_manifest_text(path, &echo, report, err)
}

fn write_manifest_text(path: &Path, echo: &str, report: &Report, err: Option<&RunError>) -> Result<(), RunError> {
    let mut s = String::new();
    let _ = writeln!(s, "# cornerflow run manifest");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "\n[config]");
    s.push_str(echo);
    let _ = writeln!(s, "\n[stages]");
    for (k, ms) in &report.stages {
        let _ = writeln!(s, "{k}_ms = {ms:.3}");
    }
    let _ = writeln!(s, "\n[results]");
    for (k, v) in &report.results {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "\n[status]");
    match err {
        None => {
            let _ = writeln!(s, "status = ok");
        }
        Some(e) => {
            let _ = writeln!(s, "status = error");
            let _ = writeln!(s, "category = {}", e.category());
            let _ = writeln!(s, "error = {e}");
        }
    }
    fs::write(path, s).map_err(|source| RunError::Io { path: path.display().to_string(), source })
}

fn dispatch(cfg: &RunConfig, report: &mut Report) -> Result<(), RunError> {
    let shape = report.time("shape", || resolve_shape(&cfg.shape))?;
    let map = Arc::new(report.time("conformal_map", || map_for_shape(&shape))?);
    report.note("beta", map.beta());
    let csv = match cfg.command {
        Command::ConformalProbe => probe(cfg, &shape, &map, report)?,
        Command::Cell => cell(cfg, shape, map, report)?,
        Command::Rates => rates(cfg, shape, map, report)?,
        Command::Simulate => simulate(cfg, shape, map, report)?,
    };
    report.rows = csv.lines().count().saturating_sub(1);
    report.time("write_csv", || fs::write(&cfg.out, csv))
        .map_err(|source| RunError::Io { path: cfg.out.display().to_string(), source })
}

fn corrector_spec(cfg: &RunConfig) -> CorrectorSpec {
    let base = CorrectorSpec::default();
    CorrectorSpec { fibers: FiberSpec { order: cfg.order, ..base.fibers }, tol: cfg.tol, ..base }
}

fn probe(cfg: &RunConfig, shape: &ObstacleShape, map: &ConformalMap, report: &mut Report) -> Result<String, RunError> {
    let a = report.time("probe", || probe_corner_exponent(map, shape, cfg.corner))?;
    report.note("fitted_exponent", a.fitted_exponent);
    report.note("predicted_exponent", a.predicted_exponent);
    let fits = running_fits(&a.samples);
    let mut s = format!("{PROBE_HEADER}\n");
    for ((r, dt), fit) in a.samples.iter().zip(&fits) {
        let fit = fit.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{r},{dt},{},{fit}", a.predicted_exponent);
    }
    Ok(s)
}

fn field(cfg: &RunConfig) -> Result<VorticityField, RunError> {
    Ok(VorticityField::parse(&cfg.field)?)
}

fn cell(cfg: &RunConfig, shape: ObstacleShape, map: Arc<ConformalMap>, report: &mut Report) -> Result<String, RunError> {
    let f = field(cfg)?;
    let (eps, d) = (cfg.eps.expect("validated"), cfg.deps.expect("validated"));
    let lattice = prepare(&Arc::new(shape), eps, d)?;
    let cor = report.time("corrector", || corrector_at(&lattice, map, &f, corrector_spec(cfg)))?;
    let norms = report.time("cell_norms", || {
        (0..cor.n_holes()).into_par_iter().map(|i| cor.cell_norms(i)).collect::<Result<Vec<_>, _>>()
    })?;
    report.note("n_holes", lattice.n_holes);
    let mut s = format!("{CELL_HEADER}\n");
    for n in norms {
        let r = CellRecord::new(eps, d, n);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            n.hole, eps, d, n.sup_w1, n.sup_w2, n.l4_w3, n.l4_w4, r.w1_ratio, r.w2_ratio, r.w3_ratio, r.w4_ratio
        );
    }
    Ok(s)
}

/// The `(ε, d_ε)` points a rates run visits, in output order.
pub fn sweep_points(cfg: &RunConfig) -> Result<Vec<(f64, f64)>, RunError> {
    if let Sweep::File(path) = &cfg.sweep {
        let p = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: p.clone(), source })?;
        return parse_sweep(&text, &p);
    }
    if let (Some(e), Some(d), None) = (cfg.eps, cfg.deps, cfg.d_rule) {
        if !cfg.entries.iter().any(|(k, _)| k == "sweep") {
            return Ok(vec![(e, d)]);
        }
    }
    let rules = cfg.d_rule.map(|r| vec![r]).unwrap_or_else(default_rules);
    Ok(rules.iter().flat_map(|r| DEFAULT_EPS.iter().map(move |&e| (e, r.apply(e)))).collect())
}

pub fn parse_sweep(text: &str, path: &str) -> Result<Vec<(f64, f64)>, RunError> {
    let mut pts = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<_> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(str::parse::<f64>).collect();
        match v[..] {
            [Ok(e), Ok(d)] if e > 0.0 && d > 0.0 => pts.push((e, d)),
            _ => return Err(RunError::SweepLine { path: path.into(), line: n + 1 }),
        }
    }
    if pts.is_empty() {
        return Err(RunError::SweepLine { path: path.into(), line: 0 });
    }
    Ok(pts)
}

/// One rates record, with holes summed in a fixed order.
pub fn rate_record(
    shape: &Arc<ObstacleShape>,
    map: Arc<ConformalMap>,
    f: &VorticityField,
    epsilon: f64,
    d_eps: f64,
    spec: CorrectorSpec,
) -> Result<RateRecord, RunError> {
    let t0 = Instant::now();
    let lattice = prepare(shape, epsilon, d_eps)?;
    let cor = corrector_at(&lattice, map, f, spec)?;
    let parts = (0..cor.n_holes()).into_par_iter().map(|i| cor.residual_l2_squared_hole(i)).collect::<Result<Vec<_>, _>>()?;
    let mut rec = RateRecord::new(epsilon, d_eps, lattice.n_holes, pairwise_sum(&parts).sqrt(), f);
    rec.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(rec)
}

fn rates(cfg: &RunConfig, shape: ObstacleShape, map: Arc<ConformalMap>, report: &mut Report) -> Result<String, RunError> {
    let f = field(cfg)?;
    let points = sweep_points(cfg)?;
    let shape = Arc::new(shape);
    let spec = corrector_spec(cfg);
    let records = report.time("sweep", || {
        points.par_iter().map(|&(e, d)| rate_record(&shape, map.clone(), &f, e, d, spec)).collect::<Result<Vec<_>, _>>()
    })?;
    report.note("points", records.len());
    if let Ok(fit) = fit_rate(&records) {
        report.note("fitted_exponent", fit.fitted_exponent);
        report.note("fit_constant", fit.constant);
        report.note("fit_r_squared", fit.r_squared);
    }
    let mut s = format!("{RATES_HEADER}\n");
    for r in &records {
        let _ = writeln!(s, "{},{},{},{},{},{},{},{}", r.epsilon, r.d_eps, r.n_holes, r.residual_l2, r.bound, r.ratio, r.f_l1linf, r.wall_ms);
    }
    Ok(s)
}

fn simulate(cfg: &RunConfig, shape: ObstacleShape, map: Arc<ConformalMap>, report: &mut Report) -> Result<String, RunError> {
    let f = field(cfg)?;
    let (eps, d) = (cfg.eps.expect("validated"), cfg.deps.expect("validated"));
    let lattice = prepare(&Arc::new(shape), eps, d)?;
    let spec = SimSpec {
        spacing: cfg.spacing,
        t_end: cfg.t_end,
        dt: cfg.dt,
        reflections: ReflectionSpec { nodes: cfg.nodes, ..ReflectionSpec::default() },
        ..SimSpec::default()
    };
    let rep = report.time("simulate", || stability_report(&f, &lattice, map, &spec))?;
    report.note("n_holes", lattice.n_holes);
    report.note("traj_gap_sup", rep.traj_gap_sup);
    report.note("vorticity_proxy", rep.vorticity_proxy);
    report.note("velocity_gap", rep.velocity_gap);
    report.note("bound", rep.bound);
    report.note("ratio", rep.ratio);
    report.note("max_reflection_passes", rep.max_passes);
    if let Some(t) = rep.support_reached {
        report.note("support_reached_t", t);
    }
    let mut s = format!("{SIM_HEADER}\n");
    for (k, t) in rep.times.iter().enumerate() {
        for p in &rep.pairs {
            let (a, b) = (p.plane[k], p.perforated[k]);
            let _ = writeln!(s, "{t},{},{},{},{},{},{}", p.seed_id, a.re, a.im, b.re, b.im, (a - b).norm());
        }
    }
    Ok(s)
}
