use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use halfspace::error::Error;
use halfspace::geometry::{BoundaryPoint, DomainPoint, HyperPoint, ModelParams, Wall};
use halfspace::kernels::{
    global_poisson, green, killed_density, lambda_poisson, pde_residual, poisson_boundary, potential,
    transition_density, wall_limit, wall_mass_fixed, KernelValue, Route, WallLimitKind,
};
use halfspace::montecarlo::{
    estimate_occupation, histogram_from, sample_paths, Binning, Estimate, ExitCounts, ExitRecord, ExitWall, PathConfig,
};
use halfspace::verify::{parse_suite, run_suite, CriterionReport, Suite, VerifyOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Command, Estimator, FieldName, KernelName, LimitName, PointSpec, RunConfig, TableSpec};

pub const EVAL_SCHEMA: &str = "halfspace.eval.v1";
pub const SIMULATE_SCHEMA: &str = "halfspace.simulate.v1";
pub const PDE_SCHEMA: &str = "halfspace.pde.v1";
pub const VERIFY_SCHEMA: &str = "halfspace.verify.v1";

/// Failure of a run, split by exit code.
#[derive(Debug)]
pub enum RunError {
    /// Bad configuration or input point. Exit code 2.
    Config(String),
    /// Numerical failure during a valid run. Exit code 1.
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } | Error::OscillationTooFine { .. } | Error::Overflow(_) => {
                RunError::Numerical(e.to_string())
            }
            _ => RunError::Config(e.to_string()),
        }
    }
}

fn config<T>(msg: impl Into<String>) -> Result<T, RunError> {
    Err(RunError::Config(msg.into()))
}

/// A file (or stdout) to be written once the run has succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Lines for stderr.
    pub summary: Vec<String>,
    /// False when a verification suite failed.
    pub passed: bool,
}

/// Fixed 17-significant-digit rendering of a float.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        return "0.0000000000000000e0".into();
    }
    format!("{v:.16e}")
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, RunError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| RunError::Numerical(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| RunError::Numerical(e.to_string()))
}

/// Runs a validated configuration and returns its artifacts unwritten.
pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, RunError> {
    cfg.quad.validate()?;
    cfg.mc.validate()?;
    match cfg.command {
        Command::Eval => eval(cfg),
        Command::Table => table(cfg),
        Command::Verify => verify(cfg),
        Command::Simulate => simulate(cfg),
        Command::PdeCheck => pde_check(cfg),
    }
}

fn boundary_point(p: &ModelParams, spec: &PointSpec) -> Result<BoundaryPoint, RunError> {
    let n = p.n();
    let wall = match spec.wall {
        Some(w) => w,
        None if spec.y.first() == Some(&0.0) => Wall::Wall1,
        None if spec.y.len() == n && spec.y[n - 1] == 0.0 => Wall::Wall2,
        None => return config(format!("{}: y = {:?} lies on neither wall", spec.kernel.name(), spec.y)),
    };
    Ok(BoundaryPoint::new(wall, spec.y.clone())?)
}

fn time(spec: &PointSpec) -> Result<f64, RunError> {
    spec.t
        .ok_or_else(|| RunError::Config(format!("{} needs a time t", spec.kernel.name())))
}

fn closed(value: f64) -> KernelValue {
    KernelValue {
        value,
        abs_error: 0.0,
        route: Route::ClosedForm,
    }
}

/// Evaluates one kernel value.
pub fn evaluate(cfg: &RunConfig, spec: &PointSpec) -> Result<KernelValue, RunError> {
    let p = &cfg.params;
    let q = &cfg.quad;
    let n = p.n();
    if spec.x.len() != n {
        return config(format!("x has {} coordinates, expected n = {n}", spec.x.len()));
    }
    let needs_y = !matches!(spec.kernel, KernelName::WallLimit);
    if needs_y && spec.y.len() != n {
        return config(format!("y has {} coordinates, expected n = {n}", spec.y.len()));
    }
    let v = match spec.kernel {
        KernelName::Transition => transition_density(
            p,
            time(spec)?,
            &HyperPoint::new(spec.x.clone())?,
            &HyperPoint::new(spec.y.clone())?,
            q,
        )?,
        KernelName::Killed => killed_density(
            p,
            time(spec)?,
            &DomainPoint::new(spec.x.clone())?,
            &DomainPoint::new(spec.y.clone())?,
            q,
        )?,
        KernelName::Potential => potential(
            p,
            &HyperPoint::new(spec.x.clone())?,
            &HyperPoint::new(spec.y.clone())?,
            q,
        )?,
        KernelName::Green => green(
            p,
            &DomainPoint::new(spec.x.clone())?,
            &DomainPoint::new(spec.y.clone())?,
            q,
        )?,
        KernelName::GlobalPoisson => closed(global_poisson(p, &HyperPoint::new(spec.x.clone())?, &spec.y)?),
        KernelName::Poisson => poisson_boundary(p, &DomainPoint::new(spec.x.clone())?, &boundary_point(p, spec)?, q)?,
        KernelName::LambdaPoisson => {
            lambda_poisson(p, &DomainPoint::new(spec.x.clone())?, &boundary_point(p, spec)?, q)?
        }
        KernelName::WallLimit => {
            let kind = match spec.limit {
                Some(LimitName::Wall1) => WallLimitKind::Wall1(BoundaryPoint::wall1(spec.y.clone())?),
                Some(LimitName::Wall2) => WallLimitKind::Wall2(BoundaryPoint::wall2(spec.y.clone())?),
                Some(LimitName::Infinity) => match spec.y.first() {
                    Some(&y1) => WallLimitKind::Infinity { y1 },
                    None => return config("the infinity limit needs y = [y1]"),
                },
                Some(LimitName::Diagonal) => WallLimitKind::Diagonal,
                None => return config("wall-limit needs limit = wall1 | wall2 | infinity | diagonal"),
            };
            closed(wall_limit(p, &kind, &DomainPoint::new(spec.x.clone())?, q)?)
        }
    };
    Ok(v)
}

fn eval_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["schema", "kernel", "n", "mu", "lambda", "t"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=n).map(|k| format!("x{k}")));
    h.extend((1..=n).map(|k| format!("y{k}")));
    h.extend(["value", "abs_error", "route"].iter().map(|s| s.to_string()));
    h
}

fn eval_row(cfg: &RunConfig, spec: &PointSpec, v: &KernelValue) -> Vec<String> {
    let p = &cfg.params;
    let mut r = vec![
        EVAL_SCHEMA.to_string(),
        spec.kernel.name().to_string(),
        p.n().to_string(),
        num(p.mu()),
        num(p.lambda()),
        spec.t.map(num).unwrap_or_default(),
    ];
    r.extend(spec.x.iter().map(|&c| num(c)));
    r.extend((0..p.n()).map(|k| spec.y.get(k).map(|&c| num(c)).unwrap_or_default()));
    r.extend([num(v.value), num(v.abs_error), v.route.to_string()]);
    r
}

fn rows_for(cfg: &RunConfig, specs: &[PointSpec]) -> Result<Outcome, RunError> {
    let values: Vec<KernelValue> = specs.par_iter().map(|s| evaluate(cfg, s)).collect::<Result<_, _>>()?;
    let rows: Vec<Vec<String>> = specs.iter().zip(&values).map(|(s, v)| eval_row(cfg, s, v)).collect();
    let summary = specs
        .iter()
        .zip(&values)
        .map(|(s, v)| {
            format!(
                "{} = {:.6} ± {:.1e} ({})",
                s.kernel.name(),
                v.value,
                v.abs_error,
                v.route
            )
        })
        .collect();
    Ok(Outcome {
        artifacts: vec![Artifact {
            path: cfg.out.clone(),
            contents: csv_text(&eval_header(cfg.params.n()), &rows)?,
        }],
        summary,
        passed: true,
    })
}

fn eval(cfg: &RunConfig) -> Result<Outcome, RunError> {
    if cfg.points.is_empty() {
        return config("eval needs at least one point");
    }
    rows_for(cfg, &cfg.points)
}

/// Points of a `table` sweep, in output order.
pub fn table_points(spec: &TableSpec) -> Result<Vec<PointSpec>, RunError> {
    if spec.points < 2 || !(spec.hi > spec.lo) || (spec.log && !(spec.lo > 0.0)) {
        return config(format!(
            "table needs points ≥ 2 and lo < hi (lo > 0 on a log grid), got {} points on [{}, {}]",
            spec.points, spec.lo, spec.hi
        ));
    }
    let grid = (0..spec.points).map(|k| {
        let s = k as f64 / (spec.points - 1) as f64;
        if spec.log {
            (spec.lo.ln() + s * (spec.hi / spec.lo).ln()).exp()
        } else {
            spec.lo + s * (spec.hi - spec.lo)
        }
    });
    let target = spec.vary.as_str();
    let coordinate =
        |prefix: char| -> Option<usize> { target.strip_prefix(prefix)?.parse::<usize>().ok().filter(|&k| k >= 1) };
    grid.map(|v| {
        let mut p = spec.base.clone();
        if target == "t" {
            p.t = Some(v);
        } else if let Some(k) = coordinate('x').filter(|&k| k <= p.x.len()) {
            p.x[k - 1] = v;
        } else if let Some(k) = coordinate('y').filter(|&k| k <= p.y.len()) {
            p.y[k - 1] = v;
        } else {
            return config(format!("cannot vary {target:?}; use t, x<k> or y<k>"));
        }
        Ok(p)
    })
    .collect()
}

fn table(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let Some(spec) = &cfg.table else {
        return config("table needs a [table] section");
    };
    let mut out = rows_for(cfg, &table_points(spec)?)?;
    out.summary = vec![format!(
        "{} rows of {} over {}",
        spec.points,
        spec.base.kernel.name(),
        spec.vary
    )];
    Ok(out)
}

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    schema: &'static str,
    pass: bool,
    criteria: Vec<&'a str>,
    options: &'a VerifyOptions,
    reports: &'a [CriterionReport],
}

fn verify(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut suites: Vec<Suite> = Vec::new();
    for name in &cfg.verify.suites {
        if name == "all" {
            suites.extend(Suite::ALL);
        } else {
            suites.push(parse_suite(name)?);
        }
    }
    if suites.is_empty() {
        return config("verify needs at least one suite");
    }
    let opts = VerifyOptions {
        quad: cfg.quad,
        mc: cfg.mc,
        audit_samples: cfg.verify.audit_samples,
        audit_seed: cfg.verify.audit_seed,
    };
    let reports: Vec<CriterionReport> = suites.iter().map(|&s| run_suite(s, &opts)).collect::<Result<_, _>>()?;
    let pass = reports.iter().all(|r| r.pass);
    let report = VerifyReport {
        schema: VERIFY_SCHEMA,
        pass,
        criteria: reports.iter().map(|r| r.id.as_str()).collect(),
        options: &opts,
        reports: &reports,
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| RunError::Numerical(e.to_string()))?;
    json.push('\n');
    let summary = reports
        .iter()
        .map(|r| {
            format!(
                "{} {} {} ({:.2} s)",
                r.id,
                if r.pass { "PASS" } else { "FAIL" },
                r.suite,
                r.runtime_s
            )
        })
        .collect();
    Ok(Outcome {
        artifacts: vec![Artifact {
            path: cfg.out.clone(),
            contents: json,
        }],
        summary,
        passed: pass,
    })
}

#[derive(Debug, Serialize)]
struct SimulateSummary<'a> {
    schema: &'static str,
    estimator: Estimator,
    params: &'a ModelParams,
    mc: &'a PathConfig,
    x: &'a [f64],
    counts: Option<ExitCounts>,
    notes: Vec<String>,
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let Some(spec) = &cfg.simulate else {
        return config("simulate needs a [simulate] section");
    };
    let p = &cfg.params;
    let x = DomainPoint::new(spec.x.clone())?;
    let header: Vec<String> = [
        "schema",
        "estimator",
        "quantity",
        "lo",
        "hi",
        "value",
        "stderr",
        "n",
        "seed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let row = |estimator: &str, quantity: &str, lo: Option<f64>, hi: Option<f64>, e: &Estimate| {
        vec![
            SIMULATE_SCHEMA.to_string(),
            estimator.to_string(),
            quantity.to_string(),
            lo.map(num).unwrap_or_default(),
            hi.map(num).unwrap_or_default(),
            num(e.value),
            num(e.stderr),
            e.n.to_string(),
            e.seed.to_string(),
        ]
    };
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    let mut counts = None;
    match spec.estimator {
        Estimator::Exit | Estimator::Histogram => {
            let hist = match spec.estimator {
                Estimator::Histogram => {
                    let Some(h) = &spec.histogram else {
                        return config("the histogram estimator needs a [simulate.histogram] section");
                    };
                    if h.coordinate == 0 || h.coordinate > p.n() || h.bins == 0 || !(h.hi > h.lo) {
                        return config(format!("bad histogram {h:?}"));
                    }
                    Some(Binning {
                        wall: h.wall,
                        axis: h.coordinate - 1,
                        lo: h.lo,
                        hi: h.hi,
                        bins: h.bins,
                    })
                }
                _ => None,
            };
            let records = sample_paths(p, &x, &cfg.mc)?;
            let c = ExitCounts::of(&records);
            counts = Some(c);
            let uncensored = c.wall1 + c.wall2;
            if uncensored == 0 {
                return Err(RunError::Numerical("every path was censored".into()));
            }
            let seed = cfg.mc.seed;
            match hist {
                None => {
                    for name in ["wall1", "wall2"] {
                        let share: Vec<f64> = records
                            .iter()
                            .filter(|r| r.wall != ExitWall::Censored)
                            .map(|r| if wall_name(r) == name { 1.0 } else { 0.0 })
                            .collect();
                        let e = Estimate::from_samples(&share, seed);
                        rows.push(row("exit", name, None, None, &e));
                    }
                }
                Some(b) => {
                    let h = histogram_from(&records, &b, seed);
                    for (k, e) in h.mass.iter().enumerate() {
                        rows.push(row("histogram", "mass", Some(h.edges[k]), Some(h.edges[k + 1]), e));
                    }
                    if !h.empty_bins.is_empty() {
                        notes.push(format!("empty bins: {:?}", h.empty_bins));
                    }
                    notes.push(format!("{} exits on the wall fell outside the window", h.outside));
                }
            }
            if c.censored > 0 {
                notes.push(format!("{} of {} paths censored at t_max", c.censored, c.total()));
            }
        }
        Estimator::Occupation => {
            let Some(t) = spec.t else {
                return config("the occupation estimator needs t");
            };
            if spec.cells.is_empty() {
                return config("the occupation estimator needs at least one cell");
            }
            for c in &spec.cells {
                if c.lo.len() != p.n() || c.hi.len() != p.n() {
                    return config(format!("cell {c:?} does not have n = {} coordinates", p.n()));
                }
            }
            let est = estimate_occupation(p, &x, t, &spec.cells, &cfg.mc)?;
            for (k, e) in est.iter().enumerate() {
                rows.push(row("occupation", &format!("cell{}", k + 1), None, None, e));
            }
        }
    }
    let summary_doc = SimulateSummary {
        schema: SIMULATE_SCHEMA,
        estimator: spec.estimator,
        params: p,
        mc: &cfg.mc,
        x: &spec.x,
        counts,
        notes: notes.clone(),
    };
    let mut json = serde_json::to_string_pretty(&summary_doc).map_err(|e| RunError::Numerical(e.to_string()))?;
    json.push('\n');
    let csv = csv_text(&header, &rows)?;
    let mut summary = notes;
    let artifacts = match &cfg.out {
        Some(path) => vec![
            Artifact {
                path: Some(path.clone()),
                contents: csv,
            },
            Artifact {
                path: Some(sidecar(path)),
                contents: json,
            },
        ],
        None => {
            summary.push(json);
            vec![Artifact {
                path: None,
                contents: csv,
            }]
        }
    };
    Ok(Outcome {
        artifacts,
        summary,
        passed: true,
    })
}

fn wall_name(r: &ExitRecord) -> &'static str {
    match r.wall {
        ExitWall::Wall1 => "wall1",
        ExitWall::Wall2 => "wall2",
        ExitWall::Censored => "censored",
    }
}

/// `runs/exit.csv` → `runs/exit.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn pde_check(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let Some(spec) = &cfg.pde else {
        return config("pde-check needs a [pde] section");
    };
    if spec.points.is_empty() || spec.h.is_empty() || spec.panels == 0 {
        return config("pde-check needs points, steps h and panels > 0");
    }
    let p = cfg.params;
    let q = cfg.quad;
    let panels = spec.panels;
    let field = spec.field;
    if field == FieldName::Wall1Mass && p.lambda() != 0.0 {
        return config("the wall1-mass field solves the equation with lambda = 0");
    }
    let u = |c: &[f64]| -> halfspace::error::Result<f64> {
        let z = DomainPoint::new(c.to_vec())?;
        match field {
            FieldName::Wall1Mass => wall_mass_fixed(
                &p,
                &z,
                Wall::Wall1,
                |y| Ok(poisson_boundary(&p, &z, y, &q)?.value),
                panels,
            ),
            FieldName::LambdaMass => {
                let mut s = 0.0;
                for w in [Wall::Wall1, Wall::Wall2] {
                    s += wall_mass_fixed(&p, &z, w, |y| Ok(lambda_poisson(&p, &z, y, &q)?.value), panels)?;
                }
                Ok(s)
            }
        }
    };
    let mut header: Vec<String> = ["schema", "field", "n", "mu", "lambda"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=p.n()).map(|k| format!("x{k}")));
    header.extend(
        ["h", "residual", "relative", "diffusion", "drift", "killing"]
            .iter()
            .map(|s| s.to_string()),
    );
    let jobs: Vec<(&Vec<f64>, f64)> = spec
        .points
        .iter()
        .flat_map(|x| spec.h.iter().map(move |&h| (x, h)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(x, h)| -> Result<_, RunError> {
            if x.len() != p.n() {
                return config(format!("point {x:?} does not have n = {} coordinates", p.n()));
            }
            Ok(pde_residual(&p, u, &DomainPoint::new(x.to_vec())?, *h)?)
        })
        .collect::<Result<_, _>>()?;
    let field_name = match field {
        FieldName::Wall1Mass => "wall1-mass",
        FieldName::LambdaMass => "lambda-mass",
    };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for ((x, h), r) in jobs.iter().zip(&results) {
        let mut row = vec![
            PDE_SCHEMA.to_string(),
            field_name.to_string(),
            p.n().to_string(),
            num(p.mu()),
            num(p.lambda()),
        ];
        row.extend(x.iter().map(|&c| num(c)));
        row.extend([
            num(*h),
            num(r.residual),
            num(r.relative()),
            num(r.diffusion),
            num(r.drift),
            num(r.killing),
        ]);
        rows.push(row);
        let mut line = String::new();
        let _ = write!(line, "x = {x:?}, h = {h:e}: relative residual {:.3e}", r.relative());
        summary.push(line);
    }
    Ok(Outcome {
        artifacts: vec![Artifact {
            path: cfg.out.clone(),
            contents: csv_text(&header, &rows)?,
        }],
        summary,
        passed: true,
    })
}
