//! Subcommands. Each one writes its artifacts and reports whether the checks it makes passed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use layercraft_core::analysis::{
    l2, linf, mms_convergence, residual_report, stability_check, sweep, ResidualReport, NORM_NAMES,
};
use layercraft_core::expansion::{fmt_f64, CompatReport, Expansion, ExpansionBuilder};
use layercraft_core::full_solver::{solve_full, ProblemSpec};
use layercraft_core::mesh::{sample, Field, Grid, GridDescriptor};
use layercraft_core::reduced_solver::{ReducedSolver, CORNER_TOLERANCE};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Format, Resolved};

/// Largest acceptable stability ratio.
pub const STABILITY_BOUND: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    SolveFull,
    SolveReduced,
    Expand,
    VerifyResidual,
    Sweep,
    CheckCompat,
    Stability,
    Mms,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] layercraft_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// What a subcommand did.
#[derive(Debug, Default)]
pub struct Outcome {
    /// False when a verification threshold failed or the with-compat expansion was refused.
    pub verified: bool,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Artifacts<'a> {
    dir: &'a Path,
    formats: &'a [Format],
    outcome: Outcome,
}

impl Artifacts<'_> {
    fn put(&mut self, name: String, body: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn csv(&mut self, stem: &str, body: &str) -> Result<(), CliError> {
        if self.formats.contains(&Format::Csv) {
            self.put(format!("{stem}.csv"), body.as_bytes())?;
        }
        Ok(())
    }

    fn json(&mut self, stem: &str, value: &impl Serialize) -> Result<(), CliError> {
        if self.formats.contains(&Format::Json) {
            let mut s = serde_json::to_string_pretty(value).map_err(layercraft_core::Error::from)?;
            s.push('\n');
            self.put(format!("{stem}.json"), s.as_bytes())?;
        }
        Ok(())
    }

    fn note(&mut self, line: String) {
        self.outcome.summary.push(line);
    }
}

/// File stem for the `k`-th eps; the index is only added when there are several.
fn stem(base: &str, k: usize, count: usize) -> String {
    if count == 1 {
        base.to_string()
    } else {
        format!("{base}_eps{k}")
    }
}

fn field_csv(u: &Field) -> String {
    let g = u.grid();
    let mut s = String::from("x,y,psi\n");
    for j in 0..=g.n() {
        for i in 0..=g.n() {
            let _ = writeln!(s, "{},{},{}", fmt_f64(g.x(i)), fmt_f64(g.y(j)), fmt_f64(u.at(i, j)));
        }
    }
    s
}

#[derive(Serialize)]
struct FieldMeta {
    command: &'static str,
    eps: Option<f64>,
    b: [f64; 2],
    c: f64,
    grid: GridDescriptor,
    linf: f64,
    l2: f64,
    warnings: Vec<String>,
}

fn compat_csv(r: &CompatReport) -> String {
    let mut s = String::from("name,value,tolerance,passed\n");
    for c in &r.checks {
        let _ = writeln!(s, "\"{}\",{},{},{}", c.name, fmt_f64(c.value), fmt_f64(c.tolerance), c.passed);
    }
    s
}

fn compat_lines(r: &CompatReport) -> Vec<String> {
    r.failures().iter().map(|c| format!("{} = {:.6e} exceeds {:.3e}", c.name, c.value, c.tolerance)).collect()
}

fn residual_csv(reports: &[ResidualReport]) -> String {
    let mut s = String::from("eps,N,layer_resolved");
    for name in NORM_NAMES {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for r in reports {
        let _ = write!(s, "{},{},{}", fmt_f64(r.eps), r.grid.n, r.layer_resolved);
        for v in r.values() {
            s.push(',');
            if let Some(v) = v {
                s.push_str(&fmt_f64(v));
            }
        }
        s.push('\n');
    }
    s
}

/// Samples of every layer profile: edge terms along the stretched variable at three
/// tangential positions, corner terms along the diagonal `xi = eta`.
fn profiles_csv(exp: &Expansion) -> String {
    let mut s = String::from("term,t,s,value\n");
    let stretched: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
    for (prefix, terms) in [("v", &exp.v), ("w", &exp.w)] {
        for (k, p) in terms.iter().enumerate() {
            for t in [0.25, 0.5, 0.75] {
                for &xi in &stretched {
                    let _ = writeln!(s, "{prefix}{},{},{},{}", k + 1, fmt_f64(t), fmt_f64(xi), fmt_f64(p.eval(xi, t)));
                }
            }
        }
    }
    for (k, p) in exp.z.iter().enumerate() {
        for &xi in &stretched {
            let _ = writeln!(s, "z{},,{},{}", k + 2, fmt_f64(xi), fmt_f64(p.eval(xi, xi)));
        }
    }
    s
}

fn grid_for(r: &Resolved, spec: &ProblemSpec) -> Result<Grid, CliError> {
    Ok(r.config.mesh.grid_for(spec.eps, spec.b_min())?)
}

/// Writes the compat report of a refused expansion and marks the run unverified.
fn refused(a: &mut Artifacts, report: &CompatReport) -> Result<(), CliError> {
    a.csv("compat", &compat_csv(report))?;
    a.json("compat", report)?;
    a.note("compatibility conditions fail; the with-compat expansion is refused".into());
    for line in compat_lines(report) {
        a.note(line);
    }
    a.outcome.verified = false;
    Ok(())
}

pub fn run(cmd: Command, r: &Resolved, out_dir: &Path, jobs: usize) -> Result<Outcome, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io { path: out_dir.to_path_buf(), source })?;
    let mut a = Artifacts {
        dir: out_dir,
        formats: &r.config.outputs.formats,
        outcome: Outcome { verified: true, ..Outcome::default() },
    };
    match cmd {
        Command::SolveFull => solve_full_cmd(&mut a, r)?,
        Command::SolveReduced => solve_reduced_cmd(&mut a, r)?,
        Command::Expand => expand_cmd(&mut a, r)?,
        Command::VerifyResidual => verify_residual_cmd(&mut a, r)?,
        Command::Sweep => sweep_cmd(&mut a, r, jobs)?,
        Command::CheckCompat => check_compat_cmd(&mut a, r)?,
        Command::Stability => stability_cmd(&mut a, r)?,
        Command::Mms => mms_cmd(&mut a, r)?,
    }
    Ok(a.outcome)
}

fn solve_full_cmd(a: &mut Artifacts, r: &Resolved) -> Result<(), CliError> {
    for (k, &eps) in r.eps_list.iter().enumerate() {
        let spec = r.spec.with_eps(eps)?;
        let grid = grid_for(r, &spec)?;
        let sol = solve_full(&spec, &grid)?;
        let name = stem("solve_full", k, r.eps_list.len());
        a.csv(&name, &field_csv(&sol.psi))?;
        let meta = FieldMeta {
            command: "solve-full",
            eps: Some(eps),
            b: spec.b,
            c: spec.c,
            grid: grid.descriptor(),
            linf: linf(&sol.psi),
            l2: l2(&sol.psi),
            warnings: sol.warnings.clone(),
        };
        a.json(&name, &meta)?;
        a.note(format!("eps = {eps}: max |psi_h| = {:.6e}", meta.linf));
        for w in sol.warnings {
            a.note(format!("warning: {w}"));
        }
    }
    Ok(())
}

fn solve_reduced_cmd(a: &mut Artifacts, r: &Resolved) -> Result<(), CliError> {
    let grid = grid_for(r, &r.spec)?;
    let f = sample(&grid, |x, y| (r.spec.f)(x, y))?;
    let psi = ReducedSolver::new(&grid, r.spec.b, r.spec.c)?.solve(&f, &r.reduced, CORNER_TOLERANCE)?;
    a.csv("solve_reduced", &field_csv(&psi))?;
    let meta = FieldMeta {
        command: "solve-reduced",
        eps: None,
        b: r.spec.b,
        c: r.spec.c,
        grid: grid.descriptor(),
        linf: linf(&psi),
        l2: l2(&psi),
        warnings: Vec::new(),
    };
    a.json("solve_reduced", &meta)?;
    a.note(format!("max |psi_0| = {:.6e}", meta.linf));
    Ok(())
}

/// Builds the expansion, or records the refusal and returns `None`.
fn build(a: &mut Artifacts, r: &Resolved, spec: &ProblemSpec, grid: &Grid) -> Result<Option<(ExpansionBuilder, Expansion)>, CliError> {
    let builder = ExpansionBuilder::new(spec, grid, r.config.expansion.options)?;
    match builder.build(spec.eps, r.config.expansion.variant) {
        Ok(exp) => Ok(Some((builder, exp))),
        Err(layercraft_core::Error::CompatibilityRefused(report)) => {
            refused(a, &report)?;
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn expand_cmd(a: &mut Artifacts, r: &Resolved) -> Result<(), CliError> {
    for (k, &eps) in r.eps_list.iter().enumerate() {
        let spec = r.spec.with_eps(eps)?;
        let grid = grid_for(r, &spec)?;
        let Some((_, exp)) = build(a, r, &spec, &grid)? else { return Ok(()) };
        let name = stem("expansion", k, r.eps_list.len());
        let mut body = Vec::new();
        exp.write_fields_csv(&mut body)?;
        if a.formats.contains(&Format::Csv) {
            a.put(format!("{name}.csv"), &body)?;
        }
        a.json(&name, &exp.metadata())?;
        if r.config.outputs.emit_profiles {
            a.put(format!("{}.csv", stem("profiles", k, r.eps_list.len())), profiles_csv(&exp).as_bytes())?;
        }
        a.note(format!(
            "eps = {eps}: {} expansion with {} edge and {} corner terms",
            exp.variant.as_str(),
            exp.v.len() + exp.w.len(),
            exp.z.len()
        ));
        for n in &exp.notes {
            a.note(format!("note: {n}"));
        }
    }
    Ok(())
}

fn verify_residual_cmd(a: &mut Artifacts, r: &Resolved) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for &eps in &r.eps_list {
        let spec = r.spec.with_eps(eps)?;
        let grid = grid_for(r, &spec)?;
        let Some((builder, exp)) = build(a, r, &spec, &grid)? else { return Ok(()) };
        let psi_h = solve_full(&spec, &grid)?.psi;
        let rep = residual_report(&builder, &exp, Some(&psi_h))?;
        a.note(format!(
            "eps = {eps}: ||f - L Psi||_L2 = {:.6e}, ||Psi||_inf(boundary) = {:.6e}, ||psi_h - Psi||_inf = {:.6e}",
            rep.interior_l2,
            rep.boundary_linf,
            rep.error_linf.unwrap_or(f64::NAN)
        ));
        reports.push(rep);
    }
    a.csv("residual", &residual_csv(&reports))?;
    a.json("residual", &reports)?;
    Ok(())
}

fn sweep_cmd(a: &mut Artifacts, r: &Resolved, jobs: usize) -> Result<(), CliError> {
    let e = &r.config.expansion;
    let report = match sweep(&r.spec, &r.config.mesh, &r.eps_list, e.variant, e.include_full_solve, e.options, jobs) {
        Ok(rep) => rep,
        Err(layercraft_core::Error::CompatibilityRefused(report)) => return refused(a, &report),
        Err(err) => return Err(err.into()),
    };
    a.csv("sweep", &report.to_csv())?;
    a.json("sweep", &report)?;
    for s in &report.slopes {
        let line = match (&s.fit, &s.note) {
            (Some(f), _) => format!("{}: slope {:.3} (predicted {})", s.norm, f.slope, s.predicted),
            (None, Some(n)) => format!("{}: no fit ({n})", s.norm),
            (None, None) => format!("{}: no fit", s.norm),
        };
        a.note(format!("{} {line}", if s.passed { "PASS" } else { "FAIL" }));
    }
    a.outcome.verified = report.passed;
    Ok(())
}

fn check_compat_cmd(a: &mut Artifacts, r: &Resolved) -> Result<(), CliError> {
    let grid = grid_for(r, &r.spec)?;
    let report = ExpansionBuilder::new(&r.spec, &grid, r.config.expansion.options)?.compat_report()?;
    a.csv("compat", &compat_csv(&report))?;
    a.json("compat", &report)?;
    if report.passed {
        a.note("all compatibility conditions hold".into());
    } else {
        for line in compat_lines(&report) {
            a.note(line);
        }
    }
    a.outcome.verified = report.passed;
    Ok(())
}

fn stability_cmd(a: &mut Artifacts, r: &Resolved) -> Result<(), CliError> {
    let mut reports = Vec::new();
    let mut s = String::from("eps,N,ratio,energy_defect,max_spacing\n");
    for &eps in &r.eps_list {
        let spec = r.spec.with_eps(eps)?;
        let grid = grid_for(r, &spec)?;
        let rep = stability_check(&spec, &grid)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(eps),
            grid.n(),
            fmt_f64(rep.ratio),
            fmt_f64(rep.energy_defect),
            fmt_f64(rep.max_spacing)
        );
        let ok = rep.ratio <= STABILITY_BOUND;
        a.note(format!("{} eps = {eps}: stability ratio {:.4} (bound {STABILITY_BOUND})", if ok { "PASS" } else { "FAIL" }, rep.ratio));
        a.outcome.verified &= ok;
        reports.push(rep);
    }
    a.csv("stability", &s)?;
    a.json("stability", &reports)?;
    Ok(())
}

fn mms_cmd(a: &mut Artifacts, r: &Resolved) -> Result<(), CliError> {
    let mms = r.config.mms.as_ref().ok_or_else(|| ConfigError {
        pointer: "mms".into(),
        message: "the mms subcommand needs an `mms` section".into(),
    })?;
    let psi_star = r.psi_star.as_ref().ok_or_else(|| ConfigError {
        pointer: "problem.psi_star".into(),
        message: "the mms subcommand needs an exact solution".into(),
    })?;
    let exact = |x: f64, y: f64| psi_star.eval_or_nan(x, y);
    let report = mms_convergence(mms.solver, &r.spec, &r.reduced, &exact, &mms.n_list)?;
    a.csv("mms", &report.to_csv())?;
    a.json("mms", &report)?;
    let threshold = mms.threshold();
    match &report.order_linf {
        Some(fit) => {
            let ok = fit.slope >= threshold;
            a.note(format!("{} L-infinity order {:.3} (at least {threshold})", if ok { "PASS" } else { "FAIL" }, fit.slope));
            a.outcome.verified = ok;
        }
        None => {
            let ok = report.local_orders.iter().all(|&p| p >= threshold);
            a.note(format!(
                "{} local orders {:?} (at least {threshold})",
                if ok { "PASS" } else { "FAIL" },
                report.local_orders
            ));
            a.outcome.verified = ok;
        }
    }
    Ok(())
}
