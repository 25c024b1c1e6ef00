//! Run configuration.
//!
//! The file is strict JSON; unknown keys are rejected so that a typo such as
//! `epsilon_lst` fails loudly instead of silently falling back to a default. Errors
//! carry a dotted pointer to the offending entry.

use std::path::PathBuf;
use std::sync::Arc;

use layercraft_core::analysis::MmsTarget;
use layercraft_core::expansion::{ExpansionOptions, Variant};
use layercraft_core::expr::{parse, Expr};
use layercraft_core::full_solver::{ProblemSpec, ScalarFn};
use layercraft_core::mesh::{GridKind, MeshSpec};
use layercraft_core::reduced_solver::{EdgeFn, ReducedData};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("config error at `{pointer}`: {message}")]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    fn new(pointer: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { pointer: pointer.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub expansion: ExpansionConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub mms: Option<MmsConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub b: [f64; 2],
    pub c: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub epsilon_list: Option<Vec<f64>>,
    pub f: String,
    /// Dirichlet data on every edge.
    #[serde(default)]
    pub g1: Option<String>,
    /// Outward normal derivative on every edge.
    #[serde(default)]
    pub g2: Option<String>,
    /// Exact solution for `mms`.
    #[serde(default)]
    pub psi_star: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub options: ExpansionOptions,
    /// Also solve the full problem in `sweep` and measure `psi_h - Psi`.
    #[serde(default)]
    pub include_full_solve: bool,
}

fn default_variant() -> Variant {
    Variant::WithCompat
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { variant: default_variant(), options: ExpansionOptions::default(), include_full_solve: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Write sampled layer profiles next to the `expand` output.
    #[serde(default)]
    pub emit_profiles: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig { directory: default_directory(), formats: default_formats(), emit_profiles: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsConfig {
    pub solver: MmsTarget,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    /// Smallest acceptable L-infinity order; 1.8 for the full and 1.5 for the reduced solver.
    #[serde(default)]
    pub min_order: Option<f64>,
}

impl MmsConfig {
    pub fn threshold(&self) -> f64 {
        self.min_order.unwrap_or(match self.solver {
            MmsTarget::Full => 1.8,
            MmsTarget::Reduced => 1.5,
        })
    }
}

/// A validated configuration with its expressions compiled.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    /// Descending.
    pub eps_list: Vec<f64>,
    /// Problem at the first (largest) `eps`.
    pub spec: ProblemSpec,
    pub reduced: ReducedData,
    pub psi_star: Option<Expr>,
}

pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let pointer = if path == "." { "(root)".to_string() } else { path };
        ConfigError::new(&pointer, e.into_inner().to_string())
    })
}

fn compile(pointer: &str, src: &str) -> Result<Expr, ConfigError> {
    parse(src).map_err(|e| ConfigError::new(pointer, e.to_string()))
}

fn scalar(e: Expr) -> ScalarFn {
    Arc::new(move |x, y| e.eval_or_nan(x, y))
}

fn edge(e: &Expr, on: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> EdgeFn {
    let e = e.clone();
    EdgeFn::new(move |t| {
        let (x, y) = on(t);
        e.eval_or_nan(x, y)
    })
}

/// Limit-problem data from the same expressions as the full problem: `g1` on all four
/// edges, `g2` (outward normal derivative) on the inflow edges `x = 1` and `y = 1`.
fn reduced_data(g1: Option<&Expr>, g2: Option<&Expr>) -> ReducedData {
    let mut d = ReducedData::homogeneous();
    if let Some(g) = g1 {
        d.phi1 = edge(g, |t| (0.0, t));
        d.phi2 = edge(g, |t| (1.0, t));
        d.kappa1 = edge(g, |t| (t, 0.0));
        d.kappa2 = edge(g, |t| (t, 1.0));
    }
    if let Some(g) = g2 {
        d.phi3 = edge(g, |t| (1.0, t));
        d.kappa3 = edge(g, |t| (t, 1.0));
    }
    d
}

fn check_eps(pointer: &str, eps: f64) -> Result<(), ConfigError> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(ConfigError::new(pointer, format!("epsilon must lie in (0, 1], got {eps}")))
    }
}

impl RunConfig {
    pub fn resolve(self) -> Result<Resolved, ConfigError> {
        let p = &self.problem;
        let eps_list = match (p.epsilon, &p.epsilon_list) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new("problem", "give either `epsilon` or `epsilon_list`, not both"))
            }
            (None, None) => return Err(ConfigError::new("problem", "missing `epsilon` or `epsilon_list`")),
            (Some(e), None) => {
                check_eps("problem.epsilon", e)?;
                vec![e]
            }
            (None, Some(list)) => {
                if list.is_empty() {
                    return Err(ConfigError::new("problem.epsilon_list", "must not be empty"));
                }
                for (k, &e) in list.iter().enumerate() {
                    check_eps(&format!("problem.epsilon_list[{k}]"), e)?;
                    if k > 0 && e >= list[k - 1] {
                        return Err(ConfigError::new(
                            &format!("problem.epsilon_list[{k}]"),
                            format!("list must be strictly descending, but {e} follows {}", list[k - 1]),
                        ));
                    }
                }
                list.clone()
            }
        };
        for (k, &v) in p.b.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::new(&format!("problem.b[{k}]"), format!("must be positive, got {v}")));
            }
        }
        if !(p.c > 0.0 && p.c.is_finite()) {
            return Err(ConfigError::new("problem.c", format!("must be positive, got {}", p.c)));
        }
        let f = compile("problem.f", &p.f)?;
        let g1 = p.g1.as_deref().map(|s| compile("problem.g1", s)).transpose()?;
        let g2 = p.g2.as_deref().map(|s| compile("problem.g2", s)).transpose()?;
        let psi_star = p.psi_star.as_deref().map(|s| compile("problem.psi_star", s)).transpose()?;

        let m = &self.mesh;
        let min_n = if m.kind == GridKind::Shishkin { 8 } else { 4 };
        if m.n < min_n || m.n % 2 != 0 {
            return Err(ConfigError::new("mesh.N", format!("must be even and at least {min_n}, got {}", m.n)));
        }
        if !(m.sigma > 0.0 && m.sigma.is_finite()) {
            return Err(ConfigError::new("mesh.sigma", format!("must be positive, got {}", m.sigma)));
        }
        if self.outputs.formats.is_empty() {
            return Err(ConfigError::new("outputs.formats", "must name at least one of \"csv\", \"json\""));
        }
        if let Some(mms) = &self.mms {
            if mms.n_list.len() < 2 {
                return Err(ConfigError::new("mms.N_list", "needs at least two grids"));
            }
            for (k, &n) in mms.n_list.iter().enumerate() {
                if n < 4 || n % 2 != 0 {
                    return Err(ConfigError::new(&format!("mms.N_list[{k}]"), format!("must be even and at least 4, got {n}")));
                }
            }
        }

        let spec = ProblemSpec::new(p.b, p.c, eps_list[0], scalar(f))
            .map_err(|e| ConfigError::new("problem", e.to_string()))?
            .with_boundary(g1.clone().map(scalar), g2.clone().map(scalar));
        let reduced = reduced_data(g1.as_ref(), g2.as_ref());
        Ok(Resolved { config: self, eps_list, spec, reduced, psi_star })
    }
}

pub fn load(text: &str) -> Result<Resolved, ConfigError> {
    from_json(text)?.resolve()
}
