//! The third-order limit problem `(b . grad) Delta psi - c Delta psi = f`.
//!
//! Dirichlet data are imposed on all four edges and Neumann data on the inflow edges
//! `x = 1` and `y = 1`. The unknowns are the interior nodal values; Neumann data enter
//! through ghosts when the Laplacian is evaluated on the inflow edges.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fd_ops::{discrete_reduced_operator_with, Closure, embed_interior, interior_values, Edge, NormalData, StencilOperator};
use crate::full_solver::{solve_full_with_rhs, ProblemSpec};
use crate::mesh::{Field, Grid};
use crate::sparse::Factored;

/// A function of one boundary coordinate, optionally with a known derivative.
#[derive(Clone)]
pub struct EdgeFn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for EdgeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("EdgeFn")
    }
}

impl EdgeFn {
    pub fn zero() -> EdgeFn {
        EdgeFn { f: Arc::new(|_| 0.0), df: Some(Arc::new(|_| 0.0)) }
    }

    /// Derivatives are approximated by fourth-order central differences.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> EdgeFn {
        EdgeFn { f: Arc::new(f), df: None }
    }

    pub fn with_derivative(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> EdgeFn {
        EdgeFn { f: Arc::new(f), df: Some(Arc::new(df)) }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match &self.df {
            Some(df) => df(t),
            None => {
                let h = 1e-3;
                let f = &self.f;
                (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
            }
        }
    }
}

/// Boundary data of the limit problem.
///
/// `phi1`, `phi2` are the values on `x = 0` and `x = 1` as functions of `y`; `kappa1`,
/// `kappa2` the values on `y = 0` and `y = 1` as functions of `x`; `phi3 = psi_x(1, y)`
/// and `kappa3 = psi_y(x, 1)` are the Neumann data on the inflow edges.
#[derive(Debug, Clone)]
pub struct ReducedData {
    pub phi1: EdgeFn,
    pub phi2: EdgeFn,
    pub phi3: EdgeFn,
    pub kappa1: EdgeFn,
    pub kappa2: EdgeFn,
    pub kappa3: EdgeFn,
}

impl ReducedData {
    pub fn homogeneous() -> ReducedData {
        ReducedData {
            phi1: EdgeFn::zero(),
            phi2: EdgeFn::zero(),
            phi3: EdgeFn::zero(),
            kappa1: EdgeFn::zero(),
            kappa2: EdgeFn::zero(),
            kappa3: EdgeFn::zero(),
        }
    }

    /// Nodal Dirichlet values (interior entries zero); corners take the mean of both edges.
    pub fn dirichlet_field(&self, grid: &Grid) -> Field {
        let n = grid.n();
        let mut f = Field::zeros(grid);
        for k in 1..n {
            let t = grid.x(k);
            f.set(0, k, self.phi1.value(t));
            f.set(n, k, self.phi2.value(t));
            f.set(k, 0, self.kappa1.value(t));
            f.set(k, n, self.kappa2.value(t));
        }
        f.set(0, 0, 0.5 * (self.phi1.value(0.0) + self.kappa1.value(0.0)));
        f.set(n, 0, 0.5 * (self.phi2.value(0.0) + self.kappa1.value(1.0)));
        f.set(0, n, 0.5 * (self.phi1.value(1.0) + self.kappa2.value(0.0)));
        f.set(n, n, 0.5 * (self.phi2.value(1.0) + self.kappa2.value(1.0)));
        f
    }

    /// Outward normal derivatives on the inflow edges; zero elsewhere.
    pub fn neumann_data(&self, grid: &Grid) -> NormalData {
        NormalData::from_fn(grid, |e, x, y| match e {
            Edge::Right => self.phi3.value(y),
            Edge::Top => self.kappa3.value(x),
            _ => 0.0,
        })
    }
}

pub const CORNER_LABELS: [&str; 8] = [
    "phi1(0) = kappa1(0)",
    "phi1(1) = kappa2(0)",
    "kappa1(1) = phi2(0)",
    "phi2(1) = kappa2(1)",
    "kappa1'(1) = phi3(0)",
    "phi1'(1) = kappa3(0)",
    "kappa2'(1) = phi3(1)",
    "phi2'(1) = kappa3(1)",
];

/// The eight corner equalities that smooth boundary data must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerCompatReport {
    /// Left side minus right side of each equality, in the order of [`CORNER_LABELS`].
    pub residuals: [f64; 8],
    pub tolerance: f64,
    pub passed: bool,
}

impl CornerCompatReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn failures(&self) -> Vec<(&'static str, f64)> {
        CORNER_LABELS
            .iter()
            .zip(self.residuals)
            .filter(|(_, r)| r.abs() > self.tolerance)
            .map(|(l, r)| (*l, r))
            .collect()
    }
}

pub fn check_corner_compatibility(data: &ReducedData, tolerance: f64) -> CornerCompatReport {
    let d = data;
    let residuals = [
        d.phi1.value(0.0) - d.kappa1.value(0.0),
        d.phi1.value(1.0) - d.kappa2.value(0.0),
        d.kappa1.value(1.0) - d.phi2.value(0.0),
        d.phi2.value(1.0) - d.kappa2.value(1.0),
        d.kappa1.derivative(1.0) - d.phi3.value(0.0),
        d.phi1.derivative(1.0) - d.kappa3.value(0.0),
        d.kappa2.derivative(1.0) - d.phi3.value(1.0),
        d.phi2.derivative(1.0) - d.kappa3.value(1.0),
    ];
    let passed = residuals.iter().all(|r| r.abs() <= tolerance);
    CornerCompatReport { residuals, tolerance, passed }
}

/// Default absolute tolerance on the corner equalities.
pub const CORNER_TOLERANCE: f64 = 1e-8;

/// A factored discretization of the limit operator, reusable for several right-hand sides.
#[derive(Debug, Clone)]
pub struct ReducedSolver {
    op: StencilOperator,
    factored: Factored,
    b: [f64; 2],
    c: f64,
}

impl ReducedSolver {
    /// `c = 0` is allowed; `b` must be positive.
    pub fn new(grid: &Grid, b: [f64; 2], c: f64) -> Result<ReducedSolver> {
        if !(b[0] > 0.0 && b[1] > 0.0) {
            return Err(Error::InvalidArgument(format!("b must be positive, got {b:?}")));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("c must be non-negative, got {c}")));
        }
        let op = discrete_reduced_operator_with(grid, b, c, Closure::Hermite)?;
        let sys = op.interior_system(&Field::zeros(grid), &NormalData::zeros(grid))?;
        let factored = Factored::new(sys.matrix)?;
        Ok(ReducedSolver { op, factored, b, c })
    }

    pub fn operator(&self) -> &StencilOperator {
        &self.op
    }

    pub fn b(&self) -> [f64; 2] {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Solves with right-hand side `rhs` (interior values used) after checking the corner
    /// equalities of `data` against `tolerance`.
    pub fn solve(&self, rhs: &Field, data: &ReducedData, tolerance: f64) -> Result<Field> {
        let report = check_corner_compatibility(data, tolerance);
        if !report.passed {
            return Err(Error::CornerCompatibility(Box::new(report)));
        }
        self.solve_unchecked(rhs, data)
    }

    pub fn solve_unchecked(&self, rhs: &Field, data: &ReducedData) -> Result<Field> {
        let grid = self.op.grid();
        if rhs.grid() != grid {
            return Err(Error::Dimension("right-hand side lives on a different grid".into()));
        }
        let boundary = data.dirichlet_field(grid);
        let neumann = data.neumann_data(grid);
        let offset = self.op.apply(&boundary, &neumann)?;
        let b: Vec<f64> = interior_values(rhs).iter().zip(&offset).map(|(r, o)| r - o).collect();
        let x = self.factored.solve(&b)?;
        let mut psi = embed_interior(grid, &x);
        for (v, bnd) in psi.values_mut().iter_mut().zip(boundary.values()) {
            *v += bnd;
        }
        Ok(psi)
    }

    /// Applies the discrete limit operator to a complete field with the Neumann data of `data`.
    pub fn apply(&self, u: &Field, data: &ReducedData) -> Result<Vec<f64>> {
        self.op.apply(u, &data.neumann_data(self.op.grid()))
    }
}

/// One-shot solve of the limit problem.
pub fn solve_reduced(grid: &Grid, b: [f64; 2], c: f64, f: &Field, data: &ReducedData) -> Result<Field> {
    ReducedSolver::new(grid, b, c)?.solve(f, data, CORNER_TOLERANCE)
}

/// Tiny viscosity used when the limit solve is replaced by a full solve.
pub const FALLBACK_EPSILON: f64 = 1e-6;

/// Leading-order outer solution `psi_0` with homogeneous data. With `fallback` set, the
/// full fourth-order problem is solved at `eps = 1e-6` instead.
pub fn solve_psi0(grid: &Grid, b: [f64; 2], c: f64, f: &Field, fallback: bool) -> Result<Field> {
    if !fallback {
        return solve_reduced(grid, b, c, f, &ReducedData::homogeneous());
    }
    let spec = ProblemSpec::new(b, c, FALLBACK_EPSILON, Arc::new(|_, _| 0.0))?;
    solve_full_with_rhs(&spec, grid, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{sample, uniform_grid};

    #[test]
    fn corner_report_flags_mismatch() {
        let mut d = ReducedData::homogeneous();
        d.phi1 = EdgeFn::with_derivative(|y| y, |_| 1.0);
        let r = check_corner_compatibility(&d, 1e-10);
        assert!(!r.passed);
        let fails: Vec<_> = r.failures().into_iter().map(|f| f.0).collect();
        assert_eq!(fails, vec![CORNER_LABELS[1], CORNER_LABELS[5]]);
    }

    #[test]
    fn solver_rejects_incompatible_data() {
        let grid = uniform_grid(8).unwrap();
        let mut d = ReducedData::homogeneous();
        d.kappa1 = EdgeFn::new(|x| x);
        let f = Field::zeros(&grid);
        assert!(matches!(solve_reduced(&grid, [1.0, 1.0], 1.0, &f, &d), Err(Error::CornerCompatibility(_))));
    }

    #[test]
    fn zero_reaction_is_allowed() {
        let grid = uniform_grid(8).unwrap();
        let f = sample(&grid, |x, y| x * y).unwrap();
        assert!(solve_reduced(&grid, [1.0, 2.0], 0.0, &f, &ReducedData::homogeneous()).is_ok());
        assert!(ReducedSolver::new(&grid, [0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn cubic_solution_is_reproduced() {
        // psi = x^2 y^2 (1 - x)(1 - y) has inflow Neumann data and vanishing Dirichlet data.
        // The discrete operators are exact on cubics only in part, so compare to a refined solve.
        let psi = |x: f64, y: f64| x * x * y * y * (1.0 - x) * (1.0 - y);
        let mut errs = Vec::new();
        for n in [16, 32] {
            let grid = uniform_grid(n).unwrap();
            // Delta psi = (2 - 6x) y^2 (1 - y) + x^2 (1 - x) (2 - 6y)
            let lap = |x: f64, y: f64| (2.0 - 6.0 * x) * y * y * (1.0 - y) + x * x * (1.0 - x) * (2.0 - 6.0 * y);
            let lap_x = |x: f64, y: f64| -6.0 * y * y * (1.0 - y) + (2.0 * x - 3.0 * x * x) * (2.0 - 6.0 * y);
            let lap_y = |x: f64, y: f64| (2.0 - 6.0 * x) * (2.0 * y - 3.0 * y * y) - 6.0 * x * x * (1.0 - x);
            let f = sample(&grid, |x, y| lap_x(x, y) + lap_y(x, y) - lap(x, y)).unwrap();
            let mut d = ReducedData::homogeneous();
            d.phi3 = EdgeFn::new(|y| -y * y * (1.0 - y));
            d.kappa3 = EdgeFn::new(|x| -x * x * (1.0 - x));
            let sol = solve_reduced(&grid, [1.0, 1.0], 1.0, &f, &d).unwrap();
            let exact = sample(&grid, psi).unwrap();
            errs.push(sol.values().iter().zip(exact.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())));
        }
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
    }
}
