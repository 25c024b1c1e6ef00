//! The clamped fourth-order problem
//! `eps Delta^2 psi + (b . grad) Delta psi - c Delta psi = f`, `psi = g1`, `d_n psi = g2`.
//!
//! `g2` is the derivative along the outward normal.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fd_ops::{discrete_full_operator, embed_interior, interior_values, NormalData, StencilOperator};
use crate::mesh::{sample, Field, Grid};
use crate::sparse::Factored;

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub b: [f64; 2],
    pub c: f64,
    pub eps: f64,
    pub f: ScalarFn,
    /// Dirichlet data; `None` means zero.
    pub g1: Option<ScalarFn>,
    /// Outward normal derivative; `None` means zero.
    pub g2: Option<ScalarFn>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("b", &self.b)
            .field("c", &self.c)
            .field("eps", &self.eps)
            .field("g1", &self.g1.is_some())
            .field("g2", &self.g2.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(b: [f64; 2], c: f64, eps: f64, f: ScalarFn) -> Result<ProblemSpec> {
        let spec = ProblemSpec { b, c, eps, f, g1: None, g2: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_boundary(mut self, g1: Option<ScalarFn>, g2: Option<ScalarFn>) -> ProblemSpec {
        self.g1 = g1;
        self.g2 = g2;
        self
    }

    pub fn with_eps(&self, eps: f64) -> Result<ProblemSpec> {
        let mut s = self.clone();
        s.eps = eps;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b[0] > 0.0 && self.b[1] > 0.0 && self.b.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidArgument(format!("b must be positive, got {:?}", self.b)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!("c must be positive, got {}", self.c)));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {}", self.eps)));
        }
        Ok(())
    }

    pub fn b_min(&self) -> f64 {
        self.b[0].min(self.b[1])
    }

    fn dirichlet_field(&self, grid: &Grid) -> Result<Field> {
        let n = grid.n();
        let mut out = Field::zeros(grid);
        if let Some(g1) = &self.g1 {
            let full = sample(grid, |x, y| g1(x, y))?;
            for j in 0..=n {
                for i in 0..=n {
                    if grid.is_boundary(i, j) {
                        out.set(i, j, full.at(i, j));
                    }
                }
            }
        }
        Ok(out)
    }

    fn normal_data(&self, grid: &Grid) -> NormalData {
        match &self.g2 {
            Some(g2) => NormalData::from_fn(grid, |_, x, y| g2(x, y)),
            None => NormalData::zeros(grid),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullSolution {
    pub psi: Field,
    pub warnings: Vec<String>,
}

pub fn full_operator(spec: &ProblemSpec, grid: &Grid) -> Result<StencilOperator> {
    spec.validate()?;
    discrete_full_operator(grid, spec.eps, spec.b, spec.c)
}

/// Warns when the grid cannot resolve layers of width `eps`.
pub fn resolution_warnings(spec: &ProblemSpec, grid: &Grid) -> Vec<String> {
    let h = grid.min_spacing();
    if h > 0.5 * spec.eps {
        vec![format!(
            "finest spacing {h:.3e} exceeds eps/2 = {:.3e}; boundary layers are under-resolved",
            0.5 * spec.eps
        )]
    } else {
        Vec::new()
    }
}

pub fn solve_full(spec: &ProblemSpec, grid: &Grid) -> Result<FullSolution> {
    let f = sample(grid, |x, y| (spec.f)(x, y))?;
    let psi = solve_full_with_rhs(spec, grid, &f)?;
    Ok(FullSolution { psi, warnings: resolution_warnings(spec, grid) })
}

/// Full solve with the right-hand side given as nodal values (interior entries used).
pub fn solve_full_with_rhs(spec: &ProblemSpec, grid: &Grid, rhs: &Field) -> Result<Field> {
    let op = full_operator(spec, grid)?;
    let boundary = spec.dirichlet_field(grid)?;
    let g = spec.normal_data(grid);
    let sys = op.interior_system(&boundary, &g)?;
    let b: Vec<f64> = interior_values(rhs).iter().zip(&sys.offset).map(|(r, o)| r - o).collect();
    let x = Factored::new(sys.matrix)?.solve(&b)?;
    let mut psi = embed_interior(grid, &x);
    for (v, bnd) in psi.values_mut().iter_mut().zip(boundary.values()) {
        *v += bnd;
    }
    Ok(psi)
}

/// `L_h u` at the interior nodes, using the problem's normal data for the ghosts.
pub fn apply_full_operator(spec: &ProblemSpec, u: &Field) -> Result<Vec<f64>> {
    full_operator(spec, u.grid())?.apply(u, &spec.normal_data(u.grid()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{shishkin_grid, uniform_grid};

    #[test]
    fn rejects_invalid_parameters() {
        let f: ScalarFn = Arc::new(|_, _| 1.0);
        assert!(ProblemSpec::new([1.0, 1.0], 1.0, 0.0, f.clone()).is_err());
        assert!(ProblemSpec::new([1.0, 1.0], 1.0, 1.5, f.clone()).is_err());
        assert!(ProblemSpec::new([1.0, -1.0], 1.0, 0.5, f.clone()).is_err());
        assert!(ProblemSpec::new([1.0, 1.0], 0.0, 0.5, f.clone()).is_err());
        assert!(ProblemSpec::new([1.0, 1.0], 1.0, 1.0, f).is_ok());
    }

    #[test]
    fn warns_on_unresolved_layers() {
        let spec = ProblemSpec::new([1.0, 1.0], 1.0, 0.01, Arc::new(|_, _| 1.0)).unwrap();
        let coarse = uniform_grid(8).unwrap();
        assert_eq!(solve_full(&spec, &coarse).unwrap().warnings.len(), 1);
        let fine = shishkin_grid(128, 0.01, 1.0, 4.0).unwrap();
        assert!(solve_full(&spec, &fine).unwrap().warnings.is_empty());
    }

    #[test]
    fn solution_satisfies_discrete_equation() {
        let spec = ProblemSpec::new([1.0, 2.0], 0.5, 0.2, Arc::new(|x, y| (3.0 * x).sin() + y)).unwrap();
        let grid = uniform_grid(16).unwrap();
        let sol = solve_full(&spec, &grid).unwrap();
        let r = apply_full_operator(&spec, &sol.psi).unwrap();
        let f = sample(&grid, |x, y| (spec.f)(x, y)).unwrap();
        for (a, b) in r.iter().zip(interior_values(&f)) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn l2_bound_for_unit_load() {
        let spec = ProblemSpec::new([1.0, 1.0], 1.0, 0.1, Arc::new(|_, _| 1.0)).unwrap();
        let grid = uniform_grid(32).unwrap();
        let psi = solve_full(&spec, &grid).unwrap().psi;
        let w = grid.trapezoid_weights();
        let n = grid.n();
        let mut s = 0.0;
        for j in 0..=n {
            for i in 0..=n {
                s += w[i] * w[j] * psi.at(i, j).powi(2);
            }
        }
        let bound = 1.0 / (2.0 * std::f64::consts::PI.powi(2));
        assert!(s.sqrt() <= bound + 0.05);
    }
}
