//! Construction of the asymptotic expansion.
//!
//! The outer terms `psi_0, psi_1, psi_2` come from limit-problem solves; every layer term
//! is an exponential polynomial solved exactly on its coefficients. The variant with
//! corner compatibility carries edge terms up to `eps^4` and corner terms up to `eps^4`;
//! the variant without it stops at `eps^3` with `psi_2 = 0`.
//!
//! Outer terms are kept as nodal values together with smooth fits of their normal
//! derivatives on `x = 0` and `y = 0`. The fits feed the Neumann matching of the next
//! layer term, so the matching holds exactly in the assembled expansion.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd_ops::{discrete_biharmonic_with, embed_interior, Closure, normal_derivative_trace, Edge, NormalData, StencilOperator};
use crate::full_solver::ProblemSpec;
use crate::linalg::constrained_lstsq;
use crate::mesh::{sample, Field, Grid, GridDescriptor};
use crate::profiles::cheb::basis_row;
use crate::profiles::{
    edge_operator_parts, expoly_add, expoly_dt, expoly_dxi, expoly_mul_scalar, realize_corner, realize_edge,
    solve_corner_profile, solve_edge_profile, ChebSeries, CornerNeumann, ExpPoly1D, ExpPoly2D, SolvabilityReport,
};
use crate::reduced_solver::{
    check_corner_compatibility, CornerCompatReport, EdgeFn, ReducedData, ReducedSolver, CORNER_TOLERANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Full expansion; needs the corner compatibility conditions.
    WithCompat,
    /// Shortened expansion that exists for every right-hand side.
    NoCompat,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::WithCompat => "with-compat",
            Variant::NoCompat => "no-compat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionOptions {
    /// Degree of the Chebyshev fits of outer-term traces.
    pub fit_degree: usize,
    /// Compatibility tolerance relative to `max |f|`.
    pub compat_tolerance: f64,
    /// Replace the limit solve for `psi_0` by a full solve at tiny `eps` (cross-checking only).
    pub fallback: bool,
    /// Degree of the tensor Chebyshev projection of outer terms before the biharmonic,
    /// capped at `N / 2`; 0 keeps the nodal stencil.
    pub outer_degree: usize,
}

/// Default relative tolerance of the compatibility checks.
pub const COMPAT_TOLERANCE: f64 = 2e-3;

/// Default degree of the outer-term projection. The central reduced scheme leaves
/// grid-scale oscillations that a nodal `Delta_h^2` would amplify by `h^-4`.
pub const OUTER_DEGREE: usize = 16;

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions { fit_degree: 12, compat_tolerance: COMPAT_TOLERANCE, fallback: false, outer_degree: OUTER_DEGREE }
    }
}

/// Smooth fits of `psi_x(0, y)` and `psi_y(x, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TraceFit {
    /// `psi_x(0, y)` as a function of `y`.
    pub x0: ChebSeries,
    /// `psi_y(x, 0)` as a function of `x`.
    pub y0: ChebSeries,
}

/// Fits the outflow normal derivatives of `psi` from order-4 one-sided differences.
///
/// The fits are weighted least squares with the endpoint values and slopes that the
/// boundary data determine imposed exactly, and with a common mixed derivative
/// `psi_xy(0, 0)` shared by both fits.
pub fn fit_traces(psi: &Field, data: &ReducedData, degree: usize) -> Result<TraceFit> {
    fit_traces_with(psi, data, degree, None)
}

/// As [`fit_traces`]; with `compatible = Some((b, c))` the corner compatibility conditions
/// are imposed as well, projecting the traces onto compatible data.
pub fn fit_traces_with(psi: &Field, data: &ReducedData, degree: usize, compatible: Option<([f64; 2], f64)>) -> Result<TraceFit> {
    let grid = psi.grid();
    let t = grid.nodes();
    let w = grid.trapezoid_weights();
    let tx: Vec<f64> = normal_derivative_trace(psi, Edge::Left, 4)?.into_iter().map(|v| -v).collect();
    let ty: Vec<f64> = normal_derivative_trace(psi, Edge::Bottom, 4)?.into_iter().map(|v| -v).collect();
    let m = degree + 1;
    let np = t.len();
    let mut a = DMatrix::zeros(2 * np, 2 * m);
    let mut b = DVector::zeros(2 * np);
    for k in 0..np {
        let sw = w[k].sqrt();
        let row = basis_row(t[k], degree, 0);
        for q in 0..m {
            a[(k, q)] = sw * row[q];
            a[(np + k, m + q)] = sw * row[q];
        }
        b[k] = sw * tx[k];
        b[np + k] = sw * ty[k];
    }
    // (series, order, t, value); series 0 is x0, 1 is y0.
    let conds = [
        (0, 0, 0.0, data.kappa1.derivative(0.0)),
        (0, 0, 1.0, data.kappa2.derivative(0.0)),
        (0, 1, 1.0, data.kappa3.derivative(0.0)),
        (1, 0, 0.0, data.phi1.derivative(0.0)),
        (1, 0, 1.0, data.phi2.derivative(0.0)),
        (1, 1, 1.0, data.phi3.derivative(0.0)),
    ];
    // Linear rows over both series: (weight on x0, weight on y0, order, t), value.
    let mut rows: Vec<(f64, f64, usize, f64, f64)> =
        conds.iter().map(|&(s, order, at, value)| if s == 0 { (1.0, 0.0, order, at, value) } else { (0.0, 1.0, order, at, value) }).collect();
    rows.push((1.0, -1.0, 1, 0.0, 0.0));
    if let Some(([b1, b2], _)) = compatible {
        // psi_xy(0,0) = 0, b1 psi_xxy + b2 psi_xyy = 0 at the origin, psi_xyy(0,1) = psi_xxy(1,0) = 0.
        rows.push((1.0, 0.0, 1, 0.0, 0.0));
        rows.push((b2, b1, 2, 0.0, 0.0));
        rows.push((1.0, 0.0, 2, 1.0, 0.0));
        rows.push((0.0, 1.0, 2, 1.0, 0.0));
    }
    let mut c = DMatrix::zeros(rows.len(), 2 * m);
    let mut d = DVector::zeros(rows.len());
    for (r, &(wx, wy, order, at, value)) in rows.iter().enumerate() {
        let row = basis_row(at, degree, order);
        for q in 0..m {
            c[(r, q)] = wx * row[q];
            c[(r, m + q)] = wy * row[q];
        }
        d[r] = value;
    }
    let x = constrained_lstsq(&a, &b, &c, &d);
    Ok(TraceFit {
        x0: ChebSeries::from_coeffs(x.rows(0, m).iter().copied().collect()),
        y0: ChebSeries::from_coeffs(x.rows(m, m).iter().copied().collect()),
    })
}

/// Corner derivatives of `psi_0` that enter the compatibility conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerDerivatives {
    pub xy_00: f64,
    pub xxy_00: f64,
    pub xyy_00: f64,
    pub xyy_01: f64,
    pub xxy_10: f64,
}

impl CornerDerivatives {
    pub fn from_traces(tr: &TraceFit) -> CornerDerivatives {
        let tx1 = tr.x0.derivative();
        let tx2 = tx1.derivative();
        let ty2 = tr.y0.nth_derivative(2);
        CornerDerivatives {
            xy_00: tx1.eval(0.0),
            xxy_00: ty2.eval(0.0),
            xyy_00: tx2.eval(0.0),
            xyy_01: tx2.eval(1.0),
            xxy_10: ty2.eval(1.0),
        }
    }
}

pub const CC_CORNER_Z3: &str = "(b.grad) psi0_xy(0,0) - c psi0_xy(0,0)";
pub const CC_CORNER_Z2: &str = "psi0_xy(0,0)";
pub const CC_XYY_01: &str = "psi0_xyy(0,1)";
pub const CC_XXY_10: &str = "psi0_xxy(1,0)";
pub const CC_F_01: &str = "f(0,1)";
pub const CC_F_10: &str = "f(1,0)";
pub const CC_F_00: &str = "f(0,0)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Values of the compatibility conditions and their verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatReport {
    pub checks: Vec<CompatCheck>,
    pub derivatives: CornerDerivatives,
    /// `max |f|` on the grid; all tolerances are relative to it.
    pub scale: f64,
    pub relative_tolerance: f64,
    pub passed: bool,
}

impl CompatReport {
    /// Evaluates every condition; `f_corners` holds `f(0,0), f(0,1), f(1,0)`.
    pub fn evaluate(
        d: CornerDerivatives,
        f_corners: [f64; 3],
        b: [f64; 2],
        c: f64,
        scale: f64,
        relative_tolerance: f64,
    ) -> CompatReport {
        let tol = relative_tolerance * scale;
        let mut checks = Vec::new();
        let mut push = |name: &str, value: f64| {
            checks.push(CompatCheck { name: name.to_string(), value, tolerance: tol, passed: value.abs() <= tol });
        };
        push(CC_CORNER_Z3, b[0] * d.xxy_00 + b[1] * d.xyy_00 - c * d.xy_00);
        push(CC_CORNER_Z2, d.xy_00);
        push(CC_XYY_01, d.xyy_01);
        push(CC_XXY_10, d.xxy_10);
        push(CC_F_01, f_corners[1]);
        push(CC_F_10, f_corners[2]);
        if b[0] == b[1] {
            push(CC_F_00, f_corners[0]);
        }
        let passed = checks.iter().all(|c| c.passed);
        CompatReport { checks, derivatives: d, scale, relative_tolerance, passed }
    }

    pub fn get(&self, name: &str) -> Option<&CompatCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&CompatCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Compatibility report for `psi_0` (nodal values on the grid) and the load `f`.
pub fn check_compatibility(
    psi0: &Field,
    f: &dyn Fn(f64, f64) -> f64,
    b: [f64; 2],
    c: f64,
    relative_tolerance: f64,
    fit_degree: usize,
) -> Result<CompatReport> {
    let tr = fit_traces(psi0, &ReducedData::homogeneous(), fit_degree)?;
    let scale = sample(psi0.grid(), f)?.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(CompatReport::evaluate(
        CornerDerivatives::from_traces(&tr),
        [f(0.0, 0.0), f(0.0, 1.0), f(1.0, 0.0)],
        b,
        c,
        scale,
        relative_tolerance,
    ))
}

/// Absolute corner-solver tolerance equivalent to a tolerance on the z3 condition.
///
/// For the linear ansatz the only unmatched coefficient of the corner equation equals
/// `(b1^2 + b2^2) / (b1 b2)` times the condition value.
pub fn z3_tolerance(b: [f64; 2], condition_tolerance: f64) -> f64 {
    condition_tolerance * (b[0] * b[0] + b[1] * b[1]) / (b[0] * b[1])
}

/// An outer term: nodal values, boundary data and fitted outflow traces.
#[derive(Debug, Clone)]
pub struct OuterTerm {
    pub field: Field,
    pub data: ReducedData,
    pub traces: TraceFit,
}

impl OuterTerm {
    pub fn zero(grid: &Grid) -> OuterTerm {
        OuterTerm { field: Field::zeros(grid), data: ReducedData::homogeneous(), traces: TraceFit::default() }
    }

    /// Outward normal derivatives: fitted traces on the outflow edges, data on the inflow edges.
    pub fn normal_data(&self, grid: &Grid) -> NormalData {
        NormalData::from_fn(grid, |e, x, y| match e {
            Edge::Left => -self.traces.x0.eval(y),
            Edge::Bottom => -self.traces.y0.eval(x),
            Edge::Right => self.data.phi3.value(y),
            Edge::Top => self.data.kappa3.value(x),
        })
    }

    /// Tangential derivative along an edge at tangential coordinate `t`.
    pub fn tangential_derivative(&self, e: Edge, t: f64) -> f64 {
        match e {
            Edge::Left => self.data.phi1.derivative(t),
            Edge::Right => self.data.phi2.derivative(t),
            Edge::Bottom => self.data.kappa1.derivative(t),
            Edge::Top => self.data.kappa2.derivative(t),
        }
    }

    /// Outward normal derivative along an edge at tangential coordinate `t`.
    pub fn normal_derivative(&self, e: Edge, t: f64) -> f64 {
        match e {
            Edge::Left => -self.traces.x0.eval(t),
            Edge::Bottom => -self.traces.y0.eval(t),
            Edge::Right => self.data.phi3.value(t),
            Edge::Top => self.data.kappa3.value(t),
        }
    }
}

/// The assembled expansion for one `eps` on one grid.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub variant: Variant,
    pub eps: f64,
    pub b: [f64; 2],
    pub c: f64,
    pub grid: Grid,
    /// `psi_0, psi_1, psi_2`.
    pub psi: Vec<OuterTerm>,
    /// `v_1, v_2, ...` on `x = 0`, in the variables `(x / eps, y)`.
    pub v: Vec<ExpPoly1D>,
    /// `w_1, w_2, ...` on `y = 0`, in the variables `(y / eps, x)`.
    pub w: Vec<ExpPoly1D>,
    /// `z_2, z_3, ...` in `(x / eps, y / eps)`.
    pub z: Vec<ExpPoly2D>,
    pub compat: CompatReport,
    /// Solvability of each corner term that was solved for, in order.
    pub corner_reports: Vec<(String, SolvabilityReport)>,
    /// Corner checks of the limit-problem data for `psi_1` and `psi_2`.
    pub data_reports: Vec<(String, CornerCompatReport)>,
    pub notes: Vec<String>,
}

/// Reusable pieces for building expansions on a fixed grid.
#[derive(Debug, Clone)]
pub struct ExpansionBuilder {
    grid: Grid,
    b: [f64; 2],
    c: f64,
    f: Field,
    f_corners: [f64; 3],
    solver: ReducedSolver,
    biharmonic: StencilOperator,
    options: ExpansionOptions,
}

impl ExpansionBuilder {
    pub fn new(spec: &ProblemSpec, grid: &Grid, options: ExpansionOptions) -> Result<ExpansionBuilder> {
        spec.validate()?;
        let f = sample(grid, |x, y| (spec.f)(x, y))?;
        Ok(ExpansionBuilder {
            grid: grid.clone(),
            b: spec.b,
            c: spec.c,
            f,
            f_corners: [(spec.f)(0.0, 0.0), (spec.f)(0.0, 1.0), (spec.f)(1.0, 0.0)],
            solver: ReducedSolver::new(grid, spec.b, spec.c)?,
            biharmonic: discrete_biharmonic_with(grid, Closure::Hermite)?,
            options,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rhs(&self) -> &Field {
        &self.f
    }

    pub fn solver(&self) -> &ReducedSolver {
        &self.solver
    }

    pub fn biharmonic(&self) -> &StencilOperator {
        &self.biharmonic
    }

    fn f_scale(&self) -> f64 {
        self.f.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn solve_psi0(&self) -> Result<OuterTerm> {
        let data = ReducedData::homogeneous();
        let field = if self.options.fallback {
            crate::reduced_solver::solve_psi0(&self.grid, self.b, self.c, &self.f, true)?
        } else {
            self.solver.solve(&self.f, &data, CORNER_TOLERANCE)?
        };
        let traces = fit_traces(&field, &data, self.options.fit_degree)?;
        Ok(OuterTerm { field, data, traces })
    }

    /// `-Delta_h^2 prev` at the interior nodes, ghosts from the fitted traces.
    fn biharmonic_rhs(&self, prev: &OuterTerm) -> Result<Field> {
        Ok(self.outer_biharmonic(prev)?.scaled(-1.0))
    }

    /// The biharmonic of an outer term exactly as it enters the next right-hand side.
    pub fn outer_biharmonic(&self, prev: &OuterTerm) -> Result<Field> {
        if self.options.outer_degree > 0 {
            let g = &self.grid;
            let n = g.n();
            let x = g.nodes();
            let w = g.trapezoid_weights();
            let u = nalgebra::DMatrix::from_fn(n + 1, n + 1, |i, j| prev.field.at(i, j));
            let degree = self.options.outer_degree.min(n / 2);
            let fit = crate::profiles::cheb::ChebSeries2D::fit(x, &w, x, &w, &u, degree);
            let b = fit.sample(x, x, 4, 0) + fit.sample(x, x, 2, 2) * 2.0 + fit.sample(x, x, 0, 4);
            let mut out = Field::zeros(g);
            for j in 0..=n {
                for i in 0..=n {
                    out.set(i, j, b[(i, j)]);
                }
            }
            return Ok(out);
        }
        let vals = self.biharmonic.apply(&prev.field, &prev.normal_data(&self.grid))?;
        Ok(embed_interior(&self.grid, &vals))
    }

    fn solve_outer(&self, prev: &OuterTerm, data: ReducedData, label: &str, reports: &mut Vec<(String, CornerCompatReport)>) -> Result<OuterTerm> {
        let rhs = self.biharmonic_rhs(prev)?;
        let report = check_corner_compatibility(&data, CORNER_TOLERANCE * self.f_scale().max(1.0));
        reports.push((label.to_string(), report));
        let field = self.solver.solve_unchecked(&rhs, &data)?;
        let traces = fit_traces(&field, &data, self.options.fit_degree)?;
        Ok(OuterTerm { field, data, traces })
    }

    /// The compatibility report of the load on this grid.
    pub fn compat_report(&self) -> Result<CompatReport> {
        let psi0 = self.solve_psi0()?;
        Ok(self.report_for(&psi0))
    }

    fn report_for(&self, psi0: &OuterTerm) -> CompatReport {
        CompatReport::evaluate(
            CornerDerivatives::from_traces(&psi0.traces),
            self.f_corners,
            self.b,
            self.c,
            self.f_scale(),
            self.options.compat_tolerance,
        )
    }

    /// Builds the expansion for `eps`.
    pub fn build(&self, eps: f64, variant: Variant) -> Result<Expansion> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {eps}")));
        }
        let [b1, b2] = self.b;
        let c = self.c;
        let grid = &self.grid;
        let mut notes = Vec::new();
        let mut data_reports = Vec::new();
        let mut corner_reports = Vec::new();

        let mut psi0 = self.solve_psi0()?;
        let compat = self.report_for(&psi0);
        if variant == Variant::WithCompat {
            if !compat.passed {
                return Err(Error::CompatibilityRefused(Box::new(compat)));
            }
            // The residuals are within tolerance; build from exactly compatible traces.
            psi0.traces = fit_traces_with(&psi0.field, &psi0.data, self.options.fit_degree, Some((self.b, self.c)))?;
        }

        let v1 = solve_edge_profile(b1, &ExpPoly1D::zero(b1), &psi0.traces.x0.scale(-1.0))?;
        let w1 = solve_edge_profile(b2, &ExpPoly1D::zero(b2), &psi0.traces.y0.scale(-1.0))?;
        let rates = [b1, b2];
        // Corner data are built from the outflow traces; rounding is judged against their size.
        let corner_tol = CORNER_TOLERANCE * psi0.traces.x0.coeff_norm().max(psi0.traces.y0.coeff_norm());
        let (z2, rep) =
            solve_corner_profile(rates, &ExpPoly2D::zero(rates), Some(&corner_neumann(&v1, &w1)), 0, Some(corner_tol))?;
        if !rep.solvable {
            return Err(Error::Unsolvable(Box::new(rep)));
        }
        corner_reports.push(("z2".to_string(), rep));

        let psi1 = self.solve_outer(&psi0, layer_dirichlet(&[(1.0, &v1)], &[(1.0, &w1)], &[], 1.0), "psi1", &mut data_reports)?;
        let pv = |p: &ExpPoly1D| edge_operator_parts(p, b1, b2, c);
        let pw = |p: &ExpPoly1D| edge_operator_parts(p, b2, b1, c);
        let neg = |p: &ExpPoly1D| expoly_mul_scalar(p, -1.0);

        let v2 = solve_edge_profile(b1, &neg(&pv(&v1)[1]), &psi1.traces.x0.scale(-1.0))?;
        let w2 = solve_edge_profile(b2, &neg(&pw(&w1)[1]), &psi1.traces.y0.scale(-1.0))?;
        let c_lap_z2 = z2.laplacian().scale(c);

        let mut psi = vec![psi0, psi1];
        let mut v = vec![v1, v2];
        let mut w = vec![w1, w2];
        let mut z = vec![z2];

        match variant {
            Variant::WithCompat => {
                let tol = z3_tolerance(self.b, self.options.compat_tolerance * self.f_scale());
                let (z3, rep) = solve_corner_profile(rates, &c_lap_z2, Some(&corner_neumann(&v[1], &w[1])), 1, Some(tol))?;
                let solvable = rep.solvable;
                corner_reports.push(("z3".to_string(), rep.clone()));
                if !solvable {
                    let mut rep = rep;
                    rep.condition = Some(CC_CORNER_Z3.to_string());
                    return Err(Error::Unsolvable(Box::new(rep)));
                }
                z.push(z3);
                let data2 = layer_dirichlet(&[(1.0, &v[1])], &[(1.0, &w[1])], &[(1.0, &z[0])], eps);
                let psi2 = self.solve_outer(&psi[1], data2, "psi2", &mut data_reports)?;
                let (a1, a2) = (pv(&v[0]), pv(&v[1]));
                let (c1, c2) = (pw(&w[0]), pw(&w[1]));
                let rhs_v3 = neg(&expoly_add(&a2[1], &a1[2])?);
                let rhs_w3 = neg(&expoly_add(&c2[1], &c1[2])?);
                let v3 = solve_edge_profile(b1, &rhs_v3, &psi2.traces.x0.scale(-1.0))?;
                let w3 = solve_edge_profile(b2, &rhs_w3, &psi2.traces.y0.scale(-1.0))?;
                let rhs_v4 = neg(&expoly_add(&expoly_add(&pv(&v3)[1], &a2[2])?, &a1[3])?);
                let rhs_w4 = neg(&expoly_add(&expoly_add(&pw(&w3)[1], &c2[2])?, &c1[3])?);
                let v4 = solve_edge_profile(b1, &rhs_v4, &ChebSeries::zero())?;
                let w4 = solve_edge_profile(b2, &rhs_w4, &ChebSeries::zero())?;
                let rhs_z4 = z[1].laplacian().scale(c);
                let zero = CornerNeumann { eta0: vec![0.0; 3], xi0: vec![0.0; 3] };
                let (mut z4, mut rep) = solve_corner_profile(rates, &rhs_z4, Some(&zero), 2, Some(corner_tol))?;
                if !rep.solvable {
                    notes.push(format!(
                        "z4 with zero Neumann data is not polynomial ({}); Neumann data left free",
                        rep.summary()
                    ));
                    (z4, rep) = solve_corner_profile(rates, &rhs_z4, None, 2, Some(corner_tol))?;
                    if !rep.solvable {
                        return Err(Error::Unsolvable(Box::new(rep)));
                    }
                }
                corner_reports.push(("z4".to_string(), rep));
                psi.push(psi2);
                v.push(v3);
                v.push(v4);
                w.push(w3);
                w.push(w4);
                z.push(z4);
            }
            Variant::NoCompat => {
                psi.push(OuterTerm::zero(grid));
                let (a1, a2) = (pv(&v[0]), pv(&v[1]));
                let (c1, c2) = (pw(&w[0]), pw(&w[1]));
                let v3 = solve_edge_profile(b1, &neg(&expoly_add(&a2[1], &a1[2])?), &ChebSeries::zero())?;
                let w3 = solve_edge_profile(b2, &neg(&expoly_add(&c2[1], &c1[2])?), &ChebSeries::zero())?;
                v.push(v3);
                w.push(w3);
                z.push(no_compat_z3(rates, c, z[0].get(0, 0)));
            }
        }
        Ok(Expansion {
            variant,
            eps,
            b: self.b,
            c,
            grid: grid.clone(),
            psi,
            v,
            w,
            z,
            compat,
            corner_reports,
            data_reports,
            notes,
        })
    }
}

/// Neumann data for the next corner term from the current edge terms:
/// `z_eta(xi, 0) = -v_y(xi, 0)` and `z_xi(0, eta) = -w_x(0, eta)`.
fn corner_neumann(v: &ExpPoly1D, w: &ExpPoly1D) -> CornerNeumann {
    CornerNeumann {
        eta0: expoly_dt(v).at_tangent(0.0).into_iter().map(|a| -a).collect(),
        xi0: expoly_dt(w).at_tangent(0.0).into_iter().map(|a| -a).collect(),
    }
}

/// Corner term of the shortened expansion: `k (xi + eta) exp(-b1 xi - b2 eta)` with
/// `k = -c K / (b1 + b2)`, where `K` is the constant of `z_2`; it balances `c Delta z_2`.
pub fn no_compat_z3(rates: [f64; 2], c: f64, z2_constant: f64) -> ExpPoly2D {
    let k = -c * z2_constant / (rates[0] + rates[1]);
    let mut z = ExpPoly2D::with_degree(rates, 1);
    z.coeffs[1][0] = k;
    z.coeffs[0][1] = k;
    z
}

/// Dirichlet data `-(sum of layer terms)` on `x = 0` and `y = 0` for the next outer term;
/// homogeneous data on the inflow edges.
fn layer_dirichlet(vs: &[(f64, &ExpPoly1D)], ws: &[(f64, &ExpPoly1D)], zs: &[(f64, &ExpPoly2D)], eps: f64) -> ReducedData {
    let layers = LayerSum::new(
        eps,
        vs.iter().map(|(a, p)| (*a, (*p).clone())).collect(),
        ws.iter().map(|(a, p)| (*a, (*p).clone())).collect(),
        zs.iter().map(|(a, p)| (*a, (*p).clone())).collect(),
    );
    let l1 = layers.clone();
    let l2 = layers.clone();
    let l3 = layers.clone();
    let l4 = layers;
    let mut data = ReducedData::homogeneous();
    data.phi1 = EdgeFn::with_derivative(move |y| -l1.eval(0.0, y).0, move |y| -l2.eval(0.0, y).2);
    data.kappa1 = EdgeFn::with_derivative(move |x| -l3.eval(x, 0.0).0, move |x| -l4.eval(x, 0.0).1);
    data
}

/// A weighted sum of layer terms with exact first derivatives at any point.
#[derive(Debug, Clone)]
pub struct LayerSum {
    eps: f64,
    v: Vec<(f64, [ExpPoly1D; 3])>,
    w: Vec<(f64, [ExpPoly1D; 3])>,
    z: Vec<(f64, [ExpPoly2D; 3])>,
}

impl LayerSum {
    pub fn new(eps: f64, v: Vec<(f64, ExpPoly1D)>, w: Vec<(f64, ExpPoly1D)>, z: Vec<(f64, ExpPoly2D)>) -> LayerSum {
        let d1 = |p: ExpPoly1D| {
            let a = expoly_dxi(&p);
            let b = expoly_dt(&p);
            [p, a, b]
        };
        LayerSum {
            eps,
            v: v.into_iter().map(|(a, p)| (a, d1(p))).collect(),
            w: w.into_iter().map(|(a, p)| (a, d1(p))).collect(),
            z: z.into_iter().map(|(a, p)| (a, [p.clone(), p.dxi(), p.deta()])).collect(),
        }
    }

    /// The `eps^i`-weighted layer terms of an expansion.
    pub fn of(exp: &Expansion) -> LayerSum {
        let e = exp.eps;
        LayerSum::new(
            e,
            exp.v.iter().enumerate().map(|(i, p)| (e.powi(i as i32 + 1), p.clone())).collect(),
            exp.w.iter().enumerate().map(|(i, p)| (e.powi(i as i32 + 1), p.clone())).collect(),
            exp.z.iter().enumerate().map(|(i, p)| (e.powi(i as i32 + 2), p.clone())).collect(),
        )
    }

    /// Value, `d/dx` and `d/dy` at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let e = self.eps;
        let (xi, eta) = (x / e, y / e);
        let mut out = (0.0, 0.0, 0.0);
        for (a, [p, pn, pt]) in &self.v {
            out.0 += a * p.eval(xi, y);
            out.1 += a * pn.eval(xi, y) / e;
            out.2 += a * pt.eval(xi, y);
        }
        for (a, [p, pn, pt]) in &self.w {
            out.0 += a * p.eval(eta, x);
            out.1 += a * pt.eval(eta, x);
            out.2 += a * pn.eval(eta, x) / e;
        }
        for (a, [p, px, py]) in &self.z {
            out.0 += a * p.eval(xi, eta);
            out.1 += a * px.eval(xi, eta) / e;
            out.2 += a * py.eval(xi, eta) / e;
        }
        out
    }
}

/// Builds the expansion of `spec` at `spec.eps` on `grid`.
pub fn build_expansion(spec: &ProblemSpec, grid: &Grid, variant: Variant, options: ExpansionOptions) -> Result<Expansion> {
    ExpansionBuilder::new(spec, grid, options)?.build(spec.eps, variant)
}

impl Expansion {
    pub fn layers(&self) -> LayerSum {
        LayerSum::of(self)
    }

    /// `sum eps^i psi_i` at the nodes.
    pub fn outer_field(&self) -> Field {
        let mut out = Field::zeros(&self.grid);
        for (i, t) in self.psi.iter().enumerate() {
            out.axpy(self.eps.powi(i as i32), &t.field).expect("same grid");
        }
        out
    }

    /// Nodal values of the layer terms only.
    pub fn layer_field(&self) -> Result<Field> {
        let e = self.eps;
        let mut out = Field::zeros(&self.grid);
        for (i, p) in self.v.iter().enumerate() {
            out.axpy(1.0, &realize_edge(p, Edge::Left, e, &self.grid, e.powi(i as i32 + 1))?)?;
        }
        for (i, p) in self.w.iter().enumerate() {
            out.axpy(1.0, &realize_edge(p, Edge::Bottom, e, &self.grid, e.powi(i as i32 + 1))?)?;
        }
        for (i, p) in self.z.iter().enumerate() {
            out.axpy(1.0, &realize_corner(p, e, &self.grid, e.powi(i as i32 + 2)))?;
        }
        Ok(out)
    }

    /// Nodal values of the assembled expansion.
    pub fn assemble(&self) -> Result<Field> {
        let mut out = self.outer_field();
        out.axpy(1.0, &self.layer_field()?)?;
        Ok(out)
    }

    /// Corner terms that the weak-layer decomposition counts as part of the smooth part
    /// (`z_3` and `z_4`), as nodal values.
    pub fn smooth_corner_field(&self) -> Field {
        let e = self.eps;
        let mut out = Field::zeros(&self.grid);
        for (i, p) in self.z.iter().enumerate().skip(1) {
            out.axpy(1.0, &realize_corner(p, e, &self.grid, e.powi(i as i32 + 2))).expect("same grid");
        }
        out
    }

    /// Term metadata for reports.
    pub fn metadata(&self) -> ExpansionMeta {
        let edge = |name: String, p: &ExpPoly1D| TermMeta {
            name,
            kind: "edge".into(),
            degree: p.degree(),
            rates: vec![p.rate],
            coefficients: p.coeffs.iter().map(|c| c.coeffs().to_vec()).collect(),
        };
        let mut terms = Vec::new();
        for (i, p) in self.v.iter().enumerate() {
            terms.push(edge(format!("v{}", i + 1), p));
        }
        for (i, p) in self.w.iter().enumerate() {
            terms.push(edge(format!("w{}", i + 1), p));
        }
        for (i, p) in self.z.iter().enumerate() {
            terms.push(TermMeta {
                name: format!("z{}", i + 2),
                kind: "corner".into(),
                degree: p.total_degree(),
                rates: p.rates.to_vec(),
                coefficients: p.coeffs.clone(),
            });
        }
        ExpansionMeta {
            variant: self.variant,
            eps: self.eps,
            b: self.b,
            c: self.c,
            grid: self.grid.descriptor(),
            outer_traces: self.psi.iter().map(|t| t.traces.clone()).collect(),
            terms,
            compat: self.compat.clone(),
            notes: self.notes.clone(),
        }
    }

    /// CSV with one row per node: `x,y,psi0,psi1,psi2,layers,Psi`.
    pub fn write_fields_csv(&self, out: &mut dyn Write) -> Result<()> {
        let layers = self.layer_field()?;
        let total = self.assemble()?;
        let n = self.grid.n();
        writeln!(out, "x,y,psi0,psi1,psi2,layers,Psi")?;
        for j in 0..=n {
            for i in 0..=n {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(self.grid.x(i)),
                    fmt_f64(self.grid.y(j)),
                    fmt_f64(self.psi[0].field.at(i, j)),
                    fmt_f64(self.psi[1].field.at(i, j)),
                    fmt_f64(self.psi[2].field.at(i, j)),
                    fmt_f64(layers.at(i, j)),
                    fmt_f64(total.at(i, j)),
                )?;
            }
        }
        Ok(())
    }
}

/// Per-term description used in JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermMeta {
    pub name: String,
    pub kind: String,
    pub degree: usize,
    pub rates: Vec<f64>,
    /// Edge terms: Chebyshev coefficients in the tangential variable per power of the
    /// stretched variable. Corner terms: `coefficients[k][l]` of `xi^k eta^l`.
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionMeta {
    pub variant: Variant,
    pub eps: f64,
    pub b: [f64; 2],
    pub c: f64,
    pub grid: GridDescriptor,
    pub outer_traces: Vec<TraceFit>,
    pub terms: Vec<TermMeta>,
    pub compat: CompatReport,
    pub notes: Vec<String>,
}

/// Fixed-width scientific format with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{shishkin_grid, uniform_grid};
    use std::sync::Arc;

    #[test]
    fn zero_load_gives_zero_expansion() {
        let spec = ProblemSpec::new([1.0, 1.0], 1.0, 0.1, Arc::new(|_, _| 0.0)).unwrap();
        let grid = uniform_grid(16).unwrap();
        for variant in [Variant::WithCompat, Variant::NoCompat] {
            let e = build_expansion(&spec, &grid, variant, ExpansionOptions::default()).unwrap();
            assert!(e.assemble().unwrap().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constant_load_is_incompatible() {
        let spec = ProblemSpec::new([1.0, 1.0], 1.0, 0.1, Arc::new(|_, _| 1.0)).unwrap();
        let grid = uniform_grid(16).unwrap();
        let err = build_expansion(&spec, &grid, Variant::WithCompat, ExpansionOptions::default()).unwrap_err();
        match err {
            Error::CompatibilityRefused(r) => {
                assert!(!r.get(CC_F_01).unwrap().passed);
                assert!(!r.get(CC_F_10).unwrap().passed);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(build_expansion(&spec, &grid, Variant::NoCompat, ExpansionOptions::default()).is_ok());
    }

    #[test]
    fn neumann_matching_and_dirichlet_rows() {
        let f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> =
            Arc::new(|x, y| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin() * x * y);
        let spec = ProblemSpec::new([1.0, 1.5], 1.0, 0.05, f).unwrap();
        let grid = shishkin_grid(32, 0.05, 1.0, 4.0).unwrap();
        let e = build_expansion(&spec, &grid, Variant::NoCompat, ExpansionOptions::default()).unwrap();
        for (i, v) in e.v.iter().enumerate().take(2) {
            let dv = expoly_dxi(v);
            for y in [0.1, 0.5, 0.9] {
                assert!((dv.eval(0.0, y) + e.psi[i].traces.x0.eval(y)).abs() < 1e-12);
            }
        }
        let n = grid.n();
        for j in 1..n {
            let y = grid.y(j);
            assert!((e.psi[1].field.at(0, j) + e.v[0].eval(0.0, y)).abs() < 1e-12);
        }
    }
}
