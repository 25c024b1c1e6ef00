//! Norms, residual reports, fitted orders and the stability checks.
//!
//! The interior residual `f - L Psi` is evaluated semi-analytically. For the outer terms
//! the discrete operator is applied with exactly the stencils and ghost data that produced
//! them, so their contribution collapses to the leftover biharmonic term. For the layer
//! terms the operator is applied in the exponential-polynomial algebra, grouped by powers
//! of `eps` so that the cancellations built into the profile equations happen on the
//! coefficients, and only the remainder is evaluated at the nodes.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{fmt_f64, Expansion, ExpansionBuilder, ExpansionOptions, Variant};
use crate::fd_ops::{discrete_laplacian, embed_interior, interior_values, fornberg_weights, Edge, NormalData};
use crate::full_solver::{solve_full, ProblemSpec};
use crate::mesh::{sample, uniform_grid, Field, Grid, GridDescriptor, MeshSpec};
use crate::reduced_solver::{ReducedData, ReducedSolver, CORNER_TOLERANCE};
use crate::profiles::{edge_operator_parts, expoly_add, expoly_mul_scalar, realize_corner, realize_edge, ExpPoly1D, ExpPoly2D};

/// Squared Poincare constant of the unit square, `2 pi^2`.
pub const POINCARE_SQ: f64 = 2.0 * PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    L2,
    Linf,
    H1Semi,
}

pub fn norm(u: &Field, which: NormKind) -> f64 {
    match which {
        NormKind::Linf => linf(u),
        NormKind::L2 => l2(u),
        NormKind::H1Semi => h1_semi(u),
    }
}

pub fn linf(u: &Field) -> f64 {
    u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Composite trapezoid rule for `(integral of u^2)^(1/2)`.
pub fn l2(u: &Field) -> f64 {
    weighted_sum_sq(u).sqrt()
}

fn weighted_sum_sq(u: &Field) -> f64 {
    let g = u.grid();
    let w = g.trapezoid_weights();
    let n = g.n();
    let mut s = 0.0;
    for j in 0..=n {
        for i in 0..=n {
            s += w[i] * w[j] * u.at(i, j).powi(2);
        }
    }
    s
}

/// Trapezoid inner product of two fields on the same grid.
pub fn inner(u: &Field, v: &Field) -> f64 {
    let g = u.grid();
    let w = g.trapezoid_weights();
    let n = g.n();
    let mut s = 0.0;
    for j in 0..=n {
        for i in 0..=n {
            s += w[i] * w[j] * u.at(i, j) * v.at(i, j);
        }
    }
    s
}

/// Nodal gradient: three-point differences, central inside and one-sided on the edges.
pub fn gradient(u: &Field) -> (Field, Field) {
    let g = u.grid();
    let n = g.n();
    let x = g.nodes();
    let weights: Vec<(usize, [f64; 3])> = (0..=n)
        .map(|i| {
            let s = if i == 0 { 0 } else if i == n { n - 2 } else { i - 1 };
            let w = fornberg_weights(x[i], &x[s..s + 3], 1);
            (s, [w[1][0], w[1][1], w[1][2]])
        })
        .collect();
    let mut gx = Field::zeros(g);
    let mut gy = Field::zeros(g);
    for j in 0..=n {
        for i in 0..=n {
            let (s, w) = weights[i];
            gx.set(i, j, (0..3).map(|q| w[q] * u.at(s + q, j)).sum());
            let (s, w) = weights[j];
            gy.set(i, j, (0..3).map(|q| w[q] * u.at(i, s + q)).sum());
        }
    }
    (gx, gy)
}

/// L2 norm of the nodal gradient.
pub fn h1_semi(u: &Field) -> f64 {
    let (gx, gy) = gradient(u);
    (weighted_sum_sq(&gx) + weighted_sum_sq(&gy)).sqrt()
}

/// Largest nodal gradient magnitude.
pub fn gradient_linf(u: &Field) -> f64 {
    let (gx, gy) = gradient(u);
    gx.values().iter().zip(gy.values()).fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
}

/// Values along the four edges with their trapezoid weights.
fn boundary_norms(g: &Grid, values: &[Vec<f64>; 4]) -> (f64, f64) {
    let w = g.trapezoid_weights();
    let mut sup = 0.0_f64;
    let mut sq = 0.0;
    for vals in values {
        for (k, v) in vals.iter().enumerate() {
            sup = sup.max(v.abs());
            sq += w[k] * v * v;
        }
    }
    (sup, sq.sqrt())
}

/// Measured residual norms of one expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub eps: f64,
    pub grid: GridDescriptor,
    pub variant: Variant,
    /// Finest spacing at most `eps / 2`.
    pub layer_resolved: bool,
    /// `||f - L Psi||` in L2 over the square.
    pub interior_l2: f64,
    /// Share of the interior residual coming from the outer terms.
    pub interior_outer_l2: f64,
    /// Share of the interior residual coming from the layer terms.
    pub interior_layer_l2: f64,
    /// `||Psi||` in L-infinity on the boundary (the residual there is `-Psi`).
    pub boundary_linf: f64,
    /// Tangential derivative of `Psi`, L-infinity on the boundary.
    pub tangential_linf: f64,
    /// Normal derivative of `Psi`, L-infinity on the boundary.
    pub normal_linf: f64,
    /// Normal derivative of `Psi`, L2 on the boundary.
    pub normal_l2: f64,
    /// `sqrt(||R||_C0 ||R||_C1)` on the boundary; bounds the C^(1/2) norm up to a constant.
    pub holder_half_product: f64,
    /// `||psi_h - Psi||` in L-infinity, when a full solve was done.
    pub error_linf: Option<f64>,
    /// `|psi_h - Psi|_H1`, when a full solve was done.
    pub error_h1: Option<f64>,
}

pub const NORM_NAMES: [&str; 7] = [
    "interior_l2",
    "boundary_linf",
    "tangential_linf",
    "normal_linf",
    "normal_l2",
    "error_linf",
    "error_h1",
];

impl ResidualReport {
    /// The norms in the order of [`NORM_NAMES`].
    pub fn values(&self) -> [Option<f64>; 7] {
        [
            Some(self.interior_l2),
            Some(self.boundary_linf),
            Some(self.tangential_linf),
            Some(self.normal_linf),
            Some(self.normal_l2),
            self.error_linf,
            self.error_h1,
        ]
    }
}

/// Orders the residual norms are predicted to decay with, in the order of [`NORM_NAMES`].
pub fn predicted_orders(variant: Variant) -> [Option<f64>; 7] {
    match variant {
        Variant::WithCompat => [Some(2.5), Some(3.0), Some(2.0), Some(3.0), Some(3.5), Some(1.5), Some(1.5)],
        Variant::NoCompat => [Some(1.5), Some(2.0), Some(1.0), Some(2.0), Some(2.5), Some(0.5), None],
    }
}

/// `f - L Psi` at every node.
///
/// Returns the total and its two parts (outer and layer). Boundary values of the outer
/// part are copied from the nearest interior node.
pub fn interior_residual(builder: &ExpansionBuilder, exp: &Expansion) -> Result<(Field, Field, Field)> {
    let grid = builder.grid();
    if grid != &exp.grid {
        return Err(Error::Dimension("expansion was built on a different grid".into()));
    }
    let n = grid.n();
    let eps = exp.eps;
    let mut acc: Vec<f64> = interior_values(builder.rhs());
    for (i, t) in exp.psi.iter().enumerate() {
        // The limit operator sees the ghosts the solver used; the biharmonic is the one
        // that formed the next right-hand side.
        let r = builder.solver().apply(&t.field, &t.data)?;
        let b = interior_values(&builder.outer_biharmonic(t)?);
        let a = eps.powi(i as i32);
        for ((o, r), b) in acc.iter_mut().zip(r).zip(b) {
            *o -= a * (r + eps * b);
        }
    }
    let mut outer = embed_interior(grid, &acc);
    for j in 0..=n {
        for i in 0..=n {
            if grid.is_boundary(i, j) {
                let v = outer.at(i.clamp(1, n - 1), j.clamp(1, n - 1));
                outer.set(i, j, v);
            }
        }
    }
    let mut layer = Field::zeros(grid);
    let [b1, b2] = exp.b;
    let lv = edge_layer_operator(&exp.v, b1, b2, exp.c, eps)?;
    let lw = edge_layer_operator(&exp.w, b2, b1, exp.c, eps)?;
    layer.axpy(1.0, &realize_edge(&lv, Edge::Left, eps, grid, 1.0)?)?;
    layer.axpy(1.0, &realize_edge(&lw, Edge::Bottom, eps, grid, 1.0)?)?;
    if let Some(lz) = corner_layer_operator(&exp.z, exp.c, eps)? {
        layer.axpy(1.0, &realize_corner(&lz, eps, grid, 1.0))?;
    }
    let mut total = outer.clone();
    total.axpy(-1.0, &layer)?;
    Ok((total, outer, layer))
}

/// `L (sum_i eps^i v_i)` as one exponential polynomial in `(x / eps, t)`, where
/// `profiles[i]` is `v_{i+1}`. Contributions are first summed per power of `eps`.
pub fn edge_layer_operator(profiles: &[ExpPoly1D], bn: f64, bt: f64, c: f64, eps: f64) -> Result<ExpPoly1D> {
    let parts: Vec<[ExpPoly1D; 5]> = profiles.iter().map(|p| edge_operator_parts(p, bn, bt, c)).collect();
    let mut total = ExpPoly1D::zero(bn);
    let top = profiles.len() as i32 + 1;
    for n in -2..=top {
        let mut order = ExpPoly1D::zero(bn);
        for (idx, pp) in parts.iter().enumerate() {
            let k = n - (idx as i32 + 1) + 3;
            if (0..5).contains(&k) {
                order = expoly_add(&order, &pp[k as usize])?;
            }
        }
        total = expoly_add(&total, &expoly_mul_scalar(&order, eps.powi(n)))?;
    }
    Ok(total)
}

/// `L (sum_k eps^k z_k)` in stretched corner variables, `profiles[0]` being `z_2`.
pub fn corner_layer_operator(profiles: &[ExpPoly2D], c: f64, eps: f64) -> Result<Option<ExpPoly2D>> {
    let Some(first) = profiles.first() else {
        return Ok(None);
    };
    let ops: Vec<(ExpPoly2D, ExpPoly2D)> =
        profiles.iter().map(|z| (z.corner_operator(), z.laplacian().scale(-c))).collect();
    let mut total = ExpPoly2D::zero(first.rates);
    let top = profiles.len() as i32;
    for n in -1..=top {
        let mut order = ExpPoly2D::zero(first.rates);
        for (idx, (m, lap)) in ops.iter().enumerate() {
            let k = idx as i32 + 2;
            if k - 3 == n {
                order = order.add(m)?;
            }
            if k - 2 == n {
                order = order.add(lap)?;
            }
        }
        total = total.add(&order.scale(eps.powi(n)))?;
    }
    Ok(Some(total))
}

/// Residual norms of `exp`; `psi_h` is the full discrete solution when available.
pub fn residual_report(builder: &ExpansionBuilder, exp: &Expansion, psi_h: Option<&Field>) -> Result<ResidualReport> {
    let grid = builder.grid();
    let n = grid.n();
    let (total, outer, layer) = interior_residual(builder, exp)?;
    let psi = exp.assemble()?;
    let layers = exp.layers();
    let eps = exp.eps;
    let mut vals: [Vec<f64>; 4] = Default::default();
    let mut tang: [Vec<f64>; 4] = Default::default();
    let mut norm: [Vec<f64>; 4] = Default::default();
    for (slot, e) in Edge::ALL.into_iter().enumerate() {
        for k in 0..=n {
            let (i, j) = e.node(n, k);
            let (x, y) = (grid.x(i), grid.y(j));
            let t = grid.x(k);
            let (_, lx, ly) = layers.eval(x, y);
            let mut dt = 0.0;
            let mut dn = 0.0;
            for (p, term) in exp.psi.iter().enumerate() {
                let a = eps.powi(p as i32);
                dt += a * term.tangential_derivative(e, t);
                dn += a * term.normal_derivative(e, t);
            }
            let (lt, ln) = match e {
                Edge::Left => (ly, -lx),
                Edge::Right => (ly, lx),
                Edge::Bottom => (lx, -ly),
                Edge::Top => (lx, ly),
            };
            vals[slot].push(psi.at(i, j));
            tang[slot].push(dt + lt);
            norm[slot].push(dn + ln);
        }
    }
    let (boundary_linf, _) = boundary_norms(grid, &vals);
    let (tangential_linf, _) = boundary_norms(grid, &tang);
    let (normal_linf, normal_l2) = boundary_norms(grid, &norm);
    let (error_linf, error_h1) = match psi_h {
        Some(ph) => {
            let d = ph.sub(&psi)?;
            (Some(linf(&d)), Some(h1_semi(&d)))
        }
        None => (None, None),
    };
    let report = ResidualReport {
        eps,
        grid: grid.descriptor(),
        variant: exp.variant,
        layer_resolved: grid.resolves_layer(eps),
        interior_l2: l2(&total),
        interior_outer_l2: l2(&outer),
        interior_layer_l2: l2(&layer),
        boundary_linf,
        tangential_linf,
        normal_linf,
        normal_l2,
        holder_half_product: (boundary_linf * (boundary_linf + tangential_linf)).sqrt(),
        error_linf,
        error_h1,
    };
    for v in report.values().into_iter().flatten() {
        if !v.is_finite() {
            return Err(Error::DegenerateData(format!("non-finite residual norm at eps = {eps}")));
        }
    }
    Ok(report)
}

/// Least-squares fit of `log(norm) = p log(eps) + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square misfit of the log-log fit.
    pub residual_rms: f64,
    /// Half-width of the 95% confidence interval of the slope (infinite with 2 points).
    pub ci95: f64,
    pub points: usize,
}

fn t_quantile_975(dof: usize) -> f64 {
    const T: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
        2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= 30 {
        T[dof - 1]
    } else {
        1.96
    }
}

/// Fitted order of `norm ~ eps^p` from at least three points.
pub fn estimate_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("an order fit needs at least 3 points, got {}", points.len())));
    }
    for &(e, v) in points {
        if v == 0.0 {
            return Err(Error::DegenerateData(format!("norm is exactly zero at eps = {e}")));
        }
        if !(e > 0.0 && v > 0.0 && e.is_finite() && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("cannot take logarithms of ({e}, {v})")));
        }
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateData("all eps values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = points.len() - 2;
    let se = if dof > 0 { (sse / dof as f64 / sxx).sqrt() } else { f64::INFINITY };
    Ok(OrderFit { slope, intercept, residual_rms: (sse / m).sqrt(), ci95: t_quantile_975(dof) * se, points: points.len() })
}

/// Default acceptance half-width around a predicted order.
pub const SLOPE_WINDOW: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub norm: String,
    pub predicted: f64,
    pub fit: Option<OrderFit>,
    /// Why no fit exists, if none does.
    pub note: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub variant: Variant,
    pub reports: Vec<ResidualReport>,
    pub slopes: Vec<SlopeFit>,
    pub passed: bool,
}

impl SweepReport {
    /// Fits every predicted order over the layer-resolved points.
    pub fn from_reports(variant: Variant, mut reports: Vec<ResidualReport>) -> SweepReport {
        reports.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        let predicted = predicted_orders(variant);
        let mut slopes = Vec::new();
        for (k, name) in NORM_NAMES.iter().enumerate() {
            let Some(p) = predicted[k] else { continue };
            let pts: Vec<(f64, f64)> =
                reports.iter().filter(|r| r.layer_resolved).filter_map(|r| r.values()[k].map(|v| (r.eps, v))).collect();
            if pts.is_empty() && reports.iter().all(|r| r.values()[k].is_none()) {
                continue;
            }
            let (fit, note) = match estimate_order(&pts) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let passed = fit.is_some_and(|f| (f.slope - p).abs() <= SLOPE_WINDOW);
            slopes.push(SlopeFit { norm: name.to_string(), predicted: p, fit, note, passed });
        }
        let passed = slopes.iter().all(|s| s.passed);
        SweepReport { variant, reports, slopes, passed }
    }

    /// One row per `eps`, one column per norm, and a footer row with the slopes.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,layer_resolved");
        for name in NORM_NAMES {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for r in &self.reports {
            s.push_str(&format!("{},{}", fmt_f64(r.eps), r.layer_resolved));
            for v in r.values() {
                s.push(',');
                if let Some(v) = v {
                    s.push_str(&fmt_f64(v));
                }
            }
            s.push('\n');
        }
        s.push_str("slope,");
        for name in NORM_NAMES {
            s.push(',');
            if let Some(fit) = self.slopes.iter().find(|f| f.norm == name).and_then(|f| f.fit) {
                s.push_str(&fmt_f64(fit.slope));
            }
        }
        s.push('\n');
        s
    }
}

/// Builds and measures the expansion at one `eps`.
pub fn measure_point(
    spec: &ProblemSpec,
    mesh: &MeshSpec,
    eps: f64,
    variant: Variant,
    include_full_solve: bool,
    options: ExpansionOptions,
) -> Result<ResidualReport> {
    let spec = spec.with_eps(eps)?;
    let grid = mesh.grid_for(eps, spec.b_min())?;
    let builder = ExpansionBuilder::new(&spec, &grid, options)?;
    let exp = builder.build(eps, variant)?;
    let psi_h = if include_full_solve { Some(solve_full(&spec, &grid)?.psi) } else { None };
    residual_report(&builder, &exp, psi_h.as_ref())
}

/// Runs `task` over `items` with at most `jobs` worker threads; results keep input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, task: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= items.len() {
                    break;
                }
                let r = task(&items[k]);
                slots.lock().expect("worker panicked")[k] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every item processed")).collect()
}

/// Residual sweep over `eps_list`, evaluated with up to `jobs` workers.
pub fn sweep(
    spec: &ProblemSpec,
    mesh: &MeshSpec,
    eps_list: &[f64],
    variant: Variant,
    include_full_solve: bool,
    options: ExpansionOptions,
    jobs: usize,
) -> Result<SweepReport> {
    let results = parallel_map(eps_list, jobs, |&eps| measure_point(spec, mesh, eps, variant, include_full_solve, options));
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::from_reports(variant, reports))
}

/// Discrete stability and energy measurements for homogeneous clamped data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub eps: f64,
    pub grid: GridDescriptor,
    /// `||psi_h|| c 2 pi^2 / ||f||`, all L2; zero when `f` vanishes.
    pub ratio: f64,
    pub trivially_passed: bool,
    pub energy_laplacian: f64,
    pub energy_gradient: f64,
    pub energy_load: f64,
    /// `eps ||Delta_h psi||^2 + c ||grad_h psi||^2 - <f, psi>`.
    pub energy_defect: f64,
    pub max_spacing: f64,
}

/// Solves the full problem and measures the stability ratio and the energy defect.
pub fn stability_check(spec: &ProblemSpec, grid: &Grid) -> Result<StabilityReport> {
    let psi = solve_full(spec, grid)?.psi;
    let f = sample(grid, |x, y| (spec.f)(x, y))?;
    let fnorm = l2(&f);
    let (ratio, trivially_passed) =
        if fnorm == 0.0 { (0.0, true) } else { (l2(&psi) * spec.c * POINCARE_SQ / fnorm, false) };
    let lap = discrete_laplacian(grid)?.apply_field(&psi, &NormalData::zeros(grid))?;
    let energy_laplacian = weighted_sum_sq(&lap);
    let energy_gradient = cell_gradient_sq(&psi);
    let energy_load = inner(&f, &psi);
    let energy_defect = spec.eps * energy_laplacian + spec.c * energy_gradient - energy_load;
    Ok(StabilityReport {
        eps: spec.eps,
        grid: grid.descriptor(),
        ratio,
        trivially_passed,
        energy_laplacian,
        energy_gradient,
        energy_load,
        energy_defect,
        max_spacing: grid.max_spacing(),
    })
}

/// `sum over cell edges of (difference quotient)^2` with trapezoid weights across.
fn cell_gradient_sq(u: &Field) -> f64 {
    let g = u.grid();
    let n = g.n();
    let w = g.trapezoid_weights();
    let mut s = 0.0;
    for j in 0..=n {
        for i in 1..=n {
            let h = g.h(i);
            s += w[j] * h * ((u.at(i, j) - u.at(i - 1, j)) / h).powi(2);
            s += w[j] * h * ((u.at(j, i) - u.at(j, i - 1)) / h).powi(2);
        }
    }
    s
}

/// Weak-layer measurements at one `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakLayerPoint {
    pub eps: f64,
    /// `||psi_h - S_h||` in L-infinity.
    pub value: f64,
    /// Largest nodal gradient of `psi_h - S_h`.
    pub gradient: f64,
    pub layer_resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakLayerReport {
    pub points: Vec<WeakLayerPoint>,
    pub value_fit: Option<OrderFit>,
    pub gradient_fit: Option<OrderFit>,
    pub trivially_passed: bool,
}

/// `S_h = psi_0 + eps psi_1 + eps^2 psi_2 + eps^3 z_3 + eps^4 z_4` (nodal).
pub fn smooth_part(exp: &Expansion) -> Field {
    let mut s = exp.outer_field();
    s.axpy(1.0, &exp.smooth_corner_field()).expect("same grid");
    s
}

pub fn weak_layer_point(spec: &ProblemSpec, grid: &Grid, options: ExpansionOptions) -> Result<WeakLayerPoint> {
    let builder = ExpansionBuilder::new(spec, grid, options)?;
    let exp = builder.build(spec.eps, Variant::WithCompat)?;
    let psi_h = solve_full(spec, grid)?.psi;
    let d = psi_h.sub(&smooth_part(&exp))?;
    Ok(WeakLayerPoint { eps: spec.eps, value: linf(&d), gradient: gradient_linf(&d), layer_resolved: grid.resolves_layer(spec.eps) })
}

/// Fits the decay of `psi_h - S_h` and of its gradient over `eps_list`.
pub fn weak_layer_check(
    spec: &ProblemSpec,
    mesh: &MeshSpec,
    eps_list: &[f64],
    options: ExpansionOptions,
    jobs: usize,
) -> Result<WeakLayerReport> {
    let results = parallel_map(eps_list, jobs, |&eps| {
        let s = spec.with_eps(eps)?;
        let grid = mesh.grid_for(eps, s.b_min())?;
        weak_layer_point(&s, &grid, options)
    });
    let mut points = results.into_iter().collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    if points.iter().all(|p| p.value == 0.0 && p.gradient == 0.0) {
        return Ok(WeakLayerReport { points, value_fit: None, gradient_fit: None, trivially_passed: true });
    }
    let used: Vec<&WeakLayerPoint> = points.iter().filter(|p| p.layer_resolved).collect();
    let value_fit = estimate_order(&used.iter().map(|p| (p.eps, p.value)).collect::<Vec<_>>())?;
    let gradient_fit = estimate_order(&used.iter().map(|p| (p.eps, p.gradient)).collect::<Vec<_>>())?;
    Ok(WeakLayerReport { points, value_fit: Some(value_fit), gradient_fit: Some(gradient_fit), trivially_passed: false })
}

/// Which discrete problem a manufactured solution is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MmsTarget {
    Full,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmsRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    pub error_linf: f64,
    pub error_l2: f64,
}

/// Errors against a manufactured solution on uniform grids, with the orders between
/// consecutive grids and a least-squares order over all of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmsReport {
    pub target: MmsTarget,
    pub rows: Vec<MmsRow>,
    /// `log2(e_k / e_{k+1}) / log2(h_k / h_{k+1})` in L-infinity.
    pub local_orders: Vec<f64>,
    pub order_linf: Option<OrderFit>,
}

impl MmsReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,h,error_linf,error_l2\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.n, fmt_f64(r.h), fmt_f64(r.error_linf), fmt_f64(r.error_l2)));
        }
        if let Some(fit) = &self.order_linf {
            s.push_str(&format!("order,,{},\n", fmt_f64(fit.slope)));
        }
        s
    }
}

/// Runs the manufactured-solution study for `psi_star` on uniform `N x N` grids.
///
/// `spec.f` must be the load that `psi_star` produces. The full problem takes its
/// boundary data from `spec`; the reduced problem takes `data`.
pub fn mms_convergence(
    target: MmsTarget,
    spec: &ProblemSpec,
    data: &ReducedData,
    psi_star: &(dyn Fn(f64, f64) -> f64 + Sync),
    ns: &[usize],
) -> Result<MmsReport> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let grid = uniform_grid(n)?;
        let psi = match target {
            MmsTarget::Full => solve_full(spec, &grid)?.psi,
            MmsTarget::Reduced => {
                let f = sample(&grid, |x, y| (spec.f)(x, y))?;
                ReducedSolver::new(&grid, spec.b, spec.c)?.solve(&f, data, CORNER_TOLERANCE)?
            }
        };
        let d = psi.sub(&sample(&grid, psi_star)?)?;
        rows.push(MmsRow { n, h: 1.0 / n as f64, error_linf: linf(&d), error_l2: l2(&d) });
    }
    let local_orders =
        rows.windows(2).map(|w| (w[0].error_linf / w[1].error_linf).ln() / (w[0].h / w[1].h).ln()).collect();
    let order_linf = if rows.len() >= 3 {
        Some(estimate_order(&rows.iter().map(|r| (r.h, r.error_linf)).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(MmsReport { target, rows, local_orders, order_linf })
}
