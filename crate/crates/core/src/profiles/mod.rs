//! Exponential-polynomial layer profiles and their exact calculus.
//!
//! An edge profile is `sum_k c_k(t) xi^k exp(-b xi)` in the stretched normal variable
//! `xi` and the tangential coordinate `t`; a corner profile is
//! `sum_{k,l} p_kl xi^k eta^l exp(-b1 xi - b2 eta)`. Derivatives, sums and the profile
//! equations are solved exactly on the coefficients.

pub mod cheb;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd_ops::Edge;
use crate::linalg::constrained_lstsq;
use crate::mesh::{Field, Grid};

pub use cheb::ChebSeries;

/// `sum_k c_k(t) xi^k exp(-rate xi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpPoly1D {
    pub rate: f64,
    pub coeffs: Vec<ChebSeries>,
}

impl ExpPoly1D {
    pub fn zero(rate: f64) -> ExpPoly1D {
        ExpPoly1D { rate, coeffs: Vec::new() }
    }

    pub fn new(rate: f64, coeffs: Vec<ChebSeries>) -> ExpPoly1D {
        let mut p = ExpPoly1D { rate, coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree in `xi`; zero for the zero profile.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, k: usize) -> ChebSeries {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    /// Polynomial coefficients in `xi` at a fixed tangential position.
    pub fn at_tangent(&self, t: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.eval(t)).collect()
    }

    pub fn eval(&self, xi: f64, t: f64) -> f64 {
        horner(&self.at_tangent(t), xi) * (-self.rate * xi).exp()
    }

    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.coeff_norm()))
    }
}

/// `d/dxi`.
pub fn expoly_dxi(p: &ExpPoly1D) -> ExpPoly1D {
    let n = p.coeffs.len();
    let coeffs = (0..n)
        .map(|k| {
            let up = if k + 1 < n { p.coeffs[k + 1].scale((k + 1) as f64) } else { ChebSeries::zero() };
            up.add_scaled(-p.rate, &p.coeffs[k])
        })
        .collect();
    ExpPoly1D::new(p.rate, coeffs)
}

/// `d/dt` along the edge.
pub fn expoly_dt(p: &ExpPoly1D) -> ExpPoly1D {
    ExpPoly1D::new(p.rate, p.coeffs.iter().map(|c| c.derivative()).collect())
}

pub fn expoly_mul_scalar(p: &ExpPoly1D, a: f64) -> ExpPoly1D {
    ExpPoly1D::new(p.rate, p.coeffs.iter().map(|c| c.scale(a)).collect())
}

/// Sum of two profiles with the same decay rate.
pub fn expoly_add(p: &ExpPoly1D, q: &ExpPoly1D) -> Result<ExpPoly1D> {
    if p.rate != q.rate {
        return Err(Error::InvalidArgument(format!(
            "cannot add profiles with decay rates {} and {}",
            p.rate, q.rate
        )));
    }
    let n = p.coeffs.len().max(q.coeffs.len());
    Ok(ExpPoly1D::new(p.rate, (0..n).map(|k| p.coeff(k).add(&q.coeff(k))).collect()))
}

fn dxi_n(p: &ExpPoly1D, n: usize) -> ExpPoly1D {
    (0..n).fold(p.clone(), |q, _| expoly_dxi(&q))
}

fn dt_n(p: &ExpPoly1D, n: usize) -> ExpPoly1D {
    (0..n).fold(p.clone(), |q, _| expoly_dt(&q))
}

fn lin(terms: &[(f64, &ExpPoly1D)], rate: f64) -> ExpPoly1D {
    let mut out = ExpPoly1D::zero(rate);
    for (a, p) in terms {
        out = expoly_add(&out, &expoly_mul_scalar(p, *a)).expect("equal rates");
    }
    out
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// The five pieces of the full operator written in edge-stretched variables:
/// `L = eps^-3 A + eps^-2 B + eps^-1 C + D + eps E` with
/// `A = d_xi^4 + bn d_xi^3`, `B = (bt d_t - c) d_xi^2`, `C = 2 d_xi^2 d_t^2 + bn d_xi d_t^2`,
/// `D = (bt d_t - c) d_t^2`, `E = d_t^4`. `bn` is the normal and `bt` the tangential
/// convection component.
pub fn edge_operator_parts(p: &ExpPoly1D, bn: f64, bt: f64, c: f64) -> [ExpPoly1D; 5] {
    let r = p.rate;
    let p1 = dxi_n(p, 1);
    let p2 = dxi_n(p, 2);
    let p3 = dxi_n(p, 3);
    let p4 = dxi_n(p, 4);
    let a = lin(&[(1.0, &p4), (bn, &p3)], r);
    let b = lin(&[(bt, &expoly_dt(&p2)), (-c, &p2)], r);
    let cc = lin(&[(2.0, &dt_n(&p2, 2)), (bn, &dt_n(&p1, 2))], r);
    let t2 = dt_n(p, 2);
    let d = lin(&[(bt, &expoly_dt(&t2)), (-c, &t2)], r);
    let e = dt_n(p, 4);
    [a, b, cc, d, e]
}

/// Solves `(d_xi^4 + b d_xi^3) v = rhs` for a decaying profile with `d_xi v(0) = neumann0`.
///
/// Writing `v = p(xi) exp(-b xi)` turns the operator into
/// `p'''' - 3b p''' + 3b^2 p'' - b^3 p' = q`, whose polynomial solution has degree
/// `deg q + 1` (the exponential is resonant with the operator's kernel).
pub fn solve_edge_profile(b: f64, rhs: &ExpPoly1D, neumann0: &ChebSeries) -> Result<ExpPoly1D> {
    if !(b > 0.0) {
        return Err(Error::InvalidArgument(format!("decay rate must be positive, got {b}")));
    }
    if !rhs.is_zero() && rhs.rate != b {
        return Err(Error::InvalidArgument(format!(
            "right-hand side decays at rate {}, expected {b}",
            rhs.rate
        )));
    }
    // s = p' solves (D - b)^3 s = q; (D - b)^{-1} = -(1/b) sum_m (D/b)^m on polynomials.
    let mut s: Vec<ChebSeries> = rhs.coeffs.clone();
    for _ in 0..3 {
        s = inv_shift(&s, b);
    }
    let s0 = s.first().cloned().unwrap_or_default();
    // p(0) from the Neumann condition p'(0) - b p(0) = neumann0.
    let p0 = s0.add_scaled(-1.0, neumann0).scale(1.0 / b);
    let mut coeffs = vec![p0];
    for (k, sk) in s.iter().enumerate() {
        coeffs.push(sk.scale(1.0 / (k + 1) as f64));
    }
    Ok(ExpPoly1D::new(b, coeffs))
}

/// `(D - b)^{-1}` on a polynomial in `xi` with series coefficients.
fn inv_shift(q: &[ChebSeries], b: f64) -> Vec<ChebSeries> {
    let n = q.len();
    let mut out = vec![ChebSeries::zero(); n];
    let mut term: Vec<ChebSeries> = q.to_vec();
    let mut scale = -1.0 / b;
    for _ in 0..n {
        for k in 0..n {
            out[k] = out[k].add_scaled(scale, &term[k]);
        }
        // term <- D term
        term = (0..n)
            .map(|k| if k + 1 < n { term[k + 1].scale((k + 1) as f64) } else { ChebSeries::zero() })
            .collect();
        scale /= b;
    }
    out
}

/// `sum_{k,l} coeffs[k][l] xi^k eta^l exp(-rates[0] xi - rates[1] eta)`; square coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpPoly2D {
    pub rates: [f64; 2],
    pub coeffs: Vec<Vec<f64>>,
}

impl ExpPoly2D {
    pub fn zero(rates: [f64; 2]) -> ExpPoly2D {
        ExpPoly2D { rates, coeffs: vec![vec![0.0]] }
    }

    /// Table of size `(d + 1) x (d + 1)`.
    pub fn with_degree(rates: [f64; 2], d: usize) -> ExpPoly2D {
        ExpPoly2D { rates, coeffs: vec![vec![0.0; d + 1]; d + 1] }
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Smallest `d` such that all nonzero coefficients have both exponents at most `d`.
    pub fn degree(&self) -> usize {
        let mut d = 0;
        for (k, row) in self.coeffs.iter().enumerate() {
            for (l, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    d = d.max(k).max(l);
                }
            }
        }
        d
    }

    /// Largest `k + l` over the nonzero coefficients.
    pub fn total_degree(&self) -> usize {
        let mut d = 0;
        for (k, row) in self.coeffs.iter().enumerate() {
            for (l, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    d = d.max(k + l);
                }
            }
        }
        d
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.coeffs.get(k).and_then(|r| r.get(l)).copied().unwrap_or(0.0)
    }

    pub fn resized(&self, d: usize) -> ExpPoly2D {
        let mut out = ExpPoly2D::with_degree(self.rates, d);
        for k in 0..=d {
            for l in 0..=d {
                out.coeffs[k][l] = self.get(k, l);
            }
        }
        out
    }

    pub fn eval(&self, xi: f64, eta: f64) -> f64 {
        let rows: Vec<f64> = self.coeffs.iter().map(|r| horner(r, eta)).collect();
        horner(&rows, xi) * (-self.rates[0] * xi - self.rates[1] * eta).exp()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|r| r.iter().all(|&v| v == 0.0))
    }

    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, a: f64) -> ExpPoly2D {
        ExpPoly2D { rates: self.rates, coeffs: self.coeffs.iter().map(|r| r.iter().map(|v| a * v).collect()).collect() }
    }

    pub fn add(&self, other: &ExpPoly2D) -> Result<ExpPoly2D> {
        if self.rates != other.rates {
            return Err(Error::InvalidArgument("corner profiles with different decay rates".into()));
        }
        let d = self.max_degree().max(other.max_degree());
        let mut out = self.resized(d);
        for k in 0..=d {
            for l in 0..=d {
                out.coeffs[k][l] += other.get(k, l);
            }
        }
        Ok(out)
    }

    pub fn dxi(&self) -> ExpPoly2D {
        let d = self.max_degree();
        let mut out = ExpPoly2D::with_degree(self.rates, d);
        for k in 0..=d {
            for l in 0..=d {
                out.coeffs[k][l] = (k + 1) as f64 * self.get(k + 1, l) - self.rates[0] * self.get(k, l);
            }
        }
        out
    }

    pub fn deta(&self) -> ExpPoly2D {
        let d = self.max_degree();
        let mut out = ExpPoly2D::with_degree(self.rates, d);
        for k in 0..=d {
            for l in 0..=d {
                out.coeffs[k][l] = (l + 1) as f64 * self.get(k, l + 1) - self.rates[1] * self.get(k, l);
            }
        }
        out
    }

    pub fn laplacian(&self) -> ExpPoly2D {
        self.dxi().dxi().add(&self.deta().deta()).expect("same rates")
    }

    /// `Delta^2 z + (b . grad) Delta z` in stretched corner variables, with `b = rates`.
    pub fn corner_operator(&self) -> ExpPoly2D {
        let lap = self.laplacian();
        let conv = lap.dxi().scale(self.rates[0]).add(&lap.deta().scale(self.rates[1])).expect("same rates");
        lap.laplacian().add(&conv).expect("same rates")
    }

    /// Polynomial coefficients in `xi` of `z(xi, 0)` (exponential factor dropped).
    pub fn trace_eta0(&self) -> Vec<f64> {
        self.coeffs.iter().map(|r| r[0]).collect()
    }

    /// Polynomial coefficients in `eta` of `z(0, eta)`.
    pub fn trace_xi0(&self) -> Vec<f64> {
        self.coeffs[0].clone()
    }
}

/// Outcome of the coefficient matching for a corner profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityReport {
    pub solvable: bool,
    /// Largest misfit of the interior equation over the matched monomials.
    pub equation_residual: f64,
    /// Largest misfit of the Neumann conditions.
    pub boundary_residual: f64,
    pub tolerance: f64,
    /// Monomial `xi^k eta^l` carrying the largest interior misfit.
    pub worst_monomial: (usize, usize),
    /// Degree of the returned polynomial table.
    pub degree: usize,
    /// Name of the violated condition when the caller can identify it.
    pub condition: Option<String>,
}

impl SolvabilityReport {
    pub fn residual(&self) -> f64 {
        self.equation_residual.max(self.boundary_residual)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "residual {:.3e} (equation {:.3e} at xi^{} eta^{}, boundary {:.3e}) vs tolerance {:.3e}",
            self.residual(),
            self.equation_residual,
            self.worst_monomial.0,
            self.worst_monomial.1,
            self.boundary_residual,
            self.tolerance
        );
        if let Some(c) = &self.condition {
            let _ = write!(s, "; violated condition: {c}");
        }
        s
    }
}

/// Neumann data for a corner profile: polynomial parts of `z_eta(xi, 0)` (rate `b1`)
/// and `z_xi(0, eta)` (rate `b2`).
#[derive(Debug, Clone, PartialEq)]
pub struct CornerNeumann {
    pub eta0: Vec<f64>,
    pub xi0: Vec<f64>,
}

fn poly_degree(p: &[f64]) -> usize {
    p.iter().rposition(|&v| v != 0.0).unwrap_or(0)
}

/// Finds the lowest-degree polynomial corner profile `z` with
/// `Delta^2 z + (b . grad) Delta z = rhs` and, when given, the Neumann conditions.
///
/// The ansatz uses the monomials `xi^k eta^l` with `k + l <= d`. Degrees from the data
/// degree up to `max_degree` are tried in turn; the first one that matches every
/// coefficient within `tolerance` is returned. Otherwise the least-squares match at
/// `max_degree` is returned with an unsolvable report. The Neumann rows are imposed
/// exactly whenever they are consistent; the equation is matched in the least-squares
/// sense on the remaining freedom. With `tolerance = None` the threshold is `1e-8`
/// times the size of the data.
pub fn solve_corner_profile(
    rates: [f64; 2],
    rhs: &ExpPoly2D,
    neumann: Option<&CornerNeumann>,
    max_degree: usize,
    tolerance: Option<f64>,
) -> Result<(ExpPoly2D, SolvabilityReport)> {
    if !(rates[0] > 0.0 && rates[1] > 0.0) {
        return Err(Error::InvalidArgument(format!("decay rates must be positive, got {rates:?}")));
    }
    if !rhs.is_zero() && rhs.rates != rates {
        return Err(Error::InvalidArgument("right-hand side has different decay rates".into()));
    }
    let mut data_deg = rhs.total_degree();
    let mut scale = rhs.coeff_norm();
    if let Some(nm) = neumann {
        data_deg = data_deg.max(poly_degree(&nm.eta0)).max(poly_degree(&nm.xi0));
        scale = nm.eta0.iter().chain(&nm.xi0).fold(scale, |m, v| m.max(v.abs()));
    }
    if data_deg > max_degree {
        return Err(Error::DegreeExhausted { needed: data_deg, max: max_degree });
    }
    let tol = tolerance.unwrap_or(1e-8 * scale.max(f64::MIN_POSITIVE));
    let mut last = None;
    for d in data_deg..=max_degree {
        let (z, report) = match_corner(rates, rhs, neumann, d, tol);
        if report.solvable {
            return Ok((z, report));
        }
        last = Some((z, report));
    }
    Ok(last.expect("at least one degree tried"))
}

fn match_corner(
    rates: [f64; 2],
    rhs: &ExpPoly2D,
    neumann: Option<&CornerNeumann>,
    d: usize,
    tol: f64,
) -> (ExpPoly2D, SolvabilityReport) {
    let monomials: Vec<(usize, usize)> = (0..=d).flat_map(|k| (0..=d - k).map(move |l| (k, l))).collect();
    let nunk = monomials.len();
    let mut a = DMatrix::zeros(nunk, nunk);
    let nrows = if neumann.is_some() { 2 * (d + 1) } else { 0 };
    let mut c = DMatrix::zeros(nrows, nunk);
    for (col, &(k, l)) in monomials.iter().enumerate() {
        let mut e = ExpPoly2D::with_degree(rates, d);
        e.coeffs[k][l] = 1.0;
        let img = e.corner_operator();
        for (row, &(kk, ll)) in monomials.iter().enumerate() {
            a[(row, col)] = img.get(kk, ll);
        }
        if neumann.is_some() {
            let te = e.deta().trace_eta0();
            let tx = e.dxi().trace_xi0();
            for r in 0..=d {
                c[(r, col)] = te[r];
                c[(d + 1 + r, col)] = tx[r];
            }
        }
    }
    let b = DVector::from_fn(nunk, |r, _| rhs.get(monomials[r].0, monomials[r].1));
    let mut dvec = DVector::zeros(nrows);
    if let Some(nm) = neumann {
        for r in 0..=d {
            dvec[r] = nm.eta0.get(r).copied().unwrap_or(0.0);
            dvec[d + 1 + r] = nm.xi0.get(r).copied().unwrap_or(0.0);
        }
    }
    let x = constrained_lstsq(&a, &b, &c, &dvec);
    let mut z = ExpPoly2D::with_degree(rates, d);
    for (col, &(k, l)) in monomials.iter().enumerate() {
        z.coeffs[k][l] = x[col];
    }
    let res = &a * &x - &b;
    let (mut worst, mut eq) = ((0, 0), 0.0);
    for (r, &m) in monomials.iter().enumerate() {
        if res[r].abs() > eq {
            eq = res[r].abs();
            worst = m;
        }
    }
    let bres = if nrows > 0 { (&c * &x - &dvec).abs().max() } else { 0.0 };
    let report = SolvabilityReport {
        solvable: eq <= tol && bres <= tol,
        equation_residual: eq,
        boundary_residual: bres,
        tolerance: tol,
        worst_monomial: worst,
        degree: d,
        condition: None,
    };
    (z, report)
}

/// Nodal values of an edge profile `v(x, y) = v~(dist / eps, t)` attached to `edge`
/// (`Left` or `Bottom`), scaled by `factor`.
pub fn realize_edge(p: &ExpPoly1D, edge: Edge, eps: f64, grid: &Grid, factor: f64) -> Result<Field> {
    let n = grid.n();
    let nodes = grid.nodes();
    let mut out = Field::zeros(grid);
    if p.is_zero() || factor == 0.0 {
        return Ok(out);
    }
    // Coefficient values at every tangential node.
    let tab: Vec<Vec<f64>> = nodes.iter().map(|&t| p.at_tangent(t)).collect();
    for a in 0..=n {
        let xi = nodes[a] / eps;
        let decay = (-p.rate * xi).exp();
        if decay == 0.0 {
            break;
        }
        for (t, coeffs) in tab.iter().enumerate() {
            let v = factor * horner(coeffs, xi) * decay;
            match edge {
                Edge::Left => out.set(a, t, v),
                Edge::Bottom => out.set(t, a, v),
                _ => return Err(Error::InvalidArgument("layers live on the left and bottom edges".into())),
            }
        }
    }
    Ok(out)
}

/// Nodal values of `factor * z(x / eps, y / eps)`.
pub fn realize_corner(z: &ExpPoly2D, eps: f64, grid: &Grid, factor: f64) -> Field {
    let n = grid.n();
    let mut out = Field::zeros(grid);
    if z.is_zero() || factor == 0.0 {
        return out;
    }
    for j in 0..=n {
        for i in 0..=n {
            let v = z.eval(grid.x(i) / eps, grid.y(j) / eps);
            if v != 0.0 {
                out.set(i, j, factor * v);
            }
        }
    }
    out
}

/// Human-readable form `(c0 + c1*xi + ...)·exp(-b·xi)` of a profile at tangential position `t`.
pub fn pretty_edge(p: &ExpPoly1D, t: f64, var: &str) -> String {
    let c = p.at_tangent(t);
    let mut s = String::from("(");
    if c.is_empty() {
        s.push('0');
    }
    for (k, v) in c.iter().enumerate() {
        if k > 0 {
            s.push_str(" + ");
        }
        match k {
            0 => {
                let _ = write!(s, "{v:.17e}");
            }
            1 => {
                let _ = write!(s, "{v:.17e}*{var}");
            }
            _ => {
                let _ = write!(s, "{v:.17e}*{var}^{k}");
            }
        }
    }
    let _ = write!(s, ")·exp(-{:.17e}·{var})", p.rate);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> ChebSeries {
        ChebSeries::constant(v)
    }

    #[test]
    fn dxi_matches_product_rule() {
        let p = ExpPoly1D::new(2.0, vec![c(1.0), c(3.0)]);
        // d/dxi [(1 + 3 xi) e^{-2 xi}] = (3 - 2 - 6 xi) e^{-2 xi}
        let d = expoly_dxi(&p);
        assert_eq!(d.at_tangent(0.0), vec![1.0, -6.0]);
        let h = 1e-6;
        let fd = (p.eval(0.7 + h, 0.0) - p.eval(0.7 - h, 0.0)) / (2.0 * h);
        assert!((fd - d.eval(0.7, 0.0)).abs() < 1e-8);
    }

    #[test]
    fn add_rejects_mismatched_rates() {
        assert!(expoly_add(&ExpPoly1D::zero(1.0), &ExpPoly1D::zero(2.0)).is_err());
    }

    #[test]
    fn edge_profile_solves_ode() {
        let b = 1.7;
        let rhs = ExpPoly1D::new(b, vec![ChebSeries::interpolate(|t| (2.0 * t).cos(), 20), c(0.4), c(-0.2)]);
        let g = ChebSeries::interpolate(|t| t * t, 4);
        let v = solve_edge_profile(b, &rhs, &g).unwrap();
        assert_eq!(v.degree(), 3);
        let parts = edge_operator_parts(&v, b, 0.0, 0.0);
        let diff = expoly_add(&parts[0], &expoly_mul_scalar(&rhs, -1.0)).unwrap();
        assert!(diff.coeff_norm() < 1e-12);
        let dv = expoly_dxi(&v);
        for t in [0.0, 0.4, 1.0] {
            assert!((dv.eval(0.0, t) - t * t).abs() < 1e-13);
        }
    }

    #[test]
    fn homogeneous_edge_profile() {
        let b = 2.0;
        let g = c(-3.0);
        let v = solve_edge_profile(b, &ExpPoly1D::zero(b), &g).unwrap();
        assert_eq!(v.degree(), 0);
        assert!((v.eval(0.0, 0.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn corner_constant_profile() {
        let rates = [1.0, 2.0];
        let nm = CornerNeumann { eta0: vec![-2.0 * 0.3], xi0: vec![-0.3] };
        let (z, rep) = solve_corner_profile(rates, &ExpPoly2D::zero(rates), Some(&nm), 1, None).unwrap();
        assert!(rep.solvable, "{}", rep.summary());
        assert!((z.get(0, 0) - 0.3).abs() < 1e-14);
        assert_eq!(z.degree(), 0);
    }

    #[test]
    fn corner_inconsistent_data_is_reported() {
        let rates = [1.0, 1.0];
        let rhs = ExpPoly2D { rates, coeffs: vec![vec![1.0, 0.0], vec![0.0, 0.0]] };
        let nm = CornerNeumann { eta0: vec![0.0, 0.0], xi0: vec![0.0, 0.0] };
        let (_, rep) = solve_corner_profile(rates, &rhs, Some(&nm), 1, None).unwrap();
        assert!(!rep.solvable);
        assert_eq!(rep.worst_monomial, (0, 0));
    }

    #[test]
    fn corner_degree_exhausted() {
        let rates = [1.0, 1.0];
        let rhs = ExpPoly2D { rates, coeffs: vec![vec![0.0, 0.0, 1.0], vec![0.0; 3], vec![0.0; 3]] };
        assert!(matches!(
            solve_corner_profile(rates, &rhs, None, 1, None),
            Err(Error::DegreeExhausted { needed: 2, max: 1 })
        ));
    }

    #[test]
    fn pretty_printing() {
        let p = ExpPoly1D::new(1.0, vec![c(0.5), c(-2.0)]);
        let s = pretty_edge(&p, 0.0, "xi");
        assert!(s.starts_with("(5.00000000000000000e-1 + -2.00000000000000000e0*xi)·exp(-1.00000000000000000e0·xi)"), "{s}");
    }
}
