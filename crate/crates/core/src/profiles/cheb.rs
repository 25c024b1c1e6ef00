//! Chebyshev series on `[0, 1]`, used for functions of the coordinate along an edge.
//!
//! Traces of the outer solutions are represented this way so that tangential
//! derivatives of any order are exact operations on coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::constrained_lstsq;

/// `f(t) = sum_k a_k T_k(2t - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ChebSeries {
    coeffs: Vec<f64>,
}

impl ChebSeries {
    pub fn zero() -> ChebSeries {
        ChebSeries { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> ChebSeries {
        ChebSeries { coeffs: vec![c] }.trimmed()
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> ChebSeries {
        ChebSeries { coeffs }.trimmed()
    }

    /// Interpolates `f` at `degree + 1` Chebyshev points; accurate to rounding for
    /// analytic `f` once the degree is large enough.
    pub fn interpolate(f: impl Fn(f64) -> f64, degree: usize) -> ChebSeries {
        let m = degree + 1;
        let pts: Vec<f64> = (0..m)
            .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos())
            .collect();
        let vals: Vec<f64> = pts.iter().map(|s| f(0.5 * (s + 1.0))).collect();
        let coeffs = (0..m)
            .map(|k| {
                let s: f64 = (0..m)
                    .map(|j| vals[j] * (k as f64 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos())
                    .sum();
                if k == 0 {
                    s / m as f64
                } else {
                    2.0 * s / m as f64
                }
            })
            .collect();
        ChebSeries::from_coeffs(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn trimmed(mut self) -> ChebSeries {
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the series; zero for the zero function.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = 2.0 * t - 1.0;
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &a in self.coeffs.iter().skip(1).rev() {
            let b0 = a + 2.0 * s * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        match self.coeffs.first() {
            Some(&a0) => a0 + s * b1 - b2,
            None => 0.0,
        }
    }

    pub fn derivative(&self) -> ChebSeries {
        let a = &self.coeffs;
        if a.len() <= 1 {
            return ChebSeries::zero();
        }
        let n = a.len() - 1;
        let mut d = vec![0.0; n];
        d[n - 1] = 2.0 * n as f64 * a[n];
        if n >= 2 {
            d[n - 2] = 2.0 * (n - 1) as f64 * a[n - 1];
        }
        for k in (1..n.saturating_sub(1)).rev() {
            d[k - 1] = d[k + 1] + 2.0 * k as f64 * a[k];
        }
        d[0] *= 0.5;
        // Chain rule for s = 2t - 1.
        ChebSeries::from_coeffs(d.into_iter().map(|v| 2.0 * v).collect())
    }

    pub fn nth_derivative(&self, k: usize) -> ChebSeries {
        let mut out = self.clone();
        for _ in 0..k {
            out = out.derivative();
        }
        out
    }

    pub fn scale(&self, a: f64) -> ChebSeries {
        if a == 0.0 {
            return ChebSeries::zero();
        }
        ChebSeries::from_coeffs(self.coeffs.iter().map(|c| a * c).collect())
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &ChebSeries) -> ChebSeries {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
        ChebSeries::from_coeffs((0..n).map(|k| get(&self.coeffs, k) + a * get(&other.coeffs, k)).collect())
    }

    pub fn add(&self, other: &ChebSeries) -> ChebSeries {
        self.add_scaled(1.0, other)
    }

    /// Largest absolute coefficient, a cheap size measure.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Values of the `order`-th derivative of `T_0 .. T_degree` (shifted to `[0, 1]`) at `t`.
pub fn basis_row(t: f64, degree: usize, order: usize) -> Vec<f64> {
    (0..=degree)
        .map(|m| {
            let mut e = vec![0.0; m + 1];
            e[m] = 1.0;
            ChebSeries { coeffs: e }.nth_derivative(order).eval(t)
        })
        .collect()
}

/// A linear condition `d^order f / dt^order (t) = value` on a fitted series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCondition {
    pub order: usize,
    pub t: f64,
    pub value: f64,
}

/// Weighted least-squares fit of samples `(t_i, v_i)` with weights `w_i`, subject to
/// point conditions.
pub fn fit(t: &[f64], v: &[f64], w: &[f64], degree: usize, conditions: &[PointCondition]) -> ChebSeries {
    let m = degree + 1;
    let mut a = DMatrix::zeros(t.len(), m);
    let mut b = DVector::zeros(t.len());
    for (i, (&ti, &vi)) in t.iter().zip(v).enumerate() {
        let sw = w[i].sqrt();
        for (k, val) in basis_row(ti, degree, 0).into_iter().enumerate() {
            a[(i, k)] = sw * val;
        }
        b[i] = sw * vi;
    }
    let mut c = DMatrix::zeros(conditions.len(), m);
    let mut d = DVector::zeros(conditions.len());
    for (r, pc) in conditions.iter().enumerate() {
        for (k, val) in basis_row(pc.t, degree, pc.order).into_iter().enumerate() {
            c[(r, k)] = val;
        }
        d[r] = pc.value;
    }
    let x = constrained_lstsq(&a, &b, &c, &d);
    ChebSeries::from_coeffs(x.iter().copied().collect())
}

/// Values of the `order`-th derivative of every basis function at every point, one row per point.
pub fn basis_matrix(t: &[f64], degree: usize, order: usize) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = t.iter().map(|&ti| basis_row(ti, degree, order)).collect();
    DMatrix::from_fn(t.len(), degree + 1, |i, k| rows[i][k])
}

/// Tensor-product series `f(x, y) = sum_kl a_kl T_k(2x - 1) T_l(2y - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries2D {
    /// `coeffs[(k, l)]` multiplies `T_k(x) T_l(y)`.
    pub coeffs: DMatrix<f64>,
}

impl ChebSeries2D {
    pub fn zero(degree: usize) -> ChebSeries2D {
        ChebSeries2D { coeffs: DMatrix::zeros(degree + 1, degree + 1) }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.nrows() - 1
    }

    /// Weighted least-squares fit of tensor data `u[(i, j)]` at `(x_i, y_j)`.
    pub fn fit(x: &[f64], wx: &[f64], y: &[f64], wy: &[f64], u: &DMatrix<f64>, degree: usize) -> ChebSeries2D {
        let proj = |t: &[f64], w: &[f64]| {
            let mut v = basis_matrix(t, degree, 0);
            for (i, wi) in w.iter().enumerate() {
                v.row_mut(i).scale_mut(wi.sqrt());
            }
            let pinv = v.pseudo_inverse(1e-13).expect("nonnegative tolerance");
            let mut p = pinv;
            for (i, wi) in w.iter().enumerate() {
                p.column_mut(i).scale_mut(wi.sqrt());
            }
            p
        };
        let px = proj(x, wx);
        let py = proj(y, wy);
        ChebSeries2D { coeffs: &px * u * py.transpose() }
    }

    /// `d^dx/dx^dx d^dy/dy^dy f` at the tensor points, as a matrix indexed `(i, j)`.
    pub fn sample(&self, x: &[f64], y: &[f64], dx: usize, dy: usize) -> DMatrix<f64> {
        let d = self.degree();
        basis_matrix(x, d, dx) * &self.coeffs * basis_matrix(y, d, dy).transpose()
    }

    pub fn eval(&self, x: f64, y: f64, dx: usize, dy: usize) -> f64 {
        self.sample(&[x], &[y], dx, dy)[(0, 0)]
    }

    pub fn scale(&self, a: f64) -> ChebSeries2D {
        ChebSeries2D { coeffs: &self.coeffs * a }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_polynomial() {
        // f(t) = t^3 - 2 t, f'(t) = 3 t^2 - 2, f''(t) = 6 t.
        let f = ChebSeries::interpolate(|t| t.powi(3) - 2.0 * t, 5);
        for t in [0.0, 0.3, 0.71, 1.0] {
            assert!((f.eval(t) - (t.powi(3) - 2.0 * t)).abs() < 1e-14);
            assert!((f.derivative().eval(t) - (3.0 * t * t - 2.0)).abs() < 1e-13);
            assert!((f.nth_derivative(2).eval(t) - 6.0 * t).abs() < 1e-12);
            assert!(f.nth_derivative(4).eval(t).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_of_analytic_function() {
        let f = ChebSeries::interpolate(|t| (3.0 * t).sin(), 24);
        for t in [0.0, 0.5, 1.0] {
            assert!((f.eval(t) - (3.0 * t).sin()).abs() < 1e-14);
            assert!((f.nth_derivative(3).eval(t) + 27.0 * (3.0 * t).cos()).abs() < 1e-7);
        }
    }

    #[test]
    fn tensor_fit_reproduces_polynomials() {
        let t: Vec<f64> = (0..=30).map(|k| k as f64 / 30.0).collect();
        let w = vec![1.0; 31];
        let u = DMatrix::from_fn(31, 31, |i, j| t[i].powi(3) * t[j] - 2.0 * t[j].powi(4));
        let f = ChebSeries2D::fit(&t, &w, &t, &w, &u, 6);
        let (x, y) = (0.3, 0.8);
        assert!((f.eval(x, y, 0, 0) - (x * x * x * y - 2.0 * y.powi(4))).abs() < 1e-12);
        assert!((f.eval(x, y, 2, 1) - 6.0 * x).abs() < 1e-9);
        assert!((f.eval(x, y, 0, 4) + 48.0).abs() < 1e-7);
    }

    #[test]
    fn constrained_fit_honours_conditions() {
        let t: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
        let v: Vec<f64> = t.iter().map(|t| t * (1.0 - t) + 0.01 * (40.0 * t).sin()).collect();
        let w = vec![1.0 / 40.0; 41];
        let conds = [
            PointCondition { order: 0, t: 0.0, value: 0.0 },
            PointCondition { order: 1, t: 0.0, value: 1.0 },
        ];
        let f = fit(&t, &v, &w, 6, &conds);
        assert!(f.eval(0.0).abs() < 1e-13);
        assert!((f.derivative().eval(0.0) - 1.0).abs() < 1e-12);
        assert!((f.eval(0.5) - 0.25).abs() < 0.02);
    }
}
