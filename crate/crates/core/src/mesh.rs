//! Tensor-product meshes on the unit square and nodal fields living on them.
//!
//! Nodes are numbered lexicographically with `x` running fastest:
//! node `(i, j)` has flat index `j * (n + 1) + i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Uniform,
    Shishkin,
}

/// Tensor grid with identical node sets in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: GridKind,
    n: usize,
    tau: f64,
    nodes: Vec<f64>,
}

/// Serialized form of a grid: enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub kind: GridKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
}

pub fn uniform_grid(n: usize) -> Result<Grid> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "uniform grid needs an even N >= 4, got {n}"
        )));
    }
    let h = 1.0 / n as f64;
    let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    nodes[n] = 1.0;
    Ok(Grid { kind: GridKind::Uniform, n, tau: 0.5, nodes })
}

/// Piecewise-uniform grid refined toward `x = 0` and `y = 0`, where the layers sit.
///
/// The transition point is `tau = min(1/2, sigma * eps * ln(N) / b_min)`; half of the
/// cells in each direction fall inside `[0, tau]`.
pub fn shishkin_grid(n: usize, eps: f64, b_min: f64, sigma: f64) -> Result<Grid> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "Shishkin grid needs an even N >= 8, got {n}"
        )));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    if !(b_min > 0.0) || !b_min.is_finite() {
        return Err(Error::InvalidArgument(format!("b_min must be positive, got {b_min}")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let tau = (sigma * eps * (n as f64).ln() / b_min).min(0.5);
    Ok(piecewise_uniform(GridKind::Shishkin, n, tau))
}

/// Shishkin-type grid with a prescribed transition point.
pub fn shishkin_grid_with_tau(n: usize, tau: f64) -> Result<Grid> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "Shishkin grid needs an even N >= 8, got {n}"
        )));
    }
    if !(tau > 0.0 && tau <= 0.5) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1/2], got {tau}")));
    }
    Ok(piecewise_uniform(GridKind::Shishkin, n, tau))
}

fn piecewise_uniform(kind: GridKind, n: usize, tau: f64) -> Grid {
    let half = n / 2;
    let h_fine = tau / half as f64;
    let h_coarse = (1.0 - tau) / half as f64;
    let mut nodes = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = if i <= half {
            i as f64 * h_fine
        } else {
            tau + (i - half) as f64 * h_coarse
        };
        nodes.push(x);
    }
    nodes[half] = tau;
    nodes[n] = 1.0;
    Grid { kind, n, tau, nodes }
}

impl Grid {
    pub fn from_descriptor(d: &GridDescriptor) -> Result<Grid> {
        match d.kind {
            GridKind::Uniform => uniform_grid(d.n),
            GridKind::Shishkin => shishkin_grid_with_tau(d.n, d.tau),
        }
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor { kind: self.kind, n: self.n, tau: self.tau }
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Number of cells per direction.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The 1D node set, shared by both directions.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn x(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn y(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Width of cell `[x_{i-1}, x_i]`.
    pub fn h(&self, i: usize) -> f64 {
        self.nodes[i] - self.nodes[i - 1]
    }

    pub fn min_spacing(&self) -> f64 {
        (1..=self.n).map(|i| self.h(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        (1..=self.n).map(|i| self.h(i)).fold(0.0, f64::max)
    }

    pub fn num_nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Layers of width `eps` are resolved when the spacing next to `x = 0` is at most `eps / 2`.
    pub fn resolves_layer(&self, eps: f64) -> bool {
        self.h(1) <= 0.5 * eps
    }

    /// Bisects every cell; the old nodes are the even-indexed nodes of the result.
    pub fn refine(&self) -> Grid {
        let mut nodes = Vec::with_capacity(2 * self.n + 1);
        for i in 0..self.n {
            nodes.push(self.nodes[i]);
            nodes.push(0.5 * (self.nodes[i] + self.nodes[i + 1]));
        }
        nodes.push(1.0);
        Grid { kind: self.kind, n: 2 * self.n, tau: self.tau, nodes }
    }

    /// One-dimensional trapezoid weights for the node set.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.n;
        let mut w = vec![0.0; n + 1];
        for i in 1..=n {
            let h = self.h(i);
            w[i - 1] += 0.5 * h;
            w[i] += 0.5 * h;
        }
        w
    }
}

/// Nodal values on every node of a grid, boundary included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Field {
        Field { grid: grid.clone(), values: vec![0.0; grid.num_nodes()] }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.num_nodes() {
            return Err(Error::Dimension(format!(
                "field needs {} values, got {}",
                grid.num_nodes(),
                values.len()
            )));
        }
        Ok(Field { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) -> Result<()> {
        if other.grid != self.grid {
            return Err(Error::Dimension("fields live on different grids".into()));
        }
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Values at the even-indexed nodes, i.e. restriction from `grid.refine()` back to `grid`.
    pub fn restrict_to_coarse(&self, coarse: &Grid) -> Result<Field> {
        if self.grid.n != 2 * coarse.n {
            return Err(Error::Dimension("restriction needs a grid of twice the resolution".into()));
        }
        let mut out = Field::zeros(coarse);
        for j in 0..=coarse.n {
            for i in 0..=coarse.n {
                out.set(i, j, self.at(2 * i, 2 * j));
            }
        }
        Ok(out)
    }
}

/// Samples `f` on every node. Non-finite values are rejected with their location.
pub fn sample<F: Fn(f64, f64) -> f64>(grid: &Grid, f: F) -> Result<Field> {
    let n = grid.n;
    let mut values = Vec::with_capacity(grid.num_nodes());
    for j in 0..=n {
        let y = grid.nodes[j];
        for i in 0..=n {
            let x = grid.nodes[i];
            let v = f(x, y);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, y, value: v });
            }
            values.push(v);
        }
    }
    Ok(Field { grid: grid.clone(), values })
}

/// Fallible variant of [`sample`] for evaluators that can fail on their own.
pub fn try_sample<F: Fn(f64, f64) -> Result<f64>>(grid: &Grid, f: F) -> Result<Field> {
    let n = grid.n;
    let mut values = Vec::with_capacity(grid.num_nodes());
    for j in 0..=n {
        let y = grid.nodes[j];
        for i in 0..=n {
            let x = grid.nodes[i];
            let v = f(x, y)?;
            if !v.is_finite() {
                return Err(Error::NonFinite { x, y, value: v });
            }
            values.push(v);
        }
    }
    Ok(Field { grid: grid.clone(), values })
}

/// How to build the grid for a given `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub kind: GridKind,
    #[serde(rename = "N")]
    pub n: usize,
    /// Grading constant of Shishkin grids.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_sigma() -> f64 {
    4.0
}

impl MeshSpec {
    pub fn grid_for(&self, eps: f64, b_min: f64) -> Result<Grid> {
        match self.kind {
            GridKind::Uniform => uniform_grid(self.n),
            GridKind::Shishkin => shishkin_grid(self.n, eps, b_min, self.sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shishkin_transition_sits_at_half_index() {
        let eps = 0.01;
        let g = shishkin_grid(64, eps, 1.0, 4.0).unwrap();
        let tau = 4.0 * eps * (64f64).ln();
        assert_eq!(g.tau(), tau);
        assert_eq!(g.x(32), tau);
        assert_eq!(g.x(64), 1.0);
        for i in 1..=32 {
            assert!((g.h(i) - 2.0 * tau / 64.0).abs() < 1e-15);
        }
        for i in 33..=64 {
            assert!((g.h(i) - 2.0 * (1.0 - tau) / 64.0).abs() < 1e-14);
        }
    }

    #[test]
    fn shishkin_clamps_to_uniform() {
        let g = shishkin_grid(16, 1.0, 1.0, 4.0).unwrap();
        assert_eq!(g.tau(), 0.5);
        let u = uniform_grid(16).unwrap();
        for i in 0..=16 {
            assert!((g.x(i) - u.x(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(uniform_grid(3).is_err());
        assert!(uniform_grid(7).is_err());
        assert!(shishkin_grid(6, 0.1, 1.0, 4.0).is_err());
        assert!(shishkin_grid(16, 0.0, 1.0, 4.0).is_err());
        assert!(shishkin_grid(16, 0.1, -1.0, 4.0).is_err());
    }

    #[test]
    fn sample_reports_location_of_nan() {
        let g = uniform_grid(4).unwrap();
        let err = sample(&g, |x, _| if x > 0.6 { f64::NAN } else { x }).unwrap_err();
        match err {
            Error::NonFinite { x, .. } => assert_eq!(x, 0.75),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn refine_keeps_old_nodes() {
        let g = shishkin_grid(16, 0.05, 1.0, 4.0).unwrap();
        let r = g.refine();
        for i in 0..=16 {
            assert_eq!(r.x(2 * i), g.x(i));
        }
    }

    #[test]
    fn trapezoid_weights_sum_to_one() {
        let g = shishkin_grid(32, 0.02, 1.0, 4.0).unwrap();
        let s: f64 = g.trapezoid_weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn descriptor_round_trip() {
        let g = shishkin_grid(32, 0.02, 2.0, 4.0).unwrap();
        let json = serde_json::to_string(&g.descriptor()).unwrap();
        assert!(json.contains("\"N\":32"));
        let back: GridDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(Grid::from_descriptor(&back).unwrap(), g);
    }
}
