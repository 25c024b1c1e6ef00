//! Finite-difference stencils on tensor grids.
//!
//! Every operator here is assembled once as an affine map from nodal values (boundary
//! nodes included) and outward normal-derivative data to values at the interior nodes.
//! Solvers split the node columns into unknowns and known Dirichlet values; the same
//! matrices applied to a complete field give the nodal residual, so solving and
//! applying can never disagree.
//!
//! Ghost nodes one cell outside an edge are eliminated by the clamped reflection
//! `u_ghost = u_inner + 2 h g`, where `h` is the width of the boundary cell and `g` is
//! the outward normal derivative. The reflection makes the edge Laplacian only
//! first-order accurate; [`Closure::Hermite`] replaces it by a one-sided formula on four
//! nodes plus the slope, exact for quartics, for operators that are only applied.

use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    /// `x = 0`
    Left,
    /// `x = 1`
    Right,
    /// `y = 0`
    Bottom,
    /// `y = 1`
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    fn slot(self) -> usize {
        match self {
            Edge::Left => 0,
            Edge::Right => 1,
            Edge::Bottom => 2,
            Edge::Top => 3,
        }
    }

    /// Grid coordinates of the `k`-th node along the edge.
    pub fn node(self, n: usize, k: usize) -> (usize, usize) {
        match self {
            Edge::Left => (0, k),
            Edge::Right => (n, k),
            Edge::Bottom => (k, 0),
            Edge::Top => (k, n),
        }
    }

    /// The `m`-th node inward along the normal through edge node `k` (`m = 0` is on the edge).
    pub fn inward(self, n: usize, k: usize, m: usize) -> (usize, usize) {
        match self {
            Edge::Left => (m, k),
            Edge::Right => (n - m, k),
            Edge::Bottom => (k, m),
            Edge::Top => (k, n - m),
        }
    }
}

/// Outward normal derivatives prescribed on the four edges, indexed by the tangential node.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalData {
    data: [Vec<f64>; 4],
}

impl NormalData {
    pub fn zeros(grid: &Grid) -> NormalData {
        let m = grid.n() + 1;
        NormalData { data: [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]] }
    }

    /// Samples `g(x, y)` at the nodes of each edge.
    pub fn from_fn<F: Fn(Edge, f64, f64) -> f64>(grid: &Grid, g: F) -> NormalData {
        let n = grid.n();
        let mut out = NormalData::zeros(grid);
        for e in Edge::ALL {
            for k in 0..=n {
                let (i, j) = e.node(n, k);
                out.data[e.slot()][k] = g(e, grid.x(i), grid.y(j));
            }
        }
        out
    }

    pub fn edge(&self, e: Edge) -> &[f64] {
        &self.data[e.slot()]
    }

    pub fn set_edge(&mut self, e: Edge, values: Vec<f64>) -> Result<()> {
        if values.len() != self.data[e.slot()].len() {
            return Err(Error::Dimension(format!(
                "edge data needs {} values, got {}",
                self.data[e.slot()].len(),
                values.len()
            )));
        }
        self.data[e.slot()] = values;
        Ok(())
    }
}

/// Sparse affine form over grid nodes and ghost data.
#[derive(Debug, Clone, Default)]
struct Form {
    nodes: Vec<(usize, f64)>,
    ghosts: Vec<(usize, usize, f64)>,
}

impl Form {
    fn add_scaled(&mut self, a: f64, other: &Form) {
        self.nodes.extend(other.nodes.iter().map(|&(k, w)| (k, a * w)));
        self.ghosts.extend(other.ghosts.iter().map(|&(e, k, w)| (e, k, a * w)));
    }
}

/// Second-derivative weights on three nonuniform points; exact for quadratics.
fn d2_weights(hm: f64, hp: f64) -> [f64; 3] {
    [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))]
}

/// Central first-derivative weights on three nonuniform points; exact for quadratics.
fn d1_central_weights(hm: f64, hp: f64) -> [f64; 3] {
    [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))]
}

/// Forward first-derivative weights at `t0` from `t0 < t1 < t2`.
fn d1_forward_weights(h1: f64, h2: f64) -> [f64; 3] {
    let d1 = h1;
    let d2 = h1 + h2;
    [-(d1 + d2) / (d1 * d2), d2 / (d1 * (d2 - d1)), -d1 / (d2 * (d2 - d1))]
}

/// Finite-difference weights for derivatives `0..=m` at `z` from nodes `x` (Fornberg's recursion).
pub fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// How the second normal derivative on an edge is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    /// Ghost reflection; symmetric, first-order on the edge.
    #[default]
    Reflection,
    /// Four nodes plus the normal derivative; third-order on the edge.
    Hermite,
}

/// Weights `(a_0..a_3, beta)` with `sum a_k u(d_k) + beta u'(0) = u''(0)` for quartics,
/// where `d_k` are distances from the edge node.
fn hermite_d2_weights(d: [f64; 4]) -> ([f64; 4], f64) {
    let h = d[1];
    let s: Vec<f64> = d.iter().map(|v| v / h).collect();
    let m = nalgebra::Matrix5::from_fn(|p, k| {
        if k < 4 {
            s[k].powi(p as i32)
        } else if p == 1 {
            1.0
        } else {
            0.0
        }
    });
    let rhs = nalgebra::Vector5::new(0.0, 0.0, 2.0, 0.0, 0.0);
    let x = m.lu().solve(&rhs).expect("distinct nodes");
    ([x[0] / (h * h), x[1] / (h * h), x[2] / (h * h), x[3] / (h * h)], x[4] / h)
}

/// Builds the stencil forms used by all operators on one grid.
struct Builder<'g> {
    grid: &'g Grid,
    closure: Closure,
    lap: Vec<Option<Form>>,
}

impl<'g> Builder<'g> {
    fn new(grid: &'g Grid) -> Self {
        Self::with_closure(grid, Closure::Reflection)
    }

    fn with_closure(grid: &'g Grid, closure: Closure) -> Self {
        Builder { grid, closure, lap: vec![None; grid.num_nodes()] }
    }

    /// Second derivative along one direction at index `i`, with ghosts on the edges.
    fn second_1d(&self, i: usize, ghost_lo: Edge, ghost_hi: Edge, tangential: usize, node: impl Fn(usize) -> usize) -> Form {
        let g = self.grid;
        let n = g.n();
        let mut f = Form::default();
        if self.closure == Closure::Hermite && (i == 0 || i == n) {
            // The ghost datum is the outward derivative, so the inward slope is `-g`.
            let (at, ghost): (Vec<usize>, Edge) =
                if i == 0 { ((0..4).collect(), ghost_lo) } else { ((0..4).map(|k| n - k).collect(), ghost_hi) };
            let x = g.nodes();
            let d = [0.0, (x[at[1]] - x[at[0]]).abs(), (x[at[2]] - x[at[0]]).abs(), (x[at[3]] - x[at[0]]).abs()];
            let (a, beta) = hermite_d2_weights(d);
            for k in 0..4 {
                f.nodes.push((node(at[k]), a[k]));
            }
            f.ghosts.push((ghost.slot(), tangential, -beta));
        } else if i == 0 {
            let h = g.h(1);
            f.nodes.push((node(0), -2.0 / (h * h)));
            f.nodes.push((node(1), 2.0 / (h * h)));
            f.ghosts.push((ghost_lo.slot(), tangential, 2.0 / h));
        } else if i == n {
            let h = g.h(n);
            f.nodes.push((node(n), -2.0 / (h * h)));
            f.nodes.push((node(n - 1), 2.0 / (h * h)));
            f.ghosts.push((ghost_hi.slot(), tangential, 2.0 / h));
        } else {
            let w = d2_weights(g.h(i), g.h(i + 1));
            f.nodes.push((node(i - 1), w[0]));
            f.nodes.push((node(i), w[1]));
            f.nodes.push((node(i + 1), w[2]));
        }
        f
    }

    /// Five-point Laplacian at any non-corner node.
    fn laplacian(&mut self, i: usize, j: usize) -> &Form {
        let k = self.grid.idx(i, j);
        if self.lap[k].is_none() {
            let g = self.grid;
            let fx = self.second_1d(i, Edge::Left, Edge::Right, j, |ii| g.idx(ii, j));
            let fy = self.second_1d(j, Edge::Bottom, Edge::Top, i, |jj| g.idx(i, jj));
            let mut f = fx;
            f.add_scaled(1.0, &fy);
            self.lap[k] = Some(f);
        }
        self.lap[k].as_ref().unwrap()
    }

    /// `sum_q w_q * (Laplacian at q)` for a list of `(i, j, w)`.
    fn combine_laplacians(&mut self, terms: &[(usize, usize, f64)]) -> Form {
        let mut out = Form::default();
        for &(i, j, w) in terms {
            let l = self.laplacian(i, j).clone();
            out.add_scaled(w, &l);
        }
        out
    }

    /// Nodes and weights of the Laplacian applied at interior node `(i, j)`.
    fn lap_terms(&self, i: usize, j: usize) -> Vec<(usize, usize, f64)> {
        let g = self.grid;
        let wx = d2_weights(g.h(i), g.h(i + 1));
        let wy = d2_weights(g.h(j), g.h(j + 1));
        vec![
            (i - 1, j, wx[0]),
            (i + 1, j, wx[2]),
            (i, j - 1, wy[0]),
            (i, j + 1, wy[2]),
            (i, j, wx[1] + wy[1]),
        ]
    }

    /// First derivative in x at interior node `i`: central, except one-sided forward
    /// at `i = 1` so that no value on the edge `x = 0` is needed.
    fn dx_terms(&self, i: usize, j: usize) -> Vec<(usize, usize, f64)> {
        let g = self.grid;
        if i == 1 {
            let w = d1_forward_weights(g.h(2), g.h(3));
            vec![(1, j, w[0]), (2, j, w[1]), (3, j, w[2])]
        } else {
            let w = d1_central_weights(g.h(i), g.h(i + 1));
            vec![(i - 1, j, w[0]), (i, j, w[1]), (i + 1, j, w[2])]
        }
    }

    fn dy_terms(&self, i: usize, j: usize) -> Vec<(usize, usize, f64)> {
        self.dx_terms(j, i).into_iter().map(|(a, b, w)| (b, a, w)).collect()
    }
}

/// An affine stencil map `u, g -> values at interior nodes`.
#[derive(Debug, Clone)]
pub struct StencilOperator {
    grid: Grid,
    nodes: CsrMatrix,
    ghosts: [CsrMatrix; 4],
}

/// Index of interior node `(i, j)` among the unknowns.
pub fn interior_index(grid: &Grid, i: usize, j: usize) -> usize {
    (j - 1) * (grid.n() - 1) + (i - 1)
}

pub fn num_interior(grid: &Grid) -> usize {
    (grid.n() - 1) * (grid.n() - 1)
}

/// The linear system for the interior unknowns of an operator.
#[derive(Debug, Clone)]
pub struct InteriorSystem {
    pub matrix: CsrMatrix,
    /// Contribution of the Dirichlet values and ghost data; move it to the right-hand side.
    pub offset: Vec<f64>,
}

impl StencilOperator {
    fn from_forms(grid: &Grid, forms: Vec<Form>) -> Result<StencilOperator> {
        let m = grid.n() + 1;
        let mut tn = Vec::new();
        let mut tg: [Vec<(usize, usize, f64)>; 4] = Default::default();
        for (r, f) in forms.into_iter().enumerate() {
            tn.extend(f.nodes.into_iter().map(|(k, w)| (r, k, w)));
            for (e, k, w) in f.ghosts {
                tg[e].push((r, k, w));
            }
        }
        let rows = num_interior(grid);
        let nodes = CsrMatrix::assemble(rows, grid.num_nodes(), &tn)?;
        let ghosts = [
            CsrMatrix::assemble(rows, m, &tg[0])?,
            CsrMatrix::assemble(rows, m, &tg[1])?,
            CsrMatrix::assemble(rows, m, &tg[2])?,
            CsrMatrix::assemble(rows, m, &tg[3])?,
        ];
        Ok(StencilOperator { grid: grid.clone(), nodes, ghosts })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &StencilOperator) -> Result<StencilOperator> {
        if self.grid != other.grid {
            return Err(Error::Dimension("operators live on different grids".into()));
        }
        let sum = |p: &CsrMatrix, q: &CsrMatrix| -> Result<CsrMatrix> {
            let mut t = Vec::with_capacity(p.nnz() + q.nnz());
            for r in 0..p.nrows() {
                t.extend(p.row(r).map(|(c, v)| (r, c, v)));
                t.extend(q.row(r).map(|(c, v)| (r, c, a * v)));
            }
            CsrMatrix::assemble(p.nrows(), p.ncols(), &t)
        };
        Ok(StencilOperator {
            grid: self.grid.clone(),
            nodes: sum(&self.nodes, &other.nodes)?,
            ghosts: [
                sum(&self.ghosts[0], &other.ghosts[0])?,
                sum(&self.ghosts[1], &other.ghosts[1])?,
                sum(&self.ghosts[2], &other.ghosts[2])?,
                sum(&self.ghosts[3], &other.ghosts[3])?,
            ],
        })
    }

    /// Values at the interior nodes, ordered as the unknowns.
    pub fn apply(&self, u: &Field, g: &NormalData) -> Result<Vec<f64>> {
        if u.grid() != &self.grid {
            return Err(Error::Dimension("field and operator live on different grids".into()));
        }
        let mut out = self.nodes.matvec(u.values())?;
        for e in Edge::ALL {
            let add = self.ghosts[e.slot()].matvec(g.edge(e))?;
            for (o, a) in out.iter_mut().zip(add) {
                *o += a;
            }
        }
        Ok(out)
    }

    /// Same as [`apply`](Self::apply) but returned as a field that is zero on the boundary.
    pub fn apply_field(&self, u: &Field, g: &NormalData) -> Result<Field> {
        Ok(embed_interior(&self.grid, &self.apply(u, g)?))
    }

    /// Splits off the interior unknowns. `boundary` supplies the Dirichlet values
    /// (its interior entries are ignored) and `g` the ghost data.
    pub fn interior_system(&self, boundary: &Field, g: &NormalData) -> Result<InteriorSystem> {
        let grid = &self.grid;
        let n = grid.n();
        let mut known = boundary.values().to_vec();
        let mut t = Vec::with_capacity(self.nodes.nnz());
        for r in 0..self.nodes.nrows() {
            for (c, v) in self.nodes.row(r) {
                let (i, j) = (c % (n + 1), c / (n + 1));
                if !grid.is_boundary(i, j) {
                    t.push((r, interior_index(grid, i, j), v));
                }
            }
        }
        for j in 1..n {
            for i in 1..n {
                known[grid.idx(i, j)] = 0.0;
            }
        }
        let kf = Field::from_values(grid, known)?;
        let offset = self.apply(&kf, g)?;
        let matrix = CsrMatrix::assemble(num_interior(grid), num_interior(grid), &t)?;
        Ok(InteriorSystem { matrix, offset })
    }
}

/// Places interior values into a field whose boundary values are zero.
pub fn embed_interior(grid: &Grid, values: &[f64]) -> Field {
    let n = grid.n();
    let mut f = Field::zeros(grid);
    for j in 1..n {
        for i in 1..n {
            f.set(i, j, values[interior_index(grid, i, j)]);
        }
    }
    f
}

/// Collects the interior values of a field in unknown order.
pub fn interior_values(f: &Field) -> Vec<f64> {
    let g = f.grid();
    let n = g.n();
    let mut out = Vec::with_capacity(num_interior(g));
    for j in 1..n {
        for i in 1..n {
            out.push(f.at(i, j));
        }
    }
    out
}

fn check_grid(grid: &Grid) -> Result<()> {
    if grid.n() < 4 {
        return Err(Error::InvalidArgument("stencils need at least 4 cells per direction".into()));
    }
    Ok(())
}

fn interior_nodes(grid: &Grid) -> impl Iterator<Item = (usize, usize)> {
    let n = grid.n();
    (1..n).flat_map(move |j| (1..n).map(move |i| (i, j)))
}

/// Five-point Laplacian at the interior nodes.
pub fn discrete_laplacian(grid: &Grid) -> Result<StencilOperator> {
    check_grid(grid)?;
    let mut b = Builder::new(grid);
    let forms = interior_nodes(grid).map(|(i, j)| b.laplacian(i, j).clone()).collect();
    StencilOperator::from_forms(grid, forms)
}

/// `Delta_h (Delta_h u)`, with the inner Laplacian evaluated on the edges through ghosts.
pub fn discrete_biharmonic(grid: &Grid) -> Result<StencilOperator> {
    discrete_biharmonic_with(grid, Closure::Reflection)
}

pub fn discrete_biharmonic_with(grid: &Grid, closure: Closure) -> Result<StencilOperator> {
    check_grid(grid)?;
    let mut b = Builder::with_closure(grid, closure);
    let forms = interior_nodes(grid)
        .map(|(i, j)| {
            let terms = b.lap_terms(i, j);
            b.combine_laplacians(&terms)
        })
        .collect();
    StencilOperator::from_forms(grid, forms)
}

/// `(b . grad_h) Delta_h u`. The derivative is central except at the first interior line
/// next to `x = 0` (resp. `y = 0`), where it is second-order one-sided and inward.
pub fn discrete_conv_laplacian(grid: &Grid, b: [f64; 2]) -> Result<StencilOperator> {
    discrete_conv_laplacian_with(grid, b, Closure::Reflection)
}

pub fn discrete_conv_laplacian_with(grid: &Grid, b: [f64; 2], closure: Closure) -> Result<StencilOperator> {
    check_grid(grid)?;
    let mut bld = Builder::with_closure(grid, closure);
    let forms = interior_nodes(grid)
        .map(|(i, j)| {
            let mut terms: Vec<(usize, usize, f64)> = Vec::new();
            terms.extend(bld.dx_terms(i, j).into_iter().map(|(a, c, w)| (a, c, b[0] * w)));
            terms.extend(bld.dy_terms(i, j).into_iter().map(|(a, c, w)| (a, c, b[1] * w)));
            bld.combine_laplacians(&terms)
        })
        .collect();
    StencilOperator::from_forms(grid, forms)
}

/// `(b . grad_h) Delta_h - c Delta_h`, the discrete third-order operator.
pub fn discrete_reduced_operator(grid: &Grid, b: [f64; 2], c: f64) -> Result<StencilOperator> {
    discrete_reduced_operator_with(grid, b, c, Closure::Reflection)
}

pub fn discrete_reduced_operator_with(grid: &Grid, b: [f64; 2], c: f64, closure: Closure) -> Result<StencilOperator> {
    let conv = discrete_conv_laplacian_with(grid, b, closure)?;
    if c == 0.0 {
        return Ok(conv);
    }
    conv.add_scaled(-c, &discrete_laplacian(grid)?)
}

/// `eps Delta_h^2 + (b . grad_h) Delta_h - c Delta_h`, the discrete fourth-order operator.
pub fn discrete_full_operator(grid: &Grid, eps: f64, b: [f64; 2], c: f64) -> Result<StencilOperator> {
    discrete_reduced_operator(grid, b, c)?.add_scaled(eps, &discrete_biharmonic(grid)?)
}

/// Values of `u` along an edge, ordered by the tangential index.
pub fn edge_trace(u: &Field, e: Edge) -> Vec<f64> {
    let n = u.grid().n();
    (0..=n)
        .map(|k| {
            let (i, j) = e.node(n, k);
            u.at(i, j)
        })
        .collect()
}

/// Outward normal derivative along an edge from one-sided differences of the given order
/// (2 or 4) on the nonuniform normal lines.
pub fn normal_derivative_trace(u: &Field, e: Edge, order: usize) -> Result<Vec<f64>> {
    normal_derivative_k(u, e, order, 1)
}

/// `k`-th outward normal derivative along an edge, formally of the given order.
pub fn normal_derivative_k(u: &Field, e: Edge, order: usize, k: usize) -> Result<Vec<f64>> {
    if order != 2 && order != 4 {
        return Err(Error::InvalidArgument(format!("trace order must be 2 or 4, got {order}")));
    }
    let grid = u.grid();
    let n = grid.n();
    let needed = order + k;
    if n + 1 < needed {
        return Err(Error::TooFewNodes { order, needed, available: n + 1 });
    }
    // Distances from the edge along the inward normal; outward derivative flips odd orders.
    let dist: Vec<f64> = (0..needed)
        .map(|m| match e {
            Edge::Left | Edge::Bottom => grid.x(m),
            Edge::Right | Edge::Top => 1.0 - grid.x(n - m),
        })
        .collect();
    let w = fornberg_weights(0.0, &dist, k);
    let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
    Ok((0..=n)
        .map(|t| {
            sign * (0..needed)
                .map(|m| {
                    let (i, j) = e.inward(n, t, m);
                    w[k][m] * u.at(i, j)
                })
                .sum::<f64>()
        })
        .collect())
}

/// Estimated outward normal derivative on all four edges.
pub fn estimate_normal_data(u: &Field, order: usize) -> Result<NormalData> {
    let mut g = NormalData::zeros(u.grid());
    for e in Edge::ALL {
        g.set_edge(e, normal_derivative_trace(u, e, order)?)?;
    }
    Ok(g)
}
