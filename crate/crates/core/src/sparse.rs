//! Compressed sparse row storage and a banded LU factorization with partial pivoting.
//!
//! The finite-difference operators of this crate couple each unknown to neighbours at
//! most two grid lines away, so lexicographic numbering gives a matrix whose bandwidth
//! is about `2N`. A band solver is both simple and exact enough for every grid used here.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicate entries are summed.
    pub fn assemble(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<CsrMatrix> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfRange { row: r, col: c, nrows, ncols });
            }
            counts[r + 1] += 1;
        }
        for r in 0..nrows {
            counts[r + 1] += counts[r];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix { nrows, ncols, indptr, indices, data })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Stored entries of row `r` as `(column, value)` pairs in increasing column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |e| e.1)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension(format!(
                "matvec: matrix has {} columns, vector has {} entries",
                self.ncols,
                x.len()
            )));
        }
        Ok((0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect())
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Lower and upper bandwidth.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.nrows {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        out
    }
}

/// LU factors of a banded matrix, stored column-major in the layout of LAPACK's `gbtrf`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

/// Pivots smaller than this fraction of the pivot row's largest entry signal singularity.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<BandedLu> {
        if a.nrows != a.ncols {
            return Err(Error::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows, a.ncols
            )));
        }
        let n = a.nrows;
        let (kl, ku) = a.bandwidths();
        let kv = kl + ku;
        let ld = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ld * n];
        let mut row_max = vec![0.0f64; n];
        for r in 0..n {
            for (c, v) in a.row(r) {
                ab[c * ld + kv + r - c] = v;
                row_max[r] = row_max[r].max(v.abs());
            }
        }

        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ld + kv;
            let mut jp = 0;
            let mut best = ab[col].abs();
            for i in 1..=km {
                let v = ab[col + i].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best <= PIVOT_TOLERANCE * row_max[j + jp] || best == 0.0 {
                return Err(Error::Singular { column: j, pivot: best });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                row_max.swap(j, j + jp);
                for c in j..=ju {
                    let base = c * ld + kv;
                    ab.swap(base + j - c, base + j + jp - c);
                }
            }
            let pivot = ab[col];
            let inv = 1.0 / pivot;
            for v in &mut ab[col + 1..=col + km] {
                *v *= inv;
            }
            if km == 0 {
                continue;
            }
            let (head, tail) = ab.split_at_mut((j + 1) * ld);
            let l = &head[col + 1..=col + km];
            for c in (j + 1)..=ju {
                let base = (c - j - 1) * ld + kv;
                // Row j of column c sits at offset kv + j - c.
                let top = base - (c - j);
                let ujc = tail[top];
                if ujc == 0.0 {
                    continue;
                }
                let dst = &mut tail[top + 1..=top + km];
                for (d, &m) in dst.iter_mut().zip(l) {
                    *d -= m * ujc;
                }
            }
        }
        Ok(BandedLu { n, kl, ku, ld, ab, ipiv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!(
                "solve: system has {} unknowns, right-hand side has {} entries",
                self.n,
                b.len()
            )));
        }
        let (n, kl, ld) = (self.n, self.kl, self.ld);
        let kv = self.kl + self.ku;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let col = j * ld + kv;
                for i in 1..=km {
                    b[j + i] -= self.ab[col + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ld + kv;
            b[j] /= self.ab[col];
            let bj = b[j];
            if bj != 0.0 {
                let reach = kv.min(j);
                for i in 1..=reach {
                    b[j - i] -= self.ab[col - i] * bj;
                }
            }
        }
        Ok(())
    }
}

/// A factored matrix that also keeps the original for residual checks and refinement.
#[derive(Debug, Clone)]
pub struct Factored {
    matrix: CsrMatrix,
    lu: BandedLu,
    norm: f64,
}

impl Factored {
    pub fn new(matrix: CsrMatrix) -> Result<Factored> {
        let lu = BandedLu::factor(&matrix)?;
        let norm = matrix.norm_inf();
        Ok(Factored { matrix, lu, norm })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves `A x = b` with one step of iterative refinement and checks
    /// `||A x - b|| <= 1e-9 (||A|| ||x|| + ||b||)` in the max norm.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.lu.solve_in_place(&mut x)?;
        let mut r = self.residual(&x, b)?;
        self.lu.solve_in_place(&mut r)?;
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += ri;
        }
        let r = self.residual(&x, b)?;
        let rn = max_abs(&r);
        let bound = 1e-9 * (self.norm * max_abs(&x) + max_abs(b));
        if !(rn <= bound) {
            return Err(Error::InaccurateSolve { residual: rn, bound });
        }
        Ok(x)
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let ax = self.matrix.matvec(x)?;
        Ok(b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect())
    }
}

pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "solve: matrix has {} rows, right-hand side has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    Factored::new(a.clone())?.solve(b)
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
