//! Small dense least-squares helpers.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff below which singular values are treated as zero.
const RANK_TOL: f64 = 1e-12;

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    svd.solve(b, RANK_TOL * smax).expect("both factors were computed")
}

/// Orthonormal basis of the null space of `c`, as columns.
pub fn null_space(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.ncols();
    if c.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let m = c.nrows().max(n);
    let mut padded = DMatrix::zeros(m, n);
    padded.view_mut((0, 0), (c.nrows(), n)).copy_from(c);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| svd.singular_values[k] <= RANK_TOL * smax.max(f64::MIN_POSITIVE))
        .map(|k| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Minimizes `|a x - b|` over the least-squares solutions of `c x = d`.
///
/// The constraints are honoured exactly when they are consistent; otherwise in the
/// least-squares sense, and the misfit shows up in `c x - d`.
pub fn constrained_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, c: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    let xp = lstsq(c, d);
    let z = null_space(c);
    if z.ncols() == 0 {
        return xp;
    }
    let az = a * &z;
    let r = b - a * &xp;
    let y = lstsq(&az, &r);
    xp + z * y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constrained_fit_of_a_line() {
        // Fit y = p + q t through noisy points with the line forced through (0, 1).
        let t = [0.0, 1.0, 2.0, 3.0];
        let y = [1.1, 2.9, 5.2, 6.8];
        let a = DMatrix::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else { t[i] });
        let b = DVector::from_row_slice(&y);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let d = DVector::from_row_slice(&[1.0]);
        let x = constrained_lstsq(&a, &b, &c, &d);
        assert!((x[0] - 1.0).abs() < 1e-12);
        // Slope minimizing sum (1 + q t - y)^2: q = sum t (y - 1) / sum t^2.
        let q = (1.9 + 2.0 * 4.2 + 3.0 * 5.8) / 14.0;
        assert!((x[1] - q).abs() < 1e-12);
    }

    #[test]
    fn null_space_dimension() {
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        let z = null_space(&c);
        assert_eq!(z.ncols(), 2);
        assert!((&c * &z).abs().max() < 1e-12);
    }
}
