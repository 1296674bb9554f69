//! Dense linear algebra for the small symmetric/square systems the pipeline
//! needs (covariance whitening, residual PCA, map interpolation). Kept
//! self-contained so the crate carries no BLAS/LAPACK linkage.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns eigenvalues in descending order with matching eigenvector columns.
pub fn jacobi_eigh(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off.sqrt() < 1e-13 * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let evals: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut evecs = Array2::<f64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        evecs.column_mut(new_col).assign(&v.column(old_col));
    }
    (evals, evecs)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Argument("cannot invert a non-square matrix".into()));
    }
    let mut aug = Array2::<f64>::zeros((n, 2 * n));
    aug.slice_mut(ndarray::s![.., ..n]).assign(a);
    for i in 0..n {
        aug[[i, n + i]] = 1.0;
    }
    gauss_jordan(&mut aug, n)?;
    Ok(aug.slice(ndarray::s![.., n..]).to_owned())
}

/// Solves `a x = b` for a general square system.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if n != a.ncols() || n != b.len() {
        return Err(Error::Argument("solve requires square a and matching b".into()));
    }
    let mut aug = Array2::<f64>::zeros((n, n + 1));
    aug.slice_mut(ndarray::s![.., ..n]).assign(a);
    for i in 0..n {
        aug[[i, n]] = b[i];
    }
    gauss_jordan(&mut aug, n)?;
    Ok(aug.column(n).to_owned())
}

fn gauss_jordan(aug: &mut Array2<f64>, n: usize) -> Result<()> {
    let cols = aug.ncols();
    let scale: f64 = aug
        .slice(ndarray::s![.., ..n])
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if aug[[r, col]].abs() > aug[[pivot, col]].abs() {
                pivot = r;
            }
        }
        if aug[[pivot, col]].abs() < 1e-13 * scale {
            return Err(Error::SingularMatrix(format!(
                "pivot {:.3e} too small at column {col}",
                aug[[pivot, col]]
            )));
        }
        if pivot != col {
            for k in 0..cols {
                let tmp = aug[[col, k]];
                aug[[col, k]] = aug[[pivot, k]];
                aug[[pivot, k]] = tmp;
            }
        }
        let p = aug[[col, col]];
        for k in 0..cols {
            aug[[col, k]] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = aug[[r, col]];
            if f != 0.0 {
                for k in 0..cols {
                    aug[[r, k]] -= f * aug[[col, k]];
                }
            }
        }
    }
    Ok(())
}
