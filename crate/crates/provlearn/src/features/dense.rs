//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Used for the small Rayleigh–Ritz problems inside the iterative eigensolver
//! and as the production fallback for small block matrices. Test oracles use
//! an unrelated third-party eigensolver.

use ndarray::{Array1, Array2};

/// Full eigendecomposition of a symmetric matrix. Returns eigenvalues in
/// ascending order and the matching orthonormal eigenvector columns.
///
/// Only the given matrix's lower triangle is trusted; callers pass matrices
/// symmetric by construction.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    for i in 0..n {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        return (m.diag().to_owned(), v);
    }

    let frob: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let stop = f64::EPSILON * frob.max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += m[(p, q)] * m[(p, q)];
                }
            }
            s.sqrt()
        };
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= stop / (n as f64) {
                    continue;
                }
                // Stable rotation angle: tan θ from the smaller root.
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let (mip, miq) = (m[(i, p)], m[(i, q)]);
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for i in 0..n {
                    let (mpi, mqi) = (m[(p, i)], m[(q, i)]);
                    m[(p, i)] = c * mpi - s * mqi;
                    m[(q, i)] = s * mpi + c * mqi;
                }
                for i in 0..n {
                    let (vip, viq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).expect("finite eigenvalues"));
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| m[(i, i)]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (to, &from) in order.iter().enumerate() {
        vectors.column_mut(to).assign(&v.column(from));
    }
    (eigenvalues, vectors)
}

/// The `k` smallest eigenpairs of a symmetric matrix.
pub fn smallest_eigenpairs(a: &Array2<f64>, k: usize) -> (Array1<f64>, Array2<f64>) {
    let (values, vectors) = symmetric_eigen(a);
    let k = k.min(values.len());
    (
        values.slice(ndarray::s![..k]).to_owned(),
        vectors.slice(ndarray::s![.., ..k]).to_owned(),
    )
}
