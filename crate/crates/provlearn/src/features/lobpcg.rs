//! Locally optimal block preconditioned conjugate gradient iteration for the
//! smallest eigenpairs of a symmetric operator given only as a block
//! matrix-vector product.
//!
//! Follows the robust formulation: converged columns are soft-locked (kept in
//! the Ritz block, excluded from new search directions), the `[X, W, P]`
//! trial basis is re-orthonormalized before every Rayleigh–Ritz step, and
//! rank-deficient candidate directions are dropped and repaired. Tiny
//! problems (5·k ≥ n, where the trial basis would span most of the space)
//! are solved densely by materializing the operator.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::dense;
use super::FeatureError;

/// Optional preconditioner: approximates A⁻¹ applied to a residual block.
pub type Precond<'a> = Option<&'a dyn Fn(&ArrayView2<'_, f64>) -> Array2<f64>>;

#[derive(Debug, Clone)]
pub struct LobpcgResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// n×k, orthonormal columns aligned with `eigenvalues`.
    pub eigenvectors: Array2<f64>,
    pub iterations: usize,
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

fn norm(v: &ArrayView1<'_, f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Two-pass modified Gram–Schmidt of one candidate against `basis`; appends
/// the normalized remainder unless it is negligible relative to the original
/// column (rank repair by dropping).
fn append_orthonormal(basis: &mut Vec<Array1<f64>>, skip: usize, col: ArrayView1<'_, f64>) -> bool {
    let original = norm(&col);
    if original == 0.0 || !original.is_finite() {
        return false;
    }
    let mut v = col.to_owned();
    for _ in 0..2 {
        for u in basis.iter() {
            let c = v.dot(u);
            v.scaled_add(-c, u);
        }
    }
    let remaining = norm(&v.view());
    if remaining <= original * 1e-10 {
        return false;
    }
    v.mapv_inplace(|x| x / remaining);
    let _ = skip;
    basis.push(v);
    true
}

fn stack_columns(n: usize, cols: &[Array1<f64>]) -> Array2<f64> {
    let mut out = Array2::zeros((n, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}

fn column_norms(block: &Array2<f64>) -> Vec<f64> {
    (0..block.ncols()).map(|j| norm(&block.column(j))).collect()
}

fn symmetrized(g: Array2<f64>) -> Array2<f64> {
    let gt = g.t().to_owned();
    (g + gt) * 0.5
}

/// Smallest `k` eigenpairs of the symmetric operator `apply_a` of dimension
/// `n`, started from the block `x0` (n×k, full column rank).
///
/// `apply_a` must be a pure function of its input; it may be invoked
/// concurrently by parallel callers and is the only place worth
/// parallelizing internally. Returns partial results with `converged =
/// false` when `max_iter` is exhausted.
pub fn lobpcg<F>(
    apply_a: F,
    n: usize,
    k: usize,
    x0: Array2<f64>,
    tol: f64,
    max_iter: usize,
    precond: Precond<'_>,
) -> Result<LobpcgResult, FeatureError>
where
    F: Fn(&ArrayView2<'_, f64>) -> Array2<f64>,
{
    if k == 0 || k > n {
        return Err(FeatureError::InvalidBlock {
            detail: format!("block size {k} outside 1..={n}"),
        });
    }
    if x0.nrows() != n || x0.ncols() != k {
        return Err(FeatureError::InvalidBlock {
            detail: format!("X0 is {}x{}, expected {n}x{k}", x0.nrows(), x0.ncols()),
        });
    }

    if 5 * k >= n {
        return Ok(solve_dense(&apply_a, n, k, tol));
    }

    let mut x_cols: Vec<Array1<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        if !append_orthonormal(&mut x_cols, 0, x0.column(j)) {
            return Err(FeatureError::InvalidBlock {
                detail: format!("X0 column {j} is linearly dependent"),
            });
        }
    }
    let mut x = stack_columns(n, &x_cols);
    let mut ax = apply_a(&x.view());

    let (theta, u) = dense::symmetric_eigen(&symmetrized(x.t().dot(&ax)));
    x = x.dot(&u);
    ax = ax.dot(&u);
    let mut lambda = theta;

    let mut p_cols: Vec<Array1<f64>> = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;
    let mut residual_norms;

    loop {
        let mut r = ax.clone();
        for j in 0..k {
            r.column_mut(j).scaled_add(-lambda[j], &x.column(j));
        }
        residual_norms = column_norms(&r);
        if residual_norms.iter().all(|&v| v <= tol) {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }

        // Soft locking: only unconverged columns contribute search directions.
        let active: Vec<usize> =
            (0..k).filter(|&j| residual_norms[j] > tol).collect();
        let mut w = stack_columns(n, &active.iter().map(|&j| r.column(j).to_owned()).collect::<Vec<_>>());
        if let Some(m) = precond {
            w = m(&w.view());
        }

        let mut basis: Vec<Array1<f64>> = (0..k).map(|j| x.column(j).to_owned()).collect();
        let mut extras = 0usize;
        for j in 0..w.ncols() {
            if append_orthonormal(&mut basis, k, w.column(j)) {
                extras += 1;
            }
        }
        for p in &p_cols {
            if append_orthonormal(&mut basis, k, p.view()) {
                extras += 1;
            }
        }
        if extras == 0 {
            return Err(FeatureError::Breakdown {
                detail: format!(
                    "trial basis gained no new directions at iteration {iterations} \
                     (max residual {:.3e}, tol {tol:.3e})",
                    residual_norms.iter().cloned().fold(0.0, f64::max)
                ),
            });
        }

        let s_extra = stack_columns(n, &basis[k..]);
        let as_extra = apply_a(&s_extra.view());
        let s = concatenate![Axis(1), x.view(), s_extra.view()];
        let a_s = concatenate![Axis(1), ax.view(), as_extra.view()];

        let (theta, u) = dense::symmetric_eigen(&symmetrized(s.t().dot(&a_s)));
        let c = u.slice(ndarray::s![.., ..k]);
        let x_new = s.dot(&c);
        let ax_new = a_s.dot(&c);
        lambda = theta.slice(ndarray::s![..k]).to_owned();

        // Next conjugate directions: the part of the new Ritz block drawn
        // from W and P, kept orthonormal among themselves.
        let c_extra = c.slice(ndarray::s![k.., ..]);
        let p_raw = s_extra.dot(&c_extra);
        p_cols.clear();
        for j in 0..p_raw.ncols() {
            append_orthonormal(&mut p_cols, 0, p_raw.column(j));
        }

        x = x_new;
        ax = ax_new;
        iterations += 1;
    }

    if lambda.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::Breakdown {
            detail: "non-finite values in eigenpair estimates".to_string(),
        });
    }
    Ok(LobpcgResult {
        eigenvalues: lambda.to_vec(),
        eigenvectors: x,
        iterations,
        residual_norms,
        converged,
    })
}

fn solve_dense<F>(apply_a: &F, n: usize, k: usize, tol: f64) -> LobpcgResult
where
    F: Fn(&ArrayView2<'_, f64>) -> Array2<f64>,
{
    let a = symmetrized(apply_a(&Array2::eye(n).view()));
    let (values, vectors) = dense::smallest_eigenpairs(&a, k);
    let mut r = a.dot(&vectors);
    for j in 0..k {
        r.column_mut(j).scaled_add(-values[j], &vectors.column(j));
    }
    let residual_norms = column_norms(&r);
    let converged = residual_norms.iter().all(|&v| v <= tol);
    LobpcgResult {
        eigenvalues: values.to_vec(),
        eigenvectors: vectors,
        iterations: 0,
        residual_norms,
        converged,
    }
}
