//! Eigen- and singular-value routines for assembled operators.
//!
//! Small problems go through a dense faer factorization. Above
//! [`DENSE_LIMIT`] unknowns the smallest eigenpairs of a symmetric positive
//! semidefinite matrix are found by shift-invert subspace iteration on a
//! sparse Cholesky factor.

use faer::linalg::solvers::Solve;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{G2Error, Result};
use crate::sparse::{dot, CsrMatrix};

pub const DENSE_LIMIT: usize = 6000;

/// Eigenpairs sorted by ascending value; `vectors[k]` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn dense_symmetric_eigen(m: &Mat<f64>) -> Result<EigenPairs> {
    let n = m.nrows();
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| G2Error::SolverNoConvergence(format!("dense eigen: {e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap());
    Ok(EigenPairs {
        values: order.iter().map(|&k| s[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..n).map(|i| u[(i, k)]).collect())
            .collect(),
    })
}

/// All eigenvalues of a symmetric sparse matrix (dense path).
pub fn symmetric_spectrum(a: &CsrMatrix) -> Result<Vec<f64>> {
    let d = a.to_dense();
    let sym = Mat::<f64>::from_fn(a.nrows, a.ncols, |i, j| 0.5 * (d[(i, j)] + d[(j, i)]));
    let ev = sym
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| G2Error::SolverNoConvergence(format!("dense eigenvalues: {e:?}")))?;
    let mut v: Vec<f64> = ev.into_iter().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

/// Smallest singular triplets of a (possibly rectangular) sparse matrix.
#[derive(Clone, Debug)]
pub struct SingularPairs {
    /// Ascending singular values.
    pub values: Vec<f64>,
    /// Right singular vectors.
    pub vectors: Vec<Vec<f64>>,
    pub method: &'static str,
}

pub fn smallest_singular(a: &CsrMatrix, count: usize, seed: u64) -> Result<SingularPairs> {
    let count = count.min(a.ncols);
    if a.ncols < DENSE_LIMIT {
        // faer's svd can misplace members of a large exact null cluster, so take
        // vectors from the Gram matrix and recompute each value as |A v|
        let d = a.to_dense();
        let gram = d.transpose() * &d;
        let pairs = dense_symmetric_eigen(&gram)?;
        let mut scored: Vec<(f64, Vec<f64>)> = pairs
            .vectors
            .into_iter()
            .take(count)
            .map(|v| {
                let av = a.matvec(&v);
                (dot(&av, &av).sqrt(), v)
            })
            .collect();
        scored.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let (values, vectors) = scored.into_iter().unzip();
        return Ok(SingularPairs {
            values,
            vectors,
            method: "dense-gram",
        });
    }
    let m = a.transpose().mul(a);
    let pairs = smallest_eigen_shift_invert(&m, count, seed)?;
    Ok(SingularPairs {
        values: pairs.values.iter().map(|l| l.max(0.0).sqrt()).collect(),
        vectors: pairs.vectors,
        method: "shift-invert",
    })
}

fn orthonormalize_columns(cols: &mut [Vec<f64>]) {
    for k in 0..cols.len() {
        for _ in 0..2 {
            for j in 0..k {
                let (head, tail) = cols.split_at_mut(k);
                let p = dot(&head[j], &tail[0]);
                tail[0].iter_mut().zip(&head[j]).for_each(|(x, q)| *x -= p * q);
            }
        }
        let n = dot(&cols[k], &cols[k]).sqrt();
        if n > 0.0 {
            cols[k].iter_mut().for_each(|x| *x /= n);
        }
    }
}

/// Smallest eigenpairs of a symmetric positive semidefinite sparse matrix by
/// block inverse iteration on `M + δI` with Rayleigh–Ritz extraction.
pub fn smallest_eigen_shift_invert(m: &CsrMatrix, count: usize, seed: u64) -> Result<EigenPairs> {
    let n = m.nrows;
    let scale = m.norm_inf().max(f64::MIN_POSITIVE);
    let delta = 1e-10 * scale;
    let shifted = m.add(&CsrMatrix::identity(n), delta);
    let llt = shifted
        .to_faer()
        .sp_cholesky(faer::Side::Lower)
        .map_err(|e| G2Error::SolverNoConvergence(format!("sparse cholesky: {e:?}")))?;
    let block = (count + 8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect();
    orthonormalize_columns(&mut x);
    let tol = 1e-11 * scale;
    let mut last_residual = f64::INFINITY;
    for _iter in 0..300 {
        let rhs = Mat::<f64>::from_fn(n, block, |i, j| x[j][i]);
        let y = llt.solve(&rhs);
        let mut q: Vec<Vec<f64>> = (0..block).map(|j| (0..n).map(|i| y[(i, j)]).collect()).collect();
        orthonormalize_columns(&mut q);
        let mq: Vec<Vec<f64>> = q.iter().map(|c| m.matvec(c)).collect();
        let h = Mat::<f64>::from_fn(block, block, |i, j| 0.5 * (dot(&q[i], &mq[j]) + dot(&q[j], &mq[i])));
        let small = dense_symmetric_eigen(&h)?;
        let ritz: Vec<Vec<f64>> = small
            .vectors
            .iter()
            .map(|c| {
                let mut v = vec![0.0; n];
                for (k, ck) in c.iter().enumerate() {
                    v.iter_mut().zip(&q[k]).for_each(|(a, b)| *a += ck * b);
                }
                v
            })
            .collect();
        let mut worst = 0.0_f64;
        for (k, v) in ritz.iter().take(count).enumerate() {
            let mv = m.matvec(v);
            let r: f64 = mv
                .iter()
                .zip(v)
                .map(|(a, b)| (a - small.values[k] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        x = ritz;
        last_residual = worst;
        if worst < tol {
            return Ok(EigenPairs {
                values: small.values[..count].to_vec(),
                vectors: x.into_iter().take(count).collect(),
            });
        }
    }
    Err(G2Error::SolverNoConvergence(format!(
        "subspace iteration: residual {last_residual:.3e} after 300 iterations (target {tol:.3e})"
    )))
}

/// Kernel dimension from ascending singular values with a spectral-gap test.
/// For `dim == 0` the gap is `σ₁ / abs_tol`.
pub fn kernel_from_singular(values: &[f64], abs_tol: f64, gap_ratio: f64) -> Result<(usize, f64)> {
    let dim = values.iter().take_while(|s| **s < abs_tol).count();
    let gap = if dim == 0 {
        values.first().map_or(f64::INFINITY, |s| s / abs_tol)
    } else if dim < values.len() {
        // an exact zero caps the ratio at 1/ε rather than overflowing
        values[dim] / values[dim - 1].max(f64::EPSILON * values[dim])
    } else {
        return Err(G2Error::AmbiguousKernel {
            low: dim,
            high: dim + 1,
            ratio: 1.0,
        });
    };
    if gap <= gap_ratio {
        return Err(G2Error::AmbiguousKernel {
            low: dim,
            high: dim + 1,
            ratio: gap,
        });
    }
    Ok((dim, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        // periodic path graph Laplacian: one-dimensional kernel (constants)
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, 2.0);
            b.add(i, (i + 1) % n, -1.0);
            b.add(i, (i + n - 1) % n, -1.0);
        }
        b.build()
    }

    #[test]
    fn shift_invert_matches_closed_form() {
        let n = 200;
        let m = laplacian_1d(n);
        let pairs = smallest_eigen_shift_invert(&m, 3, 1).unwrap();
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let exact = 2.0 - 2.0 * h.cos();
        assert!(pairs.values[0].abs() < 1e-10);
        assert!((pairs.values[1] - exact).abs() < 1e-9);
        assert!((pairs.values[2] - exact).abs() < 1e-9);
    }

    #[test]
    fn kernel_gap_rule() {
        assert_eq!(kernel_from_singular(&[1e-14, 1e-13, 0.5], 1e-6, 50.0).unwrap().0, 2);
        assert_eq!(kernel_from_singular(&[0.3, 0.5], 1e-6, 50.0).unwrap().0, 0);
        assert!(matches!(
            kernel_from_singular(&[1e-7, 2e-6], 1e-6, 50.0),
            Err(G2Error::AmbiguousKernel { .. })
        ));
    }

    #[test]
    fn dense_singular_of_wide_matrix_reports_null_space() {
        let mut b = TripletBuilder::new(1, 2);
        b.add(0, 0, 1.0);
        b.add(0, 1, 1.0);
        let s = smallest_singular(&b.build(), 2, 0).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert!((s.values[1] - 2f64.sqrt()).abs() < 1e-14);
    }
}
