//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use nalgebra::{DMatrix, DVector};

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors as
/// columns with their largest-magnitude entry positive.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;

/// Diagonalizes `a` (assumed symmetric; only its values are read) until the
/// off-diagonal Frobenius norm is at most `rel_tol` times the total norm.
pub fn sym_eigen(a: &DMatrix<f64>, rel_tol: f64) -> SymEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = m.norm();
    let off = |m: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off(&m) > rel_tol * total {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J with J the (p, q) rotation
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).clone_owned();
        let lead = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map_or(0.0, |(_, x)| *x);
        if lead < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    SymEigen {
        values,
        vectors,
        sweeps,
    }
}

/// `a^(-1/2)` of a symmetric positive-definite matrix. Returns `None` when an
/// eigenvalue is at or below `floor` times the largest.
pub fn inv_sqrt_spd(a: &DMatrix<f64>, floor: f64) -> Option<DMatrix<f64>> {
    let e = sym_eigen(a, 1e-14);
    let top = e.values.max();
    if !(top > 0.0) || e.values.iter().any(|&l| l <= floor * top) {
        return None;
    }
    let d = DMatrix::from_diagonal(&e.values.map(|l| 1.0 / l.sqrt()));
    Some(&e.vectors * d * e.vectors.transpose())
}
