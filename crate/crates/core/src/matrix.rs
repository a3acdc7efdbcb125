//! Flat row-major symmetric-matrix helpers: scans, rank-one updates, a
//! cyclic Jacobi eigensolver, and a shifted-Cholesky PSD probe.
//!
//! Rank-one updates compute `coef * (x[i] * x[j])` with the inner product
//! first; IEEE multiplication is commutative, so updates of a bit-symmetric
//! matrix stay bit-symmetric without a mirroring pass.

use crate::exec;

#[inline]
pub(crate) fn at(m: usize, i: usize, j: usize) -> usize {
    i * m + j
}

pub(crate) fn max_abs(data: &[f64]) -> f64 {
    data.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Largest diagonal entry and its index; smallest index wins ties.
pub(crate) fn max_diag(m: usize, data: &[f64]) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut idx = 0;
    for i in 0..m {
        let d = data[at(m, i, i)];
        if d > best {
            best = d;
            idx = i;
        }
    }
    (best, idx)
}

/// `data += coef * x xᵀ`, bit-symmetric.
pub(crate) fn add_scaled_outer(data: &mut [f64], m: usize, coef: f64, x: &[f64]) {
    exec::for_rows(data, m, |i, row| {
        let xi = x[i];
        if xi == 0.0 {
            return;
        }
        for (j, r) in row.iter_mut().enumerate() {
            *r += coef * (xi * x[j]);
        }
    });
}

/// `data -= coef * x xᵀ`, bit-symmetric.
pub(crate) fn sub_scaled_outer(data: &mut [f64], m: usize, coef: f64, x: &[f64]) {
    exec::for_rows(data, m, |i, row| {
        let xi = x[i];
        if xi == 0.0 {
            return;
        }
        for (j, r) in row.iter_mut().enumerate() {
            *r -= coef * (xi * x[j]);
        }
    });
}

pub(crate) fn zero_row_col(data: &mut [f64], m: usize, p: usize) {
    for j in 0..m {
        data[at(m, p, j)] = 0.0;
        data[at(m, j, p)] = 0.0;
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-increasing order and eigenvectors as a list of
/// columns (`vecs[k][i]` is component `i` of eigenvector `k`), orthonormal in
/// the plain Euclidean inner product. Deterministic: fixed sweep order, fixed
/// convergence threshold.
pub(crate) fn jacobi_eigen(m: usize, a: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), m * m);
    if m == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut w = a.to_vec();
    // v is row-major; column k is the k-th eigenvector.
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[at(m, i, i)] = 1.0;
    }

    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let stop = 1e-14 * frob;
    const MAX_SWEEPS: usize = 64;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..m {
            for q in (p + 1)..m {
                off += w[at(m, p, q)] * w[at(m, p, q)];
            }
        }
        if (2.0 * off).sqrt() <= stop {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = w[at(m, p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = w[at(m, p, p)];
                let aqq = w[at(m, q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..m {
                    let aip = w[at(m, i, p)];
                    let aiq = w[at(m, i, q)];
                    w[at(m, i, p)] = c * aip - s * aiq;
                    w[at(m, i, q)] = s * aip + c * aiq;
                }
                for j in 0..m {
                    let apj = w[at(m, p, j)];
                    let aqj = w[at(m, q, j)];
                    w[at(m, p, j)] = c * apj - s * aqj;
                    w[at(m, q, j)] = s * apj + c * aqj;
                }
                for i in 0..m {
                    let vip = v[at(m, i, p)];
                    let viq = v[at(m, i, q)];
                    v[at(m, i, p)] = c * vip - s * viq;
                    v[at(m, i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        w[at(m, j, j)]
            .partial_cmp(&w[at(m, i, i)])
            .expect("eigenvalues are finite")
    });
    let vals = order.iter().map(|&k| w[at(m, k, k)]).collect();
    let vecs = order
        .iter()
        .map(|&k| (0..m).map(|i| v[at(m, i, k)]).collect())
        .collect();
    (vals, vecs)
}

/// PSD probe: attempts a Cholesky factorization of `a + shift * I`.
/// Succeeds iff the shifted matrix is numerically positive semidefinite.
pub(crate) fn cholesky_psd_ok(m: usize, a: &[f64], shift: f64) -> bool {
    let mut l = a.to_vec();
    for i in 0..m {
        l[at(m, i, i)] += shift;
    }
    for j in 0..m {
        let mut d = l[at(m, j, j)];
        for k in 0..j {
            d -= l[at(m, j, k)] * l[at(m, j, k)];
        }
        if d < 0.0 || !d.is_finite() {
            return false;
        }
        let dj = d.sqrt();
        l[at(m, j, j)] = dj;
        for i in (j + 1)..m {
            let mut s = l[at(m, i, j)];
            for k in 0..j {
                s -= l[at(m, i, k)] * l[at(m, j, k)];
            }
            l[at(m, i, j)] = if dj > 0.0 { s / dj } else { 0.0 };
        }
    }
    true
}
