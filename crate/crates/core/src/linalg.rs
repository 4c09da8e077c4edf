//! Small dense linear algebra on row-major `n x n` slices.
//!
//! Dimensions here are tiny (2 to 4), so the hot helpers are written out by
//! hand; anything heavier is delegated to `nalgebra`.

use nalgebra::{DMatrix, DVector};

#[inline]
pub fn inner(g: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += g[i * n + j] * v[j];
        }
        s += u[i] * row;
    }
    s
}

#[inline]
pub fn norm(g: &[f64], v: &[f64]) -> f64 {
    inner(g, v, v).max(0.0).sqrt()
}

pub fn to_dmatrix(a: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

/// Inverse of a small symmetric positive definite matrix; `None` when singular.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    match n {
        1 => (a[0] != 0.0).then(|| vec![1.0 / a[0]]),
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            Some(vec![a[3] / det, -a[1] / det, -a[2] / det, a[0] / det])
        }
        _ => {
            let m = to_dmatrix(a, n).try_inverse()?;
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = m[(i, j)];
                }
            }
            Some(out)
        }
    }
}

pub fn det(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => to_dmatrix(a, n).determinant(),
    }
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a[0]],
        2 => {
            let (p, q, r) = (a[0], 0.5 * (a[1] + a[2]), a[3]);
            let mean = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => {
            let m = to_dmatrix(a, n);
            let sym = 0.5 * (&m + m.transpose());
            let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|x, y| x.total_cmp(y));
            ev
        }
    }
}

/// Unit eigenvector for the smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eigvec(a: &[f64], n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let m = to_dmatrix(a, n);
    let sym = 0.5 * (&m + m.transpose());
    let eig = sym.symmetric_eigen();
    let k = (0..n).min_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j])).unwrap_or(0);
    eig.eigenvectors.column(k).iter().copied().collect()
}

/// Solves `a x = b` in the least-squares sense through an SVD, discarding
/// singular values below `rcond * sigma_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    if smax == 0.0 || !smax.is_finite() {
        return None;
    }
    svd.solve(b, rcond * smax).ok()
}

/// Gram-Schmidt in the inner product `g`. Vectors that become numerically
/// dependent are dropped; at most `max_out` vectors are returned.
pub fn gram_schmidt(g: &[f64], vecs: &[Vec<f64>], max_out: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(max_out);
    for v in vecs {
        if out.len() == max_out {
            break;
        }
        let mut w = v.clone();
        // two passes for stability
        for _ in 0..2 {
            for e in &out {
                let c = inner(g, &w, e);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= c * ei;
                }
            }
        }
        let nrm = norm(g, &w);
        let scale = norm(g, v).max(1e-300);
        if nrm > 1e-8 * scale {
            w.iter_mut().for_each(|x| *x /= nrm);
            out.push(w);
        }
    }
    out
}

/// A `g`-orthonormal basis of the tangent space at a point (columns returned
/// as separate vectors), obtained from the coordinate basis.
pub fn orthonormal_frame(g: &[f64], n: usize) -> Vec<Vec<f64>> {
    let basis: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    gram_schmidt(g, &basis, n)
}

/// A `g`-orthonormal basis of the orthogonal complement of `v`, oriented so
/// that `(w_1, .., w_{n-1}, v)` is positively oriented in the chart.
pub fn orthonormal_complement(g: &[f64], v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let mut seeds = vec![v.to_vec()];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        seeds.push(e);
    }
    let mut basis = gram_schmidt(g, &seeds, n);
    let vhat = basis.remove(0);
    if !basis.is_empty() {
        let mut cols = Vec::with_capacity(n * n);
        for row in 0..n {
            for b in basis.iter().chain(std::iter::once(&vhat)) {
                cols.push(b[row]);
            }
        }
        if det(&cols, n) < 0.0 {
            basis[0].iter_mut().for_each(|x| *x = -*x);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_eigenvalues() {
        let ev = sym_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn three_by_three_matches_nalgebra_sorted() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0];
        let ev = sym_eigenvalues(&a, 3);
        assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        let tr: f64 = ev.iter().sum();
        assert!((tr - 8.0).abs() < 1e-12);
    }

    #[test]
    fn complement_is_orthonormal_and_oriented() {
        let g = [2.0, 0.3, 0.3, 1.0];
        let v = [0.4, 0.7];
        let w = orthonormal_complement(&g, &v);
        assert_eq!(w.len(), 1);
        assert!(inner(&g, &w[0], &v).abs() < 1e-12);
        assert!((norm(&g, &w[0]) - 1.0).abs() < 1e-12);
        let d = w[0][0] * v[1] - w[0][1] * v[0];
        assert!(d > 0.0);
    }

    #[test]
    fn invert_roundtrip() {
        let a = [3.0, 0.5, 0.1, 0.5, 2.0, 0.3, 0.1, 0.3, 1.5];
        let inv = invert(&a, 3).unwrap();
        let m = to_dmatrix(&a, 3) * to_dmatrix(&inv, 3);
        assert!((m - DMatrix::identity(3, 3)).norm() < 1e-12);
    }
}
