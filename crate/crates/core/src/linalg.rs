//! Small dense kernels used by the PCA fit. Vectors are plain slices.

use crate::scalar::Scalar;

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Singular directions of the matrix whose columns are `columns`.
#[derive(Debug, Clone)]
pub(crate) struct LeftSingular<T> {
    /// Unit left singular vectors, ordered by decreasing singular value.
    /// Entries whose singular value is numerically zero are `None`.
    pub vectors: Vec<Option<Vec<T>>>,
    pub values: Vec<T>,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Applies plane rotations from the right until all columns are mutually
/// orthogonal; the column norms are then the singular values and the
/// normalised columns the left singular vectors. Only the left side is
/// needed for PCA so the right rotations are not accumulated.
pub(crate) fn jacobi_left_singular<T: Scalar>(
    mut columns: Vec<Vec<T>>,
    max_sweeps: usize,
) -> Option<LeftSingular<T>> {
    let n = columns.len();
    let rows = columns.first().map_or(0, Vec::len);
    let tol = T::epsilon() * T::of(rows.max(1) as f64);
    let mut sweeps = 0;
    let mut converged = n < 2;

    while !converged && sweeps < max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (left, right) = columns.split_at_mut(q);
                let (cp, cq) = (&mut left[p], &mut right[0]);
                let alpha = dot(cp, cp);
                let beta = dot(cq, cq);
                let gamma = dot(cp, cq);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return None;
    }

    let mut order: Vec<(T, usize)> = columns.iter().map(|c| (norm(c), 0)).collect();
    for (i, entry) in order.iter_mut().enumerate() {
        entry.1 = i;
    }
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));

    let largest = order.first().map_or(T::zero(), |e| e.0);
    let cutoff = largest * T::epsilon() * T::of((rows.max(n) * 8) as f64);
    let mut vectors = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (sigma, idx) in order {
        if sigma > cutoff && sigma > T::zero() {
            let inv = T::one() / sigma;
            vectors.push(Some(columns[idx].iter().map(|&v| v * inv).collect()));
            values.push(sigma);
        } else {
            vectors.push(None);
            values.push(T::zero());
        }
    }
    Some(LeftSingular { vectors, values })
}

/// Two passes of modified Gram-Schmidt over `vectors`, in order.
pub(crate) fn reorthonormalize<T: Scalar>(vectors: &mut [Vec<T>]) {
    for _ in 0..2 {
        for i in 0..vectors.len() {
            let (done, rest) = vectors.split_at_mut(i);
            let v = &mut rest[0];
            for u in done.iter() {
                let p = dot(v, u);
                axpy(-p, u, v);
            }
            let inv = T::one() / norm(v);
            v.iter_mut().for_each(|x| *x = *x * inv);
        }
    }
}

/// Extends `basis` with canonical unit vectors, orthogonalised against the
/// existing members, until it has `target` vectors.
pub(crate) fn complete_basis<T: Scalar>(basis: &mut Vec<Vec<T>>, dim: usize, target: usize) {
    let mut candidate = 0;
    while basis.len() < target && candidate < dim {
        let mut v = vec![T::zero(); dim];
        v[candidate] = T::one();
        candidate += 1;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for u in basis.iter() {
                let proj = dot(&v, u);
                axpy(-proj, u, &mut v);
            }
        }
        let len = norm(&v);
        if len > T::of(1e-3) {
            let inv = T::one() / len;
            v.iter_mut().for_each(|x| *x = *x * inv);
            basis.push(v);
        }
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonical_sign<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < T::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_diagonal_singular_values() {
        let cols: Vec<Vec<f64>> = vec![vec![3.0, 0.0, 0.0], vec![0.0, 5.0, 0.0]];
        let svd = jacobi_left_singular(cols, 30).unwrap();
        assert_eq!(svd.values, vec![5.0, 3.0]);
        assert_eq!(svd.vectors[0].as_deref(), Some(&[0.0, 1.0, 0.0][..]));
    }

    #[test]
    fn jacobi_orthogonalises_correlated_columns() {
        let cols: Vec<Vec<f64>> = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 1.0, 0.5, 4.5], vec![-1.0, 0.0, 2.0, 1.0]];
        let svd = jacobi_left_singular(cols, 30).unwrap();
        let vs: Vec<_> = svd.vectors.iter().map(|v| v.clone().unwrap()).collect();
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&vs[i], &vs[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12, "{i},{j}: {d}");
            }
        }
        assert!(svd.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_columns_yield_no_vectors() {
        let svd = jacobi_left_singular(vec![vec![0.0f64; 4]; 3], 30).unwrap();
        assert!(svd.vectors.iter().all(Option::is_none));
        assert!(svd.values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn completion_fills_orthonormal_basis() {
        let mut basis: Vec<Vec<f64>> = vec![vec![0.6, 0.8, 0.0]];
        complete_basis(&mut basis, 3, 3);
        assert_eq!(basis.len(), 3);
        for i in 0..3 {
            assert!((norm(&basis[i]) - 1.0f64).abs() < 1e-12);
            for j in 0..i {
                assert!(dot(&basis[i], &basis[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sign_convention() {
        let mut v: Vec<f64> = vec![0.1, -0.9, 0.5];
        canonical_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.5]);
    }
}
