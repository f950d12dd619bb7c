//! Small dense linear-algebra kernels: SPD Cholesky solves for the ridge row
//! updates, a cyclic Jacobi eigensolver for symmetric matrices, subspace
//! iteration for the top eigenvalues of large Gram matrices, and a truncated
//! SVD computed through the Gram matrix of the shorter side.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `a x = b` for symmetric positive-definite `a` by Cholesky
/// factorization. `a` is consumed as workspace.
///
/// Fails when a pivot is not strictly positive, which for the ridge systems
/// built by the recommender only happens with `lambda == 0` and a
/// rank-deficient design.
pub fn solve_spd<S: Scalar>(mut a: Array2<S>, b: ArrayView1<S>) -> Result<Array1<S>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(b.len(), n);

    // In-place lower Cholesky.
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag = diag - a[[j, k]] * a[[j, k]];
        }
        if diag <= S::zero() || !diag.is_finite() {
            return Err(Error::SingularRidge {
                kind: "spd",
                index: j,
            });
        }
        let diag = diag.sqrt();
        a[[j, j]] = diag;
        for i in j + 1..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v = v - a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = v / diag;
        }
    }

    // Forward substitution: L y = b.
    let mut x = b.to_owned();
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v = v - a[[i, k]] * x[k];
        }
        x[i] = v / a[[i, i]];
    }
    // Back substitution: L^T x = y.
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in i + 1..n {
            v = v - a[[k, i]] * x[k];
        }
        x[i] = v / a[[i, i]];
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns. Quadratic-size inputs only; intended for matrices up to a few
/// hundred rows (SVD Grams, Ritz blocks).
pub fn jacobi_eigh<S: Scalar>(mut a: Array2<S>) -> (Vec<S>, Array2<S>) {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    let mut v = Array2::<S>::eye(n);
    if n <= 1 {
        let vals = if n == 1 { vec![a[[0, 0]]] } else { vec![] };
        return (vals, v);
    }

    let eps = S::cast(1e-30);
    for _sweep in 0..60 {
        let mut off = S::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[[p, q]] * a[[p, q]];
            }
        }
        let norm = a.iter().map(|x| *x * *x).sum::<S>();
        if off <= norm * S::cast(1e-28) + eps {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == S::zero() {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let tau = (aqq - app) / (S::cast(2.0) * apq);
                // Stable tangent of the rotation angle.
                let t = if tau >= S::zero() {
                    S::one() / (tau + (S::one() + tau * tau).sqrt())
                } else {
                    -S::one() / (-tau + (S::one() + tau * tau).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s_ = t * c;

                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s_ * akq;
                    a[[k, q]] = s_ * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s_ * aqk;
                    a[[q, k]] = s_ * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s_ * vkq;
                    v[[k, q]] = s_ * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[[j, j]]
            .partial_cmp(&a[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals: Vec<S> = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vecs = Array2::<S>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vecs.column_mut(dst).assign(&v.column(src));
    }
    (vals, vecs)
}

/// Top `q` eigenvalues of a symmetric positive-semidefinite matrix by
/// subspace iteration with Rayleigh-Ritz extraction. Deterministic: the
/// starting block is a fixed function of the dimensions.
pub fn top_eigs_spd<S: Scalar>(g: &Array2<S>, q: usize) -> Vec<S> {
    let n = g.nrows();
    debug_assert_eq!(g.ncols(), n);
    if n == 0 || q == 0 {
        return vec![S::zero(); q];
    }
    if n <= 256 || q + 8 >= n {
        let (vals, _) = jacobi_eigh(g.clone());
        let mut out: Vec<S> = vals.into_iter().take(q).collect();
        out.resize(q, S::zero());
        return out;
    }

    let p = (q + 8).min(n);
    // Deterministic pseudo-random starting block.
    let mut block = Array2::<S>::zeros((n, p));
    let mut state: u64 = 0x9e3779b97f4a7c15;
    for v in block.iter_mut() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let u = ((state >> 11) as f64) / ((1u64 << 53) as f64);
        *v = S::cast(2.0 * u - 1.0);
    }
    orthonormalize(&mut block);

    let mut prev: Vec<S> = vec![S::zero(); q];
    for it in 0..1000 {
        let mut y = g.dot(&block);
        orthonormalize(&mut y);
        block = y;
        if it % 5 == 4 || it == 999 {
            let gq = g.dot(&block);
            let t = block.t().dot(&gq);
            let sym = (&t + &t.t()) / S::cast(2.0);
            let (vals, _) = jacobi_eigh(sym);
            let top: Vec<S> = vals.into_iter().take(q).collect();
            let scale = top
                .first()
                .copied()
                .unwrap_or(S::one())
                .abs()
                .max(S::cast(1e-300));
            let drift = top
                .iter()
                .zip(prev.iter())
                .map(|(a, b)| (*a - *b).abs())
                .fold(S::zero(), S::max);
            prev = top;
            if drift <= scale * S::cast(1e-12) {
                break;
            }
        }
    }
    prev.iter()
        .map(|&v| if v < S::zero() { S::zero() } else { v })
        .collect()
}

/// Modified Gram-Schmidt with a second reorthogonalization pass. Columns that
/// collapse numerically are replaced by unit basis vectors.
fn orthonormalize<S: Scalar>(block: &mut Array2<S>) {
    let (n, p) = block.dim();
    for j in 0..p {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = block.column(i).dot(&block.column(j));
                let qi = block.column(i).to_owned();
                let mut cj = block.column_mut(j);
                cj.zip_mut_with(&qi, |x, &y| *x = *x - proj * y);
            }
        }
        let norm = block.column(j).dot(&block.column(j)).sqrt();
        if norm > S::cast(1e-150) {
            block.column_mut(j).mapv_inplace(|x| x / norm);
        } else {
            let mut cj = block.column_mut(j);
            cj.fill(S::zero());
            cj[j % n] = S::one();
        }
    }
}

/// One singular triplet: `(sigma, left vector, right vector)`.
pub type SingularTriplet<S> = (S, Array1<S>, Array1<S>);

/// Top-`k` singular triplets of a dense matrix, computed exactly through the
/// Gram matrix of the shorter side. `k` is truncated to the numerical rank.
pub fn top_singular_triplets<S: Scalar>(z: ArrayView2<S>, k: usize) -> Vec<SingularTriplet<S>> {
    let (n, m) = z.dim();
    if n == 0 || m == 0 || k == 0 {
        return vec![];
    }
    let rows_side = n <= m;
    let gram = if rows_side {
        z.dot(&z.t())
    } else {
        z.t().dot(&z)
    };
    let (vals, vecs) = jacobi_eigh(gram);
    let sigma_max = vals.first().map(|v| v.max(S::zero()).sqrt()).unwrap_or(S::zero());
    if sigma_max == S::zero() {
        return vec![];
    }
    let tol = sigma_max * S::cast(1e-10);

    let mut out = Vec::new();
    for (i, &lambda) in vals.iter().enumerate() {
        if out.len() >= k {
            break;
        }
        let sigma = lambda.max(S::zero()).sqrt();
        if sigma <= tol {
            break;
        }
        let w = vecs.column(i).to_owned();
        let (u, v) = if rows_side {
            let mut v = z.t().dot(&w);
            v.mapv_inplace(|x| x / sigma);
            (w, v)
        } else {
            let mut u = z.dot(&w);
            u.mapv_inplace(|x| x / sigma);
            (u, w)
        };
        out.push((sigma, u, v));
    }
    out
}

/// Pearson correlation of two equal-length vectors; 0 when either side has
/// zero variance.
pub fn pearson<S: Scalar>(a: ArrayView1<S>, b: ArrayView1<S>) -> S {
    debug_assert_eq!(a.len(), b.len());
    let n = S::cast(a.len() as f64);
    if a.is_empty() {
        return S::zero();
    }
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let mut cov = S::zero();
    let mut va = S::zero();
    let mut vb = S::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let dx = *x - ma;
        let dy = *y - mb;
        cov = cov + dx * dy;
        va = va + dx * dx;
        vb = vb + dy * dy;
    }
    if va <= S::zero() || vb <= S::zero() {
        return S::zero();
    }
    cov / (va.sqrt() * vb.sqrt())
}
