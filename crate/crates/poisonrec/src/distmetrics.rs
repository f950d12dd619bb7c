//! Distributional indistinguishability metrics: per-item binned rating
//! marginals, total variation distance, Jensen-Shannon divergence (natural
//! log), and the top-10 eigenvalues of the item Gram matrix.

use ndarray::{Array2, ArrayView2};

use crate::dataset::{Rating, RatingMatrix};
use crate::error::{Error, Result};
use crate::generator::{FakeProfileMatrix, Scale};
use crate::linalg::{jacobi_eigh, top_eigs_spd};
use crate::scalar::Scalar;

/// Number of rating bins: unrated (0) plus ratings 1..=5.
pub const BINS: usize = 6;

/// Per-item probability vector over the six rating bins; the denominator is
/// all users, so an item nobody rated has all mass on bin 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemMarginal<S> {
    pub probs: [S; BINS],
}

impl<S: Scalar> ItemMarginal<S> {
    pub fn is_valid(&self) -> bool {
        let sum: S = self.probs.iter().copied().sum();
        self.probs.iter().all(|p| *p >= S::zero()) && (sum - S::one()).abs() <= S::cast(1e-9)
    }
}

/// Per-item marginals of a profile collection given as sparse non-zero
/// integer entries over `n_rows` profiles.
pub fn marginals<S: Scalar>(entries: &[Rating], n_rows: usize, n_items: usize) -> Vec<ItemMarginal<S>> {
    let mut counts = vec![[0usize; BINS]; n_items];
    for r in entries {
        counts[r.item as usize][r.value as usize] += 1;
    }
    let denom = S::cast(n_rows.max(1) as f64);
    counts
        .into_iter()
        .map(|c| {
            let rated: usize = c[1..].iter().sum();
            let mut probs = [S::zero(); BINS];
            probs[0] = S::cast((n_rows - rated) as f64) / denom;
            for b in 1..BINS {
                probs[b] = S::cast(c[b] as f64) / denom;
            }
            ItemMarginal { probs }
        })
        .collect()
}

/// Total variation distance `sum |p - q| / 2`.
pub fn tvd<S: Scalar>(p: &ItemMarginal<S>, q: &ItemMarginal<S>) -> S {
    let mut s = S::zero();
    for b in 0..BINS {
        s = s + (p.probs[b] - q.probs[b]).abs();
    }
    s / S::cast(2.0)
}

/// Jensen-Shannon divergence `(D(p||m) + D(q||m)) / 2` with `m = (p+q)/2`,
/// natural log, and `0 ln(0/x) = 0`.
pub fn js<S: Scalar>(p: &ItemMarginal<S>, q: &ItemMarginal<S>) -> S {
    let half = S::cast(0.5);
    let mut d = S::zero();
    for b in 0..BINS {
        let m = half * (p.probs[b] + q.probs[b]);
        if p.probs[b] > S::zero() {
            d = d + half * p.probs[b] * (p.probs[b] / m).ln();
        }
        if q.probs[b] > S::zero() {
            d = d + half * q.probs[b] * (q.probs[b] / m).ln();
        }
    }
    d.max(S::zero())
}

/// Unweighted mean TVD and JS over all items between the real users and a
/// rounded rating-scale fake-profile matrix.
pub fn mean_distance<S: Scalar>(real: &RatingMatrix, fake: &FakeProfileMatrix<S>) -> Result<(S, S)> {
    if fake.scale() != Scale::Rating {
        return Err(Error::ScaleMismatch {
            expected: "rating",
            got: "symmetric",
        });
    }
    if fake.n_items() != real.n_items() {
        return Err(Error::InvalidDimension(format!(
            "fake item count {} vs real {}",
            fake.n_items(),
            real.n_items()
        )));
    }
    let p = marginals::<S>(real.entries(), real.n_users(), real.n_items());
    let fake_entries = fake.rounded_entries();
    let q = marginals::<S>(&fake_entries, fake.k(), fake.n_items());
    let m = S::cast(real.n_items() as f64);
    let mut t = S::zero();
    let mut j = S::zero();
    for (pi, qi) in p.iter().zip(q.iter()) {
        t = t + tvd(pi, qi);
        j = j + js(pi, qi);
    }
    Ok((t / m, j / m))
}

/// Descending top-10 eigenvalues of an item-item Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSummary<S> {
    pub top: Vec<S>,
}

impl<S: Scalar> EigenSummary<S> {
    /// Largest relative deviation `|a_i - b_i| / max(b_i, floor)` across the
    /// ten positions.
    pub fn max_relative_deviation(&self, other: &EigenSummary<S>) -> S {
        let floor = other
            .top
            .first()
            .copied()
            .unwrap_or(S::one())
            .max(S::cast(1e-12))
            * S::cast(1e-9);
        self.top
            .iter()
            .zip(other.top.iter())
            .map(|(a, b)| (*a - *b).abs() / (*b).max(floor))
            .fold(S::zero(), S::max)
    }
}

/// Top-10 eigenvalues of `X^T X` for a dense profile matrix, computed through
/// the singular values of the profile matrix (`eig_i = sigma_i^2`).
pub fn eigensummary_dense<S: Scalar>(profiles: ArrayView2<S>) -> EigenSummary<S> {
    let (n, m) = profiles.dim();
    let q = 10usize;
    if n == 0 || m == 0 {
        return EigenSummary {
            top: vec![S::zero(); q],
        };
    }
    let gram = if n <= m {
        profiles.dot(&profiles.t())
    } else {
        profiles.t().dot(&profiles)
    };
    let side = gram.nrows();
    let mut top = if side <= 256 {
        let (vals, _) = jacobi_eigh(gram);
        vals.into_iter().take(q).collect::<Vec<S>>()
    } else {
        top_eigs_spd(&gram, q)
    };
    top.resize(q, S::zero());
    for v in top.iter_mut() {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
    EigenSummary { top }
}

/// [`eigensummary_dense`] over sparse integer profiles.
pub fn eigensummary_sparse<S: Scalar>(
    entries: &[Rating],
    n_rows: usize,
    n_items: usize,
) -> EigenSummary<S> {
    let mut dense = Array2::<S>::zeros((n_rows, n_items));
    for r in entries {
        dense[[r.user as usize, r.item as usize]] = S::cast(r.value as f64);
    }
    eigensummary_dense(dense.view())
}
