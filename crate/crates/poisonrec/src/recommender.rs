//! The oblivious low-rank recommender: masked matrix factorization trained by
//! alternating minimization with closed-form ridge row updates.
//!
//! Each half-sweep solves, for every row of one factor matrix, the exact
//! ridge problem over that row's observed entries while the opposite matrix
//! stays frozen, so the masked objective
//! `sum_{(u,j,r) in train} (r - u_u . v_j)^2 + lambda (|U|^2 + |V|^2)`
//! never increases across half-sweeps.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::scalar::Scalar;

/// Standard deviation of the Gaussian factor initialization.
pub const INIT_SD: f64 = 0.1;

/// Latent factor pair. Rows `0..n` of `user_factors` are real users, rows
/// `n..n'` fake users.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel<S> {
    pub user_factors: Array2<S>,
    pub item_factors: Array2<S>,
    pub lambda: S,
}

impl<S: Scalar> FactorModel<S> {
    /// Gaussian init, mean 0, sd 0.1, deterministic given `seed`.
    pub fn init(n_prime: usize, m: usize, d: usize, seed: u64) -> Result<Self> {
        if n_prime == 0 || m == 0 || d == 0 {
            return Err(Error::InvalidDimension(format!(
                "init({n_prime}, {m}, {d}): all counts must be positive"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_SD).expect("init normal");
        let user_factors = Array2::from_shape_fn((n_prime, d), |_| S::cast(normal.sample(&mut rng)));
        let item_factors = Array2::from_shape_fn((m, d), |_| S::cast(normal.sample(&mut rng)));
        Ok(FactorModel {
            user_factors,
            item_factors,
            lambda: S::zero(),
        })
    }

    pub fn with_lambda(mut self, lambda: S) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.user_factors.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.item_factors.nrows()
    }

    pub fn d(&self) -> usize {
        self.user_factors.ncols()
    }

    /// Raw model score `u_u . v_j`; no clipping.
    pub fn predict(&self, user: u32, item: u32) -> Result<S> {
        if user as usize >= self.n_rows() || item as usize >= self.n_items() {
            return Err(Error::IndexOutOfRange(format!(
                "predict({user}, {item}) in {}x{} model",
                self.n_rows(),
                self.n_items()
            )));
        }
        Ok(self.score(user, item))
    }

    /// Unchecked score for hot paths; indices must be in range.
    #[inline]
    pub fn score(&self, user: u32, item: u32) -> S {
        self.user_factors
            .row(user as usize)
            .dot(&self.item_factors.row(item as usize))
    }

    /// Writes the checkpoint: a header line `n_prime,m,d,lambda` followed by
    /// the rows of U then V, one row per line. Values round-trip exactly at
    /// double precision.
    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!(
            "{},{},{},{}\n",
            self.n_rows(),
            self.n_items(),
            self.d(),
            self.lambda.as_f64()
        ));
        for row in self.user_factors.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for row in self.item_factors.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fname = path.display().to_string();
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(&fname, 1, "empty checkpoint"))?;
        let head: Vec<&str> = header.split(',').collect();
        if head.len() != 4 {
            return Err(Error::parse(&fname, 1, "expected n_prime,m,d,lambda"));
        }
        let parse_usize = |s: &str, line: usize| -> Result<usize> {
            s.trim()
                .parse()
                .map_err(|_| Error::parse(&fname, line, format!("bad integer {s:?}")))
        };
        let n_prime = parse_usize(head[0], 1)?;
        let m = parse_usize(head[1], 1)?;
        let d = parse_usize(head[2], 1)?;
        let lambda: f64 = head[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(&fname, 1, "bad lambda"))?;

        let mut read_matrix = |rows: usize, what: &str| -> Result<Array2<S>> {
            let mut mat = Array2::zeros((rows, d));
            for r in 0..rows {
                let (lineno, line) = lines
                    .next()
                    .ok_or_else(|| Error::parse(&fname, 0, format!("truncated {what}")))?;
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != d {
                    return Err(Error::parse(
                        &fname,
                        lineno + 1,
                        format!("expected {d} values, found {}", cells.len()),
                    ));
                }
                for (c, cell) in cells.iter().enumerate() {
                    let v: f64 = cell.trim().parse().map_err(|_| {
                        Error::parse(&fname, lineno + 1, format!("bad value {cell:?}"))
                    })?;
                    mat[[r, c]] = S::cast(v);
                }
            }
            Ok(mat)
        };
        let user_factors = read_matrix(n_prime, "user factors")?;
        let item_factors = read_matrix(m, "item factors")?;
        Ok(FactorModel {
            user_factors,
            item_factors,
            lambda: S::cast(lambda),
        })
    }
}

/// Training tuples over the augmented user axis (`n'` rows): real train
/// tuples plus the non-zero rounded fake ratings in rows `n..n'`.
#[derive(Debug, Clone)]
pub struct TrainSet<S> {
    n_rows: usize,
    n_items: usize,
    by_user: Vec<Vec<(u32, S)>>,
    by_item: Vec<Vec<(u32, S)>>,
    len: usize,
}

impl<S: Scalar> TrainSet<S> {
    pub fn new(n_rows: usize, n_items: usize, tuples: &[(u32, u32, S)]) -> Result<Self> {
        let mut by_user = vec![Vec::new(); n_rows];
        let mut by_item = vec![Vec::new(); n_items];
        for &(u, j, r) in tuples {
            if u as usize >= n_rows || j as usize >= n_items {
                return Err(Error::IndexOutOfRange(format!(
                    "train tuple ({u}, {j}) in {n_rows}x{n_items}"
                )));
            }
            by_user[u as usize].push((j, r));
            by_item[j as usize].push((u, r));
        }
        Ok(TrainSet {
            n_rows,
            n_items,
            by_user,
            by_item,
            len: tuples.len(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn user_tuples(&self, u: usize) -> &[(u32, S)] {
        &self.by_user[u]
    }
}

/// The masked training objective of the factorization:
/// squared error over observed entries plus `lambda (|U|^2 + |V|^2)`.
pub fn masked_objective<S: Scalar>(train: &TrainSet<S>, model: &FactorModel<S>) -> S {
    let mut sq = S::zero();
    for (u, obs) in train.by_user.iter().enumerate() {
        let fu = model.user_factors.row(u);
        for &(j, r) in obs {
            let e = r - fu.dot(&model.item_factors.row(j as usize));
            sq = sq + e * e;
        }
    }
    let reg_u: S = model.user_factors.iter().map(|v| *v * *v).sum();
    let reg_v: S = model.item_factors.iter().map(|v| *v * *v).sum();
    sq + model.lambda * (reg_u + reg_v)
}

/// Exact ridge update of one row: solves
/// `(sum_j v_j v_j^T + lambda I) u = sum_j r_j v_j` over the row's observed
/// entries. A row with no observations becomes the zero vector.
fn ridge_row<S: Scalar>(
    obs: &[(u32, S)],
    opposite: &Array2<S>,
    lambda: S,
    kind: &'static str,
    index: usize,
    gather: &mut Array2<S>,
) -> Result<Array1<S>> {
    let d = opposite.ncols();
    if obs.is_empty() {
        return Ok(Array1::zeros(d));
    }
    let c = obs.len();
    if gather.nrows() < c {
        *gather = Array2::zeros((c.next_power_of_two(), d));
    }
    let mut rhs = Array1::<S>::zeros(d);
    for (k, &(j, r)) in obs.iter().enumerate() {
        let row = opposite.row(j as usize);
        gather.row_mut(k).assign(&row);
        rhs.scaled_add(r, &row);
    }
    let design = gather.slice(ndarray::s![..c, ..]);
    let mut gram = design.t().dot(&design);
    for i in 0..d {
        gram[[i, i]] = gram[[i, i]] + lambda;
    }
    solve_spd(gram, rhs.view()).map_err(|_| Error::SingularRidge { kind, index })
}

/// One half-sweep updating every user row against frozen item factors.
pub fn half_sweep_users<S: Scalar>(train: &TrainSet<S>, model: &mut FactorModel<S>) -> Result<()> {
    let mut gather = Array2::zeros((64, model.d()));
    for u in 0..train.n_rows {
        let row = ridge_row(
            &train.by_user[u],
            &model.item_factors,
            model.lambda,
            "user",
            u,
            &mut gather,
        )?;
        model.user_factors.row_mut(u).assign(&row);
    }
    Ok(())
}

/// One half-sweep updating every item row against frozen user factors.
pub fn half_sweep_items<S: Scalar>(train: &TrainSet<S>, model: &mut FactorModel<S>) -> Result<()> {
    let mut gather = Array2::zeros((64, model.d()));
    for j in 0..train.n_items {
        let row = ridge_row(
            &train.by_item[j],
            &model.user_factors,
            model.lambda,
            "item",
            j,
            &mut gather,
        )?;
        model.item_factors.row_mut(j).assign(&row);
    }
    Ok(())
}

/// Runs `iters` full U-then-V sweeps and returns the updated model.
pub fn alt_min<S: Scalar>(
    train: &TrainSet<S>,
    model: &FactorModel<S>,
    iters: usize,
) -> Result<FactorModel<S>> {
    if iters == 0 {
        return Err(Error::InvalidDimension("alt_min requires iters >= 1".into()));
    }
    if train.n_rows != model.n_rows() || train.n_items != model.n_items() {
        return Err(Error::InvalidDimension(format!(
            "train set {}x{} vs model {}x{}",
            train.n_rows,
            train.n_items,
            model.n_rows(),
            model.n_items()
        )));
    }
    let mut out = model.clone();
    for _ in 0..iters {
        half_sweep_users(train, &mut out)?;
        half_sweep_items(train, &mut out)?;
    }
    Ok(out)
}

/// Items of `candidates` sorted by descending score for `user`, ties broken
/// by ascending item index; at most `k` entries. `candidates` must not
/// contain items rated by the user in train when used for recommendation.
pub fn top_k<S: Scalar>(model: &FactorModel<S>, user: u32, candidates: &[u32], k: usize) -> Vec<u32> {
    let mut scored: Vec<(S, u32)> = candidates
        .iter()
        .map(|&j| (model.score(user, j), j))
        .collect();
    scored.sort_unstable_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    scored.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Rank of `item` within `candidates` under the top-k ordering (1-based).
/// Returns `None` when the item is not a candidate.
pub fn rank_of<S: Scalar>(model: &FactorModel<S>, user: u32, candidates: &[u32], item: u32) -> Option<usize> {
    if !candidates.contains(&item) {
        return None;
    }
    let s_item = model.score(user, item);
    let mut rank = 1usize;
    for &j in candidates {
        if j == item {
            continue;
        }
        let s = model.score(user, j);
        if s > s_item || (s == s_item && j < item) {
            rank += 1;
        }
    }
    Some(rank)
}
