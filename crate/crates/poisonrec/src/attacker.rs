//! The adversary's optimizer: zeroth-order gradient estimation along the top
//! singular directions of the fake-profile matrix, projected descent with
//! box clipping to `[0,5]`, warm-started recommender retraining, and
//! stopping criteria.
//!
//! Every objective evaluation rounds a copy of Z to integers, clips to
//! `[0,5]`, trains the recommender for `inner_iters` alternating sweeps from
//! the current warm-start model, and reads the objective off the result. One
//! gradient estimate costs `K + 1` evaluations; the base evaluation's final
//! model becomes the warm start for the perturbed evaluations and for the
//! next descent iteration.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSplit, Rating, RatingMatrix};
use crate::distmetrics::mean_distance;
use crate::error::{Error, Result};
use crate::generator::{round_clip_entries, FakeProfileMatrix, Scale};
use crate::linalg::top_singular_triplets;
use crate::objectives::{
    candidate_items, eval_group, eval_hit_rate, rank_loss, AttackObjective, EvalContext,
    GroupObjectiveKind, GroupSpec,
};
use crate::recommender::{alt_min, FactorModel, TrainSet};
use crate::scalar::Scalar;

/// Indistinguishability gate applied to the initial fake profiles.
pub const GATE_LIMIT: f64 = 0.1;

const RANK_TOPS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopRule {
    None,
    /// Stop once `delta >= threshold`.
    DeltaGe { threshold: f64 },
    /// Stop once the target item has left the target user's top-`k` list.
    RemovedFromTop { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Z-SGD learning rate (0 is legal and leaves Z unchanged).
    pub eta: f64,
    /// Gradient step constant for the two-point estimates.
    pub alpha: f64,
    /// Number of SVD directions K.
    pub k_dirs: usize,
    /// Maximum Z-SGD iterations T.
    pub max_iters: usize,
    /// Alternating-minimization sweeps per objective evaluation.
    pub inner_iters: usize,
    /// Alternating-minimization sweeps before the attack.
    pub pre_iters: usize,
    pub stop: StopRule,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            eta: 100.0,
            alpha: 50.0,
            k_dirs: 5,
            max_iters: 21,
            inner_iters: 5,
            pre_iters: 10,
            stop: StopRule::None,
            seed: 0,
        }
    }
}

impl AttackConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta {} must be >= 0", self.eta)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha {} must be > 0", self.alpha)));
        }
        if self.k_dirs == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig("K and T must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommenderConfig {
    pub d: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        RecommenderConfig {
            d: 40,
            lambda: 0.001,
            seed: 0,
        }
    }
}

/// One logged Z-SGD iteration; `t` starts at 1 where Z is the untouched
/// generator sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<S> {
    pub t: usize,
    pub f_a: S,
    pub delta: S,
    pub mean_tvd: S,
    pub mean_js: S,
    /// Rank-loss indicators at top 1/5/10 for single-cell intents.
    pub rank: Option<[u8; 3]>,
    pub seconds: f64,
    pub aux: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stop", rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Criterion { t: usize },
    /// A mid-run failure; the rows logged before it are kept.
    Aborted { message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackTrace<S> {
    pub f_before: S,
    pub rows: Vec<TraceRow<S>>,
    pub stop: StopReason,
    pub aux_names: Vec<String>,
}

impl<S: Scalar> AttackTrace<S> {
    /// `t,f_A,delta,mean_tvd,mean_js,rank1,rank5,rank10,seconds` plus one
    /// column per auxiliary metric.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,f_A,delta,mean_tvd,mean_js,rank1,rank5,rank10,seconds");
        for name in &self.aux_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            let (r1, r5, r10) = match row.rank {
                Some([a, b, c]) => (a.to_string(), b.to_string(), c.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                row.t,
                row.f_a.as_f64(),
                row.delta.as_f64(),
                row.mean_tvd.as_f64(),
                row.mean_js.as_f64(),
                r1,
                r5,
                r10,
                row.seconds
            ));
            for v in &row.aux {
                out.push_str(&format!(",{}", v.as_f64()));
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TupleSource {
    Target,
    Test,
}

/// Extra metric evaluated on the current model at every logged iteration.
#[derive(Debug, Clone)]
pub struct AuxMetric {
    pub name: String,
    pub eval: AuxEval,
}

#[derive(Debug, Clone)]
pub enum AuxEval {
    Group {
        group: GroupSpec,
        kind: GroupObjectiveKind,
        source: TupleSource,
    },
    HitRate {
        group: GroupSpec,
        k: usize,
        source: TupleSource,
    },
}

impl AuxMetric {
    fn value<S: Scalar>(&self, model: &FactorModel<S>, ctx: &EvalContext<'_>) -> Result<S> {
        match &self.eval {
            AuxEval::Group { group, kind, source } => {
                let tuples = match source {
                    TupleSource::Target => &ctx.split.target,
                    TupleSource::Test => &ctx.split.test,
                };
                Ok(eval_group(model, group, *kind, tuples)?.value)
            }
            AuxEval::HitRate { group, k, source } => {
                let tuples = match source {
                    TupleSource::Target => ctx.split.target.clone(),
                    TupleSource::Test => ctx.split.test.clone(),
                };
                Ok(eval_hit_rate(model, group, ctx, *k, &tuples)?.value)
            }
        }
    }
}

/// Frozen real training tuples plus the rolling warm-start model.
pub struct EvalOracle<'a, S> {
    real_tuples: &'a [(u32, u32, S)],
    n_rows: usize,
    n_items: usize,
    n_real_users: usize,
    pub model: FactorModel<S>,
    objective: &'a AttackObjective,
    ctx: EvalContext<'a>,
    inner_iters: usize,
}

impl<'a, S: Scalar> EvalOracle<'a, S> {
    /// Rounds and clips a copy of the profile values, augments the real train
    /// tuples with the non-zero fake ratings (rows `n..n'`), retrains for
    /// `inner_iters` sweeps from the oracle's model, and evaluates the
    /// objective in minimization convention.
    pub fn evaluate(&self, z: &FakeProfileMatrix<S>) -> Result<(S, FactorModel<S>)> {
        self.evaluate_values(z.values())
    }

    fn evaluate_values(&self, values: &Array2<S>) -> Result<(S, FactorModel<S>)> {
        let fake = round_clip_entries(values);
        let mut tuples: Vec<(u32, u32, S)> = Vec::with_capacity(self.real_tuples.len() + fake.len());
        tuples.extend_from_slice(self.real_tuples);
        for r in &fake {
            tuples.push((
                self.n_real_users as u32 + r.user,
                r.item,
                S::cast(r.value as f64),
            ));
        }
        let train = TrainSet::new(self.n_rows, self.n_items, &tuples)?;
        let model = if self.inner_iters == 0 {
            self.model.clone()
        } else {
            alt_min(&train, &self.model, self.inner_iters)?
        };
        let value = self.objective.loss(&model, &self.ctx)?;
        Ok((value, model))
    }
}

/// Unit-Frobenius rank-one direction matrices from the top singular triplets
/// of the continuous profile matrix.
fn svd_directions<S: Scalar>(values: &Array2<S>, k: usize) -> Result<Vec<Array2<S>>> {
    let triplets = top_singular_triplets(values.view(), k);
    if triplets.is_empty() {
        return Err(Error::NoDirections);
    }
    let (rows, cols) = values.dim();
    let mut dirs = Vec::with_capacity(triplets.len());
    for (_, u, v) in triplets {
        let mut dir = Array2::zeros((rows, cols));
        for i in 0..rows {
            let ui = u[i];
            if ui == S::zero() {
                continue;
            }
            for j in 0..cols {
                dir[[i, j]] = ui * v[j];
            }
        }
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Zeroth-order gradient estimate for an arbitrary black box:
/// `(1/alpha) sum_h (f(Z + alpha D_h) - f(Z)) D_h` over the top-`k` singular
/// directions of `Z` (truncated to the numerical rank).
pub fn zo_gradient_with<S: Scalar>(
    mut f: impl FnMut(&Array2<S>) -> Result<S>,
    z: &Array2<S>,
    alpha: f64,
    k: usize,
) -> Result<Array2<S>> {
    let dirs = svd_directions(z, k)?;
    let f_base = f(z)?;
    let mut grad = Array2::<S>::zeros(z.dim());
    let a = S::cast(alpha);
    for dir in &dirs {
        let perturbed = z + &dir.mapv(|v| v * a);
        let f_h = f(&perturbed)?;
        grad.scaled_add((f_h - f_base) / a, dir);
    }
    Ok(grad)
}

/// The attack-path gradient estimate: the base evaluation runs first and its
/// final model both seeds the K perturbed evaluations and replaces the
/// oracle's warm-start model. Returns the gradient and the base objective
/// value.
pub fn zo_gradient<S: Scalar>(
    oracle: &mut EvalOracle<'_, S>,
    z: &FakeProfileMatrix<S>,
    alpha: f64,
    k: usize,
) -> Result<(Array2<S>, S)> {
    let dirs = svd_directions(z.values(), k)?;
    let (f_base, base_model) = oracle.evaluate(z)?;
    oracle.model = base_model;
    let mut grad = Array2::<S>::zeros(z.values().dim());
    let a = S::cast(alpha);
    for dir in &dirs {
        let perturbed = z.values() + &dir.mapv(|v| v * a);
        let (f_h, _) = oracle.evaluate_values(&perturbed)?;
        grad.scaled_add((f_h - f_base) / a, dir);
    }
    Ok((grad, f_base))
}

/// Projected descent step: `clip(z - eta * grad, 0, 5)` elementwise, keeping
/// continuous values (rounding happens only inside evaluations).
pub fn zsgd_step<S: Scalar>(
    z: &FakeProfileMatrix<S>,
    grad: &Array2<S>,
    eta: f64,
) -> Result<FakeProfileMatrix<S>> {
    let e = S::cast(eta);
    let hi = S::cast(5.0);
    let values = ndarray::Zip::from(z.values())
        .and(grad)
        .map_collect(|&zv, &g| (zv - e * g).max(S::zero()).min(hi));
    FakeProfileMatrix::new(values, Scale::Rating)
}

/// Recommender state trained on the real data only, shared across the
/// attacks of one experiment.
pub struct PreparedAttack<S> {
    pub model_before: FactorModel<S>,
    pub real_tuples: Vec<(u32, u32, S)>,
    pub n_real_users: usize,
    pub n_items: usize,
    pub k_fake: usize,
}

/// Initializes (seeded) and pre-trains the recommender on the split's train
/// tuples for `pre_iters` sweeps, with `k_fake` empty fake rows appended.
pub fn prepare<S: Scalar>(
    data: &RatingMatrix,
    split: &DatasetSplit,
    k_fake: usize,
    rec: &RecommenderConfig,
    pre_iters: usize,
) -> Result<PreparedAttack<S>> {
    let n = data.n_users();
    let m = data.n_items();
    let n_prime = n + k_fake;
    let real_tuples: Vec<(u32, u32, S)> = split
        .train
        .iter()
        .map(|r| (r.user, r.item, S::cast(r.value as f64)))
        .collect();
    let model = FactorModel::<S>::init(n_prime, m, rec.d, rec.seed)?
        .with_lambda(S::cast(rec.lambda));
    let model_before = if pre_iters == 0 {
        model
    } else {
        let train = TrainSet::new(n_prime, m, &real_tuples)?;
        alt_min(&train, &model, pre_iters)?
    };
    Ok(PreparedAttack {
        model_before,
        real_tuples,
        n_real_users: n,
        n_items: m,
        k_fake,
    })
}

pub struct AttackOutcome<S> {
    pub trace: AttackTrace<S>,
    /// Continuous Z at the last logged iteration.
    pub final_z: FakeProfileMatrix<S>,
    /// Rounded non-zero view of `final_z`.
    pub final_z_rounded: Vec<Rating>,
    pub model_before: FactorModel<S>,
    pub model_after: FactorModel<S>,
}

impl<S: Scalar> AttackOutcome<S> {
    pub fn stopped_by_criterion(&self) -> bool {
        matches!(self.trace.stop, StopReason::Criterion { .. })
    }

    pub fn final_delta(&self) -> Option<S> {
        self.trace.rows.last().map(|r| r.delta)
    }
}

/// Runs Z-SGD from a prepared recommender state. Row `t` logs the state of
/// `Z_t` (objective from the base evaluation, distribution metrics of the
/// rounded `Z_t`, rank losses from the retrained model); stopping is checked
/// after logging, then the descent step produces `Z_{t+1}`. A mid-run
/// failure ends the run with `StopReason::Aborted`, keeping the rows logged
/// so far.
pub fn run_attack_prepared<S: Scalar>(
    base: &PreparedAttack<S>,
    data: &RatingMatrix,
    split: &DatasetSplit,
    objective: &AttackObjective,
    gen_init: &FakeProfileMatrix<S>,
    config: &AttackConfig,
    aux: &[AuxMetric],
) -> Result<AttackOutcome<S>> {
    run_attack_observed(base, data, split, objective, gen_init, config, aux, &mut |_, _| {})
}

/// [`run_attack_prepared`] with a per-iteration observer called after each
/// row is logged, receiving the iteration index and the retrained model.
#[allow(clippy::too_many_arguments)]
pub fn run_attack_observed<S: Scalar>(
    base: &PreparedAttack<S>,
    data: &RatingMatrix,
    split: &DatasetSplit,
    objective: &AttackObjective,
    gen_init: &FakeProfileMatrix<S>,
    config: &AttackConfig,
    aux: &[AuxMetric],
    observer: &mut dyn FnMut(usize, &FactorModel<S>),
) -> Result<AttackOutcome<S>> {
    config.validate()?;
    if gen_init.scale() != Scale::Rating {
        return Err(Error::ScaleMismatch {
            expected: "rating",
            got: "symmetric",
        });
    }
    if gen_init.k() != base.k_fake || gen_init.n_items() != base.n_items {
        return Err(Error::InvalidDimension(format!(
            "gen_init {}x{} vs prepared {}x{}",
            gen_init.k(),
            gen_init.n_items(),
            base.k_fake,
            base.n_items
        )));
    }
    if matches!(config.stop, StopRule::RemovedFromTop { .. }) && objective.point_target().is_none()
    {
        return Err(Error::InvalidConfig(
            "removed_from_top stopping needs a single-cell intent".into(),
        ));
    }
    // The distribution gate: the initial fake users must already look real.
    let (gate_tvd, gate_js) = mean_distance(data, gen_init)?;
    if gate_tvd.as_f64() > GATE_LIMIT || gate_js.as_f64() > GATE_LIMIT {
        return Err(Error::DistributionGate {
            tvd: gate_tvd.as_f64(),
            js: gate_js.as_f64(),
            limit: GATE_LIMIT,
        });
    }

    let ctx = EvalContext { data, split };
    let f_before = objective.loss(&base.model_before, &ctx)?;
    let mut oracle = EvalOracle {
        real_tuples: &base.real_tuples,
        n_rows: base.n_real_users + base.k_fake,
        n_items: base.n_items,
        n_real_users: base.n_real_users,
        model: base.model_before.clone(),
        objective,
        ctx: EvalContext { data, split },
        inner_iters: config.inner_iters,
    };

    let point = objective.point_target();
    let candidates = point.map(|(u, _)| candidate_items(&ctx, u));

    let mut trace = AttackTrace {
        f_before,
        rows: Vec::new(),
        stop: StopReason::MaxIters,
        aux_names: aux.iter().map(|a| a.name.clone()).collect(),
    };
    let mut z = gen_init.clone();

    'iters: for t in 1..=config.max_iters {
        let started = Instant::now();
        let (grad, f_t) = match zo_gradient(&mut oracle, &z, config.alpha, config.k_dirs) {
            Ok(v) => v,
            Err(e) => {
                trace.stop = StopReason::Aborted {
                    message: e.to_string(),
                };
                break 'iters;
            }
        };
        let (mean_tvd, mean_js) = mean_distance(data, &z)?;
        let rank = match (&point, &candidates) {
            (Some((u, h)), Some(cands)) => {
                let r = rank_loss(&oracle.model, *u, *h, &RANK_TOPS, cands);
                Some([r[0], r[1], r[2]])
            }
            _ => None,
        };
        let mut aux_values = Vec::with_capacity(aux.len());
        for metric in aux {
            aux_values.push(metric.value(&oracle.model, &ctx)?);
        }
        let delta = f_before - f_t;
        trace.rows.push(TraceRow {
            t,
            f_a: f_t,
            delta,
            mean_tvd,
            mean_js,
            rank,
            seconds: started.elapsed().as_secs_f64(),
            aux: aux_values,
        });
        observer(t, &oracle.model);

        let fired = match config.stop {
            StopRule::None => false,
            StopRule::DeltaGe { threshold } => delta.as_f64() >= threshold,
            StopRule::RemovedFromTop { k } => {
                let pos = RANK_TOPS.iter().position(|&t| t == k).unwrap_or(2);
                rank.map(|r| r[pos] == 0).unwrap_or(false)
            }
        };
        if fired {
            trace.stop = StopReason::Criterion { t };
            break 'iters;
        }
        if t == config.max_iters {
            trace.stop = StopReason::MaxIters;
            break 'iters;
        }
        z = match zsgd_step(&z, &grad, config.eta) {
            Ok(next) => next,
            Err(e) => {
                trace.stop = StopReason::Aborted {
                    message: e.to_string(),
                };
                break 'iters;
            }
        };
    }

    let final_z_rounded = z.rounded_entries();
    Ok(AttackOutcome {
        trace,
        final_z: z,
        final_z_rounded,
        model_before: base.model_before.clone(),
        model_after: oracle.model,
    })
}

/// Full attack from raw inputs: pre-trains the recommender, then runs
/// [`run_attack_prepared`] without auxiliary metrics.
pub fn run_attack<S: Scalar>(
    data: &RatingMatrix,
    split: &DatasetSplit,
    rec: &RecommenderConfig,
    objective: &AttackObjective,
    gen_init: &FakeProfileMatrix<S>,
    config: &AttackConfig,
) -> Result<AttackOutcome<S>> {
    let base = prepare(data, split, gen_init.k(), rec, config.pre_iters)?;
    run_attack_prepared(&base, data, split, objective, gen_init, config, &[])
}

/// One row of the top-user impact report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactRow<S> {
    pub id: u32,
    pub before: S,
    pub after: S,
    pub delta: S,
    /// Pearson correlation with the target, from the before-attack latent
    /// factors.
    pub corr_factor: S,
    /// Pearson correlation with the target, from the raw rating rows or
    /// columns (unrated cells as 0).
    pub corr_rating: S,
}

/// Impact of a top-user attack on every non-rater of the item and every
/// unrated item of the top user.
#[derive(Debug, Clone)]
pub struct ImpactReport<S> {
    pub target_item: u32,
    pub target_user: u32,
    /// Non-raters of the item, sorted by descending before-attack score.
    pub user_rows: Vec<ImpactRow<S>>,
    /// Unrated items of the top user, sorted by descending before-attack
    /// score.
    pub item_rows: Vec<ImpactRow<S>>,
    /// `(subset size, mean delta over top subset, mean delta over bottom
    /// subset)` for the Fig.-style curves.
    pub user_curve: Vec<(usize, S, S)>,
    pub item_curve: Vec<(usize, S, S)>,
    pub overall_user_delta: S,
    pub overall_item_delta: S,
}

fn impact_curve<S: Scalar>(rows: &[ImpactRow<S>]) -> Vec<(usize, S, S)> {
    let mut curve = Vec::new();
    for &n in &[5usize, 10, 20, 40, 80, 160, 320] {
        if n > rows.len() {
            break;
        }
        let top: S = rows[..n].iter().map(|r| r.delta).sum::<S>() / S::cast(n as f64);
        let bottom: S =
            rows[rows.len() - n..].iter().map(|r| r.delta).sum::<S>() / S::cast(n as f64);
        curve.push((n, top, bottom));
    }
    curve
}

/// Runs a single-cell attack against the top predicted user of `item` and
/// reports the induced score shifts across users and items.
pub fn top_user_attack<S: Scalar>(
    data: &RatingMatrix,
    split: &DatasetSplit,
    rec: &RecommenderConfig,
    item: u32,
    gen_init: &FakeProfileMatrix<S>,
    config: &AttackConfig,
) -> Result<(AttackOutcome<S>, ImpactReport<S>)> {
    let base = prepare(data, split, gen_init.k(), rec, config.pre_iters)?;
    let target_user = crate::objectives::top_user(&base.model_before, item, data)?;
    let objective = AttackObjective {
        intent: crate::objectives::Intent::PointScore {
            user: target_user,
            item,
        },
        direction: crate::objectives::Direction::Minimize,
        eval_set: crate::objectives::EvalSet::E1Unrated,
    };
    let outcome = run_attack_prepared(&base, data, split, &objective, gen_init, config, &[])?;

    let before = &outcome.model_before;
    let after = &outcome.model_after;

    // Dense rating rows for the rating-based correlations.
    let dense: Array2<S> = data.to_dense();
    let target_user_factors = before.user_factors.row(target_user as usize);
    let target_user_ratings = dense.row(target_user as usize);

    let mut user_rows: Vec<ImpactRow<S>> = data
        .non_raters(item)
        .into_iter()
        .map(|u| {
            let b = before.score(u, item);
            let a = after.score(u, item);
            ImpactRow {
                id: u,
                before: b,
                after: a,
                delta: b - a,
                corr_factor: crate::linalg::pearson(
                    before.user_factors.row(u as usize),
                    target_user_factors,
                ),
                corr_rating: crate::linalg::pearson(dense.row(u as usize), target_user_ratings),
            }
        })
        .collect();
    user_rows.sort_by(|x, y| {
        y.before
            .partial_cmp(&x.before)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.id.cmp(&y.id))
    });

    let target_item_factors = before.item_factors.row(item as usize);
    let target_item_ratings = dense.column(item as usize);
    let rated: std::collections::BTreeSet<u32> = data
        .user_ratings(target_user)
        .iter()
        .map(|r| r.item)
        .collect();
    let mut item_rows: Vec<ImpactRow<S>> = (0..data.n_items() as u32)
        .filter(|j| !rated.contains(j))
        .map(|j| {
            let b = before.score(target_user, j);
            let a = after.score(target_user, j);
            ImpactRow {
                id: j,
                before: b,
                after: a,
                delta: b - a,
                corr_factor: crate::linalg::pearson(
                    before.item_factors.row(j as usize),
                    target_item_factors,
                ),
                corr_rating: crate::linalg::pearson(dense.column(j as usize), target_item_ratings),
            }
        })
        .collect();
    item_rows.sort_by(|x, y| {
        y.before
            .partial_cmp(&x.before)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.id.cmp(&y.id))
    });

    let mean = |rows: &[ImpactRow<S>]| -> S {
        rows.iter().map(|r| r.delta).sum::<S>() / S::cast(rows.len().max(1) as f64)
    };
    let report = ImpactReport {
        target_item: item,
        target_user,
        user_curve: impact_curve(&user_rows),
        item_curve: impact_curve(&item_rows),
        overall_user_delta: mean(&user_rows),
        overall_item_delta: mean(&item_rows),
        user_rows,
        item_rows,
    };
    Ok((outcome, report))
}
