//! Experiment orchestration: per-family presets, seeded end-to-end runs, and
//! CSV/JSON report emission.
//!
//! Each attack family mirrors one experiment design: single-cell attacks,
//! top-item removal, item-mean pushes, top-user attacks with impact reports,
//! group score/error attacks with per-decile reporting, hit-rate and
//! error-modeling improvements, and two-group fairness runs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::{
    prepare, run_attack_observed, top_user_attack, AttackConfig, AttackOutcome, AttackTrace,
    AuxEval, AuxMetric, PreparedAttack, RecommenderConfig, StopReason, StopRule, TupleSource,
};
use crate::dataset::{split, DatasetSource, DatasetSplit, RatingMatrix, SideInfo, SplitMode};
use crate::error::{Error, Result};
use crate::generator::{empirical_sample, gan_sample, train_gan, FakeProfileMatrix, GanConfig};
use crate::objectives::{
    build_groups, candidate_items, eval_fairness_gap, eval_group, top_user, AttackObjective, Axis,
    Direction, EvalContext, EvalSet, GroupKind, GroupObjectiveKind, GroupSpec, Intent,
};
use crate::recommender::top_k;

type S = f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SingleUi,
    TopItemRemoval,
    ItemMean,
    TopUser,
    GroupScore,
    GroupError,
    HitRateImprove,
    ErrorImprove,
    Fairness,
}

impl Family {
    pub fn parse(s: &str) -> Result<Family> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown experiment family {s:?}")))
    }

    pub fn all() -> [Family; 9] {
        [
            Family::SingleUi,
            Family::TopItemRemoval,
            Family::ItemMean,
            Family::TopUser,
            Family::GroupScore,
            Family::GroupError,
            Family::HitRateImprove,
            Family::ErrorImprove,
            Family::Fairness,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    Empirical,
    /// Empirical sampler spread continuously within each rounding cell; the
    /// rounded profiles (and the distribution metrics) are identical to
    /// `Empirical`, but descent can actually move the training set.
    EmpiricalContinuous,
    Gan,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub mode: GeneratorMode,
    /// Fake-user budget k.
    pub k: usize,
    pub seed: u64,
    pub gan: GanConfig,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            mode: GeneratorMode::EmpiricalContinuous,
            k: 64,
            seed: 0,
            gan: GanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    /// Number of targets to draw (ignored by group families, which attack
    /// every group).
    pub sample_count: usize,
    pub dataset: DatasetSource,
    pub split_mode: SplitMode,
    pub split_seed: u64,
    pub recommender: RecommenderConfig,
    pub generator: GeneratorSpec,
    pub attacker: AttackConfig,
    /// Seed for target sampling.
    pub target_seed: u64,
    /// Group construction for the group families.
    pub group_kind: Option<GroupKind>,
    pub group_axis: Option<Axis>,
    /// Use the smooth surrogate (mean held-out predicted score) instead of
    /// the piecewise-constant hit rate.
    pub hit_rate_surrogate: bool,
}

/// Per-family preset mirroring the experiment settings; the dataset defaults
/// to the synthetic benchmark and is usually overridden.
pub fn preset(family: Family) -> ExperimentSpec {
    let mut spec = ExperimentSpec {
        family,
        sample_count: 20,
        dataset: DatasetSource::Ml100kLike { seed: 0 },
        split_mode: SplitMode::E1,
        split_seed: 0,
        recommender: RecommenderConfig {
            d: 40,
            lambda: 0.001,
            seed: 0,
        },
        generator: GeneratorSpec::default(),
        attacker: AttackConfig {
            eta: 100.0,
            alpha: 50.0,
            k_dirs: 5,
            max_iters: 21,
            inner_iters: 5,
            pre_iters: 10,
            stop: StopRule::DeltaGe { threshold: 1.0 },
            seed: 0,
        },
        target_seed: 1,
        group_kind: None,
        group_axis: None,
        hit_rate_surrogate: false,
    };
    let group_scale = |spec: &mut ExperimentSpec| {
        spec.recommender.d = 100;
        spec.recommender.lambda = 0.1;
        spec.attacker.pre_iters = 100;
        spec.attacker.eta = 1000.0;
        spec.attacker.alpha = 50.0;
        spec.attacker.k_dirs = 5;
        spec.attacker.max_iters = 30;
        spec.attacker.stop = StopRule::None;
        spec.split_mode = SplitMode::E2b;
    };
    match family {
        Family::SingleUi => {}
        Family::TopItemRemoval => {
            spec.attacker.stop = StopRule::RemovedFromTop { k: 10 };
            spec.sample_count = 10;
        }
        Family::ItemMean => {
            spec.attacker.eta = 1000.0;
            spec.attacker.alpha = 500.0;
            spec.attacker.max_iters = 22;
            spec.sample_count = 5;
        }
        Family::TopUser => {
            spec.sample_count = 3;
        }
        Family::GroupScore => {
            group_scale(&mut spec);
            spec.group_kind = Some(GroupKind::ScoreDecile);
            spec.group_axis = Some(Axis::Items);
        }
        Family::GroupError => {
            group_scale(&mut spec);
            spec.group_kind = Some(GroupKind::ErrorDecile);
            spec.group_axis = Some(Axis::Items);
        }
        Family::HitRateImprove => {
            group_scale(&mut spec);
            spec.split_mode = SplitMode::E2a;
            spec.group_kind = Some(GroupKind::CountDecile);
            spec.group_axis = Some(Axis::Users);
        }
        Family::ErrorImprove => {
            group_scale(&mut spec);
            spec.group_kind = Some(GroupKind::CountDecile);
            spec.group_axis = Some(Axis::Items);
        }
        Family::Fairness => {
            group_scale(&mut spec);
            spec.group_kind = Some(GroupKind::Gender);
            spec.group_axis = Some(Axis::Users);
        }
    }
    spec
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetOutcome {
    pub target: String,
    pub success: bool,
    pub delta: f64,
    pub iterations: usize,
    pub final_mean_js: f64,
    pub stop: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupReportRow {
    pub group: String,
    pub tuple_count: usize,
    pub before_target_metric: f64,
    pub before_test_metric: Option<f64>,
    pub pct_target_improved: Option<f64>,
    pub pct_test_improved: Option<f64>,
    pub best_iteration: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairnessSummary {
    pub group_a: String,
    pub group_b: String,
    pub mae_before: (f64, f64),
    pub mae_after: (f64, f64),
    pub gap_before: f64,
    pub gap_after: f64,
    pub optimized_group: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub spec: ExperimentSpec,
    pub outcomes: Vec<TargetOutcome>,
    pub success_rate: Option<f64>,
    pub groups: Vec<GroupReportRow>,
    pub fairness: Option<FairnessSummary>,
    pub gate_mean_tvd: f64,
    pub gate_mean_js: f64,
}

/// A completed experiment: the summary plus every trace and family-specific
/// CSV payload, ready for [`report`].
pub struct ExperimentRun {
    pub summary: RunSummary,
    pub traces: Vec<(String, AttackTrace<S>)>,
    /// `(file name, file content)` extras such as impact reports.
    pub extras: Vec<(String, String)>,
    pub final_profiles: Vec<(String, FakeProfileMatrix<S>)>,
}

fn build_gen_init(data: &RatingMatrix, gen: &GeneratorSpec) -> Result<FakeProfileMatrix<S>> {
    match gen.mode {
        GeneratorMode::Empirical => empirical_sample(data, gen.k, gen.seed),
        GeneratorMode::EmpiricalContinuous => {
            empirical_sample::<S>(data, gen.k, gen.seed)?.dequantized(gen.seed.wrapping_add(1))
        }
        GeneratorMode::Gan => {
            let model = train_gan::<S>(data, gen.gan.clone())?;
            gan_sample(&model, gen.k, gen.seed)?.to_rating_scale()
        }
    }
}

fn outcome_row(target: String, outcome: &AttackOutcome<S>, success: bool) -> TargetOutcome {
    let last = outcome.trace.rows.last();
    TargetOutcome {
        target,
        success,
        delta: last.map(|r| r.delta).unwrap_or(f64::NAN),
        iterations: outcome.trace.rows.len(),
        final_mean_js: last.map(|r| r.mean_js).unwrap_or(f64::NAN),
        stop: match &outcome.trace.stop {
            StopReason::MaxIters => "max_iters".to_string(),
            StopReason::Criterion { t } => format!("criterion@{t}"),
            StopReason::Aborted { message } => format!("aborted: {message}"),
        },
    }
}

/// Draws `count` distinct values from `pool` (seeded, uniform).
fn sample_distinct(pool: &[u32], count: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut pool: Vec<u32> = pool.to_vec();
    pool.shuffle(rng);
    pool.truncate(count);
    pool
}

/// Percent improvement in the optimized direction:
/// `delta_loss * 100 / |before_raw|`; `None` when the baseline is 0.
fn pct_improved(before_loss: f64, best_loss: f64) -> Option<f64> {
    let delta = before_loss - best_loss;
    let denom = before_loss.abs();
    if denom == 0.0 {
        None
    } else {
        Some(delta * 100.0 / denom)
    }
}

/// Executes the experiment described by `spec`. IO-free; pair with
/// [`report`] to write the result files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentRun> {
    let (data, side) = spec.dataset.load()?;
    let split = split(&data, spec.split_mode, spec.split_seed);
    let gen_init = build_gen_init(&data, &spec.generator)?;
    let (gate_tvd, gate_js) = crate::distmetrics::mean_distance(&data, &gen_init)?;

    let base = prepare::<S>(
        &data,
        &split,
        spec.generator.k,
        &spec.recommender,
        spec.attacker.pre_iters,
    )?;

    let mut run = ExperimentRun {
        summary: RunSummary {
            spec: spec.clone(),
            outcomes: Vec::new(),
            success_rate: None,
            groups: Vec::new(),
            fairness: None,
            gate_mean_tvd: gate_tvd,
            gate_mean_js: gate_js,
        },
        traces: Vec::new(),
        extras: Vec::new(),
        final_profiles: Vec::new(),
    };

    match spec.family {
        Family::SingleUi => run_single_ui(spec, &data, &split, &base, &gen_init, &mut run)?,
        Family::TopItemRemoval => {
            run_top_item_removal(spec, &data, &split, &base, &gen_init, &mut run)?
        }
        Family::ItemMean => run_item_mean(spec, &data, &split, &base, &gen_init, &mut run)?,
        Family::TopUser => run_top_user(spec, &data, &split, &gen_init, &mut run)?,
        Family::GroupScore | Family::GroupError | Family::ErrorImprove => {
            run_group_family(spec, &data, &side, &split, &base, &gen_init, &mut run)?
        }
        Family::HitRateImprove => {
            run_hit_rate(spec, &data, &side, &split, &base, &gen_init, &mut run)?
        }
        Family::Fairness => run_fairness(spec, &data, &side, &split, &base, &gen_init, &mut run)?,
    }

    let successes = run.summary.outcomes.iter().filter(|o| o.success).count();
    run.summary.success_rate = if run.summary.outcomes.is_empty() {
        None
    } else {
        Some(successes as f64 / run.summary.outcomes.len() as f64)
    };
    Ok(run)
}

fn run_single_ui(
    spec: &ExperimentSpec,
    data: &RatingMatrix,
    split: &DatasetSplit,
    base: &PreparedAttack<S>,
    gen_init: &FakeProfileMatrix<S>,
    run: &mut ExperimentRun,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.target_seed);
    let items: Vec<u32> = (0..data.n_items() as u32)
        .filter(|&j| !data.non_raters(j).is_empty())
        .collect();
    let picked = sample_distinct(&items, spec.sample_count, &mut rng);
    for item in picked {
        let non_raters = data.non_raters(item);
        let user = non_raters[rng.gen_range(0..non_raters.len())];
        let objective = AttackObjective {
            intent: Intent::PointScore { user, item },
            direction: Direction::Minimize,
            eval_set: EvalSet::E1Unrated,
        };
        let name = format!("single_u{user}_i{item}");
        let outcome = run_attack_observed(
            base, data, split, &objective, gen_init, &spec.attacker, &[], &mut |_, _| {},
        )?;
        let success = outcome.stopped_by_criterion();
        run.summary
            .outcomes
            .push(outcome_row(name.clone(), &outcome, success));
        run.final_profiles.push((name.clone(), outcome.final_z.clone()));
        run.traces.push((name, outcome.trace));
    }
    Ok(())
}

fn run_top_item_removal(
    spec: &ExperimentSpec,
    data: &RatingMatrix,
    split: &DatasetSplit,
    base: &PreparedAttack<S>,
    gen_init: &FakeProfileMatrix<S>,
    run: &mut ExperimentRun,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.target_seed);
    let ctx = EvalContext { data, split };
    let users: Vec<u32> = (0..data.n_users() as u32).collect();
    let picked = sample_distinct(&users, spec.sample_count, &mut rng);
    for user in picked {
        let candidates = candidate_items(&ctx, user);
        if candidates.is_empty() {
            continue;
        }
        let top = top_k(&base.model_before, user, &candidates, 1);
        let item = top[0];
        let objective = AttackObjective {
            intent: Intent::PointScore { user, item },
            direction: Direction::Minimize,
            eval_set: EvalSet::E1Unrated,
        };
        let name = format!("removal_u{user}_i{item}");
        let outcome = run_attack_observed(
            base, data, split, &objective, gen_init, &spec.attacker, &[], &mut |_, _| {},
        )?;
        let success = outcome.stopped_by_criterion();
        run.summary
            .outcomes
            .push(outcome_row(name.clone(), &outcome, success));
        run.traces.push((name, outcome.trace));
    }
    Ok(())
}

fn run_item_mean(
    spec: &ExperimentSpec,
    data: &RatingMatrix,
    split: &DatasetSplit,
    base: &PreparedAttack<S>,
    gen_init: &FakeProfileMatrix<S>,
    run: &mut ExperimentRun,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.target_seed);
    let items: Vec<u32> = (0..data.n_items() as u32)
        .filter(|&j| !data.non_raters(j).is_empty())
        .collect();
    let picked = sample_distinct(&items, spec.sample_count, &mut rng);
    for item in picked {
        let objective = AttackObjective {
            intent: Intent::ItemMean { item },
            direction: Direction::Minimize,
            eval_set: EvalSet::E1Unrated,
        };
        let name = format!("item_mean_i{item}");
        // Per-user deltas per iteration (the per-user trend data).
        let non_raters = data.non_raters(item);
        let before: Vec<f64> = non_raters
            .iter()
            .map(|&u| base.model_before.score(u, item))
            .collect();
        let mut per_user_csv = String::from("t,user,delta\n");
        let outcome = run_attack_observed(
            base,
            data,
            split,
            &objective,
            gen_init,
            &spec.attacker,
            &[],
            &mut |t, model| {
                for (idx, &u) in non_raters.iter().enumerate() {
                    let delta = before[idx] - model.score(u, item);
                    per_user_csv.push_str(&format!("{t},{u},{delta}\n"));
                }
            },
        )?;
        // Success when the mean score decreased at all by the end.
        let success = outcome.final_delta().map(|d| d > 0.0).unwrap_or(false);
        run.summary
            .outcomes
            .push(outcome_row(name.clone(), &outcome, success));
        run.extras
            .push((format!("user_deltas_{name}.csv"), per_user_csv));
        run.traces.push((name, outcome.trace));
    }
    Ok(())
}

fn run_top_user(
    spec: &ExperimentSpec,
    data: &RatingMatrix,
    split: &DatasetSplit,
    gen_init: &FakeProfileMatrix<S>,
    run: &mut ExperimentRun,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.target_seed);
    let items: Vec<u32> = (0..data.n_items() as u32)
        .filter(|&j| !data.non_raters(j).is_empty())
        .collect();
    let picked = sample_distinct(&items, spec.sample_count, &mut rng);
    for item in picked {
        let (outcome, report) =
            top_user_attack(data, split, &spec.recommender, item, gen_init, &spec.attacker)?;
        let name = format!("top_user_i{item}_u{}", report.target_user);
        let success = outcome.final_delta().map(|d| d > 0.0).unwrap_or(false);
        run.summary
            .outcomes
            .push(outcome_row(name.clone(), &outcome, success));

        let mut user_csv = String::from("id,before,after,delta,corr_factor,corr_rating\n");
        for r in &report.user_rows {
            user_csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.id, r.before, r.after, r.delta, r.corr_factor, r.corr_rating
            ));
        }
        let mut item_csv = String::from("id,before,after,delta,corr_factor,corr_rating\n");
        for r in &report.item_rows {
            item_csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.id, r.before, r.after, r.delta, r.corr_factor, r.corr_rating
            ));
        }
        let mut curve_csv = String::from("axis,n,top_avg_delta,bottom_avg_delta,overall_delta\n");
        for (n, top, bottom) in &report.user_curve {
            curve_csv.push_str(&format!(
                "users,{n},{top},{bottom},{}\n",
                report.overall_user_delta
            ));
        }
        for (n, top, bottom) in &report.item_curve {
            curve_csv.push_str(&format!(
                "items,{n},{top},{bottom},{}\n",
                report.overall_item_delta
            ));
        }
        run.extras.push((format!("user_impact_{name}.csv"), user_csv));
        run.extras.push((format!("item_impact_{name}.csv"), item_csv));
        run.extras.push((format!("impact_curve_{name}.csv"), curve_csv));
        run.traces.push((name, outcome.trace));
    }
    Ok(())
}

fn group_objective_kind(family: Family) -> (GroupObjectiveKind, Direction, f64) {
    match family {
        // Minimize the mean predicted score of the group.
        Family::GroupScore => (GroupObjectiveKind::MeanScore, Direction::Minimize, 1.0),
        // Maximize the group's prediction error.
        Family::GroupError => (GroupObjectiveKind::Mae, Direction::Maximize, 1.0),
        // Improve (minimize) the group's prediction error.
        Family::ErrorImprove => (GroupObjectiveKind::Mae, Direction::Minimize, 1.0),
        _ => unreachable!("not a group family"),
    }
}

fn run_group_family(
    spec: &ExperimentSpec,
    data: &RatingMatrix,
    side: &SideInfo,
    split: &DatasetSplit,
    base: &PreparedAttack<S>,
    gen_init: &FakeProfileMatrix<S>,
    run: &mut ExperimentRun,
) -> Result<()> {
    let kind = spec.group_kind.ok_or_else(|| {
        Error::InvalidConfig("group families require group_kind".into())
    })?;
    let axis = spec.group_axis.unwrap_or(Axis::Items);
    let groups = build_groups(kind, axis, data, side, &base.model_before, split)?;
    let (obj_kind, direction, sign) = group_objective_kind(spec.family);
    let orient = if direction == Direction::Minimize { 1.0 } else { -1.0 };

    for group in groups {
        let name = format!("group_{}", group.label.replace([' ', '/'], "_"));
        // Skip groups with no tuples in the target set: nothing to optimize.
        let before_target = match eval_group(&base.model_before, &group, obj_kind, &split.target) {
            Ok(v) => v.value,
            Err(Error::EmptyGroup(_)) => continue,
            Err(e) => return Err(e),
        };
        let before_test = eval_group(&base.model_before, &group, obj_kind, &split.test)
            .ok()
            .map(|v| v.value);
        let tuple_count = split
            .target
            .iter()
            .filter(|t| {
                group.contains(match axis {
                    Axis::Users => t.user,
                    Axis::Items => t.item,
                })
            })
            .count();

        let intent = match obj_kind {
            GroupObjectiveKind::MeanScore => Intent::GroupMeanScore {
                group: group.clone(),
            },
            GroupObjectiveKind::Mae => Intent::GroupMae {
                group: group.clone(),
                sign,
            },
        };
        let objective = AttackObjective {
            intent,
            direction,
            eval_set: EvalSet::E2TargetTuples,
        };
        let aux = if before_test.is_some() {
            vec![AuxMetric {
                name: "test_metric".into(),
                eval: AuxEval::Group {
                    group: group.clone(),
                    kind: obj_kind,
                    source: TupleSource::Test,
                },
            }]
        } else {
            Vec::new()
        };
        let outcome = run_attack_observed(
            base, data, split, &objective, gen_init, &spec.attacker, &aux, &mut |_, _| {},
        )?;

        // Best iteration by the optimized loss.
        let best = outcome
            .trace
            .rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.f_a.partial_cmp(&b.1.f_a).unwrap_or(std::cmp::Ordering::Equal));
        let (best_iter, pct_target, pct_test) = match best {
            Some((idx, row)) => {
                let pct_target = pct_improved(outcome.trace.f_before, row.f_a);
                let pct_test = match (before_test, row.aux.first()) {
                    (Some(bt), Some(&at)) if bt != 0.0 => Some(orient * (bt - at) * 100.0 / bt.abs()),
                    _ => None,
                };
                (idx + 1, pct_target, pct_test)
            }
            None => (0, None, None),
        };
        let success = pct_target.map(|p| p > 0.0).unwrap_or(false);
        run.summary
            .outcomes
            .push(outcome_row(name.clone(), &outcome, success));
        run.summary.groups.push(GroupReportRow {
            group: group.label.clone(),
            tuple_count,
            before_target_metric: before_target,
            before_test_metric: before_test,
            pct_target_improved: pct_target,
            pct_test_improved: pct_test,
            best_iteration: best_iter,
        });
        run.traces.push((name, outcome.trace));
    }
    Ok(())
}

fn run_hit_rate(
    spec: &ExperimentSpec,
    data: &RatingMatrix,
    side: &SideInfo,
    split: &DatasetSplit,
    base: &PreparedAttack<S>,
    gen_init: &FakeProfileMatrix<S>,
    run: &mut ExperimentRun,
) -> Result<()> {
    if spec.split_mode != SplitMode::E2a {
        return Err(Error::InvalidConfig(
            "hit-rate improvement requires the E2a leave-one-out split".into(),
        ));
    }
    let kind = spec.group_kind.unwrap_or(GroupKind::CountDecile);
    let groups = build_groups(kind, Axis::Users, data, side, &base.model_before, split)?;
    let ctx = EvalContext { data, split };

    for group in groups {
        let name = format!("hit_rate_{}", group.label.replace([' ', '/'], "_"));
        let before_target = match crate::objectives::eval_hit_rate(
            &base.model_before,
            &group,
            &ctx,
            10,
            &split.target,
        ) {
            Ok(v) => v.value,
            Err(Error::EmptyGroup(_)) => continue,
            Err(e) => return Err(e),
        };
        let before_test = crate::objectives::eval_hit_rate(
            &base.model_before,
            &group,
            &ctx,
            10,
            &split.test,
        )
        .ok()
        .map(|v| v.value);

        let objective = AttackObjective {
            intent: Intent::HitRate {
                group: group.clone(),
                k: 10,
                surrogate: spec.hit_rate_surrogate,
            },
            direction: Direction::Maximize,
            eval_set: EvalSet::E2TargetTuples,
        };
        let aux = vec![
            AuxMetric {
                name: "target_hit_rate".into(),
                eval: AuxEval::HitRate {
                    group: group.clone(),
                    k: 10,
                    source: TupleSource::Target,
                },
            },
            AuxMetric {
                name: "test_hit_rate".into(),
                eval: AuxEval::HitRate {
                    group: group.clone(),
                    k: 10,
                    source: TupleSource::Test,
                },
            },
        ];
        let outcome = run_attack_observed(
            base, data, split, &objective, gen_init, &spec.attacker, &aux, &mut |_, _| {},
        )?;

        // Best iteration by the true target hit rate (aux column 0).
        let best = outcome
            .trace
            .rows
            .iter()
            .enumerate()
            .max_by(|a, b| {
                a.1.aux[0]
                    .partial_cmp(&b.1.aux[0])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let (best_iter, pct_target, pct_test) = match best {
            Some((idx, row)) => {
                let pct_t = if before_target > 0.0 {
                    Some((row.aux[0] - before_target) * 100.0 / before_target)
                } else {
                    None
                };
                let pct_s = match before_test {
                    Some(bt) if bt > 0.0 => Some((row.aux[1] - bt) * 100.0 / bt),
                    _ => None,
                };
                (idx + 1, pct_t, pct_s)
            }
            None => (0, None, None),
        };
        let success = pct_target.map(|p| p > 0.0).unwrap_or(false);
        run.summary
            .outcomes
            .push(outcome_row(name.clone(), &outcome, success));
        run.summary.groups.push(GroupReportRow {
            group: group.label.clone(),
            tuple_count: split
                .target
                .iter()
                .filter(|t| group.contains(t.user))
                .count(),
            before_target_metric: before_target,
            before_test_metric: before_test,
            pct_target_improved: pct_target,
            pct_test_improved: pct_test,
            best_iteration: best_iter,
        });
        run.traces.push((name, outcome.trace));
    }
    Ok(())
}

fn run_fairness(
    spec: &ExperimentSpec,
    data: &RatingMatrix,
    side: &SideInfo,
    split: &DatasetSplit,
    base: &PreparedAttack<S>,
    gen_init: &FakeProfileMatrix<S>,
    run: &mut ExperimentRun,
) -> Result<()> {
    let kind = spec.group_kind.unwrap_or(GroupKind::Gender);
    let groups = build_groups(kind, Axis::Users, data, side, &base.model_before, split)?;
    if groups.len() < 2 {
        return Err(Error::InvalidConfig(
            "fairness needs at least two groups".into(),
        ));
    }
    // Gender: the two groups; quartiles: first vs last.
    let a = groups.first().unwrap().clone();
    let b = groups.last().unwrap().clone();
    let before = eval_fairness_gap(&base.model_before, &a, &b, &split.target)?;
    let worse = if before.worse_is_b { b.clone() } else { a.clone() };

    let objective = AttackObjective {
        intent: Intent::GroupMae {
            group: worse.clone(),
            sign: 1.0,
        },
        direction: Direction::Minimize,
        eval_set: EvalSet::E2TargetTuples,
    };
    // Track every group's target error per iteration.
    let aux: Vec<AuxMetric> = groups
        .iter()
        .map(|g| AuxMetric {
            name: format!("mae_{}", g.label.replace([' ', '/'], "_")),
            eval: AuxEval::Group {
                group: g.clone(),
                kind: GroupObjectiveKind::Mae,
                source: TupleSource::Target,
            },
        })
        .collect();
    let outcome = run_attack_observed(
        base, data, split, &objective, gen_init, &spec.attacker, &aux, &mut |_, _| {},
    )?;

    let after = eval_fairness_gap(&outcome.model_after, &a, &b, &split.target)?;
    let success = after.gap <= 0.5 * before.gap;
    let name = format!("fairness_{}_vs_{}", a.label, b.label);
    run.summary
        .outcomes
        .push(outcome_row(name.clone(), &outcome, success));
    run.summary.fairness = Some(FairnessSummary {
        group_a: a.label.clone(),
        group_b: b.label.clone(),
        mae_before: (before.mae_a, before.mae_b),
        mae_after: (after.mae_a, after.mae_b),
        gap_before: before.gap,
        gap_after: after.gap,
        optimized_group: worse.label.clone(),
    });

    // Long-format per-iteration group errors.
    let mut csv = String::from("t,group,mae\n");
    for row in &outcome.trace.rows {
        for (g, v) in groups.iter().zip(row.aux.iter()) {
            csv.push_str(&format!("{},{},{}\n", row.t, g.label, v));
        }
    }
    run.extras.push(("fairness_groups_per_iter.csv".into(), csv));
    run.traces.push((name, outcome.trace));
    Ok(())
}

/// Writes the summary JSON, per-run trace CSVs, the per-group report CSV,
/// final fake-profile CSVs, and any family-specific extras. Returns the
/// paths written.
pub fn report(run: &ExperimentRun, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&run.summary)?;
    fs::write(&summary_path, json).map_err(|e| Error::io(&summary_path, e))?;
    written.push(summary_path);

    for (name, trace) in &run.traces {
        let path = out_dir.join(format!("trace_{name}.csv"));
        trace.write_csv(&path)?;
        written.push(path);
    }

    if !run.summary.groups.is_empty() {
        let path = out_dir.join("groups.csv");
        let mut csv = String::from(
            "group,tuple_count,before_target_metric,before_test_metric,pct_target_improved,pct_test_improved,best_iteration\n",
        );
        let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for g in &run.summary.groups {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                g.group,
                g.tuple_count,
                g.before_target_metric,
                fmt(&g.before_test_metric),
                fmt(&g.pct_target_improved),
                fmt(&g.pct_test_improved),
                g.best_iteration
            ));
        }
        fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    for (name, profile) in &run.final_profiles {
        let path = out_dir.join(format!("final_z_{name}.csv"));
        profile.write_csv(&path)?;
        written.push(path);
    }

    for (name, content) in &run.extras {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Single-attack config file: the `attack --config` JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfigFile {
    pub dataset: DatasetSource,
    pub split: SplitConfig,
    pub recommender: RecommenderConfig,
    pub generator: GeneratorSpec,
    pub objective: ObjectiveConfig,
    pub attacker: AttackConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitConfig {
    pub mode: SplitMode,
    pub seed: u64,
}

/// Objective block: group intents name a group by kind plus index or label,
/// resolved against the before-attack model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "intent", rename_all = "snake_case")]
pub enum ObjectiveConfig {
    PointScore {
        user: u32,
        item: u32,
        #[serde(default)]
        direction: Option<Direction>,
    },
    ItemMean {
        item: u32,
    },
    TopUser {
        item: u32,
    },
    GroupMeanScore {
        group: GroupConfig,
    },
    GroupMae {
        group: GroupConfig,
        #[serde(default)]
        direction: Option<Direction>,
    },
    HitRate {
        group: GroupConfig,
        #[serde(default = "default_top_k")]
        k: usize,
        #[serde(default)]
        surrogate: bool,
    },
    FairnessGap {
        group_a: GroupConfig,
        group_b: GroupConfig,
    },
}

fn default_top_k() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupConfig {
    pub kind: GroupKind,
    #[serde(default)]
    pub axis: Option<Axis>,
    #[serde(default)]
    pub index: Option<usize>,
    #[serde(default)]
    pub label: Option<String>,
}

impl GroupConfig {
    fn resolve(
        &self,
        data: &RatingMatrix,
        side: &SideInfo,
        model: &crate::recommender::FactorModel<S>,
        split: &DatasetSplit,
    ) -> Result<GroupSpec> {
        let axis = self.axis.unwrap_or(match self.kind {
            GroupKind::Gender | GroupKind::AgeDecile => Axis::Users,
            _ => Axis::Items,
        });
        let groups = build_groups(self.kind, axis, data, side, model, split)?;
        if let Some(label) = &self.label {
            return groups
                .into_iter()
                .find(|g| &g.label == label || g.label.starts_with(label.as_str()))
                .ok_or_else(|| Error::InvalidConfig(format!("no group labelled {label:?}")));
        }
        let idx = self.index.unwrap_or(0);
        groups
            .into_iter()
            .nth(idx)
            .ok_or_else(|| Error::InvalidConfig(format!("group index {idx} out of range")))
    }
}

/// Outcome of a single `attack` run, serialized next to the trace.
#[derive(Debug, Clone, Serialize)]
pub struct AttackRunReport {
    pub objective: String,
    pub f_before: f64,
    pub f_after: f64,
    pub delta: f64,
    pub stop: StopReason,
    pub iterations: usize,
    pub final_mean_tvd: f64,
    pub final_mean_js: f64,
}

/// Runs one attack from a config file and writes `trace.csv`,
/// `fake_profiles.csv`, and `outcome.json` under `out_dir`.
pub fn run_attack_config(cfg: &AttackConfigFile, out_dir: &Path) -> Result<AttackRunReport> {
    let (data, side) = cfg.dataset.load()?;
    let split_data = split(&data, cfg.split.mode, cfg.split.seed);
    let gen_init = build_gen_init(&data, &cfg.generator)?;
    let base = prepare::<S>(
        &data,
        &split_data,
        cfg.generator.k,
        &cfg.recommender,
        cfg.attacker.pre_iters,
    )?;

    let eval_set = match cfg.split.mode {
        SplitMode::E1 => EvalSet::E1Unrated,
        _ => EvalSet::E2TargetTuples,
    };
    let objective = match &cfg.objective {
        ObjectiveConfig::PointScore { user, item, direction } => AttackObjective {
            intent: Intent::PointScore {
                user: *user,
                item: *item,
            },
            direction: direction.unwrap_or(Direction::Minimize),
            eval_set,
        },
        ObjectiveConfig::ItemMean { item } => AttackObjective {
            intent: Intent::ItemMean { item: *item },
            direction: Direction::Minimize,
            eval_set,
        },
        ObjectiveConfig::TopUser { item } => {
            let user = top_user(&base.model_before, *item, &data)?;
            AttackObjective {
                intent: Intent::PointScore { user, item: *item },
                direction: Direction::Minimize,
                eval_set,
            }
        }
        ObjectiveConfig::GroupMeanScore { group } => AttackObjective {
            intent: Intent::GroupMeanScore {
                group: group.resolve(&data, &side, &base.model_before, &split_data)?,
            },
            direction: Direction::Minimize,
            eval_set,
        },
        ObjectiveConfig::GroupMae { group, direction } => AttackObjective {
            intent: Intent::GroupMae {
                group: group.resolve(&data, &side, &base.model_before, &split_data)?,
                sign: 1.0,
            },
            direction: direction.unwrap_or(Direction::Maximize),
            eval_set,
        },
        ObjectiveConfig::HitRate { group, k, surrogate } => AttackObjective {
            intent: Intent::HitRate {
                group: group.resolve(&data, &side, &base.model_before, &split_data)?,
                k: *k,
                surrogate: *surrogate,
            },
            direction: Direction::Maximize,
            eval_set,
        },
        ObjectiveConfig::FairnessGap { group_a, group_b } => {
            let a = group_a.resolve(&data, &side, &base.model_before, &split_data)?;
            let b = group_b.resolve(&data, &side, &base.model_before, &split_data)?;
            let before = eval_fairness_gap(&base.model_before, &a, &b, &split_data.target)?;
            AttackObjective {
                intent: Intent::FairnessGap {
                    a,
                    b,
                    optimize_b: before.worse_is_b,
                },
                direction: Direction::Minimize,
                eval_set,
            }
        }
    };

    let outcome = run_attack_observed(
        &base,
        &data,
        &split_data,
        &objective,
        &gen_init,
        &cfg.attacker,
        &[],
        &mut |_, _| {},
    )?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    outcome.trace.write_csv(&out_dir.join("trace.csv"))?;
    outcome.final_z.write_csv(&out_dir.join("fake_profiles.csv"))?;

    let last = outcome.trace.rows.last();
    let report = AttackRunReport {
        objective: format!("{:?}", cfg.objective),
        f_before: outcome.trace.f_before,
        f_after: last.map(|r| r.f_a).unwrap_or(f64::NAN),
        delta: last.map(|r| r.delta).unwrap_or(f64::NAN),
        stop: outcome.trace.stop.clone(),
        iterations: outcome.trace.rows.len(),
        final_mean_tvd: last.map(|r| r.mean_tvd).unwrap_or(f64::NAN),
        final_mean_js: last.map(|r| r.mean_js).unwrap_or(f64::NAN),
    };
    let json = serde_json::to_string_pretty(&report)?;
    let path = out_dir.join("outcome.json");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

/// Applies a `key.path=value` override to a JSON-encoded spec; values parse
/// as JSON scalars with a string fallback.
pub fn apply_override(spec: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override {assignment:?} is not key=value")))?;
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = spec;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            node.as_object_mut()
                .ok_or_else(|| Error::InvalidConfig(format!("{path:?}: not an object")))?
                .insert(part.to_string(), value);
            return Ok(());
        }
        node = node
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("{path:?}: not an object")))?
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}
