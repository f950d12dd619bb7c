//! Instrumented probes for tuning investigations; run explicitly with
//! `cargo test -p poisonrec --test probe -- --ignored --nocapture`.

use poisonrec::attacker::{prepare, AttackConfig, RecommenderConfig};
use poisonrec::dataset::{split, synth_ml100k_like, SplitMode};
use poisonrec::generator::empirical_sample;
use poisonrec::linalg::top_singular_triplets;
use poisonrec::objectives::{AttackObjective, Direction, EvalContext, EvalSet, Intent};
use poisonrec::recommender::{alt_min, TrainSet};

#[test]
#[ignore]
fn probe_gradient_scale() {
    let (data, _) = synth_ml100k_like(0xA11CE);
    let s = split(&data, SplitMode::E1, 0);
    let rec = RecommenderConfig { d: 40, lambda: 0.001, seed: 0 };
    let cfg = AttackConfig::default();
    let base = prepare::<f64>(&data, &s, 64, &rec, cfg.pre_iters).unwrap();
    let gen = empirical_sample::<f64>(&data, 64, 0).unwrap().dequantized(1).unwrap();
    let objective = AttackObjective {
        intent: Intent::PointScore { user: 794, item: 304 },
        direction: Direction::Minimize,
        eval_set: EvalSet::E1Unrated,
    };
    let ctx = EvalContext { data: &data, split: &s };
    let f_before = objective.loss(&base.model_before, &ctx).unwrap();
    println!("f_before = {f_before}");

    // Manual evaluation plumbing for diagnostics.
    let n = data.n_users();
    let m = data.n_items();
    let eval = |values: &ndarray::Array2<f64>, warm: &poisonrec::FactorModel, iters: usize| {
        let mut tuples: Vec<(u32, u32, f64)> = base.real_tuples.clone();
        let mut count = 0;
        for ((i, j), v) in values.indexed_iter() {
            let r = v.round().clamp(0.0, 5.0);
            if r > 0.0 {
                tuples.push(((n + i) as u32, j as u32, r));
                count += 1;
            }
        }
        let train = TrainSet::new(n + 64, m, &tuples).unwrap();
        let model = alt_min(&train, warm, iters).unwrap();
        (objective.loss(&model, &ctx).unwrap(), model, count)
    };

    let mut z = gen.values().clone();
    let mut warm = base.model_before.clone();
    let alpha = cfg.alpha;
    let eta = cfg.eta;
    for t in 1..=6 {
        let (f_base, base_model, n_fake) = eval(&z, &warm, cfg.inner_iters);
        warm = base_model;
        let trips = top_singular_triplets(z.view(), cfg.k_dirs);
        let mut grad = ndarray::Array2::<f64>::zeros((64, m));
        print!("t={t} f={f_base:.4} fakes={n_fake} coefs=[");
        for (sig, u, v) in &trips {
            let mut dir = ndarray::Array2::<f64>::zeros((64, m));
            for i in 0..64 {
                for j in 0..m {
                    dir[[i, j]] = u[i] * v[j];
                }
            }
            let pert = &z + &dir.mapv(|x| x * alpha);
            let (f_h, _, _) = eval(&pert, &warm, cfg.inner_iters);
            print!(" {:.4}(s{:.0})", f_h - f_base, sig);
            grad.scaled_add((f_h - f_base) / alpha, &dir);
        }
        let step = grad.mapv(|g| eta * g);
        let step_norm = step.iter().map(|x| x * x).sum::<f64>().sqrt();
        let step_max = step.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        // Count rounded-cell flips from the step.
        let mut flips = 0;
        for (zv, sv) in z.iter().zip(step.iter()) {
            let before = zv.round().clamp(0.0, 5.0);
            let after = (zv - sv).clamp(0.0, 5.0).round().clamp(0.0, 5.0);
            if before != after {
                flips += 1;
            }
        }
        println!(" ] |step|={step_norm:.4} max={step_max:.4} flips={flips}");
        z.zip_mut_with(&step, |zv, &sv| *zv = (*zv - sv).clamp(0.0, 5.0));
    }
}

#[test]
#[ignore]
fn export_benchmark_csv() {
    let (data, side) = synth_ml100k_like(0);
    data.write_csv(std::path::Path::new("/tmp/bench.csv")).unwrap();
    poisonrec::dataset::write_ml100k(std::path::Path::new("/tmp/bench-ml100k"), &data, &side)
        .unwrap();
    println!("wrote /tmp/bench.csv and /tmp/bench-ml100k");
}
