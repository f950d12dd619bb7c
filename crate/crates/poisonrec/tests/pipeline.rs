//! Cross-module integration tests at benchmark scale.

mod common;

use common::benchmark_data;
use poisonrec::dataset::{split, Rating, RatingMatrix, SplitMode};
use poisonrec::distmetrics::{marginals, mean_distance, tvd};
use poisonrec::generator::{empirical_sample, FakeProfileMatrix, Scale};

#[test]
fn empirical_sampler_matches_benchmark_marginals() {
    let (data, _) = benchmark_data();
    let fake = empirical_sample::<f64>(data, 64, 11).unwrap();
    let (mean_tvd, mean_js) = mean_distance(data, &fake).unwrap();
    assert!(mean_js <= 0.05, "mean JS {mean_js}");
    assert!(mean_tvd <= 0.1, "mean TVD {mean_tvd}");
}

#[test]
fn empirical_sampler_preserves_marginals_in_expectation() {
    // Average per-item histogram over 10 seeds deviates from the real
    // histogram by at most 0.02 TVD on the 100 most-rated items.
    let (data, _) = benchmark_data();
    let n_items = data.n_items();
    let real = marginals::<f64>(data.entries(), data.n_users(), n_items);

    let seeds = 10;
    let k = 256usize;
    let mut acc = vec![[0.0f64; 6]; n_items];
    for seed in 0..seeds {
        let fake = empirical_sample::<f64>(data, k, 100 + seed).unwrap();
        let fm = marginals::<f64>(&fake.rounded_entries(), k, n_items);
        for (a, m) in acc.iter_mut().zip(fm.iter()) {
            for b in 0..6 {
                a[b] += m.probs[b] / seeds as f64;
            }
        }
    }

    let mut popular: Vec<u32> = (0..n_items as u32).collect();
    popular.sort_by_key(|&j| std::cmp::Reverse(data.item_ratings(j).len()));
    for &j in popular.iter().take(100) {
        let avg = poisonrec::distmetrics::ItemMarginal {
            probs: acc[j as usize],
        };
        let d = tvd(&real[j as usize], &avg);
        assert!(d <= 0.02, "item {j}: averaged marginal TVD {d}");
    }
}

#[test]
fn all_fives_profiles_are_far_from_real() {
    let (data, _) = benchmark_data();
    let fake = FakeProfileMatrix::new(
        ndarray::Array2::from_elem((64, data.n_items()), 5.0),
        Scale::Rating,
    )
    .unwrap();
    let (mean_tvd, _) = mean_distance(data, &fake).unwrap();
    assert!(mean_tvd > 0.5, "mean TVD {mean_tvd}");
}

#[test]
fn point_mass_marginals_match_exactly() {
    // Degenerate data: sampler output marginals equal the real marginals.
    let entries: Vec<Rating> = (0..9).map(|u| Rating::new(u, 0, 5)).collect();
    let data = RatingMatrix::new(
        9,
        4,
        entries,
        (1..=9).map(|i| i.to_string()).collect(),
        (1..=4).map(|i| i.to_string()).collect(),
    )
    .unwrap();
    let fake = empirical_sample::<f64>(&data, 9, 5).unwrap();
    let real_m = marginals::<f64>(data.entries(), 9, 4);
    let fake_m = marginals::<f64>(&fake.rounded_entries(), 9, 4);
    assert_eq!(real_m, fake_m);
}

#[test]
fn e2b_split_statistics_at_scale() {
    let (data, _) = benchmark_data();
    let s = split(data, SplitMode::E2b, 3);
    let total = s.train.len() + s.target.len() + s.test.len();
    assert_eq!(total, data.len());
    let frac = s.train.len() as f64 / total as f64;
    assert!((0.75..=0.85).contains(&frac), "train fraction {frac}");
}
