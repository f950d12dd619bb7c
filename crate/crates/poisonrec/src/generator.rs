//! Fake-profile generation matching the real rating distribution: an
//! empirical-marginal sampler baseline and a small fully connected
//! adversarially trained generator/discriminator pair.
//!
//! Profiles live on one of two scales: the recommender's rating scale
//! `[0,5]` (0 meaning unrated) or the symmetric scale `[-1,1]` used during
//! adversarial training, where an unrated cell maps to -1.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Rating, RatingMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

mod net;

pub use net::gradient_check_max_relative_error;
use net::{Activation, Adam, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Values in `[-1, 1]`; unrated encoded as -1.
    Symmetric,
    /// Values in `[0, 5]`; values rounding to 0 are unrated.
    Rating,
}

impl Scale {
    fn name(self) -> &'static str {
        match self {
            Scale::Symmetric => "symmetric",
            Scale::Rating => "rating",
        }
    }

    fn bounds(self) -> (f64, f64) {
        match self {
            Scale::Symmetric => (-1.0, 1.0),
            Scale::Rating => (0.0, 5.0),
        }
    }
}

/// Dense `k x m` matrix of continuous fake ratings under optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct FakeProfileMatrix<S> {
    values: Array2<S>,
    scale: Scale,
}

impl<S: Scalar> FakeProfileMatrix<S> {
    /// Validates that every value lies within the declared scale's range.
    pub fn new(values: Array2<S>, scale: Scale) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidDimension("fake-profile budget k must be >= 1".into()));
        }
        let (lo, hi) = scale.bounds();
        for v in values.iter() {
            let x = v.as_f64();
            if !(lo..=hi).contains(&x) || !x.is_finite() {
                return Err(Error::ValueOutOfRange { value: x, lo, hi });
            }
        }
        Ok(FakeProfileMatrix { values, scale })
    }

    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.values.ncols()
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn values(&self) -> &Array2<S> {
        &self.values
    }

    /// Rounds to the closest integers, clips to `[0,5]`, and returns the
    /// non-zero cells as rating tuples (fake-user indices start at 0).
    /// Rating scale only.
    pub fn rounded_entries(&self) -> Vec<Rating> {
        assert_eq!(self.scale, Scale::Rating, "rounded_entries needs rating scale");
        round_clip_entries(&self.values)
    }

    /// Affine map `[0,5] -> [-1,1]` applied elementwise.
    pub fn to_symmetric_scale(&self) -> Result<Self> {
        if self.scale != Scale::Rating {
            return Err(Error::ScaleMismatch {
                expected: Scale::Rating.name(),
                got: self.scale.name(),
            });
        }
        let values = self
            .values
            .mapv(|v| (v - S::cast(2.5)) / S::cast(2.5));
        FakeProfileMatrix::new(values, Scale::Symmetric)
    }

    /// Inverse affine map `[-1,1] -> [0,5]` applied elementwise.
    pub fn to_rating_scale(&self) -> Result<Self> {
        if self.scale != Scale::Symmetric {
            return Err(Error::ScaleMismatch {
                expected: Scale::Symmetric.name(),
                got: self.scale.name(),
            });
        }
        let values = self.values.mapv(|v| v * S::cast(2.5) + S::cast(2.5));
        FakeProfileMatrix::new(values, Scale::Rating)
    }

    /// Writes the rounded non-zero cells as CSV `fake_user,item,rating`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("fake_user,item,rating\n");
        for r in self.rounded_entries() {
            out.push_str(&format!("{},{},{}\n", r.user, r.item, r.value));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Spreads every value uniformly within its rounding cell (integers
    /// jittered by up to +-0.49, zeros into [0, 0.49)), so the rounded view
    /// and therefore the distribution metrics stay identical while the
    /// matrix becomes continuous. Zeroth-order descent needs continuous
    /// values: an exactly integer matrix sits half a unit from every
    /// rounding boundary and small projected steps never change the
    /// recommender's training set. Rating scale only.
    pub fn dequantized(&self, seed: u64) -> Result<Self> {
        if self.scale != Scale::Rating {
            return Err(Error::ScaleMismatch {
                expected: Scale::Rating.name(),
                got: self.scale.name(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spread = 0.49;
        let values = self.values.mapv(|v| {
            let x = v.as_f64();
            let jittered = if x == 0.0 {
                rng.gen_range(0.0..spread)
            } else {
                (x + rng.gen_range(-spread..spread)).clamp(0.0, 5.0)
            };
            S::cast(jittered)
        });
        FakeProfileMatrix::new(values, Scale::Rating)
    }

    /// Reads the CSV form written by [`FakeProfileMatrix::write_csv`]; the
    /// item count comes from the dataset the profiles target.
    pub fn read_csv(path: &Path, n_items: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fname = path.display().to_string();
        let mut rows: Vec<(usize, usize, f64)> = Vec::new();
        let mut max_user = 0usize;
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (u, j, r) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(Error::parse(&fname, i + 1, "expected fake_user,item,rating")),
            };
            let u: usize = u
                .trim()
                .parse()
                .map_err(|_| Error::parse(&fname, i + 1, format!("bad fake_user {u:?}")))?;
            let j: usize = j
                .trim()
                .parse()
                .map_err(|_| Error::parse(&fname, i + 1, format!("bad item {j:?}")))?;
            let r: f64 = r
                .trim()
                .parse()
                .map_err(|_| Error::parse(&fname, i + 1, format!("bad rating {r:?}")))?;
            if j >= n_items {
                return Err(Error::IndexOutOfRange(format!(
                    "item {j} in fake CSV exceeds n_items {n_items}"
                )));
            }
            max_user = max_user.max(u);
            rows.push((u, j, r));
        }
        if rows.is_empty() {
            return Err(Error::EmptyRatings(fname));
        }
        let mut values = Array2::<S>::zeros((max_user + 1, n_items));
        for (u, j, r) in rows {
            values[[u, j]] = S::cast(r);
        }
        FakeProfileMatrix::new(values, Scale::Rating)
    }
}

/// Round-and-clip used everywhere a continuous Z meets the recommender.
pub(crate) fn round_clip_entries<S: Scalar>(values: &Array2<S>) -> Vec<Rating> {
    let mut out = Vec::new();
    for ((i, j), v) in values.indexed_iter() {
        let r = v.as_f64().round().clamp(0.0, 5.0) as u8;
        if r > 0 {
            out.push(Rating::new(i as u32, j as u32, r));
        }
    }
    out
}

/// Distribution-matching baseline: per fake user draws a profile length from
/// the empirical per-user count distribution, items proportional to item
/// popularity (without replacement), and each item's rating from that item's
/// empirical histogram. Unsampled cells stay 0 (unrated).
pub fn empirical_sample<S: Scalar>(data: &RatingMatrix, k: usize, seed: u64) -> Result<FakeProfileMatrix<S>> {
    if k == 0 {
        return Err(Error::InvalidDimension("k must be >= 1".into()));
    }
    let n = data.n_users();
    let m = data.n_items();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let counts: Vec<usize> = (0..n as u32).map(|u| data.user_ratings(u).len()).collect();
    let popularity: Vec<f64> = (0..m as u32).map(|j| data.item_ratings(j).len() as f64).collect();
    let rated_items: Vec<u32> = (0..m as u32).filter(|&j| popularity[j as usize] > 0.0).collect();
    let histograms: Vec<[usize; 5]> = (0..m as u32).map(|j| data.item_histogram(j)).collect();

    let mut values = Array2::<S>::zeros((k, m));
    for i in 0..k {
        let c = counts[rng.gen_range(0..n)].min(rated_items.len());
        // Weighted sampling without replacement via exponential keys.
        let mut keys: Vec<(f64, u32)> = rated_items
            .iter()
            .map(|&j| {
                let u: f64 = rng.gen::<f64>().max(1e-300);
                (u.ln() / popularity[j as usize], j)
            })
            .collect();
        keys.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in keys.iter().take(c) {
            let hist = &histograms[j as usize];
            let total: usize = hist.iter().sum();
            let mut draw = rng.gen_range(0..total);
            let mut rating = 5u8;
            for (b, &cnt) in hist.iter().enumerate() {
                if draw < cnt {
                    rating = b as u8 + 1;
                    break;
                }
                draw -= cnt;
            }
            values[[i, j as usize]] = S::cast(rating as f64);
        }
    }
    FakeProfileMatrix::new(values, Scale::Rating)
}

/// Adversarial generator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GanConfig {
    pub noise_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    /// When set, every `n` epochs the monitor samples 64 profiles and records
    /// mean TVD/JS against the training data.
    pub metrics_every: Option<usize>,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            noise_dim: 100,
            hidden: 256,
            epochs: 100,
            batch: 64,
            lr: 2e-4,
            seed: 0,
            metrics_every: None,
        }
    }
}

/// One monitor row recorded during adversarial training.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GanMonitorRow {
    pub epoch: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub mean_tvd: f64,
    pub mean_js: f64,
}

/// Fully connected generator/discriminator pair with training state.
#[derive(Debug, Clone)]
pub struct GeneratorModel<S> {
    gen: Mlp<S>,
    disc: Mlp<S>,
    pub config: GanConfig,
    pub n_items: usize,
    /// Per-epoch `(discriminator, generator)` loss means.
    pub loss_history: Vec<(f64, f64)>,
    pub monitor: Vec<GanMonitorRow>,
    pub trained_epochs: usize,
}

impl<S: Scalar> GeneratorModel<S> {
    /// Fresh untrained model with seeded Xavier-uniform weights.
    pub fn new(n_items: usize, config: GanConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let gen = Mlp::new(
            &[config.noise_dim, config.hidden, n_items],
            &[Activation::Relu, Activation::Tanh],
            &mut rng,
        );
        let disc = Mlp::new(
            &[n_items, config.hidden, 1],
            &[Activation::LeakyRelu, Activation::Identity],
            &mut rng,
        );
        GeneratorModel {
            gen,
            disc,
            config,
            n_items,
            loss_history: Vec::new(),
            monitor: Vec::new(),
            trained_epochs: 0,
        }
    }

    /// Generator forward pass on a batch of noise rows; output in `[-1,1]`.
    pub fn generate(&self, noise: &Array2<S>) -> Array2<S> {
        self.gen.forward(noise)
    }

    /// Discriminator probability that each row is real.
    pub fn discriminate(&self, profiles: &Array2<S>) -> Array1<S> {
        let logits = self.disc.forward(profiles);
        logits.column(0).mapv(|z| S::one() / (S::one() + (-z).exp()))
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let ckpt = Checkpoint {
            config: self.config.clone(),
            n_items: self.n_items,
            trained_epochs: self.trained_epochs,
            gen: self.gen.to_raw(),
            disc: self.disc.to_raw(),
        };
        let text = serde_json::to_string(&ckpt)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        Ok(GeneratorModel {
            gen: Mlp::from_raw(&ckpt.gen)?,
            disc: Mlp::from_raw(&ckpt.disc)?,
            config: ckpt.config,
            n_items: ckpt.n_items,
            loss_history: Vec::new(),
            monitor: Vec::new(),
            trained_epochs: ckpt.trained_epochs,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: GanConfig,
    n_items: usize,
    trained_epochs: usize,
    gen: net::RawMlp,
    disc: net::RawMlp,
}

/// Trains the adversarial pair on dense real profiles in symmetric scale
/// (unrated cells at -1) with the standard non-saturating GAN losses and
/// Adam updates. Deterministic given the config seed.
pub fn train_gan<S: Scalar>(data: &RatingMatrix, config: GanConfig) -> Result<GeneratorModel<S>> {
    if data.is_empty() {
        return Err(Error::EmptyRatings("training data".into()));
    }
    if config.batch == 0 || config.batch > data.n_users() {
        return Err(Error::InvalidConfig(format!(
            "batch {} outside [1, {}]",
            config.batch,
            data.n_users()
        )));
    }
    let n = data.n_users();
    let m = data.n_items();

    // Dense symmetric-scale view of the real profiles.
    let mut real = Array2::<S>::from_elem((n, m), S::cast(-1.0));
    for r in data.entries() {
        real[[r.user as usize, r.item as usize]] = S::cast((r.value as f64 - 2.5) / 2.5);
    }

    let mut model = GeneratorModel::<S>::new(m, config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut adam_g = Adam::new(&model.gen, config.lr);
    let mut adam_d = Adam::new(&model.disc, config.lr);

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum_d = 0.0;
        let mut sum_g = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(config.batch) {
            let b = chunk.len();
            let mut real_batch = Array2::<S>::zeros((b, m));
            for (row, &u) in chunk.iter().enumerate() {
                real_batch.row_mut(row).assign(&real.row(u));
            }

            // Discriminator step on real (label 1) and generated (label 0).
            let noise = Array2::from_shape_fn((b, config.noise_dim), |_| {
                S::cast(normal.sample(&mut rng))
            });
            let fake_batch = model.gen.forward(&noise);
            let loss_real = model.disc.bce_step(&real_batch, true, Some(&mut adam_d));
            let loss_fake = model.disc.bce_step(&fake_batch, false, Some(&mut adam_d));
            let loss_d = 0.5 * (loss_real + loss_fake);

            // Generator step: push D towards labelling fresh samples real.
            let noise2 = Array2::from_shape_fn((b, config.noise_dim), |_| {
                S::cast(normal.sample(&mut rng))
            });
            let loss_g = net::generator_step(&mut model.gen, &model.disc, &noise2, &mut adam_g);

            if !loss_d.is_finite() || !loss_g.is_finite() {
                return Err(Error::NonFiniteLoss { step: epoch });
            }
            sum_d += loss_d;
            sum_g += loss_g;
            batches += 1.0;
        }
        if !model.gen.params_finite() || !model.disc.params_finite() {
            return Err(Error::NonFiniteLoss { step: epoch });
        }
        let (ld, lg) = (sum_d / batches, sum_g / batches);
        model.loss_history.push((ld, lg));
        model.trained_epochs = epoch + 1;

        if let Some(every) = config.metrics_every {
            if every > 0 && (epoch % every == 0 || epoch + 1 == config.epochs) {
                let sample = gan_sample(&model, 64, config.seed.wrapping_add(epoch as u64))?;
                let rated = sample.to_rating_scale()?;
                let (tvd, js) = crate::distmetrics::mean_distance(data, &rated)?;
                model.monitor.push(GanMonitorRow {
                    epoch,
                    loss_d: ld,
                    loss_g: lg,
                    mean_tvd: tvd.as_f64(),
                    mean_js: js.as_f64(),
                });
            }
        }
    }
    Ok(model)
}

/// Draws `k` profiles from the generator on fresh seeded noise; output in
/// symmetric scale.
pub fn gan_sample<S: Scalar>(model: &GeneratorModel<S>, k: usize, seed: u64) -> Result<FakeProfileMatrix<S>> {
    if k == 0 {
        return Err(Error::InvalidDimension("k must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Array2::from_shape_fn((k, model.config.noise_dim), |_| {
        S::cast(normal.sample(&mut rng))
    });
    let out = model.generate(&noise);
    FakeProfileMatrix::new(out, Scale::Symmetric)
}

/// Fraction of a held-out real batch plus an equally sized fresh fake batch
/// that the discriminator labels correctly.
pub fn discriminator_accuracy<S: Scalar>(
    model: &GeneratorModel<S>,
    data: &RatingMatrix,
    batch: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n_users();
    let m = data.n_items();
    let b = batch.min(n);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let mut real_batch = Array2::<S>::from_elem((b, m), S::cast(-1.0));
    for (row, &u) in rows.iter().take(b).enumerate() {
        for r in data.user_ratings(u as u32) {
            real_batch[[row, r.item as usize]] = S::cast((r.value as f64 - 2.5) / 2.5);
        }
    }
    let fake = gan_sample(model, b, seed.wrapping_add(17))?;
    let p_real = model.discriminate(&real_batch);
    let p_fake = model.discriminate(fake.values());
    let correct = p_real.iter().filter(|p| p.as_f64() > 0.5).count()
        + p_fake.iter().filter(|p| p.as_f64() <= 0.5).count();
    Ok(correct as f64 / (2 * b) as f64)
}

/// Convenience: dense symmetric-scale profile built from one real user row,
/// matching the encoding used in adversarial training.
pub fn real_profile_symmetric<S: Scalar>(data: &RatingMatrix, user: u32) -> Array1<S> {
    let mut row = Array1::<S>::from_elem(data.n_items(), S::cast(-1.0));
    for r in data.user_ratings(user) {
        row[r.item as usize] = S::cast((r.value as f64 - 2.5) / 2.5);
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth;
    use approx::assert_abs_diff_eq;

    fn point_mass_data() -> RatingMatrix {
        // Every user rated exactly item 0 with rating 5.
        let entries: Vec<Rating> = (0..6).map(|u| Rating::new(u, 0, 5)).collect();
        RatingMatrix::new(
            6,
            3,
            entries,
            (1..=6).map(|i| i.to_string()).collect(),
            (1..=3).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn empirical_sampler_point_mass() {
        let data = point_mass_data();
        let fake = empirical_sample::<f64>(&data, 5, 3).unwrap();
        for i in 0..5 {
            assert_eq!(fake.values()[[i, 0]], 5.0);
            assert_eq!(fake.values()[[i, 1]], 0.0);
            assert_eq!(fake.values()[[i, 2]], 0.0);
        }
    }

    #[test]
    fn empirical_sampler_deterministic() {
        let data = synth(30, 20, 2, 0.4, 0.3, 5).unwrap();
        let a = empirical_sample::<f64>(&data, 8, 11).unwrap();
        let b = empirical_sample::<f64>(&data, 8, 11).unwrap();
        assert_eq!(a.values(), b.values());
        let c = empirical_sample::<f64>(&data, 8, 12).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn empirical_sampler_close_marginals() {
        let data = synth(200, 40, 3, 0.3, 0.4, 7).unwrap();
        let fake = empirical_sample::<f64>(&data, 200, 13).unwrap();
        let (tvd, js) = crate::distmetrics::mean_distance(&data, &fake).unwrap();
        assert!(tvd < 0.1, "mean tvd {tvd}");
        assert!(js < 0.05, "mean js {js}");
    }

    #[test]
    fn scale_conversions_round_trip() {
        let values = ndarray::arr2(&[[-1.0, 0.0, 1.0, 0.5]]);
        let z = FakeProfileMatrix::new(values, Scale::Symmetric).unwrap();
        let rated = z.to_rating_scale().unwrap();
        assert_eq!(rated.values().row(0).to_vec(), vec![0.0, 2.5, 5.0, 3.75]);
        let back = rated.to_symmetric_scale().unwrap();
        for (a, b) in back.values().iter().zip(z.values().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(z.to_symmetric_scale().is_err());
        assert!(rated.to_rating_scale().is_err());
    }

    #[test]
    fn profile_matrix_validates_range() {
        let bad = FakeProfileMatrix::new(ndarray::arr2(&[[1.5]]), Scale::Symmetric);
        assert!(bad.is_err());
        let bad = FakeProfileMatrix::new(ndarray::arr2(&[[5.5]]), Scale::Rating);
        assert!(bad.is_err());
    }

    #[test]
    fn rounding_rule() {
        let z = FakeProfileMatrix::new(ndarray::arr2(&[[4.4, 0.3, 0.5, 4.6]]), Scale::Rating).unwrap();
        let entries = z.rounded_entries();
        assert_eq!(entries, vec![Rating::new(0, 0, 4), Rating::new(0, 2, 1), Rating::new(0, 3, 5)]);
    }

    #[test]
    fn dequantized_preserves_rounded_view() {
        let data = synth(50, 25, 2, 0.4, 0.3, 9).unwrap();
        let fake = empirical_sample::<f64>(&data, 20, 4).unwrap();
        let smooth = fake.dequantized(7).unwrap();
        assert_eq!(fake.rounded_entries(), smooth.rounded_entries());
        assert_ne!(fake.values(), smooth.values());
        let (t1, j1) = crate::distmetrics::mean_distance(&data, &fake).unwrap();
        let (t2, j2) = crate::distmetrics::mean_distance(&data, &smooth).unwrap();
        assert_eq!(t1.to_bits(), t2.to_bits());
        assert_eq!(j1.to_bits(), j2.to_bits());
        // Deterministic.
        let again = fake.dequantized(7).unwrap();
        assert_eq!(smooth.values(), again.values());
        // Symmetric-scale input is rejected.
        assert!(gan_like_symmetric().dequantized(0).is_err());
    }

    fn gan_like_symmetric() -> FakeProfileMatrix<f64> {
        FakeProfileMatrix::new(ndarray::arr2(&[[0.0, -0.5]]), Scale::Symmetric).unwrap()
    }

    #[test]
    fn untrained_sampler_is_squashed_noise() {
        let data = synth(20, 12, 2, 0.5, 0.3, 3).unwrap();
        let model = train_gan::<f64>(&data, GanConfig { epochs: 0, batch: 8, hidden: 16, noise_dim: 6, ..GanConfig::default() }).unwrap();
        let z = gan_sample(&model, 64, 1).unwrap();
        assert_eq!(z.k(), 64);
        assert_eq!(z.n_items(), 12);
        assert!(z.values().iter().all(|v| (-1.0..=1.0).contains(v)));
        let z2 = gan_sample(&model, 64, 1).unwrap();
        assert_eq!(z.values(), z2.values());
        let z3 = gan_sample(&model, 64, 2).unwrap();
        assert_ne!(z.values(), z3.values());
    }

    #[test]
    fn gan_learns_constant_profiles() {
        // 40 identical users rating items {0: 5, 1: 1}; everything else unrated.
        let mut entries = Vec::new();
        for u in 0..40u32 {
            entries.push(Rating::new(u, 0, 5));
            entries.push(Rating::new(u, 1, 1));
        }
        let data = RatingMatrix::new(
            40,
            8,
            entries,
            (1..=40).map(|i| i.to_string()).collect(),
            (1..=8).map(|i| i.to_string()).collect(),
        )
        .unwrap();
        let config = GanConfig {
            noise_dim: 8,
            hidden: 32,
            epochs: 200,
            batch: 16,
            lr: 2e-3,
            seed: 4,
            metrics_every: None,
        };
        let model = train_gan::<f64>(&data, config).unwrap();
        let fake = gan_sample(&model, 64, 9).unwrap().to_rating_scale().unwrap();
        let (_, js) = crate::distmetrics::mean_distance(&data, &fake).unwrap();
        assert!(js <= 0.1, "mean js {js}");

        let acc = discriminator_accuracy(&model, &data, 32, 5).unwrap();
        assert!((0.3..=0.7).contains(&acc), "discriminator accuracy {acc}");
    }

    #[test]
    fn non_finite_learning_rate_aborts() {
        let data = synth(20, 10, 2, 0.5, 0.3, 1).unwrap();
        let config = GanConfig {
            noise_dim: 4,
            hidden: 8,
            epochs: 3,
            batch: 8,
            lr: f64::NAN,
            ..GanConfig::default()
        };
        match train_gan::<f64>(&data, config) {
            Err(Error::NonFiniteLoss { .. }) => {}
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn gan_checkpoint_round_trip() {
        let data = synth(16, 6, 2, 0.6, 0.2, 2).unwrap();
        let model = train_gan::<f64>(
            &data,
            GanConfig { noise_dim: 4, hidden: 8, epochs: 2, batch: 8, ..GanConfig::default() },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.json");
        model.write_checkpoint(&path).unwrap();
        let back = GeneratorModel::<f64>::read_checkpoint(&path).unwrap();
        let a = gan_sample(&model, 5, 7).unwrap();
        let b = gan_sample(&back, 5, 7).unwrap();
        assert_eq!(a.values(), b.values());
    }
}
