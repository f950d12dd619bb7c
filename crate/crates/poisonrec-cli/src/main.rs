//! Command-line front end: dataset ingestion, synthetic data, recommender and
//! generator training, fake-profile sampling, single attacks, experiment
//! presets, and distribution metrics.
//!
//! Errors exit non-zero with a one-line JSON object on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use poisonrec::dataset::{self, MovieLensFormat, RatingMatrix, SideInfo};
use poisonrec::distmetrics;
use poisonrec::generator::{self, GanConfig, GeneratorModel};
use poisonrec::harness::{self, AttackConfigFile, ExperimentSpec, Family};
use poisonrec::recommender::{alt_min, FactorModel, TrainSet};

#[derive(Parser)]
#[command(name = "poisonrec", version, about = "Data-poisoning attacks on a low-rank recommender")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataFormat {
    Ml100k,
    Ml1m,
    Csv,
}

#[derive(Args)]
struct DataArgs {
    /// Ratings source: a MovieLens directory or an internal CSV file.
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: DataFormat,
}

impl DataArgs {
    fn load(&self) -> Result<(RatingMatrix, SideInfo)> {
        Ok(match self.format {
            DataFormat::Ml100k => dataset::ingest(MovieLensFormat::Ml100k, &self.ratings)?,
            DataFormat::Ml1m => dataset::ingest(MovieLensFormat::Ml1m, &self.ratings)?,
            DataFormat::Csv => (
                RatingMatrix::read_csv(&self.ratings)?,
                SideInfo::default(),
            ),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a MovieLens directory and write the internal CSV form.
    Ingest {
        #[arg(long, value_enum)]
        format: DataFormat,
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a low-rank-plus-noise synthetic dataset.
    Synth {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        items: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        #[arg(long, default_value_t = 0.3)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the alternating-minimization recommender and write a checkpoint.
    TrainRecommender {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 40)]
        d: usize,
        #[arg(long, default_value_t = 0.001)]
        lambda: f64,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adversarially train the fake-profile generator.
    TrainGenerator {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 100)]
        noise_dim: usize,
        #[arg(long, default_value_t = 256)]
        hidden: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 2e-4)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Record mean TVD/JS against the data every N epochs.
        #[arg(long)]
        metrics_every: Option<usize>,
        /// Where to write the monitor CSV (epoch, losses, distances).
        #[arg(long)]
        monitor_csv: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample fake profiles from a generator checkpoint or the empirical
    /// sampler, and write them as CSV.
    SampleFake {
        #[command(flatten)]
        data: DataArgs,
        /// Generator checkpoint; omit to use the empirical sampler.
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one attack described by a JSON config.
    Attack {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// key.path=value overrides applied to the config.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Seed threaded through every module's seed field.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an experiment family preset.
    Experiment {
        #[arg(long)]
        preset: String,
        /// Dataset override; defaults to the preset's synthetic benchmark.
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: DataFormat,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Distribution metrics between real data and fake-profile CSVs.
    Metrics {
        /// Real ratings (directory or CSV, per --format).
        #[arg(long)]
        real: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: DataFormat,
        /// Fake profiles CSV (`fake_user,item,rating`).
        #[arg(long)]
        fake: PathBuf,
        /// Also print the top-10 Gram eigenvalues of both sides.
        #[arg(long)]
        eigens: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": format!("{e:#}") });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { format, path, out } => {
            let (data, side) = DataArgs {
                ratings: path,
                format,
            }
            .load()?;
            data.write_csv(&out)?;
            println!(
                "{}",
                serde_json::json!({
                    "n_users": data.n_users(),
                    "n_items": data.n_items(),
                    "n_ratings": data.len(),
                    "has_genres": side.item_genres.is_some(),
                    "has_demographics": side.user_age.is_some(),
                    "out": out,
                })
            );
            Ok(())
        }
        Command::Synth {
            users,
            items,
            rank,
            density,
            noise_sd,
            seed,
            out,
        } => {
            let data = dataset::synth(users, items, rank, density, noise_sd, seed)?;
            data.write_csv(&out)?;
            println!(
                "{}",
                serde_json::json!({ "n_users": users, "n_items": items, "n_ratings": data.len(), "out": out })
            );
            Ok(())
        }
        Command::TrainRecommender {
            data,
            d,
            lambda,
            iters,
            seed,
            out,
        } => {
            let (matrix, _) = data.load()?;
            let tuples: Vec<(u32, u32, f64)> = matrix
                .entries()
                .iter()
                .map(|r| (r.user, r.item, r.value as f64))
                .collect();
            let train = TrainSet::new(matrix.n_users(), matrix.n_items(), &tuples)?;
            let model = FactorModel::<f64>::init(matrix.n_users(), matrix.n_items(), d, seed)?
                .with_lambda(lambda);
            let fitted = alt_min(&train, &model, iters)?;
            let objective = poisonrec::recommender::masked_objective(&train, &fitted);
            fitted.write_checkpoint(&out)?;
            println!(
                "{}",
                serde_json::json!({ "objective": objective, "iters": iters, "out": out })
            );
            Ok(())
        }
        Command::TrainGenerator {
            data,
            noise_dim,
            hidden,
            epochs,
            batch,
            lr,
            seed,
            metrics_every,
            monitor_csv,
            out,
        } => {
            let (matrix, _) = data.load()?;
            let config = GanConfig {
                noise_dim,
                hidden,
                epochs,
                batch,
                lr,
                seed,
                metrics_every,
            };
            let model = generator::train_gan::<f64>(&matrix, config)?;
            model.write_checkpoint(&out)?;
            if let Some(path) = monitor_csv {
                let mut csv = String::from("epoch,loss_d,loss_g,mean_tvd,mean_js\n");
                for row in &model.monitor {
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        row.epoch, row.loss_d, row.loss_g, row.mean_tvd, row.mean_js
                    ));
                }
                std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
            let last = model.loss_history.last().copied().unwrap_or((f64::NAN, f64::NAN));
            println!(
                "{}",
                serde_json::json!({ "epochs": model.trained_epochs, "loss_d": last.0, "loss_g": last.1, "out": out })
            );
            Ok(())
        }
        Command::SampleFake {
            data,
            generator: ckpt,
            k,
            seed,
            out,
        } => {
            let (matrix, _) = data.load()?;
            let fake = match ckpt {
                Some(path) => {
                    let model = GeneratorModel::<f64>::read_checkpoint(&path)?;
                    generator::gan_sample(&model, k, seed)?.to_rating_scale()?
                }
                None => generator::empirical_sample::<f64>(&matrix, k, seed)?,
            };
            fake.write_csv(&out)?;
            let (tvd, js) = distmetrics::mean_distance(&matrix, &fake)?;
            println!(
                "{}",
                serde_json::json!({ "k": k, "mean_tvd": tvd, "mean_js": js, "out": out })
            );
            Ok(())
        }
        Command::Attack {
            config,
            out,
            overrides,
            seed,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut value: serde_json::Value = serde_json::from_str(&text)?;
            for assignment in &overrides {
                harness::apply_override(&mut value, assignment)?;
            }
            if let Some(s) = seed {
                thread_seed(&mut value, s);
            }
            let cfg: AttackConfigFile = serde_json::from_value(value)?;
            let report = harness::run_attack_config(&cfg, &out)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Command::Experiment {
            preset,
            ratings,
            format,
            out,
            overrides,
            seed,
        } => {
            let family = Family::parse(&preset)?;
            let mut spec = harness::preset(family);
            if let Some(path) = ratings {
                spec.dataset = match format {
                    DataFormat::Ml100k => poisonrec::dataset::DatasetSource::Ml100k { path },
                    DataFormat::Ml1m => poisonrec::dataset::DatasetSource::Ml1m { path },
                    DataFormat::Csv => poisonrec::dataset::DatasetSource::Csv { path },
                };
            }
            let mut value = serde_json::to_value(&spec)?;
            for assignment in &overrides {
                harness::apply_override(&mut value, assignment)?;
            }
            if let Some(s) = seed {
                thread_seed(&mut value, s);
            }
            let spec: ExperimentSpec = serde_json::from_value(value)?;
            let run = harness::run_experiment(&spec)?;
            let written = harness::report(&run, &out)?;
            println!(
                "{}",
                serde_json::json!({
                    "family": preset,
                    "outcomes": run.summary.outcomes.len(),
                    "success_rate": run.summary.success_rate,
                    "files": written.len(),
                    "out": out,
                })
            );
            Ok(())
        }
        Command::Metrics {
            real,
            format,
            fake,
            eigens,
        } => {
            let (matrix, _) = DataArgs {
                ratings: real,
                format,
            }
            .load()?;
            let fake_profiles =
                poisonrec::FakeProfileMatrix::read_csv(&fake, matrix.n_items())?;
            let (tvd, js) = distmetrics::mean_distance(&matrix, &fake_profiles)?;
            let mut out = serde_json::json!({
                "mean_tvd": tvd,
                "mean_js": js,
                "log_base": "natural",
                "k": fake_profiles.k(),
            });
            if eigens {
                let real_summary = distmetrics::eigensummary_sparse::<f64>(
                    matrix.entries(),
                    matrix.n_users(),
                    matrix.n_items(),
                );
                let fake_summary = distmetrics::eigensummary_sparse::<f64>(
                    &fake_profiles.rounded_entries(),
                    fake_profiles.k(),
                    fake_profiles.n_items(),
                );
                out["real_top_eigenvalues"] = serde_json::json!(real_summary.top);
                out["fake_top_eigenvalues"] = serde_json::json!(fake_summary.top);
                out["max_relative_deviation"] =
                    serde_json::json!(fake_summary.max_relative_deviation(&real_summary));
            }
            println!("{out}");
            Ok(())
        }
    }
}

/// Applies `--seed` to every `seed` key in the config tree.
fn thread_seed(value: &mut serde_json::Value, seed: u64) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if k == "seed" || k.ends_with("_seed") {
                    *v = serde_json::json!(seed);
                } else {
                    thread_seed(v, seed);
                }
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                thread_seed(v, seed);
            }
        }
        _ => {}
    }
}
