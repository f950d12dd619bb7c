//! Shared test fixtures.

use std::path::PathBuf;
use std::sync::OnceLock;

use poisonrec::dataset::{ingest, synth_ml100k_like, MovieLensFormat, RatingMatrix, SideInfo};

/// The MovieLens-100K-scale benchmark dataset: the real dataset when present
/// (`POISONREC_ML100K` env var or `<workspace>/data/ml-100k`), otherwise the
/// seeded synthetic stand-in with matching statistics.
pub fn benchmark_data() -> &'static (RatingMatrix, SideInfo) {
    static DATA: OnceLock<(RatingMatrix, SideInfo)> = OnceLock::new();
    DATA.get_or_init(|| {
        if let Ok(dir) = std::env::var("POISONREC_ML100K") {
            let path = PathBuf::from(dir);
            if path.exists() {
                return ingest(MovieLensFormat::Ml100k, &path).expect("ingest POISONREC_ML100K");
            }
        }
        let local = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k");
        if local.exists() {
            return ingest(MovieLensFormat::Ml100k, &local).expect("ingest data/ml-100k");
        }
        synth_ml100k_like(0)
    })
}

pub fn using_real_ml100k() -> bool {
    std::env::var("POISONREC_ML100K")
        .map(|d| PathBuf::from(d).exists())
        .unwrap_or(false)
        || PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../../data/ml-100k")
            .exists()
}
