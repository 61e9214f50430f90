//! End-to-end orchestration: phantoms, dataset building, reports.

mod config;
mod dataset;
mod phantom;
mod report;

pub use config::{RunConfig, CONFIG_SCHEMA_VERSION};
pub use dataset::{audit_entry, build_dataset, list_volumes, synthesize_class, DatasetBuild};
pub use phantom::{generate_phantom, PHANTOM_MIN_DIM};
pub use report::{
    aes_report, evaluate_predictions, infer_volume, AesReport, PredictionFile, SliceReport,
    VolumeReport, PREDICTION_SCHEMA_VERSION,
};

use crate::error::{Error, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MOTIONFORGE_THREADS";

/// Thread cap from [`THREADS_ENV`]; 1 when unset.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Argument(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

/// Run `f` inside a rayon pool of `threads` workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}
