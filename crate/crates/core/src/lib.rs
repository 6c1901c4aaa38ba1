// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod completion;
pub mod error;
pub mod init;
pub mod io;
pub mod network;
pub mod report;
pub mod solver;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use network::{evaluate, RankMatrix, SvdInsTnModel, TnStructure};
pub use tensor::{DenseTensor, Matrix};

/// Environment variable capping the worker threads used by parallel kernels.
pub const THREADS_ENV: &str = "SVDINSTN_THREADS";

/// Sizes the global rayon pool from `SVDINSTN_THREADS` when it is set.
/// Results do not depend on the thread count.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    // A pool built earlier in the process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
