//! Resource caps for dense arrays and enumerations.
//!
//! The default cap is 2^26 complex values (1 GiB). Setting `KOROSMOL_CAP_MB`
//! overrides it with a memory budget in mebibytes, converted at 16 bytes per
//! value.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

pub const DEFAULT_DENSE_CAP: usize = 1 << 26;
pub const CAP_ENV: &str = "KOROSMOL_CAP_MB";

const BYTES_PER_VALUE: usize = 16;

static OVERRIDE_MB: AtomicUsize = AtomicUsize::new(0);

/// Sets a process-wide budget in mebibytes that takes precedence over the
/// environment; `None` clears it.
pub fn set_override_mb(mb: Option<usize>) {
    OVERRIDE_MB.store(mb.unwrap_or(0), Ordering::Relaxed);
}

/// Maximum number of values in any dense array or enumerated set.
pub fn dense_cap() -> usize {
    let forced = OVERRIDE_MB.load(Ordering::Relaxed);
    if forced > 0 {
        return forced.saturating_mul(1 << 20) / BYTES_PER_VALUE;
    }
    std::env::var(CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map(|mb| mb.saturating_mul(1 << 20) / BYTES_PER_VALUE)
        .unwrap_or(DEFAULT_DENSE_CAP)
}

pub(crate) fn check(count: u128, what: &str) -> Result<usize> {
    let cap = dense_cap();
    if count > cap as u128 {
        return Err(Error::Resource(format!(
            "{what} needs {count} values, cap is {cap}"
        )));
    }
    Ok(count as usize)
}
