//! Worker-count plumbing. Results never depend on the worker count; it only
//! sizes the rayon pool the work runs on.

/// Environment variable consulted when no explicit worker count is given.
pub const WORKERS_ENV: &str = "ADDMETA_WORKERS";

/// Run `f` on a dedicated pool of `workers` threads. `0` means the ambient
/// (global or enclosing) pool.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Worker count from [`WORKERS_ENV`], falling back to `default`.
pub fn workers_from_env(default: usize) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(default)
}
