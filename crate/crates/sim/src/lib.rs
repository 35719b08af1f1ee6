//! Scenario configuration, Monte Carlo experiments and result export for
//! MIMO-OTFS ISAC sensing and trade-off studies.

pub mod association;
pub mod checks;
pub mod cli;
pub mod config;
pub mod export;
pub mod profile;
pub mod sensing;
pub mod tradeoff;

pub use config::ScenarioConfig;

/// Run `f` on a dedicated rayon pool with `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}
