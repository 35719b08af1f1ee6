//! Command-line front end: argument parsing and subcommand execution.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::checks::run_checks_with;
use crate::export::{write_manifest, write_profiles, write_sensing, write_tradeoff};
use crate::profile::extract_profiles;
use crate::sensing::run_sensing_experiment;
use crate::tradeoff::{dd_channel_magnitude, run_tradeoff_experiment};
use crate::{with_threads, ScenarioConfig};

/// Command-line interface of `otfs-sim`.
#[derive(Parser)]
#[command(name = "otfs-sim", version, about = "MIMO-OTFS ISAC sensing and trade-off experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Monte Carlo detection and localization sweep (GLRT chain vs 2-D FFT).
    Sense(RunArgs),
    /// ISAC trade-off sweep over the weight and the LOS-to-multipath ratio.
    Design(RunArgs),
    /// Single-shot range/velocity/angle profiles and the DD comm channel.
    Profile(RunArgs),
    /// Run the oracle and invariant checks.
    Validate {
        /// Also run the long Monte Carlo checks.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Print the default scenario configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
pub struct RunArgs {
    /// Scenario file (TOML); defaults are used for anything not set.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Execute one parsed command, writing results under its output directory.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sense(args) => {
            let cfg = args.config()?;
            let record = with_threads(args.threads, || run_sensing_experiment(&cfg))??;
            let files = write_sensing(&args.out_dir, &record)?;
            for m in &record.metrics {
                println!(
                    "{:>5} snr {:>7.2} dB  pd {:.3}  rmse {}  all-detected {:.3}",
                    m.method,
                    m.snr_db,
                    m.pd,
                    m.rmse_m.map(|r| format!("{r:.3} m")).unwrap_or_else(|| "-".into()),
                    m.all_detected
                );
            }
            let manifest = write_manifest(&args.out_dir, "sense", &cfg, serde_json::to_value(&record)?, &files)?;
            println!("wrote {}", manifest.display());
        }
        Command::Design(args) => {
            let cfg = args.config()?;
            let table = with_threads(args.threads, || run_tradeoff_experiment(&cfg))??;
            let files = write_tradeoff(&args.out_dir, &table)?;
            for r in &table.rows {
                println!(
                    "LMR {:>6.1} dB  rho {:.2}  SNR_rad {:>8.2} dB  rate {:>9.3} nats",
                    r.lmr_db,
                    r.rho,
                    10.0 * r.snr_rad.log10(),
                    r.rate
                );
            }
            let metrics = serde_json::to_value(&table.rows)?;
            let manifest = write_manifest(&args.out_dir, "design", &cfg, metrics, &files)?;
            println!("wrote {}", manifest.display());
        }
        Command::Profile(args) => {
            let cfg = args.config()?;
            let profiles = with_threads(args.threads, || extract_profiles(&cfg))??;
            let lmr = cfg.design.lmr_db.iter().copied().min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
            let dd = dd_channel_magnitude(&cfg, lmr).context("DD channel")?;
            let files = write_profiles(&args.out_dir, &profiles, &dd)?;
            let counts: Vec<_> = profiles
                .methods
                .iter()
                .map(|m| json!({ "method": m.method.label(), "detections": m.detections.len() }))
                .collect();
            let manifest = write_manifest(&args.out_dir, "profile", &cfg, json!(counts), &files)?;
            println!("wrote {}", manifest.display());
        }
        Command::Validate { full, threads } => {
            let results = with_threads(threads, || run_checks_with(full, |r| println!("{r}")))?;
            let failed = results.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                anyhow::bail!("{failed} check(s) failed");
            }
        }
        Command::DefaultConfig => print!("{}", ScenarioConfig::default().to_toml_string()?),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;

    fn run_args(args: &[&str]) -> anyhow::Result<()> {
        let mut argv = vec!["otfs-sim"];
        argv.extend_from_slice(args);
        run(Cli::try_parse_from(argv)?)
    }

    fn write_config(dir: &Path) -> String {
        let path = dir.join("small.toml");
        std::fs::write(
            &path,
            "trials = 2\n[radar]\nsnr_sweep_db = [0.0]\n[design]\ndraws = 2\nrho_grid = [0.0, 0.5, 1.0]\nlmr_db = [0.0, 10.0]\n",
        )
        .unwrap();
        path.display().to_string()
    }

    fn header(path: &Path) -> String {
        std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
    }

    fn rows(path: &Path) -> usize {
        std::fs::read_to_string(path).unwrap().lines().count() - 1
    }

    #[test]
    fn arguments_parse() {
        let cli = Cli::try_parse_from(["otfs-sim", "sense", "--seed", "3", "--threads", "2"]).unwrap();
        match cli.command {
            Command::Sense(a) => {
                assert_eq!(a.seed, Some(3));
                assert_eq!(a.threads, 2);
                assert_eq!(a.out_dir, PathBuf::from("out"));
            }
            _ => panic!("wrong subcommand"),
        }
        assert!(Cli::try_parse_from(["otfs-sim", "sense", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["otfs-sim", "validate", "--full"]).is_ok());
    }

    #[test]
    fn sense_writes_metrics_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path());
        let out = dir.path().join("sense");
        run_args(&["sense", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--seed", "5"]).unwrap();
        let metrics = out.join("sensing_metrics.csv");
        assert_eq!(
            header(&metrics),
            "method,snr_db,trials,pd,rmse_m,detected_trials,mean_false_alarms,mean_targets_detected,all_detected,max_targets_detected"
        );
        assert_eq!(rows(&metrics), 2);
        assert_eq!(rows(&out.join("sensing_targets.csv")), 2 * 5);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], "sense");
        assert_eq!(manifest["seed"], 5);
        assert_eq!(manifest["trials"], 2);
        assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn design_writes_curves_and_beampatterns() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path());
        let out = dir.path().join("design");
        run_args(&["design", "--config", &cfg, "--out-dir", out.to_str().unwrap()]).unwrap();
        assert_eq!(header(&out.join("tradeoff.csv")), "lmr_db,rho,snr_rad,rate_nats,rate_uniform_nats");
        assert_eq!(rows(&out.join("tradeoff.csv")), 2 * 3);
        assert_eq!(rows(&out.join("tradeoff_draws.csv")), 2 * 2 * 3);
        assert_eq!(header(&out.join("beampattern.csv")), "angle_deg,rho_0,rho_0.5,rho_1");
    }

    #[test]
    fn profile_writes_cuts_for_both_methods() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path());
        let out = dir.path().join("profile");
        run_args(&["profile", "--config", &cfg, "--out-dir", out.to_str().unwrap()]).unwrap();
        for name in [
            "range_profile_glrt.csv",
            "range_profile_fft.csv",
            "velocity_profile_glrt.csv",
            "velocity_profile_fft.csv",
            "detections_glrt.csv",
            "detections_fft.csv",
            "angle_spectrum.csv",
            "dd_channel.csv",
        ] {
            assert!(out.join(name).exists(), "{name} missing");
        }
        assert_eq!(rows(&out.join("dd_channel.csv")), 32 * 16);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        let out = dir.path().to_str().unwrap();
        std::fs::write(&path, "trials = 1\nbogus = 3\n").unwrap();
        assert!(run_args(&["sense", "--config", path.to_str().unwrap(), "--out-dir", out]).is_err());
        std::fs::write(&path, "[detector]\np_fa = 2.0\n").unwrap();
        assert!(run_args(&["sense", "--config", path.to_str().unwrap(), "--out-dir", out]).is_err());
    }

    #[test]
    fn repeated_runs_are_byte_identical_across_thread_counts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path());
        let mut outputs = Vec::new();
        for threads in ["1", "3"] {
            let out = dir.path().join(format!("run{threads}"));
            run_args(&["sense", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--threads", threads]).unwrap();
            outputs.push(std::fs::read(out.join("sensing_metrics.csv")).unwrap());
        }
        assert_eq!(outputs[0], outputs[1]);
    }
}
