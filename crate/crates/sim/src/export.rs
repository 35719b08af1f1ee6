//! CSV and JSON manifest output.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! results always produce byte-identical files.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::profile::{Cut, Profiles};
use crate::sensing::SensingRecord;
use crate::tradeoff::TradeoffTable;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<PathBuf> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.write_record(&row).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("flushing {}", path.display()))?;
    Ok(path.to_path_buf())
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_sensing(dir: &Path, record: &SensingRecord) -> anyhow::Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let metrics = write_csv(
        &dir.join("sensing_metrics.csv"),
        &[
            "method",
            "snr_db",
            "trials",
            "pd",
            "rmse_m",
            "detected_trials",
            "mean_false_alarms",
            "mean_targets_detected",
            "all_detected",
            "max_targets_detected",
        ],
        record.metrics.iter().map(|m| {
            vec![
                m.method.to_string(),
                m.snr_db.to_string(),
                m.trials.to_string(),
                m.pd.to_string(),
                opt(m.rmse_m),
                m.detected_trials.to_string(),
                m.mean_false_alarms.to_string(),
                m.mean_targets_detected.to_string(),
                m.all_detected.to_string(),
                m.max_targets_detected.to_string(),
            ]
        }),
    )?;
    let targets = write_csv(
        &dir.join("sensing_targets.csv"),
        &["method", "snr_db", "target", "pd"],
        record.metrics.iter().flat_map(|m| {
            m.target_pd
                .iter()
                .enumerate()
                .map(move |(t, pd)| vec![m.method.to_string(), m.snr_db.to_string(), t.to_string(), pd.to_string()])
        }),
    )?;
    Ok(vec![metrics, targets])
}

pub fn write_tradeoff(dir: &Path, table: &TradeoffTable) -> anyhow::Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let curve = write_csv(
        &dir.join("tradeoff.csv"),
        &["lmr_db", "rho", "snr_rad", "rate_nats", "rate_uniform_nats"],
        table.rows.iter().map(|r| {
            vec![
                r.lmr_db.to_string(),
                r.rho.to_string(),
                r.snr_rad.to_string(),
                r.rate.to_string(),
                r.rate_uniform.to_string(),
            ]
        }),
    )?;
    let draws = write_csv(
        &dir.join("tradeoff_draws.csv"),
        &["lmr_db", "draw", "rho", "snr_rad", "rate_nats", "rate_uniform_nats"],
        table.draws.iter().map(|d| {
            vec![
                d.lmr_db.to_string(),
                d.draw.to_string(),
                d.rho.to_string(),
                d.snr_rad.to_string(),
                d.rate.to_string(),
                d.rate_uniform.to_string(),
            ]
        }),
    )?;
    let mut header = vec!["angle_deg".to_string()];
    header.extend(table.rho_grid.iter().map(|r| format!("rho_{r}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let bp = &table.beampatterns;
    let pattern = write_csv(
        &dir.join("beampattern.csv"),
        &header_refs,
        bp.angles_deg.iter().enumerate().map(|(i, a)| {
            let mut row = vec![a.to_string()];
            row.extend(bp.patterns.iter().map(|p| p[i].to_string()));
            row
        }),
    )?;
    Ok(vec![curve, draws, pattern])
}

fn write_cut(path: &Path, axis: &str, cut: &Cut) -> anyhow::Result<PathBuf> {
    write_csv(path, &[axis, "statistic"], cut.iter().map(|(x, v)| vec![x.to_string(), v.to_string()]))
}

pub fn write_profiles(dir: &Path, profiles: &Profiles, dd_channel: &[Vec<f64>]) -> anyhow::Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut files = Vec::new();
    for m in &profiles.methods {
        let label = m.method.label();
        files.push(write_cut(&dir.join(format!("range_profile_{label}.csv")), "range_m", &m.range)?);
        files.push(write_cut(&dir.join(format!("velocity_profile_{label}.csv")), "velocity_mps", &m.velocity)?);
        files.push(write_csv(
            &dir.join(format!("detections_{label}.csv")),
            &["range_m", "velocity_mps", "angle_deg", "statistic", "threshold"],
            m.detections.iter().map(|(p, s, t)| {
                vec![
                    p.range.to_string(),
                    p.velocity.to_string(),
                    p.angle.to_degrees().to_string(),
                    s.to_string(),
                    t.to_string(),
                ]
            }),
        )?);
    }
    files.push(write_cut(&dir.join("angle_spectrum.csv"), "angle_deg", &profiles.angle)?);
    files.push(write_csv(
        &dir.join("dd_channel.csv"),
        &["delay_bin", "doppler_bin", "magnitude"],
        dd_channel
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, v)| vec![i.to_string(), j.to_string(), v.to_string()])),
    )?);
    Ok(files)
}

/// SHA-256 of the canonical TOML form of the effective configuration.
pub fn config_hash(cfg: &ScenarioConfig) -> anyhow::Result<String> {
    let text = cfg.to_toml_string()?;
    Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &ScenarioConfig,
    metrics: serde_json::Value,
    files: &[PathBuf],
) -> anyhow::Result<PathBuf> {
    ensure_dir(dir)?;
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let manifest = json!({
        "command": command,
        "config_sha256": config_hash(cfg)?,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "versions": {
            "otfs-sim": env!("CARGO_PKG_VERSION"),
        },
        "files": names,
        "metrics": metrics,
        "config": cfg,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
