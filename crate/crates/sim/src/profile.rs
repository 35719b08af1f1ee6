//! Single-shot range, velocity and angle profiles of one trial.

use otfs_isac::radar::{angle_spectrum, GlrtProcessor};

use crate::association::RvaPoint;
use crate::config::ScenarioConfig;
use crate::sensing::{detect, draw_trial, observe, report_points, Method, SensingSetup};

/// Samples of a 1-D cut: `(axis value, statistic)`.
pub type Cut = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct MethodProfiles {
    pub method: Method,
    /// Statistic against range [m] at the Doppler row nearest the reference target.
    pub range: Cut,
    /// Statistic against velocity [m/s] at the delay column nearest the reference target.
    pub velocity: Cut,
    pub detections: Vec<(RvaPoint, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    pub methods: Vec<MethodProfiles>,
    /// GLRT angle spectrum at the reference cell: `(angle [deg], spectrum)`.
    pub angle: Cut,
}

/// Maps and detections for trial 0 at the configured target SNRs.
pub fn extract_profiles(cfg: &ScenarioConfig) -> anyhow::Result<Profiles> {
    let setup = SensingSetup::new(cfg)?;
    let draw = draw_trial(&setup, cfg.seed, 0)?;
    let obs = observe(&setup, &draw, &setup.amplitudes)?;
    let p = &setup.params;
    let reference = setup.truth.get(setup.reference).copied();
    let mut methods = Vec::new();
    for method in Method::ALL {
        let report = detect(&setup, &obs, &draw.waveform, method)?;
        let grid = &report.map.grid;
        let (row, col) = match reference {
            Some(t) => {
                let tau = p.range_to_delay(t.range);
                let period = grid.tau_axis().len() as f64 * (grid.tau_axis().get(1).copied().unwrap_or(0.0));
                // The FFT grid only spans one standard delay period.
                let tau = if method == Method::Fft && period > 0.0 { tau.rem_euclid(period) } else { tau };
                (grid.nearest_delay(tau), grid.nearest_doppler(p.velocity_to_doppler(t.velocity)))
            }
            None => (0, 0),
        };
        let values = &report.map.values;
        let range = grid
            .tau_axis()
            .iter()
            .enumerate()
            .map(|(i, &tau)| (p.delay_to_range(tau), values[(i, col)]))
            .collect();
        let velocity = grid
            .nu_axis()
            .iter()
            .enumerate()
            .map(|(j, &nu)| (p.doppler_to_velocity(nu), values[(row, j)]))
            .collect();
        let points = report_points(&setup, &report);
        let mut detections = Vec::with_capacity(points.len());
        let mut k = 0;
        for d in &report.detections {
            for _ in &d.angles {
                detections.push((points[k], d.statistic, d.threshold));
                k += 1;
            }
        }
        methods.push(MethodProfiles {
            method,
            range,
            velocity,
            detections,
        });
    }
    let angle = match reference {
        Some(t) => {
            let proc = GlrtProcessor::new(&draw.waveform);
            let tau = setup.grid.tau_axis()[setup.grid.nearest_delay(p.range_to_delay(t.range))];
            let nu = setup.grid.nu_axis()[setup.grid.nearest_doppler(p.velocity_to_doppler(t.velocity))];
            let snap = proc.snapshot(&obs.y, tau, nu)?;
            let spec = angle_spectrum(&snap, &setup.geometry, &setup.theta_axis)?;
            setup.theta_axis.iter().map(|a| a.to_degrees()).zip(spec).collect()
        }
        None => Vec::new(),
    };
    Ok(Profiles { methods, angle })
}
