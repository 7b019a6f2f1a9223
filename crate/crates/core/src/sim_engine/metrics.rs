//! Summary metrics computed from a run log.

use serde::{Deserialize, Serialize};

use crate::autopilot::wrap_angle;

use super::logging::TimeSeriesLog;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GammaRateStats {
    pub min: f64,
    pub median: f64,
    /// Time of the minimum rate.
    pub argmin_t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TurnStats {
    pub radius_mean: f64,
    /// (max - min) / mean radius over the final full revolution.
    pub radius_drift: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metrics {
    pub duration: f64,
    pub rows: usize,
    /// RMS/max of the guidance error magnitude: |y_T| for path
    /// following, ||e_p|| for trajectory tracking.
    pub cross_track_rms: f64,
    pub cross_track_max: f64,
    pub depth_error_rms: f64,
    pub depth_error_max: f64,
    pub heading_error_rms: f64,
    /// First time after which |z - z_c| stays inside the band.
    pub depth_settling_time: Option<f64>,
    pub depth_settling_band: f64,
    /// Mean depth error over the final 10% of the run (steady offset).
    pub depth_error_final: f64,
    /// Fraction of steps with any plane at the magnitude limit.
    pub actuator_saturation_duty: f64,
    pub gamma_rate: Option<GammaRateStats>,
    /// First time the virtual time reaches the path end (PF) or the
    /// trajectory clock reaches its final time (TT).
    pub completion_time: Option<f64>,
    /// Max of the horizontal position-error norm and when it occurs.
    pub position_error_max: f64,
    pub position_error_argmax_t: f64,
    pub final_turn: Option<TurnStats>,
}

const DEPTH_SETTLING_BAND: f64 = 0.5;

/// Guidance mode the log was produced under; drives which channels are
/// meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogMode {
    Setpoint,
    PathFollowing { domain_end_known: bool },
    TrajectoryTracking,
}

pub fn metrics(log: &TimeSeriesLog, mode: LogMode, delta_max: f64) -> Metrics {
    let n = log.records.len();
    assert!(n > 1, "metrics need a complete log");
    let duration = log.records.last().unwrap().t;

    let mut sum_ct = 0.0;
    let mut max_ct: f64 = 0.0;
    let mut sum_zerr = 0.0;
    let mut max_zerr: f64 = 0.0;
    let mut sum_herr = 0.0;
    let mut saturated = 0usize;
    let mut pos_err_max = 0.0;
    let mut pos_err_argmax = 0.0;
    let mut final_zerr_sum = 0.0;
    let mut final_zerr_count = 0usize;

    for r in &log.records {
        let ct = match mode {
            LogMode::PathFollowing { .. } => r.err[1].abs(),
            LogMode::TrajectoryTracking => (r.err[0] * r.err[0] + r.err[1] * r.err[1]).sqrt(),
            LogMode::Setpoint => 0.0,
        };
        sum_ct += ct * ct;
        max_ct = max_ct.max(ct);

        let zerr = r.state.position.z - r.z_c;
        sum_zerr += zerr * zerr;
        max_zerr = max_zerr.max(zerr.abs());
        if r.t >= 0.9 * duration {
            final_zerr_sum += zerr;
            final_zerr_count += 1;
        }

        let herr = wrap_angle(r.psi_c - r.state.attitude.z);
        sum_herr += herr * herr;

        if r.deltas.iter().any(|d| d.abs() >= delta_max - 1e-9) {
            saturated += 1;
        }

        let pe = (r.err[0] * r.err[0] + r.err[1] * r.err[1]).sqrt();
        if pe > pos_err_max {
            pos_err_max = pe;
            pos_err_argmax = r.t;
        }
    }

    // settling: last excursion outside the band
    let mut settle = Some(log.records[0].t);
    let mut outside_seen = false;
    for r in log.records.iter().rev() {
        let zerr = (r.state.position.z - r.z_c).abs();
        if zerr > DEPTH_SETTLING_BAND {
            outside_seen = true;
            settle = log
                .records
                .iter()
                .find(|r2| r2.t > r.t)
                .map(|r2| r2.t);
            break;
        }
    }
    if !outside_seen {
        settle = Some(log.records[0].t);
    }

    let gamma_rate = match mode {
        LogMode::PathFollowing { .. } => {
            // interior of the active tracking phase only
            let active: Vec<&super::logging::Record> = log
                .records
                .iter()
                .filter(|r| r.gamma_rate != 0.0)
                .collect();
            if active.len() > 4 {
                let mut rates: Vec<f64> = active.iter().map(|r| r.gamma_rate).collect();
                let (mut min, mut argmin_t) = (f64::INFINITY, 0.0);
                for r in &active {
                    if r.gamma_rate < min {
                        min = r.gamma_rate;
                        argmin_t = r.t;
                    }
                }
                rates.sort_by(|a, b| a.total_cmp(b));
                let median = rates[rates.len() / 2];
                Some(GammaRateStats {
                    min,
                    median,
                    argmin_t,
                })
            } else {
                None
            }
        }
        _ => None,
    };

    let completion_time = match mode {
        LogMode::PathFollowing { .. } => {
            // tracking phase ends when gamma stops advancing at the
            // domain end, flagged by a zero rate after motion
            let mut completed = None;
            let mut moving_seen = false;
            for r in &log.records {
                if r.gamma_rate != 0.0 {
                    moving_seen = true;
                } else if moving_seen {
                    completed = Some(r.t);
                    break;
                }
            }
            completed
        }
        LogMode::TrajectoryTracking => Some(duration),
        LogMode::Setpoint => None,
    };

    Metrics {
        duration,
        rows: n,
        cross_track_rms: (sum_ct / n as f64).sqrt(),
        cross_track_max: max_ct,
        depth_error_rms: (sum_zerr / n as f64).sqrt(),
        depth_error_max: max_zerr,
        heading_error_rms: (sum_herr / n as f64).sqrt(),
        depth_settling_time: settle,
        depth_settling_band: DEPTH_SETTLING_BAND,
        depth_error_final: if final_zerr_count > 0 {
            final_zerr_sum / final_zerr_count as f64
        } else {
            0.0
        },
        actuator_saturation_duty: saturated as f64 / n as f64,
        gamma_rate,
        completion_time,
        position_error_max: pos_err_max,
        position_error_argmax_t: pos_err_argmax,
        final_turn: final_turn_stats(log),
    }
}

/// Circle fit over the last full revolution of heading, when the run
/// turned through at least 1.2 revolutions.
fn final_turn_stats(log: &TimeSeriesLog) -> Option<TurnStats> {
    // unwrap the logged yaw
    let mut psi_unwrapped = Vec::with_capacity(log.records.len());
    let mut acc = log.records[0].state.attitude.z;
    psi_unwrapped.push(acc);
    for w in log.records.windows(2) {
        acc += wrap_angle(w[1].state.attitude.z - w[0].state.attitude.z);
        psi_unwrapped.push(acc);
    }
    let total_turn = (psi_unwrapped.last().unwrap() - psi_unwrapped[0]).abs();
    if total_turn < 1.2 * std::f64::consts::TAU {
        return None;
    }
    let psi_end = *psi_unwrapped.last().unwrap();
    let start_idx = psi_unwrapped
        .iter()
        .rposition(|&p| (psi_end - p).abs() >= std::f64::consts::TAU)?;
    let pts: Vec<[f64; 2]> = log.records[start_idx..]
        .iter()
        .map(|r| [r.state.position.x, r.state.position.y])
        .collect();
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let radii: Vec<f64> = pts
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .collect();
    let r_mean = radii.iter().sum::<f64>() / n;
    let r_max = radii.iter().fold(f64::MIN, |a, &b| a.max(b));
    let r_min = radii.iter().fold(f64::MAX, |a, &b| a.min(b));
    Some(TurnStats {
        radius_mean: r_mean,
        radius_drift: (r_max - r_min) / r_mean,
        center: [cx, cy],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigid_body::VehicleState;
    use crate::sim_engine::logging::{ForceBreakdown, Record};
    use crate::{Vector3, Vector6};

    fn record(t: f64, err: [f64; 2], z: f64, z_c: f64) -> Record {
        Record {
            t,
            state: VehicleState::new(Vector3::new(0.0, 0.0, z), Vector3::zeros(), Vector6::zeros()),
            gamma: 0.0,
            gamma_rate: 0.1,
            err,
            psi_c: 0.0,
            v_c: 0.0,
            z_c,
            psi_ad: 0.0,
            z_ad: z_c,
            sigma: [0.0; 4],
            deltas: [0.0; 5],
            delta_v: 0.0,
            delta_h: 0.0,
            n_prop: 1.0,
            forces: ForceBreakdown::default(),
        }
    }

    #[test]
    fn perfect_tracking_metrics_are_zero() {
        let records: Vec<Record> = (0..100)
            .map(|k| record(k as f64 * 0.05, [0.0, 0.0], -15.0, -15.0))
            .collect();
        let log = TimeSeriesLog { records, dt: 0.05 };
        let m = metrics(&log, LogMode::PathFollowing { domain_end_known: true }, 0.52);
        assert_eq!(m.cross_track_rms, 0.0);
        assert_eq!(m.cross_track_max, 0.0);
        assert_eq!(m.depth_error_rms, 0.0);
        assert_eq!(m.heading_error_rms, 0.0);
        assert_eq!(m.actuator_saturation_duty, 0.0);
        assert_eq!(m.depth_settling_time, Some(0.0));
    }

    #[test]
    fn constant_cross_track_gives_equal_rms_and_max() {
        let records: Vec<Record> = (0..200)
            .map(|k| record(k as f64 * 0.05, [0.0, 1.0], -15.0, -15.0))
            .collect();
        let log = TimeSeriesLog { records, dt: 0.05 };
        let m = metrics(&log, LogMode::PathFollowing { domain_end_known: true }, 0.52);
        assert!((m.cross_track_rms - 1.0).abs() < 1e-12);
        assert!((m.cross_track_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn turn_stats_recover_circle() {
        let radius = 300.0;
        let omega = 0.01;
        let records: Vec<Record> = (0..((2.6 * std::f64::consts::TAU / omega / 0.5) as usize))
            .map(|k| {
                let t = k as f64 * 0.5;
                let ang = omega * t;
                let mut r = record(t, [0.0, 0.0], -100.0, -100.0);
                r.state.position.x = 50.0 + radius * ang.cos();
                r.state.position.y = -20.0 + radius * ang.sin();
                r.state.attitude.z = wrap_angle(ang + std::f64::consts::FRAC_PI_2);
                r
            })
            .collect();
        let log = TimeSeriesLog { records, dt: 0.5 };
        let stats = final_turn_stats(&log).expect("enough revolutions");
        assert!((stats.radius_mean - radius).abs() / radius < 1e-3);
        // centroid shifts slightly when the window is not an integer
        // number of samples per revolution
        assert!(stats.radius_drift < 5e-3, "drift {}", stats.radius_drift);
        assert!((stats.center[0] - 50.0).abs() < 0.5);
        assert!((stats.center[1] + 20.0).abs() < 0.5);
    }

    #[test]
    fn settling_time_finds_last_band_exit() {
        let mut records: Vec<Record> = Vec::new();
        for k in 0..600 {
            let t = k as f64 * 0.05;
            // depth error decays from 5 m; crosses 0.5 m at t = ln(10)/0.2
            let z = -15.0 + 5.0 * (-0.2 * t).exp();
            records.push(record(t, [0.0, 0.0], z, -15.0));
        }
        let log = TimeSeriesLog { records, dt: 0.05 };
        let m = metrics(&log, LogMode::Setpoint, 0.52);
        let expect = (10.0f64).ln() / 0.2;
        let settle = m.depth_settling_time.unwrap();
        assert!(
            (settle - expect).abs() < 0.2,
            "settling {settle} vs {expect}"
        );
        assert!(m.depth_error_final.abs() < 0.1);
    }
}
