//! Reads a run log CSV back into memory for the metrics and plot
//! subcommands.

use std::path::Path;

use subsim_core::rigid_body::VehicleState;
use subsim_core::sim_engine::{ForceBreakdown, Record, TimeSeriesLog, CSV_COLUMNS};
use subsim_core::{Vector3, Vector6};

pub fn read_csv(path: &Path) -> Result<TimeSeriesLog, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| "log file is empty".to_string())?;
    let expected = CSV_COLUMNS.join(",");
    if header != expected {
        return Err(format!(
            "log header does not match the documented schema (got {} columns, expected {})",
            header.split(',').count(),
            CSV_COLUMNS.len()
        ));
    }
    let mut records = Vec::new();
    for (no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", no + 2))?;
        if fields.len() != CSV_COLUMNS.len() {
            return Err(format!(
                "line {}: {} fields, expected {}",
                no + 2,
                fields.len(),
                CSV_COLUMNS.len()
            ));
        }
        let g = |i: usize| fields[i];
        let vec6 = |i: usize| Vector6::from_column_slice(&fields[i..i + 6]);
        records.push(Record {
            t: g(0),
            state: VehicleState::new(
                Vector3::new(g(1), g(2), g(3)),
                Vector3::new(g(4), g(5), g(6)),
                vec6(7),
            ),
            gamma: g(13),
            gamma_rate: g(14),
            err: [g(15), g(16)],
            psi_c: g(17),
            v_c: g(18),
            z_c: g(19),
            psi_ad: g(20),
            z_ad: g(21),
            sigma: [g(22), g(23), g(24), g(25)],
            deltas: [g(26), g(27), g(28), g(29), g(30)],
            delta_v: g(31),
            delta_h: g(32),
            n_prop: g(33),
            forces: ForceBreakdown {
                hydrostatic: vec6(34),
                hydrodynamic: vec6(40),
                wave: vec6(46),
                propeller: vec6(52),
                disturbance: vec6(58),
            },
        });
    }
    if records.is_empty() {
        return Err("log contains a header but no rows".into());
    }
    let dt = if records.len() >= 2 {
        records[1].t - records[0].t
    } else {
        1.0
    };
    Ok(TimeSeriesLog { records, dt })
}
