//! Uniform-grid time-series log of a run with a fixed, documented CSV
//! schema. Floats are written with 17 significant digits so replays are
//! byte-reproducible.

use std::io::Write;

use crate::rigid_body::VehicleState;
use crate::Vector6;

/// Per-step force breakdown, body frame. The components sum to the total
/// used by the integrator at the step start.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForceBreakdown {
    pub hydrostatic: Vector6,
    pub hydrodynamic: Vector6,
    pub wave: Vector6,
    pub propeller: Vector6,
    pub disturbance: Vector6,
}

impl ForceBreakdown {
    pub fn total(&self) -> Vector6 {
        self.hydrostatic + self.hydrodynamic + self.wave + self.propeller + self.disturbance
    }
}

#[derive(Debug, Clone)]
pub struct Record {
    pub t: f64,
    pub state: VehicleState,
    /// Virtual time (path following) or the trajectory clock.
    pub gamma: f64,
    pub gamma_rate: f64,
    /// Guidance error pair: (x_T, y_T) for PF, e_p components for TT,
    /// (0, 0) for setpoint runs.
    pub err: [f64; 2],
    pub psi_c: f64,
    pub v_c: f64,
    pub z_c: f64,
    pub psi_ad: f64,
    pub z_ad: f64,
    pub sigma: [f64; 4],
    pub deltas: [f64; 5],
    pub delta_v: f64,
    pub delta_h: f64,
    pub n_prop: f64,
    pub forces: ForceBreakdown,
}

#[derive(Debug, Clone)]
pub struct TimeSeriesLog {
    pub records: Vec<Record>,
    pub dt: f64,
}

pub const CSV_COLUMNS: &[&str] = &[
    "t", "x", "y", "z", "phi", "theta", "psi", "u", "v", "w", "p", "q", "r", "gamma",
    "gamma_rate", "err_1", "err_2", "psi_c", "v_c", "z_c", "psi_ad", "z_ad", "sigma_1",
    "sigma_2", "sigma_3", "sigma_4", "delta_1", "delta_2", "delta_3", "delta_4", "delta_5",
    "delta_v", "delta_h", "n_prop", "hs_x", "hs_y", "hs_z", "hs_k", "hs_m", "hs_n", "hd_x",
    "hd_y", "hd_z", "hd_k", "hd_m", "hd_n", "wv_x", "wv_y", "wv_z", "wv_k", "wv_m", "wv_n",
    "pr_x", "pr_y", "pr_z", "pr_k", "pr_m", "pr_n", "di_x", "di_y", "di_z", "di_k", "di_m",
    "di_n", "tot_x", "tot_y", "tot_z", "tot_k", "tot_m", "tot_n",
];

fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

impl TimeSeriesLog {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for r in &self.records {
            let mut fields: Vec<String> = Vec::with_capacity(CSV_COLUMNS.len());
            fields.push(fmt(r.t));
            for i in 0..3 {
                fields.push(fmt(r.state.position[i]));
            }
            for i in 0..3 {
                fields.push(fmt(r.state.attitude[i]));
            }
            for i in 0..6 {
                fields.push(fmt(r.state.velocity[i]));
            }
            fields.push(fmt(r.gamma));
            fields.push(fmt(r.gamma_rate));
            fields.push(fmt(r.err[0]));
            fields.push(fmt(r.err[1]));
            fields.push(fmt(r.psi_c));
            fields.push(fmt(r.v_c));
            fields.push(fmt(r.z_c));
            fields.push(fmt(r.psi_ad));
            fields.push(fmt(r.z_ad));
            for v in r.sigma {
                fields.push(fmt(v));
            }
            for v in r.deltas {
                fields.push(fmt(v));
            }
            fields.push(fmt(r.delta_v));
            fields.push(fmt(r.delta_h));
            fields.push(fmt(r.n_prop));
            let total = r.forces.total();
            for vec in [
                r.forces.hydrostatic,
                r.forces.hydrodynamic,
                r.forces.wave,
                r.forces.propeller,
                r.forces.disturbance,
                total,
            ] {
                for i in 0..6 {
                    fields.push(fmt(vec[i]));
                }
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }
}
