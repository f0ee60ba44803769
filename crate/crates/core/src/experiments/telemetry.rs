//! Per-step telemetry rows and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist::write_atomic;

pub const TELEMETRY_HEADER: [&str; 13] = [
    "t",
    "pos_err",
    "att_err",
    "joint_err",
    "ee_pos_err",
    "ee_att_err",
    "s_norm",
    "ds_norm",
    "u_pre_norm",
    "u_act_norm",
    "tau_norm",
    "kdelta_trace",
    "axis_dist",
];

/// One logged step. Angles in rad; `axis_dist` is NaN where the instantaneous
/// rotation axis is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t: f64,
    #[serde(rename = "pos_err")]
    pub position_error_norm: f64,
    #[serde(rename = "att_err")]
    pub attitude_error_norm: f64,
    #[serde(rename = "joint_err")]
    pub joint_error_norm: f64,
    #[serde(rename = "ee_pos_err")]
    pub ee_position_error_norm: f64,
    #[serde(rename = "ee_att_err")]
    pub ee_attitude_error_norm: f64,
    pub s_norm: f64,
    #[serde(rename = "ds_norm")]
    pub delta_s_norm: f64,
    #[serde(rename = "u_pre_norm")]
    pub u_pre_sat_norm: f64,
    pub u_act_norm: f64,
    #[serde(rename = "tau_norm")]
    pub torque_norm: f64,
    #[serde(rename = "kdelta_trace")]
    pub k_delta_trace: f64,
    #[serde(rename = "axis_dist")]
    pub axis_distance: f64,
}

pub fn telemetry_to_csv(telemetry: &[TelemetryRecord]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(TELEMETRY_HEADER)?;
    for r in telemetry {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

/// Writes every record, header first; an empty slice gives a header-only file.
pub fn write_telemetry(telemetry: &[TelemetryRecord], path: &Path) -> Result<()> {
    write_atomic(path, &telemetry_to_csv(telemetry)?)
}

/// Writes every `stride`-th record plus the last one.
pub fn write_telemetry_strided(telemetry: &[TelemetryRecord], stride: usize, path: &Path) -> Result<()> {
    if stride <= 1 {
        return write_telemetry(telemetry, path);
    }
    let last = telemetry.len().saturating_sub(1);
    let rows: Vec<_> = telemetry
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == last)
        .map(|(_, r)| *r)
        .collect();
    write_telemetry(&rows, path)
}

pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header = r.headers()?;
    if header.iter().ne(TELEMETRY_HEADER.iter().copied()) {
        return Err(Error::invalid(path.display().to_string(), "unexpected telemetry header"));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
