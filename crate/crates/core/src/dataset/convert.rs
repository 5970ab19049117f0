//! Re-encodes delimited exports of UWB measurement archives into the
//! canonical record layout.
//!
//! Column names are matched against common aliases. CIR columns are any
//! header of the form `cir<N>`, `cir_<N>` or `CIR<N>`. When the source CIR
//! is longer than the canonical window it is aligned on the first path:
//! the reported first-path index if a column provides it, otherwise the
//! first sample reaching [`LEADING_EDGE_RATIO`] of the peak amplitude.
//! The window then starts [`FIRST_PATH_LEAD`] samples before that index.

use std::io::Read;

use super::{CirSample, Environment, CIR_WINDOW};
use crate::error::{Error, Result};

/// Samples kept ahead of the detected first path.
pub const FIRST_PATH_LEAD: usize = 8;

/// Leading-edge threshold relative to the peak amplitude.
pub const LEADING_EDGE_RATIO: f64 = 0.25;

const TRUE_RANGE: &[&str] = &[
    "true_range_m",
    "true_range",
    "d_true",
    "ground_truth",
    "gt_range",
    "distance",
];
const MEASURED_RANGE: &[&str] = &[
    "measured_range_m",
    "measured_range",
    "d_meas",
    "uwb_range",
    "range",
    "measured",
];
const LOS: &[&str] = &["los", "is_los", "los_flag"];
const NLOS: &[&str] = &["nlos", "is_nlos", "nlos_flag"];
const ENVIRONMENT: &[&str] = &["environment", "env", "room", "scenario"];
const MATERIAL: &[&str] = &["material", "obstacle", "obstacle_material"];
const FIRST_PATH: &[&str] = &["fp_index", "fp_idx", "first_path", "first_path_index"];

#[derive(Debug, Clone, Copy)]
pub struct ConvertOptions {
    pub delimiter: u8,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions { delimiter: b',' }
    }
}

fn find(headers: &[String], aliases: &[&str]) -> Option<usize> {
    aliases.iter().find_map(|a| headers.iter().position(|h| h == a))
}

fn cir_index(header: &str) -> Option<usize> {
    let rest = header.strip_prefix("cir")?;
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    rest.parse().ok()
}

/// Extracts a `CIR_WINDOW`-long window starting `FIRST_PATH_LEAD` samples
/// before the first path. Out-of-range positions are zero-filled.
pub fn align_window(cir: &[f64], first_path: Option<usize>) -> Vec<f64> {
    if cir.len() == CIR_WINDOW && first_path.is_none() {
        return cir.to_vec();
    }
    let fp = first_path.unwrap_or_else(|| {
        let peak = cir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        cir.iter()
            .position(|v| v.abs() >= LEADING_EDGE_RATIO * peak)
            .unwrap_or(0)
    });
    let start = fp as isize - FIRST_PATH_LEAD as isize;
    (0..CIR_WINDOW as isize)
        .map(|i| {
            let j = start + i;
            if j >= 0 && (j as usize) < cir.len() {
                cir[j as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Rows that failed conversion, as `(line, reason)`.
pub type Rejections = Vec<(u64, String)>;

/// Reads an arbitrary export and returns validated canonical samples plus
/// `(line, reason)` for every row that could not be converted.
pub fn convert_records<R: Read>(reader: R, options: ConvertOptions) -> Result<(Vec<CirSample>, Rejections)> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let need = |aliases: &[&str], what: &str| {
        find(&headers, aliases).ok_or_else(|| Error::Dataset(format!("no {what} column (tried {aliases:?})")))
    };
    let true_col = need(TRUE_RANGE, "true range")?;
    let meas_col = need(MEASURED_RANGE, "measured range")?;
    let env_col = need(ENVIRONMENT, "environment")?;
    let los_col = find(&headers, LOS);
    let nlos_col = find(&headers, NLOS);
    if los_col.is_none() && nlos_col.is_none() {
        return Err(Error::Dataset("no LOS/NLOS flag column".into()));
    }
    let mat_col = find(&headers, MATERIAL);
    let fp_col = find(&headers, FIRST_PATH);
    let mut cir_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(c, h)| cir_index(h).map(|n| (n, c)))
        .collect();
    cir_cols.sort_unstable();
    if cir_cols.is_empty() {
        return Err(Error::Dataset("no CIR columns".into()));
    }

    let mut samples = Vec::new();
    let mut rejected = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row = || -> Result<CirSample> {
            let num = |c: usize| -> Result<f64> {
                record
                    .get(c)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Dataset(format!("column {} is not a number", headers[c])))
            };
            let flag = |c: usize| -> Result<bool> {
                match record.get(c).map(|s| s.trim().to_ascii_lowercase()) {
                    Some(s) if s == "1" || s == "true" || s == "1.0" => Ok(true),
                    Some(s) if s == "0" || s == "false" || s == "0.0" => Ok(false),
                    other => Err(Error::Dataset(format!("invalid flag {other:?}"))),
                }
            };
            let los = match (los_col, nlos_col) {
                (Some(c), _) => flag(c)?,
                (None, Some(c)) => !flag(c)?,
                (None, None) => unreachable!(),
            };
            let cir = cir_cols
                .iter()
                .map(|&(_, c)| num(c))
                .collect::<Result<Vec<_>>>()?;
            let fp = fp_col.map(num).transpose()?.map(|v| v.max(0.0).round() as usize);
            let environment: Environment = record.get(env_col).unwrap_or("").parse()?;
            let material = mat_col
                .and_then(|c| record.get(c))
                .map(str::trim)
                .filter(|m| !m.is_empty())
                .unwrap_or(if los { "none" } else { "unknown" });
            CirSample::new(
                align_window(&cir, fp),
                num(meas_col)?,
                num(true_col)?,
                environment,
                material,
                los,
            )
        };
        match row() {
            Ok(s) => samples.push(s),
            Err(e) => rejected.push((line, e.to_string())),
        }
    }
    Ok((samples, rejected))
}
