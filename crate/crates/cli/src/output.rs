use std::collections::BTreeMap;
use std::io::Write;

use cohinfo_core::CurvePoint;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything a run produces. Only `timing` varies between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub command: String,
    pub config: Value,
    pub scalars: BTreeMap<String, Value>,
    #[serde(default)]
    pub curve: Vec<CurvePoint>,
    #[serde(default)]
    pub uncertainty: BTreeMap<String, f64>,
    pub version: String,
    pub seed: u64,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

impl Envelope {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("envelope is serializable");
        s.push('\n');
        s
    }
}

/// Writes `param,value[,std]` rows in ascending parameter order, every number
/// with 17 significant digits.
pub fn emit_csv<W: Write>(curve: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    let mut points = curve.to_vec();
    points.sort_by(|a, b| a.param.total_cmp(&b.param));
    let with_std = points.iter().any(|p| p.std.is_some());
    writeln!(out, "{}", if with_std { "param,value,std" } else { "param,value" })?;
    for p in &points {
        write!(out, "{:.16e},{:.16e}", p.param, p.value)?;
        if with_std {
            write!(out, ",{:.16e}", p.std.unwrap_or(f64::NAN))?;
        }
        writeln!(out)?;
    }
    out.flush()
}
