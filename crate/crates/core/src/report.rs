//! Scan records and their CSV / JSON encodings.
//!
//! CSV columns are `N,n,d,p1..p{d+1},quantity,value,error,method`, floats
//! printed with 17 significant digits so that parsing reproduces them bit
//! for bit. Non-finite values are written as `NaN`, `inf` and `-inf` in
//! CSV and as `null` / strings in JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::lattice::ExperimentParams;
use crate::{Error, Result};

/// One row of a scan: a parameter point and one measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    #[serde(rename = "N")]
    pub population: u64,
    #[serde(rename = "n")]
    pub sample: u64,
    pub d: usize,
    pub p: Vec<f64>,
    pub quantity: String,
    #[serde(with = "float_or_tag")]
    pub value: f64,
    #[serde(with = "float_or_tag")]
    pub error: f64,
    pub method: String,
}

impl ScanRecord {
    pub fn new(
        params: &ExperimentParams,
        quantity: impl Into<String>,
        value: f64,
        error: f64,
        method: impl Into<String>,
    ) -> Self {
        Self {
            population: params.population(),
            sample: params.sample(),
            d: params.dim(),
            p: params.probs(),
            quantity: quantity.into(),
            value,
            error,
            method: method.into(),
        }
    }
}

mod float_or_tag {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_float(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => super::parse_float(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// 17 significant digits, or `NaN` / `inf` / `-inf`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_float(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("bad float {s:?}: {e}"))
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// Writes records (all with the same `d`) as CSV.
pub fn write_csv<W: Write>(records: &[ScanRecord], out: W) -> Result<()> {
    let d = records.first().map(|r| r.d).unwrap_or(1);
    if records.iter().any(|r| r.d != d) {
        return Err(Error::InvalidArgument("records mix dimensions".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["N".to_string(), "n".into(), "d".into()];
    header.extend((1..=d + 1).map(|i| format!("p{i}")));
    header.extend(["quantity", "value", "error", "method"].map(String::from));
    w.write_record(&header).map_err(csv_error)?;
    for r in records {
        let mut row = vec![r.population.to_string(), r.sample.to_string(), r.d.to_string()];
        row.extend(r.p.iter().map(|&v| format_float(v)));
        row.push(r.quantity.clone());
        row.push(format_float(r.value));
        row.push(format_float(r.error));
        row.push(r.method.clone());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)?;
    Ok(())
}

/// Parses CSV written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<ScanRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let width = rdr.headers().map_err(csv_error)?.len();
    if width < 8 {
        return Err(csv_error("too few columns"));
    }
    // 3 leading columns, d + 1 weights, 4 trailing columns
    let d = width - 8;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let int = |i: usize| row[i].parse::<u64>().map_err(csv_error);
        let float = |i: usize| parse_float(&row[i]).map_err(csv_error);
        out.push(ScanRecord {
            population: int(0)?,
            sample: int(1)?,
            d: int(2)? as usize,
            p: (0..=d).map(|i| float(3 + i)).collect::<Result<_>>()?,
            quantity: row[4 + d].to_string(),
            value: float(5 + d)?,
            error: float(6 + d)?,
            method: row[7 + d].to_string(),
        });
    }
    Ok(out)
}

pub fn to_json(records: &[ScanRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialise")
}

pub fn from_json(s: &str) -> Result<Vec<ScanRecord>> {
    serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("json: {e}")))
}
