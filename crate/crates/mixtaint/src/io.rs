//! File formats: JSONL chain files, calibration documents and JSON blobs for
//! scenarios, results and ground truth.
//!
//! Chain files hold one transaction per line; loading is streaming and
//! reports the offending line on parse failures. Saving and re-loading any
//! valid chain reproduces it bit-exactly. Calibration files map a service
//! name to its criterion settings, with Disabled cells spelled `"N"`; the
//! emitter produces a canonical rendering (sorted services, fixed key order)
//! suitable for golden files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::chain::Transaction;
use crate::eval::SampleCase;
use crate::filter::{FeeRule, FilterCalibration, ShapePattern};

#[derive(Debug, Error)]
pub enum IoError {
    /// Malformed content; `line` is 1-based, 0 when the whole document is at
    /// fault.
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CalibrationError {
    #[error("service `{service}`: missing field `{field}`")]
    MissingField { service: String, field: &'static str },
    #[error("service `{service}`: negative fee `{value}`")]
    NegativeFee { service: String, value: String },
    #[error("service `{service}`: unknown shape keyword `{value}`")]
    UnknownShapeKeyword { service: String, value: String },
    #[error("service `{service}`: unknown field `{field}`")]
    UnknownField { service: String, field: String },
    #[error("service `{service}`: {reason}")]
    InvalidValue { service: String, reason: String },
    #[error("calibration document: {0}")]
    Document(String),
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| IoError::Read {
            path: path_str(path),
            source,
        })?;
    Ok(text)
}

fn write_string(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Write {
        path: path_str(path),
        source,
    })
}

/// Read a JSONL chain file, one transaction per non-blank line. Validation
/// beyond parsing (dangling inputs, double spends) is `build_index`'s job.
pub fn load_chain(path: impl AsRef<Path>) -> Result<Vec<Transaction>, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IoError::Read {
        path: path_str(path),
        source,
    })?;
    let mut txs = Vec::new();
    for (number, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| IoError::Read {
            path: path_str(path),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let tx: Transaction = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            path: path_str(path),
            line: number + 1,
            reason: e.to_string(),
        })?;
        txs.push(tx);
    }
    Ok(txs)
}

/// Compact JSONL rendering, one transaction per line, stable field order.
pub fn chain_to_string(txs: &[Transaction]) -> String {
    let mut out = String::new();
    for tx in txs {
        out.push_str(&serde_json::to_string(tx).expect("transaction serializes"));
        out.push('\n');
    }
    out
}

pub fn save_chain(path: impl AsRef<Path>, txs: &[Transaction]) -> Result<(), IoError> {
    write_string(path.as_ref(), &chain_to_string(txs))
}

/// Load any JSON document (scenario, taint result, ground truth).
pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, IoError> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path_str(path),
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Pretty-printed JSON with a trailing newline; deterministic for identical
/// values.
pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_string(path.as_ref(), &text)
}

/// Load a case file holding either one case object or an array of cases.
pub fn load_cases(path: impl AsRef<Path>) -> Result<Vec<SampleCase>, IoError> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path_str(path),
        line: e.line(),
        reason: e.to_string(),
    })?;
    let into_parse_err = |e: serde_json::Error| IoError::Parse {
        path: path_str(path),
        line: 0,
        reason: e.to_string(),
    };
    if value.is_array() {
        serde_json::from_value(value).map_err(into_parse_err)
    } else {
        serde_json::from_value::<SampleCase>(value)
            .map(|case| vec![case])
            .map_err(into_parse_err)
    }
}

const CALIBRATION_FIELDS: [&str; 5] = [
    "min_fee",
    "tx_shape",
    "chain_shape",
    "no_address_reuse",
    "constant_tx_fee_sat",
];

/// Parse a calibration document mapping service names to criterion settings.
///
/// Per service: `min_fee` is `"N"`, a percentage (`"2.49%"`, at most two
/// decimals) or a flat amount (`"10000 sat"`); `tx_shape` and `chain_shape`
/// are `"N"` or a shape keyword; `no_address_reuse` is `"Y"` or `"N"`;
/// `constant_tx_fee_sat` is `"N"` or a non-negative integer.
pub fn parse_calibrations(text: &str) -> Result<BTreeMap<String, FilterCalibration>, CalibrationError> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| CalibrationError::Document(e.to_string()))?;
    let Value::Object(services) = doc else {
        return Err(CalibrationError::Document(
            "expected an object mapping service names to calibrations".to_owned(),
        ));
    };
    let mut out = BTreeMap::new();
    for (service, row) in services {
        let Value::Object(fields) = row else {
            return Err(CalibrationError::InvalidValue {
                service,
                reason: "service entry must be an object".to_owned(),
            });
        };
        for key in fields.keys() {
            if !CALIBRATION_FIELDS.contains(&key.as_str()) {
                return Err(CalibrationError::UnknownField {
                    service,
                    field: key.clone(),
                });
            }
        }
        let field = |name: &'static str| {
            fields.get(name).ok_or(CalibrationError::MissingField {
                service: service.clone(),
                field: name,
            })
        };

        let c1_fee = parse_min_fee(&service, field("min_fee")?)?;
        let c2_shape = parse_shape(&service, field("tx_shape")?)?;
        let c3_chain_shape = parse_shape(&service, field("chain_shape")?)?;
        let c4_no_reuse = match field("no_address_reuse")?.as_str() {
            Some("Y") => true,
            Some("N") => false,
            other => {
                return Err(CalibrationError::InvalidValue {
                    service,
                    reason: format!("no_address_reuse must be \"Y\" or \"N\", got {other:?}"),
                })
            }
        };
        let c5_constant_fee = parse_constant_fee(&service, field("constant_tx_fee_sat")?)?;

        out.insert(
            service,
            FilterCalibration {
                c1_fee,
                c2_shape,
                c3_chain_shape,
                c4_no_reuse,
                c5_constant_fee,
            },
        );
    }
    Ok(out)
}

pub fn load_calibration(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, FilterCalibration>, IoError> {
    let text = read_to_string(path.as_ref())?;
    Ok(parse_calibrations(&text)?)
}

fn invalid(service: &str, reason: impl Into<String>) -> CalibrationError {
    CalibrationError::InvalidValue {
        service: service.to_owned(),
        reason: reason.into(),
    }
}

fn parse_min_fee(service: &str, value: &Value) -> Result<FeeRule, CalibrationError> {
    let Some(text) = value.as_str() else {
        return Err(invalid(service, format!("min_fee must be a string, got {value}")));
    };
    if text == "N" {
        return Ok(FeeRule::Disabled);
    }
    if text.starts_with('-') {
        return Err(CalibrationError::NegativeFee {
            service: service.to_owned(),
            value: text.to_owned(),
        });
    }
    if let Some(percent) = text.strip_suffix('%') {
        return Ok(FeeRule::PercentBp(parse_percent_bp(service, percent)?));
    }
    if let Some(sats) = text.strip_suffix(" sat") {
        let flat: u64 = sats
            .parse()
            .map_err(|_| invalid(service, format!("malformed flat fee `{text}`")))?;
        return Ok(FeeRule::FlatSat(flat));
    }
    Err(invalid(
        service,
        format!("min_fee must be \"N\", a percentage or \"<n> sat\", got `{text}`"),
    ))
}

fn parse_percent_bp(service: &str, digits: &str) -> Result<u32, CalibrationError> {
    let malformed = || invalid(service, format!("malformed percentage `{digits}%`"));
    let (whole, frac) = match digits.split_once('.') {
        Some((w, f)) => (w, f),
        None => (digits, ""),
    };
    if whole.is_empty()
        || frac.len() > 2
        || !whole.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(malformed());
    }
    let whole: u32 = whole.parse().map_err(|_| malformed())?;
    let frac: u32 = if frac.is_empty() {
        0
    } else if frac.len() == 1 {
        frac.parse::<u32>().map_err(|_| malformed())? * 10
    } else {
        frac.parse().map_err(|_| malformed())?
    };
    let bp = whole
        .checked_mul(100)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(malformed)?;
    if bp > 10_000 {
        return Err(invalid(service, format!("percentage `{digits}%` exceeds 100%")));
    }
    Ok(bp)
}

fn parse_shape(service: &str, value: &Value) -> Result<Option<ShapePattern>, CalibrationError> {
    let Some(text) = value.as_str() else {
        return Err(invalid(service, format!("shape must be a string, got {value}")));
    };
    if text == "N" {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| CalibrationError::UnknownShapeKeyword {
            service: service.to_owned(),
            value: text.to_owned(),
        })
}

fn parse_constant_fee(service: &str, value: &Value) -> Result<Option<u64>, CalibrationError> {
    match value {
        Value::String(s) if s == "N" => Ok(None),
        Value::Number(n) => {
            if let Some(fee) = n.as_u64() {
                Ok(Some(fee))
            } else {
                Err(CalibrationError::NegativeFee {
                    service: service.to_owned(),
                    value: n.to_string(),
                })
            }
        }
        other => Err(invalid(
            service,
            format!("constant_tx_fee_sat must be \"N\" or an integer, got {other}"),
        )),
    }
}

#[derive(Serialize)]
struct CalibrationRow {
    min_fee: String,
    tx_shape: String,
    chain_shape: String,
    no_address_reuse: &'static str,
    constant_tx_fee_sat: Value,
}

fn format_bp(bp: u32) -> String {
    let whole = bp / 100;
    let frac = bp % 100;
    if frac == 0 {
        format!("{whole}%")
    } else if frac % 10 == 0 {
        format!("{whole}.{}%", frac / 10)
    } else {
        format!("{whole}.{frac:02}%")
    }
}

fn shape_keyword(service: &str, shape: &Option<ShapePattern>) -> Result<String, CalibrationError> {
    match shape {
        None => Ok("N".to_owned()),
        Some(pattern) => pattern
            .keyword()
            .map(str::to_owned)
            .ok_or_else(|| invalid(service, format!("shape {pattern} has no keyword form"))),
    }
}

/// Canonical rendering of a calibration map: sorted services, fixed key
/// order, two-space indentation, trailing newline. `parse_calibrations` of
/// the output reproduces the input map exactly.
pub fn calibration_to_string(
    calibrations: &BTreeMap<String, FilterCalibration>,
) -> Result<String, CalibrationError> {
    let mut doc: BTreeMap<&String, CalibrationRow> = BTreeMap::new();
    for (service, cal) in calibrations {
        let min_fee = match cal.c1_fee {
            FeeRule::Disabled => "N".to_owned(),
            FeeRule::PercentBp(bp) => format_bp(bp),
            FeeRule::FlatSat(flat) => format!("{flat} sat"),
        };
        doc.insert(
            service,
            CalibrationRow {
                min_fee,
                tx_shape: shape_keyword(service, &cal.c2_shape)?,
                chain_shape: shape_keyword(service, &cal.c3_chain_shape)?,
                no_address_reuse: if cal.c4_no_reuse { "Y" } else { "N" },
                constant_tx_fee_sat: match cal.c5_constant_fee {
                    Some(fee) => Value::from(fee),
                    None => Value::from("N"),
                },
            },
        );
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("calibration serializes");
    text.push('\n');
    Ok(text)
}

pub fn save_calibration(
    path: impl AsRef<Path>,
    calibrations: &BTreeMap<String, FilterCalibration>,
) -> Result<(), IoError> {
    let text = calibration_to_string(calibrations)?;
    write_string(path.as_ref(), &text)
}
