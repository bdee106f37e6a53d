//! End-to-end case evaluation and report rendering.
//!
//! A [`SampleCase`] names the deposited transactions of one mixing session
//! and the withdrawal outputs the analysis is supposed to find. Evaluating a
//! case runs every method, applies the service's filter calibration to each
//! result, and records counts, success flags and reduction percentages in a
//! [`CaseReport`]. Reports render either as aligned text tables or as one
//! JSON object per line; both forms are byte-stable for identical inputs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Address, ChainIndex, OutputRef, TxId};
use crate::filter::{apply_filters, Criterion, FilterCalibration, FilterError};
use crate::sim::CaseTruth;
use crate::taint::{run_method, Method, TaintError, TaintResult, WindowParams};

/// One mixing session to analyze: the deposit side is known, the targeted
/// withdrawal outputs are the ground truth to recover.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleCase {
    pub id: String,
    /// Selects the filter calibration.
    pub service: String,
    pub deposit_txids: Vec<TxId>,
    /// Outputs of the deposited transactions paid to the mixer; their
    /// addresses seed the address-level methods and their values sum to the
    /// deposited value.
    pub deposit_outputs: Vec<OutputRef>,
    pub target_outputs: Vec<OutputRef>,
    /// Withdrawal addresses of a prior, already-uncovered case against the
    /// same service; enables m4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_withdrawal_addresses: Option<Vec<Address>>,
    /// Overrides the default counting horizon, e.g. for services holding
    /// deposits longer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_days: Option<u32>,
}

impl SampleCase {
    /// Build a case from simulator ground truth.
    pub fn from_truth(
        id: impl Into<String>,
        service: impl Into<String>,
        truth: &CaseTruth,
    ) -> SampleCase {
        SampleCase {
            id: id.into(),
            service: service.into(),
            deposit_txids: truth.deposit_txids.clone(),
            deposit_outputs: truth.deposit_outputs.clone(),
            target_outputs: truth.target_outputs.clone(),
            known_withdrawal_addresses: None,
            horizon_days: None,
        }
    }
}

/// Counts and flags for one method on one case. Percentages are relative to
/// the unfiltered baseline count; `ran == false` means the method was not
/// applicable (m4 without a known prior case) and renders as "n/a".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub ran: bool,
    pub unfiltered_count: u64,
    pub filtered_count: u64,
    pub unfiltered_success: bool,
    pub filtered_success: bool,
    pub pct_of_baseline_unfiltered: Option<f64>,
    pub pct_of_baseline_filtered: Option<f64>,
}

impl MethodOutcome {
    fn not_applicable(method: Method) -> MethodOutcome {
        MethodOutcome {
            method,
            ran: false,
            unfiltered_count: 0,
            filtered_count: 0,
            unfiltered_success: false,
            filtered_success: false,
            pct_of_baseline_unfiltered: None,
            pct_of_baseline_filtered: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub service: String,
    pub target_count: usize,
    /// True when the case has no targets, making every success flag vacuous.
    pub degenerate: bool,
    pub applied_criteria: Vec<Criterion>,
    /// Fixed order: baseline, poison, m1, m2, m3, m4.
    pub outcomes: Vec<MethodOutcome>,
}

impl CaseReport {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no calibration for service `{0}`")]
    UnknownService(String),
    #[error(transparent)]
    Taint(#[from] TaintError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Run all methods on one case, filter each result with the service's
/// calibration and collect the report. Counts follow the counting window.
pub fn evaluate_case(
    chain: &ChainIndex,
    case: &SampleCase,
    calibrations: &BTreeMap<String, FilterCalibration>,
    params: WindowParams,
) -> Result<CaseReport, EvalError> {
    let cal = calibrations
        .get(&case.service)
        .ok_or_else(|| EvalError::UnknownService(case.service.clone()))?;
    let resolved = crate::taint::resolve_case(chain, case, params)?;

    let baseline = run_method(chain, case, Method::Baseline, params)?;
    let baseline_count = baseline.tainted_outputs.len() as u64;
    let pct = |count: u64| {
        (baseline_count > 0).then(|| count as f64 * 100.0 / baseline_count as f64)
    };
    let succeeds =
        |result: &TaintResult| case.target_outputs.iter().all(|t| result.tainted_outputs.contains(t));

    let mut outcomes = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        if method == Method::M4
            && case
                .known_withdrawal_addresses
                .as_deref()
                .unwrap_or_default()
                .is_empty()
        {
            outcomes.push(MethodOutcome::not_applicable(method));
            continue;
        }
        let result = if method == Method::Baseline {
            baseline.clone()
        } else {
            run_method(chain, case, method, params)?
        };
        let filtered = apply_filters(chain, &result, resolved.deposit_value, cal)?;
        let unfiltered_count = result.tainted_outputs.len() as u64;
        let filtered_count = filtered.retained.tainted_outputs.len() as u64;
        outcomes.push(MethodOutcome {
            method,
            ran: true,
            unfiltered_count,
            filtered_count,
            unfiltered_success: succeeds(&result),
            filtered_success: succeeds(&filtered.retained),
            pct_of_baseline_unfiltered: pct(unfiltered_count),
            pct_of_baseline_filtered: pct(filtered_count),
        });
    }

    Ok(CaseReport {
        case_id: case.id.clone(),
        service: case.service.clone(),
        target_count: case.target_outputs.len(),
        degenerate: case.target_outputs.is_empty(),
        applied_criteria: cal.applied_criteria(),
        outcomes,
    })
}

/// Evaluate a whole suite in case order.
pub fn evaluate_suite(
    chain: &ChainIndex,
    cases: &[SampleCase],
    calibrations: &BTreeMap<String, FilterCalibration>,
    params: WindowParams,
) -> Result<Vec<CaseReport>, EvalError> {
    cases
        .iter()
        .map(|case| evaluate_case(chain, case, calibrations, params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Jsonl,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "jsonl" => Ok(ReportFormat::Jsonl),
            _ => Err(format!("unknown format `{s}` (expected table or jsonl)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Table => "table",
            ReportFormat::Jsonl => "jsonl",
        })
    }
}

pub fn render_report(reports: &[CaseReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(reports),
        ReportFormat::Jsonl => render_jsonl(reports),
    }
}

/// Two aligned tables: output counts per method before and after filtering.
/// A cell shows the count when all targets were recovered, "---" when the
/// method ran but missed a target, and "n/a" when it did not run.
pub fn render_table(reports: &[CaseReport]) -> String {
    let columns = [Method::Baseline, Method::M1, Method::M2, Method::M3, Method::M4];
    let cell = |report: &CaseReport, method: Method, filtered: bool| -> String {
        let Some(outcome) = report.outcome(method) else {
            return "n/a".to_owned();
        };
        if !outcome.ran {
            return "n/a".to_owned();
        }
        let (count, success) = if filtered {
            (outcome.filtered_count, outcome.filtered_success)
        } else {
            (outcome.unfiltered_count, outcome.unfiltered_success)
        };
        if success {
            count.to_string()
        } else {
            "---".to_owned()
        }
    };

    let mut header: Vec<String> = ["Case", "Service", "Baseline", "M1", "M2", "M3", "M4"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let unfiltered_rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.case_id.clone(), r.service.clone()];
            row.extend(columns.iter().map(|&m| cell(r, m, false)));
            row
        })
        .collect();

    let mut out = String::from("Unfiltered results\n");
    out.push_str(&layout(&header, &unfiltered_rows));

    header.push("Criteria".to_owned());
    let filtered_rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.case_id.clone(), r.service.clone()];
            row.extend(columns.iter().map(|&m| cell(r, m, true)));
            row.push(if r.applied_criteria.is_empty() {
                "none".to_owned()
            } else {
                r.applied_criteria
                    .iter()
                    .map(Criterion::as_str)
                    .collect::<Vec<_>>()
                    .join(",")
            });
            row
        })
        .collect();
    out.push_str("\nFiltered results\n");
    out.push_str(&layout(&header, &filtered_rows));
    out
}

/// One JSON report object per line, in case order.
pub fn render_jsonl(reports: &[CaseReport]) -> String {
    let mut out = String::new();
    for report in reports {
        out.push_str(&serde_json::to_string(report).expect("report serializes"));
        out.push('\n');
    }
    out
}

fn layout(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let mut emit = |row: &[String]| {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            if i + 1 < row.len() {
                for _ in cell.len()..widths[i] {
                    out.push(' ');
                }
            }
        }
        out.push('\n');
    };
    emit(header);
    for row in rows {
        emit(row);
    }
    out
}
