//! Address-level taint analysis for coins that have passed through a mixer.
//!
//! The crate models a UTXO chain as a flat transaction list ([`chain`]),
//! propagates taint through it at the address level with optional clustering
//! rules ([`taint`], [`cluster`]), narrows candidate withdrawals with
//! per-service filtering criteria ([`filter`]), and scores everything against
//! ground truth from a deterministic mixer simulator ([`sim`], [`eval`]).
//! The `mixtaint` binary exposes the same pipeline as subcommands over files.

pub mod chain;
pub mod cluster;
pub mod eval;
pub mod filter;
pub mod io;
pub mod sim;
pub mod taint;

pub use chain::{
    build_index, Address, ChainError, ChainIndex, OutputRef, TimeSpan, Transaction, TxId,
    TxInput, TxOutput, DAY_SECS,
};
pub use cluster::{cluster_addresses, cluster_input_sharing, cluster_output_sharing, AddressClusters};
pub use eval::{
    evaluate_case, evaluate_suite, render_report, CaseReport, EvalError, MethodOutcome,
    ReportFormat, SampleCase,
};
pub use filter::{
    apply_filters, criterion1_value, criterion2_shape, criterion3_chain_shape,
    criterion4_no_reuse, criterion5_fee, CountRule, Criterion, FeeRule, FilterCalibration,
    FilterError, FilterOutcome, ShapePattern,
};
pub use io::{
    calibration_to_string, chain_to_string, load_calibration, load_cases, load_chain, load_json,
    parse_calibrations, save_calibration, save_chain, save_json, CalibrationError, IoError,
};
pub use sim::{
    reference_chain_t1, simulate, CaseTruth, DepositSpec, FeePolicy, GroundTruth, MixerScenario,
    PayoutShape, PoolTopology, SimError,
};
pub use taint::{
    address_taint_backward, address_taint_forward, baseline_outputs, method4, poison_taint,
    resolve_case, run_method, ClusteringOptions, Method, ResolvedCase, TaintError, TaintResult,
    TaintWindow, WindowParams,
};
