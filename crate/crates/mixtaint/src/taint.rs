//! Taint propagation engines.
//!
//! Two families are implemented over the same window machinery. Output-level
//! tainting ([`poison_taint`]) follows spends only: a transaction spending a
//! tainted output makes all its outputs tainted. Address-level tainting
//! ([`address_taint_forward`], [`address_taint_backward`]) marks addresses
//! and re-applies its rules without regard to temporal order inside the
//! window, so knowledge gained from a late transaction taints earlier sends
//! of the same address.
//!
//! Forward rules, applied to every transaction inside the taint span until no
//! change:
//! - receiving: a tainted input address taints every output address;
//! - input sharing (optional): a tainted input address taints every co-input
//!   address;
//! - output sharing (optional): a tainted output address taints every
//!   co-output address.
//!
//! The backward engine uses the single reversed rule: a tainted output
//! address taints every input address.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Address, ChainIndex, OutputRef, TimeSpan, TxId, DAY_SECS};
use crate::eval::SampleCase;

/// Analysis method identifier, also used as the CLI `--method` value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Baseline,
    Poison,
    M1,
    M2,
    M3,
    M4,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Baseline,
        Method::Poison,
        Method::M1,
        Method::M2,
        Method::M3,
        Method::M4,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Poison => "poison",
            Method::M1 => "m1",
            Method::M2 => "m2",
            Method::M3 => "m3",
            Method::M4 => "m4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "poison" => Ok(Method::Poison),
            "m1" => Ok(Method::M1),
            "m2" => Ok(Method::M2),
            "m3" => Ok(Method::M3),
            "m4" => Ok(Method::M4),
            _ => Err(format!(
                "unknown method `{s}` (expected baseline, poison, m1, m2, m3 or m4)"
            )),
        }
    }
}

/// Time windows for one analysis.
///
/// Propagation may use any transaction inside `[taint_start, taint_end]` =
/// `[seed_time − lookback, seed_time + horizon]`; reported outputs are
/// restricted to the counting span `[seed_time, taint_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintWindow {
    /// Time of the earliest deposited transaction.
    pub seed_time: i64,
    pub lookback_secs: i64,
    pub horizon_secs: i64,
}

impl TaintWindow {
    pub fn new(seed_time: i64, lookback_secs: i64, horizon_secs: i64) -> Result<Self, TaintError> {
        if lookback_secs < 0 || horizon_secs < 0 {
            return Err(TaintError::InvalidWindow(format!(
                "lookback {lookback_secs} s and horizon {horizon_secs} s must be non-negative"
            )));
        }
        Ok(TaintWindow {
            seed_time,
            lookback_secs,
            horizon_secs,
        })
    }

    pub fn from_days(seed_time: i64, lookback_days: u32, horizon_days: u32) -> Self {
        TaintWindow {
            seed_time,
            lookback_secs: lookback_days as i64 * DAY_SECS,
            horizon_secs: horizon_days as i64 * DAY_SECS,
        }
    }

    pub fn taint_span(&self) -> TimeSpan {
        TimeSpan::new(self.seed_time - self.lookback_secs, self.seed_time + self.horizon_secs)
    }

    pub fn count_span(&self) -> TimeSpan {
        TimeSpan::new(self.seed_time, self.seed_time + self.horizon_secs)
    }
}

/// Which sharing rules the forward fixpoint applies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringOptions {
    pub input_sharing: bool,
    pub output_sharing: bool,
}

impl ClusteringOptions {
    pub const M1: ClusteringOptions = ClusteringOptions {
        input_sharing: false,
        output_sharing: false,
    };
    pub const M2: ClusteringOptions = ClusteringOptions {
        input_sharing: true,
        output_sharing: false,
    };
    pub const M3: ClusteringOptions = ClusteringOptions {
        input_sharing: true,
        output_sharing: true,
    };

    fn method(&self) -> Method {
        match (self.input_sharing, self.output_sharing) {
            (false, false) => Method::M1,
            (true, false) => Method::M2,
            (_, true) => Method::M3,
        }
    }
}

/// Outcome of one taint run: the tainted address set and the tainted outputs
/// inside the counting span, both sorted for stable serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintResult {
    pub method: Method,
    pub window: TaintWindow,
    /// Human-readable description of the seed set.
    pub seed: String,
    pub tainted_addresses: BTreeSet<Address>,
    pub tainted_outputs: BTreeSet<OutputRef>,
}

impl TaintResult {
    /// True when every target output is tainted.
    pub fn covers<'a>(&self, targets: impl IntoIterator<Item = &'a OutputRef>) -> bool {
        targets.into_iter().all(|t| self.tainted_outputs.contains(t))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaintError {
    #[error("invalid taint window: {0}")]
    InvalidWindow(String),
    #[error("seed set is empty")]
    EmptySeed,
    #[error("unknown seed output {0}")]
    UnknownSeedOutput(OutputRef),
    #[error("unknown deposit txid {0}")]
    UnknownTxid(TxId),
    #[error("deposit output {0} is not part of the case's deposited transactions")]
    ForeignDepositOutput(OutputRef),
    #[error("method m4 needs known prior withdrawal addresses")]
    MissingKnownCase,
}

/// Window lengths for an analysis run, in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowParams {
    pub lookback_days: u32,
    pub horizon_days: u32,
    pub backtrace_days: u32,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams {
            lookback_days: 5,
            horizon_days: 3,
            backtrace_days: 3,
        }
    }
}

/// Every output of every transaction inside the counting span.
pub fn baseline_outputs(chain: &ChainIndex, window: TaintWindow) -> TaintResult {
    let mut outputs = BTreeSet::new();
    for idx in chain.idx_range_in(window.count_span()) {
        let tx = chain.tx_at(idx as u32);
        for vout in 0..tx.outputs.len() as u32 {
            outputs.insert(tx.output_ref(vout));
        }
    }
    TaintResult {
        method: Method::Baseline,
        window,
        seed: "every output in the counting span".to_owned(),
        tainted_addresses: BTreeSet::new(),
        tainted_outputs: outputs,
    }
}

/// Output-level transaction tainting: the transitive closure of "a
/// transaction inside the taint span spending a tainted output taints all its
/// outputs", reported inside the counting span.
pub fn poison_taint(
    chain: &ChainIndex,
    seed_outputs: &BTreeSet<OutputRef>,
    window: TaintWindow,
) -> Result<TaintResult, TaintError> {
    if seed_outputs.is_empty() {
        return Err(TaintError::EmptySeed);
    }
    let range = chain.idx_range_in(window.taint_span());
    let mut frontier: Vec<(u32, u32)> = Vec::new();
    for out in seed_outputs {
        let idx = chain
            .tx_idx(&out.txid)
            .filter(|&i| (out.vout as usize) < chain.tx_at(i).outputs.len())
            .ok_or(TaintError::UnknownSeedOutput(*out))?;
        frontier.push((idx, out.vout));
    }

    let mut spreads = vec![false; chain.len()];
    while let Some((idx, vout)) = frontier.pop() {
        if let Some(spender) = chain.spender_idx(idx, vout) {
            if range.contains(&(spender as usize)) && !spreads[spender as usize] {
                spreads[spender as usize] = true;
                for v in 0..chain.tx_at(spender).outputs.len() as u32 {
                    frontier.push((spender, v));
                }
            }
        }
    }

    let count = window.count_span();
    let mut outputs = BTreeSet::new();
    for out in seed_outputs {
        let idx = chain.tx_idx(&out.txid).expect("validated above");
        if count.contains(chain.tx_at(idx).timestamp) {
            outputs.insert(*out);
        }
    }
    for idx in chain.idx_range_in(count) {
        if spreads[idx] {
            let tx = chain.tx_at(idx as u32);
            for vout in 0..tx.outputs.len() as u32 {
                outputs.insert(tx.output_ref(vout));
            }
        }
    }

    Ok(TaintResult {
        method: Method::Poison,
        window,
        seed: describe_outputs(seed_outputs),
        tainted_addresses: BTreeSet::new(),
        tainted_outputs: outputs,
    })
}

/// Address-level forward tainting; the method tag reflects the enabled rules.
pub fn address_taint_forward(
    chain: &ChainIndex,
    seed_addresses: &BTreeSet<Address>,
    window: TaintWindow,
    opts: ClusteringOptions,
) -> Result<TaintResult, TaintError> {
    if seed_addresses.is_empty() {
        return Err(TaintError::EmptySeed);
    }
    let tainted = forward_fixpoint(chain, seed_addresses, window.taint_span(), opts);
    let outputs = collect_tainted_outputs(chain, &tainted, window.count_span());
    Ok(TaintResult {
        method: opts.method(),
        window,
        seed: describe_addresses(seed_addresses),
        tainted_addresses: materialize(chain, &tainted, seed_addresses),
        tainted_outputs: outputs,
    })
}

/// Address-level backward tainting over `span`: a tainted output address
/// taints every input address, to fixpoint.
pub fn address_taint_backward(
    chain: &ChainIndex,
    seed_addresses: &BTreeSet<Address>,
    span: TimeSpan,
) -> Result<BTreeSet<Address>, TaintError> {
    if seed_addresses.is_empty() {
        return Err(TaintError::EmptySeed);
    }
    let range = chain.idx_range_in(span);
    let mut tainted = vec![false; chain.n_addrs()];
    let mut queue = seed_queue(chain, seed_addresses, &mut tainted);
    let mut visited = vec![false; chain.len()];
    while let Some(addr) = queue.pop_front() {
        for &t in chain.output_txs_of(addr) {
            if range.contains(&(t as usize)) && !visited[t as usize] {
                visited[t as usize] = true;
                for &(input_addr, _) in chain.resolved_inputs_at(t) {
                    mark(&mut tainted, &mut queue, input_addr);
                }
            }
        }
    }
    Ok(materialize(chain, &tainted, seed_addresses))
}

/// Two-stage tracking for mixers whose deposit and withdrawal pools never
/// share a value path: backward-taint from known prior withdrawal addresses,
/// then forward-taint with both sharing rules from that set plus the target
/// deposit's receivers.
pub fn method4(
    chain: &ChainIndex,
    known_withdrawal_addresses: &BTreeSet<Address>,
    receiver_addresses: &BTreeSet<Address>,
    window: TaintWindow,
    backtrace_secs: i64,
) -> Result<TaintResult, TaintError> {
    if known_withdrawal_addresses.is_empty() {
        return Err(TaintError::MissingKnownCase);
    }
    // The prior withdrawal's time is the latest receipt on any known address.
    let withdrawn_at = known_withdrawal_addresses
        .iter()
        .filter_map(|a| {
            chain
                .output_incidence(a)
                .last()
                .map(|txid| chain.tx_by_id(txid).expect("incident txid").timestamp)
        })
        .max();
    let stage1 = match withdrawn_at {
        Some(t) => address_taint_backward(
            chain,
            known_withdrawal_addresses,
            TimeSpan::new(t - backtrace_secs, t),
        )?,
        None => known_withdrawal_addresses.clone(),
    };

    let mut seeds = stage1;
    seeds.extend(receiver_addresses.iter().cloned());
    let mut result = address_taint_forward(chain, &seeds, window, ClusteringOptions::M3)?;
    result.method = Method::M4;
    result.seed = format!(
        "known withdrawals: {}; receivers: {}",
        describe_addresses(known_withdrawal_addresses),
        describe_addresses(receiver_addresses)
    );
    Ok(result)
}

/// A sample case with its seeds and windows resolved against a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedCase {
    pub window: TaintWindow,
    pub receiver_addresses: BTreeSet<Address>,
    pub deposit_outputs: BTreeSet<OutputRef>,
    /// Sum of the deposit outputs paid to the mixer, satoshis.
    pub deposit_value: u64,
    pub backtrace_secs: i64,
}

pub fn resolve_case(
    chain: &ChainIndex,
    case: &SampleCase,
    params: WindowParams,
) -> Result<ResolvedCase, TaintError> {
    if case.deposit_txids.is_empty() || case.deposit_outputs.is_empty() {
        return Err(TaintError::EmptySeed);
    }
    let mut seed_time = i64::MAX;
    for txid in &case.deposit_txids {
        let tx = chain.tx_by_id(txid).ok_or(TaintError::UnknownTxid(*txid))?;
        seed_time = seed_time.min(tx.timestamp);
    }
    let mut receivers = BTreeSet::new();
    let mut deposit_value: u64 = 0;
    for out in &case.deposit_outputs {
        if !case.deposit_txids.contains(&out.txid) {
            return Err(TaintError::ForeignDepositOutput(*out));
        }
        let output = chain
            .output(out)
            .map_err(|_| TaintError::UnknownSeedOutput(*out))?;
        receivers.insert(output.address.clone());
        deposit_value += output.value;
    }
    let horizon = case.horizon_days.unwrap_or(params.horizon_days);
    Ok(ResolvedCase {
        window: TaintWindow::from_days(seed_time, params.lookback_days, horizon),
        receiver_addresses: receivers,
        deposit_outputs: case.deposit_outputs.iter().copied().collect(),
        deposit_value,
        backtrace_secs: params.backtrace_days as i64 * DAY_SECS,
    })
}

/// Resolve a case and dispatch one method on it. Seeds for the address
/// methods are the receiver addresses of the deposit outputs; the depositor's
/// change stays out.
pub fn run_method(
    chain: &ChainIndex,
    case: &SampleCase,
    method: Method,
    params: WindowParams,
) -> Result<TaintResult, TaintError> {
    let resolved = resolve_case(chain, case, params)?;
    match method {
        Method::Baseline => Ok(baseline_outputs(chain, resolved.window)),
        Method::Poison => poison_taint(chain, &resolved.deposit_outputs, resolved.window),
        Method::M1 => {
            address_taint_forward(chain, &resolved.receiver_addresses, resolved.window, ClusteringOptions::M1)
        }
        Method::M2 => {
            address_taint_forward(chain, &resolved.receiver_addresses, resolved.window, ClusteringOptions::M2)
        }
        Method::M3 => {
            address_taint_forward(chain, &resolved.receiver_addresses, resolved.window, ClusteringOptions::M3)
        }
        Method::M4 => {
            let known: BTreeSet<Address> = case
                .known_withdrawal_addresses
                .as_deref()
                .unwrap_or_default()
                .iter()
                .cloned()
                .collect();
            if known.is_empty() {
                return Err(TaintError::MissingKnownCase);
            }
            method4(
                chain,
                &known,
                &resolved.receiver_addresses,
                resolved.window,
                resolved.backtrace_secs,
            )
        }
    }
}

fn mark(tainted: &mut [bool], queue: &mut VecDeque<u32>, addr: u32) {
    if !tainted[addr as usize] {
        tainted[addr as usize] = true;
        queue.push_back(addr);
    }
}

fn seed_queue(
    chain: &ChainIndex,
    seeds: &BTreeSet<Address>,
    tainted: &mut [bool],
) -> VecDeque<u32> {
    let mut queue = VecDeque::new();
    for addr in seeds {
        if let Some(id) = chain.addr_id(addr) {
            mark(tainted, &mut queue, id);
        }
    }
    queue
}

/// Worklist fixpoint over the window-restricted subgraph. Each transaction
/// applies its input-side rules at most once and its output-side rule at most
/// once, so the run is linear in total transaction size.
fn forward_fixpoint(
    chain: &ChainIndex,
    seeds: &BTreeSet<Address>,
    span: TimeSpan,
    opts: ClusteringOptions,
) -> Vec<bool> {
    let range = chain.idx_range_in(span);
    let mut tainted = vec![false; chain.n_addrs()];
    let mut queue = seed_queue(chain, seeds, &mut tainted);
    let mut input_done = vec![false; chain.len()];
    let mut output_done = vec![false; chain.len()];
    while let Some(addr) = queue.pop_front() {
        for &t in chain.input_txs_of(addr) {
            if range.contains(&(t as usize)) && !input_done[t as usize] {
                input_done[t as usize] = true;
                for &out_addr in chain.output_addr_ids_at(t) {
                    mark(&mut tainted, &mut queue, out_addr);
                }
                if opts.input_sharing {
                    for &(in_addr, _) in chain.resolved_inputs_at(t) {
                        mark(&mut tainted, &mut queue, in_addr);
                    }
                }
            }
        }
        if opts.output_sharing {
            for &t in chain.output_txs_of(addr) {
                if range.contains(&(t as usize)) && !output_done[t as usize] {
                    output_done[t as usize] = true;
                    for &out_addr in chain.output_addr_ids_at(t) {
                        mark(&mut tainted, &mut queue, out_addr);
                    }
                }
            }
        }
    }
    tainted
}

/// An output inside `span` is tainted when its own address is tainted or its
/// transaction spends from a tainted address.
fn collect_tainted_outputs(
    chain: &ChainIndex,
    tainted: &[bool],
    span: TimeSpan,
) -> BTreeSet<OutputRef> {
    let mut outputs = BTreeSet::new();
    for idx in chain.idx_range_in(span) {
        let idx = idx as u32;
        let sending = chain
            .resolved_inputs_at(idx)
            .iter()
            .any(|&(a, _)| tainted[a as usize]);
        let txid = chain.tx_at(idx).txid;
        for (vout, &out_addr) in chain.output_addr_ids_at(idx).iter().enumerate() {
            if sending || tainted[out_addr as usize] {
                outputs.insert(OutputRef::new(txid, vout as u32));
            }
        }
    }
    outputs
}

/// Tainted ids back to addresses, keeping seed addresses the chain has never
/// seen.
fn materialize(
    chain: &ChainIndex,
    tainted: &[bool],
    seeds: &BTreeSet<Address>,
) -> BTreeSet<Address> {
    let mut set: BTreeSet<Address> = seeds.clone();
    for (id, &is_tainted) in tainted.iter().enumerate() {
        if is_tainted {
            set.insert(chain.addr_name(id as u32).clone());
        }
    }
    set
}

fn describe_addresses(addresses: &BTreeSet<Address>) -> String {
    let mut s = String::from("addresses ");
    for (i, a) in addresses.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(a.as_str());
    }
    s
}

fn describe_outputs(outputs: &BTreeSet<OutputRef>) -> String {
    let mut s = String::from("outputs ");
    for (i, o) in outputs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&o.to_string());
    }
    s
}
