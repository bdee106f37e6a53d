//! Core ledger types and the immutable multi-index that every engine queries.
//!
//! A chain is a flat list of [`Transaction`] records forming a directed
//! value-flow graph: inputs reference earlier outputs by `(txid, vout)`.
//! [`build_index`] validates the list (resolvable inputs, no double spends,
//! value conservation) and produces a [`ChainIndex`] with the lookup maps the
//! taint engines, clustering, and filtering code need. The index is immutable
//! once built and safe to share across threads.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds in one day. All day-denominated windows use this factor.
pub const DAY_SECS: i64 = 86_400;

/// 32-byte transaction identifier, hex-encoded in files and reports.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxId(pub [u8; 32]);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxId({self})")
    }
}

impl FromStr for TxId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|e| format!("invalid txid hex: {e}"))?;
        let bytes: [u8; 32] = bytes
            .try_into()
            .map_err(|_| format!("txid must be 32 bytes, got {} hex chars", s.len()))?;
        Ok(TxId(bytes))
    }
}

impl Serialize for TxId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TxId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Opaque address identifier. No script or key semantics are attached; all
/// engines operate purely on the value-flow graph.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(String);

impl Address {
    pub fn new(s: impl Into<String>) -> Self {
        Address(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.0)
    }
}

impl From<&str> for Address {
    fn from(s: &str) -> Self {
        Address(s.to_owned())
    }
}

impl From<String> for Address {
    fn from(s: String) -> Self {
        Address(s)
    }
}

/// Reference to one transaction output. Rendered as `txid:vout` everywhere
/// outside the chain file itself.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutputRef {
    pub txid: TxId,
    pub vout: u32,
}

impl OutputRef {
    pub fn new(txid: TxId, vout: u32) -> Self {
        OutputRef { txid, vout }
    }
}

impl fmt::Display for OutputRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.txid, self.vout)
    }
}

impl fmt::Debug for OutputRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OutputRef({self})")
    }
}

impl FromStr for OutputRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (txid, vout) = s
            .rsplit_once(':')
            .ok_or_else(|| format!("output ref `{s}` missing `:vout` suffix"))?;
        Ok(OutputRef {
            txid: txid.parse()?,
            vout: vout.parse().map_err(|e| format!("invalid vout: {e}"))?,
        })
    }
}

impl Serialize for OutputRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for OutputRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Standard UTXO reference: which prior output an input spends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxInput {
    #[serde(rename = "txid")]
    pub prev_txid: TxId,
    #[serde(rename = "vout")]
    pub prev_vout: u32,
}

impl TxInput {
    pub fn outpoint(&self) -> OutputRef {
        OutputRef::new(self.prev_txid, self.prev_vout)
    }
}

/// One transaction output: an address and a positive satoshi value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxOutput {
    #[serde(rename = "addr")]
    pub address: Address,
    pub value: u64,
}

/// A ledger record. Timestamps live on transactions, not blocks; the engines
/// reason in seconds relative to transaction times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    pub txid: TxId,
    #[serde(rename = "time")]
    pub timestamp: i64,
    #[serde(rename = "coinbase")]
    pub is_coinbase: bool,
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
}

impl Transaction {
    pub fn output_ref(&self, vout: u32) -> OutputRef {
        OutputRef::new(self.txid, vout)
    }

    pub fn output_value_sum(&self) -> u64 {
        self.outputs.iter().map(|o| o.value).sum()
    }
}

/// Inclusive time interval in unix seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub start: i64,
    pub end: i64,
}

impl TimeSpan {
    pub fn new(start: i64, end: i64) -> Self {
        TimeSpan { start, end }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("duplicate txid {0}")]
    DuplicateTxid(TxId),
    #[error("input references missing output {0}")]
    DanglingInputRef(OutputRef),
    #[error("output {output} is spent by both {first} and {second}")]
    DoubleSpend {
        output: OutputRef,
        first: TxId,
        second: TxId,
    },
    #[error("coinbase transaction {0} must not have inputs")]
    CoinbaseWithInputs(TxId),
    #[error("non-coinbase transaction {0} has no inputs")]
    MissingInputs(TxId),
    #[error("output {0} has zero value")]
    ZeroValueOutput(OutputRef),
    #[error("output {0} pays an empty address")]
    EmptyAddress(OutputRef),
    #[error("transaction {txid} outputs {outputs} sat exceed resolved inputs {inputs} sat")]
    NegativeFee {
        txid: TxId,
        inputs: u64,
        outputs: u64,
    },
    #[error("coinbase transaction {0} has no fee")]
    CoinbaseHasNoFee(TxId),
    #[error("unknown txid {0}")]
    UnknownTxid(TxId),
    #[error("unknown output {0}")]
    UnknownOutput(OutputRef),
}

/// Immutable multi-index over a validated chain.
///
/// Transactions are held in canonical `(timestamp, txid)` order, so a
/// transaction index doubles as a chronological position. Addresses are
/// interned to dense `u32` ids; the engines run entirely on ids and only
/// translate back at result boundaries.
pub struct ChainIndex {
    txs: Vec<Transaction>,
    txid_to_idx: HashMap<TxId, u32>,
    addr_ids: HashMap<Address, u32>,
    addr_names: Vec<Address>,
    /// Per transaction: resolved `(address id, value)` for each input, in
    /// input order.
    resolved_inputs: Vec<Vec<(u32, u64)>>,
    /// Per transaction: address id for each output, in output order.
    output_addrs: Vec<Vec<u32>>,
    /// Per transaction: spending transaction index for each output.
    spenders: Vec<Vec<Option<u32>>>,
    /// Per transaction: fee in satoshis; `None` for coinbase.
    fees: Vec<Option<u64>>,
    /// Per address: distinct transactions where it appears as a resolved
    /// input address, ascending (chronological).
    addr_input_txs: Vec<Vec<u32>>,
    /// Per address: distinct transactions where it appears in outputs,
    /// ascending (chronological).
    addr_output_txs: Vec<Vec<u32>>,
}

impl fmt::Debug for ChainIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainIndex")
            .field("transactions", &self.txs.len())
            .field("addresses", &self.addr_names.len())
            .finish()
    }
}

/// Validate a transaction list and build the immutable index.
///
/// The list is sorted into canonical `(timestamp, txid)` order first, so the
/// result is identical regardless of input ordering.
pub fn build_index(mut transactions: Vec<Transaction>) -> Result<ChainIndex, ChainError> {
    transactions.sort_by(|a, b| (a.timestamp, a.txid).cmp(&(b.timestamp, b.txid)));

    let n = transactions.len();
    let mut txid_to_idx = HashMap::with_capacity(n);
    for (i, tx) in transactions.iter().enumerate() {
        if txid_to_idx.insert(tx.txid, i as u32).is_some() {
            return Err(ChainError::DuplicateTxid(tx.txid));
        }
    }

    // Structural checks and address interning. Every resolvable input address
    // is by definition some output's address, so interning outputs alone
    // covers the whole address universe.
    let mut addr_ids: HashMap<Address, u32> = HashMap::new();
    let mut addr_names: Vec<Address> = Vec::new();
    let mut output_addrs: Vec<Vec<u32>> = Vec::with_capacity(n);
    for tx in &transactions {
        if tx.is_coinbase && !tx.inputs.is_empty() {
            return Err(ChainError::CoinbaseWithInputs(tx.txid));
        }
        if !tx.is_coinbase && tx.inputs.is_empty() {
            return Err(ChainError::MissingInputs(tx.txid));
        }
        let mut ids = Vec::with_capacity(tx.outputs.len());
        for (vout, out) in tx.outputs.iter().enumerate() {
            if out.value == 0 {
                return Err(ChainError::ZeroValueOutput(tx.output_ref(vout as u32)));
            }
            if out.address.is_empty() {
                return Err(ChainError::EmptyAddress(tx.output_ref(vout as u32)));
            }
            let next = addr_names.len() as u32;
            let id = *addr_ids.entry(out.address.clone()).or_insert(next);
            if id == next {
                addr_names.push(out.address.clone());
            }
            ids.push(id);
        }
        output_addrs.push(ids);
    }

    // Resolve inputs, detect dangling references and double spends, and check
    // value conservation.
    let mut resolved_inputs: Vec<Vec<(u32, u64)>> = Vec::with_capacity(n);
    let mut spenders: Vec<Vec<Option<u32>>> =
        transactions.iter().map(|tx| vec![None; tx.outputs.len()]).collect();
    let mut fees: Vec<Option<u64>> = Vec::with_capacity(n);
    for (i, tx) in transactions.iter().enumerate() {
        let mut resolved = Vec::with_capacity(tx.inputs.len());
        let mut input_sum: u128 = 0;
        for input in &tx.inputs {
            let outpoint = input.outpoint();
            let prev_idx = *txid_to_idx
                .get(&input.prev_txid)
                .ok_or(ChainError::DanglingInputRef(outpoint))?;
            let prev = &transactions[prev_idx as usize];
            if input.prev_vout as usize >= prev.outputs.len() {
                return Err(ChainError::DanglingInputRef(outpoint));
            }
            let slot = &mut spenders[prev_idx as usize][input.prev_vout as usize];
            if let Some(first) = *slot {
                return Err(ChainError::DoubleSpend {
                    output: outpoint,
                    first: transactions[first as usize].txid,
                    second: tx.txid,
                });
            }
            *slot = Some(i as u32);
            let addr_id = output_addrs[prev_idx as usize][input.prev_vout as usize];
            let value = prev.outputs[input.prev_vout as usize].value;
            input_sum += value as u128;
            resolved.push((addr_id, value));
        }
        if tx.is_coinbase {
            fees.push(None);
        } else {
            let output_sum: u128 = tx.outputs.iter().map(|o| o.value as u128).sum();
            if output_sum > input_sum {
                return Err(ChainError::NegativeFee {
                    txid: tx.txid,
                    inputs: input_sum as u64,
                    outputs: output_sum as u64,
                });
            }
            fees.push(Some((input_sum - output_sum) as u64));
        }
        resolved_inputs.push(resolved);
    }

    // Incidence lists, transaction-level (an address paid by two outputs of
    // one transaction is recorded once).
    let mut addr_input_txs: Vec<Vec<u32>> = vec![Vec::new(); addr_names.len()];
    let mut addr_output_txs: Vec<Vec<u32>> = vec![Vec::new(); addr_names.len()];
    let mut scratch: Vec<u32> = Vec::new();
    for i in 0..n {
        scratch.clear();
        scratch.extend(resolved_inputs[i].iter().map(|&(a, _)| a));
        scratch.sort_unstable();
        scratch.dedup();
        for &a in &scratch {
            addr_input_txs[a as usize].push(i as u32);
        }
        scratch.clear();
        scratch.extend_from_slice(&output_addrs[i]);
        scratch.sort_unstable();
        scratch.dedup();
        for &a in &scratch {
            addr_output_txs[a as usize].push(i as u32);
        }
    }

    Ok(ChainIndex {
        txs: transactions,
        txid_to_idx,
        addr_ids,
        addr_names,
        resolved_inputs,
        output_addrs,
        spenders,
        fees,
        addr_input_txs,
        addr_output_txs,
    })
}

impl ChainIndex {
    /// All transactions in canonical `(timestamp, txid)` order.
    pub fn transactions(&self) -> &[Transaction] {
        &self.txs
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn tx_by_id(&self, txid: &TxId) -> Option<&Transaction> {
        self.txid_to_idx.get(txid).map(|&i| &self.txs[i as usize])
    }

    pub fn contains_output(&self, r: &OutputRef) -> bool {
        self.output(r).is_ok()
    }

    pub fn output(&self, r: &OutputRef) -> Result<&TxOutput, ChainError> {
        self.tx_by_id(&r.txid)
            .and_then(|tx| tx.outputs.get(r.vout as usize))
            .ok_or(ChainError::UnknownOutput(*r))
    }

    /// Address of the output an input spends.
    pub fn resolve_input_address(&self, input: &TxInput) -> Result<&Address, ChainError> {
        self.output(&input.outpoint())
            .map(|o| &o.address)
            .map_err(|_| ChainError::DanglingInputRef(input.outpoint()))
    }

    /// Sum of resolved input values minus sum of output values.
    pub fn transaction_fee(&self, txid: &TxId) -> Result<u64, ChainError> {
        let idx = self
            .txid_to_idx
            .get(txid)
            .copied()
            .ok_or(ChainError::UnknownTxid(*txid))?;
        self.fees[idx as usize].ok_or(ChainError::CoinbaseHasNoFee(*txid))
    }

    /// The transaction spending this output, if any.
    pub fn spender_of(&self, r: &OutputRef) -> Option<&Transaction> {
        let idx = *self.txid_to_idx.get(&r.txid)?;
        let slot = self.spenders[idx as usize].get(r.vout as usize)?;
        slot.map(|s| &self.txs[s as usize])
    }

    /// Number of distinct transactions in which this address appears as a
    /// resolved input address, over the entire chain.
    pub fn input_use_count(&self, address: &Address) -> u32 {
        self.addr_ids
            .get(address)
            .map(|&a| self.addr_input_txs[a as usize].len() as u32)
            .unwrap_or(0)
    }

    /// Chronological txids where this address appears as a resolved input.
    pub fn input_incidence(&self, address: &Address) -> Vec<&TxId> {
        match self.addr_ids.get(address) {
            Some(&a) => self.addr_input_txs[a as usize]
                .iter()
                .map(|&i| &self.txs[i as usize].txid)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Chronological txids where this address appears in outputs.
    pub fn output_incidence(&self, address: &Address) -> Vec<&TxId> {
        match self.addr_ids.get(address) {
            Some(&a) => self.addr_output_txs[a as usize]
                .iter()
                .map(|&i| &self.txs[i as usize].txid)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn addresses(&self) -> impl Iterator<Item = &Address> {
        self.addr_names.iter()
    }

    pub fn address_count(&self) -> usize {
        self.addr_names.len()
    }

    /// Transactions with timestamps inside `span`, as a contiguous slice of
    /// the canonical order.
    pub fn transactions_in(&self, span: TimeSpan) -> &[Transaction] {
        let r = self.idx_range_in(span);
        &self.txs[r]
    }

    // ---- id-level accessors used by the engines ----

    pub(crate) fn n_addrs(&self) -> usize {
        self.addr_names.len()
    }

    pub(crate) fn addr_id(&self, address: &Address) -> Option<u32> {
        self.addr_ids.get(address).copied()
    }

    pub(crate) fn addr_name(&self, id: u32) -> &Address {
        &self.addr_names[id as usize]
    }

    pub(crate) fn tx_at(&self, idx: u32) -> &Transaction {
        &self.txs[idx as usize]
    }

    pub(crate) fn tx_idx(&self, txid: &TxId) -> Option<u32> {
        self.txid_to_idx.get(txid).copied()
    }

    pub(crate) fn resolved_inputs_at(&self, idx: u32) -> &[(u32, u64)] {
        &self.resolved_inputs[idx as usize]
    }

    pub(crate) fn output_addr_ids_at(&self, idx: u32) -> &[u32] {
        &self.output_addrs[idx as usize]
    }

    pub(crate) fn spender_idx(&self, tx_idx: u32, vout: u32) -> Option<u32> {
        self.spenders[tx_idx as usize][vout as usize]
    }

    pub(crate) fn fee_at(&self, idx: u32) -> Option<u64> {
        self.fees[idx as usize]
    }

    pub(crate) fn input_txs_of(&self, addr: u32) -> &[u32] {
        &self.addr_input_txs[addr as usize]
    }

    pub(crate) fn output_txs_of(&self, addr: u32) -> &[u32] {
        &self.addr_output_txs[addr as usize]
    }

    pub(crate) fn idx_range_in(&self, span: TimeSpan) -> std::ops::Range<usize> {
        let start = self.txs.partition_point(|t| t.timestamp < span.start);
        let end = self.txs.partition_point(|t| t.timestamp <= span.end);
        start..end.max(start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::reference_chain_t1;

    fn coinbase(label: u8, time: i64, outputs: &[(&str, u64)]) -> Transaction {
        Transaction {
            txid: TxId([label; 32]),
            timestamp: time,
            is_coinbase: true,
            inputs: vec![],
            outputs: outputs
                .iter()
                .map(|&(a, v)| TxOutput {
                    address: a.into(),
                    value: v,
                })
                .collect(),
        }
    }

    fn spend(
        label: u8,
        time: i64,
        inputs: &[(TxId, u32)],
        outputs: &[(&str, u64)],
    ) -> Transaction {
        Transaction {
            txid: TxId([label; 32]),
            timestamp: time,
            is_coinbase: false,
            inputs: inputs
                .iter()
                .map(|&(t, v)| TxInput {
                    prev_txid: t,
                    prev_vout: v,
                })
                .collect(),
            outputs: outputs
                .iter()
                .map(|&(a, v)| TxOutput {
                    address: a.into(),
                    value: v,
                })
                .collect(),
        }
    }

    /// Full-scan oracle for input-use counts, independent of the index
    /// internals.
    fn input_use_count_by_scan(txs: &[Transaction], address: &Address) -> u32 {
        let outputs: HashMap<OutputRef, &Address> = txs
            .iter()
            .flat_map(|tx| {
                tx.outputs
                    .iter()
                    .enumerate()
                    .map(move |(v, o)| (tx.output_ref(v as u32), &o.address))
            })
            .collect();
        txs.iter()
            .filter(|tx| {
                tx.inputs
                    .iter()
                    .any(|i| outputs.get(&i.outpoint()) == Some(&address))
            })
            .count() as u32
    }

    #[test]
    fn empty_chain_builds_empty_index() {
        let index = build_index(vec![]).unwrap();
        assert!(index.is_empty());
        assert_eq!(index.address_count(), 0);
        assert_eq!(index.transactions_in(TimeSpan::new(0, 1000)), &[]);
    }

    #[test]
    fn single_coinbase_has_no_spends() {
        let index = build_index(vec![coinbase(1, 10, &[("A", 50_000)])]).unwrap();
        let a = Address::from("A");
        assert_eq!(index.input_use_count(&a), 0);
        assert_eq!(index.output_incidence(&a).len(), 1);
        assert!(index
            .spender_of(&OutputRef::new(TxId([1; 32]), 0))
            .is_none());
    }

    #[test]
    fn t1_index_matches_hand_trace() {
        let (txs, truth) = reference_chain_t1();
        let index = build_index(txs.clone()).unwrap();

        for (addr, expected) in [("A", 1), ("C", 1), ("D", 1), ("M_recv", 1), ("B", 0)] {
            let addr = Address::from(addr);
            assert_eq!(index.input_use_count(&addr), expected, "{addr}");
            assert_eq!(
                input_use_count_by_scan(&txs, &addr),
                expected,
                "oracle disagrees for {addr}"
            );
        }

        // tx1's deposit output is spent by tx5.
        let deposit = truth.cases[0].deposit_outputs[0];
        let spender = index.spender_of(&deposit).expect("deposit output spent");
        assert_eq!(spender.outputs[0].address, Address::from("C"));
        assert_eq!(spender.timestamp, 300);
    }

    #[test]
    fn t1_resolves_tx5_input_to_mixer_receiver() {
        let (txs, _) = reference_chain_t1();
        let index = build_index(txs.clone()).unwrap();
        let tx5 = index
            .transactions()
            .iter()
            .find(|t| t.timestamp == 300)
            .unwrap();
        let addr = index.resolve_input_address(&tx5.inputs[0]).unwrap();
        assert_eq!(addr, &Address::from("M_recv"));
    }

    #[test]
    fn resolve_input_address_direct_lookup() {
        let cb = coinbase(1, 0, &[("A", 10_000)]);
        let index = build_index(vec![cb]).unwrap();
        let input = TxInput {
            prev_txid: TxId([1; 32]),
            prev_vout: 0,
        };
        assert_eq!(index.resolve_input_address(&input).unwrap().as_str(), "A");

        let missing = TxInput {
            prev_txid: TxId([9; 32]),
            prev_vout: 0,
        };
        assert_eq!(
            index.resolve_input_address(&missing),
            Err(ChainError::DanglingInputRef(missing.outpoint()))
        );
    }

    #[test]
    fn fee_arithmetic() {
        let txs = vec![
            coinbase(1, 0, &[("A", 50_000)]),
            spend(2, 10, &[(TxId([1; 32]), 0)], &[("B", 48_000), ("C", 1_000)]),
        ];
        let index = build_index(txs).unwrap();
        assert_eq!(index.transaction_fee(&TxId([2; 32])).unwrap(), 1_000);
        assert_eq!(
            index.transaction_fee(&TxId([1; 32])),
            Err(ChainError::CoinbaseHasNoFee(TxId([1; 32])))
        );
    }

    #[test]
    fn zero_fee_transaction_is_valid() {
        let txs = vec![
            coinbase(1, 0, &[("A", 50_000)]),
            spend(2, 10, &[(TxId([1; 32]), 0)], &[("B", 50_000)]),
        ];
        let index = build_index(txs).unwrap();
        assert_eq!(index.transaction_fee(&TxId([2; 32])).unwrap(), 0);
    }

    #[test]
    fn t1_tx4_fee_is_one_thousand() {
        let (txs, truth) = reference_chain_t1();
        let index = build_index(txs).unwrap();
        let withdrawal = truth.cases[0].withdrawal_txids[0];
        assert_eq!(index.transaction_fee(&withdrawal).unwrap(), 1_000);
    }

    #[test]
    fn dangling_input_rejected() {
        let txs = vec![spend(2, 10, &[(TxId([7; 32]), 0)], &[("B", 1_000)])];
        assert_eq!(build_index(txs).unwrap_err(), ChainError::DanglingInputRef(OutputRef::new(TxId([7; 32]), 0)));

        // Out-of-range vout on an existing transaction is equally dangling.
        let txs = vec![
            coinbase(1, 0, &[("A", 10_000)]),
            spend(2, 10, &[(TxId([1; 32]), 3)], &[("B", 1_000)]),
        ];
        assert_eq!(build_index(txs).unwrap_err(), ChainError::DanglingInputRef(OutputRef::new(TxId([1; 32]), 3)));
    }

    #[test]
    fn double_spend_rejected() {
        let txs = vec![
            coinbase(1, 0, &[("A", 10_000)]),
            spend(2, 10, &[(TxId([1; 32]), 0)], &[("B", 9_000)]),
            spend(3, 20, &[(TxId([1; 32]), 0)], &[("C", 9_000)]),
        ];
        let err = build_index(txs).unwrap_err();
        assert!(matches!(err, ChainError::DoubleSpend { .. }), "{err}");
    }

    #[test]
    fn duplicate_txid_rejected() {
        let txs = vec![
            coinbase(1, 0, &[("A", 10_000)]),
            coinbase(1, 5, &[("B", 10_000)]),
        ];
        assert_eq!(build_index(txs).unwrap_err(), ChainError::DuplicateTxid(TxId([1; 32])));
    }

    #[test]
    fn conservation_violation_rejected() {
        let txs = vec![
            coinbase(1, 0, &[("A", 10_000)]),
            spend(2, 10, &[(TxId([1; 32]), 0)], &[("B", 10_001)]),
        ];
        assert!(matches!(
            build_index(txs),
            Err(ChainError::NegativeFee { .. })
        ));
    }

    #[test]
    fn structural_invariants_enforced() {
        let mut bad_coinbase = coinbase(1, 0, &[("A", 10_000)]);
        bad_coinbase.inputs.push(TxInput {
            prev_txid: TxId([0; 32]),
            prev_vout: 0,
        });
        assert_eq!(build_index(vec![bad_coinbase]).unwrap_err(), ChainError::CoinbaseWithInputs(TxId([1; 32])));

        let no_inputs = Transaction {
            txid: TxId([2; 32]),
            timestamp: 0,
            is_coinbase: false,
            inputs: vec![],
            outputs: vec![TxOutput {
                address: "A".into(),
                value: 1,
            }],
        };
        assert_eq!(build_index(vec![no_inputs]).unwrap_err(), ChainError::MissingInputs(TxId([2; 32])));

        assert_eq!(build_index(vec![coinbase(3, 0, &[("A", 0)])]).unwrap_err(), ChainError::ZeroValueOutput(OutputRef::new(TxId([3; 32]), 0)));
        assert_eq!(build_index(vec![coinbase(4, 0, &[("", 5)])]).unwrap_err(), ChainError::EmptyAddress(OutputRef::new(TxId([4; 32]), 0)));
    }

    #[test]
    fn shuffled_rebuild_yields_identical_index() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        let (txs, _) = reference_chain_t1();
        let base = build_index(txs.clone()).unwrap();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        for _ in 0..8 {
            let mut shuffled = txs.clone();
            shuffled.shuffle(&mut rng);
            let rebuilt = build_index(shuffled).unwrap();
            assert_eq!(rebuilt.transactions(), base.transactions());
            for addr in base.addresses() {
                assert_eq!(rebuilt.input_use_count(addr), base.input_use_count(addr));
                assert_eq!(rebuilt.input_incidence(addr), base.input_incidence(addr));
                assert_eq!(rebuilt.output_incidence(addr), base.output_incidence(addr));
            }
            for tx in base.transactions() {
                for vout in 0..tx.outputs.len() as u32 {
                    let r = tx.output_ref(vout);
                    assert_eq!(
                        rebuilt.spender_of(&r).map(|t| t.txid),
                        base.spender_of(&r).map(|t| t.txid)
                    );
                }
            }
        }
    }

    #[test]
    fn span_slicing_uses_inclusive_bounds() {
        let txs = vec![
            coinbase(1, 100, &[("A", 1_000)]),
            coinbase(2, 200, &[("B", 1_000)]),
            coinbase(3, 300, &[("C", 1_000)]),
        ];
        let index = build_index(txs).unwrap();
        assert_eq!(index.transactions_in(TimeSpan::new(100, 300)).len(), 3);
        assert_eq!(index.transactions_in(TimeSpan::new(101, 299)).len(), 1);
        assert_eq!(index.transactions_in(TimeSpan::new(301, 400)).len(), 0);
        assert_eq!(index.transactions_in(TimeSpan::new(0, 99)).len(), 0);
    }
}
