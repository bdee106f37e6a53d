//! False-positive filtering over candidate withdrawn outputs.
//!
//! Five criteria, each calibrated per mixer service and individually
//! disableable. A disabled criterion is an explicit skip: calling its
//! predicate directly is an error, and [`apply_filters`] leaves it out of the
//! conjunction instead of passing everything through it.
//!
//! - c1: the candidate's value cannot exceed the deposited value minus the
//!   service's minimum mixing fee;
//! - c2: the candidate's transaction matches the service's withdrawal shape;
//! - c3: the candidate's transaction sits in a peeling chain — its (single)
//!   input was funded by a matching transaction, or one of its outputs is
//!   spent by one;
//! - c4: no input address of the candidate's transaction spends more than
//!   once over the entire chain;
//! - c5: the transaction fee equals the service's constant fee exactly.

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::chain::{ChainError, ChainIndex, OutputRef, Transaction};
use crate::taint::TaintResult;

/// Value bound used by criterion 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeeRule {
    Disabled,
    /// Minimum mixing fee as a fraction of the deposit, in basis points.
    PercentBp(u32),
    /// Minimum mixing fee as an absolute amount, in satoshis.
    FlatSat(u64),
}

impl FeeRule {
    /// Largest candidate value compatible with the deposit, or `None` when
    /// the rule is disabled or the fee exceeds the deposit.
    pub fn threshold(&self, deposit_value: u64) -> Option<u64> {
        match *self {
            FeeRule::Disabled => None,
            FeeRule::PercentBp(bp) => {
                let keep = 10_000u128.saturating_sub(bp as u128);
                Some((deposit_value as u128 * keep / 10_000) as u64)
            }
            FeeRule::FlatSat(flat) => deposit_value.checked_sub(flat),
        }
    }

    pub fn is_enabled(&self) -> bool {
        !matches!(self, FeeRule::Disabled)
    }
}

/// How many inputs or outputs a shape accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountRule {
    Exactly(u32),
    AtLeast(u32),
    Any,
}

impl CountRule {
    pub fn matches(&self, n: usize) -> bool {
        match *self {
            CountRule::Exactly(k) => n == k as usize,
            CountRule::AtLeast(k) => n >= k as usize,
            CountRule::Any => true,
        }
    }
}

/// Input/output shape of a transaction, as used by criteria 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapePattern {
    pub inputs: CountRule,
    pub outputs: CountRule,
}

impl ShapePattern {
    pub const ONE_TO_ONE: ShapePattern = ShapePattern {
        inputs: CountRule::Exactly(1),
        outputs: CountRule::Exactly(1),
    };
    pub const ONE_TO_TWO: ShapePattern = ShapePattern {
        inputs: CountRule::Exactly(1),
        outputs: CountRule::Exactly(2),
    };
    pub const ONE_TO_MANY: ShapePattern = ShapePattern {
        inputs: CountRule::Exactly(1),
        outputs: CountRule::AtLeast(2),
    };
    pub const ANY: ShapePattern = ShapePattern {
        inputs: CountRule::Any,
        outputs: CountRule::Any,
    };

    pub fn matches(&self, tx: &Transaction) -> bool {
        self.inputs.matches(tx.inputs.len()) && self.outputs.matches(tx.outputs.len())
    }

    /// The calibration keyword for this pattern, if it is one of the four
    /// named shapes.
    pub fn keyword(&self) -> Option<&'static str> {
        match *self {
            ShapePattern::ONE_TO_ONE => Some("one-to-one"),
            ShapePattern::ONE_TO_TWO => Some("one-to-two"),
            ShapePattern::ONE_TO_MANY => Some("one-to-many"),
            ShapePattern::ANY => Some("any"),
            _ => None,
        }
    }
}

impl fmt::Display for ShapePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.keyword() {
            Some(kw) => f.write_str(kw),
            None => write!(f, "{:?}x{:?}", self.inputs, self.outputs),
        }
    }
}

impl FromStr for ShapePattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one-to-one" => Ok(ShapePattern::ONE_TO_ONE),
            "one-to-two" => Ok(ShapePattern::ONE_TO_TWO),
            "one-to-many" => Ok(ShapePattern::ONE_TO_MANY),
            "any" => Ok(ShapePattern::ANY),
            _ => Err(format!(
                "unknown shape keyword `{s}` (expected one-to-one, one-to-two, one-to-many or any)"
            )),
        }
    }
}

/// Per-service criterion settings; `Disabled`/`None`/`false` turn a
/// criterion off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterCalibration {
    pub c1_fee: FeeRule,
    pub c2_shape: Option<ShapePattern>,
    pub c3_chain_shape: Option<ShapePattern>,
    pub c4_no_reuse: bool,
    pub c5_constant_fee: Option<u64>,
}

impl FilterCalibration {
    pub fn disabled() -> Self {
        FilterCalibration {
            c1_fee: FeeRule::Disabled,
            c2_shape: None,
            c3_chain_shape: None,
            c4_no_reuse: false,
            c5_constant_fee: None,
        }
    }

    /// The enabled criteria, in application order.
    pub fn applied_criteria(&self) -> Vec<Criterion> {
        let mut applied = Vec::new();
        if self.c1_fee.is_enabled() {
            applied.push(Criterion::C1Value);
        }
        if self.c2_shape.is_some() {
            applied.push(Criterion::C2Shape);
        }
        if self.c3_chain_shape.is_some() {
            applied.push(Criterion::C3ChainShape);
        }
        if self.c4_no_reuse {
            applied.push(Criterion::C4NoReuse);
        }
        if self.c5_constant_fee.is_some() {
            applied.push(Criterion::C5ConstantFee);
        }
        applied
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Criterion {
    C1Value,
    C2Shape,
    C3ChainShape,
    C4NoReuse,
    C5ConstantFee,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::C1Value,
        Criterion::C2Shape,
        Criterion::C3ChainShape,
        Criterion::C4NoReuse,
        Criterion::C5ConstantFee,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::C1Value => "c1",
            Criterion::C2Shape => "c2",
            Criterion::C3ChainShape => "c3",
            Criterion::C4NoReuse => "c4",
            Criterion::C5ConstantFee => "c5",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown criterion `{s}` (expected c1..c5)"))
    }
}

impl Serialize for Criterion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Criterion {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("criterion {0} is disabled by the calibration")]
    DisabledCriterion(Criterion),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

fn candidate_tx<'c>(
    chain: &'c ChainIndex,
    candidate: &OutputRef,
) -> Result<(u32, &'c Transaction), FilterError> {
    chain.output(candidate)?;
    let idx = chain.tx_idx(&candidate.txid).expect("output resolved");
    Ok((idx, chain.tx_at(idx)))
}

/// Candidate value at most the deposit minus the minimum mixing fee.
pub fn criterion1_value(
    chain: &ChainIndex,
    candidate: &OutputRef,
    deposit_value: u64,
    cal: &FilterCalibration,
) -> Result<bool, FilterError> {
    if !cal.c1_fee.is_enabled() {
        return Err(FilterError::DisabledCriterion(Criterion::C1Value));
    }
    let value = chain.output(candidate)?.value;
    Ok(match cal.c1_fee.threshold(deposit_value) {
        Some(threshold) => value <= threshold,
        None => false,
    })
}

/// Candidate's transaction matches the service's withdrawal shape.
pub fn criterion2_shape(
    chain: &ChainIndex,
    candidate: &OutputRef,
    cal: &FilterCalibration,
) -> Result<bool, FilterError> {
    let Some(pattern) = cal.c2_shape else {
        return Err(FilterError::DisabledCriterion(Criterion::C2Shape));
    };
    let (_, tx) = candidate_tx(chain, candidate)?;
    Ok(pattern.matches(tx))
}

/// Candidate's transaction neighbors a matching link: either the transaction
/// funding its single input matches, or a spender of one of its outputs does.
/// Transactions without exactly one input fail outright.
pub fn criterion3_chain_shape(
    chain: &ChainIndex,
    candidate: &OutputRef,
    cal: &FilterCalibration,
) -> Result<bool, FilterError> {
    let Some(pattern) = cal.c3_chain_shape else {
        return Err(FilterError::DisabledCriterion(Criterion::C3ChainShape));
    };
    let (idx, tx) = candidate_tx(chain, candidate)?;
    if tx.inputs.len() != 1 {
        return Ok(false);
    }
    let funder = chain.tx_by_id(&tx.inputs[0].prev_txid).expect("validated input");
    if pattern.matches(funder) {
        return Ok(true);
    }
    for vout in 0..tx.outputs.len() as u32 {
        if let Some(spender) = chain.spender_idx(idx, vout) {
            if pattern.matches(chain.tx_at(spender)) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Every input address of the candidate's transaction spends exactly once
/// over the entire chain. Vacuously true for coinbase candidates.
pub fn criterion4_no_reuse(
    chain: &ChainIndex,
    candidate: &OutputRef,
    cal: &FilterCalibration,
) -> Result<bool, FilterError> {
    if !cal.c4_no_reuse {
        return Err(FilterError::DisabledCriterion(Criterion::C4NoReuse));
    }
    let (idx, _) = candidate_tx(chain, candidate)?;
    Ok(chain
        .resolved_inputs_at(idx)
        .iter()
        .all(|&(addr, _)| chain.input_use_count(chain.addr_name(addr)) == 1))
}

/// Transaction fee equals the service's constant fee exactly; coinbase
/// candidates have no fee and fail.
pub fn criterion5_fee(
    chain: &ChainIndex,
    candidate: &OutputRef,
    cal: &FilterCalibration,
) -> Result<bool, FilterError> {
    let Some(expected) = cal.c5_constant_fee else {
        return Err(FilterError::DisabledCriterion(Criterion::C5ConstantFee));
    };
    let (idx, _) = candidate_tx(chain, candidate)?;
    Ok(chain.fee_at(idx) == Some(expected))
}

/// Result of filtering one taint result: the surviving outputs plus, for each
/// dropped one, the first enabled criterion that rejected it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub retained: TaintResult,
    pub dropped: Vec<(OutputRef, Criterion)>,
    pub applied: Vec<Criterion>,
}

/// Retain the outputs passing the conjunction of all enabled criteria. The
/// tainted address set and method tag carry through unchanged.
pub fn apply_filters(
    chain: &ChainIndex,
    result: &TaintResult,
    deposit_value: u64,
    cal: &FilterCalibration,
) -> Result<FilterOutcome, FilterError> {
    let mut retained = result.clone();
    retained.tainted_outputs.clear();
    let mut dropped = Vec::new();
    for candidate in &result.tainted_outputs {
        match first_failing(chain, candidate, deposit_value, cal)? {
            None => {
                retained.tainted_outputs.insert(*candidate);
            }
            Some(criterion) => dropped.push((*candidate, criterion)),
        }
    }
    Ok(FilterOutcome {
        retained,
        dropped,
        applied: cal.applied_criteria(),
    })
}

fn first_failing(
    chain: &ChainIndex,
    candidate: &OutputRef,
    deposit_value: u64,
    cal: &FilterCalibration,
) -> Result<Option<Criterion>, FilterError> {
    if cal.c1_fee.is_enabled() && !criterion1_value(chain, candidate, deposit_value, cal)? {
        return Ok(Some(Criterion::C1Value));
    }
    if cal.c2_shape.is_some() && !criterion2_shape(chain, candidate, cal)? {
        return Ok(Some(Criterion::C2Shape));
    }
    if cal.c3_chain_shape.is_some() && !criterion3_chain_shape(chain, candidate, cal)? {
        return Ok(Some(Criterion::C3ChainShape));
    }
    if cal.c4_no_reuse && !criterion4_no_reuse(chain, candidate, cal)? {
        return Ok(Some(Criterion::C4NoReuse));
    }
    if cal.c5_constant_fee.is_some() && !criterion5_fee(chain, candidate, cal)? {
        return Ok(Some(Criterion::C5ConstantFee));
    }
    Ok(None)
}
