//! Deterministic synthetic-chain generator: random background payment
//! traffic plus a configurable mixer whose deposit→withdrawal mapping is
//! returned as ground truth.
//!
//! The generator is a pure function of the scenario (including its RNG seed):
//! the same scenario always yields the same transaction list, byte for byte
//! after serialization. Mixer and background traffic live in disjoint address
//! namespaces, so taint can only flow between them through configured
//! deposits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chain::{Address, OutputRef, Transaction, TxId, TxInput, TxOutput, DAY_SECS};

/// Fee charged on user deposit transactions.
const DEPOSIT_FEE: u64 = 1_500;
/// Fee on mixer-internal transactions (sweeps, staging links, trailing link).
const INTERNAL_FEE: u64 = 1_000;
/// Seconds between a deposit confirming and the mixer sweeping the receiver.
const SWEEP_DELAY: i64 = 600;
/// Seconds between a staging peel link and its one-to-one payout.
const STAGING_DELAY: i64 = 300;
/// Seconds after the last payout before the trailing internal peel link.
const TRAILING_DELAY: i64 = 600;
/// Number of funded background wallets.
const BG_WALLETS: u64 = 8;
/// Initial balance per background wallet, satoshis.
const BG_FUND: u64 = 1_000_000_000_000;
/// Background transaction fee bounds, satoshis.
const BG_FEE: (u64, u64) = (500, 2_000);

/// One scheduled user deposit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepositSpec {
    pub value: u64,
    pub time: i64,
}

/// Whether deposited funds and withdrawal funds share one internal pool.
///
/// With disjoint pools there is no directed value path from receiver
/// addresses to withdrawal outputs; forward tainting from the deposit side
/// cannot reach the payouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolTopology {
    SinglePool,
    DisjointPools,
}

/// How the mixer's cut is computed from the deposited value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeePolicy {
    /// Percentage fee in basis points (2% = 200).
    PercentBp(u32),
    /// Flat fee in satoshis.
    FlatSat(u64),
}

impl FeePolicy {
    /// Total paid out for a deposit, or `None` if the fee consumes it.
    pub fn payout(&self, deposit: u64) -> Option<u64> {
        match *self {
            FeePolicy::PercentBp(bp) => {
                if bp > 10_000 {
                    return None;
                }
                let p = (deposit as u128) * ((10_000 - bp) as u128) / 10_000;
                (p > 0).then_some(p as u64)
            }
            FeePolicy::FlatSat(f) => deposit.checked_sub(f).filter(|&v| v > 0),
        }
    }
}

/// Transaction pattern used to deliver payouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoutShape {
    /// Peel a staging output off the pool, then pay the user with a
    /// 1-input/1-output transaction.
    OneToOne,
    /// Classic peeling chain: each payout is a 1-input/2-output link paying
    /// the user and continuing the pool.
    OneToTwoPeel,
    /// Peeling chain splitting each payout into `parts` outputs plus the
    /// pool continuation.
    OneToManyPeel { parts: u32 },
}

/// Full configuration of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixerScenario {
    /// RNG seed; the emitted chain is a pure function of the scenario.
    pub seed: u64,
    pub background_tx_count: u32,
    /// Background traffic and deposits are scheduled inside `[0, duration]`.
    pub duration_secs: i64,
    pub pool_topology: PoolTopology,
    pub fee_policy: FeePolicy,
    pub withdrawal_shape: PayoutShape,
    /// Exact network fee on every withdrawal transaction, satoshis.
    pub network_fee_sat: u64,
    /// Uniform random payout delay bounds after the deposit, seconds.
    /// Keep the minimum above the 600-second sweep delay if forward taint
    /// from receivers is expected to reach the payouts.
    pub payout_delay_secs: (i64, i64),
    /// Use a fresh pool address per peel link instead of one recurring
    /// address.
    pub never_reuse: bool,
    pub deposits: Vec<DepositSpec>,
    /// Hold deposits idle: receiver outputs are never swept into a pool.
    pub idle_deposits: bool,
    /// Share of background transactions spending two inputs, basis points.
    pub background_multi_input_bp: u32,
    /// Initial funding of the withdrawal pool, satoshis.
    pub pool_fund_sat: u64,
}

impl Default for MixerScenario {
    fn default() -> Self {
        MixerScenario {
            seed: 0,
            background_tx_count: 0,
            duration_secs: DAY_SECS,
            pool_topology: PoolTopology::SinglePool,
            fee_policy: FeePolicy::PercentBp(100),
            withdrawal_shape: PayoutShape::OneToTwoPeel,
            network_fee_sat: 10_000,
            payout_delay_secs: (3_600, 7_200),
            never_reuse: true,
            deposits: Vec::new(),
            idle_deposits: false,
            background_multi_input_bp: 0,
            pool_fund_sat: 100_000_000,
        }
    }
}

/// Known mapping for one deposit: who received it and where it was paid out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseTruth {
    pub receiver_addresses: Vec<Address>,
    pub deposit_txids: Vec<TxId>,
    /// Deposit outputs paid to the mixer (user change excluded).
    pub deposit_outputs: Vec<OutputRef>,
    pub withdrawal_txids: Vec<TxId>,
    /// The user's withdrawn outputs — the targets a method must taint.
    pub target_outputs: Vec<OutputRef>,
    pub destination_addresses: Vec<Address>,
}

/// Ground truth for a simulated chain, one entry per scheduled deposit, in
/// schedule order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub cases: Vec<CaseTruth>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
}

fn infeasible(msg: impl Into<String>) -> SimError {
    SimError::InfeasibleScenario(msg.into())
}

struct Emitter {
    seed: u64,
    seq: u64,
    txs: Vec<Transaction>,
}

impl Emitter {
    fn new(seed: u64) -> Self {
        Emitter {
            seed,
            seq: 0,
            txs: Vec::new(),
        }
    }

    fn next_txid(&mut self) -> TxId {
        let digest = Sha256::digest(format!("mixtaint/sim/{}/{}", self.seed, self.seq));
        self.seq += 1;
        TxId(digest.into())
    }

    fn emit(
        &mut self,
        timestamp: i64,
        is_coinbase: bool,
        inputs: Vec<TxInput>,
        outputs: Vec<(Address, u64)>,
    ) -> TxId {
        let txid = self.next_txid();
        self.txs.push(Transaction {
            txid,
            timestamp,
            is_coinbase,
            inputs,
            outputs: outputs
                .into_iter()
                .map(|(address, value)| TxOutput { address, value })
                .collect(),
        });
        txid
    }

    fn coinbase(&mut self, timestamp: i64, address: Address, value: u64) -> OutputRef {
        let txid = self.emit(timestamp, true, vec![], vec![(address, value)]);
        OutputRef::new(txid, 0)
    }
}

fn input(outpoint: OutputRef) -> TxInput {
    TxInput {
        prev_txid: outpoint.txid,
        prev_vout: outpoint.vout,
    }
}

/// State of the withdrawal pool's peeling chain.
struct PoolHead {
    addr: Address,
    outpoint: OutputRef,
    value: u64,
    last_time: i64,
}

struct PoolNamer {
    never_reuse: bool,
    seq: u32,
}

impl PoolNamer {
    fn next(&mut self) -> Address {
        if self.never_reuse {
            let a = Address::new(format!("pool{:04}", self.seq));
            self.seq += 1;
            a
        } else {
            Address::from("pool")
        }
    }
}

fn validate(s: &MixerScenario) -> Result<(), SimError> {
    if s.duration_secs < 1 {
        return Err(infeasible("duration must be at least one second"));
    }
    if s.background_tx_count > 0 && s.duration_secs < 2 {
        return Err(infeasible("background traffic needs duration of at least 2 seconds"));
    }
    let (dmin, dmax) = s.payout_delay_secs;
    if dmin < 1 || dmin > dmax {
        return Err(infeasible("payout delay bounds must satisfy 1 <= min <= max"));
    }
    if s.network_fee_sat == 0 {
        return Err(infeasible("network fee must be positive"));
    }
    if s.pool_fund_sat == 0 {
        return Err(infeasible("pool funding must be positive"));
    }
    if s.background_multi_input_bp > 10_000 {
        return Err(infeasible("multi-input share exceeds 10000 basis points"));
    }
    if let PayoutShape::OneToManyPeel { parts } = s.withdrawal_shape {
        if parts == 0 {
            return Err(infeasible("one-to-many payout needs at least one part"));
        }
    }

    let mut pool_need: u128 = 0;
    for (i, d) in s.deposits.iter().enumerate() {
        if d.value < 2_000 {
            return Err(infeasible(format!("deposit {i}: value below 2000 sat")));
        }
        if d.time < 0 || d.time + dmax + 2_000 > s.duration_secs {
            return Err(infeasible(format!(
                "deposit {i}: not schedulable inside the simulated duration"
            )));
        }
        let payout = s
            .fee_policy
            .payout(d.value)
            .ok_or_else(|| infeasible(format!("deposit {i}: mixing fee consumes the deposit")))?;
        let parts = match s.withdrawal_shape {
            PayoutShape::OneToManyPeel { parts } => parts as u64,
            _ => 1,
        };
        if payout < parts {
            return Err(infeasible(format!(
                "deposit {i}: payout {payout} sat cannot be split into {parts} parts"
            )));
        }
        pool_need += (payout + s.network_fee_sat) as u128;
        if matches!(s.withdrawal_shape, PayoutShape::OneToOne) {
            pool_need += INTERNAL_FEE as u128;
        }
    }
    if !s.deposits.is_empty() {
        // Trailing internal link: one small peeled output, its fee, and a
        // positive final pool remainder.
        pool_need += (2 * INTERNAL_FEE + 1) as u128;
        if (s.pool_fund_sat as u128) < pool_need {
            return Err(infeasible(format!(
                "pool funding {} sat cannot cover {} sat of scheduled payouts",
                s.pool_fund_sat, pool_need
            )));
        }
    }
    Ok(())
}

/// Generate a chain and its ground truth. Deterministic for a given scenario.
pub fn simulate(scenario: &MixerScenario) -> Result<(Vec<Transaction>, GroundTruth), SimError> {
    validate(scenario)?;

    let mut rng = ChaCha20Rng::seed_from_u64(scenario.seed);
    let mut em = Emitter::new(scenario.seed);
    let n_dep = scenario.deposits.len();

    // Draw all mixer randomness up front in deposit order, so the stream
    // consumed by background generation is independent of event interleaving.
    let extras: Vec<u64> = (0..n_dep).map(|_| rng.random_range(5_000..=50_000)).collect();
    let delays: Vec<i64> = (0..n_dep)
        .map(|_| rng.random_range(scenario.payout_delay_secs.0..=scenario.payout_delay_secs.1))
        .collect();

    // Funding coinbases at t=0.
    let mut namer = PoolNamer {
        never_reuse: scenario.never_reuse,
        seq: 0,
    };
    let mut pool: Option<PoolHead> = if n_dep > 0 {
        let addr = namer.next();
        let outpoint = em.coinbase(0, addr.clone(), scenario.pool_fund_sat);
        Some(PoolHead {
            addr,
            outpoint,
            value: scenario.pool_fund_sat,
            last_time: 0,
        })
    } else {
        None
    };
    let mut user_utxos = Vec::with_capacity(n_dep);
    for (i, d) in scenario.deposits.iter().enumerate() {
        let fund = d.value + DEPOSIT_FEE + extras[i];
        user_utxos.push(em.coinbase(0, Address::new(format!("user{i:02}")), fund));
    }
    let mut bg_utxos: Vec<(OutputRef, u64)> = Vec::new();
    if scenario.background_tx_count > 0 {
        for k in 0..BG_WALLETS {
            let outpoint = em.coinbase(0, Address::new(format!("bgw{k}")), BG_FUND);
            bg_utxos.push((outpoint, BG_FUND));
        }
    }

    // Mixer events in chronological order. Kind breaks ties so a deposit
    // precedes a sweep precedes a withdrawal at equal times.
    #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
    enum Kind {
        Deposit,
        Sweep,
        Withdraw,
    }
    let mut events: Vec<(i64, Kind, usize)> = Vec::new();
    for (i, d) in scenario.deposits.iter().enumerate() {
        events.push((d.time, Kind::Deposit, i));
        if !scenario.idle_deposits {
            events.push((d.time + SWEEP_DELAY, Kind::Sweep, i));
        }
        events.push((d.time + delays[i], Kind::Withdraw, i));
    }
    events.sort();

    let mut receiver_utxos: Vec<Option<(OutputRef, u64)>> = vec![None; n_dep];
    let mut truth = GroundTruth {
        cases: scenario
            .deposits
            .iter()
            .map(|_| CaseTruth {
                receiver_addresses: Vec::new(),
                deposit_txids: Vec::new(),
                deposit_outputs: Vec::new(),
                withdrawal_txids: Vec::new(),
                target_outputs: Vec::new(),
                destination_addresses: Vec::new(),
            })
            .collect(),
    };

    for (time, kind, i) in events {
        match kind {
            Kind::Deposit => {
                let d = scenario.deposits[i];
                let receiver = Address::new(format!("recv{i:02}"));
                let change = Address::new(format!("change{i:02}"));
                let txid = em.emit(
                    time,
                    false,
                    vec![input(user_utxos[i])],
                    vec![(receiver.clone(), d.value), (change, extras[i])],
                );
                receiver_utxos[i] = Some((OutputRef::new(txid, 0), d.value));
                let case = &mut truth.cases[i];
                case.receiver_addresses.push(receiver);
                case.deposit_txids.push(txid);
                case.deposit_outputs.push(OutputRef::new(txid, 0));
            }
            Kind::Sweep => {
                let (outpoint, value) = receiver_utxos[i].expect("sweep after deposit");
                let target = match scenario.pool_topology {
                    PoolTopology::SinglePool => pool.as_ref().expect("pool exists").addr.clone(),
                    PoolTopology::DisjointPools => Address::from("sink"),
                };
                em.emit(
                    time,
                    false,
                    vec![input(outpoint)],
                    vec![(target, value - INTERNAL_FEE)],
                );
            }
            Kind::Withdraw => {
                let payout = scenario
                    .fee_policy
                    .payout(scenario.deposits[i].value)
                    .expect("validated");
                let head = pool.as_mut().expect("pool exists");
                let time = time.max(head.last_time + 1);
                let case = &mut truth.cases[i];
                match scenario.withdrawal_shape {
                    PayoutShape::OneToTwoPeel => {
                        let dest = Address::new(format!("dest{i:02}"));
                        let next = namer.next();
                        let change = head.value - payout - scenario.network_fee_sat;
                        let txid = em.emit(
                            time,
                            false,
                            vec![input(head.outpoint)],
                            vec![(dest.clone(), payout), (next.clone(), change)],
                        );
                        case.withdrawal_txids.push(txid);
                        case.target_outputs.push(OutputRef::new(txid, 0));
                        case.destination_addresses.push(dest);
                        *head = PoolHead {
                            addr: next,
                            outpoint: OutputRef::new(txid, 1),
                            value: change,
                            last_time: time,
                        };
                    }
                    PayoutShape::OneToManyPeel { parts } => {
                        let k = parts as u64;
                        let base = payout / k;
                        let rem = payout % k;
                        let next = namer.next();
                        let change = head.value - payout - scenario.network_fee_sat;
                        let mut outputs = Vec::with_capacity(parts as usize + 1);
                        for j in 0..parts {
                            let dest = Address::new(format!("dest{i:02}_{j}"));
                            let v = if j == 0 { base + rem } else { base };
                            outputs.push((dest.clone(), v));
                            case.destination_addresses.push(dest);
                        }
                        outputs.push((next.clone(), change));
                        let txid = em.emit(time, false, vec![input(head.outpoint)], outputs);
                        case.withdrawal_txids.push(txid);
                        for j in 0..parts {
                            case.target_outputs.push(OutputRef::new(txid, j));
                        }
                        *head = PoolHead {
                            addr: next,
                            outpoint: OutputRef::new(txid, parts),
                            value: change,
                            last_time: time,
                        };
                    }
                    PayoutShape::OneToOne => {
                        let staging = Address::new(format!("stage{i:02}"));
                        let staged = payout + scenario.network_fee_sat;
                        let next = namer.next();
                        let change = head.value - staged - INTERNAL_FEE;
                        let link = em.emit(
                            time,
                            false,
                            vec![input(head.outpoint)],
                            vec![(staging, staged), (next.clone(), change)],
                        );
                        let dest = Address::new(format!("dest{i:02}"));
                        let txid = em.emit(
                            time + STAGING_DELAY,
                            false,
                            vec![input(OutputRef::new(link, 0))],
                            vec![(dest.clone(), payout)],
                        );
                        case.withdrawal_txids.push(txid);
                        case.target_outputs.push(OutputRef::new(txid, 0));
                        case.destination_addresses.push(dest);
                        *head = PoolHead {
                            addr: next,
                            outpoint: OutputRef::new(link, 1),
                            value: change,
                            last_time: time,
                        };
                    }
                }
            }
        }
    }

    // Trailing internal peel link, so the last payout still has a successor
    // in the withdrawal chain.
    if n_dep > 0 {
        let head = pool.as_mut().expect("pool exists");
        let next = namer.next();
        let time = head.last_time + TRAILING_DELAY;
        let change = head.value - 2 * INTERNAL_FEE;
        let txid = em.emit(
            time,
            false,
            vec![input(head.outpoint)],
            vec![(Address::from("tail"), INTERNAL_FEE), (next.clone(), change)],
        );
        *head = PoolHead {
            addr: next,
            outpoint: OutputRef::new(txid, 1),
            value: change,
            last_time: time,
        };
    }

    // Background traffic: independent wallets splitting value at random
    // times, optionally consolidating two inputs to exercise input-sharing.
    if scenario.background_tx_count > 0 {
        let mut times: Vec<i64> = (0..scenario.background_tx_count)
            .map(|_| rng.random_range(1..scenario.duration_secs))
            .collect();
        times.sort_unstable();
        let mut bg_addr_seq: u64 = 0;
        let fresh = |seq: &mut u64| {
            let a = Address::new(format!("bg{:06}", *seq));
            *seq += 1;
            a
        };
        for time in times {
            let fee = rng.random_range(BG_FEE.0..=BG_FEE.1);
            let (first, v1) = pick_spendable(&mut rng, &mut bg_utxos, fee + 2)?;
            let mut inputs = vec![input(first)];
            let mut total = v1;
            if !bg_utxos.is_empty()
                && scenario.background_multi_input_bp > 0
                && rng.random_range(0..10_000) < scenario.background_multi_input_bp
            {
                let j = rng.random_range(0..bg_utxos.len());
                let (outpoint, v2) = bg_utxos.swap_remove(j);
                inputs.push(input(outpoint));
                total += v2;
            }
            let spendable = total - fee;
            let a = rng.random_range(1..spendable);
            let outs = [(fresh(&mut bg_addr_seq), a), (fresh(&mut bg_addr_seq), spendable - a)];
            let txid = em.emit(time, false, inputs, outs.to_vec());
            bg_utxos.push((OutputRef::new(txid, 0), a));
            bg_utxos.push((OutputRef::new(txid, 1), spendable - a));
        }
    }

    Ok((em.txs, truth))
}

/// Pick a random background UTXO worth at least `min` satoshis; smaller picks
/// are dropped from the spendable set (left unspent on chain).
fn pick_spendable(
    rng: &mut ChaCha20Rng,
    utxos: &mut Vec<(OutputRef, u64)>,
    min: u64,
) -> Result<(OutputRef, u64), SimError> {
    loop {
        if utxos.is_empty() {
            return Err(infeasible("background wallet funds exhausted"));
        }
        let i = rng.random_range(0..utxos.len());
        if utxos[i].1 >= min {
            return Ok(utxos.swap_remove(i));
        }
        utxos.swap_remove(i);
    }
}

fn t1_txid(label: &str) -> TxId {
    TxId(Sha256::digest(format!("mixtaint/t1/{label}")).into())
}

/// The fixed six-transaction reference chain used across tests and docs.
///
/// A user funds a deposit of 50,000 sat to the mixer receiver `M_recv`
/// (change back to `A2`); the mixer pays 48,000 sat to destination `B` out of
/// unrelated pool funds before the deposit is swept back into the pool
/// address `C`. Transaction tainting cannot cross the pool gap; address
/// tainting can.
pub fn reference_chain_t1() -> (Vec<Transaction>, GroundTruth) {
    let tx = |label: &str,
              time: i64,
              is_coinbase: bool,
              inputs: Vec<TxInput>,
              outputs: Vec<(&str, u64)>| Transaction {
        txid: t1_txid(label),
        timestamp: time,
        is_coinbase,
        inputs,
        outputs: outputs
            .into_iter()
            .map(|(a, value)| TxOutput {
                address: a.into(),
                value,
            })
            .collect(),
    };
    let spend = |label: &str, vout: u32| {
        vec![TxInput {
            prev_txid: t1_txid(label),
            prev_vout: vout,
        }]
    };

    let txs = vec![
        tx("tx0", 0, true, vec![], vec![("A", 100_000)]),
        tx("tx2", 0, true, vec![], vec![("C", 200_000)]),
        tx("tx3", 50, false, spend("tx2", 0), vec![("D", 150_000), ("C2", 49_000)]),
        tx("tx1", 100, false, spend("tx0", 0), vec![("M_recv", 50_000), ("A2", 49_000)]),
        tx("tx4", 200, false, spend("tx3", 0), vec![("B", 48_000), ("D2", 101_000)]),
        tx("tx5", 300, false, spend("tx1", 0), vec![("C", 49_000)]),
    ];
    let truth = GroundTruth {
        cases: vec![CaseTruth {
            receiver_addresses: vec!["M_recv".into()],
            deposit_txids: vec![t1_txid("tx1")],
            deposit_outputs: vec![OutputRef::new(t1_txid("tx1"), 0)],
            withdrawal_txids: vec![t1_txid("tx4")],
            target_outputs: vec![OutputRef::new(t1_txid("tx4"), 0)],
            destination_addresses: vec!["B".into()],
        }],
    };
    (txs, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_index, ChainIndex};
    use std::collections::HashSet;

    fn basic_scenario(seed: u64) -> MixerScenario {
        MixerScenario {
            seed,
            background_tx_count: 200,
            duration_secs: DAY_SECS,
            deposits: vec![
                DepositSpec {
                    value: 50_000,
                    time: 3_600,
                },
                DepositSpec {
                    value: 120_000,
                    time: 10_000,
                },
                DepositSpec {
                    value: 80_000,
                    time: 30_000,
                },
            ],
            ..MixerScenario::default()
        }
    }

    /// Outputs reachable from `start` by following spender edges.
    fn forward_reachable(index: &ChainIndex, start: &[OutputRef]) -> HashSet<OutputRef> {
        let mut seen: HashSet<OutputRef> = start.iter().copied().collect();
        let mut frontier: Vec<OutputRef> = start.to_vec();
        while let Some(out) = frontier.pop() {
            if let Some(spender) = index.spender_of(&out) {
                for vout in 0..spender.outputs.len() as u32 {
                    let next = spender.output_ref(vout);
                    if seen.insert(next) {
                        frontier.push(next);
                    }
                }
            }
        }
        seen
    }

    #[test]
    fn t1_is_valid_and_matches_truth() {
        let (txs, truth) = reference_chain_t1();
        assert_eq!(txs.len(), 6);
        let index = build_index(txs).unwrap();
        let case = &truth.cases[0];
        assert!(index.contains_output(&case.deposit_outputs[0]));
        assert!(index.contains_output(&case.target_outputs[0]));
        assert_eq!(
            index.output(&case.target_outputs[0]).unwrap().address,
            case.destination_addresses[0]
        );
        assert_eq!(index.output(&case.deposit_outputs[0]).unwrap().value, 50_000);
    }

    #[test]
    fn same_seed_reproduces_identical_chain() {
        let scenario = basic_scenario(42);
        let (a, ta) = simulate(&scenario).unwrap();
        let (b, tb) = simulate(&scenario).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);

        let (c, _) = simulate(&basic_scenario(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn emitted_chains_validate_across_seeds() {
        for seed in 0..10 {
            let (txs, truth) = simulate(&basic_scenario(seed)).unwrap();
            let index = build_index(txs).unwrap();
            for case in &truth.cases {
                for out in case.deposit_outputs.iter().chain(&case.target_outputs) {
                    assert!(index.contains_output(out), "seed {seed}: missing {out}");
                }
            }
        }
    }

    #[test]
    fn withdrawal_fees_and_values_honor_the_configuration() {
        let scenario = MixerScenario {
            fee_policy: FeePolicy::PercentBp(200),
            network_fee_sat: 50_000,
            pool_fund_sat: 10_000_000,
            deposits: vec![
                DepositSpec {
                    value: 400_000,
                    time: 3_600,
                },
                DepositSpec {
                    value: 250_000,
                    time: 7_200,
                },
            ],
            ..MixerScenario::default()
        };
        let (txs, truth) = simulate(&scenario).unwrap();
        let index = build_index(txs).unwrap();
        for (case, deposit) in truth.cases.iter().zip(&scenario.deposits) {
            let payout = scenario.fee_policy.payout(deposit.value).unwrap();
            for txid in &case.withdrawal_txids {
                assert_eq!(index.transaction_fee(txid).unwrap(), 50_000);
            }
            let total: u64 = case
                .target_outputs
                .iter()
                .map(|o| index.output(o).unwrap().value)
                .sum();
            assert_eq!(total, payout);
            // Fresh pool addresses spend exactly once each.
            for txid in &case.withdrawal_txids {
                let tx = index.tx_by_id(txid).unwrap();
                for inp in &tx.inputs {
                    let addr = index.resolve_input_address(inp).unwrap();
                    assert_eq!(index.input_use_count(addr), 1, "{addr}");
                }
            }
        }
    }

    #[test]
    fn minimal_single_deposit_scenario_mirrors_the_reference_chain() {
        let scenario = MixerScenario {
            payout_delay_secs: (3_600, 3_600),
            deposits: vec![DepositSpec {
                value: 50_000,
                time: 3_600,
            }],
            ..MixerScenario::default()
        };
        let (txs, truth) = simulate(&scenario).unwrap();
        assert_eq!(txs.len(), 6);

        let shape = |t: &Transaction| (t.is_coinbase, t.inputs.len(), t.outputs.len());
        let mut shapes: Vec<_> = txs.iter().map(shape).collect();
        shapes.sort();
        let (t1, _) = reference_chain_t1();
        let mut expected: Vec<_> = t1.iter().map(shape).collect();
        expected.sort();
        assert_eq!(shapes, expected);

        // Spend-graph reachability from the deposit never hits the payout:
        // the two sides connect only through the shared pool address.
        let index = build_index(txs).unwrap();
        let case = &truth.cases[0];
        let reached = forward_reachable(&index, &case.deposit_outputs);
        assert!(!reached.contains(&case.target_outputs[0]));

        let withdrawal = index.tx_by_id(&case.withdrawal_txids[0]).unwrap();
        let pool_addr = index.resolve_input_address(&withdrawal.inputs[0]).unwrap();
        let sweep_pays_pool = index
            .transactions()
            .iter()
            .filter(|t| !t.is_coinbase)
            .any(|t| {
                t.outputs.iter().any(|o| &o.address == pool_addr)
                    && t.inputs.iter().any(|i| {
                        case.receiver_addresses
                            .contains(index.resolve_input_address(i).unwrap())
                    })
            });
        assert!(sweep_pays_pool, "sweep must land on the payout pool's address");
    }

    #[test]
    fn disjoint_idle_pools_leave_no_path_from_receiver_to_payout() {
        let scenario = MixerScenario {
            pool_topology: PoolTopology::DisjointPools,
            idle_deposits: true,
            background_tx_count: 100,
            deposits: vec![
                DepositSpec {
                    value: 60_000,
                    time: 3_600,
                },
                DepositSpec {
                    value: 90_000,
                    time: 9_000,
                },
            ],
            ..MixerScenario::default()
        };
        let (txs, truth) = simulate(&scenario).unwrap();
        let index = build_index(txs).unwrap();
        let seeds: Vec<OutputRef> = truth
            .cases
            .iter()
            .flat_map(|c| c.deposit_outputs.clone())
            .collect();
        let reached = forward_reachable(&index, &seeds);
        for case in &truth.cases {
            for target in &case.target_outputs {
                assert!(!reached.contains(target));
            }
            // Idle receivers are never spent at all.
            for addr in &case.receiver_addresses {
                assert_eq!(index.input_use_count(addr), 0);
            }
        }
    }

    #[test]
    fn one_to_many_splits_the_payout_into_parts() {
        let scenario = MixerScenario {
            withdrawal_shape: PayoutShape::OneToManyPeel { parts: 3 },
            deposits: vec![DepositSpec {
                value: 100_000,
                time: 3_600,
            }],
            ..MixerScenario::default()
        };
        let (txs, truth) = simulate(&scenario).unwrap();
        let index = build_index(txs).unwrap();
        let case = &truth.cases[0];
        assert_eq!(case.target_outputs.len(), 3);
        let tx = index.tx_by_id(&case.withdrawal_txids[0]).unwrap();
        assert_eq!(tx.inputs.len(), 1);
        assert_eq!(tx.outputs.len(), 4);
        let payout = scenario.fee_policy.payout(100_000).unwrap();
        let total: u64 = case
            .target_outputs
            .iter()
            .map(|o| index.output(o).unwrap().value)
            .sum();
        assert_eq!(total, payout);
        assert!(case.target_outputs.iter().all(|o| index.output(o).unwrap().value > 0));
    }

    #[test]
    fn one_to_one_pays_through_a_staging_link() {
        let scenario = MixerScenario {
            withdrawal_shape: PayoutShape::OneToOne,
            deposits: vec![DepositSpec {
                value: 70_000,
                time: 3_600,
            }],
            ..MixerScenario::default()
        };
        let (txs, truth) = simulate(&scenario).unwrap();
        let index = build_index(txs).unwrap();
        let case = &truth.cases[0];
        let w = index.tx_by_id(&case.withdrawal_txids[0]).unwrap();
        assert_eq!((w.inputs.len(), w.outputs.len()), (1, 1));
        assert_eq!(
            index.transaction_fee(&case.withdrawal_txids[0]).unwrap(),
            scenario.network_fee_sat
        );
        let funder = index.tx_by_id(&w.inputs[0].prev_txid).unwrap();
        assert_eq!((funder.inputs.len(), funder.outputs.len()), (1, 2));
    }

    #[test]
    fn background_traffic_stays_off_mixer_addresses() {
        let scenario = MixerScenario {
            background_tx_count: 300,
            background_multi_input_bp: 10_000,
            deposits: vec![DepositSpec {
                value: 50_000,
                time: 3_600,
            }],
            ..MixerScenario::default()
        };
        let (txs, _) = simulate(&scenario).unwrap();
        let index = build_index(txs).unwrap();
        let mut saw_multi_input = false;
        for tx in index.transactions() {
            let bg_out = tx.outputs.iter().any(|o| o.address.as_str().starts_with("bg"));
            if bg_out && !tx.is_coinbase {
                assert!(tx.outputs.iter().all(|o| o.address.as_str().starts_with("bg")));
                for inp in &tx.inputs {
                    let addr = index.resolve_input_address(inp).unwrap();
                    assert!(addr.as_str().starts_with("bg"), "{addr}");
                }
                saw_multi_input |= tx.inputs.len() == 2;
            }
        }
        assert!(saw_multi_input, "multi-input share of 100% must produce 2-input txs");

        let single = MixerScenario {
            background_multi_input_bp: 0,
            ..scenario
        };
        let (txs, _) = simulate(&single).unwrap();
        assert!(txs
            .iter()
            .filter(|t| !t.is_coinbase)
            .filter(|t| t.outputs.iter().any(|o| o.address.as_str().starts_with("bg")))
            .all(|t| t.inputs.len() == 1));
    }

    #[test]
    fn infeasible_scenarios_are_rejected() {
        let flat_eats_deposit = MixerScenario {
            fee_policy: FeePolicy::FlatSat(60_000),
            deposits: vec![DepositSpec {
                value: 50_000,
                time: 3_600,
            }],
            ..MixerScenario::default()
        };
        assert!(simulate(&flat_eats_deposit).is_err());

        let pool_too_small = MixerScenario {
            pool_fund_sat: 10_000,
            deposits: vec![DepositSpec {
                value: 50_000,
                time: 3_600,
            }],
            ..MixerScenario::default()
        };
        assert!(simulate(&pool_too_small).is_err());

        let deposit_past_end = MixerScenario {
            deposits: vec![DepositSpec {
                value: 50_000,
                time: DAY_SECS,
            }],
            ..MixerScenario::default()
        };
        assert!(simulate(&deposit_past_end).is_err());

        let zero_duration = MixerScenario {
            duration_secs: 0,
            ..MixerScenario::default()
        };
        assert!(simulate(&zero_duration).is_err());
    }

    #[test]
    fn scenario_serialization_round_trips() {
        let scenario = MixerScenario {
            seed: 7,
            withdrawal_shape: PayoutShape::OneToManyPeel { parts: 4 },
            fee_policy: FeePolicy::FlatSat(9_000),
            pool_topology: PoolTopology::DisjointPools,
            deposits: vec![DepositSpec {
                value: 44_000,
                time: 3_600,
            }],
            ..MixerScenario::default()
        };
        let json = serde_json::to_string(&scenario).unwrap();
        let back: MixerScenario = serde_json::from_str(&json).unwrap();
        assert_eq!(back, scenario);

        // Terse files rely on defaults for unspecified knobs.
        let terse: MixerScenario =
            serde_json::from_str(r#"{"seed": 3, "background_tx_count": 10}"#).unwrap();
        assert_eq!(terse.seed, 3);
        assert_eq!(terse.payout_delay_secs, (3_600, 7_200));
        assert!(serde_json::from_str::<MixerScenario>(r#"{"sseed": 3}"#).is_err());
    }
}
