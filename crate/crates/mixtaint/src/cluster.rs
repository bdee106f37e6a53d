//! Standalone address clustering over a time window.
//!
//! The same sharing rules the taint fixpoint applies are exposed here as
//! plain partitions: input sharing unions all resolved input addresses of a
//! transaction, output sharing unions all output addresses. The ground set is
//! every address incident to a transaction inside the window, so addresses
//! touched only in the other role stay singletons.

use std::collections::HashMap;

use crate::chain::{Address, ChainIndex, TimeSpan};
use crate::taint::ClusteringOptions;

/// A disjoint partition of addresses. Members inside a cluster are sorted and
/// clusters are sorted by their members, so equal partitions compare equal
/// and render identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressClusters {
    clusters: Vec<Vec<Address>>,
}

impl AddressClusters {
    /// Clusters in canonical order; the cluster id is the index.
    pub fn clusters(&self) -> &[Vec<Address>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, address: &Address) -> Option<usize> {
        self.clusters
            .iter()
            .position(|members| members.binary_search(address).is_ok())
    }

    pub fn are_clustered(&self, a: &Address, b: &Address) -> bool {
        match (self.cluster_of(a), self.cluster_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// True when every cluster here is contained in one cluster of `coarser`.
    pub fn refines(&self, coarser: &AddressClusters) -> bool {
        self.clusters.iter().all(|members| {
            let Some(target) = coarser.cluster_of(&members[0]) else {
                return false;
            };
            members.iter().all(|m| coarser.cluster_of(m) == Some(target))
        })
    }

    /// One cluster per line, members separated by single spaces.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for members in &self.clusters {
            for (i, m) in members.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                s.push_str(m.as_str());
            }
            s.push('\n');
        }
        s
    }
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Partition the addresses incident to transactions inside `span`, unioning
/// per transaction according to the enabled sharing rules.
pub fn cluster_addresses(
    chain: &ChainIndex,
    span: TimeSpan,
    opts: ClusteringOptions,
) -> AddressClusters {
    let mut uf = UnionFind::new(chain.n_addrs());
    let mut incident = vec![false; chain.n_addrs()];
    for idx in chain.idx_range_in(span) {
        let idx = idx as u32;
        let inputs = chain.resolved_inputs_at(idx);
        let outputs = chain.output_addr_ids_at(idx);
        for &(addr, _) in inputs {
            incident[addr as usize] = true;
        }
        for &addr in outputs {
            incident[addr as usize] = true;
        }
        if opts.input_sharing {
            for pair in inputs.windows(2) {
                uf.union(pair[0].0, pair[1].0);
            }
        }
        if opts.output_sharing {
            for pair in outputs.windows(2) {
                uf.union(pair[0], pair[1]);
            }
        }
    }

    let mut by_root: HashMap<u32, Vec<u32>> = HashMap::new();
    for id in 0..chain.n_addrs() as u32 {
        if incident[id as usize] {
            by_root.entry(uf.find(id)).or_default().push(id);
        }
    }
    let mut clusters: Vec<Vec<Address>> = by_root
        .into_values()
        .map(|ids| {
            let mut members: Vec<Address> =
                ids.into_iter().map(|id| chain.addr_name(id).clone()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    clusters.sort_unstable();
    AddressClusters { clusters }
}

pub fn cluster_input_sharing(chain: &ChainIndex, span: TimeSpan) -> AddressClusters {
    cluster_addresses(chain, span, ClusteringOptions::M2)
}

pub fn cluster_output_sharing(
    chain: &ChainIndex,
    span: TimeSpan,
) -> AddressClusters {
    cluster_addresses(
        chain,
        span,
        ClusteringOptions {
            input_sharing: false,
            output_sharing: true,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_index, Transaction, TxId, TxInput, TxOutput};
    use crate::sim::{simulate, MixerScenario};
    use crate::taint::{address_taint_forward, TaintWindow};
    use std::collections::BTreeSet;

    fn coinbase(n: u8, addr: &str, value: u64) -> Transaction {
        Transaction {
            txid: TxId([n; 32]),
            timestamp: 0,
            is_coinbase: true,
            inputs: vec![],
            outputs: vec![TxOutput {
                address: addr.into(),
                value,
            }],
        }
    }

    fn spend(n: u8, time: i64, sources: &[(u8, u32)], outputs: &[(&str, u64)]) -> Transaction {
        Transaction {
            txid: TxId([n; 32]),
            timestamp: time,
            is_coinbase: false,
            inputs: sources
                .iter()
                .map(|&(tx, vout)| TxInput {
                    prev_txid: TxId([tx; 32]),
                    prev_vout: vout,
                })
                .collect(),
            outputs: outputs
                .iter()
                .map(|&(addr, value)| TxOutput {
                    address: addr.into(),
                    value,
                })
                .collect(),
        }
    }

    fn span() -> TimeSpan {
        TimeSpan::new(0, 1_000)
    }

    #[test]
    fn single_input_transactions_keep_everything_singleton() {
        let chain = build_index(vec![
            coinbase(1, "a", 50_000),
            coinbase(2, "b", 50_000),
            spend(3, 10, &[(1, 0)], &[("c", 49_000)]),
            spend(4, 20, &[(2, 0)], &[("d", 49_000)]),
        ])
        .unwrap();
        let partition = cluster_input_sharing(&chain, span());
        assert_eq!(partition.len(), 4);
        assert!(partition.clusters().iter().all(|c| c.len() == 1));

        let by_outputs = cluster_output_sharing(&chain, span());
        assert_eq!(by_outputs.len(), 4);
    }

    #[test]
    fn shared_inputs_form_one_cluster() {
        let chain = build_index(vec![
            coinbase(1, "x", 10_000),
            coinbase(2, "y", 10_000),
            coinbase(3, "z", 10_000),
            spend(4, 10, &[(1, 0), (2, 0), (3, 0)], &[("p", 29_000)]),
        ])
        .unwrap();
        let partition = cluster_input_sharing(&chain, span());
        let xyz = partition.cluster_of(&"x".into()).unwrap();
        assert_eq!(partition.cluster_of(&"y".into()), Some(xyz));
        assert_eq!(partition.cluster_of(&"z".into()), Some(xyz));
        assert_eq!(partition.clusters()[xyz].len(), 3);
        assert!(!partition.are_clustered(&"x".into(), &"p".into()));
    }

    #[test]
    fn input_sharing_is_transitive_across_transactions() {
        let chain = build_index(vec![
            coinbase(1, "x", 10_000),
            coinbase(2, "y", 10_000),
            coinbase(3, "y", 10_000),
            coinbase(4, "z", 10_000),
            spend(5, 10, &[(1, 0), (2, 0)], &[("p", 19_000)]),
            spend(6, 20, &[(3, 0), (4, 0)], &[("q", 19_000)]),
        ])
        .unwrap();
        let partition = cluster_input_sharing(&chain, span());
        assert!(partition.are_clustered(&"x".into(), &"z".into()));
    }

    #[test]
    fn co_paid_outputs_cluster_and_fresh_change_keeps_peels_apart() {
        let chain = build_index(vec![
            coinbase(1, "funder", 100_000),
            spend(2, 10, &[(1, 0)], &[("pay0", 10_000), ("chg0", 89_000)]),
            spend(3, 20, &[(2, 1)], &[("pay1", 10_000), ("chg1", 78_000)]),
            spend(4, 30, &[(3, 1)], &[("pay2", 10_000), ("chg2", 67_000)]),
        ])
        .unwrap();
        let partition = cluster_output_sharing(&chain, span());
        for i in 0..3 {
            let pay = Address::new(format!("pay{i}"));
            let chg = Address::new(format!("chg{i}"));
            assert!(partition.are_clustered(&pay, &chg), "link {i}");
        }
        assert!(!partition.are_clustered(&"pay0".into(), &"pay1".into()));

        // A recurring change address welds the links together.
        let chain = build_index(vec![
            coinbase(1, "funder", 100_000),
            spend(2, 10, &[(1, 0)], &[("pay0", 10_000), ("chg", 89_000)]),
            spend(3, 20, &[(2, 1)], &[("pay1", 10_000), ("chg", 78_000)]),
        ])
        .unwrap();
        let partition = cluster_output_sharing(&chain, span());
        assert!(partition.are_clustered(&"pay0".into(), &"pay1".into()));
    }

    #[test]
    fn transactions_outside_the_span_do_not_union() {
        let chain = build_index(vec![
            coinbase(1, "x", 10_000),
            coinbase(2, "y", 10_000),
            spend(3, 5_000, &[(1, 0), (2, 0)], &[("p", 19_000)]),
        ])
        .unwrap();
        let partition = cluster_input_sharing(&chain, span());
        assert!(!partition.are_clustered(&"x".into(), &"y".into()));
        assert_eq!(partition.len(), 2, "only the coinbase outputs are incident");
    }

    #[test]
    fn every_address_lands_in_exactly_one_cluster() {
        let scenario = MixerScenario {
            seed: 17,
            background_tx_count: 200,
            background_multi_input_bp: 2_500,
            ..MixerScenario::default()
        };
        let (txs, _) = simulate(&scenario).unwrap();
        let chain = build_index(txs).unwrap();
        let full = TimeSpan::new(0, i64::MAX);
        for partition in [
            cluster_input_sharing(&chain, full),
            cluster_output_sharing(&chain, full),
        ] {
            let mut seen = BTreeSet::new();
            for cluster in partition.clusters() {
                for member in cluster {
                    assert!(seen.insert(member.clone()), "{member} appears twice");
                }
            }
            assert_eq!(seen.len(), chain.address_count());
        }
    }

    #[test]
    fn sharing_rules_taint_whole_clusters() {
        for seed in 0..8 {
            let scenario = MixerScenario {
                seed,
                background_tx_count: 42,
                background_multi_input_bp: 3_000,
                ..MixerScenario::default()
            };
            let (txs, _) = simulate(&scenario).unwrap();
            let chain = build_index(txs).unwrap();
            let span = TimeSpan::new(0, crate::chain::DAY_SECS);
            let window = TaintWindow::new(span.end, span.end - span.start, 0).unwrap();
            for opts in [
                ClusteringOptions::M2,
                ClusteringOptions {
                    input_sharing: false,
                    output_sharing: true,
                },
            ] {
                let partition = cluster_addresses(&chain, span, opts);
                for cluster in partition.clusters() {
                    let seed_addr: BTreeSet<Address> = [cluster[0].clone()].into();
                    let tainted = address_taint_forward(&chain, &seed_addr, window, opts)
                        .unwrap()
                        .tainted_addresses;
                    for member in cluster {
                        assert!(
                            tainted.contains(member),
                            "seed {seed}: {} does not taint cluster member {member}",
                            cluster[0]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn input_partition_refines_the_combined_partition() {
        for seed in 0..8 {
            let scenario = MixerScenario {
                seed,
                background_tx_count: 80,
                background_multi_input_bp: 3_000,
                ..MixerScenario::default()
            };
            let (txs, _) = simulate(&scenario).unwrap();
            let chain = build_index(txs).unwrap();
            let span = TimeSpan::new(0, crate::chain::DAY_SECS);
            let fine = cluster_input_sharing(&chain, span);
            let coarse = cluster_addresses(&chain, span, ClusteringOptions::M3);
            assert!(fine.refines(&coarse), "seed {seed}");
            assert!(coarse.refines(&coarse));
        }
    }

    #[test]
    fn dump_is_sorted_and_line_oriented() {
        let chain = build_index(vec![
            coinbase(1, "m", 10_000),
            coinbase(2, "k", 10_000),
            spend(3, 10, &[(1, 0), (2, 0)], &[("a", 19_000)]),
        ])
        .unwrap();
        let partition = cluster_input_sharing(&chain, span());
        assert_eq!(partition.dump(), "a\nk m\n");
    }
}
