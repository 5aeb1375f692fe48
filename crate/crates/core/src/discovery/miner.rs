use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::cut::{find_cut_in, CutKind, Relations};
use super::Dfg;
use crate::eventlog::EventLog;
use crate::tree::ProcessTree;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MinerConfig {
    /// Directly-follows edges seen fewer times than this are ignored when
    /// looking for cuts. `0` keeps every edge (plain inductive miner).
    pub min_edge_count: u64,
}

/// Discovers a process tree with the plain inductive miner.
pub fn inductive_miner(log: &EventLog) -> ProcessTree {
    inductive_miner_with(&log.variants(), MinerConfig::default())
}

/// Inductive miner over plain activity sequences.
pub fn inductive_miner_with<S: AsRef<str>>(traces: &[Vec<S>], config: MinerConfig) -> ProcessTree {
    let mut names: Vec<String> = traces.iter().flatten().map(|a| String::from(a.as_ref())).collect();
    names.sort();
    names.dedup();
    let encoded: Vec<Vec<usize>> = traces
        .iter()
        .map(|t| t.iter().map(|a| names.binary_search_by(|n| n.as_str().cmp(a.as_ref())).expect("collected")).collect())
        .collect();
    Miner { names, config }.mine(encoded)
}

struct Miner {
    names: Vec<String>,
    config: MinerConfig,
}

impl Miner {
    fn mine(&self, traces: Vec<Vec<usize>>) -> ProcessTree {
        let total = traces.len();
        let non_empty: Vec<Vec<usize>> = traces.into_iter().filter(|t| !t.is_empty()).collect();
        if non_empty.is_empty() {
            return ProcessTree::Silent;
        }
        if non_empty.len() < total {
            return ProcessTree::xor(vec![ProcessTree::Silent, self.mine(non_empty)]);
        }

        let mut alphabet: Vec<usize> = non_empty.iter().flatten().copied().collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        if alphabet.len() == 1 {
            let leaf = ProcessTree::activity(self.names[alphabet[0]].clone());
            return if non_empty.iter().all(|t| t.len() == 1) {
                leaf
            } else {
                ProcessTree::looped(leaf, ProcessTree::Silent)
            };
        }

        let dfg = self.dfg(&non_empty).filter_edges(self.config.min_edge_count);
        let rel = Relations::new(&dfg);
        // Relations index activities by sorted name; map back to global symbols
        let global: Vec<usize> = rel
            .names
            .iter()
            .map(|n| self.names.binary_search(n).expect("known activity"))
            .collect();
        let Some((kind, groups)) = find_cut_in(&rel) else {
            return self.flower(&alphabet);
        };
        let blocks: Vec<Vec<usize>> = groups
            .into_iter()
            .map(|g| g.into_iter().map(|i| global[i]).collect())
            .collect();
        let block_of = |a: usize| blocks.iter().position(|b| b.contains(&a)).expect("partition covers alphabet");

        match kind {
            CutKind::Xor => {
                let mut sublogs = vec![Vec::new(); blocks.len()];
                for t in non_empty {
                    let k = block_of(t[0]);
                    sublogs[k].push(t.into_iter().filter(|&a| block_of(a) == k).collect());
                }
                ProcessTree::xor(sublogs.into_iter().map(|l| self.mine(l)).collect())
            }
            CutKind::Sequence | CutKind::Parallel => {
                let sublogs: Vec<Vec<Vec<usize>>> = (0..blocks.len())
                    .map(|k| {
                        non_empty
                            .iter()
                            .map(|t| t.iter().copied().filter(|&a| block_of(a) == k).collect())
                            .collect()
                    })
                    .collect();
                let children = sublogs.into_iter().map(|l| self.mine(l)).collect();
                if kind == CutKind::Sequence {
                    ProcessTree::sequence(children)
                } else {
                    ProcessTree::parallel(children)
                }
            }
            CutKind::Loop => {
                let mut sublogs = vec![Vec::new(); blocks.len()];
                for t in &non_empty {
                    let mut run: Vec<usize> = Vec::new();
                    let mut current = block_of(t[0]);
                    for &a in t {
                        let k = block_of(a);
                        if k != current {
                            sublogs[current].push(core::mem::take(&mut run));
                            current = k;
                        }
                        run.push(a);
                    }
                    sublogs[current].push(run);
                }
                let mut trees: Vec<ProcessTree> = sublogs.into_iter().map(|l| self.mine(l)).collect();
                let body = trees.remove(0);
                let redo = if trees.len() == 1 {
                    trees.pop().expect("one redo part")
                } else {
                    ProcessTree::xor(trees)
                };
                ProcessTree::looped(body, redo)
            }
        }
    }

    fn dfg(&self, traces: &[Vec<usize>]) -> Dfg {
        let named: Vec<Vec<&str>> = traces
            .iter()
            .map(|t| t.iter().map(|&a| self.names[a].as_str()).collect())
            .collect();
        Dfg::from_sequences(&named)
    }

    /// Fall-through: any activity, any number of times.
    fn flower(&self, alphabet: &[usize]) -> ProcessTree {
        let leaves: Vec<ProcessTree> = alphabet.iter().map(|&a| ProcessTree::activity(self.names[a].clone())).collect();
        ProcessTree::looped(ProcessTree::Silent, ProcessTree::xor(leaves))
    }
}

/// Number of traces per distinct activity sequence.
pub fn variant_counts(log: &EventLog) -> BTreeMap<Vec<String>, usize> {
    let mut out = BTreeMap::new();
    for v in log.variants() {
        *out.entry(v).or_insert(0) += 1;
    }
    out
}
