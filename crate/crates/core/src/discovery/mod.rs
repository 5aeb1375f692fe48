//! Directly-follows graphs and inductive-miner discovery.

mod cut;
mod miner;

pub use cut::{find_cut, Cut, CutKind};
pub use miner::{inductive_miner, inductive_miner_with, variant_counts, MinerConfig};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::eventlog::EventLog;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeStats {
    pub count: u64,
    /// Mean waiting time between the two events in seconds, overlaps counted as 0.
    pub mean_gap: f64,
}

/// Directly-follows graph with frequency and waiting-time annotations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "DfgDocument", from = "DfgDocument")]
pub struct Dfg {
    pub activities: BTreeMap<String, u64>,
    pub edges: BTreeMap<(String, String), EdgeStats>,
    pub start_activities: BTreeMap<String, u64>,
    pub end_activities: BTreeMap<String, u64>,
}

impl Dfg {
    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn edge_count(&self, from: &str, to: &str) -> u64 {
        self.edges
            .get(&(String::from(from), String::from(to)))
            .map_or(0, |e| e.count)
    }

    /// Drops edges seen fewer than `min_count` times.
    pub fn filter_edges(&self, min_count: u64) -> Dfg {
        let mut out = self.clone();
        out.edges.retain(|_, e| e.count >= min_count);
        out
    }

    /// DFG over plain activity sequences (no timing information).
    pub fn from_sequences<S: AsRef<str>>(traces: &[Vec<S>]) -> Dfg {
        let mut dfg = Dfg::default();
        for t in traces {
            let Some(first) = t.first() else { continue };
            *dfg.start_activities.entry(String::from(first.as_ref())).or_insert(0) += 1;
            *dfg.end_activities.entry(String::from(t[t.len() - 1].as_ref())).or_insert(0) += 1;
            for a in t {
                *dfg.activities.entry(String::from(a.as_ref())).or_insert(0) += 1;
            }
            for w in t.windows(2) {
                dfg.edges
                    .entry((String::from(w[0].as_ref()), String::from(w[1].as_ref())))
                    .or_default()
                    .count += 1;
            }
        }
        dfg
    }
}

/// Counts activities, directly-follows pairs and start/end activities.
///
/// The gap of a pair is `max(0, next.start - prev.end)`; interval events of
/// parallel branches may overlap.
pub fn discover_dfg(log: &EventLog) -> Dfg {
    let mut dfg = Dfg::default();
    let mut gap_sums: BTreeMap<(String, String), f64> = BTreeMap::new();
    for trace in &log.traces {
        let (first, last) = (trace.first(), trace.last());
        *dfg.start_activities.entry(first.activity.clone()).or_insert(0) += 1;
        *dfg.end_activities.entry(last.activity.clone()).or_insert(0) += 1;
        for e in &trace.events {
            *dfg.activities.entry(e.activity.clone()).or_insert(0) += 1;
        }
        for w in trace.events.windows(2) {
            let key = (w[0].activity.clone(), w[1].activity.clone());
            let gap = w[1].start.seconds_since(w[0].end).max(0.0);
            *gap_sums.entry(key.clone()).or_insert(0.0) += gap;
            dfg.edges.entry(key).or_default().count += 1;
        }
    }
    for (key, stats) in dfg.edges.iter_mut() {
        stats.mean_gap = gap_sums[key] / stats.count as f64;
    }
    dfg
}

/// JSON shape of a [`Dfg`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfgDocument {
    pub activities: BTreeMap<String, u64>,
    pub edges: Vec<DfgEdge>,
    pub start: BTreeMap<String, u64>,
    pub end: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfgEdge {
    pub from: String,
    pub to: String,
    pub count: u64,
    pub mean_gap: f64,
}

impl From<Dfg> for DfgDocument {
    fn from(d: Dfg) -> Self {
        DfgDocument {
            activities: d.activities,
            edges: d
                .edges
                .into_iter()
                .map(|((from, to), s)| DfgEdge {
                    from,
                    to,
                    count: s.count,
                    mean_gap: s.mean_gap,
                })
                .collect(),
            start: d.start_activities,
            end: d.end_activities,
        }
    }
}

impl From<DfgDocument> for Dfg {
    fn from(d: DfgDocument) -> Self {
        Dfg {
            activities: d.activities,
            edges: d
                .edges
                .into_iter()
                .map(|e| {
                    (
                        (e.from, e.to),
                        EdgeStats {
                            count: e.count,
                            mean_gap: e.mean_gap,
                        },
                    )
                })
                .collect(),
            start_activities: d.start,
            end_activities: d.end,
        }
    }
}
