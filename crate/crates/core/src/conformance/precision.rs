use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::replay::{Replayer, TokenCounts};
use crate::eventlog::EventLog;
use crate::petri::{PetriNet, Tokens};

const CLOSURE_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionResult {
    /// Σ weight · |allowed \ reflected| over prefix states.
    pub escaping: u64,
    /// Σ weight · |allowed| over prefix states.
    pub allowed: u64,
    pub precision: f64,
    /// Prefix states left out because the prefix could not be replayed.
    pub skipped_states: usize,
}

#[derive(Default)]
struct PrefixNode {
    weight: u64,
    children: BTreeMap<String, PrefixNode>,
}

impl PrefixNode {
    fn insert(&mut self, trace: &[&str]) {
        self.weight += 1;
        if let Some((first, rest)) = trace.split_first() {
            self.children.entry(String::from(*first)).or_default().insert(rest);
        }
    }

    fn states(&self) -> usize {
        1 + self.children.values().map(PrefixNode::states).sum::<usize>()
    }
}

struct Accumulator {
    escaping: u64,
    allowed: u64,
    skipped: usize,
}

fn visible_enabled(net: &PetriNet, tokens: &[u32]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for m in net.silent_closure(tokens, CLOSURE_CAP) {
        for t in net.enabled_at(&m) {
            if let Some(l) = &net.transitions()[t].label {
                out.insert(l.clone());
            }
        }
    }
    out
}

fn visit(net: &PetriNet, node: &PrefixNode, tokens: Tokens, acc: &mut Accumulator) {
    let allowed = visible_enabled(net, &tokens);
    let escaping = allowed.iter().filter(|a| !node.children.contains_key(*a)).count() as u64;
    acc.allowed += node.weight * allowed.len() as u64;
    acc.escaping += node.weight * escaping;
    for (label, child) in &node.children {
        let mut r = Replayer::with_state(net, tokens.clone(), TokenCounts::default());
        if r.step(label) > 0 {
            acc.skipped += child.states();
            continue;
        }
        visit(net, child, r.tokens, acc);
    }
}

/// Escaping-edges precision of `net` with respect to `log`.
///
/// Each distinct prefix of the log is a state weighted by the number of
/// traces passing through it. The activities the net allows after the prefix
/// (silent steps included) but the log never shows there are escaping; a
/// state where traces end reflects nothing beyond its observed continuations.
pub fn etc_precision(log: &EventLog, net: &PetriNet) -> PrecisionResult {
    let mut root = PrefixNode::default();
    for t in &log.traces {
        let acts: Vec<&str> = t.activities().collect();
        root.insert(&acts);
    }
    let mut acc = Accumulator {
        escaping: 0,
        allowed: 0,
        skipped: 0,
    };
    if root.weight > 0 {
        let start = net.dense(&net.initial).expect("initial marking over net places");
        visit(net, &root, start, &mut acc);
    }
    let precision = if acc.allowed == 0 {
        1.0
    } else {
        1.0 - acc.escaping as f64 / acc.allowed as f64
    };
    PrecisionResult {
        escaping: acc.escaping,
        allowed: acc.allowed,
        precision,
        skipped_states: acc.skipped,
    }
}
