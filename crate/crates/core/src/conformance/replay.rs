use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::eventlog::EventLog;
use crate::petri::{PetriNet, Tokens};

/// Upper bound on markings visited by one silent-step search.
const SEARCH_CAP: usize = 20_000;

/// Missing, remaining, consumed and produced token counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub missing: u64,
    pub remaining: u64,
    pub consumed: u64,
    pub produced: u64,
}

impl TokenCounts {
    /// `½(1 − m/c) + ½(1 − r/p)`; a half with a zero denominator counts as perfect.
    pub fn fitness(&self) -> f64 {
        let part = |bad: u64, total: u64| if total == 0 { 1.0 } else { 1.0 - bad as f64 / total as f64 };
        0.5 * part(self.missing, self.consumed) + 0.5 * part(self.remaining, self.produced)
    }

    fn add(&mut self, other: &TokenCounts) {
        self.missing += other.missing;
        self.remaining += other.remaining;
        self.consumed += other.consumed;
        self.produced += other.produced;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFitness {
    pub case_id: String,
    #[serde(flatten)]
    pub counts: TokenCounts,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessResult {
    pub traces: Vec<TraceFitness>,
    #[serde(flatten)]
    pub counts: TokenCounts,
    pub fitness: f64,
}

/// Token game state of one trace replay.
pub(crate) struct Replayer<'a> {
    net: &'a PetriNet,
    pub tokens: Tokens,
    pub counts: TokenCounts,
    depth_cap: usize,
}

impl<'a> Replayer<'a> {
    pub fn new(net: &'a PetriNet) -> Self {
        let tokens = net.dense(&net.initial).expect("initial marking over net places");
        let counts = TokenCounts {
            produced: net.initial.total(),
            ..TokenCounts::default()
        };
        Replayer {
            net,
            tokens,
            counts,
            depth_cap: 2 * net.transitions().len(),
        }
    }

    pub fn with_state(net: &'a PetriNet, tokens: Tokens, counts: TokenCounts) -> Self {
        Replayer {
            net,
            tokens,
            counts,
            depth_cap: 2 * net.transitions().len(),
        }
    }

    fn fire_counted(&mut self, t: usize) {
        self.counts.consumed += self.net.preset(t).len() as u64;
        self.counts.produced += self.net.postset(t).len() as u64;
        self.net.fire_at(&mut self.tokens, t);
    }

    /// Shortest sequence of silent transitions leading to a marking accepted by `goal`.
    fn silent_path<F: Fn(&[u32]) -> bool>(&self, goal: F) -> Option<Vec<usize>> {
        let mut seen: BTreeSet<Tokens> = BTreeSet::new();
        let mut queue: VecDeque<(Tokens, Vec<usize>)> = VecDeque::new();
        seen.insert(self.tokens.clone());
        queue.push_back((self.tokens.clone(), Vec::new()));
        while let Some((m, path)) = queue.pop_front() {
            if goal(&m) {
                return Some(path);
            }
            if path.len() >= self.depth_cap || seen.len() > SEARCH_CAP {
                continue;
            }
            for t in 0..self.net.transitions().len() {
                if self.net.transitions()[t].is_silent() && self.net.is_enabled_at(&m, t) {
                    let mut next = m.clone();
                    self.net.fire_at(&mut next, t);
                    if seen.insert(next.clone()) {
                        let mut p = path.clone();
                        p.push(t);
                        queue.push_back((next, p));
                    }
                }
            }
        }
        None
    }

    /// Replays one event; returns the number of tokens that had to be inserted.
    pub fn step(&mut self, label: &str) -> u64 {
        let candidates: Vec<usize> = self.net.transitions_labeled(label).collect();
        if candidates.is_empty() {
            self.counts.missing += 1;
            self.counts.consumed += 1;
            return 1;
        }
        if let Some(&t) = candidates.iter().find(|&&t| self.net.is_enabled_at(&self.tokens, t)) {
            self.fire_counted(t);
            return 0;
        }
        let net = self.net;
        if let Some(path) = self.silent_path(|m| candidates.iter().any(|&t| net.is_enabled_at(m, t))) {
            for s in path {
                self.fire_counted(s);
            }
            let t = *candidates
                .iter()
                .find(|&&t| net.is_enabled_at(&self.tokens, t))
                .expect("search ends in an enabling marking");
            self.fire_counted(t);
            return 0;
        }
        let missing_for = |t: usize| net.preset(t).iter().filter(|&&p| self.tokens[p] == 0).count();
        let t = *candidates
            .iter()
            .min_by_key(|&&t| missing_for(t))
            .expect("non-empty candidates");
        let mut inserted = 0;
        for &p in net.preset(t) {
            if self.tokens[p] == 0 {
                self.tokens[p] = 1;
                inserted += 1;
            }
        }
        self.counts.missing += inserted;
        self.fire_counted(t);
        inserted
    }

    /// Moves silently towards the final marking, consumes it and counts leftovers.
    pub fn finish(mut self) -> TokenCounts {
        let net = self.net;
        let goal = net.dense(&net.final_marking).expect("final marking over net places");
        let path = self
            .silent_path(|m| m == goal.as_slice())
            .or_else(|| self.silent_path(|m| m.iter().zip(&goal).all(|(have, want)| have >= want)));
        if let Some(path) = path {
            for s in path {
                self.fire_counted(s);
            }
        }
        for (p, &want) in goal.iter().enumerate() {
            if want == 0 {
                continue;
            }
            let have = self.tokens[p];
            if have < want {
                self.counts.missing += (want - have) as u64;
                self.tokens[p] = 0;
            } else {
                self.tokens[p] = have - want;
            }
            self.counts.consumed += want as u64;
        }
        self.counts.remaining += self.tokens.iter().map(|&c| c as u64).sum::<u64>();
        self.counts
    }
}

/// Replays one activity sequence.
pub fn replay_trace<S: AsRef<str>>(net: &PetriNet, activities: &[S]) -> TokenCounts {
    let mut r = Replayer::new(net);
    for a in activities {
        r.step(a.as_ref());
    }
    r.finish()
}

/// Token-based replay of every trace of `log` on `net`.
///
/// The initial marking counts as produced and the final marking as consumed.
/// Before declaring tokens missing the replay looks for the shortest run of
/// silent transitions that enables the event's transition.
pub fn replay_fitness(log: &EventLog, net: &PetriNet) -> FitnessResult {
    let mut cache: BTreeMap<Vec<&str>, TokenCounts> = BTreeMap::new();
    let mut total = TokenCounts::default();
    let mut traces = Vec::with_capacity(log.traces.len());
    for trace in &log.traces {
        let acts: Vec<&str> = trace.activities().collect();
        let counts = *cache.entry(acts.clone()).or_insert_with(|| replay_trace(net, &acts));
        total.add(&counts);
        traces.push(TraceFitness {
            case_id: trace.case_id.clone(),
            counts,
            fitness: counts.fitness(),
        });
    }
    FitnessResult {
        traces,
        counts: total,
        fitness: total.fitness(),
    }
}
