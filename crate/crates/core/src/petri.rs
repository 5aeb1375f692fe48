//! Place/transition nets with ordinary (unweighted) arcs.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Multiset of places. Places with zero tokens are not stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marking(pub BTreeMap<String, u32>);

impl Marking {
    pub fn new() -> Self {
        Marking(BTreeMap::new())
    }

    pub fn single(place: impl Into<String>) -> Self {
        let mut m = BTreeMap::new();
        m.insert(place.into(), 1);
        Marking(m)
    }

    pub fn tokens(&self, place: &str) -> u32 {
        self.0.get(place).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, u32)> for Marking {
    fn from_iter<I: IntoIterator<Item = (S, u32)>>(iter: I) -> Self {
        let mut m = BTreeMap::new();
        for (p, c) in iter {
            if c > 0 {
                *m.entry(p.into()).or_insert(0) += c;
            }
        }
        Marking(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    /// `None` for silent transitions.
    pub label: Option<String>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("arc `{0}` -> `{1}` must connect a place and a transition")]
    BadArc(String, String),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("marking references unknown place `{0}`")]
    UnknownPlace(String),
}

/// Dense marking indexed by place position.
pub type Tokens = Vec<u32>;

/// A Petri net with an initial and a final marking.
///
/// Nodes are kept in insertion order and addressed by index internally;
/// the string ids are what callers see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "NetDocument", try_from = "NetDocument")]
pub struct PetriNet {
    places: Vec<String>,
    transitions: Vec<Transition>,
    inputs: Vec<Vec<usize>>,
    outputs: Vec<Vec<usize>>,
    place_index: BTreeMap<String, usize>,
    transition_index: BTreeMap<String, usize>,
    pub initial: Marking,
    pub final_marking: Marking,
}

impl Default for PetriNet {
    fn default() -> Self {
        Self::new()
    }
}

impl PetriNet {
    pub fn new() -> Self {
        PetriNet {
            places: Vec::new(),
            transitions: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            place_index: BTreeMap::new(),
            transition_index: BTreeMap::new(),
            initial: Marking::new(),
            final_marking: Marking::new(),
        }
    }

    fn id_taken(&self, id: &str) -> bool {
        self.place_index.contains_key(id) || self.transition_index.contains_key(id)
    }

    pub fn add_place(&mut self, id: impl Into<String>) -> Result<usize, NetError> {
        let id = id.into();
        if self.id_taken(&id) {
            return Err(NetError::DuplicateNode(id));
        }
        let idx = self.places.len();
        self.place_index.insert(id.clone(), idx);
        self.places.push(id);
        Ok(idx)
    }

    pub fn add_transition(&mut self, id: impl Into<String>, label: Option<String>) -> Result<usize, NetError> {
        let id = id.into();
        if self.id_taken(&id) {
            return Err(NetError::DuplicateNode(id));
        }
        let idx = self.transitions.len();
        self.transition_index.insert(id.clone(), idx);
        self.transitions.push(Transition { id, label });
        self.inputs.push(Vec::new());
        self.outputs.push(Vec::new());
        Ok(idx)
    }

    /// Adds `place -> transition` (by index). Repeated arcs are ignored.
    pub fn connect_input(&mut self, place: usize, transition: usize) {
        let ins = &mut self.inputs[transition];
        if !ins.contains(&place) {
            ins.push(place);
        }
    }

    /// Adds `transition -> place` (by index). Repeated arcs are ignored.
    pub fn connect_output(&mut self, transition: usize, place: usize) {
        let outs = &mut self.outputs[transition];
        if !outs.contains(&place) {
            outs.push(place);
        }
    }

    /// Adds an arc by node ids, in either direction.
    pub fn add_arc(&mut self, source: &str, target: &str) -> Result<(), NetError> {
        match (
            self.place_index.get(source),
            self.transition_index.get(source),
            self.place_index.get(target),
            self.transition_index.get(target),
        ) {
            (Some(&p), _, _, Some(&t)) => {
                self.connect_input(p, t);
                Ok(())
            }
            (_, Some(&t), Some(&p), _) => {
                self.connect_output(t, p);
                Ok(())
            }
            (None, None, _, _) => Err(NetError::UnknownNode(source.into())),
            (_, _, None, None) => Err(NetError::UnknownNode(target.into())),
            _ => Err(NetError::BadArc(source.into(), target.into())),
        }
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.place_index.get(id).copied()
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transition_index.get(id).copied()
    }

    /// Input places of transition `t`.
    pub fn preset(&self, t: usize) -> &[usize] {
        &self.inputs[t]
    }

    /// Output places of transition `t`.
    pub fn postset(&self, t: usize) -> &[usize] {
        &self.outputs[t]
    }

    /// All arcs as `(source id, target id)` pairs.
    pub fn arcs(&self) -> Vec<(String, String)> {
        let mut arcs = Vec::new();
        for (t, tr) in self.transitions.iter().enumerate() {
            for &p in &self.inputs[t] {
                arcs.push((self.places[p].clone(), tr.id.clone()));
            }
            for &p in &self.outputs[t] {
                arcs.push((tr.id.clone(), self.places[p].clone()));
            }
        }
        arcs
    }

    /// Transitions carrying `label`.
    pub fn transitions_labeled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.transitions
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.label.as_deref() == Some(label))
            .map(|(i, _)| i)
    }

    pub fn labels(&self) -> BTreeSet<String> {
        self.transitions.iter().filter_map(|t| t.label.clone()).collect()
    }

    pub fn dense(&self, marking: &Marking) -> Result<Tokens, NetError> {
        let mut tokens = vec![0; self.places.len()];
        for (p, &c) in &marking.0 {
            let i = self.place_index(p).ok_or_else(|| NetError::UnknownPlace(p.clone()))?;
            tokens[i] = c;
        }
        Ok(tokens)
    }

    pub fn sparse(&self, tokens: &[u32]) -> Marking {
        Marking(
            tokens
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (self.places[i].clone(), c))
                .collect(),
        )
    }

    pub fn is_enabled_at(&self, tokens: &[u32], t: usize) -> bool {
        self.inputs[t].iter().all(|&p| tokens[p] > 0)
    }

    /// Indices of the enabled transitions, ascending.
    pub fn enabled_at(&self, tokens: &[u32]) -> Vec<usize> {
        (0..self.transitions.len()).filter(|&t| self.is_enabled_at(tokens, t)).collect()
    }

    /// Fires `t` in place; the caller guarantees it is enabled.
    pub fn fire_at(&self, tokens: &mut [u32], t: usize) {
        for &p in &self.inputs[t] {
            tokens[p] -= 1;
        }
        for &p in &self.outputs[t] {
            tokens[p] += 1;
        }
    }

    /// Ids of the transitions enabled in `marking`.
    pub fn enabled(&self, marking: &Marking) -> Result<BTreeSet<String>, NetError> {
        let tokens = self.dense(marking)?;
        Ok(self
            .enabled_at(&tokens)
            .into_iter()
            .map(|t| self.transitions[t].id.clone())
            .collect())
    }

    pub fn fire(&self, marking: &Marking, transition: &str) -> Result<Marking, NetError> {
        let t = self
            .transition_index(transition)
            .ok_or_else(|| NetError::UnknownNode(transition.into()))?;
        let mut tokens = self.dense(marking)?;
        if !self.is_enabled_at(&tokens, t) {
            return Err(NetError::NotEnabled(transition.into()));
        }
        self.fire_at(&mut tokens, t);
        Ok(self.sparse(&tokens))
    }

    /// Structural workflow-net check: one source place, one sink place, the
    /// markings are exactly those two, and every node lies on a path from
    /// source to sink.
    pub fn is_workflow_net(&self) -> bool {
        let n_p = self.places.len();
        let n_t = self.transitions.len();
        let mut has_in = vec![false; n_p];
        let mut has_out = vec![false; n_p];
        for t in 0..n_t {
            for &p in &self.inputs[t] {
                has_out[p] = true;
            }
            for &p in &self.outputs[t] {
                has_in[p] = true;
            }
        }
        let sources: Vec<usize> = (0..n_p).filter(|&p| !has_in[p]).collect();
        let sinks: Vec<usize> = (0..n_p).filter(|&p| !has_out[p]).collect();
        if sources.len() != 1 || sinks.len() != 1 {
            return false;
        }
        let (source, sink) = (sources[0], sinks[0]);
        if self.initial != Marking::single(self.places[source].clone())
            || self.final_marking != Marking::single(self.places[sink].clone())
        {
            return false;
        }
        // nodes: places 0..n_p, transitions n_p..n_p+n_t
        let mut fwd: Vec<Vec<usize>> = vec![Vec::new(); n_p + n_t];
        let mut bwd: Vec<Vec<usize>> = vec![Vec::new(); n_p + n_t];
        for t in 0..n_t {
            for &p in &self.inputs[t] {
                fwd[p].push(n_p + t);
                bwd[n_p + t].push(p);
            }
            for &p in &self.outputs[t] {
                fwd[n_p + t].push(p);
                bwd[p].push(n_p + t);
            }
        }
        let reach = |start: usize, adj: &Vec<Vec<usize>>| {
            let mut seen = vec![false; n_p + n_t];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen
        };
        let from_source = reach(source, &fwd);
        let to_sink = reach(sink, &bwd);
        from_source.iter().zip(&to_sink).all(|(&a, &b)| a && b)
    }

    /// Markings reachable from `tokens` by firing silent transitions only,
    /// including `tokens` itself, in breadth-first order. Stops after `cap` markings.
    pub fn silent_closure(&self, tokens: &[u32], cap: usize) -> Vec<Tokens> {
        let mut seen: BTreeSet<Tokens> = BTreeSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(tokens.to_vec());
        queue.push_back(tokens.to_vec());
        while let Some(m) = queue.pop_front() {
            order.push(m.clone());
            if order.len() >= cap {
                break;
            }
            for t in 0..self.transitions.len() {
                if self.transitions[t].is_silent() && self.is_enabled_at(&m, t) {
                    let mut next = m.clone();
                    self.fire_at(&mut next, t);
                    if seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
        order
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("state space exceeds {0} states")]
    TooLarge(usize),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Label sequences of length `<= max_len` leading from the initial to
/// exactly the final marking.
pub fn bounded_language(net: &PetriNet, max_len: usize, state_cap: usize) -> Result<BTreeSet<Vec<String>>, AnalysisError> {
    let labels: Vec<String> = net.labels().into_iter().collect();
    let label_of: Vec<Option<u16>> = net
        .transitions()
        .iter()
        .map(|t| t.label.as_ref().map(|l| labels.binary_search(l).expect("label listed") as u16))
        .collect();
    let start = net.dense(&net.initial)?;
    let goal = net.dense(&net.final_marking)?;

    let mut seen: BTreeSet<(Tokens, Vec<u16>)> = BTreeSet::new();
    let mut stack = vec![(start, Vec::new())];
    let mut words: BTreeSet<Vec<u16>> = BTreeSet::new();
    while let Some((m, word)) = stack.pop() {
        if !seen.insert((m.clone(), word.clone())) {
            continue;
        }
        if seen.len() > state_cap {
            return Err(AnalysisError::TooLarge(state_cap));
        }
        if m == goal {
            words.insert(word.clone());
        }
        for t in net.enabled_at(&m) {
            let mut next_word = word.clone();
            if let Some(l) = label_of[t] {
                if word.len() >= max_len {
                    continue;
                }
                next_word.push(l);
            }
            let mut next = m.clone();
            net.fire_at(&mut next, t);
            if !seen.contains(&(next.clone(), next_word.clone())) {
                stack.push((next, next_word));
            }
        }
    }
    Ok(words
        .into_iter()
        .map(|w| w.into_iter().map(|l| labels[l as usize].clone()).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundnessReport {
    pub reachable_markings: usize,
    /// Some reachable marking cannot reach the final marking.
    pub stuck_markings: usize,
    /// Transitions that are never enabled.
    pub dead_transitions: Vec<String>,
    /// Reachable markings strictly covering the final marking.
    pub improper_completions: usize,
}

impl SoundnessReport {
    pub fn is_sound(&self) -> bool {
        self.stuck_markings == 0 && self.dead_transitions.is_empty() && self.improper_completions == 0
    }
}

/// Exhaustive reachability analysis, failing when more than `cap` markings are reachable.
pub fn check_soundness(net: &PetriNet, cap: usize) -> Result<SoundnessReport, AnalysisError> {
    let start = net.dense(&net.initial)?;
    let goal = net.dense(&net.final_marking)?;
    let mut index: BTreeMap<Tokens, usize> = BTreeMap::new();
    let mut states: Vec<Tokens> = Vec::new();
    let mut back: Vec<Vec<usize>> = Vec::new();
    let mut fired = vec![false; net.transitions().len()];
    index.insert(start.clone(), 0);
    states.push(start);
    back.push(Vec::new());
    let mut i = 0;
    while i < states.len() {
        let m = states[i].clone();
        for t in net.enabled_at(&m) {
            fired[t] = true;
            let mut next = m.clone();
            net.fire_at(&mut next, t);
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if states.len() >= cap {
                        return Err(AnalysisError::TooLarge(cap));
                    }
                    let j = states.len();
                    index.insert(next.clone(), j);
                    states.push(next);
                    back.push(Vec::new());
                    j
                }
            };
            back[j].push(i);
        }
        i += 1;
    }
    let mut can_finish = vec![false; states.len()];
    let mut stack: Vec<usize> = index.get(&goal).into_iter().copied().collect();
    for &s in &stack {
        can_finish[s] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &back[s] {
            if !can_finish[p] {
                can_finish[p] = true;
                stack.push(p);
            }
        }
    }
    let improper = states
        .iter()
        .filter(|m| **m != goal && m.iter().zip(&goal).all(|(a, b)| a >= b))
        .count();
    Ok(SoundnessReport {
        reachable_markings: states.len(),
        stuck_markings: can_finish.iter().filter(|&&c| !c).count(),
        dead_transitions: fired
            .iter()
            .enumerate()
            .filter(|(_, &f)| !f)
            .map(|(t, _)| net.transitions()[t].id.clone())
            .collect(),
        improper_completions: improper,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Simulation {
    pub traces: Vec<Vec<String>>,
    /// Walks that ran past `max_len` labels or got stuck.
    pub abandoned: usize,
}

/// Random token-game walks from the initial to the final marking.
///
/// Each step picks uniformly among enabled transitions. Silent transitions
/// are not recorded. The output only depends on the net and the arguments.
pub fn simulate(net: &PetriNet, max_traces: usize, max_len: usize, seed: u64) -> Result<Simulation, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = net.dense(&net.initial)?;
    let goal = net.dense(&net.final_marking)?;
    let step_cap = (max_len + 1) * (net.transitions().len() + 1) * 4;
    let mut traces = Vec::new();
    let mut abandoned = 0;
    'walks: for _ in 0..max_traces {
        let mut m = start.clone();
        let mut trace = Vec::new();
        let mut steps = 0;
        loop {
            if m == goal {
                traces.push(trace);
                continue 'walks;
            }
            let enabled = net.enabled_at(&m);
            let Some(&t) = enabled.choose(&mut rng) else {
                abandoned += 1;
                continue 'walks;
            };
            net.fire_at(&mut m, t);
            steps += 1;
            if let Some(l) = &net.transitions()[t].label {
                trace.push(l.clone());
            }
            if trace.len() > max_len || steps > step_cap {
                abandoned += 1;
                continue 'walks;
            }
        }
    }
    Ok(Simulation { traces, abandoned })
}

/// Wire form of a [`PetriNet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetDocument {
    pub places: Vec<String>,
    pub transitions: Vec<Transition>,
    pub arcs: Vec<ArcDocument>,
    pub initial: Marking,
    #[serde(rename = "final")]
    pub final_marking: Marking,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcDocument {
    pub source: String,
    pub target: String,
}

impl From<PetriNet> for NetDocument {
    fn from(net: PetriNet) -> Self {
        NetDocument {
            arcs: net
                .arcs()
                .into_iter()
                .map(|(source, target)| ArcDocument { source, target })
                .collect(),
            places: net.places,
            transitions: net.transitions,
            initial: net.initial,
            final_marking: net.final_marking,
        }
    }
}

impl TryFrom<NetDocument> for PetriNet {
    type Error = NetError;

    fn try_from(doc: NetDocument) -> Result<Self, Self::Error> {
        let mut net = PetriNet::new();
        for p in doc.places {
            net.add_place(p)?;
        }
        for t in doc.transitions {
            net.add_transition(t.id, t.label)?;
        }
        for a in &doc.arcs {
            net.add_arc(&a.source, &a.target)?;
        }
        net.dense(&doc.initial)?;
        net.dense(&doc.final_marking)?;
        net.initial = doc.initial;
        net.final_marking = doc.final_marking;
        Ok(net)
    }
}

impl core::fmt::Display for PetriNet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for (t, tr) in self.transitions.iter().enumerate() {
            let ins: Vec<&str> = self.inputs[t].iter().map(|&p| self.places[p].as_str()).collect();
            let outs: Vec<&str> = self.outputs[t].iter().map(|&p| self.places[p].as_str()).collect();
            writeln!(
                f,
                "{:?} -> {}[{}] -> {:?}",
                ins,
                tr.id,
                tr.label.as_deref().unwrap_or("tau"),
                outs
            )?;
        }
        Ok(())
    }
}
