//! Generators and brute-force reference implementations shared by the
//! integration tests. Nothing here calls into the algorithms it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pm_core::bpmn::{BpmnGraph, FlowNode, NodeKind, SequenceFlow};
use pm_core::eventlog::{build_log, Event, EventLog, Timestamp};
use pm_core::ProcessTree;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Word = Vec<String>;
pub type Language = BTreeSet<Word>;

pub const ALPHABET: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

/// Random log: up to `max_traces` cases of up to `max_events` interval events.
pub fn random_log(rng: &mut ChaCha8Rng, max_traces: usize, max_events: usize) -> EventLog {
    let n_acts = rng.gen_range(1..=ALPHABET.len());
    let resources = ["ann", "bob", "cid", "dee", "eve"];
    let mut pairs = Vec::new();
    let n_traces = rng.gen_range(0..=max_traces);
    let mut id = 0;
    for c in 0..n_traces {
        let n = rng.gen_range(1..=max_events);
        let mut t = rng.gen_range(0..1_000_000i64);
        for _ in 0..n {
            let start = t + rng.gen_range(-500..5_000);
            let end = start + rng.gen_range(0..3_000);
            t = end;
            let mut e = Event::instant(format!("e{id}"), ALPHABET[rng.gen_range(0..n_acts)], Timestamp(start));
            e.end = Timestamp(end);
            if rng.gen_bool(0.8) {
                e.resource = Some(resources[rng.gen_range(0..resources.len())].to_string());
            }
            id += 1;
            pairs.push((format!("case-{c}"), e));
        }
    }
    pairs.shuffle(rng);
    build_log(pairs, "random").expect("generated ids are unique")
}

/// Directly-follows tallies computed by walking each trace pairwise.
pub struct DfgOracle {
    pub activities: HashMap<String, u64>,
    pub edges: HashMap<(String, String), (u64, f64)>,
    pub starts: HashMap<String, u64>,
    pub ends: HashMap<String, u64>,
}

pub fn dfg_oracle(log: &EventLog) -> DfgOracle {
    let mut o = DfgOracle {
        activities: HashMap::new(),
        edges: HashMap::new(),
        starts: HashMap::new(),
        ends: HashMap::new(),
    };
    for t in &log.traces {
        let ev = &t.events;
        *o.starts.entry(ev[0].activity.clone()).or_default() += 1;
        *o.ends.entry(ev[ev.len() - 1].activity.clone()).or_default() += 1;
        for i in 0..ev.len() {
            *o.activities.entry(ev[i].activity.clone()).or_default() += 1;
            if i + 1 < ev.len() {
                let gap = ((ev[i + 1].start.0 - ev[i].end.0) as f64 / 1000.0).max(0.0);
                let slot = o.edges.entry((ev[i].activity.clone(), ev[i + 1].activity.clone())).or_default();
                slot.0 += 1;
                slot.1 += gap;
            }
        }
    }
    o
}

pub fn handover_oracle(log: &EventLog) -> HashMap<(String, String), f64> {
    let mut m = HashMap::new();
    for t in &log.traces {
        let rs: Vec<&String> = t.events.iter().filter_map(|e| e.resource.as_ref()).collect();
        for i in 1..rs.len() {
            *m.entry((rs[i - 1].clone(), rs[i].clone())).or_insert(0.0) += 1.0;
        }
    }
    m
}

pub fn working_together_oracle(log: &EventLog, r1: &str, r2: &str) -> f64 {
    log.traces
        .iter()
        .filter(|t| {
            let has = |r: &str| t.events.iter().any(|e| e.resource.as_deref() == Some(r));
            has(r1) && has(r2)
        })
        .count() as f64
}

pub fn cosine_oracle(log: &EventLog, r1: &str, r2: &str) -> f64 {
    let profile = |r: &str| {
        let mut p: HashMap<&str, f64> = HashMap::new();
        for e in log.events() {
            if e.resource.as_deref() == Some(r) {
                *p.entry(e.activity.as_str()).or_default() += 1.0;
            }
        }
        p
    };
    let (p, q) = (profile(r1), profile(r2));
    let norm = |v: &HashMap<&str, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (np, nq) = (norm(&p), norm(&q));
    if np == 0.0 || nq == 0.0 {
        return 0.0;
    }
    let dot: f64 = p.iter().map(|(k, x)| x * q.get(k).copied().unwrap_or(0.0)).sum();
    dot / (np * nq)
}

/// Random tree over distinct labels in the class the inductive miner can
/// rediscover: no silent leaves, no operator repeated directly below itself,
/// and loop bodies with disjoint start and end activities (here: sequences).
/// `max_depth` counts operator levels.
pub fn random_tree(rng: &mut ChaCha8Rng, max_depth: usize, max_labels: usize) -> ProcessTree {
    let n = rng.gen_range(2..=max_labels);
    let mut labels: Vec<String> = ALPHABET[..n].iter().map(|s| s.to_string()).collect();
    labels.shuffle(rng);
    grow(rng, max_depth, labels, None, None)
}

#[derive(Clone, Copy, PartialEq)]
enum Op {
    Seq,
    Xor,
    Par,
    Loop,
}

fn grow(rng: &mut ChaCha8Rng, depth: usize, labels: Vec<String>, parent: Option<Op>, forced: Option<Op>) -> ProcessTree {
    if labels.len() == 1 {
        return ProcessTree::activity(labels[0].clone());
    }
    let mut ops: Vec<Op> = [Op::Seq, Op::Xor, Op::Par, Op::Loop]
        .into_iter()
        .filter(|o| Some(*o) != parent)
        .filter(|o| *o != Op::Loop || (depth >= 2 && labels.len() >= 3))
        .collect();
    if let Some(f) = forced {
        ops = vec![f];
    }
    let op = ops[rng.gen_range(0..ops.len())];
    if depth <= 1 {
        return build(op, labels.into_iter().map(ProcessTree::activity).collect());
    }
    if op == Op::Loop {
        let cut = rng.gen_range(2..labels.len());
        let mut body = labels;
        let redo = body.split_off(cut);
        let body = grow(rng, depth - 1, body, Some(Op::Loop), Some(Op::Seq));
        let redo = grow(rng, depth - 1, redo, Some(Op::Loop), None);
        return ProcessTree::looped(body, redo);
    }
    let k = rng.gen_range(2..=labels.len().min(3));
    let mut parts: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, l) in labels.into_iter().enumerate() {
        let slot = if i < k { i } else { rng.gen_range(0..k) };
        parts[slot].push(l);
    }
    let children = parts.into_iter().map(|p| grow(rng, depth - 1, p, Some(op), None)).collect();
    build(op, children)
}

fn build(op: Op, mut children: Vec<ProcessTree>) -> ProcessTree {
    match op {
        Op::Seq => ProcessTree::sequence(children),
        Op::Xor => ProcessTree::xor(children),
        Op::Par => ProcessTree::parallel(children),
        Op::Loop => {
            let redo = children.pop().unwrap();
            ProcessTree::looped(children.pop().unwrap(), redo)
        }
    }
}

/// Language of `tree` restricted to words of length `<= max_len`, computed
/// from the operator semantics. `None` when more than `cap` words arise.
pub fn tree_language(tree: &ProcessTree, max_len: usize, cap: usize) -> Option<Language> {
    let lang = match tree {
        ProcessTree::Activity { label } => [vec![label.clone()]].into_iter().collect(),
        ProcessTree::Silent => [Vec::new()].into_iter().collect(),
        ProcessTree::Xor { children } => {
            let mut out = Language::new();
            for c in children {
                out.extend(tree_language(c, max_len, cap)?);
            }
            out
        }
        ProcessTree::Sequence { children } => {
            let mut acc: Language = [Vec::new()].into_iter().collect();
            for c in children {
                let l = tree_language(c, max_len, cap)?;
                acc = concat(&acc, &l, max_len);
                if acc.len() > cap {
                    return None;
                }
            }
            acc
        }
        ProcessTree::Parallel { children } => {
            let mut acc: Language = [Vec::new()].into_iter().collect();
            for c in children {
                let l = tree_language(c, max_len, cap)?;
                let mut next = Language::new();
                for u in &acc {
                    for v in &l {
                        if u.len() + v.len() <= max_len {
                            shuffle(u, v, &mut Vec::new(), &mut next);
                        }
                    }
                    if next.len() > cap {
                        return None;
                    }
                }
                acc = next;
            }
            acc
        }
        ProcessTree::Loop { body, redo } => {
            let b = tree_language(body, max_len, cap)?;
            let r = tree_language(redo, max_len, cap)?;
            let step = concat(&r, &b, max_len);
            let mut acc = b;
            let mut frontier: Vec<Word> = acc.iter().cloned().collect();
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for w in &frontier {
                    for s in &step {
                        if w.len() + s.len() <= max_len {
                            let mut x = w.clone();
                            x.extend(s.iter().cloned());
                            if acc.insert(x.clone()) {
                                next.push(x);
                            }
                        }
                    }
                }
                if acc.len() > cap {
                    return None;
                }
                frontier = next;
            }
            acc
        }
    };
    (lang.len() <= cap).then_some(lang)
}

fn concat(a: &Language, b: &Language, max_len: usize) -> Language {
    let mut out = Language::new();
    for u in a {
        for v in b {
            if u.len() + v.len() <= max_len {
                let mut w = u.clone();
                w.extend(v.iter().cloned());
                out.insert(w);
            }
        }
    }
    out
}

fn shuffle(u: &[String], v: &[String], prefix: &mut Vec<String>, out: &mut Language) {
    if u.is_empty() || v.is_empty() {
        let mut w = prefix.clone();
        w.extend(u.iter().cloned());
        w.extend(v.iter().cloned());
        out.insert(w);
        return;
    }
    prefix.push(u[0].clone());
    shuffle(&u[1..], v, prefix, out);
    prefix.pop();
    prefix.push(v[0].clone());
    shuffle(u, &v[1..], prefix, out);
    prefix.pop();
}

/// Builds a graph from `(id, element, name)` nodes and `(id, source, target)` flows.
pub fn graph(nodes: &[(&str, &str, &str)], flows: &[(&str, &str, &str)]) -> BpmnGraph {
    let nodes = nodes
        .iter()
        .map(|(id, kind, name)| {
            (
                id.to_string(),
                FlowNode {
                    name: name.to_string(),
                    kind: NodeKind::from_element(kind),
                },
            )
        })
        .collect();
    let flows = flows
        .iter()
        .map(|(id, s, t)| SequenceFlow {
            id: id.to_string(),
            source: s.to_string(),
            target: t.to_string(),
        })
        .collect();
    BpmnGraph::new("fixture", nodes, flows).expect("fixture graph is well formed")
}

/// Completed label sequences of `graph` under BPMN token-flow semantics:
/// tokens sit on sequence flows, an exclusive gateway moves one token to one
/// outgoing flow, a parallel gateway synchronises all incoming flows and
/// feeds all outgoing ones, every other node passes its single token on and
/// emits its name (its id when unnamed). A run completes when no token is left.
pub fn bpmn_token_game(graph: &BpmnGraph, max_len: usize, cap: usize) -> Option<Language> {
    let mut incoming: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut outgoing: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for f in &graph.flows {
        incoming.entry(f.target.as_str()).or_default().push(f.id.as_str());
        outgoing.entry(f.source.as_str()).or_default().push(f.id.as_str());
    }
    let label = |id: &str| {
        let n = &graph.nodes[id];
        if n.name.is_empty() {
            id.to_string()
        } else {
            n.name.clone()
        }
    };
    type State = (bool, BTreeMap<String, u32>);
    let mut out = Language::new();
    let mut seen: BTreeSet<(State, Word)> = BTreeSet::new();
    let mut stack: Vec<(State, Word)> = vec![((false, BTreeMap::new()), Vec::new())];
    while let Some(((started, tokens), word)) = stack.pop() {
        if !seen.insert(((started, tokens.clone()), word.clone())) {
            continue;
        }
        if seen.len() > cap {
            return None;
        }
        if started && tokens.is_empty() {
            out.insert(word.clone());
            continue;
        }
        let mut moves: Vec<(BTreeMap<String, u32>, Option<String>)> = Vec::new();
        let take = |t: &BTreeMap<String, u32>, f: &str| {
            let mut t = t.clone();
            let n = t.get_mut(f).unwrap();
            *n -= 1;
            if *n == 0 {
                t.remove(f);
            }
            t
        };
        let put = |t: &mut BTreeMap<String, u32>, f: &str| {
            *t.entry(f.to_string()).or_insert(0) += 1;
        };
        for (id, node) in &graph.nodes {
            let ins = incoming.get(id.as_str()).cloned().unwrap_or_default();
            let outs = outgoing.get(id.as_str()).cloned().unwrap_or_default();
            match node.kind {
                NodeKind::StartEvent => {
                    if !started {
                        let mut t = tokens.clone();
                        for f in &outs {
                            put(&mut t, f);
                        }
                        moves.push((t, Some(label(id))));
                    }
                }
                NodeKind::ExclusiveGateway => {
                    for f in ins.iter().filter(|f| tokens.contains_key(**f)) {
                        for g in &outs {
                            let mut t = take(&tokens, f);
                            put(&mut t, g);
                            moves.push((t, None));
                        }
                    }
                }
                NodeKind::ParallelGateway => {
                    if !ins.is_empty() && ins.iter().all(|f| tokens.contains_key(*f)) {
                        let mut t = tokens.clone();
                        for f in &ins {
                            t = take(&t, f);
                        }
                        for g in &outs {
                            put(&mut t, g);
                        }
                        moves.push((t, None));
                    }
                }
                _ => {
                    if let Some(f) = ins.iter().find(|f| tokens.contains_key(**f)) {
                        let mut t = take(&tokens, f);
                        for g in &outs {
                            put(&mut t, g);
                        }
                        moves.push((t, Some(label(id))));
                    }
                }
            }
        }
        for (t, l) in moves {
            let mut w = word.clone();
            if let Some(l) = l {
                if w.len() >= max_len {
                    continue;
                }
                w.push(l);
            }
            stack.push(((true, t), w));
        }
    }
    Some(out)
}
