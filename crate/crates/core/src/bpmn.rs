//! BPMN flow graphs: translation of the block-free fragment into Petri nets
//! and frequency/performance decoration from logged element ids.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::EventLog;
use crate::petri::{Marking, PetriNet};

/// Namespace of BPMN 2.0 model documents.
pub const BPMN_MODEL_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";

/// Element types treated as atomic work items.
pub const TASK_TYPES: &[&str] = &[
    "task",
    "userTask",
    "serviceTask",
    "scriptTask",
    "sendTask",
    "receiveTask",
    "manualTask",
    "businessRuleTask",
    "callActivity",
];

/// Element types translated into labeled transitions besides tasks.
pub const EVENT_TYPES: &[&str] = &[
    "startEvent",
    "endEvent",
    "intermediateCatchEvent",
    "intermediateThrowEvent",
    // the engine logs the history rows of message/none events with these names too
    "noneEndEvent",
    "noneStartEvent",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", content = "element", rename_all = "camelCase")]
pub enum NodeKind {
    StartEvent,
    EndEvent,
    IntermediateEvent(String),
    Task(String),
    ExclusiveGateway,
    ParallelGateway,
    Other(String),
}

impl NodeKind {
    /// Classifies a BPMN element by its local XML name.
    pub fn from_element(name: &str) -> NodeKind {
        match name {
            "startEvent" => NodeKind::StartEvent,
            "endEvent" => NodeKind::EndEvent,
            "intermediateCatchEvent" | "intermediateThrowEvent" => NodeKind::IntermediateEvent(name.into()),
            "exclusiveGateway" => NodeKind::ExclusiveGateway,
            "parallelGateway" => NodeKind::ParallelGateway,
            n if TASK_TYPES.contains(&n) => NodeKind::Task(n.into()),
            n => NodeKind::Other(n.into()),
        }
    }

    pub fn element_name(&self) -> &str {
        match self {
            NodeKind::StartEvent => "startEvent",
            NodeKind::EndEvent => "endEvent",
            NodeKind::IntermediateEvent(n) | NodeKind::Task(n) | NodeKind::Other(n) => n,
            NodeKind::ExclusiveGateway => "exclusiveGateway",
            NodeKind::ParallelGateway => "parallelGateway",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNode {
    pub name: String,
    pub kind: NodeKind,
}

impl FlowNode {
    /// Activity name the engine records for this node: the name, or the id when unnamed.
    pub fn label<'a>(&'a self, id: &'a str) -> &'a str {
        if self.name.trim().is_empty() {
            id
        } else {
            &self.name
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceFlow {
    pub id: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpmnGraph {
    /// Id of the executable process, which the engine uses as definition key.
    pub process_key: String,
    pub nodes: BTreeMap<String, FlowNode>,
    pub flows: Vec<SequenceFlow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("sequence flow `{flow_id}` references missing node `{missing}`")]
    DanglingFlow { flow_id: String, missing: String },
    #[error("duplicate element id `{0}`")]
    DuplicateId(String),
}

impl BpmnGraph {
    pub fn new(
        process_key: impl Into<String>,
        nodes: BTreeMap<String, FlowNode>,
        flows: Vec<SequenceFlow>,
    ) -> Result<Self, GraphError> {
        let mut flow_ids = BTreeSet::new();
        for f in &flows {
            if !flow_ids.insert(f.id.as_str()) || nodes.contains_key(&f.id) {
                return Err(GraphError::DuplicateId(f.id.clone()));
            }
            for end in [&f.source, &f.target] {
                if !nodes.contains_key(end) {
                    return Err(GraphError::DanglingFlow {
                        flow_id: f.id.clone(),
                        missing: end.clone(),
                    });
                }
            }
        }
        Ok(BpmnGraph {
            process_key: process_key.into(),
            nodes,
            flows,
        })
    }

    pub fn incoming(&self, node: &str) -> impl Iterator<Item = &SequenceFlow> + '_ {
        let node = String::from(node);
        self.flows.iter().filter(move |f| f.target == node)
    }

    pub fn outgoing(&self, node: &str) -> impl Iterator<Item = &SequenceFlow> + '_ {
        let node = String::from(node);
        self.flows.iter().filter(move |f| f.source == node)
    }

    pub fn start_events(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|(_, n)| n.kind == NodeKind::StartEvent)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConversionError {
    #[error("unsupported construct `{kind}` at node `{node_id}`")]
    UnsupportedConstruct { kind: String, node_id: String },
    #[error("expected exactly one start event, found {0:?}")]
    StartEvents(Vec<String>),
    #[error("no end event")]
    NoEndEvent,
    #[error("node `{node_id}` has {incoming} incoming and {outgoing} outgoing flows")]
    FlowArity {
        node_id: String,
        incoming: usize,
        outgoing: usize,
    },
}

fn fresh_place_id(graph: &BpmnGraph, base: &str) -> String {
    let mut id = String::from(base);
    while graph.nodes.contains_key(&id) || graph.flows.iter().any(|f| f.id == id) {
        id.insert(0, '_');
    }
    id
}

/// Translates a BPMN graph made of events, tasks, exclusive and parallel
/// gateways into a workflow net.
///
/// Every sequence flow becomes a place. Tasks and events become transitions
/// labeled with their recorded activity name; an exclusive gateway gets one
/// silent transition per (incoming, outgoing) flow pair and a parallel
/// gateway a single silent transition. A fresh source place feeds the start
/// event and end events produce into a fresh sink place.
pub fn bpmn_to_petri(graph: &BpmnGraph) -> Result<PetriNet, ConversionError> {
    let starts = graph.start_events();
    if starts.len() != 1 {
        return Err(ConversionError::StartEvents(starts.into_iter().map(String::from).collect()));
    }
    if !graph.nodes.values().any(|n| n.kind == NodeKind::EndEvent) {
        return Err(ConversionError::NoEndEvent);
    }
    for (id, node) in &graph.nodes {
        if let NodeKind::Other(kind) = &node.kind {
            return Err(ConversionError::UnsupportedConstruct {
                kind: kind.clone(),
                node_id: id.clone(),
            });
        }
    }

    let mut net = PetriNet::new();
    let source_id = fresh_place_id(graph, "source");
    let sink_id = fresh_place_id(graph, "sink");
    let source = net.add_place(source_id.clone()).expect("fresh id");
    let sink = net.add_place(sink_id.clone()).expect("fresh id");
    let mut flow_place = BTreeMap::new();
    for f in &graph.flows {
        let p = net.add_place(f.id.clone()).expect("flow ids are unique");
        flow_place.insert(f.id.as_str(), p);
    }

    for (id, node) in &graph.nodes {
        let ins: Vec<usize> = graph.incoming(id).map(|f| flow_place[f.id.as_str()]).collect();
        let outs: Vec<usize> = graph.outgoing(id).map(|f| flow_place[f.id.as_str()]).collect();
        let arity = || ConversionError::FlowArity {
            node_id: id.clone(),
            incoming: ins.len(),
            outgoing: outs.len(),
        };
        match &node.kind {
            NodeKind::StartEvent | NodeKind::EndEvent | NodeKind::IntermediateEvent(_) | NodeKind::Task(_) => {
                let is_start = node.kind == NodeKind::StartEvent;
                let is_end = node.kind == NodeKind::EndEvent;
                let (want_in, want_out) = (!is_start, !is_end);
                if ins.len() != usize::from(want_in) || outs.len() != usize::from(want_out) {
                    return Err(arity());
                }
                let t = net
                    .add_transition(id.clone(), Some(String::from(node.label(id))))
                    .expect("node ids are unique");
                net.connect_input(if is_start { source } else { ins[0] }, t);
                net.connect_output(t, if is_end { sink } else { outs[0] });
            }
            NodeKind::ExclusiveGateway => {
                if ins.is_empty() || outs.is_empty() {
                    return Err(arity());
                }
                for f_in in graph.incoming(id) {
                    for f_out in graph.outgoing(id) {
                        let t = net
                            .add_transition(format!("{}__{}__{}", id, f_in.id, f_out.id), None)
                            .expect("unique per flow pair");
                        net.connect_input(flow_place[f_in.id.as_str()], t);
                        net.connect_output(t, flow_place[f_out.id.as_str()]);
                    }
                }
            }
            NodeKind::ParallelGateway => {
                if ins.is_empty() || outs.is_empty() {
                    return Err(arity());
                }
                let t = net.add_transition(id.clone(), None).expect("node ids are unique");
                ins.iter().for_each(|&p| net.connect_input(p, t));
                outs.iter().for_each(|&p| net.connect_output(t, p));
            }
            NodeKind::Other(_) => unreachable!("rejected above"),
        }
    }
    net.initial = Marking::single(source_id);
    net.final_marking = Marking::single(sink_id);
    Ok(net)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub frequency: u64,
    /// Mean of `end - start` in seconds; 0 when the node never occurred.
    pub mean_duration: f64,
}

/// Frequencies and durations projected onto a BPMN graph.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecoratedModel {
    pub process_key: String,
    pub nodes: BTreeMap<String, NodeStats>,
    pub flows: BTreeMap<String, u64>,
    /// Logged element ids that the graph does not contain, with counts.
    pub unmatched: BTreeMap<String, u64>,
}

/// Decorates `graph` from the element ids recorded in `log`.
///
/// The engine logs every traversed element, gateways included, so a flow's
/// frequency is the number of directly-following event pairs whose element
/// ids match the flow's source and target. No replay is needed.
pub fn decorate_model(graph: &BpmnGraph, log: &EventLog) -> DecoratedModel {
    let mut sums: BTreeMap<&str, (u64, f64)> = graph.nodes.keys().map(|id| (id.as_str(), (0, 0.0))).collect();
    let mut unmatched: BTreeMap<String, u64> = BTreeMap::new();
    let mut pairs: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for trace in &log.traces {
        for e in &trace.events {
            match sums.get_mut(e.activity_id.as_str()) {
                Some((n, total)) => {
                    *n += 1;
                    *total += e.duration_seconds();
                }
                None => *unmatched.entry(e.activity_id.clone()).or_insert(0) += 1,
            }
        }
        for w in trace.events.windows(2) {
            *pairs.entry((w[0].activity_id.as_str(), w[1].activity_id.as_str())).or_insert(0) += 1;
        }
    }
    let nodes = sums
        .into_iter()
        .map(|(id, (n, total))| {
            let mean_duration = if n == 0 { 0.0 } else { total / n as f64 };
            (String::from(id), NodeStats { frequency: n, mean_duration })
        })
        .collect();
    let flows = graph
        .flows
        .iter()
        .map(|f| {
            let count = pairs.get(&(f.source.as_str(), f.target.as_str())).copied().unwrap_or(0);
            (f.id.clone(), count)
        })
        .collect();
    DecoratedModel {
        process_key: graph.process_key.clone(),
        nodes,
        flows,
        unmatched,
    }
}
