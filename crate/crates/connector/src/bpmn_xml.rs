//! Reading BPMN 2.0 XML into a flow graph.

use std::collections::BTreeMap;

use pm_core::bpmn::{BpmnGraph, FlowNode, GraphError, NodeKind, SequenceFlow, BPMN_MODEL_NS};
use quick_xml::events::{BytesStart, Event};
use quick_xml::name::{Namespace, ResolveResult};
use quick_xml::NsReader;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BpmnXmlError {
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: u64, message: String },
    #[error("no BPMN process element (namespace {BPMN_MODEL_NS})")]
    NoProcess,
    #[error("`{element}` without an `{attribute}` attribute")]
    MissingAttribute { element: String, attribute: &'static str },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Children of a process that are not flow nodes.
const NOT_FLOW_NODES: &[&str] = &[
    "sequenceFlow",
    "laneSet",
    "extensionElements",
    "documentation",
    "dataObject",
    "dataObjectReference",
    "dataStoreReference",
    "textAnnotation",
    "association",
    "ioSpecification",
    "property",
    "dataInputAssociation",
    "dataOutputAssociation",
];

#[derive(Default)]
struct ProcessBuf {
    id: String,
    executable: bool,
    nodes: Vec<(String, FlowNode)>,
    flows: Vec<SequenceFlow>,
}

fn attr(e: &BytesStart<'_>, name: &str) -> Result<Option<String>, quick_xml::Error> {
    for a in e.attributes() {
        let a = a.map_err(quick_xml::Error::from)?;
        if a.key.prefix().is_none() && a.key.local_name().as_ref() == name.as_bytes() {
            return Ok(Some(a.unescape_value()?.into_owned()));
        }
    }
    Ok(None)
}

fn required(e: &BytesStart<'_>, element: &str, name: &'static str) -> Result<String, BpmnXmlError> {
    attr(e, name)
        .map_err(|err| BpmnXmlError::Xml {
            position: 0,
            message: err.to_string(),
        })?
        .ok_or_else(|| BpmnXmlError::MissingAttribute {
            element: element.to_string(),
            attribute: name,
        })
}

/// Parses the first executable process (or the first process when none is
/// marked executable). Sub-processes and other containers become single
/// nodes of kind `Other`, which the Petri-net translation rejects.
pub fn parse_bpmn(xml: &str) -> Result<BpmnGraph, BpmnXmlError> {
    let mut reader = NsReader::from_str(xml);
    let ns = Namespace(BPMN_MODEL_NS.as_bytes());
    let mut processes: Vec<ProcessBuf> = Vec::new();
    // depth relative to the open process element; None outside a process
    let mut in_process: Option<usize> = None;
    loop {
        let position = reader.buffer_position();
        let xml_err = |e: quick_xml::Error| BpmnXmlError::Xml {
            position,
            message: e.to_string(),
        };
        let (resolved, event) = reader.read_resolved_event().map_err(xml_err)?;
        let (start, empty) = match &event {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            Event::End(_) => {
                if let Some(d) = in_process.as_mut() {
                    if *d == 0 {
                        in_process = None;
                    } else {
                        *d -= 1;
                    }
                }
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        let e = start.expect("start or empty");
        let in_bpmn = matches!(resolved, ResolveResult::Bound(n) if n == ns);
        let local = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
        match in_process {
            None => {
                if in_bpmn && local == "process" {
                    let id = required(&e, &local, "id")?;
                    let executable = attr(&e, "isExecutable").map_err(xml_err)?.as_deref() == Some("true");
                    processes.push(ProcessBuf {
                        id,
                        executable,
                        ..Default::default()
                    });
                    if !empty {
                        in_process = Some(0);
                    }
                }
            }
            Some(depth) => {
                if depth == 0 && in_bpmn {
                    let p = processes.last_mut().expect("open process");
                    if local == "sequenceFlow" {
                        p.flows.push(SequenceFlow {
                            id: required(&e, &local, "id")?,
                            source: required(&e, &local, "sourceRef")?,
                            target: required(&e, &local, "targetRef")?,
                        });
                    } else if !NOT_FLOW_NODES.contains(&local.as_str()) {
                        if let Some(id) = attr(&e, "id").map_err(xml_err)? {
                            let name = attr(&e, "name").map_err(xml_err)?.unwrap_or_default();
                            p.nodes.push((
                                id,
                                FlowNode {
                                    name,
                                    kind: NodeKind::from_element(&local),
                                },
                            ));
                        }
                    }
                }
                if !empty {
                    in_process = Some(depth + 1);
                }
            }
        }
    }
    let pick = processes.iter().position(|p| p.executable).unwrap_or(0);
    if processes.is_empty() {
        return Err(BpmnXmlError::NoProcess);
    }
    let p = processes.swap_remove(pick);
    let mut nodes = BTreeMap::new();
    for (id, node) in p.nodes {
        if nodes.insert(id.clone(), node).is_some() {
            return Err(GraphError::DuplicateId(id).into());
        }
    }
    Ok(BpmnGraph::new(p.id, nodes, p.flows)?)
}
