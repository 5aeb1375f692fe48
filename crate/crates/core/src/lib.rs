//! Process-mining algorithms over workflow-engine history data.
//!
//! This crate holds everything that does not need an operating system: the
//! interval event-log model, the incremental extraction cursor, the BPMN flow
//! graph and its Petri-net translation, process trees, directly-follows and
//! inductive-miner discovery, token replay and escaping-edges precision, and
//! the organizational / decision analytics. It only needs `alloc`.
//!
//! File formats, database bindings, the CLI and the HTTP service live in the
//! `pm-connector` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod analytics;
pub mod bpmn;
pub mod conformance;
pub mod discovery;
pub mod eventlog;
pub mod extract;
pub mod petri;
pub mod tree;

pub use bpmn::{BpmnGraph, DecoratedModel, NodeKind};
pub use eventlog::{AttributeValue, Event, EventLog, Timestamp, Trace};
pub use petri::{Marking, PetriNet};
pub use tree::ProcessTree;
