//! IO, file formats, CLI and HTTP service around `pm-core`.

pub mod bpmn_xml;
pub mod cli;
pub mod config;
pub mod csv_log;
pub mod loader;
pub mod service;
pub mod sources;
pub mod store;
pub mod tables;
pub mod timefmt;
pub mod watermark;
pub mod xes;
