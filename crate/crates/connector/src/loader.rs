//! Loading BPMN models from a directory tree or a Camunda REST endpoint.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pm_core::BpmnGraph;
use serde::Deserialize;
use thiserror::Error;

use crate::bpmn_xml::parse_bpmn;

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub graph: BpmnGraph,
    pub xml: String,
    /// File path or definition id the model came from.
    pub origin: String,
}

/// Models keyed by process definition key, plus per-item problems.
#[derive(Debug, Default)]
pub struct LoadedModels {
    pub models: BTreeMap<String, LoadedModel>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("model directory {path}: {source}")]
    Dir { path: PathBuf, source: std::io::Error },
    #[error("REST endpoint {url}: {message}")]
    Rest { url: String, message: String },
}

fn scan(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            scan(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "bpmn") {
            out.push(path);
        }
    }
    Ok(())
}

/// Parses every `*.bpmn` file below `dir`. Unreadable or invalid files are
/// reported as warnings; when two files define the same key the first path
/// in sorted order wins.
pub fn load_models_dir(dir: &Path) -> Result<LoadedModels, LoadError> {
    let mut files = Vec::new();
    scan(dir, &mut files).map_err(|source| LoadError::Dir {
        path: dir.to_path_buf(),
        source,
    })?;
    files.sort();
    let mut out = LoadedModels::default();
    for path in files {
        let origin = path.display().to_string();
        let xml = match fs::read_to_string(&path) {
            Ok(x) => x,
            Err(e) => {
                out.warnings.push(format!("{origin}: {e}"));
                continue;
            }
        };
        match parse_bpmn(&xml) {
            Ok(graph) => insert(&mut out, graph, xml, origin),
            Err(e) => out.warnings.push(format!("{origin}: {e}")),
        }
    }
    Ok(out)
}

fn insert(out: &mut LoadedModels, graph: BpmnGraph, xml: String, origin: String) {
    let key = graph.process_key.clone();
    if let Some(prev) = out.models.get(&key) {
        out.warnings
            .push(format!("{origin}: process `{key}` already loaded from {}", prev.origin));
        return;
    }
    out.models.insert(key, LoadedModel { graph, xml, origin });
}

#[derive(Deserialize)]
struct Definition {
    id: String,
    key: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct DefinitionXml {
    bpmn20_xml: String,
}

/// Lists the latest version of each process definition under `base`
/// (e.g. `http://localhost:8080/engine-rest`) and fetches its diagram.
/// Failures for single definitions become warnings; failing to list the
/// definitions at all is an error.
pub fn load_models_rest(base: &str) -> Result<LoadedModels, LoadError> {
    let base = base.trim_end_matches('/');
    let agent = ureq::AgentBuilder::new().timeout(std::time::Duration::from_secs(30)).build();
    let list_url = format!("{base}/process-definition?latestVersion=true");
    let rest_err = |url: &str, message: String| LoadError::Rest {
        url: url.to_string(),
        message,
    };
    let defs: Vec<Definition> = agent
        .get(&list_url)
        .call()
        .map_err(|e| rest_err(&list_url, e.to_string()))?
        .into_json()
        .map_err(|e| rest_err(&list_url, e.to_string()))?;
    let mut out = LoadedModels::default();
    for def in defs {
        let url = format!("{base}/process-definition/{}/xml", def.id);
        let fetched = agent
            .get(&url)
            .call()
            .map_err(|e| e.to_string())
            .and_then(|r| r.into_json::<DefinitionXml>().map_err(|e| e.to_string()));
        let xml = match fetched {
            Ok(d) => d.bpmn20_xml,
            Err(e) => {
                out.warnings.push(format!("{url}: {e}"));
                continue;
            }
        };
        match parse_bpmn(&xml) {
            Ok(mut graph) => {
                // the definition key is authoritative for REST models
                graph.process_key = def.key;
                insert(&mut out, graph, xml, def.id);
            }
            Err(e) => out.warnings.push(format!("{url}: {e}")),
        }
    }
    Ok(out)
}
