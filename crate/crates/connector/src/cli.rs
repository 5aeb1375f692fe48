//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failure or usage error, 2 unknown process key,
//! 3 event source unreachable.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use pm_core::analytics::{
    case_statistics, decision_mining, handover_of_work, similar_activities, working_together, DecisionConfig, SnaMetric,
};
use pm_core::bpmn::bpmn_to_petri;
use pm_core::conformance::{etc_precision, replay_fitness};
use pm_core::discovery::{discover_dfg, inductive_miner, DfgDocument};
use pm_core::extract::incremental_extract;
use pm_core::petri::NetDocument;
use pm_core::tree::tree_to_petri;
use pm_core::{BpmnGraph, EventLog, NodeKind, PetriNet, ProcessTree};
use serde_json::json;

use crate::bpmn_xml::parse_bpmn;
use crate::config::{Config, EventSource, ModelSource};
use crate::loader::{load_models_dir, load_models_rest};
use crate::service::{self, ApiData};
use crate::sources::{CsvDirSource, SourceError, SqliteSource};
use crate::store::Store;
use crate::watermark::{load_state, save_state, StateLock};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_UNKNOWN_PROCESS: i32 = 2;
pub const EXIT_UNREACHABLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "pm", version, about = "Process mining over workflow-engine history tables")]
struct Cli {
    /// Configuration file
    #[arg(long, short, env = "PM_CONFIG", default_value = "pm.json", global = true)]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pull new completed activity instances into the per-process logs
    Extract,
    /// Discover a model from a process log
    Discover {
        #[arg(long)]
        process: String,
        #[arg(long, value_enum, default_value_t = Format::Dfg)]
        format: Format,
    },
    /// Token-replay fitness and escaping-edges precision against a model
    Conform {
        #[arg(long)]
        process: String,
        /// `.bpmn` diagram, `.json` Petri net or process tree, or a file in tree notation
        #[arg(long)]
        model: PathBuf,
    },
    /// Resource-by-resource social network
    Sna {
        #[arg(long)]
        process: String,
        #[arg(long, default_value = "handover")]
        metric: SnaMetric,
        /// Scale each row to sum 1
        #[arg(long)]
        normalize: bool,
    },
    /// Case durations, longest first
    Cases {
        #[arg(long)]
        process: String,
        #[arg(long)]
        top: Option<usize>,
    },
    /// Learn branch conditions at exclusive gateways
    Decisions {
        #[arg(long)]
        process: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DecisionConfig::default().min_accuracy)]
        min_accuracy: f64,
    },
    /// Serve the JSON API and the web UI
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Dfg,
    Tree,
    #[value(name = "pnml-like-json")]
    PnmlLikeJson,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn fail(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_FAILURE, e.to_string())
}

/// Parses `args` (including the program name), runs the command writing its
/// result to `out`, and returns the exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    eprint!("{}", e.render());
                    EXIT_FAILURE
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let config = Config::load(&cli.config).map_err(fail)?;
    let store = Store::new(&config.output_dir);
    match cli.command {
        Command::Extract => extract(&config, &store, out),
        Command::Discover { process, format } => {
            let log = analysis_log(&config, &store, &process)?;
            match format {
                Format::Dfg => print_json(out, &DfgDocument::from(discover_dfg(&log))),
                Format::Tree => writeln!(out, "{}", inductive_miner(&log)).map_err(fail),
                Format::PnmlLikeJson => print_json(out, &NetDocument::from(tree_to_petri(&inductive_miner(&log)))),
            }
        }
        Command::Conform { process, model } => {
            let mut log = analysis_log(&config, &store, &process)?;
            let net = match read_model(&model)? {
                Model::Bpmn(graph) => {
                    // gateways are silent in the translated net
                    log = log.filter_events(|e| {
                        !e.activity_type.ends_with("Gateway")
                            && !graph.nodes.get(&e.activity_id).is_some_and(|n| {
                                matches!(n.kind, NodeKind::ExclusiveGateway | NodeKind::ParallelGateway)
                            })
                    });
                    bpmn_to_petri(&graph).map_err(fail)?
                }
                Model::Net(net) => net,
                Model::Tree(tree) => tree_to_petri(&tree),
            };
            let f = replay_fitness(&log, &net);
            let p = etc_precision(&log, &net);
            print_json(
                out,
                &json!({
                    "process": process,
                    "n_traces": log.traces.len(),
                    "fitness": f.fitness,
                    "tokens": f.counts,
                    "precision": p.precision,
                    "escaping": p.escaping,
                    "allowed": p.allowed,
                    "skipped_states": p.skipped_states,
                }),
            )
        }
        Command::Sna {
            process,
            metric,
            normalize,
        } => {
            let log = analysis_log(&config, &store, &process)?;
            let m = match metric {
                SnaMetric::Handover => handover_of_work(&log),
                SnaMetric::WorkingTogether => working_together(&log),
                SnaMetric::SimilarActivities => similar_activities(&log),
            };
            print_json(out, &if normalize { m.row_normalized() } else { m })
        }
        Command::Cases { process, top } => {
            let log = analysis_log(&config, &store, &process)?;
            let mut list = case_statistics(&log);
            if let Some(n) = top {
                list.truncate(n);
            }
            print_json(out, &list)
        }
        Command::Decisions {
            process,
            model,
            min_accuracy,
        } => {
            // gateway events are needed to locate decisions, so no type filter
            let log = stored_log(&store, &process)?;
            let Model::Bpmn(graph) = read_model(&model)? else {
                return Err(fail(format!("{}: decision mining needs a .bpmn model", model.display())));
            };
            print_json(out, &decision_mining(&log, &graph, &DecisionConfig { min_accuracy }))
        }
        Command::Serve { port } => {
            let data = ApiData::load(&store, &config.activity_type_filter).map_err(fail)?;
            let port = port.unwrap_or(config.service_port);
            let rt = tokio::runtime::Runtime::new().map_err(fail)?;
            rt.block_on(service::serve(data, config.ui_dir.clone(), port)).map_err(fail)
        }
    }
}

fn print_json<T: serde::Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(fail)?;
    writeln!(out, "{text}").map_err(fail)
}

fn stored_log(store: &Store, key: &str) -> Result<EventLog, Failure> {
    match store.read_log(key).map_err(fail)? {
        Some(log) => Ok(log),
        None => {
            let known = store.keys().map_err(fail)?;
            let listed = if known.is_empty() {
                "none (run `pm extract` first)".to_string()
            } else {
                known.join(", ")
            };
            Err(Failure::new(
                EXIT_UNKNOWN_PROCESS,
                format!("unknown process `{key}`; known processes: {listed}"),
            ))
        }
    }
}

fn analysis_log(config: &Config, store: &Store, key: &str) -> Result<EventLog, Failure> {
    let log = stored_log(store, key)?;
    Ok(if config.activity_type_filter.is_empty() {
        log
    } else {
        log.filter_activity_types(&config.activity_type_filter)
    })
}

enum Model {
    Bpmn(BpmnGraph),
    Net(PetriNet),
    Tree(ProcessTree),
}

fn read_model(path: &Path) -> Result<Model, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let at = |e: &dyn std::fmt::Display| fail(format!("{}: {e}", path.display()));
    match path.extension().and_then(|e| e.to_str()) {
        Some("bpmn") | Some("xml") => parse_bpmn(&text).map(Model::Bpmn).map_err(|e| at(&e)),
        Some("json") => {
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| at(&e))?;
            if value.get("places").is_some() {
                serde_json::from_value::<PetriNet>(value).map(Model::Net).map_err(|e| at(&e))
            } else {
                serde_json::from_value::<ProcessTree>(value).map(Model::Tree).map_err(|e| at(&e))
            }
        }
        _ => text.trim().parse::<ProcessTree>().map(Model::Tree).map_err(|e| at(&e)),
    }
}

fn source_failure(e: SourceError) -> Failure {
    let code = if e.is_unreachable() { EXIT_UNREACHABLE } else { EXIT_FAILURE };
    Failure::new(code, e.to_string())
}

fn extract(config: &Config, store: &Store, out: &mut dyn Write) -> Result<(), Failure> {
    let _lock = StateLock::acquire(&config.state_path).map_err(fail)?;
    let state = load_state(&config.state_path).map_err(fail)?;
    let result = match &config.source {
        EventSource::CsvDir(dir) => incremental_extract(&mut CsvDirSource::new(dir), &state),
        EventSource::Database(url) => {
            let mut source = SqliteSource::from_url(url).map_err(source_failure)?;
            incremental_extract(&mut source, &state)
        }
    };
    let extraction = result.map_err(|e| match e {
        pm_core::extract::ExtractError::Source(s) => source_failure(s),
        other => fail(other),
    })?;

    let report = &extraction.rows;
    for id in &report.rejected_duplicates {
        log::warn!("duplicate activity instance `{id}` ignored");
    }
    for id in &report.rejected_invalid {
        log::warn!("activity instance `{id}` has no activity name or id; ignored");
    }
    if extraction.details.unmatched > 0 {
        log::info!("{} detail rows belong to no extracted event", extraction.details.unmatched);
    }

    let mut total = 0;
    for (key, delta) in extraction.logs.clone() {
        let (added, dropped) = store.append(delta).map_err(fail)?;
        if dropped > 0 {
            log::warn!("{key}: {dropped} events were already stored");
        }
        total += added;
        writeln!(out, "{key}: {added} new events").map_err(fail)?;
    }
    if let Some(models) = &config.models {
        store_models(models, store);
    }
    save_state(&config.state_path, &extraction.state).map_err(fail)?;
    writeln!(out, "{total} new events").map_err(fail)?;
    if report.skipped_incomplete > 0 {
        writeln!(out, "{} running activity instances left for a later run", report.skipped_incomplete).map_err(fail)?;
    }
    Ok(())
}

/// Model problems never fail an extraction; they are logged.
fn store_models(source: &ModelSource, store: &Store) {
    let loaded = match source {
        ModelSource::Dir(dir) => load_models_dir(dir).map_err(|e| e.to_string()),
        ModelSource::Rest(url) => load_models_rest(url).map_err(|e| e.to_string()),
    };
    match loaded {
        Err(e) => log::warn!("models not refreshed: {e}"),
        Ok(loaded) => {
            for w in &loaded.warnings {
                log::warn!("{w}");
            }
            for (key, m) in &loaded.models {
                if let Err(e) = store.write_model(key, &m.xml) {
                    log::warn!("{e}");
                }
            }
        }
    }
}
