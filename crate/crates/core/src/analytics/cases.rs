use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::eventlog::{EventLog, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub n_events: usize,
    pub start: Timestamp,
    pub end: Timestamp,
    /// `end - start` in seconds.
    pub duration: f64,
}

/// Per-case duration (first event start to last event end), longest first.
/// Equal durations are ordered by case id.
pub fn case_statistics(log: &EventLog) -> Vec<CaseSummary> {
    let mut out: Vec<CaseSummary> = log
        .traces
        .iter()
        .map(|t| {
            let (start, end) = (t.first().start, t.last().end);
            CaseSummary {
                case_id: t.case_id.clone(),
                n_events: t.events.len(),
                start,
                end,
                duration: end.seconds_since(start),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.duration
            .partial_cmp(&a.duration)
            .expect("durations are finite")
            .then_with(|| a.case_id.cmp(&b.case_id))
    });
    out
}
