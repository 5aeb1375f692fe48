use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eventlog::EventLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnaMetric {
    Handover,
    WorkingTogether,
    SimilarActivities,
}

impl SnaMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            SnaMetric::Handover => "handover",
            SnaMetric::WorkingTogether => "working_together",
            SnaMetric::SimilarActivities => "similar_activities",
        }
    }
}

impl FromStr for SnaMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "handover" => Ok(SnaMetric::Handover),
            "working_together" => Ok(SnaMetric::WorkingTogether),
            "similar_activities" => Ok(SnaMetric::SimilarActivities),
            other => Err(alloc::format!("unknown metric `{}`", other)),
        }
    }
}

/// Square resource × resource matrix; `values[i][j]` relates `resources[i]` to `resources[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceMatrix {
    pub metric: SnaMetric,
    pub resources: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ResourceMatrix {
    fn zeros(metric: SnaMetric, resources: Vec<String>) -> Self {
        let n = resources.len();
        ResourceMatrix {
            metric,
            resources,
            values: vec![vec![0.0; n]; n],
        }
    }

    fn index(&self, r: &str) -> usize {
        self.resources.binary_search_by(|x| x.as_str().cmp(r)).expect("known resource")
    }

    pub fn get(&self, from: &str, to: &str) -> Option<f64> {
        let i = self.resources.iter().position(|r| r == from)?;
        let j = self.resources.iter().position(|r| r == to)?;
        Some(self.values[i][j])
    }

    /// Scales every non-zero row to sum 1.
    pub fn row_normalized(mut self) -> Self {
        for row in &mut self.values {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        self
    }
}

fn resources(log: &EventLog) -> Vec<String> {
    let set: BTreeSet<&str> = log.events().filter_map(|e| e.resource.as_deref()).collect();
    set.into_iter().map(String::from).collect()
}

/// Counts direct hand-overs between consecutive resource-bearing events of a case.
pub fn handover_of_work(log: &EventLog) -> ResourceMatrix {
    let mut m = ResourceMatrix::zeros(SnaMetric::Handover, resources(log));
    for t in &log.traces {
        let performers: Vec<&str> = t.events.iter().filter_map(|e| e.resource.as_deref()).collect();
        for w in performers.windows(2) {
            let (i, j) = (m.index(w[0]), m.index(w[1]));
            m.values[i][j] += 1.0;
        }
    }
    m
}

/// Number of cases two resources both worked on; the diagonal counts a resource's cases.
pub fn working_together(log: &EventLog) -> ResourceMatrix {
    let mut m = ResourceMatrix::zeros(SnaMetric::WorkingTogether, resources(log));
    for t in &log.traces {
        let involved: BTreeSet<usize> = t
            .events
            .iter()
            .filter_map(|e| e.resource.as_deref())
            .map(|r| m.index(r))
            .collect();
        for &i in &involved {
            for &j in &involved {
                m.values[i][j] += 1.0;
            }
        }
    }
    m
}

/// Cosine similarity of the resources' activity-frequency profiles.
pub fn similar_activities(log: &EventLog) -> ResourceMatrix {
    let mut m = ResourceMatrix::zeros(SnaMetric::SimilarActivities, resources(log));
    let mut profiles: Vec<BTreeMap<&str, f64>> = vec![BTreeMap::new(); m.resources.len()];
    for e in log.events() {
        if let Some(r) = e.resource.as_deref() {
            *profiles[m.index(r)].entry(e.activity.as_str()).or_insert(0.0) += 1.0;
        }
    }
    let norms: Vec<f64> = profiles
        .iter()
        .map(|p| libm::sqrt(p.values().map(|v| v * v).sum()))
        .collect();
    let n = profiles.len();
    for i in 0..n {
        for j in 0..n {
            m.values[i][j] = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else if i == j {
                1.0
            } else {
                let dot: f64 = profiles[i]
                    .iter()
                    .filter_map(|(a, x)| profiles[j].get(a).map(|y| x * y))
                    .sum();
                dot / (norms[i] * norms[j])
            };
        }
    }
    m
}
