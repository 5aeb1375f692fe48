use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bpmn::{BpmnGraph, NodeKind};
use crate::eventlog::{AttributeValue, EventLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    /// Guards with a lower training accuracy are suppressed.
    pub min_accuracy: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig { min_accuracy: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GuardValue {
    Number(f64),
    Boolean(bool),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub attribute: String,
    pub comparator: Comparator,
    pub value: GuardValue,
}

impl Predicate {
    pub fn holds(&self, value: Option<&AttributeValue>) -> bool {
        let Some(v) = value else { return false };
        match (&self.comparator, &self.value) {
            (Comparator::Lt, GuardValue::Number(t)) => v.as_number().is_some_and(|x| x < *t),
            (Comparator::Ge, GuardValue::Number(t)) => v.as_number().is_some_and(|x| x >= *t),
            (Comparator::Eq, GuardValue::Text(s)) => matches!(v, AttributeValue::String(x) if x == s),
            (Comparator::Eq, GuardValue::Boolean(b)) => matches!(v, AttributeValue::Boolean(x) if x == b),
            (Comparator::Eq, GuardValue::Number(t)) => v.as_number() == Some(*t),
            _ => false,
        }
    }
}

/// Branch condition learned at an exclusive gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guard {
    pub gateway_id: String,
    /// Outgoing sequence flow taken when the predicate holds.
    pub branch: String,
    pub predicate: Predicate,
    /// Number of observed gateway decisions.
    pub support: usize,
    /// Training accuracy of the stump (both sides).
    pub accuracy: f64,
    pub information_gain: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub guards: Vec<Guard>,
    /// Guards below the accuracy floor.
    pub suppressed: Vec<Guard>,
    /// Logged gateway ids that the graph does not contain.
    pub unknown_gateways: Vec<String>,
}

struct Instance<'a> {
    snapshot: BTreeMap<&'a str, &'a AttributeValue>,
    class: usize,
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * libm::log2(p)
        })
        .sum()
}

fn majority(counts: &[usize]) -> (usize, usize) {
    let mut best = (0, 0);
    for (class, &c) in counts.iter().enumerate() {
        if c > best.1 {
            best = (class, c);
        }
    }
    best
}

struct Split {
    attribute: String,
    test: Test,
    gain: f64,
    accuracy: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

enum Test {
    Below(f64),
    Equals(GuardValue),
}

fn evaluate(instances: &[Instance<'_>], n_classes: usize, goes_left: impl Fn(&Instance<'_>) -> bool) -> (f64, f64, Vec<usize>, Vec<usize>) {
    let mut left = vec![0; n_classes];
    let mut right = vec![0; n_classes];
    for inst in instances {
        if goes_left(inst) {
            left[inst.class] += 1;
        } else {
            right[inst.class] += 1;
        }
    }
    let n = instances.len() as f64;
    let (nl, nr) = (left.iter().sum::<usize>() as f64, right.iter().sum::<usize>() as f64);
    let mut all = vec![0; n_classes];
    instances.iter().for_each(|i| all[i.class] += 1);
    let gain = entropy(&all) - (nl / n) * entropy(&left) - (nr / n) * entropy(&right);
    let accuracy = (majority(&left).1 + majority(&right).1) as f64 / n;
    (gain, accuracy, left, right)
}

fn better(candidate: &Split, best: &Option<Split>) -> bool {
    const EPS: f64 = 1e-12;
    match best {
        None => true,
        Some(b) => candidate.gain > b.gain + EPS || (candidate.gain > b.gain - EPS && candidate.accuracy > b.accuracy + EPS),
    }
}

fn best_split(instances: &[Instance<'_>], n_classes: usize) -> Option<Split> {
    let names: BTreeSet<&str> = instances.iter().flat_map(|i| i.snapshot.keys().copied()).collect();
    let mut best: Option<Split> = None;
    for name in names {
        let values: Vec<&AttributeValue> = instances.iter().filter_map(|i| i.snapshot.get(name).copied()).collect();
        let mut numbers: Vec<f64> = values.iter().filter_map(|v| v.as_number()).collect();
        numbers.sort_by(|a, b| a.partial_cmp(b).expect("finite attribute values"));
        numbers.dedup();
        for w in numbers.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            let (gain, accuracy, left, right) = evaluate(instances, n_classes, |i| {
                i.snapshot.get(name).and_then(|v| v.as_number()).is_some_and(|x| x < threshold)
            });
            let split = Split {
                attribute: String::from(name),
                test: Test::Below(threshold),
                gain,
                accuracy,
                left,
                right,
            };
            if better(&split, &best) {
                best = Some(split);
            }
        }
        let mut categories: Vec<GuardValue> = Vec::new();
        for v in &values {
            let g = match v {
                AttributeValue::String(s) => GuardValue::Text(s.clone()),
                AttributeValue::Boolean(b) => GuardValue::Boolean(*b),
                _ => continue,
            };
            if !categories.contains(&g) {
                categories.push(g);
            }
        }
        for value in categories {
            let probe = Predicate {
                attribute: String::from(name),
                comparator: Comparator::Eq,
                value: value.clone(),
            };
            let (gain, accuracy, left, right) = evaluate(instances, n_classes, |i| probe.holds(i.snapshot.get(name).copied()));
            let split = Split {
                attribute: String::from(name),
                test: Test::Equals(value),
                gain,
                accuracy,
                left,
                right,
            };
            if better(&split, &best) {
                best = Some(split);
            }
        }
    }
    best
}

/// Learns one decision stump per exclusive gateway.
///
/// A training instance is a logged traversal of the gateway: its features
/// are the latest value of every attribute seen so far in the case, and its
/// class is the outgoing flow leading to the next logged element.
pub fn decision_mining(log: &EventLog, graph: &BpmnGraph, config: &DecisionConfig) -> DecisionReport {
    let mut report = DecisionReport::default();
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    for e in log.events() {
        if e.activity_type == "exclusiveGateway" && !graph.nodes.contains_key(&e.activity_id) {
            unknown.insert(e.activity_id.clone());
        }
    }
    report.unknown_gateways = unknown.into_iter().collect();

    for (gateway_id, node) in &graph.nodes {
        if node.kind != NodeKind::ExclusiveGateway {
            continue;
        }
        let branches: Vec<(&str, &str)> = graph.outgoing(gateway_id).map(|f| (f.id.as_str(), f.target.as_str())).collect();
        if branches.len() < 2 {
            continue;
        }
        let mut instances = Vec::new();
        for trace in &log.traces {
            let mut snapshot: BTreeMap<&str, &AttributeValue> = BTreeMap::new();
            for (i, e) in trace.events.iter().enumerate() {
                for (k, v) in &e.attributes {
                    snapshot.insert(k.as_str(), v);
                }
                if &e.activity_id != gateway_id {
                    continue;
                }
                let Some(next) = trace.events.get(i + 1) else { continue };
                if let Some(class) = branches.iter().position(|(_, target)| *target == next.activity_id) {
                    instances.push(Instance {
                        snapshot: snapshot.clone(),
                        class,
                    });
                }
            }
        }
        let observed: BTreeSet<usize> = instances.iter().map(|i| i.class).collect();
        if observed.len() < 2 {
            continue;
        }
        let Some(split) = best_split(&instances, branches.len()) else { continue };
        if split.gain <= 1e-12 {
            continue;
        }
        let (lc, lmaj) = majority(&split.left);
        let (rc, rmaj) = majority(&split.right);
        let purity = |maj: usize, side: &[usize]| {
            let n: usize = side.iter().sum();
            if n == 0 {
                0.0
            } else {
                maj as f64 / n as f64
            }
        };
        let use_right = matches!(split.test, Test::Below(_)) && purity(rmaj, &split.right) > purity(lmaj, &split.left);
        let (class, predicate) = match split.test {
            Test::Below(t) if use_right => (
                rc,
                Predicate {
                    attribute: split.attribute,
                    comparator: Comparator::Ge,
                    value: GuardValue::Number(t),
                },
            ),
            Test::Below(t) => (
                lc,
                Predicate {
                    attribute: split.attribute,
                    comparator: Comparator::Lt,
                    value: GuardValue::Number(t),
                },
            ),
            Test::Equals(v) => (
                lc,
                Predicate {
                    attribute: split.attribute,
                    comparator: Comparator::Eq,
                    value: v,
                },
            ),
        };
        let guard = Guard {
            gateway_id: gateway_id.clone(),
            branch: String::from(branches[class].0),
            predicate,
            support: instances.len(),
            accuracy: split.accuracy,
            information_gain: split.gain,
        };
        if guard.accuracy < config.min_accuracy {
            report.suppressed.push(guard);
        } else {
            report.guards.push(guard);
        }
    }
    report
}
