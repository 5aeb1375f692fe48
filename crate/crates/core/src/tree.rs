//! Block-structured process trees and their Petri-net translation.
//!
//! Text notation: `->(a, b)` sequence, `X(a, b)` exclusive choice, `+(a, b)`
//! parallel, `*(do, redo)` loop, `tau` silent step. Activity names that are
//! not plain identifiers are single-quoted (`'Approve Invoice'`).

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::petri::{Marking, PetriNet};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProcessTree {
    Activity { label: String },
    Silent,
    Sequence { children: Vec<ProcessTree> },
    Xor { children: Vec<ProcessTree> },
    Parallel { children: Vec<ProcessTree> },
    /// Execute `body`, then optionally `redo` followed by `body` again, any number of times.
    Loop { body: Box<ProcessTree>, redo: Box<ProcessTree> },
}

impl ProcessTree {
    pub fn activity(label: impl Into<String>) -> Self {
        ProcessTree::Activity { label: label.into() }
    }

    pub fn sequence(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Sequence { children }
    }

    pub fn xor(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Xor { children }
    }

    pub fn parallel(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Parallel { children }
    }

    pub fn looped(body: ProcessTree, redo: ProcessTree) -> Self {
        ProcessTree::Loop {
            body: Box::new(body),
            redo: Box::new(redo),
        }
    }

    /// Operators need at least two children.
    pub fn is_valid(&self) -> bool {
        match self {
            ProcessTree::Activity { label } => !label.is_empty(),
            ProcessTree::Silent => true,
            ProcessTree::Sequence { children } | ProcessTree::Xor { children } | ProcessTree::Parallel { children } => {
                children.len() >= 2 && children.iter().all(ProcessTree::is_valid)
            }
            ProcessTree::Loop { body, redo } => body.is_valid() && redo.is_valid(),
        }
    }

    /// Visible labels, in left-to-right order (with repeats).
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ProcessTree::Activity { label } => out.push(label),
            ProcessTree::Silent => {}
            ProcessTree::Sequence { children } | ProcessTree::Xor { children } | ProcessTree::Parallel { children } => {
                children.iter().for_each(|c| c.collect_labels(out))
            }
            ProcessTree::Loop { body, redo } => {
                body.collect_labels(out);
                redo.collect_labels(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ProcessTree::Activity { .. } | ProcessTree::Silent => 0,
            ProcessTree::Sequence { children } | ProcessTree::Xor { children } | ProcessTree::Parallel { children } => {
                1 + children.iter().map(ProcessTree::depth).max().unwrap_or(0)
            }
            ProcessTree::Loop { body, redo } => 1 + body.depth().max(redo.depth()),
        }
    }
}

fn is_plain(label: &str) -> bool {
    !label.is_empty()
        && label != "tau"
        && label.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.' || c == '-')
        && !label.starts_with("->")
}

fn write_children(f: &mut fmt::Formatter<'_>, op: &str, children: &[ProcessTree]) -> fmt::Result {
    write!(f, "{}(", op)?;
    for (i, c) in children.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}", c)?;
    }
    f.write_str(")")
}

impl fmt::Display for ProcessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessTree::Activity { label } if is_plain(label) => f.write_str(label),
            ProcessTree::Activity { label } => {
                write!(f, "'{}'", label.replace('\\', "\\\\").replace('\'', "\\'"))
            }
            ProcessTree::Silent => f.write_str("tau"),
            ProcessTree::Sequence { children } => write_children(f, "->", children),
            ProcessTree::Xor { children } => write_children(f, "X", children),
            ProcessTree::Parallel { children } => write_children(f, "+", children),
            ProcessTree::Loop { body, redo } => write!(f, "*({}, {})", body, redo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeParseError {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected `{found}` at offset {offset}")]
    Unexpected { found: char, offset: usize },
    #[error("operator at offset {offset} needs at least two children")]
    TooFewChildren { offset: usize },
    #[error("loop at offset {offset} needs exactly two children")]
    LoopArity { offset: usize },
    #[error("trailing input at offset {0}")]
    Trailing(usize),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, want: char) -> Result<(), TreeParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(found) => Err(TreeParseError::Unexpected { found, offset: self.pos }),
            None => Err(TreeParseError::UnexpectedEnd),
        }
    }

    fn children(&mut self) -> Result<Vec<ProcessTree>, TreeParseError> {
        self.expect('(')?;
        let mut out = vec![self.node()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    out.push(self.node()?);
                }
                Some(')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(found) => return Err(TreeParseError::Unexpected { found, offset: self.pos }),
                None => return Err(TreeParseError::UnexpectedEnd),
            }
        }
    }

    fn quoted(&mut self) -> Result<String, TreeParseError> {
        self.pos += 1;
        let mut out = String::new();
        let mut escaped = false;
        for c in self.src[self.pos..].chars() {
            self.pos += c.len_utf8();
            if escaped {
                out.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '\'' {
                return Ok(out);
            } else {
                out.push(c);
            }
        }
        Err(TreeParseError::UnexpectedEnd)
    }

    fn node(&mut self) -> Result<ProcessTree, TreeParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let op = if rest.starts_with("->") {
            Some(("->", 0))
        } else if rest.starts_with("X(") || rest.starts_with("X (") {
            Some(("X", 1))
        } else if rest.starts_with('+') {
            Some(("+", 2))
        } else if rest.starts_with('*') {
            Some(("*", 3))
        } else {
            None
        };
        if let Some((tok, kind)) = op {
            self.pos += tok.len();
            let children = self.children()?;
            return match kind {
                3 => {
                    let [body, redo]: [ProcessTree; 2] =
                        children.try_into().map_err(|_| TreeParseError::LoopArity { offset: start })?;
                    Ok(ProcessTree::looped(body, redo))
                }
                _ if children.len() < 2 => Err(TreeParseError::TooFewChildren { offset: start }),
                0 => Ok(ProcessTree::sequence(children)),
                1 => Ok(ProcessTree::xor(children)),
                _ => Ok(ProcessTree::parallel(children)),
            };
        }
        match self.peek() {
            None => Err(TreeParseError::UnexpectedEnd),
            Some('\'') => Ok(ProcessTree::activity(self.quoted()?)),
            Some(_) => {
                let len = rest
                    .find(|c: char| c == ',' || c == ')' || c == '(' || c.is_whitespace())
                    .unwrap_or(rest.len());
                if len == 0 {
                    return Err(TreeParseError::Unexpected {
                        found: rest.chars().next().unwrap_or(' '),
                        offset: self.pos,
                    });
                }
                self.pos += len;
                let word = &rest[..len];
                Ok(if word == "tau" {
                    ProcessTree::Silent
                } else {
                    ProcessTree::activity(word)
                })
            }
        }
    }
}

impl core::str::FromStr for ProcessTree {
    type Err = TreeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let tree = p.node()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(TreeParseError::Trailing(p.pos));
        }
        Ok(tree)
    }
}

struct NetBuilder {
    net: PetriNet,
    places: usize,
    transitions: usize,
}

impl NetBuilder {
    fn place(&mut self) -> usize {
        let id = format!("p{}", self.places);
        self.places += 1;
        self.net.add_place(id).expect("fresh id")
    }

    fn transition(&mut self, label: Option<&str>) -> usize {
        let id = match label {
            Some(_) => format!("t{}", self.transitions),
            None => format!("tau{}", self.transitions),
        };
        self.transitions += 1;
        self.net.add_transition(id, label.map(ToString::to_string)).expect("fresh id")
    }

    fn step(&mut self, label: Option<&str>, from: usize, to: usize) {
        let t = self.transition(label);
        self.net.connect_input(from, t);
        self.net.connect_output(t, to);
    }

    /// Wires `tree` so that it consumes one token from `entry` and leaves one in `exit`.
    fn build(&mut self, tree: &ProcessTree, entry: usize, exit: usize) {
        match tree {
            ProcessTree::Activity { label } => self.step(Some(label), entry, exit),
            ProcessTree::Silent => self.step(None, entry, exit),
            ProcessTree::Sequence { children } => {
                let mut from = entry;
                for (i, c) in children.iter().enumerate() {
                    let to = if i + 1 == children.len() { exit } else { self.place() };
                    self.build(c, from, to);
                    from = to;
                }
            }
            ProcessTree::Xor { children } => {
                for c in children {
                    self.build(c, entry, exit);
                }
            }
            ProcessTree::Parallel { children } => {
                let split = self.transition(None);
                let join = self.transition(None);
                self.net.connect_input(entry, split);
                self.net.connect_output(join, exit);
                for c in children {
                    let (a, b) = (self.place(), self.place());
                    self.net.connect_output(split, a);
                    self.net.connect_input(b, join);
                    self.build(c, a, b);
                }
            }
            ProcessTree::Loop { body, redo } => {
                // the loop gets private places so a redo never re-enters a sibling choice
                let (head, tail) = (self.place(), self.place());
                self.step(None, entry, head);
                self.build(body, head, tail);
                self.build(redo, tail, head);
                self.step(None, tail, exit);
            }
        }
    }
}

/// Translates a tree into a workflow net with one source and one sink place.
pub fn tree_to_petri(tree: &ProcessTree) -> PetriNet {
    let mut b = NetBuilder {
        net: PetriNet::new(),
        places: 0,
        transitions: 0,
    };
    let source = b.net.add_place("source").expect("fresh id");
    let sink = b.net.add_place("sink").expect("fresh id");
    b.build(tree, source, sink);
    b.net.initial = Marking::single("source");
    b.net.final_marking = Marking::single("sink");
    b.net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petri::bounded_language;
    use alloc::collections::BTreeSet;

    fn lang(tree: &str, len: usize) -> BTreeSet<Vec<String>> {
        let t: ProcessTree = tree.parse().unwrap();
        bounded_language(&tree_to_petri(&t), len, 100_000).unwrap()
    }

    fn words(ws: &[&[&str]]) -> BTreeSet<Vec<String>> {
        ws.iter().map(|w| w.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn parse_and_print() {
        for src in ["->(a, X(b, c))", "+(a, *(b, tau))", "X(tau, 'Approve Invoice')", "a"] {
            let t: ProcessTree = src.parse().unwrap();
            assert_eq!(t.to_string(), src);
            assert!(t.is_valid());
        }
    }

    #[test]
    fn parse_errors() {
        assert_eq!("->(a)".parse::<ProcessTree>(), Err(TreeParseError::TooFewChildren { offset: 0 }));
        assert_eq!("*(a, b, c)".parse::<ProcessTree>(), Err(TreeParseError::LoopArity { offset: 0 }));
        assert!("->(a, b".parse::<ProcessTree>().is_err());
        assert!("a b".parse::<ProcessTree>().is_err());
    }

    #[test]
    fn leaf_net() {
        let net = tree_to_petri(&ProcessTree::activity("a"));
        assert_eq!(net.places().len(), 2);
        assert_eq!(net.transitions().len(), 1);
        assert_eq!(net.transitions()[0].label.as_deref(), Some("a"));
        assert!(net.is_workflow_net());
    }

    #[test]
    fn small_languages() {
        assert_eq!(lang("->(a, b)", 10), words(&[&["a", "b"]]));
        assert_eq!(lang("X(a, +(b, c))", 10), words(&[&["a"], &["b", "c"], &["c", "b"]]));
        assert_eq!(lang("*(a, b)", 5), words(&[&["a"], &["a", "b", "a"], &["a", "b", "a", "b", "a"]]));
        assert_eq!(lang("X(tau, a)", 5), words(&[&[], &["a"]]));
    }

    #[test]
    fn loop_redo_does_not_leak_into_sibling_choice() {
        assert_eq!(
            lang("X(*(a, b), c)", 3),
            words(&[&["a"], &["a", "b", "a"], &["c"]])
        );
    }
}
