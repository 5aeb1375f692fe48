use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Dfg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    Xor,
    Sequence,
    Parallel,
    Loop,
}

/// A partition of the alphabet. For sequence cuts the blocks are in
/// execution order; for loop cuts the first block is the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub kind: CutKind,
    pub partition: Vec<BTreeSet<String>>,
}

/// Index view of a DFG: activities sorted by name.
pub(crate) struct Relations {
    pub names: Vec<String>,
    pub succ: Vec<Vec<bool>>,
    pub start: Vec<bool>,
    pub end: Vec<bool>,
}

impl Relations {
    pub fn new(dfg: &Dfg) -> Self {
        let names: Vec<String> = dfg.activities.keys().cloned().collect();
        let n = names.len();
        let idx = |a: &str| names.binary_search_by(|x| x.as_str().cmp(a)).ok();
        let mut succ = vec![vec![false; n]; n];
        for (a, b) in dfg.edges.keys() {
            if let (Some(i), Some(j)) = (idx(a), idx(b)) {
                succ[i][j] = true;
            }
        }
        let mark = |set: &alloc::collections::BTreeMap<String, u64>| {
            let mut v = vec![false; n];
            for a in set.keys() {
                if let Some(i) = idx(a) {
                    v[i] = true;
                }
            }
            v
        };
        Relations {
            start: mark(&dfg.start_activities),
            end: mark(&dfg.end_activities),
            names,
            succ,
        }
    }

    fn len(&self) -> usize {
        self.names.len()
    }

    fn block_names(&self, groups: &[Vec<usize>]) -> Vec<BTreeSet<String>> {
        groups
            .iter()
            .map(|g| g.iter().map(|&i| self.names[i].clone()).collect())
            .collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so group order is stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Groups of `members`, ordered by their smallest element.
    fn groups(&mut self, members: &[usize]) -> Vec<Vec<usize>> {
        let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
        for &m in members {
            let r = self.find(m);
            match out.iter_mut().find(|(root, _)| *root == r) {
                Some((_, g)) => g.push(m),
                None => out.push((r, vec![m])),
            }
        }
        out.sort_by_key(|(_, g)| g[0]);
        out.into_iter().map(|(_, g)| g).collect()
    }
}

fn xor_cut(rel: &Relations) -> Option<Vec<Vec<usize>>> {
    let n = rel.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in 0..n {
            if rel.succ[i][j] {
                uf.union(i, j);
            }
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let groups = uf.groups(&all);
    (groups.len() > 1).then_some(groups)
}

fn transitive_closure(succ: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = succ.len();
    let mut reach = succ.to_vec();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

fn sequence_cut(rel: &Relations) -> Option<Vec<Vec<usize>>> {
    let n = rel.len();
    let reach = transitive_closure(&rel.succ);
    let mut uf = UnionFind::new(n);
    // same strongly connected component, or mutually unreachable
    for i in 0..n {
        for j in (i + 1)..n {
            if reach[i][j] == reach[j][i] {
                uf.union(i, j);
            }
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let before = |a: &[usize], b: &[usize]| a.iter().all(|&x| b.iter().all(|&y| reach[x][y] && !reach[y][x]));
    loop {
        let groups = uf.groups(&all);
        let mut merged = false;
        'pairs: for (gi, a) in groups.iter().enumerate() {
            for b in groups.iter().skip(gi + 1) {
                if !before(a, b) && !before(b, a) {
                    uf.union(a[0], b[0]);
                    merged = true;
                    break 'pairs;
                }
            }
        }
        if !merged {
            break;
        }
    }
    let mut groups = uf.groups(&all);
    if groups.len() < 2 {
        return None;
    }
    // groups are totally ordered; rank by how many groups precede each one
    let rank = |g: &Vec<usize>| groups_preceding(g, &reach, n);
    groups.sort_by_key(rank);
    Some(groups)
}

fn groups_preceding(g: &[usize], reach: &[Vec<bool>], n: usize) -> usize {
    (0..n).filter(|&x| !g.contains(&x) && reach[x][g[0]]).count()
}

fn parallel_cut(rel: &Relations) -> Option<Vec<Vec<usize>>> {
    let n = rel.len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if !(rel.succ[i][j] && rel.succ[j][i]) {
                uf.union(i, j);
            }
        }
    }
    let all: Vec<usize> = (0..n).collect();
    loop {
        let groups = uf.groups(&all);
        if groups.len() < 2 {
            return None;
        }
        let complete = |g: &Vec<usize>| g.iter().any(|&i| rel.start[i]) && g.iter().any(|&i| rel.end[i]);
        match groups.iter().position(|g| !complete(g)) {
            None => return Some(groups),
            Some(k) => {
                let other = if k == 0 { 1 } else { 0 };
                uf.union(groups[k][0], groups[other][0]);
            }
        }
    }
}

fn loop_cut(rel: &Relations) -> Option<Vec<Vec<usize>>> {
    let n = rel.len();
    let mut body: Vec<bool> = (0..n).map(|i| rel.start[i] || rel.end[i]).collect();
    loop {
        let rest: Vec<usize> = (0..n).filter(|&i| !body[i]).collect();
        if rest.is_empty() {
            return None;
        }
        let mut uf = UnionFind::new(n);
        for &i in &rest {
            for &j in &rest {
                if rel.succ[i][j] {
                    uf.union(i, j);
                }
            }
        }
        let components = uf.groups(&rest);
        let starts: Vec<usize> = (0..n).filter(|&i| rel.start[i]).collect();
        let ends: Vec<usize> = (0..n).filter(|&i| rel.end[i]).collect();
        let mut rejected = None;
        for c in &components {
            let mut from_end = false;
            let mut to_start = false;
            let mut ok = true;
            for &x in c {
                for b in (0..n).filter(|&b| body[b]) {
                    if rel.succ[b][x] {
                        ok &= rel.end[b];
                        from_end |= rel.end[b];
                    }
                    if rel.succ[x][b] {
                        ok &= rel.start[b];
                        to_start |= rel.start[b];
                    }
                }
                // an activity entered from one end activity is entered from all of them
                if ends.iter().any(|&e| rel.succ[e][x]) && !ends.iter().all(|&e| rel.succ[e][x]) {
                    ok = false;
                }
                if starts.iter().any(|&s| rel.succ[x][s]) && !starts.iter().all(|&s| rel.succ[x][s]) {
                    ok = false;
                }
            }
            if !(ok && from_end && to_start) {
                rejected = Some(c.clone());
                break;
            }
        }
        match rejected {
            Some(c) => c.iter().for_each(|&i| body[i] = true),
            None => {
                let mut out = vec![(0..n).filter(|&i| body[i]).collect::<Vec<_>>()];
                out.extend(components);
                return Some(out);
            }
        }
    }
}

pub(crate) fn find_cut_in(rel: &Relations) -> Option<(CutKind, Vec<Vec<usize>>)> {
    if rel.len() == 0 {
        return None;
    }
    if let Some(p) = xor_cut(rel) {
        return Some((CutKind::Xor, p));
    }
    if let Some(p) = sequence_cut(rel) {
        return Some((CutKind::Sequence, p));
    }
    if let Some(p) = parallel_cut(rel) {
        return Some((CutKind::Parallel, p));
    }
    loop_cut(rel).map(|p| (CutKind::Loop, p))
}

/// Looks for an exclusive-choice, sequence, parallel or loop cut, in that order.
pub fn find_cut(dfg: &Dfg) -> Option<Cut> {
    let rel = Relations::new(dfg);
    find_cut_in(&rel).map(|(kind, groups)| Cut {
        kind,
        partition: rel.block_names(&groups),
    })
}
