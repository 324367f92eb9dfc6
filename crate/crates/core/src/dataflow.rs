//! Forward worklist solver shared by the flow analyses.

use std::collections::VecDeque;

use crate::cfg::{Cfg, NodeId};

/// States before and after every node. Nodes never reached keep `bottom`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution<S> {
    pub before: Vec<S>,
    pub after: Vec<S>,
    /// Number of worklist pops until the fixpoint was reached.
    pub pops: usize,
}

pub fn solve_forward<S: Clone + PartialEq>(
    cfg: &Cfg,
    entry: S,
    bottom: S,
    join: impl Fn(&S, &S) -> S,
    mut transfer: impl FnMut(NodeId, &S) -> S,
) -> Solution<S> {
    let n = cfg.nodes.len();
    let mut before = vec![bottom.clone(); n];
    let mut after = vec![bottom; n];
    let mut visited = vec![false; n];
    let mut queued = vec![false; n];
    let mut work = VecDeque::new();
    before[Cfg::ENTRY] = entry;
    work.push_back(Cfg::ENTRY);
    queued[Cfg::ENTRY] = true;
    let mut pops = 0;
    while let Some(node) = work.pop_front() {
        queued[node] = false;
        pops += 1;
        let out = transfer(node, &before[node]);
        if visited[node] && out == after[node] {
            continue;
        }
        visited[node] = true;
        after[node] = out;
        for &s in &cfg.succs[node] {
            let joined = join(&before[s], &after[node]);
            if joined != before[s] || !visited[s] {
                before[s] = joined;
                if !queued[s] {
                    queued[s] = true;
                    work.push_back(s);
                }
            }
        }
    }
    Solution { before, after, pops }
}
