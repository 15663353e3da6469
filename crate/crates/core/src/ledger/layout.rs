//! Layered layout: a node sits one level above the deepest node it uses.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::Frame;
use crate::plan::StatementId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("frame {frame} has a dependency cycle through `{node}`")]
pub struct LayoutCycle {
    pub frame: u64,
    pub node: StatementId,
}

/// Level of every node in `frame`: 0 without dependencies, otherwise one
/// more than the highest level among its dependencies. Edges to nodes not
/// in the frame are ignored.
pub fn depth_layout(frame: &Frame) -> Result<BTreeMap<StatementId, usize>, LayoutCycle> {
    let pos: HashMap<&StatementId, usize> = frame
        .node_states
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (id, i))
        .collect();
    let n = pos.len();
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (d, node) in &frame.edges {
        if let (Some(&di), Some(&ni)) = (pos.get(d), pos.get(node)) {
            deps[ni].push(di);
        }
    }
    // Iterative DFS with colors: 0 unvisited, 1 on stack, 2 done.
    let mut level = vec![0usize; n];
    let mut color = vec![0u8; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        color[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&d) = deps[v].get(*next) {
                *next += 1;
                match color[d] {
                    0 => {
                        color[d] = 1;
                        stack.push((d, 0));
                    }
                    1 => {
                        return Err(LayoutCycle {
                            frame: frame.index,
                            node: frame.node_states[d].0.clone(),
                        })
                    }
                    _ => {}
                }
            } else {
                level[v] = deps[v].iter().map(|&d| level[d] + 1).max().unwrap_or(0);
                color[v] = 2;
                stack.pop();
            }
        }
    }
    Ok(frame
        .node_states
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (id.clone(), level[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::FrameStatus;

    fn frame(nodes: &[&str], edges: &[(&str, &str)]) -> Frame {
        Frame {
            index: 0,
            plan_revision: 0,
            node_states: nodes.iter().map(|n| ((*n).into(), FrameStatus::NotYet)).collect(),
            edges: edges.iter().map(|(a, b)| ((*a).into(), (*b).into())).collect(),
        }
    }

    #[test]
    fn chain_levels() {
        let l = depth_layout(&frame(&["A", "B", "C"], &[("A", "B"), ("B", "C")])).unwrap();
        assert_eq!(l[&StatementId::from("A")], 0);
        assert_eq!(l[&StatementId::from("B")], 1);
        assert_eq!(l[&StatementId::from("C")], 2);
    }

    #[test]
    fn diamond_with_shortcut() {
        // A is used by B and C, both used by D, and D also uses A directly.
        let f = frame(
            &["A", "B", "C", "D"],
            &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"), ("A", "D")],
        );
        let l = depth_layout(&f).unwrap();
        assert_eq!(l[&StatementId::from("D")], 2);
    }

    #[test]
    fn cycle_is_an_error() {
        assert!(depth_layout(&frame(&["A", "B"], &[("A", "B"), ("B", "A")])).is_err());
    }
}
