//! The shared proof plan.
//!
//! A [`ProofPlan`] is a dependency-ordered DAG of [`PlanNode`]s with exactly
//! one anchored target. It is the only state that crosses agent invocations.
//! All structural edits go through [`ProofPlan::apply_diff`], which either
//! yields a valid plan plus the set of invalidated nodes or rejects the diff
//! without touching the plan.

mod format;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{parse_plan, render_plan, PlanFormatError};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(String);

impl StatementId {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StatementId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    #[default]
    Open,
    Failing,
    Closed,
}

impl NodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Open => "open",
            NodeStatus::Failing => "failing",
            NodeStatus::Closed => "closed",
        }
    }
}

/// The original target declaration. Its signature must survive the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorDecl {
    pub decl_name: String,
    /// Normalized header: keyword, name, binders, hypotheses, conclusion.
    pub signature: String,
    /// The `sorry` body exactly as given in the input file.
    pub original_body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanNode {
    pub id: StatementId,
    pub informal: String,
    #[serde(default)]
    pub sketch: String,
    #[serde(default)]
    pub deps: Vec<StatementId>,
    #[serde(default)]
    pub status: NodeStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorDecl>,
}

impl PlanNode {
    pub fn new(id: impl Into<StatementId>, informal: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            informal: informal.into(),
            sketch: String::new(),
            deps: Vec::new(),
            status: NodeStatus::Open,
            anchor: None,
        }
    }

    pub fn with_deps<I, S>(mut self, deps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<StatementId>,
    {
        self.deps = deps.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_sketch(mut self, sketch: impl Into<String>) -> Self {
        self.sketch = sketch.into();
        self
    }

    pub fn with_anchor(mut self, anchor: AnchorDecl) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn with_status(mut self, status: NodeStatus) -> Self {
        self.status = status;
        self
    }
}

impl From<String> for StatementId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffCause {
    InitialPlan,
    FaithfulnessFail,
    MathFail,
    DecompositionSplit,
}

impl DiffCause {
    pub fn as_str(self) -> &'static str {
        match self {
            DiffCause::InitialPlan => "initial_plan",
            DiffCause::FaithfulnessFail => "faithfulness_fail",
            DiffCause::MathFail => "math_fail",
            DiffCause::DecompositionSplit => "decomposition_split",
        }
    }
}

/// In-place edit of an existing node. `None` fields are left unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    pub id: StatementId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sketch: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deps: Option<Vec<StatementId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDiff {
    pub cause: DiffCause,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub adds: Vec<PlanNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removes: Vec<StatementId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rewrites: Vec<Rewrite>,
}

impl PlanDiff {
    pub fn new(cause: DiffCause) -> Self {
        Self {
            cause,
            adds: Vec::new(),
            removes: Vec::new(),
            rewrites: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.adds.is_empty() && self.removes.is_empty() && self.rewrites.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("dependency cycle: {}", fmt_cycle(.0))]
    Cycle(Vec<StatementId>),
    #[error("plan must have exactly one anchored node, found {0}")]
    Anchor(usize),
    #[error("node `{node}` depends on unknown node `{dep}`")]
    DanglingDep { node: StatementId, dep: StatementId },
    #[error("node `{0}` depends on itself")]
    SelfDep(StatementId),
    #[error("duplicate dependency `{dep}` on node `{node}`")]
    DuplicateDep { node: StatementId, dep: StatementId },
    #[error("duplicate node id `{0}`")]
    DuplicateId(StatementId),
    #[error("unknown node `{0}`")]
    UnknownNode(StatementId),
    #[error("diff rejected: {0}")]
    RejectedDiff(Box<PlanError>),
    #[error("cannot remove the anchored target `{0}`")]
    RemovesAnchor(StatementId),
    #[error("node id `{0}` was retired and cannot be reused")]
    RetiredId(StatementId),
    #[error("added node `{0}` may not carry an anchor")]
    AnchorOnAdd(StatementId),
}

fn fmt_cycle(ids: &[StatementId]) -> String {
    ids.iter()
        .map(StatementId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofPlan {
    /// Insertion order; ties in the topological order are broken by it.
    nodes: Vec<PlanNode>,
    order: Vec<StatementId>,
    revision: u64,
    /// Ids of removed nodes, never to be reused.
    retired: BTreeSet<StatementId>,
    index: HashMap<StatementId, usize>,
}

/// Outcome of [`ProofPlan::apply_diff`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub plan: ProofPlan,
    pub invalidated: BTreeSet<StatementId>,
}

impl ProofPlan {
    /// Builds a plan at revision 0 from nodes in insertion order.
    pub fn create(nodes: Vec<PlanNode>) -> Result<Self, PlanError> {
        Self::assemble(nodes, 0, BTreeSet::new())
    }

    /// Rebuilds a plan from stored parts (used when deserializing).
    pub(crate) fn assemble(
        nodes: Vec<PlanNode>,
        revision: u64,
        retired: BTreeSet<StatementId>,
    ) -> Result<Self, PlanError> {
        let anchors = nodes.iter().filter(|n| n.anchor.is_some()).count();
        if anchors != 1 {
            return Err(PlanError::Anchor(anchors));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if retired.contains(&n.id) {
                return Err(PlanError::RetiredId(n.id.clone()));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(PlanError::DuplicateId(n.id.clone()));
            }
        }
        for n in &nodes {
            let mut seen = HashSet::new();
            for d in &n.deps {
                if *d == n.id {
                    return Err(PlanError::SelfDep(n.id.clone()));
                }
                if !index.contains_key(d) {
                    return Err(PlanError::DanglingDep {
                        node: n.id.clone(),
                        dep: d.clone(),
                    });
                }
                if !seen.insert(d) {
                    return Err(PlanError::DuplicateDep {
                        node: n.id.clone(),
                        dep: d.clone(),
                    });
                }
            }
        }
        let order = topo_order(&nodes, &index)?;
        Ok(Self {
            nodes,
            order,
            revision,
            retired,
            index,
        })
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Topological order.
    pub fn order(&self) -> &[StatementId] {
        &self.order
    }

    /// Nodes in insertion order.
    pub fn nodes(&self) -> &[PlanNode] {
        &self.nodes
    }

    pub fn retired(&self) -> &BTreeSet<StatementId> {
        &self.retired
    }

    pub fn get(&self, id: &StatementId) -> Option<&PlanNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &StatementId) -> bool {
        self.index.contains_key(id)
    }

    pub fn anchor_node(&self) -> &PlanNode {
        self.nodes
            .iter()
            .find(|n| n.anchor.is_some())
            .expect("plan invariant: exactly one anchored node")
    }

    pub fn anchor(&self) -> &AnchorDecl {
        self.anchor_node()
            .anchor
            .as_ref()
            .expect("plan invariant: exactly one anchored node")
    }

    pub fn position(&self, id: &StatementId) -> Option<usize> {
        self.order.iter().position(|o| o == id)
    }

    /// Dependency edges `(dep, node)` in topological order of `node`.
    pub fn edges(&self) -> Vec<(StatementId, StatementId)> {
        self.order
            .iter()
            .filter_map(|id| self.get(id))
            .flat_map(|n| n.deps.iter().map(move |d| (d.clone(), n.id.clone())))
            .collect()
    }

    /// Records a status change made by the loop. Structure is untouched.
    pub fn set_status(&mut self, id: &StatementId, status: NodeStatus) -> Result<NodeStatus, PlanError> {
        let i = *self
            .index
            .get(id)
            .ok_or_else(|| PlanError::UnknownNode(id.clone()))?;
        Ok(std::mem::replace(&mut self.nodes[i].status, status))
    }

    /// Earliest node in topological order that is open or failing and whose
    /// dependencies are all closed.
    pub fn next_open_statement(&self) -> Option<&StatementId> {
        self.order.iter().find(|id| {
            let n = &self.nodes[self.index[*id]];
            n.status != NodeStatus::Closed
                && n
                    .deps
                    .iter()
                    .all(|d| self.nodes[self.index[d]].status == NodeStatus::Closed)
        })
    }

    pub fn is_complete(&self) -> bool {
        self.nodes.iter().all(|n| n.status == NodeStatus::Closed)
    }

    /// Applies `diff`, returning the next revision and every node whose status
    /// was reset.
    ///
    /// Invalidated nodes are the rewritten nodes themselves plus everything
    /// that transitively depends on a node whose statement or dependencies
    /// changed, or on a removed node. A sketch-only rewrite invalidates just
    /// the rewritten node. Added nodes start open and are not reported.
    pub fn apply_diff(&self, diff: &PlanDiff) -> Result<Applied, PlanError> {
        self.try_apply(diff).map_err(|e| PlanError::RejectedDiff(Box::new(e)))
    }

    fn try_apply(&self, diff: &PlanDiff) -> Result<Applied, PlanError> {
        let anchor_id = self.anchor_node().id.clone();
        let removes: BTreeSet<StatementId> = diff.removes.iter().cloned().collect();
        for r in &removes {
            if !self.contains(r) {
                return Err(PlanError::UnknownNode(r.clone()));
            }
            if *r == anchor_id {
                return Err(PlanError::RemovesAnchor(r.clone()));
            }
        }

        let mut nodes: Vec<PlanNode> = self
            .nodes
            .iter()
            .filter(|n| !removes.contains(&n.id))
            .cloned()
            .collect();
        let mut pos: HashMap<StatementId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();

        // Statement/deps changes propagate downstream; sketch-only ones do not.
        let mut propagating: BTreeSet<StatementId> = removes.clone();
        let mut changed: BTreeSet<StatementId> = BTreeSet::new();
        let mut rewritten = HashSet::new();
        for rw in &diff.rewrites {
            let &i = pos
                .get(&rw.id)
                .ok_or_else(|| PlanError::UnknownNode(rw.id.clone()))?;
            if !rewritten.insert(rw.id.clone()) {
                return Err(PlanError::DuplicateId(rw.id.clone()));
            }
            let node = &mut nodes[i];
            let mut statement_changed = false;
            let mut sketch_changed = false;
            if let Some(informal) = &rw.informal {
                if *informal != node.informal {
                    node.informal = informal.clone();
                    statement_changed = true;
                }
            }
            if let Some(deps) = &rw.deps {
                if *deps != node.deps {
                    node.deps = deps.clone();
                    statement_changed = true;
                }
            }
            if let Some(sketch) = &rw.sketch {
                if *sketch != node.sketch {
                    node.sketch = sketch.clone();
                    sketch_changed = true;
                }
            }
            if statement_changed {
                propagating.insert(rw.id.clone());
            }
            if statement_changed || sketch_changed {
                changed.insert(rw.id.clone());
            }
        }

        for add in &diff.adds {
            if add.anchor.is_some() {
                return Err(PlanError::AnchorOnAdd(add.id.clone()));
            }
            if self.retired.contains(&add.id) || removes.contains(&add.id) {
                return Err(PlanError::RetiredId(add.id.clone()));
            }
            if pos.contains_key(&add.id) {
                return Err(PlanError::DuplicateId(add.id.clone()));
            }
            pos.insert(add.id.clone(), nodes.len());
            let mut node = add.clone();
            node.status = NodeStatus::Open;
            nodes.push(node);
        }

        let mut retired = self.retired.clone();
        retired.extend(removes.iter().cloned());
        let mut plan = Self::assemble(nodes, self.revision + 1, retired)?;

        // Downstream closure over reverse-dependency edges of the new plan.
        // Dependents of removed nodes were necessarily rewritten (else the
        // plan would have dangling deps) and so are already seeded.
        let mut dependents: HashMap<&StatementId, Vec<&StatementId>> = HashMap::new();
        for n in &plan.nodes {
            for d in &n.deps {
                dependents.entry(d).or_default().push(&n.id);
            }
        }
        let mut invalidated: BTreeSet<StatementId> = changed;
        let mut queue: VecDeque<&StatementId> = propagating.iter().collect();
        let mut seen: HashSet<&StatementId> = propagating.iter().collect();
        while let Some(id) = queue.pop_front() {
            for &dep_of in dependents.get(id).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(dep_of) {
                    invalidated.insert(dep_of.clone());
                    queue.push_back(dep_of);
                }
            }
        }
        // Added nodes start open anyway and are not reported.
        invalidated.retain(|id| plan.contains(id) && self.contains(id));
        for id in &invalidated {
            let i = plan.index[id];
            plan.nodes[i].status = NodeStatus::Open;
        }
        Ok(Applied { plan, invalidated })
    }
}

/// Kahn's algorithm, always taking the ready node with the lowest insertion
/// index.
fn topo_order(
    nodes: &[PlanNode],
    index: &HashMap<StatementId, usize>,
) -> Result<Vec<StatementId>, PlanError> {
    let n = nodes.len();
    let mut indegree = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        indegree[i] = node.deps.len();
        for d in &node.deps {
            dependents[index[d]].push(i);
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(nodes[i].id.clone());
        for &j in &dependents[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    Err(PlanError::Cycle(find_cycle(nodes, index, &indegree)))
}

/// One cycle among the nodes Kahn's algorithm could not order.
fn find_cycle(
    nodes: &[PlanNode],
    index: &HashMap<StatementId, usize>,
    indegree: &[usize],
) -> Vec<StatementId> {
    let stuck = |i: usize| indegree[i] > 0;
    let Some(start) = (0..nodes.len()).find(|&i| stuck(i)) else {
        return Vec::new();
    };
    // Every stuck node has a stuck dependency; walk until a node repeats.
    let mut path = vec![start];
    let mut on_path: HashMap<usize, usize> = HashMap::from([(start, 0)]);
    let mut cur = start;
    loop {
        let next = nodes[cur]
            .deps
            .iter()
            .map(|d| index[d])
            .find(|&j| stuck(j))
            .expect("stuck node has a stuck dependency");
        if let Some(&at) = on_path.get(&next) {
            let mut cycle: Vec<StatementId> = path[at..].iter().map(|&i| nodes[i].id.clone()).collect();
            cycle.push(nodes[next].id.clone());
            return cycle;
        }
        on_path.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}
