//! Dependency graph over plan steps and the completion-tracking state that
//! gates execution.
//!
//! An edge `i -> j` means step `i` is a precondition of step `j`. A step is
//! ready once every one of its prerequisites is in the completed set.
//! Simultaneously ready steps are always reported in ascending id order.

use crate::plan::{MissionPlan, StepId};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("precondition cycle: {0:?}")]
    Cycle(Vec<StepId>),
    #[error("step {step} references missing step {reference}")]
    DanglingReference { step: StepId, reference: StepId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("step {0} is not executing")]
    NotExecuting(StepId),
    #[error("step {0} is not ready to start")]
    NotReady(StepId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    prerequisites: Vec<BTreeSet<StepId>>,
    dependents: Vec<BTreeSet<StepId>>,
}

pub fn build_graph(plan: &MissionPlan) -> Result<DependencyGraph, GraphError> {
    DependencyGraph::from_preconditions(plan.steps.iter().map(|s| s.preconditions.clone()).collect())
}

impl DependencyGraph {
    /// Build from per-node prerequisite sets; node `i` is the i-th entry.
    pub fn from_preconditions(prerequisites: Vec<BTreeSet<StepId>>) -> Result<Self, GraphError> {
        let n = prerequisites.len();
        let mut dependents = vec![BTreeSet::new(); n];
        for (step, pre) in prerequisites.iter().enumerate() {
            for &reference in pre {
                if reference >= n {
                    return Err(GraphError::DanglingReference { step, reference });
                }
                dependents[reference].insert(step);
            }
        }
        let graph = Self { prerequisites, dependents };
        if let Some(cycle) = graph.find_cycle() {
            return Err(GraphError::Cycle(cycle));
        }
        Ok(graph)
    }

    /// Iterative DFS; returns one cycle rotated to start at its smallest id.
    fn find_cycle(&self) -> Option<Vec<StepId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let n = self.len();
        let mut mark = vec![Mark::New; n];
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            let mut path: Vec<StepId> = vec![root];
            let mut iters: Vec<std::collections::btree_set::Iter<'_, StepId>> = vec![self.dependents[root].iter()];
            mark[root] = Mark::Active;
            while let Some(it) = iters.last_mut() {
                match it.next() {
                    Some(&next) => match mark[next] {
                        Mark::New => {
                            mark[next] = Mark::Active;
                            path.push(next);
                            iters.push(self.dependents[next].iter());
                        }
                        Mark::Active => {
                            let start = path.iter().position(|&s| s == next).expect("active node is on path");
                            let mut cycle = path[start..].to_vec();
                            let min_at = cycle.iter().enumerate().min_by_key(|(_, &s)| s).map(|(i, _)| i).unwrap_or(0);
                            cycle.rotate_left(min_at);
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    },
                    None => {
                        iters.pop();
                        let done = path.pop().expect("path mirrors iterator stack");
                        mark[done] = Mark::Done;
                    }
                }
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.prerequisites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prerequisites.is_empty()
    }

    pub fn nodes(&self) -> std::ops::Range<StepId> {
        0..self.len()
    }

    pub fn prerequisites(&self, id: StepId) -> &BTreeSet<StepId> {
        &self.prerequisites[id]
    }

    pub fn dependents(&self, id: StepId) -> &BTreeSet<StepId> {
        &self.dependents[id]
    }

    pub fn in_degree(&self, id: StepId) -> usize {
        self.prerequisites[id].len()
    }

    /// All edges `(prerequisite, dependent)` in ascending order.
    pub fn edges(&self) -> Vec<(StepId, StepId)> {
        self.dependents
            .iter()
            .enumerate()
            .flat_map(|(i, deps)| deps.iter().map(move |&j| (i, j)))
            .collect()
    }

    pub fn roots(&self) -> Vec<StepId> {
        self.nodes().filter(|&i| self.prerequisites[i].is_empty()).collect()
    }

    /// Every step that must finish (directly or transitively) before `id`.
    pub fn ancestors(&self, id: StepId) -> BTreeSet<StepId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<StepId> = self.prerequisites[id].iter().copied().collect();
        while let Some(s) = stack.pop() {
            if seen.insert(s) {
                stack.extend(self.prerequisites[s].iter().copied());
            }
        }
        seen
    }

    /// Kahn's algorithm with a min-heap, so ties resolve to the smallest id.
    pub fn topological_order(&self) -> Vec<StepId> {
        let mut remaining: Vec<usize> = self.prerequisites.iter().map(BTreeSet::len).collect();
        let mut heap: BinaryHeap<Reverse<StepId>> =
            self.nodes().filter(|&i| remaining[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(Reverse(i)) = heap.pop() {
            order.push(i);
            for &j in &self.dependents[i] {
                remaining[j] -= 1;
                if remaining[j] == 0 {
                    heap.push(Reverse(j));
                }
            }
        }
        order
    }

    /// Graphviz DOT export: one node per line, one edge per line.
    pub fn to_dot(&self, plan: Option<&MissionPlan>) -> String {
        let mut out = String::from("digraph plan {\n");
        for i in self.nodes() {
            match plan.and_then(|p| p.step(i)) {
                Some(step) => writeln!(out, "  {i} [label=\"{i}: {}\"];", step.describe()),
                None => writeln!(out, "  {i};"),
            }
            .expect("writing to a String cannot fail");
        }
        for (i, j) in self.edges() {
            writeln!(out, "  {i} -> {j};").expect("writing to a String cannot fail");
        }
        out.push_str("}\n");
        out
    }
}

/// Partition of the graph's nodes into completed, executing and pending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionState {
    pub completed: BTreeSet<StepId>,
    pub executing: BTreeSet<StepId>,
    pub pending: BTreeSet<StepId>,
}

impl ExecutionState {
    pub fn new(graph: &DependencyGraph) -> Self {
        Self { pending: graph.nodes().collect(), ..Default::default() }
    }

    pub fn is_finished(&self) -> bool {
        self.pending.is_empty() && self.executing.is_empty()
    }

    /// Move a ready step from pending to executing.
    pub fn start(&mut self, graph: &DependencyGraph, id: StepId) -> Result<(), StateError> {
        if !self.pending.contains(&id) || !graph.prerequisites(id).is_subset(&self.completed) {
            return Err(StateError::NotReady(id));
        }
        self.pending.remove(&id);
        self.executing.insert(id);
        Ok(())
    }

    pub fn mark_complete(&mut self, id: StepId) -> Result<(), StateError> {
        if !self.executing.remove(&id) {
            return Err(StateError::NotExecuting(id));
        }
        self.completed.insert(id);
        Ok(())
    }

    /// Return an executing step to pending (used when a run is interrupted).
    pub fn cancel(&mut self, id: StepId) -> Result<(), StateError> {
        if !self.executing.remove(&id) {
            return Err(StateError::NotExecuting(id));
        }
        self.pending.insert(id);
        Ok(())
    }
}

/// Pending steps whose prerequisites are all complete, ascending by id.
pub fn ready_set(graph: &DependencyGraph, state: &ExecutionState) -> Vec<StepId> {
    state
        .pending
        .iter()
        .copied()
        .filter(|&j| graph.prerequisites(j).is_subset(&state.completed))
        .collect()
}
