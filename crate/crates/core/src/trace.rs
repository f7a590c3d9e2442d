//! Merkleized computation traces for integer multiplication and the
//! bisection game that isolates a single disputed step.
//!
//! `a * b` is decomposed shift-add style: every set bit `i` of `b`
//! contributes a partial product `a << i`, computed by a `Shift` step over a
//! leaf holding `a`. The partial products are combined by a balanced tree of
//! `Add` steps whose root holds the product. Each node commits to its
//! operation, its children's commitments, and its claimed output.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use sha2::{Digest, Sha256};
use thiserror::Error;

/// 32-byte node commitment.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Commitment(pub [u8; 32]);

impl Commitment {
    /// First four bytes as lowercase hex.
    pub fn prefix(&self) -> String {
        let mut s = String::with_capacity(8);
        for byte in &self.0[..4] {
            let _ = write!(s, "{byte:02x}");
        }
        s
    }
}

impl fmt::Debug for Commitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Commitment({}..)", self.prefix())
    }
}

impl fmt::Display for Commitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for byte in &self.0 {
            write!(f, "{byte:02x}")?;
        }
        Ok(())
    }
}

/// Hash used to commit trace nodes. Implementations must be deterministic.
pub trait TraceHasher: Sync {
    fn hash_node(&self, op: Op, children: &[Commitment], claimed_output: u64) -> Commitment;
}

/// SHA-256 over `tag || shift || child commitments || claimed_output`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sha256Hasher;

impl TraceHasher for Sha256Hasher {
    fn hash_node(&self, op: Op, children: &[Commitment], claimed_output: u64) -> Commitment {
        let mut h = Sha256::new();
        let (tag, shift) = match op {
            Op::LeafInput => (0u8, 0u32),
            Op::Shift(s) => (1, s),
            Op::Add => (2, 0),
        };
        h.update([tag]);
        h.update(shift.to_le_bytes());
        for c in children {
            h.update(c.0);
        }
        h.update(claimed_output.to_le_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        Commitment(out)
    }
}

static DEFAULT_HASHER: Sha256Hasher = Sha256Hasher;

/// Position of a step: `level` 0 is the root, `index` counts left to right
/// within a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepId {
    pub level: u32,
    pub index: u32,
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.level, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    LeafInput,
    /// Left shift of the single child by a constant.
    Shift(u32),
    Add,
}

impl Op {
    /// Exact evaluation over the children's outputs, in 64-bit wrapping
    /// arithmetic. A leaf evaluates to its single public input.
    pub fn eval(self, inputs: &[u64]) -> Option<u64> {
        match (self, inputs) {
            (Op::LeafInput, [v]) => Some(*v),
            (Op::Shift(s), [v]) if s < 64 => Some(v.wrapping_shl(s)),
            (Op::Add, [l, r]) => Some(l.wrapping_add(*r)),
            _ => None,
        }
    }

    pub const fn arity(self) -> usize {
        match self {
            Op::LeafInput => 0,
            Op::Shift(_) => 1,
            Op::Add => 2,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::LeafInput => f.write_str("leaf"),
            Op::Shift(s) => write!(f, "shift({s})"),
            Op::Add => f.write_str("add"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub id: StepId,
    pub op: Op,
    pub claimed_output: u64,
    children: Vec<usize>,
    parent: Option<usize>,
}

impl Step {
    pub fn is_leaf(&self) -> bool {
        self.op == Op::LeafInput
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionSite {
    Root,
    Step(StepId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("{a} * {b} overflows 64 bits")]
    Overflow { a: u64, b: u64 },
    #[error("step {0} does not exist")]
    UnknownStep(StepId),
    #[error("step {0} is a leaf; public inputs cannot be forged")]
    LeafTarget(StepId),
    #[error("both traces claim the same root value; there is nothing to dispute")]
    NoDispute,
    #[error("traces do not share the same decomposition")]
    ShapeMismatch,
}

/// Immutable commitment tree over the steps of one multiplication.
///
/// Nodes are stored in breadth-first order, so `nodes[0]` is the root and
/// ids sort the same way as storage.
#[derive(Clone)]
pub struct TraceTree {
    a: u64,
    b: u64,
    nodes: Vec<Step>,
    hashes: Vec<Commitment>,
    hasher: &'static dyn TraceHasher,
}

impl fmt::Debug for TraceTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TraceTree")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("root_value", &self.root_value())
            .field("steps", &self.nodes.len())
            .field("root_hash", &self.root_hash())
            .finish()
    }
}

impl PartialEq for TraceTree {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.nodes == other.nodes
    }
}

impl Eq for TraceTree {}

enum Shape {
    Leaf(u64),
    Node(Op, Vec<Shape>),
}

impl Shape {
    fn value(&self) -> u64 {
        match self {
            Shape::Leaf(v) => *v,
            Shape::Node(op, children) => {
                let inputs: Vec<u64> = children.iter().map(Shape::value).collect();
                op.eval(&inputs).unwrap_or(0)
            }
        }
    }
}

fn balanced_sum(mut parts: Vec<Shape>) -> Shape {
    if parts.len() == 1 {
        return parts.pop().unwrap_or(Shape::Leaf(0));
    }
    let right = parts.split_off(parts.len().div_ceil(2));
    Shape::Node(Op::Add, vec![balanced_sum(parts), balanced_sum(right)])
}

impl TraceTree {
    /// Honest shift-add trace of `a * b`, committed with SHA-256.
    pub fn decompose(a: u64, b: u64) -> Result<Self, TraceError> {
        Self::decompose_with(a, b, &DEFAULT_HASHER)
    }

    pub fn decompose_with(
        a: u64,
        b: u64,
        hasher: &'static dyn TraceHasher,
    ) -> Result<Self, TraceError> {
        a.checked_mul(b).ok_or(TraceError::Overflow { a, b })?;
        let shape = if b == 0 {
            Shape::Leaf(0)
        } else {
            let partials = (0..64)
                .filter(|bit| b >> bit & 1 == 1)
                .map(|bit| Shape::Node(Op::Shift(bit), vec![Shape::Leaf(a)]))
                .collect();
            balanced_sum(partials)
        };
        Ok(Self::from_shape(a, b, shape, hasher))
    }

    fn from_shape(a: u64, b: u64, shape: Shape, hasher: &'static dyn TraceHasher) -> Self {
        let mut nodes: Vec<Step> = Vec::new();
        let mut queue: VecDeque<(Shape, Option<usize>, u32)> = VecDeque::new();
        queue.push_back((shape, None, 0));
        let mut level_counts: Vec<u32> = Vec::new();
        while let Some((shape, parent, level)) = queue.pop_front() {
            if level_counts.len() <= level as usize {
                level_counts.push(0);
            }
            let index = level_counts[level as usize];
            level_counts[level as usize] += 1;
            let id = StepId { level, index };
            let position = nodes.len();
            let (op, claimed_output, children) = match shape {
                Shape::Leaf(v) => (Op::LeafInput, v, Vec::new()),
                Shape::Node(op, children) => {
                    let inputs: Vec<u64> = children.iter().map(Shape::value).collect();
                    (op, op.eval(&inputs).unwrap_or(0), children)
                }
            };
            nodes.push(Step {
                id,
                op,
                claimed_output,
                children: Vec::new(),
                parent,
            });
            if let Some(p) = parent {
                nodes[p].children.push(position);
            }
            for child in children {
                queue.push_back((child, Some(position), level + 1));
            }
        }
        let mut tree = Self {
            a,
            b,
            hashes: vec![Commitment([0; 32]); nodes.len()],
            nodes,
            hasher,
        };
        for i in (0..tree.nodes.len()).rev() {
            tree.rehash(i);
        }
        tree
    }

    fn rehash(&mut self, i: usize) {
        let node = &self.nodes[i];
        let children: Vec<Commitment> = node.children.iter().map(|&c| self.hashes[c]).collect();
        self.hashes[i] = self
            .hasher
            .hash_node(node.op, &children, node.claimed_output);
    }

    pub fn inputs(&self) -> (u64, u64) {
        (self.a, self.b)
    }

    pub fn root_value(&self) -> u64 {
        self.nodes[0].claimed_output
    }

    pub fn root_hash(&self) -> Commitment {
        self.hashes[0]
    }

    pub fn steps(&self) -> &[Step] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> u32 {
        self.nodes.last().map_or(0, |n| n.id.level)
    }

    pub fn node_hash(&self, id: StepId) -> Option<Commitment> {
        self.position(id).map(|i| self.hashes[i])
    }

    pub fn step(&self, id: StepId) -> Option<&Step> {
        self.position(id).map(|i| &self.nodes[i])
    }

    pub fn children(&self, id: StepId) -> impl Iterator<Item = &Step> {
        let kids = self
            .position(id)
            .map_or(&[][..], |i| &self.nodes[i].children[..]);
        kids.iter().map(|&c| &self.nodes[c])
    }

    /// Ids of all non-leaf steps in storage order.
    pub fn internal_steps(&self) -> Vec<StepId> {
        self.nodes
            .iter()
            .filter(|n| !n.is_leaf())
            .map(|n| n.id)
            .collect()
    }

    fn position(&self, id: StepId) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    fn child_outputs(&self, i: usize) -> Vec<u64> {
        self.nodes[i]
            .children
            .iter()
            .map(|&c| self.nodes[c].claimed_output)
            .collect()
    }

    /// Whether step `i` evaluates exactly over its children's claims.
    pub fn locally_consistent(&self, id: StepId) -> bool {
        let Some(i) = self.position(id) else {
            return false;
        };
        let node = &self.nodes[i];
        if node.is_leaf() {
            return true;
        }
        node.op.eval(&self.child_outputs(i)) == Some(node.claimed_output)
    }

    /// Replaces the target step's claim with the honest value plus one
    /// (wrapping) and re-evaluates every ancestor from it.
    pub fn corrupt(&self, site: CorruptionSite) -> Result<Self, TraceError> {
        let target = match site {
            CorruptionSite::Root => 0,
            CorruptionSite::Step(id) => self.position(id).ok_or(TraceError::UnknownStep(id))?,
        };
        if self.nodes[target].is_leaf() {
            return Err(TraceError::LeafTarget(self.nodes[target].id));
        }
        let mut forged = self.clone();
        let honest = forged.nodes[target]
            .op
            .eval(&forged.child_outputs(target))
            .unwrap_or(0);
        forged.nodes[target].claimed_output = honest.wrapping_add(1);
        forged.rehash(target);
        let mut cursor = forged.nodes[target].parent;
        while let Some(i) = cursor {
            let inputs = forged.child_outputs(i);
            forged.nodes[i].claimed_output = forged.nodes[i].op.eval(&inputs).unwrap_or(0);
            forged.rehash(i);
            cursor = forged.nodes[i].parent;
        }
        Ok(forged)
    }

    /// Overwrites one claim without re-evaluating anything; only the
    /// commitments on the path to the root are refreshed.
    pub fn tamper(&self, id: StepId, claimed_output: u64) -> Result<Self, TraceError> {
        let target = self.position(id).ok_or(TraceError::UnknownStep(id))?;
        let mut forged = self.clone();
        forged.nodes[target].claimed_output = claimed_output;
        let mut cursor = Some(target);
        while let Some(i) = cursor {
            forged.rehash(i);
            cursor = forged.nodes[i].parent;
        }
        Ok(forged)
    }

    /// Recomputes every commitment from node contents.
    pub fn recompute_root(&self) -> Commitment {
        let mut hashes = vec![Commitment([0; 32]); self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            let children: Vec<Commitment> = node.children.iter().map(|&c| hashes[c]).collect();
            hashes[i] = self
                .hasher
                .hash_node(node.op, &children, node.claimed_output);
        }
        hashes[0]
    }

    /// One `level,index,op,claimed_output,hash-prefix` line per node.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (node, hash) in self.nodes.iter().zip(&self.hashes) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                node.id.level,
                node.id.index,
                node.op,
                node.claimed_output,
                hash.prefix()
            );
        }
        out
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.a == other.a
            && self.b == other.b
            && self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(x, y)| {
                x.id == y.id
                    && x.op == y.op
                    && x.children == y.children
                    && (!x.is_leaf() || x.claimed_output == y.claimed_output)
            })
    }
}

/// Commitment to the whole trace.
pub fn merkle_root(tree: &TraceTree) -> Commitment {
    tree.root_hash()
}

/// The single step both parties dispute after bisection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disagreement {
    pub step: StepId,
    pub op: Op,
    /// Children's outputs, on which both parties agree.
    pub inputs: Vec<u64>,
    pub solver_claim: u64,
    pub challenger_claim: u64,
    pub judge_queries: u32,
}

/// Descends both trees from the root, following the leftmost child whose
/// commitment differs, and stops at the first node whose children all agree.
pub fn bisect(solver: &TraceTree, challenger: &TraceTree) -> Result<Disagreement, TraceError> {
    if !solver.same_shape(challenger) {
        return Err(TraceError::ShapeMismatch);
    }
    if solver.root_value() == challenger.root_value() {
        return Err(TraceError::NoDispute);
    }
    let mut current = 0usize;
    let mut queries = 0u32;
    loop {
        queries += 1;
        let next = solver.nodes[current]
            .children
            .iter()
            .copied()
            .find(|&c| solver.hashes[c] != challenger.hashes[c]);
        match next {
            Some(child) => current = child,
            None => break,
        }
    }
    let node = &solver.nodes[current];
    let inputs = if node.is_leaf() {
        vec![node.claimed_output]
    } else {
        solver.child_outputs(current)
    };
    Ok(Disagreement {
        step: node.id,
        op: node.op,
        inputs,
        solver_claim: node.claimed_output,
        challenger_claim: challenger.nodes[current].claimed_output,
        judge_queries: queries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    SolverCorrect,
    SolverFalse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub decision: Decision,
    pub checked_step: StepId,
    /// Exact output of the checked step.
    pub exact: u64,
}

impl Verdict {
    pub fn challenger_correct(&self, disagreement: &Disagreement) -> bool {
        disagreement.challenger_claim == self.exact
    }
}

/// Re-evaluates the one disputed elementary step.
pub fn judge_step(disagreement: &Disagreement) -> Verdict {
    let exact = disagreement.op.eval(&disagreement.inputs);
    let decision = match exact {
        Some(v) if v == disagreement.solver_claim => Decision::SolverCorrect,
        _ => Decision::SolverFalse,
    };
    Verdict {
        decision,
        checked_step: disagreement.step,
        exact: exact.unwrap_or_else(|| disagreement.solver_claim.wrapping_add(1)),
    }
}

/// Smallest `k` with `2^k >= n`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}
