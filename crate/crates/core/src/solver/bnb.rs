//! Best-first branch and bound. Until the first incumbent exists the search
//! runs depth first, rounded direction first, and each branching also opens
//! a dive child with every already-integral binary pinned; from then on it
//! always expands the open node with the smallest bound (latest inserted
//! first on ties).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::{
    solve_node, CompiledQp, NodeOutcome, NodeRecord, QpRelaxation, SolveError, SolveOptions, SolveResult,
    SolveStatus,
};
use crate::model::{Assignment, VarId};

struct Node {
    bound: f64,
    seq: u64,
    id: usize,
    parent: Option<usize>,
    depth: usize,
    fixes: Vec<(u32, bool)>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    // max-heap: smaller bound is greater; among equal bounds the later node wins
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then(self.seq.cmp(&o.seq))
    }
}

pub(crate) fn branch_and_bound(
    qp: &CompiledQp,
    opts: &SolveOptions,
    seed: Option<(Assignment, f64)>,
) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let deadline = opts.time_limit().map(|d| started + d);
    let mut incumbent = seed;
    let inc_val = |inc: &Option<(Assignment, f64)>| inc.as_ref().map_or(f64::INFINITY, |(_, v)| *v);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut next_id = 1usize;
    let mut trace = Vec::new();
    let mut pruned_min = f64::INFINITY;
    let mut explored = 0usize;
    let mut limit_hit = None;
    let mut fx = vec![None; qp.n];

    // depth-first stack, used while there is no incumbent
    let mut stack = vec![Node { bound: f64::NEG_INFINITY, seq: 0, id: 0, parent: None, depth: 0, fixes: Vec::new() }];
    if incumbent.is_some() {
        heap.extend(stack.drain(..));
    }

    loop {
        if incumbent.is_some() && !stack.is_empty() {
            heap.extend(stack.drain(..));
        }
        let node = match stack.pop() {
            Some(n) => n,
            None => match heap.pop() {
                Some(n) => n,
                None => break,
            },
        };
        if explored >= opts.node_limit {
            limit_hit = Some(SolveStatus::NodeLimit);
            heap.push(node);
            heap.extend(stack.drain(..));
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            limit_hit = Some(SolveStatus::TimeLimit);
            heap.push(node);
            heap.extend(stack.drain(..));
            break;
        }
        let mut record = |outcome: NodeOutcome, node: &Node| {
            if opts.trace {
                trace.push(NodeRecord {
                    id: node.id,
                    parent: node.parent,
                    depth: node.depth,
                    fixing: node.fixes.last().map(|&(v, b)| (VarId(v as usize), b)),
                    parent_bound: node.bound,
                    outcome,
                });
            }
        };

        let inc = inc_val(&incumbent);
        if node.bound >= inc - opts.gap(inc) {
            pruned_min = pruned_min.min(node.bound);
            record(NodeOutcome::PrunedByBound, &node);
            continue;
        }
        explored += 1;

        fx.iter_mut().for_each(|f| *f = None);
        for &(v, b) in &node.fixes {
            fx[v as usize] = Some(if b { 1.0 } else { 0.0 });
        }
        let (obj, x) = match solve_node(qp, &fx, opts)? {
            QpRelaxation::Infeasible(_) => {
                record(NodeOutcome::Infeasible, &node);
                continue;
            }
            QpRelaxation::Optimal { objective, point } => (objective, point.values),
        };
        if obj >= inc - opts.gap(inc) {
            pruned_min = pruned_min.min(obj);
            record(NodeOutcome::PrunedByBound, &node);
            continue;
        }

        let mut pick: Option<(usize, f64)> = None;
        let mut best_frac = opts.integrality_tol;
        for i in 0..qp.n {
            if !qp.binary[i] || fx[i].is_some() {
                continue;
            }
            let frac = x[i].min(1.0 - x[i]);
            if frac > best_frac {
                best_frac = frac;
                pick = Some((i, x[i]));
            }
        }

        let Some((var, value)) = pick else {
            // integral relaxation: pin every binary and re-solve for an exact point
            let all_fixed = (0..qp.n).all(|i| !qp.binary[i] || fx[i].is_some());
            let (obj, x) = if all_fixed {
                (obj, x)
            } else {
                for i in 0..qp.n {
                    if qp.binary[i] && fx[i].is_none() {
                        fx[i] = Some(x[i].round());
                    }
                }
                match solve_node(qp, &fx, opts)? {
                    QpRelaxation::Optimal { objective, point } => (objective, point.values),
                    QpRelaxation::Infeasible(_) => {
                        record(NodeOutcome::Infeasible, &node);
                        continue;
                    }
                }
            };
            record(NodeOutcome::Integral { objective: obj }, &node);
            if obj < inc {
                incumbent = Some((Assignment::new(x), obj));
            }
            continue;
        };

        record(NodeOutcome::Branched { objective: obj, var: VarId(var), value }, &node);
        let up_first = value >= 0.5;
        let mut children = Vec::with_capacity(2);
        for b in [up_first, !up_first] {
            let mut fixes = node.fixes.clone();
            fixes.push((var as u32, b));
            seq += 1;
            children.push(Node { bound: obj, seq, id: next_id, parent: Some(node.id), depth: node.depth + 1, fixes });
            next_id += 1;
        }
        let second = children.pop().unwrap();
        let first = children.pop().unwrap();
        if incumbent.is_none() {
            let mut fixes = first.fixes.clone();
            let base = fixes.len();
            stack.push(second);
            stack.push(first);
            // dive: also pin every binary the relaxation already rounds,
            // a subset of `first` explored before it
            for i in 0..qp.n {
                if qp.binary[i] && fx[i].is_none() && i != var && (x[i] - x[i].round()).abs() <= opts.integrality_tol {
                    fixes.push((i as u32, x[i] > 0.5));
                }
            }
            if fixes.len() > base {
                seq += 1;
                stack.push(Node { bound: obj, seq, id: next_id, parent: Some(node.id), depth: node.depth + 1, fixes });
                next_id += 1;
            }
        } else {
            heap.push(second);
            heap.push(first);
        }
    }

    let inc = inc_val(&incumbent);
    let open_min = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let best_bound = inc.min(pruned_min).min(open_min);
    let status = match (limit_hit, &incumbent) {
        (Some(s), _) => s,
        (None, Some(_)) => SolveStatus::Optimal,
        (None, None) => SolveStatus::Infeasible,
    };
    let (assignment, objective) = match incumbent {
        Some((a, v)) => (Some(a), v),
        None => (None, f64::INFINITY),
    };
    Ok(SolveResult {
        status,
        assignment,
        objective,
        best_bound: if status == SolveStatus::Infeasible { f64::INFINITY } else { best_bound },
        nodes_explored: explored,
        trace,
    })
}
