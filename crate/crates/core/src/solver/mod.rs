//! Exact solver for convex mixed-binary QPs.
//!
//! [`solve`] runs a best-first branch and bound over the binary variables.
//! Each node is a continuous QP over the free variables, solved by a
//! primal-dual interior-point method; nodes the interior-point method cannot
//! finish are handed to an elastic phase-1 LP that either certifies
//! infeasibility or reports a numerical failure. [`brute_force`] enumerates
//! every binary assignment with the same continuous subsolver and is the
//! reference the branch and bound is tested against.

mod bnb;
mod ipm;
mod ldl;
mod polish;
mod reduce;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Assignment, MixedIntegerQP, ModelError, VarId};

pub(crate) use reduce::CompiledQp;
use reduce::{reduce, Conflict, ReducedQp, SparseRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{count} binaries exceed the enumeration cap of {cap}")]
    TooManyBinaries { count: usize, cap: usize },
    #[error("QP subsolver failed: {0}")]
    Numerical(String),
    #[error("invalid solver option: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub integrality_tol: f64,
    pub qp_tol: f64,
    /// Added to every diagonal entry of the quadratic form before solving.
    pub regularization: f64,
    pub node_limit: usize,
    /// Wall-clock limit in seconds; `None` for no limit.
    pub time_limit: Option<f64>,
    /// Largest binary count [`brute_force`] accepts.
    pub brute_force_cap: usize,
    /// Record every node for [`SolveResult::tree_dump`].
    pub trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_gap: 1e-8,
            abs_gap: 1e-9,
            integrality_tol: 1e-6,
            qp_tol: 1e-9,
            regularization: 1e-9,
            node_limit: 2_000_000,
            time_limit: None,
            brute_force_cap: 20,
            trace: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = [
            ("rel_gap", self.rel_gap),
            ("abs_gap", self.abs_gap),
            ("integrality_tol", self.integrality_tol),
            ("qp_tol", self.qp_tol),
            ("regularization", self.regularization),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolveError::InvalidOptions(format!("{name} must be positive, got {v}")));
            }
        }
        if self.integrality_tol >= 0.5 {
            return Err(SolveError::InvalidOptions("integrality_tol must be below 0.5".into()));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(SolveError::InvalidOptions("time_limit must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn gap(&self, incumbent: f64) -> f64 {
        self.abs_gap.max(self.rel_gap * incumbent.abs())
    }

    pub(crate) fn time_limit(&self) -> Option<Duration> {
        self.time_limit.map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Best integer-feasible point, when one was found.
    pub assignment: Option<Assignment>,
    /// Objective of `assignment`; `+inf` without one.
    pub objective: f64,
    pub best_bound: f64,
    pub nodes_explored: usize,
    pub trace: Vec<NodeRecord>,
}

impl SolveResult {
    /// Node tree as indented text, one node per line.
    pub fn tree_dump(&self) -> String {
        let mut out = String::new();
        for rec in &self.trace {
            let fix = rec
                .fixing
                .map(|(v, b)| format!("{v}={}", u8::from(b)))
                .unwrap_or_else(|| "root".to_string());
            let _ = writeln!(
                out,
                "{:indent$}node {} parent {:?} {} bound {:.12e} -> {:?}",
                "",
                rec.id,
                rec.parent,
                fix,
                rec.parent_bound,
                rec.outcome,
                indent = 2 * rec.depth
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub fixing: Option<(VarId, bool)>,
    pub parent_bound: f64,
    pub outcome: NodeOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeOutcome {
    PrunedByBound,
    Infeasible,
    Integral { objective: f64 },
    Branched { objective: f64, var: VarId, value: f64 },
}

/// Evidence that a relaxation has no feasible point.
#[derive(Debug, Clone, PartialEq)]
pub enum InfeasibilityCertificate {
    /// Bounds of a variable cross once fixings and singleton rows are applied.
    CrossedBounds { var: VarId, lower: f64, upper: f64 },
    /// A row whose variables are all fixed is violated.
    ViolatedRow { row: usize, amount: f64 },
    /// The elastic phase-1 LP has a strictly positive optimum.
    Phase1 { min_violation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpRelaxation {
    Optimal { objective: f64, point: Assignment },
    Infeasible(InfeasibilityCertificate),
}

/// Continuous relaxation: binaries in `fixings` are held at their value,
/// the others range over `[0, 1]`.
pub fn solve_qp_relaxation(
    p: &MixedIntegerQP,
    fixings: &BTreeMap<VarId, bool>,
    opts: &SolveOptions,
) -> Result<QpRelaxation, SolveError> {
    opts.validate()?;
    let qp = CompiledQp::new(p);
    let mut fx = vec![None; qp.n];
    for (&v, &b) in fixings {
        if v.0 >= qp.n {
            return Err(ModelError::UnknownVar(v.0, qp.n).into());
        }
        fx[v.0] = Some(if b { 1.0 } else { 0.0 });
    }
    solve_node(&qp, &fx, opts)
}

pub(crate) fn solve_node(
    qp: &CompiledQp,
    fixings: &[Option<f64>],
    opts: &SolveOptions,
) -> Result<QpRelaxation, SolveError> {
    let red = match reduce(qp, fixings) {
        Ok(r) => r,
        Err(Conflict::Bounds { var, lower, upper }) => {
            return Ok(QpRelaxation::Infeasible(InfeasibilityCertificate::CrossedBounds {
                var: VarId(var),
                lower,
                upper,
            }))
        }
        Err(Conflict::Row { row, amount }) => {
            return Ok(QpRelaxation::Infeasible(InfeasibilityCertificate::ViolatedRow { row, amount }))
        }
    };
    match solve_reduced(&red, opts)? {
        Ok(x) => Ok(QpRelaxation::Optimal { objective: red.objective(&x), point: Assignment::new(red.expand(&x)) }),
        Err(v) => Ok(QpRelaxation::Infeasible(InfeasibilityCertificate::Phase1 { min_violation: v })),
    }
}

/// Returns the minimal phase-1 violation when the problem is certified infeasible.
fn solve_reduced(red: &ReducedQp, opts: &SolveOptions) -> Result<Result<Vec<f64>, f64>, SolveError> {
    if red.n == 0 {
        return Ok(Ok(Vec::new()));
    }
    let base = ipm::IpmSettings { tol: opts.qp_tol, hess_shift: 2.0 * opts.regularization, max_iter: 80 };
    let first = ipm::solve(red, &base);
    let reason = match first {
        ipm::IpmOutcome::Converged { x } => return Ok(Ok(polish(red, x))),
        ipm::IpmOutcome::Failed { reason } => reason,
    };
    let violation = phase1_violation(red, opts)?;
    if violation > infeasibility_threshold(opts) {
        return Ok(Err(violation));
    }
    // feasible but the first attempt stalled: retry with a longer budget and
    // a slightly stronger proximal term
    let retry = ipm::IpmSettings { max_iter: 300, hess_shift: base.hess_shift.max(1e-7), ..base };
    match ipm::solve(red, &retry) {
        ipm::IpmOutcome::Converged { x } => Ok(Ok(polish(red, x))),
        ipm::IpmOutcome::Failed { reason: r2 } => Err(SolveError::Numerical(format!(
            "interior point failed on a feasible node ({reason}; retry: {r2}; phase-1 violation {violation:e})"
        ))),
    }
}

fn infeasibility_threshold(opts: &SolveOptions) -> f64 {
    opts.qp_tol
}

/// Minimal L1 row violation over the variable box.
fn phase1_violation(red: &ReducedQp, opts: &SolveOptions) -> Result<f64, SolveError> {
    let n = red.n;
    let p = red.eq.len();
    let mi = red.ineq.len();
    let extra = 2 * p + mi;
    let mut eq = Vec::with_capacity(p);
    for (r, row) in red.eq.iter().enumerate() {
        let mut row = row.clone();
        row.idx.extend([n + 2 * r, n + 2 * r + 1]);
        row.val.extend([1.0, -1.0]);
        eq.push(row);
    }
    let mut ineq = Vec::with_capacity(mi);
    for (r, row) in red.ineq.iter().enumerate() {
        let mut row = row.clone();
        row.idx.push(n + 2 * p + r);
        row.val.push(-1.0);
        ineq.push(row);
    }
    let mut lower = red.lower.clone();
    let mut upper = red.upper.clone();
    lower.resize(lower.len() + extra, 0.0);
    upper.resize(upper.len() + extra, f64::INFINITY);
    let mut c = vec![0.0; n];
    c.resize(n + extra, 1.0);
    let lp = ReducedQp {
        n: n + extra,
        h_diag: vec![0.0; n + extra],
        h_off: Vec::new(),
        c,
        constant: 0.0,
        eq,
        eq_rhs: red.eq_rhs.clone(),
        ineq,
        ineq_rhs: red.ineq_rhs.clone(),
        lower,
        upper,
        free: Vec::new(),
        base: Vec::new(),
    };
    let set = ipm::IpmSettings { tol: opts.qp_tol * 0.1, hess_shift: 2.0 * opts.regularization, max_iter: 200 };
    match ipm::solve(&lp, &set) {
        ipm::IpmOutcome::Converged { x } => Ok(x[n..].iter().sum::<f64>().max(0.0)),
        ipm::IpmOutcome::Failed { reason } => {
            Err(SolveError::Numerical(format!("phase-1 LP failed: {reason}")))
        }
    }
}

/// Removes the residual of the equality rows by a minimum-norm correction
/// on variables that are not sitting on a bound.
fn polish(red: &ReducedQp, mut x: Vec<f64>) -> Vec<f64> {
    let p = red.eq.len();
    if p == 0 {
        return x;
    }
    for _ in 0..3 {
        let res: Vec<f64> = red.eq.iter().zip(&red.eq_rhs).map(|(row, b)| row.dot(&x) - b).collect();
        if res.iter().all(|r| r.abs() <= 1e-15) {
            break;
        }
        let movable: Vec<bool> = (0..red.n)
            .map(|j| x[j] - red.lower[j] > 1e-9 && red.upper[j] - x[j] > 1e-9)
            .collect();
        let masked: Vec<SparseRow> = red
            .eq
            .iter()
            .map(|row| {
                let mut m = SparseRow::default();
                for (&i, &v) in row.idx.iter().zip(&row.val) {
                    if movable[i] {
                        m.idx.push(i);
                        m.val.push(v);
                    }
                }
                m
            })
            .collect();
        // (A W A') w = res, dx = -W A' w
        let mut gram = vec![0.0; p * p];
        let mut col = vec![0.0; red.n];
        for a in 0..p {
            for (&i, &v) in masked[a].idx.iter().zip(&masked[a].val) {
                col[i] = v;
            }
            for b in 0..=a {
                let d: f64 = masked[b].idx.iter().zip(&masked[b].val).map(|(&i, &v)| v * col[i]).sum();
                gram[a * p + b] = d;
                gram[b * p + a] = d;
            }
            for &i in &masked[a].idx {
                col[i] = 0.0;
            }
        }
        let Some(w) = dense_spd_solve(&mut gram, p, &res) else { break };
        for (a, row) in masked.iter().enumerate() {
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                x[i] -= v * w[a];
            }
        }
    }
    x
}

/// Cholesky solve with a tiny diagonal shift; `None` if a pivot collapses.
fn dense_spd_solve(a: &mut [f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max).max(1.0);
    for i in 0..n {
        a[i * n + i] += 1e-14 * scale;
    }
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 1e-300 {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i * n + k] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k * n + i] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    Some(y)
}

/// Global optimum by branch and bound.
pub fn solve(p: &MixedIntegerQP, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    solve_with_incumbent(p, opts, None)
}

/// As [`solve`], seeded with a known feasible point. An infeasible seed is ignored.
pub fn solve_with_incumbent(
    p: &MixedIntegerQP,
    opts: &SolveOptions,
    incumbent: Option<&Assignment>,
) -> Result<SolveResult, SolveError> {
    opts.validate()?;
    let qp = CompiledQp::new(p);
    let seed = match incumbent {
        Some(a) if p.check_feasible(a, opts.integrality_tol)?.is_feasible() => {
            Some((a.clone(), p.eval_objective(a)?))
        }
        _ => None,
    };
    bnb::branch_and_bound(&qp, opts, seed)
}

/// Exhaustive enumeration of all binary assignments.
pub fn brute_force(p: &MixedIntegerQP, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    opts.validate()?;
    let qp = CompiledQp::new(p);
    let bins = qp.binaries();
    if bins.len() > opts.brute_force_cap {
        return Err(SolveError::TooManyBinaries { count: bins.len(), cap: opts.brute_force_cap });
    }
    let mut best: Option<(Assignment, f64)> = None;
    let mut fx = vec![None; qp.n];
    let total: u64 = 1 << bins.len();
    for code in 0..total {
        for (k, v) in bins.iter().enumerate() {
            fx[v.0] = Some(((code >> k) & 1) as f64);
        }
        if let QpRelaxation::Optimal { objective, point } = solve_node(&qp, &fx, opts)? {
            if best.as_ref().map_or(true, |(_, b)| objective < *b) {
                best = Some((point, objective));
            }
        }
    }
    Ok(match best {
        Some((a, obj)) => SolveResult {
            status: SolveStatus::Optimal,
            assignment: Some(a),
            objective: obj,
            best_bound: obj,
            nodes_explored: total as usize,
            trace: Vec::new(),
        },
        None => SolveResult {
            status: SolveStatus::Infeasible,
            assignment: None,
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            nodes_explored: total as usize,
            trace: Vec::new(),
        },
    })
}
