//! Numeric form of a [`MixedIntegerQP`] and node-level reduction: fixed
//! variables are substituted out, singleton rows become bounds, and rows
//! left without free variables are checked directly.

use std::collections::BTreeMap;

use crate::model::{MixedIntegerQP, Sense, VarId};

#[derive(Debug, Clone, Default)]
pub(crate) struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }
}

/// The whole program in index form, built once per solve.
#[derive(Debug, Clone)]
pub(crate) struct CompiledQp {
    pub n: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binary: Vec<bool>,
    pub rows: Vec<(SparseRow, Sense, f64)>,
    /// Upper-triangle entries `(i, j, q)` of `sum q x_i x_j`.
    pub quad: Vec<(usize, usize, f64)>,
    pub lin: Vec<f64>,
    pub constant: f64,
}

impl CompiledQp {
    pub fn new(p: &MixedIntegerQP) -> Self {
        let n = p.num_vars();
        let rows = p
            .constraints()
            .iter()
            .map(|c| {
                let mut r = SparseRow::default();
                for (id, v) in c.expr().terms() {
                    r.idx.push(id.0);
                    r.val.push(v);
                }
                (r, c.sense(), c.rhs())
            })
            .collect();
        let mut lin = vec![0.0; n];
        for (id, v) in p.objective().linear().terms() {
            lin[id.0] += v;
        }
        Self {
            n,
            lower: p.vars().iter().map(|v| v.lower).collect(),
            upper: p.vars().iter().map(|v| v.upper).collect(),
            binary: p.vars().iter().map(|v| v.is_binary()).collect(),
            rows,
            quad: p.objective().quad_terms().map(|(i, j, q)| (i.0, j.0, q)).collect(),
            lin,
            constant: p.objective().linear().constant_term(),
        }
    }

    #[cfg(test)]
    pub fn objective(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.lin.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad: f64 = self.quad.iter().map(|&(i, j, q)| x[i] * q * x[j]).sum();
        self.constant + lin + quad
    }

    pub fn binaries(&self) -> Vec<VarId> {
        (0..self.n).filter(|&i| self.binary[i]).map(VarId).collect()
    }
}

/// Why a node was found infeasible before any numerical solve.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Conflict {
    /// Bounds of a variable crossed after fixings and singleton rows.
    Bounds { var: usize, lower: f64, upper: f64 },
    /// A row with no free variable is violated.
    Row { row: usize, amount: f64 },
}

/// Continuous QP over the free variables of one node:
/// `min 1/2 x'Hx + c'x + k` s.t. `eq x = eq_rhs`, `ineq x <= ineq_rhs`, `lower <= x <= upper`.
#[derive(Debug, Clone)]
pub(crate) struct ReducedQp {
    pub n: usize,
    /// `H_ii`
    pub h_diag: Vec<f64>,
    /// `(i, j, H_ij)` with `i > j`
    pub h_off: Vec<(usize, usize, f64)>,
    pub c: Vec<f64>,
    pub constant: f64,
    pub eq: Vec<SparseRow>,
    pub eq_rhs: Vec<f64>,
    pub ineq: Vec<SparseRow>,
    pub ineq_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Original index of each free variable.
    pub free: Vec<usize>,
    /// Full-length values; entries of free variables are overwritten on expansion.
    pub base: Vec<f64>,
}

impl ReducedQp {
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (k, &orig) in self.free.iter().enumerate() {
            full[orig] = x[k];
        }
        full
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for k in 0..self.n {
            v += self.c[k] * x[k] + 0.5 * self.h_diag[k] * x[k] * x[k];
        }
        for &(i, j, h) in &self.h_off {
            v += h * x[i] * x[j];
        }
        v
    }
}

const FIX_TOL: f64 = 1e-9;

/// Applies `fixings` (binary values) and reduces. `fixings[i]` overrides the
/// bounds of variable `i` when set.
pub(crate) fn reduce(qp: &CompiledQp, fixings: &[Option<f64>]) -> Result<ReducedQp, Conflict> {
    let n = qp.n;
    let mut lo = qp.lower.clone();
    let mut hi = qp.upper.clone();
    for (i, f) in fixings.iter().enumerate() {
        if let Some(v) = *f {
            lo[i] = v;
            hi[i] = v;
        }
    }

    // singleton rows -> bounds, repeated until no row changes anything
    let mut fixed: Vec<bool> = (0..n).map(|i| lo[i] == hi[i]).collect();
    let mut dead = vec![false; qp.rows.len()];
    loop {
        let mut changed = false;
        for (r, (row, sense, rhs)) in qp.rows.iter().enumerate() {
            if dead[r] {
                continue;
            }
            let mut free_pos = None;
            let mut n_free = 0;
            let mut acc = 0.0;
            for (k, &i) in row.idx.iter().enumerate() {
                if fixed[i] {
                    acc += row.val[k] * lo[i];
                } else {
                    n_free += 1;
                    free_pos = Some(k);
                }
            }
            let rest = rhs - acc;
            match n_free {
                0 => {
                    let amount = match sense {
                        Sense::Le => -rest,
                        Sense::Ge => rest,
                        Sense::Eq => rest.abs(),
                    };
                    if amount > FIX_TOL {
                        return Err(Conflict::Row { row: r, amount });
                    }
                    dead[r] = true;
                }
                1 => {
                    let k = free_pos.unwrap();
                    let i = row.idx[k];
                    let a = row.val[k];
                    let bound = rest / a;
                    let (as_upper, as_lower) = match (sense, a > 0.0) {
                        (Sense::Eq, _) => (true, true),
                        (Sense::Le, true) | (Sense::Ge, false) => (true, false),
                        (Sense::Le, false) | (Sense::Ge, true) => (false, true),
                    };
                    let mut b_hi = if as_upper { bound } else { f64::INFINITY };
                    let mut b_lo = if as_lower { bound } else { f64::NEG_INFINITY };
                    if qp.binary[i] {
                        b_hi = (b_hi + FIX_TOL).floor();
                        b_lo = (b_lo - FIX_TOL).ceil();
                    }
                    if b_hi < hi[i] {
                        hi[i] = b_hi;
                    }
                    if b_lo > lo[i] {
                        lo[i] = b_lo;
                    }
                    if lo[i] > hi[i] {
                        if lo[i] - hi[i] > FIX_TOL * (1.0 + lo[i].abs()) {
                            return Err(Conflict::Bounds { var: i, lower: lo[i], upper: hi[i] });
                        }
                        let mid = 0.5 * (lo[i] + hi[i]);
                        lo[i] = mid;
                        hi[i] = mid;
                    }
                    if lo[i] == hi[i] {
                        fixed[i] = true;
                    }
                    dead[r] = true;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    let mut map = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if !fixed[i] {
            map[i] = free.len();
            free.push(i);
        }
    }
    let nf = free.len();
    let base: Vec<f64> = (0..n).map(|i| if fixed[i] { lo[i] } else { 0.0 }).collect();

    let mut c: Vec<f64> = free.iter().map(|&i| qp.lin[i]).collect();
    let mut constant = qp.constant;
    for i in 0..n {
        if fixed[i] {
            constant += qp.lin[i] * base[i];
        }
    }
    let mut h_diag = vec![0.0; nf];
    let mut h_off = Vec::new();
    for &(i, j, q) in &qp.quad {
        match (fixed[i], fixed[j]) {
            (true, true) => constant += q * base[i] * base[j],
            (true, false) => c[map[j]] += q * base[i],
            (false, true) => c[map[i]] += q * base[j],
            (false, false) => {
                if i == j {
                    h_diag[map[i]] += 2.0 * q;
                } else {
                    let (a, b) = (map[i].max(map[j]), map[i].min(map[j]));
                    h_off.push((a, b, q));
                }
            }
        }
    }

    let mut eq = Vec::new();
    let mut eq_rhs = Vec::new();
    let mut ineq = Vec::new();
    let mut ineq_rhs = Vec::new();
    let mut origin = Vec::new();
    for (r, (row, sense, rhs)) in qp.rows.iter().enumerate() {
        if dead[r] {
            continue;
        }
        let mut red = SparseRow::default();
        let mut acc = 0.0;
        for (k, &i) in row.idx.iter().enumerate() {
            if fixed[i] {
                acc += row.val[k] * base[i];
            } else {
                red.idx.push(map[i]);
                red.val.push(row.val[k]);
            }
        }
        let rest = rhs - acc;
        match sense {
            Sense::Eq => {
                eq.push(red);
                eq_rhs.push(rest);
            }
            Sense::Le => {
                ineq.push(red);
                ineq_rhs.push(rest);
                origin.push(r);
            }
            Sense::Ge => {
                red.val.iter_mut().for_each(|v| *v = -*v);
                ineq.push(red);
                ineq_rhs.push(-rest);
                origin.push(r);
            }
        }
    }

    let (mut eq, mut eq_rhs) = (eq, eq_rhs);
    let (ineq, ineq_rhs) = merge_parallel(ineq, ineq_rhs, &origin, &mut eq, &mut eq_rhs)?;

    Ok(ReducedQp {
        n: nf,
        h_diag,
        h_off,
        c,
        constant,
        eq,
        eq_rhs,
        ineq,
        ineq_rhs,
        lower: free.iter().map(|&i| lo[i]).collect(),
        upper: free.iter().map(|&i| hi[i]).collect(),
        free,
        base,
    })
}

/// Inequality rows with proportional coefficients are merged: only the
/// tightest bound on each side survives, and a pair of opposite rows that
/// pins the expression becomes an equality.
fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn merge_parallel(
    ineq: Vec<SparseRow>,
    rhs: Vec<f64>,
    origin: &[usize],
    eq: &mut Vec<SparseRow>,
    eq_rhs: &mut Vec<f64>,
) -> Result<(Vec<SparseRow>, Vec<f64>), Conflict> {
    // key: index pattern plus coefficients scaled to unit max norm, first one positive
    let mut groups: BTreeMap<(Vec<usize>, Vec<u64>), (usize, f64, Option<usize>, f64, Option<usize>)> =
        BTreeMap::new();
    for (r, row) in ineq.iter().enumerate() {
        let Some(&lead) = row.val.first() else {
            if rhs[r] < -FIX_TOL {
                return Err(Conflict::Row { row: origin[r], amount: -rhs[r] });
            }
            continue;
        };
        let scale = inf_norm(&row.val);
        let unit = scale.copysign(lead);
        let key = (row.idx.clone(), row.val.iter().map(|v| (v / unit).to_bits()).collect::<Vec<_>>());
        // sign > 0: a x <= h ; sign < 0: a x >= -h, with a the normalised row
        let h = rhs[r] / scale;
        let entry = groups.entry(key).or_insert((r, f64::INFINITY, None, f64::NEG_INFINITY, None));
        if lead > 0.0 {
            if h < entry.1 {
                entry.1 = h;
                entry.2 = Some(r);
            }
        } else if -h > entry.3 {
            entry.3 = -h;
            entry.4 = Some(r);
        }
    }
    let mut out = Vec::new();
    let mut out_rhs = Vec::new();
    let mut groups: Vec<_> = groups.into_values().collect();
    groups.sort_by_key(|g| g.0);
    for (first, hi, hi_row, lo, lo_row) in groups {
        let norm = |r: usize| {
            let scale = inf_norm(&ineq[r].val);
            SparseRow { idx: ineq[r].idx.clone(), val: ineq[r].val.iter().map(|v| v / scale).collect() }
        };
        let width = hi - lo;
        if width < -FIX_TOL * (1.0 + hi.abs()) {
            return Err(Conflict::Row { row: origin[first], amount: -width });
        }
        if let (Some(a), Some(_)) = (hi_row, lo_row) {
            if width <= 1e-13 * (1.0 + hi.abs()) {
                eq.push(norm(a));
                eq_rhs.push(0.5 * (hi + lo));
                continue;
            }
        }
        if let Some(a) = hi_row {
            out.push(norm(a));
            out_rhs.push(hi);
        }
        if let Some(b) = lo_row {
            out.push(norm(b));
            out_rhs.push(-lo);
        }
    }
    Ok((out, out_rhs))
}
