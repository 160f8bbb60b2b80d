//! Active-set refinement of an interior-point iterate: the constraints that
//! look active are imposed as equalities, the resulting KKT system is solved
//! directly, and the point is kept only if it passes a full optimality check.

use super::ipm::{inf_norm, refine, Layout};
use super::ldl::Envelope;
use super::reduce::ReducedQp;

const REG: f64 = 1e-7;

pub(crate) struct Iterate<'a> {
    pub x: &'a [f64],
    pub s: &'a [f64],
    pub lam: &'a [f64],
    pub zl: &'a [f64],
    pub zu: &'a [f64],
}

#[derive(Clone, Copy, PartialEq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

/// Returns an optimal point with all KKT residuals below `tol` (scaled), or
/// `None` when the guessed active set is wrong.
pub(crate) fn polish(qp: &ReducedQp, it: &Iterate, tol: f64) -> Option<Vec<f64>> {
    let n = qp.n;
    let state: Vec<Bound> = (0..n)
        .map(|j| {
            let gl = it.x[j] - qp.lower[j];
            let gu = qp.upper[j] - it.x[j];
            let lo = qp.lower[j].is_finite() && gl < it.zl[j];
            let hi = qp.upper[j].is_finite() && gu < it.zu[j];
            match (lo, hi) {
                (true, true) if gl <= gu => Bound::Lower,
                (true, true) => Bound::Upper,
                (true, false) => Bound::Lower,
                (false, true) => Bound::Upper,
                _ => Bound::Free,
            }
        })
        .collect();
    let mut x: Vec<f64> = (0..n)
        .map(|j| match state[j] {
            Bound::Lower => qp.lower[j],
            Bound::Upper => qp.upper[j],
            Bound::Free => it.x[j],
        })
        .collect();
    let mut map = vec![usize::MAX; n];
    let mut free = Vec::new();
    for j in 0..n {
        if state[j] == Bound::Free {
            map[j] = free.len();
            free.push(j);
        }
    }
    let nf = free.len();

    // imposed rows: all equalities, then the active inequalities
    let active: Vec<usize> = (0..qp.ineq.len()).filter(|&r| it.s[r] < it.lam[r]).collect();
    let bnorm = inf_norm(&qp.eq_rhs).max(inf_norm(&qp.ineq_rhs));
    let cnorm = inf_norm(&qp.c);
    let ptol = tol * (1.0 + bnorm);
    let dtol = tol * (1.0 + cnorm);

    struct Row {
        idx: Vec<usize>,
        val: Vec<f64>,
        rhs: f64,
        /// `None` for equalities, `Some(r)` for inequality `r`.
        ineq: Option<usize>,
    }
    let mut rows = Vec::new();
    let sources = qp
        .eq
        .iter()
        .zip(&qp.eq_rhs)
        .map(|(r, b)| (r, *b, None))
        .chain(active.iter().map(|&r| (&qp.ineq[r], qp.ineq_rhs[r], Some(r))));
    for (row, b, ineq) in sources {
        let mut out = Row { idx: Vec::new(), val: Vec::new(), rhs: b, ineq };
        for (&i, &v) in row.idx.iter().zip(&row.val) {
            out.rhs -= v * x[i];
            if map[i] != usize::MAX {
                out.idx.push(map[i]);
                out.val.push(v);
            }
        }
        if out.idx.is_empty() {
            let bad = match ineq {
                None => out.rhs.abs(),
                Some(_) => -out.rhs,
            };
            if bad > ptol {
                return None;
            }
            continue;
        }
        rows.push(out);
    }
    let m = rows.len();

    let off: Vec<(usize, usize, f64)> = qp
        .h_off
        .iter()
        .filter(|&&(i, j, _)| map[i] != usize::MAX && map[j] != usize::MAX)
        .map(|&(i, j, h)| (map[i], map[j], h))
        .collect();
    let pairs: Vec<(usize, usize)> = off.iter().map(|&(i, j, _)| (i, j)).collect();
    let layout = Layout::new(nf, rows.iter().map(|r| r.idx.as_slice()), &pairs);
    let (pos_var, pos_row) = (&layout.pos_var, &layout.pos_row);
    let mut env = Envelope::new(layout.first.clone());
    for (j, &orig) in free.iter().enumerate() {
        env.add(pos_var[j], pos_var[j], qp.h_diag[orig] + REG);
    }
    for &(i, j, h) in &off {
        env.add(pos_var[i], pos_var[j], h);
    }
    for (k, r) in rows.iter().enumerate() {
        for (&i, &v) in r.idx.iter().zip(&r.val) {
            env.add(pos_row[k], pos_var[i], v);
        }
        env.add(pos_row[k], pos_row[k], -REG);
    }
    env.factor(&layout.signs, 1e-15);

    // the unknowns are the step from the snapped iterate, so the
    // regularisation keeps directions the system leaves open where they are
    let mut grad_fixed = qp.c.clone();
    for j in 0..n {
        grad_fixed[j] += qp.h_diag[j] * x[j];
    }
    for &(i, j, h) in &qp.h_off {
        grad_fixed[i] += h * x[j];
        grad_fixed[j] += h * x[i];
    }
    let mut b = vec![0.0; nf + m];
    for (j, &orig) in free.iter().enumerate() {
        b[pos_var[j]] = -grad_fixed[orig];
    }
    for (k, r) in rows.iter().enumerate() {
        b[pos_row[k]] = r.rhs;
    }

    let apply = |sol: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; nf + m];
        for (j, &orig) in free.iter().enumerate() {
            out[pos_var[j]] = qp.h_diag[orig] * sol[pos_var[j]];
        }
        for &(i, j, h) in &off {
            out[pos_var[i]] += h * sol[pos_var[j]];
            out[pos_var[j]] += h * sol[pos_var[i]];
        }
        for (k, r) in rows.iter().enumerate() {
            let mut acc = 0.0;
            for (&i, &v) in r.idx.iter().zip(&r.val) {
                acc += v * sol[pos_var[i]];
                out[pos_var[i]] += v * sol[pos_row[k]];
            }
            out[pos_row[k]] = acc;
        }
        out
    };
    let sol = refine(&env, &b, apply, 40);
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }

    for (j, &orig) in free.iter().enumerate() {
        x[orig] += sol[pos_var[j]];
    }
    // multipliers: y for equalities, lambda for active inequalities
    let mut y = vec![0.0; qp.eq.len()];
    let mut lam = vec![0.0; qp.ineq.len()];
    let mut eq_k = 0;
    for (k, r) in rows.iter().enumerate() {
        // rows are solved with multiplier sign +; the stationarity uses + A'y
        match r.ineq {
            None => {
                // rows carried over from qp.eq in order, minus the dropped ones
                while qp.eq[eq_k].idx.iter().all(|&i| map[i] == usize::MAX) {
                    eq_k += 1;
                }
                y[eq_k] = sol[pos_row[k]];
                eq_k += 1;
            }
            Some(ri) => lam[ri] = sol[pos_row[k]],
        }
    }

    // primal check
    for j in 0..n {
        if x[j] < qp.lower[j] - ptol || x[j] > qp.upper[j] + ptol {
            return None;
        }
        x[j] = x[j].clamp(qp.lower[j], qp.upper[j]);
    }
    for (row, b) in qp.eq.iter().zip(&qp.eq_rhs) {
        if (row.dot(&x) - b).abs() > ptol {
            return None;
        }
    }
    for (row, h) in qp.ineq.iter().zip(&qp.ineq_rhs) {
        if row.dot(&x) - h > ptol {
            return None;
        }
    }
    // dual check
    if lam.iter().any(|&l| l < -dtol) {
        return None;
    }
    let mut g = qp.c.clone();
    for j in 0..n {
        g[j] += qp.h_diag[j] * x[j];
    }
    for &(i, j, h) in &qp.h_off {
        g[i] += h * x[j];
        g[j] += h * x[i];
    }
    for (row, &yr) in qp.eq.iter().zip(&y) {
        for (&i, &v) in row.idx.iter().zip(&row.val) {
            g[i] += v * yr;
        }
    }
    for (row, &lr) in qp.ineq.iter().zip(&lam) {
        if lr != 0.0 {
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                g[i] += v * lr;
            }
        }
    }
    for j in 0..n {
        let ok = match state[j] {
            Bound::Free => g[j].abs() <= dtol,
            Bound::Lower => g[j] >= -dtol,
            Bound::Upper => g[j] <= dtol,
        };
        if !ok {
            return None;
        }
    }
    Some(x)
}
