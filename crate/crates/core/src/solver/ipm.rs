//! Mehrotra predictor-corrector interior-point method for the reduced
//! convex QP. Bounds are kept strictly interior; general inequality rows
//! carry explicit slacks so the start point need not be feasible.
//!
//! The Newton system is the full augmented matrix: every equality and
//! inequality row keeps its own multiplier row, placed right after the
//! largest variable it touches. Folding inequalities into the variable
//! block instead adds weights of order `lambda / s` that swamp the small
//! pivots of weakly determined variables.

use super::ldl::Envelope;
use super::polish::{polish, Iterate};
use super::reduce::ReducedQp;

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub tol: f64,
    /// Added to every diagonal entry of `H`.
    pub hess_shift: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum IpmOutcome {
    Converged { x: Vec<f64> },
    /// Stalled, diverging multipliers or iteration cap: suspect infeasible.
    Failed { reason: &'static str },
}

const STEP_FRACTION: f64 = 0.995;
const STATIC_REG: f64 = 1e-9;
const DUAL_BLOWUP: f64 = 1e13;
// looser levels at which a stalled run still counts as solved
const ACCEPT_PRIMAL: f64 = 1e-8;
const ACCEPT_DUAL: f64 = 1e-6;
const ACCEPT_MU: f64 = 1e-8;
const STALL_ITERS: usize = 12;
const POLISH_MU: f64 = 1e-6;

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Positions of variables and rows in an interleaved KKT ordering.
pub(crate) struct Layout {
    pub pos_var: Vec<usize>,
    /// Position of each row, in the order the rows were given.
    pub pos_row: Vec<usize>,
    pub signs: Vec<f64>,
    pub first: Vec<usize>,
}

impl Layout {
    /// `rows` lists the variable indices of each row, `off` the coupled
    /// variable pairs of the Hessian.
    pub(crate) fn new<'a, I>(n: usize, rows: I, off: &[(usize, usize)]) -> Self
    where
        I: Iterator<Item = &'a [usize]> + Clone,
    {
        let mut after: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        let mut m = 0;
        for (r, idx) in rows.clone().enumerate() {
            let slot = idx.iter().map(|&i| i + 1).max().unwrap_or(0);
            after[slot].push(r);
            m += 1;
        }
        let mut pos_var = vec![0; n];
        let mut pos_row = vec![0; m];
        let mut signs = Vec::with_capacity(n + m);
        for &r in &after[0] {
            pos_row[r] = signs.len();
            signs.push(-1.0);
        }
        for j in 0..n {
            pos_var[j] = signs.len();
            signs.push(1.0);
            for &r in &after[j + 1] {
                pos_row[r] = signs.len();
                signs.push(-1.0);
            }
        }
        let mut first: Vec<usize> = (0..n + m).collect();
        let mut touch = |a: usize, b: usize| {
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            first[hi] = first[hi].min(lo);
        };
        for &(i, j) in off {
            touch(pos_var[i], pos_var[j]);
        }
        for (r, idx) in rows.enumerate() {
            for &i in idx {
                touch(pos_row[r], pos_var[i]);
            }
        }
        Self { pos_var, pos_row, signs, first }
    }
}

/// Solves with `env`, then refines against the exact product `apply` for as
/// long as the residual keeps shrinking.
pub(crate) fn refine(env: &Envelope, b: &[f64], apply: impl Fn(&[f64]) -> Vec<f64>, max_steps: usize) -> Vec<f64> {
    let mut x = b.to_vec();
    env.solve(&mut x);
    let target = 1e-15 * inf_norm(b).max(1e-300);
    let residual = |x: &[f64]| -> (Vec<f64>, f64) {
        let r: Vec<f64> = b.iter().zip(apply(x)).map(|(p, q)| p - q).collect();
        let norm = inf_norm(&r);
        (r, norm)
    };
    let (mut r, mut norm) = residual(&x);
    for _ in 0..max_steps {
        if norm <= target {
            break;
        }
        let mut c = r.clone();
        env.solve(&mut c);
        let cand: Vec<f64> = x.iter().zip(&c).map(|(a, d)| a + d).collect();
        let (cr, cn) = residual(&cand);
        if !(cn < norm) {
            break;
        }
        x = cand;
        r = cr;
        norm = cn;
    }
    x
}

struct State {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    lam: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
}

struct Dir {
    dx: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dlam: Vec<f64>,
    dzl: Vec<f64>,
    dzu: Vec<f64>,
}

impl Dir {
    fn zero(n: usize, p: usize, mi: usize) -> Self {
        Dir {
            dx: vec![0.0; n],
            dy: vec![0.0; p],
            ds: vec![0.0; mi],
            dlam: vec![0.0; mi],
            dzl: vec![0.0; n],
            dzu: vec![0.0; n],
        }
    }
}

pub(crate) fn solve(qp: &ReducedQp, set: &IpmSettings) -> IpmOutcome {
    let n = qp.n;
    let p = qp.eq.len();
    let mi = qp.ineq.len();
    let has_lo: Vec<bool> = qp.lower.iter().map(|l| l.is_finite()).collect();
    let has_hi: Vec<bool> = qp.upper.iter().map(|u| u.is_finite()).collect();
    let m_total = mi + has_lo.iter().filter(|&&b| b).count() + has_hi.iter().filter(|&&b| b).count();

    let mut st = State {
        x: (0..n)
            .map(|j| match (has_lo[j], has_hi[j]) {
                (true, true) => 0.5 * (qp.lower[j] + qp.upper[j]),
                (true, false) => qp.lower[j] + 1.0,
                (false, true) => qp.upper[j] - 1.0,
                (false, false) => 0.0,
            })
            .collect(),
        y: vec![0.0; p],
        s: vec![0.0; mi],
        lam: vec![1.0; mi],
        zl: has_lo.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        zu: has_hi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    };
    for (r, row) in qp.ineq.iter().enumerate() {
        st.s[r] = (qp.ineq_rhs[r] - row.dot(&st.x)).max(1.0);
    }

    let bnorm = inf_norm(&qp.eq_rhs).max(inf_norm(&qp.ineq_rhs));
    let cnorm = inf_norm(&qp.c);
    let tol_p = set.tol * (1.0 + bnorm);
    let tol_d = set.tol * (1.0 + cnorm);
    // iterate kept for when the strict test is never met
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0;
    let finish = |best: Option<(f64, Vec<f64>)>, reason: &'static str| match best {
        Some((score, x)) if score <= 1.0 => IpmOutcome::Converged { x },
        _ => IpmOutcome::Failed { reason },
    };

    let off: Vec<(usize, usize)> = qp.h_off.iter().map(|&(i, j, _)| (i, j)).collect();
    let layout = Layout::new(n, qp.eq.iter().chain(&qp.ineq).map(|r| r.idx.as_slice()), &off);
    let mut env = Envelope::new(layout.first.clone());
    let mut rd = vec![0.0; n];
    let mut re = vec![0.0; p];
    let mut ri = vec![0.0; mi];

    for _ in 0..set.max_iter {
        hess_mul(qp, set.hess_shift, &st.x, &mut rd);
        for j in 0..n {
            rd[j] += qp.c[j] - st.zl[j] + st.zu[j];
        }
        for (r, row) in qp.eq.iter().enumerate() {
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                rd[i] += v * st.y[r];
            }
            re[r] = row.dot(&st.x) - qp.eq_rhs[r];
        }
        for (r, row) in qp.ineq.iter().enumerate() {
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                rd[i] += v * st.lam[r];
            }
            ri[r] = row.dot(&st.x) + st.s[r] - qp.ineq_rhs[r];
        }
        let mut comp = 0.0;
        for r in 0..mi {
            comp += st.s[r] * st.lam[r];
        }
        for j in 0..n {
            if has_lo[j] {
                comp += (st.x[j] - qp.lower[j]) * st.zl[j];
            }
            if has_hi[j] {
                comp += (qp.upper[j] - st.x[j]) * st.zu[j];
            }
        }
        let mu = if m_total > 0 { comp / m_total as f64 } else { 0.0 };
        let pres = inf_norm(&re).max(inf_norm(&ri));
        let dres = inf_norm(&rd);
        if !(pres.is_finite() && dres.is_finite() && mu.is_finite()) {
            return finish(best, "non-finite iterate");
        }
        let strict = pres <= tol_p && dres <= tol_d && mu <= set.tol;
        if strict || (mu <= POLISH_MU && pres <= POLISH_MU * (1.0 + bnorm)) {
            let it = Iterate { x: &st.x, s: &st.s, lam: &st.lam, zl: &st.zl, zu: &st.zu };
            if let Some(x) = polish(qp, &it, set.tol) {
                return IpmOutcome::Converged { x };
            }
        }
        if strict {
            return IpmOutcome::Converged { x: st.x };
        }
        let score = (pres / (ACCEPT_PRIMAL * (1.0 + bnorm)))
            .max(dres / (ACCEPT_DUAL * (1.0 + cnorm)))
            .max(mu / ACCEPT_MU);
        if best.as_ref().map_or(true, |(b, _)| score < *b) {
            best = Some((score, st.x.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_ITERS {
                return finish(best, "no progress");
            }
        }
        let dual_max = inf_norm(&st.lam).max(inf_norm(&st.zl)).max(inf_norm(&st.zu));
        if dual_max > DUAL_BLOWUP {
            return finish(best, "diverging multipliers");
        }

        env.clear();
        let mut diag = vec![0.0; n];
        for j in 0..n {
            let mut d = qp.h_diag[j] + set.hess_shift;
            if has_lo[j] {
                d += st.zl[j] / (st.x[j] - qp.lower[j]);
            }
            if has_hi[j] {
                d += st.zu[j] / (qp.upper[j] - st.x[j]);
            }
            diag[j] = d;
            env.add(layout.pos_var[j], layout.pos_var[j], d + STATIC_REG);
        }
        for &(i, j, h) in &qp.h_off {
            env.add(layout.pos_var[i], layout.pos_var[j], h);
        }
        let w: Vec<f64> = (0..mi).map(|r| st.s[r] / st.lam[r]).collect();
        for (r, row) in qp.eq.iter().chain(&qp.ineq).enumerate() {
            let pr = layout.pos_row[r];
            for (&i, &v) in row.idx.iter().zip(&row.val) {
                env.add(pr, layout.pos_var[i], v);
            }
            let d = if r >= p { -w[r - p] } else { 0.0 };
            env.add(pr, pr, d - STATIC_REG);
        }
        env.factor(&layout.signs, 1e-15);
        let ctx = Ctx { qp, layout: &layout, env: &env, diag: &diag, w: &w, has_lo: &has_lo, has_hi: &has_hi };

        // predictor
        let zero = Dir::zero(n, p, mi);
        let (rc_i, rc_l, rc_u) = comp_rhs(qp, &st, 0.0, &zero, &has_lo, &has_hi);
        let aff = ctx.direction(&st, &rd, &re, &ri, &rc_i, &rc_l, &rc_u);
        let (dir, alpha) = if m_total > 0 {
            let alpha_aff = max_step(qp, &st, &aff, &has_lo, &has_hi).min(1.0);
            let comp_aff = complementarity(qp, &st, &aff, alpha_aff, &has_lo, &has_hi);
            let sigma = (comp_aff / m_total as f64 / mu).powi(3).clamp(0.0, 1.0);
            let (rc_i, rc_l, rc_u) = comp_rhs(qp, &st, sigma * mu, &aff, &has_lo, &has_hi);
            let dir = ctx.direction(&st, &rd, &re, &ri, &rc_i, &rc_l, &rc_u);
            let alpha = (STEP_FRACTION * max_step(qp, &st, &dir, &has_lo, &has_hi)).min(1.0);
            let mu_new = complementarity(qp, &st, &dir, alpha, &has_lo, &has_hi) / m_total as f64;
            // while residuals dominate, complementarity may grow
            let infeasible = pres / (1.0 + bnorm) > mu || dres / (1.0 + cnorm) > mu;
            if infeasible || mu_new <= (1.0 - 0.01 * alpha) * mu {
                (dir, alpha)
            } else {
                // the second-order term overshot: plain centred step with backtracking
                let sigma = sigma.max(0.1);
                let (rc_i, rc_l, rc_u) = comp_rhs(qp, &st, sigma * mu, &zero, &has_lo, &has_hi);
                let dir = ctx.direction(&st, &rd, &re, &ri, &rc_i, &rc_l, &rc_u);
                let mut alpha = (STEP_FRACTION * max_step(qp, &st, &dir, &has_lo, &has_hi)).min(1.0);
                for _ in 0..30 {
                    let mu_new = complementarity(qp, &st, &dir, alpha, &has_lo, &has_hi) / m_total as f64;
                    if mu_new <= (1.0 - 0.01 * alpha) * mu {
                        break;
                    }
                    alpha *= 0.5;
                }
                (dir, alpha)
            }
        } else {
            (aff, 1.0)
        };
        if alpha < 1e-12 {
            return finish(best, "step length collapsed");
        }
        for j in 0..n {
            st.x[j] += alpha * dir.dx[j];
            st.zl[j] += alpha * dir.dzl[j];
            st.zu[j] += alpha * dir.dzu[j];
        }
        for r in 0..p {
            st.y[r] += alpha * dir.dy[r];
        }
        for r in 0..mi {
            st.s[r] += alpha * dir.ds[r];
            st.lam[r] += alpha * dir.dlam[r];
        }
    }
    finish(best, "iteration limit")
}

/// Total complementarity after a step of length `alpha` along `d`.
fn complementarity(qp: &ReducedQp, st: &State, d: &Dir, alpha: f64, has_lo: &[bool], has_hi: &[bool]) -> f64 {
    let mut c = 0.0;
    for r in 0..st.s.len() {
        c += (st.s[r] + alpha * d.ds[r]) * (st.lam[r] + alpha * d.dlam[r]);
    }
    for j in 0..qp.n {
        if has_lo[j] {
            c += (st.x[j] - qp.lower[j] + alpha * d.dx[j]) * (st.zl[j] + alpha * d.dzl[j]);
        }
        if has_hi[j] {
            c += (qp.upper[j] - st.x[j] - alpha * d.dx[j]) * (st.zu[j] + alpha * d.dzu[j]);
        }
    }
    c
}

/// Right-hand sides of the linearised complementarity rows for centring
/// target `target`, with the second-order correction taken from `aff`.
fn comp_rhs(
    qp: &ReducedQp,
    st: &State,
    target: f64,
    aff: &Dir,
    has_lo: &[bool],
    has_hi: &[bool],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let rc_i = (0..st.s.len())
        .map(|r| target - st.s[r] * st.lam[r] - aff.ds[r] * aff.dlam[r])
        .collect();
    let rc_l = (0..qp.n)
        .map(|j| {
            if has_lo[j] {
                target - (st.x[j] - qp.lower[j]) * st.zl[j] - aff.dx[j] * aff.dzl[j]
            } else {
                0.0
            }
        })
        .collect();
    let rc_u = (0..qp.n)
        .map(|j| {
            if has_hi[j] {
                target - (qp.upper[j] - st.x[j]) * st.zu[j] + aff.dx[j] * aff.dzu[j]
            } else {
                0.0
            }
        })
        .collect();
    (rc_i, rc_l, rc_u)
}

/// `out = (H + shift I) x`
fn hess_mul(qp: &ReducedQp, shift: f64, x: &[f64], out: &mut [f64]) {
    for j in 0..qp.n {
        out[j] = (qp.h_diag[j] + shift) * x[j];
    }
    for &(i, j, h) in &qp.h_off {
        out[i] += h * x[j];
        out[j] += h * x[i];
    }
}

fn max_step(qp: &ReducedQp, st: &State, d: &Dir, has_lo: &[bool], has_hi: &[bool]) -> f64 {
    let mut a: f64 = 1.0 / STEP_FRACTION;
    let mut limit = |v: f64, dv: f64| {
        if dv < 0.0 {
            a = a.min(-v / dv);
        }
    };
    for r in 0..st.s.len() {
        limit(st.s[r], d.ds[r]);
        limit(st.lam[r], d.dlam[r]);
    }
    for j in 0..qp.n {
        if has_lo[j] {
            limit(st.x[j] - qp.lower[j], d.dx[j]);
            limit(st.zl[j], d.dzl[j]);
        }
        if has_hi[j] {
            limit(qp.upper[j] - st.x[j], -d.dx[j]);
            limit(st.zu[j], d.dzu[j]);
        }
    }
    a
}

struct Ctx<'a> {
    qp: &'a ReducedQp,
    layout: &'a Layout,
    env: &'a Envelope,
    diag: &'a [f64],
    /// `s / lambda` per inequality row
    w: &'a [f64],
    has_lo: &'a [bool],
    has_hi: &'a [bool],
}

impl Ctx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        st: &State,
        rd: &[f64],
        re: &[f64],
        ri: &[f64],
        rc_i: &[f64],
        rc_l: &[f64],
        rc_u: &[f64],
    ) -> Dir {
        let qp = self.qp;
        let lay = self.layout;
        let n = qp.n;
        let p = qp.eq.len();
        let mi = qp.ineq.len();
        let mut b = vec![0.0; n + p + mi];
        for j in 0..n {
            let mut v = -rd[j];
            if self.has_lo[j] {
                v += rc_l[j] / (st.x[j] - qp.lower[j]);
            }
            if self.has_hi[j] {
                v -= rc_u[j] / (qp.upper[j] - st.x[j]);
            }
            b[lay.pos_var[j]] = v;
        }
        for r in 0..p {
            b[lay.pos_row[r]] = -re[r];
        }
        for r in 0..mi {
            b[lay.pos_row[p + r]] = -ri[r] - rc_i[r] / st.lam[r];
        }
        let sol = refine(self.env, &b, |v| self.apply(v), 6);
        let dx: Vec<f64> = (0..n).map(|j| sol[lay.pos_var[j]]).collect();
        let dy: Vec<f64> = (0..p).map(|r| sol[lay.pos_row[r]]).collect();
        let dlam: Vec<f64> = (0..mi).map(|r| sol[lay.pos_row[p + r]]).collect();
        let ds: Vec<f64> = (0..mi).map(|r| (rc_i[r] - st.s[r] * dlam[r]) / st.lam[r]).collect();
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for j in 0..n {
            if self.has_lo[j] {
                dzl[j] = (rc_l[j] - st.zl[j] * dx[j]) / (st.x[j] - qp.lower[j]);
            }
            if self.has_hi[j] {
                dzu[j] = (rc_u[j] + st.zu[j] * dx[j]) / (qp.upper[j] - st.x[j]);
            }
        }
        Dir { dx, dy, ds, dlam, dzl, dzu }
    }

    /// Unregularised KKT product in layout order.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let qp = self.qp;
        let lay = self.layout;
        let p = qp.eq.len();
        let mut out = vec![0.0; v.len()];
        for j in 0..qp.n {
            out[lay.pos_var[j]] = self.diag[j] * v[lay.pos_var[j]];
        }
        for &(i, j, h) in &qp.h_off {
            out[lay.pos_var[i]] += h * v[lay.pos_var[j]];
            out[lay.pos_var[j]] += h * v[lay.pos_var[i]];
        }
        for (r, row) in qp.eq.iter().chain(&qp.ineq).enumerate() {
            let pr = lay.pos_row[r];
            let mut acc = if r >= p { -self.w[r - p] * v[pr] } else { 0.0 };
            for (&i, &a) in row.idx.iter().zip(&row.val) {
                acc += a * v[lay.pos_var[i]];
                out[lay.pos_var[i]] += a * v[pr];
            }
            out[pr] = acc;
        }
        out
    }
}
