//! One vehicle's mixed-integer quadratic program.
//!
//! Slots are numbered `1..=T` in labels and `0..T` in vectors. The state
//! variable `x[t]` is the state of charge at the *end* of slot `t`; the
//! pre-horizon charge, plug state and exchanged energy are parameters.
//!
//! Per slot the builder registers, in this order:
//! `u, x, delta, delta_c, delta_d, f, g, s, l, kappa, alpha, beta[1..=h_eff]`
//! where `h_eff(t) = min(h_min, T - t)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Assignment, LinearConstraint, LinearExpr, MixedIntegerQP, ModelError, QuadraticObjective,
    VarId, VarSpec, DEFAULT_FEAS_TOL,
};
use crate::patterns::{
    pattern_and, pattern_geq, pattern_implies, pattern_leq, ExprBounds, Literal, PatternError,
    Tolerance,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },
    #[error("`{field}` has length {got}, expected horizon {expected}")]
    Length { field: String, expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("assignment is not feasible for the player program (max violation {max_violation:e})")]
    Infeasible { max_violation: f64 },
}

fn invalid(field: &str, reason: impl Into<String>) -> BuildError {
    BuildError::InvalidParam { field: field.to_string(), reason: reason.into() }
}

fn check_len(field: &str, got: usize, expected: usize) -> Result<(), BuildError> {
    if got != expected {
        return Err(BuildError::Length { field: field.to_string(), expected, got });
    }
    Ok(())
}

/// Physical parameters of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PevParams {
    /// Battery efficiency, in `(0, 1]`.
    pub efficiency: f64,
    pub capacity_kwh: f64,
    /// State of charge before the first slot.
    pub initial_soc: f64,
    /// Lower reference for the end-of-slot state of charge, one per slot.
    pub soc_ref: Vec<f64>,
    /// State-of-charge drain per slot while driving (0 when parked).
    pub drain_soc: Vec<f64>,
    /// Charge-side degradation weight, EUR/kWh^2.
    pub rho_plus: f64,
    /// Discharge-side degradation weight, EUR/kWh^2.
    pub rho_minus: f64,
    /// Minimum number of additional plugged slots after a plug-in.
    pub min_plugged_slots: usize,
    pub initial_plugged: bool,
    pub initial_exchange_kwh: f64,
}

impl PevParams {
    /// `b = eta / C`, the state-of-charge gain per kWh.
    pub fn soc_gain(&self) -> f64 {
        self.efficiency / self.capacity_kwh
    }

    pub fn is_driving(&self, t: usize) -> bool {
        self.drain_soc[t] > 0.0
    }

    pub fn validate(&self, horizon: usize, grid: &GridParams) -> Result<(), BuildError> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(invalid("efficiency", "must lie in (0, 1]"));
        }
        if !(self.capacity_kwh > 0.0 && self.capacity_kwh.is_finite()) {
            return Err(invalid("capacity_kwh", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return Err(invalid("initial_soc", "must lie in [0, 1]"));
        }
        check_len("soc_ref", self.soc_ref.len(), horizon)?;
        check_len("drain_soc", self.drain_soc.len(), horizon)?;
        if self.soc_ref.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("soc_ref", "entries must lie in [0, 1]"));
        }
        if self.drain_soc.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(invalid("drain_soc", "entries must be non-negative"));
        }
        if !(self.rho_plus >= 0.0 && self.rho_minus >= 0.0) {
            return Err(invalid("rho", "degradation weights must be non-negative"));
        }
        if self.min_plugged_slots == 0 || self.min_plugged_slots > horizon {
            return Err(invalid("min_plugged_slots", format!("must lie in 1..={horizon}")));
        }
        let u0 = self.initial_exchange_kwh;
        if !(grid.u_min_kwh..=grid.u_max_kwh).contains(&u0) {
            return Err(invalid("initial_exchange_kwh", "must lie in the exchange range"));
        }
        if u0 != 0.0 && !self.initial_plugged {
            return Err(invalid("initial_exchange_kwh", "non-zero exchange requires initial_plugged"));
        }
        Ok(())
    }
}

/// Station and grid parameters shared by the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Energy cost coefficient `c`, EUR/kWh per kWh of load.
    pub energy_cost: f64,
    /// Reward coefficient `r_bar`, EUR/kWh per kWh of load.
    pub reward_coeff: f64,
    /// Non-vehicle load per slot, kWh.
    pub demand_kwh: Vec<f64>,
    /// Grid capacity per slot, kWh.
    pub capacity_kwh: f64,
    /// Number of charging points.
    pub max_plugged: usize,
    pub u_min_kwh: f64,
    pub u_max_kwh: f64,
    /// Band width of the sign patterns, kWh.
    pub pattern_eps_kwh: f64,
}

impl GridParams {
    pub fn horizon(&self) -> usize {
        self.demand_kwh.len()
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        if !(self.energy_cost >= 0.0 && self.reward_coeff >= 0.0) {
            return Err(invalid("energy_cost", "cost and reward coefficients must be non-negative"));
        }
        if self.demand_kwh.is_empty() {
            return Err(invalid("demand_kwh", "horizon must be at least one slot"));
        }
        if self.demand_kwh.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(invalid("demand_kwh", "entries must be non-negative"));
        }
        if !(self.capacity_kwh > 0.0) {
            return Err(invalid("capacity_kwh", "must be positive"));
        }
        if self.max_plugged == 0 {
            return Err(invalid("max_plugged", "must be at least 1"));
        }
        if !(self.u_min_kwh < 0.0 && self.u_max_kwh > 0.0) {
            return Err(invalid("u_min_kwh", "exchange range must straddle zero"));
        }
        Tolerance::new(self.pattern_eps_kwh)?;
        Ok(())
    }
}

/// Aggregate information broadcast to one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSignals {
    /// `c (d + a_i)` per slot.
    pub price: Vec<f64>,
    /// Charging points left by the other players, per slot.
    pub plugs_free: Vec<usize>,
    /// `r_bar (d + sum of the others' discharges)` per slot.
    pub reward: Vec<f64>,
    /// Interval for this player's exchange implied by the grid-capacity rows.
    pub exchange_bounds: Vec<(f64, f64)>,
}

impl AggregateSignals {
    /// Signals seen by a player when everybody else is at rest.
    pub fn at_rest(grid: &GridParams) -> Self {
        let d = &grid.demand_kwh;
        Self {
            price: d.iter().map(|d| grid.energy_cost * d).collect(),
            plugs_free: vec![grid.max_plugged; d.len()],
            reward: d.iter().map(|d| grid.reward_coeff * d).collect(),
            exchange_bounds: d.iter().map(|d| (-d, grid.capacity_kwh - d)).collect(),
        }
    }

    pub fn validate(&self, horizon: usize, grid: &GridParams) -> Result<(), BuildError> {
        check_len("price", self.price.len(), horizon)?;
        check_len("plugs_free", self.plugs_free.len(), horizon)?;
        check_len("reward", self.reward.len(), horizon)?;
        check_len("exchange_bounds", self.exchange_bounds.len(), horizon)?;
        if self.plugs_free.iter().any(|&p| p > grid.max_plugged) {
            return Err(invalid("plugs_free", "cannot exceed the number of charging points"));
        }
        Ok(())
    }
}

/// Variable ids of one player's program, slot by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerVariables {
    pub horizon: usize,
    pub u: Vec<VarId>,
    pub x: Vec<VarId>,
    pub plugged: Vec<VarId>,
    pub charge_flag: Vec<VarId>,
    pub discharge_flag: Vec<VarId>,
    pub f: Vec<VarId>,
    pub g: Vec<VarId>,
    pub s: Vec<VarId>,
    pub l: Vec<VarId>,
    pub kappa: Vec<VarId>,
    pub plug_in: Vec<VarId>,
    /// `beta[t][h - 1]` for `h = 1..=h_eff(t)`.
    pub beta: Vec<Vec<VarId>>,
}

/// `min(h_min, T - t)` for the zero-based slot `t`.
pub fn effective_min_plugged(h_min: usize, horizon: usize, t: usize) -> usize {
    h_min.min(horizon - 1 - t)
}

/// Values of one player's variables in canonical per-slot layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerStrategy {
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub plugged: Vec<bool>,
    pub charge_flag: Vec<bool>,
    pub discharge_flag: Vec<bool>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub s: Vec<f64>,
    pub l: Vec<f64>,
    pub kappa: Vec<f64>,
    pub plug_in: Vec<bool>,
    pub beta: Vec<Vec<bool>>,
}

impl PlayerStrategy {
    /// Never plugged: no exchange, the battery only drains while driving.
    pub fn rest(pev: &PevParams, horizon: usize) -> Self {
        let mut x = Vec::with_capacity(horizon);
        let mut soc = pev.initial_soc;
        for t in 0..horizon {
            soc -= pev.drain_soc[t];
            x.push(soc);
        }
        let zeros = vec![0.0; horizon];
        Self {
            u: zeros.clone(),
            x,
            plugged: vec![false; horizon],
            charge_flag: vec![true; horizon],
            discharge_flag: vec![true; horizon],
            f: zeros.clone(),
            g: zeros.clone(),
            s: zeros.clone(),
            l: zeros.clone(),
            kappa: zeros,
            plug_in: vec![false; horizon],
            beta: (0..horizon)
                .map(|t| vec![false; effective_min_plugged(pev.min_plugged_slots, horizon, t)])
                .collect(),
        }
    }

    /// The strategy whose exchange is `u`: plugged exactly where `u != 0`,
    /// every auxiliary variable at the value its rows force.
    pub fn from_exchange(pev: &PevParams, u: &[f64]) -> Self {
        let horizon = u.len();
        let gain = pev.soc_gain();
        let mut st = Self::rest(pev, horizon);
        let mut soc = pev.initial_soc;
        for t in 0..horizon {
            let plugged = u[t] != 0.0;
            let (prev_u, prev_plugged) =
                if t == 0 { (pev.initial_exchange_kwh, pev.initial_plugged) } else { (u[t - 1], u[t - 1] != 0.0) };
            st.u[t] = u[t];
            st.plugged[t] = plugged;
            st.charge_flag[t] = u[t] >= 0.0;
            st.discharge_flag[t] = u[t] <= 0.0;
            st.f[t] = u[t];
            st.g[t] = if st.charge_flag[t] { 0.0 } else { u[t] };
            st.s[t] = if st.charge_flag[t] { 0.0 } else { prev_u };
            st.l[t] = if st.discharge_flag[t] { 0.0 } else { u[t] };
            st.kappa[t] = if st.discharge_flag[t] { 0.0 } else { prev_u };
            st.plug_in[t] = plugged && !prev_plugged;
            soc += gain * u[t] - if plugged { 0.0 } else { pev.drain_soc[t] };
            st.x[t] = soc;
        }
        for t in 0..horizon {
            for h in 0..st.beta[t].len() {
                st.beta[t][h] = st.plug_in[t] && st.plugged[t + h + 1];
            }
        }
        st
    }

    pub fn horizon(&self) -> usize {
        self.u.len()
    }

    /// Local cost given the broadcast price and reward.
    pub fn cost(&self, pev: &PevParams, price: &[f64], reward: &[f64]) -> f64 {
        (0..self.horizon())
            .map(|t| {
                let dg = self.g[t] - self.s[t];
                let dl = self.l[t] - self.kappa[t];
                price[t] * self.l[t] + reward[t] * self.g[t] + pev.rho_minus * dg * dg + pev.rho_plus * dl * dl
            })
            .sum()
    }

    /// Canonical stacked vector `(u, x, delta, delta_c, delta_d, f, g, s, l, kappa, alpha, beta)`.
    pub fn to_vector(&self) -> Vec<f64> {
        let b = |v: &[bool]| v.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect::<Vec<_>>();
        let mut out = Vec::new();
        out.extend_from_slice(&self.u);
        out.extend_from_slice(&self.x);
        out.extend(b(&self.plugged));
        out.extend(b(&self.charge_flag));
        out.extend(b(&self.discharge_flag));
        out.extend_from_slice(&self.f);
        out.extend_from_slice(&self.g);
        out.extend_from_slice(&self.s);
        out.extend_from_slice(&self.l);
        out.extend_from_slice(&self.kappa);
        out.extend(b(&self.plug_in));
        for row in &self.beta {
            out.extend(b(row));
        }
        out
    }

    /// Writes the strategy into a full assignment of the program `vars` came from.
    pub fn to_assignment(&self, vars: &PlayerVariables, num_vars: usize) -> Assignment {
        let mut a = Assignment::zeros(num_vars);
        let fb = |b: bool| if b { 1.0 } else { 0.0 };
        for t in 0..vars.horizon {
            a.set(vars.u[t], self.u[t]);
            a.set(vars.x[t], self.x[t]);
            a.set(vars.plugged[t], fb(self.plugged[t]));
            a.set(vars.charge_flag[t], fb(self.charge_flag[t]));
            a.set(vars.discharge_flag[t], fb(self.discharge_flag[t]));
            a.set(vars.f[t], self.f[t]);
            a.set(vars.g[t], self.g[t]);
            a.set(vars.s[t], self.s[t]);
            a.set(vars.l[t], self.l[t]);
            a.set(vars.kappa[t], self.kappa[t]);
            a.set(vars.plug_in[t], fb(self.plug_in[t]));
            for (h, &id) in vars.beta[t].iter().enumerate() {
                a.set(id, fb(self.beta[t][h]));
            }
        }
        a
    }
}

/// A player's program together with its variable layout.
#[derive(Debug, Clone)]
pub struct PlayerProgram {
    pub program: MixedIntegerQP,
    pub vars: PlayerVariables,
}

impl PlayerProgram {
    pub fn pack(&self, a: &Assignment) -> Result<PlayerStrategy, BuildError> {
        pack_strategy(&self.program, &self.vars, a, DEFAULT_FEAS_TOL)
    }
}

struct Builder {
    p: MixedIntegerQP,
    eps: Tolerance,
}

impl Builder {
    fn cont(&mut self, name: &str, t: usize, lo: f64, hi: f64) -> Result<VarId, BuildError> {
        Ok(self.p.add_var(VarSpec::continuous(format!("{name}[{}]", t + 1), lo, hi))?)
    }

    fn bin(&mut self, label: String) -> Result<VarId, BuildError> {
        Ok(self.p.add_var(VarSpec::binary(label))?)
    }

    fn rows<I: IntoIterator<Item = LinearConstraint>>(&mut self, rows: I) -> Result<(), BuildError> {
        Ok(self.p.add_constraints(rows)?)
    }

    fn product(&mut self, g: VarId, f: &LinearExpr, delta: Literal) -> Result<(), BuildError> {
        let b = ExprBounds::of(f, &self.p)?;
        let rows = pattern_implies(g, f, delta, b);
        self.rows(rows)
    }
}

/// Assembles the full program of one vehicle given the others' aggregate.
pub fn build_player_program(
    pev: &PevParams,
    grid: &GridParams,
    sig: &AggregateSignals,
    horizon: usize,
) -> Result<PlayerProgram, BuildError> {
    if horizon == 0 {
        return Err(invalid("horizon", "must be at least one slot"));
    }
    grid.validate()?;
    check_len("demand_kwh", grid.horizon(), horizon)?;
    pev.validate(horizon, grid)?;
    sig.validate(horizon, grid)?;

    let mut bld = Builder { p: MixedIntegerQP::new(), eps: Tolerance::new(grid.pattern_eps_kwh)? };
    let (umin, umax) = (grid.u_min_kwh, grid.u_max_kwh);
    let gain = pev.soc_gain();
    let mut vars = PlayerVariables {
        horizon,
        u: vec![],
        x: vec![],
        plugged: vec![],
        charge_flag: vec![],
        discharge_flag: vec![],
        f: vec![],
        g: vec![],
        s: vec![],
        l: vec![],
        kappa: vec![],
        plug_in: vec![],
        beta: vec![],
    };

    for t in 0..horizon {
        let u = bld.cont("u", t, umin, umax)?;
        let x = bld.cont("x", t, pev.soc_ref[t], 1.0)?;
        let delta = bld.bin(format!("delta[{}]", t + 1))?;
        let dc = bld.bin(format!("delta_c[{}]", t + 1))?;
        let dd = bld.bin(format!("delta_d[{}]", t + 1))?;
        let f = bld.cont("f", t, umin, umax)?;
        let g = bld.cont("g", t, umin, umax)?;
        let s = bld.cont("s", t, umin, umax)?;
        let l = bld.cont("l", t, umin, umax)?;
        let kappa = bld.cont("kappa", t, umin, umax)?;
        let alpha = bld.bin(format!("alpha[{}]", t + 1))?;
        let h_eff = effective_min_plugged(pev.min_plugged_slots, horizon, t);
        let betas = (1..=h_eff)
            .map(|h| bld.bin(format!("beta[{},{}]", t + 1, h)))
            .collect::<Result<Vec<_>, _>>()?;
        vars.u.push(u);
        vars.x.push(x);
        vars.plugged.push(delta);
        vars.charge_flag.push(dc);
        vars.discharge_flag.push(dd);
        vars.f.push(f);
        vars.g.push(g);
        vars.s.push(s);
        vars.l.push(l);
        vars.kappa.push(kappa);
        vars.plug_in.push(alpha);
        vars.beta.push(betas);
    }

    for t in 0..horizon {
        let (u, delta) = (vars.u[t], vars.plugged[t]);
        let (dc, dd) = (vars.charge_flag[t], vars.discharge_flag[t]);
        let mu = pev.drain_soc[t];

        // x[t] = x[t-1] + b f[t] - (1 - delta[t]) mu[t]
        let mut soc = LinearExpr::var(vars.x[t])
            .with_term(vars.f[t], -gain)
            .with_term(delta, -mu);
        let prev = if t == 0 {
            pev.initial_soc
        } else {
            soc.add_term(vars.x[t - 1], -1.0);
            0.0
        };
        bld.rows([LinearConstraint::eq(soc, prev - mu)])?;

        // u in [u_min delta, u_max delta]
        bld.rows([
            LinearConstraint::le(LinearExpr::var(u).with_term(delta, -umax), 0.0),
            LinearConstraint::ge(LinearExpr::var(u).with_term(delta, -umin), 0.0),
        ])?;
        if pev.is_driving(t) {
            bld.rows([LinearConstraint::le(LinearExpr::var(delta), 0.0)])?;
        }

        // delta_c <=> u >= 0, delta_d <=> u <= 0
        let ue = LinearExpr::var(u);
        let ub = ExprBounds::of(&ue, &bld.p)?;
        let geq = pattern_geq(dc.into(), &ue, 0.0, ub, bld.eps)?;
        let leq = pattern_leq(dd.into(), &ue, 0.0, ub, bld.eps)?;
        bld.rows(geq)?;
        bld.rows(leq)?;

        // bilinear auxiliaries
        let u_prev = if t == 0 {
            LinearExpr::constant(pev.initial_exchange_kwh)
        } else {
            LinearExpr::var(vars.u[t - 1])
        };
        bld.product(vars.f[t], &ue, delta.into())?;
        bld.product(vars.g[t], &ue, Literal::Neg(dc))?;
        bld.product(vars.s[t], &u_prev, Literal::Neg(dc))?;
        bld.product(vars.l[t], &ue, Literal::Neg(dd))?;
        bld.product(vars.kappa[t], &u_prev, Literal::Neg(dd))?;

        // unplugged <=> neither charging nor discharging
        bld.rows(pattern_and(Literal::Neg(delta), dc.into(), dd.into()))?;

        // plug-in detection and minimum connection
        let was_unplugged = if t == 0 {
            Literal::Const(!pev.initial_plugged)
        } else {
            Literal::Neg(vars.plugged[t - 1])
        };
        let alpha = vars.plug_in[t];
        bld.rows(pattern_and(alpha.into(), was_unplugged, delta.into()))?;
        let betas = vars.beta[t].clone();
        if !betas.is_empty() {
            let mut sum = LinearExpr::term(alpha, -(betas.len() as f64));
            for (h, &beta) in betas.iter().enumerate() {
                let ahead = vars.plugged[t + h + 1];
                bld.rows(pattern_and(beta.into(), alpha.into(), ahead.into()))?;
                sum.add_term(beta, 1.0);
            }
            bld.rows([LinearConstraint::eq(sum, 0.0)])?;
        }

        // coupling with the rest of the fleet
        let (lo, hi) = sig.exchange_bounds[t];
        bld.rows([
            LinearConstraint::ge(LinearExpr::var(u), lo),
            LinearConstraint::le(LinearExpr::var(u), hi),
            LinearConstraint::le(LinearExpr::var(delta), sig.plugs_free[t].min(1) as f64),
        ])?;
    }

    let objective = build_cost(pev, sig, &vars);
    bld.p.set_objective(objective)?;
    Ok(PlayerProgram { program: bld.p, vars })
}

/// Rows satisfied by every integer-feasible point of a player program that
/// tighten its continuous relaxation: `f = u`, `u = g + l`, `l >= 0`,
/// `g <= 0` and `delta + delta_c + delta_d = 2`.
pub fn add_implied_rows(prog: &mut PlayerProgram) -> Result<(), BuildError> {
    let v = &prog.vars;
    let mut rows = Vec::new();
    for t in 0..v.horizon {
        let u = LinearExpr::var(v.u[t]);
        rows.push(LinearConstraint::eq(u.minus(&LinearExpr::var(v.f[t])), 0.0));
        rows.push(LinearConstraint::eq(u.with_term(v.g[t], -1.0).with_term(v.l[t], -1.0), 0.0));
        rows.push(LinearConstraint::ge(LinearExpr::var(v.l[t]), 0.0));
        rows.push(LinearConstraint::le(LinearExpr::var(v.g[t]), 0.0));
        rows.push(LinearConstraint::eq(
            LinearExpr::var(v.plugged[t]).with_term(v.charge_flag[t], 1.0).with_term(v.discharge_flag[t], 1.0),
            2.0,
        ));
    }
    prog.program.add_constraints(rows)?;
    Ok(())
}

/// `sum_t price l + reward g + rho_minus (g - s)^2 + rho_plus (l - kappa)^2`.
pub fn build_cost(pev: &PevParams, sig: &AggregateSignals, vars: &PlayerVariables) -> QuadraticObjective {
    let mut obj = QuadraticObjective::new();
    for t in 0..vars.horizon {
        obj.add_linear(&LinearExpr::var(vars.l[t]), sig.price[t]);
        obj.add_linear(&LinearExpr::var(vars.g[t]), sig.reward[t]);
        obj.add_squared(&LinearExpr::var(vars.g[t]).with_term(vars.s[t], -1.0), pev.rho_minus);
        obj.add_squared(&LinearExpr::var(vars.l[t]).with_term(vars.kappa[t], -1.0), pev.rho_plus);
    }
    obj
}

/// Extracts the canonical strategy from a feasible assignment.
pub fn pack_strategy(
    program: &MixedIntegerQP,
    vars: &PlayerVariables,
    a: &Assignment,
    tol: f64,
) -> Result<PlayerStrategy, BuildError> {
    let report = program.check_feasible(a, tol)?;
    if !report.is_feasible() {
        return Err(BuildError::Infeasible { max_violation: report.max_violation() });
    }
    let real = |ids: &[VarId]| ids.iter().map(|&id| a.get(id)).collect::<Vec<_>>();
    let flag = |ids: &[VarId]| ids.iter().map(|&id| a.get(id) > 0.5).collect::<Vec<_>>();
    Ok(PlayerStrategy {
        u: real(&vars.u),
        x: real(&vars.x),
        plugged: flag(&vars.plugged),
        charge_flag: flag(&vars.charge_flag),
        discharge_flag: flag(&vars.discharge_flag),
        f: real(&vars.f),
        g: real(&vars.g),
        s: real(&vars.s),
        l: real(&vars.l),
        kappa: real(&vars.kappa),
        plug_in: flag(&vars.plug_in),
        beta: vars.beta.iter().map(|row| flag(row)).collect(),
    })
}
