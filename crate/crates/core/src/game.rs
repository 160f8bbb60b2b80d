//! The fleet game: aggregate signals, costs, the exact potential and the
//! sequential best-response coordinator.
//!
//! Player `i` pays
//! `J_i = sum_t c (d + sum_{j != i} l_j) l_i + r_bar (d + sum_{j != i} g_j) g_i
//!        + rho_minus (g_i - s_i)^2 + rho_plus (l_i - kappa_i)^2`,
//! where `g_j` is the discharged energy (`u_j` when discharging, else 0).
//! The pairwise terms `c <l_i, l_j> + r_bar <g_i, g_j>` are symmetric, so
//! `P = sum_i phi_i + sum_{j < i} omega_ij` is an exact potential.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Assignment, LinearExpr, QuadraticObjective};
use crate::pev::{
    add_implied_rows, build_player_program, AggregateSignals, BuildError, GridParams, PevParams, PlayerProgram, PlayerStrategy,
};
use crate::solver::{solve_with_incumbent, SolveError, SolveOptions, SolveResult, SolveStatus};

/// Tolerance for the joint feasibility check of a collective strategy.
pub const JOINT_TOL: f64 = 1e-6;

/// `player` fields are zero-based indices; messages count players from 1.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("player {}: {source}", player + 1)]
    Build {
        player: usize,
        #[source]
        source: BuildError,
    },
    #[error("player {}: {source}", player + 1)]
    Solve {
        player: usize,
        #[source]
        source: SolveError,
    },
    #[error("player {} has no feasible strategy: {diagnostics}", player + 1)]
    Infeasible { player: usize, diagnostics: String },
    #[error("best response of player {} stopped early ({status:?}) without a strategy", player + 1)]
    NoStrategy { player: usize, status: SolveStatus },
    #[error("invalid game: {0}")]
    Invalid(String),
}

/// Order in which the coordinator visits the players within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    RoundRobin,
    /// A fresh seeded permutation every sweep.
    RandomPermutation,
}

/// One strategy per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveStrategy {
    pub players: Vec<PlayerStrategy>,
}

impl CollectiveStrategy {
    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.players.first().map_or(0, PlayerStrategy::horizon)
    }

    /// `sum_i u_i(t)`
    pub fn total_exchange(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.horizon()];
        for p in &self.players {
            for (o, u) in out.iter_mut().zip(&p.u) {
                *o += u;
            }
        }
        out
    }

    pub fn plugged_count(&self) -> Vec<usize> {
        let mut out = vec![0; self.horizon()];
        for p in &self.players {
            for (o, &d) in out.iter_mut().zip(&p.plugged) {
                *o += d as usize;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub strategies: CollectiveStrategy,
    pub potential: f64,
    /// Best responses computed so far.
    pub iteration: usize,
    /// Best responses since the last accepted update.
    pub last_accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub player: usize,
    pub old_cost: f64,
    pub new_cost: f64,
    pub accepted: bool,
    pub potential_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Smallest cost decrease, in EUR, for which an update is accepted.
    pub epsilon: f64,
    pub max_sweeps: usize,
    pub selection: Selection,
    pub seed: u64,
    pub solver: SolveOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { epsilon: 1e-4, max_sweeps: 100, selection: Selection::RoundRobin, seed: 0, solver: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: GameState,
    pub records: Vec<IterationRecord>,
    /// A full sweep accepted nothing and every best response in it was optimal.
    pub converged: bool,
    pub sweeps: usize,
    /// Best responses that stopped at a node or time limit.
    pub limited: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub strategy: PlayerStrategy,
    /// Cost of `strategy` against the current signals.
    pub cost: f64,
    pub status: SolveStatus,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineCertificate {
    pub certified: bool,
    pub epsilon: f64,
    /// Largest cost decrease any single player can reach.
    pub worst_improvement: f64,
    pub worst_player: usize,
    pub improvements: Vec<f64>,
}

/// Fleet and grid parameters of one game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    pub grid: GridParams,
    pub pevs: Vec<PevParams>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Game {
    pub fn new(grid: GridParams, pevs: Vec<PevParams>) -> Result<Self, GameError> {
        grid.validate().map_err(|e| GameError::Invalid(e.to_string()))?;
        if pevs.is_empty() {
            return Err(GameError::Invalid("the fleet is empty".into()));
        }
        for (i, p) in pevs.iter().enumerate() {
            p.validate(grid.horizon(), &grid).map_err(|source| GameError::Build { player: i, source })?;
        }
        Ok(Self { grid, pevs })
    }

    pub fn num_players(&self) -> usize {
        self.pevs.len()
    }

    pub fn horizon(&self) -> usize {
        self.grid.horizon()
    }

    pub fn rest(&self) -> CollectiveStrategy {
        let t = self.horizon();
        CollectiveStrategy { players: self.pevs.iter().map(|p| PlayerStrategy::rest(p, t)).collect() }
    }

    /// `a_i(t) = sum_{j != i} l_j(t)`
    pub fn aggregate_demand(&self, z: &CollectiveStrategy, i: usize) -> Vec<f64> {
        self.sum_others(z, i, |p| &p.l)
    }

    fn sum_others<'a>(&self, z: &'a CollectiveStrategy, i: usize, field: impl Fn(&'a PlayerStrategy) -> &'a Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.horizon()];
        for (j, p) in z.players.iter().enumerate() {
            if j != i {
                for (o, v) in out.iter_mut().zip(field(p)) {
                    *o += v;
                }
            }
        }
        out
    }

    /// `p_i(t) = c (d(t) + a_i(t))`
    pub fn price_signal(&self, z: &CollectiveStrategy, i: usize) -> Vec<f64> {
        let c = self.grid.energy_cost;
        self.aggregate_demand(z, i).iter().zip(&self.grid.demand_kwh).map(|(a, d)| c * (d + a)).collect()
    }

    /// Charging points left free by the other players, clamped at 0.
    pub fn plug_signal(&self, z: &CollectiveStrategy, i: usize) -> Vec<usize> {
        let mut used = vec![0usize; self.horizon()];
        for (j, p) in z.players.iter().enumerate() {
            if j != i {
                for (u, &d) in used.iter_mut().zip(&p.plugged) {
                    *u += d as usize;
                }
            }
        }
        used.iter().map(|&u| self.grid.max_plugged.saturating_sub(u)).collect()
    }

    /// `r_i(t) = r_bar (d(t) + sum_{j != i} g_j(t))`
    pub fn reward_signal(&self, z: &CollectiveStrategy, i: usize) -> Vec<f64> {
        let r = self.grid.reward_coeff;
        self.sum_others(z, i, |p| &p.g).iter().zip(&self.grid.demand_kwh).map(|(g, d)| r * (d + g)).collect()
    }

    /// Range of `u_i(t)` that keeps `0 <= d + sum_j u_j <= d_bar`.
    pub fn exchange_bounds(&self, z: &CollectiveStrategy, i: usize) -> Vec<(f64, f64)> {
        self.sum_others(z, i, |p| &p.u)
            .iter()
            .zip(&self.grid.demand_kwh)
            .map(|(o, d)| (-d - o, self.grid.capacity_kwh - d - o))
            .collect()
    }

    pub fn signals(&self, z: &CollectiveStrategy, i: usize) -> AggregateSignals {
        AggregateSignals {
            price: self.price_signal(z, i),
            plugs_free: self.plug_signal(z, i),
            reward: self.reward_signal(z, i),
            exchange_bounds: self.exchange_bounds(z, i),
        }
    }

    pub fn player_program(&self, z: &CollectiveStrategy, i: usize) -> Result<PlayerProgram, GameError> {
        build_player_program(&self.pevs[i], &self.grid, &self.signals(z, i), self.horizon())
            .map_err(|source| GameError::Build { player: i, source })
    }

    /// The player program plus the implied rows the solver works on.
    fn solver_program(&self, z: &CollectiveStrategy, i: usize) -> Result<PlayerProgram, GameError> {
        let mut prog = self.player_program(z, i)?;
        add_implied_rows(&mut prog).map_err(|source| GameError::Build { player: i, source })?;
        Ok(prog)
    }

    /// `J_i(z_i, z_{-i})`
    pub fn player_cost(&self, z: &CollectiveStrategy, i: usize) -> f64 {
        z.players[i].cost(&self.pevs[i], &self.price_signal(z, i), &self.reward_signal(z, i))
    }

    /// `phi_i(z_i)`: the cost player `i` would pay alone on the grid.
    pub fn local_cost(&self, s: &PlayerStrategy, i: usize) -> f64 {
        let d = &self.grid.demand_kwh;
        let price: Vec<f64> = d.iter().map(|d| self.grid.energy_cost * d).collect();
        let reward: Vec<f64> = d.iter().map(|d| self.grid.reward_coeff * d).collect();
        s.cost(&self.pevs[i], &price, &reward)
    }

    /// `omega_ij = c <l_i, l_j> + r_bar <g_i, g_j>`
    pub fn interaction(&self, a: &PlayerStrategy, b: &PlayerStrategy) -> f64 {
        self.grid.energy_cost * dot(&a.l, &b.l) + self.grid.reward_coeff * dot(&a.g, &b.g)
    }

    pub fn potential(&self, z: &CollectiveStrategy) -> f64 {
        let mut p = 0.0;
        for (i, zi) in z.players.iter().enumerate() {
            p += self.local_cost(zi, i);
            for zj in &z.players[..i] {
                p += self.interaction(zi, zj);
            }
        }
        p
    }

    /// Largest violation of any player's rows given the others, coupling
    /// rows included.
    pub fn max_violation(&self, z: &CollectiveStrategy) -> Result<f64, GameError> {
        if z.len() != self.num_players() {
            return Err(GameError::Invalid(format!("{} strategies for {} players", z.len(), self.num_players())));
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.num_players() {
            let prog = self.player_program(z, i)?;
            let a = z.players[i].to_assignment(&prog.vars, prog.program.num_vars());
            let rep = prog
                .program
                .check_feasible(&a, 0.0)
                .map_err(|e| GameError::Build { player: i, source: e.into() })?;
            worst = worst.max(rep.max_violation());
        }
        let total = z.total_exchange();
        let plugged = z.plugged_count();
        for t in 0..self.horizon() {
            let load = self.grid.demand_kwh[t] + total[t];
            worst = worst.max(-load).max(load - self.grid.capacity_kwh);
            worst = worst.max(plugged[t] as f64 - self.grid.max_plugged as f64);
        }
        Ok(worst)
    }

    pub fn is_feasible(&self, z: &CollectiveStrategy, tol: f64) -> Result<bool, GameError> {
        Ok(self.max_violation(z)? <= tol)
    }

    /// Optimal strategy of player `i` against the others in `z`, warm
    /// started from the current `z_i`.
    pub fn best_response(&self, z: &CollectiveStrategy, i: usize, opts: &SolveOptions) -> Result<BestResponse, GameError> {
        let prog = self.solver_program(z, i)?;
        let seed = z.players[i].to_assignment(&prog.vars, prog.program.num_vars());
        let res = solve_with_incumbent(&prog.program, opts, Some(&seed))
            .map_err(|source| GameError::Solve { player: i, source })?;
        let strategy = self.unpack(&prog, &res, i)?;
        let sig = self.signals(z, i);
        let cost = strategy.cost(&self.pevs[i], &sig.price, &sig.reward);
        Ok(BestResponse { strategy, cost, status: res.status, nodes: res.nodes_explored })
    }

    fn unpack(&self, prog: &PlayerProgram, res: &SolveResult, i: usize) -> Result<PlayerStrategy, GameError> {
        match (&res.assignment, res.status) {
            (Some(a), _) => prog.pack(a).map_err(|source| GameError::Build { player: i, source }),
            (None, SolveStatus::Infeasible) => {
                Err(GameError::Infeasible { player: i, diagnostics: self.diagnose(prog, i) })
            }
            (None, status) => Err(GameError::NoStrategy { player: i, status }),
        }
    }

    /// Slots where the reference state of charge is out of reach, or a
    /// generic note when the coupling rows are to blame.
    fn diagnose(&self, prog: &PlayerProgram, i: usize) -> String {
        let pev = &self.pevs[i];
        let mut soc = pev.initial_soc;
        let mut bad = Vec::new();
        for t in 0..self.horizon() {
            soc -= pev.drain_soc[t];
            if !pev.is_driving(t) {
                soc = (soc + pev.soc_gain() * self.grid.u_max_kwh).min(1.0);
            }
            if pev.soc_ref[t] > soc + 1e-12 {
                bad.push(t + 1);
            }
        }
        if bad.is_empty() {
            format!(
                "grid capacity or charging points left by the others admit no schedule ({} rows)",
                prog.program.constraints().len()
            )
        } else {
            format!("reference state of charge unreachable at slots {bad:?}")
        }
    }

    /// Feasible start: players in index order pick the feasible strategy
    /// with the fewest plugged slots given their predecessors, everybody
    /// later still at rest.
    pub fn phase0_init(&self, opts: &SolveOptions) -> Result<CollectiveStrategy, GameError> {
        // the plug count is integral, so any point within 25% of the fewest will do
        let opts = &SolveOptions { abs_gap: 0.999, rel_gap: 0.25, ..opts.clone() };
        let mut z = self.rest();
        for i in 0..self.num_players() {
            let mut prog = self.solver_program(&z, i)?;
            let mut plugged = QuadraticObjective::new();
            for &d in &prog.vars.plugged {
                plugged.add_linear(&LinearExpr::var(d), 1.0);
            }
            prog.program
                .set_objective(plugged)
                .map_err(|e| GameError::Build { player: i, source: e.into() })?;
            let seed = z.players[i].to_assignment(&prog.vars, prog.program.num_vars());
            let res = solve_with_incumbent(&prog.program, opts, Some(&seed))
                .map_err(|source| GameError::Solve { player: i, source })?;
            z.players[i] = self.unpack(&prog, &res, i)?;
        }
        Ok(z)
    }

    /// Sequential best-response dynamics from `z0` until a full sweep
    /// brings no accepted update or `max_sweeps` runs out.
    pub fn run(&self, z0: CollectiveStrategy, cfg: &RunConfig) -> Result<RunOutcome, GameError> {
        self.check_run_config(cfg)?;
        let n = self.num_players();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut state = GameState { potential: self.potential(&z0), strategies: z0, iteration: 0, last_accepted: 0 };
        let mut records = Vec::new();
        let mut sweeps = 0;
        let mut converged = false;
        let mut limited = 0;
        while sweeps < cfg.max_sweeps {
            sweeps += 1;
            if cfg.selection == Selection::RandomPermutation {
                order.shuffle(&mut rng);
            }
            let mut any = false;
            let mut exact = true;
            for &i in &order {
                let old_cost = self.player_cost(&state.strategies, i);
                let br = self.best_response(&state.strategies, i, &cfg.solver)?;
                if br.status != SolveStatus::Optimal {
                    exact = false;
                    limited += 1;
                }
                let accepted = old_cost - br.cost >= cfg.epsilon;
                if accepted {
                    state.strategies.players[i] = br.strategy;
                    state.potential = self.potential(&state.strategies);
                    state.last_accepted = 0;
                    any = true;
                } else {
                    state.last_accepted += 1;
                }
                records.push(IterationRecord {
                    k: state.iteration,
                    player: i,
                    old_cost,
                    new_cost: br.cost,
                    accepted,
                    potential_after: state.potential,
                });
                state.iteration += 1;
            }
            if !any {
                // a limited sweep without progress would only repeat itself
                converged = exact;
                break;
            }
        }
        Ok(RunOutcome { state, records, converged, sweeps, limited })
    }

    /// Solver gaps must stay well below epsilon so that accept and reject
    /// decisions are not decided by solver tolerance.
    fn check_run_config(&self, cfg: &RunConfig) -> Result<(), GameError> {
        if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
            return Err(GameError::Invalid("epsilon must be positive".into()));
        }
        cfg.solver.validate().map_err(|source| GameError::Solve { player: 0, source })?;
        let limit = cfg.epsilon / 100.0;
        if cfg.solver.abs_gap > limit || cfg.solver.rel_gap > limit {
            return Err(GameError::Invalid(format!("solver gaps must not exceed epsilon / 100 = {limit:e}")));
        }
        Ok(())
    }

    /// One best response per player without accepting anything.
    pub fn certify_mine(&self, z: &CollectiveStrategy, epsilon: f64, opts: &SolveOptions) -> Result<MineCertificate, GameError> {
        let mut improvements = Vec::with_capacity(self.num_players());
        for i in 0..self.num_players() {
            let br = self.best_response(z, i, opts)?;
            improvements.push((self.player_cost(z, i) - br.cost).max(0.0));
        }
        let (worst_player, worst_improvement) = improvements
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        Ok(MineCertificate { certified: worst_improvement < epsilon, epsilon, worst_improvement, worst_player, improvements })
    }

    /// Writes a player strategy into an assignment of its current program.
    pub fn assignment_of(&self, z: &CollectiveStrategy, i: usize) -> Result<(PlayerProgram, Assignment), GameError> {
        let prog = self.player_program(z, i)?;
        let a = z.players[i].to_assignment(&prog.vars, prog.program.num_vars());
        Ok((prog, a))
    }
}
