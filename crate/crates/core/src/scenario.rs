//! Scenario files, default fleets, batch runs and CSV / plot-data output.
//!
//! Scenario files are TOML. Every dimensioned field carries its unit in
//! the name (`capacity_kwh`, `energy_cost_eur_per_kwh2`, ...). Slots are
//! labelled `1..=T` in every emitted file.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CollectiveStrategy, Game, GameError, IterationRecord, RunConfig, Selection};
use crate::patterns::DEFAULT_EPS;
use crate::pev::{GridParams, PevParams};
use crate::solver::SolveOptions;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("cannot write output: {0}")]
    Output(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), reason: reason.into() }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io { path: path.to_path_buf(), source }
}

/// Which default fleet [`default_scenario`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// 6 vehicles, 48 half-hour slots.
    Paper,
    /// 4 vehicles, 12 two-hour slots, `h = 2`.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub energy_cost_eur_per_kwh2: f64,
    pub reward_coeff_eur_per_kwh2: f64,
    pub capacity_kwh: f64,
    pub charging_points: usize,
    pub u_min_kwh: f64,
    pub u_max_kwh: f64,
    #[serde(default = "default_pattern_eps")]
    pub pattern_eps_kwh: f64,
}

fn default_pattern_eps() -> f64 {
    DEFAULT_EPS
}

/// Non-vehicle load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandProfile {
    Inline { values_kwh: Vec<f64> },
    /// `base + a_m exp(-(h - h_m)^2 / 2 w_m^2) + a_e exp(-(h - h_e)^2 / 2 w_e^2)`
    /// evaluated at the slot midpoint `h`, in hours since midnight.
    TwoPeak {
        base_kwh: f64,
        morning_amplitude_kwh: f64,
        morning_hour: f64,
        morning_width_hours: f64,
        evening_amplitude_kwh: f64,
        evening_hour: f64,
        evening_width_hours: f64,
    },
}

impl DemandProfile {
    pub fn resolve(&self, horizon: usize, slot_minutes: u32) -> Vec<f64> {
        match self {
            DemandProfile::Inline { values_kwh } => values_kwh.clone(),
            DemandProfile::TwoPeak {
                base_kwh,
                morning_amplitude_kwh,
                morning_hour,
                morning_width_hours,
                evening_amplitude_kwh,
                evening_hour,
                evening_width_hours,
            } => (0..horizon)
                .map(|t| {
                    let h = slot_midpoint_hours(t, slot_minutes);
                    base_kwh
                        + morning_amplitude_kwh * bump(h, *morning_hour, *morning_width_hours)
                        + evening_amplitude_kwh * bump(h, *evening_hour, *evening_width_hours)
                })
                .collect(),
        }
    }
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    let z = (h - centre) / width;
    (-0.5 * z * z).exp()
}

fn slot_midpoint_hours(t: usize, slot_minutes: u32) -> f64 {
    (t as f64 + 0.5) * f64::from(slot_minutes) / 60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PevConfig {
    pub capacity_kwh: f64,
    pub efficiency: f64,
    pub initial_soc_fraction: f64,
    /// Lower bound on the end-of-slot state of charge.
    pub soc_ref_fraction: Vec<f64>,
    /// Energy spent driving in each slot; 0 while parked.
    pub drain_kwh: Vec<f64>,
    pub rho_plus_eur_per_kwh2: f64,
    pub rho_minus_eur_per_kwh2: f64,
    pub min_plugged_slots: usize,
    #[serde(default)]
    pub initial_plugged: bool,
    #[serde(default)]
    pub initial_exchange_kwh: f64,
}

impl PevConfig {
    pub fn params(&self) -> PevParams {
        PevParams {
            efficiency: self.efficiency,
            capacity_kwh: self.capacity_kwh,
            initial_soc: self.initial_soc_fraction,
            soc_ref: self.soc_ref_fraction.clone(),
            drain_soc: self.drain_kwh.iter().map(|e| e / self.capacity_kwh).collect(),
            rho_plus: self.rho_plus_eur_per_kwh2,
            rho_minus: self.rho_minus_eur_per_kwh2,
            min_plugged_slots: self.min_plugged_slots,
            initial_plugged: self.initial_plugged,
            initial_exchange_kwh: self.initial_exchange_kwh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub players: usize,
    pub horizon_slots: usize,
    pub slot_minutes: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon_eur: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub demand: DemandProfile,
    #[serde(default)]
    pub solver: SolveOptions,
    pub pevs: Vec<PevConfig>,
}

fn default_epsilon() -> f64 {
    1e-4
}

fn default_max_sweeps() -> usize {
    100
}

impl ScenarioConfig {
    pub fn demand_kwh(&self) -> Vec<f64> {
        self.demand.resolve(self.horizon_slots, self.slot_minutes)
    }

    /// Structural checks, then the full parameter validation of the game.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let t = self.horizon_slots;
        if self.players == 0 {
            return Err(invalid("players", "must be at least 1"));
        }
        if t == 0 {
            return Err(invalid("horizon_slots", "must be at least 1"));
        }
        if self.slot_minutes == 0 {
            return Err(invalid("slot_minutes", "must be positive"));
        }
        if !(self.epsilon_eur > 0.0 && self.epsilon_eur.is_finite()) {
            return Err(invalid("epsilon_eur", "must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps", "must be at least 1"));
        }
        if self.pevs.len() < self.players {
            return Err(invalid(
                format!("pevs[{}]", self.pevs.len()),
                format!("missing: expected {} vehicles, got {}", self.players, self.pevs.len()),
            ));
        }
        if self.pevs.len() > self.players {
            return Err(invalid(
                format!("pevs[{}]", self.players),
                format!("unexpected: expected {} vehicles, got {}", self.players, self.pevs.len()),
            ));
        }
        if let DemandProfile::Inline { values_kwh } = &self.demand {
            if values_kwh.len() != t {
                return Err(invalid("demand.values_kwh", format!("has {} entries, expected {t}", values_kwh.len())));
            }
        } else if self.demand_kwh().iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(invalid("demand", "synthetic curve must be finite and non-negative"));
        }
        for (i, p) in self.pevs.iter().enumerate() {
            if p.soc_ref_fraction.len() != t {
                return Err(invalid(
                    format!("pevs[{i}].soc_ref_fraction"),
                    format!("has {} entries, expected {t}", p.soc_ref_fraction.len()),
                ));
            }
            if p.drain_kwh.len() != t {
                return Err(invalid(
                    format!("pevs[{i}].drain_kwh"),
                    format!("has {} entries, expected {t}", p.drain_kwh.len()),
                ));
            }
        }
        self.solver.validate().map_err(|e| invalid("solver", e.to_string()))?;
        self.game()?;
        self.run_config().map(|_| ())
    }

    pub fn grid_params(&self) -> GridParams {
        let g = &self.grid;
        GridParams {
            energy_cost: g.energy_cost_eur_per_kwh2,
            reward_coeff: g.reward_coeff_eur_per_kwh2,
            demand_kwh: self.demand_kwh(),
            capacity_kwh: g.capacity_kwh,
            max_plugged: g.charging_points,
            u_min_kwh: g.u_min_kwh,
            u_max_kwh: g.u_max_kwh,
            pattern_eps_kwh: g.pattern_eps_kwh,
        }
    }

    pub fn game(&self) -> Result<Game, ScenarioError> {
        let pevs = self.pevs.iter().map(PevConfig::params).collect();
        Game::new(self.grid_params(), pevs).map_err(|e| match e {
            GameError::Build { player, source } => invalid(format!("pevs[{player}]"), source.to_string()),
            GameError::Invalid(reason) => invalid("grid", reason),
            other => ScenarioError::Game(other),
        })
    }

    pub fn run_config(&self) -> Result<RunConfig, ScenarioError> {
        let limit = self.epsilon_eur / 100.0;
        if self.solver.abs_gap > limit || self.solver.rel_gap > limit {
            return Err(invalid("solver", format!("abs_gap and rel_gap must not exceed epsilon_eur / 100 = {limit:e}")));
        }
        Ok(RunConfig {
            epsilon: self.epsilon_eur,
            max_sweeps: self.max_sweeps,
            selection: self.selection,
            seed: self.seed,
            solver: self.solver.clone(),
        })
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string_pretty(self).map_err(|e| ScenarioError::Output(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    ScenarioConfig::from_toml(&text)
}

pub fn write_scenario(cfg: &ScenarioConfig, path: &Path) -> Result<(), ScenarioError> {
    fs::write(path, cfg.to_toml()?).map_err(io_err(path))
}

const SOC_TARGET_RANGE: (f64, f64) = (0.2, 0.85);
const CAPACITY_RANGE_KWH: (f64, f64) = (40.0, 75.0);
const TRIP_ENERGY_KWH: (f64, f64) = (3.0, 6.0);
const DEFAULT_SEED: u64 = 7;

/// Default fleet at the given scale, sampled with the default seed.
pub fn default_scenario(scale: Scale) -> ScenarioConfig {
    default_scenario_seeded(scale, DEFAULT_SEED)
}

/// Default fleet with vehicle parameters drawn from `seed`.
pub fn default_scenario_seeded(scale: Scale, seed: u64) -> ScenarioConfig {
    match scale {
        Scale::Paper => fleet(6, 48, 5, seed),
        Scale::Desk => fleet(4, 12, 2, seed),
    }
}

/// Desk physics with six vehicles.
pub fn desk_six(seed: u64) -> ScenarioConfig {
    fleet(6, 12, 2, seed)
}

/// Table I grid and cost parameters; `d(t)` peaks at `1.1 d_bar` at 19 h.
fn fleet(players: usize, horizon: usize, h_min: usize, seed: u64) -> ScenarioConfig {
    let slot_minutes = (24 * 60 / horizon) as u32;
    let grid = GridConfig {
        energy_cost_eur_per_kwh2: 1.09e-3,
        reward_coeff_eur_per_kwh2: 1.23e-3,
        capacity_kwh: 45.0,
        charging_points: 5,
        u_min_kwh: -7.5,
        u_max_kwh: 7.5,
        pattern_eps_kwh: DEFAULT_EPS,
    };
    let demand = two_peak_demand(&grid, horizon, slot_minutes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pevs = (0..players).map(|_| sample_pev(&mut rng, &grid, horizon, slot_minutes, h_min)).collect();
    ScenarioConfig {
        players,
        horizon_slots: horizon,
        slot_minutes,
        epsilon_eur: 1e-4,
        max_sweeps: 10 * players,
        selection: Selection::RoundRobin,
        seed,
        grid,
        demand,
        solver: SolveOptions::default(),
        pevs,
    }
}

fn two_peak_demand(grid: &GridConfig, horizon: usize, slot_minutes: u32) -> DemandProfile {
    let (base, morning, morning_hour, morning_width) = (20.0, 12.0, 8.0, 1.5);
    let (evening_hour, evening_width) = (19.0, 2.0);
    // Scale the evening bump so the slot nearest 19 h sits at 1.1 d_bar.
    let peak = (0..horizon)
        .map(|t| slot_midpoint_hours(t, slot_minutes))
        .min_by(|a, b| (a - evening_hour).abs().total_cmp(&(b - evening_hour).abs()))
        .unwrap_or(evening_hour);
    let rest = base + morning * bump(peak, morning_hour, morning_width);
    DemandProfile::TwoPeak {
        base_kwh: base,
        morning_amplitude_kwh: morning,
        morning_hour,
        morning_width_hours: morning_width,
        evening_amplitude_kwh: (1.1 * grid.capacity_kwh - rest) / bump(peak, evening_hour, evening_width),
        evening_hour,
        evening_width_hours: evening_width,
    }
}

fn slot_of_hour(hour: f64, slot_minutes: u32) -> usize {
    (hour * 60.0 / f64::from(slot_minutes)).floor() as usize
}

/// One commuter: a morning and an evening trip of about an hour each, and
/// a state-of-charge target before the evening departure. The morning
/// trip runs on the initial charge.
fn sample_pev(rng: &mut ChaCha8Rng, grid: &GridConfig, horizon: usize, slot_minutes: u32, h_min: usize) -> PevConfig {
    let capacity = rng.gen_range(CAPACITY_RANGE_KWH.0..CAPACITY_RANGE_KWH.1);
    let efficiency = 0.85;
    let x0 = 0.23;
    let trip_slots = ((60.0 / f64::from(slot_minutes)).round() as usize).max(1);
    let morning = slot_of_hour(rng.gen_range(6.5..8.5), slot_minutes);
    let evening = slot_of_hour(rng.gen_range(15.5..17.5), slot_minutes);
    let mut drain = vec![0.0; horizon];
    for start in [morning, evening] {
        let energy = rng.gen_range(TRIP_ENERGY_KWH.0..TRIP_ENERGY_KWH.1);
        for d in drain.iter_mut().skip(start).take(trip_slots) {
            *d = energy / trip_slots as f64;
        }
    }
    let soc_after = |from: usize, to: usize| drain[from..to].iter().sum::<f64>() / capacity;
    let mut soc_ref = vec![0.0; horizon];
    let target = rng.gen_range(SOC_TARGET_RANGE.0..SOC_TARGET_RANGE.1);
    // Keep the target within half of what the parked slots before departure allow.
    let parked = (0..evening).filter(|&t| drain[t] == 0.0).count() as f64;
    let reachable = x0 - soc_after(0, evening) + 0.5 * efficiency / capacity * grid.u_max_kwh * parked;
    let trip = soc_after(evening, horizon.min(evening + trip_slots));
    soc_ref[evening - 1] = target.min(reachable).max(trip).clamp(0.0, 1.0);
    PevConfig {
        capacity_kwh: capacity,
        efficiency,
        initial_soc_fraction: x0,
        soc_ref_fraction: soc_ref,
        drain_kwh: drain,
        rho_plus_eur_per_kwh2: 1e-3,
        rho_minus_eur_per_kwh2: 0.5e-3,
        min_plugged_slots: h_min,
        initial_plugged: false,
        initial_exchange_kwh: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub player: usize,
    pub t: usize,
    pub x: f64,
    pub u: f64,
    pub delta: u8,
    pub delta_c: u8,
    pub delta_d: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t: usize,
    pub d: f64,
    pub sum_u: f64,
    pub net_load: f64,
    pub plugged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    pub player: usize,
    pub potential: f64,
    pub j_old: f64,
    pub j_new: f64,
    pub accepted: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub converged: bool,
    pub sweeps: usize,
    /// Best responses cut short by a solver limit.
    pub limited_best_responses: usize,
    pub initial_potential: f64,
    pub final_potential: f64,
}

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub config: ScenarioConfig,
    pub demand_kwh: Vec<f64>,
    pub strategies: CollectiveStrategy,
    pub trajectories: Vec<TrajectoryRow>,
    pub aggregate: Vec<AggregateRow>,
    pub iterations: Vec<IterationRow>,
    pub summary: Summary,
    pub wall_time_s: f64,
}

pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const ITERATION_FILE: &str = "iterations.csv";
pub const STRATEGY_FILE: &str = "strategy.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const FIG_SOC_FILE: &str = "fig2_soc.dat";
pub const FIG_LOAD_FILE: &str = "fig3_load.dat";
pub const FIG_POTENTIAL_FILE: &str = "fig4_potential.dat";

/// Phase-0 start and best-response dynamics, without touching the disk.
pub fn execute(cfg: &ScenarioConfig) -> Result<OutputBundle, ScenarioError> {
    cfg.validate()?;
    let started = Instant::now();
    let game = cfg.game()?;
    let run_cfg = cfg.run_config()?;
    let z0 = game.phase0_init(&run_cfg.solver)?;
    let initial_potential = game.potential(&z0);
    let outcome = game.run(z0, &run_cfg)?;
    let z = outcome.state.strategies;
    Ok(OutputBundle {
        demand_kwh: game.grid.demand_kwh.clone(),
        trajectories: trajectory_rows(&z),
        aggregate: aggregate_rows(&game, &z),
        iterations: outcome.records.iter().map(iteration_row).collect(),
        summary: Summary {
            converged: outcome.converged,
            sweeps: outcome.sweeps,
            limited_best_responses: outcome.limited,
            initial_potential,
            final_potential: outcome.state.potential,
        },
        strategies: z,
        config: cfg.clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// [`execute`], then every table, the manifest and the plot data under `out_dir`.
pub fn run(cfg: &ScenarioConfig, out_dir: &Path) -> Result<OutputBundle, ScenarioError> {
    let bundle = execute(cfg)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_csv(&out_dir.join(TRAJECTORY_FILE), &bundle.trajectories)?;
    write_csv(&out_dir.join(AGGREGATE_FILE), &bundle.aggregate)?;
    write_csv(&out_dir.join(ITERATION_FILE), &bundle.iterations)?;
    write_json(&out_dir.join(STRATEGY_FILE), &bundle.strategies)?;
    write_scenario(cfg, &out_dir.join(SCENARIO_FILE))?;
    emit_plotdata(&bundle, out_dir)?;
    write_json(&out_dir.join(MANIFEST_FILE), &manifest(&bundle))?;
    Ok(bundle)
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

fn trajectory_rows(z: &CollectiveStrategy) -> Vec<TrajectoryRow> {
    let mut rows = Vec::new();
    for (i, p) in z.players.iter().enumerate() {
        for t in 0..p.horizon() {
            rows.push(TrajectoryRow {
                player: i + 1,
                t: t + 1,
                x: p.x[t],
                u: p.u[t],
                delta: flag(p.plugged[t]),
                delta_c: flag(p.charge_flag[t]),
                delta_d: flag(p.discharge_flag[t]),
            });
        }
    }
    rows
}

fn aggregate_rows(game: &Game, z: &CollectiveStrategy) -> Vec<AggregateRow> {
    let sum_u = z.total_exchange();
    let plugged = z.plugged_count();
    game.grid
        .demand_kwh
        .iter()
        .enumerate()
        .map(|(t, &d)| AggregateRow { t: t + 1, d, sum_u: sum_u[t], net_load: d + sum_u[t], plugged: plugged[t] })
        .collect()
}

fn iteration_row(r: &IterationRecord) -> IterationRow {
    IterationRow {
        k: r.k + 1,
        player: r.player + 1,
        potential: r.potential_after,
        j_old: r.old_cost,
        j_new: r.new_cost,
        accepted: flag(r.accepted),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ScenarioError::Output(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| ScenarioError::Output(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ScenarioError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ScenarioError::Output(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_strategy(path: &Path) -> Result<CollectiveStrategy, ScenarioError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a ScenarioConfig,
    demand_kwh: &'a [f64],
    summary: &'a Summary,
    wall_time_s: f64,
    files: [&'static str; 9],
}

fn manifest(b: &OutputBundle) -> Manifest<'_> {
    Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: b.config.seed,
        config: &b.config,
        demand_kwh: &b.demand_kwh,
        summary: &b.summary,
        wall_time_s: b.wall_time_s,
        files: [
            TRAJECTORY_FILE,
            AGGREGATE_FILE,
            ITERATION_FILE,
            STRATEGY_FILE,
            SCENARIO_FILE,
            FIG_SOC_FILE,
            FIG_LOAD_FILE,
            FIG_POTENTIAL_FILE,
            MANIFEST_FILE,
        ],
    }
}

/// Whitespace-separated columns with a `#` header line, one file per figure.
pub fn emit_plotdata(b: &OutputBundle, out_dir: &Path) -> Result<(), ScenarioError> {
    let pevs: Vec<PevParams> = b.config.pevs.iter().map(PevConfig::params).collect();

    let mut soc = String::from("# player t x x_ref delta mu\n");
    for (i, (p, pev)) in b.strategies.players.iter().zip(&pevs).enumerate() {
        for t in 0..p.horizon() {
            soc.push_str(&format!(
                "{} {} {} {} {} {}\n",
                i + 1,
                t + 1,
                p.x[t],
                pev.soc_ref[t],
                flag(p.plugged[t]),
                pev.drain_soc[t]
            ));
        }
    }

    let cap = b.config.grid.capacity_kwh;
    let mut load = String::from("# t d sum_u d_plus_sum_u d_bar\n");
    for r in &b.aggregate {
        load.push_str(&format!("{} {} {} {} {}\n", r.t, r.d, r.sum_u, r.net_load, cap));
    }

    let mut pot = String::from("# k potential\n");
    pot.push_str(&format!("0 {}\n", b.summary.initial_potential));
    for r in &b.iterations {
        pot.push_str(&format!("{} {}\n", r.k, r.potential));
    }

    for (name, text) in [(FIG_SOC_FILE, soc), (FIG_LOAD_FILE, load), (FIG_POTENTIAL_FILE, pot)] {
        let path = out_dir.join(name);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(text.as_bytes()).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
