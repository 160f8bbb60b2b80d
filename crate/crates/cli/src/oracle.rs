//! Brute-force cross-check of the branch-and-bound solver on short windows
//! of a scenario, one vehicle at a time with the rest of the fleet idle.

use pevgame::solver::{brute_force, solve, SolveStatus};
use pevgame::{Game, GridParams, PevParams, ScenarioConfig};

const TOL: f64 = 1e-6;

pub struct Report {
    pub lines: Vec<String>,
    pub cases: usize,
    pub mismatches: usize,
}

/// The vehicle restricted to `start..start + len`, starting from its idle
/// state of charge, raised where needed to cover the trips in the window.
/// References are capped at the idle trajectory, so every window keeps a
/// feasible point.
fn window_pev(p: &PevParams, start: usize, len: usize) -> PevParams {
    let drained: f64 = p.drain_soc[..start].iter().sum();
    let end = start + len;
    let trips: f64 = p.drain_soc[start..end].iter().sum();
    let x0 = (p.initial_soc - drained).max(trips + 0.05).min(1.0);
    let mut reach = x0;
    let soc_ref = (start..end)
        .map(|t| {
            reach -= p.drain_soc[t];
            p.soc_ref[t].min(reach)
        })
        .collect();
    PevParams {
        initial_soc: x0,
        soc_ref,
        drain_soc: p.drain_soc[start..end].to_vec(),
        min_plugged_slots: p.min_plugged_slots.min(len),
        initial_plugged: start == 0 && p.initial_plugged,
        initial_exchange_kwh: if start == 0 { p.initial_exchange_kwh } else { 0.0 },
        ..p.clone()
    }
}

fn window_grid(g: &GridParams, start: usize, len: usize) -> GridParams {
    GridParams { demand_kwh: g.demand_kwh[start..start + len].to_vec(), ..g.clone() }
}

pub fn cross_check(cfg: &ScenarioConfig, window: usize) -> Result<Report, String> {
    let game = cfg.game().map_err(|e| e.to_string())?;
    let mut opts = cfg.solver.clone();
    let mut report = Report { lines: Vec::new(), cases: 0, mismatches: 0 };
    for (i, pev) in game.pevs.iter().enumerate() {
        for start in (0..game.horizon()).step_by(window) {
            let len = window.min(game.horizon() - start);
            let sub = Game::new(window_grid(&game.grid, start, len), vec![window_pev(pev, start, len)])
                .map_err(|e| e.to_string())?;
            let prog = sub.player_program(&sub.rest(), 0).map_err(|e| e.to_string())?.program;
            opts.brute_force_cap = opts.brute_force_cap.max(prog.num_binaries());
            let bb = solve(&prog, &opts).map_err(|e| e.to_string())?;
            let bf = brute_force(&prog, &opts).map_err(|e| e.to_string())?;
            let ok = match (bb.status, bf.status) {
                (SolveStatus::Optimal, SolveStatus::Optimal) => (bb.objective - bf.objective).abs() <= TOL,
                (a, b) => a == b,
            };
            report.cases += 1;
            report.mismatches += usize::from(!ok);
            report.lines.push(format!(
                "player {} slots {}-{}: {} binaries, branch-and-bound {} ({:?}), enumeration {} ({:?}) {}",
                i + 1,
                start + 1,
                start + len,
                prog.num_binaries(),
                bb.objective,
                bb.status,
                bf.objective,
                bf.status,
                if ok { "ok" } else { "MISMATCH" }
            ));
        }
    }
    Ok(report)
}
