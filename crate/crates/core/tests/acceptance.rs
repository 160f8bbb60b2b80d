//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero when any of them fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pevgame::game::{CollectiveStrategy, Game, JOINT_TOL};
use pevgame::model::{LinearConstraint, LinearExpr, MixedIntegerQP, VarId, VarSpec};
use pevgame::patterns::{
    pattern_and, pattern_geq, pattern_implies, pattern_leq, ExprBounds, Literal, Tolerance,
};
use pevgame::pev::{effective_min_plugged, GridParams, PevParams, PlayerStrategy};
use pevgame::scenario::{desk_six, default_scenario, execute, DemandProfile, OutputBundle, Scale, ScenarioConfig};
use pevgame::solver::{brute_force, solve, SolveOptions, SolveStatus};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grid(horizon: usize, rng: &mut ChaCha8Rng) -> GridParams {
    GridParams {
        energy_cost: 1.09e-3,
        reward_coeff: 1.23e-3,
        demand_kwh: (0..horizon).map(|_| rng.gen_range(5.0..44.0)).collect(),
        capacity_kwh: 45.0,
        max_plugged: 5,
        u_min_kwh: -7.5,
        u_max_kwh: 7.5,
        pattern_eps_kwh: 1e-6,
    }
}

fn random_pev(horizon: usize, rng: &mut ChaCha8Rng) -> PevParams {
    let initial_soc = rng.gen_range(0.2..0.8);
    let mut soc_ref = vec![0.0; horizon];
    soc_ref[rng.gen_range(0..horizon)] = rng.gen_range(0.0..initial_soc);
    let mut drain_soc = vec![0.0; horizon];
    if rng.gen_bool(0.3) {
        drain_soc[rng.gen_range(0..horizon)] = rng.gen_range(0.01..0.08);
    }
    PevParams {
        efficiency: 0.85,
        capacity_kwh: rng.gen_range(40.0..75.0),
        initial_soc,
        soc_ref,
        drain_soc,
        rho_plus: 1e-3,
        rho_minus: 0.5e-3,
        min_plugged_slots: rng.gen_range(1..=horizon.min(2)),
        initial_plugged: false,
        initial_exchange_kwh: 0.0,
    }
}

fn random_game(n: usize, horizon: usize, rng: &mut ChaCha8Rng) -> Game {
    let g = grid(horizon, rng);
    let pevs = (0..n).map(|_| random_pev(horizon, rng)).collect();
    Game::new(g, pevs).expect("valid random game")
}

/// Plug runs that respect the minimum duration, random exchange on them.
fn random_exchange(pev: &PevParams, horizon: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u = vec![0.0; horizon];
    let mut t = 0;
    while t < horizon {
        if rng.gen_bool(0.5) {
            let len = (1 + effective_min_plugged(pev.min_plugged_slots, horizon, t)).max(rng.gen_range(1..=3));
            for slot in u.iter_mut().skip(t).take(len) {
                let mag = rng.gen_range(0.5..7.5);
                *slot = if rng.gen_bool(0.5) { mag } else { -mag };
            }
            t += len + 1;
        } else {
            t += 1;
        }
    }
    u
}

fn potential_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 1200 {
        let n = rng.gen_range(2..=4);
        let horizon = rng.gen_range(2..=6);
        let game = random_game(n, horizon, &mut rng);
        let mut z = game.rest();
        for i in 0..n {
            let mut cand = z.clone();
            cand.players[i] = PlayerStrategy::from_exchange(&game.pevs[i], &random_exchange(&game.pevs[i], horizon, &mut rng));
            if game.max_violation(&cand).map_err(|e| e.to_string())? <= 1e-9 {
                z = cand;
            }
        }
        for _ in 0..10 {
            let i = rng.gen_range(0..n);
            let mut y = z.clone();
            y.players[i] = PlayerStrategy::from_exchange(&game.pevs[i], &random_exchange(&game.pevs[i], horizon, &mut rng));
            if game.max_violation(&y).map_err(|e| e.to_string())? > 1e-9 {
                continue;
            }
            let dp = game.potential(&y) - game.potential(&z);
            let dj = game.player_cost(&y, i) - game.player_cost(&z, i);
            let scale = game.potential(&z).abs().max(1.0);
            let err = (dp - dj).abs() / scale;
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("N={n} T={horizon} player {i}: dP={dp:e} dJ={dj:e}"))?;
            checked += 1;
            z = y;
        }
    }
    Ok(format!("{checked} feasible deviations, worst scaled error {worst:.1e}"))
}

fn unit_program() -> (VarId, VarId, VarId) {
    let mut p = MixedIntegerQP::new();
    let d = p.add_var(VarSpec::binary("d")).unwrap();
    let u = p.add_var(VarSpec::continuous("u", -7.5, 7.5)).unwrap();
    let g = p.add_var(VarSpec::continuous("g", -7.5, 7.5)).unwrap();
    (d, u, g)
}

fn rows_hold(rows: &[LinearConstraint], values: &[f64]) -> bool {
    rows.iter().all(|r| r.violation_at(values) <= 1e-12)
}

/// Values of `f` across the box plus dense clouds around `c` and `c -+ eps`.
fn samples(lo: f64, hi: f64, c: f64, eps: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=1000).map(|k| lo + (hi - lo) * k as f64 / 1000.0).collect();
    for k in -40..=40 {
        v.push(c + eps * k as f64 / 10.0);
        v.push(c - eps + eps * k as f64 / 10.0);
        v.push(c + eps + eps * k as f64 / 10.0);
    }
    v.retain(|f| (lo..=hi).contains(f));
    v
}

/// Points within this distance of a band edge are decided by rounding.
const EDGE: f64 = 1e-9;

fn pattern_equivalence() -> Check {
    let (d, u, g) = unit_program();
    let f = LinearExpr::var(u);
    let b = ExprBounds::new(-7.5, 7.5).map_err(|e| e.to_string())?;
    let mut points = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut thresholds = vec![(0.0, 1e-6), (7.5, 1e-6), (-7.5, 1e-6), (0.0, 0.25)];
    thresholds.extend((0..6).map(|_| (rng.gen_range(-7.0..7.0), rng.gen_range(1e-6..0.5))));
    for &(c, eps) in &thresholds {
        let tol = Tolerance::new(eps).map_err(|e| e.to_string())?;
        let geq = pattern_geq(Literal::Pos(d), &f, c, b, tol).map_err(|e| e.to_string())?;
        let leq = pattern_leq(Literal::Pos(d), &f, c, b, tol).map_err(|e| e.to_string())?;
        let neg = pattern_geq(Literal::Neg(d), &f, c, b, tol).map_err(|e| e.to_string())?;
        for fv in samples(-7.5, 7.5, c, eps) {
            for dv in [0.0, 1.0] {
                let vals = [dv, fv, 0.0];
                let one = dv == 1.0;
                let near = |edge: f64| (fv - edge).abs() <= EDGE;
                if !(near(c) || near(c - eps)) {
                    let want = if one { fv >= c } else { fv <= c - eps };
                    ensure(rows_hold(&geq, &vals) == want, || format!("geq c={c} eps={eps} d={dv} f={fv}"))?;
                    let want = if !one { fv >= c } else { fv <= c - eps };
                    ensure(rows_hold(&neg, &vals) == want, || format!("negated geq c={c} d={dv} f={fv}"))?;
                }
                if !(near(c) || near(c + eps)) {
                    let want = if one { fv <= c } else { fv >= c + eps };
                    ensure(rows_hold(&leq, &vals) == want, || format!("leq c={c} eps={eps} d={dv} f={fv}"))?;
                }
                points += 1;
            }
        }
    }
    for c in [true, false] {
        let rows = pattern_geq(Literal::Const(c), &f, 0.0, b, Tolerance::default()).map_err(|e| e.to_string())?;
        for fv in samples(-7.5, 7.5, 0.0, 1e-6) {
            if fv.abs() <= EDGE || (fv + 1e-6).abs() <= EDGE {
                continue;
            }
            let want = if c { fv >= 0.0 } else { fv <= -1e-6 };
            ensure(rows_hold(&rows, &[0.0, fv, 0.0]) == want, || format!("constant literal {c} f={fv}"))?;
            points += 1;
        }
    }
    // conjunction, including a negated operand
    let mut q = MixedIntegerQP::new();
    let [d2, s2, gamma] = ["d", "s", "gamma"].map(|l| q.add_var(VarSpec::binary(l)).unwrap());
    let and = pattern_and(Literal::Pos(d2), Literal::Pos(s2), Literal::Neg(gamma));
    for code in 0..8u32 {
        let bit = |k: u32| f64::from((code >> k) & 1);
        let vals = [bit(0), bit(1), bit(2)];
        let want = (bit(0) == 1.0) == (bit(1) == 1.0 && bit(2) == 0.0);
        ensure(rows_hold(&and, &vals) == want, || format!("and code {code}"))?;
        points += 1;
    }
    // product g = d f
    let prod = pattern_implies(g, &f, Literal::Pos(d), b);
    for fv in samples(-7.5, 7.5, 0.0, 1e-6) {
        for dv in [0.0, 1.0] {
            for off in [0.0, 1e-6, -1e-6, 0.3, -2.0, 7.5] {
                let gv = dv * fv + off;
                if !(-7.5..=7.5).contains(&gv) {
                    continue;
                }
                let vals = [dv, fv, gv];
                ensure(rows_hold(&prod, &vals) == (off == 0.0), || format!("product d={dv} f={fv} g={gv}"))?;
                points += 1;
            }
        }
    }
    Ok(format!("{points} sampled points over {} thresholds", thresholds.len()))
}

fn solver_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolveOptions::default();
    let (mut optimal, mut infeasible, mut most) = (0, 0, 0);
    for case in 0..200 {
        let horizon = rng.gen_range(2..=3);
        let n = rng.gen_range(1..=3);
        let mut game = random_game(n, horizon, &mut rng);
        if horizon == 3 {
            // a two-slot minimum at T = 3 would need a fifteenth binary
            game.pevs[0].min_plugged_slots = 1;
        }
        let mut z = game.rest();
        for j in 1..n {
            let mut cand = z.clone();
            cand.players[j] = PlayerStrategy::from_exchange(&game.pevs[j], &random_exchange(&game.pevs[j], horizon, &mut rng));
            if game.max_violation(&cand).map_err(|e| e.to_string())? <= 1e-9 {
                z = cand;
            }
        }
        let prog = game.player_program(&z, 0).map_err(|e| e.to_string())?.program;
        let bins = prog.num_binaries();
        ensure(bins <= 14, || format!("case {case}: {bins} binaries"))?;
        most = most.max(bins);
        let bb = solve(&prog, &opts).map_err(|e| e.to_string())?;
        let bf = brute_force(&prog, &opts).map_err(|e| e.to_string())?;
        ensure(bb.status == bf.status, || format!("case {case}: {:?} vs {:?}", bb.status, bf.status))?;
        if bf.status == SolveStatus::Optimal {
            let diff = (bb.objective - bf.objective).abs();
            ensure(diff <= 1e-6, || format!("case {case}: {} vs {}", bb.objective, bf.objective))?;
            optimal += 1;
        } else {
            infeasible += 1;
        }
    }
    Ok(format!("200 programs ({optimal} optimal, {infeasible} infeasible), up to {most} binaries"))
}

fn descent(bundle: &OutputBundle, epsilon: f64) -> Result<(), String> {
    let mut prev = bundle.summary.initial_potential;
    for r in &bundle.iterations {
        if r.accepted == 1 {
            ensure(prev - r.potential >= epsilon - 1e-6, || format!("step {}: {prev} -> {}", r.k, r.potential))?;
        } else {
            ensure(r.potential == prev, || format!("rejected step {} moved the potential", r.k))?;
        }
        prev = r.potential;
    }
    Ok(())
}

fn convergence(cfg: &ScenarioConfig, bundle: &OutputBundle) -> Check {
    let s = &bundle.summary;
    ensure(s.converged, || format!("no convergence after {} sweeps", s.sweeps))?;
    ensure(s.sweeps <= 10 * cfg.players, || format!("{} sweeps", s.sweeps))?;
    descent(bundle, cfg.epsilon_eur)?;
    let game = cfg.game().map_err(|e| e.to_string())?;
    let cert = game.certify_mine(&bundle.strategies, cfg.epsilon_eur, &cfg.solver).map_err(|e| e.to_string())?;
    ensure(cert.certified, || format!("worst improvement {:e} by player {}", cert.worst_improvement, cert.worst_player + 1))?;
    Ok(format!(
        "{} sweeps, {} best responses, P {:.6} -> {:.6}, worst improvement {:.1e}",
        s.sweeps,
        bundle.iterations.len(),
        s.initial_potential,
        s.final_potential,
        cert.worst_improvement
    ))
}

fn feasible_everywhere(game: &Game, z: &CollectiveStrategy) -> Result<(), String> {
    let joint = game.max_violation(z).map_err(|e| e.to_string())?;
    ensure(joint <= JOINT_TOL, || format!("coupling violation {joint:e}"))?;
    for i in 0..game.num_players() {
        let (prog, a) = game.assignment_of(z, i).map_err(|e| e.to_string())?;
        let report = prog.program.check_feasible(&a, 1e-6).map_err(|e| e.to_string())?;
        ensure(report.is_feasible(), || format!("player {} violates by {:e}", i + 1, report.max_violation()))?;
    }
    Ok(())
}

fn valley_filling() -> Check {
    let mut cfg = desk_six(7);
    let mut d = cfg.demand_kwh();
    let peak = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap_or(0);
    d[peak] = 1.1 * cfg.grid.capacity_kwh;
    cfg.demand = DemandProfile::Inline { values_kwh: d.clone() };
    let bundle = execute(&cfg).map_err(|e| e.to_string())?;
    let game = cfg.game().map_err(|e| e.to_string())?;
    feasible_everywhere(&game, &bundle.strategies)?;
    let sum = bundle.strategies.total_exchange()[peak];
    let cap = cfg.grid.capacity_kwh - d[peak];
    ensure(cap < 0.0, || "peak does not exceed the capacity".into())?;
    ensure(sum <= cap + 1e-6, || format!("fleet exchange {sum} at slot {} above {cap}", peak + 1))?;
    Ok(format!("slot {}: d = {}, fleet exchange {sum:.4} <= {cap:.4}", peak + 1, d[peak]))
}

fn local_invariants(cfg: &ScenarioConfig, bundle: &OutputBundle) -> Result<usize, String> {
    let game = cfg.game().map_err(|e| e.to_string())?;
    let z = &bundle.strategies;
    let horizon = game.horizon();
    let eps = game.grid.pattern_eps_kwh;
    feasible_everywhere(&game, z)?;
    for (t, &k) in z.plugged_count().iter().enumerate() {
        ensure(k <= game.grid.max_plugged, || format!("{k} plugged at slot {}", t + 1))?;
    }
    let mut checks = 0;
    for (i, (s, p)) in z.players.iter().zip(&game.pevs).enumerate() {
        let who = i + 1;
        let mut prev = p.initial_soc;
        let mut was = p.initial_plugged;
        let mut run_left = 0usize;
        for t in 0..horizon {
            let x = s.x[t];
            ensure(x >= p.soc_ref[t] - 1e-9 && x <= 1.0 + 1e-9, || format!("player {who} slot {}: x = {x}", t + 1))?;
            let on = s.plugged[t];
            let drain = if on { 0.0 } else { p.drain_soc[t] };
            let residual = (x - prev - p.soc_gain() * s.u[t] + drain).abs();
            ensure(residual <= 1e-12, || format!("player {who} slot {}: SoC residual {residual:e}", t + 1))?;
            if on {
                ensure(s.u[t].abs() >= eps * (1.0 - 1e-3), || format!("player {who} slot {}: plugged with u = {:e}", t + 1, s.u[t]))?;
            } else {
                ensure(s.u[t] == 0.0, || format!("player {who} slot {}: u = {:e} while unplugged", t + 1, s.u[t]))?;
            }
            if on && !was {
                run_left = 1 + effective_min_plugged(p.min_plugged_slots, horizon, t);
            }
            ensure(on || run_left == 0, || format!("player {who}: plug-in run ends early at slot {}", t + 1))?;
            run_left = run_left.saturating_sub(1);
            was = on;
            prev = x;
            checks += 1;
        }
    }
    Ok(checks)
}

fn rest_cost() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut games: Vec<Game> = Vec::new();
    for scale in [Scale::Desk, Scale::Paper] {
        games.push(default_scenario(scale).game().map_err(|e| e.to_string())?);
    }
    games.push(desk_six(7).game().map_err(|e| e.to_string())?);
    for _ in 0..50 {
        let n = rng.gen_range(1..=4);
        let horizon = rng.gen_range(1..=6);
        games.push(random_game(n, horizon, &mut rng));
    }
    for g in &games {
        let z = g.rest();
        for i in 0..g.num_players() {
            let j = g.player_cost(&z, i);
            ensure(j == 0.0, || format!("player {} rest cost {j:e}", i + 1))?;
        }
        let p = g.potential(&z);
        ensure(p == 0.0, || format!("rest potential {p:e}"))?;
    }
    Ok(format!("{} games", games.len()))
}

fn report(name: &str, check: impl FnOnce() -> Check) -> bool {
    let started = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {name} ({secs:.1} s): {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {name} ({secs:.1} s): {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report("1 exact potential identity", potential_identity);
    ok &= report("2 pattern equivalence", pattern_equivalence);
    ok &= report("3 branch-and-bound vs enumeration", solver_oracle);

    let six = desk_six(7);
    let six_run = execute(&six).map_err(|e| e.to_string());
    ok &= report("4 best-response convergence", || convergence(&six, six_run.as_ref().map_err(Clone::clone)?));
    ok &= report("5 valley filling", valley_filling);
    ok &= report("6 local invariants", || {
        let four = default_scenario(Scale::Desk);
        let four_run = execute(&four).map_err(|e| e.to_string())?;
        let a = local_invariants(&six, six_run.as_ref().map_err(Clone::clone)?)?;
        let b = local_invariants(&four, &four_run)?;
        Ok(format!("{} slot checks over two desk runs", a + b))
    });
    ok &= report("7 rest costs nothing", rest_cost);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
