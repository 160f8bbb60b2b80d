use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pevgame::pev::{
    add_implied_rows, build_player_program, AggregateSignals, GridParams, PevParams, PlayerProgram, PlayerStrategy,
};
use pevgame::solver::{brute_force, SolveOptions, SolveStatus};

fn grid(horizon: usize) -> GridParams {
    GridParams {
        energy_cost: 1.09e-3,
        reward_coeff: 1.23e-3,
        demand_kwh: vec![30.0; horizon],
        capacity_kwh: 45.0,
        max_plugged: 5,
        u_min_kwh: -7.5,
        u_max_kwh: 7.5,
        pattern_eps_kwh: 1e-6,
    }
}

fn pev(horizon: usize, h: usize) -> PevParams {
    PevParams {
        efficiency: 0.85,
        capacity_kwh: 50.0,
        initial_soc: 0.5,
        soc_ref: vec![0.0; horizon],
        drain_soc: vec![0.0; horizon],
        rho_plus: 1e-3,
        rho_minus: 0.5e-3,
        min_plugged_slots: h,
        initial_plugged: false,
        initial_exchange_kwh: 0.0,
    }
}

fn program(p: &PevParams, g: &GridParams) -> PlayerProgram {
    build_player_program(p, g, &AggregateSignals::at_rest(g), g.horizon()).unwrap()
}

/// Every plug-in at `t` is followed by `min(h, T - 1 - t)` more plugged slots.
fn runs_ok(word: &[bool], h: usize, initially: bool) -> bool {
    let n = word.len();
    (0..n).all(|t| {
        let prev = if t == 0 { initially } else { word[t - 1] };
        !(word[t] && !prev) || (t + 1..=t + h.min(n - 1 - t)).all(|s| word[s])
    })
}

fn feasible(prog: &PlayerProgram, s: &PlayerStrategy) -> bool {
    let a = s.to_assignment(&prog.vars, prog.program.num_vars());
    prog.program.check_feasible(&a, 1e-9).unwrap().is_feasible()
}

#[test]
fn exchange_words_are_feasible_exactly_when_runs_are_long_enough() {
    let levels = [-3.0, 0.0, 2.5];
    for horizon in 1..=3 {
        for h in 1..=horizon {
            let p = pev(horizon, h);
            let prog = program(&p, &grid(horizon));
            for code in 0..3usize.pow(horizon as u32) {
                let u: Vec<f64> = (0..horizon).map(|t| levels[code / 3usize.pow(t as u32) % 3]).collect();
                let s = PlayerStrategy::from_exchange(&p, &u);
                let word: Vec<bool> = u.iter().map(|&v| v != 0.0).collect();
                assert_eq!(feasible(&prog, &s), runs_ok(&word, h, false), "T={horizon} h={h} u={u:?}");
            }
        }
    }
}

#[test]
fn binaries_are_forced_by_the_exchange() {
    let horizon = 3;
    let p = pev(horizon, 1);
    let prog = program(&p, &grid(horizon));
    for u in [[2.0, -1.0, 0.0], [0.0, 5.0, 5.0], [-7.5, -7.5, 3.0]] {
        let s = PlayerStrategy::from_exchange(&p, &u);
        let a = s.to_assignment(&prog.vars, prog.program.num_vars());
        assert!(prog.program.check_feasible(&a, 1e-9).unwrap().is_feasible());
        for b in prog.program.binaries() {
            let mut flipped = a.clone();
            flipped.set(b, 1.0 - a.get(b));
            let ok = prog.program.check_feasible(&flipped, 1e-9).unwrap().is_feasible();
            assert!(!ok, "{u:?}: flipping {} stays feasible", prog.program.var(b).label);
        }
    }
}

#[test]
fn minimum_duration_against_a_word_predicate() {
    for horizon in 1..=8 {
        for h in [1, 2, 3] {
            if h > horizon {
                continue;
            }
            let p = pev(horizon, h);
            let prog = program(&p, &grid(horizon));
            for code in 0..1u32 << horizon {
                let word: Vec<bool> = (0..horizon).map(|t| code >> t & 1 == 1).collect();
                let u: Vec<f64> = word.iter().map(|&w| if w { 0.1 } else { 0.0 }).collect();
                let s = PlayerStrategy::from_exchange(&p, &u);
                assert_eq!(feasible(&prog, &s), runs_ok(&word, h, false), "T={horizon} h={h} {word:?}");
            }
        }
    }
}

#[test]
fn an_initial_plug_continues_without_a_new_run() {
    let mut p = pev(3, 2);
    p.initial_plugged = true;
    p.initial_exchange_kwh = 1.0;
    let prog = program(&p, &grid(3));
    let s = PlayerStrategy::from_exchange(&p, &[1.0, 0.0, 0.0]);
    assert!(!s.plug_in[0]);
    assert!(feasible(&prog, &s));
}

#[test]
fn driving_slots_forbid_plugging() {
    let mut p = pev(3, 1);
    p.drain_soc[1] = 0.1;
    let prog = program(&p, &grid(3));
    assert!(feasible(&prog, &PlayerStrategy::from_exchange(&p, &[0.0, 0.0, 2.0])));
    assert!(!feasible(&prog, &PlayerStrategy::from_exchange(&p, &[0.0, 2.0, 2.0])));
}

#[test]
fn soc_reference_and_ceiling_bind() {
    let mut p = pev(2, 1);
    p.soc_ref[1] = 0.6;
    let prog = program(&p, &grid(2));
    assert!(!feasible(&prog, &PlayerStrategy::from_exchange(&p, &[0.0, 0.0])));
    assert!(feasible(&prog, &PlayerStrategy::from_exchange(&p, &[3.0, 3.0])));
    p.initial_soc = 0.95;
    p.soc_ref[1] = 0.0;
    let prog = program(&p, &grid(2));
    assert!(!feasible(&prog, &PlayerStrategy::from_exchange(&p, &[7.5, 7.5])));
}

#[test]
fn implied_rows_keep_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let opts = SolveOptions::default();
    for _ in 0..12 {
        let horizon = 3;
        let mut g = grid(horizon);
        g.demand_kwh = (0..horizon).map(|_| rng.gen_range(5.0..44.0)).collect();
        let mut p = pev(horizon, 1);
        p.initial_soc = rng.gen_range(0.2..0.8);
        p.soc_ref[rng.gen_range(0..horizon)] = rng.gen_range(0.0..0.9);
        let plain = program(&p, &g);
        let mut tight = plain.clone();
        add_implied_rows(&mut tight).unwrap();
        let a = brute_force(&plain.program, &opts).unwrap();
        let b = brute_force(&tight.program, &opts).unwrap();
        assert_eq!(a.status, b.status);
        if a.status == SolveStatus::Optimal {
            assert!((a.objective - b.objective).abs() <= 1e-8, "{} vs {}", a.objective, b.objective);
        }
    }
}

fn exchange(horizon: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), -7.5..7.5f64], horizon)
}

proptest! {
    #[test]
    fn feasible_points_satisfy_the_implied_rows(u in exchange(4)) {
        let p = pev(4, 1);
        let prog = program(&p, &grid(4));
        let s = PlayerStrategy::from_exchange(&p, &u);
        prop_assume!(feasible(&prog, &s));
        let mut tight = prog.clone();
        add_implied_rows(&mut tight).unwrap();
        prop_assert!(feasible(&tight, &s));
    }

    #[test]
    fn auxiliaries_follow_their_products(u in exchange(5)) {
        let p = pev(5, 1);
        let s = PlayerStrategy::from_exchange(&p, &u);
        for t in 0..5 {
            let prev = if t == 0 { 0.0 } else { u[t - 1] };
            let dc = if s.charge_flag[t] { 1.0 } else { 0.0 };
            let dd = if s.discharge_flag[t] { 1.0 } else { 0.0 };
            prop_assert_eq!(s.f[t], u[t]);
            prop_assert_eq!(s.g[t], (1.0 - dc) * u[t]);
            prop_assert_eq!(s.l[t], (1.0 - dd) * u[t]);
            prop_assert_eq!(s.s[t], (1.0 - dc) * prev);
            prop_assert_eq!(s.kappa[t], (1.0 - dd) * prev);
            prop_assert_eq!(s.g[t] + s.l[t], u[t]);
        }
    }

    #[test]
    fn soc_recursion_is_exact(u in exchange(6), drain in prop::collection::vec(prop_oneof![Just(0.0), 0.0..0.05f64], 6)) {
        let mut p = pev(6, 1);
        p.drain_soc = drain;
        let s = PlayerStrategy::from_exchange(&p, &u);
        let mut prev = p.initial_soc;
        for t in 0..6 {
            let m = if s.plugged[t] { 0.0 } else { p.drain_soc[t] };
            prop_assert!((s.x[t] - prev - p.soc_gain() * u[t] + m).abs() <= 1e-12);
            prev = s.x[t];
        }
    }
}
