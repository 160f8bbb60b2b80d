use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pevgame::pev::add_implied_rows;
use pevgame::scenario::{default_scenario, DemandProfile, Scale};
use pevgame::solver::{brute_force, solve, solve_qp_relaxation, SolveOptions};
use pevgame::Game;

fn desk() -> Game {
    default_scenario(Scale::Desk).game().unwrap()
}

fn relaxation(c: &mut Criterion) {
    let game = desk();
    let prog = game.player_program(&game.rest(), 0).unwrap().program;
    let opts = SolveOptions::default();
    c.bench_function("desk relaxation", |b| b.iter(|| solve_qp_relaxation(&prog, &BTreeMap::new(), &opts).unwrap()));
}

fn best_response(c: &mut Criterion) {
    let game = desk();
    let z = game.rest();
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("desk best response");
    group.sample_size(10);
    for i in 0..game.num_players() {
        group.bench_with_input(BenchmarkId::from_parameter(i + 1), &i, |b, &i| {
            b.iter(|| game.best_response(&z, i, &opts).unwrap())
        });
    }
    group.finish();
}

fn small_programs(c: &mut Criterion) {
    let cfg = default_scenario(Scale::Desk);
    let mut short = cfg.clone();
    short.horizon_slots = 3;
    let d = cfg.demand_kwh();
    short.demand = DemandProfile::Inline { values_kwh: d[..3].to_vec() };
    for p in &mut short.pevs {
        p.soc_ref_fraction.truncate(3);
        p.drain_kwh.truncate(3);
        p.min_plugged_slots = 1;
    }
    let game = short.game().unwrap();
    let plain = game.player_program(&game.rest(), 0).unwrap();
    let mut tight = plain.clone();
    add_implied_rows(&mut tight).unwrap();
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("three slots");
    group.bench_function("branch and bound", |b| b.iter(|| solve(&plain.program, &opts).unwrap()));
    group.bench_function("branch and bound, implied rows", |b| b.iter(|| solve(&tight.program, &opts).unwrap()));
    group.sample_size(10);
    group.bench_function("enumeration", |b| b.iter(|| brute_force(&plain.program, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, relaxation, small_programs, best_response);
criterion_main!(benches);
