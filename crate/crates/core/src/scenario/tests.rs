use super::*;

fn field_of(e: ScenarioError) -> String {
    match e {
        ScenarioError::Invalid { field, .. } => field,
        other => panic!("expected a field error, got {other}"),
    }
}

#[test]
fn toml_round_trip_is_lossless() {
    for cfg in [default_scenario(Scale::Desk), default_scenario(Scale::Paper), desk_six(3)] {
        let text = cfg.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
    }
}

#[test]
fn missing_vehicle_is_named() {
    let mut cfg = default_scenario(Scale::Desk);
    cfg.pevs.pop();
    assert_eq!(field_of(cfg.validate().unwrap_err()), "pevs[3]");
}

#[test]
fn extra_vehicle_is_named() {
    let mut cfg = default_scenario(Scale::Desk);
    cfg.pevs.push(cfg.pevs[0].clone());
    assert_eq!(field_of(cfg.validate().unwrap_err()), "pevs[4]");
}

#[test]
fn inline_demand_length_is_checked() {
    let mut cfg = default_scenario(Scale::Desk);
    cfg.demand = DemandProfile::Inline { values_kwh: vec![30.0; 11] };
    assert_eq!(field_of(cfg.validate().unwrap_err()), "demand.values_kwh");
}

#[test]
fn per_vehicle_series_lengths_are_checked() {
    let mut cfg = default_scenario(Scale::Desk);
    cfg.pevs[2].drain_kwh.push(0.0);
    assert_eq!(field_of(cfg.validate().unwrap_err()), "pevs[2].drain_kwh");
    let mut cfg = default_scenario(Scale::Desk);
    cfg.pevs[1].soc_ref_fraction.pop();
    assert_eq!(field_of(cfg.validate().unwrap_err()), "pevs[1].soc_ref_fraction");
}

#[test]
fn bad_vehicle_parameter_points_at_the_vehicle() {
    let mut cfg = default_scenario(Scale::Desk);
    cfg.pevs[1].efficiency = 1.5;
    assert_eq!(field_of(cfg.validate().unwrap_err()), "pevs[1]");
}

#[test]
fn loose_gap_is_rejected() {
    let mut cfg = default_scenario(Scale::Desk);
    cfg.solver.abs_gap = cfg.epsilon_eur;
    assert_eq!(field_of(cfg.validate().unwrap_err()), "solver");
}

#[test]
fn unknown_fields_do_not_parse() {
    let text = default_scenario(Scale::Desk).to_toml().unwrap().replace("players =", "vehicles =");
    assert!(matches!(ScenarioConfig::from_toml(&text), Err(ScenarioError::Parse(_))));
}

#[test]
fn two_peak_curve_sits_on_slot_midpoints() {
    let p = DemandProfile::TwoPeak {
        base_kwh: 10.0,
        morning_amplitude_kwh: 0.0,
        morning_hour: 8.0,
        morning_width_hours: 1.0,
        evening_amplitude_kwh: 5.0,
        evening_hour: 1.0,
        evening_width_hours: 1.0,
    };
    let d = p.resolve(24, 60);
    assert_eq!(d.len(), 24);
    // midpoints 0.5 h and 1.5 h are symmetric about the evening hour
    assert!((d[0] - d[1]).abs() < 1e-12);
    assert!(d[0] > d[2] && d[2] > 10.0);
}

#[test]
fn default_peak_reaches_ten_percent_over_capacity() {
    for cfg in [default_scenario(Scale::Desk), default_scenario(Scale::Paper)] {
        let d = cfg.demand_kwh();
        let peak = d.iter().copied().fold(f64::MIN, f64::max);
        assert!((peak - 1.1 * cfg.grid.capacity_kwh).abs() < 1e-9, "{d:?}");
        assert!(d.iter().all(|&v| v >= 20.0));
    }
    let d = default_scenario(Scale::Desk).demand_kwh();
    assert_eq!(d.iter().filter(|&&v| v > 45.0).count(), 1);
}

#[test]
fn default_fleet_follows_its_sampling_ranges() {
    for seed in 0..20 {
        let cfg = default_scenario_seeded(Scale::Paper, seed);
        assert_eq!((cfg.players, cfg.horizon_slots, cfg.slot_minutes), (6, 48, 30));
        assert_eq!(cfg.max_sweeps, 60);
        for p in &cfg.pevs {
            assert!((40.0..75.0).contains(&p.capacity_kwh));
            assert_eq!(p.min_plugged_slots, 5);
            let targets: Vec<_> = p.soc_ref_fraction.iter().filter(|&&r| r > 0.0).collect();
            assert_eq!(targets.len(), 1);
            assert!(*targets[0] <= 0.85);
            let trips = p.drain_kwh.iter().filter(|&&m| m > 0.0).count();
            assert_eq!(trips, 4);
        }
        cfg.validate().unwrap();
    }
}

#[test]
fn seeds_change_the_fleet() {
    assert_eq!(default_scenario(Scale::Desk), default_scenario_seeded(Scale::Desk, 7));
    assert_ne!(default_scenario_seeded(Scale::Desk, 1).pevs, default_scenario_seeded(Scale::Desk, 2).pevs);
}

#[test]
fn desk_programs_stay_small() {
    let cfg = default_scenario(Scale::Desk);
    let game = cfg.game().unwrap();
    for i in 0..cfg.players {
        // 4 binaries per slot plus one per forced follow-up slot
        assert_eq!(game.player_program(&game.rest(), i).unwrap().program.num_binaries(), 4 * 12 + 21);
    }
}
