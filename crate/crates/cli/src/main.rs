use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pevgame::game::JOINT_TOL;
use pevgame::pev::effective_min_plugged;
use pevgame::scenario::{default_scenario_seeded, load_scenario, read_strategy, run, write_scenario};
use pevgame::{GameError, Scale, ScenarioConfig, ScenarioError};

mod oracle;

const EXIT_FAILURE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "pevgame", version, about = "Best-response scheduling of a PEV fleet sharing a grid connection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the best-response dynamics and write tables, plot data and a manifest.
    Run(RunArgs),
    /// Write a default scenario file.
    Init(InitArgs),
    /// Check whether a saved strategy is an epsilon-equilibrium.
    Certify(CertifyArgs),
    /// Compare branch-and-bound with enumeration on short windows of a scenario.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "scale")]
    scenario: Option<PathBuf>,
    /// Built-in scenario used when no file is given.
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    /// Fleet seed for a built-in scenario; player-order seed for a file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Smallest accepted cost decrease, EUR.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Path of the scenario file to write.
    #[arg(long, default_value = "scenario.toml")]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Strategy file written by `run`.
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: Source,
    /// Slots per window.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=3))]
    window: u64,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match &e {
            ScenarioError::Parse(_) | ScenarioError::Invalid { .. } => EXIT_CONFIG,
            ScenarioError::Game(GameError::Infeasible { .. }) => EXIT_INFEASIBLE,
            ScenarioError::Game(GameError::Invalid(_)) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        ScenarioError::Game(e).into()
    }
}

fn load(source: &Source) -> Result<ScenarioConfig, Failure> {
    match &source.scenario {
        Some(path) => {
            // an unreadable scenario file is a configuration problem
            let mut cfg = load_scenario(path).map_err(|e| Failure::config(e.to_string()))?;
            if let Some(seed) = source.seed {
                cfg.seed = seed;
            }
            Ok(cfg)
        }
        None => Ok(default_scenario_seeded(source.scale.into(), source.seed.unwrap_or(7))),
    }
}

/// Solver gaps follow epsilon down so that the run stays valid.
fn set_epsilon(cfg: &mut ScenarioConfig, epsilon: f64) {
    cfg.epsilon_eur = epsilon;
    let limit = epsilon / 100.0;
    cfg.solver.abs_gap = cfg.solver.abs_gap.min(limit);
    cfg.solver.rel_gap = cfg.solver.rel_gap.min(limit);
}

fn cmd_run(args: RunArgs) -> Result<u8, Failure> {
    let mut cfg = load(&args.source)?;
    if let Some(e) = args.epsilon {
        set_epsilon(&mut cfg, e);
    }
    if let Some(k) = args.max_sweeps {
        cfg.max_sweeps = k;
    }
    cfg.validate()?;
    let bundle = run(&cfg, &args.out)?;
    let s = &bundle.summary;
    println!(
        "{} after {} sweeps ({} best responses): potential {:.6} -> {:.6}, {:.1} s",
        if s.converged { "converged" } else { "not converged" },
        s.sweeps,
        bundle.iterations.len(),
        s.initial_potential,
        s.final_potential,
        bundle.wall_time_s
    );
    if s.limited_best_responses > 0 {
        println!(
            "{} best responses stopped at a solver limit; raise solver.time_limit or solver.node_limit",
            s.limited_best_responses
        );
    }
    println!("outputs in {}", args.out.display());
    Ok(if s.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_init(args: InitArgs) -> Result<u8, Failure> {
    let cfg = default_scenario_seeded(args.scale.into(), args.seed);
    write_scenario(&cfg, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn cmd_certify(args: CertifyArgs) -> Result<u8, Failure> {
    let mut cfg = load_scenario(&args.scenario).map_err(|e| Failure::config(e.to_string()))?;
    if let Some(e) = args.epsilon {
        set_epsilon(&mut cfg, e);
    }
    cfg.validate()?;
    let game = cfg.game()?;
    let z = read_strategy(&args.strategy).map_err(|e| Failure::config(e.to_string()))?;
    check_shape(&z, &cfg, &args.strategy)?;
    let violation = game.max_violation(&z)?;
    if violation > JOINT_TOL {
        eprintln!("strategy violates the scenario constraints by {violation:e}");
        return Ok(EXIT_INFEASIBLE);
    }
    let cert = game.certify_mine(&z, cfg.epsilon_eur, &cfg.solver)?;
    for (i, v) in cert.improvements.iter().enumerate() {
        println!("player {}: best improvement {v:.3e} EUR", i + 1);
    }
    if cert.certified {
        println!("certified: no player gains {:e} EUR or more", cert.epsilon);
        Ok(0)
    } else {
        println!("not certified: player {} gains {:.3e} EUR", cert.worst_player + 1, cert.worst_improvement);
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn check_shape(z: &pevgame::CollectiveStrategy, cfg: &ScenarioConfig, path: &Path) -> Result<(), Failure> {
    let t = cfg.horizon_slots;
    let fits = z.len() == cfg.players
        && z.players.iter().zip(&cfg.pevs).all(|(p, pev)| {
            let series = [p.u.len(), p.x.len(), p.plugged.len(), p.charge_flag.len(), p.discharge_flag.len()];
            let aux = [p.f.len(), p.g.len(), p.s.len(), p.l.len(), p.kappa.len(), p.plug_in.len(), p.beta.len()];
            series.iter().chain(&aux).all(|&n| n == t)
                && p.beta.iter().enumerate().all(|(k, row)| row.len() == effective_min_plugged(pev.min_plugged_slots, t, k))
        });
    if fits {
        Ok(())
    } else {
        Err(Failure::config(format!(
            "{}: strategy does not match {} players and {} slots",
            path.display(),
            cfg.players,
            cfg.horizon_slots
        )))
    }
}

fn cmd_oracle(args: OracleArgs) -> Result<u8, Failure> {
    let cfg = load(&args.source)?;
    cfg.validate()?;
    let report = oracle::cross_check(&cfg, args.window as usize).map_err(|message| Failure { code: EXIT_FAILURE, message })?;
    for line in &report.lines {
        println!("{line}");
    }
    println!("{} windows, {} mismatches", report.cases, report.mismatches);
    Ok(if report.mismatches == 0 { 0 } else { EXIT_FAILURE })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Init(a) => cmd_init(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
