//! Mixed-integer model of plug-in electric vehicles trading energy with a
//! shared grid, and a best-response game that drives the fleet to a
//! mixed-integer Nash equilibrium.

pub mod game;
pub mod model;
pub mod patterns;
pub mod pev;
pub mod scenario;
pub mod solver;

pub use game::{CollectiveStrategy, Game, GameError, MineCertificate, RunConfig, RunOutcome, Selection};
pub use model::{Assignment, LinearConstraint, LinearExpr, MixedIntegerQP, QuadraticObjective, VarId, VarSpec};
pub use pev::{GridParams, PevParams, PlayerProgram, PlayerStrategy};
pub use scenario::{OutputBundle, Scale, ScenarioConfig, ScenarioError};
pub use solver::{brute_force, solve, SolveOptions, SolveResult, SolveStatus};
