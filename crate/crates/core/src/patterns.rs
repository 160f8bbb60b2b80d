//! Mixed-integer inequality families that encode logical propositions over
//! linear forms.
//!
//! Each generator returns plain [`LinearConstraint`]s. Binary operands are
//! passed as [`Literal`]s so that negated binaries (`1 - d`) and known
//! pre-horizon constants can be used wherever a binary is expected.
//!
//! Row semantics for a binary `d` and a linear form `f` with box extremes
//! `m <= f <= M`, threshold `c` and band `eps`:
//!
//! | family        | `d = 1` feasible iff | `d = 0` feasible iff |
//! |---------------|----------------------|----------------------|
//! | [`pattern_geq`] | `f >= c`           | `f <= c - eps`       |
//! | [`pattern_leq`] | `f <= c`           | `f >= c + eps`       |
//!
//! Values of `f` strictly inside the band admit neither value of `d`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LinearConstraint, LinearExpr, MixedIntegerQP, VarId};

/// Default band width, in the units of the encoded expression.
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("threshold {c} lies outside the range [{m}, {max}] of the expression; the proposition is constant")]
    Degenerate { c: f64, m: f64, max: f64 },
    #[error("expression is unbounded over the variable box (variable {0})")]
    Unbounded(VarId),
    #[error("tolerance must be strictly positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("invalid bounds: min {m} exceeds max {max}")]
    InvertedBounds { m: f64, max: f64 },
}

/// Extremes of a linear form over its variable box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExprBounds {
    pub min: f64,
    pub max: f64,
}

impl ExprBounds {
    pub fn new(min: f64, max: f64) -> Result<Self, PatternError> {
        if min > max || min.is_nan() || max.is_nan() {
            return Err(PatternError::InvertedBounds { m: min, max });
        }
        Ok(Self { min, max })
    }

    /// Interval arithmetic over the variable bounds of `program`.
    pub fn of(expr: &LinearExpr, program: &MixedIntegerQP) -> Result<Self, PatternError> {
        let k = expr.constant_term();
        let (mut lo, mut hi) = (k, k);
        for (id, c) in expr.terms() {
            let spec = program.var(id);
            let (a, b) = (c * spec.lower, c * spec.upper);
            if !a.is_finite() || !b.is_finite() {
                return Err(PatternError::Unbounded(id));
            }
            lo += a.min(b);
            hi += a.max(b);
        }
        Ok(Self { min: lo, max: hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance(f64);

impl Tolerance {
    pub fn new(eps: f64) -> Result<Self, PatternError> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Self(eps))
        } else {
            Err(PatternError::BadTolerance(eps))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self(DEFAULT_EPS)
    }
}

/// A binary operand: a variable, its complement, or a known constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Literal {
    Pos(VarId),
    Neg(VarId),
    Const(bool),
}

impl Literal {
    pub fn expr(self) -> LinearExpr {
        match self {
            Literal::Pos(id) => LinearExpr::var(id),
            Literal::Neg(id) => LinearExpr::complement(id),
            Literal::Const(b) => LinearExpr::constant(if b { 1.0 } else { 0.0 }),
        }
    }

    pub fn negate(self) -> Literal {
        match self {
            Literal::Pos(id) => Literal::Neg(id),
            Literal::Neg(id) => Literal::Pos(id),
            Literal::Const(b) => Literal::Const(!b),
        }
    }
}

impl From<VarId> for Literal {
    fn from(id: VarId) -> Self {
        Literal::Pos(id)
    }
}

fn check_threshold(c: f64, b: ExprBounds) -> Result<(), PatternError> {
    if c < b.min || c > b.max {
        return Err(PatternError::Degenerate { c, m: b.min, max: b.max });
    }
    Ok(())
}

/// `[delta = 1] <=> [f >= c]`:
/// `(c - m) delta <= f - m` and `(M - c + eps) delta >= f - c + eps`.
pub fn pattern_geq(
    delta: Literal,
    f: &LinearExpr,
    c: f64,
    b: ExprBounds,
    eps: Tolerance,
) -> Result<[LinearConstraint; 2], PatternError> {
    check_threshold(c, b)?;
    let d = delta.expr();
    let eps = eps.value();
    let lower = LinearConstraint::le_exprs(&d.scaled(c - b.min), &f.plus(&LinearExpr::constant(-b.min)));
    let upper =
        LinearConstraint::ge_exprs(&d.scaled(b.max - c + eps), &f.plus(&LinearExpr::constant(eps - c)));
    Ok([lower, upper])
}

/// `[delta = 1] <=> [f <= c]`:
/// `(M - c) delta <= M - f` and `(c + eps - m) delta >= eps + c - f`.
pub fn pattern_leq(
    delta: Literal,
    f: &LinearExpr,
    c: f64,
    b: ExprBounds,
    eps: Tolerance,
) -> Result<[LinearConstraint; 2], PatternError> {
    check_threshold(c, b)?;
    let d = delta.expr();
    let eps = eps.value();
    let first = LinearConstraint::le_exprs(&d.scaled(b.max - c), &LinearExpr::constant(b.max).minus(f));
    let second =
        LinearConstraint::ge_exprs(&d.scaled(c + eps - b.min), &LinearExpr::constant(eps + c).minus(f));
    Ok([first, second])
}

/// `[delta = 1] <=> [sigma = 1] and [gamma = 1]`.
pub fn pattern_and(delta: Literal, sigma: Literal, gamma: Literal) -> [LinearConstraint; 3] {
    let (d, s, g) = (delta.expr(), sigma.expr(), gamma.expr());
    [
        LinearConstraint::le(d.minus(&s), 0.0),
        LinearConstraint::le(d.minus(&g), 0.0),
        LinearConstraint::le(s.plus(&g).minus(&d), 1.0),
    ]
}

/// `g = delta * f` for binary `delta`:
/// `m delta <= g <= M delta` and `-M (1 - delta) <= g - f <= -m (1 - delta)`.
pub fn pattern_implies(g: VarId, f: &LinearExpr, delta: Literal, b: ExprBounds) -> [LinearConstraint; 4] {
    let d = delta.expr();
    let nd = delta.negate().expr();
    let gv = LinearExpr::var(g);
    let gap = gv.minus(f);
    [
        LinearConstraint::le_exprs(&d.scaled(b.min), &gv),
        LinearConstraint::le_exprs(&gv, &d.scaled(b.max)),
        LinearConstraint::le_exprs(&nd.scaled(-b.max), &gap),
        LinearConstraint::le_exprs(&gap, &nd.scaled(-b.min)),
    ]
}
