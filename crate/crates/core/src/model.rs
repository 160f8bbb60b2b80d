//! Decision variables, linear expressions, linear constraints and convex
//! quadratic objectives.
//!
//! Everything else in the crate is assembled on top of [`MixedIntegerQP`]:
//! the logical patterns emit [`LinearConstraint`]s, the vehicle builder
//! registers variables and a [`QuadraticObjective`], and the solver compiles
//! the whole registry into a numeric problem.
//!
//! Quadratic terms use a single convention everywhere: entries are stored on
//! the upper triangle (`i <= j`) with full weight, and the form evaluates to
//! `sum over stored (i, j) of x_i * q_ij * x_j`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default feasibility tolerance, in constraint units.
pub const DEFAULT_FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable `{label}` has lower bound {lower} above upper bound {upper}")]
    InvalidBounds { label: String, lower: f64, upper: f64 },
    #[error("binary variable `{label}` must have bounds within [0, 1] at integer values, got [{lower}, {upper}]")]
    InvalidBinaryBounds { label: String, lower: f64, upper: f64 },
    #[error("variable bound for `{label}` is NaN")]
    NanBound { label: String },
    #[error("unknown variable id {0} (registry holds {1} variables)")]
    UnknownVar(usize, usize),
    #[error("assignment has {got} values but the program has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
}

/// Dense index of a variable inside one [`MixedIntegerQP`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub label: String,
}

impl VarSpec {
    pub fn continuous(label: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { kind: VarKind::Continuous, lower, upper, label: label.into() }
    }

    pub fn binary(label: impl Into<String>) -> Self {
        Self { kind: VarKind::Binary, lower: 0.0, upper: 1.0, label: label.into() }
    }

    pub fn is_binary(&self) -> bool {
        self.kind == VarKind::Binary
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.lower.is_nan() || self.upper.is_nan() {
            return Err(ModelError::NanBound { label: self.label.clone() });
        }
        if self.lower > self.upper {
            return Err(ModelError::InvalidBounds {
                label: self.label.clone(),
                lower: self.lower,
                upper: self.upper,
            });
        }
        if self.is_binary() && (self.lower != 0.0 || self.upper != 1.0) {
            return Err(ModelError::InvalidBinaryBounds {
                label: self.label.clone(),
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(())
    }
}

/// Sparse affine form `sum coeff * var + constant`.
///
/// Zero coefficients are never stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    coeffs: BTreeMap<VarId, f64>,
    constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self { coeffs: BTreeMap::new(), constant: value }
    }

    pub fn var(id: VarId) -> Self {
        Self::term(id, 1.0)
    }

    pub fn term(id: VarId, coeff: f64) -> Self {
        let mut e = Self::new();
        e.add_term(id, coeff);
        e
    }

    /// `1 - var`, the negation of a binary literal.
    pub fn complement(id: VarId) -> Self {
        let mut e = Self::constant(1.0);
        e.add_term(id, -1.0);
        e
    }

    pub fn with_term(mut self, id: VarId, coeff: f64) -> Self {
        self.add_term(id, coeff);
        self
    }

    pub fn with_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn add_term(&mut self, id: VarId, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let slot = self.coeffs.entry(id).or_insert(0.0);
        *slot += coeff;
        if *slot == 0.0 {
            self.coeffs.remove(&id);
        }
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &LinearExpr, scale: f64) {
        for (&id, &c) in &other.coeffs {
            self.add_term(id, scale * c);
        }
        self.constant += scale * other.constant;
    }

    pub fn scaled(&self, scale: f64) -> LinearExpr {
        let mut out = LinearExpr::new();
        out.add_scaled(self, scale);
        out
    }

    pub fn plus(&self, other: &LinearExpr) -> LinearExpr {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn minus(&self, other: &LinearExpr) -> LinearExpr {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarId, f64)> + '_ {
        self.coeffs.iter().map(|(&id, &c)| (id, c))
    }

    pub fn coeff(&self, id: VarId) -> f64 {
        self.coeffs.get(&id).copied().unwrap_or(0.0)
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_var(&self) -> Option<VarId> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn eval(&self, a: &Assignment) -> Result<f64, ModelError> {
        let mut acc = self.constant;
        for (&id, &c) in &self.coeffs {
            let v = a
                .values
                .get(id.0)
                .ok_or(ModelError::UnknownVar(id.0, a.values.len()))?;
            acc += c * v;
        }
        Ok(acc)
    }

    /// Evaluation on a raw value slice; panics on out-of-range ids.
    pub(crate) fn eval_slice(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().fold(self.constant, |acc, (&id, &c)| acc + c * values[id.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// `expr (sense) rhs` with the expression constant folded into `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    expr: LinearExpr,
    sense: Sense,
    rhs: f64,
}

impl LinearConstraint {
    pub fn new(mut expr: LinearExpr, sense: Sense, rhs: f64) -> Self {
        let rhs = rhs - expr.constant;
        expr.constant = 0.0;
        Self { expr, sense, rhs }
    }

    pub fn le(expr: LinearExpr, rhs: f64) -> Self {
        Self::new(expr, Sense::Le, rhs)
    }

    pub fn ge(expr: LinearExpr, rhs: f64) -> Self {
        Self::new(expr, Sense::Ge, rhs)
    }

    pub fn eq(expr: LinearExpr, rhs: f64) -> Self {
        Self::new(expr, Sense::Eq, rhs)
    }

    /// `lhs <= rhs` for two affine forms.
    pub fn le_exprs(lhs: &LinearExpr, rhs: &LinearExpr) -> Self {
        Self::le(lhs.minus(rhs), 0.0)
    }

    pub fn ge_exprs(lhs: &LinearExpr, rhs: &LinearExpr) -> Self {
        Self::ge(lhs.minus(rhs), 0.0)
    }

    pub fn expr(&self) -> &LinearExpr {
        &self.expr
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn rhs(&self) -> f64 {
        self.rhs
    }

    /// Amount by which the row is violated at `values` (0 when satisfied).
    pub fn violation_at(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.eval_slice(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    pub fn violation(&self, a: &Assignment) -> Result<f64, ModelError> {
        let lhs = self.expr.eval(a)?;
        Ok(match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        })
    }

    pub fn is_satisfied(&self, a: &Assignment, tol: f64) -> Result<bool, ModelError> {
        Ok(self.violation(a)? <= tol)
    }
}

/// `sum over stored (i <= j) of q_ij x_i x_j + linear(x)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadraticObjective {
    quad: BTreeMap<(VarId, VarId), f64>,
    linear: LinearExpr,
}

impl QuadraticObjective {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coeff * x_i * x_j`.
    pub fn add_quad_term(&mut self, i: VarId, j: VarId, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let key = if i <= j { (i, j) } else { (j, i) };
        let slot = self.quad.entry(key).or_insert(0.0);
        *slot += coeff;
        if *slot == 0.0 {
            self.quad.remove(&key);
        }
    }

    /// Adds a symmetric matrix entry `Q_ij = Q_ji = q` of the form `z' Q z`.
    /// Off-diagonal entries therefore contribute `2 q x_i x_j`.
    pub fn add_symmetric_entry(&mut self, i: VarId, j: VarId, q: f64) {
        if i == j {
            self.add_quad_term(i, i, q);
        } else {
            self.add_quad_term(i, j, 2.0 * q);
        }
    }

    /// Adds `weight * (expr)^2`, expanding constants into the linear part.
    pub fn add_squared(&mut self, expr: &LinearExpr, weight: f64) {
        if weight == 0.0 {
            return;
        }
        let terms: Vec<(VarId, f64)> = expr.terms().collect();
        for (a, &(i, ci)) in terms.iter().enumerate() {
            self.add_quad_term(i, i, weight * ci * ci);
            for &(j, cj) in &terms[a + 1..] {
                self.add_quad_term(i, j, 2.0 * weight * ci * cj);
            }
        }
        let k = expr.constant_term();
        if k != 0.0 {
            for &(i, ci) in &terms {
                self.linear.add_term(i, 2.0 * weight * k * ci);
            }
            self.linear.add_constant(weight * k * k);
        }
    }

    pub fn add_linear(&mut self, expr: &LinearExpr, scale: f64) {
        self.linear.add_scaled(expr, scale);
    }

    pub fn linear(&self) -> &LinearExpr {
        &self.linear
    }

    pub fn quad_terms(&self) -> impl Iterator<Item = (VarId, VarId, f64)> + '_ {
        self.quad.iter().map(|(&(i, j), &q)| (i, j, q))
    }

    pub fn num_quad_terms(&self) -> usize {
        self.quad.len()
    }

    pub fn is_zero(&self) -> bool {
        self.quad.is_empty() && self.linear.is_constant() && self.linear.constant_term() == 0.0
    }

    pub fn eval(&self, a: &Assignment) -> Result<f64, ModelError> {
        let n = a.values.len();
        for &(i, j) in self.quad.keys() {
            if j.0 >= n {
                return Err(ModelError::UnknownVar(i.0.max(j.0), n));
            }
        }
        let lin = self.linear.eval(a)?;
        Ok(lin + self.quad_value(&a.values))
    }

    fn quad_value(&self, values: &[f64]) -> f64 {
        self.quad
            .iter()
            .map(|(&(i, j), &q)| values[i.0] * q * values[j.0])
            .sum()
    }

    fn max_var(&self) -> Option<VarId> {
        let q = self.quad.keys().map(|&(_, j)| j).max();
        q.max(self.linear.max_var())
    }
}

/// One value per variable of a program, indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<f64>,
}

impl Assignment {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: VarId) -> f64 {
        self.values[id.0]
    }

    pub fn set(&mut self, id: VarId, value: f64) {
        self.values[id.0] = value;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LowerBound { var: VarId, value: f64, bound: f64 },
    UpperBound { var: VarId, value: f64, bound: f64 },
    Integrality { var: VarId, value: f64 },
    Row { index: usize, amount: f64 },
}

impl Violation {
    pub fn amount(&self) -> f64 {
        match *self {
            Violation::LowerBound { value, bound, .. } => bound - value,
            Violation::UpperBound { value, bound, .. } => value - bound,
            Violation::Integrality { value, .. } => (value - value.round()).abs(),
            Violation::Row { amount, .. } => amount,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(Violation::amount).fold(0.0, f64::max)
    }
}

/// Registry of variables, linear rows and one convex quadratic objective.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedIntegerQP {
    vars: Vec<VarSpec>,
    constraints: Vec<LinearConstraint>,
    objective: QuadraticObjective,
}

impl MixedIntegerQP {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, spec: VarSpec) -> Result<VarId, ModelError> {
        spec.validate()?;
        let id = VarId(self.vars.len());
        self.vars.push(spec);
        Ok(id)
    }

    pub fn add_constraint(&mut self, c: LinearConstraint) -> Result<usize, ModelError> {
        if let Some(max) = c.expr.max_var() {
            self.check_id(max)?;
        }
        self.constraints.push(c);
        Ok(self.constraints.len() - 1)
    }

    pub fn add_constraints(
        &mut self,
        rows: impl IntoIterator<Item = LinearConstraint>,
    ) -> Result<(), ModelError> {
        for c in rows {
            self.add_constraint(c)?;
        }
        Ok(())
    }

    pub fn set_objective(&mut self, obj: QuadraticObjective) -> Result<(), ModelError> {
        if let Some(max) = obj.max_var() {
            self.check_id(max)?;
        }
        self.objective = obj;
        Ok(())
    }

    fn check_id(&self, id: VarId) -> Result<(), ModelError> {
        if id.0 >= self.vars.len() {
            Err(ModelError::UnknownVar(id.0, self.vars.len()))
        } else {
            Ok(())
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[VarSpec] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &VarSpec {
        &self.vars[id.0]
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &QuadraticObjective {
        &self.objective
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_binary())
            .map(|(i, _)| VarId(i))
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    pub fn var_by_label(&self, label: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.label == label).map(VarId)
    }

    pub fn eval_objective(&self, a: &Assignment) -> Result<f64, ModelError> {
        self.check_len(a)?;
        self.objective.eval(a)
    }

    fn check_len(&self, a: &Assignment) -> Result<(), ModelError> {
        if a.len() != self.vars.len() {
            return Err(ModelError::AssignmentLength { expected: self.vars.len(), got: a.len() });
        }
        Ok(())
    }

    /// Lists every bound, integrality and row violation larger than `tol`.
    pub fn check_feasible(&self, a: &Assignment, tol: f64) -> Result<FeasibilityReport, ModelError> {
        self.check_len(a)?;
        let mut violations = Vec::new();
        for (i, (spec, &v)) in self.vars.iter().zip(&a.values).enumerate() {
            let var = VarId(i);
            if v < spec.lower - tol || v.is_nan() {
                violations.push(Violation::LowerBound { var, value: v, bound: spec.lower });
            } else if v > spec.upper + tol {
                violations.push(Violation::UpperBound { var, value: v, bound: spec.upper });
            }
            if spec.is_binary() && (v - v.round()).abs() > tol {
                violations.push(Violation::Integrality { var, value: v });
            }
        }
        for (index, c) in self.constraints.iter().enumerate() {
            let amount = c.violation_at(&a.values);
            if amount > tol || amount.is_nan() {
                violations.push(Violation::Row { index, amount });
            }
        }
        Ok(FeasibilityReport { violations })
    }
}
