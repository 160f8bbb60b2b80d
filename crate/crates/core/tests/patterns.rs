use proptest::prelude::*;

use pevgame::model::{LinearConstraint, LinearExpr, MixedIntegerQP, VarId, VarSpec};
use pevgame::patterns::{pattern_and, pattern_geq, pattern_implies, pattern_leq, ExprBounds, Literal, Tolerance};

fn vars() -> (MixedIntegerQP, VarId, VarId, VarId, VarId) {
    let mut p = MixedIntegerQP::new();
    let d = p.add_var(VarSpec::binary("d")).unwrap();
    let x = p.add_var(VarSpec::continuous("x", -4.0, 6.0)).unwrap();
    let y = p.add_var(VarSpec::continuous("y", 0.0, 2.0)).unwrap();
    let g = p.add_var(VarSpec::continuous("g", -20.0, 20.0)).unwrap();
    (p, d, x, y, g)
}

fn hold(rows: &[LinearConstraint], v: &[f64]) -> bool {
    rows.iter().all(|r| r.violation_at(v) <= 1e-12)
}

const EDGE: f64 = 1e-9;

proptest! {
    #[test]
    fn threshold_patterns_on_a_two_variable_form(
        x in -4.0..6.0f64,
        y in 0.0..2.0f64,
        d in 0..2u8,
        c in -5.0..9.0f64,
        eps in 1e-6..0.5f64,
    ) {
        let (p, dv, xv, yv, _) = vars();
        let f = LinearExpr::var(xv).with_term(yv, 2.0).with_constant(-1.0);
        let b = ExprBounds::of(&f, &p).unwrap();
        prop_assert_eq!((b.min, b.max), (-5.0, 9.0));
        let fv = x + 2.0 * y - 1.0;
        let vals = [f64::from(d), x, y, 0.0];
        let tol = Tolerance::new(eps).unwrap();
        let geq = pattern_geq(Literal::Pos(dv), &f, c, b, tol).unwrap();
        let leq = pattern_leq(Literal::Pos(dv), &f, c, b, tol).unwrap();
        if (fv - c).abs() > EDGE && (fv - c + eps).abs() > EDGE {
            let want = if d == 1 { fv >= c } else { fv <= c - eps };
            prop_assert_eq!(hold(&geq, &vals), want);
        }
        if (fv - c).abs() > EDGE && (fv - c - eps).abs() > EDGE {
            let want = if d == 1 { fv <= c } else { fv >= c + eps };
            prop_assert_eq!(hold(&leq, &vals), want);
        }
    }

    #[test]
    fn product_pattern_is_exact(x in -4.0..6.0f64, y in 0.0..2.0f64, d in 0..2u8, off in -1.0..1.0f64) {
        let (p, dv, xv, yv, gv) = vars();
        let f = LinearExpr::var(xv).minus(&LinearExpr::var(yv));
        let b = ExprBounds::of(&f, &p).unwrap();
        let rows = pattern_implies(gv, &f, Literal::Pos(dv), b);
        let prod = f64::from(d) * (x - y);
        prop_assert!(hold(&rows, &[f64::from(d), x, y, prod]));
        if off.abs() > EDGE {
            prop_assert!(!hold(&rows, &[f64::from(d), x, y, prod + off]));
        }
    }
}

#[test]
fn conjunction_truth_table_with_every_literal_kind() {
    let (_, d, s, g, _) = vars();
    let kinds = |v: VarId| [Literal::Pos(v), Literal::Neg(v), Literal::Const(true), Literal::Const(false)];
    for a in kinds(s) {
        for b in kinds(g) {
            let rows = pattern_and(Literal::Pos(d), a, b);
            for code in 0..8u32 {
                let bit = |k: u32| f64::from((code >> k) & 1);
                let vals = [bit(0), bit(1), bit(2), 0.0];
                let truth = |l: Literal, v: f64| match l {
                    Literal::Pos(_) => v == 1.0,
                    Literal::Neg(_) => v == 0.0,
                    Literal::Const(c) => c,
                };
                let want = (bit(0) == 1.0) == (truth(a, bit(1)) && truth(b, bit(2)));
                assert_eq!(hold(&rows, &vals), want, "{a:?} {b:?} code {code}");
            }
        }
    }
}
