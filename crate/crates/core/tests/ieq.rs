mod common;

use chns_core::assembly::Assembler;
use chns_core::fespace::{eval_scalar, l2_project, Constraint, Degree, QuadData, QuadField, QuadRule};
use chns_core::ieq::{aux_update_bdf1, aux_update_bdf2, cp_controller, Mode, PhysParams, SwitchAction};
use chns_core::Error;
use common::{mesh, space, unit_square};
use proptest::prelude::*;

fn params(eps: f64, shift: f64) -> PhysParams {
    PhysParams { gamma: 1.0, mu: 1.0, lambda: 1.0, eps, shift }
}

fn point(v: f64) -> QuadField<f64> {
    QuadField::constant(1, 1, v)
}

#[test]
fn potential_examples() {
    for eps in [0.01, 0.3, 1.0, 4.0] {
        let p = params(eps, 1.0);
        for s in [-1.0, 1.0] {
            assert_eq!(p.potential(s), 0.0);
            assert_eq!(p.potential_derivative(s), 0.0);
            assert_eq!(p.h(s).unwrap(), 0.0);
        }
        assert!((p.potential(0.0) - 1.0 / (4.0 * eps * eps)).abs() <= 1e-15 * p.potential(0.0));
        assert_eq!(p.h(0.0).unwrap(), 0.0);
    }
    let p = params(1.0, 1.0);
    assert_eq!(p.potential(0.0), 0.25);
    assert_eq!(p.potential_derivative(2.0), 6.0);
}

#[test]
fn h_examples() {
    // the hand value 6 / sqrt(52.25) is 0.830057
    assert!((params(1.0, 50.0).h(2.0).unwrap() - 0.830057).abs() < 5e-7);
    assert!((params(1.0, 50.0).h(2.0).unwrap() - 6.0 / 52.25f64.sqrt()).abs() < 1e-15);
    assert!((params(1.0, 1.0).h(2.0).unwrap() - 3.328201).abs() < 5e-7);
}

#[test]
fn nonpositive_radicand_is_an_error() {
    let p = params(1.0, -0.5);
    assert!(matches!(p.h(0.0), Err(Error::NonPositiveShift(_))));
    assert!(p.validate().is_err());
}

#[test]
fn init_aux_examples() {
    let m = mesh(unit_square(), 3, 3);
    let q = QuadData::new(&m, QuadRule::new(5).unwrap());
    let u = params(0.01, 100.0).init_aux(&q.sample(|_| 1.0)).unwrap();
    assert!(u.values.iter().all(|v| *v == 10.0));
    let u = params(1.0, 50.0).init_aux(&q.sample(|_| 0.0)).unwrap();
    assert!(u.values.iter().all(|v| *v == 50.25f64.sqrt()));
    let p = params(0.2, 3.0);
    let u = p.init_aux(&q.sample(|x| 3.0 * (5.0 * x[0]).sin() * x[1])).unwrap();
    assert!(u.values.iter().all(|v| *v >= 3.0f64.sqrt()));
}

#[test]
fn first_order_update_examples() {
    let u = aux_update_bdf1(&point(7.0), &point(0.5), &point(1.2), &point(1.0));
    assert!((u.values[0] - 7.05).abs() < 1e-15);
    assert_eq!(aux_update_bdf1(&point(7.0), &point(0.5), &point(0.3), &point(0.3)).values[0], 7.0);
    assert_eq!(aux_update_bdf1(&point(7.0), &point(0.0), &point(1.3), &point(0.3)).values[0], 7.0);
}

#[test]
fn second_order_update_examples() {
    // (3 a - 4 b + c) / 3 = 0.3
    let (a, b, c) = (0.5, 0.2, 0.2);
    let u = aux_update_bdf2(&point(2.0), &point(1.0), &point(1.0), &point(a), &point(b), &point(c));
    assert!((u.values[0] - (7.0 / 3.0 + 0.15)).abs() < 1e-14);
    let u = aux_update_bdf2(&point(4.0), &point(4.0), &point(2.5), &point(0.7), &point(0.7), &point(0.7));
    assert!((u.values[0] - 4.0).abs() < 1e-15);
    let u = aux_update_bdf2(&point(2.0), &point(1.0), &point(0.0), &point(a), &point(b), &point(c));
    assert!((u.values[0] - 7.0 / 3.0).abs() < 1e-15);
}

#[test]
fn controller_examples() {
    let mut mode = Mode::CpBeforeSwitch;
    for e in [[5.0, 4.9], [4.9, 4.9], [4.9, 1.0]] {
        let (m, act) = cp_controller(e[0], e[1], mode);
        assert_eq!(act, SwitchAction::Keep);
        mode = m;
    }
    assert_eq!(mode, Mode::CpBeforeSwitch);
    assert_eq!(cp_controller(5.0, 5.1, mode), (Mode::CpAfterSwitch, SwitchAction::SwitchAndRetake));
    assert_eq!(cp_controller(5.0, 6.0, Mode::CpAfterSwitch), (Mode::CpAfterSwitch, SwitchAction::Keep));
    assert!(!Mode::CpBeforeSwitch.projects() && Mode::CpAfterSwitch.projects());
}

#[test]
fn projected_aux_examples() {
    let m = mesh(unit_square(), 6, 6);
    let asm = Assembler::new(QuadData::new(&m, QuadRule::new(5).unwrap()), 1);
    let y = space(&m, Degree::P2, 1, Constraint::Free);
    let c = l2_project(&y, &asm, &asm.quad.sample(|_| 3.5), 1e-13).unwrap();
    assert!(c.coeffs.iter().all(|v| (v - 3.5).abs() < 1e-11));
    let f = y.interpolate_scalar(|x| 2.0 + x[0] * x[1] - x[1] * x[1]);
    let back = l2_project(&y, &asm, &eval_scalar(&f, &asm.quad.rule), 1e-13).unwrap();
    for (p, q) in back.coeffs.iter().zip(&f.coeffs) {
        assert!((p - q).abs() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratized_energy_is_consistent(eps in 0.05f64..2.0, shift in 0.5f64..500.0, lambda in 0.001f64..2.0, k in 0.5f64..6.0) {
        let m = mesh(unit_square(), 4, 4);
        let q = QuadData::new(&m, QuadRule::new(5).unwrap());
        let p = PhysParams { lambda, ..params(eps, shift) };
        let phi = q.sample(|x| (k * x[0]).cos() * (1.0 + x[1]));
        let u = p.init_aux(&phi).unwrap();
        let lhs = lambda * q.norm_sq(&u) - lambda * shift;
        let rhs = lambda * q.integrate(&phi.map(|v| p.potential(v)));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (lambda * shift + rhs.abs()));
    }

    #[test]
    fn projection_contracts_the_aux_norm(eps in 0.05f64..1.0, shift in 1.0f64..100.0, k in 0.5f64..9.0) {
        let m = mesh(unit_square(), 5, 5);
        let asm = Assembler::new(QuadData::new(&m, QuadRule::new(5).unwrap()), 1);
        let y = space(&m, Degree::P2, 1, Constraint::Free);
        let p = params(eps, shift);
        let u = p.init_aux(&asm.quad.sample(|x| 1.2 * (k * x[0] * x[1]).sin())).unwrap();
        let proj = l2_project(&y, &asm, &u, 1e-13).unwrap();
        let ph = eval_scalar(&proj, &asm.quad.rule);
        prop_assert!(asm.quad.norm_sq(&ph) <= asm.quad.norm_sq(&u) * (1.0 + 1e-12));
    }

    #[test]
    fn first_order_update_is_linear_in_the_increment(base in 0.1f64..10.0, h in -5.0f64..5.0, d1 in -1.0f64..1.0, d2 in -1.0f64..1.0) {
        let at = |d: f64| aux_update_bdf1(&point(base), &point(h), &point(d), &point(0.0)).values[0];
        let lhs = at(d1 + d2) - base;
        let rhs = (at(d1) - base) + (at(d2) - base);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + base));
    }
}
