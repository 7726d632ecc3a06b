mod common;

use std::f64::consts::PI;

use chns_core::assembly::Assembler;
use chns_core::fespace::basis::{gradients, local_nodes, values};
use chns_core::fespace::{
    eval_gradient, eval_scalar, l2_project, Constraint, Degree, FEFunction, QuadData, QuadField, QuadRule,
};
use chns_core::mesh::{Mesh, Rect};
use chns_core::Error;
use common::{factorial, mesh, space, unit_square};
use proptest::prelude::*;

fn assembler(m: &Mesh, degree: usize) -> Assembler {
    Assembler::new(QuadData::new(m, QuadRule::new(degree).unwrap()), 1)
}

#[test]
fn unit_square_single_cell_counts() {
    let m = Mesh::structured_rect(unit_square(), 1, 1).unwrap();
    assert_eq!((m.n_vertices(), m.n_triangles(), m.n_edges()), (4, 2, 5));
}

#[test]
fn four_by_four_counts() {
    let m = Mesh::structured_rect(Rect::new(0.0, 4.0 * PI, 0.0, 4.0 * PI), 4, 4).unwrap();
    assert_eq!((m.n_vertices(), m.n_triangles()), (25, 32));
}

proptest! {
    #[test]
    fn mesh_topology_and_geometry(nx in 1usize..12, ny in 1usize..12, x0 in -3.0f64..3.0, w in 0.1f64..5.0, h in 0.1f64..5.0) {
        let d = Rect::new(x0, x0 + w, -x0, -x0 + h);
        let m = Mesh::structured_rect(d, nx, ny).unwrap();
        let (v, e, t) = (m.n_vertices() as i64, m.n_edges() as i64, m.n_triangles() as i64);
        prop_assert_eq!(v - e + t, 1);
        let mut total = 0.0;
        for k in 0..m.n_triangles() {
            let a = m.signed_area(k);
            prop_assert!(a > 0.0);
            total += a;
        }
        prop_assert!((total - d.area()).abs() <= 1e-12 * d.area());
        let mut share = vec![0usize; m.n_edges()];
        for te in &m.triangle_edges {
            for &k in te {
                share[k] += 1;
            }
        }
        for (k, edge) in m.edges.iter().enumerate() {
            let expected = if edge.boundary.is_some() { 1 } else { 2 };
            prop_assert_eq!(share[k], expected);
            if let Some(side) = edge.boundary {
                let [a, b] = edge.vertices.map(|i| m.vertices[i]);
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                let n = side.outward_normal();
                // the edge runs along the side and a step along the normal leaves the domain
                prop_assert!(((b[0] - a[0]) * n[0] + (b[1] - a[1]) * n[1]).abs() < 1e-12);
                let out = [mid[0] + 1e-3 * n[0], mid[1] + 1e-3 * n[1]];
                let inside = out[0] > d.x_min && out[0] < d.x_max && out[1] > d.y_min && out[1] < d.y_max;
                prop_assert!(!inside);
            }
        }
    }
}

#[test]
fn degenerate_meshes_are_rejected() {
    assert!(matches!(Mesh::structured_rect(unit_square(), 0, 3), Err(Error::InvalidMesh(_))));
    assert!(matches!(Mesh::structured_rect(Rect::new(0.0, 0.0, 0.0, 1.0), 2, 2), Err(Error::InvalidMesh(_))));
}

#[test]
fn quadrature_weights_sum_to_reference_area() {
    for d in 0..=6 {
        let r = QuadRule::new(d).unwrap();
        let s: f64 = r.weights.iter().sum();
        assert!((s - 0.5).abs() <= 1e-14, "degree {d}: {s}");
    }
}

#[test]
fn quadrature_integrates_monomials_exactly() {
    for d in 0..=6 {
        let r = QuadRule::new(d).unwrap();
        for a in 0..=d as u32 {
            for b in 0..=(d as u32 - a) {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let got: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                assert!((got - exact).abs() <= 1e-14, "degree {d}, x^{a} y^{b}: {got} vs {exact}");
            }
        }
    }
}

#[test]
fn degree_five_rule_examples() {
    let r = QuadRule::new(5).unwrap();
    let x2y2: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0] * p[0] * p[1] * p[1]).sum();
    assert!((x2y2 - 1.0 / 180.0).abs() < 1e-15);
    assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
}

#[test]
fn unsupported_quadrature_degree() {
    assert!(matches!(QuadRule::new(7), Err(Error::UnsupportedQuadrature(7))));
}

#[test]
fn p1_vertex_values() {
    let mut v = [0.0; 3];
    values(Degree::P1, 1.0, 0.0, &mut v);
    assert_eq!(v, [0.0, 1.0, 0.0]);
}

#[test]
fn p2_midpoint_opposite_vertex_one() {
    // local node 5 sits on the edge between vertices 2 and 0
    let node = local_nodes(Degree::P2)[5];
    assert_eq!(node, [0.0, 0.5]);
    let mut v = [0.0; 6];
    values(Degree::P2, node[0], node[1], &mut v);
    for (i, x) in v.iter().enumerate() {
        let e = if i == 5 { 1.0 } else { 0.0 };
        assert!((x - e).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn partition_of_unity(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (xi, eta) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
        for deg in [Degree::P1, Degree::P2] {
            let n = deg.n_local();
            let mut v = vec![0.0; n];
            let mut g = vec![[0.0; 2]; n];
            values(deg, xi, eta, &mut v);
            gradients(deg, xi, eta, &mut g);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
            prop_assert!(g.iter().map(|x| x[0]).sum::<f64>().abs() <= 1e-13);
            prop_assert!(g.iter().map(|x| x[1]).sum::<f64>().abs() <= 1e-13);
        }
    }

    #[test]
    fn p2_scalar_dof_count(n in 1usize..10) {
        let m = mesh(unit_square(), n, n);
        prop_assert_eq!(space(&m, Degree::P2, 1, Constraint::Free).n_dofs(), (2 * n + 1).pow(2));
    }

    #[test]
    fn p2_reproduces_quadratics(c in prop::array::uniform6(-2.0f64..2.0)) {
        let f = move |x: [f64; 2]| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1];
        let df = move |x: [f64; 2]| [c[1] + 2.0 * c[3] * x[0] + c[4] * x[1], c[2] + c[4] * x[0] + 2.0 * c[5] * x[1]];
        let m = mesh(Rect::new(-1.0, 2.0, 0.0, 1.5), 3, 4);
        let s = space(&m, Degree::P2, 1, Constraint::Free);
        let fh = s.interpolate_scalar(f);
        let rule = QuadRule::new(5).unwrap();
        let qd = QuadData::new(&m, rule.clone());
        let vals = eval_scalar(&fh, &rule);
        let grads = eval_gradient(&fh, &rule);
        for (k, &x) in qd.points.values.iter().enumerate() {
            prop_assert!((vals.values[k] - f(x)).abs() <= 1e-12);
            let g = df(x);
            prop_assert!((grads.values[k][0] - g[0]).abs() <= 1e-12);
            prop_assert!((grads.values[k][1] - g[1]).abs() <= 1e-12);
        }
    }
}

#[test]
fn space_dof_examples() {
    let m1 = mesh(unit_square(), 1, 1);
    assert_eq!(space(&m1, Degree::P2, 1, Constraint::Free).n_dofs(), 9);
    let m4 = mesh(unit_square(), 4, 4);
    assert_eq!(space(&m4, Degree::P1, 1, Constraint::Free).n_dofs(), 25);
    let m2 = mesh(unit_square(), 2, 2);
    let v = space(&m2, Degree::P2, 2, Constraint::Dirichlet);
    assert_eq!(v.constrained().iter().filter(|c| !**c).count(), 18);
}

#[test]
fn constant_and_linear_evaluation() {
    let m = mesh(unit_square(), 3, 3);
    let s = space(&m, Degree::P2, 1, Constraint::Free);
    let rule = QuadRule::new(5).unwrap();
    let c = s.interpolate_scalar(|_| 2.5);
    assert!(eval_scalar(&c, &rule).values.iter().all(|v| (v - 2.5).abs() < 1e-14));
    assert!(eval_gradient(&c, &rule).values.iter().all(|g| g[0].abs() < 1e-12 && g[1].abs() < 1e-12));
    let x = s.interpolate_scalar(|p| p[0]);
    assert!(eval_gradient(&x, &rule).values.iter().all(|g| (g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12));
    let x2 = s.interpolate_scalar(|p| p[0] * p[0]);
    let qd = QuadData::new(&m, rule.clone());
    for (g, p) in eval_gradient(&x2, &rule).values.iter().zip(&qd.points.values) {
        assert!((g[0] - 2.0 * p[0]).abs() < 1e-12);
    }
}

#[test]
fn projection_examples() {
    let m = mesh(unit_square(), 4, 4);
    let asm = assembler(&m, 5);
    let s = space(&m, Degree::P2, 1, Constraint::Free);
    let f = s.interpolate_scalar(|p| (3.0 * p[0]).sin() + p[1] * p[1]);
    let again = l2_project(&s, &asm, &eval_scalar(&f, &asm.quad.rule), 1e-13).unwrap();
    for (a, b) in again.coeffs.iter().zip(&f.coeffs) {
        assert!((a - b).abs() <= 1e-11);
    }
    let ones = l2_project(&s, &asm, &QuadField::constant(m.n_triangles(), asm.quad.n_qp(), 1.0), 1e-13).unwrap();
    assert!(ones.coeffs.iter().all(|c| (c - 1.0).abs() <= 1e-11));
}

#[test]
fn projection_contracts_on_trig_field() {
    let m = mesh(Rect::new(0.0, 2.0 * PI, 0.0, 2.0 * PI), 5, 5);
    let asm = assembler(&m, 5);
    let s = space(&m, Degree::P2, 1, Constraint::Free);
    let f = asm.quad.sample(|p| p[0].sin() * p[1].cos());
    let pf = l2_project(&s, &asm, &f, 1e-13).unwrap();
    let n_pf = asm.quad.norm_sq(&eval_scalar(&pf, &asm.quad.rule));
    assert!(n_pf <= asm.quad.norm_sq(&f));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn projection_is_idempotent_and_contracting(k in prop::array::uniform3(0.5f64..6.0), a in prop::array::uniform3(-2.0f64..2.0)) {
        let m = mesh(unit_square(), 4, 3);
        let asm = assembler(&m, 5);
        let s = space(&m, Degree::P2, 1, Constraint::Free);
        let f = asm.quad.sample(|p| a[0] * (k[0] * p[0]).sin() + a[1] * (k[1] * p[1]).cos() * p[0] + a[2] * (k[2] * (p[0] + p[1])).exp().sin());
        let pf = l2_project(&s, &asm, &f, 1e-13).unwrap();
        let pf_q = eval_scalar(&pf, &asm.quad.rule);
        let ppf = l2_project(&s, &asm, &pf_q, 1e-13).unwrap();
        let scale = pf.coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        for (x, y) in ppf.coeffs.iter().zip(&pf.coeffs) {
            prop_assert!((x - y).abs() <= 1e-10 * scale);
        }
        prop_assert!(asm.quad.norm_sq(&pf_q) <= asm.quad.norm_sq(&f) * (1.0 + 1e-12));
    }
}

#[test]
fn mean_zero_projection_removes_constants() {
    let m = mesh(unit_square(), 3, 3);
    let asm = assembler(&m, 5);
    let p = space(&m, Degree::P1, 1, Constraint::MeanZero);
    let f = asm.quad.sample(|x| 4.0 + x[0]);
    let ph = l2_project(&p, &asm, &f, 1e-13).unwrap();
    let ones = QuadField::constant(m.n_triangles(), asm.quad.n_qp(), 1.0);
    let w = asm.load_values(&p, &ones);
    let mean: f64 = w.iter().zip(&ph.coeffs).map(|(a, b)| a * b).sum();
    assert!(mean.abs() < 1e-12);
    let expected = FEFunction::from_coeffs(&p, p.node_coords().iter().map(|x| x[0] - 0.5).collect());
    for (a, b) in ph.coeffs.iter().zip(&expected.coeffs) {
        assert!((a - b).abs() < 1e-10);
    }
}
