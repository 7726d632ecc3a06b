use chns_core::diagnostics::HistoryRow;
use chns_core::ieq::Mode;
use chns_core::mesh::{Mesh, Rect};
use chns_ieq::history::{read_history, write_history};
use chns_ieq::vtk::{write_vtk, VertexFields, VTK_TRIANGLE};
use proptest::prelude::*;

fn csv(rows: &[HistoryRow]) -> String {
    let mut buf = Vec::new();
    write_history(&mut buf, rows).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn empty_history_is_header_only() {
    assert_eq!(
        csv(&[]),
        "step,time,energy,raw_energy,original_energy,mass,div_residual,identity_residual,mode\n"
    );
}

fn arb_mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::C), Just(Mode::P), Just(Mode::CpBeforeSwitch), Just(Mode::CpAfterSwitch)]
}

fn arb_row() -> impl Strategy<Value = HistoryRow> {
    (0usize..100_000, proptest::array::uniform7(proptest::num::f64::NORMAL | proptest::num::f64::ZERO), arb_mode())
        .prop_map(|(step, v, mode)| HistoryRow {
            step,
            time: v[0],
            energy: v[1],
            raw_energy: v[2],
            original_energy: v[3],
            mass: v[4],
            div_residual: v[5],
            identity_residual: v[6],
            mode,
        })
}

proptest! {
    #[test]
    fn history_round_trips_bit_for_bit(rows in proptest::collection::vec(arb_row(), 0..20)) {
        let text = csv(&rows);
        prop_assert!(!text.contains('\r'));
        let back = read_history(&text).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            for (x, y) in [(a.time, b.time), (a.energy, b.energy), (a.raw_energy, b.raw_energy),
                (a.original_energy, b.original_energy), (a.mass, b.mass), (a.div_residual, b.div_residual),
                (a.identity_residual, b.identity_residual)] {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            prop_assert_eq!(a.step, b.step);
            prop_assert_eq!(a.mode, b.mode);
        }
    }
}

#[test]
fn nan_identity_residual_survives() {
    let row = HistoryRow {
        step: 3,
        time: 0.1,
        energy: 1.0,
        raw_energy: 2.0,
        original_energy: 3.0,
        mass: -0.0,
        div_residual: 1e-300,
        identity_residual: f64::NAN,
        mode: Mode::P,
    };
    let back = read_history(&csv(&[row])).unwrap();
    assert!(back[0].identity_residual.is_nan());
    assert_eq!(back[0].mass.to_bits(), (-0.0f64).to_bits());
}

#[test]
fn malformed_history_is_rejected_with_its_line() {
    let text = format!("{}1,2,3\n", csv(&[]));
    assert_eq!(read_history(&text).unwrap_err().line, 2);
    assert!(read_history("nonsense\n").is_err());
}

fn vtk_text(mesh: &Mesh, fields: &VertexFields) -> String {
    let mut buf = Vec::new();
    write_vtk(&mut buf, mesh, fields, "test").unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn two_triangle_vtk() {
    let mesh = Mesh::structured_rect(Rect::new(0.0, 1.0, 0.0, 1.0), 1, 1).unwrap();
    let mut fields = VertexFields::zeros(4);
    fields.phi = vec![1.0, -1.0, 0.5, 0.25];
    fields.u[2] = [3.0, -4.0];
    let text = vtk_text(&mesh, &fields);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[2], "ASCII");
    assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
    assert_eq!(lines[4], "POINTS 4 double");
    let cells = lines.iter().position(|l| *l == "CELLS 2 8").unwrap();
    assert_eq!(&lines[cells + 1..cells + 3], &["3 0 1 3", "3 0 3 2"]);
    let types = lines.iter().position(|l| *l == "CELL_TYPES 2").unwrap();
    assert!(lines[types + 1..types + 3].iter().all(|l| *l == VTK_TRIANGLE.to_string()));
    assert_eq!(VTK_TRIANGLE, 5);
    assert!(text.contains("POINT_DATA 4\nSCALARS phi double 1\nLOOKUP_TABLE default\n1.0000000000000000e0\n"));
    for name in ["SCALARS w double 1", "SCALARS p double 1", "VECTORS u double"] {
        assert!(lines.contains(&name), "{name}");
    }
    let vectors = lines.iter().position(|l| *l == "VECTORS u double").unwrap();
    assert_eq!(lines[vectors + 3], "3.0000000000000000e0 -4.0000000000000000e0 0");
    assert_eq!(lines.len(), vectors + 5);
}

#[test]
fn vtk_output_is_deterministic() {
    let mesh = Mesh::structured_rect(Rect::new(-1.0, 1.0, 0.0, 0.5), 5, 3).unwrap();
    let n = mesh.n_vertices();
    let mut fields = VertexFields::zeros(n);
    fields.phi = mesh.vertices.iter().map(|p| (3.0 * p[0]).sin() * p[1]).collect();
    assert_eq!(vtk_text(&mesh, &fields), vtk_text(&mesh, &fields));
    let text = vtk_text(&mesh, &fields);
    assert!(text.contains(&format!("POINTS {n} double")));
    assert!(text.contains(&format!("CELLS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())));
}
