//! Legacy ASCII VTK snapshots at vertex resolution.

use std::io::{self, Write};

use chns_core::mesh::Mesh;
use chns_core::stepper::State;

/// VTK cell type of a linear triangle.
pub const VTK_TRIANGLE: u8 = 5;

/// Field values at the mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFields {
    pub phi: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub u: Vec<[f64; 2]>,
}

impl VertexFields {
    /// Vertex values of a state; vertices are the leading nodes of every space.
    pub fn from_state(s: &State) -> VertexFields {
        let nv = s.phi.space.mesh.n_vertices();
        let (ux, uy) = (s.u.component(0), s.u.component(1));
        VertexFields {
            phi: s.phi.coeffs[..nv].to_vec(),
            w: s.w.coeffs[..nv].to_vec(),
            p: s.p.coeffs[..nv].to_vec(),
            u: (0..nv).map(|i| [ux[i], uy[i]]).collect(),
        }
    }

    pub fn zeros(n: usize) -> VertexFields {
        VertexFields { phi: vec![0.0; n], w: vec![0.0; n], p: vec![0.0; n], u: vec![[0.0; 2]; n] }
    }
}

pub fn write_vtk(w: &mut impl Write, mesh: &Mesh, fields: &VertexFields, title: &str) -> io::Result<()> {
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for p in &mesh.vertices {
        writeln!(w, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    writeln!(w, "POINT_DATA {nv}")?;
    for (name, values) in [("phi", &fields.phi), ("w", &fields.w), ("p", &fields.p)] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{v:.16e}")?;
        }
    }
    writeln!(w, "VECTORS u double")?;
    for v in &fields.u {
        writeln!(w, "{:.16e} {:.16e} 0", v[0], v[1])?;
    }
    Ok(())
}
