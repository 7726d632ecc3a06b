//! Structured triangulations of rectangles.
//!
//! Each grid cell is split by its lower-left to upper-right diagonal, giving
//! `2 * nx * ny` counter-clockwise triangles.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect { x_min, x_max, y_min, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Which side of the rectangle a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundarySide {
    Bottom,
    Right,
    Top,
    Left,
}

impl BoundarySide {
    /// Index of the velocity component normal to this side.
    pub fn normal_component(self) -> usize {
        match self {
            BoundarySide::Left | BoundarySide::Right => 0,
            BoundarySide::Bottom | BoundarySide::Top => 1,
        }
    }

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            BoundarySide::Bottom => [0.0, -1.0],
            BoundarySide::Right => [1.0, 0.0],
            BoundarySide::Top => [0.0, 1.0],
            BoundarySide::Left => [-1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Endpoints with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    pub boundary: Option<BoundarySide>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// `triangle_edges[t][k]` is the edge opposite local vertex `k`.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Bit `s` set when the vertex lies on side `s` (Bottom, Right, Top, Left).
    pub vertex_sides: Vec<u8>,
}

/// Bit used for `s` in vertex side masks.
pub fn side_bit(s: BoundarySide) -> u8 {
    match s {
        BoundarySide::Bottom => 1,
        BoundarySide::Right => 2,
        BoundarySide::Top => 4,
        BoundarySide::Left => 8,
    }
}

/// Sides encoded in a vertex side mask.
pub fn sides_of(mask: u8) -> impl Iterator<Item = BoundarySide> {
    [BoundarySide::Bottom, BoundarySide::Right, BoundarySide::Top, BoundarySide::Left]
        .into_iter()
        .filter(move |s| mask & side_bit(*s) != 0)
}

impl Mesh {
    /// Uniform `nx x ny` grid on `domain`, each cell cut along its main diagonal.
    pub fn structured_rect(domain: Rect, nx: usize, ny: usize) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh(format!("grid must have at least one cell, got {nx}x{ny}")));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "degenerate domain [{}, {}] x [{}, {}]",
                domain.x_min, domain.x_max, domain.y_min, domain.y_max
            )));
        }
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut vertex_sides = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // pin the last row/column to the exact domain bounds
                let x = if i == nx { domain.x_max } else { domain.x_min + i as f64 * hx };
                let y = if j == ny { domain.y_max } else { domain.y_min + j as f64 * hy };
                vertices.push([x, y]);
                let mut mask = 0u8;
                if j == 0 {
                    mask |= side_bit(BoundarySide::Bottom);
                }
                if i == nx {
                    mask |= side_bit(BoundarySide::Right);
                }
                if j == ny {
                    mask |= side_bit(BoundarySide::Top);
                }
                if i == 0 {
                    mask |= side_bit(BoundarySide::Left);
                }
                vertex_sides.push(mask);
            }
        }

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let v00 = vid(i, j);
                let v10 = vid(i + 1, j);
                let v01 = vid(i, j + 1);
                let v11 = vid(i + 1, j + 1);
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        // Collect (a, b, triangle, local) for every triangle edge and merge duplicates.
        let mut half: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(6 * nx * ny);
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                half.push((a.min(b), a.max(b), t, k));
            }
        }
        half.sort_unstable();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = alloc::vec![[usize::MAX; 3]; triangles.len()];
        let mut idx = 0;
        while idx < half.len() {
            let (a, b, _, _) = half[idx];
            let e = edges.len();
            let mut count = 0;
            while idx < half.len() && half[idx].0 == a && half[idx].1 == b {
                triangle_edges[half[idx].2][half[idx].3] = e;
                count += 1;
                idx += 1;
            }
            let boundary = if count == 1 {
                let common = vertex_sides[a] & vertex_sides[b];
                sides_of(common).next()
            } else {
                None
            };
            edges.push(Edge { vertices: [a, b], boundary });
        }

        let mesh = Mesh { domain, nx, ny, vertices, triangles, edges, triangle_edges, vertex_sides };
        for t in 0..mesh.triangles.len() {
            if mesh.signed_area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate or clockwise")));
            }
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        let hx = self.domain.width() / self.nx as f64;
        let hy = self.domain.height() / self.ny as f64;
        crate::math::sqrt(hx * hx + hy * hy)
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Affine map data of triangle `t`: the inverse-transpose Jacobian and `|det J|`.
    pub fn geometry(&self, t: usize) -> ElementGeometry {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let j = [[pb[0] - pa[0], pc[0] - pa[0]], [pb[1] - pa[1], pc[1] - pa[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // (J^{-1})^T
        let inv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        ElementGeometry { origin: pa, jac: j, inv_t, det: det.abs() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub inv_t: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementGeometry {
    /// Physical point of reference coordinates `(xi, eta)`.
    #[inline]
    pub fn map(&self, xi: f64, eta: f64) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi + self.jac[0][1] * eta,
            self.origin[1] + self.jac[1][0] * xi + self.jac[1][1] * eta,
        ]
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_structured_formulas() {
        for (nx, ny) in [(1, 1), (4, 4), (10, 4), (7, 3)] {
            let m = Mesh::structured_rect(Rect::new(0.0, 1.0, 0.0, 2.0), nx, ny).unwrap();
            assert_eq!(m.n_vertices(), (nx + 1) * (ny + 1));
            assert_eq!(m.n_triangles(), 2 * nx * ny);
            assert_eq!(m.n_edges(), 3 * nx * ny + nx + ny);
            let nb = m.edges.iter().filter(|e| e.boundary.is_some()).count();
            assert_eq!(nb, 2 * (nx + ny));
        }
    }

    #[test]
    fn areas_sum_to_domain() {
        let d = Rect::new(-0.5, 0.5, -0.2, 0.2);
        let m = Mesh::structured_rect(d, 10, 4).unwrap();
        let total: f64 = (0..m.n_triangles()).map(|t| m.signed_area(t)).sum();
        assert!((total - d.area()).abs() < 1e-14);
    }

    #[test]
    fn boundary_edges_are_tagged_with_their_side() {
        let d = Rect::new(0.0, 1.0, 0.0, 1.0);
        let m = Mesh::structured_rect(d, 3, 3).unwrap();
        for e in &m.edges {
            let [a, b] = e.vertices;
            let (pa, pb) = (m.vertices[a], m.vertices[b]);
            match e.boundary {
                Some(BoundarySide::Bottom) => assert!(pa[1] == 0.0 && pb[1] == 0.0),
                Some(BoundarySide::Top) => assert!(pa[1] == 1.0 && pb[1] == 1.0),
                Some(BoundarySide::Left) => assert!(pa[0] == 0.0 && pb[0] == 0.0),
                Some(BoundarySide::Right) => assert!(pa[0] == 1.0 && pb[0] == 1.0),
                None => {}
            }
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(Mesh::structured_rect(Rect::new(0.0, 1.0, 0.0, 1.0), 0, 3).is_err());
        assert!(Mesh::structured_rect(Rect::new(1.0, 1.0, 0.0, 1.0), 2, 3).is_err());
    }
}
