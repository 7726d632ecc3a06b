//! Lagrange finite element spaces on a structured mesh.

pub mod basis;
pub mod projection;
pub mod quadrature;

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Pattern;
use crate::mesh::{side_bit, sides_of, Mesh};

pub use basis::Degree;
pub use projection::{l2_project, L2Projector};
pub use quadrature::QuadRule;

/// Boundary treatment built into a space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// No constraint (natural boundary conditions).
    Free,
    /// Every component vanishes on the boundary.
    Dirichlet,
    /// The normal component vanishes on the boundary (both components at corners).
    NormalZero,
    /// Zero-mean functions, enforced with a Lagrange multiplier by the solver.
    MeanZero,
}

#[derive(Debug)]
pub struct FESpace {
    pub mesh: Arc<Mesh>,
    pub degree: Degree,
    pub components: usize,
    pub constraint: Constraint,
    n_nodes: usize,
    elem_nodes: Vec<usize>,
    node_coords: Vec<[f64; 2]>,
    constrained: Vec<bool>,
    pattern: Pattern,
}

impl FESpace {
    pub fn new(mesh: Arc<Mesh>, degree: Degree, components: usize, constraint: Constraint) -> FESpace {
        let nv = mesh.n_vertices();
        let nloc = degree.n_local();
        let n_nodes = match degree {
            Degree::P1 => nv,
            Degree::P2 => nv + mesh.n_edges(),
        };
        let mut elem_nodes = Vec::with_capacity(mesh.n_triangles() * nloc);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            elem_nodes.extend_from_slice(tri);
            if degree == Degree::P2 {
                let te = mesh.triangle_edges[t];
                // local node 3 sits on edge (0,1), which is opposite vertex 2
                elem_nodes.push(nv + te[2]);
                elem_nodes.push(nv + te[0]);
                elem_nodes.push(nv + te[1]);
            }
        }
        let mut node_coords = mesh.vertices.clone();
        let mut node_sides = mesh.vertex_sides.clone();
        if degree == Degree::P2 {
            for e in &mesh.edges {
                let (a, b) = (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
                node_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                node_sides.push(match e.boundary {
                    Some(s) => side_bit(s),
                    None => 0,
                });
            }
        }
        let mut constrained = vec![false; components * n_nodes];
        for (node, &mask) in node_sides.iter().enumerate() {
            if mask == 0 {
                continue;
            }
            match constraint {
                Constraint::Dirichlet => {
                    for c in 0..components {
                        constrained[c * n_nodes + node] = true;
                    }
                }
                Constraint::NormalZero => {
                    for s in sides_of(mask) {
                        let c = s.normal_component().min(components - 1);
                        constrained[c * n_nodes + node] = true;
                    }
                }
                Constraint::Free | Constraint::MeanZero => {}
            }
        }
        let pattern = Pattern::from_elements(n_nodes, n_nodes, nloc, &elem_nodes, &elem_nodes);
        FESpace { mesh, degree, components, constraint, n_nodes, elem_nodes, node_coords, constrained, pattern }
    }

    /// Number of scalar nodes (dofs per component).
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.components * self.n_nodes
    }

    pub fn n_local(&self) -> usize {
        self.degree.n_local()
    }

    /// Global node indices of element `t`.
    #[inline]
    pub fn element_nodes(&self, t: usize) -> &[usize] {
        let n = self.n_local();
        &self.elem_nodes[t * n..(t + 1) * n]
    }

    pub fn element_node_table(&self) -> &[usize] {
        &self.elem_nodes
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.node_coords
    }

    /// `true` for each dof fixed to zero by the space's boundary constraint.
    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    /// Sparsity pattern of a scalar (single component) bilinear form on this space.
    pub fn node_pattern(&self) -> &Pattern {
        &self.pattern
    }

    /// Nodal interpolant of a scalar function, constraints applied.
    pub fn interpolate_scalar(self: &Arc<Self>, f: impl Fn([f64; 2]) -> f64) -> FEFunction {
        let mut coeffs: Vec<f64> = self.node_coords.iter().map(|&p| f(p)).collect();
        self.zero_constrained(&mut coeffs);
        FEFunction { space: self.clone(), coeffs }
    }

    /// Nodal interpolant of a vector function, constraints applied.
    pub fn interpolate_vector(self: &Arc<Self>, f: impl Fn([f64; 2]) -> [f64; 2]) -> FEFunction {
        let n = self.n_nodes;
        let mut coeffs = vec![0.0; self.n_dofs()];
        for (i, &p) in self.node_coords.iter().enumerate() {
            let v = f(p);
            for c in 0..self.components {
                coeffs[c * n + i] = v[c];
            }
        }
        self.zero_constrained(&mut coeffs);
        FEFunction { space: self.clone(), coeffs }
    }

    pub fn zero_constrained(&self, coeffs: &mut [f64]) {
        for (c, &fixed) in coeffs.iter_mut().zip(&self.constrained) {
            if fixed {
                *c = 0.0;
            }
        }
    }

    /// Basis values and reference gradients at the points of `rule`.
    pub fn tabulate(&self, rule: &QuadRule) -> Tabulation {
        let nloc = self.n_local();
        let mut values = vec![0.0; rule.len() * nloc];
        let mut grads = vec![[0.0; 2]; rule.len() * nloc];
        for (q, p) in rule.points.iter().enumerate() {
            basis::values(self.degree, p[0], p[1], &mut values[q * nloc..(q + 1) * nloc]);
            basis::gradients(self.degree, p[0], p[1], &mut grads[q * nloc..(q + 1) * nloc]);
        }
        Tabulation { n_qp: rule.len(), n_local: nloc, values, ref_grads: grads }
    }
}

/// Shape function values and reference gradients at every quadrature point.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub n_qp: usize,
    pub n_local: usize,
    pub values: Vec<f64>,
    pub ref_grads: Vec<[f64; 2]>,
}

impl Tabulation {
    #[inline]
    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_local..(q + 1) * self.n_local]
    }

    #[inline]
    pub fn grads_at(&self, q: usize) -> &[[f64; 2]] {
        &self.ref_grads[q * self.n_local..(q + 1) * self.n_local]
    }
}

/// Coefficient vector tied to its space. Vector fields store components blockwise.
#[derive(Debug, Clone)]
pub struct FEFunction {
    pub space: Arc<FESpace>,
    pub coeffs: Vec<f64>,
}

impl FEFunction {
    pub fn zeros(space: &Arc<FESpace>) -> FEFunction {
        FEFunction { space: space.clone(), coeffs: vec![0.0; space.n_dofs()] }
    }

    pub fn from_coeffs(space: &Arc<FESpace>, coeffs: Vec<f64>) -> FEFunction {
        assert_eq!(coeffs.len(), space.n_dofs(), "coefficient length does not match the space");
        FEFunction { space: space.clone(), coeffs }
    }

    /// Coefficients of component `c`.
    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.space.n_nodes();
        &self.coeffs[c * n..(c + 1) * n]
    }

    /// `a * self + b * other`, both on the same space.
    pub fn lin_comb(&self, a: f64, other: &FEFunction, b: f64) -> FEFunction {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect();
        FEFunction { space: self.space.clone(), coeffs }
    }
}

/// Samples at every quadrature point of every element, element-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadField<T> {
    pub n_qp: usize,
    pub values: Vec<T>,
}

pub type VectorQuadField = QuadField<[f64; 2]>;

impl<T: Copy> QuadField<T> {
    pub fn constant(n_elems: usize, n_qp: usize, v: T) -> Self {
        QuadField { n_qp, values: vec![v; n_elems * n_qp] }
    }

    #[inline]
    pub fn at(&self, t: usize, q: usize) -> T {
        self.values[t * self.n_qp + q]
    }

    pub fn element(&self, t: usize) -> &[T] {
        &self.values[t * self.n_qp..(t + 1) * self.n_qp]
    }

    pub fn map<S>(&self, f: impl Fn(T) -> S) -> QuadField<S> {
        QuadField { n_qp: self.n_qp, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map<U: Copy, S>(&self, other: &QuadField<U>, f: impl Fn(T, U) -> S) -> QuadField<S> {
        debug_assert_eq!(self.values.len(), other.values.len());
        QuadField { n_qp: self.n_qp, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }
}

/// Physical quadrature points and weights (`w_q * |det J|`) on a mesh.
#[derive(Debug, Clone)]
pub struct QuadData {
    pub rule: QuadRule,
    pub points: QuadField<[f64; 2]>,
    pub weights: QuadField<f64>,
}

impl QuadData {
    pub fn new(mesh: &Mesh, rule: QuadRule) -> QuadData {
        let nq = rule.len();
        let mut points = Vec::with_capacity(mesh.n_triangles() * nq);
        let mut weights = Vec::with_capacity(mesh.n_triangles() * nq);
        for t in 0..mesh.n_triangles() {
            let g = mesh.geometry(t);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                points.push(g.map(p[0], p[1]));
                weights.push(w * g.det);
            }
        }
        QuadData { rule, points: QuadField { n_qp: nq, values: points }, weights: QuadField { n_qp: nq, values: weights } }
    }

    pub fn n_qp(&self) -> usize {
        self.rule.len()
    }

    /// Samples a function at every quadrature point.
    pub fn sample<T>(&self, f: impl Fn([f64; 2]) -> T) -> QuadField<T> {
        QuadField { n_qp: self.n_qp(), values: self.points.values.iter().map(|&p| f(p)).collect() }
    }

    /// `int f dx` for a sampled scalar field.
    pub fn integrate(&self, f: &QuadField<f64>) -> f64 {
        self.weights.values.iter().zip(&f.values).map(|(w, v)| w * v).sum()
    }

    /// Squared L2 norm of a sampled scalar field.
    pub fn norm_sq(&self, f: &QuadField<f64>) -> f64 {
        self.weights.values.iter().zip(&f.values).map(|(w, v)| w * v * v).sum()
    }

    /// Squared L2 norm of a sampled vector field.
    pub fn norm_sq_vec(&self, f: &QuadField<[f64; 2]>) -> f64 {
        self.weights.values.iter().zip(&f.values).map(|(w, v)| w * (v[0] * v[0] + v[1] * v[1])).sum()
    }

    /// Squared L2 norm of a sampled tensor field.
    pub fn norm_sq_tensor(&self, f: &QuadField<[[f64; 2]; 2]>) -> f64 {
        self.weights
            .values
            .iter()
            .zip(&f.values)
            .map(|(w, g)| w * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]))
            .sum()
    }
}

/// Values of a scalar finite element function at the quadrature points of `rule`.
pub fn eval_scalar(f: &FEFunction, rule: &QuadRule) -> QuadField<f64> {
    let space = &f.space;
    let tab = space.tabulate(rule);
    let mut out = Vec::with_capacity(space.mesh.n_triangles() * rule.len());
    for t in 0..space.mesh.n_triangles() {
        let nodes = space.element_nodes(t);
        for q in 0..rule.len() {
            let phi = tab.values_at(q);
            out.push(nodes.iter().zip(phi).map(|(&n, b)| f.coeffs[n] * b).sum());
        }
    }
    QuadField { n_qp: rule.len(), values: out }
}

/// Gradients of a scalar finite element function at the quadrature points of `rule`.
pub fn eval_gradient(f: &FEFunction, rule: &QuadRule) -> QuadField<[f64; 2]> {
    let space = &f.space;
    let tab = space.tabulate(rule);
    let mut out = Vec::with_capacity(space.mesh.n_triangles() * rule.len());
    for t in 0..space.mesh.n_triangles() {
        let g = space.mesh.geometry(t);
        let nodes = space.element_nodes(t);
        for q in 0..rule.len() {
            let mut r = [0.0; 2];
            for (&n, dg) in nodes.iter().zip(tab.grads_at(q)) {
                r[0] += f.coeffs[n] * dg[0];
                r[1] += f.coeffs[n] * dg[1];
            }
            out.push(g.grad(r));
        }
    }
    QuadField { n_qp: rule.len(), values: out }
}

/// Values of a two-component finite element function at the quadrature points.
pub fn eval_vector(f: &FEFunction, rule: &QuadRule) -> QuadField<[f64; 2]> {
    let space = &f.space;
    let nn = space.n_nodes();
    let tab = space.tabulate(rule);
    let mut out = Vec::with_capacity(space.mesh.n_triangles() * rule.len());
    for t in 0..space.mesh.n_triangles() {
        let nodes = space.element_nodes(t);
        for q in 0..rule.len() {
            let mut v = [0.0; 2];
            for (&n, b) in nodes.iter().zip(tab.values_at(q)) {
                v[0] += f.coeffs[n] * b;
                v[1] += f.coeffs[nn + n] * b;
            }
            out.push(v);
        }
    }
    QuadField { n_qp: rule.len(), values: out }
}

/// Jacobians `g[c][d] = d u_c / d x_d` of a two-component function at the quadrature points.
pub fn eval_vector_gradient(f: &FEFunction, rule: &QuadRule) -> QuadField<[[f64; 2]; 2]> {
    let space = &f.space;
    let nn = space.n_nodes();
    let tab = space.tabulate(rule);
    let mut out = Vec::with_capacity(space.mesh.n_triangles() * rule.len());
    for t in 0..space.mesh.n_triangles() {
        let g = space.mesh.geometry(t);
        let nodes = space.element_nodes(t);
        for q in 0..rule.len() {
            let mut r = [[0.0; 2]; 2];
            for (&n, dg) in nodes.iter().zip(tab.grads_at(q)) {
                for c in 0..2 {
                    let a = f.coeffs[c * nn + n];
                    r[c][0] += a * dg[0];
                    r[c][1] += a * dg[1];
                }
            }
            out.push([g.grad(r[0]), g.grad(r[1])]);
        }
    }
    QuadField { n_qp: rule.len(), values: out }
}

/// Pointwise evaluation of a scalar function at physical point `p` (linear search).
pub fn eval_at_point(f: &FEFunction, p: [f64; 2]) -> Option<f64> {
    let space = &f.space;
    let mesh = &space.mesh;
    let mut vals = [0.0; 6];
    for t in 0..mesh.n_triangles() {
        let g = mesh.geometry(t);
        let d = [p[0] - g.origin[0], p[1] - g.origin[1]];
        // reference coordinates: J^{-1} d = (inv_t)^T d
        let xi = g.inv_t[0][0] * d[0] + g.inv_t[1][0] * d[1];
        let eta = g.inv_t[0][1] * d[0] + g.inv_t[1][1] * d[1];
        let tol = 1e-12;
        if xi >= -tol && eta >= -tol && xi + eta <= 1.0 + tol {
            basis::values(space.degree, xi, eta, &mut vals);
            let nodes = space.element_nodes(t);
            return Some(nodes.iter().zip(&vals).map(|(&n, b)| f.coeffs[n] * b).sum());
        }
    }
    None
}
