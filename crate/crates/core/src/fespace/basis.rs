//! Lagrange shape functions on the reference triangle.
//!
//! Local numbering: vertices 0, 1, 2, then for P2 the midpoints of edges
//! (0,1), (1,2), (2,0) as local nodes 3, 4, 5.

/// Polynomial degree of a Lagrange element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn n_local(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }
}

const GRAD_BARY: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Reference coordinates of the local nodes.
pub fn local_nodes(degree: Degree) -> &'static [[f64; 2]] {
    const NODES: [[f64; 2]; 6] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
    &NODES[..degree.n_local()]
}

/// Values of all local shape functions at `(xi, eta)`.
pub fn values(degree: Degree, xi: f64, eta: f64, out: &mut [f64]) {
    let l = [1.0 - xi - eta, xi, eta];
    match degree {
        Degree::P1 => out[..3].copy_from_slice(&l),
        Degree::P2 => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
            }
            out[3] = 4.0 * l[0] * l[1];
            out[4] = 4.0 * l[1] * l[2];
            out[5] = 4.0 * l[2] * l[0];
        }
    }
}

/// Reference gradients of all local shape functions at `(xi, eta)`.
pub fn gradients(degree: Degree, xi: f64, eta: f64, out: &mut [[f64; 2]]) {
    let l = [1.0 - xi - eta, xi, eta];
    let g = GRAD_BARY;
    match degree {
        Degree::P1 => out[..3].copy_from_slice(&g),
        Degree::P2 => {
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                out[i] = [s * g[i][0], s * g[i][1]];
            }
            for (k, (a, b)) in [(0usize, 1usize), (1, 2), (2, 0)].into_iter().enumerate() {
                out[3 + k] = [
                    4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
                    4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
                ];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_delta_property() {
        for deg in [Degree::P1, Degree::P2] {
            let n = deg.n_local();
            let mut v = [0.0; 6];
            for (j, p) in local_nodes(deg).iter().enumerate() {
                values(deg, p[0], p[1], &mut v);
                for i in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v[i] - expect).abs() < 1e-15, "{deg:?} basis {i} at node {j}");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        for deg in [Degree::P1, Degree::P2] {
            let (x, y) = (0.21, 0.37);
            let mut g = [[0.0; 2]; 6];
            gradients(deg, x, y, &mut g);
            let (mut a, mut b) = ([0.0; 6], [0.0; 6]);
            for d in 0..2 {
                let (dx, dy) = if d == 0 { (h, 0.0) } else { (0.0, h) };
                values(deg, x + dx, y + dy, &mut a);
                values(deg, x - dx, y - dy, &mut b);
                for i in 0..deg.n_local() {
                    let fd = (a[i] - b[i]) / (2.0 * h);
                    assert!((fd - g[i][d]).abs() < 1e-8);
                }
            }
        }
    }
}
