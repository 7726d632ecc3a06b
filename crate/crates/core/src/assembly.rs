//! Element loops producing sparse matrices and load vectors.
//!
//! Forms are assembled per scalar component on the node pattern of a space;
//! vector spaces reuse the scalar blocks through [`block_diag`].

use alloc::vec;
use alloc::vec::Vec;

use crate::fespace::{FESpace, QuadData, QuadField, Tabulation};
use crate::linalg::{assemble_block, Pattern, SparseMatrix};
use crate::mesh::ElementGeometry;

/// Quadrature data plus a cap on worker threads for element loops.
#[derive(Debug, Clone)]
pub struct Assembler {
    pub quad: QuadData,
    /// Worker threads used by element loops (1 = serial). Ignored without `std`.
    pub threads: usize,
}

impl Assembler {
    pub fn new(quad: QuadData, threads: usize) -> Assembler {
        Assembler { quad, threads: threads.max(1) }
    }

    fn n_qp(&self) -> usize {
        self.quad.n_qp()
    }

    /// Runs `kernel` on every element and scatters local matrices into `pattern`.
    fn assemble_on<K>(&self, pattern: &Pattern, rows: &FESpace, cols: &FESpace, kernel: K) -> SparseMatrix
    where
        K: Fn(usize, &ElementGeometry, &mut [f64]) + Sync,
    {
        let n_el = rows.mesh.n_triangles();
        let (nr, nc) = (rows.n_local(), cols.n_local());
        let per = nr * nc;
        // element matrices and their slots are computed in parallel; the scatter is serial
        // and in element order, so the result does not depend on the thread count
        let run = |range: core::ops::Range<usize>| {
            let mut out = Vec::with_capacity(range.len() * per);
            let mut local = vec![0.0; per];
            for t in range {
                local.iter_mut().for_each(|v| *v = 0.0);
                let g = rows.mesh.geometry(t);
                kernel(t, &g, &mut local);
                let rn = rows.element_nodes(t);
                let cn = cols.element_nodes(t);
                for (i, &r) in rn.iter().enumerate() {
                    for (j, &c) in cn.iter().enumerate() {
                        let k = pattern.find(r, c).expect("element coupling missing from pattern");
                        out.push((k, local[i * nc + j]));
                    }
                }
            }
            out
        };
        let mut values = vec![0.0; pattern.nnz()];
        for part in chunked(n_el, self.threads, run) {
            for (k, v) in part {
                values[k] += v;
            }
        }
        SparseMatrix {
            nrows: pattern.nrows,
            ncols: pattern.ncols,
            row_ptr: pattern.row_ptr.clone(),
            cols: pattern.cols.clone(),
            values,
        }
    }

    fn scalar_form<K>(&self, space: &FESpace, kernel: K) -> SparseMatrix
    where
        K: Fn(usize, &ElementGeometry, &Tabulation, &mut [f64]) + Sync,
    {
        let tab = space.tabulate(&self.quad.rule);
        self.assemble_on(space.node_pattern(), space, space, |t, g, local| kernel(t, g, &tab, local))
    }

    /// `(N_j, N_i)` on one component.
    pub fn mass_matrix(&self, space: &FESpace) -> SparseMatrix {
        self.weighted_mass_opt(space, None)
    }

    /// `(c N_j, N_i)` on one component.
    pub fn weighted_mass(&self, space: &FESpace, c: &QuadField<f64>) -> SparseMatrix {
        self.weighted_mass_opt(space, Some(c))
    }

    fn weighted_mass_opt(&self, space: &FESpace, c: Option<&QuadField<f64>>) -> SparseMatrix {
        let nq = self.n_qp();
        let n = space.n_local();
        self.scalar_form(space, |t, g, tab, local| {
            for q in 0..nq {
                let mut w = self.quad.rule.weights[q] * g.det;
                if let Some(c) = c {
                    w *= c.at(t, q);
                }
                let v = tab.values_at(q);
                for i in 0..n {
                    let wi = w * v[i];
                    for j in 0..n {
                        local[i * n + j] += wi * v[j];
                    }
                }
            }
        })
    }

    /// `(c grad N_j, grad N_i)` on one component; `c = 1` when `None`.
    pub fn stiffness_matrix(&self, space: &FESpace, c: Option<&QuadField<f64>>) -> SparseMatrix {
        let nq = self.n_qp();
        let n = space.n_local();
        self.scalar_form(space, |t, g, tab, local| {
            let mut dg = [[0.0; 2]; 6];
            for q in 0..nq {
                let mut w = self.quad.rule.weights[q] * g.det;
                if let Some(c) = c {
                    w *= c.at(t, q);
                }
                for (d, r) in dg.iter_mut().zip(tab.grads_at(q)) {
                    *d = g.grad(*r);
                }
                for i in 0..n {
                    for j in 0..n {
                        local[i * n + j] += w * (dg[i][0] * dg[j][0] + dg[i][1] * dg[j][1]);
                    }
                }
            }
        })
    }

    /// Skew-symmetric convection `((a . grad) N_j, N_i) + 1/2 ((div a) N_j, N_i)` on one component.
    pub fn convection_matrix(&self, space: &FESpace, a: &QuadField<[f64; 2]>, div_a: &QuadField<f64>) -> SparseMatrix {
        let nq = self.n_qp();
        let n = space.n_local();
        self.scalar_form(space, |t, g, tab, local| {
            let mut dg = [[0.0; 2]; 6];
            for q in 0..nq {
                let w = self.quad.rule.weights[q] * g.det;
                let av = a.at(t, q);
                let hd = 0.5 * div_a.at(t, q);
                for (d, r) in dg.iter_mut().zip(tab.grads_at(q)) {
                    *d = g.grad(*r);
                }
                let v = tab.values_at(q);
                for i in 0..n {
                    for j in 0..n {
                        let adv = av[0] * dg[j][0] + av[1] * dg[j][1];
                        local[i * n + j] += w * (adv + hd * v[j]) * v[i];
                    }
                }
            }
        })
    }

    /// `(c d_dir N_j, N_i)` on one component.
    pub fn directional_matrix(&self, space: &FESpace, c: &QuadField<f64>, dir: usize) -> SparseMatrix {
        let nq = self.n_qp();
        let n = space.n_local();
        self.scalar_form(space, |t, g, tab, local| {
            for q in 0..nq {
                let w = self.quad.rule.weights[q] * g.det * c.at(t, q);
                let v = tab.values_at(q);
                let rg = tab.grads_at(q);
                for j in 0..n {
                    let dj = g.grad(rg[j])[dir];
                    for i in 0..n {
                        local[i * n + j] += w * dj * v[i];
                    }
                }
            }
        })
    }

    /// `-(div v, q)` with rows on the scalar `pressure` space and columns on the
    /// two-component `velocity` space (blockwise component layout).
    pub fn divergence_matrix(&self, velocity: &FESpace, pressure: &FESpace) -> SparseMatrix {
        let nq = self.n_qp();
        let tv = velocity.tabulate(&self.quad.rule);
        let tp = pressure.tabulate(&self.quad.rule);
        let pattern = Pattern::from_elements(
            pressure.n_nodes(),
            velocity.n_nodes(),
            pressure.n_local(),
            pressure.element_node_table(),
            velocity.element_node_table(),
        );
        let (np, nv) = (pressure.n_local(), velocity.n_local());
        let parts: Vec<SparseMatrix> = (0..2)
            .map(|dir| {
                self.assemble_on(&pattern, pressure, velocity, |_, g, local| {
                    for q in 0..nq {
                        let w = self.quad.rule.weights[q] * g.det;
                        let pv = tp.values_at(q);
                        let rg = tv.grads_at(q);
                        for j in 0..nv {
                            let dj = g.grad(rg[j])[dir];
                            for i in 0..np {
                                local[i * nv + j] -= w * dj * pv[i];
                            }
                        }
                    }
                })
            })
            .collect();
        assemble_block(&[vec![Some(&parts[0]), Some(&parts[1])]], &[pressure.n_nodes()], &[velocity.n_nodes(); 2], None)
    }

    /// `(f, N_i)` on one component.
    pub fn load_values(&self, space: &FESpace, f: &QuadField<f64>) -> Vec<f64> {
        let tab = space.tabulate(&self.quad.rule);
        let nq = self.n_qp();
        let mut out = vec![0.0; space.n_nodes()];
        for t in 0..space.mesh.n_triangles() {
            let nodes = space.element_nodes(t);
            let fw = f.element(t);
            let ww = self.quad.weights.element(t);
            for q in 0..nq {
                let s = ww[q] * fw[q];
                for (&n, b) in nodes.iter().zip(tab.values_at(q)) {
                    out[n] += s * b;
                }
            }
        }
        out
    }

    /// `(F, grad N_i)` on one component.
    pub fn load_gradients(&self, space: &FESpace, f: &QuadField<[f64; 2]>) -> Vec<f64> {
        let tab = space.tabulate(&self.quad.rule);
        let nq = self.n_qp();
        let mut out = vec![0.0; space.n_nodes()];
        for t in 0..space.mesh.n_triangles() {
            let g = space.mesh.geometry(t);
            let nodes = space.element_nodes(t);
            let ww = self.quad.weights.element(t);
            for q in 0..nq {
                let fv = f.at(t, q);
                for (&n, r) in nodes.iter().zip(tab.grads_at(q)) {
                    let d = g.grad(*r);
                    out[n] += ww[q] * (fv[0] * d[0] + fv[1] * d[1]);
                }
            }
        }
        out
    }

    /// `(F, v)` for a two-component test space, components blockwise.
    pub fn load_vector(&self, space: &FESpace, f: &QuadField<[f64; 2]>) -> Vec<f64> {
        let mut out = self.load_values(space, &f.map(|v| v[0]));
        out.extend(self.load_values(space, &f.map(|v| v[1])));
        out
    }
}

/// `diag(m, m)` for two-component spaces.
pub fn block_diag(m: &SparseMatrix) -> SparseMatrix {
    assemble_block(&[vec![Some(m), None], vec![None, Some(m)]], &[m.nrows; 2], &[m.ncols; 2], None)
}

/// Runs `f` over contiguous chunks of `0..n`, returning the outputs in chunk order.
fn chunked<F, T>(n: usize, threads: usize, f: F) -> Vec<T>
where
    F: Fn(core::ops::Range<usize>) -> T + Sync,
    T: Send,
{
    #[cfg(feature = "std")]
    if threads > 1 && n >= 2 * threads {
        let size = n.div_ceil(threads);
        return std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|k| {
                    let f = &f;
                    let r = (k * size).min(n)..((k + 1) * size).min(n);
                    s.spawn(move || f(r))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("assembly worker panicked")).collect()
        });
    }
    #[cfg(not(feature = "std"))]
    let _ = threads;
    vec![f(0..n)]
}
