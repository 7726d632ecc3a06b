//! L2 projection of quadrature samples onto a finite element space.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{FEFunction, FESpace, QuadField};
use crate::assembly::{block_diag, Assembler};
use crate::error::Result;
use crate::fespace::Constraint;
use crate::linalg::{Factorization, MatrixKind};

/// Factorized mass matrix of a space, reused for every projection.
pub struct L2Projector {
    space: Arc<FESpace>,
    factor: Factorization,
    tol: f64,
}

impl L2Projector {
    pub fn new(space: &Arc<FESpace>, asm: &Assembler, tol: f64) -> Result<L2Projector> {
        let m = asm.mass_matrix(space);
        let m = if space.components == 2 { block_diag(&m) } else { m };
        let m = m.with_dirichlet(space.constrained());
        Ok(L2Projector { space: space.clone(), factor: Factorization::new(&m, MatrixKind::Spd)?, tol })
    }

    pub fn space(&self) -> &Arc<FESpace> {
        &self.space
    }

    /// Solves `M x = b` on the unconstrained dofs; constrained entries of `b` are ignored.
    pub fn solve_mass(&self, mut b: Vec<f64>) -> Result<Vec<f64>> {
        self.space.zero_constrained(&mut b);
        Ok(self.factor.solve(&b, self.tol)?.0)
    }

    /// Projection of a scalar field sampled at the assembler's quadrature points.
    pub fn project_scalar(&self, asm: &Assembler, f: &QuadField<f64>) -> Result<FEFunction> {
        let b = asm.load_values(&self.space, f);
        let mut coeffs = self.solve_mass(b)?;
        if self.space.constraint == Constraint::MeanZero {
            remove_mean(&self.space, asm, &mut coeffs);
        }
        Ok(FEFunction { space: self.space.clone(), coeffs })
    }

    /// Projection of a two-component field sampled at the quadrature points.
    pub fn project_vector(&self, asm: &Assembler, f: &QuadField<[f64; 2]>) -> Result<FEFunction> {
        let b = asm.load_vector(&self.space, f);
        let coeffs = self.solve_mass(b)?;
        Ok(FEFunction { space: self.space.clone(), coeffs })
    }
}

/// Subtracts the mean of a scalar function (constants are in every Lagrange space).
pub fn remove_mean(space: &FESpace, asm: &Assembler, coeffs: &mut [f64]) {
    let ones = QuadField::constant(space.mesh.n_triangles(), asm.quad.n_qp(), 1.0);
    let w = asm.load_values(space, &ones);
    let area: f64 = w.iter().sum();
    let mean = crate::math::dot(&w, coeffs) / area;
    coeffs.iter_mut().for_each(|c| *c -= mean);
}

/// One-off projection of scalar samples onto `space`.
pub fn l2_project(space: &Arc<FESpace>, asm: &Assembler, f: &QuadField<f64>, tol: f64) -> Result<FEFunction> {
    L2Projector::new(space, asm, tol)?.project_scalar(asm, f)
}
