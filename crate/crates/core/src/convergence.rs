//! Mesh and time step refinement studies against an exact solution.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::diagnostics::{error_norms, observed_order, ErrorNorms};
use crate::error::{Error, Result};
use crate::ieq::{PhysParams, Scheme, Variant};
use crate::manufactured::Example;
use crate::mesh::{Mesh, Rect};
use crate::stepper::{start, Discretization, SchemeConfig};

/// One complete run: example, parameters and discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub example: Example,
    pub domain: Rect,
    pub params: PhysParams,
    pub scheme: Scheme,
    pub variant: Variant,
    pub nx: usize,
    pub ny: usize,
    pub tau: f64,
    pub t_end: f64,
    pub quad_degree: usize,
    pub threads: usize,
    pub solver_tol: f64,
}

impl RunSpec {
    /// The example's preset with the given scheme and variant.
    pub fn from_example(example: Example, scheme: Scheme, variant: Variant) -> RunSpec {
        let p = example.preset();
        RunSpec {
            example,
            domain: p.domain,
            params: p.params,
            scheme,
            variant,
            nx: p.nx,
            ny: p.ny,
            tau: p.tau,
            t_end: p.t_end,
            quad_degree: 5,
            threads: 1,
            solver_tol: 1e-11,
        }
    }

    /// Number of steps to reach `t_end` (rounded to the nearest integer).
    pub fn n_steps(&self) -> usize {
        libm::round(self.t_end / self.tau) as usize
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let mut cfg = SchemeConfig::new(self.scheme, self.variant, self.tau, self.params);
        cfg.solver_tol = self.solver_tol;
        cfg
    }

    pub fn discretization(&self) -> Result<Discretization> {
        let mesh = Mesh::structured_rect(self.domain, self.nx, self.ny)?;
        Discretization::new(mesh, self.quad_degree, self.threads, self.solver_tol)
    }
}

/// Runs `spec` to its final time and measures the error against the exact solution.
pub fn final_errors(spec: &RunSpec) -> Result<ErrorNorms> {
    let exact = spec
        .example
        .exact(&spec.params)
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no exact solution", spec.example.name())))?;
    let disc = Arc::new(spec.discretization()?);
    let phi0 = spec.example.initial_phase(&spec.params);
    let u0 = spec.example.initial_velocity();
    let mut sim = start(disc.clone(), spec.scheme_config(), spec.example.forcing(&spec.params), &*phi0, &*u0)?;
    for _ in 0..spec.n_steps() {
        sim.advance()?;
    }
    Ok(error_norms(&disc, sim.state(), &*exact))
}

/// One level of a refinement study. `size` is the mesh width or the time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub size: f64,
    pub errors: ErrorNorms,
    /// Observed orders against the previous (coarser) row.
    pub rates: Option<[f64; 4]>,
}

fn with_rates(levels: Vec<(f64, ErrorNorms)>) -> Vec<StudyRow> {
    let mut rows: Vec<StudyRow> = Vec::with_capacity(levels.len());
    for (i, &(size, errors)) in levels.iter().enumerate() {
        let rates = (i > 0).then(|| {
            let (prev_size, prev) = levels[i - 1];
            let (c, f) = (prev.as_array(), errors.as_array());
            core::array::from_fn(|k| observed_order(c[k], f[k], prev_size / size))
        });
        rows.push(StudyRow { size, errors, rates });
    }
    rows
}

/// Refines the mesh; `ny` follows `nx` in the proportion of `base`.
pub fn space_study(base: &RunSpec, nxs: &[usize], mut progress: impl FnMut(&StudyRow)) -> Result<Vec<StudyRow>> {
    let mut levels = Vec::new();
    for &nx in nxs {
        let ny = ((nx * base.ny + base.nx / 2) / base.nx).max(1);
        let spec = RunSpec { nx, ny, ..*base };
        let e = final_errors(&spec)?;
        levels.push((spec.domain.width() / nx as f64, e));
        if let Some(last) = with_rates(levels.clone()).last() {
            progress(last);
        }
    }
    Ok(with_rates(levels))
}

/// Refines the time step at fixed mesh and final time.
pub fn time_study(base: &RunSpec, taus: &[f64], mut progress: impl FnMut(&StudyRow)) -> Result<Vec<StudyRow>> {
    let mut levels = Vec::new();
    for &tau in taus {
        let spec = RunSpec { tau, ..*base };
        let e = final_errors(&spec)?;
        levels.push((tau, e));
        if let Some(last) = with_rates(levels.clone()).last() {
            progress(last);
        }
    }
    Ok(with_rates(levels))
}
