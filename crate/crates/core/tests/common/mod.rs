#![allow(dead_code)]

use std::sync::Arc;

use chns_core::fespace::{Constraint, Degree, FESpace};
use chns_core::ieq::{PhysParams, Scheme, Variant};
use chns_core::manufactured::Example;
use chns_core::mesh::{Mesh, Rect};
use chns_core::stepper::{start, Discretization, SchemeConfig, Simulation};

pub fn unit_square() -> Rect {
    Rect::new(0.0, 1.0, 0.0, 1.0)
}

pub fn mesh(domain: Rect, nx: usize, ny: usize) -> Arc<Mesh> {
    Arc::new(Mesh::structured_rect(domain, nx, ny).unwrap())
}

pub fn space(mesh: &Arc<Mesh>, degree: Degree, components: usize, constraint: Constraint) -> Arc<FESpace> {
    Arc::new(FESpace::new(mesh.clone(), degree, components, constraint))
}

pub fn discretization(domain: Rect, nx: usize, ny: usize) -> Arc<Discretization> {
    Arc::new(Discretization::new(Mesh::structured_rect(domain, nx, ny).unwrap(), 5, 1, 1e-11).unwrap())
}

/// Simulation of an example with optional overrides of the shift and time step.
pub fn example_sim(
    ex: Example,
    nx: usize,
    ny: usize,
    scheme: Scheme,
    variant: Variant,
    tau: Option<f64>,
    shift: Option<f64>,
) -> Simulation {
    let pre = ex.preset();
    let mut params = pre.params;
    if let Some(b) = shift {
        params.shift = b;
    }
    let disc = discretization(pre.domain, nx, ny);
    let cfg = SchemeConfig::new(scheme, variant, tau.unwrap_or(pre.tau), params);
    let phi0 = ex.initial_phase(&params);
    let u0 = ex.initial_velocity();
    start(disc, cfg, ex.forcing(&params), &*phi0, &*u0).unwrap()
}

/// Simulation from arbitrary smooth initial data, no forcing.
pub fn custom_sim(
    disc: Arc<Discretization>,
    scheme: Scheme,
    variant: Variant,
    tau: f64,
    params: PhysParams,
    phi0: &dyn Fn([f64; 2]) -> f64,
    u0: &dyn Fn([f64; 2]) -> [f64; 2],
) -> Simulation {
    start(disc, SchemeConfig::new(scheme, variant, tau, params), None, phi0, u0).unwrap()
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub const ALL_PAIRS: [(Scheme, Variant); 4] =
    [(Scheme::Bdf1, Variant::C), (Scheme::Bdf1, Variant::P), (Scheme::Bdf2, Variant::C), (Scheme::Bdf2, Variant::P)];
