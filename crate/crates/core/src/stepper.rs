//! Time stepping: phase-field block, momentum predictor and projection.
//!
//! A first order step solves the Cahn-Hilliard block (with the stabilized
//! explicit velocity eliminated), then the momentum predictor, then the
//! projection. A second order step solves phase field and predicted velocity
//! in one monolithic system before projecting. Both finish by updating the
//! auxiliary variable at quadrature points and, in projected mode, replacing
//! it by its L2 projection onto the phase space.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::{block_diag, Assembler};
use crate::diagnostics::{self, history_row, HistoryRow, ProjectionCheck};
use crate::error::{Error, Result};
use crate::fespace::{
    eval_gradient, eval_scalar, eval_vector, eval_vector_gradient, Constraint, Degree, FEFunction, FESpace, L2Projector,
    QuadData, QuadField, QuadRule,
};
use crate::ieq::{aux_update_bdf1, aux_update_bdf2, cp_controller, Mode, PhysParams, Scheme, SwitchAction, Variant};
use crate::linalg::{assemble_block, gmres, Factorization, MatrixKind, SolveReport, SparseMatrix, Symbolic};
use crate::math::dot;
use crate::mesh::Mesh;

/// Run configuration of the time integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub variant: Variant,
    pub tau: f64,
    pub params: PhysParams,
    /// Relative residual required from every linear solve.
    pub solver_tol: f64,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, variant: Variant, tau: f64, params: PhysParams) -> SchemeConfig {
        SchemeConfig { scheme, variant, tau, params, solver_tol: 1e-11 }
    }
}

/// Source terms of the phase equation and the momentum equation.
pub trait Forcing: Send + Sync {
    fn phase(&self, x: [f64; 2], t: f64) -> f64;
    fn momentum(&self, x: [f64; 2], t: f64) -> [f64; 2];
}

/// Spaces, quadrature and time-independent operators on one mesh.
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    /// Continuous P2, no constraint: phase field, chemical potential, auxiliary variable.
    pub phase: Arc<FESpace>,
    /// P2 velocity vanishing on the boundary (predicted velocity).
    pub velocity_bc: Arc<FESpace>,
    /// P2 velocity with vanishing normal component (projected velocity).
    pub velocity: Arc<FESpace>,
    /// P1 pressure with zero mean.
    pub pressure: Arc<FESpace>,
    pub asm: Assembler,
    /// Scalar P2 mass and stiffness matrices.
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    /// `-(div v, q)`, pressure rows by velocity columns.
    pub div: SparseMatrix,
    /// `int N_i` for the phase basis.
    pub phase_integrals: Vec<f64>,
    /// `int q_j` for the pressure basis.
    pub pressure_integrals: Vec<f64>,
    pub phase_projector: L2Projector,
    pub velocity_projector: L2Projector,
    pub solver_tol: f64,
}

impl Discretization {
    pub fn new(mesh: Mesh, quad_degree: usize, threads: usize, solver_tol: f64) -> Result<Discretization> {
        let mesh = Arc::new(mesh);
        let rule = QuadRule::new(quad_degree)?;
        let asm = Assembler::new(QuadData::new(&mesh, rule), threads);
        let phase = Arc::new(FESpace::new(mesh.clone(), Degree::P2, 1, Constraint::Free));
        let velocity_bc = Arc::new(FESpace::new(mesh.clone(), Degree::P2, 2, Constraint::Dirichlet));
        let velocity = Arc::new(FESpace::new(mesh.clone(), Degree::P2, 2, Constraint::NormalZero));
        let pressure = Arc::new(FESpace::new(mesh.clone(), Degree::P1, 1, Constraint::MeanZero));
        let mass = asm.mass_matrix(&phase);
        let stiffness = asm.stiffness_matrix(&phase, None);
        let div = asm.divergence_matrix(&velocity, &pressure);
        let ones = QuadField::constant(mesh.n_triangles(), asm.quad.n_qp(), 1.0);
        let phase_integrals = asm.load_values(&phase, &ones);
        let pressure_integrals = asm.load_values(&pressure, &ones);
        let phase_projector = L2Projector::new(&phase, &asm, solver_tol)?;
        let velocity_projector = L2Projector::new(&velocity, &asm, solver_tol)?;
        Ok(Discretization {
            mesh,
            phase,
            velocity_bc,
            velocity,
            pressure,
            asm,
            mass,
            stiffness,
            div,
            phase_integrals,
            pressure_integrals,
            phase_projector,
            velocity_projector,
            solver_tol,
        })
    }

    pub fn rule(&self) -> &QuadRule {
        &self.asm.quad.rule
    }

    /// Scalar nodes fixed by the no-slip condition.
    fn wall_nodes(&self) -> &[bool] {
        &self.velocity_bc.constrained()[..self.phase.n_nodes()]
    }

    /// Discrete gradient of a pressure function: the `L2` projection of `grad p` onto the velocity space.
    pub fn discrete_gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.velocity_projector.solve_mass(self.div.matvec_t(p))
    }
}

/// Fields of one earlier time level, kept for second order steps.
#[derive(Debug, Clone)]
pub struct Level {
    pub phi: FEFunction,
    pub u: FEFunction,
    pub aux_q: QuadField<f64>,
    pub aux_h: FEFunction,
}

/// Complete solution at one time level.
#[derive(Debug, Clone)]
pub struct State {
    pub step: usize,
    pub time: f64,
    pub phi: FEFunction,
    pub w: FEFunction,
    /// Predicted velocity of the last step.
    pub u_tilde: FEFunction,
    /// Projected velocity.
    pub u: FEFunction,
    pub p: FEFunction,
    /// Discrete gradient of `p` in the velocity space.
    pub grad_p: FEFunction,
    /// Auxiliary variable at quadrature points, as used by the next step.
    pub aux_q: QuadField<f64>,
    /// Auxiliary variable in the phase space: the projection of `aux_q`
    /// before switching, the authoritative value in projected mode.
    pub aux_h: FEFunction,
    pub mode: Mode,
    pub prev: Option<Box<Level>>,
}

impl State {
    /// Projects the initial data and builds the consistent chemical potential.
    pub fn initial(
        d: &Discretization,
        cfg: &SchemeConfig,
        phi0: &dyn Fn([f64; 2]) -> f64,
        u0: &dyn Fn([f64; 2]) -> [f64; 2],
    ) -> Result<State> {
        cfg.params.validate()?;
        let q = &d.asm.quad;
        let phi = d.phase_projector.project_scalar(&d.asm, &q.sample(phi0))?;
        let u = d.velocity_projector.project_vector(&d.asm, &q.sample(u0))?;
        let mut ut = u.coeffs.clone();
        d.velocity_bc.zero_constrained(&mut ut);
        let phi_q = eval_scalar(&phi, &q.rule);
        let init = cfg.params.init_aux(&phi_q)?;
        let mode = Mode::initial(cfg.variant);
        let (aux_q, aux_h) = represent_aux(d, init, mode.projects())?;
        let w = chemical_potential(d, cfg, &phi, &phi_q, &aux_q)?;
        Ok(State {
            step: 0,
            time: 0.0,
            phi,
            w,
            u_tilde: FEFunction::from_coeffs(&d.velocity_bc, ut),
            u,
            p: FEFunction::zeros(&d.pressure),
            grad_p: FEFunction::zeros(&d.velocity),
            aux_q,
            aux_h,
            mode,
            prev: None,
        })
    }

    fn level(&self) -> Level {
        Level { phi: self.phi.clone(), u: self.u.clone(), aux_q: self.aux_q.clone(), aux_h: self.aux_h.clone() }
    }

    /// Switches the auxiliary representation to projected mode at this level.
    fn convert_to_projected(&mut self, d: &Discretization) {
        self.aux_q = eval_scalar(&self.aux_h, d.rule());
        if let Some(l) = self.prev.as_mut() {
            l.aux_q = eval_scalar(&l.aux_h, d.rule());
        }
    }
}

/// Returns `(aux_q, aux_h)` for raw quadrature samples.
fn represent_aux(d: &Discretization, raw: QuadField<f64>, projected: bool) -> Result<(QuadField<f64>, FEFunction)> {
    let h = d.phase_projector.project_scalar(&d.asm, &raw)?;
    if projected {
        Ok((eval_scalar(&h, d.rule()), h))
    } else {
        Ok((raw, h))
    }
}

/// `w` solving `(w, psi) = lambda (grad phi, grad psi) + lambda (H(phi) U, psi)`.
fn chemical_potential(
    d: &Discretization,
    cfg: &SchemeConfig,
    phi: &FEFunction,
    phi_q: &QuadField<f64>,
    aux_q: &QuadField<f64>,
) -> Result<FEFunction> {
    let lam = cfg.params.lambda;
    let h = cfg.params.h_field(phi_q)?;
    let mut b = d.stiffness.matvec(&phi.coeffs);
    let hu = d.asm.load_values(&d.phase, &h.zip_map(aux_q, |a, b| a * b));
    for (x, y) in b.iter_mut().zip(&hu) {
        *x = lam * (*x + y);
    }
    let c = d.phase_projector.solve_mass(b)?;
    Ok(FEFunction::from_coeffs(&d.phase, c))
}

/// Quantities produced by a step that the identity checks need.
#[derive(Debug, Clone)]
pub struct StepAux {
    /// Auxiliary variable at quadrature points before the update (`U^n`).
    pub aux_base: QuadField<f64>,
    /// Same at the level before that, for second order steps.
    pub aux_base_prev: Option<QuadField<f64>>,
    /// Updated auxiliary variable before any projection.
    pub aux_new: QuadField<f64>,
    /// Stabilized explicit velocity of a first order step.
    pub u_hat: Option<QuadField<[f64; 2]>>,
    /// Discrete gradient of the pressure increment.
    pub psi_gradient: Vec<f64>,
    pub projection: ProjectionCheck,
    pub scheme: Scheme,
    pub solves: Vec<SolveReport>,
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub row: HistoryRow,
    pub aux: StepAux,
    /// Set on the step where a CP run switched to projected mode.
    pub switched: bool,
}

#[derive(Default)]
struct Caches {
    ch: Option<Symbolic>,
    momentum: Option<Symbolic>,
    monolithic: Option<Symbolic>,
    /// Set once the preconditioned Krylov solve has failed to converge; later steps go direct.
    krylov_failed: bool,
    darcy: Vec<(u64, Factorization)>,
}

/// Drives a run: holds the current state and the reusable factorizations.
pub struct Simulation {
    disc: Arc<Discretization>,
    cfg: SchemeConfig,
    forcing: Option<Arc<dyn Forcing>>,
    state: State,
    caches: Caches,
    switch_step: Option<usize>,
}

impl Simulation {
    pub fn new(disc: Arc<Discretization>, cfg: SchemeConfig, forcing: Option<Arc<dyn Forcing>>, state: State) -> Result<Simulation> {
        cfg.params.validate()?;
        if !(cfg.tau > 0.0 && cfg.tau.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("time step must be positive, got {}", cfg.tau)));
        }
        Ok(Simulation { disc, cfg, forcing, state, caches: Caches::default(), switch_step: None })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    /// Step index `n` such that the step from `n` to `n + 1` was retaken in projected mode.
    pub fn switch_step(&self) -> Option<usize> {
        self.switch_step
    }

    pub fn initial_row(&self) -> HistoryRow {
        history_row(&self.disc, &self.cfg, &self.state, 0.0)
    }

    /// Advances one step, applying the CP switching rule when active.
    pub fn advance(&mut self) -> Result<StepOutcome> {
        let mode = self.state.mode;
        let (mut next, mut aux) = self.step_from(&self.state.clone(), mode)?;
        let mut switched = false;
        if mode == Mode::CpBeforeSwitch {
            let e_old = diagnostics::energy(&self.disc, &self.cfg, &self.state);
            let e_new = diagnostics::energy(&self.disc, &self.cfg, &next);
            let (new_mode, action) = cp_controller(e_old, e_new, mode);
            if action == SwitchAction::SwitchAndRetake {
                let mut from = self.state.clone();
                from.mode = new_mode;
                from.convert_to_projected(&self.disc);
                let (n2, a2) = self.step_from(&from, new_mode)?;
                next = n2;
                aux = a2;
                self.switch_step = Some(self.state.step);
                switched = true;
            }
        }
        let identity = if self.forcing.is_some() {
            f64::NAN
        } else {
            match aux.scheme {
                Scheme::Bdf1 => diagnostics::energy_identity_residual_bdf1(&self.disc, &self.cfg, &self.state, &next, &aux),
                Scheme::Bdf2 => diagnostics::energy_identity_residual_bdf2(&self.disc, &self.cfg, &self.state, &next, &aux),
            }
        };
        let row = history_row(&self.disc, &self.cfg, &next, identity);
        self.state = next;
        Ok(StepOutcome { row, aux, switched })
    }

    /// Runs `n_steps` steps, calling `on_step` after each; returns the history including the initial row.
    pub fn run(&mut self, n_steps: usize, mut on_step: impl FnMut(&State, &StepOutcome)) -> Result<Vec<HistoryRow>> {
        let mut rows = Vec::with_capacity(n_steps + 1);
        rows.push(self.initial_row());
        for _ in 0..n_steps {
            let out = self.advance()?;
            on_step(&self.state, &out);
            rows.push(out.row);
        }
        Ok(rows)
    }

    /// One step from `s` in `mode`, without the CP rule.
    pub fn step_from(&mut self, s: &State, mode: Mode) -> Result<(State, StepAux)> {
        match (self.cfg.scheme, s.prev.is_some()) {
            (Scheme::Bdf2, true) => self.step_bdf2(s, mode),
            (Scheme::Bdf2, false) => {
                let (mut n, a) = self.step_bdf1(s, mode)?;
                n.prev = Some(Box::new(s.level()));
                Ok((n, a))
            }
            (Scheme::Bdf1, _) => self.step_bdf1(s, mode),
        }
    }

    fn forcing_fields(&self, t: f64) -> Option<(QuadField<f64>, QuadField<[f64; 2]>)> {
        self.forcing.as_ref().map(|f| {
            let q = &self.disc.asm.quad;
            (q.sample(|x| f.phase(x, t)), q.sample(|x| f.momentum(x, t)))
        })
    }

    fn factor_cached(&mut self, a: &SparseMatrix, which: CacheSlot) -> Result<Factorization> {
        let slot = match which {
            CacheSlot::Ch => &mut self.caches.ch,
            CacheSlot::Momentum => &mut self.caches.momentum,
            CacheSlot::Monolithic => &mut self.caches.monolithic,
        };
        match slot {
            Some(sym) => Factorization::with_symbolic(a, MatrixKind::General, sym),
            None => {
                let f = Factorization::new(a, MatrixKind::General)?;
                *slot = Some(f.symbolic().clone());
                Ok(f)
            }
        }
    }

    fn solve_cached(&mut self, a: &SparseMatrix, b: &[f64], which: CacheSlot) -> Result<(Vec<f64>, SolveReport)> {
        self.factor_cached(a, which)?.solve(b, self.cfg.solver_tol)
    }

    fn step_bdf1(&mut self, s: &State, mode: Mode) -> Result<(State, StepAux)> {
        let disc = self.disc.clone();
        let d = &*disc;
        let p = self.cfg.params;
        let tau = self.cfg.tau;
        let rule = d.rule();
        let n = d.phase.n_nodes();
        let t_new = s.time + tau;
        let forcing = self.forcing_fields(t_new);
        let mut solves = Vec::new();

        let phi_q = eval_scalar(&s.phi, rule);
        let h = p.h_field(&phi_q)?;
        let u_q = eval_vector(&s.u, rule);

        // phase-field block in (phi, w)
        let k_phi2 = d.asm.stiffness_matrix(&d.phase, Some(&phi_q.map(|v| v * v)));
        let m_h2 = d.asm.weighted_mass(&d.phase, &h.map(|v| v * v));
        let a11 = d.mass.scaled(1.0 / tau);
        let a12 = SparseMatrix::lin_comb(&[(p.gamma, &d.stiffness), (tau, &k_phi2)]);
        let a21 = SparseMatrix::lin_comb(&[(-p.lambda, &d.stiffness), (-0.5 * p.lambda, &m_h2)]);
        let a = assemble_block(&[vec![Some(&a11), Some(&a12)], vec![Some(&a21), Some(&d.mass)]], &[n, n], &[n, n], None);
        let mut rhs = d.mass.matvec(&s.phi.coeffs);
        rhs.iter_mut().for_each(|v| *v /= tau);
        add(&mut rhs, &d.asm.load_gradients(&d.phase, &u_q.zip_map(&phi_q, |u, f| [u[0] * f, u[1] * f])));
        if let Some((g, _)) = &forcing {
            add(&mut rhs, &d.asm.load_values(&d.phase, g));
        }
        let lam = p.lambda;
        let r2 = h.zip_map(&s.aux_q, |hv, b| lam * hv * b).zip_map(&h.zip_map(&phi_q, |hv, f| hv * hv * f), |x, y| x - 0.5 * lam * y);
        rhs.extend(d.asm.load_values(&d.phase, &r2));
        let (x, rep) = self.solve_cached(&a, &rhs, CacheSlot::Ch)?;
        solves.push(rep);
        let phi_new = FEFunction::from_coeffs(&d.phase, x[..n].to_vec());
        let w_new = FEFunction::from_coeffs(&d.phase, x[n..].to_vec());
        let phi_new_q = eval_scalar(&phi_new, rule);
        let aux_new = aux_update_bdf1(&s.aux_q, &h, &phi_new_q, &phi_q);

        // momentum predictor, one scalar operator for both components
        let grad_w = eval_gradient(&w_new, rule);
        let gu = eval_vector_gradient(&s.u, rule);
        let div_u = gu.map(|g| g[0][0] + g[1][1]);
        let conv = d.asm.convection_matrix(&d.phase, &u_q, &div_u);
        let am = SparseMatrix::lin_comb(&[(1.0 / tau, &d.mass), (p.mu, &d.stiffness), (1.0, &conv)]).with_dirichlet(d.wall_nodes());
        let p_q = eval_scalar(&s.p, rule);
        let u_hat = u_q.zip_map(&phi_q.zip_map(&grad_w, |f, g| [f * g[0], f * g[1]]), |u, c| [u[0] - tau * c[0], u[1] - tau * c[1]]);
        let mut ut = Vec::with_capacity(2 * n);
        for c in 0..2 {
            let mut b = d.mass.matvec(s.u.component(c));
            b.iter_mut().for_each(|v| *v /= tau);
            add(&mut b, &d.asm.load_gradients(&d.phase, &p_q.map(|pv| if c == 0 { [pv, 0.0] } else { [0.0, pv] })));
            add(&mut b, &d.asm.load_values(&d.phase, &phi_q.zip_map(&grad_w, |f, g| -f * g[c])));
            if let Some((_, hf)) = &forcing {
                add(&mut b, &d.asm.load_values(&d.phase, &hf.map(|v| v[c])));
            }
            for (bi, &fixed) in b.iter_mut().zip(d.wall_nodes()) {
                if fixed {
                    *bi = 0.0;
                }
            }
            let (xc, rep) = self.solve_cached(&am, &b, CacheSlot::Momentum)?;
            solves.push(rep);
            ut.extend(xc);
        }
        let u_tilde = FEFunction::from_coeffs(&d.velocity_bc, ut);

        let (next, psi_grad, check, rep) = self.project_and_finish(s, mode, t_new, phi_new, w_new, u_tilde, aux_new.clone(), 1.0 / tau, Scheme::Bdf1)?;
        solves.push(rep);
        let aux = StepAux {
            aux_base: s.aux_q.clone(),
            aux_base_prev: None,
            aux_new,
            u_hat: Some(u_hat),
            psi_gradient: psi_grad,
            projection: check,
            scheme: Scheme::Bdf1,
            solves,
        };
        Ok((next, aux))
    }

    fn step_bdf2(&mut self, s: &State, mode: Mode) -> Result<(State, StepAux)> {
        let disc = self.disc.clone();
        let d = &*disc;
        let prev = s.prev.as_deref().ok_or(Error::MissingHistory)?;
        let p = self.cfg.params;
        let tau = self.cfg.tau;
        let rule = d.rule();
        let n = d.phase.n_nodes();
        let t_new = s.time + tau;
        let forcing = self.forcing_fields(t_new);
        let mut solves = Vec::new();

        let phi_star = s.phi.lin_comb(2.0, &prev.phi, -1.0);
        let u_star = s.u.lin_comb(2.0, &prev.u, -1.0);
        let phi_star_q = eval_scalar(&phi_star, rule);
        let phi_n_q = eval_scalar(&s.phi, rule);
        let phi_m_q = eval_scalar(&prev.phi, rule);
        let h = p.h_field(&phi_star_q)?;
        let u_star_q = eval_vector(&u_star, rule);
        let gus = eval_vector_gradient(&u_star, rule);
        let div_us = gus.map(|g| g[0][0] + g[1][1]);
        let aux_bar = s.aux_q.zip_map(&prev.aux_q, |a, b| (4.0 * a - b) / 3.0);

        let c0 = 1.5 / tau;
        let a_phi = d.mass.scaled(c0);
        let a_pw = d.stiffness.scaled(p.gamma);
        let e = [d.asm.directional_matrix(&d.phase, &phi_star_q, 0), d.asm.directional_matrix(&d.phase, &phi_star_q, 1)];
        let c = [e[0].transpose().scaled(-1.0), e[1].transpose().scaled(-1.0)];
        let m_h2 = d.asm.weighted_mass(&d.phase, &h.map(|v| v * v));
        let a_wp = SparseMatrix::lin_comb(&[(-p.lambda, &d.stiffness), (-0.5 * p.lambda, &m_h2)]);
        let conv = d.asm.convection_matrix(&d.phase, &u_star_q, &div_us);
        let a_u = SparseMatrix::lin_comb(&[(c0, &d.mass), (p.mu, &d.stiffness), (1.0, &conv)]);
        let a = assemble_block(
            &[
                vec![Some(&a_phi), Some(&a_pw), Some(&c[0]), Some(&c[1])],
                vec![Some(&a_wp), Some(&d.mass), None, None],
                vec![None, Some(&e[0]), Some(&a_u), None],
                vec![None, Some(&e[1]), None, Some(&a_u)],
            ],
            &[n; 4],
            &[n; 4],
            None,
        );
        let mut fixed = vec![false; 2 * n];
        fixed.extend_from_slice(d.velocity_bc.constrained());
        let a = a.with_dirichlet(&fixed);

        let lam = p.lambda;
        let mut rhs = d.mass.matvec(&comb(&s.phi.coeffs, 4.0, &prev.phi.coeffs, -1.0));
        rhs.iter_mut().for_each(|v| *v /= 2.0 * tau);
        if let Some((g, _)) = &forcing {
            add(&mut rhs, &d.asm.load_values(&d.phase, g));
        }
        let phi_bar = phi_n_q.zip_map(&phi_m_q, |a, b| (4.0 * a - b) / 3.0);
        let r2 = h.zip_map(&aux_bar, |hv, b| lam * hv * b).zip_map(&h.zip_map(&phi_bar, |hv, f| hv * hv * f), |x, y| x - 0.5 * lam * y);
        rhs.extend(d.asm.load_values(&d.phase, &r2));
        let p_q = eval_scalar(&s.p, rule);
        for cmp in 0..2 {
            let mut b = d.mass.matvec(&comb(s.u.component(cmp), 4.0, prev.u.component(cmp), -1.0));
            b.iter_mut().for_each(|v| *v /= 2.0 * tau);
            add(&mut b, &d.asm.load_gradients(&d.phase, &p_q.map(|pv| if cmp == 0 { [pv, 0.0] } else { [0.0, pv] })));
            if let Some((_, hf)) = &forcing {
                add(&mut b, &d.asm.load_values(&d.phase, &hf.map(|v| v[cmp])));
            }
            rhs.extend(b);
        }
        for (bi, &f) in rhs.iter_mut().zip(&fixed) {
            if f {
                *bi = 0.0;
            }
        }
        let mut krylov = None;
        if !self.caches.krylov_failed {
            krylov = self.krylov_bdf2(&a, &rhs, [&a_phi, &a_pw, &a_wp, &a_u], &e)?;
            self.caches.krylov_failed = krylov.is_none();
        }
        let (x, rep) = match krylov {
            Some(sol) => sol,
            None => self.solve_cached(&a, &rhs, CacheSlot::Monolithic)?,
        };
        solves.push(rep);
        let phi_new = FEFunction::from_coeffs(&d.phase, x[..n].to_vec());
        let w_new = FEFunction::from_coeffs(&d.phase, x[n..2 * n].to_vec());
        let u_tilde = FEFunction::from_coeffs(&d.velocity_bc, x[2 * n..].to_vec());
        let phi_new_q = eval_scalar(&phi_new, rule);
        let aux_new = aux_update_bdf2(&s.aux_q, &prev.aux_q, &h, &phi_new_q, &phi_n_q, &phi_m_q);

        let (mut next, psi_grad, check, rep) = self.project_and_finish(s, mode, t_new, phi_new, w_new, u_tilde, aux_new.clone(), c0, Scheme::Bdf2)?;
        solves.push(rep);
        next.prev = Some(Box::new(s.level()));
        let aux = StepAux {
            aux_base: s.aux_q.clone(),
            aux_base_prev: Some(prev.aux_q.clone()),
            aux_new,
            u_hat: None,
            psi_gradient: psi_grad,
            projection: check,
            scheme: Scheme::Bdf2,
            solves,
        };
        Ok((next, aux))
    }

    /// GMRES for the coupled BDF2 system, preconditioned by the phase-field block and the velocity block.
    /// `None` when it does not converge quickly.
    fn krylov_bdf2(
        &mut self,
        a: &SparseMatrix,
        rhs: &[f64],
        [a_phi, a_pw, a_wp, a_u]: [&SparseMatrix; 4],
        e: &[SparseMatrix; 2],
    ) -> Result<Option<(Vec<f64>, SolveReport)>> {
        let d = self.disc.clone();
        let n = d.phase.n_nodes();
        let ch = assemble_block(&[vec![Some(a_phi), Some(a_pw)], vec![Some(a_wp), Some(&d.mass)]], &[n, n], &[n, n], None);
        let ch = self.factor_cached(&ch, CacheSlot::Ch)?;
        let vel = self.factor_cached(&a_u.with_dirichlet(d.wall_nodes()), CacheSlot::Momentum)?;
        let wall = d.wall_nodes();
        let mut precond = |r: &[f64]| {
            let mut z = r.to_vec();
            ch.apply_inverse(&mut z[..2 * n]);
            for (k, ek) in e.iter().enumerate() {
                let ew = ek.matvec(&z[n..2 * n]);
                let blk = &mut z[(2 + k) * n..(3 + k) * n];
                for ((zi, ewi), &f) in blk.iter_mut().zip(&ew).zip(wall) {
                    *zi = if f { 0.0 } else { *zi - ewi };
                }
                vel.apply_inverse(blk);
            }
            z
        };
        let tol = self.cfg.solver_tol * KRYLOV_MARGIN;
        Ok(gmres(a, rhs, &mut precond, tol, KRYLOV_MAX_ITER, KRYLOV_MAX_ITER).ok())
    }

    /// Projection step, pressure update and auxiliary variable bookkeeping.
    #[allow(clippy::too_many_arguments)]
    fn project_and_finish(
        &mut self,
        s: &State,
        mode: Mode,
        t_new: f64,
        phi: FEFunction,
        w: FEFunction,
        u_tilde: FEFunction,
        aux_new: QuadField<f64>,
        factor: f64,
        scheme: Scheme,
    ) -> Result<(State, Vec<f64>, ProjectionCheck, SolveReport)> {
        let d = self.disc.clone();
        let (u, psi, rep) = self.darcy_projection(&u_tilde.coeffs, factor)?;
        let g_psi = d.discrete_gradient(&psi)?;
        let check = diagnostics::projection_check(&d, &self.cfg, &u_tilde.coeffs, &u, &g_psi, scheme);
        let p_new: Vec<f64> = s.p.coeffs.iter().zip(&psi).map(|(a, b)| a + b).collect();
        let g_new: Vec<f64> = s.grad_p.coeffs.iter().zip(&g_psi).map(|(a, b)| a + b).collect();
        let (aux_q, aux_h) = represent_aux(&d, aux_new, mode.projects())?;
        let next = State {
            step: s.step + 1,
            time: t_new,
            phi,
            w,
            u_tilde,
            u: FEFunction::from_coeffs(&d.velocity, u),
            p: FEFunction::from_coeffs(&d.pressure, p_new),
            grad_p: FEFunction::from_coeffs(&d.velocity, g_new),
            aux_q,
            aux_h,
            mode,
            prev: None,
        };
        Ok((next, g_psi, check, rep))
    }

    /// Solves `factor (u - u_tilde) + grad psi = 0`, `div u = 0`, `u . n = 0`, `int psi = 0`.
    /// Returns `(u, psi, report)`.
    pub fn darcy_projection(&mut self, u_tilde: &[f64], factor: f64) -> Result<(Vec<f64>, Vec<f64>, SolveReport)> {
        let d = self.disc.clone();
        let nv = d.velocity.n_dofs();
        let np = d.pressure.n_nodes();
        let key = factor.to_bits();
        if !self.caches.darcy.iter().any(|(k, _)| *k == key) {
            let mv = block_diag(&d.mass).scaled(factor);
            let dt = d.div.transpose();
            let a = assemble_block(&[vec![Some(&mv), Some(&dt)], vec![Some(&d.div), None]], &[nv, np], &[nv, np], None);
            // constants are in the kernel of D^T on V_h: pin one pressure dof, fix the mean afterwards
            let mut fixed = d.velocity.constrained().to_vec();
            fixed.resize(nv + np, false);
            fixed[nv] = true;
            let f = Factorization::new(&a.with_dirichlet(&fixed), MatrixKind::General)?;
            self.caches.darcy.push((key, f));
        }
        let f = &self.caches.darcy.iter().find(|(k, _)| *k == key).expect("inserted above").1;
        let n = d.phase.n_nodes();
        let mut rhs = Vec::with_capacity(nv + np + 1);
        for c in 0..2 {
            rhs.extend(d.mass.matvec(&u_tilde[c * n..(c + 1) * n]).into_iter().map(|v| factor * v));
        }
        d.velocity.zero_constrained(&mut rhs);
        rhs.resize(nv + np, 0.0);
        let (x, rep) = f.solve(&rhs, self.cfg.solver_tol)?;
        let mut psi = x[nv..].to_vec();
        let area: f64 = d.pressure_integrals.iter().sum();
        let mean = dot(&d.pressure_integrals, &psi) / area;
        psi.iter_mut().for_each(|v| *v -= mean);
        Ok((x[..nv].to_vec(), psi, rep))
    }
}

/// The Krylov solve targets this fraction of the solver tolerance, so mass drift stays below it over long runs.
const KRYLOV_MARGIN: f64 = 1e-3;
const KRYLOV_MAX_ITER: usize = 40;

#[derive(Clone, Copy)]
enum CacheSlot {
    Ch,
    Momentum,
    Monolithic,
}

fn add(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn comb(a: &[f64], x: f64, b: &[f64], y: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| x * p + y * q).collect()
}

/// Builds the simulation for `cfg` from initial data on `disc`.
pub fn start(
    disc: Arc<Discretization>,
    cfg: SchemeConfig,
    forcing: Option<Arc<dyn Forcing>>,
    phi0: &dyn Fn([f64; 2]) -> f64,
    u0: &dyn Fn([f64; 2]) -> [f64; 2],
) -> Result<Simulation> {
    let s = State::initial(&disc, &cfg, phi0, u0)?;
    Simulation::new(disc, cfg, forcing, s)
}
