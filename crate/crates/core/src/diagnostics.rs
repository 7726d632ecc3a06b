//! Energies, conserved quantities, identity residuals and error norms.
//!
//! Every function here is a pure function of states and step data.

use alloc::vec::Vec;

use crate::fespace::{eval_gradient, eval_scalar, eval_vector, eval_vector_gradient, QuadData, QuadField, QuadRule};
use crate::ieq::{Mode, Scheme};
use crate::math::{dot, sqrt};
use crate::stepper::{Discretization, SchemeConfig, State, StepAux};

/// One line of the run history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub time: f64,
    /// Modified energy of the active scheme (BDF2 uses the two-level form).
    pub energy: f64,
    /// Single-level quadratic energy shifted by `-lambda B |Omega|`, no pressure term.
    pub raw_energy: f64,
    /// `int |u|^2/2 + lambda |grad phi|^2/2 + lambda F(phi)`.
    pub original_energy: f64,
    pub mass: f64,
    /// Euclidean norm of the discrete divergence of the projected velocity.
    pub div_residual: f64,
    /// Relative residual of the discrete energy identity of the last step
    /// (NaN when forcing is active, 0 for the initial row).
    pub identity_residual: f64,
    pub mode: Mode,
}

pub const HISTORY_HEADER: [&str; 9] =
    ["step", "time", "energy", "raw_energy", "original_energy", "mass", "div_residual", "identity_residual", "mode"];

fn sq_scalar(d: &Discretization, a: &[f64]) -> f64 {
    d.mass.bilinear(a, a)
}

fn sq_grad(d: &Discretization, a: &[f64]) -> f64 {
    d.stiffness.bilinear(a, a)
}

fn sq_vec(d: &Discretization, a: &[f64]) -> f64 {
    let n = d.mass.nrows;
    sq_scalar(d, &a[..n]) + sq_scalar(d, &a[n..])
}

fn sq_vec_grad(d: &Discretization, a: &[f64]) -> f64 {
    let n = d.mass.nrows;
    sq_grad(d, &a[..n]) + sq_grad(d, &a[n..])
}

fn comb(a: &[f64], x: f64, b: &[f64], y: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| x * p + y * q).collect()
}

fn comb3(a: &[f64], x: f64, b: &[f64], y: f64, c: &[f64], z: f64) -> Vec<f64> {
    a.iter().zip(b).zip(c).map(|((p, q), r)| x * p + y * q + z * r).collect()
}

fn qcomb(a: &QuadField<f64>, x: f64, b: &QuadField<f64>, y: f64) -> QuadField<f64> {
    a.zip_map(b, |p, q| x * p + y * q)
}

/// Modified discrete energy of `s` for the configured scheme.
pub fn energy(d: &Discretization, cfg: &SchemeConfig, s: &State) -> f64 {
    let lam = cfg.params.lambda;
    let tau = cfg.tau;
    match cfg.scheme {
        Scheme::Bdf1 => {
            0.5 * sq_vec(d, &s.u.coeffs)
                + 0.5 * lam * sq_grad(d, &s.phi.coeffs)
                + lam * sq_scalar(d, &s.aux_h.coeffs)
                + 0.5 * tau * tau * sq_vec(d, &s.grad_p.coeffs)
        }
        Scheme::Bdf2 => {
            let (phi_p, u_p, aux_p) = match &s.prev {
                Some(l) => (&l.phi.coeffs, &l.u.coeffs, &l.aux_h.coeffs),
                None => (&s.phi.coeffs, &s.u.coeffs, &s.aux_h.coeffs),
            };
            let phi_s = comb(&s.phi.coeffs, 2.0, phi_p, -1.0);
            let u_s = comb(&s.u.coeffs, 2.0, u_p, -1.0);
            let aux_s = comb(&s.aux_h.coeffs, 2.0, aux_p, -1.0);
            0.5 * lam * (sq_grad(d, &s.phi.coeffs) + sq_grad(d, &phi_s))
                + lam * (sq_scalar(d, &s.aux_h.coeffs) + sq_scalar(d, &aux_s))
                + 0.5 * (sq_vec(d, &s.u.coeffs) + sq_vec(d, &u_s))
                + 2.0 * tau * tau / 3.0 * sq_vec(d, &s.grad_p.coeffs)
        }
    }
}

/// `1/2 ||u||^2 + lambda/2 ||grad phi||^2 + lambda ||U||^2 - lambda B |Omega|`.
pub fn raw_energy(d: &Discretization, cfg: &SchemeConfig, s: &State) -> f64 {
    let lam = cfg.params.lambda;
    0.5 * sq_vec(d, &s.u.coeffs) + 0.5 * lam * sq_grad(d, &s.phi.coeffs) + lam * sq_scalar(d, &s.aux_h.coeffs)
        - lam * cfg.params.shift * d.mesh.domain.area()
}

/// Energy of the continuous model evaluated on the discrete fields.
pub fn original_energy(d: &Discretization, cfg: &SchemeConfig, s: &State) -> f64 {
    let rule = &d.asm.quad.rule;
    let phi = eval_scalar(&s.phi, rule);
    let pot = phi.map(|p| cfg.params.potential(p));
    let lam = cfg.params.lambda;
    0.5 * sq_vec(d, &s.u.coeffs) + 0.5 * lam * sq_grad(d, &s.phi.coeffs) + lam * d.asm.quad.integrate(&pot)
}

/// `int phi dx`.
pub fn mass(d: &Discretization, s: &State) -> f64 {
    dot(&d.phase_integrals, &s.phi.coeffs)
}

/// `|| D u ||_2` for the projected velocity.
pub fn div_residual(d: &Discretization, s: &State) -> f64 {
    crate::math::norm2(&d.div.matvec(&s.u.coeffs))
}

/// Relative mismatch `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Squared norms entering the projection identity of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProjectionCheck {
    /// `||u_tilde||^2`.
    pub intermediate: f64,
    /// `||u||^2`.
    pub projected: f64,
    /// `c tau^2 ||grad psi||^2` with `c = 1` (BDF1) or `4/9` (BDF2).
    pub correction: f64,
}

impl ProjectionCheck {
    /// Relative residual of `||u_tilde||^2 = ||u||^2 + correction`.
    pub fn residual(&self) -> f64 {
        relative_gap(self.intermediate, self.projected + self.correction)
    }
}

pub(crate) fn projection_check(d: &Discretization, cfg: &SchemeConfig, u_tilde: &[f64], u: &[f64], g_psi: &[f64], scheme: Scheme) -> ProjectionCheck {
    let c = match scheme {
        Scheme::Bdf1 => 1.0,
        Scheme::Bdf2 => 4.0 / 9.0,
    };
    ProjectionCheck {
        intermediate: sq_vec(d, u_tilde),
        projected: sq_vec(d, u),
        correction: c * cfg.tau * cfg.tau * sq_vec(d, g_psi),
    }
}

/// Relative residual of the first order discrete energy identity between `prev` and `next`.
pub fn energy_identity_residual_bdf1(d: &Discretization, cfg: &SchemeConfig, prev: &State, next: &State, aux: &StepAux) -> f64 {
    let q = &d.asm.quad;
    let lam = cfg.params.lambda;
    let tau = cfg.tau;
    let u_hat = match &aux.u_hat {
        Some(u) => u,
        None => return f64::NAN,
    };
    let un_q = eval_vector(&prev.u, &q.rule);
    let ut_q = eval_vector(&next.u_tilde, &q.rule);
    let dphi = comb(&next.phi.coeffs, 1.0, &prev.phi.coeffs, -1.0);
    let lhs = 0.5 * sq_vec(d, &next.u.coeffs)
        + 0.5 * lam * sq_grad(d, &next.phi.coeffs)
        + lam * q.norm_sq(&aux.aux_new)
        + 0.5 * tau * tau * sq_vec(d, &next.grad_p.coeffs)
        + tau * cfg.params.gamma * sq_grad(d, &next.w.coeffs)
        + 0.5 * lam * sq_grad(d, &dphi)
        + lam * q.norm_sq(&qcomb(&aux.aux_new, 1.0, &aux.aux_base, -1.0))
        + 0.5 * q.norm_sq_vec(&u_hat.zip_map(&un_q, |a, b| [a[0] - b[0], a[1] - b[1]]))
        + 0.5 * q.norm_sq_vec(&ut_q.zip_map(u_hat, |a, b| [a[0] - b[0], a[1] - b[1]]))
        + tau * cfg.params.mu * sq_vec_grad(d, &next.u_tilde.coeffs);
    let rhs = 0.5 * sq_vec(d, &prev.u.coeffs)
        + 0.5 * lam * sq_grad(d, &prev.phi.coeffs)
        + lam * q.norm_sq(&aux.aux_base)
        + 0.5 * tau * tau * sq_vec(d, &prev.grad_p.coeffs);
    (lhs - rhs).abs() / rhs.abs().max(1.0)
}

/// Relative residual of the second order discrete energy identity.
///
/// Needs two history levels in `prev`. Exact only when every velocity level
/// involved is discretely divergence free.
pub fn energy_identity_residual_bdf2(d: &Discretization, cfg: &SchemeConfig, prev: &State, next: &State, aux: &StepAux) -> f64 {
    let Some(old) = prev.prev.as_deref() else { return f64::NAN };
    let Some(base_old) = aux.aux_base_prev.as_ref() else { return f64::NAN };
    let q = &d.asm.quad;
    let lam = cfg.params.lambda;
    let tau = cfg.tau;
    let c = 2.0 * tau * tau / 3.0;
    let (phi1, phi0, phim) = (&next.phi.coeffs, &prev.phi.coeffs, &old.phi.coeffs);
    let (u1, u0, um) = (&next.u.coeffs, &prev.u.coeffs, &old.u.coeffs);
    let (a1, a0, am) = (&aux.aux_new, &aux.aux_base, base_old);
    let lhs = 0.5 * lam * (sq_grad(d, phi1) + sq_grad(d, &comb(phi1, 2.0, phi0, -1.0)))
        + lam * (q.norm_sq(a1) + q.norm_sq(&qcomb(a1, 2.0, a0, -1.0)))
        + 0.5 * (sq_vec(d, u1) + sq_vec(d, &comb(u1, 2.0, u0, -1.0)))
        + c * sq_vec(d, &next.grad_p.coeffs)
        + 2.0 * tau * cfg.params.mu * sq_vec_grad(d, &next.u_tilde.coeffs)
        + 2.0 * tau * cfg.params.gamma * sq_grad(d, &next.w.coeffs)
        + 0.5 * lam * sq_grad(d, &comb3(phi1, 1.0, phi0, -2.0, phim, 1.0))
        + lam * q.norm_sq(&a1.zip_map(&qcomb(a0, 2.0, am, -1.0), |x, y| x - y))
        + 0.5 * sq_vec(d, &comb3(u1, 1.0, u0, -2.0, um, 1.0))
        + c * sq_vec(d, &aux.psi_gradient);
    let rhs = 0.5 * lam * (sq_grad(d, phi0) + sq_grad(d, &comb(phi0, 2.0, phim, -1.0)))
        + lam * (q.norm_sq(a0) + q.norm_sq(&qcomb(a0, 2.0, am, -1.0)))
        + 0.5 * (sq_vec(d, u0) + sq_vec(d, &comb(u0, 2.0, um, -1.0)))
        + c * sq_vec(d, &prev.grad_p.coeffs);
    (lhs - rhs).abs() / rhs.abs().max(1.0)
}

/// Exact solution used for error measurement.
pub trait ExactSolution {
    fn phi(&self, x: [f64; 2], t: f64) -> f64;
    fn grad_phi(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn u(&self, x: [f64; 2], t: f64) -> [f64; 2];
    /// `g[c][d] = d u_c / d x_d`.
    fn grad_u(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2];
}

/// L2 and H1-seminorm errors (not squared).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub l2_phi: f64,
    pub h1_phi: f64,
    pub l2_u: f64,
    pub h1_u: f64,
}

impl ErrorNorms {
    pub fn as_array(&self) -> [f64; 4] {
        [self.l2_phi, self.h1_phi, self.l2_u, self.h1_u]
    }

    pub const LABELS: [&'static str; 4] = ["L2(phi)", "H1(phi)", "L2(u)", "H1(u)"];
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Errors of `s` against `exact` at time `s.time`, using a degree 6 rule.
pub fn error_norms(d: &Discretization, s: &State, exact: &dyn ExactSolution) -> ErrorNorms {
    let rule = QuadRule::new(6).expect("degree 6 rule exists");
    let qd = QuadData::new(&d.mesh, rule.clone());
    let t = s.time;
    let phi = eval_scalar(&s.phi, &rule);
    let gphi = eval_gradient(&s.phi, &rule);
    let u = eval_vector(&s.u, &rule);
    let gu = eval_vector_gradient(&s.u, &rule);
    let (mut e0, mut e1, mut e2, mut e3) = (0.0, 0.0, 0.0, 0.0);
    for (k, &x) in qd.points.values.iter().enumerate() {
        let w = qd.weights.values[k];
        let dp = phi.values[k] - exact.phi(x, t);
        e0 += w * dp * dp;
        let eg = exact.grad_phi(x, t);
        let g = gphi.values[k];
        e1 += w * (sq(g[0] - eg[0]) + sq(g[1] - eg[1]));
        let eu = exact.u(x, t);
        let uv = u.values[k];
        e2 += w * (sq(uv[0] - eu[0]) + sq(uv[1] - eu[1]));
        let egu = exact.grad_u(x, t);
        let g = gu.values[k];
        for c in 0..2 {
            for dd in 0..2 {
                e3 += w * sq(g[c][dd] - egu[c][dd]);
            }
        }
    }
    ErrorNorms { l2_phi: sqrt(e0), h1_phi: sqrt(e1), l2_u: sqrt(e2), h1_u: sqrt(e3) }
}

/// Observed order `ln(e_coarse / e_fine) / ln(ratio)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, ratio: f64) -> f64 {
    crate::math::ln(e_coarse / e_fine) / crate::math::ln(ratio)
}

/// History row for `s`; `identity_residual` is supplied by the caller.
pub fn history_row(d: &Discretization, cfg: &SchemeConfig, s: &State, identity_residual: f64) -> HistoryRow {
    HistoryRow {
        step: s.step,
        time: s.time,
        energy: energy(d, cfg, s),
        raw_energy: raw_energy(d, cfg, s),
        original_energy: original_energy(d, cfg, s),
        mass: mass(d, s),
        div_residual: div_residual(d, s),
        identity_residual,
        mode: s.mode,
    }
}
